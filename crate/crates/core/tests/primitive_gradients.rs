//! Every primitive's backward pass against central finite differences.

use geml_core::numcore::{
    grad_check, lstm_step, GradCheckOptions, Gradients, LstmParams, ParamId, ParamStore, Stencil, Tape, Tensor, Var,
};
use geml_core::{rng, Result};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-6;

struct Case {
    store: ParamStore,
    ids: Vec<ParamId>,
}

impl Case {
    fn new(shapes: &[Vec<usize>], r: &mut impl Rng, positive: bool) -> Self {
        let mut store = ParamStore::new();
        let ids = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut t = Tensor::uniform(s, 1.0, r);
                if positive {
                    t.data_mut().iter_mut().for_each(|v| *v = v.abs() + 0.2);
                }
                store.insert(format!("p{i}"), t).unwrap()
            })
            .collect();
        Self { store, ids }
    }

    /// Checks `sum(w ⊙ f(params))` for a fixed random projection `w`.
    fn check(&self, seed: u64, f: impl Fn(&mut Tape<'_>, &[Var]) -> Result<Var>) -> f64 {
        let ids = self.ids.clone();
        let objective = |s: &ParamStore| -> Result<(f64, Gradients)> {
            let mut t = Tape::new(s);
            let vars: Vec<Var> = ids.iter().map(|&id| t.param(id)).collect();
            let out = f(&mut t, &vars)?;
            let shape = t.value(out).shape().to_vec();
            let w = Tensor::uniform(&shape, 1.0, &mut rng::stream(seed, "projection"));
            let w = t.input(w);
            let p = t.mul(out, w)?;
            let l = t.sum(p)?;
            Ok((t.scalar(l), t.backward(l)?))
        };
        let report = grad_check(
            &objective,
            &self.store,
            &GradCheckOptions {
                tolerance: TOL,
                ..Default::default()
            },
        )
        .expect("grad check runs");
        assert!(report.pass, "{report:#?}");
        report.max_rel_err()
    }
}

fn dims(r: &mut impl Rng) -> (usize, usize, usize) {
    (r.gen_range(1..5), r.gen_range(1..5), r.gen_range(1..5))
}

fn check_all(seed: u64) {
    let r = &mut rng::stream(seed, "shapes");
    let (m, k, n) = dims(r);

    Case::new(&[vec![m, k], vec![k, n]], r, false).check(seed, |t, v| t.matmul(v[0], v[1]));
    Case::new(&[vec![m, k], vec![k]], r, false).check(seed, |t, v| t.matmul(v[0], v[1]));
    Case::new(&[vec![k], vec![k, n]], r, false).check(seed, |t, v| t.matmul(v[0], v[1]));
    Case::new(&[vec![m, n]], r, false).check(seed, |t, v| t.transpose(v[0]));
    Case::new(&[vec![m, n], vec![m, n]], r, false).check(seed, |t, v| t.add(v[0], v[1]));
    Case::new(&[vec![m, n], vec![n]], r, false).check(seed, |t, v| t.add_bias(v[0], v[1]));
    Case::new(&[vec![m, n], vec![1]], r, false).check(seed, |t, v| t.add_bias(v[0], v[1]));
    Case::new(&[vec![m], vec![n]], r, false).check(seed, |t, v| t.outer_add(v[0], v[1]));
    Case::new(&[vec![m, n], vec![m, n]], r, false).check(seed, |t, v| t.mul(v[0], v[1]));
    Case::new(&[vec![m, n]], r, false).check(seed, |t, v| t.scale(v[0], -1.7));
    Case::new(&[vec![m], vec![n], vec![k]], r, false).check(seed, |t, v| t.concat(v));
    Case::new(&[vec![m + n]], r, false).check(seed, |t, v| t.slice(v[0], m, n));
    Case::new(&[vec![n], vec![n], vec![n]], r, false).check(seed, |t, v| t.stack_rows(v));
    Case::new(&[vec![m, n], vec![k, n]], r, false).check(seed, |t, v| t.concat_rows(v[0], v[1]));
    Case::new(&[vec![m, n]], r, false).check(seed, |t, v| {
        let a = t.row(v[0], m - 1)?;
        let b = t.row(v[0], 0)?;
        t.add(a, b)
    });
    Case::new(&[vec![m, n]], r, false).check(seed, |t, v| t.sigmoid(v[0]));
    Case::new(&[vec![m, n]], r, false).check(seed, |t, v| t.tanh(v[0]));
    Case::new(&[vec![m, n]], r, true).check(seed, |t, v| t.log(v[0]));
    Case::new(&[vec![m, n]], r, false).check(seed, |t, v| t.softmax(v[0], None));
    let mask: Vec<bool> = (0..m * n).map(|i| i % n == 0 || r.gen_bool(0.6)).collect();
    Case::new(&[vec![m, n]], r, false).check(seed, |t, v| t.softmax(v[0], Some(&mask)));
    Case::new(&[vec![n]], r, false).check(seed, |t, v| t.softmax(v[0], None));
    Case::new(&[vec![m, n]], r, false).check(seed, |t, v| t.sum(v[0]));
    Case::new(&[vec![m, n]], r, false).check(seed, |t, v| t.mean(v[0]));
    Case::new(&[vec![n]], r, false).check(seed, |t, v| t.pick(v[0], n - 1));
    let targets: Vec<Option<usize>> = (0..m)
        .map(|_| if r.gen_bool(0.8) { Some(r.gen_range(0..k)) } else { None })
        .collect();
    Case::new(&[vec![m]], r, false).check(seed, |t, v| t.scatter_add(v[0], &targets, k));
    Case::new(&[vec![1], vec![n], vec![n]], r, false).check(seed, |t, v| {
        let g = t.sigmoid(v[0])?;
        t.mix(g, v[1], v[2])
    });
    let labels: Vec<f64> = (0..n).map(|_| if r.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
    Case::new(&[vec![n]], r, false).check(seed, |t, v| t.bce_with_logits(v[0], &labels));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn primitives_match_finite_differences(seed in any::<u64>()) {
        check_all(seed);
    }
}

#[test]
fn lstm_sequence_matches_finite_differences() {
    for seed in 0..5 {
        let mut store = ParamStore::new();
        let r = &mut rng::stream(seed, "lstm");
        let p = LstmParams::register(&mut store, "cell", 3, 4, 1.0, r).unwrap();
        let inputs: Vec<Tensor> = (0..5).map(|_| Tensor::uniform(&[3], 2.0, r)).collect();
        let w = Tensor::uniform(&[4], 1.0, r);
        let objective = |s: &ParamStore| -> Result<(f64, Gradients)> {
            let mut t = Tape::new(s);
            let mut h = t.input(Tensor::zeros(&[4]));
            let mut c = t.input(Tensor::zeros(&[4]));
            for x in &inputs {
                let x = t.input(x.clone());
                (h, c) = lstm_step(&mut t, &p, x, h, c)?;
            }
            let wv = t.input(w.clone());
            let prod = t.mul(h, wv)?;
            let l = t.sum(prod)?;
            Ok((t.scalar(l), t.backward(l)?))
        };
        // Some recurrent-weight coordinates have gradients near 1e-6, where a
        // three-point difference is dominated by roundoff; use the
        // fourth-order stencil.
        let opts = GradCheckOptions {
            tolerance: TOL,
            step: 1e-3,
            stencil: Stencil::FivePoint,
            ..Default::default()
        };
        let report = grad_check(&objective, &store, &opts).unwrap();
        assert!(report.pass, "{report:#?}");
    }
}

#[test]
fn masked_softmax_rows_sum_to_one() {
    let store = ParamStore::new();
    for seed in 0..200 {
        let r = &mut rng::stream(seed, "softmax");
        let (m, n) = (r.gen_range(1..6), r.gen_range(1..9));
        let mask: Vec<bool> = (0..m * n).map(|i| i % n == n - 1 || r.gen_bool(0.5)).collect();
        let mut t = Tape::new(&store);
        let x = t.input(Tensor::uniform(&[m, n], 30.0, r));
        let y = t.softmax(x, Some(&mask)).unwrap();
        let v = t.value(y);
        for row in 0..m {
            let s: f64 = v.row(row).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            for j in 0..n {
                if !mask[row * n + j] {
                    assert_eq!(v.row(row)[j], 0.0);
                }
            }
        }
    }
}
