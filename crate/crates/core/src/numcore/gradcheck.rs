use rand::seq::index::sample;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

use super::{Gradients, ParamStore};

/// A deterministic scalar function of the parameters with analytic gradients.
pub trait Objective {
    fn loss_and_grad(&self, store: &ParamStore) -> Result<(f64, Gradients)>;

    /// Loss only; defaults to discarding the gradient.
    fn loss(&self, store: &ParamStore) -> Result<f64> {
        Ok(self.loss_and_grad(store)?.0)
    }
}

impl<F> Objective for F
where
    F: Fn(&ParamStore) -> Result<(f64, Gradients)>,
{
    fn loss_and_grad(&self, store: &ParamStore) -> Result<(f64, Gradients)> {
        self(store)
    }
}

/// Symmetric difference formula used for the numeric derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(x+h) − f(x−h)) / 2h`.
    ThreePoint,
    /// `(−f(x+2h) + 8f(x+h) − 8f(x−h) + f(x−2h)) / 12h`, fourth order.
    FivePoint,
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step `h`.
    pub step: f64,
    pub stencil: Stencil,
    pub tolerance: f64,
    /// Tensors up to this many elements are checked exhaustively.
    pub exhaustive_limit: usize,
    /// Coordinates sampled from larger tensors (at least 25).
    pub sample: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            stencil: Stencil::ThreePoint,
            tolerance: 1e-6,
            exhaustive_limit: usize::MAX,
            sample: 25,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub coords_checked: usize,
    pub max_rel_err: f64,
    pub worst_coord: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(move |p| p.max_rel_err > self.tolerance)
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients with central finite differences for every
/// parameter tensor.
pub fn grad_check(objective: &impl Objective, store: &ParamStore, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let first = objective.loss(store)?;
    let (second, grads) = objective.loss_and_grad(store)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }
    let mut work = store.clone();
    let mut params = Vec::new();
    for id in store.ids() {
        let n = store.value(id).len();
        let coords: Vec<usize> = if n <= opts.exhaustive_limit.max(opts.sample.max(25)) {
            (0..n).collect()
        } else {
            let mut r = rng::stream(opts.seed, store.name(id));
            let mut c = sample(&mut r, n, opts.sample.max(25)).into_vec();
            c.sort_unstable();
            c
        };
        let analytic = grads.get(id);
        let mut check = ParamCheck {
            name: store.name(id).to_string(),
            coords_checked: coords.len(),
            max_rel_err: 0.0,
            worst_coord: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for k in coords {
            let orig = store.value(id).data()[k];
            let mut at = |offset: f64| -> Result<f64> {
                work.value_mut(id).data_mut()[k] = orig + offset;
                let v = objective.loss(&work);
                work.value_mut(id).data_mut()[k] = orig;
                v
            };
            let h = opts.step;
            let numeric = match opts.stencil {
                Stencil::ThreePoint => (at(h)? - at(-h)?) / (2.0 * h),
                Stencil::FivePoint => (-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h),
            };
            let a = analytic.map_or(0.0, |g| g.data()[k]);
            let err = relative_error(a, numeric);
            if err > check.max_rel_err || check.coords_checked == 1 {
                check.max_rel_err = check.max_rel_err.max(err);
                check.worst_coord = k;
                check.analytic = a;
                check.numeric = numeric;
            }
        }
        params.push(check);
    }
    let pass = params.iter().all(|p| p.max_rel_err <= opts.tolerance);
    Ok(GradCheckReport {
        params,
        tolerance: opts.tolerance,
        pass,
    })
}
