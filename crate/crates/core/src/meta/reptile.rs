use crate::error::{Error, Result};
use crate::numcore::{Gradients, Optimizer, ParamStore};

use super::train::blame;

/// `steps` plain sgd updates of rate `rate` on a copy of `theta`.
pub fn inner_adapt<F>(theta: &ParamStore, rate: f64, steps: usize, loss_and_grad: F) -> Result<ParamStore>
where
    F: Fn(&ParamStore) -> Result<(f64, Gradients)>,
{
    let mut adapted = theta.clone();
    let mut opt = Optimizer::sgd();
    for _ in 0..steps {
        let (loss, grads) = loss_and_grad(&adapted).map_err(|e| blame(&adapted, e))?;
        if !loss.is_finite() {
            return Err(blame(&adapted, Error::NonFinite("inner-loop loss".into())));
        }
        adapted.accumulate(&grads, 1.0)?;
        opt.step(&mut adapted, rate).map_err(|e| blame(&adapted, e))?;
    }
    Ok(adapted)
}

/// `θ ← (1−γ)·θ + γ·mean(θᵢ)`, parameter-wise. The endpoints are exact:
/// γ = 0 keeps θ and γ = 1 gives the mean.
pub fn reptile_outer(theta: &ParamStore, adapted: &[ParamStore], gamma: f64) -> Result<ParamStore> {
    let Some(first) = adapted.first() else {
        return Err(Error::Training(
            "reptile update needs at least one adapted parameter set".into(),
        ));
    };
    for a in adapted {
        theta.check_layout(a)?;
    }
    let n = adapted.len() as f64;
    let mut out = theta.clone();
    for (slot, dst) in out.values_mut().iter_mut().enumerate() {
        let mut mean = first.values()[slot].data().to_vec();
        for a in &adapted[1..] {
            for (m, x) in mean.iter_mut().zip(a.values()[slot].data()) {
                *m += x;
            }
        }
        for (t, m) in dst.data_mut().iter_mut().zip(mean) {
            let m = m / n;
            *t = (1.0 - gamma) * *t + gamma * m;
        }
    }
    Ok(out)
}
