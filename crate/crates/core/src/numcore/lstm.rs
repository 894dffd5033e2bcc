use rand::Rng;

use crate::error::{Error, Result};

use super::{ParamId, ParamStore, Tape, Tensor, Var};

/// Weights of one LSTM cell. Gates are packed `[input, forget, candidate, output]`.
#[derive(Clone, Copy, Debug)]
pub struct LstmParams {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmParams {
    /// Registers `<prefix>.w_x`, `<prefix>.w_h` and `<prefix>.b`.
    ///
    /// Weights are uniform in `[-init, init]`; the forget-gate bias starts at
    /// one and every other bias at zero.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        init: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let h4 = 4 * hidden_dim;
        let w_x = store.insert(format!("{prefix}.w_x"), Tensor::uniform(&[h4, input_dim], init, rng))?;
        let w_h = store.insert(format!("{prefix}.w_h"), Tensor::uniform(&[h4, hidden_dim], init, rng))?;
        let mut bias = vec![0.0; h4];
        bias[hidden_dim..2 * hidden_dim].fill(1.0);
        let b = store.insert(format!("{prefix}.b"), Tensor::vector(bias))?;
        Ok(Self {
            w_x,
            w_h,
            b,
            input_dim,
            hidden_dim,
        })
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        let w_x = store.id(&format!("{prefix}.w_x"))?;
        let w_h = store.id(&format!("{prefix}.w_h"))?;
        let b = store.id(&format!("{prefix}.b"))?;
        let shape = store.value(w_x).shape();
        Ok(Self {
            w_x,
            w_h,
            b,
            input_dim: shape[1],
            hidden_dim: shape[0] / 4,
        })
    }
}

/// One recurrence step: returns the new `(hidden, cell)`.
pub fn lstm_step(tape: &mut Tape<'_>, p: &LstmParams, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
    let hd = p.hidden_dim;
    for (what, v, want) in [("input", x, p.input_dim), ("hidden", h, hd), ("cell", c, hd)] {
        let got = tape.value(v).shape();
        if got != [want] {
            return Err(Error::shape("lstm_step", format!("{what} {got:?}, expected [{want}]")));
        }
    }
    let w_x = tape.param(p.w_x);
    let w_h = tape.param(p.w_h);
    let b = tape.param(p.b);
    let zx = tape.matmul(w_x, x)?;
    let zh = tape.matmul(w_h, h)?;
    let z = tape.add(zx, zh)?;
    let z = tape.add(z, b)?;
    let i = tape.slice(z, 0, hd)?;
    let f = tape.slice(z, hd, hd)?;
    let g = tape.slice(z, 2 * hd, hd)?;
    let o = tape.slice(z, 3 * hd, hd)?;
    let i = tape.sigmoid(i)?;
    let f = tape.sigmoid(f)?;
    let g = tape.tanh(g)?;
    let o = tape.sigmoid(o)?;
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c_next = tape.add(fc, ig)?;
    let tc = tape.tanh(c_next)?;
    let h_next = tape.mul(o, tc)?;
    Ok((h_next, c_next))
}
