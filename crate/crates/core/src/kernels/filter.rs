use crate::error::{out_of_range, Error, Result};

/// The fixed C^∞ cutoff `H : [0, ∞) → [0, 1]`.
///
/// `H = 1` on `[0, 1/2]`, `H = 0` on `[1, ∞)`, and on `(1/2, 1)` the smooth
/// partition bump `s(2 - 2t) / (s(2 - 2t) + s(2t - 1))` with
/// `s(u) = exp(-1/u)`. The bridge is symmetric about `3/4`:
/// `H(3/4 - s) + H(3/4 + s) = 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterSpec;

impl FilterSpec {
    pub fn eval(&self, t: f64) -> Result<f64> {
        filter_h(t)
    }
}

pub fn filter_h(t: f64) -> Result<f64> {
    if t.is_nan() {
        return Err(Error::NonFinite("filter argument"));
    }
    if t < 0.0 {
        return Err(out_of_range("filter argument", format!("{t} < 0")));
    }
    Ok(h(t))
}

#[inline]
fn bump(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

pub(crate) fn h(t: f64) -> f64 {
    if t <= 0.5 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = bump(2.0 - 2.0 * t);
        let b = bump(2.0 * t - 1.0);
        a / (a + b)
    }
}
