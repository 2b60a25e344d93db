//! Central finite-difference verification of tape gradients.

use crate::error::TensorError;
use crate::matrix::Matrix;
use crate::tape::{Tape, Var};

/// Result of [`grad_check`]: the worst entry overall and per parameter tensor.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub per_param: Vec<f64>,
}

/// `|a - n| / max(1, |a|, |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Compares reverse-mode gradients of `f` against central differences with step `h`.
///
/// `f` builds a scalar loss on the given tape from leaves bound to `params`
/// (in order). It must be deterministic.
pub fn grad_check<F>(f: F, params: &[Matrix], h: f64) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let eval = |values: &[Matrix]| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|m| tape.constant(m.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.value(out);
        if v.shape() != (1, 1) {
            return Err(TensorError::NonScalarLoss(v.shape()));
        }
        Ok(v.data()[0])
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|m| tape.leaf(m.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut work: Vec<Matrix> = params.to_vec();
    let mut per_param = Vec::with_capacity(params.len());
    for (p, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var);
        let mut worst: f64 = 0.0;
        for k in 0..params[p].len() {
            let orig = params[p].data()[k];
            work[p].data_mut()[k] = orig + h;
            let plus = eval(&work)?;
            work[p].data_mut()[k] = orig - h;
            let minus = eval(&work)?;
            work[p].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            if !numeric.is_finite() {
                return Err(TensorError::NonFinite { op: "grad_check" });
            }
            worst = worst.max(relative_error(analytic.data()[k], numeric));
        }
        per_param.push(worst);
    }
    let max_rel_err = per_param.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_err, per_param })
}
