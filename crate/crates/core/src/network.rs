//! Layer stacking: aggregation, the gated retention cell, final layer norm
//! and the task projection.

use rcd_tensor::{Tape, Var};

use crate::aggregation::{affine, hgt_forward};
use crate::config::{Mode, ModelConfig};
use crate::error::{Error, Result};
use crate::params::{GruParams, NetworkParams};
use crate::plan::GraphPlan;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Gated update of `h_prev` by the aggregate `h_tilde`, row-wise per node.
///
/// `r` (attenuation) scales the history inside the candidate, `z`
/// (reinforcement) interpolates between candidate and history.
pub fn gru_cell(tape: &mut Tape, h_tilde: Var, h_prev: Var, p: &GruParams<Var>) -> Result<Var> {
    let (a, b) = (tape.value(h_tilde).shape(), tape.value(h_prev).shape());
    if a != b {
        return Err(Error::Dimension(format!("gru_cell inputs {a:?} and {b:?} differ")));
    }
    let gate = |tape: &mut Tape, wi, bi, wh, bh| -> Result<Var> {
        let x = affine(tape, h_tilde, wi, bi)?;
        let hh = affine(tape, h_prev, wh, bh)?;
        let s = tape.add(x, hh)?;
        Ok(tape.sigmoid(s)?)
    };
    let r = gate(tape, p.w_ir, p.b_ir, p.w_hr, p.b_hr)?;
    let z = gate(tape, p.w_iz, p.b_iz, p.w_hz, p.b_hz)?;

    let xn = affine(tape, h_tilde, p.w_in, p.b_in)?;
    let hn = affine(tape, h_prev, p.w_hn, p.b_hn)?;
    let gated = tape.mul(r, hn)?;
    let pre = tape.add(xn, gated)?;
    let n = tape.tanh(pre)?;

    // (1 - z) ⊙ n + z ⊙ h_prev == n + z ⊙ (h_prev - n)
    let diff = tape.sub(h_prev, n)?;
    let keep = tape.mul(z, diff)?;
    Ok(tape.add(n, keep)?)
}

/// `ReLU(H · W_projᵀ + b_proj)`.
pub fn task_projection(tape: &mut Tape, h: Var, w_proj: Var, b_proj: Var) -> Result<Var> {
    let a = affine(tape, h, w_proj, b_proj)?;
    Ok(tape.relu(a)?)
}

/// Hidden state after the last layer, before normalization.
pub fn encode(tape: &mut Tape, plan: &GraphPlan, h0: Var, p: &NetworkParams<Var>, mode: Mode) -> Result<Var> {
    let mut h = h0;
    for layer in &p.layers {
        h = match mode {
            Mode::Full => {
                let h_tilde = hgt_forward(tape, plan, h, &layer.hgt)?;
                gru_cell(tape, h_tilde, h, &layer.gru)?
            }
            Mode::AggregationOnly => hgt_forward(tape, plan, h, &layer.hgt)?,
            Mode::RetentionOnly => gru_cell(tape, h, h, &layer.gru)?,
        };
    }
    Ok(h)
}

/// Task embeddings `A` (`n × D_out`) for every node.
pub fn network_forward(tape: &mut Tape, plan: &GraphPlan, h0: Var, p: &NetworkParams<Var>, mode: Mode) -> Result<Var> {
    let h = encode(tape, plan, h0, p, mode)?;
    let normed = tape.layer_norm(h, p.norm_gain, p.norm_bias, LAYER_NORM_EPS)?;
    task_projection(tape, normed, p.w_proj, p.b_proj)
}

/// Checks that an input width matches the configured model width.
pub fn check_input_dim(cfg: &ModelConfig, input_dim: usize) -> Result<()> {
    if cfg.dim != input_dim {
        return Err(Error::Dimension(format!(
            "model expects D={} but the embedded graph has D={input_dim}",
            cfg.dim
        )));
    }
    Ok(())
}
