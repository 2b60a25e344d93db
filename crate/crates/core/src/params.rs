//! Learnable tensors of the network.
//!
//! Every parameter struct is generic over its element so the same layout
//! holds values (`Matrix`), tape handles (`Var`), gradients and optimizer
//! moments. [`NetworkParams::fields`] yields tensors in the fixed order used
//! by checkpoints.
//!
//! Weight matrices are stored `out×in` and applied to row-major node states
//! as `H · Wᵀ`; biases are `1×D` rows. Per-head attention and message
//! matrices are `(D/H)×(D/H)` and multiply head vectors from the right.

use rand::Rng;
use rcd_tensor::{Matrix, Tape, Var};

use crate::config::ModelConfig;
use crate::graph::{EdgeKind, NodeKind};

/// Index of the prior `μ[τ(s), φ(e), τ(t)]` in the flattened `20×1` tensor.
pub fn prior_index(src: NodeKind, edge: EdgeKind, dst: NodeKind) -> usize {
    (src.ordinal() * EdgeKind::COUNT + edge.ordinal()) * NodeKind::COUNT + dst.ordinal()
}

pub const PRIOR_LEN: usize = NodeKind::COUNT * EdgeKind::COUNT * NodeKind::COUNT;

#[derive(Clone, Debug, PartialEq)]
pub struct HgtLayerParams<T> {
    /// Indexed by [`NodeKind::ordinal`].
    pub k_w: [T; 2],
    pub k_b: [T; 2],
    pub q_w: [T; 2],
    pub q_b: [T; 2],
    pub v_w: [T; 2],
    pub v_b: [T; 2],
    /// `edge.ordinal() * heads + head`.
    pub att: Vec<T>,
    pub msg: Vec<T>,
    /// `PRIOR_LEN × 1`, see [`prior_index`].
    pub mu: T,
    pub heads: usize,
}

impl<T> HgtLayerParams<T> {
    pub fn att(&self, edge: EdgeKind, head: usize) -> &T {
        &self.att[edge.ordinal() * self.heads + head]
    }

    pub fn msg(&self, edge: EdgeKind, head: usize) -> &T {
        &self.msg[edge.ordinal() * self.heads + head]
    }

    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> HgtLayerParams<U> {
        let mut pair = |a: &[T; 2]| [f(&a[0]), f(&a[1])];
        let k_w = pair(&self.k_w);
        let k_b = pair(&self.k_b);
        let q_w = pair(&self.q_w);
        let q_b = pair(&self.q_b);
        let v_w = pair(&self.v_w);
        let v_b = pair(&self.v_b);
        HgtLayerParams {
            k_w,
            k_b,
            q_w,
            q_b,
            v_w,
            v_b,
            att: self.att.iter().map(&mut *f).collect(),
            msg: self.msg.iter().map(&mut *f).collect(),
            mu: f(&self.mu),
            heads: self.heads,
        }
    }

    fn fields<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        for kind in NodeKind::ALL {
            let k = kind.ordinal();
            let n = kind.name();
            out.push((format!("{prefix}.k_w.{n}"), &self.k_w[k]));
            out.push((format!("{prefix}.k_b.{n}"), &self.k_b[k]));
            out.push((format!("{prefix}.q_w.{n}"), &self.q_w[k]));
            out.push((format!("{prefix}.q_b.{n}"), &self.q_b[k]));
            out.push((format!("{prefix}.v_w.{n}"), &self.v_w[k]));
            out.push((format!("{prefix}.v_b.{n}"), &self.v_b[k]));
        }
        for e in EdgeKind::ALL {
            for h in 0..self.heads {
                out.push((format!("{prefix}.att.{}.h{h}", e.name()), self.att(e, h)));
            }
        }
        for e in EdgeKind::ALL {
            for h in 0..self.heads {
                out.push((format!("{prefix}.msg.{}.h{h}", e.name()), self.msg(e, h)));
            }
        }
        out.push((format!("{prefix}.mu"), &self.mu));
    }

    fn fields_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
        let [k_w0, k_w1] = &mut self.k_w;
        let [k_b0, k_b1] = &mut self.k_b;
        let [q_w0, q_w1] = &mut self.q_w;
        let [q_b0, q_b1] = &mut self.q_b;
        let [v_w0, v_w1] = &mut self.v_w;
        let [v_b0, v_b1] = &mut self.v_b;
        out.extend([k_w0, k_b0, q_w0, q_b0, v_w0, v_b0, k_w1, k_b1, q_w1, q_b1, v_w1, v_b1]);
        out.extend(self.att.iter_mut());
        out.extend(self.msg.iter_mut());
        out.push(&mut self.mu);
    }
}

/// Gated retention cell parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<T> {
    pub w_ir: T,
    pub w_hr: T,
    pub w_in: T,
    pub w_hn: T,
    pub w_iz: T,
    pub w_hz: T,
    pub b_ir: T,
    pub b_hr: T,
    pub b_in: T,
    pub b_hn: T,
    pub b_iz: T,
    pub b_hz: T,
}

impl<T> GruParams<T> {
    pub const NAMES: [&'static str; 12] = [
        "w_ir", "w_hr", "w_in", "w_hn", "w_iz", "w_hz", "b_ir", "b_hr", "b_in", "b_hn", "b_iz", "b_hz",
    ];

    fn as_array(&self) -> [&T; 12] {
        [
            &self.w_ir, &self.w_hr, &self.w_in, &self.w_hn, &self.w_iz, &self.w_hz, &self.b_ir, &self.b_hr, &self.b_in,
            &self.b_hn, &self.b_iz, &self.b_hz,
        ]
    }

    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> GruParams<U> {
        GruParams {
            w_ir: f(&self.w_ir),
            w_hr: f(&self.w_hr),
            w_in: f(&self.w_in),
            w_hn: f(&self.w_hn),
            w_iz: f(&self.w_iz),
            w_hz: f(&self.w_hz),
            b_ir: f(&self.b_ir),
            b_hr: f(&self.b_hr),
            b_in: f(&self.b_in),
            b_hn: f(&self.b_hn),
            b_iz: f(&self.b_iz),
            b_hz: f(&self.b_hz),
        }
    }

    fn fields<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        for (name, t) in Self::NAMES.iter().zip(self.as_array()) {
            out.push((format!("{prefix}.{name}"), t));
        }
    }

    fn fields_mut<'a>(&'a mut self, out: &mut Vec<&'a mut T>) {
        out.extend([
            &mut self.w_ir,
            &mut self.w_hr,
            &mut self.w_in,
            &mut self.w_hn,
            &mut self.w_iz,
            &mut self.w_hz,
            &mut self.b_ir,
            &mut self.b_hr,
            &mut self.b_in,
            &mut self.b_hn,
            &mut self.b_iz,
            &mut self.b_hz,
        ]);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub hgt: HgtLayerParams<T>,
    pub gru: GruParams<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<T> {
    pub layers: Vec<LayerParams<T>>,
    pub norm_gain: T,
    pub norm_bias: T,
    pub w_proj: T,
    pub b_proj: T,
    /// `D_out × 1`.
    pub scorer_w: T,
    /// `1 × 1`.
    pub scorer_b: T,
}

impl<T> NetworkParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> NetworkParams<U> {
        NetworkParams {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    hgt: l.hgt.map(&mut f),
                    gru: l.gru.map(&mut f),
                })
                .collect(),
            norm_gain: f(&self.norm_gain),
            norm_bias: f(&self.norm_bias),
            w_proj: f(&self.w_proj),
            b_proj: f(&self.b_proj),
            scorer_w: f(&self.scorer_w),
            scorer_b: f(&self.scorer_b),
        }
    }

    /// All tensors with their checkpoint names, in checkpoint order.
    pub fn fields(&self) -> Vec<(String, &T)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            l.hgt.fields(&format!("layer{i}.hgt"), &mut out);
            l.gru.fields(&format!("layer{i}.gru"), &mut out);
        }
        out.push(("norm.gain".into(), &self.norm_gain));
        out.push(("norm.bias".into(), &self.norm_bias));
        out.push(("proj.w".into(), &self.w_proj));
        out.push(("proj.b".into(), &self.b_proj));
        out.push(("scorer.w".into(), &self.scorer_w));
        out.push(("scorer.b".into(), &self.scorer_b));
        out
    }

    /// Same order as [`NetworkParams::fields`].
    pub fn fields_mut(&mut self) -> Vec<&mut T> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            l.hgt.fields_mut(&mut out);
            l.gru.fields_mut(&mut out);
        }
        out.extend([
            &mut self.norm_gain,
            &mut self.norm_bias,
            &mut self.w_proj,
            &mut self.b_proj,
            &mut self.scorer_w,
            &mut self.scorer_b,
        ]);
        out
    }

    /// Same layout as `self`, filled from `values` in [`NetworkParams::fields`] order.
    ///
    /// # Panics
    /// If `values` does not hold exactly one entry per tensor.
    pub fn with_values<U: Clone>(&self, values: Vec<U>) -> NetworkParams<U> {
        let mut slots: NetworkParams<Option<U>> = self.map(|_| None);
        let targets = slots.fields_mut();
        assert_eq!(targets.len(), values.len(), "one value per tensor");
        for (slot, v) in targets.into_iter().zip(values) {
            *slot = Some(v);
        }
        slots.map(|v| v.clone().expect("every slot filled"))
    }
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches data")
}

fn xavier(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    uniform(rng, rows, cols, (6.0 / (rows + cols) as f64).sqrt())
}

fn identity_noise(rng: &mut impl Rng, n: usize) -> Matrix {
    let mut m = uniform(rng, n, n, 0.01);
    for i in 0..n {
        m.set(i, i, m.get(i, i) + 1.0);
    }
    m
}

impl NetworkParams<Matrix> {
    /// Fresh parameters drawn from `rng` in [`NetworkParams::fields`] order.
    pub fn init(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let (d, h, dh) = (cfg.dim, cfg.heads, cfg.head_dim());
        let layers = (0..cfg.layers)
            .map(|_| {
                let proj = |rng: &mut _| [xavier(rng, d, d), xavier(rng, d, d)];
                let [k0, k1] = proj(rng);
                let [q0, q1] = proj(rng);
                let [v0, v1] = proj(rng);
                let hgt = HgtLayerParams {
                    k_w: [k0, k1],
                    k_b: [Matrix::zeros(1, d), Matrix::zeros(1, d)],
                    q_w: [q0, q1],
                    q_b: [Matrix::zeros(1, d), Matrix::zeros(1, d)],
                    v_w: [v0, v1],
                    v_b: [Matrix::zeros(1, d), Matrix::zeros(1, d)],
                    att: (0..EdgeKind::COUNT * h).map(|_| identity_noise(rng, dh)).collect(),
                    msg: (0..EdgeKind::COUNT * h).map(|_| identity_noise(rng, dh)).collect(),
                    mu: Matrix::filled(PRIOR_LEN, 1, 1.0),
                    heads: h,
                };
                let bound = 1.0 / (d as f64).sqrt();
                let mut u = |rows| uniform(rng, rows, d, bound);
                let gru = GruParams {
                    w_ir: u(d),
                    w_hr: u(d),
                    w_in: u(d),
                    w_hn: u(d),
                    w_iz: u(d),
                    w_hz: u(d),
                    b_ir: u(1),
                    b_hr: u(1),
                    b_in: u(1),
                    b_hn: u(1),
                    b_iz: u(1),
                    b_hz: u(1),
                };
                LayerParams { hgt, gru }
            })
            .collect();
        NetworkParams {
            layers,
            norm_gain: Matrix::filled(1, d, 1.0),
            norm_bias: Matrix::zeros(1, d),
            w_proj: xavier(rng, cfg.out_dim, d),
            b_proj: Matrix::zeros(1, cfg.out_dim),
            scorer_w: xavier(rng, cfg.out_dim, 1),
            scorer_b: Matrix::zeros(1, 1),
        }
    }

    /// Registers every tensor as a trainable leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> NetworkParams<Var> {
        self.map(|m| tape.leaf(m.clone()))
    }

    /// Registers every tensor as a constant (inference only).
    pub fn bind_constant(&self, tape: &mut Tape) -> NetworkParams<Var> {
        self.map(|m| tape.constant(m.clone()))
    }

    pub fn shape_signature(&self) -> Vec<(String, (usize, usize))> {
        self.fields().into_iter().map(|(n, m)| (n, m.shape())).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.fields().iter().map(|(_, m)| m.len()).sum()
    }
}
