use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcd_tensor::{grad_check, Matrix, Tape, TensorError, Var};

const H: f64 = 1e-5;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Keeps values away from the ReLU kink so finite differences stay smooth.
fn off_kink(m: Matrix) -> Matrix {
    m.map(|v| if v.abs() < 0.05 { v + 0.1 } else { v })
}

/// Reduces an arbitrary-shaped output to a scalar with fixed random weights
/// so every output entry contributes a distinct gradient.
fn weighted_sum(t: &mut Tape, out: Var, seed: u64) -> Result<Var, TensorError> {
    let (r, c) = t.value(out).shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = t.constant(random(&mut rng, r, c));
    let prod = t.mul(out, w)?;
    t.sum(prod)
}

fn check(params: Vec<Matrix>, f: impl Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>) -> f64 {
    grad_check(f, &params, H).unwrap().max_rel_err
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_op_passes_single_op_gradient_check(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(&mut rng, 3, 4);
        let b = random(&mut rng, 4, 2);
        let c = random(&mut rng, 3, 4);
        let row = random(&mut rng, 1, 4);
        let col = random(&mut rng, 3, 1);
        let pos = random(&mut rng, 3, 4).map(|v| v.abs() + 0.1);

        let errs = [
            check(vec![a.clone(), b.clone()], |t, p| { let o = t.matmul(p[0], p[1])?; weighted_sum(t, o, 1) }),
            check(vec![a.clone(), c.clone()], |t, p| { let o = t.add(p[0], p[1])?; weighted_sum(t, o, 2) }),
            check(vec![a.clone(), row.clone()], |t, p| { let o = t.add(p[0], p[1])?; weighted_sum(t, o, 3) }),
            check(vec![a.clone(), col.clone()], |t, p| { let o = t.sub(p[0], p[1])?; weighted_sum(t, o, 4) }),
            check(vec![a.clone(), c.clone()], |t, p| { let o = t.mul(p[0], p[1])?; weighted_sum(t, o, 5) }),
            check(vec![a.clone(), col.clone()], |t, p| { let o = t.mul(p[0], p[1])?; weighted_sum(t, o, 6) }),
            check(vec![a.clone()], |t, p| { let o = t.scale(p[0], -1.7)?; weighted_sum(t, o, 7) }),
            check(vec![a.clone()], |t, p| { let o = t.sigmoid(p[0])?; weighted_sum(t, o, 8) }),
            check(vec![a.clone()], |t, p| { let o = t.tanh(p[0])?; weighted_sum(t, o, 9) }),
            check(vec![off_kink(a.clone())], |t, p| { let o = t.relu(p[0])?; weighted_sum(t, o, 10) }),
            check(vec![random(&mut rng, 1, 5)], |t, p| { let o = t.softmax(p[0])?; weighted_sum(t, o, 11) }),
            check(vec![random(&mut rng, 6, 1)], |t, p| {
                let o = t.softmax_segments(p[0], &[(0, 2), (2, 1), (3, 3)])?;
                weighted_sum(t, o, 12)
            }),
            check(vec![a.clone(), col.clone()], |t, p| { let o = t.concat(&[p[0], p[1]])?; weighted_sum(t, o, 13) }),
            check(vec![a.clone()], |t, p| { let o = t.split(p[0], 1, 2)?; weighted_sum(t, o, 14) }),
            check(vec![a.clone()], |t, p| { let o = t.transpose(p[0])?; weighted_sum(t, o, 15) }),
            check(vec![a.clone()], |t, p| { let o = t.sum_rows(p[0])?; weighted_sum(t, o, 16) }),
            check(vec![a.clone()], |t, p| { let o = t.sum(p[0])?; weighted_sum(t, o, 17) }),
            check(vec![pos], |t, p| { let o = t.log(p[0], 1e-12)?; weighted_sum(t, o, 18) }),
            check(vec![a.clone(), row.clone(), random(&mut rng, 1, 4)], |t, p| {
                let o = t.layer_norm(p[0], p[1], p[2], 1e-5)?;
                weighted_sum(t, o, 19)
            }),
        ];
        for (i, e) in errs.iter().enumerate() {
            prop_assert!(*e < 1e-7, "op check {} failed: {}", i, e);
        }
    }

    #[test]
    fn softmax_sums_to_one_and_ignores_shift(
        logits in prop::collection::vec(-30.0f64..30.0, 1..12),
        shift in -100.0f64..100.0,
    ) {
        let mut t = Tape::new();
        let x = t.constant(Matrix::row_vector(logits.clone()));
        let y = t.softmax(x).unwrap();
        let shifted = t.constant(Matrix::row_vector(logits.iter().map(|v| v + shift).collect()));
        let ys = t.softmax(shifted).unwrap();
        prop_assert!((t.value(y).sum() - 1.0).abs() < 1e-12);
        prop_assert!(t.value(y).max_abs_diff(t.value(ys)) < 1e-12);
    }
}

#[test]
fn quadratic_form_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let a = random(&mut rng, 4, 4);
    let x = random(&mut rng, 4, 1);
    let err = check(vec![x], move |t, p| {
        let am = t.constant(a.clone());
        let xt = t.transpose(p[0])?;
        let ax = t.matmul(am, p[0])?;
        t.matmul(xt, ax)
    });
    assert!(err < 1e-7, "{err}");
}

#[test]
fn constant_function_has_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = vec![random(&mut rng, 2, 3)];
    let report = grad_check(
        |t, p| {
            let zero = t.scale(p[0], 0.0)?;
            let s = t.sum(zero)?;
            let c = t.constant(Matrix::scalar(4.0));
            t.add(s, c)
        },
        &params,
        H,
    )
    .unwrap();
    assert!(report.max_rel_err < 1e-9);
}

#[test]
fn sum_of_squares_backward() {
    let mut t = Tape::new();
    let x = t.leaf(Matrix::row_vector(vec![1.0, 2.0, 3.0]));
    let sq = t.mul(x, x).unwrap();
    let loss = t.sum(sq).unwrap();
    assert_eq!(t.backward(loss).unwrap().get(x).data(), &[2.0, 4.0, 6.0]);
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut t = Tape::new();
        let a = t.leaf(random(&mut rng, 5, 7));
        let b = t.leaf(random(&mut rng, 7, 3));
        let c = t.matmul(a, b).unwrap();
        let s = t.sum(c).unwrap();
        let g = t.backward(s).unwrap();
        (t.value(s).clone(), g.get(a), g.get(b))
    };
    let (s1, ga1, gb1) = run();
    let (s2, ga2, gb2) = run();
    assert_eq!(s1.data()[0].to_bits(), s2.data()[0].to_bits());
    assert_eq!(ga1, ga2);
    assert_eq!(gb1, gb2);
}
