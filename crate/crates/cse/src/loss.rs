//! Sampled loss terms and their gradients.
//!
//! Every term reduces to a logistic loss on a dot product, so each function
//! returns the loss together with a single scalar coefficient `c` from which
//! all row gradients follow:
//!
//! - positive pair, `loss = −ln σ(a·b)`:
//!   `∂loss/∂a = c·b`, `∂loss/∂b = c·a` with `c = σ(a·b) − 1`
//! - negative pair, `loss = −ln σ(−a·b)`:
//!   same shape with `c = σ(a·b)`
//! - ranking triple, `loss = −ln σ(u·p − u·n)`:
//!   `∂loss/∂u = c·(p−n)`, `∂loss/∂p = c·u`, `∂loss/∂n = −c·u`
//!   with `c = σ(u·p − u·n) − 1`
//!
//! The sigmoid input is clamped to ±[`SIGMOID_CLAMP`] before evaluation,
//! which bounds every loss and gradient coefficient.
//!
//! Functions are generic over the float type: training runs them in `f32`
//! (matrix working precision), the finite-difference oracle in `f64`.

use num_traits::Float;

/// Sigmoid inputs are clamped to this magnitude before evaluation.
pub const SIGMOID_CLAMP: f64 = 6.0;

/// Logistic function `1/(1+e^{−x})` with the input clamped to ±6.
#[inline]
pub fn sigmoid<F: Float>(x: F) -> F {
    let hi = F::from(SIGMOID_CLAMP).unwrap();
    let x = x.min(hi).max(-hi);
    F::one() / (F::one() + (-x).exp())
}

/// Inner product; accumulates in the operand precision.
#[inline]
pub fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

/// `−ln σ(a·b)` and its gradient coefficient.
///
/// A non-finite dot product (diverged rows) yields an infinite loss and a
/// zero coefficient so divergence is reported instead of silently clamped.
#[inline]
pub fn positive_pair<F: Float>(a: &[F], b: &[F]) -> (F, F) {
    let d = dot(a, b);
    if !d.is_finite() {
        return (F::infinity(), F::zero());
    }
    let s = sigmoid(d);
    (-s.ln(), s - F::one())
}

/// `−ln σ(−a·b)` and its gradient coefficient.
#[inline]
pub fn negative_pair<F: Float>(a: &[F], b: &[F]) -> (F, F) {
    let d = dot(a, b);
    if !d.is_finite() {
        return (F::infinity(), F::zero());
    }
    let s = sigmoid(d);
    (-(F::one() - s).ln(), s)
}

/// `−ln σ(u·pos − u·neg)` and its gradient coefficient.
#[inline]
pub fn rank_triple<F: Float>(u: &[F], pos: &[F], neg: &[F]) -> (F, F) {
    let d = dot(u, pos) - dot(u, neg);
    if !d.is_finite() {
        return (F::infinity(), F::zero());
    }
    let s = sigmoid(d);
    (-s.ln(), s - F::one())
}

/// Applies one SGD step on a pair term: `a −= rate·c·b; b −= rate·c·a`,
/// both against the pre-update values.
#[inline]
pub fn apply_pair(a: &mut [f32], b: &mut [f32], coeff: f32, rate: f32) {
    let g = rate * coeff;
    for t in 0..a.len() {
        let at = a[t];
        let bt = b[t];
        a[t] = at - g * bt;
        b[t] = bt - g * at;
    }
}

/// Applies one SGD step on a ranking triple against pre-update values.
#[inline]
pub fn apply_rank(u: &mut [f32], pos: &mut [f32], neg: &mut [f32], coeff: f32, rate: f32) {
    let g = rate * coeff;
    for t in 0..u.len() {
        let ut = u[t];
        let pt = pos[t];
        let nt = neg[t];
        u[t] = ut - g * (pt - nt);
        pos[t] = pt - g * ut;
        neg[t] = nt + g * ut;
    }
}

/// Multiplicative L2 weight decay: `row ← (1 − amount)·row`.
#[inline]
pub fn l2_decay(row: &mut [f32], amount: f32) {
    let k = 1.0 - amount;
    for v in row {
        *v *= k;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_basics() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        // Clamped ceiling: 1/(1+e^{-6}).
        let ceiling = 0.9975273768433653;
        assert!((sigmoid(6.0f64) - ceiling).abs() < 1e-12);
        assert!((sigmoid(1e9f64) - ceiling).abs() < 1e-12);
        assert!((sigmoid(f64::NEG_INFINITY) - (1.0 - ceiling)).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_complement_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-20.0..20.0);
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_vectors_give_log_two_loss() {
        let z = [0.0f64; 4];
        let (l, _) = positive_pair(&z, &z);
        assert!((l - 0.6931471805599453).abs() < 1e-15);
        let (l, _) = negative_pair(&z, &z);
        assert!((l - 0.6931471805599453).abs() < 1e-15);
        let (l, _) = rank_triple(&z, &z, &z);
        assert!((l - 0.6931471805599453).abs() < 1e-15);
    }

    #[test]
    fn rank_gradient_vanishes_for_identical_items() {
        let u = [0.3f64, -0.2, 0.7];
        let p = [0.1f64, 0.4, -0.6];
        let (_, c) = rank_triple(&u, &p, &p);
        // grad wrt u is c·(p−p) = 0; the coefficient itself is σ(0)−1.
        assert!((c + 0.5).abs() < 1e-15);
    }

    #[test]
    fn pair_update_uses_pre_update_values() {
        let mut a = vec![1.0f32, 0.0];
        let mut b = vec![0.0f32, 2.0];
        apply_pair(&mut a, &mut b, 0.5, 0.1);
        // a -= 0.05*b_orig; b -= 0.05*a_orig
        assert_eq!(a, vec![1.0, -0.1]);
        assert_eq!(b, vec![-0.05, 2.0]);
    }

    #[test]
    fn decay_shrinks_norm_monotonically_toward_zero() {
        let mut row = vec![0.5f32, -1.0, 2.0];
        let norm = |r: &[f32]| r.iter().map(|v| v * v).sum::<f32>().sqrt();
        let mut prev = norm(&row);
        for _ in 0..200 {
            l2_decay(&mut row, 0.1 * 0.025);
            let n = norm(&row);
            assert!(n < prev);
            prev = n;
        }
        assert!(prev < 0.5);
    }

    fn random_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-0.5..0.5)).collect()
    }

    /// Central finite difference of `f` in the direction of coordinate `t` of
    /// a designated argument.
    fn finite_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-4;
        for case in 0..100 {
            let d = rng.random_range(1..=16);
            let a = random_vec(&mut rng, d);
            let b = random_vec(&mut rng, d);
            let c = random_vec(&mut rng, d);
            let t = rng.random_range(0..d);

            // positive pair, both sides
            let (_, co) = positive_pair(&a, &b);
            let analytic = co * b[t];
            let fd = finite_diff(
                |x| {
                    let mut a2 = a.clone();
                    a2[t] = x;
                    positive_pair(&a2, &b).0
                },
                a[t],
                h,
            );
            assert!(
                (analytic - fd).abs() <= 1e-4 * analytic.abs().max(fd.abs()).max(1e-6),
                "case {case}: positive {analytic} vs {fd}"
            );

            // negative pair
            let (_, co) = negative_pair(&a, &b);
            let analytic = co * a[t];
            let fd = finite_diff(
                |x| {
                    let mut b2 = b.clone();
                    b2[t] = x;
                    negative_pair(&a, &b2).0
                },
                b[t],
                h,
            );
            assert!(
                (analytic - fd).abs() <= 1e-4 * analytic.abs().max(fd.abs()).max(1e-6),
                "case {case}: negative {analytic} vs {fd}"
            );

            // ranking triple wrt the negative item
            let (_, co) = rank_triple(&a, &b, &c);
            let analytic = -co * a[t];
            let fd = finite_diff(
                |x| {
                    let mut c2 = c.clone();
                    c2[t] = x;
                    rank_triple(&a, &b, &c2).0
                },
                c[t],
                h,
            );
            assert!(
                (analytic - fd).abs() <= 1e-4 * analytic.abs().max(fd.abs()).max(1e-6),
                "case {case}: rank {analytic} vs {fd}"
            );
        }
    }
}
