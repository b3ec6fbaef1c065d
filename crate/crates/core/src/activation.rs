//! Smooth activations with closed-form first and second derivatives.
//!
//! Both shipped activations vanish at the origin, have unit slope there, and
//! approach slope `a = 0` on the left and `b = 2` on the right.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Past this magnitude the logistic factor is treated as saturated (e^-30 ≈ 9e-14).
pub const SATURATION: f64 = 30.0;

#[derive(Clone, Copy)]
pub struct Activation {
    name: &'static str,
    f: fn(f64) -> f64,
    d1: fn(f64) -> f64,
    d2: fn(f64) -> f64,
    /// Limit of σ′ as x → −∞.
    pub a: f64,
    /// Limit of σ′ as x → +∞.
    pub b: f64,
    /// Declared bound on |σ′| and |σ″|.
    pub lipschitz_c: f64,
}

impl std::fmt::Debug for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Activation")
            .field("name", &self.name)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("lipschitz_c", &self.lipschitz_c)
            .finish()
    }
}

impl Activation {
    /// User-supplied activation. Checking it is the caller's job, see [`validate_assumption1`].
    pub fn custom(
        name: &'static str,
        f: fn(f64) -> f64,
        d1: fn(f64) -> f64,
        d2: fn(f64) -> f64,
        a: f64,
        b: f64,
        lipschitz_c: f64,
    ) -> Self {
        Activation {
            name,
            f,
            d1,
            d2,
            a,
            b,
            lipschitz_c,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "scaled_silu" => Ok(scaled_silu()),
            "modified_softplus" => Ok(modified_softplus()),
            other => Err(Error::Config(format!(
                "unknown activation '{other}' (expected scaled_silu or modified_softplus)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        (self.d1)(x)
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        (self.d2)(x)
    }

    /// Derivative of the given order (0, 1 or 2).
    pub fn eval_order(&self, order: usize, x: f64) -> Result<f64> {
        match order {
            0 => Ok(self.eval(x)),
            1 => Ok(self.d1(x)),
            2 => Ok(self.d2(x)),
            _ => Err(Error::contract(format!("derivative order {order} not available"))),
        }
    }

    /// `σ(εx)/ε`, the rescaled value used by the kernel recursion.
    #[inline]
    pub fn rescaled(&self, eps: f64, x: f64) -> f64 {
        self.eval(eps * x) / eps
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn silu_f(x: f64) -> f64 {
    if x > SATURATION {
        2.0 * x
    } else {
        2.0 * x * logistic(x)
    }
}

fn silu_d1(x: f64) -> f64 {
    if x > SATURATION {
        return 2.0;
    }
    if x < -SATURATION {
        let e = x.exp();
        return 2.0 * e * (1.0 + x);
    }
    let s = logistic(x);
    2.0 * s * (1.0 + x * (1.0 - s))
}

fn silu_d2(x: f64) -> f64 {
    if x.abs() > SATURATION {
        // 2 s (1-s)(2 + x(1-2s)) with s(1-s) ≈ e^{-|x|}
        let e = (-x.abs()).exp();
        return 2.0 * e * (2.0 - x.abs());
    }
    let s = logistic(x);
    2.0 * s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))
}

/// `σ(x) = 2x / (1 + e^{-x})`.
pub fn scaled_silu() -> Activation {
    Activation {
        name: "scaled_silu",
        f: silu_f,
        d1: silu_d1,
        d2: silu_d2,
        a: 0.0,
        b: 2.0,
        lipschitz_c: 2.5,
    }
}

fn softplus_f(x: f64) -> f64 {
    // 2 (log(1 + e^x) - log 2), written to stay exact near the origin
    if x < 1.0 {
        2.0 * (x.exp_m1() / 2.0).ln_1p()
    } else {
        2.0 * (x + (-x).exp().ln_1p() - std::f64::consts::LN_2)
    }
}

fn softplus_d1(x: f64) -> f64 {
    if x > SATURATION {
        2.0
    } else {
        2.0 * logistic(x)
    }
}

fn softplus_d2(x: f64) -> f64 {
    if x.abs() > SATURATION {
        return 2.0 * (-x.abs()).exp();
    }
    let s = logistic(x);
    2.0 * s * (1.0 - s)
}

/// `σ(x) = 2(log(1 + e^x) − log 2)`.
pub fn modified_softplus() -> Activation {
    Activation {
        name: "modified_softplus",
        f: softplus_f,
        d1: softplus_d1,
        d2: softplus_d2,
        a: 0.0,
        b: 2.0,
        lipschitz_c: 2.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub name: String,
    pub grid_min: f64,
    pub grid_max: f64,
    /// The grid covers at least [−50, 50].
    pub grid_span_ok: bool,
    pub value_at_zero: f64,
    pub slope_error_at_zero: f64,
    pub max_abs_d1: f64,
    pub max_abs_d2: f64,
    /// σ′ at the left and right grid extremes.
    pub tail_left: f64,
    pub tail_right: f64,
    pub tail_left_error: f64,
    pub tail_right_error: f64,
    /// max |FD(σ) − σ′| / (1 + |σ′|) over the grid.
    pub fd_mismatch_d1: f64,
    /// max |FD(σ′) − σ″| / (1 + |σ″|) over the grid.
    pub fd_mismatch_d2: f64,
    /// The two tail slopes are distinguishable, i.e. a ≠ b.
    pub distinct_tails: bool,
    pub declared_bound_ok: bool,
}

impl AssumptionReport {
    /// Failed checks at the given tolerances; empty when everything holds.
    pub fn failures(&self, fd_tol: f64, tail_tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !self.grid_span_ok {
            out.push(format!(
                "grid [{}, {}] does not cover [-50, 50]",
                self.grid_min, self.grid_max
            ));
        }
        if self.value_at_zero.abs() > 1e-15 {
            out.push(format!("sigma(0) = {:e}", self.value_at_zero));
        }
        if self.slope_error_at_zero > 1e-12 {
            out.push(format!("sigma'(0) - 1 = {:e}", self.slope_error_at_zero));
        }
        if self.fd_mismatch_d1 > fd_tol {
            out.push(format!("first derivative fd mismatch {:e}", self.fd_mismatch_d1));
        }
        if self.fd_mismatch_d2 > fd_tol {
            out.push(format!("second derivative fd mismatch {:e}", self.fd_mismatch_d2));
        }
        if self.tail_left_error > tail_tol || self.tail_right_error > tail_tol {
            out.push(format!(
                "tail slopes ({:e}, {:e}) differ from declared limits",
                self.tail_left, self.tail_right
            ));
        }
        if !self.distinct_tails {
            out.push("tail limits coincide (a = b)".to_string());
        }
        if !self.declared_bound_ok {
            out.push(format!(
                "derivatives exceed declared bound: max|d1| = {}, max|d2| = {}",
                self.max_abs_d1, self.max_abs_d2
            ));
        }
        out
    }

    pub fn passed(&self, fd_tol: f64, tail_tol: f64) -> bool {
        self.failures(fd_tol, tail_tol).is_empty()
    }
}

/// Uniform grid with `points` nodes on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    let h = (hi - lo) / (points - 1) as f64;
    (0..points).map(|k| lo + h * k as f64).collect()
}

/// Numerical audit of the smoothness and tail assumptions. Never fails; the
/// report carries every measured quantity.
pub fn validate_assumption1(act: &Activation, grid: &[f64], fd_step: f64) -> AssumptionReport {
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut max_d1 = 0.0_f64;
    let mut max_d2 = 0.0_f64;
    let mut fd1 = 0.0_f64;
    let mut fd2 = 0.0_f64;
    let h = fd_step;
    for &x in grid {
        let d1 = act.d1(x);
        let d2 = act.d2(x);
        max_d1 = max_d1.max(d1.abs());
        max_d2 = max_d2.max(d2.abs());
        let num1 = (act.eval(x + h) - act.eval(x - h)) / (2.0 * h);
        let num2 = (act.d1(x + h) - act.d1(x - h)) / (2.0 * h);
        fd1 = fd1.max((num1 - d1).abs() / (1.0 + d1.abs()));
        fd2 = fd2.max((num2 - d2).abs() / (1.0 + d2.abs()));
    }
    let tail_left = act.d1(lo);
    let tail_right = act.d1(hi);
    let tail_left_error = (tail_left - act.a).abs();
    let tail_right_error = (tail_right - act.b).abs();
    AssumptionReport {
        name: act.name().to_string(),
        grid_min: lo,
        grid_max: hi,
        grid_span_ok: lo <= -50.0 && hi >= 50.0,
        value_at_zero: act.eval(0.0),
        slope_error_at_zero: (act.d1(0.0) - 1.0).abs(),
        max_abs_d1: max_d1,
        max_abs_d2: max_d2,
        tail_left,
        tail_right,
        tail_left_error,
        tail_right_error,
        fd_mismatch_d1: fd1,
        fd_mismatch_d2: fd2,
        distinct_tails: (tail_right - tail_left).abs() > 1e-3 && (act.b - act.a).abs() > 0.0,
        declared_bound_ok: max_d1 <= act.lipschitz_c && max_d2 <= act.lipschitz_c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn naive_silu(x: f64) -> f64 {
        2.0 * x / (1.0 + (-x).exp())
    }

    #[test]
    fn silu_anchor_values() {
        let s = scaled_silu();
        assert_eq!(s.eval(0.0), 0.0);
        assert_eq!(s.d1(0.0), 1.0);
        // direct evaluation of 2/(1+e^-1)
        assert_relative_eq!(s.eval(1.0), 1.462_117_157_260_009_7, epsilon = 1e-15);
        assert_relative_eq!(s.eval(1.0), naive_silu(1.0), epsilon = 1e-15);
    }

    #[test]
    fn softplus_anchor_values() {
        let s = modified_softplus();
        assert_eq!(s.eval(0.0), 0.0);
        assert_eq!(s.d1(0.0), 1.0);
        assert_eq!(s.d1(60.0), 2.0);
        // compare against the naive formula away from cancellation
        let naive = |x: f64| 2.0 * ((1.0 + x.exp()).ln() - 2.0_f64.ln());
        for x in [-5.0, -0.5, 0.3, 0.9, 1.0, 1.1, 4.0, 20.0] {
            assert_relative_eq!(s.eval(x), naive(x), max_relative = 1e-13);
        }
    }

    #[test]
    fn branches_agree_at_saturation() {
        for act in [scaled_silu(), modified_softplus()] {
            for x in [SATURATION, -SATURATION] {
                let below = x - 1e-9 * x.signum();
                let above = x + 1e-9 * x.signum();
                assert_relative_eq!(act.eval(below), act.eval(above), max_relative = 1e-10, epsilon = 1e-12);
                assert!((act.d1(below) - act.d1(above)).abs() < 1e-11);
                assert!((act.d2(below) - act.d2(above)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn validator_accepts_shipped_activations() {
        let grid = uniform_grid(-50.0, 50.0, 20_001);
        let silu = validate_assumption1(&scaled_silu(), &grid, 1e-5);
        assert!(silu.passed(1e-6, 1e-6), "{:?}", silu.failures(1e-6, 1e-6));
        assert!(silu.fd_mismatch_d1 < 1e-6);
        let sp = validate_assumption1(&modified_softplus(), &grid, 1e-5);
        assert!(sp.passed(1e-6, 1e-6), "{:?}", sp.failures(1e-6, 1e-6));
        assert!(sp.tail_left_error < 1e-6 && sp.tail_right_error < 1e-6);
    }

    #[test]
    fn validator_flags_identity() {
        fn id(x: f64) -> f64 {
            x
        }
        fn one(_: f64) -> f64 {
            1.0
        }
        fn zero(_: f64) -> f64 {
            0.0
        }
        let act = Activation::custom("identity", id, one, zero, 1.0, 1.0, 1.0);
        let r = validate_assumption1(&act, &uniform_grid(-50.0, 50.0, 101), 1e-5);
        assert!(!r.distinct_tails);
        assert!(!r.passed(1e-6, 1e-6));
    }

    #[test]
    fn small_and_large_scale_limits() {
        for act in [scaled_silu(), modified_softplus()] {
            for x in uniform_grid(-10.0, 10.0, 401) {
                let small = act.rescaled(1e-6, x);
                assert!((small - x).abs() < 1e-4 * (1.0 + x.abs()), "{} at {x}", act.name());
                let big = act.rescaled(1e6, x);
                let target = if x < 0.0 { act.a * x } else { act.b * x };
                assert!((big - target).abs() < 1e-4 * (1.0 + x.abs()), "{} at {x}", act.name());
            }
        }
    }

    #[test]
    fn unknown_name_is_config_error() {
        assert!(matches!(Activation::by_name("relu"), Err(Error::Config(_))));
        assert_eq!(Activation::by_name("scaled_silu").unwrap().name(), "scaled_silu");
    }
}
