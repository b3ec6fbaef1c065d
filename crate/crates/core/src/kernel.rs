//! Limiting kernels of the normalized network, evaluated by Gauss–Hermite quadrature.
//!
//! With `K̃^[0] = ⟨x_i, x_j⟩` and `(u, v) ~ N(0, Ã)` where `Ã` is the 2×2 block of
//! `K̃^[l-1]` on samples i, j:
//!
//! * `K̃^[l]_ij = E[σ(ε_l u) σ(ε_l v)] / ε_l²`
//! * `Ĩ^[l]_ij = E[σ′(ε_l u) σ′(ε_l v)]`
//! * `K^[L+1] = K̃^[L]`, `K^[l] = K̃^[l-1] ⊙ Ĩ^[l] ⊙ … ⊙ Ĩ^[L]`
//!
//! and `λ_S = min_l λ_min(K^[l])`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::gram::{normalized_gram, symmetric_from_fn};
use crate::linalg::{self, Matrix};
use crate::network::{init_params, normalize, Dataset, ScalingConfig};

/// Correlations are kept inside [−1 + CLAMP, 1 − CLAMP].
pub const CORRELATION_CLAMP: f64 = 1e-9;
pub const DEFAULT_ORDER: usize = 80;
pub const DEFAULT_CONFIRM_TOL: f64 = 1e-8;

/// Probabilists' Gauss–Hermite rule: `Σ w_k f(z_k) ≈ E[f(Z)]`, `Z ~ N(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HermiteRule {
    /// Golub–Welsch: nodes are the eigenvalues of the Jacobi matrix with zero
    /// diagonal and off-diagonal √k; weights are squared first components.
    pub fn new(order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::contract("quadrature order must be positive"));
        }
        let jac = Matrix::from_fn(order, order, |i, j| {
            if i + 1 == j {
                (j as f64).sqrt()
            } else if j + 1 == i {
                (i as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = linalg::symmetric_eigen(&jac, 1e-15)?;
        let mut weights: Vec<f64> = (0..order).map(|k| eig.vectors[(0, k)].powi(2)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(HermiteRule {
            nodes: eig.values,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }
}

/// Covariance of a centred Gaussian pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Covariance2 {
    pub k_ii: f64,
    pub k_ij: f64,
    pub k_jj: f64,
}

impl Covariance2 {
    pub fn new(k_ii: f64, k_ij: f64, k_jj: f64) -> Result<Self> {
        let indefinite = Error::IndefiniteCovariance { k_ii, k_ij, k_jj };
        if !(k_ii > 0.0) || !(k_jj > 0.0) || !k_ij.is_finite() {
            return Err(indefinite);
        }
        if k_ii * k_jj - k_ij * k_ij < -1e-12 * k_ii * k_jj {
            return Err(indefinite);
        }
        Ok(Covariance2 { k_ii, k_ij, k_jj })
    }

    /// Clamped correlation.
    pub fn rho(&self) -> f64 {
        let r = self.k_ij / (self.k_ii * self.k_jj).sqrt();
        r.clamp(-1.0 + CORRELATION_CLAMP, 1.0 - CORRELATION_CLAMP)
    }
}

/// `E[f(u, v)]` for `(u, v) ~ N(0, A)` by the tensor rule on
/// `u = √k_ii z₁`, `v = √k_jj (ρ z₁ + √(1−ρ²) z₂)`.
pub fn gauss2_expect(f: impl Fn(f64, f64) -> f64, cov: &Covariance2, rule: &HermiteRule) -> f64 {
    let su = cov.k_ii.sqrt();
    let sv = cov.k_jj.sqrt();
    let rho = cov.rho();
    let tau = (1.0 - rho * rho).sqrt();
    let mut total = 0.0;
    for (&z1, &w1) in rule.nodes.iter().zip(&rule.weights) {
        let u = su * z1;
        let mut inner = 0.0;
        for (&z2, &w2) in rule.nodes.iter().zip(&rule.weights) {
            inner += w2 * f(u, sv * (rho * z1 + tau * z2));
        }
        total += w1 * inner;
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub order: usize,
    /// Recompute at twice the order and require every entry to move less than this.
    pub confirm_tol: Option<f64>,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            order: DEFAULT_ORDER,
            confirm_tol: Some(DEFAULT_CONFIRM_TOL),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelStack {
    /// `K̃^[0] … K̃^[L]`.
    pub ktilde: Vec<Matrix>,
    /// `Ĩ^[1] … Ĩ^[L]`.
    pub itilde: Vec<Matrix>,
    /// `K^[1] … K^[L+1]`.
    pub k: Vec<Matrix>,
    pub lambda_s: f64,
    pub quad_order: usize,
    /// The ε_l used at each level.
    pub eps: Vec<f64>,
}

/// Value and derivative kernels at one level.
fn level(prev: &Matrix, eps: f64, act: &Activation, rule: &HermiteRule) -> Result<(Matrix, Matrix)> {
    let n = prev.rows();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                let s = prev[(i, i)].sqrt();
                if !(prev[(i, i)] > 0.0) {
                    return Err(Error::IndefiniteCovariance {
                        k_ii: prev[(i, i)],
                        k_ij: prev[(i, i)],
                        k_jj: prev[(i, i)],
                    });
                }
                let kt = rule.expect(|z| act.rescaled(eps, s * z).powi(2));
                let it = rule.expect(|z| act.d1(eps * s * z).powi(2));
                return Ok((kt, it));
            }
            let cov = Covariance2::new(prev[(i, i)], prev[(i, j)], prev[(j, j)])?;
            Ok(gauss2_pair(act, eps, &cov, rule))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut kt = Matrix::zeros(n, n);
    let mut it = Matrix::zeros(n, n);
    for (&(i, j), &(a, b)) in pairs.iter().zip(&values) {
        kt[(i, j)] = a;
        kt[(j, i)] = a;
        it[(i, j)] = b;
        it[(j, i)] = b;
    }
    Ok((kt, it))
}

/// Joint evaluation of both integrands, sharing the u-side activation values.
fn gauss2_pair(act: &Activation, eps: f64, cov: &Covariance2, rule: &HermiteRule) -> (f64, f64) {
    let su = cov.k_ii.sqrt();
    let sv = cov.k_jj.sqrt();
    let rho = cov.rho();
    let tau = (1.0 - rho * rho).sqrt();
    let mut kt = 0.0;
    let mut it = 0.0;
    for (&z1, &w1) in rule.nodes.iter().zip(&rule.weights) {
        let u = su * z1;
        let fu = act.rescaled(eps, u);
        let du = act.d1(eps * u);
        let mut sk = 0.0;
        let mut si = 0.0;
        for (&z2, &w2) in rule.nodes.iter().zip(&rule.weights) {
            let v = sv * (rho * z1 + tau * z2);
            sk += w2 * act.rescaled(eps, v);
            si += w2 * act.d1(eps * v);
        }
        kt += w1 * fu * sk;
        it += w1 * du * si;
    }
    (kt, it)
}

fn input_gram(data: &Dataset) -> Matrix {
    symmetric_from_fn(data.len(), |i, j| linalg::dot(&data.inputs[i], &data.inputs[j]))
}

fn kernels_at_order(data: &Dataset, eps: &[f64], act: &Activation, rule: &HermiteRule) -> Result<KernelStack> {
    let depth = eps.len();
    let mut ktilde = vec![input_gram(data)];
    let mut itilde = Vec::with_capacity(depth);
    for &e in eps {
        let (kt, it) = level(ktilde.last().expect("non-empty"), e, act, rule)?;
        ktilde.push(kt);
        itilde.push(it);
    }
    let mut k = Vec::with_capacity(depth + 1);
    for l in 1..=depth {
        let mut acc = ktilde[l - 1].clone();
        for it in &itilde[l - 1..] {
            acc = linalg::hadamard(&acc, it)?;
        }
        k.push(acc);
    }
    k.push(ktilde[depth].clone());
    let mut lambda_s = f64::INFINITY;
    for m in &k {
        lambda_s = lambda_s.min(linalg::lambda_min(m)?);
    }
    Ok(KernelStack {
        ktilde,
        itilde,
        k,
        lambda_s,
        quad_order: rule.order(),
        eps: eps.to_vec(),
    })
}

fn confirm(a: &KernelStack, b: &KernelStack, tol: f64) -> Result<()> {
    let families: [(&'static str, &[Matrix], usize); 3] =
        [("Ktilde", &a.ktilde, 0), ("Itilde", &a.itilde, 1), ("K", &a.k, 1)];
    let others: [&[Matrix]; 3] = [&b.ktilde, &b.itilde, &b.k];
    let mut worst: Option<(f64, &'static str, usize, usize, usize)> = None;
    for ((name, mats, offset), other) in families.iter().zip(others) {
        for (l, (m1, m2)) in mats.iter().zip(other).enumerate() {
            let n = m1.rows();
            for i in 0..n {
                for j in 0..n {
                    let d = (m1[(i, j)] - m2[(i, j)]).abs();
                    if worst.is_none_or(|w| d > w.0) {
                        worst = Some((d, name, l + offset, i, j));
                    }
                }
            }
        }
    }
    match worst {
        Some((delta, matrix, layer, i, j)) if delta > tol => Err(Error::QuadratureUnconfirmed {
            order: a.quad_order,
            matrix,
            layer,
            i,
            j,
            delta,
        }),
        _ => Ok(()),
    }
}

/// Kernel stack with explicitly chosen ε_1..ε_L.
pub fn limiting_kernels_with_eps(
    data: &Dataset,
    eps: &[f64],
    act: &Activation,
    settings: &QuadratureSettings,
) -> Result<KernelStack> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::contract("eps values must be positive and finite"));
    }
    if settings.order < 2 {
        return Err(Error::contract("quadrature order must be at least 2"));
    }
    let rule = HermiteRule::new(settings.order)?;
    let stack = kernels_at_order(data, eps, act, &rule)?;
    if let Some(tol) = settings.confirm_tol {
        let fine = kernels_at_order(data, eps, act, &HermiteRule::new(2 * settings.order)?)?;
        confirm(&stack, &fine, tol)?;
    }
    Ok(stack)
}

/// Kernel stack at the config's finite-width ε_l.
pub fn limiting_kernels(
    data: &Dataset,
    cfg: &ScalingConfig,
    act: &Activation,
    settings: &QuadratureSettings,
) -> Result<KernelStack> {
    if data.dim() != cfg.input_dim {
        return Err(Error::contract("dataset dimension does not match config"));
    }
    limiting_kernels_with_eps(data, &cfg.eps, act, settings)
}

/// `(1/π)(c(π − arccos c) + √(1 − c²))`.
pub fn relu_ntk_asymptote(c: f64) -> f64 {
    let c = c.clamp(-1.0, 1.0);
    (c * (PI - c.acos()) + (1.0 - c * c).max(0.0).sqrt()) / PI
}

/// `E[ℓ(u)ℓ(v)]` for unit-variance `(u, v)` with correlation `c` and
/// `ℓ(x) = a x` for x < 0, `b x` for x > 0.
pub fn piecewise_linear_asymptote(a: f64, b: f64, c: f64) -> f64 {
    let half = |c: f64| relu_ntk_asymptote(c) / 2.0;
    (a * a + b * b) * half(c) - 2.0 * a * b * half(-c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSample {
    pub x0: f64,
    pub eps: f64,
    /// `E[(σ(εu)/ε)²] / x0²`.
    pub value_ratio: f64,
    /// `E[σ′(εu)²]`.
    pub deriv_moment: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBounds {
    pub mu1: f64,
    pub mu2: f64,
    pub samples: Vec<MomentSample>,
    /// Values at the smallest ε, expected near (1, 1).
    pub small_eps_limit: (f64, f64),
    /// Values at the largest ε, expected near ((a²+b²)/2, (a²+b²)/2).
    pub large_eps_limit: (f64, f64),
    pub predicted_large_eps: f64,
}

pub const MOMENT_ORDER: usize = 96;

/// Log-spaced grid from `10^lo` to `10^hi` with `per_decade` points per decade.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let count = ((hi - lo) * per_decade as f64).round() as usize;
    (0..=count)
        .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / count.max(1) as f64))
        .collect()
}

/// Empirical μ₁, μ₂ with `μ₁ x0² ≤ E[(σ(εu)/ε)²] ≤ μ₂ x0²` and
/// `μ₁ ≤ E[σ′(εu)²] ≤ μ₂` over `x0 ∈ [lo, hi]` and the ε grid.
pub fn second_moment_bounds(
    act: &Activation,
    x0_range: (f64, f64),
    x0_points: usize,
    eps_grid: &[f64],
) -> Result<MomentBounds> {
    let (lo, hi) = x0_range;
    if !(lo > 0.0) || hi < lo {
        return Err(Error::contract("x0 range must satisfy 0 < lo <= hi"));
    }
    let emin = eps_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let emax = eps_grid.iter().copied().fold(0.0, f64::max);
    if !(emin > 0.0) || (emax / emin).log10() < 6.0 - 1e-9 {
        return Err(Error::contract("eps grid must be positive and span at least six decades"));
    }
    let rule = HermiteRule::new(MOMENT_ORDER)?;
    let x0s: Vec<f64> = if x0_points <= 1 || hi == lo {
        vec![lo]
    } else {
        (0..x0_points)
            .map(|k| lo * (hi / lo).powf(k as f64 / (x0_points - 1) as f64))
            .collect()
    };
    let mut samples = Vec::with_capacity(x0s.len() * eps_grid.len());
    for &x0 in &x0s {
        for &eps in eps_grid {
            let value = rule.expect(|z| act.rescaled(eps, x0 * z).powi(2));
            let deriv = rule.expect(|z| act.d1(eps * x0 * z).powi(2));
            samples.push(MomentSample {
                x0,
                eps,
                value_ratio: value / (x0 * x0),
                deriv_moment: deriv,
            });
        }
    }
    let all = samples.iter().flat_map(|s| [s.value_ratio, s.deriv_moment]);
    let mu1 = all.clone().fold(f64::INFINITY, f64::min);
    let mu2 = all.fold(f64::NEG_INFINITY, f64::max);
    if !(mu1 > 0.0) {
        return Err(Error::NonPositiveMoment(mu1));
    }
    let pick = |target: f64| {
        let s = samples
            .iter()
            .find(|s| s.x0 == x0s[0] && s.eps == target)
            .expect("grid point present");
        (s.value_ratio, s.deriv_moment)
    };
    Ok(MomentBounds {
        mu1,
        mu2,
        small_eps_limit: pick(emin),
        large_eps_limit: pick(emax),
        predicted_large_eps: (act.a * act.a + act.b * act.b) / 2.0,
        samples,
    })
}

/// Lower bound on `λ_min(K^[l])` from repeated application of the Hadamard
/// eigenvalue bound: `c_n^{L−l+1} ∏_{k=l}^{L} ∏_i Ĩ^[k]_ii · det(K̃^[l−1])`.
pub fn hadamard_chain_bound(stack: &KernelStack, l: usize) -> Result<f64> {
    let depth = stack.itilde.len();
    if l == 0 || l > depth {
        return Err(Error::contract(format!("layer {l} has no derivative chain")));
    }
    let n = stack.ktilde[0].rows();
    let prefactor = linalg::hadamard_bound_prefactor(n).powi((depth - l + 1) as i32);
    let diag: f64 = stack.itilde[l - 1..]
        .iter()
        .map(|m| m.diagonal().iter().product::<f64>())
        .product();
    Ok(prefactor * diag * linalg::spd_determinant(&stack.ktilde[l - 1])?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub width: usize,
    /// 1-based layer index, L+1 for the output layer.
    pub layer: usize,
    pub median_error: f64,
    pub q1_error: f64,
    pub q3_error: f64,
    /// Fraction of seeds with `λ_min(Ḡ^[l]) ≥ (3/4) λ_S`.
    pub floor_fraction: f64,
    pub lambda_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationTable {
    pub rows: Vec<ConcentrationRow>,
    pub seeds: usize,
}

impl ConcentrationTable {
    pub fn rows_for_layer(&self, layer: usize) -> Vec<&ConcentrationRow> {
        self.rows.iter().filter(|r| r.layer == layer).collect()
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// `‖Ḡ^[l](θ⁰) − K^[l]‖_∞` (max entry) and the (3/4)λ_S floor, per width and layer.
pub fn concentration_experiment(
    configs: &[ScalingConfig],
    data: &Dataset,
    act: &Activation,
    seeds: &[u64],
    settings: &QuadratureSettings,
) -> Result<ConcentrationTable> {
    let mut rows = Vec::new();
    for cfg in configs {
        let ks = limiting_kernels(data, cfg, act, settings)?;
        let per_seed: Vec<(Vec<f64>, Vec<bool>)> = seeds
            .par_iter()
            .map(|&seed| {
                let np = normalize(&init_params(cfg, seed), cfg);
                let g = normalized_gram(&np, data, cfg, act)?;
                let errs = g
                    .normalized
                    .iter()
                    .zip(&ks.k)
                    .map(|(a, b)| Ok(a.sub(b)?.max_abs()))
                    .collect::<Result<Vec<f64>>>()?;
                let floors = g.min_eigs.iter().map(|&e| e >= 0.75 * ks.lambda_s).collect();
                Ok((errs, floors))
            })
            .collect::<Result<Vec<_>>>()?;
        for l in 0..=cfg.depth {
            let mut errs: Vec<f64> = per_seed.iter().map(|(e, _)| e[l]).collect();
            errs.sort_by(f64::total_cmp);
            let hits = per_seed.iter().filter(|(_, f)| f[l]).count();
            rows.push(ConcentrationRow {
                width: cfg.width,
                layer: l + 1,
                median_error: quantile(&errs, 0.5),
                q1_error: quantile(&errs, 0.25),
                q3_error: quantile(&errs, 0.75),
                floor_fraction: hits as f64 / seeds.len().max(1) as f64,
                lambda_s: ks.lambda_s,
            });
        }
    }
    Ok(ConcentrationTable {
        rows,
        seeds: seeds.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{modified_softplus, scaled_silu};
    use crate::network::{generate_dataset, make_scaling, LabelLaw};
    use approx::assert_relative_eq;

    #[test]
    fn hermite_rule_moments() {
        let rule = HermiteRule::new(20).unwrap();
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(rule.expect(|z| z * z), 1.0, epsilon = 1e-12);
        assert_relative_eq!(rule.expect(|z| z.powi(4)), 3.0, epsilon = 1e-11);
        assert!(rule.expect(|z| z.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn polynomial_expectations_are_exact() {
        let rule = HermiteRule::new(DEFAULT_ORDER).unwrap();
        let cov = Covariance2::new(1.0, 0.3, 1.0).unwrap();
        assert_relative_eq!(gauss2_expect(|u, v| u * v, &cov, &rule), 0.3, epsilon = 1e-12);
        let cov = Covariance2::new(2.5, -0.7, 0.4).unwrap();
        assert_relative_eq!(gauss2_expect(|u, _| u * u, &cov, &rule), 2.5, epsilon = 1e-12);
        assert_relative_eq!(gauss2_expect(|_, v| v * v, &cov, &rule), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn covariance_rejects_indefinite() {
        assert!(Covariance2::new(1.0, 2.0, 1.0).is_err());
        assert!(Covariance2::new(0.0, 0.0, 1.0).is_err());
        let c = Covariance2::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.rho(), 1.0 - CORRELATION_CLAMP);
    }

    #[test]
    fn asymptote_anchor_values() {
        assert_relative_eq!(relu_ntk_asymptote(1.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(relu_ntk_asymptote(0.0), 1.0 / PI, epsilon = 1e-15);
        assert!(relu_ntk_asymptote(-1.0).abs() < 1e-15);
        for c in [-0.9, -0.2, 0.0, 0.5, 0.99] {
            assert_relative_eq!(piecewise_linear_asymptote(0.0, 2.0, c), 2.0 * relu_ntk_asymptote(c), epsilon = 1e-15);
            // a = b gives the linear kernel b² c
            assert_relative_eq!(piecewise_linear_asymptote(1.5, 1.5, c), 2.25 * c, epsilon = 1e-14);
        }
    }

    #[test]
    fn tiny_eps_recovers_inner_products() {
        let ds = generate_dataset(3, 4, 1.0, 0.01, LabelLaw::Uniform, 1).unwrap();
        let ks = limiting_kernels_with_eps(&ds, &[1e-7], &scaled_silu(), &QuadratureSettings::default()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((ks.ktilde[1][(i, j)] - ks.ktilde[0][(i, j)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn stack_structure() {
        let ds = generate_dataset(4, 6, 1.0, 0.01, LabelLaw::Uniform, 2).unwrap();
        let cfg = make_scaling(2, 128, 6, &[0.5, 0.5, 0.0]).unwrap();
        let ks = limiting_kernels(&ds, &cfg, &modified_softplus(), &QuadratureSettings::default()).unwrap();
        assert_eq!(ks.ktilde.len(), 3);
        assert_eq!(ks.itilde.len(), 2);
        assert_eq!(ks.k.len(), 3);
        assert_eq!(ks.k[2], ks.ktilde[2]);
        let manual = linalg::hadamard(&linalg::hadamard(&ks.ktilde[0], &ks.itilde[0]).unwrap(), &ks.itilde[1]).unwrap();
        assert_eq!(ks.k[0], manual);
        assert!(ks.lambda_s > 0.0);
        for l in 1..=2 {
            let bound = hadamard_chain_bound(&ks, l).unwrap();
            assert!(linalg::lambda_min(&ks.k[l - 1]).unwrap() >= bound);
        }
    }

    #[test]
    fn moment_limits() {
        let grid = log_grid(-6.0, 6.0, 4);
        let mb = second_moment_bounds(&scaled_silu(), (1.0, 1.0), 1, &grid).unwrap();
        assert_relative_eq!(mb.small_eps_limit.0, 1.0, epsilon = 1e-5);
        assert_relative_eq!(mb.small_eps_limit.1, 1.0, epsilon = 1e-5);
        assert_relative_eq!(mb.large_eps_limit.0, 2.0, epsilon = 1e-3);
        assert_eq!(mb.predicted_large_eps, 2.0);
        for s in &mb.samples {
            assert!(mb.mu1 <= s.value_ratio && s.value_ratio <= mb.mu2);
            assert!(mb.mu1 <= s.deriv_moment && s.deriv_moment <= mb.mu2);
        }
        assert!(second_moment_bounds(&scaled_silu(), (1.0, 1.0), 1, &log_grid(0.0, 3.0, 2)).is_err());
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
    }
}
