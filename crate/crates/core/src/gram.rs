//! Per-layer empirical Gram matrices.
//!
//! `G^[l]_ij = ⟨∇_{W^[l]} f(x_i), ∇_{W^[l]} f(x_j)⟩` for the hidden layers and
//! `G^[L+1]_ij = ⟨∇_a f(x_i), ∇_a f(x_j)⟩`. The normalized family `Ḡ^[l]` is
//! built from the normalized network alone and satisfies
//! `G^[l] = (κ²/α_l²) Ḡ^[l]`; [`empirical_gram`] computes both and checks it.

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::gradflow::{backward_normalized, backward_vectors, Evaluation};
use crate::linalg::{self, dot, Matrix};
use crate::network::{forward, forward_normalized, Dataset, NormalizedParams, Params, ScalingConfig};

/// Relative tolerance of the raw/normalized cross-check.
pub const SCALING_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramStack {
    /// `G^[1] … G^[L+1]`.
    pub raw: Vec<Matrix>,
    /// `Ḡ^[1] … Ḡ^[L+1]`.
    pub normalized: Vec<Matrix>,
    /// `H̄^[1] … H̄^[L]`.
    pub h_norm: Vec<Matrix>,
    /// λ_min of each normalized matrix.
    pub min_eigs: Vec<f64>,
}

/// Normalized family only; the cheap mode used by monitors and sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedGram {
    pub normalized: Vec<Matrix>,
    pub h_norm: Vec<Matrix>,
    pub min_eigs: Vec<f64>,
}

/// Symmetric matrix with `M_ij = f(i, j)` evaluated on the upper triangle only.
pub fn symmetric_from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = f(i, j);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn inner_gram(vectors: &[&[f64]]) -> Matrix {
    symmetric_from_fn(vectors.len(), |i, j| dot(vectors[i], vectors[j]))
}

pub fn normalized_gram(
    np: &NormalizedParams,
    data: &Dataset,
    cfg: &ScalingConfig,
    act: &Activation,
) -> Result<NormalizedGram> {
    let depth = cfg.depth;
    let mut passes = Vec::with_capacity(data.len());
    let mut lambdas = Vec::with_capacity(data.len());
    for x in &data.inputs {
        let pass = forward_normalized(np, x, cfg, act)?;
        lambdas.push(backward_normalized(np, &pass, act));
        passes.push(pass);
    }
    let mut normalized = Vec::with_capacity(depth + 1);
    let mut h_norm = Vec::with_capacity(depth);
    for l in 0..depth {
        let lam: Vec<&[f64]> = lambdas.iter().map(|v| v[l].as_slice()).collect();
        let h = inner_gram(&lam);
        let prev: Vec<&[f64]> = if l == 0 {
            data.inputs.iter().map(Vec::as_slice).collect()
        } else {
            passes.iter().map(|p| p.hiddens[l - 1].as_slice()).collect()
        };
        let x_gram = inner_gram(&prev);
        normalized.push(linalg::hadamard(&h, &x_gram)?);
        h_norm.push(h);
    }
    let last: Vec<&[f64]> = passes.iter().map(|p| p.hiddens[depth - 1].as_slice()).collect();
    normalized.push(inner_gram(&last));
    let min_eigs = normalized
        .iter()
        .map(linalg::lambda_min)
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalizedGram {
        normalized,
        h_norm,
        min_eigs,
    })
}

/// Raw Gram matrices from materialized per-sample gradient blocks.
pub fn raw_gram_from_gradients(p: &Params, data: &Dataset, act: &Activation) -> Result<Vec<Matrix>> {
    let depth = p.depth();
    let n = data.len();
    let mut passes = Vec::with_capacity(n);
    let mut lambdas = Vec::with_capacity(n);
    for x in &data.inputs {
        passes.push(forward(p, x, act)?);
        lambdas.push(backward_vectors(p, x, act)?);
    }
    let mut out = Vec::with_capacity(depth + 1);
    for l in 0..depth {
        // ∇_{W^[l]} f(x_i) = λ_i^[l] ⊗ x_i^[l-1], flattened row-major
        let blocks: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let prev: &[f64] = if l == 0 { &data.inputs[i] } else { &passes[i].hiddens[l - 1] };
                let lam = &lambdas[i][l];
                let mut g = Vec::with_capacity(lam.len() * prev.len());
                for &a in lam {
                    g.extend(prev.iter().map(|&b| a * b));
                }
                g
            })
            .collect();
        let refs: Vec<&[f64]> = blocks.iter().map(Vec::as_slice).collect();
        out.push(inner_gram(&refs));
    }
    let last: Vec<&[f64]> = passes.iter().map(|p| p.hiddens[depth - 1].as_slice()).collect();
    out.push(inner_gram(&last));
    Ok(out)
}

/// Both families plus the scaling cross-check
/// `|(κ²/α_l²) Ḡ^[l] − G^[l]| ≤ 1e-8 (1 + |G^[l]|)` entrywise.
pub fn empirical_gram(
    p: &Params,
    np: &NormalizedParams,
    data: &Dataset,
    cfg: &ScalingConfig,
    act: &Activation,
) -> Result<GramStack> {
    p.check_shapes(cfg)?;
    let raw = raw_gram_from_gradients(p, data, act)?;
    let norm = normalized_gram(np, data, cfg, act)?;
    let weights = cfg.gram_weights();
    for (l, (g, gbar)) in raw.iter().zip(&norm.normalized).enumerate() {
        let n = g.rows();
        for i in 0..n {
            for j in 0..n {
                let rescaled = weights[l] * gbar[(i, j)];
                if (rescaled - g[(i, j)]).abs() > SCALING_TOL * (1.0 + g[(i, j)].abs()) {
                    return Err(Error::ScalingMismatch {
                        layer: l + 1,
                        i,
                        j,
                        raw: g[(i, j)],
                        rescaled,
                    });
                }
            }
        }
    }
    Ok(GramStack {
        raw,
        normalized: norm.normalized,
        h_norm: norm.h_norm,
        min_eigs: norm.min_eigs,
    })
}

/// `Σ_l (κ²/α_l²) Ḡ^[l]`.
pub fn total_gram(normalized: &[Matrix], cfg: &ScalingConfig) -> Result<Matrix> {
    let weights = cfg.gram_weights();
    let mut acc = normalized[0].scaled(weights[0]);
    for (g, w) in normalized.iter().zip(&weights).skip(1) {
        acc = acc.add(&g.scaled(*w))?;
    }
    Ok(acc)
}

/// `Σ_l G^[l]`.
pub fn raw_total(raw: &[Matrix]) -> Result<Matrix> {
    let mut acc = raw[0].clone();
    for g in &raw[1..] {
        acc = acc.add(g)?;
    }
    Ok(acc)
}

/// Raw per-layer Gram matrices from an existing evaluation, using
/// `G^[l]_ij = ⟨λ_i^[l], λ_j^[l]⟩ ⟨x_i^[l-1], x_j^[l-1]⟩`.
pub fn closed_form_layers(eval: &Evaluation, data: &Dataset) -> Result<Vec<Matrix>> {
    let depth = eval.lambdas.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(depth + 1);
    for l in 0..depth {
        let lam: Vec<&[f64]> = eval.lambdas.iter().map(|v| v[l].as_slice()).collect();
        let prev: Vec<&[f64]> = if l == 0 {
            data.inputs.iter().map(Vec::as_slice).collect()
        } else {
            eval.passes.iter().map(|p| p.hiddens[l - 1].as_slice()).collect()
        };
        out.push(linalg::hadamard(&inner_gram(&lam), &inner_gram(&prev))?);
    }
    let last: Vec<&[f64]> = eval.passes.iter().map(|p| p.hiddens[depth - 1].as_slice()).collect();
    out.push(inner_gram(&last));
    Ok(out)
}

pub fn closed_form_total(eval: &Evaluation, data: &Dataset) -> Result<Matrix> {
    raw_total(&closed_form_layers(eval, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::scaled_silu;
    use crate::gradflow::evaluate;
    use crate::network::{generate_dataset, init_params, make_scaling, normalize, LabelLaw};
    use approx::assert_relative_eq;

    #[test]
    fn identical_last_hiddens_give_constant_matrix() {
        // duplicated input → identical x̄^[L]
        let cfg = make_scaling(2, 6, 3, &[0.5, 0.5, 0.0]).unwrap();
        let np = normalize(&init_params(&cfg, 1), &cfg);
        let x = vec![0.6, 0.0, 0.8];
        let ds = Dataset::new(vec![x.clone(), x.clone(), x], vec![0.0; 3]).unwrap();
        let g = normalized_gram(&np, &ds, &cfg, &scaled_silu()).unwrap();
        let top = &g.normalized[2];
        let v = top[(0, 0)];
        assert!(top.as_slice().iter().all(|&e| e == v));
    }

    #[test]
    fn one_neuron_hand_expansion() {
        // L=1, m=1, d=2: f = a σ(w·x)
        let cfg = make_scaling(1, 1, 2, &[0.0, 0.0]).unwrap();
        let p = Params {
            weights: vec![Matrix::from_rows(&[&[0.7, -0.4]])],
            output: vec![1.3],
        };
        let np = normalize(&p, &cfg);
        let xs = vec![vec![1.0, 0.0], vec![0.6, 0.8]];
        let ds = Dataset::new(xs.clone(), vec![0.0, 0.0]).unwrap();
        let act = scaled_silu();
        let g = empirical_gram(&p, &np, &ds, &cfg, &act).unwrap();
        let z: Vec<f64> = xs.iter().map(|x| 0.7 * x[0] - 0.4 * x[1]).collect();
        for i in 0..2 {
            for j in 0..2 {
                let xx = xs[i][0] * xs[j][0] + xs[i][1] * xs[j][1];
                let g1 = 1.3 * 1.3 * act.d1(z[i]) * act.d1(z[j]) * xx;
                let g2 = act.eval(z[i]) * act.eval(z[j]);
                assert_relative_eq!(g.raw[0][(i, j)], g1, max_relative = 1e-14);
                assert_relative_eq!(g.raw[1][(i, j)], g2, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn scaling_relation_and_totals() {
        let cfg = make_scaling(3, 10, 4, &[0.2, 0.4, 0.5, 0.1]).unwrap();
        let p = init_params(&cfg, 2);
        let np = normalize(&p, &cfg);
        let ds = generate_dataset(4, 4, 1.0, 0.01, LabelLaw::Uniform, 3).unwrap();
        let act = scaled_silu();
        let gs = empirical_gram(&p, &np, &ds, &cfg, &act).unwrap();
        let t1 = total_gram(&gs.normalized, &cfg).unwrap();
        let t2 = raw_total(&gs.raw).unwrap();
        for (a, b) in t1.as_slice().iter().zip(t2.as_slice()) {
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
        let lmin_total = linalg::lambda_min(&t2).unwrap();
        for g in &gs.raw {
            assert!(lmin_total >= linalg::lambda_min(g).unwrap() - 1e-8);
        }
        let eval = evaluate(&p, &ds, &act).unwrap();
        let closed = closed_form_layers(&eval, &ds).unwrap();
        for (a, b) in closed.iter().zip(&gs.raw) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert_relative_eq!(x, y, max_relative = 1e-10, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn top_h_matches_coordinate_sum() {
        let cfg = make_scaling(2, 16, 3, &[0.5, 0.5, 0.0]).unwrap();
        let np = normalize(&init_params(&cfg, 4), &cfg);
        let ds = generate_dataset(3, 3, 1.0, 0.01, LabelLaw::Uniform, 5).unwrap();
        let act = scaled_silu();
        let g = normalized_gram(&np, &ds, &cfg, &act).unwrap();
        let args: Vec<Vec<f64>> = ds
            .inputs
            .iter()
            .map(|x| forward_normalized(&np, x, &cfg, &act).unwrap().args[1].clone())
            .collect();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..16 {
                    s += act.d1(args[i][k]) * np.output[k] * act.d1(args[j][k]) * np.output[k];
                }
                assert!((g.h_norm[1][(i, j)] - s).abs() <= 1e-12 * (1.0 + s.abs()));
            }
        }
    }
}
