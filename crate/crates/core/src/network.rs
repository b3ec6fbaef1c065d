//! Fully connected network `f(x) = aᵀ σ(W^[L] … σ(W^[1] x))`, its initialization,
//! the normalized reparametrization, and the synthetic dataset.
//!
//! Layers are numbered from 1 in documentation and error messages; vectors in
//! this module are 0-based, so `weights[l - 1]` is `W^[l]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Matrix};
use crate::rng::{gaussian_stream, stream, Purpose};

/// Widths, depth and the derived initialization scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    /// Number of hidden layers L.
    pub depth: usize,
    /// Hidden width m.
    pub width: usize,
    /// Input dimension d.
    pub input_dim: usize,
    /// Exponents γ_1..γ_{L+1}.
    pub gamma: Vec<f64>,
    /// β_l = m^{-γ_l}, the initial standard deviations.
    pub beta: Vec<f64>,
    /// α_l = √m β_l.
    pub alpha: Vec<f64>,
    /// κ = ∏ α_l.
    pub kappa: f64,
    /// ε_l = (1/√m) ∏_{k≤l} α_k for l = 1..L.
    pub eps: Vec<f64>,
    /// s = (L+1)/2 − Σ γ_l; the run is lazy when s > 0.
    pub laziness: f64,
}

pub fn make_scaling(depth: usize, width: usize, input_dim: usize, gamma: &[f64]) -> Result<ScalingConfig> {
    if depth == 0 || width == 0 || input_dim == 0 {
        return Err(Error::contract(format!(
            "depth, width and input dimension must be positive (got L={depth}, m={width}, d={input_dim})"
        )));
    }
    if gamma.len() != depth + 1 {
        return Err(Error::contract(format!(
            "expected {} exponents for depth {depth}, got {}",
            depth + 1,
            gamma.len()
        )));
    }
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(Error::contract("exponents must be finite"));
    }
    let m = width as f64;
    let sqrt_m = m.sqrt();
    let beta: Vec<f64> = gamma.iter().map(|g| m.powf(-g)).collect();
    let alpha: Vec<f64> = beta.iter().map(|b| sqrt_m * b).collect();
    let kappa = alpha.iter().product();
    let mut eps = Vec::with_capacity(depth);
    let mut prefix = 1.0;
    for a in &alpha[..depth] {
        prefix *= a;
        eps.push(prefix / sqrt_m);
    }
    let laziness = (depth as f64 + 1.0) / 2.0 - gamma.iter().sum::<f64>();
    Ok(ScalingConfig {
        depth,
        width,
        input_dim,
        gamma: gamma.to_vec(),
        beta,
        alpha,
        kappa,
        eps,
        laziness,
    })
}

impl ScalingConfig {
    pub fn is_lazy(&self) -> bool {
        self.laziness > 0.0
    }

    /// `∏_{k≤l} α_k`, the factor between raw and normalized hidden vectors
    /// (1 for l = 0).
    pub fn prefix_alpha(&self, l: usize) -> f64 {
        self.alpha[..l].iter().product()
    }

    /// `κ² / α_l²` for l = 1..L+1, the weight of layer l in the total Gram matrix.
    pub fn gram_weights(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .map(|a| (self.kappa / a) * (self.kappa / a))
            .collect()
    }

    pub fn gram_weight_sum(&self) -> f64 {
        self.gram_weights().iter().sum()
    }

    /// Shape of `W^[l]`, 1-based.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        if l == 1 {
            (self.width, self.input_dim)
        } else {
            (self.width, self.width)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub weights: Vec<Matrix>,
    pub output: Vec<f64>,
}

/// `W̄^[l]/√m = W^[l]/α_l` and `ā/√m = a/α_{L+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParams {
    pub weights: Vec<Matrix>,
    pub output: Vec<f64>,
}

impl Params {
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn width(&self) -> usize {
        self.output.len()
    }

    pub fn zeros(cfg: &ScalingConfig) -> Self {
        Params {
            weights: (1..=cfg.depth)
                .map(|l| {
                    let (r, c) = cfg.layer_shape(l);
                    Matrix::zeros(r, c)
                })
                .collect(),
            output: vec![0.0; cfg.width],
        }
    }

    pub fn check_shapes(&self, cfg: &ScalingConfig) -> Result<()> {
        if self.weights.len() != cfg.depth || self.output.len() != cfg.width {
            return Err(Error::contract(format!(
                "params have {} layers and output width {}, config expects {} and {}",
                self.weights.len(),
                self.output.len(),
                cfg.depth,
                cfg.width
            )));
        }
        for (k, w) in self.weights.iter().enumerate() {
            if w.shape() != cfg.layer_shape(k + 1) {
                return Err(Error::contract(format!(
                    "W^[{}] has shape {:?}, expected {:?}",
                    k + 1,
                    w.shape(),
                    cfg.layer_shape(k + 1)
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite) && self.output.iter().all(|v| v.is_finite())
    }
}

pub fn normalize(p: &Params, cfg: &ScalingConfig) -> NormalizedParams {
    NormalizedParams {
        weights: p
            .weights
            .iter()
            .zip(&cfg.alpha)
            .map(|(w, a)| {
                let mut out = w.clone();
                out.as_mut_slice().iter_mut().for_each(|v| *v /= a);
                out
            })
            .collect(),
        output: p.output.iter().map(|v| v / cfg.alpha[cfg.depth]).collect(),
    }
}

pub fn denormalize(np: &NormalizedParams, cfg: &ScalingConfig) -> Params {
    Params {
        weights: np
            .weights
            .iter()
            .zip(&cfg.alpha)
            .map(|(w, a)| w.scaled(*a))
            .collect(),
        output: np.output.iter().map(|v| v * cfg.alpha[cfg.depth]).collect(),
    }
}

/// Draws `W^[l]` (1-based) with i.i.d. N(0, β_l²) entries from its own substream.
pub fn init_layer(cfg: &ScalingConfig, seed: u64, l: usize) -> Matrix {
    let (r, c) = cfg.layer_shape(l);
    let mut w = Matrix::zeros(r, c);
    gaussian_stream(seed, Purpose::Weights, l as u64).fill(w.as_mut_slice(), cfg.beta[l - 1]);
    w
}

pub fn init_output(cfg: &ScalingConfig, seed: u64) -> Vec<f64> {
    let mut a = vec![0.0; cfg.width];
    gaussian_stream(seed, Purpose::Output, 0).fill(&mut a, cfg.beta[cfg.depth]);
    a
}

pub fn init_params(cfg: &ScalingConfig, seed: u64) -> Params {
    Params {
        weights: (1..=cfg.depth).map(|l| init_layer(cfg, seed, l)).collect(),
        output: init_output(cfg, seed),
    }
}

/// Result of a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardPass {
    pub output: f64,
    /// `x^[1] … x^[L]`.
    pub hiddens: Vec<Vec<f64>>,
    /// `W^[l] x^[l-1]` for l = 1..L; σ′ is evaluated here.
    pub preacts: Vec<Vec<f64>>,
}

fn check_finite(v: &[f64], layer: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer })
    }
}

pub fn forward(p: &Params, x: &[f64], act: &Activation) -> Result<ForwardPass> {
    let depth = p.depth();
    if depth == 0 {
        return Err(Error::contract("network has no layers"));
    }
    if p.weights[0].cols() != x.len() {
        return Err(Error::contract(format!(
            "input has dimension {}, W^[1] expects {}",
            x.len(),
            p.weights[0].cols()
        )));
    }
    let mut hiddens: Vec<Vec<f64>> = Vec::with_capacity(depth);
    let mut preacts = Vec::with_capacity(depth);
    for (k, w) in p.weights.iter().enumerate() {
        let prev: &[f64] = if k == 0 { x } else { &hiddens[k - 1] };
        let z = w.matvec(prev);
        let h: Vec<f64> = z.iter().map(|&v| act.eval(v)).collect();
        check_finite(&h, k + 1)?;
        preacts.push(z);
        hiddens.push(h);
    }
    let last = &hiddens[depth - 1];
    if last.len() != p.output.len() {
        return Err(Error::contract("output vector does not match last hidden width"));
    }
    let output = dot(&p.output, last);
    if !output.is_finite() {
        return Err(Error::NonFinite { layer: depth + 1 });
    }
    Ok(ForwardPass {
        output,
        hiddens,
        preacts,
    })
}

/// Forward pass of the normalized network.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedForward {
    pub output: f64,
    /// `x̄^[1] … x̄^[L]`.
    pub hiddens: Vec<Vec<f64>>,
    /// Arguments of σ at each layer; these coincide with the raw preactivations.
    pub args: Vec<Vec<f64>>,
}

/// Normalized forward pass
/// `x̄^[l] = σ(P_l · (W̄^[l]/√m) x̄^[l-1]) / P_l` with `P_l = ∏_{k≤l} α_k = √m ε_l`,
/// `x̄^[0] = x`, `f̄ = (ā/√m)ᵀ x̄^[L]`.
pub fn forward_normalized(
    np: &NormalizedParams,
    x: &[f64],
    cfg: &ScalingConfig,
    act: &Activation,
) -> Result<NormalizedForward> {
    let depth = cfg.depth;
    if np.weights.len() != depth || np.weights[0].cols() != x.len() {
        return Err(Error::contract("normalized params do not match config or input"));
    }
    let mut hiddens: Vec<Vec<f64>> = Vec::with_capacity(depth);
    let mut args = Vec::with_capacity(depth);
    let mut scale = 1.0;
    for (k, w) in np.weights.iter().enumerate() {
        scale *= cfg.alpha[k];
        let prev = if k == 0 { x } else { &hiddens[k - 1] };
        let z: Vec<f64> = w.matvec(prev).into_iter().map(|v| scale * v).collect();
        let h: Vec<f64> = z.iter().map(|&v| act.eval(v) / scale).collect();
        check_finite(&h, k + 1)?;
        args.push(z);
        hiddens.push(h);
    }
    let output = dot(&np.output, &hiddens[depth - 1]);
    if !output.is_finite() {
        return Err(Error::NonFinite { layer: depth + 1 });
    }
    Ok(NormalizedForward {
        output,
        hiddens,
        args,
    })
}

/// The normalized network written exactly as its definition reads:
/// `x̄^[l] = (1/√m) σ(s_l W̄^[l] x̄^[l-1]) / s_l` with `s_l = (√m)^{l-1} ∏_{k≤l} β_k`.
pub fn forward_normalized_literal(
    np: &NormalizedParams,
    x: &[f64],
    cfg: &ScalingConfig,
    act: &Activation,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let sqrt_m = (cfg.width as f64).sqrt();
    let mut hiddens: Vec<Vec<f64>> = Vec::with_capacity(cfg.depth);
    let mut beta_prod = 1.0;
    for (k, w_over) in np.weights.iter().enumerate() {
        beta_prod *= cfg.beta[k];
        let s = sqrt_m.powi(k as i32) * beta_prod;
        let w_bar = w_over.scaled(sqrt_m);
        let prev = if k == 0 { x } else { &hiddens[k - 1] };
        let h: Vec<f64> = w_bar
            .matvec(prev)
            .into_iter()
            .map(|v| act.eval(s * v) / s / sqrt_m)
            .collect();
        check_finite(&h, k + 1)?;
        hiddens.push(h);
    }
    let a_bar: Vec<f64> = np.output.iter().map(|v| v * sqrt_m).collect();
    let out = dot(&a_bar, &hiddens[cfg.depth - 1]) / sqrt_m;
    Ok((out, hiddens))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelLaw {
    /// i.i.d. uniform on [−c, c].
    #[default]
    Uniform,
    /// i.i.d. ±c with equal probability.
    Sign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(Error::contract(format!(
                "dataset needs matching non-empty inputs and labels ({} vs {})",
                inputs.len(),
                labels.len()
            )));
        }
        let d = inputs[0].len();
        if d == 0 || inputs.iter().any(|x| x.len() != d) {
            return Err(Error::contract("inputs must share a positive dimension"));
        }
        Ok(Dataset { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Largest |cos| between two distinct inputs (0 for a single point).
    pub fn max_abs_cosine(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                worst = worst.max(abs_cosine(&self.inputs[i], &self.inputs[j]));
            }
        }
        worst
    }

    /// Checks `1/c ≤ ‖x_i‖`, `|y_i| ≤ c` and pairwise `|cos| ≤ 1 − δ`.
    pub fn validate(&self, c: f64, delta_parallel: f64) -> Result<()> {
        for (i, (x, y)) in self.inputs.iter().zip(&self.labels).enumerate() {
            let nx = norm2(x);
            if nx < 1.0 / c * (1.0 - 1e-12) {
                return Err(Error::contract(format!("input {i} has norm {nx} < 1/c")));
            }
            if y.abs() > c {
                return Err(Error::contract(format!("label {i} = {y} exceeds c = {c}")));
            }
        }
        let worst = self.max_abs_cosine();
        if worst > 1.0 - delta_parallel {
            return Err(Error::contract(format!(
                "inputs are nearly parallel: |cos| = {worst} > 1 - {delta_parallel}"
            )));
        }
        Ok(())
    }
}

fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    (dot(a, b) / (norm2(a) * norm2(b))).abs()
}

pub const REJECTION_BUDGET_PER_POINT: usize = 1000;

/// Points uniform on the unit sphere, rejecting any candidate too close to
/// parallel with an accepted point; labels drawn from `label_law`.
pub fn generate_dataset(
    n: usize,
    d: usize,
    c: f64,
    delta_parallel: f64,
    label_law: LabelLaw,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 || d < 2 {
        return Err(Error::contract(format!("need n >= 1 and d >= 2 (got n={n}, d={d})")));
    }
    if !(c >= 1.0) || !(0.0..1.0).contains(&delta_parallel) {
        return Err(Error::contract("need c >= 1 and 0 <= delta_parallel < 1"));
    }
    let mut gauss = gaussian_stream(seed, Purpose::Dataset, 0);
    let budget = REJECTION_BUDGET_PER_POINT * n;
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut attempts = 0;
    while inputs.len() < n {
        if attempts >= budget {
            return Err(Error::RejectionExhausted { n, d, attempts });
        }
        attempts += 1;
        let mut x = vec![0.0; d];
        gauss.fill(&mut x, 1.0);
        let nx = norm2(&x);
        if nx == 0.0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        if inputs
            .iter()
            .all(|y| abs_cosine(&x, y) <= 1.0 - delta_parallel)
        {
            inputs.push(x);
        }
    }
    let mut label_rng = stream(seed, Purpose::Dataset, 1);
    let labels = (0..n)
        .map(|_| match label_law {
            LabelLaw::Uniform => label_rng.random_range(-c..=c),
            LabelLaw::Sign => {
                if label_rng.random::<bool>() {
                    c
                } else {
                    -c
                }
            }
        })
        .collect();
    let ds = Dataset { inputs, labels };
    ds.validate(c, delta_parallel)?;
    Ok(ds)
}
