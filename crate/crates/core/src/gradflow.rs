//! Empirical risk, explicit per-layer gradients, and the gradient-flow integrator
//! with its runtime monitors.

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::gram;
use crate::linalg::{self, axpy, norm2, Matrix};
use crate::network::{forward, ForwardPass, NormalizedForward, NormalizedParams, Params, ScalingConfig};
use crate::network::Dataset;

/// `R = (1/2n) Σ (f(x_i) − y_i)²` and the residuals `e_i = f(x_i) − y_i`.
pub fn loss(p: &Params, data: &Dataset, act: &Activation) -> Result<(f64, Vec<f64>)> {
    let mut errors = Vec::with_capacity(data.len());
    for (x, y) in data.inputs.iter().zip(&data.labels) {
        errors.push(forward(p, x, act)?.output - y);
    }
    Ok((half_mean_square(&errors), errors))
}

fn half_mean_square(e: &[f64]) -> f64 {
    e.iter().map(|v| v * v).sum::<f64>() / (2.0 * e.len() as f64)
}

/// Raw backward vectors from a forward pass:
/// `λ^[L] = σ′(z^[L]) ⊙ a`, `λ^[l] = σ′(z^[l]) ⊙ (W^[l+1])ᵀ λ^[l+1]`.
///
/// `λ^[l]` is the gradient of the output with respect to the preactivation of layer l.
pub fn backward_from_pass(p: &Params, pass: &ForwardPass, act: &Activation) -> Vec<Vec<f64>> {
    let depth = p.depth();
    let mut lambdas = vec![Vec::new(); depth];
    let mut cur: Vec<f64> = pass.preacts[depth - 1]
        .iter()
        .zip(&p.output)
        .map(|(&z, &a)| act.d1(z) * a)
        .collect();
    for l in (0..depth).rev() {
        if l + 1 < depth {
            let back = p.weights[l + 1].matvec_t(&lambdas[l + 1]);
            cur = pass.preacts[l]
                .iter()
                .zip(&back)
                .map(|(&z, &b)| act.d1(z) * b)
                .collect();
        }
        lambdas[l] = std::mem::take(&mut cur);
    }
    lambdas
}

pub fn backward_vectors(p: &Params, x: &[f64], act: &Activation) -> Result<Vec<Vec<f64>>> {
    let pass = forward(p, x, act)?;
    Ok(backward_from_pass(p, &pass, act))
}

/// Normalized backward vectors:
/// `λ̄^[L] = σ′ ⊙ (ā/√m)`, `λ̄^[l] = σ′ ⊙ (W̄^[l+1]/√m)ᵀ λ̄^[l+1]`.
pub fn backward_normalized(np: &NormalizedParams, pass: &NormalizedForward, act: &Activation) -> Vec<Vec<f64>> {
    let depth = np.weights.len();
    let mut lambdas: Vec<Vec<f64>> = vec![Vec::new(); depth];
    lambdas[depth - 1] = pass.args[depth - 1]
        .iter()
        .zip(&np.output)
        .map(|(&z, &a)| act.d1(z) * a)
        .collect();
    for l in (0..depth - 1).rev() {
        let back = np.weights[l + 1].matvec_t(&lambdas[l + 1]);
        lambdas[l] = pass.args[l]
            .iter()
            .zip(&back)
            .map(|(&z, &b)| act.d1(z) * b)
            .collect();
    }
    lambdas
}

/// Forward and backward state of every sample at one parameter value.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub passes: Vec<ForwardPass>,
    pub lambdas: Vec<Vec<Vec<f64>>>,
    pub errors: Vec<f64>,
    pub loss: f64,
}

pub fn evaluate(p: &Params, data: &Dataset, act: &Activation) -> Result<Evaluation> {
    let mut passes = Vec::with_capacity(data.len());
    let mut lambdas = Vec::with_capacity(data.len());
    let mut errors = Vec::with_capacity(data.len());
    for (x, y) in data.inputs.iter().zip(&data.labels) {
        let pass = forward(p, x, act)?;
        lambdas.push(backward_from_pass(p, &pass, act));
        errors.push(pass.output - y);
        passes.push(pass);
    }
    let loss = half_mean_square(&errors);
    Ok(Evaluation {
        passes,
        lambdas,
        errors,
        loss,
    })
}

/// ∇R with the same block layout as [`Params`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientStack {
    pub weights: Vec<Matrix>,
    pub output: Vec<f64>,
}

pub fn gradients_from(eval: &Evaluation, p: &Params, data: &Dataset) -> GradientStack {
    let n = data.len() as f64;
    let mut weights: Vec<Matrix> = p
        .weights
        .iter()
        .map(|w| Matrix::zeros(w.rows(), w.cols()))
        .collect();
    let mut output = vec![0.0; p.width()];
    for (i, x) in data.inputs.iter().enumerate() {
        let coef = eval.errors[i] / n;
        if coef == 0.0 {
            continue;
        }
        let pass = &eval.passes[i];
        for (l, g) in weights.iter_mut().enumerate() {
            let prev: &[f64] = if l == 0 { x } else { &pass.hiddens[l - 1] };
            for (r, &lam) in eval.lambdas[i][l].iter().enumerate() {
                let s = coef * lam;
                if s != 0.0 {
                    axpy(s, prev, g.row_mut(r));
                }
            }
        }
        axpy(coef, &pass.hiddens[p.depth() - 1], &mut output);
    }
    GradientStack { weights, output }
}

pub fn gradients(p: &Params, data: &Dataset, act: &Activation) -> Result<GradientStack> {
    let eval = evaluate(p, data, act)?;
    Ok(gradients_from(&eval, p, data))
}

/// Parameter blocks in layer order, output block last.
pub trait ParameterBlocks {
    fn blocks(&self) -> Vec<&[f64]>;
}

impl ParameterBlocks for Params {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.weights.iter().map(Matrix::as_slice).collect();
        out.push(&self.output);
        out
    }
}

impl ParameterBlocks for NormalizedParams {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.weights.iter().map(Matrix::as_slice).collect();
        out.push(&self.output);
        out
    }
}

/// `‖θ_b(t) − θ_b(0)‖ / ‖θ_b(0)‖` for every block b (hidden layers, then output).
pub fn rd_metrics<P: ParameterBlocks>(current: &P, initial: &P) -> Result<Vec<f64>> {
    let cur = current.blocks();
    let init = initial.blocks();
    if cur.len() != init.len() {
        return Err(Error::contract("parameter stacks have different depths"));
    }
    let last = init.len() - 1;
    let mut out = Vec::with_capacity(init.len());
    for (k, (c, i)) in cur.iter().zip(&init).enumerate() {
        if c.len() != i.len() {
            return Err(Error::contract(format!("block {k} shapes differ")));
        }
        let base = norm2(i);
        if base == 0.0 {
            let block = if k == last { "a".to_string() } else { format!("W{}", k + 1) };
            return Err(Error::ZeroNorm { block });
        }
        let diff: f64 = c.iter().zip(i.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        out.push(diff.sqrt() / base);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSettings {
    pub dt: f64,
    pub t_max: f64,
    /// Record every k-th step.
    pub record_every: usize,
    /// Estimate of λ_S for the monitors; 0 disables the bound checks.
    pub lambda_hat: f64,
    /// Compute λ_min of the total Gram matrix every k-th record.
    pub gram_every: usize,
    /// Refresh the p_l trackers every k-th record.
    pub norm_every: usize,
    pub integrator: Integrator,
    /// Stop once the loss drops below this fraction of its start.
    pub stop_ratio: f64,
    /// Abort once the loss exceeds this multiple of its start.
    pub divergence_factor: f64,
    /// Relative slack in the decay-bound and per-step checks.
    pub slack: f64,
    /// Check the per-step decay inequality with the instantaneous Gram eigenvalue.
    pub step_check: bool,
    /// Hard cap on the number of steps.
    pub max_steps: usize,
}

impl Default for FlowSettings {
    fn default() -> Self {
        FlowSettings {
            dt: 1e-3,
            t_max: 1.0,
            record_every: 1,
            lambda_hat: 0.0,
            gram_every: 10,
            norm_every: 10,
            integrator: Integrator::Euler,
            stop_ratio: 1e-10,
            divergence_factor: 10.0,
            slack: 1e-3,
            step_check: false,
            max_steps: 1_000_000,
        }
    }
}

/// `0.1 n / ((Σ κ²/α_l²) λ̂)`: ten steps per predicted decay time constant.
pub fn adaptive_dt(n: usize, cfg: &ScalingConfig, lambda_hat: f64) -> f64 {
    0.1 * n as f64 / (cfg.gram_weight_sum() * lambda_hat)
}

/// Largest Euler step keeping `dt λ_max(G) / n ≤ 1/2`.
pub fn stability_dt(n: usize, lambda_max: f64) -> f64 {
    0.5 * n as f64 / lambda_max
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub loss: f64,
    /// λ_min of the total Gram matrix, when computed at this record.
    pub min_eig: Option<f64>,
    /// ‖G(θ(t)) − G(θ(0))‖_F.
    pub drift: f64,
    /// RD per hidden layer, then the output layer.
    pub rd: Vec<f64>,
    /// Running sup of ‖W̄^[l]/√m‖₂ per layer, then ‖ā/√m‖₂.
    pub p: Vec<f64>,
    /// `R(t) ≤ exp(−(t/n)(Σκ²/α_l²)λ̂) R(0)` within the slack.
    pub bound_ok: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    TimeLimit,
    StepLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    /// First recorded time the Gram drift exceeded the radius.
    pub stopping_time: Option<f64>,
    /// Loss at the stopping time, if it triggered.
    pub loss_at_stopping: Option<f64>,
    pub initial_loss: f64,
    pub dt: f64,
    pub lambda_hat: f64,
    /// `(Σ κ²/α_l²) λ̂ / 4`.
    pub radius: f64,
    /// `(Σ κ²/α_l²) λ̂ / n`, the predicted decay rate.
    pub decay_rate: f64,
    pub slack: f64,
    pub integrator: Integrator,
    pub steps: usize,
    pub step_checks: usize,
    pub step_violations: usize,
    /// Largest `R(t+dt) / (R(t) e^{−dt (2/n) λ_min(G)} + slack R(t))`.
    pub worst_step_ratio: f64,
    pub termination: Termination,
}

impl TrainTrace {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_loss, |r| r.loss)
    }

    pub fn decay_bound_held(&self) -> bool {
        self.records.iter().all(|r| r.bound_ok)
    }

    /// Records up to the first one whose loss falls below `ratio · R(0)`.
    pub fn until_ratio(&self, ratio: f64) -> &[TraceRecord] {
        let cut = self
            .records
            .iter()
            .position(|r| r.loss < ratio * self.initial_loss)
            .map_or(self.records.len(), |k| k + 1);
        &self.records[..cut]
    }

    /// Componentwise sup over time of the RD values.
    pub fn sup_rd(&self) -> Vec<f64> {
        let mut out = vec![0.0_f64; self.records.first().map_or(0, |r| r.rd.len())];
        for r in &self.records {
            for (o, v) in out.iter_mut().zip(&r.rd) {
                *o = o.max(*v);
            }
        }
        out
    }

    pub fn max_p(&self) -> Vec<f64> {
        self.records.last().map_or_else(Vec::new, |r| r.p.clone())
    }

    /// Stopping time fired while the loss was still above `ratio · R(0)`.
    pub fn stopped_before(&self, ratio: f64) -> bool {
        self.loss_at_stopping
            .is_some_and(|l| l >= ratio * self.initial_loss)
    }
}

const P_TRACKER_TOL: f64 = 1e-6;
const P_TRACKER_STEPS: usize = 300;

fn current_p(p: &Params, cfg: &ScalingConfig) -> Vec<f64> {
    let mut out: Vec<f64> = p
        .weights
        .iter()
        .zip(&cfg.alpha)
        .map(|(w, a)| linalg::operator_norm_lanczos(w, P_TRACKER_TOL, P_TRACKER_STEPS) / a)
        .collect();
    out.push(norm2(&p.output) / cfg.alpha[cfg.depth]);
    out
}

fn apply_step(p: &mut Params, g: &GradientStack, h: f64) {
    for (w, gw) in p.weights.iter_mut().zip(&g.weights) {
        axpy(-h, gw.as_slice(), w.as_mut_slice());
    }
    axpy(-h, &g.output, &mut p.output);
}

fn shifted(p: &Params, g: &GradientStack, h: f64) -> Params {
    let mut q = p.clone();
    apply_step(&mut q, g, h);
    q
}

fn combine_rk4(k: [&GradientStack; 4]) -> GradientStack {
    let mix = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
    GradientStack {
        weights: (0..k[0].weights.len())
            .map(|l| {
                let (r, c) = k[0].weights[l].shape();
                Matrix::from_vec(
                    r,
                    c,
                    (0..r * c)
                        .map(|e| {
                            mix(
                                k[0].weights[l].as_slice()[e],
                                k[1].weights[l].as_slice()[e],
                                k[2].weights[l].as_slice()[e],
                                k[3].weights[l].as_slice()[e],
                            )
                        })
                        .collect(),
                )
                .expect("shape preserved")
            })
            .collect(),
        output: (0..k[0].output.len())
            .map(|e| mix(k[0].output[e], k[1].output[e], k[2].output[e], k[3].output[e]))
            .collect(),
    }
}

/// Integrates `dθ/dt = −∇R(θ)` from `p0`, recording monitors along the way.
pub fn integrate_flow(
    p0: &Params,
    data: &Dataset,
    act: &Activation,
    cfg: &ScalingConfig,
    settings: &FlowSettings,
) -> Result<(Params, TrainTrace)> {
    if !(settings.dt > 0.0) || !settings.dt.is_finite() {
        return Err(Error::contract(format!("dt must be positive, got {}", settings.dt)));
    }
    if !(settings.lambda_hat >= 0.0) {
        return Err(Error::contract("lambda_hat must be non-negative"));
    }
    p0.check_shapes(cfg)?;
    let n = data.len() as f64;
    let weight_sum = cfg.gram_weight_sum();
    let monitors_on = settings.lambda_hat > 0.0;
    let radius = weight_sum * settings.lambda_hat / 4.0;
    let decay_rate = weight_sum * settings.lambda_hat / n;
    let record_every = settings.record_every.max(1);
    let gram_every = settings.gram_every.max(1);
    let norm_every = settings.norm_every.max(1);

    let mut p = p0.clone();
    let mut eval = evaluate(&p, data, act)?;
    let r0 = eval.loss;
    let g0_total = gram::closed_form_total(&eval, data)?;

    let mut trace = TrainTrace {
        records: Vec::new(),
        stopping_time: None,
        loss_at_stopping: None,
        initial_loss: r0,
        dt: settings.dt,
        lambda_hat: settings.lambda_hat,
        radius,
        decay_rate,
        slack: settings.slack,
        integrator: settings.integrator,
        steps: 0,
        step_checks: 0,
        step_violations: 0,
        worst_step_ratio: 0.0,
        termination: Termination::Converged,
    };

    let mut p_sup = current_p(&p, cfg);
    let mut record_count = 0usize;
    let mut record = |p: &Params,
                      eval: &Evaluation,
                      t: f64,
                      force_norms: bool,
                      trace: &mut TrainTrace|
     -> Result<()> {
        let total = gram::closed_form_total(eval, data)?;
        let drift = linalg::frobenius_norm(&total.sub(&g0_total)?);
        let min_eig = if record_count % gram_every == 0 {
            Some(linalg::lambda_min(&total)?)
        } else {
            None
        };
        if record_count % norm_every == 0 || force_norms {
            for (s, v) in p_sup.iter_mut().zip(current_p(p, cfg)) {
                *s = s.max(v);
            }
        }
        let bound_ok = !monitors_on
            || eval.loss <= (-t * decay_rate).exp() * r0 * (1.0 + settings.slack);
        if monitors_on && trace.stopping_time.is_none() && drift > radius {
            trace.stopping_time = Some(t);
            trace.loss_at_stopping = Some(eval.loss);
        }
        trace.records.push(TraceRecord {
            t,
            loss: eval.loss,
            min_eig,
            drift,
            rd: rd_metrics(p, p0)?,
            p: p_sup.clone(),
            bound_ok,
        });
        record_count += 1;
        Ok(())
    };

    record(&p, &eval, 0.0, false, &mut trace)?;
    if r0 == 0.0 {
        return Ok((p, trace));
    }

    let dt = settings.dt;
    let mut step = 0usize;
    let mut t = 0.0;
    loop {
        if eval.loss < settings.stop_ratio * r0 {
            trace.termination = Termination::Converged;
            break;
        }
        if t + 0.5 * dt > settings.t_max {
            trace.termination = Termination::TimeLimit;
            break;
        }
        if step >= settings.max_steps {
            trace.termination = Termination::StepLimit;
            break;
        }
        let g = gradients_from(&eval, &p, data);
        let step_gram_min = if settings.step_check && monitors_on {
            Some(linalg::lambda_min(&gram::closed_form_total(&eval, data)?)?)
        } else {
            None
        };
        let r_prev = eval.loss;
        match settings.integrator {
            Integrator::Euler => apply_step(&mut p, &g, dt),
            Integrator::Rk4 => {
                let k2 = gradients(&shifted(&p, &g, 0.5 * dt), data, act)?;
                let k3 = gradients(&shifted(&p, &k2, 0.5 * dt), data, act)?;
                let k4 = gradients(&shifted(&p, &k3, dt), data, act)?;
                let mixed = combine_rk4([&g, &k2, &k3, &k4]);
                apply_step(&mut p, &mixed, dt);
            }
        }
        if !p.is_finite() {
            return Err(Error::NonFinite { layer: 0 });
        }
        step += 1;
        t = step as f64 * dt;
        eval = evaluate(&p, data, act)?;
        if !eval.loss.is_finite() {
            return Err(Error::NonFinite { layer: cfg.depth + 1 });
        }
        if eval.loss > settings.divergence_factor * r0 {
            return Err(Error::Divergence {
                t,
                loss: eval.loss,
                initial: r0,
            });
        }
        if let Some(lmin) = step_gram_min {
            let allowed = r_prev * (-dt * (2.0 / n) * lmin).exp() + settings.slack * r_prev;
            trace.step_checks += 1;
            let ratio = eval.loss / allowed;
            trace.worst_step_ratio = trace.worst_step_ratio.max(ratio);
            if ratio > 1.0 {
                trace.step_violations += 1;
            }
        }
        let last = eval.loss < settings.stop_ratio * r0 || t + 0.5 * dt > settings.t_max || step >= settings.max_steps;
        if step % record_every == 0 || last {
            record(&p, &eval, t, last, &mut trace)?;
        }
    }
    trace.steps = step;
    Ok((p, trace))
}
