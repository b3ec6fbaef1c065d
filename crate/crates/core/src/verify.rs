//! Acceptance criteria as runnable checks, shared by the `acceptance` test
//! target and the `verify` subcommand.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::gradflow;
use crate::gram::{normalized_gram, raw_gram_from_gradients};
use crate::kernel::{self, ConcentrationTable, KernelStack, QuadratureSettings};
use crate::lab::{self, ExperimentConfig, SweepResult};
use crate::linalg::{self, Matrix};
use crate::network::{
    forward, forward_normalized, generate_dataset, init_params, make_scaling, normalize, Dataset, LabelLaw,
    Params,
};
use crate::rng::{gaussian_stream, stream, Purpose};

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub time_limit: Option<f64>,
}

impl CriterionOutcome {
    pub fn within_time(&self) -> bool {
        self.time_limit.is_none_or(|limit| self.seconds <= limit)
    }
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let limit = match self.time_limit {
            Some(l) => format!("{:.1}s/{l:.0}s", self.seconds),
            None => format!("{:.1}s", self.seconds),
        };
        write!(
            f,
            "criterion {:>2} [{}] {}: {} ({limit})",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn timed(
    id: u8,
    name: &'static str,
    time_limit: Option<f64>,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionOutcome {
    let start = Instant::now();
    let (ok, detail) = match body() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    let mut out = CriterionOutcome {
        id,
        name,
        passed: ok,
        detail,
        seconds,
        time_limit,
    };
    if !out.within_time() {
        out.passed = false;
        out.detail.push_str("; over time limit");
    }
    out
}

fn silu() -> Activation {
    Activation::by_name("scaled_silu").expect("built-in activation")
}

/// γ = (1/2, …, 1/2, 0): s = 1/2 at every depth.
pub fn half_gamma(depth: usize) -> Vec<f64> {
    let mut g = vec![0.5; depth];
    g.push(0.0);
    g
}

fn central_difference(p: &Params, data: &Dataset, act: &Activation, h: f64) -> Result<Vec<Vec<f64>>> {
    let mut q = p.clone();
    let mut blocks = Vec::with_capacity(p.depth() + 1);
    let mut probe = |get: &mut dyn FnMut(&mut Params) -> &mut f64| -> Result<f64> {
        let orig = *get(&mut q);
        *get(&mut q) = orig + h;
        let up = gradflow::loss(&q, data, act)?.0;
        *get(&mut q) = orig - h;
        let down = gradflow::loss(&q, data, act)?.0;
        *get(&mut q) = orig;
        Ok((up - down) / (2.0 * h))
    };
    for l in 0..p.depth() {
        let len = p.weights[l].as_slice().len();
        let mut g = Vec::with_capacity(len);
        for k in 0..len {
            g.push(probe(&mut |q: &mut Params| &mut q.weights[l].as_mut_slice()[k])?);
        }
        blocks.push(g);
    }
    let mut g = Vec::with_capacity(p.output.len());
    for k in 0..p.output.len() {
        g.push(probe(&mut |q: &mut Params| &mut q.output[k])?);
    }
    blocks.push(g);
    Ok(blocks)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Analytic gradients against central differences with step 1e-5; the error of
/// a block is `‖fd − an‖_∞ / ‖an‖_∞`.
pub fn criterion1() -> CriterionOutcome {
    timed(1, "gradient oracle", Some(5.0), || {
        let act = silu();
        let mut worst = 0.0f64;
        for &(depth, m, n, d) in &[(1, 8, 4, 3), (2, 16, 6, 4), (3, 16, 6, 4)] {
            let cfg = make_scaling(depth, m, d, &half_gamma(depth))?;
            for seed in 0..3u64 {
                let data = generate_dataset(n, d, 1.0, 0.01, LabelLaw::Uniform, 100 + seed)?;
                let p = init_params(&cfg, seed);
                let an = gradflow::gradients(&p, &data, &act)?;
                let fd = central_difference(&p, &data, &act, 1e-5)?;
                let analytic: Vec<&[f64]> = an
                    .weights
                    .iter()
                    .map(Matrix::as_slice)
                    .chain(std::iter::once(an.output.as_slice()))
                    .collect();
                for (a, f) in analytic.iter().zip(&fd) {
                    let diff: Vec<f64> = a.iter().zip(f).map(|(x, y)| x - y).collect();
                    worst = worst.max(max_abs(&diff) / max_abs(a));
                }
            }
        }
        Ok((worst < 1e-5, format!("max relative error {worst:.3e} (< 1e-5)")))
    })
}

/// `f = κ f̄` and `(κ²/α_l²) Ḡ^[l] = G^[l]` over 100 random configurations.
pub fn criterion2() -> CriterionOutcome {
    timed(2, "scaling identities", Some(30.0), || {
        let act = silu();
        let mut rng = stream(2, Purpose::Auxiliary, 0);
        let mut worst_f = 0.0f64;
        let mut worst_g = 0.0f64;
        for k in 0..100u64 {
            let depth = rng.random_range(1..=3);
            let m = rng.random_range(4..=24);
            let d = rng.random_range(2..=5);
            let gamma: Vec<f64> = (0..=depth).map(|_| rng.random_range(0.0..1.0)).collect();
            let cfg = make_scaling(depth, m, d, &gamma)?;
            let p = init_params(&cfg, k);
            let data = generate_dataset(3, d, 1.0, 0.01, LabelLaw::Uniform, 1000 + k)?;
            let np = normalize(&p, &cfg);
            for x in &data.inputs {
                let f = forward(&p, x, &act)?.output;
                let fbar = forward_normalized(&np, x, &cfg, &act)?.output;
                worst_f = worst_f.max((f - cfg.kappa * fbar).abs() / (1.0 + f.abs()));
            }
            let raw = raw_gram_from_gradients(&p, &data, &act)?;
            let norm = normalized_gram(&np, &data, &cfg, &act)?;
            for ((g, gbar), w) in raw.iter().zip(&norm.normalized).zip(cfg.gram_weights()) {
                for (a, b) in g.as_slice().iter().zip(gbar.as_slice()) {
                    worst_g = worst_g.max((w * b - a).abs() / (1.0 + a.abs()));
                }
            }
        }
        let ok = worst_f <= 1e-9 && worst_g <= 1e-8;
        Ok((
            ok,
            format!("output {worst_f:.2e} (<= 1e-9), Gram {worst_g:.2e} (<= 1e-8)"),
        ))
    })
}

pub const MC_SAMPLES: usize = 1_000_000;

/// Seeded Monte-Carlo estimate of `E[σ(εu_i)σ(εu_j)]/ε²` with `u = X g`,
/// `g ~ N(0, I_d)`: mean and standard error for every pair i ≤ j.
pub fn monte_carlo_ktilde1(
    data: &Dataset,
    eps: &[f64],
    act: &Activation,
    samples: usize,
    seed: u64,
) -> Vec<Vec<(usize, usize, f64, f64)>> {
    let n = data.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut sum = vec![vec![0.0; pairs.len()]; eps.len()];
    let mut sq = vec![vec![0.0; pairs.len()]; eps.len()];
    let mut gauss = gaussian_stream(seed, Purpose::MonteCarlo, 0);
    let mut g = vec![0.0; data.dim()];
    let mut phi = vec![0.0; n];
    for _ in 0..samples {
        gauss.fill(&mut g, 1.0);
        for (e, &eps_e) in eps.iter().enumerate() {
            for (i, x) in data.inputs.iter().enumerate() {
                phi[i] = act.eval(eps_e * linalg::dot(x, &g)) / eps_e;
            }
            for (k, &(i, j)) in pairs.iter().enumerate() {
                let v = phi[i] * phi[j];
                sum[e][k] += v;
                sq[e][k] += v * v;
            }
        }
    }
    let s = samples as f64;
    (0..eps.len())
        .map(|e| {
            pairs
                .iter()
                .enumerate()
                .map(|(k, &(i, j))| {
                    let mean = sum[e][k] / s;
                    let var = (sq[e][k] / s - mean * mean).max(0.0) * s / (s - 1.0);
                    (i, j, mean, (var / s).sqrt())
                })
                .collect()
        })
        .collect()
}

fn max_entry_delta(a: &[Matrix], b: &[Matrix]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn stack_at(data: &Dataset, eps: &[f64], act: &Activation, order: usize) -> Result<KernelStack> {
    kernel::limiting_kernels_with_eps(
        data,
        eps,
        act,
        &QuadratureSettings {
            order,
            confirm_tol: None,
        },
    )
}

/// Order-80 `K̃^[1]` against a 10⁶-sample Monte-Carlo oracle, and the order-doubling check.
pub fn criterion3() -> CriterionOutcome {
    timed(3, "quadrature vs Monte-Carlo", Some(60.0), || {
        let act = silu();
        let data = generate_dataset(3, 4, 1.0, 0.01, LabelLaw::Uniform, 3)?;
        let eps = [0.1, 1.0, 10.0];
        let mc = monte_carlo_ktilde1(&data, &eps, &act, MC_SAMPLES, 3);
        let mut ok = true;
        let mut parts = Vec::new();
        for (e, &eps_e) in eps.iter().enumerate() {
            let coarse = stack_at(&data, &[eps_e], &act, kernel::DEFAULT_ORDER)?;
            let fine = stack_at(&data, &[eps_e], &act, 2 * kernel::DEFAULT_ORDER)?;
            let worst_z = mc[e]
                .iter()
                .map(|&(i, j, mean, se)| (coarse.ktilde[1][(i, j)] - mean).abs() / se)
                .fold(0.0, f64::max);
            let delta = max_entry_delta(&coarse.ktilde, &fine.ktilde)
                .max(max_entry_delta(&coarse.itilde, &fine.itilde))
                .max(max_entry_delta(&coarse.k, &fine.k));
            ok &= worst_z <= 3.0 && delta <= kernel::DEFAULT_CONFIRM_TOL;
            parts.push(format!("eps={eps_e}: max |z|={worst_z:.2}, doubling delta={delta:.1e}"));
        }
        Ok((ok, parts.join("; ")))
    })
}

/// `(1/π)(c(π − arccos c) + √(1 − c²))`, written out independently of the kernel module.
fn arccos_kernel(c: f64) -> f64 {
    let c = c.clamp(-1.0, 1.0);
    (c * (PI - c.acos()) + (1.0 - c * c).sqrt()) / PI
}

/// `K̃^[1]` at ε = 1e4 against twice the arccos kernel.
pub fn criterion4() -> CriterionOutcome {
    timed(4, "ReLU asymptote", Some(10.0), || {
        let act = silu();
        let data = generate_dataset(6, 5, 1.0, 0.01, LabelLaw::Uniform, 4)?;
        let stack = stack_at(&data, &[1e4], &act, kernel::DEFAULT_ORDER)?;
        let n = data.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let c = linalg::dot(&data.inputs[i], &data.inputs[j]);
                let target = 2.0 * arccos_kernel(c);
                worst = worst.max((stack.ktilde[1][(i, j)] - target).abs() / target.abs());
            }
        }
        Ok((worst <= 1e-2, format!("max relative error {worst:.2e} (<= 1e-2)")))
    })
}

/// L=2, n=4, d=6, γ=(1/2,1/2,0).
pub fn acceptance_config() -> ExperimentConfig {
    ExperimentConfig {
        depth: 2,
        input_dim: 6,
        samples: 4,
        gamma: half_gamma(2),
        widths: vec![128, 512, 2048],
        ..ExperimentConfig::default()
    }
}

pub fn concentration_config() -> ExperimentConfig {
    ExperimentConfig {
        seeds: (0..20).collect(),
        ..acceptance_config()
    }
}

pub fn sweep_config() -> ExperimentConfig {
    ExperimentConfig {
        seeds: (0..5).collect(),
        ..acceptance_config()
    }
}

pub fn judge_concentration(table: &ConcentrationTable, depth: usize) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for layer in 1..=depth + 1 {
        let rows = table.rows_for_layer(layer);
        let medians: Vec<f64> = rows.iter().map(|r| r.median_error).collect();
        let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
        let halved = medians.len() >= 2 && medians[medians.len() - 1] < medians[0] / 2.0;
        let floor = rows.last().map_or(0.0, |r| r.floor_fraction);
        ok &= decreasing && halved && floor >= 0.9;
        parts.push(format!(
            "l={layer}: medians {} floor {:.0}%",
            medians.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(">"),
            100.0 * floor
        ));
    }
    (ok, parts.join("; "))
}

pub fn criterion5(table: &Result<ConcentrationTable>, seconds: f64) -> CriterionOutcome {
    let mut out = timed(5, "concentration", Some(600.0), || {
        let table = table.as_ref().map_err(|e| Error::Config(e.to_string()))?;
        Ok(judge_concentration(table, concentration_config().depth))
    });
    out.seconds += seconds;
    if !out.within_time() && out.passed {
        out.passed = false;
        out.detail.push_str("; over time limit");
    }
    out
}

pub fn judge_decay(res: &SweepResult, width: usize) -> (bool, String) {
    let rows: Vec<_> = res.rows.iter().filter(|r| r.width == width).collect();
    let mut ok = !rows.is_empty();
    let mut parts = Vec::new();
    for r in &rows {
        if let Some(e) = &r.error {
            ok = false;
            parts.push(format!("seed {}: {e}", r.seed));
            continue;
        }
        let cell_ok = r.reached_target && r.decay_bound_held && r.step_violations == 0;
        ok &= cell_ok;
        parts.push(format!(
            "seed {}: bound {} steps {}/{} violations (worst ratio {:.4}) target {}",
            r.seed,
            if r.decay_bound_held { "held" } else { "broken" },
            r.step_violations,
            r.step_checks,
            r.worst_step_ratio,
            if r.reached_target { "reached" } else { "missed" }
        ));
    }
    (ok, parts.join("; "))
}

pub fn criterion6(res: &Result<SweepResult>, seconds: f64) -> CriterionOutcome {
    let mut out = timed(6, "loss decay", Some(600.0), || {
        let res = res.as_ref().map_err(|e| Error::Config(e.to_string()))?;
        Ok(judge_decay(res, 2048))
    });
    out.seconds += seconds;
    if !out.within_time() && out.passed {
        out.passed = false;
        out.detail.push_str("; over time limit");
    }
    out
}

pub fn judge_laziness(res: &SweepResult) -> (bool, String) {
    let mut ok = res.rows.iter().all(|r| r.ok());
    let mut parts = Vec::new();
    for (b, name) in lab::block_names(res.config.depth).iter().enumerate() {
        let medians: Vec<f64> = res.widths.iter().map(|w| w.median_sup_rd[b]).collect();
        let decreasing = res.monotone[b] == Some(true);
        let in_band = !res.ratios[b].is_empty() && res.ratios[b].iter().all(|r| (0.3..=0.8).contains(r));
        ok &= decreasing && in_band;
        parts.push(format!(
            "{name}: {} ratios {}",
            medians.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(">"),
            res.ratios[b].iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(",")
        ));
    }
    let early = res.rows.iter().filter(|r| r.stopped_before_target).count();
    ok &= early == 0;
    parts.push(format!("early stopping in {early} cells"));
    (ok, parts.join("; "))
}

pub fn criterion7(res: &Result<SweepResult>) -> CriterionOutcome {
    timed(7, "laziness", None, || {
        let res = res.as_ref().map_err(|e| Error::Config(e.to_string()))?;
        Ok(judge_laziness(res))
    })
}

/// Random unit-diagonal positive definite matrix: normalized Gram of `n` Gaussian
/// vectors in dimension `n + 2`.
pub fn random_correlation<R: Rng>(n: usize, rng: &mut R) -> Matrix {
    let k = n + 2;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let norm = linalg::norm2(&v);
        v.iter_mut().for_each(|x| *x /= norm);
        rows.push(v);
    }
    Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { linalg::dot(&rows[i], &rows[j]) })
}

/// Hadamard eigenvalue bound on random pairs, λ_S > 0 on generated datasets and
/// the diagonal recursion ratios against the second-moment envelope.
pub fn criterion8() -> CriterionOutcome {
    timed(8, "eigenvalue-bound properties", Some(30.0), || {
        let mut rng = stream(8, Purpose::Auxiliary, 0);
        let mut bound_fail = 0;
        let mut normalized_fail = 0;
        let mut worst_gap = f64::INFINITY;
        for k in 0..200 {
            let n = 2 + k % 5;
            let a = random_correlation(n, &mut rng);
            let b = random_correlation(n, &mut rng);
            let bound = linalg::hadamard_min_eig_bound(&a, &b)?;
            let lmin = linalg::lambda_min(&linalg::hadamard(&a, &b)?)?;
            worst_gap = worst_gap.min(lmin + 1e-10 - bound);
            if bound > lmin + 1e-10 {
                bound_fail += 1;
            }
            if linalg::hadamard_min_eig_bound_normalized(&a, &b)? > lmin + 1e-10 {
                normalized_fail += 1;
            }
        }
        let act = silu();
        let cfg = sweep_config();
        let sc = cfg.scaling(2048)?;
        let settings = cfg.quadrature();
        let mut lambda_fail = 0;
        let mut lambda_min_seen = f64::INFINITY;
        let mut ratios: Vec<(f64, f64, f64)> = Vec::new();
        for seed in 0..10u64 {
            let data = generate_dataset(cfg.samples, cfg.input_dim, 1.0, 0.01, LabelLaw::Uniform, 800 + seed)?;
            data.validate(1.0, 0.01)?;
            let ks = kernel::limiting_kernels(&data, &sc, &act, &settings)?;
            lambda_min_seen = lambda_min_seen.min(ks.lambda_s);
            if !(ks.lambda_s > 0.0) {
                lambda_fail += 1;
            }
            for l in 1..ks.ktilde.len() {
                for i in 0..data.len() {
                    let prev = ks.ktilde[l - 1][(i, i)];
                    ratios.push((prev.sqrt(), ks.eps[l - 1], ks.ktilde[l][(i, i)] / prev));
                }
            }
        }
        let mut grid = kernel::log_grid(-3.0, 3.0, 2);
        let mut mu1 = f64::INFINITY;
        let mut mu2 = f64::NEG_INFINITY;
        for &(x0, eps, _) in &ratios {
            grid.push(eps);
            let mb = kernel::second_moment_bounds(&act, (x0, x0), 1, &grid)?;
            grid.pop();
            mu1 = mu1.min(mb.mu1);
            mu2 = mu2.max(mb.mu2);
        }
        let ratio_fail = ratios.iter().filter(|r| r.2 < mu1 || r.2 > mu2).count();
        let ok = bound_fail == 0 && lambda_fail == 0 && ratio_fail == 0;
        Ok((
            ok,
            format!(
                "Hadamard bound violated in {bound_fail}/200 (min slack {worst_gap:.2e}, \
                 Frobenius-normalized form violated in {normalized_fail}/200); \
                 lambda_S <= 0 in {lambda_fail}/10 (min {lambda_min_seen:.3e}); \
                 {ratio_fail}/{} diagonal ratios outside [{mu1:.4}, {mu2:.4}]",
                ratios.len()
            ),
        ))
    })
}

/// Initial-norm bounds at m=4096, d=64, L=3 over 50 seeds.
pub fn criterion9() -> CriterionOutcome {
    timed(9, "initial-parameter bounds", Some(60.0), || {
        let sc = make_scaling(3, 4096, 64, &half_gamma(3))?;
        let seeds: Vec<u64> = (0..50).collect();
        let rep = lab::check_initial_bounds(&sc, &seeds);
        let ok = rep.bounds.iter().all(|b| b.fraction() >= 0.95);
        let detail = rep
            .bounds
            .iter()
            .map(|b| format!("{} {}/{} [{:.3}, {:.3}]", b.name, b.hits, b.total, b.min_seen, b.max_seen))
            .collect::<Vec<_>>()
            .join("; ");
        Ok((ok, detail))
    })
}

fn csv_tables(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().expect("file").to_string_lossy().into_owned();
            out.insert(name, fs::read(&path)?);
        }
    }
    Ok(out)
}

/// Emits both results and compares every numeric table byte for byte.
pub fn compare_sweeps(a: &SweepResult, b: &SweepResult, scratch: &Path) -> Result<(bool, usize)> {
    let da = scratch.join("first");
    let db = scratch.join("second");
    lab::emit_results(a, &da)?;
    lab::emit_results(b, &db)?;
    let ta = csv_tables(&da)?;
    let tb = csv_tables(&db)?;
    Ok((ta == tb, ta.len()))
}

/// Reruns the concentration table and the lazy sweep with a different worker
/// count and compares the emitted tables.
pub fn criterion10(
    concentration: &Result<ConcentrationTable>,
    sweep: &Result<SweepResult>,
    scratch: &Path,
) -> CriterionOutcome {
    timed(10, "determinism", None, || {
        let table = concentration.as_ref().map_err(|e| Error::Config(e.to_string()))?;
        let sweep = sweep.as_ref().map_err(|e| Error::Config(e.to_string()))?;
        let cfg = ExperimentConfig {
            workers: 2,
            ..concentration_config()
        };
        let again = lab::run_concentration(&cfg)?;
        let conc_same = lab::concentration_to_csv(table) == lab::concentration_to_csv(&again);
        let rerun = lab::run_lazy_suite(&ExperimentConfig {
            workers: 2,
            ..sweep.config.clone()
        })?;
        let (sweep_same, files) = compare_sweeps(sweep, &rerun, scratch)?;
        Ok((
            conc_same && sweep_same,
            format!(
                "concentration table {}; {files} sweep tables {}",
                if conc_same { "identical" } else { "differs" },
                if sweep_same { "identical" } else { "differ" }
            ),
        ))
    })
}

/// Runs the selected criteria (all when `only` is empty), reporting each
/// outcome through `report` as soon as it is known.
pub fn run_criteria(only: &[u8], scratch: &Path, mut report: impl FnMut(&CriterionOutcome)) -> Vec<CriterionOutcome> {
    let want = |id: u8| only.is_empty() || only.contains(&id);
    let mut outcomes = Vec::new();
    let mut push = |o: CriterionOutcome| {
        report(&o);
        outcomes.push(o);
    };
    if want(1) {
        push(criterion1());
    }
    if want(2) {
        push(criterion2());
    }
    if want(3) {
        push(criterion3());
    }
    if want(4) {
        push(criterion4());
    }
    let concentration = (want(5) || want(10)).then(|| {
        let start = Instant::now();
        let t = lab::run_concentration(&concentration_config());
        (t, start.elapsed().as_secs_f64())
    });
    if want(5) {
        let (t, secs) = concentration.as_ref().expect("computed");
        push(criterion5(t, *secs));
    }
    let sweep = (want(6) || want(7) || want(10)).then(|| {
        let start = Instant::now();
        let r = lab::run_lazy_suite(&sweep_config());
        (r, start.elapsed().as_secs_f64())
    });
    if want(6) {
        let (r, secs) = sweep.as_ref().expect("computed");
        push(criterion6(r, *secs));
    }
    if want(7) {
        let (r, _) = sweep.as_ref().expect("computed");
        push(criterion7(r));
    }
    if want(8) {
        push(criterion8());
    }
    if want(9) {
        push(criterion9());
    }
    if want(10) {
        let (t, _) = concentration.as_ref().expect("computed");
        let (r, _) = sweep.as_ref().expect("computed");
        push(criterion10(t, r, scratch));
    }
    outcomes
}
