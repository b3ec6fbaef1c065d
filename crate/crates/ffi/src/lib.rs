//! C interface to `lazylab`.
//!
//! Every fallible function returns a [`LazylabStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`lazylab_last_error`] on the same thread until the next failing call.
//! Handles are opaque and must be released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lazylab::gradflow::{self, Termination};
use lazylab::kernel::{self, QuadratureSettings};
use lazylab::lab::{self, ExperimentConfig};
use lazylab::network::{self, generate_dataset, init_params, make_scaling, LabelLaw};
use lazylab::{Activation, Dataset, Error, Params, ScalingConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LazylabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Contract = 3,
    Numerical = 4,
    Config = 5,
    Io = 6,
    Panic = 7,
}

/// Points and labels.
pub struct LazylabDataset {
    inner: Dataset,
}

/// Parameters together with their scaling and activation.
pub struct LazylabNetwork {
    params: Params,
    scaling: ScalingConfig,
    act: Activation,
}

/// Outcome of one gradient-flow run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LazylabTrainSummary {
    pub laziness: f64,
    pub lambda_s: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub dt: f64,
    pub steps: u64,
    /// 1 when the loss reached the configured stop ratio.
    pub converged: u8,
    /// 1 when the exponential decay bound held up to the target ratio.
    pub decay_bound_held: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> LazylabStatus {
    match e {
        Error::Contract(_) | Error::RejectionExhausted { .. } | Error::Parse(_) => LazylabStatus::Contract,
        Error::Config(_) => LazylabStatus::Config,
        Error::Io(_) => LazylabStatus::Io,
        _ => LazylabStatus::Numerical,
    }
}

struct Failure(LazylabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(LazylabStatus::InvalidArgument, msg.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LazylabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LazylabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LazylabStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(LazylabStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(LazylabStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lazylab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread; empty if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn lazylab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Draws `n` unit-norm points in dimension `d` with labels uniform on
/// `[-label_bound, label_bound]`, no two closer than `delta_parallel` to parallel.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn lazylab_dataset_generate(
    n: usize,
    d: usize,
    label_bound: f64,
    delta_parallel: f64,
    seed: u64,
    out: *mut *mut LazylabDataset,
) -> LazylabStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let inner = generate_dataset(n, d, label_bound, delta_parallel, LabelLaw::Uniform, seed)?;
        *out = Box::into_raw(Box::new(LazylabDataset { inner }));
        Ok(())
    })
}

/// Builds a dataset from `n` row-major points of dimension `d` and `n` labels.
///
/// # Safety
/// `inputs` must hold `n * d` values, `labels` `n` values, `out` one handle.
#[no_mangle]
pub unsafe extern "C" fn lazylab_dataset_from_arrays(
    inputs: *const f64,
    labels: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut LazylabDataset,
) -> LazylabStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let len = n.checked_mul(d).ok_or_else(|| invalid("n * d overflows"))?;
        let x = slice(inputs, len, "inputs")?;
        let y = slice(labels, n, "labels")?;
        let rows = if d == 0 { Vec::new() } else { x.chunks(d).map(<[f64]>::to_vec).collect() };
        let inner = Dataset::new(rows, y.to_vec())?;
        *out = Box::into_raw(Box::new(LazylabDataset { inner }));
        Ok(())
    })
}

/// Number of points; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lazylab_dataset_len(ds: *const LazylabDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// Copies point `i` into `x` (length `x_len`, at least the input dimension).
///
/// # Safety
/// `ds` must be a live handle and `x` writable for `x_len` values.
#[no_mangle]
pub unsafe extern "C" fn lazylab_dataset_point(
    ds: *const LazylabDataset,
    i: usize,
    x: *mut f64,
    x_len: usize,
    label: *mut f64,
) -> LazylabStatus {
    guard(|| {
        let ds = &non_null(ds, "dataset")?.inner;
        let point = ds.inputs.get(i).ok_or_else(|| invalid("index out of range"))?;
        if x_len < point.len() {
            return Err(invalid("x buffer is shorter than the input dimension"));
        }
        non_null(x, "x")?;
        std::slice::from_raw_parts_mut(x, point.len()).copy_from_slice(point);
        *out_ptr(label, "label")? = ds.labels[i];
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lazylab_dataset_free(ds: *mut LazylabDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Initializes a network of `depth` hidden layers of width `width` with
/// exponents `gamma[0..depth+1]` and the named activation
/// (`scaled_silu` or `modified_softplus`).
///
/// # Safety
/// `gamma` must hold `gamma_len` values, `activation` must be a NUL-terminated
/// string and `out` writable for one handle.
#[no_mangle]
pub unsafe extern "C" fn lazylab_network_new(
    depth: usize,
    width: usize,
    input_dim: usize,
    gamma: *const f64,
    gamma_len: usize,
    activation: *const c_char,
    seed: u64,
    out: *mut *mut LazylabNetwork,
) -> LazylabStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let gamma = slice(gamma, gamma_len, "gamma")?;
        let act = Activation::by_name(string(activation, "activation")?)?;
        let scaling = make_scaling(depth, width, input_dim, gamma)?;
        let params = init_params(&scaling, seed);
        *out = Box::into_raw(Box::new(LazylabNetwork { params, scaling, act }));
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lazylab_network_free(net: *mut LazylabNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// s = (L+1)/2 − Σγ; NaN for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lazylab_network_laziness(net: *const LazylabNetwork) -> f64 {
    net.as_ref().map_or(f64::NAN, |n| n.scaling.laziness)
}

/// Network output at `x`.
///
/// # Safety
/// `net` must be a live handle, `x` readable for `x_len` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lazylab_network_forward(
    net: *const LazylabNetwork,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
) -> LazylabStatus {
    guard(|| {
        let net = non_null(net, "network")?;
        let out = out_ptr(out, "out")?;
        let x = slice(x, x_len, "x")?;
        *out = network::forward(&net.params, x, &net.act)?.output;
        Ok(())
    })
}

/// R = (1/2n) Σ_i (f(x_i) − y_i)².
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lazylab_network_loss(
    net: *const LazylabNetwork,
    ds: *const LazylabDataset,
    out: *mut f64,
) -> LazylabStatus {
    guard(|| {
        let net = non_null(net, "network")?;
        let ds = non_null(ds, "dataset")?;
        let out = out_ptr(out, "out")?;
        *out = gradflow::loss(&net.params, &ds.inner, &net.act)?.0;
        Ok(())
    })
}

/// λ_S of the limiting kernels for the network's scaling and activation,
/// by Gauss–Hermite quadrature of order `quad_order`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lazylab_kernel_lambda(
    net: *const LazylabNetwork,
    ds: *const LazylabDataset,
    quad_order: usize,
    out: *mut f64,
) -> LazylabStatus {
    guard(|| {
        let net = non_null(net, "network")?;
        let ds = non_null(ds, "dataset")?;
        let out = out_ptr(out, "out")?;
        if quad_order < 2 {
            return Err(invalid("quad_order must be at least 2"));
        }
        let settings = QuadratureSettings {
            order: quad_order,
            confirm_tol: None,
        };
        *out = kernel::limiting_kernels(&ds.inner, &net.scaling, &net.act, &settings)?.lambda_s;
        Ok(())
    })
}

/// Trains one network by gradient flow. `config_toml` holds experiment
/// fields in TOML (null for defaults); the dataset comes from the config.
///
/// # Safety
/// `config_toml` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lazylab_train(
    config_toml: *const c_char,
    width: usize,
    seed: u64,
    out: *mut LazylabTrainSummary,
) -> LazylabStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = if config_toml.is_null() {
            ExperimentConfig::default()
        } else {
            ExperimentConfig::from_toml(string(config_toml, "config_toml")?)?
        };
        let sc = cfg.scaling(width)?;
        let act = cfg.activation()?;
        let data = cfg.dataset()?;
        let p0 = init_params(&sc, seed);
        let (lambda_s, _) = lab::lambda_estimate(&cfg, &sc, &data, &act, &p0)?;
        let settings = lab::flow_settings(&cfg, &sc, &data, &act, &p0, lambda_s)?;
        let (_, trace) = gradflow::integrate_flow(&p0, &data, &act, &sc, &settings)?;
        *out = LazylabTrainSummary {
            laziness: sc.laziness,
            lambda_s,
            initial_loss: trace.initial_loss,
            final_loss: trace.final_loss(),
            dt: trace.dt,
            steps: trace.steps as u64,
            converged: u8::from(trace.termination == Termination::Converged),
            decay_bound_held: u8::from(trace.until_ratio(cfg.target_ratio).iter().all(|r| r.bound_ok)),
        };
        Ok(())
    })
}
