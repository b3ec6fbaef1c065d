use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use lazylab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(lazylab_last_error()) }.to_string_lossy().into_owned()
}

fn dataset(n: usize, d: usize, seed: u64) -> *mut LazylabDataset {
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { lazylab_dataset_generate(n, d, 1.0, 0.01, seed, &mut ds) }, LazylabStatus::Ok);
    ds
}

fn network(width: usize, d: usize, gamma: &[f64], seed: u64) -> *mut LazylabNetwork {
    let act = CString::new("scaled_silu").unwrap();
    let mut net = ptr::null_mut();
    let st = unsafe {
        lazylab_network_new(gamma.len() - 1, width, d, gamma.as_ptr(), gamma.len(), act.as_ptr(), seed, &mut net)
    };
    assert_eq!(st, LazylabStatus::Ok, "{}", last_error());
    net
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(lazylab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn dataset_round_trip_through_arrays() {
    let ds = dataset(4, 3, 7);
    assert_eq!(unsafe { lazylab_dataset_len(ds) }, 4);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..4 {
        let mut x = [0.0; 3];
        let mut y = 0.0;
        assert_eq!(unsafe { lazylab_dataset_point(ds, i, x.as_mut_ptr(), 3, &mut y) }, LazylabStatus::Ok);
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(y.abs() <= 1.0);
        xs.extend_from_slice(&x);
        ys.push(y);
    }
    let mut copy = ptr::null_mut();
    let st = unsafe { lazylab_dataset_from_arrays(xs.as_ptr(), ys.as_ptr(), 4, 3, &mut copy) };
    assert_eq!(st, LazylabStatus::Ok);
    let net = network(8, 3, &[0.5, 0.5, 0.0], 1);
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        assert_eq!(lazylab_network_loss(net, ds, &mut a), LazylabStatus::Ok);
        assert_eq!(lazylab_network_loss(net, copy, &mut b), LazylabStatus::Ok);
        lazylab_network_free(net);
        lazylab_dataset_free(copy);
        lazylab_dataset_free(ds);
    }
    assert_eq!(a, b);
}

#[test]
fn forward_agrees_with_rust_api() {
    use lazylab::network::{forward, init_params, make_scaling};
    let gamma = [0.5, 0.25, 0.0];
    let net = network(16, 4, &gamma, 3);
    let x = [0.5, -0.5, 0.5, 0.5];
    let mut y = f64::NAN;
    assert_eq!(unsafe { lazylab_network_forward(net, x.as_ptr(), 4, &mut y) }, LazylabStatus::Ok);
    let sc = make_scaling(2, 16, 4, &gamma).unwrap();
    let expect = forward(&init_params(&sc, 3), &x, &lazylab::activation::scaled_silu()).unwrap().output;
    assert_eq!(y, expect);
    assert_eq!(unsafe { lazylab_network_laziness(net) }, sc.laziness);
    unsafe { lazylab_network_free(net) };
}

#[test]
fn errors_carry_status_and_message() {
    let mut ds = ptr::null_mut();
    let st = unsafe { lazylab_dataset_generate(0, 3, 1.0, 0.01, 0, &mut ds) };
    assert_eq!(st, LazylabStatus::Contract);
    assert!(ds.is_null());
    assert!(last_error().contains("n >= 1"));

    let net = network(8, 3, &[0.5, 0.5, 0.0], 0);
    let x = [1.0, 0.0];
    let mut y = 0.0;
    assert_eq!(unsafe { lazylab_network_forward(net, x.as_ptr(), 2, &mut y) }, LazylabStatus::Contract);
    assert_eq!(unsafe { lazylab_network_forward(net, x.as_ptr(), 2, ptr::null_mut()) }, LazylabStatus::NullPointer);
    assert_eq!(unsafe { lazylab_kernel_lambda(net, ptr::null(), 40, &mut y) }, LazylabStatus::NullPointer);
    unsafe { lazylab_network_free(net) };

    let bad = CString::new("relu").unwrap();
    let gamma = [0.5, 0.5];
    let mut out = ptr::null_mut();
    let st = unsafe { lazylab_network_new(1, 8, 3, gamma.as_ptr(), 2, bad.as_ptr(), 0, &mut out) };
    assert_eq!(st, LazylabStatus::Config);
    assert!(last_error().contains("relu"));

    let toml = CString::new("depth = 2\nbogus = 1\n").unwrap();
    let mut summary = LazylabTrainSummary::default();
    assert_eq!(unsafe { lazylab_train(toml.as_ptr(), 16, 0, &mut summary) }, LazylabStatus::Config);
}

#[test]
fn free_accepts_null() {
    unsafe {
        lazylab_dataset_free(ptr::null_mut());
        lazylab_network_free(ptr::null_mut());
    }
    assert_eq!(unsafe { lazylab_dataset_len(ptr::null()) }, 0);
    assert!(unsafe { lazylab_network_laziness(ptr::null()) }.is_nan());
}

#[test]
fn kernel_lambda_is_positive() {
    let ds = dataset(3, 4, 11);
    let net = network(32, 4, &[0.5, 0.5, 0.0], 0);
    let mut lambda = 0.0;
    assert_eq!(unsafe { lazylab_kernel_lambda(net, ds, 40, &mut lambda) }, LazylabStatus::Ok);
    assert!(lambda > 0.0);
    assert_eq!(unsafe { lazylab_kernel_lambda(net, ds, 1, &mut lambda) }, LazylabStatus::InvalidArgument);
    unsafe {
        lazylab_network_free(net);
        lazylab_dataset_free(ds);
    }
}

#[test]
fn train_summary_reports_decay() {
    let toml = CString::new(
        "depth = 2\ninput_dim = 4\nsamples = 3\nquad_order = 40\nconfirm_quadrature = false\nstep_check = false\n",
    )
    .unwrap();
    let mut s = LazylabTrainSummary::default();
    let st = unsafe { lazylab_train(toml.as_ptr(), 256, 0, &mut s) };
    assert_eq!(st, LazylabStatus::Ok, "{}", last_error());
    assert_eq!(s.laziness, 0.5);
    assert!(s.lambda_s > 0.0 && s.dt > 0.0 && s.steps > 0);
    assert!(s.final_loss < s.initial_loss);
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lazylab.h")).unwrap();
    for name in [
        "lazylab_version",
        "lazylab_last_error",
        "lazylab_dataset_generate",
        "lazylab_dataset_free",
        "lazylab_network_new",
        "lazylab_network_forward",
        "lazylab_network_loss",
        "lazylab_kernel_lambda",
        "lazylab_train",
        "typedef struct LazylabDataset LazylabDataset;",
        "LAZYLAB_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile_dir();
    let src = dir.join("probe.c");
    std::fs::write(
        &src,
        "#include \"lazylab.h\"\nint main(void) { LazylabTrainSummary s; (void)s; return LAZYLAB_STATUS_OK; }\n",
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("lazylab-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
