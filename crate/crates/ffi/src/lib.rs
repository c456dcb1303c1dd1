//! C ABI over the training, prediction and optimization entry points.
//!
//! Conventions:
//! - every function returns an `EelmStatus`; results come back through out
//!   pointers that are written only on `EELM_STATUS_OK`
//! - models are opaque handles created by the train functions and released
//!   with `eelm_model_free`
//! - matrices are row-major `double` buffers
//! - panics never cross the boundary; they map to `EELM_STATUS_PANIC`

use std::ffi::{c_char, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{DMatrix, DVector};

use eelm_core::baselines::{minimize_with, OptimizerKind, OptimizerSpec};
use eelm_core::elm::{predict, Activation, ElmModel, RegressionData};
use eelm_core::harness::{r_squared, rmse};
use eelm_core::mrfo::mantegna_sigma;
use eelm_core::optimizer::Bounds;
use eelm_core::trainer::{train, train_plain_elm, TrainingRunConfig};

/// Result of every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EelmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EelmActivation {
    Sigmoid = 0,
    Tanh = 1,
    Linear = 2,
}

impl From<EelmActivation> for Activation {
    fn from(a: EelmActivation) -> Activation {
        match a {
            EelmActivation::Sigmoid => Activation::Sigmoid,
            EelmActivation::Tanh => Activation::Tanh,
            EelmActivation::Linear => Activation::Linear,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EelmOptimizer {
    Mrfo = 0,
    MrfoLevy = 1,
    Pso = 2,
    Ga = 3,
    Woa = 4,
    RandomSearch = 5,
}

impl From<EelmOptimizer> for OptimizerKind {
    fn from(k: EelmOptimizer) -> OptimizerKind {
        match k {
            EelmOptimizer::Mrfo => OptimizerKind::Mrfo,
            EelmOptimizer::MrfoLevy => OptimizerKind::MrfoLevy,
            EelmOptimizer::Pso => OptimizerKind::Pso,
            EelmOptimizer::Ga => OptimizerKind::Ga,
            EelmOptimizer::Woa => OptimizerKind::Woa,
            EelmOptimizer::RandomSearch => OptimizerKind::RandomSearch,
        }
    }
}

/// Opaque trained-model handle.
pub struct EelmModel {
    inner: ElmModel,
}

/// Black-box objective: `f(x, dim, user_data) -> fitness`. Non-finite
/// returns are treated as worst-possible by the optimizers.
pub type EelmObjective =
    unsafe extern "C" fn(x: *const f64, dim: usize, user_data: *mut c_void) -> f64;

fn guard<F: FnOnce() -> EelmStatus>(f: F) -> EelmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => EelmStatus::Panic,
    }
}

/// Reads a row-major `rows x cols` buffer into a matrix, or returns None
/// for null/empty input.
unsafe fn read_matrix(data: *const f64, rows: usize, cols: usize) -> Option<DMatrix<f64>> {
    if data.is_null() || rows == 0 || cols == 0 {
        return None;
    }
    let slice = unsafe { std::slice::from_raw_parts(data, rows * cols) };
    Some(DMatrix::from_fn(rows, cols, |r, c| slice[r * cols + c]))
}

unsafe fn read_vector(data: *const f64, len: usize) -> Option<DVector<f64>> {
    if data.is_null() || len == 0 {
        return None;
    }
    let slice = unsafe { std::slice::from_raw_parts(data, len) };
    Some(DVector::from_column_slice(slice))
}

/// Static description of a status code.
#[unsafe(no_mangle)]
pub extern "C" fn eelm_status_message(status: EelmStatus) -> *const c_char {
    let msg: &'static CStr = match status {
        EelmStatus::Ok => c"ok",
        EelmStatus::NullArgument => c"a required pointer argument was null",
        EelmStatus::InvalidArgument => c"an argument was out of range or inconsistent",
        EelmStatus::NumericalFailure => c"the computation failed numerically",
        EelmStatus::Panic => c"internal panic; state may be inconsistent",
    };
    msg.as_ptr()
}

/// Mantegna scale constant for the Levy exponent `beta`.
#[unsafe(no_mangle)]
pub extern "C" fn eelm_levy_sigma(beta: f64, out_sigma: *mut f64) -> EelmStatus {
    guard(|| {
        if out_sigma.is_null() {
            return EelmStatus::NullArgument;
        }
        if !(beta > 0.0 && beta < 2.0) {
            return EelmStatus::InvalidArgument;
        }
        let sigma = mantegna_sigma(beta);
        if !sigma.is_finite() {
            return EelmStatus::NumericalFailure;
        }
        unsafe { *out_sigma = sigma };
        EelmStatus::Ok
    })
}

#[unsafe(no_mangle)]
pub extern "C" fn eelm_rmse(
    predictions: *const f64,
    targets: *const f64,
    len: usize,
    out_rmse: *mut f64,
) -> EelmStatus {
    guard(|| {
        if predictions.is_null() || targets.is_null() || out_rmse.is_null() {
            return EelmStatus::NullArgument;
        }
        if len == 0 {
            return EelmStatus::InvalidArgument;
        }
        let p = unsafe { std::slice::from_raw_parts(predictions, len) };
        let t = unsafe { std::slice::from_raw_parts(targets, len) };
        match rmse(p, t) {
            Ok(v) => {
                unsafe { *out_rmse = v };
                EelmStatus::Ok
            }
            Err(_) => EelmStatus::NumericalFailure,
        }
    })
}

#[unsafe(no_mangle)]
pub extern "C" fn eelm_r_squared(
    predictions: *const f64,
    targets: *const f64,
    len: usize,
    out_r2: *mut f64,
) -> EelmStatus {
    guard(|| {
        if predictions.is_null() || targets.is_null() || out_r2.is_null() {
            return EelmStatus::NullArgument;
        }
        if len == 0 {
            return EelmStatus::InvalidArgument;
        }
        let p = unsafe { std::slice::from_raw_parts(predictions, len) };
        let t = unsafe { std::slice::from_raw_parts(targets, len) };
        match r_squared(p, t) {
            Ok(v) => {
                unsafe { *out_r2 = v };
                EelmStatus::Ok
            }
            Err(_) => EelmStatus::NumericalFailure,
        }
    })
}

/// Single-shot ELM: random hidden layer, least-squares output weights.
#[unsafe(no_mangle)]
pub extern "C" fn eelm_train_plain(
    features: *const f64,
    samples: usize,
    n_features: usize,
    targets: *const f64,
    hidden_nodes: usize,
    activation: EelmActivation,
    penalty: f64,
    seed: u64,
    out_model: *mut *mut EelmModel,
) -> EelmStatus {
    guard(|| {
        if out_model.is_null() {
            return EelmStatus::NullArgument;
        }
        let (Some(inputs), Some(t)) = (
            unsafe { read_matrix(features, samples, n_features) },
            unsafe { read_vector(targets, samples) },
        ) else {
            return EelmStatus::NullArgument;
        };
        let data = match RegressionData::new(inputs, t) {
            Ok(d) => d,
            Err(_) => return EelmStatus::InvalidArgument,
        };
        match train_plain_elm(&data, hidden_nodes, activation.into(), penalty, seed) {
            Ok(model) => {
                let handle = Box::new(EelmModel { inner: model });
                unsafe { *out_model = Box::into_raw(handle) };
                EelmStatus::Ok
            }
            Err(eelm_core::Error::InvalidConfig(_)) => EelmStatus::InvalidArgument,
            Err(_) => EelmStatus::NumericalFailure,
        }
    })
}

/// Evolutionary ELM: hidden parameters tuned by the chosen optimizer.
/// `out_fitness` (optional) receives the best held-out RMSE.
#[unsafe(no_mangle)]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn eelm_train_evolutionary(
    features: *const f64,
    samples: usize,
    n_features: usize,
    targets: *const f64,
    hidden_nodes: usize,
    activation: EelmActivation,
    optimizer: EelmOptimizer,
    population: usize,
    iterations: usize,
    penalty: f64,
    seed: u64,
    out_model: *mut *mut EelmModel,
    out_fitness: *mut f64,
) -> EelmStatus {
    guard(|| {
        if out_model.is_null() {
            return EelmStatus::NullArgument;
        }
        let (Some(inputs), Some(t)) = (
            unsafe { read_matrix(features, samples, n_features) },
            unsafe { read_vector(targets, samples) },
        ) else {
            return EelmStatus::NullArgument;
        };
        let data = match RegressionData::new(inputs, t) {
            Ok(d) => d,
            Err(_) => return EelmStatus::InvalidArgument,
        };
        let config = TrainingRunConfig {
            hidden_nodes,
            activation: activation.into(),
            optimizer_kind: optimizer.into(),
            population_size: population,
            max_iterations: iterations,
            penalty,
            seed,
            ..TrainingRunConfig::default()
        };
        match train(&data, &config) {
            Ok((model, manifest)) => {
                if !out_fitness.is_null() {
                    unsafe { *out_fitness = manifest.best_fitness };
                }
                let handle = Box::new(EelmModel { inner: model });
                unsafe { *out_model = Box::into_raw(handle) };
                EelmStatus::Ok
            }
            Err(eelm_core::Error::InvalidConfig(_)) => EelmStatus::InvalidArgument,
            Err(_) => EelmStatus::NumericalFailure,
        }
    })
}

/// Predicts `samples` rows into `out_predictions` (length `samples`).
#[unsafe(no_mangle)]
pub extern "C" fn eelm_model_predict(
    model: *const EelmModel,
    features: *const f64,
    samples: usize,
    n_features: usize,
    out_predictions: *mut f64,
) -> EelmStatus {
    guard(|| {
        if model.is_null() || out_predictions.is_null() {
            return EelmStatus::NullArgument;
        }
        let model = unsafe { &*model };
        let Some(inputs) = (unsafe { read_matrix(features, samples, n_features) }) else {
            return EelmStatus::NullArgument;
        };
        if n_features != model.inner.input_dim() {
            return EelmStatus::InvalidArgument;
        }
        match predict(&model.inner, &inputs) {
            Ok(p) => {
                let out = unsafe { std::slice::from_raw_parts_mut(out_predictions, samples) };
                out.copy_from_slice(p.as_slice());
                EelmStatus::Ok
            }
            Err(_) => EelmStatus::NumericalFailure,
        }
    })
}

/// Number of input features the model expects.
#[unsafe(no_mangle)]
pub extern "C" fn eelm_model_input_dim(model: *const EelmModel, out_dim: *mut usize) -> EelmStatus {
    guard(|| {
        if model.is_null() || out_dim.is_null() {
            return EelmStatus::NullArgument;
        }
        unsafe { *out_dim = (*model).inner.input_dim() };
        EelmStatus::Ok
    })
}

/// Releases a model handle. Null is a no-op.
#[unsafe(no_mangle)]
pub extern "C" fn eelm_model_free(model: *mut EelmModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Minimizes a caller-supplied objective over `[lower, upper]^dim`.
/// `out_best` must hold `dim` doubles.
#[unsafe(no_mangle)]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn eelm_optimize(
    optimizer: EelmOptimizer,
    dim: usize,
    lower: f64,
    upper: f64,
    population: usize,
    iterations: usize,
    seed: u64,
    objective: Option<EelmObjective>,
    user_data: *mut c_void,
    out_best: *mut f64,
    out_fitness: *mut f64,
) -> EelmStatus {
    guard(|| {
        let Some(objective) = objective else {
            return EelmStatus::NullArgument;
        };
        if out_best.is_null() || out_fitness.is_null() {
            return EelmStatus::NullArgument;
        }
        let bounds = match Bounds::uniform(dim, lower, upper) {
            Ok(b) => b,
            Err(_) => return EelmStatus::InvalidArgument,
        };
        let spec = OptimizerSpec::new(optimizer.into(), population, iterations, bounds, seed);
        let user_data = UserData(user_data);
        let outcome = match minimize_with(&spec, move |x| unsafe {
            objective(x.as_ptr(), x.len(), user_data.0)
        }) {
            Ok(o) => o,
            Err(eelm_core::Error::InvalidConfig(_)) => return EelmStatus::InvalidArgument,
            Err(_) => return EelmStatus::NumericalFailure,
        };
        let out = unsafe { std::slice::from_raw_parts_mut(out_best, dim) };
        out.copy_from_slice(outcome.best_position.as_slice());
        unsafe { *out_fitness = outcome.best_fitness };
        EelmStatus::Ok
    })
}

/// Raw user pointer carried into the objective closure.
struct UserData(*mut c_void);
unsafe impl Send for UserData {}
unsafe impl Sync for UserData {}
impl Clone for UserData {
    fn clone(&self) -> Self {
        UserData(self.0)
    }
}
impl Copy for UserData {}
