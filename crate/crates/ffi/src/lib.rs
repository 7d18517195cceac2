//! C ABI over the `smartsvm` crate.
//!
//! Datasets and models are opaque handles created and freed through this
//! interface. Every fallible function returns an [`SmStatus`]; on failure
//! the message is available from [`sm_last_error`] on the same thread.
//! Strings returned through `char **` outputs are owned by the caller and
//! released with [`sm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use smartsvm::ber::{ovr_ber_estimates, pairwise_ber, pairwise_ber_matrix, BerEstimate};
use smartsvm::dataset::{load_csv, LabelColumn, LabeledDataset};
use smartsvm::multiclass::metrics::adjusted_rand_index;
use smartsvm::multiclass::{Classifier, ModelDocument, Strategy, TrainConfig};
use smartsvm::svm::GridPreset;
use smartsvm::{Error, ErrorKind};

/// Result code of every fallible call. The first four match the exit codes
/// of the command line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmStatus {
    Ok = 0,
    Usage = 1,
    Data = 2,
    Internal = 3,
    NullPointer = 4,
    Panic = 5,
}

/// Multiclass construction used by [`sm_model_train`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmStrategy {
    SmartSvm = 0,
    Ovo = 1,
    Ovr = 2,
}

/// Candidate regularization grid: `2^-6..2^6` or `2^-18..2^18`, both in
/// steps of `2^2`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmGrid {
    Desk = 0,
    Wide = 1,
}

/// Labeled feature matrix.
pub struct SmDataset {
    inner: LabeledDataset,
}

/// Trained multiclass model.
pub struct SmModel {
    inner: ModelDocument,
}

/// Bayes error estimate for one class pair or one class against the rest.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SmBerEstimate {
    pub r_raw: f64,
    pub r_corrected: f64,
    pub u_hp: f64,
    pub p_lower: f64,
    pub p_upper: f64,
    pub p_hat: f64,
    pub p_hat_normalized: f64,
    pub n1: usize,
    pub n2: usize,
}

impl From<BerEstimate> for SmBerEstimate {
    fn from(e: BerEstimate) -> Self {
        Self {
            r_raw: e.r_raw,
            r_corrected: e.r_corrected,
            u_hp: e.u_hp,
            p_lower: e.p_lower,
            p_upper: e.p_upper,
            p_hat: e.p_hat,
            p_hat_normalized: e.p_hat_normalized,
            n1: e.n1,
            n2: e.n2,
        }
    }
}

/// Training settings; initialize with [`sm_train_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmTrainConfig {
    pub strategy: SmStrategy,
    pub grid: SmGrid,
    pub n_trees: usize,
    pub cv_folds: usize,
    pub seed: u64,
    /// Nonzero to standardize features.
    pub standardize: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes were replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, converting errors and panics into a status and a stored
/// message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SmStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&e.to_string());
            match e.kind() {
                ErrorKind::Usage => SmStatus::Usage,
                ErrorKind::Data => SmStatus::Data,
                ErrorKind::Internal => SmStatus::Internal,
            }
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("{what} is null"));
            SmStatus::NullPointer
        }
        Ok(Err(Failure::Usage(message))) => {
            set_last_error(&message);
            SmStatus::Usage
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {message}"));
            SmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Usage(format!("{what} is not valid UTF-8")))
}

unsafe fn array<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn array_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn owned_string(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes were replaced").into_raw()
}

fn check_len(actual: usize, expected: usize) -> Result<(), Failure> {
    if actual < expected {
        return Err(Failure::Usage(format!("output buffer holds {actual} entries, need {expected}")));
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a dataset from `n` row-major rows of `d` features and one integer
/// label per row. Class names are the decimal labels, in order of first
/// appearance.
///
/// # Safety
/// `features` must hold `n * d` values and `labels` `n` values.
#[no_mangle]
pub unsafe extern "C" fn sm_dataset_new(
    features: *const f64,
    n: usize,
    d: usize,
    labels: *const i64,
    out_dataset: *mut *mut SmDataset,
) -> SmStatus {
    guard(|| {
        let slot = out(out_dataset, "out_dataset")?;
        let total = n
            .checked_mul(d)
            .ok_or_else(|| Failure::Usage("n * d overflows".into()))?;
        let x = array(features, total, "features")?.to_vec();
        let raw: Vec<String> = array(labels, n, "labels")?.iter().map(i64::to_string).collect();
        let inner = LabeledDataset::from_raw_labels(x, d, &raw)?;
        *slot = Box::into_raw(Box::new(SmDataset { inner }));
        Ok(())
    })
}

/// Loads a labeled CSV file. `label_column` is a header name or a 0-based
/// column index; null means the column named `label`.
///
/// # Safety
/// `path` and a non-null `label_column` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sm_dataset_load_csv(
    path: *const c_char,
    label_column: *const c_char,
    out_dataset: *mut *mut SmDataset,
) -> SmStatus {
    guard(|| {
        let slot = out(out_dataset, "out_dataset")?;
        let path = text(path, "path")?;
        let label = if label_column.is_null() {
            LabelColumn::default()
        } else {
            text(label_column, "label_column")?.parse().unwrap_or_default()
        };
        let inner = load_csv(path, &label)?;
        *slot = Box::into_raw(Box::new(SmDataset { inner }));
        Ok(())
    })
}

/// Frees a dataset. Null is ignored.
///
/// # Safety
/// `dataset` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sm_dataset_free(dataset: *mut SmDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of rows; 0 for null.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_dataset_n_samples(dataset: *const SmDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n_samples())
}

/// Number of feature columns; 0 for null.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_dataset_n_features(dataset: *const SmDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n_features())
}

/// Number of classes; 0 for null.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_dataset_n_classes(dataset: *const SmDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n_classes())
}

/// Original label of class id `class`, as a new string.
///
/// # Safety
/// `dataset` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_dataset_class_name(
    dataset: *const SmDataset,
    class: usize,
    out_name: *mut *mut c_char,
) -> SmStatus {
    guard(|| {
        let ds = &deref(dataset, "dataset")?.inner;
        let slot = out(out_name, "out_name")?;
        let name = ds
            .class_names()
            .get(class)
            .ok_or_else(|| Failure::Usage(format!("class id {class} out of range")))?;
        *slot = owned_string(name);
        Ok(())
    })
}

/// Bias-corrected estimate for classes `a` and `b` from `n_trees`
/// orthogonal spanning trees.
///
/// # Safety
/// `dataset` must be a live handle and `out_estimate` writable.
#[no_mangle]
pub unsafe extern "C" fn sm_pairwise_ber(
    dataset: *const SmDataset,
    a: usize,
    b: usize,
    n_trees: usize,
    out_estimate: *mut SmBerEstimate,
) -> SmStatus {
    guard(|| {
        let ds = &deref(dataset, "dataset")?.inner;
        let slot = out(out_estimate, "out_estimate")?;
        if a >= ds.n_classes() || b >= ds.n_classes() {
            return Err(Failure::Usage(format!("class ids must be below {}", ds.n_classes())));
        }
        *slot = pairwise_ber(ds, a, b, n_trees)?.into();
        Ok(())
    })
}

/// Normalized pairwise estimates as a row-major `K x K` matrix with NaN on
/// the diagonal. `len` is the capacity of `out_matrix`.
///
/// # Safety
/// `dataset` must be a live handle and `out_matrix` hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sm_pairwise_ber_matrix(
    dataset: *const SmDataset,
    n_trees: usize,
    out_matrix: *mut f64,
    len: usize,
) -> SmStatus {
    guard(|| {
        let ds = &deref(dataset, "dataset")?.inner;
        let k = ds.n_classes();
        check_len(len, k * k)?;
        let buf = array_mut(out_matrix, len, "out_matrix")?;
        let m = pairwise_ber_matrix(ds, n_trees)?;
        for (slot, v) in buf.iter_mut().zip(m.normalized_grid().into_iter().flatten()) {
            *slot = v.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// One-vs-rest estimate for every class, from a single set of spanning
/// trees over the whole dataset. `len` is the capacity of `out_estimates`.
///
/// # Safety
/// `dataset` must be a live handle and `out_estimates` hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn sm_ovr_ber(
    dataset: *const SmDataset,
    n_trees: usize,
    out_estimates: *mut SmBerEstimate,
    len: usize,
) -> SmStatus {
    guard(|| {
        let ds = &deref(dataset, "dataset")?.inner;
        check_len(len, ds.n_classes())?;
        let buf = array_mut(out_estimates, len, "out_estimates")?;
        for (slot, e) in buf.iter_mut().zip(ovr_ber_estimates(ds, n_trees)?) {
            *slot = e.into();
        }
        Ok(())
    })
}

/// Fills `config` with the library defaults.
///
/// # Safety
/// `config` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sm_train_config_default(config: *mut SmTrainConfig) {
    if let Some(c) = config.as_mut() {
        let d = TrainConfig::default();
        *c = SmTrainConfig {
            strategy: SmStrategy::SmartSvm,
            grid: SmGrid::Desk,
            n_trees: d.n_trees,
            cv_folds: d.cv_folds,
            seed: d.seed,
            standardize: i32::from(d.standardize),
        };
    }
}

/// Trains a model. A null `config` means the defaults.
///
/// # Safety
/// `dataset` must be a live handle, `config` null or readable.
#[no_mangle]
pub unsafe extern "C" fn sm_model_train(
    dataset: *const SmDataset,
    config: *const SmTrainConfig,
    out_model: *mut *mut SmModel,
) -> SmStatus {
    guard(|| {
        let ds = &deref(dataset, "dataset")?.inner;
        let slot = out(out_model, "out_model")?;
        let mut c = SmTrainConfig {
            strategy: SmStrategy::SmartSvm,
            grid: SmGrid::Desk,
            n_trees: 0,
            cv_folds: 0,
            seed: 0,
            standardize: 0,
        };
        sm_train_config_default(&mut c);
        if let Some(given) = config.as_ref() {
            c = *given;
        }
        let strategy = match c.strategy {
            SmStrategy::SmartSvm => Strategy::SmartSvm,
            SmStrategy::Ovo => Strategy::Ovo,
            SmStrategy::Ovr => Strategy::Ovr,
        };
        let grid = match c.grid {
            SmGrid::Desk => GridPreset::Desk,
            SmGrid::Wide => GridPreset::Wide,
        };
        if c.n_trees == 0 {
            return Err(Failure::Usage("n_trees must be at least 1".into()));
        }
        let cfg = TrainConfig {
            n_trees: c.n_trees,
            c_grid: grid.values(),
            cv_folds: c.cv_folds,
            seed: c.seed,
            standardize: c.standardize != 0,
            ..TrainConfig::default()
        };
        let (inner, _) = ModelDocument::train(ds, strategy, &cfg)?;
        *slot = Box::into_raw(Box::new(SmModel { inner }));
        Ok(())
    })
}

/// Frees a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sm_model_free(model: *mut SmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicts class ids for `n` row-major rows of `d` features.
///
/// # Safety
/// `model` must be a live handle, `features` hold `n * d` values and
/// `out_classes` `n` entries.
#[no_mangle]
pub unsafe extern "C" fn sm_model_predict(
    model: *const SmModel,
    features: *const f64,
    n: usize,
    d: usize,
    out_classes: *mut usize,
) -> SmStatus {
    guard(|| {
        let m = &deref(model, "model")?.inner;
        if d != m.n_features() {
            return Err(Error::DimensionMismatch {
                expected: m.n_features(),
                actual: d,
            }
            .into());
        }
        let total = n
            .checked_mul(d)
            .ok_or_else(|| Failure::Usage("n * d overflows".into()))?;
        let x = array(features, total, "features")?;
        let buf = array_mut(out_classes, n, "out_classes")?;
        buf.copy_from_slice(&m.predict(x)?);
        Ok(())
    })
}

/// Number of classes; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_model_n_classes(model: *const SmModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.classes().len())
}

/// Number of binary classifiers in the model; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_model_n_binary(model: *const SmModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n_models())
}

/// Original label of class id `class`, as a new string.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_model_class_name(
    model: *const SmModel,
    class: usize,
    out_name: *mut *mut c_char,
) -> SmStatus {
    guard(|| {
        let m = &deref(model, "model")?.inner;
        let slot = out(out_name, "out_name")?;
        let name = m
            .classes()
            .get(class)
            .ok_or_else(|| Failure::Usage(format!("class id {class} out of range")))?;
        *slot = owned_string(name);
        Ok(())
    })
}

/// Serializes a model to its JSON document.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_model_to_json(model: *const SmModel, out_json: *mut *mut c_char) -> SmStatus {
    guard(|| {
        let m = &deref(model, "model")?.inner;
        let slot = out(out_json, "out_json")?;
        *slot = owned_string(&m.to_json());
        Ok(())
    })
}

/// Parses a model JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sm_model_from_json(json: *const c_char, out_model: *mut *mut SmModel) -> SmStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let inner = ModelDocument::from_json(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(SmModel { inner }));
        Ok(())
    })
}

/// Adjusted Rand index of two labelings of `n` samples.
///
/// # Safety
/// `y` and `y_hat` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn sm_adjusted_rand_index(
    y: *const usize,
    y_hat: *const usize,
    n: usize,
    out_ari: *mut f64,
) -> SmStatus {
    guard(|| {
        let slot = out(out_ari, "out_ari")?;
        *slot = adjusted_rand_index(array(y, n, "y")?, array(y_hat, n, "y_hat")?)?;
        Ok(())
    })
}
