//! C ABI over the graph builder and the classifier.
//!
//! Every fallible function returns an [`SvgvStatus`]; the message of the
//! last failure on the calling thread is available from
//! [`svgv_last_error`]. Strings returned through out-pointers are owned by
//! the caller and must be released with [`svgv_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use svgvuln::nn::{checkpoint, Model};
use svgvuln::svg::{build_svg, to_dot, to_json, EdgeKind, SvgGraph};
use svgvuln::{AnalysisConfig, Error, ErrorFamily};

/// Status codes. Non-zero values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvgvStatus {
    Ok = 0,
    InvalidArgument = 1,
    Io = 2,
    Format = 3,
    Config = 4,
    Numeric = 5,
}

impl From<&Error> for SvgvStatus {
    fn from(e: &Error) -> Self {
        match e.family() {
            ErrorFamily::Io => SvgvStatus::Io,
            ErrorFamily::Format => SvgvStatus::Format,
            ErrorFamily::Config => SvgvStatus::Config,
            ErrorFamily::Numeric => SvgvStatus::Numeric,
        }
    }
}

/// Per-kind edge counts of a graph.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SvgvEdgeCounts {
    pub nodes: usize,
    pub sequential: usize,
    pub data_flow: usize,
    pub control_flow: usize,
    pub poacher_data_processing: usize,
    pub poacher_access_control: usize,
    pub poacher_resource_management: usize,
    pub total: usize,
}

/// Detection result for one function.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SvgvPrediction {
    /// Probability of the vulnerable class.
    pub vulnerable: f64,
    /// Index of the most likely CWE class (0 is benign).
    pub cwe_class: usize,
    /// Number of Poacher edges cited for the verdict.
    pub cited_edges: usize,
}

/// Opaque graph handle.
pub struct SvgvGraph(SvgGraph);

/// Opaque model handle.
pub struct SvgvModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: Error) -> SvgvStatus {
    let status = SvgvStatus::from(&e);
    set_error(e.to_string());
    status
}

fn invalid(msg: &str) -> SvgvStatus {
    set_error(msg.to_string());
    SvgvStatus::InvalidArgument
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, SvgvStatus> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not valid UTF-8")))
}

fn hand_out(s: String, out: *mut *mut c_char) -> SvgvStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            SvgvStatus::Ok
        }
        Err(_) => invalid("output contains a NUL byte"),
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn svgv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds the graph of a NUL-terminated C/C++ function with the default
/// analysis settings.
///
/// # Safety
/// `source` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn svgv_graph_build(source: *const c_char, out: *mut *mut SvgvGraph) -> SvgvStatus {
    if out.is_null() {
        return invalid("out is null");
    }
    let src = match text(source, "source") {
        Ok(s) => s,
        Err(s) => return s,
    };
    match build_svg(src, &AnalysisConfig::default()) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(SvgvGraph(g)));
            SvgvStatus::Ok
        }
        Err(e) => fail(e.into()),
    }
}

/// # Safety
/// `graph` must come from [`svgv_graph_build`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn svgv_graph_free(graph: *mut SvgvGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn svgv_graph_edge_counts(graph: *const SvgvGraph, out: *mut SvgvEdgeCounts) -> SvgvStatus {
    if graph.is_null() || out.is_null() {
        return invalid("null argument");
    }
    let g = &(*graph).0;
    let c = g.edge_counts();
    *out = SvgvEdgeCounts {
        nodes: g.node_count(),
        sequential: c.get(EdgeKind::SequentialFlow),
        data_flow: c.get(EdgeKind::DataFlow),
        control_flow: c.get(EdgeKind::ControlFlow),
        poacher_data_processing: c.get(EdgeKind::PoacherDataProcessing),
        poacher_access_control: c.get(EdgeKind::PoacherAccessControl),
        poacher_resource_management: c.get(EdgeKind::PoacherResourceManagement),
        total: c.total(),
    };
    SvgvStatus::Ok
}

/// Graph as JSON. Free the result with [`svgv_string_free`].
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn svgv_graph_to_json(graph: *const SvgvGraph, out: *mut *mut c_char) -> SvgvStatus {
    if graph.is_null() || out.is_null() {
        return invalid("null argument");
    }
    hand_out(to_json(&(*graph).0), out)
}

/// Graph in Graphviz DOT form. Free the result with [`svgv_string_free`].
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn svgv_graph_to_dot(graph: *const SvgvGraph, out: *mut *mut c_char) -> SvgvStatus {
    if graph.is_null() || out.is_null() {
        return invalid("null argument");
    }
    hand_out(to_dot(&(*graph).0), out)
}

/// Loads a checkpoint written by the training pipeline.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn svgv_model_load(path: *const c_char, out: *mut *mut SvgvModel) -> SvgvStatus {
    if out.is_null() {
        return invalid("out is null");
    }
    let p = match text(path, "path") {
        Ok(s) => s,
        Err(s) => return s,
    };
    match checkpoint::load(Path::new(p)) {
        Ok(m) => {
            *out = Box::into_raw(Box::new(SvgvModel(m)));
            SvgvStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `model` must come from [`svgv_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn svgv_model_free(model: *mut SvgvModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Classifies one function.
///
/// # Safety
/// `model` must be a live handle, `source` a valid C string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn svgv_model_predict(
    model: *const SvgvModel,
    source: *const c_char,
    out: *mut SvgvPrediction,
) -> SvgvStatus {
    if model.is_null() || out.is_null() {
        return invalid("null argument");
    }
    let src = match text(source, "source") {
        Ok(s) => s,
        Err(s) => return s,
    };
    let m = &(*model).0;
    match m.predict(src) {
        Ok(p) => {
            *out = SvgvPrediction {
                vulnerable: p.vulnerable,
                cwe_class: m.class_index(Some(&p.cwe_label)).unwrap_or(0),
                cited_edges: p.contributing_edges.len(),
            };
            SvgvStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Full prediction report as JSON. Free the result with [`svgv_string_free`].
///
/// # Safety
/// `model` must be a live handle, `source` a valid C string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn svgv_model_predict_json(
    model: *const SvgvModel,
    source: *const c_char,
    out: *mut *mut c_char,
) -> SvgvStatus {
    if model.is_null() || out.is_null() {
        return invalid("null argument");
    }
    let src = match text(source, "source") {
        Ok(s) => s,
        Err(s) => return s,
    };
    match (*model).0.predict(src) {
        Ok(p) => match serde_json::to_string(&p) {
            Ok(s) => hand_out(s, out),
            Err(e) => fail(Error::Format(e.to_string())),
        },
        Err(e) => fail(e),
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn svgv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
