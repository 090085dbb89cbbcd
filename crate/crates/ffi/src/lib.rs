//! C interface to the cbmfem solver.
//!
//! Objects are opaque handles created and released by the library. Every
//! function returns a [`CbmfemStatus`]; on failure the message is available
//! from [`cbmfem_last_error`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cbmfem::cbmfem::cbmfem_run;
use cbmfem::config::{Problem, ProblemConfig};
use cbmfem::export::{PairFile, SolutionFile};
use cbmfem::systems::solve_system;
use cbmfem::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbmfemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Solver = 4,
    OutOfRange = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A parsed problem with its solver settings.
pub struct CbmfemProblem {
    cfg: ProblemConfig,
}

enum Sets {
    Scalar(Vec<SolutionFile>),
    Pair(Vec<PairFile>),
}

/// Solutions on every level of a finished run.
pub struct CbmfemResult {
    sets: Sets,
    failure: Option<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(CbmfemStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) | Error::InvalidInput(_) | Error::UnsupportedDomain(_) => CbmfemStatus::Config,
            _ => CbmfemStatus::Solver,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CbmfemStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CbmfemStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CbmfemStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(CbmfemStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(CbmfemStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn out_of_range(msg: String) -> Fail {
    Fail(CbmfemStatus::OutOfRange, msg)
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next library call on the same thread.
#[no_mangle]
pub extern "C" fn cbmfem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cbmfem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML problem config.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_problem_from_toml(toml: *const c_char, out: *mut *mut CbmfemProblem) -> CbmfemStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let src = str_arg(toml, "toml")?;
        let cfg = ProblemConfig::from_str(src, "<toml>")?;
        *out = Box::into_raw(Box::new(CbmfemProblem { cfg }));
        Ok(())
    })
}

/// Loads a built-in problem by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_problem_from_preset(name: *const c_char, out: *mut *mut CbmfemProblem) -> CbmfemStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = cbmfem::presets::load(str_arg(name, "name")?)?;
        *out = Box::into_raw(Box::new(CbmfemProblem { cfg }));
        Ok(())
    })
}

/// Replaces a named parameter and rebuilds the problem.
///
/// # Safety
/// `problem` must come from this library; `name` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_problem_set_parameter(problem: *mut CbmfemProblem, name: *const c_char, value: f64) -> CbmfemStatus {
    guard(|| {
        let p = out_arg(problem, "problem")?;
        let name = str_arg(name, "name")?;
        p.cfg = p.cfg.with_parameters(&[(name.to_string(), value)])?;
        Ok(())
    })
}

/// Sets the finest level index.
///
/// # Safety
/// `problem` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_problem_set_levels(problem: *mut CbmfemProblem, levels: usize) -> CbmfemStatus {
    guard(|| {
        out_arg(problem, "problem")?.cfg.levels = levels;
        Ok(())
    })
}

/// Overrides the three filter constants; pass infinity to disable one.
///
/// # Safety
/// `problem` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_problem_set_filters(problem: *mut CbmfemProblem, c1: f64, c2: f64, c3: f64) -> CbmfemStatus {
    guard(|| {
        let p = out_arg(problem, "problem")?;
        let mut s = p.cfg.solver.clone();
        (s.c1, s.c2, s.c3) = (c1, c2, c3);
        s.validate().map_err(|e| Fail(CbmfemStatus::Config, e.to_string()))?;
        p.cfg.solver = s;
        Ok(())
    })
}

/// Number of fields per solution: 1 for scalar problems, 2 for systems.
///
/// # Safety
/// `problem` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_problem_field_count(problem: *const CbmfemProblem, out: *mut usize) -> CbmfemStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        *out_arg(out, "out")? = match p.cfg.problem {
            Problem::Scalar(_) => 1,
            Problem::TwoField(_) => 2,
        };
        Ok(())
    })
}

/// # Safety
/// `problem` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_problem_free(problem: *mut CbmfemProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Runs the multilevel solver. A run that stops early still produces a
/// result holding the levels it completed; see `cbmfem_result_failure`.
///
/// # Safety
/// `problem` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_solve(problem: *const CbmfemProblem, out: *mut *mut CbmfemResult) -> CbmfemStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = &handle(problem, "problem")?.cfg;
        let hier = cfg.problem.hierarchy(cfg.levels)?;
        let result = match &cfg.problem {
            Problem::Scalar(spec) => {
                let run = cbmfem_run(spec, &hier, &cfg.solver);
                CbmfemResult { sets: Sets::Scalar(run.sets.iter().map(SolutionFile::from).collect()), failure: c_failure(run.failure) }
            }
            Problem::TwoField(spec) => {
                let run = solve_system(spec, &hier, &cfg.solver);
                CbmfemResult { sets: Sets::Pair(run.sets.iter().map(PairFile::from).collect()), failure: c_failure(run.failure) }
            }
        };
        *out = Box::into_raw(Box::new(result));
        Ok(())
    })
}

fn c_failure(f: Option<String>) -> Option<CString> {
    f.map(|m| CString::new(m.replace('\0', " ")).expect("NULs replaced"))
}

impl CbmfemResult {
    fn levels(&self) -> usize {
        match &self.sets {
            Sets::Scalar(s) => s.len(),
            Sets::Pair(s) => s.len(),
        }
    }

    fn check_level(&self, level: usize) -> Result<(), Fail> {
        if level >= self.levels() {
            return Err(out_of_range(format!("level {level} not in result ({} levels)", self.levels())));
        }
        Ok(())
    }

    fn count(&self, level: usize) -> Result<usize, Fail> {
        self.check_level(level)?;
        Ok(match &self.sets {
            Sets::Scalar(s) => s[level].solutions.len(),
            Sets::Pair(s) => s[level].solutions.len(),
        })
    }

    fn check_index(&self, level: usize, index: usize) -> Result<(), Fail> {
        let n = self.count(level)?;
        if index >= n {
            return Err(out_of_range(format!("solution {index} not on level {level} ({n} solutions)")));
        }
        Ok(())
    }

    fn field(&self, level: usize, index: usize, field: usize) -> Result<&[f64], Fail> {
        self.check_index(level, index)?;
        match (&self.sets, field) {
            (Sets::Scalar(s), 0) => Ok(&s[level].solutions[index].values),
            (Sets::Pair(s), 0) => Ok(&s[level].solutions[index].u),
            (Sets::Pair(s), 1) => Ok(&s[level].solutions[index].v),
            _ => Err(out_of_range(format!("field {field} does not exist"))),
        }
    }

    fn json(&self, level: usize) -> Result<String, Fail> {
        self.check_level(level)?;
        let text = match &self.sets {
            Sets::Scalar(s) => serde_json::to_string(&s[level]),
            Sets::Pair(s) => serde_json::to_string(&s[level]),
        };
        text.map_err(|e| Fail(CbmfemStatus::Solver, e.to_string()))
    }
}

/// Number of levels the run completed.
///
/// # Safety
/// `result` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_result_level_count(result: *const CbmfemResult, out: *mut usize) -> CbmfemStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(result, "result")?.levels();
        Ok(())
    })
}

/// Number of solutions on `level`.
///
/// # Safety
/// `result` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_result_solution_count(result: *const CbmfemResult, level: usize, out: *mut usize) -> CbmfemStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(result, "result")?.count(level)?;
        Ok(())
    })
}

/// Copies nodal values of one field of a solution into `buf`. With a null
/// `buf` only the required length is stored in `len`.
///
/// # Safety
/// `result` must come from this library; `len` must be writable; `buf`
/// must be null or hold `*len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_result_values(
    result: *const CbmfemResult,
    level: usize,
    index: usize,
    field: usize,
    buf: *mut f64,
    len: *mut usize,
) -> CbmfemStatus {
    guard(|| {
        let values = handle(result, "result")?.field(level, index, field)?;
        let len = out_arg(len, "len")?;
        if buf.is_null() {
            *len = values.len();
            return Ok(());
        }
        if *len < values.len() {
            let need = values.len();
            *len = need;
            return Err(Fail(CbmfemStatus::BufferTooSmall, format!("buffer holds fewer than {need} values")));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        *len = values.len();
        Ok(())
    })
}

/// Residual norm recorded for a solution.
///
/// # Safety
/// `result` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_result_residual(result: *const CbmfemResult, level: usize, index: usize, out: *mut f64) -> CbmfemStatus {
    guard(|| {
        let r = handle(result, "result")?;
        r.check_index(level, index)?;
        *out_arg(out, "out")? = match &r.sets {
            Sets::Scalar(s) => s[level].solutions[index].residual,
            Sets::Pair(s) => s[level].solutions[index].residual,
        };
        Ok(())
    })
}

/// JSON for one level; free the string with `cbmfem_string_free`.
///
/// # Safety
/// `result` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_result_json(result: *const CbmfemResult, level: usize, out: *mut *mut c_char) -> CbmfemStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = handle(result, "result")?.json(level)?;
        *out = CString::new(text).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Why the run stopped early, or null if it completed. Owned by the result.
///
/// # Safety
/// `result` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_result_failure(result: *const CbmfemResult) -> *const c_char {
    result.as_ref().and_then(|r| r.failure.as_ref()).map_or(ptr::null(), |f| f.as_ptr())
}

/// # Safety
/// `result` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_result_free(result: *mut CbmfemResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cbmfem_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
