//! C ABI over the `minsum` library.
//!
//! Problems live behind an opaque [`MinsumProblem`] handle. Every entry point
//! returns a [`MinsumStatus`]; on failure the message is available from
//! [`minsum_last_error_message`] until the next call on the same thread.
//! Node indices are 0-based. Output arrays are caller-allocated with one
//! slot per node.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use minsum::dominance::{certify_objective, Certification, CertificateKind};
use minsum::general::{run_general, GeneralInit, GeneralRunOptions, GridOptions};
use minsum::io::{read_problem, Problem};
use minsum::quadratic::{run_quadratic, QuadraticInit, RunOptions};
use minsum::reference::{solve_general_newton, solve_quadratic_direct, NewtonOptions};
use minsum::tree::{key_property_general, key_property_quadratic};
use minsum::{Error, QuadraticProblem};

/// Opaque problem handle.
pub struct MinsumProblem {
    inner: Problem,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinsumStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    /// A message update or local minimisation was not well posed.
    IllPosed = 5,
    NotConverged = 6,
    DomainBoundary = 7,
    NotPositiveDefinite = 8,
    TreeTooLarge = 9,
    NonFinite = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinsumCertificateKind {
    Refuted = 0,
    ExactQuadratic = 1,
    ClosedForm = 2,
    Sampled = 3,
    /// The Perron bracket straddles 1; `lambda` is its upper end.
    Indeterminate = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> MinsumStatus {
    match e {
        Error::Parse { .. } => MinsumStatus::Parse,
        Error::Io(_) => MinsumStatus::Io,
        Error::IllPosed { .. } | Error::InitialMessage { .. } => MinsumStatus::IllPosed,
        Error::NoConvergence(_) => MinsumStatus::NotConverged,
        Error::DomainBoundary { .. } => MinsumStatus::DomainBoundary,
        Error::NotPositiveDefinite { .. } => MinsumStatus::NotPositiveDefinite,
        Error::TreeTooLarge { .. } => MinsumStatus::TreeTooLarge,
        Error::NonFinite(_) => MinsumStatus::NonFinite,
        _ => MinsumStatus::InvalidArgument,
    }
}

struct Fail(MinsumStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MinsumStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, recording any failure (including a panic) as the thread's
/// last error.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> MinsumStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MinsumStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MinsumStatus::Panic
        }
    }
}

unsafe fn problem<'a>(p: *const MinsumProblem) -> Result<&'a Problem, Fail> {
    p.as_ref().map(|p| &p.inner).ok_or_else(|| null("problem"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn x0_or_zero(x0: *const f64, n: usize) -> Result<Vec<f64>, Fail> {
    if x0.is_null() {
        Ok(vec![0.0; n])
    } else {
        Ok(slice(x0, n, "x0")?.to_vec())
    }
}

fn grid(points: usize) -> GridOptions {
    let mut g = GridOptions::default();
    if points > 0 {
        g.points = points;
        g.max_points = g.max_points.max(points);
    }
    g
}

fn boxed(inner: Problem, out: *mut *mut MinsumProblem) {
    unsafe { *out = Box::into_raw(Box::new(MinsumProblem { inner })) };
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn minsum_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a problem file. `path` is a NUL-terminated UTF-8 string.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn minsum_problem_from_file(
    path: *const c_char,
    out: *mut *mut MinsumProblem,
) -> MinsumStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(MinsumStatus::InvalidArgument, "path is not UTF-8".into()))?;
        boxed(read_problem(Path::new(path))?, out);
        Ok(())
    })
}

/// Builds `½ xᵀAx − bᵀx` from `nnz` triplets. Both `(i, j)` and `(j, i)` may
/// be given as long as they agree; one of them is enough.
///
/// # Safety
/// `rows`, `cols`, `vals` must hold `nnz` entries, `b` must hold `n`, and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn minsum_problem_from_triplets(
    n: usize,
    rows: *const usize,
    cols: *const usize,
    vals: *const f64,
    nnz: usize,
    b: *const f64,
    out: *mut *mut MinsumProblem,
) -> MinsumStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if nnz > 0 && (rows.is_null() || cols.is_null()) {
            return Err(null("rows/cols"));
        }
        let vals = slice(vals, nnz, "vals")?;
        let b = slice(b, n, "b")?.to_vec();
        let triplets: Vec<(usize, usize, f64)> = (0..nnz)
            .map(|k| (*rows.add(k), *cols.add(k), vals[k]))
            .collect();
        let q = QuadraticProblem::from_triplets(n, &triplets, b)?;
        boxed(Problem::Quadratic(q), out);
        Ok(())
    })
}

/// # Safety
/// `p` must come from this library and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn minsum_problem_free(p: *mut MinsumProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn minsum_problem_dimension(p: *const MinsumProblem) -> usize {
    p.as_ref().map_or(0, |p| p.inner.n())
}

/// 1 if the problem runs on parametric (quadratic) messages, 0 otherwise.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn minsum_problem_is_quadratic(p: *const MinsumProblem) -> i32 {
    p.as_ref().map_or(0, |p| p.inner.quadratic().is_some() as i32)
}

/// Certifies or refutes scaled diagonal dominance. On success `*kind` is
/// `Refuted` when no `λ < 1` exists, and `*lambda` / `w` hold either the
/// certificate or the refuting Perron pair (`w` is NaN when the result is
/// `Indeterminate`). `box_lo`/`box_hi` bound the
/// sampling box for objectives without closed-form curvature bounds.
///
/// # Safety
/// `p` must be a live handle; `kind` and `lambda` must be valid; `w` is
/// null or holds `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn minsum_certify(
    p: *const MinsumProblem,
    box_lo: f64,
    box_hi: f64,
    samples: usize,
    kind: *mut MinsumCertificateKind,
    lambda: *mut f64,
    w: *mut f64,
) -> MinsumStatus {
    guard(|| {
        let prob = problem(p)?;
        if kind.is_null() || lambda.is_null() {
            return Err(null("kind/lambda"));
        }
        if !(box_lo < box_hi) {
            return Err(Fail(
                MinsumStatus::InvalidArgument,
                format!("empty box [{box_lo}, {box_hi}]"),
            ));
        }
        let n = prob.n();
        let boxes = vec![(box_lo, box_hi); n];
        let (k, l, weights) = match certify_objective(&prob.objective(), &boxes, samples)? {
            Certification::Certified(c) => {
                let k = match c.kind {
                    CertificateKind::ExactQuadratic => MinsumCertificateKind::ExactQuadratic,
                    CertificateKind::ClosedForm => MinsumCertificateKind::ClosedForm,
                    CertificateKind::Sampled => MinsumCertificateKind::Sampled,
                };
                (k, c.lambda, c.w)
            }
            Certification::Refuted(r) => (MinsumCertificateKind::Refuted, r.lambda_star, r.w),
            Certification::Indeterminate { upper, .. } => {
                (MinsumCertificateKind::Indeterminate, upper, vec![f64::NAN; n])
            }
        };
        *kind = k;
        *lambda = l;
        if !w.is_null() {
            slice_mut(w, n, "w")?.copy_from_slice(&weights);
        }
        Ok(())
    })
}

/// Runs min-sum from `x0` (null for all zeros) for at most `t_max`
/// iterations, stopping once successive estimates differ by at most `tol`
/// in the max norm. `grid_points` (0 for the default) applies to
/// non-quadratic problems. The last estimate goes to `x_out`.
///
/// # Safety
/// `p` must be a live handle; `x0` is null or holds `n` doubles; `x_out`
/// holds `n` doubles; `iterations` and `converged` are null or valid.
#[no_mangle]
pub unsafe extern "C" fn minsum_solve(
    p: *const MinsumProblem,
    x0: *const f64,
    t_max: usize,
    tol: f64,
    grid_points: usize,
    x_out: *mut f64,
    iterations: *mut usize,
    converged: *mut i32,
) -> MinsumStatus {
    guard(|| {
        let prob = problem(p)?;
        let n = prob.n();
        let x0 = x0_or_zero(x0, n)?;
        let x_out = slice_mut(x_out, n, "x_out")?;
        let trace = match prob.quadratic() {
            Some(q) => run_quadratic(&q, &QuadraticInit::Estimates(x0), RunOptions { t_max, tol })?.trace,
            None => {
                let opts = GeneralRunOptions {
                    t_max,
                    tol,
                    grid: grid(grid_points),
                };
                run_general(&prob.objective(), &GeneralInit::Estimates(x0), opts)?.trace
            }
        };
        x_out.copy_from_slice(trace.final_x());
        if !iterations.is_null() {
            *iterations = trace.rows.len();
        }
        if !converged.is_null() {
            *converged = trace.converged as i32;
        }
        Ok(())
    })
}

/// Reference minimiser: a sparse direct solve for quadratics, damped Newton
/// from zero otherwise.
///
/// # Safety
/// `p` must be a live handle and `x_out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn minsum_exact(p: *const MinsumProblem, x_out: *mut f64) -> MinsumStatus {
    guard(|| {
        let prob = problem(p)?;
        let n = prob.n();
        let x_out = slice_mut(x_out, n, "x_out")?;
        let x = match prob.quadratic() {
            Some(q) => solve_quadratic_direct(&q)?,
            None => solve_general_newton(&prob.objective(), &vec![0.0; n], NewtonOptions::default())?.x,
        };
        x_out.copy_from_slice(&x);
        Ok(())
    })
}

/// Compares the min-sum estimate at node `root` after `t` iterations with
/// the minimiser of the depth `t − 1` computation tree rooted there;
/// `*diff` receives the absolute difference.
///
/// # Safety
/// `p` must be a live handle; `x0` is null or holds `n` doubles; `diff`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn minsum_key_property(
    p: *const MinsumProblem,
    x0: *const f64,
    root: usize,
    t: usize,
    grid_points: usize,
    diff: *mut f64,
) -> MinsumStatus {
    guard(|| {
        let prob = problem(p)?;
        if diff.is_null() {
            return Err(null("diff"));
        }
        let n = prob.n();
        if root >= n {
            return Err(Fail(
                MinsumStatus::InvalidArgument,
                format!("root {root} out of range for {n} nodes"),
            ));
        }
        let x0 = x0_or_zero(x0, n)?;
        let rows = match prob.quadratic() {
            Some(q) => key_property_quadratic(&q, &QuadraticInit::Estimates(x0), &[root], t)?,
            None => key_property_general(
                &prob.objective(),
                &GeneralInit::Estimates(x0),
                &[root],
                t,
                grid(grid_points),
            )?,
        };
        *diff = rows[0].diff;
        Ok(())
    })
}
