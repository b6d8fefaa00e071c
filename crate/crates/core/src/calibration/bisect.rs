use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Search controls for [`bisect_root`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectOptions {
    /// Factor applied to the upper bracket end while searching for a sign change.
    pub bracket_growth: f64,
    pub max_doublings: usize,
    /// Stop once the bracket is at most this wide.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BisectOptions {
    fn default() -> Self {
        BisectOptions {
            bracket_growth: 2.0,
            max_doublings: 64,
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

impl BisectOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.bracket_growth > 1.0) {
            return Err(Error::InvalidArgument("bracket growth must exceed 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionDiagnostics {
    pub iterations: usize,
    pub doublings: usize,
    /// Width of the final bracket; 0 when the root is 0 without a search.
    pub bracket_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root<T> {
    pub root: T,
    /// `q(root)`, always `<= 0`.
    pub value: f64,
    pub diagnostics: BisectionDiagnostics,
}

/// Smallest-argument root of a non-increasing step function on `[0, inf)`.
///
/// Returns 0 when `q(0) <= 0`. Otherwise grows an upper bound from 1 until
/// `q(hi) <= 0`, then bisects `[lo, hi]` (with `q(lo) > 0 >= q(hi)`) until the
/// bracket is within `tol` and returns `hi`, so the result always satisfies
/// `q(root) <= 0` while `q` just below the root is still positive.
pub fn bisect_root<T, Q>(q: Q, opts: &BisectOptions) -> Result<Root<T>>
where
    T: Scalar,
    Q: Fn(T) -> f64,
{
    opts.validate()?;
    let q0 = q(T::zero());
    if q0 <= 0.0 {
        return Ok(Root {
            root: T::zero(),
            value: q0,
            diagnostics: BisectionDiagnostics {
                iterations: 0,
                doublings: 0,
                bracket_width: 0.0,
            },
        });
    }

    let growth = T::lit(opts.bracket_growth);
    let (mut lo, mut q_lo) = (T::zero(), q0);
    let mut hi = T::one();
    let mut q_hi = q(hi);
    let mut doublings = 0;
    while q_hi > 0.0 {
        if q_hi > q_lo {
            return Err(Error::NonMonotone { at: hi.as_f64() });
        }
        if doublings >= opts.max_doublings || !(hi * growth).is_finite() {
            return Err(Error::BracketNotFound {
                doublings,
                upper: hi.as_f64(),
            });
        }
        lo = hi;
        q_lo = q_hi;
        hi *= growth;
        q_hi = q(hi);
        doublings += 1;
    }

    let tol = T::lit(opts.tol);
    let two = T::lit(2.0);
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            // floating-point resolution reached
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::BisectionNotConverged { iterations });
        }
        iterations += 1;
        let q_mid = q(mid);
        if q_mid > q_lo || q_mid < q_hi {
            return Err(Error::NonMonotone { at: mid.as_f64() });
        }
        if q_mid <= 0.0 {
            hi = mid;
            q_hi = q_mid;
        } else {
            lo = mid;
            q_lo = q_mid;
        }
    }
    Ok(Root {
        root: hi,
        value: q_hi,
        diagnostics: BisectionDiagnostics {
            iterations,
            doublings,
            bracket_width: (hi - lo).as_f64(),
        },
    })
}
