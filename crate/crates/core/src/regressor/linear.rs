use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Closed-form ridge regression. Minimizes `mean((w·x + b - y)^2) + l2 |w|^2`
/// and returns `[w..., b]`, matching the network parameter layout.
pub(super) fn ridge<T: Scalar>(ds: &Dataset<T>, l2: f64) -> Result<Vec<T>> {
    let d = ds.dim();
    let m = d + 1;
    let mut a = vec![T::zero(); m * m];
    let mut rhs = vec![T::zero(); m];
    let mut row = vec![T::one(); m];
    for s in ds {
        row[..d].copy_from_slice(&s.x);
        for i in 0..m {
            rhs[i] += row[i] * s.y;
            for j in 0..m {
                a[i * m + j] += row[i] * row[j];
            }
        }
    }
    let penalty = T::lit(l2 * ds.len() as f64);
    for i in 0..d {
        a[i * m + i] += penalty;
    }
    solve(&mut a, &mut rhs, m)?;
    Ok(rhs)
}

/// Gaussian elimination with partial pivoting; solution left in `b`.
fn solve<T: Scalar>(a: &mut [T], b: &mut [T], n: usize) -> Result<()> {
    let scale = (0..n)
        .map(|i| a[i * n + i].abs())
        .fold(T::zero(), T::max)
        .max(T::min_positive_value());
    let tiny = scale * T::epsilon() * T::from_usize_lossy(n) * T::lit(16.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty range");
        if !(a[pivot * n + col].abs() > tiny) {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for r in col + 1..n {
            let factor = a[r * n + col] / a[col * n + col];
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[r * n + k] -= factor * v;
            }
            let v = b[col];
            b[r] -= factor * v;
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * b[k];
        }
        b[col] = acc / a[col * n + col];
    }
    Ok(())
}
