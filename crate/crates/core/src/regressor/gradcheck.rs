use super::{ModelKind, Regressor, RegressorSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const STEP: f64 = 1e-5;
const MAX_SAMPLES: usize = 32;
// Floor on the relative-error denominator so exact zeros compare cleanly.
const DENOM_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub worst_parameter: usize,
    pub parameters: usize,
    pub all_finite: bool,
    pub passed: bool,
}

/// Full-batch training loss (MSE plus weight penalty) and its analytic gradient.
pub(crate) fn loss_and_gradient<T: Scalar>(model: &Regressor<T>, data: &Dataset<T>) -> (T, Vec<T>) {
    let net = model.spec.network(model.dim);
    let mut ws = net.workspace();
    let n = T::from_usize_lossy(data.len());
    let two = T::lit(2.0);
    let l2 = T::lit(model.spec.l2);
    let mut grad = vec![T::zero(); model.params.len()];
    let mut loss = T::zero();
    for s in data {
        let r = net.forward(&model.params, &s.x, &mut ws) - s.y;
        loss += r * r / n;
        net.backward(&model.params, &mut ws, two * r / n, &mut grad);
    }
    for (i, (g, &p)) in grad.iter_mut().zip(&model.params).enumerate() {
        if net.is_weight(i) {
            loss += l2 * p * p;
            *g += two * l2 * p;
        }
    }
    (loss, grad)
}

/// Compares the backpropagated gradient of a freshly initialized `mlp` with
/// central finite differences (step 1e-5) for every parameter.
pub fn gradient_check<T: Scalar>(
    spec: &RegressorSpec,
    data: &Dataset<T>,
    tolerance: f64,
) -> Result<GradientReport> {
    if spec.kind != ModelKind::Mlp {
        return Err(Error::UnsupportedKind("gradient check requires an mlp"));
    }
    if data.is_empty() || data.len() > MAX_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "gradient check needs 1..={MAX_SAMPLES} samples, got {}",
            data.len()
        )));
    }
    let model = Regressor::initialize(spec, data.dim())?;
    let (_, analytic) = loss_and_gradient(&model, data);

    let h = T::lit(STEP);
    let mut probe = model.clone();
    let mut report = GradientReport {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        worst_parameter: 0,
        parameters: analytic.len(),
        all_finite: analytic.iter().all(|g| g.is_finite()),
        passed: false,
    };
    #[allow(clippy::needless_range_loop)]
    for i in 0..analytic.len() {
        let orig = model.params[i];
        probe.params[i] = orig + h;
        let (up, _) = loss_and_gradient(&probe, data);
        probe.params[i] = orig - h;
        let (down, _) = loss_and_gradient(&probe, data);
        probe.params[i] = orig;
        let numeric = (up - down).as_f64() / (2.0 * STEP);
        let a = analytic[i].as_f64();
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(DENOM_FLOOR);
        if !rel.is_finite() {
            report.all_finite = false;
        }
        if rel > report.max_relative_error || !rel.is_finite() {
            report.max_relative_error = rel;
            report.worst_parameter = i;
        }
        report.max_absolute_error = report.max_absolute_error.max(abs);
    }
    report.passed = report.all_finite && report.max_relative_error <= tolerance;
    Ok(report)
}
