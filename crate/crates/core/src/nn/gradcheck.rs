//! Central-difference check of [`Mlp::backward`].

use super::{Activation, Mlp};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|a − n| / max(|a|, |n|)` among compared coordinates; pairs
    /// with both magnitudes below `abs_guard` count as agreeing.
    pub max_relative_error: f64,
    pub compared: usize,
    /// Coordinates whose perturbation flipped a relu.
    pub skipped: usize,
}

fn relu_signs<T: Scalar>(net: &Mlp<T>, input: &[T], aux: Option<&[T]>) -> Result<Vec<bool>> {
    let (_, trace) = net.forward(input, aux)?;
    Ok(net
        .activations()
        .iter()
        .zip(trace.pre_activations())
        .filter(|(a, _)| **a == Activation::Relu)
        .flat_map(|(_, z)| z.iter().map(|v| *v > T::zero()))
        .collect())
}

/// Compares the gradient of the first output with respect to every
/// parameter, and to the auxiliary input if there is one, against central
/// differences of step `eps`.
pub fn check_gradients<T: Scalar>(
    net: &Mlp<T>,
    input: &[T],
    aux: Option<&[T]>,
    eps: T,
    abs_guard: f64,
) -> Result<GradCheck> {
    let mut seed = vec![T::zero(); net.output_dim()];
    seed[0] = T::one();
    let (_, trace) = net.forward(input, aux)?;
    let grads = net.backward(&trace, &seed)?;
    let base = relu_signs(net, input, aux)?;
    let two_eps = (eps + eps).as_f64();
    let mut report = GradCheck { max_relative_error: 0.0, compared: 0, skipped: 0 };
    let record = |analytic: f64, numeric: f64, report: &mut GradCheck| {
        let scale = analytic.abs().max(numeric.abs());
        if scale >= abs_guard {
            let rel = (analytic - numeric).abs() / scale;
            report.max_relative_error = report.max_relative_error.max(rel);
        }
        report.compared += 1;
    };

    let mut probe = net.clone();
    for i in 0..net.param_count() {
        let orig = net.params()[i];
        probe.params_mut()[i] = orig + eps;
        let plus = probe.forward(input, aux)?.0[0];
        let same_plus = relu_signs(&probe, input, aux)? == base;
        probe.params_mut()[i] = orig - eps;
        let minus = probe.forward(input, aux)?.0[0];
        let same_minus = relu_signs(&probe, input, aux)? == base;
        probe.params_mut()[i] = orig;
        if !(same_plus && same_minus) {
            report.skipped += 1;
            continue;
        }
        record(grads.params()[i].as_f64(), (plus - minus).as_f64() / two_eps, &mut report);
    }

    if let (Some(a), Some(ga)) = (aux, grads.aux()) {
        let mut shifted = a.to_vec();
        for j in 0..a.len() {
            shifted[j] = a[j] + eps;
            let plus = net.forward(input, Some(&shifted))?.0[0];
            let same_plus = relu_signs(net, input, Some(&shifted))? == base;
            shifted[j] = a[j] - eps;
            let minus = net.forward(input, Some(&shifted))?.0[0];
            let same_minus = relu_signs(net, input, Some(&shifted))? == base;
            shifted[j] = a[j];
            if !(same_plus && same_minus) {
                report.skipped += 1;
                continue;
            }
            record(ga[j].as_f64(), (plus - minus).as_f64() / two_eps, &mut report);
        }
    }
    Ok(report)
}
