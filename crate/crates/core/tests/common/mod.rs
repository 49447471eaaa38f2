//! Central-difference gradient oracle shared by the test targets.
#![allow(dead_code)]

use mcbench::nn::Activation::Relu;
use mcbench::Mlp;

pub const EPS: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-5;
pub const ABS_GUARD: f64 = 1e-8;
pub const KINK: f64 = 1e-6;

/// True when some relu pre-activation sits within `KINK` of zero.
pub fn near_kink(net: &Mlp, input: &[f64], aux: Option<&[f64]>) -> bool {
    let (_, trace) = net.forward(input, aux).unwrap();
    net.activations()
        .iter()
        .zip(trace.pre_activations())
        .any(|(a, z)| *a == Relu && z.iter().any(|v| v.abs() < KINK))
}

pub fn relu_pattern(net: &Mlp, input: &[f64], aux: Option<&[f64]>) -> Vec<bool> {
    let (_, trace) = net.forward(input, aux).unwrap();
    net.activations()
        .iter()
        .zip(trace.pre_activations())
        .filter(|(a, _)| **a == Relu)
        .flat_map(|(_, z)| z.iter().map(|v| *v > 0.0))
        .collect()
}

/// `|a − n| / max(|a|, |n|)`, or `None` when both are below `ABS_GUARD`.
pub fn relative_error(analytic: f64, numeric: f64) -> Option<f64> {
    let scale = analytic.abs().max(numeric.abs());
    (scale >= ABS_GUARD).then(|| (analytic - numeric).abs() / scale)
}

pub fn agrees(analytic: f64, numeric: f64) -> bool {
    relative_error(analytic, numeric).is_none_or(|e| e < REL_TOL)
}

/// Checks every parameter gradient of `Σ c·output` by central differences.
/// Returns the number of coordinates compared.
pub fn check_params(net: &Mlp, input: &[f64], aux: Option<&[f64]>, coef: &[f64]) -> usize {
    let (_, trace) = net.forward(input, aux).unwrap();
    let grads = net.backward(&trace, coef).unwrap();
    let base_pattern = relu_pattern(net, input, aux);
    let objective = |n: &Mlp| -> f64 {
        let (out, _) = n.forward(input, aux).unwrap();
        out.iter().zip(coef).map(|(o, c)| o * c).sum()
    };
    let mut checked = 0;
    let mut probe = net.clone();
    for i in 0..net.param_count() {
        let orig = net.params()[i];
        probe.params_mut()[i] = orig + EPS;
        let plus = objective(&probe);
        let plus_pattern = relu_pattern(&probe, input, aux);
        probe.params_mut()[i] = orig - EPS;
        let minus = objective(&probe);
        let minus_pattern = relu_pattern(&probe, input, aux);
        probe.params_mut()[i] = orig;
        if plus_pattern != base_pattern || minus_pattern != base_pattern {
            continue;
        }
        let numeric = (plus - minus) / (2.0 * EPS);
        let analytic = grads.params()[i];
        assert!(agrees(analytic, numeric), "param {i}: analytic {analytic:e} numeric {numeric:e}");
        checked += 1;
    }
    checked
}


/// Central-difference derivative of the first output with respect to the
/// auxiliary input, next to the analytic one.
pub fn action_gradient_pair(net: &Mlp, input: &[f64], action: f64) -> (f64, f64) {
    let q = |a: f64| net.forward(input, Some(&[a])).unwrap().0[0];
    let numeric = (q(action + EPS) - q(action - EPS)) / (2.0 * EPS);
    let (_, trace) = net.forward(input, Some(&[action])).unwrap();
    let mut analytic = [0.0];
    net.aux_gradient(&trace, &[1.0], &mut analytic).unwrap();
    (analytic[0], numeric)
}
