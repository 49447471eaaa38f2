//! Standard benchmark objectives (minimization form) and a budgeted driver.

use super::{CmaesConfig, CmaesState};
use crate::error::Result;
use crate::scalar::Scalar;

pub fn sphere<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum()
}

pub fn rosenbrock<T: Scalar>(x: &[T]) -> T {
    let hundred = T::lit(100.0);
    x.windows(2)
        .map(|w| hundred * (w[1] - w[0] * w[0]).powi(2) + (T::one() - w[0]).powi(2))
        .sum()
}

/// Outcome of [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeReport<T> {
    pub best_value: T,
    pub best_point: Vec<T>,
    /// Evaluations spent when `best_value` first dropped below the target,
    /// if it did.
    pub evaluations_to_target: Option<u64>,
    pub evaluations: u64,
    /// Largest `max |C − Cᵀ|` seen after any generation.
    pub worst_asymmetry: T,
    /// Smallest covariance eigenvalue seen after any generation.
    pub min_eigenvalue: T,
    pub min_sigma: T,
}

impl<T: Scalar> MinimizeReport<T> {
    pub fn invariants_held(&self) -> bool {
        self.min_eigenvalue > T::zero() && self.min_sigma > T::zero()
    }
}

/// Minimizes `f` by maximizing `−f`, stopping once `target` is reached or
/// `max_evaluations` are spent. Covariance health is checked after every
/// generation when `check_invariants` is set.
pub fn minimize<T, F>(
    f: F,
    start: &[T],
    config: CmaesConfig<T>,
    seed: u64,
    max_evaluations: u64,
    target: T,
    check_invariants: bool,
) -> Result<MinimizeReport<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    let mut es = CmaesState::new(start, config, seed)?;
    let mut report = MinimizeReport {
        best_value: T::infinity(),
        best_point: start.to_vec(),
        evaluations_to_target: None,
        evaluations: 0,
        worst_asymmetry: T::zero(),
        min_eigenvalue: T::infinity(),
        min_sigma: es.sigma(),
    };
    while report.evaluations + es.population_size() as u64 <= max_evaluations {
        let mut pop = es.ask()?;
        for c in &mut pop {
            let v = f(&c.params);
            report.evaluations += 1;
            if v < report.best_value {
                report.best_value = v;
                report.best_point = c.params.clone();
            }
            if report.evaluations_to_target.is_none() && report.best_value < target {
                report.evaluations_to_target = Some(report.evaluations);
            }
            c.fitness = -v;
        }
        es.tell(&pop)?;
        report.min_sigma = report.min_sigma.min(es.sigma());
        if check_invariants {
            let (min_eig, asym) = es.covariance_health()?;
            report.min_eigenvalue = report.min_eigenvalue.min(min_eig);
            report.worst_asymmetry = report.worst_asymmetry.max(asym);
        }
        if report.evaluations_to_target.is_some() {
            break;
        }
    }
    Ok(report)
}
