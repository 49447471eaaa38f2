//! Covariance matrix adaptation evolution strategy (CMA-ES).
//!
//! Fitness is maximized. Strategy constants and update rules follow the
//! standard (μ/μ_w, λ) formulation with rank-one and rank-μ covariance
//! updates, cumulative step-size adaptation and the `h_σ` stall correction.
//!
//! ```
//! use mcbench::cmaes::{CmaesConfig, CmaesState};
//!
//! let mut es = CmaesState::<f64>::new(&[1.0, 1.0, 1.0], CmaesConfig::default(), 7).unwrap();
//! for _ in 0..200 {
//!     let mut pop = es.ask().unwrap();
//!     for c in &mut pop {
//!         c.fitness = -c.params.iter().map(|x| x * x).sum::<f64>();
//!     }
//!     es.tell(&pop).unwrap();
//! }
//! assert!(es.best().unwrap().fitness > -1e-12);
//! ```

mod actor;
pub mod eigen;
pub mod test_functions;

pub use actor::{episode_fitness, optimize_actor, ActorSearch, FitnessMode};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use eigen::symmetric_eigen;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmaesConfig<T> {
    /// Initial step size σ₀.
    pub sigma0: T,
    /// Population size λ; `None` selects `4 + ⌊3 ln n⌋`.
    pub population: Option<usize>,
}

impl<T: Scalar> Default for CmaesConfig<T> {
    fn default() -> Self {
        CmaesConfig {
            sigma0: T::lit(0.5),
            population: None,
        }
    }
}

pub fn default_population(n: usize) -> usize {
    4 + (3.0 * (n as f64).ln()).floor() as usize
}

/// One sampled parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub params: Vec<T>,
    /// Higher is better. Set by the caller before [`CmaesState::tell`].
    pub fitness: T,
    /// Standard-normal draw that generated `params`.
    pub z: Vec<T>,
    /// Position within the generation it was sampled in.
    pub id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams<T> {
    pub lambda: usize,
    pub mu: usize,
    pub mu_eff: T,
    pub c_sigma: T,
    pub d_sigma: T,
    pub c_c: T,
    pub c_1: T,
    pub c_mu: T,
    /// `E‖N(0, I)‖`.
    pub chi_n: T,
    /// Generations between eigendecompositions.
    pub eigen_gap: u64,
}

impl<T: Scalar> StrategyParams<T> {
    fn new(n: usize, lambda: usize, mu_eff: T) -> Self {
        let nf = T::lit(n as f64);
        let one = T::one();
        let two = T::lit(2.0);
        let c_sigma = (mu_eff + two) / (nf + mu_eff + T::lit(5.0));
        let d_sigma = one + two * T::zero().max(((mu_eff - one) / (nf + one)).sqrt() - one) + c_sigma;
        let c_c = (T::lit(4.0) + mu_eff / nf) / (nf + T::lit(4.0) + two * mu_eff / nf);
        let c_1 = two / ((nf + T::lit(1.3)).powi(2) + mu_eff);
        let c_mu = (one - c_1).min(two * (mu_eff - two + one / mu_eff) / ((nf + two).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (one - one / (T::lit(4.0) * nf) + one / (T::lit(21.0) * nf * nf));
        let gap = 1.0 / (10.0 * n as f64 * (c_1 + c_mu).as_f64());
        StrategyParams {
            lambda,
            mu: lambda / 2,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            eigen_gap: (gap.floor() as u64).max(1),
        }
    }
}

/// Search distribution and adaptation state.
#[derive(Debug, Clone)]
pub struct CmaesState<T> {
    n: usize,
    mean: Vec<T>,
    /// Row-major `n×n`.
    cov: Vec<T>,
    sigma: T,
    p_c: Vec<T>,
    p_sigma: Vec<T>,
    weights: Vec<T>,
    strategy: StrategyParams<T>,
    generation: u64,
    evaluations: u64,
    /// Eigenvectors of `cov` as columns, row-major.
    basis: Vec<T>,
    /// Square roots of the eigenvalues of `cov`.
    scales: Vec<T>,
    eigen_generation: u64,
    best: Option<Candidate<T>>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> CmaesState<T> {
    pub fn new(initial_mean: &[T], config: CmaesConfig<T>, seed: u64) -> Result<Self> {
        let n = initial_mean.len();
        if n == 0 {
            return Err(Error::Config("CMA-ES dimension must be at least 1".into()));
        }
        if !(config.sigma0 > T::zero()) || !config.sigma0.is_finite() {
            return Err(Error::Config(format!("cmaes.sigma0 must be positive, got {}", config.sigma0)));
        }
        if initial_mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("initial CMA-ES mean"));
        }
        let lambda = config.population.unwrap_or_else(|| default_population(n));
        if lambda < 2 {
            return Err(Error::Config(format!("cmaes population must be at least 2, got {lambda}")));
        }
        let mu = lambda / 2;
        let raw: Vec<T> = (1..=mu)
            .map(|i| (T::lit(mu as f64 + 0.5)).ln() - T::lit(i as f64).ln())
            .collect();
        let total: T = raw.iter().copied().sum();
        let weights: Vec<T> = raw.iter().map(|&w| w / total).collect();
        let mu_eff = T::one() / weights.iter().map(|&w| w * w).sum::<T>();
        let strategy = StrategyParams::new(n, lambda, mu_eff);

        let mut identity = vec![T::zero(); n * n];
        for i in 0..n {
            identity[i * n + i] = T::one();
        }
        Ok(CmaesState {
            n,
            mean: initial_mean.to_vec(),
            cov: identity.clone(),
            sigma: config.sigma0,
            p_c: vec![T::zero(); n],
            p_sigma: vec![T::zero(); n],
            weights,
            strategy,
            generation: 0,
            evaluations: 0,
            basis: identity,
            scales: vec![T::one(); n],
            eigen_generation: 0,
            best: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn covariance(&self) -> &[T] {
        &self.cov
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn path_c(&self) -> &[T] {
        &self.p_c
    }

    pub fn path_sigma(&self) -> &[T] {
        &self.p_sigma
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn strategy(&self) -> &StrategyParams<T> {
        &self.strategy
    }

    pub fn population_size(&self) -> usize {
        self.strategy.lambda
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Best candidate passed to [`CmaesState::tell`] so far.
    pub fn best(&self) -> Option<&Candidate<T>> {
        self.best.as_ref()
    }

    /// Forces the step size (mainly for tests and restarts).
    pub fn set_sigma(&mut self, sigma: T) -> Result<()> {
        if !(sigma > T::zero()) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        self.sigma = sigma;
        Ok(())
    }

    fn refresh_eigen(&mut self) -> Result<()> {
        let n = self.n;
        let e = symmetric_eigen(&self.cov, n)?;
        let largest = e.values.iter().copied().fold(T::zero(), T::max);
        let floor = largest * T::epsilon();
        let mut scales = Vec::with_capacity(n);
        for &v in &e.values {
            if !(v > T::zero()) {
                return Err(Error::Numerical(format!(
                    "covariance lost positive definiteness (eigenvalue {v})"
                )));
            }
            scales.push(v.max(floor).sqrt());
        }
        self.basis = e.vectors;
        self.scales = scales;
        self.eigen_generation = self.generation;
        Ok(())
    }

    /// Samples λ candidates `x = m + σ·B·D·z`.
    pub fn ask(&mut self) -> Result<Vec<Candidate<T>>> {
        if self.generation > 0 && self.generation - self.eigen_generation >= self.strategy.eigen_gap {
            self.refresh_eigen()?;
        }
        let n = self.n;
        let mut out = Vec::with_capacity(self.strategy.lambda);
        let mut dz = vec![T::zero(); n];
        for id in 0..self.strategy.lambda {
            let z: Vec<T> = (0..n)
                .map(|_| T::lit(StandardNormal.sample(&mut self.rng)))
                .collect();
            for (d, (&zi, &s)) in dz.iter_mut().zip(z.iter().zip(&self.scales)) {
                *d = zi * s;
            }
            let params = (0..n)
                .map(|i| {
                    let row = &self.basis[i * n..(i + 1) * n];
                    let y: T = row.iter().zip(&dz).map(|(&b, &d)| b * d).sum();
                    self.mean[i] + self.sigma * y
                })
                .collect();
            out.push(Candidate {
                params,
                fitness: T::neg_infinity(),
                z,
                id,
            });
        }
        Ok(out)
    }

    /// `C^{-1/2}·y` through the cached eigendecomposition.
    fn whiten(&self, y: &[T]) -> Vec<T> {
        let n = self.n;
        let mut t = vec![T::zero(); n];
        for (k, tk) in t.iter_mut().enumerate() {
            let mut acc = T::zero();
            for i in 0..n {
                acc += self.basis[i * n + k] * y[i];
            }
            *tk = acc / self.scales[k];
        }
        (0..n)
            .map(|i| {
                let row = &self.basis[i * n..(i + 1) * n];
                row.iter().zip(&t).map(|(&b, &x)| b * x).sum()
            })
            .collect()
    }

    /// Updates the distribution from one evaluated generation.
    pub fn tell(&mut self, candidates: &[Candidate<T>]) -> Result<()> {
        let st = self.strategy;
        if candidates.len() != st.lambda {
            return Err(Error::Dimension {
                context: "CMA-ES tell",
                expected: st.lambda,
                actual: candidates.len(),
            });
        }
        for c in candidates {
            if c.params.len() != self.n {
                return Err(Error::Dimension {
                    context: "CMA-ES candidate",
                    expected: self.n,
                    actual: c.params.len(),
                });
            }
            if !c.fitness.is_finite() {
                return Err(Error::NonFinite("candidate fitness"));
            }
            if c.params.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("candidate parameters"));
            }
        }

        let mut order: Vec<&Candidate<T>> = candidates.iter().collect();
        order.sort_by(|a, b| {
            b.fitness
                .partial_cmp(&a.fitness)
                .expect("finite fitness")
                .then(a.id.cmp(&b.id))
        });
        if self.best.as_ref().is_none_or(|b| order[0].fitness > b.fitness) {
            self.best = Some(order[0].clone());
        }

        let n = self.n;
        let one = T::one();
        let two = T::lit(2.0);
        let old_mean = self.mean.clone();
        let ys: Vec<Vec<T>> = order[..st.mu]
            .iter()
            .map(|c| {
                c.params
                    .iter()
                    .zip(&old_mean)
                    .map(|(&x, &m)| (x - m) / self.sigma)
                    .collect()
            })
            .collect();
        let mut y_w = vec![T::zero(); n];
        for (y, &w) in ys.iter().zip(&self.weights) {
            for (acc, &yi) in y_w.iter_mut().zip(y) {
                *acc += w * yi;
            }
        }
        for i in 0..n {
            self.mean[i] = old_mean[i] + self.sigma * y_w[i];
        }

        let cs = st.c_sigma;
        let ps_coef = (cs * (two - cs) * st.mu_eff).sqrt();
        let white = self.whiten(&y_w);
        for (p, &w) in self.p_sigma.iter_mut().zip(&white) {
            *p = (one - cs) * *p + ps_coef * w;
        }
        let ps_norm = self.p_sigma.iter().map(|&p| p * p).sum::<T>().sqrt();

        let g = self.generation + 1;
        let decay = one - (one - cs).powi((2 * g).min(i32::MAX as u64) as i32);
        let h_sigma = ps_norm / decay.sqrt() < (T::lit(1.4) + two / T::lit(n as f64 + 1.0)) * st.chi_n;

        let cc = st.c_c;
        let pc_coef = (cc * (two - cc) * st.mu_eff).sqrt();
        for (p, &y) in self.p_c.iter_mut().zip(&y_w) {
            *p = (one - cc) * *p + if h_sigma { pc_coef * y } else { T::zero() };
        }

        let delta_h = if h_sigma { T::zero() } else { (two - cc) * cc };
        let weight_sum: T = self.weights.iter().copied().sum();
        let keep = one + st.c_1 * delta_h - st.c_1 - st.c_mu * weight_sum;
        for i in 0..n {
            for j in i..n {
                let mut rank_mu = T::zero();
                for (y, &w) in ys.iter().zip(&self.weights) {
                    rank_mu += w * y[i] * y[j];
                }
                let v = keep * self.cov[i * n + j]
                    + st.c_1 * self.p_c[i] * self.p_c[j]
                    + st.c_mu * rank_mu;
                self.cov[i * n + j] = v;
                self.cov[j * n + i] = v;
            }
        }

        self.sigma *= ((cs / st.d_sigma) * (ps_norm / st.chi_n - one)).exp();
        if !self.sigma.is_finite() || !(self.sigma > T::zero()) {
            return Err(Error::Numerical(format!("step size became {}", self.sigma)));
        }
        self.generation = g;
        self.evaluations += st.lambda as u64;
        Ok(())
    }

    /// Smallest eigenvalue and symmetry defect `max |C − Cᵀ|` of the
    /// covariance, for invariant checks.
    pub fn covariance_health(&self) -> Result<(T, T)> {
        let n = self.n;
        let mut asym = T::zero();
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((self.cov[i * n + j] - self.cov[j * n + i]).abs());
            }
        }
        let e = symmetric_eigen(&self.cov, n)?;
        let min = e.values.iter().copied().fold(T::infinity(), T::min);
        Ok((min, asym))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_population_sizes() {
        assert_eq!(default_population(51), 15);
        assert_eq!(default_population(281), 20);
        assert_eq!(default_population(10), 10);
        let es = CmaesState::<f64>::new(&[0.0; 51], CmaesConfig::default(), 0).unwrap();
        assert_eq!(es.population_size(), 15);
        assert_eq!(es.strategy().mu, 7);
    }

    #[test]
    fn initial_state() {
        let es = CmaesState::<f64>::new(&[0.5; 4], CmaesConfig::default(), 0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(es.covariance()[i * 4 + j], if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(es.path_c().iter().chain(es.path_sigma()).all(|&p| p == 0.0));
        assert_eq!(es.sigma(), 0.5);
        let w = es.weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(w.windows(2).all(|p| p[0] > p[1]) && w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn strategy_constants_n10() {
        // λ=10, μ=5, w_i ∝ ln(5.5) − ln i
        let es = CmaesState::<f64>::new(&[0.0; 10], CmaesConfig::default(), 0).unwrap();
        let raw: Vec<f64> = (1..=5).map(|i| 5.5f64.ln() - (i as f64).ln()).collect();
        let s: f64 = raw.iter().sum();
        let mu_eff = s * s / raw.iter().map(|w| w * w).sum::<f64>();
        let st = es.strategy();
        assert!((st.mu_eff - mu_eff).abs() < 1e-12);
        assert!((st.c_sigma - (mu_eff + 2.0) / (10.0 + mu_eff + 5.0)).abs() < 1e-15);
        assert!((st.c_1 - 2.0 / (11.3f64.powi(2) + mu_eff)).abs() < 1e-15);
        let chi = 10f64.sqrt() * (1.0 - 1.0 / 40.0 + 1.0 / 2100.0);
        assert!((st.chi_n - chi).abs() < 1e-15);
    }

    #[test]
    fn construction_errors() {
        assert!(CmaesState::<f64>::new(&[], CmaesConfig::default(), 0).is_err());
        let c = CmaesConfig { sigma0: 0.0, population: None };
        assert!(CmaesState::<f64>::new(&[0.0], c, 0).is_err());
        let c = CmaesConfig { sigma0: -1.0, population: None };
        assert!(CmaesState::<f64>::new(&[0.0], c, 0).is_err());
        let c = CmaesConfig { sigma0: 1.0, population: Some(1) };
        assert!(CmaesState::<f64>::new(&[0.0], c, 0).is_err());
    }

    #[test]
    fn tiny_sigma_collapses_onto_mean() {
        let mut es = CmaesState::<f64>::new(&[0.3, -2.0, 7.0], CmaesConfig::default(), 1).unwrap();
        es.set_sigma(1e-300).unwrap();
        for c in es.ask().unwrap() {
            for (x, m) in c.params.iter().zip(es.mean()) {
                assert!((x - m).abs() <= 1e-290);
            }
        }
    }

    #[test]
    fn cloned_states_ask_identically() {
        let es = CmaesState::<f64>::new(&[0.0; 6], CmaesConfig::default(), 3).unwrap();
        let (mut a, mut b) = (es.clone(), es);
        assert_eq!(a.ask().unwrap(), b.ask().unwrap());
    }

    #[test]
    fn identical_candidates_keep_mean() {
        let mut es = CmaesState::<f64>::new(&[1.0, 2.0], CmaesConfig::default(), 3).unwrap();
        let mut pop = es.ask().unwrap();
        for c in &mut pop {
            c.params = vec![1.0, 2.0];
            c.fitness = 5.0;
        }
        es.tell(&pop).unwrap();
        assert_eq!(es.mean(), &[1.0, 2.0]);
    }

    #[test]
    fn tell_rejects_bad_generations() {
        let mut es = CmaesState::<f64>::new(&[0.0; 3], CmaesConfig::default(), 3).unwrap();
        let mut pop = es.ask().unwrap();
        assert!(es.tell(&pop[1..]).is_err());
        for c in &mut pop {
            c.fitness = 0.0;
        }
        pop[2].fitness = f64::NAN;
        assert!(matches!(es.tell(&pop), Err(Error::NonFinite(_))));
        pop[2].fitness = 1.0;
        pop[0].params.pop();
        assert!(es.tell(&pop).is_err());
        assert_eq!(es.generation(), 0);
    }

    #[test]
    fn sampled_deviations_have_identity_covariance() {
        let n = 3;
        let mut es = CmaesState::<f64>::new(&[0.0; 3], CmaesConfig { sigma0: 1.0, population: Some(1000) }, 5).unwrap();
        let mut acc = vec![0.0; n * n];
        let mut count = 0.0;
        for _ in 0..100 {
            for c in es.ask().unwrap() {
                for i in 0..n {
                    for j in 0..n {
                        acc[i * n + j] += c.params[i] * c.params[j];
                    }
                }
                count += 1.0;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                // 10⁵ samples: standard error ≈ 0.0045 on the diagonal
                assert!((acc[i * n + j] / count - want).abs() < 0.025);
            }
        }
    }

    #[test]
    fn f32_state_optimizes() {
        let mut es = CmaesState::<f32>::new(&[1.0; 4], CmaesConfig::default(), 2).unwrap();
        for _ in 0..150 {
            let mut pop = es.ask().unwrap();
            for c in &mut pop {
                c.fitness = -c.params.iter().map(|x| x * x).sum::<f32>();
            }
            es.tell(&pop).unwrap();
        }
        assert!(es.best().unwrap().fitness > -1e-6);
    }
}
