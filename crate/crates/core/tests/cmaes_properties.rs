use mcbench::cmaes::test_functions::{minimize, rosenbrock, sphere};
use mcbench::cmaes::{Candidate, CmaesConfig};
use mcbench::CmaesState;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn snapshot(es: &CmaesState) -> (Vec<f64>, Vec<f64>, f64, Vec<f64>, Vec<f64>) {
    (
        es.mean().to_vec(),
        es.covariance().to_vec(),
        es.sigma(),
        es.path_c().to_vec(),
        es.path_sigma().to_vec(),
    )
}

fn scored(es: &mut CmaesState, f: impl Fn(&[f64]) -> f64) -> Vec<Candidate<f64>> {
    let mut pop = es.ask().unwrap();
    for c in &mut pop {
        c.fitness = f(&c.params);
    }
    pop
}

#[test]
fn sphere_ten_seeds() {
    for seed in 0..10 {
        let r = minimize(sphere, &[1.0f64; 10], CmaesConfig::default(), seed, 5000, 1e-10, true).unwrap();
        assert!(r.best_value < 1e-10, "seed {seed}: {}", r.best_value);
        assert!(r.invariants_held());
    }
}

#[test]
fn rosenbrock_five_dims() {
    let mut solved = 0;
    for seed in 0..10 {
        let r = minimize(rosenbrock, &[0.0f64; 5], CmaesConfig::default(), seed, 30_000, 1e-6, true).unwrap();
        assert!(r.invariants_held());
        if r.best_value < 1e-6 {
            solved += 1;
        } else {
            eprintln!("rosenbrock straggler: seed {seed} best {:e}", r.best_value);
        }
    }
    assert!(solved >= 8, "{solved}/10 seeds solved");
}

#[test]
fn covariance_stays_spd_for_a_thousand_generations() {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let freq: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    let phase: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..6.0)).collect();
    let f = |x: &[f64]| -> f64 {
        x.iter()
            .zip(&freq)
            .zip(&phase)
            .map(|((xi, a), b)| (a * xi + b).sin() - 0.05 * xi * xi)
            .sum()
    };
    let mut es = CmaesState::new(&vec![0.0; n], CmaesConfig::default(), 4).unwrap();
    for g in 0..1000 {
        let pop = scored(&mut es, f);
        es.tell(&pop).unwrap();
        let (min_eig, asym) = es.covariance_health().unwrap();
        assert!(min_eig > 0.0, "generation {g}: eigenvalue {min_eig}");
        assert!(asym < 1e-12, "generation {g}: asymmetry {asym}");
        assert!(es.sigma() > 0.0);
    }
}

#[test]
fn weights_and_strategy_invariants() {
    for n in [2usize, 5, 51, 281] {
        let es = CmaesState::new(&vec![0.0; n], CmaesConfig::default(), 0).unwrap();
        let s = es.strategy();
        assert!(s.lambda >= 2 && s.mu >= 1 && s.mu <= s.lambda);
        let w = es.weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.windows(2).all(|p| p[0] > p[1]) && w.iter().all(|&x| x > 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn monotone_fitness_transform_gives_identical_update(seed in any::<u64>(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let mut a = CmaesState::new(&[0.3, -0.2, 0.5, 1.0], CmaesConfig::default(), seed).unwrap();
        let mut b = a.clone();
        let pa = scored(&mut a, |x| -sphere(x));
        let pb: Vec<_> = b.ask().unwrap().into_iter().zip(&pa).map(|(mut c, r)| {
            c.fitness = (scale * r.fitness + shift).exp();
            c
        }).collect();
        a.tell(&pa).unwrap();
        b.tell(&pb).unwrap();
        prop_assert_eq!(snapshot(&a), snapshot(&b));
    }

    #[test]
    fn candidate_order_does_not_matter(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let mut a = CmaesState::new(&[0.3, -0.2, 0.5, 1.0, 0.0], CmaesConfig::default(), seed).unwrap();
        let mut b = a.clone();
        let pa = scored(&mut a, |x| -rosenbrock(x));
        let mut pb = scored(&mut b, |x| -rosenbrock(x));
        pb.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        a.tell(&pa).unwrap();
        b.tell(&pb).unwrap();
        prop_assert_eq!(snapshot(&a), snapshot(&b));
    }
}
