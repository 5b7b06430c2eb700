use super::*;

fn sphere(v: &[f64]) -> Result<f64> {
    Ok(-v.iter().map(|x| x * x).sum::<f64>())
}

fn config(dims: usize) -> DeConfig {
    let mut c = DeConfig::new(vec![(-5.0, 5.0); dims]);
    c.seed = 7;
    c
}

#[test]
fn validation() {
    let mut c = config(3);
    c.population_size = 3;
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    let mut c = config(3);
    c.max_generations = 0;
    assert!(c.validate().is_err());
    let mut c = config(3);
    c.bounds[1] = (2.0, 1.0);
    assert!(c.validate().is_err());
    assert!(config(0).validate().is_err());
    assert!(config(3).validate().is_ok());
}

#[test]
fn mutation_uses_three_distinct_others() {
    // Members are unit vectors along distinct axes; with f = 1 the mutant
    // e_a + e_b - e_c reveals which members were drawn.
    let q = 6;
    let pop = Population {
        members: (0..q)
            .map(|i| (0..q).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
        fitness: vec![0.0; q],
        generation: 0,
    };
    let mut c = DeConfig::new(vec![(-2.0, 2.0); q]);
    c.scale_factor = 1.0;
    let mut rng = DeRng::seed_from_u64(3);
    for _ in 0..500 {
        for target in 0..q {
            let m = mutate(&pop, target, &c, &mut rng);
            assert_eq!(m[target], 0.0);
            assert_eq!(m.iter().filter(|&&v| v == 1.0).count(), 2);
            assert_eq!(m.iter().filter(|&&v| v == -1.0).count(), 1);
        }
    }
}

#[test]
fn crossover_extremes() {
    let target = vec![0.0; 8];
    let mutant = vec![1.0; 8];
    let mut c = config(8);
    let mut rng = DeRng::seed_from_u64(1);
    c.crossover_rate = 1.0;
    assert_eq!(crossover(&target, &mutant, &c, &mut rng), mutant);
    c.crossover_rate = 0.0;
    for _ in 0..100 {
        let t = crossover(&target, &mutant, &c, &mut rng);
        assert_eq!(t.iter().filter(|&&v| v == 1.0).count(), 1);
    }
}

#[test]
fn clamping() {
    let b = vec![(0.0, 1.0), (-1.0, 1.0)];
    assert_eq!(clamp_bounds(&[2.0, -3.0], &b), vec![1.0, -1.0]);
    assert_eq!(clamp_bounds(&[0.5, f64::NAN], &b), vec![0.5, -1.0]);
}

#[test]
fn step_never_worsens_a_member() {
    let c = config(4);
    let mut rng = DeRng::seed_from_u64(11);
    let mut pop = initialize(&c, &sphere, &mut rng).unwrap();
    for _ in 0..20 {
        let next = step(&pop, &sphere, &c, &mut rng).unwrap();
        for i in 0..pop.len() {
            assert!(next.fitness[i] >= pop.fitness[i]);
            assert_eq!(next.fitness[i], sphere(&next.members[i]).unwrap());
        }
        assert_eq!(next.generation, pop.generation + 1);
        pop = next;
    }
}

#[test]
fn ties_keep_the_parent() {
    let flat = |_: &[f64]| -> Result<f64> { Ok(1.0) };
    let c = config(3);
    let mut rng = DeRng::seed_from_u64(2);
    let pop = initialize(&c, &flat, &mut rng).unwrap();
    let next = step(&pop, &flat, &c, &mut rng).unwrap();
    assert_eq!(next.members, pop.members);
}

#[test]
fn failing_objective_aborts_without_change() {
    let c = config(2);
    let mut rng = DeRng::seed_from_u64(2);
    let pop = initialize(&c, &sphere, &mut rng).unwrap();
    let broken = |_: &[f64]| -> Result<f64> { Err(Error::Oracle("down".into())) };
    let before = pop.clone();
    assert!(matches!(step(&pop, &broken, &c, &mut rng), Err(Error::Oracle(_))));
    assert_eq!(pop, before);
}

#[test]
fn flat_objective_stops_on_stagnation() {
    let flat = |_: &[f64]| -> Result<f64> { Ok(0.0) };
    let c = config(3);
    let out = run(&c, &flat, None).unwrap();
    assert_eq!(out.stop_reason, StopReason::Stagnation);
    assert_eq!(out.stop_generation, 10);
    assert_eq!(out.trajectory.len(), 11);
}

#[test]
fn success_predicate_stops_early() {
    let c = config(2);
    let done = |_: &[f64], f: f64| f > -1.0;
    let out = run(&c, &sphere, Some(&done)).unwrap();
    assert_eq!(out.stop_reason, StopReason::Success);
    assert!(out.best_fitness > -1.0);
    assert!(out.stop_generation < 200);
}

#[test]
fn concurrency_limit_does_not_change_the_result() {
    struct Limited(Option<usize>);
    impl Objective for Limited {
        fn evaluate(&self, v: &[f64]) -> Result<f64> {
            sphere(v)
        }
        fn max_concurrency(&self) -> Option<usize> {
            self.0
        }
    }
    let mut c = config(3);
    c.max_generations = 30;
    let a = run(&c, &Limited(None), None).unwrap();
    let b = run(&c, &Limited(Some(1)), None).unwrap();
    let d = run(&c, &Limited(Some(4)), None).unwrap();
    assert_eq!(a.best_vector, b.best_vector);
    assert_eq!(a.best_vector, d.best_vector);
    assert_eq!(a.trajectory, d.trajectory);
}

#[test]
fn timeouts_are_retried_deterministically() {
    use std::sync::atomic::{AtomicUsize, Ordering};
    let calls = AtomicUsize::new(0);
    let flaky = |v: &[f64]| -> Result<f64> {
        // The 40th evaluation times out once.
        if calls.fetch_add(1, Ordering::SeqCst) == 40 {
            return Err(Error::Timeout {
                id: "x".into(),
                timeout_ms: 1,
            });
        }
        sphere(v)
    };
    struct Seq<'a>(&'a (dyn Fn(&[f64]) -> Result<f64> + Sync));
    impl Objective for Seq<'_> {
        fn evaluate(&self, v: &[f64]) -> Result<f64> {
            (self.0)(v)
        }
        fn max_concurrency(&self) -> Option<usize> {
            Some(1)
        }
    }
    let mut c = config(2);
    c.max_generations = 5;
    let a = run(&c, &Seq(&flaky), None).unwrap();
    let b = run(&c, &sphere, None).unwrap();
    assert_eq!(a.best_vector, b.best_vector);
}
