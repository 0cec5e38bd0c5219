use combireg::constraints::{build_cardinality, build_matching};
use combireg::distributions::SeededStream;
use combireg::inference::{bayes_factor, outcome_law_at_mean, predict_outcome_law, PriorModel};
use combireg::mcmc::{run_chain, run_intercept_chain, SamplerConfig};
use combireg::polytope::DualPolytope;
use combireg::simulate::{simulate_intercept, simulate_regression};
use combireg::{solve_transform, BipartiteGraph};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn quick(iterations: usize, burnin: usize, seed: u64) -> SamplerConfig {
    SamplerConfig { iterations, burnin, seed, check_identity: false, ..SamplerConfig::default() }
}

fn two_sample_ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        worst = worst.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    worst
}

#[test]
fn intercept_posterior_recovers_the_outcome_law() {
    let cs = build_cardinality(2, 1).unwrap();
    let mu = [0.0, 0.0];
    let y = simulate_intercept(&cs, &mu, 2000, 3).unwrap();
    let chain = run_intercept_chain(y, cs.clone(), &quick(2000, 500, 3)).unwrap();
    let est: Vec<f64> = chain.posterior_mean_beta().unwrap().iter().copied().collect();
    let predictive = predict_outcome_law(&chain, &[1.0], &cs, 200, 4).unwrap().mean_law();
    let at_mean = outcome_law_at_mean(&est, &cs, 200_000, 2).unwrap();
    let truth = outcome_law_at_mean(&mu, &cs, 200_000, 1).unwrap();
    let (tv_mean, tv_truth) = (predictive.total_variation(&at_mean), predictive.total_variation(&truth));
    assert!(tv_mean <= 0.02, "total variation to the posterior-mean law {tv_mean}");
    assert!(tv_truth <= 0.02, "total variation to the true law {tv_truth}, posterior mean {est:?}");
}

#[test]
fn single_coordinate_and_full_blocks_preserve_the_response() {
    let cs = build_cardinality(5, 2).unwrap();
    let sim = simulate_regression(&cs, 40, 2, None, 1.0, 8).unwrap();
    for block in [1, 5] {
        let config = SamplerConfig {
            block_size: Some(block),
            adapt_block_size: false,
            check_identity: true,
            ..quick(200, 50, 8)
        };
        let chain = run_chain(&sim.dataset, &config).unwrap();
        assert_eq!(chain.metadata.identity_violations, 0, "block {block}");
        assert_eq!(chain.metadata.final_block_size, block);
        assert!(chain.metadata.acceptance_rates.iter().all(|&r| r > 0.0));
    }
}

#[test]
fn hit_and_run_forgets_its_start() {
    let graph = BipartiteGraph::new(2, 2, vec![(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
    let cs = build_matching(&graph).unwrap();
    let zeta = [1.2, 0.3, -0.1, 0.8];
    let res = solve_transform(&zeta, &cs).unwrap();
    let poly = DualPolytope::new(&res.y, &zeta, &cs).unwrap();
    assert!(poly.active_rows().len() > 3);

    let near = poly.find_interior_point().unwrap();
    let mut rng = SeededStream::new(5, 0).rng();
    let far = poly.sample_u_hitrun(&near, 5000, &mut rng).unwrap();
    let summary = |u: Vec<f64>| u.iter().sum::<f64>();
    let n = 3000;
    let from_near: Vec<f64> = (0..n).map(|_| summary(poly.sample_u_hitrun(&near, 100, &mut rng).unwrap())).collect();
    let from_far: Vec<f64> = (0..n).map(|_| summary(poly.sample_u_hitrun(&far, 100, &mut rng).unwrap())).collect();
    let exact: Vec<f64> = (0..n).map(|_| summary(poly.sample_u_rejection(1_000_000, &mut rng).unwrap())).collect();
    // 1% two-sample critical value is about 0.042 at this size.
    assert!(two_sample_ks(from_near.clone(), from_far) < 0.05);
    assert!(two_sample_ks(from_near, exact) < 0.05);
}

#[test]
fn chains_are_reproducible() {
    let cs = build_cardinality(3, 1).unwrap();
    let sim = simulate_regression(&cs, 60, 2, None, 1.0, 4).unwrap();
    let a = run_chain(&sim.dataset, &quick(80, 10, 12)).unwrap();
    let b = run_chain(&sim.dataset, &quick(80, 10, 12)).unwrap();
    let c = run_chain(&sim.dataset, &quick(80, 10, 13)).unwrap();
    for k in 0..a.num_params() {
        assert_eq!(a.series(k), b.series(k));
    }
    assert_ne!(a.series(0), c.series(0));
}

#[test]
fn bayes_factor_prefers_the_smaller_nested_model() {
    let cs = build_cardinality(2, 1).unwrap();
    let n = 20;
    let mut favoured = 0;
    for rep in 0..20u64 {
        let y = simulate_intercept(&cs, &[0.3, -0.2], n, 100 + rep).unwrap();
        let mut rng = SeededStream::new(rep, 7).rng();
        let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let small = PriorModel::intercept(n, 1.0);
        let big = PriorModel { x: DMatrix::from_fn(2, n, |r, c| if r == 0 { 1.0 } else { noise[c] }), tau: 1.0 };
        let bf = bayes_factor(&small, &big, &y, &cs, 400, 200, rep).unwrap();
        favoured += (bf.value > 1.0) as usize;
    }
    assert!(favoured > 10, "smaller model favoured in {favoured} of 20");
}
