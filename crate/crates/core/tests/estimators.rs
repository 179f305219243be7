use epg_core::critic::QuadricCritic;
use epg_core::gradient::{do_integral_gauss, ou_next, spg_step_gradient, AdvantageSource, OuState};
use epg_core::linalg::gaussian_quadric_expectation;
use epg_core::mdp::Transition;
use epg_core::policy::{CovMode, GaussianPolicy};
use epg_core::quadrature::monte_carlo_expect;
use epg_core::{PolynomialFeatures, SymmetricMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 1_000_000;
// two-sided 99% normal quantile
const Z99: f64 = 2.5758;
// 99% joint coverage over six components (Bonferroni)
const Z99_SIX: f64 = 3.1436;

fn random_critic(rng: &mut ChaCha8Rng, state_dim: usize, action_dim: usize) -> QuadricCritic {
    let features = PolynomialFeatures::new(state_dim);
    let q = QuadricCritic::zeros(features, action_dim);
    let n = q.n_params();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut q = QuadricCritic::from_flat(q.features.clone(), action_dim, &w).unwrap();
    // symmetrize each curvature block
    for ak in q.curvature.iter_mut() {
        let d = ak.dim();
        *ak = SymmetricMatrix::from_fn(d, |i, j| 0.5 * (ak.get(i, j) + ak.get(j, i))).unwrap();
    }
    q
}

fn fixed_policy(rng: &mut ChaCha8Rng, state_dim: usize, action_dim: usize, root: SymmetricMatrix) -> GaussianPolicy {
    let features = PolynomialFeatures::new(state_dim);
    let p = GaussianPolicy::new(features, action_dim, CovMode::Fixed(root)).unwrap();
    let theta = (0..p.n_params()).map(|_| rng.random_range(-0.5..0.5)).collect();
    p.with_theta(theta).unwrap()
}

#[test]
fn gaussian_quadric_expectation_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = SymmetricMatrix::from_rows(&[&[-0.7, 0.2], &[0.2, 0.4]]).unwrap();
    let b = [0.3, -1.1];
    let mu = [0.5, -0.25];
    let root = SymmetricMatrix::from_rows(&[&[0.6, 0.1], &[0.1, 0.3]]).unwrap();
    let sigma = SymmetricMatrix::new(2, root.matmul(&root)).unwrap();
    let exact = gaussian_quadric_expectation(&a, &b, &mu, &sigma).unwrap();
    let mc = monte_carlo_expect(&mu, &root, SAMPLES, &mut rng, |x, _| {
        vec![a.quad_form(x) + x[0] * b[0] + x[1] * b[1]]
    });
    assert!(mc.contains(&[exact], Z99), "exact {exact} mc {:?} ± {:?}", mc.mean, mc.std_error);
}

#[test]
fn score_has_zero_mean_and_baselines_drop_out() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let root = SymmetricMatrix::from_rows(&[&[0.5, 0.05], &[0.05, 0.4]]).unwrap();
    let policy = fixed_policy(&mut rng, 1, 2, root.clone());
    let s = [0.7];
    let mu = policy.mean(&s);
    let zero = vec![0.0; policy.n_params()];

    let score = monte_carlo_expect(&mu, &root, SAMPLES, &mut rng, |a, _| policy.log_prob_grad(&s, a, None).unwrap());
    assert!(score.contains(&zero, Z99_SIX), "score mean {:?} ± {:?}", score.mean, score.std_error);

    let baseline = 3.5;
    let scaled = monte_carlo_expect(&mu, &root, SAMPLES, &mut rng, |a, _| {
        policy.log_prob_grad(&s, a, None).unwrap().into_iter().map(|g| g * baseline).collect()
    });
    assert!(scaled.contains(&zero, Z99_SIX), "baseline term {:?} ± {:?}", scaled.mean, scaled.std_error);
}

#[test]
fn single_sample_estimator_is_unbiased_for_the_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let root = SymmetricMatrix::from_rows(&[&[0.45, -0.1], &[-0.1, 0.35]]).unwrap();
    let policy = fixed_policy(&mut rng, 1, 2, root.clone());
    let critic = random_critic(&mut rng, 1, 2);
    let s = [-0.4];
    let mu = policy.mean(&s);
    let exact = do_integral_gauss(&policy, &critic, &s, None).unwrap().mean_block;

    for baseline in [None, Some(-2.0)] {
        let mc = monte_carlo_expect(&mu, &root, SAMPLES, &mut rng, |a, _| {
            let t = Transition { state: s.to_vec(), action: a.to_vec(), reward: 0.0, next_state: s.to_vec(), time_index: 0 };
            spg_step_gradient(&policy, None, AdvantageSource::Critic(&critic), &t, baseline, 0.0, 1.0).unwrap().g
        });
        assert!(
            mc.contains(&exact, Z99_SIX),
            "baseline {baseline:?}: exact {exact:?} mc {:?} ± {:?}",
            mc.mean,
            mc.std_error
        );
    }
}

#[test]
fn ou_noise_reaches_its_stationary_variance() {
    let (psi, sigma) = (0.5, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut o = OuState::new(1, psi, sigma).unwrap();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let burn = 1000;
    for i in 0..SAMPLES + burn {
        let (next, n) = ou_next(&o, &mut rng);
        o = next;
        if i >= burn {
            sum += n[0];
            sum_sq += n[0] * n[0];
        }
    }
    let n = SAMPLES as f64;
    let mean = sum / n;
    let var = sum_sq / n - mean * mean;
    let stationary = sigma * sigma / (1.0 - psi * psi);
    assert!((var / stationary - 1.0).abs() < 0.02, "variance {var} vs {stationary}");
}
