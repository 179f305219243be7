use epg_core::env::{env_spec, make_env, ACTION_LIMIT, ENVIRONMENTS};

fn rollout(name: &str, seed: u64, steps: usize) -> Vec<(Vec<f64>, f64)> {
    let spec = env_spec(name).unwrap();
    let mut env = make_env(name, seed).unwrap();
    let mut out = vec![(env.reset(), 0.0)];
    for k in 0..steps {
        let a: Vec<f64> = (0..spec.action_dim).map(|i| ((k * 7 + i * 3) as f64 * 0.37).sin() * 3.0).collect();
        out.push(env.step(&a).unwrap());
    }
    out
}

#[test]
fn same_seed_same_trajectory() {
    for name in ENVIRONMENTS {
        assert_eq!(rollout(name, 5, 300), rollout(name, 5, 300), "{name}");
    }
}

#[test]
fn stochastic_environments_depend_on_the_seed() {
    for name in ["lqr2d", "pendulum1d"] {
        assert_ne!(rollout(name, 5, 50), rollout(name, 6, 50), "{name}");
    }
}

#[test]
fn actions_beyond_the_box_act_like_the_boundary() {
    for name in ENVIRONMENTS {
        let spec = env_spec(name).unwrap();
        let big = vec![10.0; spec.action_dim];
        let edge = vec![ACTION_LIMIT; spec.action_dim];
        let mut e1 = make_env(name, 9).unwrap();
        let mut e2 = make_env(name, 9).unwrap();
        assert_eq!(e1.reset(), e2.reset());
        assert_eq!(e1.step(&big).unwrap(), e2.step(&edge).unwrap(), "{name}");
    }
}

#[test]
fn malformed_actions_are_rejected() {
    let mut env = make_env("lqr2d", 0).unwrap();
    env.reset();
    assert!(env.step(&[0.0]).is_err());
    assert!(env.step(&[f64::NAN, 0.0]).is_err());
}
