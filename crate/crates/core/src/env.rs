//! In-house continuous-control environments and their name registry.
//!
//! * `lqr2d`: `s' = 0.9 s + 0.1 a + ε`, `ε ~ N(0, 1e-4 I)`, reward `-(sᵀs + 0.1 aᵀa)`,
//!   `s0 ~ U[-1, 1]²`, horizon 100.
//! * `pointmass`: planar point mass with light quadratic drag, Euler step 0.05,
//!   reward `-‖pos - goal‖² - 0.05‖a‖²`, starts at rest at the origin.
//! * `pendulum1d`: torque-limited swing-up; angle 0 is upright,
//!   reward `-(angle² + 0.1 ω² + 0.001 a²)`, horizon 200.
//!
//! Actions are clipped to `[-2, 2]` per dimension before they reach the
//! dynamics. Every instance owns its RNG; the number of draws per call never
//! depends on the action, so a seed plus an action sequence fixes the trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mdp::EnvironmentSpec;

pub const ACTION_LIMIT: f64 = 2.0;

pub const ENVIRONMENTS: [&str; 3] = ["lqr2d", "pointmass", "pendulum1d"];

pub trait Environment: Send {
    fn spec(&self) -> &EnvironmentSpec;

    /// Samples a start state from p0 and makes it current.
    fn reset(&mut self) -> Vec<f64>;

    fn state(&self) -> &[f64];

    /// Overrides the current state (tests and oracles).
    fn set_state(&mut self, state: &[f64]) -> Result<()>;

    /// Applies `action` at the current state; returns `(next_state, reward)`.
    fn step(&mut self, action: &[f64]) -> Result<(Vec<f64>, f64)>;
}

pub fn clip_action(action: &[f64]) -> Vec<f64> {
    action.iter().map(|a| a.clamp(-ACTION_LIMIT, ACTION_LIMIT)).collect()
}

fn check_action(spec: &EnvironmentSpec, action: &[f64]) -> Result<Vec<f64>> {
    if action.len() != spec.action_dim {
        return Err(Error::InvalidAction(format!(
            "{} expects {}-dimensional actions, got {}",
            spec.name,
            spec.action_dim,
            action.len()
        )));
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidAction(format!("non-finite action {action:?}")));
    }
    Ok(clip_action(action))
}

fn check_state(spec: &EnvironmentSpec, state: &[f64]) -> Result<()> {
    if state.len() != spec.state_dim || state.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{} expects a finite {}-dimensional state",
            spec.name, spec.state_dim
        )));
    }
    Ok(())
}

pub fn env_spec(name: &str) -> Result<EnvironmentSpec> {
    let (state_dim, action_dim, gamma, horizon) = match name {
        "lqr2d" => (2, 2, 0.9, 100),
        "pointmass" => (4, 2, 0.95, 200),
        "pendulum1d" => (2, 1, 0.95, 200),
        other => return Err(Error::Config(format!("unknown environment '{other}'"))),
    };
    Ok(EnvironmentSpec { name: name.to_string(), state_dim, action_dim, gamma, horizon })
}

pub fn make_env(name: &str, seed: u64) -> Result<Box<dyn Environment>> {
    Ok(match name {
        "lqr2d" => Box::new(Lqr2d::new(seed)),
        "pointmass" => Box::new(PointMass::new(seed)),
        "pendulum1d" => Box::new(Pendulum1d::new(seed)),
        other => return Err(Error::Config(format!("unknown environment '{other}'"))),
    })
}

/// Initial state of a freshly seeded environment.
pub fn env_reset(spec: &EnvironmentSpec, seed: u64) -> Result<Vec<f64>> {
    Ok(make_env(&spec.name, seed)?.reset())
}

pub struct Lqr2d {
    spec: EnvironmentSpec,
    rng: ChaCha8Rng,
    state: Vec<f64>,
    noise_std: f64,
}

impl Lqr2d {
    pub const STATE_GAIN: f64 = 0.9;
    pub const ACTION_GAIN: f64 = 0.1;
    pub const ACTION_COST: f64 = 0.1;
    pub const NOISE_VAR: f64 = 1e-4;

    pub fn new(seed: u64) -> Self {
        Self::with_noise_std(seed, Self::NOISE_VAR.sqrt())
    }

    pub fn with_noise_std(seed: u64, noise_std: f64) -> Self {
        Self {
            spec: env_spec("lqr2d").expect("registered"),
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: vec![0.0; 2],
            noise_std,
        }
    }
}

impl Environment for Lqr2d {
    fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = (0..2).map(|_| self.rng.random_range(-1.0..=1.0)).collect();
        self.state.clone()
    }

    fn state(&self) -> &[f64] {
        &self.state
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        check_state(&self.spec, state)?;
        self.state = state.to_vec();
        Ok(())
    }

    fn step(&mut self, action: &[f64]) -> Result<(Vec<f64>, f64)> {
        let a = check_action(&self.spec, action)?;
        let s = &self.state;
        let reward = -(s.iter().map(|x| x * x).sum::<f64>()
            + Self::ACTION_COST * a.iter().map(|x| x * x).sum::<f64>());
        let next: Vec<f64> = (0..2)
            .map(|i| {
                let eps: f64 = self.rng.sample(StandardNormal);
                Self::STATE_GAIN * s[i] + Self::ACTION_GAIN * a[i] + self.noise_std * eps
            })
            .collect();
        self.state = next.clone();
        Ok((next, reward))
    }
}

pub struct PointMass {
    spec: EnvironmentSpec,
    state: Vec<f64>,
}

impl PointMass {
    pub const DT: f64 = 0.05;
    pub const GOAL: [f64; 2] = [1.0, 1.0];
    pub const DRAG: f64 = 0.1;
    pub const ACTION_COST: f64 = 0.05;

    pub fn new(_seed: u64) -> Self {
        Self { spec: env_spec("pointmass").expect("registered"), state: vec![0.0; 4] }
    }
}

impl Environment for PointMass {
    fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = vec![0.0; 4];
        self.state.clone()
    }

    fn state(&self) -> &[f64] {
        &self.state
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        check_state(&self.spec, state)?;
        self.state = state.to_vec();
        Ok(())
    }

    fn step(&mut self, action: &[f64]) -> Result<(Vec<f64>, f64)> {
        let a = check_action(&self.spec, action)?;
        let (pos, vel) = self.state.split_at(2);
        let dist2: f64 = pos.iter().zip(Self::GOAL).map(|(p, g)| (p - g) * (p - g)).sum();
        let reward = -dist2 - Self::ACTION_COST * a.iter().map(|x| x * x).sum::<f64>();
        let speed = (vel[0] * vel[0] + vel[1] * vel[1]).sqrt();
        let mut next = vec![0.0; 4];
        for i in 0..2 {
            next[i] = pos[i] + Self::DT * vel[i];
            next[2 + i] = vel[i] + Self::DT * (a[i] - Self::DRAG * speed * vel[i]);
        }
        self.state = next.clone();
        Ok((next, reward))
    }
}

pub struct Pendulum1d {
    spec: EnvironmentSpec,
    rng: ChaCha8Rng,
    state: Vec<f64>,
}

impl Pendulum1d {
    pub const DT: f64 = 0.05;
    pub const GRAVITY: f64 = 10.0;
    pub const MASS: f64 = 1.0;
    pub const LENGTH: f64 = 1.0;
    pub const MAX_SPEED: f64 = 8.0;

    pub fn new(seed: u64) -> Self {
        Self {
            spec: env_spec("pendulum1d").expect("registered"),
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: vec![std::f64::consts::PI, 0.0],
        }
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Environment for Pendulum1d {
    fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        use std::f64::consts::PI;
        let angle = self.rng.random_range(-PI..PI);
        let omega = self.rng.random_range(-1.0..=1.0);
        self.state = vec![angle, omega];
        self.state.clone()
    }

    fn state(&self) -> &[f64] {
        &self.state
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        check_state(&self.spec, state)?;
        self.state = vec![normalize_angle(state[0]), state[1]];
        Ok(())
    }

    fn step(&mut self, action: &[f64]) -> Result<(Vec<f64>, f64)> {
        let u = check_action(&self.spec, action)?[0];
        let (th, om) = (self.state[0], self.state[1]);
        let reward = -(th * th + 0.1 * om * om + 0.001 * u * u);
        let accel = 3.0 * Self::GRAVITY / (2.0 * Self::LENGTH) * th.sin()
            + 3.0 / (Self::MASS * Self::LENGTH * Self::LENGTH) * u;
        let new_om = (om + accel * Self::DT).clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        let new_th = normalize_angle(th + new_om * Self::DT);
        self.state = vec![new_th, new_om];
        Ok((self.state.clone(), reward))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lqr_reset_is_uniform_box_and_deterministic() {
        let spec = env_spec("lqr2d").unwrap();
        let s = env_reset(&spec, 7).unwrap();
        assert!(s.iter().all(|x| (-1.0..=1.0).contains(x)));
        assert_eq!(s, env_reset(&spec, 7).unwrap());
        assert_ne!(s, env_reset(&spec, 8).unwrap());
    }

    #[test]
    fn pointmass_start_is_fixed() {
        let spec = env_spec("pointmass").unwrap();
        assert_eq!(env_reset(&spec, 1).unwrap(), vec![0.0; 4]);
        assert_eq!(env_reset(&spec, 99).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn unknown_env_is_config_error() {
        assert!(matches!(env_spec("cartpole"), Err(Error::Config(_))));
        assert!(matches!(make_env("cartpole", 0), Err(Error::Config(_))));
    }

    #[test]
    fn lqr_origin_is_fixed_point() {
        let mut env = Lqr2d::with_noise_std(0, 0.0);
        env.set_state(&[0.0, 0.0]).unwrap();
        let (next, r) = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(next, vec![0.0, 0.0]);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn lqr_step_arithmetic() {
        let mut env = Lqr2d::with_noise_std(0, 0.0);
        env.set_state(&[1.0, 0.0]).unwrap();
        let (next, r) = env.step(&[0.0, 0.0]).unwrap();
        assert!((next[0] - 0.9).abs() < 1e-15 && next[1] == 0.0);
        assert_eq!(r, -1.0);

        // with the default noise the step lands within a few noise std of the mean
        let mut env = Lqr2d::new(3);
        env.set_state(&[1.0, 0.0]).unwrap();
        let (next, _) = env.step(&[0.0, 0.0]).unwrap();
        assert!((next[0] - 0.9).abs() < 0.06 && next[1].abs() < 0.06);
    }

    #[test]
    fn pointmass_goal_reward_is_zero() {
        let mut env = PointMass::new(0);
        env.set_state(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        let (_, r) = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn non_finite_action_rejected() {
        let mut env = Lqr2d::new(0);
        env.reset();
        assert!(matches!(env.step(&[f64::NAN, 0.0]), Err(Error::InvalidAction(_))));
        assert!(matches!(env.step(&[0.0]), Err(Error::InvalidAction(_))));
    }

    #[test]
    fn actions_are_clipped() {
        let mut a = Lqr2d::with_noise_std(0, 0.0);
        let mut b = Lqr2d::with_noise_std(0, 0.0);
        a.set_state(&[0.5, 0.5]).unwrap();
        b.set_state(&[0.5, 0.5]).unwrap();
        assert_eq!(a.step(&[10.0, -7.0]).unwrap(), b.step(&[2.0, -2.0]).unwrap());
    }

    #[test]
    fn pendulum_upright_rest_is_zero_reward() {
        let mut env = Pendulum1d::new(0);
        env.set_state(&[0.0, 0.0]).unwrap();
        let (next, r) = env.step(&[0.0]).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(next, vec![0.0, 0.0]);
        assert!((normalize_angle(3.0 * std::f64::consts::PI) + std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn identical_seed_and_actions_replay_bit_for_bit() {
        for name in ENVIRONMENTS {
            let spec = env_spec(name).unwrap();
            let run = || {
                let mut env = make_env(name, 42).unwrap();
                let mut states = vec![env.reset()];
                for k in 0..50 {
                    let a: Vec<f64> = (0..spec.action_dim).map(|i| ((k + i) as f64 * 0.37).sin()).collect();
                    let (s, r) = env.step(&a).unwrap();
                    states.push(s);
                    states.push(vec![r]);
                }
                states
            };
            let (x, y) = (run(), run());
            let bits = |v: &Vec<Vec<f64>>| v.iter().flatten().map(|f| f.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&x), bits(&y), "{name}");
        }
    }
}
