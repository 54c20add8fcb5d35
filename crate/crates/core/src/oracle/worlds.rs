//! Hand-built tabular worlds for oracle tests and verification runs, plus a
//! JSON file format for custom worlds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{OracleError, TabularPomdp};
use crate::rng::stream;
use crate::scalar::{sc, Scalar};

/// Action index that reveals the object in [`two_room_hidden_object`].
pub const PEEK: usize = 1;

/// A single room of `m` cells holding one white-noise object the agent
/// watches: the object teleports uniformly every step regardless of the
/// action, and the observation is the object's cell. Uniform marginals make
/// every exact prediction uniform.
pub fn white_noise_room<S: Scalar>(m: usize) -> TabularPomdp<S> {
    let u = S::one() / sc::<S>(m as f64);
    let dynamics = vec![vec![u; m * m]];
    let mut obs = vec![S::zero(); m * m];
    for x in 0..m {
        obs[x * m + x] = S::one();
    }
    let init = vec![u; m];
    TabularPomdp::from_dense(dynamics, obs, init, m).expect("valid world")
}

/// Deterministic cycle with identity observations: state `x` steps to
/// `x + 1 (mod n)` under the single action, and is fully observed.
pub fn deterministic_cycle<S: Scalar>(n: usize) -> TabularPomdp<S> {
    let mut dynamics = vec![vec![S::zero(); n * n]];
    for x in 0..n {
        dynamics[0][x * n + (x + 1) % n] = S::one();
    }
    let mut obs = vec![S::zero(); n * n];
    for x in 0..n {
        obs[x * n + x] = S::one();
    }
    let mut init = vec![S::zero(); n];
    init[0] = S::one();
    TabularPomdp::from_dense(dynamics, obs, init, n).expect("valid world")
}

/// A static object hidden in one of two positions; action 0 waits (sees
/// nothing), action [`PEEK`] looks at the object. State = (object, last
/// action); observations: 0 = nothing, 1 = object at 0, 2 = object at 1.
pub fn two_room_hidden_object<S: Scalar>() -> TabularPomdp<S> {
    // states: 0 = (obj0, wait), 1 = (obj0, peek), 2 = (obj1, wait), 3 = (obj1, peek)
    let n = 4;
    let one = S::one();
    let zero = S::zero();
    let mut wait = vec![zero; n * n];
    let mut peek = vec![zero; n * n];
    for obj in 0..2 {
        for last in 0..2 {
            let x = obj * 2 + last;
            wait[x * n + obj * 2] = one;
            peek[x * n + obj * 2 + 1] = one;
        }
    }
    let mut obs = vec![zero; n * 3];
    for obj in 0..2 {
        obs[(obj * 2) * 3] = one; // after wait: sees nothing
        obs[(obj * 2 + 1) * 3 + 1 + obj] = one; // after peek: sees the object
    }
    let half = sc::<S>(0.5);
    let init = vec![half, zero, half, zero];
    TabularPomdp::from_dense(vec![wait, peek], obs, init, 3).expect("valid world")
}

/// A noisy chain: deterministic forward/stay dynamics with a blurred
/// position sensor (0.6 on the true cell, 0.2 on each neighbour, wrapping).
pub fn noisy_cycle<S: Scalar>(n: usize) -> TabularPomdp<S> {
    let zero = S::zero();
    let mut forward = vec![zero; n * n];
    let mut stay = vec![zero; n * n];
    for x in 0..n {
        forward[x * n + (x + 1) % n] = S::one();
        stay[x * n + x] = S::one();
    }
    let mut obs = vec![zero; n * n];
    for x in 0..n {
        obs[x * n + x] = sc(0.6);
        obs[x * n + (x + 1) % n] = sc(0.2);
        obs[x * n + (x + n - 1) % n] = sc(0.2);
    }
    let init = vec![S::one() / sc::<S>(n as f64); n];
    TabularPomdp::from_dense(vec![forward, stay], obs, init, n).expect("valid world")
}

/// Seeded random POMDP with full-support kernels (entries drawn in
/// [0.1, 1.1) and normalized), so beliefs never hit zero evidence.
pub fn random_pomdp<S: Scalar>(
    n_states: usize,
    n_actions: usize,
    n_obs: usize,
    seed: u64,
) -> TabularPomdp<S> {
    let mut rng = stream(seed, "random_pomdp");
    let mut row = |len: usize| -> Vec<S> {
        let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.1..1.1)).collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| sc(v / sum)).collect()
    };
    let mut dynamics = Vec::with_capacity(n_actions);
    for _ in 0..n_actions {
        let mut mat = Vec::with_capacity(n_states * n_states);
        for _ in 0..n_states {
            mat.extend(row(n_states));
        }
        dynamics.push(mat);
    }
    let mut obs = Vec::with_capacity(n_states * n_obs);
    for _ in 0..n_states {
        obs.extend(row(n_obs));
    }
    let init = row(n_states);
    TabularPomdp::from_dense(dynamics, obs, init, n_obs).expect("valid world")
}

/// Three states, two actions, two observations; small enough for exhaustive
/// path enumeration in tests.
pub fn three_state_toy<S: Scalar>() -> TabularPomdp<S> {
    let d = |rows: &[[f64; 3]]| -> Vec<S> {
        rows.iter().flatten().map(|v| sc(*v)).collect()
    };
    let a0 = d(&[[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.3, 0.3, 0.4]]);
    let a1 = d(&[[0.2, 0.2, 0.6], [0.5, 0.4, 0.1], [0.1, 0.1, 0.8]]);
    let obs = d(&[[0.9, 0.1, 0.0], [0.2, 0.8, 0.0], [0.1, 0.4, 0.5]]);
    let init = vec![sc(0.5), sc(0.3), sc(0.2)];
    TabularPomdp::from_dense(vec![a0, a1], obs, init, 3).expect("valid world")
}

/// A builtin world by name, e.g. `white_noise_32`, `two_room`,
/// `noisy_cycle_6`, `random_8`, `three_state`.
pub fn builtin<S: Scalar>(name: &str) -> Option<TabularPomdp<S>> {
    if let Some(rest) = name.strip_prefix("white_noise_") {
        return rest.parse().ok().map(white_noise_room);
    }
    if let Some(rest) = name.strip_prefix("noisy_cycle_") {
        return rest.parse().ok().map(noisy_cycle);
    }
    if let Some(rest) = name.strip_prefix("random_") {
        return rest.parse().ok().map(|n| random_pomdp(n, 2, n, 1234));
    }
    match name {
        "two_room" => Some(two_room_hidden_object()),
        "three_state" => Some(three_state_toy()),
        _ => None,
    }
}

/// On-disk description of a tabular world.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_obs: usize,
    /// `dynamics[a][x][x']`
    pub dynamics: Vec<Vec<Vec<f64>>>,
    /// `obs_kernel[x][o]`
    pub obs_kernel: Vec<Vec<f64>>,
    pub init: Vec<f64>,
}

impl WorldFile {
    pub fn into_pomdp<S: Scalar>(self) -> Result<TabularPomdp<S>, OracleError> {
        let dynamics = self
            .dynamics
            .into_iter()
            .map(|mat| mat.into_iter().flatten().map(|v| sc(v)).collect())
            .collect();
        let obs = self
            .obs_kernel
            .into_iter()
            .flatten()
            .map(|v| sc(v))
            .collect();
        let init = self.init.into_iter().map(|v| sc(v)).collect();
        TabularPomdp::from_dense(dynamics, obs, init, self.n_obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve() {
        assert!(builtin::<f64>("white_noise_32").is_some());
        assert!(builtin::<f64>("two_room").is_some());
        assert!(builtin::<f64>("three_state").is_some());
        assert!(builtin::<f64>("noisy_cycle_6").is_some());
        assert!(builtin::<f64>("nope").is_none());
    }

    #[test]
    fn world_file_round_trip() {
        let wf = WorldFile {
            n_states: 2,
            n_actions: 1,
            n_obs: 2,
            dynamics: vec![vec![vec![0.5, 0.5], vec![0.25, 0.75]]],
            obs_kernel: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            init: vec![0.5, 0.5],
        };
        let text = serde_json::to_string(&wf).unwrap();
        let back: WorldFile = serde_json::from_str(&text).unwrap();
        assert!(back.into_pomdp::<f64>().is_ok());
    }
}
