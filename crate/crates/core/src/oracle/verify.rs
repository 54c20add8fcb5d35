//! Monte-Carlo verification that the NDIGO reward computed with *exact*
//! predictors matches the information-gain difference.
//!
//! For every realized prefix class `(o_0, a_0, .., o_{t+H-1}, a_{t+H-1})`,
//! the conditional expectation of
//! `r_{t+H-1} = ln P_{t+H|t}(o_{t+H}) - ln P_{t+H|t-1}(o_{t+H})`
//! over the next observation equals
//! `IG(gain from observations including o_t) - IG(excluding o_t)`.
//! The verifier accumulates the per-episode residual `r - IG_diff(class)`,
//! which has exactly zero conditional mean under the identity.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{OracleError, TabularPomdp};
use crate::rng::stream;
use crate::scalar::Scalar;

/// Behaviour policy for verification episodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum VerifyPolicy {
    /// Fixed open-loop action script (cycled to the episode length).
    Script(Vec<usize>),
    /// Uniform over actions, drawn per step.
    UniformRandom,
}

/// Aggregate over one realized history class at one reward step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassRow {
    pub t: usize,
    pub obs_prefix: Vec<usize>,
    pub action_prefix: Vec<usize>,
    pub count: usize,
    pub mean_reward: f64,
    pub ig_diff: f64,
    pub abs_error: f64,
}

/// Verification outcome; `residual_*` statistics refer to
/// `reward - ig_diff(class)` pooled over every step and episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub horizon: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub reward_samples: usize,
    pub mean_reward: f64,
    pub mean_ig_diff: f64,
    pub residual_mean: f64,
    pub residual_se: f64,
    pub abs_error: f64,
    pub within_3_se: bool,
    pub classes: Vec<ClassRow>,
}

struct ClassAcc {
    count: usize,
    reward_sum: f64,
    ig_diff: f64,
}

/// Run `episodes` rollouts of `steps` actions and compare the exact-predictor
/// NDIGO reward against the information-gain difference at every valid step.
pub fn verify_ndigo_identity<S: Scalar>(
    m: &TabularPomdp<S>,
    policy: &VerifyPolicy,
    horizon: usize,
    episodes: usize,
    steps: usize,
    seed: u64,
) -> Result<VerifyReport, OracleError> {
    assert!(horizon >= 1, "horizon must be positive");
    assert!(steps > horizon, "episode too short for the horizon");
    let mut rng = stream(seed, "oracle_verify");
    // class key -> cached (P_{t+H|t}, P_{t+H|t-1}, ig_diff)
    let mut cache: HashMap<(usize, Vec<usize>, Vec<usize>), (Vec<S>, Vec<S>, f64)> = HashMap::new();
    let mut table: HashMap<(usize, Vec<usize>, Vec<usize>), ClassAcc> = HashMap::new();
    let mut residual_sum = 0.0;
    let mut residual_sq = 0.0;
    let mut reward_sum = 0.0;
    let mut ig_sum = 0.0;
    let mut samples = 0usize;

    for _ in 0..episodes {
        let mut pick = |i: usize, r: &mut rand_chacha::ChaCha8Rng| -> usize {
            match policy {
                VerifyPolicy::Script(script) => script[i % script.len()],
                VerifyPolicy::UniformRandom => r.gen_range(0..m.n_actions),
            }
        };
        let h = m.sample_episode(&mut pick, steps, &mut rng);
        for t in 1..=steps - horizon {
            let target = t + horizon;
            let key = (
                t,
                h.obs[..target].to_vec(),
                h.actions[..target].to_vec(),
            );
            if !cache.contains_key(&key) {
                let short = m.predict_obs_at(&h, t as isize, target)?;
                let long = m.predict_obs_at(&h, t as isize - 1, target)?;
                let ig_diff = m.ig_difference(&h, t, horizon)?.to_f64().unwrap();
                cache.insert(key.clone(), (short, long, ig_diff));
            }
            let (short, long, ig_diff) = cache.get(&key).unwrap();
            let o = h.obs[target];
            let reward =
                short[o].to_f64().unwrap().ln() - long[o].to_f64().unwrap().ln();
            let d = reward - ig_diff;
            residual_sum += d;
            residual_sq += d * d;
            reward_sum += reward;
            ig_sum += ig_diff;
            samples += 1;
            let acc = table.entry(key).or_insert(ClassAcc {
                count: 0,
                reward_sum: 0.0,
                ig_diff: *ig_diff,
            });
            acc.count += 1;
            acc.reward_sum += reward;
        }
    }

    let n = samples as f64;
    let residual_mean = residual_sum / n;
    let var = (residual_sq / n - residual_mean * residual_mean).max(0.0);
    let residual_se = (var / n).sqrt();
    let mut classes: Vec<ClassRow> = table
        .into_iter()
        .map(|((t, obs_prefix, action_prefix), acc)| {
            let mean_reward = acc.reward_sum / acc.count as f64;
            ClassRow {
                t,
                obs_prefix,
                action_prefix,
                count: acc.count,
                mean_reward,
                ig_diff: acc.ig_diff,
                abs_error: (mean_reward - acc.ig_diff).abs(),
            }
        })
        .collect();
    classes.sort_by(|a, b| (a.t, &a.obs_prefix, &a.action_prefix).cmp(&(b.t, &b.obs_prefix, &b.action_prefix)));
    let abs_error = residual_mean.abs();
    Ok(VerifyReport {
        horizon,
        episodes,
        steps_per_episode: steps,
        reward_samples: samples,
        mean_reward: reward_sum / n,
        mean_ig_diff: ig_sum / n,
        residual_mean,
        residual_se,
        abs_error,
        // a tiny absolute slack covers the exactly-deterministic case where
        // both sides are identically zero
        within_3_se: abs_error <= 3.0 * residual_se + 1e-9,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::super::worlds;
    use super::*;

    #[test]
    fn white_noise_world_has_identically_zero_sides() {
        let m = worlds::white_noise_room::<f64>(32);
        let report =
            verify_ndigo_identity(&m, &VerifyPolicy::Script(vec![0]), 1, 200, 4, 99).unwrap();
        assert_eq!(report.mean_reward, 0.0);
        assert_eq!(report.mean_ig_diff, 0.0);
        assert_eq!(report.abs_error, 0.0);
        assert!(report.within_3_se);
    }

    #[test]
    fn deterministic_world_has_identically_zero_sides() {
        let m = worlds::deterministic_cycle::<f64>(5);
        let report =
            verify_ndigo_identity(&m, &VerifyPolicy::Script(vec![0]), 2, 100, 5, 7).unwrap();
        assert!(report.abs_error < 1e-12);
        assert!(report.within_3_se);
    }

    #[test]
    fn stochastic_toy_matches_within_monte_carlo_error() {
        let m = worlds::three_state_toy::<f64>();
        let report = verify_ndigo_identity(
            &m,
            &VerifyPolicy::Script(vec![0, 1]),
            1,
            20_000,
            4,
            123,
        )
        .unwrap();
        assert!(report.within_3_se, "residual {} se {}", report.residual_mean, report.residual_se);
        // per-class agreement for well-sampled classes
        for row in report.classes.iter().filter(|r| r.count >= 500) {
            assert!(
                row.abs_error < 0.1,
                "class {:?} error {}",
                row.obs_prefix,
                row.abs_error
            );
        }
    }
}
