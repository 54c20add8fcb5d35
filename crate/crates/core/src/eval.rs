//! Glass-box evaluation: a gradient-isolated probe trained to read the true
//! world state out of the belief vector, plus the behavioural statistics
//! (first-visit time, visit count, per-room visit flags).
//!
//! The probe consumes detached copies of `b_t`; by construction nothing it
//! does can reach world-model parameters.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Observation, StateLabel};
use crate::nn::{loss, Adam, Mlp, Parameterized};
use crate::rng::stream;
use crate::scalar::Scalar;

/// One categorical head per tracked aspect of the true state (each object,
/// then the agent), every head over the layout's global cells.
#[derive(Debug, Clone)]
pub struct Probe<S> {
    pub heads: Vec<Mlp<S>>,
    pub n_cells: usize,
    pub belief_dim: usize,
}

/// Names of the probed aspects: `obj<i>_<kind>` per object, then `agent`.
pub fn aspect_names(object_kinds: &[crate::env::ObjectKind]) -> Vec<String> {
    let mut names: Vec<String> = object_kinds
        .iter()
        .enumerate()
        .map(|(i, k)| format!("obj{i}_{}", k.name()))
        .collect();
    names.push("agent".to_string());
    names
}

impl<S: Scalar> Probe<S> {
    /// `aspects` = number of objects + 1 (agent).
    pub fn new(seed: u64, belief_dim: usize, hidden: usize, n_cells: usize, aspects: usize) -> Self {
        let mut rng = stream(seed, "probe");
        let heads = (0..aspects)
            .map(|_| Mlp::new_small_out(&mut rng, belief_dim, hidden, n_cells, 0.01))
            .collect();
        Self {
            heads,
            n_cells,
            belief_dim,
        }
    }

    /// Per-aspect cross entropy `-ln p(x_t | b_t)`, no training.
    pub fn discovery_loss(&self, belief: &[S], label: &StateLabel) -> Vec<S> {
        let targets = Self::targets(label);
        assert_eq!(targets.len(), self.heads.len(), "aspect count mismatch");
        assert_eq!(belief.len(), self.belief_dim, "belief dimension mismatch");
        self.heads
            .iter()
            .zip(&targets)
            .map(|(head, target)| {
                let (_, logits) = head.forward(belief);
                let mut p = vec![S::zero(); self.n_cells];
                loss::floored_softmax(&logits, &mut p);
                loss::xent_from_probs(&p, *target)
            })
            .collect()
    }

    /// One optimizer step on a batch of `(belief, label)` pairs; returns the
    /// per-aspect mean pre-update losses.
    pub fn train_step(
        &mut self,
        batch: &[(&[S], &StateLabel)],
        opt: &mut Adam<S>,
    ) -> Vec<S> {
        assert!(!batch.is_empty());
        let n = S::from_usize(batch.len()).unwrap();
        let scale = S::one() / n;
        let mut sums = vec![S::zero(); self.heads.len()];
        for (belief, label) in batch {
            let targets = Self::targets(label);
            for (a, head) in self.heads.iter_mut().enumerate() {
                let (hidden, logits) = head.forward(belief);
                let mut dlogits = vec![S::zero(); logits.len()];
                let l = loss::softmax_xent(&logits, targets[a], &mut dlogits);
                sums[a] += l;
                for d in dlogits.iter_mut() {
                    *d *= scale;
                }
                head.backward(belief, &hidden, &dlogits, None);
            }
        }
        opt.step(self);
        sums.iter().map(|s| *s / n).collect()
    }

    fn targets(label: &StateLabel) -> Vec<usize> {
        let mut t = label.objects.clone();
        t.push(label.agent);
        t
    }
}

impl<S: Scalar> Parameterized<S> for Probe<S> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [S], &mut [S])) {
        for head in &mut self.heads {
            head.visit_params(f);
        }
    }
}

/// Fresh Adam instance with the evaluation optimizer defaults.
pub fn probe_optimizer<S: Scalar>(lr: f64) -> Adam<S> {
    Adam::new(lr)
}

/// Behavioural statistics of one episode, folded one step at a time over
/// post-action observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorMetrics {
    pub episode_len: usize,
    pub steps_seen: usize,
    /// Per object: steps with the object in view.
    pub visit_count: Vec<usize>,
    /// Per object: first step with the object in view; `episode_len` if
    /// never seen.
    pub first_visit_time: Vec<usize>,
}

impl BehaviorMetrics {
    pub fn new(num_objects: usize, episode_len: usize) -> Self {
        Self {
            episode_len,
            steps_seen: 0,
            visit_count: vec![0; num_objects],
            first_visit_time: vec![episode_len; num_objects],
        }
    }

    /// Fold one post-action observation (call once per step).
    pub fn update(&mut self, obs: &Observation) {
        self.steps_seen += 1;
        for i in 0..self.visit_count.len() {
            if obs.object_local_cell(i).is_some() {
                self.visit_count[i] += 1;
                if self.first_visit_time[i] == self.episode_len {
                    self.first_visit_time[i] = self.steps_seen;
                }
            }
        }
    }

    /// Whether each object was ever observed ("room visited" in the maze
    /// experiments means the room's object was seen).
    pub fn objects_seen(&self) -> Vec<bool> {
        self.visit_count.iter().map(|c| *c > 0).collect()
    }

    /// Recompute from a stored observation sequence; must agree exactly
    /// with online accumulation.
    pub fn from_trace(num_objects: usize, episode_len: usize, obs: &[Observation]) -> Self {
        let mut m = Self::new(num_objects, episode_len);
        for o in obs {
            m.update(o);
        }
        m
    }
}

/// Seeded RNG for evaluation-time epsilon draws.
pub fn eval_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, "eval")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, EnvConfig, GridWorld, ObjectConfig, ObjectKind, RoomChoice};
    use rand::Rng;

    fn fixed_world(seed: u64) -> (GridWorld, Observation) {
        let cfg = EnvConfig {
            layout: "five_rooms".into(),
            objects: vec![ObjectConfig {
                kind: ObjectKind::Fixed,
                room: RoomChoice::One("upper".into()),
            }],
            episode_len: 400,
        };
        GridWorld::reset(&cfg, seed).unwrap()
    }

    #[test]
    fn uniform_probe_loss_is_ln_cells() {
        let (world, _) = fixed_world(1);
        let mut probe = Probe::<f64>::new(3, 8, 16, 361, 2);
        // zero the output layers: exactly uniform softmax
        for head in &mut probe.heads {
            head.fc2.visit_params(&mut |p, _| p.iter_mut().for_each(|v| *v = 0.0));
        }
        let b = vec![0.1; 8];
        let losses = probe.discovery_loss(&b, &world.true_state());
        for l in losses {
            assert!((l - (361.0f64).ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn freshly_initialized_probe_is_near_uniform() {
        let (world, _) = fixed_world(2);
        let probe = Probe::<f64>::new(7, 16, 32, 361, 2);
        let mut rng = stream(11, "probe_test");
        let mut total = 0.0;
        let n = 1000;
        for _ in 0..n {
            let b: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            total += probe.discovery_loss(&b, &world.true_state())[0];
        }
        let mean = total / n as f64;
        let uniform = (361.0f64).ln();
        assert!(
            (mean - uniform).abs() < 0.05 * uniform,
            "mean {mean} vs ln(361) {uniform}"
        );
    }

    #[test]
    fn probe_learns_a_sufficient_representation() {
        // feed the probe a one-hot encoding of the true cell: the loss must
        // approach zero (= the conditional entropy of a revealed state)
        let mut probe = Probe::<f64>::new(5, 25, 32, 25, 1);
        let mut opt = probe_optimizer(5e-3);
        let mut rng = stream(13, "suff");
        for _ in 0..600 {
            let cell = rng.gen_range(0..25);
            let mut b = vec![0.0; 25];
            b[cell] = 1.0;
            let label = StateLabel {
                agent: cell,
                objects: vec![],
            };
            let refs: Vec<(&[f64], &StateLabel)> = vec![(&b, &label)];
            probe.train_step(&refs, &mut opt);
        }
        let mut worst: f64 = 0.0;
        for cell in 0..25 {
            let mut b = vec![0.0; 25];
            b[cell] = 1.0;
            let label = StateLabel {
                agent: cell,
                objects: vec![],
            };
            worst = worst.max(probe.discovery_loss(&b, &label)[0]);
        }
        assert!(worst < 0.2, "worst loss {worst}");
    }

    #[test]
    fn hidden_unpredictable_state_keeps_loss_at_prior_entropy() {
        // belief carries no information about a uniformly random cell:
        // no amount of training beats ln(m)
        let m = 25;
        let mut probe = Probe::<f64>::new(8, 4, 16, m, 1);
        let mut opt = probe_optimizer(5e-3);
        let mut rng = stream(17, "hidden");
        for _ in 0..500 {
            let cell = rng.gen_range(0..m);
            let b = vec![0.3; 4]; // constant, uninformative
            let label = StateLabel {
                agent: cell,
                objects: vec![],
            };
            let refs: Vec<(&[f64], &StateLabel)> = vec![(&b, &label)];
            probe.train_step(&refs, &mut opt);
        }
        let b = vec![0.3; 4];
        let mut mean = 0.0;
        for cell in 0..m {
            let label = StateLabel {
                agent: cell,
                objects: vec![],
            };
            mean += probe.discovery_loss(&b, &label)[0];
        }
        mean /= m as f64;
        assert!(
            mean >= (m as f64).ln() - 0.05,
            "mean {mean} below ln({m}) - 0.05"
        );
    }

    #[test]
    fn metrics_count_visits_and_first_sight() {
        let (mut world, _) = fixed_world(3);
        let mut metrics = BehaviorMetrics::new(1, 400);
        let mut all_obs = Vec::new();
        // scripted: go up through the doorway into the upper room, then
        // sweep right; this passes the object's room
        let mut script = vec![Action::Up; 6];
        script.extend(vec![Action::Right; 6]);
        script.extend(vec![Action::Left; 12]);
        script.extend(vec![Action::Stay; 376]);
        for a in script {
            let obs = world.step(a).unwrap();
            metrics.update(&obs);
            all_obs.push(obs);
        }
        assert_eq!(metrics.steps_seen, 400);
        // replay equals online
        let replay = BehaviorMetrics::from_trace(1, 400, &all_obs);
        assert_eq!(metrics, replay);
        if metrics.visit_count[0] == 0 {
            assert_eq!(metrics.first_visit_time[0], 400);
        } else {
            assert!(metrics.first_visit_time[0] <= 400);
            assert!(metrics.visit_count[0] <= 400);
        }
    }

    #[test]
    fn unseen_object_caps_first_visit_at_episode_len() {
        let (mut world, _) = fixed_world(4);
        let mut metrics = BehaviorMetrics::new(1, 400);
        for _ in 0..400 {
            let obs = world.step(Action::Stay).unwrap();
            metrics.update(&obs);
        }
        assert_eq!(metrics.visit_count[0], 0);
        assert_eq!(metrics.first_visit_time[0], 400);
        assert_eq!(metrics.objects_seen(), vec![false]);
    }

    #[test]
    fn probe_training_never_touches_other_parameters() {
        // bitwise-stable world model under probe updates is asserted in the
        // acceptance suite; here assert the probe only visits its own heads
        let mut probe = Probe::<f64>::new(9, 8, 8, 16, 1);
        let mut count = 0;
        probe.visit_params(&mut |_, _| count += 1);
        assert_eq!(count, 4); // 2 dense layers x (w, b)
    }
}
