//! Intrinsic reward generators.
//!
//! * NDIGO: difference of two prediction losses for the same future frame,
//!   with and without the latest observation; credited at step `t + H - 1`.
//! * PE: raw one-step prediction error.
//! * PG: prediction error of a periodically-copied stale network minus the
//!   live network's error.
//! * ICM: squared error of a latent forward model, with an inverse-dynamics
//!   loss shaping the shared encoder.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, Observation, NUM_ACTIONS};
use crate::nn::{loss, Adam, Mlp, Parameterized};
use crate::rng::stream;
use crate::scalar::{sc, Scalar};
use crate::world_model::{frame_loss, Encoder, FramePrediction, ModelDims, ModelError, Segment};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewardError {
    #[error("NDIGO horizon {h} needs predictor heads up to {need}, model has {k}")]
    HorizonTooLong { h: usize, need: usize, k: usize },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
}

/// Which intrinsic reward a run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Ndigo,
    Pe,
    Pg,
    Icm,
}

impl RewardKind {
    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Ndigo => "ndigo",
            RewardKind::Pe => "pe",
            RewardKind::Pg => "pg",
            RewardKind::Icm => "icm",
        }
    }
}

fn default_horizon() -> usize {
    1
}

fn default_pg_copy_period() -> usize {
    2
}

/// Reward configuration; `horizon` only matters for NDIGO, `pg_copy_period`
/// only for PG (counted in learner steps, i.e. world-model optimizer
/// updates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub kind: RewardKind,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_pg_copy_period")]
    pub pg_copy_period: usize,
}

impl RewardSpec {
    pub fn ndigo(horizon: usize) -> Self {
        Self {
            kind: RewardKind::Ndigo,
            horizon,
            pg_copy_period: default_pg_copy_period(),
        }
    }

    pub fn simple(kind: RewardKind) -> Self {
        Self {
            kind,
            horizon: default_horizon(),
            pg_copy_period: default_pg_copy_period(),
        }
    }

    /// NDIGO-H needs the long prediction `p_{t+H|t-1}`, i.e. head `H + 1`.
    pub fn validate(&self, k_horizons: usize) -> Result<(), RewardError> {
        if self.horizon == 0 {
            return Err(RewardError::ZeroHorizon);
        }
        if self.kind == RewardKind::Ndigo && self.horizon + 1 > k_horizons {
            return Err(RewardError::HorizonTooLong {
                h: self.horizon,
                need: self.horizon + 1,
                k: k_horizons,
            });
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self.kind {
            RewardKind::Ndigo => format!("ndigo-{}", self.horizon),
            k => k.name().to_string(),
        }
    }
}

/// `r_{t+H-1} = L(o_{t+H}, p_{t+H|t-1}) - L(o_{t+H}, p_{t+H|t})`: positive
/// when the latest observation improved the prediction of the future frame.
pub fn ndigo_reward<S: Scalar>(loss_long: S, loss_short: S) -> S {
    loss_long - loss_short
}

/// `r_t = L(p_{t+1|t}, o_{t+1})`: the raw prediction error.
pub fn pe_reward<S: Scalar>(pred_1step: &FramePrediction<S>, obs_next: &Observation) -> S {
    frame_loss(pred_1step, obs_next)
}

/// `r_t = L(target) - L(live)`; zero before the first target copy exists.
pub fn pg_reward<S: Scalar>(
    target_pred: Option<&FramePrediction<S>>,
    live_pred: &FramePrediction<S>,
    obs_next: &Observation,
) -> S {
    match target_pred {
        None => S::zero(),
        Some(t) => frame_loss(t, obs_next) - frame_loss(live_pred, obs_next),
    }
}

/// Inverse and forward latent models sharing the world-model encoder: the
/// inverse loss shapes the encoder toward action-relevant features, the
/// forward error is the intrinsic reward.
#[derive(Debug, Clone)]
pub struct IcmModel<S> {
    pub dims: ModelDims,
    pub encoder: Encoder<S>,
    /// `(b_t, z_{t+1}) -> action logits`
    pub inverse: Mlp<S>,
    /// `(b_t, one-hot a_t) -> predicted b_{t+1}`
    pub forward: Mlp<S>,
}

/// Per-update ICM losses (pre-update values).
#[derive(Debug, Clone, Copy)]
pub struct IcmStats<S> {
    pub inverse_mean: S,
    pub forward_mean: S,
}

impl<S: Scalar> IcmModel<S> {
    pub fn new(seed: u64, dims: ModelDims) -> Self {
        let mut rng = stream(seed, "icm");
        let encoder = Encoder::new(&mut rng, &dims);
        let inverse = Mlp::new(
            &mut rng,
            dims.gru_units + dims.fc_units,
            dims.icm_hidden,
            NUM_ACTIONS,
        );
        let forward = Mlp::new(
            &mut rng,
            dims.gru_units + NUM_ACTIONS,
            dims.icm_hidden,
            dims.gru_units,
        );
        Self {
            dims,
            encoder,
            inverse,
            forward,
        }
    }

    /// Belief from the first observation (null hidden state, fixed action).
    pub fn initial_belief(&self, obs0: &Observation) -> Vec<S> {
        let zero = vec![S::zero(); self.dims.gru_units];
        self.encoder.step_raw(&zero, obs0, Action::Stay, None, None)
    }

    pub fn encode_step(&self, prev_b: &[S], obs: &Observation, prev_action: Action) -> Vec<S> {
        self.encoder.step_raw(prev_b, obs, prev_action, None, None)
    }

    /// Predicted next belief from `(b_t, a_t)`.
    pub fn predict_next_belief(&self, b: &[S], action: Action) -> Vec<S> {
        let mut x = Vec::with_capacity(b.len() + NUM_ACTIONS);
        x.extend_from_slice(b);
        x.extend_from_slice(&action.one_hot::<S>());
        let (_, out) = self.forward.forward(&x);
        out
    }

    /// One optimizer step: inverse cross entropy (gradients reach the
    /// encoder through both `b_t` and `z_{t+1}`) plus forward regression
    /// (gradients stay inside the forward net).
    pub fn train_step(
        &mut self,
        batch: &[Segment<S>],
        opt: &mut Adam<S>,
    ) -> Result<IcmStats<S>, ModelError> {
        let stats = self.batch_backward(batch)?;
        opt.step(self);
        Ok(stats)
    }

    /// Accumulate gradients without stepping; returns pre-update losses.
    pub fn batch_backward(&mut self, batch: &[Segment<S>]) -> Result<IcmStats<S>, ModelError> {
        if batch.is_empty() || batch.iter().all(|s| s.actions.is_empty()) {
            return Err(ModelError::EmptyBatch);
        }
        let n_terms: usize = batch.iter().map(|s| s.actions.len()).sum();
        let scale = S::one() / S::from_usize(n_terms).unwrap();
        let mut inverse_sum = S::zero();
        let mut forward_sum = S::zero();
        let hid = self.dims.gru_units;
        for seg in batch {
            let mut caches = Vec::new();
            let beliefs = self.encoder.roll(seg, Some(&mut caches));
            let steps = seg.obs.len();
            let mut d_beliefs = vec![vec![S::zero(); hid]; steps + 1];
            let mut dz_extra = vec![vec![S::zero(); self.dims.fc_units]; steps];
            for i in 0..seg.actions.len() {
                // inverse: predict a_i from (b after obs[i], z of obs[i+1])
                let b_t = &beliefs[i + 1];
                let z_next = &caches[i + 1].0.fc_out;
                let mut x = Vec::with_capacity(hid + self.dims.fc_units);
                x.extend_from_slice(b_t);
                x.extend_from_slice(z_next);
                let (hidden, logits) = self.inverse.forward(&x);
                let mut dlogits = vec![S::zero(); NUM_ACTIONS];
                let l =
                    loss::softmax_xent(&logits, seg.actions[i].index(), &mut dlogits);
                inverse_sum += l;
                for d in dlogits.iter_mut() {
                    *d *= scale;
                }
                let mut dx = vec![S::zero(); x.len()];
                self.inverse.backward(&x, &hidden, &dlogits, Some(&mut dx));
                for (db, dv) in d_beliefs[i + 1].iter_mut().zip(&dx[..hid]) {
                    *db += *dv;
                }
                for (dz, dv) in dz_extra[i + 1].iter_mut().zip(&dx[hid..]) {
                    *dz += *dv;
                }
                // forward: regress b_{t+1} from (b_t, a_t); encoder detached
                let mut fx = Vec::with_capacity(hid + NUM_ACTIONS);
                fx.extend_from_slice(b_t);
                fx.extend_from_slice(&seg.actions[i].one_hot::<S>());
                let (fhidden, fout) = self.forward.forward(&fx);
                let mut dfout = vec![S::zero(); hid];
                let fl = loss::l2(&fout, &beliefs[i + 2], &mut dfout);
                forward_sum += fl;
                for d in dfout.iter_mut() {
                    *d *= scale;
                }
                self.forward.backward(&fx, &fhidden, &dfout, None);
            }
            // backpropagation through time for the inverse-loss gradients
            let mut carry = vec![S::zero(); hid];
            for i in (0..steps).rev() {
                let mut dh = d_beliefs[i + 1].clone();
                for (a, c) in dh.iter_mut().zip(&carry) {
                    *a += *c;
                }
                let (fc, gc) = &caches[i];
                let mut dx = vec![S::zero(); self.dims.fc_units + NUM_ACTIONS];
                let mut dh_prev = vec![S::zero(); hid];
                self.encoder.gru.backward(gc, &dh, &mut dx, &mut dh_prev);
                let mut dz = dx[..self.dims.fc_units].to_vec();
                for (a, b) in dz.iter_mut().zip(&dz_extra[i]) {
                    *a += *b;
                }
                self.encoder.features_backward(fc, &mut dz);
                carry = dh_prev;
            }
        }
        let n = S::from_usize(n_terms).unwrap();
        Ok(IcmStats {
            inverse_mean: inverse_sum / n,
            forward_mean: forward_sum / n,
        })
    }

    /// Mean losses only (for finite-difference checks and logging).
    pub fn batch_loss(&self, batch: &[Segment<S>]) -> Result<(S, S), ModelError> {
        if batch.is_empty() || batch.iter().all(|s| s.actions.is_empty()) {
            return Err(ModelError::EmptyBatch);
        }
        let hid = self.dims.gru_units;
        let mut inverse_sum = S::zero();
        let mut forward_sum = S::zero();
        let mut n_terms = 0usize;
        for seg in batch {
            let mut caches = Vec::new();
            let beliefs = self.encoder.roll(seg, Some(&mut caches));
            for i in 0..seg.actions.len() {
                let b_t = &beliefs[i + 1];
                let z_next = &caches[i + 1].0.fc_out;
                let mut x = Vec::with_capacity(hid + self.dims.fc_units);
                x.extend_from_slice(b_t);
                x.extend_from_slice(z_next);
                let (_, logits) = self.inverse.forward(&x);
                let mut scratch = vec![S::zero(); NUM_ACTIONS];
                inverse_sum += loss::softmax_xent(&logits, seg.actions[i].index(), &mut scratch);
                let mut fx = Vec::with_capacity(hid + NUM_ACTIONS);
                fx.extend_from_slice(b_t);
                fx.extend_from_slice(&seg.actions[i].one_hot::<S>());
                let (_, fout) = self.forward.forward(&fx);
                let mut dump = vec![S::zero(); hid];
                forward_sum += loss::l2(&fout, &beliefs[i + 2], &mut dump);
                n_terms += 1;
            }
        }
        let n = S::from_usize(n_terms).unwrap();
        Ok((inverse_sum / n, forward_sum / n))
    }
}

/// `r_t = || f_forward(b_t, a_t) - b_{t+1} ||^2`.
pub fn icm_reward<S: Scalar>(icm: &IcmModel<S>, b_t: &[S], action: Action, b_next: &[S]) -> S {
    let pred = icm.predict_next_belief(b_t, action);
    let mut dump = vec![S::zero(); pred.len()];
    loss::l2(&pred, b_next, &mut dump)
}

impl<S: Scalar> Parameterized<S> for IcmModel<S> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [S], &mut [S])) {
        self.encoder.visit_params(f);
        self.inverse.visit_params(f);
        self.forward.visit_params(f);
    }
}

/// Bound on |NDIGO reward| implied by the probability floor: both losses
/// lie in [0, -ln(floor) * terms], and the log-ratio of a single frame's
/// probabilities cannot exceed -ln(floor) per factor.
pub fn ndigo_reward_bound<S: Scalar>(num_factors: usize) -> S {
    sc::<S>(num_factors as f64) * -sc::<S>(loss::PROB_FLOOR).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, GridWorld, ObjectConfig, ObjectKind, RoomChoice};
    use crate::world_model::WorldModel;

    #[test]
    fn ndigo_reward_is_the_loss_difference() {
        assert_eq!(ndigo_reward(2.0, 2.0), 0.0);
        // p_short = 0.8, p_long = 0.4 -> ln 2
        let r: f64 = ndigo_reward(-(0.4f64.ln()), -(0.8f64.ln()));
        assert!((r - 2.0f64.ln()).abs() < 1e-12);
        // antisymmetry
        assert_eq!(ndigo_reward(1.5, 0.25), -ndigo_reward(0.25, 1.5));
    }

    #[test]
    fn pe_reward_on_uniform_is_ln_26() {
        let cfg = EnvConfig {
            layout: "five_rooms".into(),
            objects: vec![ObjectConfig {
                kind: ObjectKind::Fixed,
                room: RoomChoice::One("upper".into()),
            }],
            episode_len: 4,
        };
        let (_, obs) = GridWorld::reset(&cfg, 1).unwrap();
        let mut pred = FramePrediction::<f64>::uniform(1);
        for (i, w) in pred.wall_p.iter_mut().enumerate() {
            *w = if obs.channel(0)[i] == 1 { 1.0 - 1e-9 } else { 1e-9 };
        }
        let r = pe_reward(&pred, &obs);
        assert!((r - 26.0f64.ln()).abs() < 1e-6);
        assert!(r >= 0.0);
    }

    #[test]
    fn pg_reward_handles_missing_target() {
        let cfg = EnvConfig {
            layout: "five_rooms".into(),
            objects: vec![],
            episode_len: 4,
        };
        let (_, obs) = GridWorld::reset(&cfg, 1).unwrap();
        let live = FramePrediction::<f64>::uniform(0);
        assert_eq!(pg_reward(None, &live, &obs), 0.0);
        assert_eq!(pg_reward(Some(&live), &live, &obs), 0.0);
    }

    #[test]
    fn icm_reward_is_squared_distance() {
        let mut icm = IcmModel::<f64>::new(5, ModelDims::tiny(2, 4));
        // force the forward net to output zero
        icm.forward.visit_params(&mut |p, _| p.iter_mut().for_each(|v| *v = 0.0));
        let b = vec![0.0; icm.dims.gru_units];
        let mut b_next = vec![0.0; icm.dims.gru_units];
        b_next[0] = 3.0;
        b_next[1] = 4.0;
        let r = icm_reward(&icm, &b, Action::Stay, &b_next);
        assert_eq!(r, 25.0);
        assert_eq!(icm_reward(&icm, &b, Action::Stay, &vec![0.0; icm.dims.gru_units]), 0.0);
    }

    #[test]
    fn reward_spec_validates_horizon_headroom() {
        assert!(RewardSpec::ndigo(4).validate(10).is_ok());
        assert!(matches!(
            RewardSpec::ndigo(10).validate(10),
            Err(RewardError::HorizonTooLong { need: 11, .. })
        ));
        assert!(RewardSpec::simple(RewardKind::Pe).validate(1).is_ok());
    }

    fn icm_segment(len: usize) -> Segment<f64> {
        let cfg = EnvConfig {
            layout: "five_rooms".into(),
            objects: vec![ObjectConfig {
                kind: ObjectKind::Fixed,
                room: RoomChoice::One("upper".into()),
            }],
            episode_len: 400,
        };
        let (mut world, obs0) = GridWorld::reset(&cfg, 11).unwrap();
        let mut obs = vec![obs0];
        let mut actions = Vec::new();
        for k in 0..len {
            let a = Action::from_index((k * 2 + 1) % 5);
            obs.push(world.step(a).unwrap());
            actions.push(a);
        }
        Segment {
            obs,
            actions,
            prev_action: WorldModel::<f64>::INITIAL_ACTION,
            b_prev: vec![0.0; ModelDims::tiny(2, 4).gru_units],
            start_t: 0,
        }
    }

    #[test]
    fn icm_zero_learning_rate_is_identity() {
        let mut icm = IcmModel::<f64>::new(3, ModelDims::tiny(2, 4));
        let before = icm.params_flat();
        let mut opt = Adam::new(0.0);
        icm.train_step(&[icm_segment(6)], &mut opt).unwrap();
        assert_eq!(before, icm.params_flat());
    }

    #[test]
    fn icm_forward_gradients_do_not_touch_the_encoder() {
        // two models that differ only in the forward net produce identical
        // encoder gradients: the forward loss has no path into the encoder
        let seg = icm_segment(6);
        let mut icm_a = IcmModel::<f64>::new(3, ModelDims::tiny(2, 4));
        let mut icm_b = icm_a.clone();
        icm_b
            .forward
            .visit_params(&mut |p, _| p.iter_mut().for_each(|v| *v *= -2.0));
        icm_a.batch_backward(&[seg.clone()]).unwrap();
        icm_b.batch_backward(&[seg]).unwrap();
        assert_eq!(icm_a.encoder.grads_flat(), icm_b.encoder.grads_flat());
        // while the forward nets' own gradients differ
        assert_ne!(icm_a.forward.grads_flat(), icm_b.forward.grads_flat());
    }

    #[test]
    fn icm_converges_on_a_deterministic_toy() {
        // the same short trajectory repeated: inverse loss and forward
        // reward both collapse
        let mut icm = IcmModel::<f64>::new(9, ModelDims::tiny(2, 4));
        let seg = icm_segment(6);
        let mut opt = Adam::new(2e-3);
        for _ in 0..1500 {
            icm.train_step(&[seg.clone()], &mut opt).unwrap();
        }
        let (inv, fwd) = icm.batch_loss(&[seg.clone()]).unwrap();
        assert!(inv < 0.1, "inverse loss {inv}");
        assert!(fwd < 1e-3, "forward loss {fwd}");
        // and the reward at a converged transition is small
        let b0 = icm.initial_belief(&seg.obs[0]);
        let b1 = icm.encode_step(&b0, &seg.obs[1], seg.actions[0]);
        let r = icm_reward(&icm, &b0, seg.actions[0], &b1);
        assert!(r < 1e-3, "reward {r}");
    }
}
