//! Recurrent world model: a convolutional feature net and a gated recurrent
//! cell encode the observation-action history into a belief vector `b_t`,
//! and K predictor heads map `(b_t, action sequence)` to a distribution over
//! the observation k steps ahead.
//!
//! Output distributions: each object channel is a 26-way categorical
//! (25 local cells + "absent"); the wall channel is 25 independent
//! Bernoullis. All probabilities carry a uniform floor so losses and
//! log-ratios stay bounded.

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{Action, Observation, NUM_ACTIONS, VIEW};
use crate::nn::{loss, relu, relu_backward, Adam, Conv2d, Dense, GruCache, GruCell, Mlp, Parameterized};
use crate::rng::stream;
use crate::scalar::Scalar;

/// Number of classes per object channel: the 25 local cells plus "absent".
pub const OBJ_CLASSES: usize = VIEW * VIEW + 1;
/// Index of the "absent" class.
pub const ABSENT: usize = VIEW * VIEW;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("prediction horizon {k} outside 1..={max}")]
    HorizonOutOfRange { k: usize, max: usize },
    #[error("need {k} actions for horizon {k}, got {got}")]
    NotEnoughActions { k: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
}

/// Architecture sizes. The `paper` preset is the published architecture;
/// `tiny` is the desk-scale variant used by fast runs and CI.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelDims {
    pub channels: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub fc_units: usize,
    pub gru_units: usize,
    pub head_hidden: usize,
    pub k_horizons: usize,
    /// Hidden width of the ICM inverse/forward models.
    pub icm_hidden: usize,
    /// Hidden width of the dueling value/advantage heads.
    pub q_hidden: usize,
    /// Hidden width of the glass-box probe.
    pub probe_hidden: usize,
}

impl ModelDims {
    pub fn paper(channels: usize, k_horizons: usize) -> Self {
        Self {
            channels,
            conv1_filters: 16,
            conv2_filters: 16,
            fc_units: 256,
            gru_units: 128,
            head_hidden: 64,
            k_horizons,
            icm_hidden: 256,
            q_hidden: 128,
            probe_hidden: 64,
        }
    }

    pub fn tiny(channels: usize, k_horizons: usize) -> Self {
        Self {
            channels,
            conv1_filters: 4,
            conv2_filters: 4,
            fc_units: 32,
            gru_units: 32,
            head_hidden: 32,
            k_horizons,
            icm_hidden: 32,
            q_hidden: 32,
            probe_hidden: 32,
        }
    }

    pub fn obs_len(&self) -> usize {
        self.channels * VIEW * VIEW
    }

    /// Logit width of one predictor head: walls first, then one categorical
    /// block per object channel.
    pub fn head_out(&self) -> usize {
        VIEW * VIEW + (self.channels - 1) * OBJ_CLASSES
    }
}

/// Belief over the world after consuming the observation at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState<S> {
    pub b: Vec<S>,
    pub t: usize,
}

/// Feature net + recurrent cell.
#[derive(Debug, Clone)]
pub struct Encoder<S> {
    pub conv1: Conv2d<S>,
    pub conv2: Conv2d<S>,
    pub fc: Dense<S>,
    pub gru: GruCell<S>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct FeatCache<S> {
    obs: Vec<S>,
    conv1_out: Vec<S>,
    conv2_out: Vec<S>,
    pub(crate) fc_out: Vec<S>,
}

impl<S: Scalar> Encoder<S> {
    pub fn new(rng: &mut ChaCha8Rng, dims: &ModelDims) -> Self {
        let conv1 = Conv2d::new(rng, dims.channels, dims.conv1_filters, VIEW, VIEW, 3, 1, 1);
        let conv2 = Conv2d::new(
            rng,
            dims.conv1_filters,
            dims.conv2_filters,
            conv1.out_h(),
            conv1.out_w(),
            3,
            2,
            1,
        );
        let fc = Dense::new(rng, conv2.out_len(), dims.fc_units);
        let gru = GruCell::new(rng, dims.fc_units + NUM_ACTIONS, dims.gru_units);
        Self { conv1, conv2, fc, gru }
    }

    pub(crate) fn features(&self, obs: &Observation, cache: Option<&mut FeatCache<S>>) -> Vec<S> {
        let x = obs.to_scalars::<S>();
        let mut c1 = vec![S::zero(); self.conv1.out_len()];
        self.conv1.forward(&x, &mut c1);
        let mut c2 = vec![S::zero(); self.conv2.out_len()];
        self.conv2.forward(&c1, &mut c2);
        let mut z = vec![S::zero(); self.fc.out_dim];
        self.fc.forward(&c2, &mut z);
        relu(&mut z);
        if let Some(c) = cache {
            c.obs = x;
            c.conv1_out = c1;
            c.conv2_out = c2;
            c.fc_out = z.clone();
        }
        z
    }

    pub(crate) fn features_backward(&mut self, cache: &FeatCache<S>, dz: &mut [S]) {
        relu_backward(&cache.fc_out, dz);
        let mut dc2 = vec![S::zero(); self.conv2.out_len()];
        self.fc.backward(&cache.conv2_out, dz, Some(&mut dc2));
        let mut dc1 = vec![S::zero(); self.conv1.out_len()];
        self.conv2.backward(&cache.conv1_out, &dc2, Some(&mut dc1));
        self.conv1.backward(&cache.obs, &dc1, None);
    }

    fn gru_input(&self, z: &[S], prev_action: Action) -> Vec<S> {
        let mut x = Vec::with_capacity(z.len() + NUM_ACTIONS);
        x.extend_from_slice(z);
        x.extend_from_slice(&prev_action.one_hot::<S>());
        x
    }

    /// One recurrence step; caches are filled when provided.
    pub(crate) fn step_raw(
        &self,
        prev_b: &[S],
        obs: &Observation,
        prev_action: Action,
        feat_cache: Option<&mut FeatCache<S>>,
        gru_cache: Option<&mut GruCache<S>>,
    ) -> Vec<S> {
        let z = self.features(obs, feat_cache);
        let x = self.gru_input(&z, prev_action);
        let mut b = vec![S::zero(); self.gru.hidden];
        self.gru.forward(&x, prev_b, &mut b, gru_cache);
        b
    }

    /// Unroll over a segment: returns beliefs (`[0]` is the seed) and, when
    /// requested, per-step caches for backpropagation through time.
    pub(crate) fn roll(
        &self,
        seg: &Segment<S>,
        mut caches: Option<&mut Vec<(FeatCache<S>, GruCache<S>)>>,
    ) -> Vec<Vec<S>> {
        assert_eq!(seg.obs.len(), seg.actions.len() + 1, "segment shape");
        let mut beliefs = Vec::with_capacity(seg.obs.len() + 1);
        beliefs.push(seg.b_prev.clone());
        for (i, obs) in seg.obs.iter().enumerate() {
            let prev_a = if i == 0 { seg.prev_action } else { seg.actions[i - 1] };
            let b = if let Some(caches) = caches.as_deref_mut() {
                let mut fc = FeatCache::default();
                let mut gc = GruCache::default();
                let b = self.step_raw(&beliefs[i], obs, prev_a, Some(&mut fc), Some(&mut gc));
                caches.push((fc, gc));
                b
            } else {
                self.step_raw(&beliefs[i], obs, prev_a, None, None)
            };
            beliefs.push(b);
        }
        beliefs
    }
}

impl<S: Scalar> Parameterized<S> for Encoder<S> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [S], &mut [S])) {
        self.conv1.visit_params(f);
        self.conv2.visit_params(f);
        self.fc.visit_params(f);
        self.gru.visit_params(f);
    }
}

/// One frame-predictor head: an MLP from `(b_t, action one-hots)` to the
/// frame logits.
pub type Head<S> = Mlp<S>;

/// Predicted distribution over one future observation, probabilities
/// already floored.
#[derive(Debug, Clone)]
pub struct FramePrediction<S> {
    /// P(wall = 1) per local cell.
    pub wall_p: Vec<S>,
    /// One 26-way categorical per object channel.
    pub object_p: Vec<Vec<S>>,
}

impl<S: Scalar> FramePrediction<S> {
    /// Joint probability the prediction assigns to an observed frame.
    pub fn prob_of(&self, obs: &Observation) -> S {
        let mut p = S::one();
        for (i, w) in self.wall_p.iter().enumerate() {
            p = p * if obs.channel(0)[i] == 1 { *w } else { S::one() - *w };
        }
        for (j, cat) in self.object_p.iter().enumerate() {
            let class = obs.object_local_cell(j).unwrap_or(ABSENT);
            p = p * cat[class];
        }
        p
    }

    /// Uniform prediction (the zero-weight head output).
    pub fn uniform(num_objects: usize) -> Self {
        let half = loss::floored_sigmoid(S::zero());
        Self {
            wall_p: vec![half; VIEW * VIEW],
            object_p: vec![
                {
                    let logits = vec![S::zero(); OBJ_CLASSES];
                    let mut p = vec![S::zero(); OBJ_CLASSES];
                    loss::floored_softmax(&logits, &mut p);
                    p
                };
                num_objects
            ],
        }
    }
}

/// Cross-entropy loss of a prediction against the realized frame:
/// `-ln p(o)`, summed over the wall Bernoullis and object categoricals.
pub fn frame_loss<S: Scalar>(pred: &FramePrediction<S>, obs: &Observation) -> S {
    let mut total = S::zero();
    for (i, w) in pred.wall_p.iter().enumerate() {
        let q = if obs.channel(0)[i] == 1 { *w } else { S::one() - *w };
        total += -q.ln();
    }
    for (j, cat) in pred.object_p.iter().enumerate() {
        let class = obs.object_local_cell(j).unwrap_or(ABSENT);
        total += loss::xent_from_probs(cat, class);
    }
    total
}

/// A trajectory slice for truncated backpropagation: `obs[i]` is followed by
/// `actions[i]`; `b_prev`/`prev_action` seed the recurrence (zero belief and
/// the fixed initial action at an episode start).
#[derive(Debug, Clone)]
pub struct Segment<S> {
    pub obs: Vec<Observation>,
    pub actions: Vec<Action>,
    pub prev_action: Action,
    pub b_prev: Vec<S>,
    /// Absolute step index of `obs[0]` within its episode (for logging).
    pub start_t: usize,
}

/// Per-(t, k) cross-entropy losses returned by a training step, before the
/// parameter update.
#[derive(Debug, Clone)]
pub struct TrainStats<S> {
    /// `(segment, step offset i, horizon k, loss)`: the loss of predicting
    /// `obs[i + k]` from the belief after `obs[i]`.
    pub losses: Vec<(usize, usize, usize, S)>,
    pub mean: S,
}

/// The full world model.
#[derive(Debug, Clone)]
pub struct WorldModel<S> {
    pub dims: ModelDims,
    pub encoder: Encoder<S>,
    pub heads: Vec<Head<S>>,
}

impl<S: Scalar> WorldModel<S> {
    /// Fixed arbitrary action used to seed the recurrence at episode start.
    pub const INITIAL_ACTION: Action = Action::Stay;

    pub fn new(seed: u64, dims: ModelDims) -> Self {
        let mut rng = stream(seed, "world_model");
        let encoder = Encoder::new(&mut rng, &dims);
        let heads = (1..=dims.k_horizons)
            .map(|k| {
                let in_dim = dims.gru_units + k * NUM_ACTIONS;
                Mlp::new_small_out(&mut rng, in_dim, dims.head_hidden, dims.head_out(), 0.01)
            })
            .collect();
        Self { dims, encoder, heads }
    }

    pub fn k_horizons(&self) -> usize {
        self.dims.k_horizons
    }

    /// Belief dimension.
    pub fn belief_len(&self) -> usize {
        self.dims.gru_units
    }

    fn check_obs(&self, obs: &Observation) -> Result<(), ModelError> {
        if obs.channels != self.dims.channels {
            return Err(ModelError::DimMismatch {
                expected: self.dims.channels,
                got: obs.channels,
            });
        }
        Ok(())
    }

    /// `b_0` from the first observation: null hidden state plus the fixed
    /// initial action.
    pub fn initial_belief(&self, obs0: &Observation) -> Result<BeliefState<S>, ModelError> {
        self.check_obs(obs0)?;
        let zero = vec![S::zero(); self.dims.gru_units];
        let b = self.encode_raw(&zero, obs0, Self::INITIAL_ACTION);
        Ok(BeliefState { b, t: 0 })
    }

    /// `b_t = f(z_t, a_{t-1}, b_{t-1})`; deterministic given parameters.
    pub fn encode_step(
        &self,
        prev: &BeliefState<S>,
        obs: &Observation,
        prev_action: Action,
    ) -> Result<BeliefState<S>, ModelError> {
        self.check_obs(obs)?;
        if prev.b.len() != self.dims.gru_units {
            return Err(ModelError::DimMismatch {
                expected: self.dims.gru_units,
                got: prev.b.len(),
            });
        }
        let b = self.encode_raw(&prev.b, obs, prev_action);
        Ok(BeliefState { b, t: prev.t + 1 })
    }

    fn encode_raw(&self, prev_b: &[S], obs: &Observation, prev_action: Action) -> Vec<S> {
        self.encoder.step_raw(prev_b, obs, prev_action, None, None)
    }

    fn head_input(&self, k: usize, b: &[S], actions: &[Action]) -> Vec<S> {
        let mut input = Vec::with_capacity(self.heads[k - 1].in_dim());
        input.extend_from_slice(b);
        for a in &actions[..k] {
            input.extend_from_slice(&a.one_hot::<S>());
        }
        input
    }

    fn head_logits(&self, k: usize, b: &[S], actions: &[Action]) -> (Vec<S>, Vec<S>) {
        let input = self.head_input(k, b, actions);
        let (hidden, logits) = self.heads[k - 1].forward(&input);
        (logits, hidden)
    }

    fn prediction_from_logits(&self, logits: &[S]) -> FramePrediction<S> {
        let wall_p = logits[..VIEW * VIEW]
            .iter()
            .map(|l| loss::floored_sigmoid(*l))
            .collect();
        let object_p = (0..self.dims.channels - 1)
            .map(|j| {
                let at = VIEW * VIEW + j * OBJ_CLASSES;
                let mut p = vec![S::zero(); OBJ_CLASSES];
                loss::floored_softmax(&logits[at..at + OBJ_CLASSES], &mut p);
                p
            })
            .collect();
        FramePrediction { wall_p, object_p }
    }

    /// Open-loop prediction of the frame `k` steps ahead, from belief `b`
    /// and the next `k` actions. Head `k` consumes exactly `k` actions;
    /// extra trailing actions are ignored.
    pub fn predict(
        &self,
        b: &BeliefState<S>,
        actions: &[Action],
        k: usize,
    ) -> Result<FramePrediction<S>, ModelError> {
        if k == 0 || k > self.dims.k_horizons {
            return Err(ModelError::HorizonOutOfRange {
                k,
                max: self.dims.k_horizons,
            });
        }
        if actions.len() < k {
            return Err(ModelError::NotEnoughActions { k, got: actions.len() });
        }
        if b.b.len() != self.dims.gru_units {
            return Err(ModelError::DimMismatch {
                expected: self.dims.gru_units,
                got: b.b.len(),
            });
        }
        let (logits, _) = self.head_logits(k, &b.b, actions);
        Ok(self.prediction_from_logits(&logits))
    }

    /// Loss and exact logit gradient for one (belief, horizon) pair.
    /// Gradient is scaled by `scale` and accumulated into the head and
    /// `d_belief`.
    fn head_loss_backward(
        &mut self,
        k: usize,
        b: &[S],
        actions: &[Action],
        target: &Observation,
        scale: S,
        d_belief: &mut [S],
    ) -> S {
        let (logits, hidden) = self.head_logits(k, b, actions);
        let mut dlogits = vec![S::zero(); logits.len()];
        let mut total = S::zero();
        for i in 0..VIEW * VIEW {
            let (l, d) = loss::bernoulli_xent(logits[i], target.channel(0)[i] == 1);
            total += l;
            dlogits[i] = d * scale;
        }
        for j in 0..self.dims.channels - 1 {
            let at = VIEW * VIEW + j * OBJ_CLASSES;
            let class = target.object_local_cell(j).unwrap_or(ABSENT);
            let mut d = vec![S::zero(); OBJ_CLASSES];
            total += loss::softmax_xent(&logits[at..at + OBJ_CLASSES], class, &mut d);
            for (i, dv) in d.iter().enumerate() {
                dlogits[at + i] = *dv * scale;
            }
        }
        // backward through the head
        let input = self.head_input(k, b, actions);
        let mut d_input = vec![S::zero(); input.len()];
        self.heads[k - 1].backward(&input, &hidden, &dlogits, Some(&mut d_input));
        for (db, di) in d_belief.iter_mut().zip(&d_input[..self.dims.gru_units]) {
            *db += *di;
        }
        total
    }

    /// Mean prediction loss of a batch, no gradients. Used by tests and by
    /// finite-difference checks.
    pub fn batch_loss(&self, batch: &[Segment<S>]) -> Result<S, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let mut total = S::zero();
        let mut count = 0usize;
        for seg in batch {
            let beliefs = self.roll_beliefs(seg, None)?;
            let horizon = seg.actions.len();
            for i in 0..=horizon {
                for k in 1..=self.dims.k_horizons.min(horizon.saturating_sub(i)) {
                    let (logits, _) = self.head_logits(k, &beliefs[i + 1], &seg.actions[i..]);
                    let pred = self.prediction_from_logits(&logits);
                    total += frame_loss(&pred, &seg.obs[i + k]);
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(ModelError::EmptyBatch);
        }
        Ok(total / S::from_usize(count).unwrap())
    }

    /// Unroll the recurrence over a segment. `beliefs[0]` is the seed,
    /// `beliefs[i + 1]` the belief after `obs[i]`.
    fn roll_beliefs(
        &self,
        seg: &Segment<S>,
        caches: Option<&mut Vec<(FeatCache<S>, GruCache<S>)>>,
    ) -> Result<Vec<Vec<S>>, ModelError> {
        if seg.obs.len() != seg.actions.len() + 1 {
            return Err(ModelError::DimMismatch {
                expected: seg.actions.len() + 1,
                got: seg.obs.len(),
            });
        }
        for obs in &seg.obs {
            self.check_obs(obs)?;
        }
        Ok(self.encoder.roll(seg, caches))
    }

    /// Accumulate gradients of the mean prediction loss over the batch and
    /// return the individual pre-update losses.
    pub fn batch_backward(&mut self, batch: &[Segment<S>]) -> Result<TrainStats<S>, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        // count loss terms first so each gradient carries 1/N
        let mut n_terms = 0usize;
        for seg in batch {
            let horizon = seg.actions.len();
            for i in 0..=horizon {
                n_terms += self.dims.k_horizons.min(horizon.saturating_sub(i));
            }
        }
        if n_terms == 0 {
            return Err(ModelError::EmptyBatch);
        }
        let scale = S::one() / S::from_usize(n_terms).unwrap();
        let mut losses = Vec::with_capacity(n_terms);
        let mut total = S::zero();
        for (si, seg) in batch.iter().enumerate() {
            let mut caches = Vec::new();
            let beliefs = self.roll_beliefs(seg, Some(&mut caches))?;
            let steps = seg.obs.len();
            let horizon = seg.actions.len();
            let mut d_beliefs = vec![vec![S::zero(); self.dims.gru_units]; steps + 1];
            for i in 0..=horizon {
                for k in 1..=self.dims.k_horizons.min(horizon - i) {
                    let l = self.head_loss_backward(
                        k,
                        &beliefs[i + 1],
                        &seg.actions[i..],
                        &seg.obs[i + k],
                        scale,
                        &mut d_beliefs[i + 1],
                    );
                    losses.push((si, i, k, l));
                    total += l;
                }
            }
            // backpropagation through time
            let mut carry = vec![S::zero(); self.dims.gru_units];
            for i in (0..steps).rev() {
                let mut dh = d_beliefs[i + 1].clone();
                for (a, c) in dh.iter_mut().zip(&carry) {
                    *a += *c;
                }
                let (fc, gc) = &caches[i];
                let mut dx = vec![S::zero(); self.dims.fc_units + NUM_ACTIONS];
                let mut dh_prev = vec![S::zero(); self.dims.gru_units];
                self.encoder.gru.backward(gc, &dh, &mut dx, &mut dh_prev);
                let mut dz = dx[..self.dims.fc_units].to_vec();
                self.encoder.features_backward(fc, &mut dz);
                carry = dh_prev;
            }
        }
        Ok(TrainStats {
            losses,
            mean: total / S::from_usize(n_terms).unwrap(),
        })
    }

    /// One optimizer step on the batch; returns the pre-update losses.
    pub fn train_step(
        &mut self,
        batch: &[Segment<S>],
        opt: &mut Adam<S>,
    ) -> Result<TrainStats<S>, ModelError> {
        let stats = self.batch_backward(batch)?;
        opt.step(self);
        Ok(stats)
    }
}

impl<S: Scalar> Parameterized<S> for WorldModel<S> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [S], &mut [S])) {
        self.encoder.visit_params(f);
        for head in &mut self.heads {
            head.visit_params(f);
        }
    }
}
