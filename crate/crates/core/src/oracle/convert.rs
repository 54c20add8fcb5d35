//! Gridworld-to-tabular conversion: enumerate (agent position x object
//! states) into an exact [`TabularPomdp`], so tiny gridworld configurations
//! get ground-truth predictions and information gains.

use std::collections::HashMap;

use super::{OracleError, SparseRow, TabularPomdp};
use crate::env::{
    layout::Cell, observe_cells, Action, EnvConfig, Layout, ObjectKind, Observation, RoomChoice,
    StateLabel, NUM_ACTIONS,
};
use crate::scalar::{sc, Scalar};

/// Enumeration guard: conversions beyond this state count are refused.
pub const STATE_CAP: usize = 10_000;

/// Bouncing-object velocities, in the same order the environment samples.
const VELOCITIES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, 1), (0, -1)];

/// Result of a conversion: the POMDP plus decode tables for observations
/// and ground-truth labels.
#[derive(Debug, Clone)]
pub struct GridTabular<S> {
    pub pomdp: TabularPomdp<S>,
    /// Observation index -> the concrete local view.
    pub observations: Vec<Observation>,
    /// State index -> ground-truth label.
    pub state_labels: Vec<StateLabel>,
}

struct ObjectSpace {
    kind: ObjectKind,
    room_cells: Vec<Cell>,
    /// position-major; bouncing objects add a velocity factor
    n_variants: usize,
}

impl ObjectSpace {
    fn decode(&self, sub: usize) -> (Cell, Option<(isize, isize)>) {
        match self.kind {
            ObjectKind::Bouncing => {
                let pos = self.room_cells[sub / 4];
                (pos, Some(VELOCITIES[sub % 4]))
            }
            _ => (self.room_cells[sub], None),
        }
    }

    fn encode(&self, pos: Cell, vel: Option<(isize, isize)>) -> usize {
        let pi = self
            .room_cells
            .iter()
            .position(|c| *c == pos)
            .expect("object cell inside its room");
        match self.kind {
            ObjectKind::Bouncing => {
                let vi = VELOCITIES
                    .iter()
                    .position(|v| Some(*v) == vel)
                    .expect("bouncing velocity");
                pi * 4 + vi
            }
            _ => pi,
        }
    }

    /// Outcome distribution of this object's own dynamics, given the
    /// agent's attempted destination.
    fn outcomes(&self, sub: usize, agent_desired: Option<Cell>) -> Vec<(usize, f64)> {
        let (pos, vel) = self.decode(sub);
        let in_room = |c: Cell| self.room_cells.contains(&c);
        match self.kind {
            ObjectKind::Fixed => vec![(sub, 1.0)],
            ObjectKind::Movable => {
                if agent_desired == Some(pos) {
                    let p = 1.0 / self.room_cells.len() as f64;
                    (0..self.room_cells.len()).map(|i| (i, p)).collect()
                } else {
                    vec![(sub, 1.0)]
                }
            }
            ObjectKind::WhiteNoise => {
                let p = 1.0 / self.room_cells.len() as f64;
                (0..self.room_cells.len()).map(|i| (i, p)).collect()
            }
            ObjectKind::Brownian => {
                let mut acc: HashMap<usize, f64> = HashMap::new();
                for (dr, dc) in VELOCITIES {
                    let next = pos.offset(dr, dc).filter(|c| in_room(*c)).unwrap_or(pos);
                    *acc.entry(self.encode(next, None)).or_insert(0.0) += 0.25;
                }
                let mut v: Vec<(usize, f64)> = acc.into_iter().collect();
                v.sort_unstable_by_key(|(i, _)| *i);
                v
            }
            ObjectKind::Bouncing => {
                let (dr, dc) = vel.expect("bouncing velocity");
                let next = match pos.offset(dr, dc).filter(|c| in_room(*c)) {
                    Some(c) => self.encode(c, Some((dr, dc))),
                    None => match pos.offset(-dr, -dc).filter(|c| in_room(*c)) {
                        Some(c) => self.encode(c, Some((-dr, -dc))),
                        None => self.encode(pos, Some((-dr, -dc))),
                    },
                };
                vec![(next, 1.0)]
            }
        }
    }
}

/// Convert an environment configuration into an exact tabular POMDP. Every
/// object must name a single home room (per-episode room choices have no
/// tabular counterpart).
pub fn gridworld_to_tabular<S: Scalar>(config: &EnvConfig) -> Result<GridTabular<S>, OracleError> {
    let layout =
        Layout::by_name(&config.layout).map_err(|e| OracleError::DimMismatch(e.to_string()))?;
    let mut floor: Vec<Cell> = Vec::new();
    for r in 0..layout.height {
        for c in 0..layout.width {
            let cell = Cell::new(r, c);
            if !layout.is_wall(cell) {
                floor.push(cell);
            }
        }
    }
    let mut objects = Vec::new();
    for oc in &config.objects {
        let label = match &oc.room {
            RoomChoice::One(label) => label,
            RoomChoice::AnyOf(_) => {
                return Err(OracleError::DimMismatch(
                    "per-episode room choices are not convertible".into(),
                ))
            }
        };
        let room = layout
            .room_index(label)
            .map_err(|e| OracleError::DimMismatch(e.to_string()))?;
        let room_cells = layout.room(room).cells.clone();
        let n_variants = match oc.kind {
            ObjectKind::Bouncing => room_cells.len() * 4,
            _ => room_cells.len(),
        };
        objects.push(ObjectSpace {
            kind: oc.kind,
            room_cells,
            n_variants,
        });
    }
    let mut n_states = floor.len();
    for o in &objects {
        n_states = n_states.saturating_mul(o.n_variants);
    }
    if n_states > STATE_CAP {
        return Err(OracleError::StateSpaceTooLarge {
            n: n_states,
            cap: STATE_CAP,
        });
    }

    let decode = |mut s: usize| -> (usize, Vec<usize>) {
        let mut subs = vec![0usize; objects.len()];
        for (i, o) in objects.iter().enumerate().rev() {
            subs[i] = s % o.n_variants;
            s /= o.n_variants;
        }
        (s, subs)
    };
    let encode = |agent_i: usize, subs: &[usize]| -> usize {
        let mut s = agent_i;
        for (i, o) in objects.iter().enumerate() {
            s = s * o.n_variants + subs[i];
        }
        s
    };

    // observations and labels per state
    let mut obs_intern: HashMap<Vec<u8>, u32> = HashMap::new();
    let mut observations: Vec<Observation> = Vec::new();
    let mut state_obs = vec![0u32; n_states];
    let mut state_labels = Vec::with_capacity(n_states);
    let channels = 1 + objects.len();
    for s in 0..n_states {
        let (agent_i, subs) = decode(s);
        let agent = floor[agent_i];
        let placed: Vec<(usize, Cell)> = subs
            .iter()
            .enumerate()
            .map(|(i, sub)| (1 + i, objects[i].decode(*sub).0))
            .collect();
        let obs = observe_cells(&layout, agent, &placed, channels);
        let next_id = observations.len() as u32;
        let id = *obs_intern.entry(obs.data.clone()).or_insert_with(|| {
            observations.push(obs.clone());
            next_id
        });
        state_obs[s] = id;
        state_labels.push(StateLabel {
            agent: agent.idx(layout.width),
            objects: placed.iter().map(|(_, c)| c.idx(layout.width)).collect(),
        });
    }
    let n_obs = observations.len();

    // dynamics: agent moves deterministically, objects independently
    let mut dynamics: Vec<Vec<SparseRow<S>>> = Vec::with_capacity(NUM_ACTIONS);
    for action in Action::ALL {
        let mut rows: Vec<SparseRow<S>> = Vec::with_capacity(n_states);
        for s in 0..n_states {
            let (agent_i, subs) = decode(s);
            let agent = floor[agent_i];
            let (dr, dc) = action.delta();
            let desired = agent.offset(dr, dc).filter(|c| !layout.is_wall(*c));
            let next_agent = desired.unwrap_or(agent);
            let next_agent_i = floor.iter().position(|c| *c == next_agent).unwrap();
            let moved = desired.filter(|c| *c != agent);
            // cartesian product of per-object outcome distributions
            let mut partial: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
            for (i, o) in objects.iter().enumerate() {
                let outs = o.outcomes(subs[i], moved);
                let mut next = Vec::with_capacity(partial.len() * outs.len());
                for (prefix, w) in &partial {
                    for (sub, p) in &outs {
                        let mut pre = prefix.clone();
                        pre.push(*sub);
                        next.push((pre, w * p));
                    }
                }
                partial = next;
            }
            let mut row: SparseRow<S> = partial
                .into_iter()
                .map(|(subs, w)| (encode(next_agent_i, &subs) as u32, sc(w)))
                .collect();
            row.sort_unstable_by_key(|(i, _)| *i);
            rows.push(row);
        }
        dynamics.push(rows);
    }

    // deterministic observation kernel
    let obs_kernel: Vec<SparseRow<S>> = state_obs
        .iter()
        .map(|o| vec![(*o, S::one())])
        .collect();

    // initial distribution: agent at spawn, objects uniform (bouncing also
    // uniform over velocities), matching the environment's reset
    let spawn_i = floor.iter().position(|c| *c == layout.spawn).unwrap();
    let mut init = vec![S::zero(); n_states];
    let mut stack: Vec<(usize, Vec<usize>, f64)> = vec![(0, Vec::new(), 1.0)];
    while let Some((depth, subs, w)) = stack.pop() {
        if depth == objects.len() {
            init[encode(spawn_i, &subs)] = sc(w);
            continue;
        }
        let o = &objects[depth];
        let p = w / o.n_variants as f64;
        for sub in 0..o.n_variants {
            let mut s2 = subs.clone();
            s2.push(sub);
            stack.push((depth + 1, s2, p));
        }
    }

    let pomdp = TabularPomdp::from_sparse(dynamics, obs_kernel, init, n_obs)?;
    Ok(GridTabular {
        pomdp,
        observations,
        state_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{GridWorld, ObjectConfig};

    fn maze_cfg(kind: ObjectKind, room: &str) -> EnvConfig {
        EnvConfig {
            layout: "maze".into(),
            objects: vec![ObjectConfig {
                kind,
                room: RoomChoice::One(room.into()),
            }],
            episode_len: 100_000,
        }
    }

    #[test]
    fn cap_is_enforced() {
        // five_rooms with one white-noise object: 225 * 48 > 10^4
        let cfg = EnvConfig {
            layout: "five_rooms".into(),
            objects: vec![ObjectConfig {
                kind: ObjectKind::WhiteNoise,
                room: RoomChoice::One("lower".into()),
            }],
            episode_len: 400,
        };
        assert!(matches!(
            gridworld_to_tabular::<f64>(&cfg),
            Err(OracleError::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn transition_rows_match_environment_frequencies() {
        let cfg = maze_cfg(ObjectKind::WhiteNoise, "room1");
        let tab = gridworld_to_tabular::<f64>(&cfg).unwrap();
        // stationary agent: the reachable states are the 25 object
        // positions, each visited often enough for frequency checks
        let (mut world, _) = GridWorld::reset(&cfg, 3).unwrap();
        let mut counts: HashMap<(StateLabel, StateLabel), usize> = HashMap::new();
        let mut visits: HashMap<StateLabel, usize> = HashMap::new();
        for _ in 0..30_000 {
            let before = world.true_state();
            world.step(Action::Stay).unwrap();
            *visits.entry(before.clone()).or_insert(0) += 1;
            *counts.entry((before, world.true_state())).or_insert(0) += 1;
        }
        let label_to_state: HashMap<StateLabel, usize> = tab
            .state_labels
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        let mut checked = 0;
        for ((from, to), n) in counts {
            let visits_from = visits[&from];
            let s = label_to_state[&from];
            let t = label_to_state[&to];
            let p_emp = n as f64 / visits_from as f64;
            let row = &tab.pomdp.dynamics[Action::Stay.index()][s];
            let p_tab = row
                .iter()
                .find(|(i, _)| *i as usize == t)
                .map(|(_, p)| *p)
                .unwrap_or(0.0);
            assert!(p_tab > 0.0, "environment produced a zero-probability move");
            // binomial noise: allow 5 sigma
            let sigma = (p_tab * (1.0 - p_tab) / visits_from as f64).sqrt();
            assert!(
                (p_emp - p_tab).abs() < 5.0 * sigma + 1e-9,
                "p_emp {p_emp} vs p_tab {p_tab} ({visits_from} visits)"
            );
            checked += 1;
        }
        assert!(checked > 100, "too few transitions checked: {checked}");
    }

    #[test]
    fn observations_match_environment() {
        let cfg = maze_cfg(ObjectKind::Fixed, "room2");
        let tab = gridworld_to_tabular::<f64>(&cfg).unwrap();
        let (mut world, obs0) = GridWorld::reset(&cfg, 9).unwrap();
        let label_to_state: HashMap<StateLabel, usize> = tab
            .state_labels
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        let mut obs = obs0;
        for k in 0..200 {
            let s = label_to_state[&world.true_state()];
            let (o_id, _) = tab.pomdp.obs_kernel[s][0];
            assert_eq!(tab.observations[o_id as usize], obs);
            obs = world.step(Action::from_index(k % NUM_ACTIONS)).unwrap();
        }
    }
}
