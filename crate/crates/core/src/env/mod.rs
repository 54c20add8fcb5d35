//! Deterministic, seedable local-view gridworlds.
//!
//! The agent sees a 5x5 window of binary channels: channel 0 marks walls
//! (cells beyond the grid read as wall), and each object owns one channel
//! that is either all-zero (not in view) or one-hot. Objects live in rooms
//! and never leave the room they started in.

pub mod layout;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use layout::{Cell, Layout, RoomDef};

use crate::rng::stream;
use crate::scalar::{sc, Scalar};

/// Side of the square local view.
pub const VIEW: usize = 5;
/// Number of discrete actions.
pub const NUM_ACTIONS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("unknown layout `{0}`")]
    UnknownLayout(String),
    #[error("unknown room label `{0}`")]
    UnknownRoom(String),
    #[error("more than one object in room `{0}`")]
    RoomConflict(String),
    #[error("step called after episode end (t = {0})")]
    Terminated(usize),
    #[error("layout parse error: {0}")]
    LayoutParse(String),
}

/// Agent actions, in the fixed order used by the one-hot encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Stay = 0,
    Up = 1,
    Down = 2,
    Right = 3,
    Left = 4,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Stay,
        Action::Up,
        Action::Down,
        Action::Right,
        Action::Left,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Self::ALL[i]
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::Stay => (0, 0),
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Right => (0, 1),
            Action::Left => (0, -1),
        }
    }

    /// One-hot encoding, length [`NUM_ACTIONS`].
    pub fn one_hot<S: Scalar>(self) -> [S; NUM_ACTIONS] {
        let mut v = [S::zero(); NUM_ACTIONS];
        v[self.index()] = S::one();
        v
    }
}

/// The five object behaviours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Fixed,
    Bouncing,
    Brownian,
    WhiteNoise,
    Movable,
}

impl ObjectKind {
    pub fn symbol(self) -> char {
        match self {
            ObjectKind::Fixed => 'F',
            ObjectKind::Bouncing => 'B',
            ObjectKind::Brownian => 'R',
            ObjectKind::WhiteNoise => 'W',
            ObjectKind::Movable => 'M',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Fixed => "fixed",
            ObjectKind::Bouncing => "bouncing",
            ObjectKind::Brownian => "brownian",
            ObjectKind::WhiteNoise => "white_noise",
            ObjectKind::Movable => "movable",
        }
    }
}

/// One live object: behaviour, home room, current position, and the
/// observation channel it draws into.
#[derive(Debug, Clone)]
pub struct ObjectSpec {
    pub kind: ObjectKind,
    pub home_room: usize,
    pub pos: Cell,
    /// Axis-aligned unit direction; bouncing objects only.
    pub vel: Option<(isize, isize)>,
    pub channel: usize,
}

/// Where an object may start: one fixed room, or a uniform choice drawn at
/// every reset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoomChoice {
    One(String),
    AnyOf(Vec<String>),
}

/// Roster entry in an environment config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectConfig {
    pub kind: ObjectKind,
    pub room: RoomChoice,
}

fn default_episode_len() -> usize {
    400
}

/// Environment description: layout name, object roster, episode length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    pub layout: String,
    #[serde(default)]
    pub objects: Vec<ObjectConfig>,
    #[serde(default = "default_episode_len")]
    pub episode_len: usize,
}

/// The binary observation stack, shape `(VIEW, VIEW, channels)` stored
/// channel-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Observation {
    pub fn channel(&self, c: usize) -> &[u8] {
        &self.data[c * VIEW * VIEW..(c + 1) * VIEW * VIEW]
    }

    /// Index of the set pixel in an object channel, if the object is in view.
    pub fn object_local_cell(&self, object: usize) -> Option<usize> {
        self.channel(1 + object).iter().position(|v| *v == 1)
    }

    /// Cast to scalars for network input.
    pub fn to_scalars<S: Scalar>(&self) -> Vec<S> {
        self.data.iter().map(|v| sc(f64::from(*v))).collect()
    }
}

/// Ground-truth state used only by evaluation and the oracle: global cell
/// indices of the agent and each object.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateLabel {
    pub agent: usize,
    pub objects: Vec<usize>,
}

/// A running episode.
#[derive(Debug, Clone)]
pub struct GridWorld {
    pub layout: Arc<Layout>,
    pub objects: Vec<ObjectSpec>,
    pub agent: Cell,
    pub t: usize,
    pub episode_len: usize,
    rng: ChaCha8Rng,
}

impl GridWorld {
    /// Start an episode: agent at spawn, objects placed uniformly in their
    /// home rooms. Identical `(config, seed)` pairs give bit-identical
    /// episodes.
    pub fn reset(config: &EnvConfig, seed: u64) -> Result<(GridWorld, Observation), EnvError> {
        let layout = Arc::new(Layout::by_name(&config.layout)?);
        let mut rng = stream(seed, "env");
        let mut objects = Vec::with_capacity(config.objects.len());
        let mut taken_rooms: Vec<usize> = Vec::new();
        for (i, oc) in config.objects.iter().enumerate() {
            let room_label = match &oc.room {
                RoomChoice::One(label) => label.clone(),
                RoomChoice::AnyOf(labels) => {
                    let pick = rng.gen_range(0..labels.len());
                    labels[pick].clone()
                }
            };
            let room = layout.room_index(&room_label)?;
            if taken_rooms.contains(&room) {
                return Err(EnvError::RoomConflict(room_label));
            }
            taken_rooms.push(room);
            let cells = &layout.room(room).cells;
            let pos = cells[rng.gen_range(0..cells.len())];
            let vel = match oc.kind {
                ObjectKind::Bouncing => {
                    let dirs = [(-1isize, 0isize), (1, 0), (0, 1), (0, -1)];
                    Some(dirs[rng.gen_range(0..4)])
                }
                _ => None,
            };
            objects.push(ObjectSpec {
                kind: oc.kind,
                home_room: room,
                pos,
                vel,
                channel: 1 + i,
            });
        }
        let world = GridWorld {
            agent: layout.spawn,
            layout,
            objects,
            t: 0,
            episode_len: config.episode_len,
            rng,
        };
        let obs = world.observe();
        Ok((world, obs))
    }

    pub fn terminated(&self) -> bool {
        self.t >= self.episode_len
    }

    /// Advance one step: agent first (walls block), then object dynamics in
    /// roster order.
    pub fn step(&mut self, action: Action) -> Result<Observation, EnvError> {
        if self.terminated() {
            return Err(EnvError::Terminated(self.t));
        }
        let (dr, dc) = action.delta();
        let desired = self
            .agent
            .offset(dr, dc)
            .filter(|c| !self.layout.is_wall(*c));
        if let Some(dest) = desired {
            if dest != self.agent {
                // displace any movable object on the target cell
                for i in 0..self.objects.len() {
                    if self.objects[i].kind == ObjectKind::Movable && self.objects[i].pos == dest {
                        let cells = &self.layout.room(self.objects[i].home_room).cells;
                        let pick = self.rng.gen_range(0..cells.len());
                        self.objects[i].pos = cells[pick];
                    }
                }
            }
            self.agent = dest;
        }
        for i in 0..self.objects.len() {
            self.move_object(i);
        }
        self.t += 1;
        Ok(self.observe())
    }

    fn move_object(&mut self, i: usize) {
        let room_cells = self.layout.room(self.objects[i].home_room).cells.clone();
        let in_room = |c: Cell| room_cells.contains(&c);
        match self.objects[i].kind {
            ObjectKind::Fixed | ObjectKind::Movable => {}
            ObjectKind::Bouncing => {
                let (dr, dc) = self.objects[i].vel.expect("bouncing object has velocity");
                let ahead = self.objects[i].pos.offset(dr, dc).filter(|c| in_room(*c));
                match ahead {
                    Some(c) => self.objects[i].pos = c,
                    None => {
                        // reflect, then advance if the reversed direction is open
                        self.objects[i].vel = Some((-dr, -dc));
                        if let Some(c) = self.objects[i].pos.offset(-dr, -dc).filter(|c| in_room(*c))
                        {
                            self.objects[i].pos = c;
                        }
                    }
                }
            }
            ObjectKind::Brownian => {
                let dirs = [(-1isize, 0isize), (1, 0), (0, 1), (0, -1)];
                let (dr, dc) = dirs[self.rng.gen_range(0..4)];
                // moves that would leave the room are rejected (object stays)
                if let Some(c) = self.objects[i].pos.offset(dr, dc).filter(|c| in_room(*c)) {
                    self.objects[i].pos = c;
                }
            }
            ObjectKind::WhiteNoise => {
                let pick = self.rng.gen_range(0..room_cells.len());
                self.objects[i].pos = room_cells[pick];
            }
        }
    }

    /// The 5x5 multi-channel local view from the agent's position.
    pub fn observe(&self) -> Observation {
        let placed: Vec<(usize, Cell)> = self.objects.iter().map(|o| (o.channel, o.pos)).collect();
        observe_cells(&self.layout, self.agent, &placed, 1 + self.objects.len())
    }

    /// Ground truth for the glass-box evaluator; never shown to the agent.
    pub fn true_state(&self) -> StateLabel {
        StateLabel {
            agent: self.agent.idx(self.layout.width),
            objects: self
                .objects
                .iter()
                .map(|o| o.pos.idx(self.layout.width))
                .collect(),
        }
    }

    /// Top-down symbol grid: `#` wall, `.` floor, `A` agent, object symbols.
    pub fn render_global(&self) -> Vec<String> {
        let mut grid: Vec<Vec<char>> = (0..self.layout.height)
            .map(|r| {
                (0..self.layout.width)
                    .map(|c| {
                        if self.layout.is_wall(Cell::new(r, c)) {
                            '#'
                        } else {
                            '.'
                        }
                    })
                    .collect()
            })
            .collect();
        for obj in &self.objects {
            grid[obj.pos.row][obj.pos.col] = obj.kind.symbol();
        }
        grid[self.agent.row][self.agent.col] = 'A';
        grid.into_iter().map(|row| row.into_iter().collect()).collect()
    }
}

/// Local view for an arbitrary placement; also used by the tabular
/// converter, which enumerates states rather than running episodes.
pub fn observe_cells(
    layout: &Layout,
    agent: Cell,
    objects: &[(usize, Cell)],
    channels: usize,
) -> Observation {
    let mut data = vec![0u8; channels * VIEW * VIEW];
    let half = (VIEW / 2) as isize;
    for vr in 0..VIEW {
        for vc in 0..VIEW {
            let gr = agent.row as isize + vr as isize - half;
            let gc = agent.col as isize + vc as isize - half;
            if layout.is_wall_signed(gr, gc) {
                data[vr * VIEW + vc] = 1;
            }
        }
    }
    for (channel, pos) in objects {
        let rel_r = pos.row as isize - agent.row as isize + half;
        let rel_c = pos.col as isize - agent.col as isize + half;
        if (0..VIEW as isize).contains(&rel_r) && (0..VIEW as isize).contains(&rel_c) {
            data[channel * VIEW * VIEW + rel_r as usize * VIEW + rel_c as usize] = 1;
        }
    }
    Observation { channels, data }
}
