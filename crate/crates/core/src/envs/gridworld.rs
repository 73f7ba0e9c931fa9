//! Gridworld with hazard cells whose task cost is lower than elsewhere, so
//! the cheapest route and the unsafe route coincide.
//!
//! Layouts are given as rows of characters:
//!
//! ```text
//! .  open cell        #  wall
//! H  hazard           S  start (uniformly sampled)
//! G  goal (absorbing)
//! ```
//!
//! Costs are charged for the cell the agent occupies when it acts. Moves
//! into walls or off the grid leave the agent in place.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::tabular::FiniteCmdpEnv;
use crate::error::{Error, Result};
use crate::seed::SimRng;
use crate::solver::{sample_index, FiniteCmdp};

/// Up, right, down, left.
pub const MOVES: [(i64, i64); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

pub const TWO_CORRIDOR: [&str; 6] = ["......", ".####.", "S.HH.G", "#####.", "S.....", "S#####"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridworldParams {
    pub layout: Vec<String>,
    pub step_task_cost: f64,
    pub hazard_task_cost: f64,
    pub hazard_safety_cost: f64,
    /// Probability of moving to one of the two perpendicular directions
    /// instead (split evenly).
    pub slip_probability: f64,
    pub horizon: usize,
    pub gamma_c: f64,
    pub gamma_l: f64,
    pub budget_d: f64,
}

impl GridworldParams {
    /// The 6x6 two-corridor layout. From the upper-left start the direct
    /// route crosses two hazards (safety 12, task 4 over 5 moves); the
    /// detour over the top row takes 9 moves and is hazard free.
    pub fn two_corridor(slip_probability: f64) -> Self {
        GridworldParams {
            layout: TWO_CORRIDOR.iter().map(|r| r.to_string()).collect(),
            step_task_cost: 1.0,
            hazard_task_cost: 0.5,
            hazard_safety_cost: 6.0,
            slip_probability,
            horizon: 30,
            gamma_c: 0.99,
            gamma_l: 1.0,
            budget_d: 6.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cell {
    Open,
    Wall,
    Hazard,
    Goal,
}

/// A parsed gridworld. Cells are indexed `y * width + x`.
#[derive(Clone, Debug)]
pub struct Gridworld {
    params: GridworldParams,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    starts: Vec<usize>,
    task_cost: Vec<f64>,
    safety_cost: Vec<f64>,
}

impl Gridworld {
    pub fn new(params: GridworldParams) -> Result<Self> {
        let height = params.layout.len();
        let width = params.layout.first().map_or(0, |r| r.chars().count());
        if width == 0 || params.layout.iter().any(|r| r.chars().count() != width) {
            return Err(Error::spec("gridworld layout must be a non-empty rectangle"));
        }
        if !(0.0..1.0).contains(&params.slip_probability) {
            return Err(Error::spec(format!("slip probability {} not in [0, 1)", params.slip_probability)));
        }
        if !(params.hazard_safety_cost >= 0.0) {
            return Err(Error::spec("hazard safety cost must be nonnegative"));
        }
        let mut cells = Vec::with_capacity(width * height);
        let mut starts = Vec::new();
        for row in &params.layout {
            for ch in row.chars() {
                let cell = match ch {
                    '.' => Cell::Open,
                    '#' => Cell::Wall,
                    'H' => Cell::Hazard,
                    'G' => Cell::Goal,
                    'S' => {
                        starts.push(cells.len());
                        Cell::Open
                    }
                    other => return Err(Error::spec(format!("unknown layout character '{other}'"))),
                };
                cells.push(cell);
            }
        }
        if starts.is_empty() || !cells.contains(&Cell::Goal) {
            return Err(Error::spec("layout needs at least one start and one goal"));
        }
        let (task_cost, safety_cost) = cells
            .iter()
            .map(|c| match c {
                Cell::Open => (params.step_task_cost, 0.0),
                Cell::Hazard => (params.hazard_task_cost, params.hazard_safety_cost),
                Cell::Wall | Cell::Goal => (0.0, 0.0),
            })
            .unzip();
        Ok(Gridworld { params, width, height, cells, starts, task_cost, safety_cost })
    }

    pub fn params(&self) -> &GridworldParams {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn is_goal(&self, cell: usize) -> bool {
        self.cells[cell] == Cell::Goal
    }

    pub fn is_wall(&self, cell: usize) -> bool {
        self.cells[cell] == Cell::Wall
    }

    pub fn task_cost(&self, cell: usize) -> f64 {
        self.task_cost[cell]
    }

    pub fn safety_cost(&self, cell: usize) -> f64 {
        self.safety_cost[cell]
    }

    fn target(&self, cell: usize, dir: usize) -> usize {
        let (x, y) = self.coords(cell);
        let (dx, dy) = MOVES[dir];
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            return cell;
        }
        let next = self.index(nx as usize, ny as usize);
        if self.is_wall(next) {
            cell
        } else {
            next
        }
    }

    /// Successor distribution of a move, with coinciding targets merged.
    pub fn move_distribution(&self, cell: usize, action: usize) -> SmallVec<[(usize, f64); 3]> {
        let mut out: SmallVec<[(usize, f64); 3]> = SmallVec::new();
        if self.is_goal(cell) || self.is_wall(cell) {
            out.push((cell, 1.0));
            return out;
        }
        let slip = self.params.slip_probability;
        let mut add = |target: usize, p: f64| {
            if p == 0.0 {
                return;
            }
            match out.iter_mut().find(|(c, _)| *c == target) {
                Some(entry) => entry.1 += p,
                None => out.push((target, p)),
            }
        };
        add(self.target(cell, action), 1.0 - slip);
        add(self.target(cell, (action + 1) % 4), slip / 2.0);
        add(self.target(cell, (action + 3) % 4), slip / 2.0);
        out
    }

    /// One sampled move: `(next cell, task cost, safety cost, reached goal)`.
    pub fn step(&self, cell: usize, action: usize, rng: &mut SimRng) -> (usize, f64, f64, bool) {
        let dist = self.move_distribution(cell, action);
        let probs: SmallVec<[f64; 3]> = dist.iter().map(|(_, p)| *p).collect();
        let next = dist[sample_index(&probs, rng)].0;
        (next, self.task_cost[cell], self.safety_cost[cell], self.is_goal(next))
    }

    pub fn to_finite_cmdp(&self) -> FiniteCmdp {
        let n = self.num_cells();
        let mut transition = vec![vec![vec![0.0; n]; 4]; n];
        for (s, rows) in transition.iter_mut().enumerate() {
            for (a, row) in rows.iter_mut().enumerate() {
                for (next, p) in self.move_distribution(s, a) {
                    row[next] += p;
                }
            }
        }
        let mut initial = vec![0.0; n];
        for &s in &self.starts {
            initial[s] += 1.0 / self.starts.len() as f64;
        }
        FiniteCmdp {
            num_states: n,
            num_actions: 4,
            transition,
            task_cost: self.task_cost.iter().map(|&c| vec![c; 4]).collect(),
            safety_cost: self.safety_cost.iter().map(|&l| vec![l; 4]).collect(),
            gamma_c: self.params.gamma_c,
            gamma_l: self.params.gamma_l,
            budget_d: self.params.budget_d,
            horizon: self.params.horizon,
            initial,
        }
    }

    pub fn env(&self) -> Result<FiniteCmdpEnv> {
        FiniteCmdpEnv::new(self.to_finite_cmdp())
    }
}
