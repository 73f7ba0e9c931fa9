use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};

use super::finite::FiniteCmdp;
use crate::error::{Error, Result};
use crate::saute::Penalty;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Nearest,
    Linear,
}

/// Sorted grid of safety-state nodes, in raw budget units.
///
/// The grid contains 0 and at least one negative node. Negative `z` values
/// are all mapped to the lowest node: once the budget is exhausted the
/// reshaped cost no longer depends on how deep the violation is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ZGrid(Vec<f64>);

impl TryFrom<Vec<f64>> for ZGrid {
    type Error = Error;

    fn try_from(nodes: Vec<f64>) -> Result<Self> {
        ZGrid::new(nodes)
    }
}

impl From<ZGrid> for Vec<f64> {
    fn from(g: ZGrid) -> Self {
        g.0
    }
}

impl ZGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::spec(format!("z grid needs at least 3 nodes, got {}", nodes.len())));
        }
        if nodes.iter().any(|z| !z.is_finite()) {
            return Err(Error::spec("z grid nodes must be finite"));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::spec("z grid must be strictly increasing"));
        }
        if !(nodes[0] < 0.0) {
            return Err(Error::spec("z grid needs a negative node"));
        }
        if !nodes.contains(&0.0) {
            return Err(Error::spec("z grid must contain 0"));
        }
        Ok(ZGrid(nodes))
    }

    /// Nodes `-1, 0, 1, ..., top`: exact for integer costs with `gamma_l = 1`.
    pub fn integer(top: usize) -> Self {
        let mut nodes: Vec<f64> = vec![-1.0];
        nodes.extend((0..=top).map(|k| k as f64));
        if top == 0 {
            nodes.push(1.0);
        }
        ZGrid(nodes)
    }

    /// `-spacing, 0, spacing, ...` up to and including `top` (which must be a
    /// multiple of `spacing` up to rounding).
    pub fn uniform(top: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(top > 0.0) {
            return Err(Error::spec("uniform grid needs positive top and spacing"));
        }
        let steps = (top / spacing).round() as usize;
        let mut nodes = vec![-spacing];
        nodes.extend((0..=steps).map(|k| k as f64 * top / steps as f64));
        ZGrid::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn contains(&self, z: f64) -> bool {
        self.find(z).is_some()
    }

    pub fn find(&self, z: f64) -> Option<usize> {
        self.0.iter().position(|&v| (v - z).abs() <= 1e-9 * v.abs().max(1.0))
    }

    /// Maps `z` onto nodes, returning `(node, weight)` pairs that sum to 1.
    pub fn project(&self, z: f64, interpolation: Interpolation) -> SmallVec<[(usize, f64); 2]> {
        let nodes = &self.0;
        let top = nodes.len() - 1;
        if z < 0.0 {
            return smallvec![(0, 1.0)];
        }
        if z >= nodes[top] {
            return smallvec![(top, 1.0)];
        }
        // first node strictly above z; z >= 0 so lo is a nonnegative node
        let hi = nodes.partition_point(|&v| v <= z);
        let lo = hi - 1;
        if nodes[lo] == z {
            return smallvec![(lo, 1.0)];
        }
        let frac = (z - nodes[lo]) / (nodes[hi] - nodes[lo]);
        match interpolation {
            Interpolation::Nearest if frac <= 0.5 => smallvec![(lo, 1.0)],
            Interpolation::Nearest => smallvec![(hi, 1.0)],
            Interpolation::Linear => smallvec![(lo, 1.0 - frac), (hi, frac)],
        }
    }

    pub fn nearest(&self, z: f64) -> usize {
        self.project(z, Interpolation::Nearest)[0].0
    }
}

/// Tabular Saute MDP over `(state, z node)`.
///
/// Augmented states are indexed `s * nz + zi`; successor lists are stored
/// flat, one slice per `(augmented state, action)`.
#[derive(Clone, Debug)]
pub struct FiniteSauteMdp {
    pub base: FiniteCmdp,
    pub z_grid: ZGrid,
    pub interpolation: Interpolation,
    pub reshape_n: Penalty,
    offsets: Vec<usize>,
    successors: Vec<(u32, f64)>,
    reshaped: Vec<f64>,
    z_next: Vec<f64>,
}

/// Builds the augmented MDP. The successor `z` is computed exactly as
/// `(z - l) / gamma_l` and then projected onto the grid; the reshaped cost
/// uses the exact successor `z`.
pub fn build_saute_mdp(
    cmdp: FiniteCmdp,
    z_grid: ZGrid,
    n: Penalty,
    interpolation: Interpolation,
) -> Result<FiniteSauteMdp> {
    cmdp.validate()?;
    let z_grid = ZGrid::new(z_grid.0)?;
    if !z_grid.contains(cmdp.budget_d) {
        return Err(Error::spec(format!("z grid has no node at the budget {}", cmdp.budget_d)));
    }
    if let Penalty::Finite(v) = n {
        if !(v >= 0.0) {
            return Err(Error::spec("penalty must be nonnegative"));
        }
    }
    let (ns, na, nz) = (cmdp.num_states, cmdp.num_actions, z_grid.len());
    let mut offsets = Vec::with_capacity(ns * nz * na + 1);
    let mut successors = Vec::new();
    let mut reshaped = Vec::with_capacity(ns * nz * na);
    let mut z_next = Vec::with_capacity(ns * nz * na);
    offsets.push(0);
    for s in 0..ns {
        for zi in 0..nz {
            let z = z_grid.node(zi);
            for a in 0..na {
                let zn = (z - cmdp.safety_cost[s][a]) / cmdp.gamma_l;
                let c = if zn >= 0.0 { cmdp.task_cost[s][a] } else { n.value() };
                reshaped.push(c);
                z_next.push(zn);
                let split = z_grid.project(zn, interpolation);
                for (sn, &p) in cmdp.transition[s][a].iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for &(zj, w) in &split {
                        if w > 0.0 {
                            successors.push(((sn * nz + zj) as u32, p * w));
                        }
                    }
                }
                offsets.push(successors.len());
            }
        }
    }
    Ok(FiniteSauteMdp { base: cmdp, z_grid, interpolation, reshape_n: n, offsets, successors, reshaped, z_next })
}

impl FiniteSauteMdp {
    pub fn num_aug_states(&self) -> usize {
        self.base.num_states * self.z_grid.len()
    }

    pub fn num_actions(&self) -> usize {
        self.base.num_actions
    }

    pub fn nz(&self) -> usize {
        self.z_grid.len()
    }

    pub fn aug_index(&self, s: usize, zi: usize) -> usize {
        s * self.nz() + zi
    }

    pub fn split_index(&self, x: usize) -> (usize, usize) {
        (x / self.nz(), x % self.nz())
    }

    #[inline]
    fn flat(&self, x: usize, a: usize) -> usize {
        x * self.base.num_actions + a
    }

    /// Reshaped cost of action `a` in augmented state `x`.
    #[inline]
    pub fn cost(&self, x: usize, a: usize) -> f64 {
        self.reshaped[self.flat(x, a)]
    }

    /// Exact (unprojected) successor safety state.
    #[inline]
    pub fn z_after(&self, x: usize, a: usize) -> f64 {
        self.z_next[self.flat(x, a)]
    }

    #[inline]
    pub fn successors(&self, x: usize, a: usize) -> &[(u32, f64)] {
        let k = self.flat(x, a);
        &self.successors[self.offsets[k]..self.offsets[k + 1]]
    }

    /// Augmented start distribution: base start states at the budget node.
    pub fn initial_aug_states(&self) -> Vec<(usize, f64)> {
        let zi = self.budget_node();
        self.base
            .initial
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| (self.aug_index(s, zi), p))
            .collect()
    }

    pub fn budget_node(&self) -> usize {
        self.z_grid.find(self.base.budget_d).expect("budget node checked at build")
    }

    /// Same model with another penalty; the transition structure is shared.
    pub fn with_penalty(&self, n: Penalty) -> FiniteSauteMdp {
        let mut out = self.clone();
        out.reshape_n = n;
        for (c, (k, &zn)) in out.reshaped.iter_mut().zip(self.z_next.iter().enumerate()) {
            let (x, a) = (k / self.base.num_actions, k % self.base.num_actions);
            let s = x / self.nz();
            *c = if zn >= 0.0 { self.base.task_cost[s][a] } else { n.value() };
        }
        out
    }

    /// Same model evaluated at another budget (must be a grid node).
    pub fn with_budget(&self, d: f64) -> Result<FiniteSauteMdp> {
        if !self.z_grid.contains(d) {
            return Err(Error::spec(format!("budget {d} is not a z grid node")));
        }
        let mut out = self.clone();
        out.base.budget_d = d;
        Ok(out)
    }
}
