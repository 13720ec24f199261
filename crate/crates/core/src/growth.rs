//! Level-by-level branching growth.
//!
//! Level `m` is one coupled system on `p^m` compartments. Each tracked branch
//! runs until its calcium and carbonate concentrations cross, after which it
//! is frozen. The level ends when every tracked branch has crossed, or when
//! the per-level time budget runs out. Branches whose saturation index at the
//! crossing reaches the threshold split into `p` daughters; the rest halt and
//! are carried forward as untracked continuation compartments.

use crate::integrator::{crossing_event, integrate, pack, CoupledSystem, Event, Solution, SolverConfig, SolverFailure};
use crate::kinetics::{saturation_index, KineticParams, SpeciesState};
use crate::vladimirov::{OperatorRegistry, OperatorSpec, VladimirovError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrowthError {
    #[error("{field}: {message}")]
    Config { field: &'static str, message: String },
    #[error(transparent)]
    Operator(#[from] VladimirovError),
    #[error("solver failed on level {level}: {source}")]
    Solver { level: u32, source: SolverFailure },
    #[error("expected {expected} initial states, got {got}")]
    InitialCondition { expected: usize, got: usize },
}

fn config_error(field: &'static str, message: &str) -> GrowthError {
    GrowthError::Config {
        field,
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthConfig {
    pub seed: u64,
    /// half-width of the split fraction interval around 1/2
    pub theta_delta: f64,
    pub m_max: u32,
    pub omega_threshold: f64,
    pub t_max_level: f64,
    /// also log the first time each branch's saturation index drops to the threshold
    pub log_saturation: bool,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            theta_delta: 0.1,
            m_max: 4,
            omega_threshold: 1.0,
            t_max_level: 200.0,
            log_saturation: false,
        }
    }
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<(), GrowthError> {
        if !(0.0..0.5).contains(&self.theta_delta) {
            return Err(config_error("theta_delta", "must lie in [0, 0.5)"));
        }
        if !(self.omega_threshold > 0.0 && self.omega_threshold.is_finite()) {
            return Err(config_error("omega_threshold", "must be positive"));
        }
        if !(self.t_max_level > 0.0 && self.t_max_level.is_finite()) {
            return Err(config_error("t_max_level", "must be positive"));
        }
        Ok(())
    }
}

/// Everything needed to assemble the coupled system at any level.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub p: u64,
    pub alpha: f64,
    pub operator: String,
    pub kinetics: KineticParams,
    pub solver: SolverConfig,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            p: 2,
            alpha: 2.0,
            operator: "auto".to_string(),
            kinetics: KineticParams::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl Model {
    pub fn system(&self, m: u32) -> Result<CoupledSystem, GrowthError> {
        self.system_with(&OperatorRegistry::default(), m)
    }

    pub fn system_with(&self, registry: &OperatorRegistry, m: u32) -> Result<CoupledSystem, GrowthError> {
        let op = registry.build(
            &self.operator,
            &OperatorSpec {
                p: self.p,
                m,
                alpha: self.alpha,
            },
        )?;
        Ok(CoupledSystem::new(op, self.kinetics))
    }

    pub fn omega(&self, s: &SpeciesState) -> f64 {
        saturation_index(s.u, s.v, self.kinetics.kappa_sp)
    }
}

fn stream_key(path: &[u8], p: u64) -> u64 {
    path.iter()
        .fold(0u64, |k, &d| k.wrapping_mul(p + 1).wrapping_add(d as u64 + 1))
}

/// Random stream for the branch at `path`, independent of evaluation order.
pub fn branch_rng(seed: u64, path: &[u8], p: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_key(path, p));
    rng
}

/// Uniform draw on `(0.5 - delta, 0.5 + delta)`.
pub fn draw_theta<R: Rng + ?Sized>(rng: &mut R, delta: f64) -> f64 {
    if delta == 0.0 {
        return 0.5;
    }
    loop {
        let x: f64 = rng.gen();
        if x > 0.0 {
            return 0.5 - delta + 2.0 * delta * x;
        }
    }
}

/// Split fractions for the daughters of the branch at `path`. For `p = 2`
/// these are `(theta, 1 - theta)`; otherwise `p` independent draws are
/// normalized to sum to one.
pub fn split_weights(seed: u64, path: &[u8], p: u64, delta: f64) -> Vec<f64> {
    let mut rng = branch_rng(seed, path, p);
    if p == 2 {
        let theta = draw_theta(&mut rng, delta);
        return vec![theta, 1.0 - theta];
    }
    let raw: Vec<f64> = (0..p).map(|_| draw_theta(&mut rng, delta)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// Divides `x` in the given proportions so that the shares add back to `x`
/// exactly when summed from the last share to the first.
///
/// Each step peels one share off the remainder `r` so that the two pieces
/// both lie in `[r/2, r]` or the peeled piece is obtained by an exact
/// subtraction.
pub fn split_amount(x: f64, weights: &[f64]) -> Vec<f64> {
    let n = weights.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let mut rest = x;
    let mut remaining: f64 = weights.iter().sum();
    for c in 0..n - 1 {
        let f = weights[c] / remaining;
        let (share, next) = if f <= 0.5 {
            let next = rest - f * rest;
            (rest - next, next)
        } else {
            let share = f * rest;
            (share, rest - share)
        };
        out[c] = share;
        rest = next;
        remaining -= weights[c];
    }
    out[n - 1] = rest;
    out
}

/// Daughter states: `u` and `v` divided by `weights`, `w` reset to zero.
pub fn split_state(parent: &SpeciesState, weights: &[f64]) -> Vec<SpeciesState> {
    let u = split_amount(parent.u, weights);
    let v = split_amount(parent.v, weights);
    u.into_iter()
        .zip(v)
        .map(|(u, v)| SpeciesState::new(u, v, 0.0))
        .collect()
}

/// Two-way split with fraction `theta` to the first daughter.
pub fn split_pair(parent: &SpeciesState, theta: f64) -> (SpeciesState, SpeciesState) {
    let s = split_state(parent, &[theta, 1.0 - theta]);
    (s[0], s[1])
}

fn continuation_shares(s: &SpeciesState, p: usize) -> Vec<SpeciesState> {
    let w = vec![1.0; p];
    let (u, v, c) = (split_amount(s.u, &w), split_amount(s.v, &w), split_amount(s.w, &w));
    (0..p).map(|i| SpeciesState::new(u[i], v[i], c[i])).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelState {
    pub time: f64,
    pub level: u32,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// compartments whose state still evolves
    pub evolving: Vec<bool>,
}

impl LevelState {
    pub fn new(time: f64, level: u32, states: &[SpeciesState]) -> Self {
        Self {
            time,
            level,
            u: states.iter().map(|s| s.u).collect(),
            v: states.iter().map(|s| s.v).collect(),
            w: states.iter().map(|s| s.w).collect(),
            evolving: vec![true; states.len()],
        }
    }

    pub fn compartments(&self) -> usize {
        self.u.len()
    }

    pub fn state(&self, i: usize) -> SpeciesState {
        SpeciesState::new(self.u[i], self.v[i], self.w[i])
    }

    fn from_packed(time: f64, level: u32, y: &[f64], evolving: Vec<bool>) -> Self {
        let n = evolving.len();
        Self {
            time,
            level,
            u: y[..n].to_vec(),
            v: y[n..2 * n].to_vec(),
            w: y[2 * n..].to_vec(),
            evolving,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Crossing,
    Saturation,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Crossing => "crossing",
            EventKind::Saturation => "saturation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// compartment index within the level
    pub branch: usize,
    pub kind: EventKind,
    pub time: f64,
    pub state: SpeciesState,
    pub omega: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelOutcome {
    pub events: Vec<EventRecord>,
    /// crossing record per compartment, `None` for untracked or uncrossed
    pub crossings: Vec<Option<EventRecord>>,
    /// state at the end of the level, frozen crossed branches included
    pub final_state: LevelState,
    /// every accepted step of the level, restarts included
    pub solution: Solution,
}

/// Integrates one level until each tracked compartment has crossed or
/// `t_max_level` has elapsed. Crossed compartments are frozen at their
/// crossing state; the rest keep diffusing and reacting.
pub fn run_level(
    model: &Model,
    start: &LevelState,
    tracked: &[bool],
    growth: &GrowthConfig,
) -> Result<LevelOutcome, GrowthError> {
    let n = start.compartments();
    if tracked.len() != n {
        return Err(GrowthError::InitialCondition {
            expected: n,
            got: tracked.len(),
        });
    }
    let level = start.level;
    let mut sys = model.system(level)?;
    if sys.compartments() != n {
        return Err(GrowthError::InitialCondition {
            expected: sys.compartments(),
            got: n,
        });
    }
    let kappa_sp = model.kinetics.kappa_sp;
    let threshold = growth.omega_threshold;
    let t_limit = start.time + growth.t_max_level;

    let mut evolving = start.evolving.clone();
    let mut pending: Vec<bool> = (0..n).map(|i| tracked[i] && evolving[i]).collect();
    let mut sat_pending: Vec<bool> = pending.iter().map(|&b| b && growth.log_saturation).collect();
    let mut y = pack(&start.u, &start.v, &start.w);
    let mut t = start.time;
    let mut events = Vec::new();
    let mut crossings = vec![None; n];
    let mut solution = Solution::default();

    while pending.iter().any(|&b| b) && t < t_limit {
        sys.set_evolving(&evolving)?;
        let mut fns: Vec<Event> = Vec::new();
        for i in (0..n).filter(|&i| pending[i]) {
            fns.push(crossing_event(i, n, true));
        }
        for i in (0..n).filter(|&i| sat_pending[i]) {
            fns.push(Event::new(n + i, false, move |_, y: &[f64]| {
                saturation_index(y[i], y[n + i], kappa_sp) - threshold
            }));
        }
        let sol = integrate(&sys, &y, t, t_limit, &model.solver, &fns)
            .map_err(|source| GrowthError::Solver { level, source })?;
        for ev in &sol.events {
            let (i, kind) = if ev.id < n {
                (ev.id, EventKind::Crossing)
            } else {
                (ev.id - n, EventKind::Saturation)
            };
            let state = SpeciesState::new(ev.y[i], ev.y[n + i], ev.y[2 * n + i]);
            let record = EventRecord {
                branch: i,
                kind,
                time: ev.t,
                state,
                omega: saturation_index(state.u, state.v, kappa_sp),
                degenerate: ev.degenerate,
            };
            match kind {
                EventKind::Crossing => {
                    pending[i] = false;
                    evolving[i] = false;
                    crossings[i] = Some(record.clone());
                }
                EventKind::Saturation => sat_pending[i] = false,
            }
            events.push(record);
        }
        append(&mut solution, sol);
        let (tl, yl) = solution.trajectory.last().expect("trajectory holds the start point");
        t = tl;
        y = yl.to_vec();
        if !solution.terminated {
            break;
        }
    }
    if solution.trajectory.is_empty() {
        solution.trajectory.t.push(t);
        solution.trajectory.y.push(y.clone());
    }
    let final_state = LevelState::from_packed(t, level, &y, evolving);
    Ok(LevelOutcome {
        events,
        crossings,
        final_state,
        solution,
    })
}

fn append(acc: &mut Solution, next: Solution) {
    let skip = usize::from(acc.trajectory.t.last() == next.trajectory.t.first() && !acc.trajectory.is_empty());
    acc.trajectory.t.extend(next.trajectory.t.into_iter().skip(skip));
    acc.trajectory.y.extend(next.trajectory.y.into_iter().skip(skip));
    acc.events.extend(next.events);
    acc.accepted_steps += next.accepted_steps;
    acc.rejected_steps += next.rejected_steps;
    acc.terminated = next.terminated;
}

/// Fixed-level run without freezing or branching: every compartment evolves
/// up to `t_end` and each first crossing is logged.
pub fn simulate_level(model: &Model, m: u32, initial: &[SpeciesState], t_end: f64) -> Result<Solution, GrowthError> {
    let sys = model.system(m)?;
    let n = sys.compartments();
    if initial.len() != n {
        return Err(GrowthError::InitialCondition {
            expected: n,
            got: initial.len(),
        });
    }
    let start = LevelState::new(0.0, m, initial);
    let events: Vec<Event> = (0..n).map(|i| crossing_event(i, n, false)).collect();
    integrate(
        &sys,
        &pack(&start.u, &start.v, &start.w),
        0.0,
        t_end,
        &model.solver,
        &events,
    )
    .map_err(|source| GrowthError::Solver { level: m, source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchNode {
    /// p-adic digits of the branch address, least significant first
    pub path: Vec<u8>,
    pub birth_time: f64,
    pub crossing_time: Option<f64>,
    pub lifetime: f64,
    pub omega: Option<f64>,
    pub halted: bool,
    /// carried into the next level as continuation compartments
    pub continuation: bool,
    pub degenerate: bool,
    pub first_saturation_time: Option<f64>,
    pub birth_state: SpeciesState,
    pub crossing_state: Option<SpeciesState>,
    pub children: Vec<BranchNode>,
}

impl BranchNode {
    pub fn depth(&self) -> usize {
        self.path.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Depth-first preorder traversal.
    pub fn nodes(&self) -> Vec<&BranchNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(node.children.iter().rev());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLog {
    pub level: u32,
    pub compartments: usize,
    pub branches: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoralTree {
    pub p: u64,
    pub final_level: u32,
    pub root: BranchNode,
    pub levels: Vec<LevelLog>,
}

enum Slot {
    Branch(usize),
    Continuation,
}

struct Arena {
    nodes: Vec<BranchNode>,
    children: Vec<Vec<usize>>,
}

impl Arena {
    fn push(&mut self, node: BranchNode) -> usize {
        self.nodes.push(node);
        self.children.push(Vec::new());
        self.nodes.len() - 1
    }

    fn assemble(&mut self, id: usize) -> BranchNode {
        let kids = std::mem::take(&mut self.children[id]);
        let mut node = self.nodes[id].clone();
        node.children = kids.into_iter().map(|k| self.assemble(k)).collect();
        node
    }
}

fn new_node(path: Vec<u8>, birth_time: f64, birth_state: SpeciesState) -> BranchNode {
    BranchNode {
        path,
        birth_time,
        crossing_time: None,
        lifetime: 0.0,
        omega: None,
        halted: false,
        continuation: false,
        degenerate: false,
        first_saturation_time: None,
        birth_state,
        crossing_state: None,
        children: Vec::new(),
    }
}

/// Runs the full branching simulation from a single root compartment.
pub fn grow(model: &Model, growth: &GrowthConfig, initial: SpeciesState) -> Result<CoralTree, GrowthError> {
    growth.validate()?;
    model.solver.validate().map_err(|e| GrowthError::Config {
        field: e.field,
        message: e.message,
    })?;
    let p = model.p as usize;
    let mut arena = Arena {
        nodes: Vec::new(),
        children: Vec::new(),
    };
    let root = arena.push(new_node(Vec::new(), 0.0, initial));
    let mut slots = vec![Slot::Branch(root)];
    let mut state = LevelState::new(0.0, 0, &[initial]);
    let mut levels = Vec::new();

    loop {
        let m = state.level;
        let n = slots.len();
        let tracked: Vec<bool> = slots.iter().map(|s| matches!(s, Slot::Branch(_))).collect();
        let outcome = run_level(model, &state, &tracked, growth)?;
        let t_sync = outcome.final_state.time;
        levels.push(LevelLog {
            level: m,
            compartments: n,
            branches: tracked.iter().filter(|&&b| b).count(),
            t_start: state.time,
            t_end: t_sync,
            events: outcome.events.clone(),
        });
        for ev in outcome.events.iter().filter(|e| e.kind == EventKind::Saturation) {
            if let Slot::Branch(id) = slots[ev.branch] {
                arena.nodes[id].first_saturation_time = Some(ev.time);
            }
        }
        for (i, slot) in slots.iter().enumerate() {
            let Slot::Branch(id) = *slot else { continue };
            let node = &mut arena.nodes[id];
            match &outcome.crossings[i] {
                Some(rec) => {
                    node.crossing_time = Some(rec.time);
                    node.crossing_state = Some(rec.state);
                    node.omega = Some(rec.omega);
                    node.lifetime = rec.time - node.birth_time;
                    node.degenerate = rec.degenerate;
                    node.halted = rec.omega < growth.omega_threshold;
                }
                None => {
                    node.lifetime = t_sync - node.birth_time;
                    node.halted = true;
                }
            }
        }
        let splitting = slots
            .iter()
            .any(|s| matches!(s, Slot::Branch(id) if !arena.nodes[*id].halted));
        if m >= growth.m_max || !splitting {
            break;
        }

        let mut next = vec![SpeciesState::default(); n * p];
        let mut next_slots: Vec<Slot> = (0..n * p).map(|_| Slot::Continuation).collect();
        for (i, slot) in slots.iter().enumerate() {
            let current = outcome.final_state.state(i);
            match *slot {
                Slot::Branch(id) if !arena.nodes[id].halted => {
                    let path = arena.nodes[id].path.clone();
                    let weights = split_weights(growth.seed, &path, model.p, growth.theta_delta);
                    for (c, child) in split_state(&current, &weights).into_iter().enumerate() {
                        let mut child_path = path.clone();
                        child_path.push(c as u8);
                        let cid = arena.push(new_node(child_path, t_sync, child));
                        arena.children[id].push(cid);
                        next[i + c * n] = child;
                        next_slots[i + c * n] = Slot::Branch(cid);
                    }
                }
                _ => {
                    if let Slot::Branch(id) = *slot {
                        arena.nodes[id].continuation = true;
                    }
                    for (c, share) in continuation_shares(&current, p).into_iter().enumerate() {
                        next[i + c * n] = share;
                    }
                }
            }
        }
        slots = next_slots;
        state = LevelState::new(t_sync, m + 1, &next);
    }

    let final_level = state.level;
    Ok(CoralTree {
        p: model.p,
        final_level,
        root: arena.assemble(root),
        levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// `(max - min) / mean`
    pub relative_range: f64,
}

impl LifetimeSummary {
    pub fn from_lifetimes(lifetimes: &[f64]) -> Option<Self> {
        if lifetimes.is_empty() {
            return None;
        }
        let min = lifetimes.iter().copied().fold(f64::INFINITY, f64::min);
        let max = lifetimes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = lifetimes.iter().sum::<f64>() / lifetimes.len() as f64;
        let relative_range = if mean != 0.0 { (max - min) / mean } else { 0.0 };
        Some(Self {
            count: lifetimes.len(),
            min,
            max,
            mean,
            relative_range,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeMetrics {
    pub node_count: usize,
    pub leaf_count: usize,
    pub depth: usize,
    /// over nodes at depth `>= min_depth`
    pub lifetimes: Option<LifetimeSummary>,
}

pub fn tree_metrics(tree: &CoralTree, min_depth: usize) -> TreeMetrics {
    let nodes = tree.root.nodes();
    let lifetimes: Vec<f64> = nodes
        .iter()
        .filter(|n| n.depth() >= min_depth)
        .map(|n| n.lifetime)
        .collect();
    TreeMetrics {
        node_count: nodes.len(),
        leaf_count: nodes.iter().filter(|n| n.is_leaf()).count(),
        depth: nodes.iter().map(|n| n.depth()).max().unwrap_or(0),
        lifetimes: LifetimeSummary::from_lifetimes(&lifetimes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn theta_degenerate_interval() {
        let mut rng = branch_rng(3, &[1, 0], 2);
        assert!((0..10).all(|_| draw_theta(&mut rng, 0.0) == 0.5));
    }

    #[test]
    fn theta_is_a_function_of_seed_and_path() {
        let a = split_weights(9, &[0, 1, 1], 2, 0.1);
        let b = split_weights(9, &[0, 1, 1], 2, 0.1);
        assert_eq!(a, b);
        assert_ne!(a, split_weights(9, &[0, 1, 0], 2, 0.1));
        assert_ne!(a, split_weights(10, &[0, 1, 1], 2, 0.1));
        assert_ne!(stream_key(&[0], 2), stream_key(&[0, 0], 2));
    }

    #[test]
    fn theta_statistics() {
        let mut rng = branch_rng(1, &[], 2);
        let draws: Vec<f64> = (0..100_000).map(|_| draw_theta(&mut rng, 0.1)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.5).abs() < 0.005);
        assert!(draws.iter().all(|&t| t > 0.4 && t < 0.6));
    }

    #[test]
    fn split_examples() {
        let (a, b) = split_pair(&SpeciesState::new(10.0, 6.0, 4.0), 0.3);
        assert_relative_eq!(a.u, 3.0, max_relative = 1e-15);
        assert_relative_eq!(a.v, 1.8, max_relative = 1e-15);
        assert_relative_eq!(b.u, 7.0, max_relative = 1e-15);
        assert_relative_eq!(b.v, 4.2, max_relative = 1e-15);
        assert_eq!((a.w, b.w), (0.0, 0.0));
        let (a, b) = split_pair(&SpeciesState::new(3.0, 5.0, 1.0), 0.5);
        assert_eq!((a.u, a.v), (b.u, b.v));
    }

    proptest! {
        #[test]
        fn two_way_split_conserves_exactly(x in 0.0..1e3f64, theta in 0.4..0.6f64) {
            let s = split_amount(x, &[theta, 1.0 - theta]);
            prop_assert_eq!(s[0] + s[1], x);
            prop_assert_eq!(s[1] + s[0], x);
            prop_assert!(s.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn p_way_split_conserves_exactly(x in 0.0..1e3f64, seed in 0u64..1000, p in prop::sample::select(vec![3u64, 5, 7])) {
            let w = split_weights(seed, &[1], p, 0.1);
            let s = split_amount(x, &w);
            prop_assert_eq!(s.iter().rev().fold(0.0, |acc, v| acc + v), x);
            for (share, weight) in s.iter().zip(&w) {
                prop_assert!((share - weight * x).abs() <= 1e-12 * x.max(1.0));
            }
        }
    }

    fn reference_model() -> Model {
        Model::default()
    }

    #[test]
    fn single_level_reference_crossing() {
        let cfg = GrowthConfig::default();
        let start = LevelState::new(0.0, 0, &[SpeciesState::new(8.0, 10.0, 0.0)]);
        let out = run_level(&reference_model(), &start, &[true], &cfg).unwrap();
        let rec = out.crossings[0].as_ref().unwrap();
        assert!((rec.time - 1.7107378).abs() < 1e-6);
        assert!((rec.state.v - rec.state.w).abs() < 1e-6);
        assert!((rec.omega - rec.state.u * rec.state.v).abs() < 1e-12);
        assert_eq!(out.final_state.time, rec.time);
    }

    #[test]
    fn two_branch_level_both_cross() {
        let start = LevelState::new(
            0.0,
            1,
            &[SpeciesState::new(10.0, 15.0, 0.0), SpeciesState::new(8.0, 13.0, 0.0)],
        );
        let out = run_level(&reference_model(), &start, &[true, true], &GrowthConfig::default()).unwrap();
        let times: Vec<f64> = out.crossings.iter().map(|c| c.as_ref().unwrap().time).collect();
        assert!(times.iter().all(|t| t.is_finite() && *t > 0.0));
        assert_eq!(out.final_state.time, times[0].max(times[1]));
        let first = times.iter().copied().fold(f64::INFINITY, f64::min);
        let k = if times[0] == first { 0 } else { 1 };
        // the earlier branch stays frozen at its crossing state
        assert_eq!(out.final_state.state(k), out.crossings[k].as_ref().unwrap().state);
    }

    #[test]
    fn disabled_kinetics_never_cross() {
        let model = Model {
            kinetics: KineticParams {
                eta: 0.0,
                ..Default::default()
            },
            ..reference_model()
        };
        let cfg = GrowthConfig {
            t_max_level: 20.0,
            ..Default::default()
        };
        let start = LevelState::new(0.0, 1, &[SpeciesState::new(8.0, 10.0, 0.0); 2]);
        let out = run_level(&model, &start, &[true, true], &cfg).unwrap();
        assert!(out.crossings.iter().all(Option::is_none));
        assert_eq!(out.final_state.time, 20.0);
        let tree = grow(&model, &cfg, SpeciesState::new(8.0, 10.0, 0.0)).unwrap();
        assert!(tree.root.halted && tree.root.crossing_time.is_none());
        assert_eq!(tree.root.lifetime, 20.0);
    }

    #[test]
    fn zero_depth_tree_is_a_single_node() {
        let cfg = GrowthConfig {
            m_max: 0,
            ..Default::default()
        };
        let tree = grow(&reference_model(), &cfg, SpeciesState::new(8.0, 10.0, 0.0)).unwrap();
        assert!(tree.root.children.is_empty());
        assert_eq!(tree.root.lifetime, tree.root.crossing_time.unwrap());
        let metrics = tree_metrics(&tree, 0);
        assert_eq!((metrics.node_count, metrics.leaf_count, metrics.depth), (1, 1, 0));
        assert_eq!(metrics.lifetimes.unwrap().relative_range, 0.0);
    }

    #[test]
    fn growth_is_deterministic() {
        let cfg = GrowthConfig {
            seed: 42,
            ..Default::default()
        };
        let ic = SpeciesState::new(8.0, 10.0, 0.0);
        assert_eq!(
            grow(&reference_model(), &cfg, ic).unwrap(),
            grow(&reference_model(), &cfg, ic).unwrap()
        );
    }

    #[test]
    fn growth_structure() {
        let cfg = GrowthConfig {
            seed: 5,
            ..Default::default()
        };
        let tree = grow(&reference_model(), &cfg, SpeciesState::new(8.0, 10.0, 0.0)).unwrap();
        for (k, level) in tree.levels.iter().enumerate() {
            assert_eq!(level.level as usize, k);
            assert_eq!(level.compartments, 2usize.pow(k as u32));
            assert!(level.t_end >= level.t_start);
        }
        for node in tree.root.nodes() {
            assert!(node.children.is_empty() || node.children.len() == 2);
            assert!(!(node.halted && !node.children.is_empty()));
            if node.crossing_time.is_some() {
                assert!(node.lifetime > 0.0);
            }
            if let (Some(cs), false) = (node.crossing_state, node.children.is_empty()) {
                let (u, v): (f64, f64) = (
                    node.children.iter().map(|c| c.birth_state.u).sum(),
                    node.children.iter().map(|c| c.birth_state.v).sum(),
                );
                assert_eq!((u, v), (cs.u, cs.v));
                assert!(node.children.iter().all(|c| c.birth_state.w == 0.0));
            }
        }
        assert_eq!(tree.root.children.len(), 2);
    }

    #[test]
    fn symmetric_splits_give_equal_lifetimes() {
        let cfg = GrowthConfig {
            theta_delta: 0.0,
            omega_threshold: 1e-3,
            m_max: 2,
            ..Default::default()
        };
        let tree = grow(&reference_model(), &cfg, SpeciesState::new(8.0, 10.0, 0.0)).unwrap();
        for depth in 1..=2 {
            let lt: Vec<f64> = tree
                .root
                .nodes()
                .iter()
                .filter(|n| n.depth() == depth)
                .map(|n| n.lifetime)
                .collect();
            assert_eq!(lt.len(), 1 << depth);
            assert!(lt.iter().all(|l| (l - lt[0]).abs() <= 1e-9 * lt[0]), "{lt:?}");
        }
    }

    #[test]
    fn ternary_growth_conserves_at_splits() {
        let model = Model {
            p: 3,
            ..reference_model()
        };
        let cfg = GrowthConfig {
            seed: 1,
            m_max: 1,
            ..Default::default()
        };
        let tree = grow(&model, &cfg, SpeciesState::new(8.0, 10.0, 0.0)).unwrap();
        assert_eq!(tree.root.children.len(), 3);
        let cs = tree.root.crossing_state.unwrap();
        let u = tree.root.children.iter().rev().fold(0.0, |a, c| a + c.birth_state.u);
        assert_eq!(u, cs.u);
        assert_eq!(tree.levels[1].compartments, 3);
    }

    #[test]
    fn saturation_diagnostic_does_not_change_the_tree() {
        let ic = SpeciesState::new(8.0, 10.0, 0.0);
        let plain = grow(&reference_model(), &GrowthConfig::default(), ic).unwrap();
        let cfg = GrowthConfig {
            log_saturation: true,
            ..Default::default()
        };
        let logged = grow(&reference_model(), &cfg, ic).unwrap();
        let times = |t: &CoralTree| t.root.nodes().iter().map(|n| n.crossing_time).collect::<Vec<_>>();
        let a = times(&plain);
        let b = times(&logged);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.unwrap() - y.unwrap()).abs() < 1e-8);
        }
        assert!(logged
            .levels
            .iter()
            .flat_map(|l| &l.events)
            .any(|e| e.kind == EventKind::Saturation));
    }

    #[test]
    fn metrics_arithmetic() {
        let s = LifetimeSummary::from_lifetimes(&[6.90514, 17.11237]).unwrap();
        assert_eq!((s.min, s.max), (6.90514, 17.11237));
        assert!((s.relative_range - 0.850).abs() < 5e-4);
        let s = LifetimeSummary::from_lifetimes(&[16.33612, 16.76954]).unwrap();
        assert!((s.relative_range - 0.0262).abs() < 5e-5);
        assert!(LifetimeSummary::from_lifetimes(&[]).is_none());
    }

    #[test]
    fn config_validation() {
        assert!(GrowthConfig::default().validate().is_ok());
        let bad = GrowthConfig {
            theta_delta: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(GrowthError::Config {
                field: "theta_delta",
                ..
            })
        ));
        let bad = GrowthConfig {
            omega_threshold: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
