//! Branch and bound over the unit-status binaries: depth first until the
//! first incumbent, best first afterwards, branching on the fractional
//! column with the best pseudocost score (statuses before other columns).
//!
//! Nodes are evaluated in fixed-size batches. Every node solve starts from
//! its parent's basis with freshly reset engine state, so the outcome of a
//! node does not depend on which worker ran it, and outcomes are applied in
//! batch order. The search is therefore identical for any worker count.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lp::{Basis, DualSimplex, LpError, LpProblem, LpSolution, LpStatus, ScaledLp};

const BATCH: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MipError {
    #[error("root relaxation failed: {0}")]
    Root(LpError),
    #[error("root relaxation is unbounded")]
    Unbounded,
    #[error("invalid options: {0}")]
    Options(&'static str),
}

/// Security-active step: unit status columns plus, per combination, its
/// member positions and its `s` and `f` columns.
#[derive(Debug, Clone)]
pub struct CombinationGroup {
    pub units: Vec<usize>,
    pub combos: Vec<(Vec<usize>, usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct MipProblem {
    pub lp: LpProblem,
    pub integer: Vec<bool>,
    /// Columns the search may branch on; other integer columns must be
    /// settled by the combination groups.
    pub branchable: Vec<bool>,
    /// On/off statuses, branched on before other columns.
    pub status: Vec<bool>,
    pub groups: Vec<CombinationGroup>,
}

impl MipProblem {
    /// Plain MIP: every integer column is branchable, no groups.
    pub fn new(lp: LpProblem, integer: Vec<bool>) -> Self {
        MipProblem {
            branchable: integer.clone(),
            status: vec![false; integer.len()],
            integer,
            lp,
            groups: Vec::new(),
        }
    }

    /// Fixes `s`/`f` of every group whose unit statuses are all fixed.
    /// Returns false when the fixed statuses admit no combination.
    fn propagate(&self, lower: &mut [f64], upper: &mut [f64]) -> bool {
        for g in &self.groups {
            if g.units.iter().any(|&c| lower[c] != upper[c]) {
                continue;
            }
            let online: Vec<usize> = (0..g.units.len()).filter(|&r| lower[g.units[r]] > 0.5).collect();
            if !g.combos.iter().any(|(m, ..)| *m == online) {
                return false;
            }
            for (members, s, f) in &g.combos {
                let sv = if *members == online { 1.0 } else { 0.0 };
                let fv = members.iter().filter(|r| online.contains(r)).count() as f64;
                if sv < lower[*s] || sv > upper[*s] || fv < lower[*f] || fv > upper[*f] {
                    return false;
                }
                lower[*s] = sv;
                upper[*s] = sv;
                lower[*f] = fv;
                upper[*f] = fv;
            }
        }
        true
    }

    /// Copy with big binary coefficients shrunk to the smallest values that
    /// keep every integral point feasible or infeasible as before. Only
    /// one-sided rows over finitely bounded columns are touched.
    pub fn tightened(&self) -> MipProblem {
        let mut out = self.clone();
        let lp = &mut out.lp;
        let binary: Vec<bool> = (0..lp.n_cols())
            .map(|j| self.integer[j] && lp.col_lower[j] == 0.0 && lp.col_upper[j] == 1.0)
            .collect();
        for i in 0..lp.rows.len() {
            let (sign, rhs) = match (lp.row_lower[i].is_finite(), lp.row_upper[i].is_finite()) {
                (false, true) => (1.0, lp.row_upper[i]),
                (true, false) => (-1.0, -lp.row_lower[i]),
                _ => continue,
            };
            let mut row: Vec<(usize, f64)> = lp.rows[i].iter().map(|&(j, a)| (j, sign * a)).collect();
            let mut b = rhs;
            for k in 0..row.len() {
                let (c, a) = row[k];
                if !binary[c] {
                    continue;
                }
                let rest: f64 = row
                    .iter()
                    .enumerate()
                    .filter(|&(h, _)| h != k)
                    .map(|(_, &(j, aj))| (aj * lp.col_lower[j]).max(aj * lp.col_upper[j]))
                    .sum();
                if !rest.is_finite() {
                    break;
                }
                let guard = 1e-9 * (1.0 + b.abs());
                if a > 0.0 && b - rest > guard && rest + a > b {
                    // redundant when off: shift the slack out of the coefficient
                    row[k].1 = (a - b) + rest;
                    b = rest;
                } else if a < 0.0 && b - a - rest > guard && rest >= b {
                    // redundant when on
                    row[k].1 = b - rest;
                }
            }
            lp.rows[i] = row.into_iter().map(|(j, a)| (j, sign * a)).collect();
            if sign > 0.0 {
                lp.row_upper[i] = b;
            } else {
                lp.row_lower[i] = -b;
            }
        }
        out
    }

    /// First group whose LP values disagree with the maximal online
    /// combination implied by the (integral) unit statuses.
    fn inconsistent_group(&self, x: &[f64], tol: f64) -> Option<&CombinationGroup> {
        self.groups.iter().find(|g| {
            let online: Vec<usize> = (0..g.units.len()).filter(|&r| x[g.units[r]] > 0.5).collect();
            if !g.combos.iter().any(|(m, ..)| *m == online) {
                return true;
            }
            g.combos.iter().any(|(members, s, f)| {
                let sv = if *members == online { 1.0 } else { 0.0 };
                let fv = members.iter().filter(|r| online.contains(r)).count() as f64;
                (x[*s] - sv).abs() > tol || (x[*f] - fv).abs() > tol
            })
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MipOptions {
    /// Relative gap at which the search stops.
    pub gap_tol: f64,
    pub node_limit: usize,
    /// Seconds.
    pub time_limit: f64,
    pub workers: usize,
    pub integrality_tol: f64,
    /// Largest accepted row violation of an incumbent, relative to the
    /// row's largest coefficient.
    pub feasibility_tol: f64,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            gap_tol: 0.01,
            node_limit: 1_000_000,
            time_limit: 300.0,
            workers: 1,
            integrality_tol: 1e-6,
            feasibility_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MipStatus {
    Optimal,
    /// Stopped with a gap within tolerance but not proven optimal.
    Feasible,
    Infeasible,
    LimitReached,
}

#[derive(Debug, Clone)]
pub struct MipResult {
    pub status: MipStatus,
    pub incumbent: Option<LpSolution>,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes_explored: usize,
    pub wall_time: f64,
    pub lp_iterations: usize,
    /// Every accepted incumbent in the order found; the last is `incumbent`.
    pub history: Vec<Vec<f64>>,
}

impl MipResult {
    pub fn objective(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|s| s.objective)
    }
}

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    depth: usize,
    bound: f64,
    changes: Vec<(usize, f64, f64)>,
    basis: Option<Arc<Basis>>,
    depth_first: bool,
    /// Branching that created the node: column, up branch, distance moved
    /// and the parent bound.
    origin: Option<(usize, bool, f64, f64)>,
}

/// Average objective gain per unit change, per column and direction.
struct Pseudocosts {
    sum: Vec<[f64; 2]>,
    count: Vec<[u32; 2]>,
    total: [f64; 2],
    total_count: [u32; 2],
}

impl Pseudocosts {
    fn new(n: usize) -> Self {
        Pseudocosts { sum: vec![[0.0; 2]; n], count: vec![[0; 2]; n], total: [0.0; 2], total_count: [0; 2] }
    }

    fn record(&mut self, j: usize, up: bool, dist: f64, gain: f64) {
        if dist <= 0.0 || !gain.is_finite() {
            return;
        }
        let per_unit = gain.max(0.0) / dist;
        let d = up as usize;
        self.sum[j][d] += per_unit;
        self.count[j][d] += 1;
        self.total[d] += per_unit;
        self.total_count[d] += 1;
    }

    fn estimate(&self, j: usize, up: bool) -> f64 {
        let d = up as usize;
        if self.count[j][d] > 0 {
            self.sum[j][d] / self.count[j][d] as f64
        } else if self.total_count[d] > 0 {
            self.total[d] / self.total_count[d] as f64
        } else {
            1.0
        }
    }

    /// Product score of the two estimated child gains.
    fn score(&self, j: usize, value: f64) -> f64 {
        let down = (value - value.floor()) * self.estimate(j, false);
        let up = (value.ceil() - value) * self.estimate(j, true);
        down.max(1e-6) * up.max(1e-6)
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap: the greatest node is explored next
    fn cmp(&self, other: &Self) -> Ordering {
        if self.depth_first {
            self.depth.cmp(&other.depth).then(self.id.cmp(&other.id))
        } else {
            other
                .bound
                .total_cmp(&self.bound)
                .then(other.id.cmp(&self.id))
        }
    }
}

enum Outcome {
    Infeasible,
    Pruned(f64),
    Integral(f64, Vec<f64>),
    Branch {
        bound: f64,
        var: usize,
        value: f64,
        basis: Arc<Basis>,
        candidate: Option<(f64, Vec<f64>)>,
    },
    Failed(LpError),
}

struct Worker {
    engine: DualSimplex,
    lower: Vec<f64>,
    upper: Vec<f64>,
    iterations: usize,
}

impl Worker {
    fn new(scaled: &Arc<ScaledLp>, lp: &LpProblem) -> Self {
        Worker {
            engine: DualSimplex::new(Arc::clone(scaled)),
            lower: lp.col_lower.clone(),
            upper: lp.col_upper.clone(),
            iterations: 0,
        }
    }

    /// Applies `lower`/`upper` to the engine and solves from `basis`.
    fn solve_with(&mut self, p: &MipProblem, basis: &Basis) -> Result<LpStatus, LpError> {
        self.engine.reset_bounds();
        for j in 0..self.lower.len() {
            if self.lower[j] != p.lp.col_lower[j] || self.upper[j] != p.lp.col_upper[j] {
                self.engine.set_col_bounds(j, self.lower[j], self.upper[j]);
            }
        }
        self.engine.load_basis(basis);
        let status = self.engine.solve();
        log::trace!("lp {:?} in {} iterations", status, self.engine.iterations());
        self.iterations += self.engine.iterations();
        status
    }

    fn evaluate(&mut self, p: &MipProblem, node: &Node, cutoff: f64, cold: &Basis, pc: &Pseudocosts, opts: &MipOptions) -> Outcome {
        self.lower.copy_from_slice(&p.lp.col_lower);
        self.upper.copy_from_slice(&p.lp.col_upper);
        for &(j, lo, hi) in &node.changes {
            self.lower[j] = lo;
            self.upper[j] = hi;
        }
        if !p.propagate(&mut self.lower, &mut self.upper) {
            return Outcome::Infeasible;
        }
        let basis = node.basis.as_deref().unwrap_or(cold);
        match self.solve_with(p, basis) {
            Err(e) => return Outcome::Failed(e),
            Ok(LpStatus::Optimal) => {}
            Ok(_) => return Outcome::Infeasible,
        }
        let bound = self.engine.objective();
        if bound >= cutoff {
            return Outcome::Pruned(bound);
        }
        let x = self.engine.values();
        let node_basis = Arc::new(self.engine.basis());

        // best pseudocost score among fractional columns, statuses first,
        // ties to the smallest index
        let mut best: Option<(usize, bool, f64)> = None;
        for j in 0..x.len() {
            if !p.branchable[j] {
                continue;
            }
            let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
            if frac <= opts.integrality_tol {
                continue;
            }
            let score = pc.score(j, x[j]);
            if best.is_none_or(|(_, st, sc)| (p.status[j], score) > (st, sc)) {
                best = Some((j, p.status[j], score));
            }
        }
        if let Some((var, ..)) = best {
            return Outcome::Branch { bound, var, value: x[var], basis: node_basis, candidate: None };
        }

        let integral = (0..x.len())
            .all(|j| !p.integer[j] || (x[j] - x[j].round()).abs() <= opts.integrality_tol);
        let Some(group) = p.inconsistent_group(&x, opts.integrality_tol) else {
            if integral {
                return Outcome::Integral(bound, x);
            }
            warn!("integer column left fractional outside any group; treating node as integral");
            return Outcome::Integral(bound, x);
        };
        // unit statuses are integral but the combination variables cheat:
        // try the fully fixed completion, then split on a free status
        let var = group
            .units
            .iter()
            .copied()
            .find(|&c| self.lower[c] != self.upper[c]);
        let candidate = self.fixed_completion(p, &x, &node_basis);
        match var {
            Some(var) => Outcome::Branch { bound, var, value: x[var], basis: node_basis, candidate },
            None => match candidate {
                Some((obj, xc)) => Outcome::Integral(obj, xc),
                None => Outcome::Infeasible,
            },
        }
    }

    fn fixed_completion(&mut self, p: &MipProblem, x: &[f64], basis: &Basis) -> Option<(f64, Vec<f64>)> {
        for j in 0..x.len() {
            if p.branchable[j] {
                let v = x[j].round().clamp(self.lower[j], self.upper[j]);
                self.lower[j] = v;
                self.upper[j] = v;
            }
        }
        if !p.propagate(&mut self.lower, &mut self.upper) {
            return None;
        }
        match self.solve_with(p, basis) {
            Ok(LpStatus::Optimal) => Some((self.engine.objective(), self.engine.values())),
            _ => None,
        }
    }
}

/// Largest row violation divided by the row's largest coefficient, plus
/// plain bound violations.
fn scaled_violation(lp: &LpProblem, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..lp.n_cols() {
        worst = worst.max(lp.col_lower[j] - x[j]).max(x[j] - lp.col_upper[j]);
    }
    for (i, row) in lp.rows.iter().enumerate() {
        let act: f64 = row.iter().map(|&(j, a)| a * x[j]).sum();
        let scale = row.iter().fold(1.0f64, |m, &(_, a)| m.max(a.abs()));
        let v = (lp.row_lower[i] - act).max(act - lp.row_upper[i]);
        worst = worst.max(v / scale);
    }
    worst
}

struct Search<'a> {
    p: &'a MipProblem,
    opts: &'a MipOptions,
    incumbent: Option<(f64, Vec<f64>)>,
    history: Vec<Vec<f64>>,
    /// Smallest bound among nodes discarded by the gap rule.
    pruned_bound: f64,
    next_id: u64,
    nodes: usize,
}

impl Search<'_> {
    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            None => f64::INFINITY,
            Some((obj, _)) => {
                let scale = obj.abs().max(1.0);
                obj - (self.opts.gap_tol * scale).max(1e-9 * scale)
            }
        }
    }

    fn offer(&mut self, obj: f64, mut x: Vec<f64>) {
        for j in 0..x.len() {
            if self.p.integer[j] {
                x[j] = x[j].round();
            }
        }
        let viol = scaled_violation(&self.p.lp, &x);
        if viol > self.opts.feasibility_tol {
            warn!("rejecting incumbent candidate {obj}: violation {viol:e}");
            return;
        }
        let obj = self.p.lp.objective(&x);
        if self.incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
            info!("incumbent {obj:.4} after {} nodes", self.nodes);
            self.history.push(x.clone());
            self.incumbent = Some((obj, x));
        }
    }

    fn child(&mut self, parent: &Node, bound: f64, basis: &Arc<Basis>, change: (usize, f64, f64)) -> Node {
        let mut changes = parent.changes.clone();
        changes.push(change);
        self.next_id += 1;
        Node {
            id: self.next_id,
            depth: parent.depth + 1,
            bound,
            changes,
            basis: Some(Arc::clone(basis)),
            depth_first: self.incumbent.is_none(),
            origin: None,
        }
    }
}

pub fn solve_mip(p: &MipProblem, opts: &MipOptions) -> Result<MipResult, MipError> {
    if !(opts.gap_tol >= 0.0) || opts.time_limit <= 0.0 || opts.node_limit == 0 {
        return Err(MipError::Options("gap must be >= 0, limits positive"));
    }
    let start = Instant::now();
    let time_limit = Duration::from_secs_f64(opts.time_limit);
    let scaled = Arc::new(ScaledLp::new(&p.lp).map_err(MipError::Root)?);
    let cold = DualSimplex::new(Arc::clone(&scaled)).basis();
    let n_workers = opts.workers.clamp(1, BATCH);
    let mut workers: Vec<Worker> = (0..n_workers).map(|_| Worker::new(&scaled, &p.lp)).collect();
    let mut search = Search {
        p,
        opts,
        incumbent: None,
        history: Vec::new(),
        pruned_bound: f64::INFINITY,
        next_id: 0,
        nodes: 0,
    };

    // the root must solve; a failure there is an error, not a pruned node
    let root_basis = {
        let w = &mut workers[0];
        w.lower.copy_from_slice(&p.lp.col_lower);
        w.upper.copy_from_slice(&p.lp.col_upper);
        match w.solve_with(p, &cold) {
            Err(e) => return Err(MipError::Root(e)),
            Ok(LpStatus::Unbounded) => return Err(MipError::Unbounded),
            Ok(LpStatus::Optimal) => Some(Arc::new(w.engine.basis())),
            Ok(LpStatus::Infeasible) => None,
        }
    };
    let root = Node {
        id: 0,
        depth: 0,
        bound: f64::NEG_INFINITY,
        changes: Vec::new(),
        basis: root_basis,
        depth_first: true,
        origin: None,
    };

    let mut queue = BinaryHeap::new();
    queue.push(root);
    let mut limit_hit = false;
    let mut switched = false;
    let mut failures = 0usize;
    let mut pseudo = Pseudocosts::new(p.lp.n_cols());

    while !queue.is_empty() {
        if search.nodes >= opts.node_limit || start.elapsed() >= time_limit {
            limit_hit = true;
            break;
        }
        if search.incumbent.is_some() && !switched {
            // first incumbent found: re-key the open nodes best-first
            switched = true;
            let nodes: Vec<Node> = queue.drain().collect();
            queue = nodes
                .into_iter()
                .map(|mut n| {
                    n.depth_first = false;
                    n
                })
                .collect();
        }
        if switched {
            let bound = queue.peek().map(|n| n.bound).unwrap_or(f64::INFINITY);
            let (inc, _) = search.incumbent.as_ref().expect("incumbent");
            let lower = bound.min(search.pruned_bound);
            if (inc - lower) / inc.abs().max(1.0) <= opts.gap_tol {
                break;
            }
        }

        let cutoff = search.cutoff();
        let mut batch = Vec::with_capacity(BATCH);
        while batch.len() < BATCH {
            let Some(node) = queue.pop() else { break };
            if node.bound >= cutoff {
                search.pruned_bound = search.pruned_bound.min(node.bound);
                continue;
            }
            batch.push(node);
        }
        if batch.is_empty() {
            continue;
        }

        let outcomes: Vec<Outcome> = if n_workers == 1 || batch.len() == 1 {
            batch
                .iter()
                .map(|n| workers[0].evaluate(p, n, cutoff, &cold, &pseudo, opts))
                .collect()
        } else {
            let mut slots: Vec<Option<Outcome>> = (0..batch.len()).map(|_| None).collect();
            std::thread::scope(|scope| {
                let handles: Vec<_> = workers
                    .iter_mut()
                    .enumerate()
                    .map(|(w, worker)| {
                        let batch = &batch;
                        let cold = &cold;
                        let pseudo = &pseudo;
                        scope.spawn(move || {
                            (w..batch.len())
                                .step_by(n_workers)
                                .map(|k| (k, worker.evaluate(p, &batch[k], cutoff, cold, pseudo, opts)))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                for h in handles {
                    for (k, out) in h.join().expect("worker panicked") {
                        slots[k] = Some(out);
                    }
                }
            });
            slots.into_iter().map(|o| o.expect("every node evaluated")).collect()
        };

        for (node, outcome) in batch.iter().zip(outcomes) {
            search.nodes += 1;
            if let Some((j, up, dist, parent)) = node.origin {
                let child = match &outcome {
                    Outcome::Pruned(b) | Outcome::Integral(b, _) | Outcome::Branch { bound: b, .. } => Some(*b),
                    _ => None,
                };
                if let Some(b) = child {
                    pseudo.record(j, up, dist, b - parent);
                }
            }
            match outcome {
                Outcome::Infeasible => {}
                Outcome::Pruned(bound) => search.pruned_bound = search.pruned_bound.min(bound),
                Outcome::Failed(e) => {
                    failures += 1;
                    warn!("node {} dropped: {e}", node.id);
                    search.pruned_bound = search.pruned_bound.min(node.bound);
                }
                Outcome::Integral(obj, x) => search.offer(obj, x),
                Outcome::Branch { bound, var, value, basis, candidate } => {
                    if let Some((obj, x)) = candidate {
                        search.offer(obj, x);
                    }
                    if bound >= search.cutoff() {
                        search.pruned_bound = search.pruned_bound.min(bound);
                        continue;
                    }
                    let (lo, hi) = (p.lp.col_lower[var], p.lp.col_upper[var]);
                    let current = node
                        .changes
                        .iter()
                        .rev()
                        .find(|c| c.0 == var)
                        .map(|c| (c.1, c.2))
                        .unwrap_or((lo, hi));
                    let (down, up, prefer_up) = if (value - value.round()).abs() <= opts.integrality_tol {
                        // integral value: split so both children exclude the parent
                        let v = value.round();
                        if v < current.1 {
                            ((var, current.0, v), (var, v + 1.0, current.1), false)
                        } else {
                            ((var, current.0, v - 1.0), (var, v, current.1), true)
                        }
                    } else {
                        (
                            (var, current.0, value.floor()),
                            (var, value.ceil(), current.1),
                            value - value.floor() >= 0.5,
                        )
                    };
                    // the preferred child is created last so depth-first
                    // search explores it first
                    let order = if prefer_up { [down, up] } else { [up, down] };
                    for change in order {
                        if change.1 > change.2 {
                            continue;
                        }
                        let mut child = search.child(node, bound, &basis, change);
                        let up = change.1 > current.0;
                        let dist = if up { change.1 - value } else { value - change.2 };
                        child.origin = Some((var, up, dist, bound));
                        queue.push(child);
                    }
                }
            }
        }
        debug!("{} nodes, {} open", search.nodes, queue.len());
    }

    let wall_time = start.elapsed().as_secs_f64();
    let lp_iterations = workers.iter().map(|w| w.iterations).sum();
    let open_bound = queue.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    if failures > 0 {
        warn!("{failures} nodes dropped after LP failures; their parent bounds are kept");
    }
    let Some((obj, x)) = search.incumbent.take() else {
        let status = if limit_hit { MipStatus::LimitReached } else { MipStatus::Infeasible };
        return Ok(MipResult {
            status,
            incumbent: None,
            best_bound: open_bound.min(search.pruned_bound),
            gap: f64::INFINITY,
            nodes_explored: search.nodes,
            wall_time,
            lp_iterations,
            history: Vec::new(),
        });
    };
    let best_bound = open_bound.min(search.pruned_bound).min(obj);
    let gap = ((obj - best_bound) / obj.abs().max(1.0)).max(0.0);
    let status = if limit_hit && gap > opts.gap_tol {
        MipStatus::LimitReached
    } else if gap <= 1e-9 {
        MipStatus::Optimal
    } else {
        MipStatus::Feasible
    };
    let incumbent = LpSolution {
        status: LpStatus::Optimal,
        objective: obj,
        row_activity: p.lp.row_activity(&x),
        x,
        duals: Vec::new(),
        reduced_costs: Vec::new(),
        infeasible_row: None,
        iterations: lp_iterations,
    };
    Ok(MipResult {
        status,
        incumbent: Some(incumbent),
        best_bound,
        gap,
        nodes_explored: search.nodes,
        wall_time,
        lp_iterations,
        history: search.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn one_binary_by_hand() {
        // min 3b + x, x >= 1 - b, x in [0, 1]
        let mut lp = LpProblem::new();
        let b = lp.add_col(3.0, 0.0, 1.0);
        let x = lp.add_col(1.0, 0.0, 1.0);
        lp.add_row(vec![(x, 1.0), (b, 1.0)], 1.0, INF);
        let p = MipProblem::new(lp, vec![true, false]);
        let r = solve_mip(&p, &MipOptions { gap_tol: 0.0, ..Default::default() }).unwrap();
        assert_eq!(r.status, MipStatus::Optimal);
        let inc = r.incumbent.unwrap();
        assert_eq!(r.history.last(), Some(&inc.x));
        assert_eq!(inc.x[b], 0.0);
        assert!((inc.x[x] - 1.0).abs() < 1e-12);
        assert!((inc.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tightening_keeps_integral_points() {
        // p + 1e9 s <= 1e9 + 2 and 5 s - p - 1e9 z >= -1e9 - 1
        let mut lp = LpProblem::new();
        let pv = lp.add_col(0.0, 0.0, 4.0);
        let s = lp.add_col(0.0, 0.0, 1.0);
        let z = lp.add_col(0.0, 0.0, 1.0);
        lp.add_row(vec![(pv, 1.0), (s, 1e9)], -INF, 1e9 + 2.0);
        lp.add_row(vec![(s, 5.0), (pv, -1.0), (z, -1e9)], -1e9 - 1.0, INF);
        let p = MipProblem::new(lp, vec![false, true, true]);
        let t = p.tightened();
        let big = t.lp.rows.iter().flatten().fold(0.0f64, |m, &(_, a)| m.max(a.abs()));
        assert!(big <= 5.0, "{:?}", t.lp.rows);
        let ok = |lp: &LpProblem, x: &[f64]| {
            lp.rows.iter().enumerate().all(|(i, r)| {
                let act: f64 = r.iter().map(|&(j, a)| a * x[j]).sum();
                act >= lp.row_lower[i] - 1e-6 && act <= lp.row_upper[i] + 1e-6
            })
        };
        for sv in [0.0, 1.0] {
            for zv in [0.0, 1.0] {
                for k in 0..=40 {
                    let x = [k as f64 * 0.1, sv, zv];
                    assert_eq!(ok(&p.lp, &x), ok(&t.lp, &x), "{x:?}");
                }
            }
        }
    }

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> MipProblem {
        let mut lp = LpProblem::new();
        for &v in values {
            lp.add_col(-v, 0.0, 1.0);
        }
        lp.add_row(weights.iter().copied().enumerate().collect(), -INF, cap);
        MipProblem::new(lp, vec![true; values.len()])
    }

    fn knapsack_brute(values: &[f64], weights: &[f64], cap: f64) -> f64 {
        let n = values.len();
        (0u32..1 << n)
            .filter_map(|mask| {
                let (mut v, mut w) = (0.0, 0.0);
                for k in 0..n {
                    if mask >> k & 1 == 1 {
                        v += values[k];
                        w += weights[k];
                    }
                }
                (w <= cap).then_some(-v)
            })
            .fold(INF, f64::min)
    }

    #[test]
    fn zero_gap_matches_enumeration_and_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..15 {
            let n = rng.random_range(3..=10);
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..20.0f64).round()).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..10.0f64).round()).collect();
            let cap = weights.iter().sum::<f64>() * 0.5;
            let p = knapsack(&values, &weights, cap);
            let r = solve_mip(&p, &MipOptions { gap_tol: 0.0, ..Default::default() }).unwrap();
            let want = knapsack_brute(&values, &weights, cap);
            let got = r.objective().unwrap();
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
            assert!((got - r.best_bound).abs() <= 1e-9 * got.abs().max(1.0));
            assert_eq!(r.status, MipStatus::Optimal);
        }
    }

    #[test]
    fn worker_count_does_not_change_the_result() {
        let values = [12.0, 7.0, 9.0, 14.0, 3.0, 8.0, 11.0, 6.0, 10.0, 5.0, 13.0, 4.0];
        let weights = [5.0, 3.0, 4.0, 7.0, 1.0, 4.0, 6.0, 3.0, 5.0, 2.0, 6.0, 2.0];
        let p = knapsack(&values, &weights, 21.0);
        let runs: Vec<MipResult> = [1, 2, 4]
            .iter()
            .map(|&w| solve_mip(&p, &MipOptions { gap_tol: 0.0, workers: w, ..Default::default() }).unwrap())
            .collect();
        for r in &runs[1..] {
            assert_eq!(r.objective(), runs[0].objective());
            assert_eq!(r.incumbent.as_ref().unwrap().x, runs[0].incumbent.as_ref().unwrap().x);
            assert_eq!(r.nodes_explored, runs[0].nodes_explored);
        }
    }

    #[test]
    fn infeasible_problem() {
        let mut lp = LpProblem::new();
        let a = lp.add_col(1.0, 0.0, 1.0);
        let b = lp.add_col(1.0, 0.0, 1.0);
        // a + b = 1 and a - b = 0 has only the fractional point
        lp.add_row(vec![(a, 1.0), (b, 1.0)], 1.0, 1.0);
        lp.add_row(vec![(a, 1.0), (b, -1.0)], 0.0, 0.0);
        let r = solve_mip(&MipProblem::new(lp, vec![true, true]), &MipOptions::default()).unwrap();
        assert_eq!(r.status, MipStatus::Infeasible);
        assert!(r.incumbent.is_none());
    }

    #[test]
    fn node_limit_reports_limit() {
        let values: Vec<f64> = (0..16).map(|k| 10.0 + (k * 7 % 11) as f64).collect();
        let weights: Vec<f64> = (0..16).map(|k| 3.0 + (k * 5 % 7) as f64).collect();
        let p = knapsack(&values, &weights, 31.5);
        let r = solve_mip(&p, &MipOptions { gap_tol: 0.0, node_limit: 3, ..Default::default() }).unwrap();
        assert_eq!(r.status, MipStatus::LimitReached);
        assert!(r.nodes_explored <= 3 + BATCH);
    }

    #[test]
    fn group_propagation_fixes_combinations() {
        // two units, one combination {0, 1}
        let mut lp = LpProblem::new();
        let z0 = lp.add_col(0.0, 1.0, 1.0);
        let z1 = lp.add_col(0.0, 1.0, 1.0);
        let s = lp.add_col(0.0, 0.0, 1.0);
        let f = lp.add_col(0.0, 0.0, 2.0);
        let p = MipProblem {
            integer: vec![true; 4],
            branchable: vec![true, true, false, false],
            status: vec![true, true, false, false],
            groups: vec![CombinationGroup { units: vec![z0, z1], combos: vec![(vec![0, 1], s, f)] }],
            lp,
        };
        let mut lo = p.lp.col_lower.clone();
        let mut hi = p.lp.col_upper.clone();
        assert!(p.propagate(&mut lo, &mut hi));
        assert_eq!((lo[s], hi[s], lo[f], hi[f]), (1.0, 1.0, 2.0, 2.0));
        // only one unit online: no admissible combination
        let mut lo = p.lp.col_lower.clone();
        let mut hi = p.lp.col_upper.clone();
        lo[z1] = 0.0;
        hi[z1] = 0.0;
        assert!(!p.propagate(&mut lo, &mut hi));
    }
}
