//! Cooperative relay planning for MWNCast.
//!
//! Node 0 is the source. A plan is a list of rounds, each a set of at most
//! `K - 1` relays and the fraction of slots it is active; in the remaining
//! time only the source transmits. [`select_relays`] binary-searches the
//! largest common rate every node can reach under such a plan.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for all capacity and time comparisons.
pub const EPS: f64 = 1e-9;
/// Default binary-search resolution of [`select_relays`].
pub const DEFAULT_DELTA: f64 = 1e-3;
/// Largest candidate set [`brute_force_cover`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 12;

pub const SOURCE: usize = 0;

/// Link reception probabilities and channel count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// `prp[i][j]`: probability that `j` receives a transmission of `i`.
    pub prp: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: usize,
}

impl Topology {
    pub fn new(prp: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        let t = Topology { prp, k };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.prp.len();
        if n < 2 {
            return Err(Error::Domain("topology needs a source and at least one receiver".into()));
        }
        if self.k < 1 {
            return Err(Error::Domain("channel count K must be at least 1".into()));
        }
        for (i, row) in self.prp.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Domain(format!("prp row {i} has {} entries, expected {n}", row.len())));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Domain(format!("prp row {i} has entry {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Node count including the source.
    pub fn n(&self) -> usize {
        self.prp.len()
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize) -> f64 {
        self.prp[i][j]
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> {
        1..self.n()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Topology = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("topology serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn with_k(mut self, k: usize) -> Result<Self> {
        self.k = k;
        self.validate()?;
        Ok(self)
    }
}

/// Relay subset chosen for one round and the best transmitter of each
/// receiver under it.
#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    /// Relays in the order they were added; the source is implicit.
    pub relays: Vec<usize>,
    /// `(receiver, transmitter)` pairs.
    pub assignment: Vec<(usize, usize)>,
    /// `Σ_j C_{R(j),j}`.
    pub capacity: f64,
}

/// Best transmitter among `active ∪ {s}` for `j`; lowest id on ties.
pub fn best_transmitter(active: &[usize], j: usize, topo: &Topology) -> usize {
    let mut best = SOURCE;
    for &i in active {
        let (ci, cb) = (topo.c(i, j), topo.c(best, j));
        if ci > cb + EPS || ((ci - cb).abs() <= EPS && i < best) {
            best = i;
        }
    }
    best
}

fn cover_of(relays: Vec<usize>, receivers: &[usize], topo: &Topology) -> Cover {
    let assignment: Vec<(usize, usize)> = receivers
        .iter()
        .map(|&j| (j, best_transmitter(&relays, j, topo)))
        .collect();
    let capacity = assignment.iter().map(|&(j, i)| topo.c(i, j)).sum();
    Cover {
        relays,
        assignment,
        capacity,
    }
}

/// Greedy maximum-capacity relay selection: starting from the source alone,
/// repeatedly adds the candidate with the largest positive residual gain
/// `Σ_j (C_{i,j} - C_{R(j),j})⁺`, up to `K - 1` relays.
pub fn greedy_cover(candidates: &[usize], receivers: &[usize], topo: &Topology) -> Cover {
    let mut relays: Vec<usize> = Vec::new();
    let mut current: Vec<f64> = receivers.iter().map(|&j| topo.c(SOURCE, j)).collect();
    let mut pool: Vec<usize> = candidates.iter().copied().filter(|&i| i != SOURCE).collect();
    pool.sort_unstable();
    pool.dedup();
    while relays.len() + 1 < topo.k {
        let mut best: Option<(usize, f64)> = None;
        for &i in pool.iter().filter(|i| !relays.contains(i)) {
            let gain: f64 = receivers
                .iter()
                .zip(&current)
                .filter(|(&j, _)| j != i)
                .map(|(&j, &c)| (topo.c(i, j) - c).max(0.0))
                .sum();
            if best.map_or(true, |(_, g)| gain > g + EPS) {
                best = Some((i, gain));
            }
        }
        match best {
            Some((i, gain)) if gain > EPS => {
                relays.push(i);
                for (&j, c) in receivers.iter().zip(current.iter_mut()) {
                    if j != i {
                        *c = c.max(topo.c(i, j));
                    }
                }
            }
            _ => break,
        }
    }
    cover_of(relays, receivers, topo)
}

/// Exhaustive optimum over every relay subset of size at most `K - 1`.
pub fn brute_force_cover(candidates: &[usize], receivers: &[usize], topo: &Topology) -> Result<Cover> {
    let mut pool: Vec<usize> = candidates.iter().copied().filter(|&i| i != SOURCE).collect();
    pool.sort_unstable();
    pool.dedup();
    if pool.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::Domain(format!(
            "brute force limited to {BRUTE_FORCE_LIMIT} candidates, got {}",
            pool.len()
        )));
    }
    let budget = topo.k.saturating_sub(1);
    let mut best = cover_of(Vec::new(), receivers, topo);
    for mask in 1u32..(1 << pool.len()) {
        if mask.count_ones() as usize > budget {
            continue;
        }
        let relays: Vec<usize> = (0..pool.len()).filter(|b| mask & (1 << b) != 0).map(|b| pool[b]).collect();
        let c = cover_of(relays, receivers, topo);
        if c.capacity > best.capacity + EPS {
            best = c;
        }
    }
    Ok(best)
}

/// One scheduled relay round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub relays: Vec<usize>,
    pub phi: f64,
}

/// Output of the planner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelayPlan {
    /// Common rate `C*` the plan supports.
    pub capacity: f64,
    pub rounds: Vec<Round>,
    /// Per round, the transmitter each end receiver listens to.
    pub assignment: Vec<BTreeMap<usize, usize>>,
    /// Nodes whose source link reaches the target.
    pub relays: Vec<usize>,
    /// The remaining nodes.
    pub receivers: Vec<usize>,
}

impl RelayPlan {
    /// Plan with no relay rounds.
    pub fn broadcast(topo: &Topology, capacity: f64) -> RelayPlan {
        RelayPlan {
            capacity,
            rounds: Vec::new(),
            assignment: Vec::new(),
            relays: Vec::new(),
            receivers: topo.nodes().collect(),
        }
    }

    pub fn total_share(&self) -> f64 {
        self.rounds.iter().map(|r| r.phi).sum()
    }

    /// `Φ_i`: share of time node `i` spends relaying.
    pub fn relay_share(&self, i: usize) -> f64 {
        self.rounds.iter().filter(|r| r.relays.contains(&i)).map(|r| r.phi).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Relay time allocation for target `c_t`. Returns `None` when some end
/// receiver cannot reach `c_t`.
pub fn allocate_relay_time(relays: &[usize], receivers: &[usize], c_t: f64, topo: &Topology) -> Option<RelayPlan> {
    let mut residual: BTreeMap<usize, f64> = relays
        .iter()
        .map(|&i| {
            let c0 = topo.c(SOURCE, i);
            (i, if c0 > 0.0 { (c0 - c_t) / c0 } else { 0.0 })
        })
        .collect();
    residual.retain(|_, c| *c > EPS);
    let mut demand: BTreeMap<usize, f64> = receivers.iter().map(|&j| (j, c_t)).collect();
    demand.retain(|_, d| *d > EPS);

    let mut rounds = Vec::new();
    let mut assignment = Vec::new();
    let mut used = 0.0;
    while !residual.is_empty() && !demand.is_empty() && used < 1.0 - EPS {
        let candidates: Vec<usize> = residual.keys().copied().collect();
        let open: Vec<usize> = demand.keys().copied().collect();
        let cover = greedy_cover(&candidates, &open, topo);
        if cover.relays.is_empty() {
            // nobody improves on the source; the completion step below
            // accounts for source-only time
            break;
        }
        let mut phi = 1.0 - used;
        for i in &cover.relays {
            phi = phi.min(residual[i]);
        }
        for &(j, tx) in &cover.assignment {
            let c = topo.c(tx, j);
            if c > 0.0 {
                phi = phi.min(demand[&j] / c);
            }
        }
        if phi <= EPS {
            break;
        }
        for i in &cover.relays {
            let r = residual.get_mut(i).expect("candidate");
            *r -= phi;
        }
        residual.retain(|_, c| *c > EPS);
        for &(j, tx) in &cover.assignment {
            let d = demand.get_mut(&j).expect("open receiver");
            *d -= phi * topo.c(tx, j);
        }
        demand.retain(|_, d| *d > EPS);
        used += phi;
        let all_receivers: BTreeMap<usize, usize> = receivers
            .iter()
            .map(|&j| (j, best_transmitter(&cover.relays, j, topo)))
            .collect();
        assignment.push(all_receivers);
        rounds.push(Round {
            relays: cover.relays,
            phi,
        });
    }

    // source-only completion: the leftover time serves receivers directly
    let rest = (1.0 - used).max(0.0);
    let feasible = demand.iter().all(|(&j, &d)| d <= rest * topo.c(SOURCE, j) + EPS);
    feasible.then(|| RelayPlan {
        capacity: c_t,
        rounds,
        assignment,
        relays: relays.to_vec(),
        receivers: receivers.to_vec(),
    })
}

/// Splits nodes by whether their source link reaches `c_t`.
pub fn partition(c_t: f64, topo: &Topology) -> (Vec<usize>, Vec<usize>) {
    topo.nodes().partition(|&j| topo.c(SOURCE, j) >= c_t - EPS)
}

/// Binary search for the largest feasible common rate, to resolution
/// `delta`. Returns `C*` and its plan.
pub fn select_relays(topo: &Topology, delta: f64) -> Result<(f64, RelayPlan)> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    topo.validate()?;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = RelayPlan::broadcast(topo, 0.0);
    // the full rate is feasible only if every source link is perfect
    let (r, e) = partition(1.0, topo);
    if let Some(plan) = allocate_relay_time(&r, &e, 1.0, topo) {
        return Ok((1.0, plan));
    }
    while hi - lo > delta {
        let c_t = 0.5 * (lo + hi);
        let (r, e) = partition(c_t, topo);
        match allocate_relay_time(&r, &e, c_t, topo) {
            Some(plan) => {
                lo = c_t;
                best = plan;
            }
            None => hi = c_t,
        }
    }
    Ok((lo, best))
}

/// Equivalent capacity `Ĉ` of every non-source node under `plan`, indexed
/// by node id (entry 0 unused).
///
/// Relays lose the time they spend relaying; end receivers collect from
/// their best transmitter in each round and from the source in the
/// remaining time.
pub fn equivalent_capacity(plan: &RelayPlan, topo: &Topology) -> Vec<f64> {
    let rest = (1.0 - plan.total_share()).max(0.0);
    let mut out = vec![0.0; topo.n()];
    for j in topo.nodes() {
        let phi_j = plan.relay_share(j);
        out[j] = if plan.relays.contains(&j) {
            (1.0 - phi_j) * topo.c(SOURCE, j)
        } else {
            // a node not listed as relay never transmits
            plan.rounds
                .iter()
                .map(|r| r.phi * topo.c(best_transmitter(&r.relays, j, topo), j))
                .sum::<f64>()
                + rest * topo.c(SOURCE, j)
        };
    }
    out
}

/// Round active in one slot: `Some(l)` when `ψ_{l-1} <= x < ψ_l`, `None`
/// for source-only.
pub fn draw_slot<R: Rng + ?Sized>(plan: &RelayPlan, rng: &mut R) -> Option<usize> {
    pick_round(plan, rng.gen::<f64>())
}

/// [`draw_slot`] for a given uniform draw `x`.
pub fn pick_round(plan: &RelayPlan, x: f64) -> Option<usize> {
    let mut psi = 0.0;
    for (l, r) in plan.rounds.iter().enumerate() {
        psi += r.phi;
        if x < psi {
            return Some(l);
        }
    }
    None
}
