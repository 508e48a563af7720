//! Monte Carlo oracles for the particle walk.
//!
//! [`ReflectedWalk`] is the exact slot-level stepper that a decoder's
//! `S(t)` follows under a given reception sequence. The `mc_*` functions
//! run the idealised two-state walk of the analytical model with plain
//! absorbing barriers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{PointProcessModel, WalkModel};
use crate::error::{Error, Result};
use crate::rational::Ratio;

/// Exact particle stepper driven by per-slot reception outcomes.
///
/// A reception moves the particle by `V - 1` unless the receiver already
/// knows every packet in the window (`S <= -V`), in which case it is wasted
/// and the particle moves by `+V`. When the packet just behind the next
/// window is still unseen it is given up and the particle jumps back by the
/// number of packets lost.
#[derive(Clone, Debug)]
pub struct ReflectedWalk {
    window: u64,
    speed: Ratio,
    slot: u64,
    /// Seen front `G + I - D`.
    seen: u64,
    /// Every packet up to here is decoded or lost.
    front: u64,
}

/// Outcome of one [`ReflectedWalk::step`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkStep {
    pub slot: u64,
    /// Packets recovered at this slot.
    pub decoded: u64,
    /// Packets given up at the end of this slot.
    pub lost: u64,
    pub position: Ratio,
}

impl ReflectedWalk {
    pub fn new(window: u64, speed: Ratio) -> Result<Self> {
        if window < 1 || speed.numer() <= 0 || speed > Ratio::integer(1) {
            return Err(Error::Domain(format!(
                "walk needs W >= 1 and V in (0, 1], got W={window}, V={speed}"
            )));
        }
        Ok(ReflectedWalk {
            window,
            speed,
            slot: 0,
            seen: 0,
            front: 0,
        })
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn seen_front(&self) -> u64 {
        self.seen
    }

    /// `S(t) = V·t - (G + I - D)` after the last step.
    pub fn position(&self) -> Ratio {
        self.speed
            .mul_int(self.slot as i64)
            .sub(Ratio::integer(self.seen as i64))
    }

    fn head(&self, t: u64) -> u64 {
        self.speed.ceil_mul(t) as u64
    }

    pub fn step(&mut self, received: bool) -> WalkStep {
        self.slot += 1;
        let t = self.slot;
        let head = self.head(t);
        if received && self.seen < head {
            self.seen += 1;
        }
        let mut decoded = 0;
        if self.seen == head && self.front < head {
            decoded = head - self.front;
            self.front = head;
        }
        let mut lost = 0;
        let edge = self.head(t + 1) as i64 - self.window as i64;
        if edge > self.seen as i64 {
            let edge = edge as u64;
            lost = edge - self.front;
            self.front = edge;
            self.seen = edge;
        }
        WalkStep {
            slot: t,
            decoded,
            lost,
            position: self.position(),
        }
    }
}

/// Whether landing exactly on the upper barrier counts as absorption.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum UpperRule {
    AtLeast,
    Above,
}

/// Empirical exit statistics of a barriered walk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub trials: u64,
    /// Trials stopped at the step cap without absorption.
    pub truncated: u64,
    pub p_upper: f64,
    pub p_upper_se: f64,
    pub p_lower: f64,
    pub e_n: f64,
    pub e_n_se: f64,
    pub e_n2: f64,
    pub e_n2_se: f64,
    /// `E[N | upper exit]`, zero without upper exits.
    pub time_upper: f64,
    /// `E[N | lower exit]`, zero without lower exits.
    pub time_lower: f64,
}

/// Per-trial step cap; keeps unstable models from running forever.
const MAX_STEPS: u64 = 10_000_000;
/// Number of rng streams; fixed so results do not depend on thread count.
const SHARDS: u64 = 64;
const EPS: f64 = 1e-9;

#[derive(Default, Clone, Copy)]
struct Tally {
    trials: u64,
    truncated: u64,
    upper: u64,
    sum_n: f64,
    sum_n2: f64,
    sum_n4: f64,
    sum_n_upper: f64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.trials += o.trials;
        self.truncated += o.truncated;
        self.upper += o.upper;
        self.sum_n += o.sum_n;
        self.sum_n2 += o.sum_n2;
        self.sum_n4 += o.sum_n4;
        self.sum_n_upper += o.sum_n_upper;
        self
    }

    fn finish(self) -> McEstimate {
        let n = self.trials as f64;
        let p = self.upper as f64 / n;
        let e_n = self.sum_n / n;
        let e_n2 = self.sum_n2 / n;
        let var_n = (e_n2 - e_n * e_n).max(0.0);
        let var_n2 = (self.sum_n4 / n - e_n2 * e_n2).max(0.0);
        let lower = self.trials - self.upper - self.truncated;
        McEstimate {
            trials: self.trials,
            truncated: self.truncated,
            p_upper: p,
            p_upper_se: (p * (1.0 - p) / n).sqrt(),
            p_lower: lower as f64 / n,
            e_n,
            e_n_se: (var_n / n).sqrt(),
            e_n2,
            e_n2_se: (var_n2 / n).sqrt(),
            time_upper: if self.upper > 0 {
                self.sum_n_upper / self.upper as f64
            } else {
                0.0
            },
            time_lower: if lower > 0 {
                (self.sum_n - self.sum_n_upper) / lower as f64
            } else {
                0.0
            },
        }
    }
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// Splits `trials` over the fixed shards, runs them in parallel and merges
/// in shard order.
fn run_sharded(trials: u64, seed: u64, one: impl Fn(&mut ChaCha8Rng) -> (u64, Option<bool>) + Sync) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one trial".into()));
    }
    let tallies: Vec<Tally> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let count = trials / SHARDS + u64::from(shard < trials % SHARDS);
            let mut rng = shard_rng(seed, shard);
            let mut t = Tally::default();
            for _ in 0..count {
                let (n, upper) = one(&mut rng);
                t.trials += 1;
                let nf = n as f64;
                t.sum_n += nf;
                t.sum_n2 += nf * nf;
                t.sum_n4 += nf * nf * nf * nf;
                match upper {
                    Some(true) => {
                        t.upper += 1;
                        t.sum_n_upper += nf;
                    }
                    Some(false) => {}
                    None => t.truncated += 1,
                }
            }
            t
        })
        .collect();
    Ok(tallies.into_iter().fold(Tally::default(), Tally::merge).finish())
}

/// Walk started at 0 with barriers `A` above and `-B` below.
pub fn mc_two_barrier(
    a: f64,
    b: f64,
    model: &WalkModel,
    rule: UpperRule,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("barriers must be positive, got A={a}, B={b}")));
    }
    let (c, dl, dr) = (model.c_hat, model.d_left(), model.d_right());
    run_sharded(trials, seed, move |rng| {
        let mut s = 0.0f64;
        for n in 1..=MAX_STEPS {
            s += if rng.gen::<f64>() < c { -dl } else { dr };
            let hit_upper = match rule {
                UpperRule::AtLeast => s >= a - EPS,
                UpperRule::Above => s > a + EPS,
            };
            if hit_upper {
                return (n, Some(true));
            }
            if s <= -b + EPS {
                return (n, Some(false));
            }
        }
        (MAX_STEPS, None)
    })
}

/// Walk started at `d_R` until it first reaches 0 or below: the decode
/// recurrence time.
pub fn mc_single_barrier(model: &WalkModel, trials: u64, seed: u64) -> Result<McEstimate> {
    mc_two_barrier(f64::INFINITY, model.d_right(), model, UpperRule::Above, trials, seed)
}

/// Empirical transition statistics of the decode/loss point process, from
/// the same starts and barriers as [`super::point_process`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McPointProcess {
    pub from_decode: McEstimate,
    pub from_loss: McEstimate,
}

impl McPointProcess {
    pub fn p_dl(&self) -> f64 {
        self.from_decode.p_upper
    }
    pub fn p_dd(&self) -> f64 {
        self.from_decode.p_lower
    }
    pub fn p_ll(&self) -> f64 {
        self.from_loss.p_upper
    }
    pub fn p_ld(&self) -> f64 {
        self.from_loss.p_lower
    }
}

pub fn mc_point_process(window: u64, model: &WalkModel, trials: u64, seed: u64) -> Result<McPointProcess> {
    if window < 2 {
        return Err(Error::Domain("point process needs W >= 2".into()));
    }
    let top = window as f64 - model.v;
    let run = |start: f64, seed: u64| mc_two_barrier(top - start, start + model.v, model, UpperRule::Above, trials, seed);
    Ok(McPointProcess {
        from_decode: run(model.d_right(), seed)?,
        from_loss: run(window as f64 - 1.0, seed.wrapping_add(1))?,
    })
}

/// Differences between a closed-form point process and its Monte Carlo
/// counterpart, as the largest absolute gap over the four probabilities.
pub fn max_probability_gap(model: &PointProcessModel, mc: &McPointProcess) -> f64 {
    [
        (model.p_dd - mc.p_dd()).abs(),
        (model.p_dl - mc.p_dl()).abs(),
        (model.p_ld - mc.p_ld()).abs(),
        (model.p_ll - mc.p_ll()).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(c: f64, v: f64) -> WalkModel {
        WalkModel::new(c, v).unwrap()
    }

    #[test]
    fn perfect_channel_has_no_variance() {
        let e = mc_single_barrier(&m(1.0, 0.5), 1000, 1).unwrap();
        assert_eq!(e.e_n, 1.0);
        assert_eq!(e.e_n_se, 0.0);
        let e = mc_single_barrier(&m(1.0, 0.75), 1000, 1).unwrap();
        assert_eq!(e.e_n, 3.0);
        assert_eq!(e.p_lower, 1.0);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let model = m(0.8, 0.6);
        let a = mc_two_barrier(2.4, 0.6, &model, UpperRule::AtLeast, 10_001, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool
            .install(|| mc_two_barrier(2.4, 0.6, &model, UpperRule::AtLeast, 10_001, 9))
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials, 10_001);
    }

    #[test]
    fn standard_error_shrinks_like_root_n() {
        let model = m(0.8, 0.6);
        let small = mc_single_barrier(&model, 4_000, 3).unwrap();
        let large = mc_single_barrier(&model, 400_000, 3).unwrap();
        let slope = (large.e_n_se / small.e_n_se).ln() / 100f64.ln();
        assert!((slope + 0.5).abs() < 0.1, "{slope}");
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(mc_single_barrier(&m(0.8, 0.6), 0, 1).is_err());
    }

    #[test]
    fn walk_steps_follow_rules() {
        let mut w = ReflectedWalk::new(3, Ratio::new(1, 2).unwrap()).unwrap();
        // slot 1: head 1, reception decodes packet 1
        let s = w.step(true);
        assert_eq!((s.decoded, s.lost), (1, 0));
        assert_eq!(s.position, Ratio::new(-1, 2).unwrap());
        // slot 2: head still 1, reception wasted
        let s = w.step(true);
        assert_eq!(s.position, Ratio::integer(0));
        assert_eq!(s.decoded, 0);
        // erasures until the window passes packet 2
        let mut lost = 0;
        for _ in 0..6 {
            lost += w.step(false).lost;
        }
        assert!(lost >= 1);
        assert!(w.position() <= Ratio::integer(3));
    }
}
