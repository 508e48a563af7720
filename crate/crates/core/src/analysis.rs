//! Random-walk and point-process models of MWNC decode and loss events.
//!
//! A receiver with equivalent capacity `Ĉ` and window speed `V` is a walk
//! whose step is `-(1 - V)` with probability `Ĉ` (a useful reception) and
//! `+V` otherwise. Decoding happens when the walk reaches the left barrier,
//! loss when it passes `W - V`.
//!
//! Sign convention: [`step_mgf`] evaluates `Ĉ e^{-θ(1-V)} + (1-Ĉ) e^{θV}`,
//! which is `E[e^{θX}]` for the step `X`. Its nonzero root `θ₀` is what
//! [`find_theta0`] returns. The stopping-time martingale `e^{-ϑ S(n)}` needs
//! the root of `E[e^{-ϑX}] = 1`, which is `ϑ₀ = -θ₀`; the absorption and
//! stopping-time routines use that root internally.

pub mod walk;

use serde::Serialize;

use crate::error::{Error, Result};

pub use walk::{
    max_probability_gap, mc_point_process, mc_single_barrier, mc_two_barrier, McEstimate, McPointProcess, ReflectedWalk,
    UpperRule, WalkStep,
};

/// Drift magnitude below which the symmetric-walk formulas are used.
pub const DEGENERATE_DRIFT: f64 = 1e-9;

/// Step distribution of the particle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WalkModel {
    pub c_hat: f64,
    pub v: f64,
}

impl WalkModel {
    pub fn new(c_hat: f64, v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c_hat) || !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!(
                "walk model needs Ĉ in [0,1] and V in (0,1), got Ĉ={c_hat}, V={v}"
            )));
        }
        Ok(WalkModel { c_hat, v })
    }

    /// Step length on a useful reception.
    pub fn d_left(&self) -> f64 {
        1.0 - self.v
    }

    /// Step length on an erasure.
    pub fn d_right(&self) -> f64 {
        self.v
    }

    pub fn mu(&self) -> f64 {
        self.v - self.c_hat
    }

    pub fn sigma2(&self) -> f64 {
        self.c_hat * (1.0 - self.c_hat)
    }

    /// Traffic intensity `V / Ĉ`.
    pub fn rho(&self) -> f64 {
        self.v / self.c_hat
    }

    fn require_stable(&self) -> Result<()> {
        if self.v >= self.c_hat {
            return Err(Error::Unstable {
                v: self.v,
                c_hat: self.c_hat,
            });
        }
        Ok(())
    }

    fn is_degenerate(&self) -> bool {
        self.mu().abs() <= DEGENERATE_DRIFT
    }

    /// `E[e^{-ϑX}] = Ĉ e^{ϑ(1-V)} + (1-Ĉ) e^{-ϑV}`.
    fn martingale_mgf(&self, theta: f64) -> f64 {
        self.c_hat * (theta * self.d_left()).exp() + (1.0 - self.c_hat) * (-theta * self.v).exp()
    }

    /// Minimiser of the martingale transform.
    fn mgf_argmin(&self) -> f64 {
        let ratio = (1.0 - self.c_hat) * self.v / (self.c_hat * self.d_left());
        ratio.ln()
    }

    /// The two real roots of `E[e^{-ϑX}] = level` for `level >= 1`, ordered
    /// `(left, right)`.
    fn martingale_roots(&self, level: f64) -> Result<(f64, f64)> {
        if !(0.0 < self.c_hat && self.c_hat < 1.0) {
            return Err(Error::Numeric(format!(
                "two-sided roots need 0 < Ĉ < 1, got {}",
                self.c_hat
            )));
        }
        let m = self.mgf_argmin();
        let f = |x: f64| self.martingale_mgf(x) - level;
        if f(m) > 0.0 {
            return Err(Error::Numeric(format!(
                "level {level} below the transform minimum {}",
                self.martingale_mgf(m)
            )));
        }
        let right = bisect_outward(&f, m, 1.0)?;
        let left = bisect_outward(&f, m, -1.0)?;
        Ok((left, right))
    }
}

/// Finds the root of a convex `f` with `f(start) <= 0` on the side given by
/// `dir`, by doubling the step until the sign changes, then bisecting.
fn bisect_outward(f: &impl Fn(f64) -> f64, start: f64, dir: f64) -> Result<f64> {
    let mut inner = start;
    let mut step = 1e-3;
    let mut outer = start + dir * step;
    let mut tries = 0;
    while f(outer) <= 0.0 {
        inner = outer;
        step *= 2.0;
        outer = start + dir * step;
        tries += 1;
        if tries > 200 || !outer.is_finite() {
            return Err(Error::Numeric(format!(
                "could not bracket root from {start} in direction {dir}"
            )));
        }
    }
    // f(inner) <= 0 < f(outer)
    for _ in 0..300 {
        let mid = 0.5 * (inner + outer);
        if mid == inner || mid == outer {
            break;
        }
        if f(mid) <= 0.0 {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    // closer of the two to the level
    Ok(if f(inner).abs() <= f(outer).abs() { inner } else { outer })
}

/// `G(θ) = Ĉ e^{-θ(1-V)} + (1-Ĉ) e^{θV}`.
pub fn step_mgf(theta: f64, model: &WalkModel) -> f64 {
    model.c_hat * (-theta * model.d_left()).exp() + (1.0 - model.c_hat) * (theta * model.v).exp()
}

/// Nonzero root of `G(θ) = 1`.
pub fn find_theta0(model: &WalkModel) -> Result<f64> {
    if model.is_degenerate() {
        return Err(Error::DegenerateDrift(model.mu().abs()));
    }
    let (left, right) = model.martingale_roots(1.0)?;
    // one root of the martingale transform is 0; keep the other
    let vartheta = if left.abs() > right.abs() { left } else { right };
    Ok(-vartheta)
}

/// `e^x - e^y` as `(sign, ln|e^x - e^y|)`.
fn exp_diff(x: f64, y: f64) -> (f64, f64) {
    if x == y {
        return (0.0, f64::NEG_INFINITY);
    }
    let (hi, lo, sign) = if x > y { (x, y, 1.0) } else { (y, x, -1.0) };
    (sign, hi + (-(lo - hi).exp()).ln_1p())
}

fn ratio_of((sn, ln): (f64, f64), (sd, ld): (f64, f64)) -> f64 {
    sn * sd * (ln - ld).exp()
}

fn check_barriers(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!(
            "barriers must be positive, got A={a}, B={b}"
        )));
    }
    Ok(())
}

/// Probabilities of leaving through `A` (above) and `-B` (below) for a walk
/// started at the origin, without overshoot.
pub fn absorption_probs(a: f64, b: f64, model: &WalkModel) -> Result<(f64, f64)> {
    check_barriers(a, b)?;
    if model.is_degenerate() {
        let p_a = b / (a + b);
        return Ok((p_a, 1.0 - p_a));
    }
    let vt = -find_theta0(model)?;
    let den = exp_diff(-vt * a, vt * b);
    let p_a = ratio_of(exp_diff(0.0, vt * b), den);
    let p_b = ratio_of(exp_diff(-vt * a, 0.0), den);
    // report the smaller one from its own formula, complement the other
    Ok(if p_a <= p_b { (p_a, 1.0 - p_a) } else { (1.0 - p_b, p_b) })
}

/// Moments of the two-barrier stopping time `N`, total and split by exit
/// side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StoppingMoments {
    pub p_a: f64,
    pub p_b: f64,
    pub e_n: f64,
    pub e_n2: f64,
    /// `E[N; exit at A]`.
    pub partial_a: f64,
    /// `E[N; exit at -B]`.
    pub partial_b: f64,
}

impl StoppingMoments {
    /// `E[N | exit at A]`, zero when that exit has no mass.
    pub fn time_a(&self) -> f64 {
        if self.p_a > 0.0 {
            self.partial_a / self.p_a
        } else {
            0.0
        }
    }

    pub fn time_b(&self) -> f64 {
        if self.p_b > 0.0 {
            self.partial_b / self.p_b
        } else {
            0.0
        }
    }
}

/// `(P_A E_A(s^N), P_{-B} E_{-B}(s^N))` at one `s < 1`, from the 2x2 system
/// over the two roots of `E[e^{-λX}] = 1/s`.
fn split_generating_function(s: f64, a: f64, b: f64, model: &WalkModel) -> Result<(f64, f64)> {
    let (l1, l2) = if s == 1.0 {
        let vt = -find_theta0(model)?;
        (vt.min(0.0), vt.max(0.0))
    } else {
        model.martingale_roots(1.0 / s)?
    };
    let (a1, b1) = (-l1 * a, l1 * b);
    let (a2, b2) = (-l2 * a, l2 * b);
    let det = exp_diff(a1 + b2, a2 + b1);
    let part_a = ratio_of(exp_diff(b2, b1), det);
    let part_b = ratio_of(exp_diff(a1, a2), det);
    if !(part_a.is_finite() && part_b.is_finite()) {
        return Err(Error::Numeric(format!(
            "generating function not finite at s={s} (A={a}, B={b}, model={model:?})"
        )));
    }
    Ok((part_a, part_b))
}

/// One-sided derivatives at `s = 1` with Richardson extrapolation over `h`
/// and `h/2`. Returns first and second derivatives of both components.
fn one_sided_derivatives(f: impl Fn(f64) -> Result<(f64, f64)>, h: f64) -> Result<[(f64, f64); 2]> {
    let stencil = |h: f64| -> Result<[(f64, f64); 2]> {
        let f0 = f(1.0)?;
        let f1 = f(1.0 - h)?;
        let f2 = f(1.0 - 2.0 * h)?;
        let f3 = f(1.0 - 3.0 * h)?;
        let d1 = |x0: f64, x1: f64, x2: f64| (3.0 * x0 - 4.0 * x1 + x2) / (2.0 * h);
        let d2 = |x0: f64, x1: f64, x2: f64, x3: f64| (2.0 * x0 - 5.0 * x1 + 4.0 * x2 - x3) / (h * h);
        Ok([
            (d1(f0.0, f1.0, f2.0), d1(f0.1, f1.1, f2.1)),
            (d2(f0.0, f1.0, f2.0, f3.0), d2(f0.1, f1.1, f2.1, f3.1)),
        ])
    };
    let coarse = stencil(h)?;
    let fine = stencil(h / 2.0)?;
    let rich = |c: f64, f: f64| (4.0 * f - c) / 3.0;
    Ok([
        (rich(coarse[0].0, fine[0].0), rich(coarse[0].1, fine[0].1)),
        (rich(coarse[1].0, fine[1].0), rich(coarse[1].1, fine[1].1)),
    ])
}

/// Finite-difference step for the generating function at `s = 1`.
pub const MGF_STEP: f64 = 1e-4;

/// First two moments of the stopping time for barriers `A` above and `-B`
/// below the start.
pub fn stopping_moments(a: f64, b: f64, model: &WalkModel) -> Result<StoppingMoments> {
    check_barriers(a, b)?;
    if model.is_degenerate() {
        // symmetric ruin, diffusion scaling
        let s2 = model.sigma2();
        if s2 <= 0.0 {
            return Err(Error::DegenerateDrift(model.mu().abs()));
        }
        let p_a = b / (a + b);
        let e_n = a * b / s2;
        let e_n2 = a * b * (a * a + 3.0 * a * b + b * b) / (3.0 * s2 * s2);
        return Ok(StoppingMoments {
            p_a,
            p_b: 1.0 - p_a,
            e_n,
            e_n2,
            partial_a: p_a * e_n,
            partial_b: (1.0 - p_a) * e_n,
        });
    }
    let (p_a, p_b) = absorption_probs(a, b, model)?;
    let [first, second] = one_sided_derivatives(|s| split_generating_function(s, a, b, model), MGF_STEP)?;
    let e_n = first.0 + first.1;
    let factorial2 = second.0 + second.1;
    Ok(StoppingMoments {
        p_a,
        p_b,
        e_n,
        e_n2: factorial2 + e_n,
        partial_a: first.0,
        partial_b: first.1,
    })
}

/// Mean decoding delay model for a window large enough to ignore loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DelayMoments {
    pub e_n: f64,
    pub e_n2: f64,
    pub d_bar: f64,
}

/// `E[N] = -d_R/μ`, `E[N²] = (d_R² μ - σ² d_R)/μ³`, `D = E[N²] / (2 E[N])`.
pub fn single_barrier_moments(model: &WalkModel) -> Result<DelayMoments> {
    model.require_stable()?;
    let (mu, s2, dr) = (model.mu(), model.sigma2(), model.d_right());
    let e_n = -dr / mu;
    let e_n2 = (dr * dr * mu - s2 * dr) / (mu * mu * mu);
    Ok(DelayMoments {
        e_n,
        e_n2,
        d_bar: e_n2 / (2.0 * e_n),
    })
}

/// Start position, barriers and outcome of one event state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Transition {
    pub start: f64,
    /// Distance to the loss barrier.
    pub a: f64,
    /// Distance to the decode barrier.
    pub b: f64,
    /// Probability the next event is a decode.
    pub p_to_decode: f64,
    /// Probability the next event is a loss.
    pub p_to_loss: f64,
    pub time_to_decode: f64,
    pub time_to_loss: f64,
    /// Mean time to the next event of either kind.
    pub mean_time: f64,
    /// `E[N; next event is a loss]`.
    pub partial_to_loss: f64,
}

/// Two-state decode/loss point process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointProcessModel {
    pub window: u64,
    pub p_dd: f64,
    pub p_dl: f64,
    pub p_ld: f64,
    pub p_ll: f64,
    pub t_dd: f64,
    pub t_dl: f64,
    pub t_ld: f64,
    pub t_ll: f64,
    pub pi_d: f64,
    pub pi_l: f64,
    /// Mean time between events under the stationary mix.
    pub cycle: f64,
    pub from_decode: Transition,
    pub from_loss: Transition,
}

fn transition(start: f64, window: u64, model: &WalkModel) -> Result<Transition> {
    let a = (window as f64 - model.v) - start;
    let b = start + model.v;
    if a <= 0.0 {
        return Err(Error::Domain(format!(
            "start {start} is not below the loss barrier W - V = {}",
            window as f64 - model.v
        )));
    }
    let m = stopping_moments(a, b, model)?;
    Ok(Transition {
        start,
        a,
        b,
        p_to_decode: m.p_b,
        p_to_loss: m.p_a,
        time_to_decode: m.time_b(),
        time_to_loss: m.time_a(),
        mean_time: m.e_n,
        partial_to_loss: m.partial_a,
    })
}

/// Builds the point process: after a decode the particle is placed at
/// `d_R`, after a loss at `W - 1`; the decode barrier is `-V` and the loss
/// barrier `W - V`.
pub fn point_process(window: u64, model: &WalkModel) -> Result<PointProcessModel> {
    if window < 2 {
        return Err(Error::Domain("point process needs W >= 2".into()));
    }
    model.require_stable()?;
    let from_decode = transition(model.d_right(), window, model)?;
    let from_loss = transition(window as f64 - 1.0, window, model)?;
    let (p_dl, p_ld) = (from_decode.p_to_loss, from_loss.p_to_decode);
    let (pi_d, pi_l) = if p_dl + p_ld > 0.0 {
        (p_ld / (p_dl + p_ld), p_dl / (p_dl + p_ld))
    } else {
        (1.0, 0.0)
    };
    let cycle = pi_d * from_decode.mean_time + pi_l * from_loss.mean_time;
    Ok(PointProcessModel {
        window,
        p_dd: from_decode.p_to_decode,
        p_dl,
        p_ld,
        p_ll: from_loss.p_to_loss,
        t_dd: from_decode.time_to_decode,
        t_dl: from_decode.time_to_loss,
        t_ld: from_loss.time_to_decode,
        t_ll: from_loss.time_to_loss,
        pi_d,
        pi_l,
        cycle,
        from_decode,
        from_loss,
    })
}

/// `P_loss = (π_D P_DL (T_DL - W/V) + π_L P_LL T_LL) / T`.
///
/// The decode-to-loss term counts the packets left behind the window; when
/// `T_DL < W/V` that count is clamped at zero.
pub fn packet_loss_prob(ppm: &PointProcessModel, model: &WalkModel) -> f64 {
    let behind = ppm.from_decode.partial_to_loss - ppm.p_dl * ppm.window as f64 / model.v;
    let behind = if behind < 0.0 {
        log::warn!(
            "clamping negative decode-to-loss term {behind:e} (W={}, Ĉ={}, V={})",
            ppm.window,
            model.c_hat,
            model.v
        );
        0.0
    } else {
        behind
    };
    let num = ppm.pi_d * behind + ppm.pi_l * ppm.from_loss.partial_to_loss;
    if ppm.cycle <= 0.0 {
        return 0.0;
    }
    (num / ppm.cycle).clamp(0.0, 1.0)
}

/// Upper bound on decoding operations per packet:
/// `(E[N²]V + 3E[N]) / (2E[N]) · W + (E[N²]V + E[N]) / (2E[N])`.
pub fn complexity_bound(window: u64, model: &WalkModel) -> Result<f64> {
    let (slope, intercept) = complexity_coefficients(model)?;
    Ok(slope * window as f64 + intercept)
}

/// Slope and intercept of [`complexity_bound`] in `W`.
pub fn complexity_coefficients(model: &WalkModel) -> Result<(f64, f64)> {
    let m = single_barrier_moments(model)?;
    let v = model.v;
    Ok((
        (m.e_n2 * v + 3.0 * m.e_n) / (2.0 * m.e_n),
        (m.e_n2 * v + m.e_n) / (2.0 * m.e_n),
    ))
}

/// Everything the model predicts for one `(Ĉ, V, W)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelReport {
    pub c_hat: f64,
    pub v: f64,
    pub window: u64,
    pub rho: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub theta0: f64,
    pub delay: DelayMoments,
    pub point_process: PointProcessModel,
    pub p_loss: f64,
    pub complexity_bound: f64,
}

pub fn report(c_hat: f64, v: f64, window: u64) -> Result<ModelReport> {
    let model = WalkModel::new(c_hat, v)?;
    model.require_stable()?;
    let ppm = point_process(window, &model)?;
    Ok(ModelReport {
        c_hat,
        v,
        window,
        rho: model.rho(),
        mu: model.mu(),
        sigma2: model.sigma2(),
        theta0: find_theta0(&model)?,
        delay: single_barrier_moments(&model)?,
        p_loss: packet_loss_prob(&ppm, &model),
        point_process: ppm,
        complexity_bound: complexity_bound(window, &model)?,
    })
}
