//! Simplex-constrained gradient ascent for one player and
//! gradient-descent-ascent for both.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::{qa_gradient, qa_raw, ElectionInstance, SimplexPoint, StrategyProfile};

/// Direction of steepest increase of `f` within the simplex at `x`:
/// `d_i = x_i (tau_i - sum_j x_j tau_j)` with `tau_i = x_i (g_i - x.g)`.
pub fn simplex_direction(x: &[f64], grad: &[f64]) -> Vec<f64> {
    let xg: f64 = x.iter().zip(grad).map(|(a, b)| a * b).sum();
    let tau: Vec<f64> = x.iter().zip(grad).map(|(xi, gi)| xi * (gi - xg)).collect();
    let xt: f64 = x.iter().zip(&tau).map(|(a, b)| a * b).sum();
    x.iter().zip(&tau).map(|(xi, ti)| xi * (ti - xt)).collect()
}

/// Complementary-slackness residual `xi_i = x_i (x.g - g_i)`; zero at KKT
/// points of `max f` over the simplex.
pub fn complementary_slackness(x: &[f64], grad: &[f64]) -> Vec<f64> {
    let xg: f64 = x.iter().zip(grad).map(|(a, b)| a * b).sum();
    x.iter().zip(grad).map(|(xi, gi)| xi * (xg - gi)).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GdaConfig {
    pub rho: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Resample Monte-Carlo batches when reuse would increase the variance.
    pub resample_policy: bool,
    /// Multiplier applied to `rho` after `decay_patience` rises; 1 disables decay.
    pub rho_decay: f64,
    /// Consecutive increases of the residual before `rho` is decayed.
    pub decay_patience: usize,
    /// Exponential smoothing factor for the residual, if any.
    pub ema: Option<f64>,
    /// Coordinates below this that are still shrinking are set to zero.
    pub prune_below: f64,
    /// Report the mean of the last this many iterates instead of the last one.
    pub tail_average: Option<usize>,
}

impl GdaConfig {
    /// Defaults for an exact payoff oracle.
    pub fn exact() -> Self {
        Self {
            rho: 0.05,
            epsilon: 1e-7,
            max_iters: 500_000,
            resample_policy: false,
            rho_decay: 1.0,
            decay_patience: 5,
            ema: None,
            prune_below: 1e-3,
            tail_average: None,
        }
    }

    /// Defaults for a Monte-Carlo payoff oracle. The residual's noise floor
    /// sits above `epsilon`, so the iteration budget governs and the result
    /// is the mean of the last 150 iterates.
    pub fn monte_carlo() -> Self {
        Self {
            rho: 2.0,
            epsilon: 1e-4,
            max_iters: 400,
            resample_policy: true,
            ema: Some(0.9),
            prune_below: 1e-2,
            tail_average: Some(150),
            ..Self::exact()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.epsilon > 0.0 && self.max_iters >= 1) {
            return Err(Error::Precondition("rho, epsilon must be > 0 and max_iters >= 1".into()));
        }
        if self.tail_average == Some(0) {
            return Err(Error::Precondition("tail_average must be >= 1".into()));
        }
        if let Some(e) = self.ema {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::Precondition("ema factor must lie in [0, 1)".into()));
            }
        }
        Ok(())
    }
}

/// Payoff to A and its gradients at a profile.
#[derive(Clone, Debug)]
pub struct OracleOutput {
    pub payoff: f64,
    pub grad_x: Vec<f64>,
    /// Gradient of A's payoff in `y` (B ascends its negation).
    pub grad_y: Vec<f64>,
    pub resampled: bool,
}

pub trait PayoffOracle {
    fn evaluate(&mut self, profile: &StrategyProfile) -> Result<OracleOutput>;
}

/// Deterministic vote-share payoff `Q^A`.
pub struct VoteShareOracle<'a> {
    pub inst: &'a ElectionInstance,
}

impl PayoffOracle for VoteShareOracle<'_> {
    fn evaluate(&mut self, profile: &StrategyProfile) -> Result<OracleOutput> {
        let (x, y) = (profile.x.coords(), profile.y.coords());
        let (grad_x, grad_y) = qa_gradient(self.inst, x, y);
        Ok(OracleOutput { payoff: qa_raw(self.inst, x, y), grad_x, grad_y, resampled: false })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub xi_a: f64,
    pub xi_b: f64,
    pub payoff: f64,
    pub resampled: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GdaResult {
    pub profile: StrategyProfile,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub final_rho: f64,
}

/// Write a trace as CSV.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,xi_a,xi_b,payoff,resampled")?;
    for r in trace {
        writeln!(out, "{},{:e},{:e},{},{}", r.iteration, r.xi_a, r.xi_b, r.payoff, r.resampled as u8)?;
    }
    Ok(())
}

/// One projected step along the simplex direction. The direction is
/// divided by the spread `max_i |g_i - x.g|` so that `rho` does not depend
/// on the payoff's units.
fn step(x: &[f64], grad: &[f64], rho: f64, prune_below: f64) -> SimplexPoint {
    let xg: f64 = x.iter().zip(grad).map(|(a, b)| a * b).sum();
    let spread = grad.iter().fold(0.0f64, |m, g| m.max((g - xg).abs()));
    if spread == 0.0 {
        return SimplexPoint::project(x.to_vec());
    }
    let d = simplex_direction(x, grad);
    let raw: Vec<f64> = x
        .iter()
        .zip(&d)
        .zip(grad)
        .map(|((xi, di), gi)| {
            let next = xi + rho * di / spread;
            if next < prune_below && *gi < xg {
                0.0
            } else {
                next
            }
        })
        .collect();
    SimplexPoint::project(raw)
}

fn check_finite(out: &OracleOutput, iteration: usize) -> Result<()> {
    let ok = out.payoff.is_finite() && out.grad_x.iter().chain(&out.grad_y).all(|g| g.is_finite());
    if ok {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration })
    }
}

/// Simultaneous gradient ascent for A and descent (on A's payoff) for B,
/// starting from `start` or from voter-proportional efforts.
pub fn gda_solve(
    oracle: &mut dyn PayoffOracle,
    inst: &ElectionInstance,
    config: &GdaConfig,
    start: Option<StrategyProfile>,
) -> Result<GdaResult> {
    config.validate()?;
    let mut profile = match start {
        Some(p) => {
            p.check(inst)?;
            p
        }
        None => StrategyProfile::proportional_to_votes(inst),
    };
    let mut rho = config.rho;
    let mut trace = Vec::new();
    let mut smoothed: Option<f64> = None;
    let mut last = f64::INFINITY;
    let mut rises = 0;
    let mut tail: VecDeque<StrategyProfile> = VecDeque::new();
    let finish = |profile: StrategyProfile, tail: &VecDeque<StrategyProfile>| -> Result<StrategyProfile> {
        if tail.is_empty() {
            return Ok(profile);
        }
        let n = profile.n();
        let mean = |f: &dyn Fn(&StrategyProfile) -> &SimplexPoint| {
            let mut m = vec![0.0; n];
            for p in tail {
                for (mi, c) in m.iter_mut().zip(f(p).coords()) {
                    *mi += c / tail.len() as f64;
                }
            }
            SimplexPoint::project(m)
        };
        StrategyProfile::new(mean(&|p| &p.x), mean(&|p| &p.y))
    };
    for iteration in 0..config.max_iters {
        if let Some(m) = config.tail_average {
            tail.push_back(profile.clone());
            if tail.len() > m {
                tail.pop_front();
            }
        }
        let out = oracle.evaluate(&profile)?;
        check_finite(&out, iteration)?;
        let neg_gy: Vec<f64> = out.grad_y.iter().map(|g| -g).collect();
        let xi_a = inf_norm(&complementary_slackness(profile.x.coords(), &out.grad_x));
        let xi_b = inf_norm(&complementary_slackness(profile.y.coords(), &neg_gy));
        trace.push(TraceRow { iteration, xi_a, xi_b, payoff: out.payoff, resampled: out.resampled });

        let raw = xi_a.max(xi_b);
        let level = match (config.ema, smoothed) {
            (Some(f), Some(prev)) => f * prev + (1.0 - f) * raw,
            _ => raw,
        };
        smoothed = Some(level);
        if level <= config.epsilon {
            let profile = finish(profile, &tail)?;
            return Ok(GdaResult { profile, trace, converged: true, final_rho: rho });
        }
        if level > last {
            rises += 1;
            if rises >= config.decay_patience {
                rho *= config.rho_decay;
                rises = 0;
            }
        } else {
            rises = 0;
        }
        last = level;

        let x = step(profile.x.coords(), &out.grad_x, rho, config.prune_below);
        let y = step(profile.y.coords(), &neg_gy, rho, config.prune_below);
        profile = StrategyProfile::new(x, y)?;
    }
    let profile = finish(profile, &tail)?;
    Ok(GdaResult { profile, trace, converged: false, final_rho: rho })
}

/// Maximize a single player's objective over the simplex.
///
/// `objective` returns the value and gradient at a point. Returns the last
/// iterate, its value and whether the residual tolerance was reached.
pub fn simplex_ascent<F>(mut objective: F, start: SimplexPoint, config: &GdaConfig) -> Result<(SimplexPoint, f64, bool)>
where
    F: FnMut(&SimplexPoint) -> Result<(f64, Vec<f64>)>,
{
    config.validate()?;
    let mut x = start;
    let mut rho = config.rho;
    let mut last = f64::INFINITY;
    let mut rises = 0;
    let mut value = f64::NAN;
    for iteration in 0..config.max_iters {
        let (f, g) = objective(&x)?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration });
        }
        value = f;
        let xi = inf_norm(&complementary_slackness(x.coords(), &g));
        if xi <= config.epsilon {
            return Ok((x, value, true));
        }
        if xi > last {
            rises += 1;
            if rises >= config.decay_patience {
                rho *= config.rho_decay;
                rises = 0;
            }
        } else {
            rises = 0;
        }
        last = xi;
        x = step(x.coords(), &g, rho, config.prune_below);
    }
    Ok((x, value, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ms_deterministic::{constrained_equilibrium, unbounded_equilibrium, BarrierConfig};
    use crate::presets;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_gradient_is_stationary() {
        let x = vec![0.25; 4];
        assert!(simplex_direction(&x, &[2.0; 4]).iter().all(|d| d.abs() < 1e-15));
        assert!(complementary_slackness(&x, &[2.0; 4]).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn two_coordinate_hand_value() {
        // x.g = 0.5, tau = (0.25, -0.25), x.tau = 0, d = (0.125, -0.125)
        let d = simplex_direction(&[0.5, 0.5], &[1.0, 0.0]);
        assert_abs_diff_eq!(d[0], 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], -0.125, epsilon = 1e-15);
    }

    #[test]
    fn two_region_kkt_point_has_zero_residual() {
        let inst = ElectionInstance::new(vec![0.6, 0.4], vec![0.3, 0.5], vec![0.4, 0.2], vec![0.1, 0.3]).unwrap();
        let ub = unbounded_equilibrium(&inst, &[0, 1]).unwrap();
        assert!(ub.is_nonnegative());
        let (gx, gy) = qa_gradient(&inst, &ub.x_ub, &ub.y_ub);
        assert!(inf_norm(&complementary_slackness(&ub.x_ub, &gx)) <= 1e-8);
        let neg: Vec<f64> = gy.iter().map(|g| -g).collect();
        assert!(inf_norm(&complementary_slackness(&ub.y_ub, &neg)) <= 1e-8);
    }

    #[test]
    fn table1_reference_has_small_residual() {
        let inst = presets::table1_instance();
        let p = presets::table1_profile();
        let (gx, gy) = qa_gradient(&inst, p.x.coords(), p.y.coords());
        let neg: Vec<f64> = gy.iter().map(|g| -g).collect();
        assert!(inf_norm(&complementary_slackness(p.x.coords(), &gx)) <= 1e-4);
        assert!(inf_norm(&complementary_slackness(p.y.coords(), &neg)) <= 1e-4);
    }

    #[test]
    fn gda_matches_barrier_solver_on_deterministic_game() {
        let inst = presets::table1_instance();
        let mut oracle = VoteShareOracle { inst: &inst };
        let res = gda_solve(&mut oracle, &inst, &GdaConfig::exact(), None).unwrap();
        assert!(res.converged);
        let eq = constrained_equilibrium(&inst, &BarrierConfig::default()).unwrap();
        assert!(res.profile.x.max_abs_diff(&eq.x) <= 1e-3);
        assert!(res.profile.y.max_abs_diff(&eq.y) <= 1e-3);
        let mut buf = Vec::new();
        write_trace_csv(&res.trace, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("iteration,xi_a,xi_b,payoff,resampled\n0,"));
    }

    #[test]
    fn gda_symmetric_instance_stays_symmetric() {
        let inst = ElectionInstance::new(vec![0.5, 0.3, 0.2], vec![0.4, 0.2, 0.6], vec![0.4, 0.2, 0.6], vec![0.3, 0.3, 0.0]).unwrap();
        let mut oracle = VoteShareOracle { inst: &inst };
        let res = gda_solve(&mut oracle, &inst, &GdaConfig::exact(), None).unwrap();
        assert!(res.profile.x.max_abs_diff(&res.profile.y) <= 1e-9);
    }

    #[test]
    fn ascent_finds_linear_maximizer() {
        let c = [0.1, 0.7, 0.3];
        let (x, v, ok) = simplex_ascent(|_| Ok((0.0, c.to_vec())), SimplexPoint::uniform(3), &GdaConfig::exact()).unwrap();
        assert!(ok);
        assert!(x[1] > 0.999);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn non_finite_oracle_aborts() {
        struct Bad;
        impl PayoffOracle for Bad {
            fn evaluate(&mut self, _: &StrategyProfile) -> Result<OracleOutput> {
                Ok(OracleOutput { payoff: f64::NAN, grad_x: vec![0.0], grad_y: vec![0.0], resampled: false })
            }
        }
        let inst = ElectionInstance::new(vec![1.0], vec![1.0], vec![1.0], vec![0.0]).unwrap();
        assert_eq!(gda_solve(&mut Bad, &inst, &GdaConfig::exact(), None).unwrap_err(), Error::NonFinite { iteration: 0 });
    }

    proptest! {
        #[test]
        fn direction_properties(raw in proptest::collection::vec(0.0f64..1.0, 2..9), g in proptest::collection::vec(-5.0f64..5.0, 9), zero in 0usize..9) {
            let n = raw.len();
            let mut raw = raw;
            raw[zero % n] = 0.0;
            let x = SimplexPoint::project(raw);
            let d = simplex_direction(x.coords(), &g[..n]);
            prop_assert!(d.iter().sum::<f64>().abs() <= 1e-12);
            for i in 0..n {
                if x[i] == 0.0 {
                    prop_assert_eq!(d[i], 0.0);
                }
            }
            // ascent direction: first-order change is nonnegative
            prop_assert!(d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() >= -1e-12);
        }

        #[test]
        fn steps_stay_on_simplex(raw in proptest::collection::vec(0.01f64..1.0, 2..9), g in proptest::collection::vec(-5.0f64..5.0, 9), rho in 0.001f64..5.0) {
            let n = raw.len();
            let x = SimplexPoint::project(raw);
            let next = step(x.coords(), &g[..n], rho, 1e-3);
            prop_assert!((next.coords().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(next.coords().iter().all(|c| *c >= 0.0));
        }
    }
}
