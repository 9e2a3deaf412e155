//! Deterministic majority game: closed-form equilibria of the unbounded
//! game on a fixed region subset, and a barrier-Newton solver for the
//! nonnegative equilibrium.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::{qa_derivatives, qa_gradient, vote_totals, ElectionInstance, SimplexPoint, StrategyProfile};
use crate::simplex_dynamics::complementary_slackness;

/// Equilibrium of the game where efforts may be negative but are confined
/// to `active_set`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnboundedEquilibrium {
    pub active_set: Vec<usize>,
    pub x_ub: Vec<f64>,
    pub y_ub: Vec<f64>,
    /// Expected share of all voters going to A (voter weights normalized).
    pub qa: f64,
    pub qb: f64,
}

impl UnboundedEquilibrium {
    /// Embed into full `n`-vectors (zeros outside the active set).
    pub fn full(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for (k, &i) in self.active_set.iter().enumerate() {
            x[i] = self.x_ub[k];
            y[i] = self.y_ub[k];
        }
        (x, y)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.x_ub.iter().chain(&self.y_ub).all(|c| *c >= 0.0)
    }

    /// The profile, if both effort vectors are nonnegative.
    pub fn to_profile(&self, n: usize) -> Option<StrategyProfile> {
        if !self.is_nonnegative() {
            return None;
        }
        let (x, y) = self.full(n);
        StrategyProfile::from_vecs(x, y).ok()
    }
}

/// Closed-form equilibrium of the unbounded game on `active_set`.
pub fn unbounded_equilibrium(inst: &ElectionInstance, active_set: &[usize]) -> Result<UnboundedEquilibrium> {
    if active_set.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let n = inst.n();
    let mut in_set = vec![false; n];
    for &i in active_set {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if in_set[i] {
            return Err(Error::InvalidInstance(format!("region {i} listed twice in the active set")));
        }
        in_set[i] = true;
    }
    let v = inst.v_normalized();
    let (al, be, ga) = (inst.alpha(), inst.beta(), inst.gamma());
    let sum_over = |f: &dyn Fn(usize) -> f64| active_set.iter().map(|&i| f(i)).sum::<f64>();
    let v_s = sum_over(&|i| v[i]);
    let a_s = sum_over(&|i| al[i]);
    let b_s = sum_over(&|i| be[i]);
    let g_s = sum_over(&|i| ga[i]);
    if v_s <= 0.0 {
        return Err(Error::InvalidInstance("active set carries no voters".into()));
    }

    let denom = 2.0 + a_s + b_s + g_s;
    let mut qa = v_s * (1.0 + a_s) / denom;
    let mut qb = v_s * (1.0 + b_s) / denom;
    for j in (0..n).filter(|&j| !in_set[j]) {
        let s = al[j] + be[j] + ga[j];
        qa += v[j] * al[j] / s;
        qb += v[j] * be[j] / s;
    }
    let r = qa / (qa + qb);

    let x_ub = active_set
        .iter()
        .map(|&i| v[i] / v_s * ((1.0 + a_s) + r * g_s) - r * ga[i] - al[i])
        .collect();
    let y_ub = active_set
        .iter()
        .map(|&i| v[i] / v_s * ((1.0 + b_s) + (1.0 - r) * g_s) - (1.0 - r) * ga[i] - be[i])
        .collect();
    Ok(UnboundedEquilibrium { active_set: active_set.to_vec(), x_ub, y_ub, qa, qb })
}

/// Path-following settings for [`constrained_equilibrium`].
#[derive(Clone, Debug)]
pub struct BarrierConfig {
    pub t0: f64,
    pub t_factor: f64,
    pub t_max: f64,
    /// Inner stopping rule: KKT residual (inf-norm) below `newton_tol * (1 + t)`.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub max_halvings: usize,
    /// Coordinates below this at the final `t` are reported as zero.
    pub zero_threshold: f64,
    /// Solve the equality KKT system on the identified support afterwards.
    pub polish: bool,
    pub start: Option<StrategyProfile>,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            t0: 1.0,
            t_factor: 10.0,
            t_max: 1e8,
            newton_tol: 1e-10,
            max_newton_iters: 200,
            max_halvings: 50,
            zero_threshold: 1e-6,
            polish: true,
            start: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeterministicSolution {
    pub profile: StrategyProfile,
    /// max of both players' complementary-slackness inf-norms
    pub residual: f64,
    pub newton_iterations: usize,
    pub polished: bool,
}

const INTERIOR_FLOOR: f64 = 1e-6;

fn interior_start(p: &SimplexPoint) -> Vec<f64> {
    let mut c: Vec<f64> = p.coords().iter().map(|v| v.max(INTERIOR_FLOOR)).collect();
    let s: f64 = c.iter().sum();
    c.iter_mut().for_each(|v| *v /= s);
    c
}

struct Kkt {
    residual: DVector<f64>,
    matrix: DMatrix<f64>,
}

fn barrier_kkt(inst: &ElectionInstance, z: &[f64], lam: f64, mu: f64, t: f64) -> Kkt {
    let n = inst.n();
    let (_, g, h) = qa_derivatives(inst, &z[..n], &z[n..]);
    let m = 2 * n;
    let mut k = DMatrix::zeros(m + 2, m + 2);
    let mut r = DVector::zeros(m + 2);
    k.view_mut((0, 0), (m, m)).copy_from(&(h * t));
    for i in 0..n {
        let (xi, yi) = (z[i], z[n + i]);
        r[i] = t * g[i] + 1.0 / xi - lam;
        r[n + i] = t * g[n + i] - 1.0 / yi - mu;
        k[(i, i)] -= 1.0 / (xi * xi);
        k[(n + i, n + i)] += 1.0 / (yi * yi);
        k[(i, m)] = -1.0;
        k[(m, i)] = 1.0;
        k[(n + i, m + 1)] = -1.0;
        k[(m + 1, n + i)] = 1.0;
    }
    r[m] = z[..n].iter().sum::<f64>() - 1.0;
    r[m + 1] = z[n..].iter().sum::<f64>() - 1.0;
    Kkt { residual: r, matrix: k }
}

fn residual_norm(inst: &ElectionInstance, z: &[f64], lam: f64, mu: f64, t: f64) -> f64 {
    let n = inst.n();
    let (gx, gy) = qa_gradient(inst, &z[..n], &z[n..]);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        worst = worst.max((t * gx[i] + 1.0 / z[i] - lam).abs());
        worst = worst.max((t * gy[i] - 1.0 / z[n + i] - mu).abs());
    }
    worst = worst.max((z[..n].iter().sum::<f64>() - 1.0).abs());
    worst.max((z[n..].iter().sum::<f64>() - 1.0).abs())
}

/// Newton centering at fixed `t`. Returns the number of iterations used.
fn center(
    inst: &ElectionInstance,
    z: &mut [f64],
    lam: &mut f64,
    mu: &mut f64,
    t: f64,
    cfg: &BarrierConfig,
) -> Result<usize> {
    let m = z.len();
    let tol = cfg.newton_tol * (1.0 + t);
    for it in 0..cfg.max_newton_iters {
        let kkt = barrier_kkt(inst, z, *lam, *mu, t);
        let norm = kkt.residual.amax();
        if norm <= tol {
            return Ok(it);
        }
        let step = kkt
            .matrix
            .lu()
            .solve(&(-kkt.residual))
            .filter(|s| s.iter().all(|v| v.is_finite()));
        let Some(step) = step else {
            return Err(divergence(t, norm, it, z));
        };
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = (0..m).map(|i| z[i] + s * step[i]).collect();
            if trial.iter().all(|v| *v > 0.0) {
                let tl = *lam + s * step[m];
                let tm = *mu + s * step[m + 1];
                let trial_norm = residual_norm(inst, &trial, tl, tm, t);
                if trial_norm <= (1.0 - 0.01 * s) * norm {
                    z.copy_from_slice(&trial);
                    *lam = tl;
                    *mu = tm;
                    accepted = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if !accepted {
            // no decrease possible: the residual is at rounding level for this t
            if norm <= 1e-6 * (1.0 + t) {
                return Ok(it);
            }
            return Err(divergence(t, norm, it, z));
        }
    }
    let norm = residual_norm(inst, z, *lam, *mu, t);
    if norm <= 1e-6 * (1.0 + t) {
        Ok(cfg.max_newton_iters)
    } else {
        Err(divergence(t, norm, cfg.max_newton_iters, z))
    }
}

fn divergence(t: f64, residual: f64, iterations: usize, z: &[f64]) -> Error {
    let n = z.len() / 2;
    Error::NewtonDivergence { t, residual, iterations, last_x: z[..n].to_vec(), last_y: z[n..].to_vec() }
}

/// Solve the stationarity system of the game restricted to the supports
/// `sa` (for x) and `sb` (for y). Returns `None` if Newton fails or the
/// solution is not a KKT point of the full constrained game.
fn polish_on_support(inst: &ElectionInstance, z0: &[f64], sa: &[usize], sb: &[usize]) -> Option<Vec<f64>> {
    let n = inst.n();
    let (na, nb) = (sa.len(), sb.len());
    let dim = na + nb + 2;
    let vars: Vec<usize> = sa.iter().copied().chain(sb.iter().map(|&j| n + j)).collect();
    let mut z = vec![0.0; 2 * n];
    for &i in &vars {
        z[i] = z0[i];
    }
    let sx: f64 = sa.iter().map(|&i| z[i]).sum();
    let sy: f64 = sb.iter().map(|&j| z[n + j]).sum();
    sa.iter().for_each(|&i| z[i] /= sx);
    sb.iter().for_each(|&j| z[n + j] /= sy);
    let (gx, gy) = qa_gradient(inst, &z[..n], &z[n..]);
    let mut lam = sa.iter().map(|&i| gx[i]).sum::<f64>() / na as f64;
    let mut mu = sb.iter().map(|&j| gy[j]).sum::<f64>() / nb as f64;

    let mut converged = false;
    for _ in 0..60 {
        let (_, g, h) = qa_derivatives(inst, &z[..n], &z[n..]);
        let mut r = DVector::zeros(dim);
        let mut jac = DMatrix::zeros(dim, dim);
        for (p, &vp) in vars.iter().enumerate() {
            let mult = if p < na { lam } else { mu };
            r[p] = g[vp] - mult;
            for (q, &vq) in vars.iter().enumerate() {
                jac[(p, q)] = h[(vp, vq)];
            }
            jac[(p, if p < na { dim - 2 } else { dim - 1 })] = -1.0;
        }
        r[dim - 2] = sa.iter().map(|&i| z[i]).sum::<f64>() - 1.0;
        r[dim - 1] = sb.iter().map(|&j| z[n + j]).sum::<f64>() - 1.0;
        for p in 0..na {
            jac[(dim - 2, p)] = 1.0;
        }
        for p in na..na + nb {
            jac[(dim - 1, p)] = 1.0;
        }
        let norm = r.amax();
        if norm <= 1e-15 {
            converged = true;
            break;
        }
        let step = jac.lu().solve(&(-r))?;
        for (p, &vp) in vars.iter().enumerate() {
            z[vp] += step[p];
        }
        lam += step[dim - 2];
        mu += step[dim - 1];
        if step.amax() <= 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged || vars.iter().any(|&i| !(z[i] > 0.0)) {
        return None;
    }
    // sign conditions off the support: A cannot gain, B cannot lower Q^A
    let (gx, gy) = qa_gradient(inst, &z[..n], &z[n..]);
    let slack = 1e-9 * (lam.abs() + mu.abs()).max(1e-12);
    let ok_a = (0..n).filter(|i| !sa.contains(i)).all(|i| gx[i] <= lam + slack);
    let ok_b = (0..n).filter(|j| !sb.contains(j)).all(|j| gy[j] >= mu - slack);
    (ok_a && ok_b).then_some(z)
}

fn slackness_residual(inst: &ElectionInstance, x: &[f64], y: &[f64]) -> f64 {
    let (gx, gy) = qa_gradient(inst, x, y);
    let neg_gy: Vec<f64> = gy.iter().map(|g| -g).collect();
    let xa = complementary_slackness(x, &gx);
    let xb = complementary_slackness(y, &neg_gy);
    xa.iter().chain(&xb).fold(0.0, |m, v| m.max(v.abs()))
}

/// Nonnegative equilibrium of the deterministic majority game.
pub fn constrained_equilibrium(inst: &ElectionInstance, cfg: &BarrierConfig) -> Result<StrategyProfile> {
    constrained_equilibrium_report(inst, cfg).map(|s| s.profile)
}

/// As [`constrained_equilibrium`], with solver diagnostics.
pub fn constrained_equilibrium_report(inst: &ElectionInstance, cfg: &BarrierConfig) -> Result<DeterministicSolution> {
    let n = inst.n();
    if n == 1 {
        let p = StrategyProfile::from_vecs(vec![1.0], vec![1.0])?;
        return Ok(DeterministicSolution { profile: p, residual: 0.0, newton_iterations: 0, polished: false });
    }
    let start = match &cfg.start {
        Some(p) => {
            p.check(inst)?;
            p.clone()
        }
        None => StrategyProfile::proportional_to_votes(inst),
    };
    let mut z: Vec<f64> = interior_start(&start.x).into_iter().chain(interior_start(&start.y)).collect();
    let (gx, gy) = qa_gradient(inst, &z[..n], &z[n..]);
    let mut lam = gx.iter().zip(&z[..n]).map(|(g, x)| g * x).sum::<f64>() * cfg.t0 + n as f64;
    let mut mu = gy.iter().zip(&z[n..]).map(|(g, y)| g * y).sum::<f64>() * cfg.t0 - n as f64;

    let mut t = cfg.t0;
    let mut iterations = 0;
    loop {
        iterations += center(inst, &mut z, &mut lam, &mut mu, t, cfg)?;
        if t >= cfg.t_max {
            break;
        }
        // rescale multipliers with t so the next centering starts near the path
        let nt = t * cfg.t_factor;
        lam *= nt / t;
        mu *= nt / t;
        t = nt;
    }

    if cfg.polish {
        for thr in [cfg.zero_threshold, 10.0 * cfg.zero_threshold, 100.0 * cfg.zero_threshold] {
            let sa: Vec<usize> = (0..n).filter(|&i| z[i] >= thr).collect();
            let sb: Vec<usize> = (0..n).filter(|&j| z[n + j] >= thr).collect();
            if sa.is_empty() || sb.is_empty() {
                continue;
            }
            if let Some(p) = polish_on_support(inst, &z, &sa, &sb) {
                let profile = StrategyProfile::from_vecs(p[..n].to_vec(), p[n..].to_vec())?;
                let residual = slackness_residual(inst, profile.x.coords(), profile.y.coords());
                return Ok(DeterministicSolution { profile, residual, newton_iterations: iterations, polished: true });
            }
        }
    }
    let mut x = z[..n].to_vec();
    let mut y = z[n..].to_vec();
    for c in x.iter_mut().chain(y.iter_mut()) {
        if *c < cfg.zero_threshold {
            *c = 0.0;
        }
    }
    let profile = StrategyProfile::new(SimplexPoint::project(x), SimplexPoint::project(y))?;
    let residual = slackness_residual(inst, profile.x.coords(), profile.y.coords());
    Ok(DeterministicSolution { profile, residual, newton_iterations: iterations, polished: false })
}

/// A's share of the turnout, `(x_i+a_i)/(x_i+a_i+y_i+b_i)`, on the regions
/// where either candidate invests.
pub fn equal_fraction_check(inst: &ElectionInstance, eq: &StrategyProfile) -> Result<Vec<(usize, f64)>> {
    eq.check(inst)?;
    Ok((0..inst.n())
        .filter(|&i| eq.x[i] > 0.0 || eq.y[i] > 0.0)
        .map(|i| {
            let a = eq.x[i] + inst.alpha()[i];
            let b = eq.y[i] + inst.beta()[i];
            (i, a / (a + b))
        })
        .collect())
}

/// The common turnout share `(1 + a_S) / (2 + a_S + b_S)` predicted on a
/// no-abstention support `S`.
pub fn predicted_equal_fraction(inst: &ElectionInstance, support: &[usize]) -> f64 {
    let a: f64 = support.iter().map(|&i| inst.alpha()[i]).sum();
    let b: f64 = support.iter().map(|&i| inst.beta()[i]).sum();
    (1.0 + a) / (2.0 + a + b)
}

/// Expected vote totals of A, B and abstention (fractions of all voters).
pub fn vote_breakdown(inst: &ElectionInstance, profile: &StrategyProfile) -> (f64, f64, f64) {
    let (a, b) = vote_totals(inst, profile.x.coords(), profile.y.coords());
    (a, b, 1.0 - a - b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::{payoff_qa, qa_raw};
    use crate::presets;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut impl Rng, n: usize, with_gamma: bool) -> ElectionInstance {
        let v = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let a = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let b = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let g = (0..n).map(|_| if with_gamma { rng.random_range(0.0..1.5) } else { 0.0 }).collect();
        ElectionInstance::new(v, a, b, g).unwrap()
    }

    fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        // exponential spacings give a uniform draw on the simplex
        let e: Vec<f64> = (0..n).map(|_| -rng.random_range(1e-12f64..1.0).ln()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    }

    #[test]
    fn table1_unbounded_on_top_three() {
        let ub = unbounded_equilibrium(&presets::table1_instance(), &[0, 1, 2]).unwrap();
        let expect_x = [0.68239, 0.25797, 0.05964];
        let expect_y = [0.36436, 0.52052, 0.11512];
        for k in 0..3 {
            assert_abs_diff_eq!(ub.x_ub[k], expect_x[k], epsilon = 1e-5);
            assert_abs_diff_eq!(ub.y_ub[k], expect_y[k], epsilon = 1e-5);
        }
        assert_abs_diff_eq!(ub.x_ub.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ub.y_ub.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // vote totals 30.0% / 28.9%
        assert_abs_diff_eq!(ub.qa, 0.300, epsilon = 5e-4);
        assert_abs_diff_eq!(ub.qb, 0.289, epsilon = 5e-4);
    }

    #[test]
    fn unbounded_errors() {
        let inst = presets::table1_instance();
        assert_eq!(unbounded_equilibrium(&inst, &[]), Err(Error::EmptyActiveSet));
        assert!(unbounded_equilibrium(&inst, &[11]).is_err());
        assert!(unbounded_equilibrium(&inst, &[1, 1]).is_err());
    }

    #[test]
    fn unbounded_full_set_no_abstention_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(1..8);
            let inst = random_instance(&mut rng, n, false);
            let all: Vec<usize> = (0..n).collect();
            let ub = unbounded_equilibrium(&inst, &all).unwrap();
            let v = inst.v_normalized();
            let sa: f64 = inst.alpha().iter().sum();
            let sb: f64 = inst.beta().iter().sum();
            for i in 0..n {
                assert_abs_diff_eq!(ub.x_ub[i], v[i] * (1.0 + sa) - inst.alpha()[i], epsilon = 1e-12);
                // y + beta lies on the ray of slope (1 + sum beta)/(1 + sum alpha)
                let lhs = ub.y_ub[i] + inst.beta()[i];
                let rhs = (ub.x_ub[i] + inst.alpha()[i]) * (1.0 + sb) / (1.0 + sa);
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn unbounded_is_stationary_on_active_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(2..8);
            let inst = random_instance(&mut rng, n, true);
            let mut set: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
            if set.is_empty() {
                set.push(0);
            }
            let ub = unbounded_equilibrium(&inst, &set).unwrap();
            let (x, y) = ub.full(n);
            let (gx, gy) = qa_gradient(&inst, &x, &y);
            for w in set.windows(2) {
                assert_abs_diff_eq!(gx[w[0]], gx[w[1]], epsilon = 1e-10);
                assert_abs_diff_eq!(gy[w[0]], gy[w[1]], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn symmetric_full_set_gives_equal_efforts() {
        let inst = ElectionInstance::new(vec![1.0; 4], vec![0.3; 4], vec![0.3; 4], vec![0.0; 4]).unwrap();
        let ub = unbounded_equilibrium(&inst, &[0, 1, 2, 3]).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(ub.x_ub[k], ub.y_ub[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn effort_increases_with_own_voters() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = rng.random_range(2..7);
            let inst = random_instance(&mut rng, n, false);
            let all: Vec<usize> = (0..n).collect();
            let i = rng.random_range(0..n);
            let h = 1e-6;
            let mut vp = inst.v().to_vec();
            vp[i] += h;
            let bumped = ElectionInstance::new(vp, inst.alpha().to_vec(), inst.beta().to_vec(), inst.gamma().to_vec()).unwrap();
            let d = unbounded_equilibrium(&bumped, &all).unwrap().x_ub[i] - unbounded_equilibrium(&inst, &all).unwrap().x_ub[i];
            assert!(d > 0.0);
        }
    }

    #[test]
    fn abstention_does_not_change_full_set_vote_share() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let n = rng.random_range(1..6);
            let inst = random_instance(&mut rng, n, true);
            let all: Vec<usize> = (0..n).collect();
            let ub = unbounded_equilibrium(&inst, &all).unwrap();
            let (x, y) = ub.full(n);
            let sa: f64 = inst.alpha().iter().sum();
            let sb: f64 = inst.beta().iter().sum();
            let g: f64 = inst.gamma().iter().sum();
            assert_abs_diff_eq!(qa_raw(&inst, &x, &y), (1.0 + sa) / (2.0 + sa + sb), epsilon = 1e-12);
            assert_abs_diff_eq!(ub.qa / (ub.qa + ub.qb), (1.0 + sa) / (2.0 + sa + sb), epsilon = 1e-12);
            let _ = g;
        }
    }

    #[test]
    fn table1_constrained() {
        let inst = presets::table1_instance();
        let sol = constrained_equilibrium_report(&inst, &BarrierConfig::default()).unwrap();
        let refp = presets::table1_profile();
        assert!(sol.profile.x.max_abs_diff(&refp.x) < 3e-3);
        assert!(sol.profile.y.max_abs_diff(&refp.y) < 3e-3);
        assert!(sol.residual <= 1e-7, "residual {}", sol.residual);
        assert_abs_diff_eq!(payoff_qa(&inst, &sol.profile), 0.509, epsilon = 1e-3);
        let ub = unbounded_equilibrium(&inst, &[0, 1, 2]).unwrap();
        let (x, y) = ub.full(10);
        for i in 0..10 {
            assert_abs_diff_eq!(sol.profile.x[i], x[i], epsilon = 1e-6);
            assert_abs_diff_eq!(sol.profile.y[i], y[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn table2_equal_fractions() {
        let inst = presets::table2_instance();
        let eq = constrained_equilibrium(&inst, &BarrierConfig::default()).unwrap();
        let refp = presets::table2_profile();
        assert!(eq.x.max_abs_diff(&refp.x) < 3e-3);
        assert!(eq.y.max_abs_diff(&refp.y) < 3e-3);
        let fr = equal_fraction_check(&inst, &eq).unwrap();
        assert_eq!(fr.iter().map(|f| f.0).collect::<Vec<_>>(), vec![0, 1, 2]);
        let pred = predicted_equal_fraction(&inst, &[0, 1, 2]);
        for (_, f) in &fr {
            assert_abs_diff_eq!(*f, pred, epsilon = 1e-6);
            assert_abs_diff_eq!(*f, 0.514, epsilon = 5e-4);
        }
    }

    #[test]
    fn table1_fractions_reported_without_equality() {
        let inst = presets::table1_instance();
        let eq = constrained_equilibrium(&inst, &BarrierConfig::default()).unwrap();
        let fr = equal_fraction_check(&inst, &eq).unwrap();
        let expect = [0.513, 0.513, 0.517];
        for (k, (_, f)) in fr.iter().enumerate() {
            assert_abs_diff_eq!(*f, expect[k], epsilon = 5e-4);
        }
    }

    #[test]
    fn single_region_is_trivial() {
        let inst = ElectionInstance::new(vec![1.0], vec![0.2], vec![0.9], vec![0.4]).unwrap();
        let eq = constrained_equilibrium(&inst, &BarrierConfig::default()).unwrap();
        assert_eq!(eq.x.coords(), &[1.0]);
        assert_eq!(eq.y.coords(), &[1.0]);
    }

    #[test]
    fn random_deviations_never_pay() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..5 {
            let n = 3 + trial;
            let inst = random_instance(&mut rng, n, trial % 2 == 0);
            let eq = constrained_equilibrium(&inst, &BarrierConfig::default()).unwrap();
            let base = payoff_qa(&inst, &eq);
            for _ in 0..200 {
                let d = SimplexPoint::new(random_simplex(&mut rng, n)).unwrap();
                let pa = payoff_qa(&inst, &StrategyProfile::new(d.clone(), eq.y.clone()).unwrap());
                let pb = payoff_qa(&inst, &StrategyProfile::new(eq.x.clone(), d).unwrap());
                assert!(pa <= base + 1e-6);
                assert!(pb >= base - 1e-6);
            }
        }
    }

    #[test]
    fn converges_from_random_starts() {
        let inst = presets::table1_instance();
        let reference = constrained_equilibrium(&inst, &BarrierConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let start = StrategyProfile::from_vecs(random_simplex(&mut rng, 10), random_simplex(&mut rng, 10)).unwrap();
            let cfg = BarrierConfig { start: Some(start), ..Default::default() };
            let eq = constrained_equilibrium(&inst, &cfg).unwrap();
            assert!(eq.x.max_abs_diff(&reference.x) <= 1e-5);
            assert!(eq.y.max_abs_diff(&reference.y) <= 1e-5);
        }
    }

    #[test]
    fn matches_closed_form_when_support_closed_form_is_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..15 {
            let n = rng.random_range(2..7);
            let abst = rng.random_bool(0.5);
            let inst = random_instance(&mut rng, n, abst);
            let sol = constrained_equilibrium_report(&inst, &BarrierConfig::default()).unwrap();
            assert!(sol.residual <= 1e-7, "residual {}", sol.residual);
            let eq = sol.profile;
            let support: Vec<usize> = (0..n).filter(|&i| eq.x[i] > 0.0 || eq.y[i] > 0.0).collect();
            let ub = unbounded_equilibrium(&inst, &support).unwrap();
            if ub.is_nonnegative() {
                let (x, y) = ub.full(n);
                for i in 0..n {
                    assert_abs_diff_eq!(eq.x[i], x[i], epsilon = 1e-6);
                    assert_abs_diff_eq!(eq.y[i], y[i], epsilon = 1e-6);
                }
            }
        }
    }
}
