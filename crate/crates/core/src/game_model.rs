//! Election instances, simplex strategies and the deterministic payoff.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(coords) == 1` for an accepted simplex point.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Violations up to this size are silently renormalized away.
pub const RENORMALIZE_TOL: f64 = 1e-6;

/// A campaign instance: per-region voters, biases and abstention, plus the
/// optional electoral votes and noise level needed by the EC and
/// stochastic solvers. The budget of each candidate is 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectionInstance {
    v: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    w: Option<Vec<u32>>,
    k: Option<f64>,
}

fn check_len(name: &str, got: usize, n: usize) -> Result<()> {
    if got != n {
        return Err(Error::InvalidInstance(format!("{name} has {got} entries, expected {n}")));
    }
    Ok(())
}

impl ElectionInstance {
    pub fn new(v: Vec<f64>, alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        let n = v.len();
        if n == 0 {
            return Err(Error::InvalidInstance("at least one region is required".into()));
        }
        check_len("alpha", alpha.len(), n)?;
        check_len("beta", beta.len(), n)?;
        check_len("gamma", gamma.len(), n)?;
        for i in 0..n {
            if !(v[i].is_finite() && v[i] >= 0.0) {
                return Err(Error::InvalidInstance(format!("v[{i}] = {} must be finite and >= 0", v[i])));
            }
            if !(alpha[i].is_finite() && alpha[i] > 0.0) {
                return Err(Error::InvalidInstance(format!("alpha[{i}] = {} must be > 0", alpha[i])));
            }
            if !(beta[i].is_finite() && beta[i] > 0.0) {
                return Err(Error::InvalidInstance(format!("beta[{i}] = {} must be > 0", beta[i])));
            }
            if !(gamma[i].is_finite() && gamma[i] >= 0.0) {
                return Err(Error::InvalidInstance(format!("gamma[{i}] = {} must be >= 0", gamma[i])));
            }
        }
        if v.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidInstance("total voter weight must be positive".into()));
        }
        Ok(Self { v, alpha, beta, gamma, w: None, k: None })
    }

    pub fn with_electoral_votes(mut self, w: Vec<u32>) -> Result<Self> {
        check_len("w", w.len(), self.n())?;
        if let Some(i) = w.iter().position(|&wi| wi == 0) {
            return Err(Error::InvalidInstance(format!("w[{i}] must be >= 1")));
        }
        // totals are accumulated in u64; anything beyond usize would not fit a pmf anyway
        let total: u64 = w.iter().map(|&x| x as u64).sum();
        if total > (usize::MAX / 16) as u64 {
            return Err(Error::InvalidInstance("total electoral votes too large".into()));
        }
        self.w = Some(w);
        Ok(self)
    }

    pub fn with_noise(mut self, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidInstance(format!("k = {k} must be finite and > 0")));
        }
        self.k = Some(k);
        Ok(self)
    }

    pub fn without_noise(mut self) -> Self {
        self.k = None;
        self
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }
    pub fn v(&self) -> &[f64] {
        &self.v
    }
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    pub fn w(&self) -> Option<&[u32]> {
        self.w.as_deref()
    }
    pub fn k(&self) -> Option<f64> {
        self.k
    }

    pub fn require_k(&self) -> Result<f64> {
        self.k.ok_or(Error::MissingField("k"))
    }

    pub fn require_w(&self) -> Result<&[u32]> {
        self.w.as_deref().ok_or(Error::MissingField("w"))
    }

    /// Total electoral votes M, if `w` is present.
    pub fn total_electoral_votes(&self) -> Option<usize> {
        self.w.as_ref().map(|w| w.iter().map(|&x| x as usize).sum())
    }

    /// Voter weights rescaled to sum to one.
    pub fn v_normalized(&self) -> Vec<f64> {
        let s: f64 = self.v.iter().sum();
        self.v.iter().map(|x| x / s).collect()
    }

    /// Same instance with abstention replaced.
    pub fn with_gamma(&self, gamma: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.v.clone(), self.alpha.clone(), self.beta.clone(), gamma)?;
        out.w = self.w.clone();
        out.k = self.k;
        Ok(out)
    }

    /// Abstention multiplied by `g >= 0`.
    pub fn scale_abstention(&self, g: f64) -> Result<Self> {
        self.with_gamma(self.gamma.iter().map(|x| x * g).collect())
    }

    /// Biases multiplied by `f > 0`; abstention too when `with_abstention`.
    pub fn scale_bias(&self, f: f64, with_abstention: bool) -> Result<Self> {
        let g = if with_abstention { f } else { 1.0 };
        let mut out = Self::new(
            self.v.clone(),
            self.alpha.iter().map(|x| x * f).collect(),
            self.beta.iter().map(|x| x * f).collect(),
            self.gamma.iter().map(|x| x * g).collect(),
        )?;
        out.w = self.w.clone();
        out.k = self.k;
        Ok(out)
    }
}

/// A point of the unit simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Validate `coords`. Small rounding drift (below 1e-6) is renormalized;
    /// anything larger is rejected.
    pub fn new(mut coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidSimplex("empty point".into()));
        }
        for (i, c) in coords.iter_mut().enumerate() {
            if !c.is_finite() {
                return Err(Error::InvalidSimplex(format!("coordinate {i} is not finite")));
            }
            if *c < 0.0 {
                if *c < -RENORMALIZE_TOL {
                    return Err(Error::InvalidSimplex(format!("coordinate {i} = {c} is negative")));
                }
                *c = 0.0;
            }
        }
        let s: f64 = coords.iter().sum();
        if (s - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::InvalidSimplex(format!("coordinates sum to {s}")));
        }
        if (s - 1.0).abs() > 0.0 {
            coords.iter_mut().for_each(|c| *c /= s);
        }
        Ok(Self(coords))
    }

    /// Clip negatives to zero and rescale to unit sum. Falls back to the
    /// uniform point if nothing positive is left.
    pub fn project(mut raw: Vec<f64>) -> Self {
        for c in raw.iter_mut() {
            if !(*c > 0.0) {
                *c = 0.0;
            }
        }
        let s: f64 = raw.iter().sum();
        if s > 0.0 {
            raw.iter_mut().for_each(|c| *c /= s);
            Self(raw)
        } else {
            Self::uniform(raw.len())
        }
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        Self(c)
    }

    /// Point proportional to nonnegative weights.
    pub fn proportional(weights: &[f64]) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidSimplex("weights must be nonnegative with positive sum".into()));
        }
        Ok(Self(weights.iter().map(|w| w / s).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// Indices with coordinate above `tol`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] > tol).collect()
    }

    pub fn max_abs_diff(&self, other: &SimplexPoint) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Effort vectors of both candidates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub x: SimplexPoint,
    pub y: SimplexPoint,
}

impl StrategyProfile {
    pub fn new(x: SimplexPoint, y: SimplexPoint) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
        }
        Ok(Self { x, y })
    }

    pub fn from_vecs(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(SimplexPoint::new(x)?, SimplexPoint::new(y)?)
    }

    /// Both candidates proportional to the voter weights.
    pub fn proportional_to_votes(inst: &ElectionInstance) -> Self {
        let p = SimplexPoint::proportional(inst.v()).expect("validated instance");
        Self { x: p.clone(), y: p }
    }

    pub fn n(&self) -> usize {
        self.x.dim()
    }

    pub(crate) fn check(&self, inst: &ElectionInstance) -> Result<()> {
        if self.x.dim() != inst.n() {
            return Err(Error::DimensionMismatch { expected: inst.n(), got: self.x.dim() });
        }
        if self.y.dim() != inst.n() {
            return Err(Error::DimensionMismatch { expected: inst.n(), got: self.y.dim() });
        }
        Ok(())
    }
}

/// `(sA, sB, sC)` for region `i`.
pub fn vote_shares(inst: &ElectionInstance, profile: &StrategyProfile, i: usize) -> Result<(f64, f64, f64)> {
    profile.check(inst)?;
    if i >= inst.n() {
        return Err(Error::IndexOutOfRange { index: i, n: inst.n() });
    }
    let a = profile.x[i] + inst.alpha[i];
    let b = profile.y[i] + inst.beta[i];
    let c = inst.gamma[i];
    let s = a + b + c;
    Ok((a / s, b / s, c / s))
}

/// Turnout `(a+b)/sigma` and A's share of the turnout `a/(a+b)` in region `i`.
pub fn turnout_and_vft(inst: &ElectionInstance, x: &[f64], y: &[f64], i: usize) -> (f64, f64) {
    let a = x[i] + inst.alpha[i];
    let b = y[i] + inst.beta[i];
    ((a + b) / (a + b + inst.gamma[i]), a / (a + b))
}

/// Q^A on raw effort vectors, which need not lie on the simplex.
pub fn qa_raw(inst: &ElectionInstance, x: &[f64], y: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..inst.n() {
        let a = x[i] + inst.alpha[i];
        let b = y[i] + inst.beta[i];
        let s = a + b + inst.gamma[i];
        num += inst.v[i] * a / s;
        den += inst.v[i] * (a + b) / s;
    }
    num / den
}

/// A's share of the votes cast.
pub fn payoff_qa(inst: &ElectionInstance, profile: &StrategyProfile) -> f64 {
    qa_raw(inst, profile.x.coords(), profile.y.coords())
}

pub fn payoff_qb(inst: &ElectionInstance, profile: &StrategyProfile) -> f64 {
    1.0 - payoff_qa(inst, profile)
}

/// Expected vote totals `(sum v sA, sum v sB)` with `v` normalized.
pub fn vote_totals(inst: &ElectionInstance, x: &[f64], y: &[f64]) -> (f64, f64) {
    let vs: f64 = inst.v.iter().sum();
    let mut ta = 0.0;
    let mut tb = 0.0;
    for i in 0..inst.n() {
        let a = x[i] + inst.alpha[i];
        let b = y[i] + inst.beta[i];
        let s = a + b + inst.gamma[i];
        ta += inst.v[i] * a / s;
        tb += inst.v[i] * b / s;
    }
    (ta / vs, tb / vs)
}

/// Gradient and Hessian of Q^A over the stacked variables `(x, y)`.
///
/// Index `i` is `x_i`, index `n + i` is `y_i`.
pub fn qa_derivatives(inst: &ElectionInstance, x: &[f64], y: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = inst.n();
    let m = 2 * n;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut dn = DVector::zeros(m);
    let mut dd = DVector::zeros(m);
    // per-region 2x2 blocks of the numerator/denominator Hessians
    let mut hn = vec![[0.0; 3]; n];
    let mut hd = vec![0.0; n];
    for i in 0..n {
        let vi = inst.v[i];
        let a = x[i] + inst.alpha[i];
        let b = y[i] + inst.beta[i];
        let g = inst.gamma[i];
        let s = a + b + g;
        let s2 = s * s;
        let s3 = s2 * s;
        num += vi * a / s;
        den += vi * (a + b) / s;
        dn[i] = vi * (b + g) / s2;
        dn[n + i] = -vi * a / s2;
        dd[i] = vi * g / s2;
        dd[n + i] = vi * g / s2;
        hn[i] = [-2.0 * vi * (b + g) / s3, vi * (a - b - g) / s3, 2.0 * vi * a / s3];
        hd[i] = -2.0 * vi * g / s3;
    }
    let q = num / den;
    let dq = (&dn - &dd * q) / den;
    let mut h = -(&dq * dd.transpose()) - (&dd * dq.transpose());
    for i in 0..n {
        let [xx, xy, yy] = hn[i];
        h[(i, i)] += xx - q * hd[i];
        h[(i, n + i)] += xy - q * hd[i];
        h[(n + i, i)] += xy - q * hd[i];
        h[(n + i, n + i)] += yy - q * hd[i];
    }
    h /= den;
    (q, dq, h)
}

/// Gradient and Hessian of Q^A with respect to `x` only.
pub fn payoff_gradient_hessian_qa(inst: &ElectionInstance, profile: &StrategyProfile) -> (Vec<f64>, DMatrix<f64>) {
    let n = inst.n();
    let (_, g, h) = qa_derivatives(inst, profile.x.coords(), profile.y.coords());
    (g.rows(0, n).iter().copied().collect(), h.view((0, 0), (n, n)).into_owned())
}

/// Gradients of Q^A in `x` and in `y`.
pub fn qa_gradient(inst: &ElectionInstance, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = inst.n();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut dnx = vec![0.0; n];
    let mut dny = vec![0.0; n];
    let mut dd = vec![0.0; n];
    for i in 0..n {
        let vi = inst.v[i];
        let a = x[i] + inst.alpha[i];
        let b = y[i] + inst.beta[i];
        let g = inst.gamma[i];
        let s = a + b + g;
        num += vi * a / s;
        den += vi * (a + b) / s;
        dnx[i] = vi * (b + g) / (s * s);
        dny[i] = -vi * a / (s * s);
        dd[i] = vi * g / (s * s);
    }
    let q = num / den;
    let gx = (0..n).map(|i| (dnx[i] - q * dd[i]) / den).collect();
    let gy = (0..n).map(|i| (dny[i] - q * dd[i]) / den).collect();
    (gx, gy)
}
