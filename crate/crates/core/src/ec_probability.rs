//! Electoral-college win probability: per-state Beta win probabilities,
//! the exact electoral-vote distribution, the gradient of the win
//! probability, and the two majority/electoral-college equivalences.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::{ElectionInstance, StrategyProfile};
use crate::quadrature::integrate;
use crate::special::{beta_reg, digamma, ln_beta};
use crate::simplex_dynamics::{OracleOutput, PayoffOracle};
use crate::stochastic::sample_batch;

/// How per-state win probabilities are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateModel {
    /// `P(Beta(k(alpha+x), k(beta+y)) > 1/2)`.
    Beta,
    /// The `k -> 0` limit, `(alpha+x) / (alpha+x+beta+y)`.
    LimitK0,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateWinProbs {
    pub p: Vec<f64>,
}

/// Distribution of A's electoral votes, `pmf[t] = P(T = t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EVDistribution {
    pub pmf: Vec<f64>,
}

impl EVDistribution {
    pub fn total_votes(&self) -> usize {
        self.pmf.len() - 1
    }

    /// `P(T > M/2)`, plus half of `P(T = M/2)` when `M` is even.
    pub fn win_prob(&self) -> f64 {
        let m = self.total_votes();
        let mut p: f64 = self.pmf[m / 2 + 1..].iter().sum();
        if m.is_multiple_of(2) {
            p += 0.5 * self.pmf[m / 2];
        }
        p
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(t, q)| t as f64 * q).sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,probability")?;
        for (t, q) in self.pmf.iter().enumerate() {
            writeln!(out, "{t},{q:e}")?;
        }
        Ok(())
    }
}

fn shapes(inst: &ElectionInstance, x: &[f64], y: &[f64], i: usize) -> (f64, f64) {
    (inst.alpha()[i] + x[i], inst.beta()[i] + y[i])
}

fn state_prob_raw(a: f64, b: f64, k: Option<f64>) -> f64 {
    match k {
        Some(_) if a == b => 0.5,
        // 1 - I_{1/2}(ka, kb) = I_{1/2}(kb, ka)
        Some(k) => beta_reg(k * b, k * a, 0.5),
        None => a / (a + b),
    }
}

fn noise(inst: &ElectionInstance, model: StateModel) -> Result<Option<f64>> {
    match model {
        StateModel::Beta => inst.require_k().map(Some),
        StateModel::LimitK0 => Ok(None),
    }
}

/// Probability that A wins state `i`.
pub fn state_win_prob(inst: &ElectionInstance, profile: &StrategyProfile, i: usize, model: StateModel) -> Result<f64> {
    profile.check(inst)?;
    if i >= inst.n() {
        return Err(Error::IndexOutOfRange { index: i, n: inst.n() });
    }
    let (a, b) = shapes(inst, profile.x.coords(), profile.y.coords(), i);
    Ok(state_prob_raw(a, b, noise(inst, model)?))
}

pub(crate) fn state_probs_raw(inst: &ElectionInstance, x: &[f64], y: &[f64], k: Option<f64>) -> Vec<f64> {
    (0..inst.n())
        .map(|i| {
            let (a, b) = shapes(inst, x, y, i);
            state_prob_raw(a, b, k)
        })
        .collect()
}

pub fn state_win_probs(inst: &ElectionInstance, profile: &StrategyProfile, model: StateModel) -> Result<StateWinProbs> {
    profile.check(inst)?;
    let k = noise(inst, model)?;
    Ok(StateWinProbs { p: state_probs_raw(inst, profile.x.coords(), profile.y.coords(), k) })
}

/// Exact distribution of A's electoral votes by the state-by-state
/// recursion, in `O(n M)`.
pub fn ev_distribution(w: &[u32], p: &StateWinProbs) -> Result<EVDistribution> {
    if w.len() != p.p.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), got: p.p.len() });
    }
    if w.is_empty() || w.contains(&0) {
        return Err(Error::InvalidInstance("electoral votes must be >= 1".into()));
    }
    if p.p.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::InvalidInstance("state probabilities must lie in [0, 1]".into()));
    }
    Ok(EVDistribution { pmf: recurse(w, &p.p, None) })
}

/// The recursion with state `fixed.0` forced to outcome `fixed.1`.
fn recurse(w: &[u32], p: &[f64], fixed: Option<(usize, bool)>) -> Vec<f64> {
    let m: usize = w.iter().map(|&wi| wi as usize).sum();
    let mut pmf = vec![0.0; m + 1];
    pmf[0] = 1.0;
    let mut reach = 0;
    for (i, (&wi, &pi)) in w.iter().zip(p).enumerate() {
        let pi = match fixed {
            Some((j, won)) if j == i => won as u8 as f64,
            _ => pi,
        };
        let wi = wi as usize;
        reach += wi;
        for t in (0..=reach).rev() {
            let keep = pmf[t] * (1.0 - pi);
            let gain = if t >= wi { pmf[t - wi] * pi } else { 0.0 };
            pmf[t] = keep + gain;
        }
    }
    pmf
}

fn win_from_pmf(pmf: Vec<f64>) -> f64 {
    EVDistribution { pmf }.win_prob()
}

pub(crate) fn win_prob_raw(w: &[u32], p: &[f64]) -> f64 {
    win_from_pmf(recurse(w, p, None))
}

/// `P(G)`: probability that A wins a majority of the electoral votes.
pub fn win_prob_ec(inst: &ElectionInstance, profile: &StrategyProfile, model: StateModel) -> Result<f64> {
    let w = inst.require_w()?;
    let p = state_win_probs(inst, profile, model)?;
    Ok(ev_distribution(w, &p)?.win_prob())
}

/// `P(G | state i won) - P(G | state i lost)` for every state, in `O(n M)`.
///
/// With `F_i` the vote distribution of states before `i` and `h_i(r)` the
/// expected tie-split win indicator of `r + (votes from states i..)`,
/// `P(G | state i fixed to c) = sum_s F_i(s) h_{i+1}(s + c w_i)`.
pub fn swing_values(w: &[u32], p: &[f64]) -> Vec<f64> {
    let n = w.len();
    let m: usize = w.iter().map(|&x| x as usize).sum();
    let score = |t: usize| match (2 * t).cmp(&m) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Equal => 0.5,
        std::cmp::Ordering::Less => 0.0,
    };
    // h[i][r] for i = n down to 0
    let mut h = vec![vec![0.0; m + 1]; n + 1];
    for (r, v) in h[n].iter_mut().enumerate() {
        *v = score(r);
    }
    for i in (0..n).rev() {
        let wi = w[i] as usize;
        for r in 0..=m {
            let up = if r + wi <= m { h[i + 1][r + wi] } else { 1.0 };
            h[i][r] = p[i] * up + (1.0 - p[i]) * h[i + 1][r];
        }
    }
    let mut prefix = vec![0.0; m + 1];
    prefix[0] = 1.0;
    let mut reach = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let wi = w[i] as usize;
        let next = &h[i + 1];
        let (mut won, mut lost) = (0.0, 0.0);
        for s in 0..=reach {
            won += prefix[s] * next[s + wi];
            lost += prefix[s] * next[s];
        }
        out.push(won - lost);
        reach += wi;
        for t in (0..=reach).rev() {
            let gain = if t >= wi { prefix[t - wi] * p[i] } else { 0.0 };
            prefix[t] = prefix[t] * (1.0 - p[i]) + gain;
        }
    }
    out
}

/// `int_{1/2}^1 f(ln u, ln(1-u)) Beta(a, b)(u) du`. Near `u = 1` the
/// variable is changed to `1 - u = s^(1/b)` when `b < 1`, which removes the
/// density's singularity.
fn upper_half<F: Fn(f64, f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let m = if b < 1.0 { 1.0 / b } else { 1.0 };
    let lb = ln_beta(a, b);
    let top = 0.5f64.powf(1.0 / m);
    let g = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let ls = s.ln();
        let lv = m * ls;
        let lu = (-lv.exp()).ln_1p();
        let dens = ((a - 1.0) * lu + (b - 1.0) * lv - lb + m.ln() + (m - 1.0) * ls).exp();
        f(lu, lv) * dens
    };
    integrate(g, 0.0, top, 1e-13, 400).0
}

fn lower_half<F: Fn(f64, f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    upper_half(b, a, |lt, ls| f(ls, lt))
}

/// `dp/da` for `p = P(Beta(a, b) > 1/2)`.
fn state_prob_da(a: f64, b: f64, p: f64) -> f64 {
    upper_half(a, b, |lu, _| lu) + p * (digamma(a + b) - digamma(a))
}

/// `dp/db` for `p = P(Beta(a, b) > 1/2)`.
fn state_prob_db(a: f64, b: f64, p: f64) -> f64 {
    upper_half(a, b, |_, lv| lv) + p * (digamma(a + b) - digamma(b))
}

#[cfg(test)]
fn state_prob_shape_derivs(a: f64, b: f64) -> (f64, f64) {
    let p = beta_reg(b, a, 0.5);
    (state_prob_da(a, b, p), state_prob_db(a, b, p))
}

/// Gradient of `P(G)` in `(x, y)`, both of A's payoff.
pub fn win_prob_ec_gradient(inst: &ElectionInstance, profile: &StrategyProfile, model: StateModel) -> Result<(Vec<f64>, Vec<f64>)> {
    profile.check(inst)?;
    let w = inst.require_w()?;
    let k = noise(inst, model)?;
    let (x, y) = (profile.x.coords(), profile.y.coords());
    Ok((side_gradient(inst, w, x, y, k, Side::A), side_gradient(inst, w, x, y, k, Side::B)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Side {
    A,
    B,
}

/// Gradient of `P(G)` in one candidate's efforts.
pub(crate) fn side_gradient(inst: &ElectionInstance, w: &[u32], x: &[f64], y: &[f64], k: Option<f64>, side: Side) -> Vec<f64> {
    let p = state_probs_raw(inst, x, y, k);
    let swing = swing_values(w, &p);
    (0..inst.n())
        .map(|i| {
            if swing[i] == 0.0 {
                return 0.0;
            }
            let (a, b) = shapes(inst, x, y, i);
            let d = match (k, side) {
                (Some(k), Side::A) => k * state_prob_da(k * a, k * b, p[i]),
                (Some(k), Side::B) => k * state_prob_db(k * a, k * b, p[i]),
                (None, Side::A) => b / (a + b).powi(2),
                (None, Side::B) => -a / (a + b).powi(2),
            };
            swing[i] * d
        })
        .collect()
}

fn check_proportional(inst: &ElectionInstance) -> Result<f64> {
    let w = inst.require_w()?;
    if inst.gamma().iter().any(|g| *g != 0.0) {
        return Err(Error::Precondition("abstention must be zero".into()));
    }
    let theta = w[0] as f64 / inst.v()[0];
    for (wi, vi) in w.iter().zip(inst.v()) {
        if ((*wi as f64 / vi) - theta).abs() > 1e-9 * theta {
            return Err(Error::Precondition("electoral votes are not proportional to voters".into()));
        }
    }
    Ok(theta)
}

/// Expected-vote payoffs of A under majority rule, `sum v_i E[S^A_i]`, and
/// under the electoral college, `sum w_i E[S^A_i / (S^A_i + S^B_i)]`. The EC
/// expectation is integrated against the Beta density, not taken from the
/// closed-form mean.
pub fn equivalence_ms_ec_expectation(inst: &ElectionInstance, profile: &StrategyProfile) -> Result<(f64, f64)> {
    check_proportional(inst)?;
    profile.check(inst)?;
    let k = inst.require_k()?;
    let w = inst.require_w()?;
    let (x, y) = (profile.x.coords(), profile.y.coords());
    let mut ms = 0.0;
    let mut ec = 0.0;
    for i in 0..inst.n() {
        let (a, b) = shapes(inst, x, y, i);
        ms += inst.v()[i] * a / (a + b);
        let mean = lower_half(k * a, k * b, |lu, _| lu.exp()) + upper_half(k * a, k * b, |lu, _| lu.exp());
        ec += w[i] as f64 * mean;
    }
    Ok((ms, ec))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallKRow {
    pub k: f64,
    pub p_ms: f64,
    pub p_ec: f64,
    pub gap: f64,
    /// Fraction of draws where the two rules pick different winners.
    pub disagreement: f64,
}

/// Monte-Carlo win probabilities of A under both rules on shared draws,
/// for each `k`.
pub fn equivalence_ms_ec_smallk(
    inst: &ElectionInstance,
    profile: &StrategyProfile,
    ks: &[f64],
    batch_size: usize,
    seed: u64,
) -> Result<Vec<SmallKRow>> {
    check_proportional(inst)?;
    let w = inst.require_w()?;
    let m: f64 = w.iter().map(|&x| x as f64).sum();
    let n = inst.n();
    ks.iter()
        .map(|&k| {
            let ik = inst.clone().with_noise(k)?;
            let batch = sample_batch(&ik, profile, batch_size, seed)?;
            let (mut ms_w, mut ec_w, mut differ) = (0.0, 0.0, 0.0);
            for s in 0..batch.size() {
                let (la, lb) = (batch.ln_a(s), batch.ln_b(s));
                let margin: f64 = (0..n).map(|i| inst.v()[i] * (la[i].exp() - lb[i].exp())).sum();
                let ms = if margin > 0.0 { 1.0 } else { 0.0 };
                let ev: f64 = (0..n).filter(|&i| la[i] > lb[i]).map(|i| w[i] as f64).sum();
                let ec = if 2.0 * ev > m {
                    1.0
                } else if 2.0 * ev == m {
                    0.5
                } else {
                    0.0
                };
                ms_w += ms;
                ec_w += ec;
                differ += f64::abs(ms - ec);
            }
            let nf = batch.size() as f64;
            let (p_ms, p_ec) = (ms_w / nf, ec_w / nf);
            Ok(SmallKRow { k, p_ms, p_ec, gap: (p_ms - p_ec).abs(), disagreement: differ / nf })
        })
        .collect()
}

/// Exact electoral-college payoff for [`crate::simplex_dynamics::gda_solve`].
pub struct EcOracle<'a> {
    pub inst: &'a ElectionInstance,
    pub model: StateModel,
}

impl PayoffOracle for EcOracle<'_> {
    fn evaluate(&mut self, profile: &StrategyProfile) -> Result<OracleOutput> {
        let payoff = win_prob_ec(self.inst, profile, self.model)?;
        let (grad_x, grad_y) = win_prob_ec_gradient(self.inst, profile, self.model)?;
        Ok(OracleOutput { payoff, grad_x, grad_y, resampled: false })
    }
}
