//! Dirichlet vote-share sampling and Monte-Carlo estimators for the
//! majority-system win probability, its gradient, and sample reuse across
//! nearby profiles by likelihood-ratio weighting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::{ElectionInstance, StrategyProfile};
use crate::simplex_dynamics::{OracleOutput, PayoffOracle};
use crate::special::{beta_reg, digamma, ln_multi_beta};

/// Samples drawn per RNG stream; stream `c` covers samples `c*CHUNK ..`.
pub const CHUNK: usize = 4096;

/// One draw of per-region `(sA, sB, sC)` triples.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeSample {
    pub shares: Vec<[f64; 3]>,
    pub sampled_at: StrategyProfile,
    pub seed_id: u64,
}

/// `size` i.i.d. outcomes at one profile, stored as log shares
/// (row-major, one row of `n` regions per sample).
#[derive(Clone, Debug)]
pub struct SampleBatch {
    n: usize,
    size: usize,
    k: f64,
    seed: u64,
    sampled_at: StrategyProfile,
    ln_a: Vec<f64>,
    ln_b: Vec<f64>,
}

impl SampleBatch {
    pub fn size(&self) -> usize {
        self.size
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn sampled_at(&self) -> &StrategyProfile {
        &self.sampled_at
    }

    /// `ln sA` of sample `s`, all regions.
    pub fn ln_a(&self, s: usize) -> &[f64] {
        &self.ln_a[s * self.n..(s + 1) * self.n]
    }
    pub fn ln_b(&self, s: usize) -> &[f64] {
        &self.ln_b[s * self.n..(s + 1) * self.n]
    }

    pub fn sample(&self, s: usize) -> OutcomeSample {
        let shares = self
            .ln_a(s)
            .iter()
            .zip(self.ln_b(s))
            .map(|(la, lb)| {
                let (a, b) = (la.exp(), lb.exp());
                [a, b, (1.0 - a - b).max(0.0)]
            })
            .collect();
        OutcomeSample { shares, sampled_at: self.sampled_at.clone(), seed_id: self.seed }
    }

    /// A's margin `sum_i v_i (sA_i - sB_i)` for each sample.
    fn margins(&self, v: &[f64]) -> Vec<f64> {
        (0..self.size)
            .map(|s| {
                self.ln_a(s)
                    .iter()
                    .zip(self.ln_b(s))
                    .zip(v)
                    .map(|((la, lb), vi)| vi * (la.exp() - lb.exp()))
                    .sum()
            })
            .collect()
    }
}

/// Draws `ln G` for `G ~ Gamma(shape, 1)`, staying accurate for tiny shapes.
#[derive(Clone, Copy, Debug)]
enum LogGamma {
    Direct(Gamma<f64>),
    /// shape < 1: `ln G(shape+1) + ln(U)/shape`
    Boosted(Gamma<f64>, f64),
    Zero,
}

impl LogGamma {
    fn new(shape: f64) -> Self {
        if shape <= 0.0 {
            LogGamma::Zero
        } else if shape < 1.0 {
            LogGamma::Boosted(Gamma::new(shape + 1.0, 1.0).expect("positive shape"), shape)
        } else {
            LogGamma::Direct(Gamma::new(shape, 1.0).expect("positive shape"))
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LogGamma::Direct(g) => g.sample(rng).ln(),
            LogGamma::Boosted(g, shape) => {
                let u: f64 = 1.0 - rng.random::<f64>();
                g.sample(rng).ln() + u.ln() / shape
            }
            LogGamma::Zero => f64::NEG_INFINITY,
        }
    }
}

fn log_sum_exp3(a: f64, b: f64, c: f64) -> f64 {
    let m = a.max(b).max(c);
    m + ((a - m).exp() + (b - m).exp() + (c - m).exp()).ln()
}

struct Shapes {
    a: Vec<LogGamma>,
    b: Vec<LogGamma>,
    c: Vec<LogGamma>,
}

fn shapes(inst: &ElectionInstance, profile: &StrategyProfile, k: f64) -> Shapes {
    let n = inst.n();
    Shapes {
        a: (0..n).map(|i| LogGamma::new(k * (profile.x[i] + inst.alpha()[i]))).collect(),
        b: (0..n).map(|i| LogGamma::new(k * (profile.y[i] + inst.beta()[i]))).collect(),
        c: (0..n).map(|i| LogGamma::new(k * inst.gamma()[i])).collect(),
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Fill `out_a`, `out_b` (length `count * n`) with log shares.
fn draw_chunk(sh: &Shapes, seed: u64, chunk: usize, count: usize, out_a: &mut [f64], out_b: &mut [f64]) {
    let n = sh.a.len();
    let mut rng = chunk_rng(seed, chunk);
    for s in 0..count {
        for i in 0..n {
            let la = sh.a[i].draw(&mut rng);
            let lb = sh.b[i].draw(&mut rng);
            let lc = sh.c[i].draw(&mut rng);
            let lt = log_sum_exp3(la, lb, lc);
            out_a[s * n + i] = la - lt;
            out_b[s * n + i] = lb - lt;
        }
    }
}

fn check_profile(inst: &ElectionInstance, profile: &StrategyProfile) -> Result<f64> {
    profile.check(inst)?;
    inst.require_k()
}

/// Draw `size` outcomes at `profile`. Output depends only on `seed`, not on
/// the number of worker threads.
pub fn sample_batch(inst: &ElectionInstance, profile: &StrategyProfile, size: usize, seed: u64) -> Result<SampleBatch> {
    let k = check_profile(inst, profile)?;
    if size == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = inst.n();
    let sh = shapes(inst, profile, k);
    let mut ln_a = vec![0.0; size * n];
    let mut ln_b = vec![0.0; size * n];
    ln_a.par_chunks_mut(CHUNK * n)
        .zip(ln_b.par_chunks_mut(CHUNK * n))
        .enumerate()
        .for_each(|(c, (oa, ob))| draw_chunk(&sh, seed, c, oa.len() / n, oa, ob));
    Ok(SampleBatch { n, size, k, seed, sampled_at: profile.clone(), ln_a, ln_b })
}

fn bernoulli_se(p: f64, size: usize) -> f64 {
    (p * (1.0 - p) / size as f64).sqrt()
}

/// Fraction of samples where A's vote total strictly exceeds B's, and its
/// standard error.
pub fn estimate_win_prob(inst: &ElectionInstance, batch: &SampleBatch) -> (f64, f64) {
    let wins = batch.margins(inst.v()).iter().filter(|m| **m > 0.0).count();
    let p = wins as f64 / batch.size as f64;
    (p, bernoulli_se(p, batch.size))
}

/// Win probability from `size` fresh draws without keeping them. Uses the
/// same streams as [`sample_batch`], so both agree for equal seeds.
pub fn win_prob_streaming(inst: &ElectionInstance, profile: &StrategyProfile, size: usize, seed: u64) -> Result<(f64, f64)> {
    let k = check_profile(inst, profile)?;
    if size == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = inst.n();
    let sh = shapes(inst, profile, k);
    let chunks = size.div_ceil(CHUNK);
    let v = inst.v();
    let wins: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(size - c * CHUNK);
            let mut oa = vec![0.0; count * n];
            let mut ob = vec![0.0; count * n];
            draw_chunk(&sh, seed, c, count, &mut oa, &mut ob);
            (0..count)
                .filter(|&s| {
                    let m: f64 = (0..n).map(|i| v[i] * (oa[s * n + i].exp() - ob[s * n + i].exp())).sum();
                    m > 0.0
                })
                .count()
        })
        .sum();
    let p = wins as f64 / size as f64;
    Ok((p, bernoulli_se(p, size)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    pub se_x: Vec<f64>,
    pub se_y: Vec<f64>,
    /// Winning samples whose log share was not finite (skipped).
    pub underflows: usize,
    pub win_prob: f64,
}

fn psi_terms(inst: &ElectionInstance, profile: &StrategyProfile, k: f64) -> (Vec<f64>, Vec<f64>) {
    let n = inst.n();
    let mut za = vec![0.0; n];
    let mut zb = vec![0.0; n];
    for i in 0..n {
        let a = profile.x[i] + inst.alpha()[i];
        let b = profile.y[i] + inst.beta()[i];
        let ps = digamma(k * (a + b + inst.gamma()[i]));
        za[i] = ps - digamma(k * a);
        zb[i] = ps - digamma(k * b);
    }
    (za, zb)
}

fn gradient_with_weights(
    inst: &ElectionInstance,
    batch: &SampleBatch,
    eval_at: &StrategyProfile,
    weights: Option<&[f64]>,
) -> GradientEstimate {
    let n = batch.n;
    let k = batch.k;
    let (za, zb) = psi_terms(inst, eval_at, k);
    let margins = batch.margins(inst.v());
    let mut sum_x = vec![0.0; n];
    let mut sum_y = vec![0.0; n];
    let mut sq_x = vec![0.0; n];
    let mut sq_y = vec![0.0; n];
    let mut p = 0.0;
    let mut underflows = 0;
    for (s, m) in margins.iter().enumerate() {
        if *m <= 0.0 {
            continue;
        }
        let h = weights.map_or(1.0, |w| w[s]);
        p += h;
        let (la, lb) = (batch.ln_a(s), batch.ln_b(s));
        for i in 0..n {
            if !(la[i].is_finite() && lb[i].is_finite()) {
                underflows += 1;
                continue;
            }
            let qx = k * h * (la[i] + za[i]);
            let qy = k * h * (lb[i] + zb[i]);
            sum_x[i] += qx;
            sum_y[i] += qy;
            sq_x[i] += qx * qx;
            sq_y[i] += qy * qy;
        }
    }
    let nf = batch.size as f64;
    let se = |sum: f64, sq: f64| ((sq / nf - (sum / nf).powi(2)).max(0.0) / nf).sqrt();
    GradientEstimate {
        grad_x: sum_x.iter().map(|v| v / nf).collect(),
        grad_y: sum_y.iter().map(|v| v / nf).collect(),
        se_x: (0..n).map(|i| se(sum_x[i], sq_x[i])).collect(),
        se_y: (0..n).map(|i| se(sum_y[i], sq_y[i])).collect(),
        underflows,
        win_prob: p / nf,
    }
}

/// Score-function estimate of the gradient of A's win probability in
/// `(x, y)` at the batch's own profile.
pub fn estimate_gradient(inst: &ElectionInstance, batch: &SampleBatch) -> GradientEstimate {
    gradient_with_weights(inst, batch, &batch.sampled_at, None)
}

/// Gradient at `new_profile` from a batch drawn elsewhere.
pub fn estimate_gradient_reused(inst: &ElectionInstance, batch: &SampleBatch, new_profile: &StrategyProfile) -> Result<GradientEstimate> {
    let w = reuse_weights(inst, batch, new_profile)?;
    Ok(gradient_with_weights(inst, batch, new_profile, Some(&w)))
}

/// Likelihood ratios of `new_profile` against the batch's profile, one
/// per sample.
pub fn reuse_weights(inst: &ElectionInstance, batch: &SampleBatch, new_profile: &StrategyProfile) -> Result<Vec<f64>> {
    new_profile.check(inst)?;
    let n = batch.n;
    let k = batch.k;
    let old = &batch.sampled_at;
    let mut log_k = 0.0;
    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n];
    for i in 0..n {
        let (al, be, ga) = (inst.alpha()[i], inst.beta()[i], inst.gamma()[i]);
        let na = k * (new_profile.x[i] + al);
        let nb = k * (new_profile.y[i] + be);
        if !(na > 0.0) || !(nb > 0.0) {
            return Err(Error::InvalidShift { region: i, shape: na.min(nb) });
        }
        let oa = k * (old.x[i] + al);
        let ob = k * (old.y[i] + be);
        log_k += ln_multi_beta(&[oa, ob, k * ga]) - ln_multi_beta(&[na, nb, k * ga]);
        dx[i] = na - oa;
        dy[i] = nb - ob;
    }
    Ok((0..batch.size)
        .map(|s| {
            let (la, lb) = (batch.ln_a(s), batch.ln_b(s));
            let mut lw = log_k;
            for i in 0..n {
                if dx[i] != 0.0 {
                    lw += dx[i] * la[i];
                }
                if dy[i] != 0.0 {
                    lw += dy[i] * lb[i];
                }
            }
            lw.exp()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReuseEstimate {
    pub estimate: f64,
    /// Per-sample variance `E[h^2 g] - p^2` of the weighted indicator.
    pub variance: f64,
    pub std_error: f64,
}

/// Win probability at `new_profile` from a batch drawn at another profile.
pub fn reuse_estimate(inst: &ElectionInstance, batch: &SampleBatch, new_profile: &StrategyProfile) -> Result<ReuseEstimate> {
    let w = reuse_weights(inst, batch, new_profile)?;
    let margins = batch.margins(inst.v());
    let (mut s1, mut s2) = (0.0, 0.0);
    for (h, m) in w.iter().zip(&margins) {
        if *m > 0.0 {
            s1 += h;
            s2 += h * h;
        }
    }
    let nf = batch.size as f64;
    let p = s1 / nf;
    let variance = (s2 / nf - p * p).max(0.0);
    Ok(ReuseEstimate { estimate: p, variance, std_error: (variance / nf).sqrt() })
}

/// Draw a fresh batch once reuse would be noisier than direct sampling.
/// Ties keep reusing.
pub fn should_resample(reuse_variance: f64, direct_variance: f64) -> bool {
    reuse_variance > direct_variance
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaMarginalReport {
    /// Kolmogorov-Smirnov distance of `X/(X+Y)` to `Beta(a, b)`.
    pub ks: f64,
    /// Sample covariance of `X/(X+Y)` and `Z`.
    pub covariance: f64,
    pub covariance_se: f64,
    pub median: f64,
}

/// Empirical check that for `(X, Y, Z) ~ Dir(a, b, c)` the ratio
/// `X/(X+Y)` is `Beta(a, b)` and uncorrelated with `Z`.
pub fn beta_marginal_check(a: f64, b: f64, c: f64, draws: usize, seed: u64) -> Result<BetaMarginalReport> {
    if !(a > 0.0 && b > 0.0 && c >= 0.0) {
        return Err(Error::Precondition("need a, b > 0 and c >= 0".into()));
    }
    if draws < 10_000 {
        return Err(Error::Precondition("at least 10^4 draws are required".into()));
    }
    let (ga, gb, gc) = (LogGamma::new(a), LogGamma::new(b), LogGamma::new(c));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratio = Vec::with_capacity(draws);
    let mut zs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let (la, lb, lc) = (ga.draw(&mut rng), gb.draw(&mut rng), gc.draw(&mut rng));
        let lt = log_sum_exp3(la, lb, lc);
        // X/(X+Y) = 1 / (1 + exp(lb - la))
        ratio.push(1.0 / (1.0 + (lb - la).exp()));
        zs.push((lc - lt).exp());
    }
    let nf = draws as f64;
    let mr = ratio.iter().sum::<f64>() / nf;
    let mz = zs.iter().sum::<f64>() / nf;
    let prods: Vec<f64> = ratio.iter().zip(&zs).map(|(r, z)| (r - mr) * (z - mz)).collect();
    let covariance = prods.iter().sum::<f64>() / (nf - 1.0);
    let var_prod = prods.iter().map(|p| (p - covariance).powi(2)).sum::<f64>() / (nf - 1.0);

    ratio.sort_by(f64::total_cmp);
    let mut ks: f64 = 0.0;
    for (j, r) in ratio.iter().enumerate() {
        let cdf = beta_reg(a, b, *r);
        ks = ks.max((cdf - j as f64 / nf).abs()).max(((j + 1) as f64 / nf - cdf).abs());
    }
    Ok(BetaMarginalReport { ks, covariance, covariance_se: (var_prod / nf).sqrt(), median: ratio[draws / 2] })
}

/// Monte-Carlo oracle for the stochastic majority game. Batches are reused
/// across iterations while the reuse guard allows it.
pub struct MonteCarloOracle<'a> {
    inst: &'a ElectionInstance,
    batch_size: usize,
    seed: u64,
    reuse: bool,
    batch: Option<SampleBatch>,
    base_variance: f64,
    pub batches_drawn: usize,
}

impl<'a> MonteCarloOracle<'a> {
    /// With `reuse` off every evaluation draws a fresh batch.
    pub fn new(inst: &'a ElectionInstance, batch_size: usize, seed: u64, reuse: bool) -> Result<Self> {
        inst.require_k()?;
        if batch_size == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok(Self { inst, batch_size, seed, reuse, batch: None, base_variance: 0.0, batches_drawn: 0 })
    }

    fn next_seed(&self) -> u64 {
        self.seed ^ (self.batches_drawn as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }

    fn fresh(&mut self, profile: &StrategyProfile) -> Result<GradientEstimate> {
        let batch = sample_batch(self.inst, profile, self.batch_size, self.next_seed())?;
        self.batches_drawn += 1;
        let est = estimate_gradient(self.inst, &batch);
        self.base_variance = est.win_prob * (1.0 - est.win_prob);
        self.batch = Some(batch);
        Ok(est)
    }
}

impl PayoffOracle for MonteCarloOracle<'_> {
    fn evaluate(&mut self, profile: &StrategyProfile) -> Result<OracleOutput> {
        let mut resampled = false;
        let est = match (&self.batch, self.reuse) {
            (Some(batch), true) => {
                let w = reuse_weights(self.inst, batch, profile)?;
                let margins = batch.margins(self.inst.v());
                let nf = batch.size as f64;
                let (s1, s2) = w
                    .iter()
                    .zip(&margins)
                    .filter(|(_, m)| **m > 0.0)
                    .fold((0.0, 0.0), |(a, b), (h, _)| (a + h, b + h * h));
                let var = s2 / nf - (s1 / nf).powi(2);
                if should_resample(var, self.base_variance) {
                    resampled = true;
                    self.fresh(profile)?
                } else {
                    gradient_with_weights(self.inst, batch, profile, Some(&w))
                }
            }
            _ => {
                resampled = true;
                self.fresh(profile)?
            }
        };
        Ok(OracleOutput { payoff: est.win_prob, grad_x: est.grad_x, grad_y: est.grad_y, resampled })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::SimplexPoint;
    use crate::presets;

    fn sym_instance() -> ElectionInstance {
        ElectionInstance::new(vec![0.5, 0.3, 0.2], vec![0.4, 0.6, 0.3], vec![0.4, 0.6, 0.3], vec![0.2, 0.0, 0.5])
            .unwrap()
            .with_noise(5.0)
            .unwrap()
    }

    #[test]
    fn batch_errors() {
        let inst = sym_instance();
        let p = StrategyProfile::proportional_to_votes(&inst);
        assert_eq!(sample_batch(&inst, &p, 0, 1).unwrap_err(), Error::EmptyBatch);
        let no_k = inst.clone().without_noise();
        assert_eq!(sample_batch(&no_k, &p, 10, 1).unwrap_err(), Error::MissingField("k"));
    }

    #[test]
    fn shares_are_on_the_simplex_and_abstention_free_regions_have_zero_c() {
        let inst = sym_instance();
        let p = StrategyProfile::proportional_to_votes(&inst);
        let batch = sample_batch(&inst, &p, 2000, 3).unwrap();
        for s in 0..batch.size() {
            let o = batch.sample(s);
            for (i, t) in o.shares.iter().enumerate() {
                assert!((t[0] + t[1] + t[2] - 1.0).abs() <= 1e-12);
                assert!(t.iter().all(|c| *c >= 0.0));
                if i == 1 {
                    assert!(t[2] <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn mean_and_variance_of_shares() {
        let inst = presets::table3_instance();
        let p = presets::table1_profile();
        let size = 100_000;
        let batch = sample_batch(&inst, &p, size, 17).unwrap();
        let k = 10.0;
        for i in [0usize, 3, 9] {
            let a = p.x[i] + inst.alpha()[i];
            let sigma = a + p.y[i] + inst.beta()[i] + inst.gamma()[i];
            let mean = a / sigma;
            // Dirichlet marginal: Beta(k a, k (sigma - a))
            let var = a * (sigma - a) / (sigma * sigma * (1.0 + k * sigma));
            let xs: Vec<f64> = (0..size).map(|s| batch.ln_a(s)[i].exp()).collect();
            let m = xs.iter().sum::<f64>() / size as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (size as f64 - 1.0);
            assert!((m - mean).abs() <= 3.0 * (var / size as f64).sqrt());
            // SE of a sample variance ~ var * sqrt(2/size) for near-normal data
            assert!((v - var).abs() <= 3.0 * var * (2.5 / size as f64).sqrt(), "{v} vs {var}");
        }
    }

    #[test]
    fn large_k_concentrates() {
        let inst = sym_instance().with_noise(1e6).unwrap();
        let p = StrategyProfile::proportional_to_votes(&inst);
        let batch = sample_batch(&inst, &p, 500, 5).unwrap();
        for s in 0..batch.size() {
            for i in 0..3 {
                let (sa, _, _) = crate::game_model::vote_shares(&inst, &p, i).unwrap();
                assert!((batch.sample(s).shares[i][0] - sa).abs() < 1e-2);
            }
        }
    }

    #[test]
    fn deterministic_for_seed_and_streaming_agrees() {
        let inst = presets::table3_instance();
        let p = presets::table1_profile();
        let b1 = sample_batch(&inst, &p, 10_000, 99).unwrap();
        let b2 = sample_batch(&inst, &p, 10_000, 99).unwrap();
        assert_eq!(b1.ln_a, b2.ln_a);
        let direct = estimate_win_prob(&inst, &b1);
        let streamed = win_prob_streaming(&inst, &p, 10_000, 99).unwrap();
        assert_eq!(direct, streamed);
        let other = sample_batch(&inst, &p, 10_000, 100).unwrap();
        assert_ne!(b1.ln_a, other.ln_a);
    }

    #[test]
    fn symmetric_profile_is_a_coin_flip() {
        let inst = sym_instance();
        let p = StrategyProfile::proportional_to_votes(&inst);
        let batch = sample_batch(&inst, &p, 100_000, 1).unwrap();
        let (est, se) = estimate_win_prob(&inst, &batch);
        assert!((est - 0.5).abs() <= 3.0 * se);
        let g = estimate_gradient(&inst, &batch);
        for i in 0..3 {
            assert!((g.grad_x[i] + g.grad_y[i]).abs() <= 4.0 * (g.se_x[i] + g.se_y[i]));
        }
    }

    #[test]
    fn dominant_single_region() {
        let inst = ElectionInstance::new(vec![1.0], vec![10.0], vec![0.1], vec![0.0]).unwrap().with_noise(10.0).unwrap();
        let p = StrategyProfile::from_vecs(vec![1.0], vec![1.0]).unwrap();
        let (est, _) = win_prob_streaming(&inst, &p, 20_000, 2).unwrap();
        assert!(est >= 0.99);
        // exact: P(Beta(110, 11) > 0.5)
        assert!(1.0 - beta_reg(110.0, 11.0, 0.5) > 0.99);
    }

    #[test]
    fn table3_win_probability() {
        let inst = presets::table3_instance();
        let (p, se) = win_prob_streaming(&inst, &presets::table1_profile(), 200_000, 7).unwrap();
        assert!((p - 0.574).abs() <= 0.01 + 3.0 * se, "p = {p}");
    }

    #[test]
    fn identity_shift_is_plain_estimate() {
        let inst = presets::table3_instance();
        let p = presets::table1_profile();
        let batch = sample_batch(&inst, &p, 20_000, 4).unwrap();
        let r = reuse_estimate(&inst, &batch, &p).unwrap();
        let (d, _) = estimate_win_prob(&inst, &batch);
        assert!((r.estimate - d).abs() <= 1e-12);
        assert!((r.variance - d * (1.0 - d)).abs() <= 1e-9);
        assert!(reuse_weights(&inst, &batch, &p).unwrap().iter().all(|h| (h - 1.0).abs() < 1e-9));
    }

    #[test]
    fn reused_estimate_matches_fresh_batches() {
        let inst = sym_instance();
        let base = StrategyProfile::from_vecs(vec![0.3, 0.4, 0.3], vec![0.5, 0.2, 0.3]).unwrap();
        let batch = sample_batch(&inst, &base, 100_000, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for t in 0..20 {
            let mut shift = |p: &SimplexPoint| {
                let raw: Vec<f64> = p.coords().iter().map(|c| (c + rng.random_range(-0.05..0.05)).max(0.0)).collect();
                SimplexPoint::project(raw)
            };
            let new = StrategyProfile::new(shift(&base.x), shift(&base.y)).unwrap();
            let r = reuse_estimate(&inst, &batch, &new).unwrap();
            let (f, fse) = win_prob_streaming(&inst, &new, 100_000, 1000 + t).unwrap();
            assert!((r.estimate - f).abs() <= 3.0 * (r.std_error.powi(2) + fse * fse).sqrt(), "{} vs {}", r.estimate, f);
        }
    }

    #[test]
    fn reuse_is_unbiased_over_batches() {
        let inst = sym_instance();
        let base = StrategyProfile::from_vecs(vec![0.3, 0.4, 0.3], vec![0.5, 0.2, 0.3]).unwrap();
        let new = StrategyProfile::from_vecs(vec![0.36, 0.34, 0.3], vec![0.45, 0.2, 0.35]).unwrap();
        let ests: Vec<f64> = (0..50)
            .map(|b| reuse_estimate(&inst, &sample_batch(&inst, &base, 10_000, 500 + b).unwrap(), &new).unwrap().estimate)
            .collect();
        let m = ests.iter().sum::<f64>() / 50.0;
        let sd = (ests.iter().map(|e| (e - m).powi(2)).sum::<f64>() / 49.0).sqrt();
        let (truth, tse) = win_prob_streaming(&inst, &new, 1_000_000, 77).unwrap();
        assert!((m - truth).abs() <= 3.0 * (sd * sd / 50.0 + tse * tse).sqrt());
    }

    #[test]
    fn bernoulli_variance_identity() {
        let inst = sym_instance();
        let p = StrategyProfile::from_vecs(vec![0.5, 0.3, 0.2], vec![0.2, 0.3, 0.5]).unwrap();
        let size = 5_000;
        let ests: Vec<f64> = (0..60).map(|b| estimate_win_prob(&inst, &sample_batch(&inst, &p, size, b).unwrap()).0).collect();
        let m = ests.iter().sum::<f64>() / 60.0;
        let var = ests.iter().map(|e| (e - m).powi(2)).sum::<f64>() / 59.0;
        let expected = m * (1.0 - m) / size as f64;
        // chi-square(59) lies within [0.6, 1.5] of its mean with > 99% probability
        assert!(var / expected > 0.55 && var / expected < 1.55, "{}", var / expected);
    }

    #[test]
    fn invalid_shift_is_rejected() {
        let inst = sym_instance();
        let p = StrategyProfile::proportional_to_votes(&inst);
        let batch = sample_batch(&inst, &p, 100, 1).unwrap();
        let other = ElectionInstance::new(vec![0.5, 0.3, 0.2], vec![0.4, 0.6, 0.3], vec![0.4, 0.6, 0.3], vec![0.2, 0.0, 0.5]).unwrap();
        assert!(reuse_weights(&other, &batch, &p).is_ok());
        assert!(matches!(
            reuse_weights(&inst, &batch, &StrategyProfile::from_vecs(vec![0.5, 0.5], vec![0.5, 0.5]).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn resample_guard() {
        assert!(should_resample(0.30, 0.23));
        assert!(!should_resample(0.2, 0.2));
        assert!(!should_resample(0.0, 0.1));
    }

    #[test]
    fn beta_marginal() {
        let r = beta_marginal_check(2.0, 3.0, 1.0, 100_000, 3).unwrap();
        assert!(r.ks <= 1.63 / (100_000f64).sqrt(), "ks {}", r.ks);
        assert!(r.covariance.abs() <= 3.0 * r.covariance_se);
        let r0 = beta_marginal_check(2.0, 3.0, 0.0, 10_000, 3).unwrap();
        assert_eq!(r0.covariance, 0.0);
        let rs = beta_marginal_check(0.7, 0.7, 2.0, 50_000, 4).unwrap();
        assert!((rs.median - 0.5).abs() < 0.02);
        assert!(beta_marginal_check(1.0, 1.0, 1.0, 100, 1).is_err());
    }

    #[test]
    fn gradient_matches_common_random_number_differences() {
        // perturbing the Gamma shapes changes draws discontinuously, so compare
        // against differences of reuse estimates on a common batch
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for t in 0..10 {
            let n = rng.random_range(2..=4);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let inst = ElectionInstance::new(v, a, b, g).unwrap().with_noise(5.0).unwrap();
            let x = SimplexPoint::project((0..n).map(|_| rng.random_range(0.2..1.0)).collect());
            let y = SimplexPoint::project((0..n).map(|_| rng.random_range(0.2..1.0)).collect());
            let p = StrategyProfile::new(x, y).unwrap();
            let batch = sample_batch(&inst, &p, 200_000, 900 + t).unwrap();
            let grad = estimate_gradient(&inst, &batch);
            let h = 1e-3;
            let raw_shift = |dx: usize, sign: f64, on_y: bool| {
                // off-simplex perturbation is fine for the likelihood ratio
                let mut xs = p.x.coords().to_vec();
                let mut ys = p.y.coords().to_vec();
                if on_y {
                    ys[dx] += sign * h;
                } else {
                    xs[dx] += sign * h;
                }
                (xs, ys)
            };
            for i in 0..n {
                for on_y in [false, true] {
                    let (xp, yp) = raw_shift(i, 1.0, on_y);
                    let (xm, ym) = raw_shift(i, -1.0, on_y);
                    let fp = reuse_on_raw(&inst, &batch, &xp, &yp);
                    let fm = reuse_on_raw(&inst, &batch, &xm, &ym);
                    let fd = (fp - fm) / (2.0 * h);
                    let (est, se) = if on_y { (grad.grad_y[i], grad.se_y[i]) } else { (grad.grad_x[i], grad.se_x[i]) };
                    assert!((est - fd).abs() <= 5.0 * se, "region {i} y={on_y}: {est} vs {fd} (se {se})");
                }
            }
        }
    }

    fn reuse_on_raw(inst: &ElectionInstance, batch: &SampleBatch, x: &[f64], y: &[f64]) -> f64 {
        let k = batch.k();
        let old = batch.sampled_at();
        let mut log_k = 0.0;
        for i in 0..inst.n() {
            let (al, be, ga) = (inst.alpha()[i], inst.beta()[i], inst.gamma()[i]);
            log_k += ln_multi_beta(&[k * (old.x[i] + al), k * (old.y[i] + be), k * ga])
                - ln_multi_beta(&[k * (x[i] + al), k * (y[i] + be), k * ga]);
        }
        let margins = batch.margins(inst.v());
        let mut s = 0.0;
        for (j, m) in margins.iter().enumerate() {
            if *m > 0.0 {
                let mut lw = log_k;
                for i in 0..inst.n() {
                    lw += k * (x[i] - old.x[i]) * batch.ln_a(j)[i] + k * (y[i] - old.y[i]) * batch.ln_b(j)[i];
                }
                s += lw.exp();
            }
        }
        s / batch.size() as f64
    }
}
