//! Experiment runners: each reproduces one table or figure as CSV files
//! plus a `manifest.json` with seeds, settings and wall-clock times.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::{payoff_qa, turnout_and_vft, ElectionInstance, SimplexPoint, StrategyProfile};
use crate::lattice::{double_oracle_solve, earth_movers_distance, DoubleOracleConfig, DoubleOracleResult};
use crate::ms_deterministic::{constrained_equilibrium, BarrierConfig};
use crate::presets;
use crate::simplex_dynamics::{gda_solve, GdaConfig};
use crate::stochastic::{win_prob_streaming, MonteCarloOracle};

/// Probability threshold for counting a strategy as part of a support.
pub const SUPPORT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Table1,
    Table2,
    Table3,
    Fig4,
    Table4,
    Table7,
    Table8,
    Table9,
    Table10,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 9] = [
        Self::Table1,
        Self::Table2,
        Self::Table3,
        Self::Fig4,
        Self::Table4,
        Self::Table7,
        Self::Table8,
        Self::Table9,
        Self::Table10,
    ];
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

impl FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.to_string() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown experiment `{s}`")))
    }
}

/// Settings of the Monte-Carlo majority solver.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MsSettings {
    pub gda: GdaConfig,
    pub batch_size: usize,
    /// Samples for the reported win probability.
    pub final_batch: usize,
    pub seed: u64,
}

impl Default for MsSettings {
    fn default() -> Self {
        Self { gda: GdaConfig::monte_carlo(), batch_size: 200_000, final_batch: 1_000_000, seed: 1 }
    }
}

impl MsSettings {
    /// Cheaper settings for sweeps: the win probability at an approximate
    /// saddle point is insensitive to small errors in the profile.
    pub fn sweep() -> Self {
        Self { gda: GdaConfig { max_iters: 300, tail_average: Some(100), ..GdaConfig::monte_carlo() }, batch_size: 50_000, ..Self::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub seed: u64,
    pub ms: MsSettings,
    pub oracle: DoubleOracleConfig,
    /// Noise levels (Fig. 4, Table 7).
    pub ks: Vec<f64>,
    /// Abstention scalings (Fig. 4).
    pub gs: Vec<f64>,
    /// Bias scalings (Tables 9 and 10).
    pub fs: Vec<f64>,
    /// Electoral-vote concentrations (Table 8).
    pub nus: Vec<f64>,
    /// Instance sizes (Table 8).
    pub ns: Vec<usize>,
    /// Random instances per `(nu, n)` (Table 8).
    pub instances: usize,
    /// Double-oracle restarts per `k` (Table 7).
    pub restarts: usize,
    /// Random lattice points in each initial strategy set on restarts.
    pub random_initial: usize,
    /// Unilateral deviations per player (Table 3 audit).
    pub deviations: usize,
}

impl ExperimentConfig {
    pub fn new(id: ExperimentId) -> Self {
        let mut ms = match id {
            ExperimentId::Fig4 | ExperimentId::Table9 => MsSettings::sweep(),
            _ => MsSettings::default(),
        };
        ms.seed = 1;
        Self {
            id,
            seed: 1,
            ms,
            oracle: DoubleOracleConfig::default(),
            ks: match id {
                ExperimentId::Table7 => vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
                _ => vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0],
            },
            gs: vec![0.0, 0.5, 1.0, 2.0],
            fs: presets::TABLE9_F.to_vec(),
            nus: vec![1.0, 0.9, 0.8],
            ns: vec![5, 10],
            instances: 10,
            restarts: 40,
            random_initial: 5,
            deviations: 200,
        }
    }

    /// Apply `seed` to every random component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.ms.seed = seed;
        self.oracle.seed = seed;
        self
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Write `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub region: usize,
    pub x: f64,
    pub y: f64,
    pub turnout: f64,
    pub vft_a: f64,
}

pub fn region_rows(inst: &ElectionInstance, profile: &StrategyProfile) -> Vec<RegionRow> {
    (0..inst.n())
        .map(|i| {
            let (turnout, vft_a) = turnout_and_vft(inst, profile.x.coords(), profile.y.coords(), i);
            RegionRow { region: i + 1, x: profile.x[i], y: profile.y[i], turnout, vft_a }
        })
        .collect()
}

pub fn write_region_csv<W: Write>(rows: &[RegionRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "region,x,y,turnout,vft_a,x_pct,y_pct,turnout_pct,vft_a_pct")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.region,
            r.x,
            r.y,
            r.turnout,
            r.vft_a,
            pct(r.x),
            pct(r.y),
            pct(r.turnout),
            pct(r.vft_a)
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MsStochasticSolution {
    pub profile: StrategyProfile,
    pub win_prob: f64,
    pub win_se: f64,
    pub iterations: usize,
    pub converged: bool,
}

const FINAL_STREAM: u64 = 0xF1A1_5EED;

/// Monte-Carlo GDA for the stochastic majority game, followed by an
/// independent win-probability estimate at the returned profile.
pub fn solve_ms_stochastic(inst: &ElectionInstance, s: &MsSettings, start: Option<StrategyProfile>) -> Result<MsStochasticSolution> {
    let mut oracle = MonteCarloOracle::new(inst, s.batch_size, s.seed, s.gda.resample_policy)?;
    let r = gda_solve(&mut oracle, inst, &s.gda, start)?;
    let (win_prob, win_se) = win_prob_streaming(inst, &r.profile, s.final_batch, s.seed ^ FINAL_STREAM)?;
    Ok(MsStochasticSolution { profile: r.profile, win_prob, win_se, iterations: r.trace.len(), converged: r.converged })
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    /// 'A' or 'B'.
    pub player: char,
    /// Euclidean distance from the equilibrium strategy.
    pub distance: f64,
    /// Deviating player's win probability over its equilibrium one.
    pub ratio: f64,
}

/// Random unilateral deviations `(1-t) x + t d`, `d` uniform on the simplex
/// and `t` uniform in (0, 1]. All estimates share one seed, so the ratios
/// use common random numbers.
pub fn deviation_audit(inst: &ElectionInstance, eq: &StrategyProfile, count: usize, batch: usize, seed: u64) -> Result<Vec<DeviationRow>> {
    let (p0, _) = win_prob_streaming(inst, eq, batch, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = inst.n();
    let mut rows = Vec::with_capacity(2 * count);
    for player in ['A', 'B'] {
        for _ in 0..count {
            let t: f64 = 1.0 - rng.random::<f64>();
            let d = random_simplex(&mut rng, n);
            let own = if player == 'A' { eq.x.coords() } else { eq.y.coords() };
            let dev: Vec<f64> = own.iter().zip(&d).map(|(o, di)| (1.0 - t) * o + t * di).collect();
            let distance = own.iter().zip(&dev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let point = SimplexPoint::project(dev);
            let profile = if player == 'A' {
                StrategyProfile::new(point, eq.y.clone())?
            } else {
                StrategyProfile::new(eq.x.clone(), point)?
            };
            let (p, _) = win_prob_streaming(inst, &profile, batch, seed)?;
            let ratio = if player == 'A' { p / p0 } else { (1.0 - p) / (1.0 - p0) };
            rows.push(DeviationRow { player, distance, ratio });
        }
    }
    Ok(rows)
}

/// Largest absolute residual of the non-decreasing least-squares fit
/// (pool-adjacent-violators) to `values`.
pub fn isotonic_residual(values: &[f64]) -> f64 {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
            let (m2, c2) = blocks.pop().expect("len > 1");
            let (m1, c1) = blocks.pop().expect("len > 1");
            blocks.push(((m1 * c1 as f64 + m2 * c2 as f64) / (c1 + c2) as f64, c1 + c2));
        }
    }
    let fit = blocks.iter().flat_map(|&(m, c)| std::iter::repeat_n(m, c));
    values.iter().zip(fit).fold(0.0, |r, (v, f)| r.max((v - f).abs()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig4Row {
    pub g: f64,
    pub k: f64,
    pub win_prob: f64,
    pub win_se: f64,
}

/// Equilibrium win probability of A over abstention scalings `gs` and
/// noise levels `ks`.
pub fn fig4_sweep(base: &ElectionInstance, gs: &[f64], ks: &[f64], s: &MsSettings) -> Result<Vec<Fig4Row>> {
    let mut rows = Vec::new();
    for &g in gs {
        for &k in ks {
            let inst = base.scale_abstention(g)?.with_noise(k)?;
            let sol = solve_ms_stochastic(&inst, s, None)?;
            rows.push(Fig4Row { g, k, win_prob: sol.win_prob, win_se: sol.win_se });
        }
    }
    Ok(rows)
}

/// A mixed strategy as (allocation, probability) pairs.
pub type Mixture = Vec<(Vec<f64>, f64)>;

fn support_mixture(r: &DoubleOracleResult, a: bool) -> Mixture {
    let sup = if a { r.support_a(SUPPORT_TOL) } else { r.support_b(SUPPORT_TOL) };
    sup.into_iter().map(|(p, s)| (p.coords(), s)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KSweepRun {
    pub k: f64,
    pub restart: usize,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub mixture_a: Mixture,
    pub mixture_b: Mixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSweepSummary {
    pub k: f64,
    /// Mean earth mover's distance over all pairs of restarts.
    pub emd_a: f64,
    pub emd_b: f64,
    pub win_prob: f64,
    pub support_a: f64,
    pub support_b: f64,
}

/// Double oracle at each `k`, restarted from random initial strategy sets.
/// Restart 0 starts from the vertices alone.
pub fn k_sweep_ec(base: &ElectionInstance, ks: &[f64], restarts: usize, random_initial: usize, cfg: &DoubleOracleConfig) -> Result<Vec<KSweepRun>> {
    let mut runs = Vec::new();
    for &k in ks {
        let inst = base.clone().with_noise(k)?;
        for restart in 0..restarts {
            let c = DoubleOracleConfig {
                random_initial: if restart == 0 { 0 } else { random_initial },
                seed: cfg.seed.wrapping_add(restart as u64),
                ..cfg.clone()
            };
            let r = double_oracle_solve(&inst, &c)?;
            runs.push(KSweepRun {
                k,
                restart,
                value: r.value(),
                iterations: r.iterations,
                converged: r.converged,
                mixture_a: support_mixture(&r, true),
                mixture_b: support_mixture(&r, false),
            });
        }
    }
    Ok(runs)
}

fn mean_pairwise_emd(ms: &[&Mixture]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..ms.len() {
        for j in i + 1..ms.len() {
            total += earth_movers_distance(ms[i], ms[j]);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

pub fn summarize_k_sweep(runs: &[KSweepRun]) -> Vec<KSweepSummary> {
    let mut ks: Vec<f64> = Vec::new();
    for r in runs {
        if !ks.contains(&r.k) {
            ks.push(r.k);
        }
    }
    ks.into_iter()
        .map(|k| {
            let rs: Vec<&KSweepRun> = runs.iter().filter(|r| r.k == k).collect();
            let m = rs.len() as f64;
            KSweepSummary {
                k,
                emd_a: mean_pairwise_emd(&rs.iter().map(|r| &r.mixture_a).collect::<Vec<_>>()),
                emd_b: mean_pairwise_emd(&rs.iter().map(|r| &r.mixture_b).collect::<Vec<_>>()),
                win_prob: rs.iter().map(|r| r.value).sum::<f64>() / m,
                support_a: rs.iter().map(|r| r.mixture_a.len() as f64).sum::<f64>() / m,
                support_b: rs.iter().map(|r| r.mixture_b.len() as f64).sum::<f64>() / m,
            }
        })
        .collect()
}

/// Random electoral-college instance: 3 electoral votes per state plus a
/// multinomial share of the remaining `538 - 3n` with cell probabilities
/// proportional to `nu^i`; biases uniform on [0.2, 0.9], no abstention,
/// voters proportional to electoral votes.
pub fn random_ec_instance(rng: &mut ChaCha8Rng, n: usize, nu: f64, k: f64) -> Result<ElectionInstance> {
    if n == 0 || 3 * n > 538 || !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Precondition("need 1 <= n <= 179 and nu in (0, 1]".into()));
    }
    let weights: Vec<f64> = (1..=n).map(|i| nu.powi(i as i32)).collect();
    let mut left = (538 - 3 * n) as u64;
    let mut rest: f64 = weights.iter().sum();
    let mut w = Vec::with_capacity(n);
    for (i, wi) in weights.iter().enumerate() {
        let draw = if i + 1 == n {
            left
        } else {
            let p = (wi / rest).clamp(0.0, 1.0);
            Binomial::new(left, p).map_err(|e| Error::Precondition(e.to_string()))?.sample(rng)
        };
        left -= draw;
        rest -= wi;
        w.push(3 + draw as u32);
    }
    let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.9)).collect();
    let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.9)).collect();
    ElectionInstance::new(w.iter().map(|&x| x as f64).collect(), alpha, beta, vec![0.0; n])?
        .with_electoral_votes(w)?
        .with_noise(k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table8Row {
    pub nu: f64,
    pub n: usize,
    pub instance: usize,
    pub seconds: f64,
    pub iterations: usize,
    pub converged: bool,
    pub set_a: usize,
    pub set_b: usize,
    pub support_a: usize,
    pub support_b: usize,
}

/// Double oracle on random instances for each `(nu, n)`.
pub fn table8_runs(nus: &[f64], ns: &[usize], instances: usize, cfg: &DoubleOracleConfig) -> Result<Vec<Table8Row>> {
    let mut rows = Vec::new();
    for &nu in nus {
        for &n in ns {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((n as u64) << 32) ^ nu.to_bits());
            for instance in 0..instances {
                let inst = random_ec_instance(&mut rng, n, nu, 10.0)?;
                let start = Instant::now();
                let r = double_oracle_solve(&inst, cfg)?;
                rows.push(Table8Row {
                    nu,
                    n,
                    instance,
                    seconds: start.elapsed().as_secs_f64(),
                    iterations: r.iterations,
                    converged: r.converged,
                    set_a: r.strategies_a.len(),
                    set_b: r.strategies_b.len(),
                    support_a: r.support_a(SUPPORT_TOL).len(),
                    support_b: r.support_b(SUPPORT_TOL).len(),
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElectoralSystem {
    Majority,
    ElectoralCollege,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolarizationRow {
    pub f: f64,
    pub win_prob: f64,
    pub strategies_a: Mixture,
    pub strategies_b: Mixture,
}

/// Solve the instance with biases `(f alpha, f beta)` for each factor.
/// Under the majority system abstention is scaled along with the biases
/// when `scale_abstention` is set; the electoral-college win probability
/// does not depend on abstention.
pub fn polarization_sweep(
    inst: &ElectionInstance,
    fs: &[f64],
    system: ElectoralSystem,
    ms: &MsSettings,
    oracle: &DoubleOracleConfig,
    scale_abstention: bool,
) -> Result<Vec<PolarizationRow>> {
    if let Some(f) = fs.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(Error::Precondition(format!("factor {f} must be > 0")));
    }
    fs.iter()
        .map(|&f| {
            let scaled = inst.scale_bias(f, scale_abstention)?;
            Ok(match system {
                ElectoralSystem::Majority => {
                    let sol = solve_ms_stochastic(&scaled, ms, None)?;
                    PolarizationRow {
                        f,
                        win_prob: sol.win_prob,
                        strategies_a: vec![(sol.profile.x.coords().to_vec(), 1.0)],
                        strategies_b: vec![(sol.profile.y.coords().to_vec(), 1.0)],
                    }
                }
                ElectoralSystem::ElectoralCollege => {
                    let r = double_oracle_solve(&scaled, oracle)?;
                    PolarizationRow { f, win_prob: r.value(), strategies_a: support_mixture(&r, true), strategies_b: support_mixture(&r, false) }
                }
            })
        })
        .collect()
}

/// Mean effort of a mixture.
pub fn mean_effort(m: &Mixture) -> Vec<f64> {
    let n = m.first().map_or(0, |(c, _)| c.len());
    let mut out = vec![0.0; n];
    for (c, p) in m {
        out.iter_mut().zip(c).for_each(|(o, v)| *o += p * v);
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentId,
    pub version: String,
    pub config: ExperimentConfig,
    pub artifacts: Vec<ArtifactRecord>,
    pub notes: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    artifacts: Vec<ArtifactRecord>,
    clock: Instant,
}

impl Writer<'_> {
    fn emit(&mut self, name: &str, body: Vec<u8>) -> Result<()> {
        write_atomic(&self.dir.join(name), &body).map_err(|e| Error::Precondition(format!("writing {name}: {e}")))?;
        self.artifacts.push(ArtifactRecord { file: name.to_string(), seconds: self.clock.elapsed().as_secs_f64() });
        self.clock = Instant::now();
        Ok(())
    }
}

fn mixture_csv(rows: &[(String, &Mixture)]) -> Vec<u8> {
    let n = rows.iter().find_map(|(_, m)| m.first().map(|c| c.0.len())).unwrap_or(0);
    let mut out = Vec::new();
    let cols: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let pcts: Vec<String> = (1..=n).map(|i| format!("x{i}_pct")).collect();
    writeln!(out, "key,player,probability,{},{},probability_pct", cols.join(","), pcts.join(",")).expect("vec write");
    for (key, m) in rows {
        let player = if key.ends_with('A') { "A" } else { "B" };
        let key = key.trim_end_matches(['A', 'B']).trim_end_matches(':');
        for (c, p) in m.iter() {
            let pc: Vec<String> = c.iter().map(|v| pct(*v)).collect();
            writeln!(out, "{key},{player},{p},{},{},{}", join(c), pc.join(","), pct(*p)).expect("vec write");
        }
    }
    out
}

/// Run one experiment and write its CSV files and manifest into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Precondition(format!("creating {}: {e}", dir.display())))?;
    let mut w = Writer { dir, artifacts: Vec::new(), clock: Instant::now() };
    let mut notes = Vec::new();
    match cfg.id {
        ExperimentId::Table1 | ExperimentId::Table2 => {
            let inst = if cfg.id == ExperimentId::Table1 { presets::table1_instance() } else { presets::table2_instance() };
            let eq = constrained_equilibrium(&inst, &BarrierConfig::default())?;
            let mut body = Vec::new();
            write_region_csv(&region_rows(&inst, &eq), &mut body).expect("vec write");
            w.emit(&format!("{}.csv", cfg.id), body)?;
            notes.push(format!("Q^A = {}", payoff_qa(&inst, &eq)));
        }
        ExperimentId::Table3 => {
            let inst = presets::table3_instance();
            let sol = solve_ms_stochastic(&inst, &cfg.ms, None)?;
            let mut body = Vec::new();
            write_region_csv(&region_rows(&inst, &sol.profile), &mut body).expect("vec write");
            w.emit("table3.csv", body)?;
            let mut s = Vec::new();
            writeln!(s, "win_prob,win_se,iterations,converged,win_prob_pct").expect("vec write");
            writeln!(s, "{},{},{},{},{}", sol.win_prob, sol.win_se, sol.iterations, sol.converged, pct(sol.win_prob)).expect("vec write");
            w.emit("table3_summary.csv", s)?;
            let dev = deviation_audit(&inst, &sol.profile, cfg.deviations, cfg.ms.batch_size, cfg.seed)?;
            let mut d = Vec::new();
            writeln!(d, "player,distance,ratio").expect("vec write");
            for r in &dev {
                writeln!(d, "{},{},{}", r.player, r.distance, r.ratio).expect("vec write");
            }
            w.emit("deviations.csv", d)?;
        }
        ExperimentId::Fig4 => {
            let rows = fig4_sweep(&presets::table1_instance(), &cfg.gs, &cfg.ks, &cfg.ms)?;
            let mut body = Vec::new();
            writeln!(body, "g,k,win_prob,win_se,win_prob_pct").expect("vec write");
            for r in &rows {
                writeln!(body, "{},{},{},{},{}", r.g, r.k, r.win_prob, r.win_se, pct(r.win_prob)).expect("vec write");
            }
            w.emit("fig4.csv", body)?;
            for &g in &cfg.gs {
                let ps: Vec<f64> = rows.iter().filter(|r| r.g == g).map(|r| r.win_prob).collect();
                notes.push(format!("g = {g}: isotonic residual {}", isotonic_residual(&ps)));
            }
        }
        ExperimentId::Table4 => {
            let r = double_oracle_solve(&presets::table4_instance(), &cfg.oracle)?;
            let mut s = Vec::new();
            r.write_csv(&mut s, SUPPORT_TOL).expect("vec write");
            w.emit("table4.csv", s)?;
            let mut j = Vec::new();
            r.write_joint_csv(&mut j, SUPPORT_TOL).expect("vec write");
            w.emit("table4_joint.csv", j)?;
            let mut l = Vec::new();
            writeln!(l, "iteration,size_a,size_b,value,br_value_a,br_value_b,added_a,added_b").expect("vec write");
            for e in &r.log {
                writeln!(l, "{},{},{},{},{},{},{},{}", e.iteration, e.size_a, e.size_b, e.value, e.br_value_a, e.br_value_b, e.added_a, e.added_b).expect("vec write");
            }
            w.emit("table4_log.csv", l)?;
            notes.push(format!("value {} after {} iterations, converged {}", r.value(), r.iterations, r.converged));
        }
        ExperimentId::Table7 => {
            let runs = k_sweep_ec(&presets::table4_instance(), &cfg.ks, cfg.restarts, cfg.random_initial, &cfg.oracle)?;
            let mut body = Vec::new();
            writeln!(body, "k,restart,value,iterations,converged,support_a,support_b").expect("vec write");
            for r in &runs {
                writeln!(body, "{},{},{},{},{},{},{}", r.k, r.restart, r.value, r.iterations, r.converged, r.mixture_a.len(), r.mixture_b.len()).expect("vec write");
            }
            w.emit("table7_runs.csv", body)?;
            let mut s = Vec::new();
            writeln!(s, "k,emd_a,emd_b,win_prob,support_a,support_b,win_prob_pct").expect("vec write");
            for r in summarize_k_sweep(&runs) {
                writeln!(s, "{},{},{},{},{},{},{}", r.k, r.emd_a, r.emd_b, r.win_prob, r.support_a, r.support_b, pct(r.win_prob)).expect("vec write");
            }
            w.emit("table7.csv", s)?;
            notes.push("EMD uses Euclidean ground distance between allocations".into());
        }
        ExperimentId::Table8 => {
            let rows = table8_runs(&cfg.nus, &cfg.ns, cfg.instances, &cfg.oracle)?;
            let mut body = Vec::new();
            writeln!(body, "nu,n,instance,seconds,iterations,converged,set_a,set_b,support_a,support_b").expect("vec write");
            for r in &rows {
                writeln!(
                    body,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.nu, r.n, r.instance, r.seconds, r.iterations, r.converged, r.set_a, r.set_b, r.support_a, r.support_b
                )
                .expect("vec write");
            }
            w.emit("table8_runs.csv", body)?;
            notes.push("seconds are hardware dependent and excluded from reproducibility checks".into());
        }
        ExperimentId::Table9 | ExperimentId::Table10 => {
            let (inst, system, name) = if cfg.id == ExperimentId::Table9 {
                (presets::table3_instance(), ElectoralSystem::Majority, "table9")
            } else {
                (presets::table4_instance(), ElectoralSystem::ElectoralCollege, "table10")
            };
            let rows = polarization_sweep(&inst, &cfg.fs, system, &cfg.ms, &cfg.oracle, true)?;
            let mut s = Vec::new();
            writeln!(s, "f,win_prob,win_prob_pct").expect("vec write");
            for r in &rows {
                writeln!(s, "{},{},{}", r.f, r.win_prob, pct(r.win_prob)).expect("vec write");
            }
            w.emit(&format!("{name}_win.csv"), s)?;
            let keyed: Vec<(String, &Mixture)> = rows
                .iter()
                .flat_map(|r| [(format!("{}:A", r.f), &r.strategies_a), (format!("{}:B", r.f), &r.strategies_b)])
                .collect();
            w.emit(&format!("{name}.csv"), mixture_csv(&keyed))?;
            if system == ElectoralSystem::Majority {
                notes.push("abstention scaled together with the biases".into());
            }
        }
    }
    let manifest = Manifest {
        experiment: cfg.id,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        artifacts: w.artifacts.clone(),
        notes,
    };
    let text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), &text).map_err(|e| Error::Precondition(format!("writing manifest: {e}")))?;
    let mut files: Vec<PathBuf> = w.artifacts.iter().map(|a| dir.join(&a.file)).collect();
    files.push(dir.join("manifest.json"));
    Ok(files)
}
