//! Simplex lattices `D^q`, the decomposition of a fractional point into
//! nearby lattice points, and a double-oracle method for mixed equilibria
//! of the electoral-college game over lattice strategies.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ec_probability::{side_gradient, state_probs_raw, win_prob_raw, Side, StateModel};
use crate::error::{Error, Result};
use crate::game_model::{ElectionInstance, SimplexPoint};
use crate::matrix_game::{solve_matrix_game, MixedEquilibrium, PayoffMatrix};
use crate::simplex_dynamics::{simplex_ascent, GdaConfig};

/// A point of `D^q(Delta_n)`, stored as integer numerators over `q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    numerators: Vec<u32>,
    q: u32,
}

impl LatticePoint {
    pub fn new(numerators: Vec<u32>, q: u32) -> Result<Self> {
        if q == 0 || numerators.is_empty() {
            return Err(Error::Precondition("q must be >= 1 and n >= 1".into()));
        }
        let s: u64 = numerators.iter().map(|&c| c as u64).sum();
        if s != q as u64 {
            return Err(Error::InvalidSimplex(format!("numerators sum to {s}, expected {q}")));
        }
        Ok(Self { numerators, q })
    }

    pub fn vertex(n: usize, i: usize, q: u32) -> Self {
        let mut numerators = vec![0; n];
        numerators[i] = q;
        Self { numerators, q }
    }

    pub fn numerators(&self) -> &[u32] {
        &self.numerators
    }
    pub fn q(&self) -> u32 {
        self.q
    }
    pub fn coords(&self) -> Vec<f64> {
        self.numerators.iter().map(|&c| c as f64 / self.q as f64).collect()
    }
    pub fn to_simplex(&self) -> SimplexPoint {
        SimplexPoint::new(self.coords()).expect("lattice points lie on the simplex")
    }
}

/// Split `q x` into `floor(q x)` and the residual `q x - floor(q x)`,
/// whose sum `m` is an integer in `0..n`.
pub fn fractional_residual(x: &SimplexPoint, q: u32) -> Result<(Vec<u32>, Vec<f64>, usize)> {
    if q == 0 {
        return Err(Error::Precondition("q must be >= 1".into()));
    }
    let mut base = Vec::with_capacity(x.dim());
    let mut residual = Vec::with_capacity(x.dim());
    for &c in x.coords() {
        let scaled = c * q as f64;
        let near = scaled.round();
        // values within rounding of a grid line are on it
        let fl = if (scaled - near).abs() <= 1e-9 { near } else { scaled.floor() };
        base.push(fl as u32);
        residual.push((scaled - fl).max(0.0));
    }
    let m = q as i64 - base.iter().map(|&b| b as i64).sum::<i64>();
    let total: f64 = residual.iter().sum();
    if (total - m as f64).abs() > 1e-6 || m < 0 || m as usize >= x.dim().max(1) && m != 0 {
        return Err(Error::Precondition(format!("residual sum {total} is not an integer below n")));
    }
    Ok((base, residual, m as usize))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullDecomposition {
    /// Binary vectors with exactly `m` ones each.
    pub vertices: Vec<Vec<u8>>,
    /// Positive convex weights, one per vertex.
    pub weights: Vec<f64>,
    /// Step lengths `t` of each iteration.
    pub steps: Vec<f64>,
}

impl HullDecomposition {
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.vertices[0].len();
        let mut out = vec![0.0; n];
        for (z, l) in self.vertices.iter().zip(&self.weights) {
            for (o, &zi) in out.iter_mut().zip(z) {
                *o += l * zi as f64;
            }
        }
        out
    }
}

const SNAP: f64 = 1e-12;

fn snap(r: &mut [f64], carry: f64) {
    for c in r {
        if *c <= SNAP {
            *c = 0.0;
        } else if (carry - *c).abs() <= SNAP {
            *c = carry;
        }
    }
}

/// Write `y in [0,1)^n` with integral sum `m` as a convex combination of at
/// most `n` binary vectors with `m` ones. Each round moves away from the
/// nearest such vector until a coordinate reaches 0 or 1; ties among equal
/// coordinates go to the lowest index.
pub fn hull_decompose(y: &[f64]) -> Result<HullDecomposition> {
    let n = y.len();
    if n == 0 || y.iter().any(|c| !(c.is_finite() && *c >= -SNAP && *c < 1.0 + SNAP)) {
        return Err(Error::Precondition("residual must lie in [0, 1)^n".into()));
    }
    let total: f64 = y.iter().sum();
    let m = total.round();
    if (total - m).abs() > 1e-9 || m as usize >= n.max(1) && m != 0.0 {
        return Err(Error::Precondition(format!("residual sum {total} must be an integer in 0..n")));
    }
    let m = m as usize;
    // Track r = carry * w, the part of y not yet assigned to a vertex, so
    // rounding errors are not amplified by the 1 + t rescaling.
    let mut r: Vec<f64> = y.iter().map(|c| c.clamp(0.0, 1.0)).collect();
    let mut carry = 1.0;
    let fixed = |c: f64, carry: f64| c == 0.0 || c == carry;
    snap(&mut r, carry);
    let mut vertices = Vec::new();
    let mut weights = Vec::new();
    let mut steps = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    while r.iter().any(|&c| !fixed(c, carry)) {
        if vertices.len() >= n {
            return Err(Error::Precondition("decomposition did not terminate".into()));
        }
        order.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
        let mut z = vec![0u8; n];
        for &i in &order[..m] {
            z[i] = 1;
        }
        let mut t = f64::INFINITY;
        let mut hit = 0;
        for i in 0..n {
            let wi = r[i] / carry;
            let cand = match (z[i], fixed(r[i], carry)) {
                (_, true) => continue,
                (1, _) => wi / (1.0 - wi),
                _ => (1.0 - wi) / wi,
            };
            if cand < t {
                t = cand;
                hit = i;
            }
        }
        let lambda = carry * t / (1.0 + t);
        carry /= 1.0 + t;
        for i in 0..n {
            r[i] -= lambda * z[i] as f64;
        }
        r[hit] = if z[hit] == 1 { 0.0 } else { carry };
        snap(&mut r, carry);
        vertices.push(z);
        weights.push(lambda);
        steps.push(t);
    }
    vertices.push(r.iter().map(|&c| u8::from(c != 0.0)).collect());
    weights.push(carry);
    Ok(HullDecomposition { vertices, weights, steps })
}

/// The lattice points `floor(q x)/q + z/q` for the binary vectors `z` of
/// the decomposition of `q x - floor(q x)`, with their convex weights.
pub fn lattice_neighborhood_weighted(x: &SimplexPoint, q: u32) -> Result<Vec<(LatticePoint, f64)>> {
    let (base, residual, _) = fractional_residual(x, q)?;
    let hull = hull_decompose(&residual)?;
    hull.vertices
        .iter()
        .zip(&hull.weights)
        .map(|(z, &l)| {
            let nums = base.iter().zip(z).map(|(b, &zi)| b + zi as u32).collect();
            Ok((LatticePoint::new(nums, q)?, l))
        })
        .collect()
}

/// At most `n` lattice points whose convex hull contains `x`.
pub fn lattice_neighborhood(x: &SimplexPoint, q: u32) -> Result<Vec<LatticePoint>> {
    Ok(lattice_neighborhood_weighted(x, q)?.into_iter().map(|(p, _)| p).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoubleOracleConfig {
    pub q: u32,
    pub max_iters: usize,
    pub model: StateModel,
    /// Settings of the best-response ascent.
    pub br: GdaConfig,
    /// Random lattice points added to each initial strategy set.
    pub random_initial: usize,
    /// Random starting points per best response, on top of the fixed ones.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for DoubleOracleConfig {
    fn default() -> Self {
        Self {
            q: 100,
            max_iters: 200,
            model: StateModel::Beta,
            br: GdaConfig { rho: 3.0, epsilon: 1e-6, max_iters: 3000, ..GdaConfig::exact() },
            random_initial: 0,
            random_starts: 0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub size_a: usize,
    pub size_b: usize,
    /// Value of the restricted game.
    pub value: f64,
    /// A's payoff from its best response to B's mixture.
    pub br_value_a: f64,
    /// A's payoff when B best-responds to A's mixture.
    pub br_value_b: f64,
    pub added_a: usize,
    pub added_b: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoubleOracleResult {
    pub strategies_a: Vec<LatticePoint>,
    pub strategies_b: Vec<LatticePoint>,
    pub equilibrium: MixedEquilibrium,
    pub payoff: PayoffMatrix,
    pub converged: bool,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

impl DoubleOracleResult {
    pub fn value(&self) -> f64 {
        self.equilibrium.value
    }

    fn support<'a>(set: &'a [LatticePoint], sigma: &[f64], tol: f64) -> Vec<(&'a LatticePoint, f64)> {
        set.iter().zip(sigma).filter(|(_, &p)| p > tol).map(|(s, &p)| (s, p)).collect()
    }

    /// A's strategies played with probability above `tol`.
    pub fn support_a(&self, tol: f64) -> Vec<(&LatticePoint, f64)> {
        Self::support(&self.strategies_a, &self.equilibrium.sigma_a, tol)
    }
    pub fn support_b(&self, tol: f64) -> Vec<(&LatticePoint, f64)> {
        Self::support(&self.strategies_b, &self.equilibrium.sigma_b, tol)
    }

    fn mean_effort(set: &[LatticePoint], sigma: &[f64]) -> Vec<f64> {
        let n = set[0].numerators.len();
        let mut out = vec![0.0; n];
        for (s, p) in set.iter().zip(sigma) {
            for (o, c) in out.iter_mut().zip(s.coords()) {
                *o += p * c;
            }
        }
        out
    }

    /// Expected effort of A under its mixture.
    pub fn expected_effort_a(&self) -> Vec<f64> {
        Self::mean_effort(&self.strategies_a, &self.equilibrium.sigma_a)
    }
    pub fn expected_effort_b(&self) -> Vec<f64> {
        Self::mean_effort(&self.strategies_b, &self.equilibrium.sigma_b)
    }

    /// One row per support strategy: player, probability, allocation.
    pub fn write_csv<W: Write>(&self, mut out: W, tol: f64) -> std::io::Result<()> {
        let n = self.strategies_a[0].numerators.len();
        let cols: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        writeln!(out, "player,probability,{}", cols.join(","))?;
        for (player, sup) in [("A", self.support_a(tol)), ("B", self.support_b(tol))] {
            for (s, p) in sup {
                let c: Vec<String> = s.coords().iter().map(|v| v.to_string()).collect();
                writeln!(out, "{player},{p},{}", c.join(","))?;
            }
        }
        Ok(())
    }

    /// Joint probabilities and payoffs of the support pairs.
    pub fn write_joint_csv<W: Write>(&self, mut out: W, tol: f64) -> std::io::Result<()> {
        writeln!(out, "a_index,b_index,joint_probability,payoff")?;
        for (i, &pa) in self.equilibrium.sigma_a.iter().enumerate().filter(|(_, p)| **p > tol) {
            for (j, &pb) in self.equilibrium.sigma_b.iter().enumerate().filter(|(_, p)| **p > tol) {
                writeln!(out, "{i},{j},{},{}", pa * pb, self.payoff.get(i, j))?;
            }
        }
        Ok(())
    }
}

struct Game<'a> {
    inst: &'a ElectionInstance,
    w: &'a [u32],
    k: Option<f64>,
}

impl Game<'_> {
    fn payoff(&self, x: &[f64], y: &[f64]) -> f64 {
        win_prob_raw(self.w, &state_probs_raw(self.inst, x, y, self.k))
    }

    /// Best response of `side` against a mixture `opp` of the other side's
    /// efforts. Returns the point and A's payoff there.
    fn best_response(&self, side: Side, opp: &[(Vec<f64>, f64)], starts: Vec<SimplexPoint>, cfg: &GdaConfig) -> Result<(SimplexPoint, f64)> {
        let sign = if side == Side::A { 1.0 } else { -1.0 };
        let objective = |p: &SimplexPoint| -> Result<(f64, Vec<f64>)> {
            let n = p.dim();
            let mut val = 0.0;
            let mut grad = vec![0.0; n];
            for (o, s) in opp {
                let (x, y) = if side == Side::A { (p.coords(), o.as_slice()) } else { (o.as_slice(), p.coords()) };
                val += s * self.payoff(x, y);
                for (g, d) in grad.iter_mut().zip(side_gradient(self.inst, self.w, x, y, self.k, side)) {
                    *g += s * d;
                }
            }
            Ok((sign * val, grad.into_iter().map(|g| sign * g).collect()))
        };
        let results: Vec<Result<(SimplexPoint, f64)>> = starts
            .into_par_iter()
            .map(|s| {
                let (pt, _, _) = simplex_ascent(objective, s, cfg)?;
                let v = objective(&pt)?.0;
                Ok((pt, v))
            })
            .collect();
        let mut best: Option<(SimplexPoint, f64)> = None;
        for r in results {
            let (pt, v) = r?;
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((pt, v));
            }
        }
        let (pt, v) = best.expect("at least one start");
        Ok((pt, sign * v))
    }
}

fn interior(c: Vec<f64>) -> SimplexPoint {
    let n = c.len() as f64;
    SimplexPoint::project(c.into_iter().map(|v| 0.9 * v + 0.1 / n).collect())
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> SimplexPoint {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    SimplexPoint::project(e)
}

fn random_lattice(rng: &mut ChaCha8Rng, n: usize, q: u32) -> LatticePoint {
    let mut nums = vec![0u32; n];
    for _ in 0..q {
        nums[rng.random_range(0..n)] += 1;
    }
    LatticePoint { numerators: nums, q }
}

fn mixture(set: &[LatticePoint], sigma: &[f64]) -> Vec<(Vec<f64>, f64)> {
    set.iter().zip(sigma).filter(|(_, &p)| p > 1e-12).map(|(s, &p)| (s.coords(), p)).collect()
}

/// Mixed equilibrium of the electoral-college game over growing sets of
/// lattice strategies. Each round solves the restricted matrix game, lets
/// both candidates best-respond over the whole simplex, and adds the
/// lattice neighbourhoods of the best responses; it stops once both
/// neighbourhoods are already in the sets.
pub fn double_oracle_solve(inst: &ElectionInstance, config: &DoubleOracleConfig) -> Result<DoubleOracleResult> {
    let w = inst.require_w()?;
    let k = match config.model {
        StateModel::Beta => Some(inst.require_k()?),
        StateModel::LimitK0 => None,
    };
    if config.q == 0 || config.max_iters == 0 {
        return Err(Error::Precondition("q and max_iters must be >= 1".into()));
    }
    config.br.validate()?;
    let game = Game { inst, w, k };
    let n = inst.n();
    let q = config.q;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut set_a: Vec<LatticePoint> = (0..n).map(|i| LatticePoint::vertex(n, i, q)).collect();
    let mut set_b = set_a.clone();
    for set in [&mut set_a, &mut set_b] {
        for _ in 0..config.random_initial {
            let p = random_lattice(&mut rng, n, q);
            if !set.contains(&p) {
                set.push(p);
            }
        }
    }
    let mut index_a: HashMap<LatticePoint, usize> = set_a.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    let mut index_b: HashMap<LatticePoint, usize> = set_b.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    let mut rows: Vec<Vec<f64>> = set_a
        .par_iter()
        .map(|a| {
            let x = a.coords();
            set_b.iter().map(|b| game.payoff(&x, &b.coords())).collect()
        })
        .collect();

    let uniform = SimplexPoint::uniform(n);
    let by_votes = interior(SimplexPoint::proportional(inst.v())?.into_coords());
    let mut log = Vec::new();
    let mut iteration = 0;
    loop {
        iteration += 1;
        let payoff = PayoffMatrix::new(rows.clone())?;
        let eq = solve_matrix_game(&payoff)?;

        let mix_a = mixture(&set_a, &eq.sigma_a);
        let mix_b = mixture(&set_b, &eq.sigma_b);
        let starts = |own: &[(Vec<f64>, f64)], rng: &mut ChaCha8Rng| {
            let mut centroid = vec![0.0; n];
            for (c, p) in own {
                centroid.iter_mut().zip(c).for_each(|(m, v)| *m += p * v);
            }
            let mut s = vec![uniform.clone(), by_votes.clone(), interior(centroid)];
            s.extend((0..config.random_starts).map(|_| random_simplex(rng, n)));
            s
        };
        let starts_a = starts(&mix_a, &mut rng);
        let starts_b = starts(&mix_b, &mut rng);
        let (br_a, val_a) = game.best_response(Side::A, &mix_b, starts_a, &config.br)?;
        let (br_b, val_b) = game.best_response(Side::B, &mix_a, starts_b, &config.br)?;

        let new_a: Vec<LatticePoint> = lattice_neighborhood(&br_a, q)?.into_iter().filter(|p| !index_a.contains_key(p)).collect();
        let new_b: Vec<LatticePoint> = lattice_neighborhood(&br_b, q)?.into_iter().filter(|p| !index_b.contains_key(p)).collect();
        log.push(IterationRecord {
            iteration,
            size_a: set_a.len(),
            size_b: set_b.len(),
            value: eq.value,
            br_value_a: val_a,
            br_value_b: val_b,
            added_a: new_a.len(),
            added_b: new_b.len(),
        });
        let done = new_a.is_empty() && new_b.is_empty();
        if done || iteration >= config.max_iters {
            return Ok(DoubleOracleResult {
                strategies_a: set_a,
                strategies_b: set_b,
                equilibrium: eq,
                payoff,
                converged: done,
                iterations: iteration,
                log,
            });
        }

        for p in new_a {
            index_a.insert(p.clone(), set_a.len());
            set_a.push(p);
        }
        let old_cols = rows[0].len();
        for p in new_b {
            index_b.insert(p.clone(), set_b.len());
            set_b.push(p);
        }
        let old_rows = rows.len();
        // new columns for existing rows, then full new rows
        let extra: Vec<Vec<f64>> = rows
            .par_iter()
            .zip(set_a[..old_rows].par_iter())
            .map(|(_, a)| {
                let x = a.coords();
                set_b[old_cols..].iter().map(|b| game.payoff(&x, &b.coords())).collect()
            })
            .collect();
        for (r, e) in rows.iter_mut().zip(extra) {
            r.extend(e);
        }
        let fresh: Vec<Vec<f64>> = set_a[old_rows..]
            .par_iter()
            .map(|a| {
                let x = a.coords();
                set_b.iter().map(|b| game.payoff(&x, &b.coords())).collect()
            })
            .collect();
        rows.extend(fresh);
    }
}

/// Earth mover's distance between two discrete distributions over points
/// of `R^n`, with Euclidean ground distance.
pub fn earth_movers_distance(a: &[(Vec<f64>, f64)], b: &[(Vec<f64>, f64)]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|(p, _)| b.iter().map(|(r, _)| p.iter().zip(r).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()).collect())
        .collect();
    let mass_a: f64 = a.iter().map(|x| x.1).sum();
    let mass_b: f64 = b.iter().map(|x| x.1).sum();
    let mut supply: Vec<f64> = a.iter().map(|x| x.1 / mass_a).collect();
    let mut demand: Vec<f64> = b.iter().map(|x| x.1 / mass_b).collect();
    let mut flow = vec![vec![0.0; nb]; na];
    let mut total = 0.0;
    // successive shortest paths on the bipartite residual graph
    for _ in 0..4 * (na + nb) * (na + nb) + 10 {
        // node ids: a in 0..na, b in na..na+nb; distances from a virtual source
        let mut dist = vec![f64::INFINITY; na + nb];
        let mut prev = vec![usize::MAX; na + nb];
        for i in 0..na {
            if supply[i] > 1e-15 {
                dist[i] = 0.0;
            }
        }
        for _ in 0..na + nb {
            let mut changed = false;
            for i in 0..na {
                if dist[i].is_finite() {
                    for j in 0..nb {
                        let d = dist[i] + cost[i][j];
                        if d < dist[na + j] - 1e-15 {
                            dist[na + j] = d;
                            prev[na + j] = i;
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..nb {
                if dist[na + j].is_finite() {
                    for i in 0..na {
                        if flow[i][j] > 1e-15 {
                            let d = dist[na + j] - cost[i][j];
                            if d < dist[i] - 1e-15 {
                                dist[i] = d;
                                prev[i] = na + j;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..nb).filter(|&j| demand[j] > 1e-15 && dist[na + j].is_finite()).min_by(|&x, &y| dist[na + x].total_cmp(&dist[na + y]));
        let Some(j) = target else { break };
        // walk back to a source, finding the bottleneck
        let mut amount = demand[j];
        let mut node = na + j;
        let mut path = Vec::new();
        while prev[node] != usize::MAX {
            let p = prev[node];
            path.push((p, node));
            if node < na {
                amount = amount.min(flow[node][p - na]);
            }
            node = p;
        }
        amount = amount.min(supply[node]);
        if amount <= 1e-15 {
            break;
        }
        supply[node] -= amount;
        demand[j] -= amount;
        for (from, to) in path {
            if from < na {
                flow[from][to - na] += amount;
            } else {
                flow[to][from - na] -= amount;
            }
        }
        total += amount;
        if total >= 1.0 - 1e-12 {
            break;
        }
    }
    (0..na).map(|i| (0..nb).map(|j| flow[i][j] * cost[i][j]).sum::<f64>()).sum()
}
