//! Finite zero-sum games solved as a linear program with a dense simplex
//! method.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row player's (A's) payoff. Rows index A's strategies, columns B's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::InvalidInstance("payoff matrix must be nonempty".into()));
        }
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: row.len() });
            }
            entries.extend(row);
        }
        if entries.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::InvalidInstance("payoffs must be finite and in [0, 1]".into()));
        }
        Ok(Self { rows: r, cols: c, entries })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new((0..rows).map(|i| (0..cols).map(|j| f(i, j)).collect()).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    /// `sigma_a^T P`, A's expected payoff against each column.
    pub fn row_mix_payoffs(&self, sigma_a: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| sigma_a[i] * self.get(i, j)).sum()).collect()
    }

    /// `P sigma_b`, A's expected payoff of each row.
    pub fn col_mix_payoffs(&self, sigma_b: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.get(i, j) * sigma_b[j]).sum()).collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedEquilibrium {
    pub sigma_a: Vec<f64>,
    pub sigma_b: Vec<f64>,
    pub value: f64,
    /// `min_j (sigma_a^T P)_j`: what A guarantees.
    pub lower: f64,
    /// `max_i (P sigma_b)_i`: what B concedes at most.
    pub upper: f64,
}

impl MixedEquilibrium {
    pub fn duality_gap(&self) -> f64 {
        self.upper - self.lower
    }
}

const DEGENERATE_LIMIT: usize = 500;
const PIVOT_TOL: f64 = 1e-12;

/// Solve `max_{sigma_a} min_{sigma_b} sigma_a^T P sigma_b`.
///
/// With `P' = P - min P + 1 > 0`, B's side is `max 1.w` subject to
/// `P' w <= 1, w >= 0`; A's mixture comes from the duals of that program.
/// The final basis is re-solved with an LU factorization to clean up
/// rounding from the pivots.
pub fn solve_matrix_game(p: &PayoffMatrix) -> Result<MixedEquilibrium> {
    let (m, n) = (p.rows, p.cols);
    let shift = 1.0 - p.min_entry();
    let width = n + m + 1;
    let mut tab = vec![0.0; m * width];
    for i in 0..m {
        for j in 0..n {
            tab[i * width + j] = p.get(i, j) + shift;
        }
        tab[i * width + n + i] = 1.0;
        tab[i * width + width - 1] = 1.0;
    }
    let mut cost = vec![0.0; width];
    cost[..n].iter_mut().for_each(|c| *c = -1.0);
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut log = Vec::new();
    let mut bland = false;
    let mut degenerate_run = 0;
    let max_pivots = 50 * (m + n) + 1000;
    let mut pivots = 0;
    loop {
        let entering = if bland {
            (0..n + m).find(|&j| cost[j] < -PIVOT_TOL)
        } else {
            (0..n + m).filter(|&j| cost[j] < -PIVOT_TOL).min_by(|&a, &b| cost[a].total_cmp(&cost[b]))
        };
        let Some(e) = entering else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = tab[i * width + e];
            if a > PIVOT_TOL {
                let ratio = tab[i * width + width - 1] / a;
                let better = match leave {
                    None => true,
                    Some((l, r)) => ratio < r - 1e-15 || (ratio <= r + 1e-15 && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((l, ratio)) = leave else {
            log.push(format!("pivot {pivots}: column {e} unbounded"));
            return Err(Error::LpFailure { reason: "unbounded direction".into(), log });
        };
        if ratio <= 1e-14 {
            degenerate_run += 1;
            if degenerate_run > DEGENERATE_LIMIT && !bland {
                bland = true;
                log.push(format!("pivot {pivots}: switching to Bland's rule"));
            }
        } else {
            degenerate_run = 0;
        }
        pivot(&mut tab, &mut cost, width, m, l, e);
        basis[l] = e;
        pivots += 1;
        if pivots > max_pivots {
            log.push(format!("pivot limit {max_pivots} reached"));
            return Err(Error::LpFailure { reason: "pivot limit reached".into(), log });
        }
    }

    // refine: B x_B = 1 and B^T u = c_B on the optimal basis
    let column = |j: usize, i: usize| if j < n { p.get(i, j) + shift } else if j - n == i { 1.0 } else { 0.0 };
    let bmat = DMatrix::from_fn(m, m, |i, c| column(basis[c], i));
    let lu = bmat.clone().lu();
    let xb = lu.solve(&DVector::from_element(m, 1.0));
    let cb = DVector::from_fn(m, |c, _| if basis[c] < n { 1.0 } else { 0.0 });
    let u = bmat.transpose().lu().solve(&cb);
    let (mut w, mut dual) = (vec![0.0; n], vec![0.0; m]);
    match (xb, u) {
        (Some(xb), Some(u)) => {
            for (c, &j) in basis.iter().enumerate() {
                if j < n {
                    w[j] = xb[c].max(0.0);
                }
            }
            dual.iter_mut().zip(u.iter()).for_each(|(d, v)| *d = v.max(0.0));
        }
        _ => {
            log.push("singular final basis; using tableau values".into());
            for (i, &j) in basis.iter().enumerate() {
                if j < n {
                    w[j] = tab[i * width + width - 1].max(0.0);
                }
            }
            for (i, d) in dual.iter_mut().enumerate() {
                *d = cost[n + i].max(0.0);
            }
        }
    }
    let (sw, su) = (w.iter().sum::<f64>(), dual.iter().sum::<f64>());
    if !(sw > 0.0 && su > 0.0) {
        return Err(Error::LpFailure { reason: "degenerate optimum".into(), log });
    }
    let sigma_b: Vec<f64> = w.iter().map(|x| x / sw).collect();
    let sigma_a: Vec<f64> = dual.iter().map(|x| x / su).collect();
    let lower = p.row_mix_payoffs(&sigma_a).into_iter().fold(f64::INFINITY, f64::min);
    let upper = p.col_mix_payoffs(&sigma_b).into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(MixedEquilibrium { sigma_a, sigma_b, value: 0.5 * (lower + upper), lower, upper })
}

fn pivot(tab: &mut [f64], cost: &mut [f64], width: usize, m: usize, l: usize, e: usize) {
    let inv = 1.0 / tab[l * width + e];
    for v in &mut tab[l * width..(l + 1) * width] {
        *v *= inv;
    }
    let prow: Vec<f64> = tab[l * width..(l + 1) * width].to_vec();
    for i in 0..m {
        if i == l {
            continue;
        }
        let f = tab[i * width + e];
        if f != 0.0 {
            for (v, pv) in tab[i * width..(i + 1) * width].iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
    }
    let f = cost[e];
    for (c, pv) in cost.iter_mut().zip(&prow) {
        *c -= f * pv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_game(rng: &mut ChaCha8Rng, r: usize, c: usize) -> PayoffMatrix {
        PayoffMatrix::from_fn(r, c, |_, _| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn matching_pennies() {
        let p = PayoffMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let eq = solve_matrix_game(&p).unwrap();
        assert_abs_diff_eq!(eq.value, 0.5, epsilon = 1e-14);
        for s in eq.sigma_a.iter().chain(&eq.sigma_b) {
            assert_abs_diff_eq!(*s, 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn dominant_row() {
        let p = PayoffMatrix::new(vec![vec![0.2, 0.3, 0.1], vec![0.6, 0.9, 0.7], vec![0.5, 0.8, 0.4]]).unwrap();
        let eq = solve_matrix_game(&p).unwrap();
        assert_abs_diff_eq!(eq.sigma_a[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eq.value, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(PayoffMatrix::new(vec![]).is_err());
        assert!(PayoffMatrix::new(vec![vec![0.1, 0.2], vec![0.3]]).is_err());
        assert!(PayoffMatrix::new(vec![vec![f64::NAN]]).is_err());
        assert!(PayoffMatrix::new(vec![vec![1.5]]).is_err());
    }

    #[test]
    fn random_games_have_certificates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (r, c) = (rng.random_range(1..=50), rng.random_range(1..=50));
            let p = random_game(&mut rng, r, c);
            let eq = solve_matrix_game(&p).unwrap();
            assert!(eq.duality_gap().abs() <= 1e-8, "gap {} for {r}x{c}", eq.duality_gap());
            assert!((eq.sigma_a.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            assert!((eq.sigma_b.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            assert!(eq.value >= p.min_entry() - 1e-12 && eq.value <= p.max_entry() + 1e-12);
            // no pure deviation helps either player
            assert!(p.col_mix_payoffs(&eq.sigma_b).iter().all(|v| *v <= eq.value + 1e-8));
            assert!(p.row_mix_payoffs(&eq.sigma_a).iter().all(|v| *v >= eq.value - 1e-8));
        }
    }

    #[test]
    fn value_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (r, c) = (rng.random_range(2..=12), rng.random_range(2..=12));
            let p = random_game(&mut rng, r, c);
            let mut rp: Vec<usize> = (0..r).collect();
            let mut cp: Vec<usize> = (0..c).collect();
            rp.shuffle(&mut rng);
            cp.shuffle(&mut rng);
            let q = PayoffMatrix::from_fn(r, c, |i, j| p.get(rp[i], cp[j])).unwrap();
            assert_abs_diff_eq!(solve_matrix_game(&p).unwrap().value, solve_matrix_game(&q).unwrap().value, epsilon = 1e-10);
        }
    }

    /// Value of a 2 x n game: maximize the lower envelope of n lines in
    /// A's mixing weight, checked at every pairwise crossing and endpoint.
    fn two_by_n_value(p: &PayoffMatrix) -> f64 {
        let line = |j: usize, t: f64| t * p.get(0, j) + (1.0 - t) * p.get(1, j);
        let envelope = |t: f64| (0..p.cols()).map(|j| line(j, t)).fold(f64::INFINITY, f64::min);
        let mut best = envelope(0.0).max(envelope(1.0));
        for a in 0..p.cols() {
            for b in a + 1..p.cols() {
                let (s1, s2) = (p.get(0, a) - p.get(1, a), p.get(0, b) - p.get(1, b));
                if (s1 - s2).abs() > 1e-15 {
                    let t = (p.get(1, b) - p.get(1, a)) / (s1 - s2);
                    if (0.0..=1.0).contains(&t) {
                        best = best.max(envelope(t));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn two_by_n_graphical_method() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let c = rng.random_range(2..=8);
            let p = random_game(&mut rng, 2, c);
            assert_abs_diff_eq!(solve_matrix_game(&p).unwrap().value, two_by_n_value(&p), epsilon = 1e-10);
        }
        // 2x2 without a saddle point: closed form (ad - bc) / (a + d - b - c)
        let (a, b, c, d) = (0.9, 0.2, 0.3, 0.7);
        let p = PayoffMatrix::new(vec![vec![a, b], vec![c, d]]).unwrap();
        let eq = solve_matrix_game(&p).unwrap();
        assert_abs_diff_eq!(eq.value, (a * d - b * c) / (a + d - b - c), epsilon = 1e-12);
        assert_abs_diff_eq!(eq.sigma_a[0], (d - c) / (a + d - b - c), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_games() {
        let p = PayoffMatrix::new(vec![vec![0.5; 6]; 6]).unwrap();
        let eq = solve_matrix_game(&p).unwrap();
        assert_abs_diff_eq!(eq.value, 0.5, epsilon = 1e-14);
        let mut rows = vec![vec![0.3, 0.7, 0.5]; 4];
        rows.push(vec![0.6, 0.4, 0.5]);
        let eq = solve_matrix_game(&PayoffMatrix::new(rows).unwrap()).unwrap();
        assert!(eq.duality_gap().abs() <= 1e-12);
    }
}
