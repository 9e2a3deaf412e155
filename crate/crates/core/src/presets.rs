//! Instances and reference strategies from the published experiments.

use crate::game_model::{ElectionInstance, StrategyProfile};

fn pct(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| x / 100.0).collect()
}

pub const TABLE1_V: [f64; 10] = [23.3, 18.5, 14.4, 8.9, 8.2, 8.2, 6.8, 6.2, 3.4, 2.1];
pub const TABLE1_ALPHA: [f64; 10] = [45.0, 68.0, 32.0, 43.0, 76.0, 36.0, 51.0, 42.0, 85.0, 37.0];
pub const TABLE1_BETA: [f64; 10] = [71.0, 37.0, 24.0, 39.0, 65.0, 61.0, 54.0, 41.0, 31.0, 69.0];
pub const TABLE1_GAMMA: [f64; 10] = [94.0, 67.0, 121.0, 89.0, 92.0, 143.0, 45.0, 79.0, 102.0, 68.0];
pub const TABLE4_W: [u32; 10] = [34, 27, 21, 13, 12, 12, 10, 9, 5, 3];

/// Reported deterministic equilibrium efforts (percent).
pub const TABLE1_X: [f64; 10] = [68.3, 25.8, 5.9, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
pub const TABLE1_Y: [f64; 10] = [36.4, 52.1, 11.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
pub const TABLE2_X: [f64; 10] = [56.6, 12.7, 30.7, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
pub const TABLE2_Y: [f64; 10] = [25.2, 39.4, 35.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];

/// Mixed-equilibrium strategies reported for the electoral-college game
/// (first four states, percent), with the mixture probabilities.
pub const TABLE4_X: [[f64; 4]; 4] = [[76.0, 8.0, 16.0, 0.0], [75.0, 9.0, 16.0, 0.0], [75.0, 8.0, 17.0, 0.0], [0.0, 47.0, 46.0, 7.0]];
pub const TABLE4_Y: [[f64; 4]; 4] = [[64.0, 0.0, 36.0, 0.0], [52.0, 48.0, 0.0, 0.0], [0.0, 61.0, 39.0, 0.0], [0.0, 61.0, 38.0, 1.0]];
pub const TABLE4_SIGMA_A: [f64; 4] = [11.8, 1.1, 82.9, 4.2];
pub const TABLE4_SIGMA_B: [f64; 4] = [28.4, 35.9, 24.0, 11.7];

/// Win probabilities of the majority game across bias scalings.
pub const TABLE9_F: [f64; 5] = [0.1, 1.0, 5.0, 10.0, 50.0];
pub const TABLE9_WIN: [f64; 5] = [51.47, 57.41, 67.31, 73.12, 91.75];

/// Ten-region majority-system instance.
pub fn table1_instance() -> ElectionInstance {
    ElectionInstance::new(pct(&TABLE1_V), pct(&TABLE1_ALPHA), pct(&TABLE1_BETA), pct(&TABLE1_GAMMA)).expect("valid preset")
}

/// The same instance without abstention.
pub fn table2_instance() -> ElectionInstance {
    table1_instance().scale_abstention(0.0).expect("valid preset")
}

/// Stochastic majority game, k = 10.
pub fn table3_instance() -> ElectionInstance {
    table1_instance().with_noise(10.0).expect("valid preset")
}

/// Electoral-college version with k = 10. Abstention is carried over from
/// the majority instance; it does not enter the state win probabilities.
pub fn table4_instance() -> ElectionInstance {
    table1_instance()
        .with_electoral_votes(TABLE4_W.to_vec())
        .and_then(|i| i.with_noise(10.0))
        .expect("valid preset")
}

pub fn table1_profile() -> StrategyProfile {
    StrategyProfile::from_vecs(pct(&TABLE1_X), pct(&TABLE1_Y)).expect("valid preset")
}

pub fn table2_profile() -> StrategyProfile {
    StrategyProfile::from_vecs(pct(&TABLE2_X), pct(&TABLE2_Y)).expect("valid preset")
}

fn pad10(s: &[f64; 4]) -> Vec<f64> {
    let mut out = pct(s);
    out.resize(10, 0.0);
    out
}

/// Table 4 strategies of A and B as full 10-region effort vectors.
pub fn table4_strategies() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (TABLE4_X.iter().map(pad10).collect(), TABLE4_Y.iter().map(pad10).collect())
}

/// Counterexample instance for the sample-reuse variance comparison:
/// instance, base profile and shifted profile.
pub fn reuse_counterexample() -> (ElectionInstance, StrategyProfile, StrategyProfile) {
    let inst = ElectionInstance::new(vec![12.0, 3.0, 4.0], vec![0.1, 0.5, 0.4], vec![0.2, 0.6, 0.3], vec![0.1, 0.1, 0.1])
        .and_then(|i| i.with_noise(3.0))
        .expect("valid preset");
    let x = vec![0.1, 0.35, 0.55];
    let y = vec![0.4, 0.2, 0.4];
    let dx = [-0.07, -0.02, 0.09];
    let dy = [0.15, -0.1, -0.05];
    let base = StrategyProfile::from_vecs(x.clone(), y.clone()).expect("valid preset");
    let shifted = StrategyProfile::from_vecs(
        x.iter().zip(dx).map(|(a, d)| a + d).collect(),
        y.iter().zip(dy).map(|(a, d)| a + d).collect(),
    )
    .expect("valid preset");
    (inst, base, shifted)
}
