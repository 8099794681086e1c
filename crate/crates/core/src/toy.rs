//! Synthetic wind-turbine dataset and its reference graphs.
//!
//! The generator draws, row by row:
//!
//! | column | distribution |
//! |---|---|
//! | `Winter_Ind` | Bernoulli(0.7) |
//! | `Sea_Temperature` | N(20 - 10 Winter, 2) |
//! | `Wind_Speed` | N(40 + 20 Winter, 10) |
//! | `Strength_Degradation` | N(1.5, 0.1) |
//! | `Rotational_RPM` | N(1.2 + Wind / 10, 0.2) |
//! | `Energy_Yield` | N(10 + RPM / 1.5 - Degradation / 10, 2) |
//! | `Perceived_Noise` | N(20 + RPM / 1.5 - Wind / 4, 1) |
//!
//! with the second argument of N the standard deviation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};

use crate::bootstrap::derive_substream;
use crate::data::Dataset;
use crate::error::Result;
use crate::graph::{CausalGraph, Edge};

pub const WINTER: &str = "Winter_Ind";
pub const SEA_TEMP: &str = "Sea_Temperature";
pub const WIND: &str = "Wind_Speed";
pub const DEGRADATION: &str = "Strength_Degradation";
pub const RPM: &str = "Rotational_RPM";
pub const ENERGY: &str = "Energy_Yield";
pub const NOISE: &str = "Perceived_Noise";

pub const TOY_COLUMNS: [&str; 7] = [WINTER, SEA_TEMP, WIND, DEGRADATION, RPM, ENERGY, NOISE];

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("positive sd")
}

pub fn generate_toy_dataset(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_substream(seed, "toygen"));
    let winter_dist = Bernoulli::new(0.7).expect("valid probability");
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); TOY_COLUMNS.len()];
    for _ in 0..n {
        let winter = if winter_dist.sample(&mut rng) { 1.0 } else { 0.0 };
        let sea = normal(20.0 - 10.0 * winter, 2.0).sample(&mut rng);
        let wind = normal(40.0 + 20.0 * winter, 10.0).sample(&mut rng);
        let degr = normal(1.5, 0.1).sample(&mut rng);
        let rpm = normal(1.2 + wind / 10.0, 0.2).sample(&mut rng);
        let energy = normal(10.0 + rpm / 1.5 - degr / 10.0, 2.0).sample(&mut rng);
        let noise = normal(20.0 + rpm / 1.5 - wind / 4.0, 1.0).sample(&mut rng);
        for (col, v) in cols.iter_mut().zip([winter, sea, wind, degr, rpm, energy, noise]) {
            col.push(v);
        }
    }
    Dataset::new(
        TOY_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .zip(cols)
            .collect(),
    )
}

/// Draws `n` rows from a fitted linear SCM (Gaussian exogenous nodes and
/// noise). Used as a forward-simulation oracle.
pub fn simulate_linear_scm<R: Rng>(
    order: &[String],
    parents: &[Vec<(usize, f64)>],
    intercepts: &[f64],
    variances: &[f64],
    n: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let p = order.len();
    let mut cols = vec![Vec::with_capacity(n); p];
    let mut row = vec![0.0; p];
    for _ in 0..n {
        for j in 0..p {
            let mean = intercepts[j] + parents[j].iter().map(|&(k, b)| b * row[k]).sum::<f64>();
            row[j] = normal(mean, variances[j].sqrt()).sample(rng);
            cols[j].push(row[j]);
        }
    }
    cols
}

fn build(edges: &[(&str, &str, u8)]) -> CausalGraph {
    CausalGraph::from_parts(
        TOY_COLUMNS,
        edges.iter().map(|&(p, c, b)| Edge::new(p, c, b)),
        0,
    )
    .expect("static toy graph is valid")
}

/// The structure the generator actually uses.
pub fn toy_generating_graph() -> CausalGraph {
    build(&[
        (WINTER, SEA_TEMP, 3),
        (WINTER, WIND, 3),
        (WIND, RPM, 3),
        (RPM, ENERGY, 3),
        (DEGRADATION, ENERGY, 1),
        (RPM, NOISE, 3),
        (WIND, NOISE, 3),
    ])
}

/// First co-design draft from the SME belief list: 9 weighted edges plus 5
/// intercepts.
pub fn toy_first_iteration_graph() -> CausalGraph {
    build(&[
        (WINTER, SEA_TEMP, 3),
        (WINTER, WIND, 3),
        (DEGRADATION, RPM, 3),
        (WIND, RPM, 3),
        (RPM, ENERGY, 3),
        (WIND, ENERGY, 2),
        (SEA_TEMP, ENERGY, 1),
        (WIND, NOISE, 3),
        (RPM, NOISE, 3),
    ])
}
