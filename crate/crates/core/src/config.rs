//! Run configuration: seed and named tolerances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 0x5e9e_2024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Newton step tolerance for Segre graphs and intersections.
    pub newton: f64,
    /// Membership checks (Segre varieties, surfaces, chains).
    pub membership: f64,
    /// Relative eigenvalue threshold below which the Levi form is degenerate.
    pub levi: f64,
    /// Relative singular-value threshold for numerical rank.
    pub rank: f64,
    /// Agreement of successive continuation steps on overlaps.
    pub step_consistency: f64,
    /// Residual of a projective glue fit.
    pub glue: f64,
    /// Hyperplane-fit residual for the Q-Segre property.
    pub q_segre: f64,
    /// Residual of the monodromy matrix fit.
    pub monodromy_fit: f64,
    /// Relative tolerance of the scalar-matrix test.
    pub scalar: f64,
    /// Eigenvalue clustering radius for Jordan structure.
    pub cluster: f64,
    /// Residual of a quadric fit.
    pub quadric_fit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            newton: 1e-12,
            membership: 1e-10,
            levi: 1e-8,
            rank: 1e-8,
            step_consistency: 1e-8,
            glue: 1e-8,
            q_segre: 1e-6,
            monodromy_fit: 1e-6,
            scalar: 1e-8,
            cluster: 1e-7,
            quadric_fit: 1e-8,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 11] = [
        "newton",
        "membership",
        "levi",
        "rank",
        "step_consistency",
        "glue",
        "q_segre",
        "monodromy_fit",
        "scalar",
        "cluster",
        "quadric_fit",
    ];

    /// Overrides one tolerance by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Precondition(format!("tolerance {name} must be positive, got {value}")));
        }
        let slot = match name {
            "newton" => &mut self.newton,
            "membership" => &mut self.membership,
            "levi" => &mut self.levi,
            "rank" => &mut self.rank,
            "step_consistency" => &mut self.step_consistency,
            "glue" => &mut self.glue,
            "q_segre" => &mut self.q_segre,
            "monodromy_fit" => &mut self.monodromy_fit,
            "scalar" => &mut self.scalar,
            "cluster" => &mut self.cluster,
            "quadric_fit" => &mut self.quadric_fit,
            _ => {
                return Err(Error::Precondition(format!(
                    "unknown tolerance `{name}` (known: {})",
                    Self::NAMES.join(", ")
                )))
            }
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub seed: u64,
    pub tol: Tolerances,
    /// Largest order tried by the finite-order search.
    pub k_max: u32,
    /// Chain search budget (number of Segre steps).
    pub max_depth: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: DEFAULT_SEED,
            tol: Tolerances::default(),
            k_max: 64,
            max_depth: 6,
        }
    }
}

impl Config {
    pub fn with_seed(seed: u64) -> Self {
        Config { seed, ..Config::default() }
    }

    /// A generator derived from the seed and a stream label, so that
    /// independent stages do not share random sequences.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }
}
