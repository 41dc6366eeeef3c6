//! Perimeter-defense workbench: circular-territory simulation, an expert
//! spatio-temporal task assignment solver, decentralized spike encoding, a
//! spiking multi-label classifier with time-varying weights, auction-based
//! conflict resolution, dataset tooling, and evaluation suites.
//!
//! All continuous math is generic over the scalar type (f32/f64) through
//! [`scalar::Real`]; the `*64` aliases at the crate root pin the default
//! double-precision lane used by the CLI.

pub mod assignment;
pub mod consensus;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod expert;
pub mod runner;
pub mod scalar;
pub mod sefron;
pub mod world;

pub use error::{Error, Result};
pub use scalar::Real;

/// Binary zone labels for one defender (target or prediction).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelVector(pub Vec<bool>);

impl LabelVector {
    pub fn zeros(m: usize) -> Self {
        LabelVector(vec![false; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, idx: usize) -> bool {
        self.0[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn count_positive(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// `"0101..."` with one character per zone.
    pub fn to_bitstring(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::parse("labels", format!("bad label bit {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(LabelVector)
    }
}

// Concrete double-precision lane.
pub type Scenario64 = world::Scenario<f64>;
pub type SpikePattern64 = encoding::SpikePattern<f64>;
pub type SefronNetwork64 = sefron::SefronNetwork<f64>;
pub type TrainingConfig64 = sefron::TrainingConfig<f64>;
pub type DatasetConfig64 = dataset::DatasetConfig<f64>;
pub type Sample64 = dataset::Sample<f64>;
