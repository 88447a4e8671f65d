//! Dispersion code multiple access (DCMA) simulation.
//!
//! Users share one band and are separated by Chebyshev group-delay codes
//! applied with all-pass phasers. The library builds the phaser transfer
//! functions, draws line-of-sight channel ensembles, simulates the linked
//! signal chain and estimates multiple access interference (MAI) statistics
//! and bit error probability (BEP).

pub mod analysis;
pub mod channel;
pub mod coding;
pub mod error;
pub mod experiments;
pub mod link;
pub mod phaser;
pub mod sysconfig;

pub use analysis::{BepResult, MaiSampler, MaiStats, MonteCarloBep, StatisticalBep};
pub use channel::{ChannelEnsembleParams, ChannelRealization};
pub use coding::{ChebyshevCode, CodeSet, Side};
pub use error::{DcmaError, Result};
pub use experiments::{Experiment, ExperimentConfig, RunReport};
pub use link::{BitStream, DecodedLink, InterfererBits, Statistic};
pub use phaser::{PhaserBank, Spectrum, Waveform};
pub use sysconfig::{make_grid, FrequencyGrid, SystemParams};
