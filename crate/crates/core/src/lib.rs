//! Koopman-operator estimation under partial observation of polynomial
//! SDEs: Euler–Maruyama data, delay-embedded EDMD, reference Koopman
//! matrices from the backward Kolmogorov generator, Mori–Zwanzig splits and
//! noise-amplitude accuracy experiments.
//!
//! Numeric modules are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod dictionary;
pub mod edmd;
pub mod error;
pub mod experiments;
pub mod generator;
pub mod io;
pub mod mori_zwanzig;
pub mod polynomial;
pub mod scalar;
pub mod simulate;
pub mod systems;

pub use dictionary::{delay_dictionary, monomial_dictionary, Dictionary, DictionaryKind};
pub use edmd::{fit_koopman, EdmdOptions, Provenance, ReferenceMethod, Solver};
pub use error::{Error, Result};
pub use generator::{
    build_generator, expm, expm_times_vector, propagate_coefficients_cn, reference_koopman, reference_koopman_expm, rk4_flow,
    validate_reference, ValidationReport,
};
pub use mori_zwanzig::{integrate_gle, memory_kernel, noise_term, split_generator, split_matrix, GleOptions};
pub use polynomial::MultiIndex;
pub use scalar::Real;
pub use simulate::{make_delay_pairs, make_fullstate_pairs, simulate_dataset};
pub use systems::{make_linear, make_lorenz, make_modified_vdp, make_ornstein_uhlenbeck, make_van_der_pol};

pub type Polynomial = polynomial::MultiIndexPolynomial<f64>;
pub type SdeSystem = systems::SdeSystem<f64>;
pub type SimConfig = simulate::SimConfig<f64>;
pub type TrajectoryDataset = simulate::TrajectoryDataset<f64>;
pub type SnapshotPairs = simulate::SnapshotPairs<f64>;
pub type KoopmanMatrix = edmd::KoopmanMatrix<f64>;
pub type ReferenceKoopman = edmd::KoopmanMatrix<f64>;
pub type GeneratorMatrix = generator::GeneratorMatrix<f64>;
pub type MzSplit = mori_zwanzig::MzSplit<f64>;
pub type GleSolution = mori_zwanzig::GleSolution<f64>;
