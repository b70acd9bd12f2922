//! Numerical toolkit for the forced critical surface quasi-geostrophic equation
//! on the periodic box: spectral transforms, time integration, Littlewood-Paley
//! flux diagnostics, De Giorgi level-set energies and attractor experiments.

pub mod attractor;
pub mod checkpoint;
pub mod degiorgi;
pub mod error;
pub mod forcing;
pub mod littlewood_paley;
pub mod record;
pub mod scalar;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Domain64 = spectral::Domain<f64>;
pub type Grid64 = spectral::Grid<f64>;
pub type SpectralField64 = spectral::SpectralField<f64>;
pub type SpectralField32 = spectral::SpectralField<f32>;
pub type PhysicalField64 = spectral::PhysicalField<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type Solver64 = solver::Solver<f64>;
pub type TrajectoryRecord64 = record::TrajectoryRecord<f64>;
pub type DyadicProfile64 = littlewood_paley::DyadicProfile<f64>;
pub type LevelConfig64 = degiorgi::LevelConfig<f64>;
