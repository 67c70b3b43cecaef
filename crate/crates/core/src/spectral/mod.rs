//! Eigenfunction expansion of the initial state and its diagnostics.

pub mod basis;
pub mod diagnostics;
pub mod quadrature;
pub mod shape;
pub mod state;

pub use basis::{
    beat_frequency, eigenfunction, eigenfunction_with_derivative, energy, even_mode_index, odd_mode_index,
    recurrence_time, series_position, wavenumber, WellConfig,
};
pub use diagnostics::{
    convergence_curve, decay_exponent, expected_energy, overlap_probability, spread_count, DecayFit, ZETA_FOUR,
};
pub use quadrature::QuadOptions;
pub use shape::{sinc, ApertureShape, FnProfile, Profile, SampledProfile, ShapeProfile};
pub use state::{
    coefficients_analytic, coefficients_quadrature, coefficients_quadrature_for_shape, project_mode,
    CoefficientSummary, Mode, Parity, SpectralState,
};
