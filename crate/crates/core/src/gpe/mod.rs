//! Split-step Fourier propagation of the one-dimensional Gross-Pitaevskii
//! equation `i ψ̇ = (-∂²/2m + V(x, u) + β|ψ|²) ψ` in internal units (`ħ = 1`).

mod eigen;
mod grid;
mod potential;
mod propagate;
mod wavefunction;

pub use eigen::{
    excited_state, excited_state_with, ground_state, ground_state_with, gpe_energy, Eigenstate,
    ImagTimeConfig,
};
pub use grid::SpatialGrid;
pub use potential::{Harmonic, Potential, Static};
pub use propagate::{propagate, step_real_time, GpeParams, Trajectory};
pub(crate) use propagate::{check_finite, SplitStep};
pub use wavefunction::{fidelity, inner_product, WaveFunction};
pub(crate) use wavefunction::raw_inner;
