//! Numerical tolerances used across the crate.
//!
//! Every threshold that decides pass/fail, convergence or rejection lives
//! here so that tests and library code agree on the same numbers.

/// Maximum `|M[i][j] - conj(M[j][i])|` (scaled by `max(1, max|M|)`) for a
/// matrix to be accepted as Hermitian.
pub const HERMITIAN: f64 = 1e-12;

/// Eigendecomposition reconstruction bound `max|M V - V diag(λ)|`.
pub const EIG_RECONSTRUCTION: f64 = 1e-10;

/// Orthonormality bound `max|V†V - I|` for eigenvector matrices.
pub const ORTHONORMAL: f64 = 1e-12;

/// Unitarity bound for a single matrix exponential.
pub const EXPM_UNITARY: f64 = 1e-12;

/// Unitarity bound after a full propagation.
pub const PROPAGATOR_UNITARY: f64 = 1e-9;

/// Normalisation slack accepted for input state vectors.
pub const STATE_NORM: f64 = 1e-10;

/// Relative off-diagonal norm at which the Jacobi sweeps stop.
pub const JACOBI_OFF_DIAGONAL: f64 = 1e-15;

/// Jacobi sweep limit before the solver gives up.
pub const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigenvalues closer than this (scaled by `max(1, |λ|)`) are treated as one
/// degenerate level while tracking eigenvectors.
pub const DEGENERACY: f64 = 1e-9;

/// A tracked eigenvector whose best overlap with the previous frame falls
/// below this weight signals an unresolvable relabelling.
pub const TRACKING_MIN_OVERLAP: f64 = 0.5;

/// Absolute target of the adaptive Simpson quadrature.
pub const QUADRATURE_ABS: f64 = 1e-9;

/// Maximum number of Simpson panels before quadrature is declared failed.
pub const QUADRATURE_MAX_PANELS: usize = 1 << 24;

/// Change in final survival probability accepted by grid refinement.
pub const REFINEMENT: f64 = 1e-6;

/// Largest grid the refinement loop is allowed to reach.
pub const REFINEMENT_MAX_STEPS: usize = 1 << 24;

/// Lower limit on `P (1 - P)` for the Fisher information to be defined.
pub const FISHER_FRINGE: f64 = 1e-12;

/// Slack allowed above 1 for probabilities computed in floating point.
pub const PROBABILITY_SLACK: f64 = 1e-12;

/// Unit-norm tolerance for waveform directions.
pub const DIRECTION_NORM: f64 = 1e-12;

/// Residual accepted for the transcribed zero-field eigenbasis.
pub const PSI0_RESIDUAL: f64 = 1e-10;
