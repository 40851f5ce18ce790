//! Two-species lattice fermions: Fock sectors, the Hubbard operator, exact
//! ground states, Falicov-Kimball configuration search and heavy-particle
//! observables.

mod basis;
mod fk;
mod observables;
mod operator;
mod solver;

pub use basis::{binomial, rank, unrank, words, FockSector, HeavyConfig, MAX_SITES};
pub use fk::{fk_energy, fk_ground, AnnealSchedule, FkConfig, FkGround, Strategy, TIE_TOL};
pub use observables::{
    boundary_weight, chain_ground_state, coefficient_bound_report, displacement, displacements,
    heavy_bond_count, heavy_marginals, mismatch_count, report, sigma_classical, sigma_expectation,
    sigma_from_marginals, sigma_scaling, write_scaling_csv, CoefficientBoundReport, GammaProxy,
    GroundStateReport, Marginal, MarginalEntry, ScalingRow, ScalingTable, SigmaEntry, SigmaMode,
    COEFFICIENT_CAUTION, PROFILE_RADIUS, SCALING_CSV_HEADER, TOP_MARGINALS,
};
pub use operator::{HubbardOperator, DENSE_LIMIT};
pub use solver::{ground_state, ManyBodyGroundState, Method, SolverOptions, DEGENERACY_TOL};
