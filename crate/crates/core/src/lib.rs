//! Stabilized trace finite elements for the Cahn–Hilliard equation on
//! implicitly defined surfaces.
//!
//! A uniform tetrahedral background mesh is cut by the zero set of a P1
//! level-set interpolant. The P1 space on the cut tetrahedra carries the
//! concentration `c` and chemical potential `μ`, and each time step solves
//! one linear block system.

pub mod assembly;
pub mod cli;
pub mod cut;
pub mod io;
pub mod levelset;
pub mod mesh;
pub mod potential;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod verification;

pub use assembly::Discretization;
pub use cut::CutOptions;
pub use levelset::{LevelSet, SixHole, Sphere};
pub use mesh::{BackgroundMesh, Box3, Vec3};
pub use potential::Potential;
pub use solver::{ChState, Schedule, SchemeParams};
pub use space::{FieldRole, FieldVector};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    LevelSet(#[from] levelset::LevelSetError),
    #[error(transparent)]
    Geometry(#[from] cut::GeometryError),
    #[error(transparent)]
    Assembly(#[from] assembly::AssemblyError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Verification(#[from] verification::VerificationError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}

impl Error {
    /// 2 for usage and configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }
}
