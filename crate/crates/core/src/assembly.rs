//! Surface mass matrix, stabilized stiffness `a_h`, load vectors and the
//! energy and mass functionals.
//!
//! Element contributions are produced in parallel chunks, concatenated in
//! element order and summed in that order, so results do not depend on the
//! thread count.

use rayon::prelude::*;
use thiserror::Error;

use crate::cut::{build_cut_surface, CutOptions, CutSurface, GeometryError, NarrowBand};
use crate::levelset::{interpolate_p1, LevelSet};
use crate::mesh::{BackgroundMesh, Vec3};
use crate::potential::Potential;
use crate::space::{build_space, FieldRole, FieldVector, SpaceError, SurfaceSample, TraceSpace};
use crate::sparse::{SparseError, SparseOperator};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

const CHUNK: usize = 256;

fn collect_triplets<T: Sync>(
    items: &[T],
    f: impl Fn(&T, &mut Vec<(usize, usize, f64)>) + Sync,
) -> Vec<(usize, usize, f64)> {
    let chunks: Vec<Vec<(usize, usize, f64)>> = items
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() * 16);
            for item in chunk {
                f(item, &mut out);
            }
            out
        })
        .collect();
    chunks.concat()
}

/// Scatters per-sample contributions `[f64; 4]` into a vector of length `n`.
fn scatter(n: usize, samples: &[SurfaceSample], f: impl Fn(&SurfaceSample) -> f64 + Sync) -> Vec<f64> {
    let local: Vec<[f64; 4]> = samples
        .par_iter()
        .map(|s| {
            let v = s.weight * f(s);
            s.basis.map(|b| v * b)
        })
        .collect();
    let mut out = vec![0.0; n];
    for (s, l) in samples.iter().zip(&local) {
        for k in 0..4 {
            out[s.dofs[k]] += l[k];
        }
    }
    out
}

/// `M_Γ[i,j] = ∫_{Γ_h} φ_i φ_j ds`.
pub fn assemble_mass(
    space: &TraceSpace,
    samples: &[SurfaceSample],
) -> Result<SparseOperator, AssemblyError> {
    let t = collect_triplets(samples, |s, out| {
        for a in 0..4 {
            for b in 0..4 {
                out.push((s.dofs[a], s.dofs[b], s.weight * (s.basis[a] * s.basis[b])));
            }
        }
    });
    Ok(SparseOperator::from_triplets(space.n_dof(), t)?)
}

/// The tangential stiffness, the normal-gradient stabilization and `a_h`.
#[derive(Debug, Clone)]
pub struct StiffnessParts {
    pub a_gamma: SparseOperator,
    pub stab: SparseOperator,
    pub a_h: SparseOperator,
}

/// `A_Γ + h S` with `S[i,j] = ∫_{Ω_h^Γ} (n_h·∇φ_i)(n_h·∇φ_j) dx` over whole band tets.
pub fn assemble_ah(
    space: &TraceSpace,
    cut: &CutSurface,
    band: &NarrowBand,
    h: f64,
) -> Result<StiffnessParts, AssemblyError> {
    let n = space.n_dof();
    let a_t = collect_triplets(&cut.triangles, |tri, out| {
        let e = &band.elements[tri.element];
        let dofs = space.element_dofs(tri.element);
        let pg: [Vec3; 4] = e.basis_gradients.map(|g| e.frame.project(&g));
        for a in 0..4 {
            for b in 0..4 {
                out.push((dofs[a], dofs[b], tri.area * pg[a].dot(&pg[b])));
            }
        }
    });
    let indexed: Vec<usize> = (0..band.len()).collect();
    let s_t = collect_triplets(&indexed, |&i, out| {
        let e = &band.elements[i];
        let dofs = space.element_dofs(i);
        let ng: [f64; 4] = e.basis_gradients.map(|g| e.frame.normal.dot(&g));
        for a in 0..4 {
            for b in 0..4 {
                out.push((dofs[a], dofs[b], e.volume * (ng[a] * ng[b])));
            }
        }
    });
    let a_gamma = SparseOperator::from_triplets(n, a_t)?;
    let stab = SparseOperator::from_triplets(n, s_t)?;
    let a_h = a_gamma.add_scaled(h, &stab)?;
    Ok(StiffnessParts {
        a_gamma,
        stab,
        a_h,
    })
}

/// `b[i] = ∫_{Γ_h} f0'(c_h) φ_i ds` with `f0'` taken at quadrature points.
pub fn assemble_nonlinear_load(
    space: &TraceSpace,
    samples: &[SurfaceSample],
    c: &FieldVector,
    potential: &Potential,
) -> Vec<f64> {
    scatter(space.n_dof(), samples, |s| potential.df0(s.eval(&c.values)))
}

/// `∫_{Γ_h} g(x, t) φ_i ds`.
pub fn assemble_forcing(
    space: &TraceSpace,
    samples: &[SurfaceSample],
    g: impl Fn(&Vec3, f64) -> f64 + Sync,
    t: f64,
) -> Vec<f64> {
    scatter(space.n_dof(), samples, |s| g(&s.x, t))
}

/// `∫_{Γ_h} f0(c_h) ds` on the given samples.
pub fn potential_energy(samples: &[SurfaceSample], c: &FieldVector, potential: &Potential) -> f64 {
    let parts: Vec<f64> = samples
        .par_iter()
        .map(|s| s.weight * potential.f0(s.eval(&c.values)))
        .collect();
    parts.iter().sum()
}

/// `E_h = ε²/2 cᵀA_h c + ∫_{Γ_h} f0(c_h) ds`.
pub fn discrete_energy(
    a_h: &SparseOperator,
    samples: &[SurfaceSample],
    c: &FieldVector,
    epsilon: f64,
    potential: &Potential,
) -> f64 {
    0.5 * epsilon * epsilon * a_h.bilinear(&c.values, &c.values)
        + potential_energy(samples, c, potential)
}

/// `∫_{Γ_h} c_h ds = 1ᵀ M_Γ c`.
pub fn total_mass(mass: &SparseOperator, c: &FieldVector) -> f64 {
    mass.matvec(&c.values).iter().sum()
}

/// Everything the scheme needs on one background mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: BackgroundMesh,
    pub cut: CutSurface,
    pub band: NarrowBand,
    pub space: TraceSpace,
    pub samples: Vec<SurfaceSample>,
    pub mass: SparseOperator,
    pub stiffness: StiffnessParts,
}

impl Discretization {
    pub fn build<L: LevelSet + ?Sized>(
        ls: &L,
        mesh: BackgroundMesh,
        options: CutOptions,
    ) -> Result<Self, AssemblyError> {
        let field = interpolate_p1(ls, &mesh);
        let (cut, band) = build_cut_surface(&field, options)?;
        let space = build_space(&band)?;
        let samples = space.surface_samples(&cut, &band)?;
        let mass = assemble_mass(&space, &samples)?;
        let stiffness = assemble_ah(&space, &cut, &band, mesh.h())?;
        log::info!(
            "h = {:.4}: {} band tets, {} surface triangles, {} dofs",
            mesh.h(),
            band.len(),
            cut.triangles.len(),
            space.n_dof()
        );
        Ok(Self {
            mesh,
            cut,
            band,
            space,
            samples,
            mass,
            stiffness,
        })
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    pub fn n_dof(&self) -> usize {
        self.space.n_dof()
    }

    pub fn a_h(&self) -> &SparseOperator {
        &self.stiffness.a_h
    }

    pub fn area(&self) -> f64 {
        self.cut.area()
    }

    pub fn interpolate(&self, f: impl Fn(&Vec3) -> f64, role: FieldRole) -> FieldVector {
        self.space
            .interpolate(|v| self.mesh.vertex_coords(v), f, role)
    }

    pub fn energy(&self, c: &FieldVector, epsilon: f64, potential: &Potential) -> f64 {
        discrete_energy(self.a_h(), &self.samples, c, epsilon, potential)
    }

    pub fn total_mass(&self, c: &FieldVector) -> f64 {
        total_mass(&self.mass, c)
    }

    /// `∫_{Γ_h} f ds` for a P1 field.
    pub fn integrate_field(&self, c: &FieldVector) -> f64 {
        self.samples.iter().map(|s| s.weight * s.eval(&c.values)).sum()
    }
}
