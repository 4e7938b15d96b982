//! P1 trace finite element space on the narrow band.

use std::collections::HashMap;

use thiserror::Error;

use crate::cut::{CutSurface, NarrowBand};
use crate::mesh::{barycentric_coords, barycentric_gradients, TetRef, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("narrow band is empty")]
    EmptyBand,
    #[error("point {x:?} lies outside the element (barycentric coordinates {bary:?})")]
    OutsideElement { x: [f64; 3], bary: [f64; 4] },
    #[error("element is degenerate")]
    DegenerateElement,
    #[error("element {0:?} is not in the narrow band")]
    NotInBand(TetRef),
    #[error("field has {got} coefficients, space has {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// What a coefficient vector represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    Concentration,
    Potential,
    Generic,
}

/// Coefficients of a P1 function in a [`TraceSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub values: Vec<f64>,
    pub role: FieldRole,
}

impl FieldVector {
    pub fn new(values: Vec<f64>, role: FieldRole) -> Self {
        Self { values, role }
    }

    pub fn zeros(n: usize, role: FieldRole) -> Self {
        Self::new(vec![0.0; n], role)
    }

    pub fn constant(n: usize, value: f64, role: FieldRole) -> Self {
        Self::new(vec![value; n], role)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Basis values and gradients of the four P1 functions of a tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisEval {
    pub values: [f64; 4],
    pub gradients: [Vec3; 4],
}

const INSIDE_TOL: f64 = 1e-12;

pub fn eval_basis(vertices: &[Vec3; 4], x: &Vec3) -> Result<BasisEval, SpaceError> {
    let bary = barycentric_coords(vertices, x).ok_or(SpaceError::DegenerateElement)?;
    if bary
        .iter()
        .any(|&l| !(-INSIDE_TOL..=1.0 + INSIDE_TOL).contains(&l))
    {
        return Err(SpaceError::OutsideElement {
            x: [x.x, x.y, x.z],
            bary,
        });
    }
    let gradients = barycentric_gradients(vertices).ok_or(SpaceError::DegenerateElement)?;
    Ok(BasisEval {
        values: bary,
        gradients,
    })
}

/// Basis data at one surface quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub x: Vec3,
    pub weight: f64,
    pub element: usize,
    pub dofs: [usize; 4],
    pub basis: [f64; 4],
}

impl SurfaceSample {
    #[inline]
    pub fn eval(&self, coeffs: &[f64]) -> f64 {
        (0..4).map(|k| coeffs[self.dofs[k]] * self.basis[k]).sum()
    }
}

/// Active-vertex DOF numbering of the narrow band.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSpace {
    /// Global vertex id of each DOF, ascending.
    vertices: Vec<usize>,
    dof_of_vertex: HashMap<usize, usize>,
    element_dofs: Vec<[usize; 4]>,
    element_of_tet: HashMap<TetRef, usize>,
}

pub fn build_space(band: &NarrowBand) -> Result<TraceSpace, SpaceError> {
    if band.is_empty() {
        return Err(SpaceError::EmptyBand);
    }
    let mut vertices: Vec<usize> = band
        .elements
        .iter()
        .flat_map(|e| e.vertex_ids)
        .collect();
    vertices.sort_unstable();
    vertices.dedup();
    let dof_of_vertex: HashMap<usize, usize> =
        vertices.iter().enumerate().map(|(d, &v)| (v, d)).collect();
    let element_dofs = band
        .elements
        .iter()
        .map(|e| e.vertex_ids.map(|v| dof_of_vertex[&v]))
        .collect();
    let element_of_tet = band
        .elements
        .iter()
        .enumerate()
        .map(|(i, e)| (e.tet, i))
        .collect();
    Ok(TraceSpace {
        vertices,
        dof_of_vertex,
        element_dofs,
        element_of_tet,
    })
}

impl TraceSpace {
    pub fn n_dof(&self) -> usize {
        self.vertices.len()
    }

    pub fn dof_vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn dof_of_vertex(&self, vertex: usize) -> Option<usize> {
        self.dof_of_vertex.get(&vertex).copied()
    }

    pub fn element_dofs(&self, element: usize) -> [usize; 4] {
        self.element_dofs[element]
    }

    pub fn element_index(&self, tet: &TetRef) -> Option<usize> {
        self.element_of_tet.get(tet).copied()
    }

    pub fn zeros(&self, role: FieldRole) -> FieldVector {
        FieldVector::zeros(self.n_dof(), role)
    }

    /// Nodal interpolant of `f` given the coordinates of every DOF vertex.
    pub fn interpolate(
        &self,
        vertex_coords: impl Fn(usize) -> Vec3,
        f: impl Fn(&Vec3) -> f64,
        role: FieldRole,
    ) -> FieldVector {
        FieldVector::new(
            self.vertices.iter().map(|&v| f(&vertex_coords(v))).collect(),
            role,
        )
    }

    fn check_len(&self, vec: &FieldVector) -> Result<(), SpaceError> {
        if vec.len() != self.n_dof() {
            return Err(SpaceError::LengthMismatch {
                expected: self.n_dof(),
                got: vec.len(),
            });
        }
        Ok(())
    }

    /// Value and surface gradient `P_h ∇v` of a P1 field at `x` in `tet`.
    pub fn eval_field(
        &self,
        band: &NarrowBand,
        vec: &FieldVector,
        tet: &TetRef,
        x: &Vec3,
    ) -> Result<(f64, Vec3), SpaceError> {
        self.check_len(vec)?;
        let element = self.element_index(tet).ok_or(SpaceError::NotInBand(*tet))?;
        let e = &band.elements[element];
        let basis = eval_basis(&e.vertices, x)?;
        let dofs = self.element_dofs[element];
        let mut value = 0.0;
        let mut grad = Vec3::zeros();
        for k in 0..4 {
            value += vec.values[dofs[k]] * basis.values[k];
            grad += e.basis_gradients[k] * vec.values[dofs[k]];
        }
        Ok((value, e.frame.project(&grad)))
    }

    /// Basis data at every quadrature point of `cut`, in the same order.
    pub fn surface_samples(
        &self,
        cut: &CutSurface,
        band: &NarrowBand,
    ) -> Result<Vec<SurfaceSample>, SpaceError> {
        cut.points
            .iter()
            .map(|p| {
                let element = cut.triangles[p.triangle].element;
                let basis = eval_basis(&band.elements[element].vertices, &p.x)?;
                Ok(SurfaceSample {
                    x: p.x,
                    weight: p.weight,
                    element,
                    dofs: self.element_dofs[element],
                    basis: basis.values,
                })
            })
            .collect()
    }
}
