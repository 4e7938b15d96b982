//! Analytic level-set functions, their P1 interpolants on the background
//! mesh, and the per-element discrete normal and tangential projector.

use std::collections::HashMap;

use nalgebra::Matrix3;
use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::{barycentric_coords, barycentric_gradients, BackgroundMesh, TetRef, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevelSetError {
    #[error("level-set gradient is undefined at {0:?}")]
    SingularPoint([f64; 3]),
    #[error("sphere radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("discrete gradient vanishes on element {0:?}")]
    DegenerateElement(TetRef),
    #[error("no nodal value stored for vertex {0}")]
    MissingVertex(usize),
}

/// Scalar function whose zero set is the surface.
pub trait LevelSet: Send + Sync {
    fn value(&self, x: &Vec3) -> f64;
    fn gradient(&self, x: &Vec3) -> Result<Vec3, LevelSetError>;

    /// Exact unit normal `∇φ/|∇φ|`.
    fn normal(&self, x: &Vec3) -> Result<Vec3, LevelSetError> {
        let g = self.gradient(x)?;
        let norm = g.norm();
        if norm == 0.0 {
            return Err(LevelSetError::SingularPoint([x.x, x.y, x.z]));
        }
        Ok(g / norm)
    }
}

/// `φ(x) = |x| − r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    radius: f64,
}

impl Sphere {
    pub fn new(radius: f64) -> Result<Self, LevelSetError> {
        if !(radius > 0.0) {
            return Err(LevelSetError::BadRadius(radius));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl LevelSet for Sphere {
    fn value(&self, x: &Vec3) -> f64 {
        x.norm() - self.radius
    }

    fn gradient(&self, x: &Vec3) -> Result<Vec3, LevelSetError> {
        let r = x.norm();
        if r == 0.0 {
            return Err(LevelSetError::SingularPoint([x.x, x.y, x.z]));
        }
        Ok(x / r)
    }
}

/// Genus-five "six hole" surface: the zero set of
/// `(x²+y²−4)² + (y²−1)² + (y²+z²−4)² + (x²−1)² + (x²+z²−4)² + (z²−1)² − 13`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SixHole;

impl LevelSet for SixHole {
    fn value(&self, x: &Vec3) -> f64 {
        let (a, b, c) = (x.x * x.x, x.y * x.y, x.z * x.z);
        (a + b - 4.0).powi(2)
            + (b - 1.0).powi(2)
            + (b + c - 4.0).powi(2)
            + (a - 1.0).powi(2)
            + (a + c - 4.0).powi(2)
            + (c - 1.0).powi(2)
            - 13.0
    }

    fn gradient(&self, x: &Vec3) -> Result<Vec3, LevelSetError> {
        let (a, b, c) = (x.x * x.x, x.y * x.y, x.z * x.z);
        // d/dx_i of (s - 4)^2 is 4 x_i (s - 4) for each pair sum s containing x_i²
        let gx = 4.0 * x.x * ((a + b - 4.0) + (a + c - 4.0) + (a - 1.0));
        let gy = 4.0 * x.y * ((a + b - 4.0) + (b + c - 4.0) + (b - 1.0));
        let gz = 4.0 * x.z * ((b + c - 4.0) + (a + c - 4.0) + (c - 1.0));
        Ok(Vec3::new(gx, gy, gz))
    }
}

/// Smallest `|∇φ|` over a set of sample points.
pub fn min_gradient_norm<L: LevelSet + ?Sized>(
    ls: &L,
    points: impl IntoIterator<Item = Vec3>,
) -> Result<f64, LevelSetError> {
    let mut m = f64::INFINITY;
    for p in points {
        m = m.min(ls.gradient(&p)?.norm());
    }
    Ok(m)
}

/// P1 interpolant of a level set, stored only on cells whose corner values
/// change sign. Zero counts as positive.
#[derive(Debug, Clone)]
pub struct NodalField {
    mesh: BackgroundMesh,
    values: HashMap<usize, f64>,
    cut_cells: Vec<[usize; 3]>,
}

/// Sign convention shared by the band test and the marching cases.
#[inline]
pub fn is_negative(value: f64) -> bool {
    value < 0.0
}

pub fn interpolate_p1<L: LevelSet + ?Sized>(ls: &L, mesh: &BackgroundMesh) -> NodalField {
    let n = mesh.cells_per_axis();
    let slabs: Vec<Vec<([usize; 3], [(usize, f64); 8])>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            for j in 0..n {
                for i in 0..n {
                    let corners: [(usize, f64); 8] = std::array::from_fn(|c| {
                        let ijk = [i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)];
                        (mesh.vertex_id(ijk), ls.value(&mesh.lattice_point(ijk)))
                    });
                    let neg = corners.iter().filter(|(_, v)| is_negative(*v)).count();
                    if neg > 0 && neg < 8 {
                        out.push(([i, j, k], corners));
                    }
                }
            }
            out
        })
        .collect();

    let mut values = HashMap::new();
    let mut cut_cells = Vec::new();
    for (cell, corners) in slabs.into_iter().flatten() {
        cut_cells.push(cell);
        for (id, v) in corners {
            values.insert(id, v);
        }
    }
    NodalField {
        mesh: mesh.clone(),
        values,
        cut_cells,
    }
}

impl NodalField {
    pub fn mesh(&self) -> &BackgroundMesh {
        &self.mesh
    }

    /// Cells containing at least one tetrahedron with mixed signs, in
    /// lexicographic order (x fastest).
    pub fn cut_cells(&self) -> &[[usize; 3]] {
        &self.cut_cells
    }

    pub fn vertex_value(&self, id: usize) -> Option<f64> {
        self.values.get(&id).copied()
    }

    pub fn num_stored(&self) -> usize {
        self.values.len()
    }

    pub fn tet_values(&self, tet: &TetRef) -> Result<[f64; 4], LevelSetError> {
        let ids = tet.vertex_ids(&self.mesh);
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = self
                .vertex_value(ids[k])
                .ok_or(LevelSetError::MissingVertex(ids[k]))?;
        }
        Ok(out)
    }

    /// Evaluates `φ_h` at `x` inside `tet` by barycentric interpolation.
    pub fn eval(&self, tet: &TetRef, x: &Vec3) -> Result<f64, LevelSetError> {
        let vals = self.tet_values(tet)?;
        let l = barycentric_coords(&tet.vertices(&self.mesh), x)
            .ok_or(LevelSetError::DegenerateElement(*tet))?;
        Ok((0..4).map(|k| l[k] * vals[k]).sum())
    }

    /// Constant gradient of `φ_h` on `tet`.
    pub fn gradient(&self, tet: &TetRef) -> Result<Vec3, LevelSetError> {
        let vals = self.tet_values(tet)?;
        let grads = barycentric_gradients(&tet.vertices(&self.mesh))
            .ok_or(LevelSetError::DegenerateElement(*tet))?;
        Ok((0..4).map(|k| grads[k] * vals[k]).sum())
    }
}

/// Discrete unit normal and tangential projector of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementFrame {
    pub normal: Vec3,
    pub projector: Matrix3<f64>,
}

impl ElementFrame {
    pub fn from_gradient(grad: &Vec3) -> Option<Self> {
        let norm = grad.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return None;
        }
        let normal = grad / norm;
        Some(Self {
            normal,
            projector: Matrix3::identity() - normal * normal.transpose(),
        })
    }

    /// `P_h v`.
    #[inline]
    pub fn project(&self, v: &Vec3) -> Vec3 {
        v - self.normal * self.normal.dot(v)
    }
}

pub fn element_frame(field: &NodalField, tet: &TetRef) -> Result<ElementFrame, LevelSetError> {
    let grad = field.gradient(tet)?;
    ElementFrame::from_gradient(&grad).ok_or(LevelSetError::DegenerateElement(*tet))
}
