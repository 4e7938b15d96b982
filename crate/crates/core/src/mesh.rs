//! Uniform tetrahedral background mesh of a cube.
//!
//! Every cubic cell is split into six tetrahedra along its main diagonal
//! (Kuhn/Freudenthal split). The split uses the same diagonal direction in
//! every cell, so faces of neighbouring tetrahedra match without any case
//! analysis. Nothing is stored per tetrahedron: a [`TetRef`] is a cell index
//! plus a local index and all geometry is recomputed on demand.

use nalgebra::Vector3;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("box must satisfy hi > lo on every axis, got lo = {lo:?}, hi = {hi:?}")]
    EmptyBox { lo: [f64; 3], hi: [f64; 3] },
    #[error("box must be a cube, got edge lengths {edges:?}")]
    NotCubic { edges: [f64; 3] },
    #[error("number of cells per axis must be at least 1")]
    NoCells,
    #[error("cell {cell:?} is outside the mesh with {n} cells per axis")]
    CellOutOfRange { cell: [usize; 3], n: usize },
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3 {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Box3 {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Result<Self, MeshError> {
        if (0..3).any(|k| !(hi[k] > lo[k])) {
            return Err(MeshError::EmptyBox { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[lo, hi]^3`.
    pub fn cube(lo: f64, hi: f64) -> Result<Self, MeshError> {
        Self::new([lo; 3], [hi; 3])
    }

    pub fn edges(&self) -> [f64; 3] {
        [
            self.hi[0] - self.lo[0],
            self.hi[1] - self.lo[1],
            self.hi[2] - self.lo[2],
        ]
    }

    pub fn volume(&self) -> f64 {
        self.edges().iter().product()
    }
}

/// Axis orderings that generate the six Kuhn tetrahedra. Tetrahedron `p`
/// walks from corner (0,0,0) to (1,1,1) adding unit vectors in the order
/// `KUHN_PATHS[p]`.
const KUHN_PATHS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Reference to one tetrahedron of the background mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TetRef {
    pub cell: [usize; 3],
    pub local: u8,
}

impl TetRef {
    /// Integer lattice offsets of the four vertices relative to the cell's
    /// lower corner. The first and last vertex are always the endpoints of the
    /// cell diagonal.
    pub fn corner_offsets(&self) -> [[usize; 3]; 4] {
        let path = KUHN_PATHS[self.local as usize];
        let mut offsets = [[0usize; 3]; 4];
        for step in 0..3 {
            let mut next = offsets[step];
            next[path[step]] = 1;
            offsets[step + 1] = next;
        }
        offsets
    }

    pub fn vertex_ids(&self, mesh: &BackgroundMesh) -> [usize; 4] {
        self.corner_offsets().map(|o| {
            mesh.vertex_id([
                self.cell[0] + o[0],
                self.cell[1] + o[1],
                self.cell[2] + o[2],
            ])
        })
    }

    pub fn vertices(&self, mesh: &BackgroundMesh) -> [Vec3; 4] {
        self.corner_offsets().map(|o| {
            mesh.lattice_point([
                self.cell[0] + o[0],
                self.cell[1] + o[1],
                self.cell[2] + o[2],
            ])
        })
    }

    pub fn volume(&self, mesh: &BackgroundMesh) -> f64 {
        tet_volume(&self.vertices(mesh))
    }
}

/// Unsigned volume of a tetrahedron.
pub fn tet_volume(v: &[Vec3; 4]) -> f64 {
    (v[1] - v[0]).cross(&(v[2] - v[0])).dot(&(v[3] - v[0])).abs() / 6.0
}

/// Gradients of the four barycentric coordinates of a tetrahedron, or `None`
/// for a flat one. They sum to zero.
pub fn barycentric_gradients(v: &[Vec3; 4]) -> Option<[Vec3; 4]> {
    let jac = nalgebra::Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
    let inv = jac.try_inverse()?;
    let g1: Vec3 = inv.row(0).transpose();
    let g2: Vec3 = inv.row(1).transpose();
    let g3: Vec3 = inv.row(2).transpose();
    Some([-(g1 + g2 + g3), g1, g2, g3])
}

/// Barycentric coordinates of `x` with respect to the tetrahedron `v`.
pub fn barycentric_coords(v: &[Vec3; 4], x: &Vec3) -> Option<[f64; 4]> {
    let jac = nalgebra::Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
    let l = jac.try_inverse()? * (x - v[0]);
    Some([1.0 - l[0] - l[1] - l[2], l[0], l[1], l[2]])
}

/// Implicitly indexed uniform tetrahedral mesh of a cube.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundMesh {
    bounds: Box3,
    n: usize,
    h: f64,
}

impl BackgroundMesh {
    pub fn new(bounds: Box3, n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::NoCells);
        }
        let edges = bounds.edges();
        let scale = edges[0].abs().max(edges[1].abs()).max(edges[2].abs());
        if (edges[0] - edges[1]).abs() > 1e-12 * scale || (edges[0] - edges[2]).abs() > 1e-12 * scale
        {
            return Err(MeshError::NotCubic { edges });
        }
        Ok(Self {
            bounds,
            n,
            h: edges[0] / n as f64,
        })
    }

    /// Mesh whose cell size is as close as possible to `target_h`.
    pub fn with_target_h(bounds: Box3, target_h: f64) -> Result<Self, MeshError> {
        let n = (bounds.edges()[0] / target_h).round().max(1.0) as usize;
        Self::new(bounds, n)
    }

    pub fn bounds(&self) -> &Box3 {
        &self.bounds
    }

    /// Cells per axis.
    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    /// Cell edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_cells(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn num_tets(&self) -> usize {
        6 * self.num_cells()
    }

    pub fn num_vertices(&self) -> usize {
        let m = self.n + 1;
        m * m * m
    }

    pub fn vertex_id(&self, ijk: [usize; 3]) -> usize {
        let m = self.n + 1;
        ijk[0] + m * (ijk[1] + m * ijk[2])
    }

    pub fn vertex_lattice(&self, id: usize) -> [usize; 3] {
        let m = self.n + 1;
        [id % m, (id / m) % m, id / (m * m)]
    }

    /// Coordinates of lattice point `ijk`. Always computed as `lo + i*h`, so a
    /// vertex has bitwise identical coordinates from every cell touching it.
    pub fn lattice_point(&self, ijk: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.bounds.lo[0] + ijk[0] as f64 * self.h,
            self.bounds.lo[1] + ijk[1] as f64 * self.h,
            self.bounds.lo[2] + ijk[2] as f64 * self.h,
        )
    }

    pub fn vertex_coords(&self, id: usize) -> Vec3 {
        self.lattice_point(self.vertex_lattice(id))
    }

    pub fn tets_in_cell(&self, cell: [usize; 3]) -> Result<[TetRef; 6], MeshError> {
        if cell.iter().any(|&c| c >= self.n) {
            return Err(MeshError::CellOutOfRange { cell, n: self.n });
        }
        Ok(std::array::from_fn(|local| TetRef {
            cell,
            local: local as u8,
        }))
    }

    /// All cells in lexicographic order (x fastest).
    pub fn cells(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let n = self.n;
        (0..n).flat_map(move |k| (0..n).flat_map(move |j| (0..n).map(move |i| [i, j, k])))
    }
}
