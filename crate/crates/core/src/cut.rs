//! Discrete surface extraction and cut-element bookkeeping.
//!
//! `Γ_h` is the zero set of the P1 level-set interpolant. Inside each
//! tetrahedron it is planar, so a marching-tetrahedra pass recovers it
//! exactly as one triangle (3–1 sign split) or a planar quadrilateral cut into
//! two triangles (2–2 split).

use arrayvec::ArrayVec;
use rayon::prelude::*;
use thiserror::Error;

use crate::levelset::{element_frame, is_negative, ElementFrame, LevelSetError, NodalField};
use crate::mesh::{barycentric_gradients, tet_volume, TetRef, Vec3};
use crate::quadrature::{surface_quadrature, triangle_area, volume_quadrature, QuadRule, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("level-set value is NaN")]
    NaN,
    #[error("the surface does not cut the background mesh")]
    EmptyCut,
    #[error(transparent)]
    LevelSet(#[from] LevelSetError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

pub type TetCut = ArrayVec<[Vec3; 3], 2>;

/// Zero crossing on the edge from `a` (negative) to `b` (non-negative).
#[inline]
fn crossing(xa: &Vec3, fa: f64, xb: &Vec3, fb: f64) -> Vec3 {
    let t = fa / (fa - fb);
    xa + (xb - xa) * t
}

/// Triangulates the zero set of the linear interpolant of `values` on the
/// tetrahedron `coords`. Triangles are oriented with their normal pointing
/// towards the non-negative side.
pub fn marching_tet(values: [f64; 4], coords: [Vec3; 4]) -> Result<TetCut, GeometryError> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(GeometryError::NaN);
    }
    let (neg, pos): (ArrayVec<usize, 4>, ArrayVec<usize, 4>) = {
        let mut neg = ArrayVec::new();
        let mut pos = ArrayVec::new();
        for k in 0..4 {
            if is_negative(values[k]) {
                neg.push(k);
            } else {
                pos.push(k);
            }
        }
        (neg, pos)
    };
    let cross = |a: usize, b: usize| crossing(&coords[a], values[a], &coords[b], values[b]);

    let mut out = TetCut::new();
    match (neg.len(), pos.len()) {
        (0, _) | (_, 0) => return Ok(out),
        (1, 3) => {
            let a = neg[0];
            out.push([cross(a, pos[0]), cross(a, pos[1]), cross(a, pos[2])]);
        }
        (3, 1) => {
            let b = pos[0];
            out.push([cross(neg[0], b), cross(neg[1], b), cross(neg[2], b)]);
        }
        _ => {
            let (a, b, c, d) = (neg[0], neg[1], pos[0], pos[1]);
            // cyclic order around the quadrilateral
            let quad = [cross(a, c), cross(a, d), cross(b, d), cross(b, c)];
            if (quad[0] - quad[2]).norm() <= (quad[1] - quad[3]).norm() {
                out.push([quad[0], quad[1], quad[2]]);
                out.push([quad[0], quad[2], quad[3]]);
            } else {
                out.push([quad[1], quad[2], quad[3]]);
                out.push([quad[1], quad[3], quad[0]]);
            }
        }
    }

    let mean = |idx: &[usize]| idx.iter().map(|&k| coords[k]).sum::<Vec3>() / idx.len() as f64;
    let outward = mean(&pos) - mean(&neg);
    for tri in out.iter_mut() {
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
        if n.dot(&outward) < 0.0 {
            tri.swap(1, 2);
        }
    }
    Ok(out)
}

/// A background tetrahedron of the narrow band with its cached geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BandElement {
    pub tet: TetRef,
    pub vertex_ids: [usize; 4],
    pub vertices: [Vec3; 4],
    /// Nodal values of `φ_h`.
    pub phi: [f64; 4],
    pub frame: ElementFrame,
    pub volume: f64,
    /// Constant gradients of the four P1 basis functions.
    pub basis_gradients: [Vec3; 4],
}

/// The set of cut tetrahedra, in lexicographic cell order then local index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NarrowBand {
    pub elements: Vec<BandElement>,
    pub volume_degree: u32,
}

impl NarrowBand {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.elements.iter().map(|e| e.volume).sum()
    }

    pub fn volume_rule(&self, element: usize) -> Result<QuadRule, GeometryError> {
        Ok(volume_quadrature(&self.elements[element].vertices, self.volume_degree)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutTriangle {
    pub vertices: [Vec3; 3],
    /// Index of the parent element in the [`NarrowBand`].
    pub element: usize,
    /// Discrete normal of the parent element.
    pub normal: Vec3,
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub x: Vec3,
    pub weight: f64,
    pub triangle: usize,
}

/// Triangulated `Γ_h` with a quadrature rule on every triangle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CutSurface {
    pub triangles: Vec<CutTriangle>,
    pub points: Vec<SurfacePoint>,
    pub degree: u32,
}

impl CutSurface {
    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| t.area).sum()
    }

    pub fn integrate(&self, f: impl Fn(&SurfacePoint) -> f64) -> f64 {
        self.points.iter().map(|p| p.weight * f(p)).sum()
    }
}

/// Options for [`build_cut_surface`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutOptions {
    pub surface_degree: u32,
    pub volume_degree: u32,
}

impl Default for CutOptions {
    fn default() -> Self {
        Self {
            surface_degree: 4,
            volume_degree: 1,
        }
    }
}

struct ElementCut {
    element: BandElement,
    triangles: TetCut,
}

fn cut_cell(field: &NodalField, cell: [usize; 3]) -> Result<Vec<ElementCut>, GeometryError> {
    let mesh = field.mesh();
    let mut out = Vec::new();
    for tet in mesh.tets_in_cell(cell).expect("cut cells lie inside the mesh") {
        let phi = field.tet_values(&tet)?;
        let neg = phi.iter().filter(|&&v| is_negative(v)).count();
        if neg == 0 || neg == 4 {
            continue;
        }
        let vertices = tet.vertices(mesh);
        let frame = match element_frame(field, &tet) {
            Ok(f) => f,
            Err(LevelSetError::DegenerateElement(t)) => {
                log::warn!("dropping element {t:?} with vanishing level-set gradient");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let basis_gradients = barycentric_gradients(&vertices)
            .ok_or(LevelSetError::DegenerateElement(tet))?;
        let triangles = marching_tet(phi, vertices)?;
        out.push(ElementCut {
            element: BandElement {
                tet,
                vertex_ids: tet.vertex_ids(mesh),
                vertices,
                phi,
                frame,
                volume: tet_volume(&vertices),
                basis_gradients,
            },
            triangles,
        });
    }
    Ok(out)
}

/// Extracts `Γ_h` and the narrow band from the interpolated level set.
pub fn build_cut_surface(
    field: &NodalField,
    options: CutOptions,
) -> Result<(CutSurface, NarrowBand), GeometryError> {
    // validate degrees up front so an empty triangle list cannot hide a bad one
    crate::quadrature::triangle_rule(options.surface_degree)?;
    crate::quadrature::tet_rule(options.volume_degree)?;

    let per_cell: Vec<Vec<ElementCut>> = field
        .cut_cells()
        .par_iter()
        .map(|&cell| cut_cell(field, cell))
        .collect::<Result<_, _>>()?;

    let mesh_scale = field.mesh().h();
    let min_area = 1e-14 * mesh_scale * mesh_scale;
    let mut band = NarrowBand {
        elements: Vec::new(),
        volume_degree: options.volume_degree,
    };
    let mut surface = CutSurface {
        degree: options.surface_degree,
        ..Default::default()
    };
    for cut in per_cell.into_iter().flatten() {
        let element = band.elements.len();
        let normal = cut.element.frame.normal;
        band.elements.push(cut.element);
        for tri in cut.triangles {
            let area = triangle_area(&tri);
            if area <= min_area {
                continue;
            }
            let index = surface.triangles.len();
            let rule = surface_quadrature(&tri, options.surface_degree)?;
            for (x, weight) in rule.points.into_iter().zip(rule.weights) {
                surface.points.push(SurfacePoint {
                    x,
                    weight,
                    triangle: index,
                });
            }
            surface.triangles.push(CutTriangle {
                vertices: tri,
                element,
                normal,
                area,
            });
        }
    }
    if band.is_empty() || surface.triangles.is_empty() {
        return Err(GeometryError::EmptyCut);
    }
    Ok((surface, band))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{interpolate_p1, Sphere};
    use crate::mesh::{BackgroundMesh, Box3};
    use std::f64::consts::PI;

    fn reference_tet() -> [Vec3; 4] {
        [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]
    }

    fn linear_value(values: &[f64; 4], coords: &[Vec3; 4], x: &Vec3) -> f64 {
        let l = crate::mesh::barycentric_coords(coords, x).unwrap();
        (0..4).map(|k| l[k] * values[k]).sum()
    }

    #[test]
    fn single_negative_vertex_gives_midpoint_triangle() {
        let tris = marching_tet([-1.0, 1.0, 1.0, 1.0], reference_tet()).unwrap();
        assert_eq!(tris.len(), 1);
        let mut pts: Vec<[f64; 3]> = tris[0].iter().map(|p| [p.x, p.y, p.z]).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![[0.0, 0.0, 0.5], [0.0, 0.5, 0.0], [0.5, 0.0, 0.0]]);
    }

    #[test]
    fn two_two_split_is_planar_quad() {
        let coords = reference_tet();
        let values = [-1.0, -1.0, 1.0, 1.0];
        let tris = marching_tet(values, coords).unwrap();
        assert_eq!(tris.len(), 2);
        let n0 = (tris[0][1] - tris[0][0]).cross(&(tris[0][2] - tris[0][0])).normalize();
        let n1 = (tris[1][1] - tris[1][0]).cross(&(tris[1][2] - tris[1][0])).normalize();
        assert!((n0 - n1).norm() < 1e-14);
        for t in &tris {
            for p in t {
                assert!(linear_value(&values, &coords, p).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn uniform_signs_are_empty() {
        assert!(marching_tet([1.0; 4], reference_tet()).unwrap().is_empty());
        assert!(marching_tet([-1.0; 4], reference_tet()).unwrap().is_empty());
        assert!(marching_tet([0.0; 4], reference_tet()).unwrap().is_empty());
    }

    #[test]
    fn all_sixteen_sign_patterns() {
        let coords = [
            Vec3::new(0.1, 0.0, -0.2),
            Vec3::new(1.2, 0.1, 0.0),
            Vec3::new(0.0, 0.9, 0.3),
            Vec3::new(0.2, 0.3, 1.1),
        ];
        let magnitudes = [0.7, 1.3, 0.4, 2.1];
        for pattern in 0u32..16 {
            let values: [f64; 4] = std::array::from_fn(|k| {
                if pattern & (1 << k) != 0 {
                    -magnitudes[k]
                } else {
                    magnitudes[k]
                }
            });
            let negatives = pattern.count_ones();
            let tris = marching_tet(values, coords).unwrap();
            let expected = match negatives {
                0 | 4 => 0,
                1 | 3 => 1,
                _ => 2,
            };
            assert_eq!(tris.len(), expected, "pattern {pattern:04b}");
            let pos: Vec<Vec3> = (0..4).filter(|&k| values[k] >= 0.0).map(|k| coords[k]).collect();
            let neg: Vec<Vec3> = (0..4).filter(|&k| values[k] < 0.0).map(|k| coords[k]).collect();
            for t in &tris {
                assert!(triangle_area(t) > 0.0);
                for p in t {
                    assert!(linear_value(&values, &coords, p).abs() < 1e-14);
                    let l = crate::mesh::barycentric_coords(&coords, p).unwrap();
                    assert!(l.iter().all(|&x| x > -1e-14 && x < 1.0 + 1e-14));
                }
                let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
                let dir = pos.iter().sum::<Vec3>() / pos.len() as f64
                    - neg.iter().sum::<Vec3>() / neg.len() as f64;
                assert!(n.dot(&dir) > 0.0, "pattern {pattern:04b} orientation");
            }
            if expected == 2 {
                let n0 = (tris[0][1] - tris[0][0]).cross(&(tris[0][2] - tris[0][0])).normalize();
                let n1 = (tris[1][1] - tris[1][0]).cross(&(tris[1][2] - tris[1][0])).normalize();
                assert!((n0 - n1).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_value_counts_as_positive() {
        // face-coincident zero set is produced once, by the tet on the negative side
        let tris = marching_tet([0.0, 0.0, 0.0, -1.0], reference_tet()).unwrap();
        assert_eq!(tris.len(), 1);
        assert!((triangle_area(&tris[0]) - 0.5).abs() < 1e-15);
        assert!(marching_tet([0.0, 0.0, 0.0, 1.0], reference_tet()).unwrap().is_empty());
    }

    #[test]
    fn nan_is_rejected() {
        assert_eq!(
            marching_tet([f64::NAN, 1.0, 1.0, 1.0], reference_tet()),
            Err(GeometryError::NaN)
        );
    }

    fn sphere_setup(n: usize) -> (CutSurface, NarrowBand, NodalField) {
        let s = Sphere::new(1.0).unwrap();
        let mesh = BackgroundMesh::new(Box3::cube(-1.25, 1.25).unwrap(), n).unwrap();
        let field = interpolate_p1(&s, &mesh);
        let (cut, band) = build_cut_surface(&field, CutOptions::default()).unwrap();
        (cut, band, field)
    }

    #[test]
    fn sphere_area_close_to_exact() {
        let (cut, band, _) = sphere_setup(10);
        assert!(!band.is_empty());
        let rel = (cut.area() - 4.0 * PI).abs() / (4.0 * PI);
        assert!(rel < 0.03, "relative area error {rel}");
        let quad_area = cut.integrate(|_| 1.0);
        assert!((quad_area - cut.area()).abs() <= 1e-12 * cut.area());
    }

    #[test]
    fn surface_points_lie_on_zero_set() {
        let (cut, band, field) = sphere_setup(8);
        let scale = field.mesh().h();
        for p in &cut.points {
            let tet = band.elements[cut.triangles[p.triangle].element].tet;
            assert!(field.eval(&tet, &p.x).unwrap().abs() <= 1e-10 * scale);
        }
        for t in &cut.triangles {
            let tet = band.elements[t.element].tet;
            for v in &t.vertices {
                assert!(field.eval(&tet, v).unwrap().abs() <= 1e-12 * scale);
            }
            // orientation follows the discrete normal
            let n = (t.vertices[1] - t.vertices[0]).cross(&(t.vertices[2] - t.vertices[0]));
            assert!(n.dot(&t.normal) > 0.0);
        }
        assert!(cut.points.iter().all(|p| p.weight > 0.0));
    }

    #[test]
    fn area_error_converges_at_second_order() {
        let errs: Vec<(f64, f64)> = [8usize, 16, 32]
            .iter()
            .map(|&n| {
                let (cut, _, field) = sphere_setup(n);
                (field.mesh().h(), (cut.area() - 4.0 * PI).abs())
            })
            .collect();
        for w in errs.windows(2) {
            let eoc = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
            assert!((1.6..=2.6).contains(&eoc), "eoc {eoc} from {errs:?}");
        }
    }

    #[test]
    fn area_is_independent_of_summation_order() {
        let (cut, _, _) = sphere_setup(12);
        let forward = cut.area();
        let backward: f64 = cut.triangles.iter().rev().map(|t| t.area).sum();
        let mut shuffled: Vec<f64> = cut.triangles.iter().map(|t| t.area).collect();
        shuffled.sort_by(|a, b| a.total_cmp(b));
        let sorted: f64 = shuffled.iter().sum();
        assert!((forward - backward).abs() <= 1e-12 * forward);
        assert!((forward - sorted).abs() <= 1e-12 * forward);
    }

    #[test]
    fn band_membership_follows_signs() {
        let (_, band, _) = sphere_setup(6);
        for e in &band.elements {
            let neg = e.phi.iter().filter(|&&v| v < 0.0).count();
            assert!(neg > 0 && neg < 4);
        }
        // traversal order is lexicographic in (z, y, x) cell index then local index
        let keys: Vec<_> = band
            .elements
            .iter()
            .map(|e| (e.tet.cell[2], e.tet.cell[1], e.tet.cell[0], e.tet.local))
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn surface_outside_box_is_an_error() {
        let s = Sphere::new(5.0).unwrap();
        let mesh = BackgroundMesh::new(Box3::cube(-1.0, 1.0).unwrap(), 4).unwrap();
        let field = interpolate_p1(&s, &mesh);
        assert_eq!(
            build_cut_surface(&field, CutOptions::default()),
            Err(GeometryError::EmptyCut)
        );
    }

    #[test]
    fn bad_degree_is_an_error() {
        let s = Sphere::new(1.0).unwrap();
        let mesh = BackgroundMesh::new(Box3::cube(-1.25, 1.25).unwrap(), 4).unwrap();
        let field = interpolate_p1(&s, &mesh);
        let opts = CutOptions {
            surface_degree: 5,
            volume_degree: 1,
        };
        assert!(matches!(
            build_cut_surface(&field, opts),
            Err(GeometryError::Quadrature(_))
        ));
    }
}
