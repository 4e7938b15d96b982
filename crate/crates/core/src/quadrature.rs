//! Symmetric Gaussian rules on triangles and tetrahedra.
//!
//! Rules are tabulated in barycentric coordinates with weights normalized to
//! one and mapped to physical elements by scaling with the element measure.

use thiserror::Error;

use crate::mesh::{tet_volume, Vec3};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureError {
    #[error("no triangle rule of degree {0} (supported: 2, 4, 6)")]
    TriangleDegree(u32),
    #[error("no tetrahedron rule of degree {0} (supported: 1, 2)")]
    TetDegree(u32),
}

/// Quadrature points and weights on a physical element.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Vec3) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

/// Expands the orbit of a barycentric point under vertex permutations.
fn orbit3(a: f64, b: f64, c: f64, w: f64, out: &mut Vec<([f64; 3], f64)>) {
    let mut seen: Vec<[f64; 3]> = Vec::new();
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        if !seen.contains(&p) {
            seen.push(p);
            out.push((p, w));
        }
    }
}

/// Barycentric rule on the reference triangle (weights sum to one).
pub fn triangle_rule(degree: u32) -> Result<Vec<([f64; 3], f64)>, QuadratureError> {
    let mut rule = Vec::new();
    match degree {
        2 => {
            let a = 1.0 / 6.0;
            orbit3(a, a, 1.0 - 2.0 * a, 1.0 / 3.0, &mut rule);
        }
        4 => {
            let (a, w) = (0.445_948_490_915_964_9, 0.223_381_589_678_011_47);
            orbit3(a, a, 1.0 - 2.0 * a, w, &mut rule);
            let (a, w) = (0.091_576_213_509_770_74, 0.109_951_743_655_321_87);
            orbit3(a, a, 1.0 - 2.0 * a, w, &mut rule);
        }
        6 => {
            let (a, w) = (0.249_286_745_170_910_42, 0.116_786_275_726_379_37);
            orbit3(a, a, 1.0 - 2.0 * a, w, &mut rule);
            let (a, w) = (0.063_089_014_491_502_23, 0.050_844_906_370_206_82);
            orbit3(a, a, 1.0 - 2.0 * a, w, &mut rule);
            let (a, b, w) = (
                0.053_145_049_844_816_95,
                0.310_352_451_033_784_4,
                0.082_851_075_618_373_58,
            );
            orbit3(a, b, 1.0 - a - b, w, &mut rule);
        }
        d => return Err(QuadratureError::TriangleDegree(d)),
    }
    Ok(rule)
}

/// Barycentric rule on the reference tetrahedron (weights sum to one).
pub fn tet_rule(degree: u32) -> Result<Vec<([f64; 4], f64)>, QuadratureError> {
    match degree {
        1 => Ok(vec![([0.25; 4], 1.0)]),
        2 => {
            let a = (5.0 - 5f64.sqrt()) / 20.0;
            let b = 1.0 - 3.0 * a;
            Ok((0..4)
                .map(|k| {
                    let mut l = [a; 4];
                    l[k] = b;
                    (l, 0.25)
                })
                .collect())
        }
        d => Err(QuadratureError::TetDegree(d)),
    }
}

pub fn triangle_area(v: &[Vec3; 3]) -> f64 {
    0.5 * (v[1] - v[0]).cross(&(v[2] - v[0])).norm()
}

/// Rule of the given degree on a physical triangle.
pub fn surface_quadrature(tri: &[Vec3; 3], degree: u32) -> Result<QuadRule, QuadratureError> {
    let area = triangle_area(tri);
    let rule = triangle_rule(degree)?;
    Ok(QuadRule {
        points: rule
            .iter()
            .map(|(l, _)| tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2])
            .collect(),
        weights: rule.iter().map(|(_, w)| w * area).collect(),
    })
}

/// Rule of the given degree on a physical tetrahedron.
pub fn volume_quadrature(tet: &[Vec3; 4], degree: u32) -> Result<QuadRule, QuadratureError> {
    let vol = tet_volume(tet);
    let rule = tet_rule(degree)?;
    Ok(QuadRule {
        points: rule
            .iter()
            .map(|(l, _)| tet[0] * l[0] + tet[1] * l[1] + tet[2] * l[2] + tet[3] * l[3])
            .collect(),
        weights: rule.iter().map(|(_, w)| w * vol).collect(),
    })
}
