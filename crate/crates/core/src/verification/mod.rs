//! Manufactured solution on the unit sphere, surface operators written with
//! ambient derivatives, error norms and convergence tables.

pub mod jet;

use thiserror::Error;

use crate::assembly::{AssemblyError, Discretization};
use crate::cut::CutOptions;
use crate::levelset::Sphere;
use crate::mesh::{BackgroundMesh, Box3, MeshError, Vec3};
use crate::potential::Potential;
use crate::solver::{self, ChState, Schedule, SchemeParams, SolverError};
use crate::space::{FieldRole, FieldVector};

pub use jet::Jet;

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("point at the origin has no sphere normal")]
    Origin,
    #[error("|c*| = {value} exceeds the potential cutoff {cutoff} at x = {x:?}, t = {t}")]
    OutsideCutoff {
        value: f64,
        cutoff: f64,
        x: [f64; 3],
        t: f64,
    },
    #[error("error tables have mismatched levels: {0}")]
    Levels(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// A smooth space-time field with ambient derivatives.
pub trait AnalyticField: Sync {
    fn jet(&self, x: &Vec3, t: f64) -> Jet;
    fn time_derivative(&self, x: &Vec3, t: f64) -> f64;

    fn value(&self, x: &Vec3, t: f64) -> f64 {
        self.jet(x, t).value
    }
}

/// A time-independent field given as an expression in [`Jet`]s.
pub struct StaticField<F>(pub F);

impl<F: Fn([Jet; 3]) -> Jet + Sync> AnalyticField for StaticField<F> {
    fn jet(&self, x: &Vec3, _t: f64) -> Jet {
        (self.0)(Jet::variables(x))
    }

    fn time_derivative(&self, _x: &Vec3, _t: f64) -> f64 {
        0.0
    }
}

/// `P∇f` with `P = I − nnᵀ`.
pub fn surface_gradient_ambient<F: AnalyticField + ?Sized>(f: &F, x: &Vec3, t: f64, n: &Vec3) -> Vec3 {
    let g = f.jet(x, t).grad;
    g - n * n.dot(&g)
}

/// `Δ_Γ f = Δf − (2/|x|) n·∇f − nᵀ(∇²f) n` on the sphere through `x`.
pub fn surface_laplacian_sphere<F: AnalyticField + ?Sized>(
    f: &F,
    x: &Vec3,
    t: f64,
) -> Result<f64, VerificationError> {
    let r = x.norm();
    if r == 0.0 {
        return Err(VerificationError::Origin);
    }
    let n = x / r;
    let j = f.jet(x, t);
    Ok(j.laplacian() - 2.0 / r * n.dot(&j.grad) - n.dot(&(j.hess * n)))
}

/// `a(t) = 0.5 (1 − 0.8 e^{−0.4 t})`.
pub fn amplitude(t: f64) -> f64 {
    0.5 * (1.0 - 0.8 * (-0.4 * t).exp())
}

fn amplitude_dt(t: f64) -> f64 {
    0.16 * (-0.4 * t).exp()
}

/// `c*(x, t) = a(t) (x₁x₂ + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactConcentration;

impl AnalyticField for ExactConcentration {
    fn jet(&self, x: &Vec3, t: f64) -> Jet {
        let [x1, x2, _] = Jet::variables(x);
        (x1 * x2 + 1.0) * amplitude(t)
    }

    fn time_derivative(&self, x: &Vec3, t: f64) -> f64 {
        amplitude_dt(t) * (x.x * x.y + 1.0)
    }
}

/// `μ* = f0'(c*) − ε² Δ_Γ c* = (c*)³ − c* + 6 ε² a(t) x₁x₂`, valid while `|c*| ≤ K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactPotential {
    pub epsilon: f64,
}

impl AnalyticField for ExactPotential {
    fn jet(&self, x: &Vec3, t: f64) -> Jet {
        let [x1, x2, _] = Jet::variables(x);
        let a = amplitude(t);
        let c = (x1 * x2 + 1.0) * a;
        c * c * c - c + x1 * x2 * (6.0 * self.epsilon * self.epsilon * a)
    }

    /// Not needed by the scheme; central difference in time.
    fn time_derivative(&self, x: &Vec3, t: f64) -> f64 {
        let dt = 1e-6;
        (self.value(x, t + dt) - self.value(x, t - dt)) / (2.0 * dt)
    }
}

/// The manufactured pair and the forcing of the first equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedProblem {
    pub epsilon: f64,
    pub mobility: f64,
    pub potential: Potential,
}

impl ManufacturedProblem {
    pub fn new(params: &SchemeParams) -> Self {
        Self {
            epsilon: params.epsilon,
            mobility: params.mobility,
            potential: params.potential,
        }
    }

    pub fn c_star(&self) -> ExactConcentration {
        ExactConcentration
    }

    pub fn mu_star(&self) -> ExactPotential {
        ExactPotential {
            epsilon: self.epsilon,
        }
    }

    fn check_cutoff(&self, x: &Vec3, t: f64) -> Result<f64, VerificationError> {
        let c = ExactConcentration.value(x, t);
        if c.abs() > self.potential.cutoff() {
            return Err(VerificationError::OutsideCutoff {
                value: c,
                cutoff: self.potential.cutoff(),
                x: [x.x, x.y, x.z],
                t,
            });
        }
        Ok(c)
    }

    /// `g₁ = ∂c*/∂t − M Δ_Γ μ*`.
    pub fn forcing_g1(&self, x: &Vec3, t: f64) -> Result<f64, VerificationError> {
        self.check_cutoff(x, t)?;
        let lap = surface_laplacian_sphere(&self.mu_star(), x, t)?;
        Ok(ExactConcentration.time_derivative(x, t) - self.mobility * lap)
    }

    /// `g₁` expanded by hand on the unit sphere with `u = x₁x₂`,
    /// `Δ_Γ u = −6u` and `|∇_Γ u|² = x₁² + x₂² − 4u²`.
    pub fn forcing_g1_by_hand(&self, x: &Vec3, t: f64) -> Result<f64, VerificationError> {
        let c = self.check_cutoff(x, t)?;
        let a = amplitude(t);
        let u = x.x * x.y;
        let grad_u2 = x.x * x.x + x.y * x.y - 4.0 * u * u;
        let lap_mu = (3.0 * c * c - 1.0) * a * (-6.0 * u)
            + 6.0 * c * a * a * grad_u2
            + 6.0 * self.epsilon * self.epsilon * a * (-6.0 * u);
        Ok(amplitude_dt(t) * (u + 1.0) - self.mobility * lap_mu)
    }
}

/// `(∫_{Γ_h} |v(x) − v_h(x)|² ds)^{1/2}` with `v` evaluated at the quadrature points.
pub fn l2_error(disc: &Discretization, vh: &FieldVector, exact: impl Fn(&Vec3) -> f64) -> f64 {
    disc.samples
        .iter()
        .map(|s| {
            let e = exact(&s.x) - s.eval(&vh.values);
            s.weight * e * e
        })
        .sum::<f64>()
        .sqrt()
}

/// Errors of one refinement level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelErrors {
    pub h: f64,
    pub c_l2: f64,
    pub mu_l2: f64,
    pub c_l2l2: f64,
    pub mu_l2l2: f64,
}

/// `ln(e_l / e_{l+1}) / ln(h_l / h_{l+1})`, which is `log₂` of the error ratio
/// when the mesh size halves.
pub fn eoc(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

/// Convergence table with `h` strictly decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub levels: Vec<LevelErrors>,
}

/// Orders for one level relative to the previous one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelOrders {
    pub c_l2: f64,
    pub mu_l2: f64,
    pub c_l2l2: f64,
    pub mu_l2l2: f64,
}

impl LevelOrders {
    pub fn min(&self) -> f64 {
        self.c_l2.min(self.mu_l2).min(self.c_l2l2).min(self.mu_l2l2)
    }
}

impl ErrorReport {
    pub fn new(levels: Vec<LevelErrors>) -> Result<Self, VerificationError> {
        if levels.windows(2).any(|w| !(w[1].h < w[0].h)) {
            return Err(VerificationError::Levels(
                "mesh sizes must strictly decrease".into(),
            ));
        }
        Ok(Self { levels })
    }

    /// `None` for the first level.
    pub fn orders(&self) -> Vec<Option<LevelOrders>> {
        let mut out = vec![None];
        for w in self.levels.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let o = |x: f64, y: f64| eoc(x, y, a.h, b.h);
            out.push(Some(LevelOrders {
                c_l2: o(a.c_l2, b.c_l2),
                mu_l2: o(a.mu_l2, b.mu_l2),
                c_l2l2: o(a.c_l2l2, b.c_l2l2),
                mu_l2l2: o(a.mu_l2l2, b.mu_l2l2),
            }));
        }
        out.truncate(self.levels.len().max(1));
        out
    }

    /// Orders between the two finest levels.
    pub fn finest_orders(&self) -> Option<LevelOrders> {
        self.orders().last().copied().flatten()
    }
}

/// Settings of the manufactured-solution study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSetup {
    pub params: SchemeParams,
    pub bounds: Box3,
    pub final_time: f64,
    /// `τ = tau_factor · h²`.
    pub tau_factor: f64,
    /// Start from `π_h c*(0)`; otherwise from the nodal interpolant.
    pub ritz_initial: bool,
    pub cut: CutOptions,
}

impl Default for ConvergenceSetup {
    fn default() -> Self {
        Self {
            params: SchemeParams {
                epsilon: 0.1,
                ..SchemeParams::default()
            },
            bounds: Box3::cube(-1.25, 1.25).expect("valid box"),
            final_time: 0.1,
            tau_factor: 0.5,
            ritz_initial: true,
            cut: CutOptions::default(),
        }
    }
}

/// Number of cells per axis for a target mesh size.
pub fn cells_for(bounds: &Box3, h: f64) -> usize {
    ((bounds.edges()[0] / h).round() as usize).max(1)
}

/// Solves the forced problem on one mesh and measures the errors.
pub fn run_level(setup: &ConvergenceSetup, n: usize) -> Result<LevelErrors, VerificationError> {
    let mesh = BackgroundMesh::new(setup.bounds, n)?;
    let h = mesh.h();
    let disc = Discretization::build(&Sphere::new(1.0).expect("unit radius"), mesh, setup.cut)?;
    let problem = ManufacturedProblem::new(&setup.params);
    let c_star = problem.c_star();
    let mu_star = problem.mu_star();
    let t_final = setup.final_time;
    // c* grows in magnitude with t, so checking both ends covers the run
    for s in &disc.samples {
        problem.forcing_g1(&s.x, 0.0)?;
        problem.forcing_g1(&s.x, t_final)?;
    }
    let steps = (t_final / (setup.tau_factor * h * h)).ceil().max(1.0);
    let tau = t_final / steps;
    let schedule = Schedule::uniform(t_final, tau)?;

    let c0 = if setup.ritz_initial {
        solver::ritz_projection(
            &disc,
            |x| c_star.value(x, 0.0),
            |x| surface_gradient_ambient(&c_star, x, 0.0, &x.normalize()),
        )?
    } else {
        disc.interpolate(|x| c_star.value(x, 0.0), FieldRole::Concentration)
    };
    let init = ChState::initial(&disc, c0, &setup.params);
    let forcing = |x: &Vec3, t: f64| problem.forcing_g1(x, t).unwrap_or(f64::NAN);
    let mut sum_c = 0.0;
    let mut sum_mu = 0.0;
    let mut prev_t = 0.0;
    let outcome = solver::run(&disc, &setup.params, &schedule, init, Some(&forcing), |st| {
        let dt = st.t - prev_t;
        prev_t = st.t;
        let ec = l2_error(&disc, &st.c, |x| c_star.value(x, st.t));
        let em = l2_error(&disc, &st.mu, |x| mu_star.value(x, st.t));
        sum_c += dt * ec * ec;
        sum_mu += dt * em * em;
    });
    let (state, _) = outcome.into_result()?;
    let errors = LevelErrors {
        h,
        c_l2: l2_error(&disc, &state.c, |x| c_star.value(x, state.t)),
        mu_l2: l2_error(&disc, &state.mu, |x| mu_star.value(x, state.t)),
        c_l2l2: (sum_c / t_final).sqrt(),
        mu_l2l2: (sum_mu / t_final).sqrt(),
    };
    log::info!("level h = {h:.4}, tau = {tau:.3e}: {errors:?}");
    Ok(errors)
}

/// Runs [`run_level`] for every target mesh size.
pub fn run_convergence(
    setup: &ConvergenceSetup,
    target_h: &[f64],
) -> Result<ErrorReport, VerificationError> {
    let levels = target_h
        .iter()
        .map(|&h| run_level(setup, cells_for(&setup.bounds, h)))
        .collect::<Result<Vec<_>, _>>()?;
    ErrorReport::new(levels)
}

/// `‖π_h v − v‖_{Γ_h}` for `v = x₁x₂` on the unit sphere.
pub fn ritz_error(bounds: &Box3, n: usize) -> Result<(f64, f64), VerificationError> {
    let mesh = BackgroundMesh::new(*bounds, n)?;
    let h = mesh.h();
    let disc = Discretization::build(&Sphere::new(1.0).expect("unit radius"), mesh, CutOptions::default())?;
    let v = StaticField(|[x1, x2, _]: [Jet; 3]| x1 * x2);
    let p = solver::ritz_projection(
        &disc,
        |x| v.value(x, 0.0),
        |x| surface_gradient_ambient(&v, x, 0.0, &x.normalize()),
    )?;
    Ok((h, l2_error(&disc, &p, |x| v.value(x, 0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_sphere_points(count: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| loop {
                let v = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let r = v.norm();
                if r > 0.1 && r <= 1.0 {
                    break v / r;
                }
            })
            .collect()
    }

    fn monomial(i: usize, j: usize) -> StaticField<impl Fn([Jet; 3]) -> Jet + Sync> {
        StaticField(move |x: [Jet; 3]| x[i] * x[j])
    }

    #[test]
    fn tangential_gradient() {
        let f = StaticField(|[x1, _, _]: [Jet; 3]| x1);
        let pole = Vec3::z();
        assert_eq!(surface_gradient_ambient(&f, &pole, 0.0, &pole), Vec3::x());
        let eq = Vec3::x();
        assert!(surface_gradient_ambient(&f, &eq, 0.0, &eq).norm() < 1e-15);
        let g = StaticField(|[x1, x2, x3]: [Jet; 3]| x1 * x2 + x3 * x3 * x1);
        for x in random_sphere_points(100, 1) {
            assert!(surface_gradient_ambient(&g, &x, 0.0, &x).dot(&x).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_laplacian_eigenfunctions() {
        let c = StaticField(|_: [Jet; 3]| Jet::constant(3.0));
        let lin = StaticField(|[x1, _, _]: [Jet; 3]| x1);
        for x in random_sphere_points(50, 2) {
            assert!(surface_laplacian_sphere(&c, &x, 0.0).unwrap().abs() < 1e-14);
            assert!((surface_laplacian_sphere(&lin, &x, 0.0).unwrap() + 2.0 * x.x).abs() < 1e-12);
            // x_i x_j (i ≠ j) and x_i² − 1/3 are degree-two harmonics
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let l = surface_laplacian_sphere(&monomial(i, j), &x, 0.0).unwrap();
                assert!((l + 6.0 * x[i] * x[j]).abs() < 1e-10);
            }
            for i in 0..3 {
                let l = surface_laplacian_sphere(&monomial(i, i), &x, 0.0).unwrap();
                assert!((l + 6.0 * (x[i] * x[i] - 1.0 / 3.0)).abs() < 1e-10);
            }
        }
        assert!(matches!(
            surface_laplacian_sphere(&c, &Vec3::zeros(), 0.0),
            Err(VerificationError::Origin)
        ));
    }

    #[test]
    fn exact_concentration() {
        let c = ExactConcentration;
        assert!((c.value(&Vec3::x(), 0.0) - 0.1).abs() < 1e-15);
        let s = 1.0;
        let p = Vec3::new(s, s, 0.0);
        assert!((c.value(&p, 200.0) - 1.0).abs() < 1e-12);
        assert!((c.time_derivative(&Vec3::z(), 0.0) - 0.16).abs() < 1e-15);
        for x in random_sphere_points(50, 3) {
            let t = 0.37;
            let l = surface_laplacian_sphere(&c, &x, t).unwrap();
            assert!((l + 6.0 * amplitude(t) * x.x * x.y).abs() < 1e-10);
            let dt = 1e-6;
            let fd = (c.value(&x, t + dt) - c.value(&x, t - dt)) / (2.0 * dt);
            assert!((fd - c.time_derivative(&x, t)).abs() < 1e-8);
        }
    }

    #[test]
    fn exact_potential_solves_second_equation() {
        let p = ManufacturedProblem::new(&SchemeParams {
            epsilon: 0.1,
            ..SchemeParams::default()
        });
        for x in random_sphere_points(50, 4) {
            let t = 0.05;
            let c = p.c_star().value(&x, t);
            let lap_c = surface_laplacian_sphere(&p.c_star(), &x, t).unwrap();
            let mu = p.potential.df0(c) - p.epsilon * p.epsilon * lap_c;
            assert!((mu - p.mu_star().value(&x, t)).abs() < 1e-13);
        }
    }

    #[test]
    fn forcing_two_ways() {
        let p = ManufacturedProblem::new(&SchemeParams {
            epsilon: 0.1,
            ..SchemeParams::default()
        });
        for (k, x) in random_sphere_points(100, 5).iter().enumerate() {
            let t = 0.01 * k as f64;
            let a = p.forcing_g1(x, t).unwrap();
            let b = p.forcing_g1_by_hand(x, t).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
        // late times: only the spatial part remains
        let x = random_sphere_points(1, 6)[0];
        let g = p.forcing_g1(&x, 200.0).unwrap();
        let lap = surface_laplacian_sphere(&p.mu_star(), &x, 200.0).unwrap();
        assert!((g + lap).abs() < 1e-12);
        // outside the cutoff the forcing is refused
        let tight = ManufacturedProblem {
            potential: Potential::new(1.0001).unwrap(),
            ..p
        };
        let far = Vec3::new(1.2, 1.2, 0.0);
        assert!(matches!(
            tight.forcing_g1(&far, 100.0),
            Err(VerificationError::OutsideCutoff { .. })
        ));
    }

    #[test]
    fn residual_vanishes_under_fine_quadrature() {
        // ∫_Γ (c*_t − M Δ_Γ μ* − g₁) w ds on a fine cut surface with degree-6 rules
        let mesh = BackgroundMesh::new(Box3::cube(-1.25, 1.25).unwrap(), 16).unwrap();
        let disc = Discretization::build(
            &Sphere::new(1.0).unwrap(),
            mesh,
            CutOptions {
                surface_degree: 6,
                volume_degree: 1,
            },
        )
        .unwrap();
        let p = ManufacturedProblem::new(&SchemeParams {
            epsilon: 0.1,
            ..SchemeParams::default()
        });
        let t = 0.03;
        let w = |x: &Vec3| (x.x + 0.5 * x.y * x.z).sin();
        let total: f64 = disc
            .samples
            .iter()
            .map(|s| {
                let lap = surface_laplacian_sphere(&p.mu_star(), &s.x, t).unwrap();
                let r = p.c_star().time_derivative(&s.x, t) - lap - p.forcing_g1(&s.x, t).unwrap();
                s.weight * r * w(&s.x)
            })
            .sum();
        assert!(total.abs() < 1e-10);
    }

    #[test]
    fn eoc_and_report() {
        assert!((eoc(4.0, 1.0, 0.2, 0.1) - 2.0).abs() < 1e-15);
        assert!((eoc(4.0, 1.0, 0.4, 0.2) - 2.0).abs() < 1e-15);
        let lv = |h: f64| LevelErrors {
            h,
            c_l2: h * h,
            mu_l2: h * h,
            c_l2l2: h,
            mu_l2l2: h,
        };
        let r = ErrorReport::new(vec![lv(0.4), lv(0.2), lv(0.1)]).unwrap();
        let o = r.orders();
        assert_eq!(o.len(), 3);
        assert!(o[0].is_none());
        let f = r.finest_orders().unwrap();
        assert!((f.c_l2 - 2.0).abs() < 1e-12);
        assert!((f.c_l2l2 - 1.0).abs() < 1e-12);
        assert!((f.min() - 1.0).abs() < 1e-12);
        assert!(ErrorReport::new(vec![lv(0.1), lv(0.2)]).is_err());
    }

    #[test]
    fn error_norms_baseline() {
        let mesh = BackgroundMesh::new(Box3::cube(-1.25, 1.25).unwrap(), 10).unwrap();
        let disc =
            Discretization::build(&Sphere::new(1.0).unwrap(), mesh, CutOptions::default()).unwrap();
        let zero = disc.space.zeros(FieldRole::Generic);
        assert_eq!(l2_error(&disc, &zero, |_| 0.0), 0.0);
        let mut prev = f64::INFINITY;
        for n in [10, 20] {
            let mesh = BackgroundMesh::new(Box3::cube(-1.25, 1.25).unwrap(), n).unwrap();
            let d = Discretization::build(&Sphere::new(1.0).unwrap(), mesh, CutOptions::default())
                .unwrap();
            let c = ExactConcentration;
            let ch = d.interpolate(|x| c.value(x, 0.3), FieldRole::Generic);
            let e = l2_error(&d, &ch, |x| c.value(x, 0.3));
            assert!(e < prev / 3.0, "{e} {prev}");
            prev = e;
        }
    }

    #[test]
    fn ritz_error_decreases() {
        let b = Box3::cube(-1.25, 1.25).unwrap();
        let (h1, e1) = ritz_error(&b, 10).unwrap();
        let (h2, e2) = ritz_error(&b, 20).unwrap();
        assert!(eoc(e1, e2, h1, h2) > 1.5, "{e1} {e2}");
    }
}
