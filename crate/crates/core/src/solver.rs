//! Semi-implicit time stepping for the coupled `(c, μ)` system and the
//! stabilized Ritz projection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assembly::{assemble_forcing, assemble_nonlinear_load, Discretization};
use crate::mesh::Vec3;
use crate::potential::Potential;
use crate::space::{FieldRole, FieldVector};
use crate::sparse::{LuSolver, SparseError, SparseOperator};

/// Relative residual required of every linear solve.
pub const RESIDUAL_TOL: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid parameter: {0}")]
    Params(String),
    #[error("state contains non-finite values at t = {t}")]
    NonFinite { t: f64 },
    #[error(
        "factorization of the block system with tau = {tau} failed ({source}); \
         smallest surface measure of a dof is {min_dof_area:e}"
    )]
    Factorization {
        tau: f64,
        min_dof_area: f64,
        source: SparseError,
    },
    #[error("linear solve reached relative residual {residual:e} (required {RESIDUAL_TOL:e})")]
    Residual { residual: f64 },
    #[error("augmented Ritz system could not be solved: {0}")]
    Ritz(SparseError),
    #[error("field has {got} entries, space has {expected}")]
    Length { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub epsilon: f64,
    pub mobility: f64,
    pub beta_s: f64,
    pub potential: Potential,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            mobility: 1.0,
            beta_s: 2.0,
            potential: Potential::default(),
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.epsilon) {
            return Err(SolverError::Params(format!("epsilon = {}", self.epsilon)));
        }
        if !positive(self.mobility) {
            return Err(SolverError::Params(format!("mobility = {}", self.mobility)));
        }
        if !(self.beta_s.is_finite() && self.beta_s >= 0.0) {
            return Err(SolverError::Params(format!("beta_s = {}", self.beta_s)));
        }
        Ok(())
    }

    /// Whether `β_s ≥ L/2`, the condition for unconditional energy decay.
    pub fn is_energy_stable(&self) -> bool {
        self.beta_s >= 0.5 * self.potential.lipschitz()
    }
}

/// Piecewise-constant step sizes: `(t_end, tau)` pairs, intervals starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    intervals: Vec<(f64, f64)>,
}

/// One time step: the new time and the step size used to reach it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t: f64,
    pub tau: f64,
}

impl Schedule {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self, SolverError> {
        let mut prev = 0.0;
        for &(t_end, tau) in &intervals {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(SolverError::Params(format!("tau = {tau}")));
            }
            if !(t_end.is_finite() && t_end > prev) {
                return Err(SolverError::Params(format!(
                    "interval end {t_end} does not exceed {prev}"
                )));
            }
            prev = t_end;
        }
        Ok(Self { intervals })
    }

    /// The five-interval schedule up to `t = 10⁴`.
    pub fn staged() -> Self {
        Self {
            intervals: vec![
                (0.5, 0.01),
                (5.0, 0.1),
                (500.0, 1.0),
                (5000.0, 10.0),
                (10000.0, 100.0),
            ],
        }
    }

    pub fn uniform(t_final: f64, tau: f64) -> Result<Self, SolverError> {
        Self::new(vec![(t_final, tau)])
    }

    pub fn empty() -> Self {
        Self { intervals: vec![] }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn final_time(&self) -> f64 {
        self.intervals.last().map_or(0.0, |i| i.0)
    }

    pub fn truncated(&self, t_final: f64) -> Self {
        let mut out = Vec::new();
        for &(t_end, tau) in &self.intervals {
            if t_end >= t_final {
                if t_final > 0.0 {
                    out.push((t_final, tau));
                }
                break;
            }
            out.push((t_end, tau));
        }
        Self { intervals: out }
    }

    /// All steps. An interval of length `len` gets `round(len/τ)` steps when
    /// that ratio is an integer up to rounding, otherwise `ceil(len/τ)` steps
    /// of equal size.
    pub fn steps(&self) -> Vec<Step> {
        let mut out = Vec::new();
        let mut start = 0.0;
        for &(t_end, tau) in &self.intervals {
            let len = t_end - start;
            let ratio = len / tau;
            let exact = (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0);
            let k = if exact { ratio.round() } else { ratio.ceil() }.max(1.0) as usize;
            let dt = if exact { tau } else { len / k as f64 };
            for j in 1..=k {
                let t = if j == k { t_end } else { start + j as f64 * len / k as f64 };
                out.push(Step { t, tau: dt });
            }
            start = t_end;
        }
        out
    }

    pub fn distinct_taus(&self) -> usize {
        let steps = self.steps();
        let mut n = 0;
        let mut last = None;
        for s in steps {
            if last != Some(s.tau) {
                n += 1;
                last = Some(s.tau);
            }
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub t: f64,
    pub energy: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChState {
    pub c: FieldVector,
    pub mu: FieldVector,
    pub t: f64,
    pub step: usize,
    pub history: Vec<HistoryEntry>,
}

impl ChState {
    /// Initial state with `μ = 0` and one history entry at `t = 0`.
    pub fn initial(disc: &Discretization, c: FieldVector, params: &SchemeParams) -> Self {
        let entry = HistoryEntry {
            t: 0.0,
            energy: disc.energy(&c, params.epsilon, &params.potential),
            mass: disc.total_mass(&c),
        };
        Self {
            mu: disc.space.zeros(FieldRole::Potential),
            c: FieldVector::new(c.values, FieldRole::Concentration),
            t: 0.0,
            step: 0,
            history: vec![entry],
        }
    }
}

/// The factorized block matrix for one step size:
/// `[ M/τ , M_mob A_h ; β_s M + ε² A_h , −M ]`.
#[derive(Debug)]
pub struct BlockSystem {
    tau: f64,
    n: usize,
    matrix: SparseOperator,
    lu: LuSolver,
}

impl BlockSystem {
    pub fn new(disc: &Discretization, params: &SchemeParams, tau: f64) -> Result<Self, SolverError> {
        let n = disc.n_dof();
        let mass = &disc.mass;
        let a_h = disc.a_h();
        let eps2 = params.epsilon * params.epsilon;
        let mut t = Vec::with_capacity(4 * (mass.nnz() + a_h.nnz()));
        t.extend(mass.triplets().map(|(i, j, v)| (i, j, v / tau)));
        t.extend(a_h.triplets().map(|(i, j, v)| (i, n + j, params.mobility * v)));
        t.extend(mass.triplets().map(|(i, j, v)| (n + i, j, params.beta_s * v)));
        t.extend(a_h.triplets().map(|(i, j, v)| (n + i, j, eps2 * v)));
        t.extend(mass.triplets().map(|(i, j, v)| (n + i, n + j, -v)));
        let matrix = SparseOperator::from_triplets(2 * n, t).map_err(|e| factor_error(disc, tau, e))?;
        let lu = LuSolver::factorize(2 * n, &matrix.triplets().collect::<Vec<_>>())
            .map_err(|e| factor_error(disc, tau, e))?;
        Ok(Self { tau, n, matrix, lu })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Direct solve followed by iterative refinement if the residual is large.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        solve_refined(&self.matrix, &self.lu, rhs).map_err(|e| match e {
            Refine::Sparse(source) => SolverError::Factorization {
                tau: self.tau,
                min_dof_area: f64::NAN,
                source,
            },
            Refine::Residual(residual) => SolverError::Residual { residual },
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }
}

fn factor_error(disc: &Discretization, tau: f64, source: SparseError) -> SolverError {
    let ones = vec![1.0; disc.n_dof()];
    let min_dof_area = disc.mass.matvec(&ones).into_iter().fold(f64::INFINITY, f64::min);
    SolverError::Factorization {
        tau,
        min_dof_area,
        source,
    }
}

enum Refine {
    Sparse(SparseError),
    Residual(f64),
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn solve_refined(a: &SparseOperator, lu: &LuSolver, rhs: &[f64]) -> Result<Vec<f64>, Refine> {
    let scale = norm(rhs);
    let mut x = lu.solve(rhs).map_err(Refine::Sparse)?;
    let mut rel = f64::INFINITY;
    for _ in 0..=MAX_REFINEMENTS {
        let ax = a.matvec(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
        let rn = norm(&r);
        rel = if scale > 0.0 { rn / scale } else { rn };
        if rel <= RESIDUAL_TOL {
            return Ok(x);
        }
        let dx = lu.solve(&r).map_err(Refine::Sparse)?;
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
    }
    Err(Refine::Residual(rel))
}

/// Space-time forcing added to the first equation.
pub type Forcing<'a> = &'a (dyn Fn(&Vec3, f64) -> f64 + Sync);

/// One step of the scheme from `state` to `t_next` with the factorized system.
pub fn step(
    disc: &Discretization,
    params: &SchemeParams,
    system: &BlockSystem,
    state: &ChState,
    t_next: f64,
    forcing: Option<Forcing<'_>>,
) -> Result<ChState, SolverError> {
    let n = disc.n_dof();
    if state.c.len() != n {
        return Err(SolverError::Length {
            expected: n,
            got: state.c.len(),
        });
    }
    if state.c.values.iter().chain(&state.mu.values).any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite { t: state.t });
    }
    let tau = system.tau();
    let mc = disc.mass.matvec(&state.c.values);
    let b = assemble_nonlinear_load(&disc.space, &disc.samples, &state.c, &params.potential);
    let mut rhs = vec![0.0; 2 * n];
    for i in 0..n {
        rhs[i] = mc[i] / tau;
        rhs[n + i] = params.beta_s * mc[i] - b[i];
    }
    if let Some(g) = forcing {
        let f = assemble_forcing(&disc.space, &disc.samples, g, t_next);
        rhs[..n].iter_mut().zip(&f).for_each(|(r, v)| *r += v);
    }
    let x = system.solve(&rhs)?;
    let c = FieldVector::new(x[..n].to_vec(), FieldRole::Concentration);
    let mu = FieldVector::new(x[n..].to_vec(), FieldRole::Potential);
    let mut history = state.history.clone();
    history.push(HistoryEntry {
        t: t_next,
        energy: disc.energy(&c, params.epsilon, &params.potential),
        mass: disc.total_mass(&c),
    });
    Ok(ChState {
        c,
        mu,
        t: t_next,
        step: state.step + 1,
        history,
    })
}

/// Result of [`run`]; `error` is set when stepping stopped early, and `state`
/// then holds the last successful step with its history.
#[derive(Debug)]
pub struct RunOutcome {
    pub state: ChState,
    pub factorizations: usize,
    pub error: Option<SolverError>,
}

impl RunOutcome {
    pub fn into_result(self) -> Result<(ChState, usize), SolverError> {
        match self.error {
            None => Ok((self.state, self.factorizations)),
            Some(e) => Err(e),
        }
    }
}

/// Steps `initial` through `schedule`. The block system is refactorized each
/// time τ changes. `observer` sees every new state.
pub fn run(
    disc: &Discretization,
    params: &SchemeParams,
    schedule: &Schedule,
    initial: ChState,
    forcing: Option<Forcing<'_>>,
    mut observer: impl FnMut(&ChState),
) -> RunOutcome {
    if let Err(e) = params.validate() {
        return RunOutcome {
            state: initial,
            factorizations: 0,
            error: Some(e),
        };
    }
    let mut state = initial;
    let mut system: Option<BlockSystem> = None;
    let mut factorizations = 0;
    for s in schedule.steps() {
        if system.as_ref().is_none_or(|sys| sys.tau() != s.tau) {
            // free the old factorization before building the next one
            drop(system.take());
            match BlockSystem::new(disc, params, s.tau) {
                Ok(sys) => {
                    factorizations += 1;
                    log::debug!("factorized block system for tau = {}", s.tau);
                    system = Some(sys);
                }
                Err(e) => {
                    return RunOutcome {
                        state,
                        factorizations,
                        error: Some(e),
                    }
                }
            }
        }
        match step(disc, params, system.as_ref().unwrap(), &state, s.t, forcing) {
            Ok(next) => {
                state = next;
                observer(&state);
            }
            Err(e) => {
                return RunOutcome {
                    state,
                    factorizations,
                    error: Some(e),
                }
            }
        }
    }
    RunOutcome {
        state,
        factorizations,
        error: None,
    }
}

/// `π_h v`: solves `a_h(π_h v, φ_i) = ∫_{Γ_h} ∇_Γ v · P_h∇φ_i` with the
/// constraint `∫_{Γ_h} π_h v = ∫_{Γ_h} v`.
///
/// `surface_grad` must return the tangential gradient `P∇v` for the exact normal.
pub fn ritz_projection(
    disc: &Discretization,
    value: impl Fn(&Vec3) -> f64,
    surface_grad: impl Fn(&Vec3) -> Vec3,
) -> Result<FieldVector, SolverError> {
    let n = disc.n_dof();
    let mut rhs = vec![0.0; n + 1];
    let mut mean = 0.0;
    for s in &disc.samples {
        let e = &disc.band.elements[s.element];
        let g = surface_grad(&s.x);
        for k in 0..4 {
            rhs[s.dofs[k]] += s.weight * g.dot(&e.frame.project(&e.basis_gradients[k]));
        }
        mean += s.weight * value(&s.x);
    }
    rhs[n] = mean;
    let m = disc.mass.matvec(&vec![1.0; n]);
    let mut t: Vec<(usize, usize, f64)> = disc.a_h().triplets().collect();
    for (i, &mi) in m.iter().enumerate() {
        t.push((i, n, mi));
        t.push((n, i, mi));
    }
    let a = SparseOperator::from_triplets(n + 1, t).map_err(SolverError::Ritz)?;
    let lu = LuSolver::factorize(n + 1, &a.triplets().collect::<Vec<_>>()).map_err(SolverError::Ritz)?;
    let x = solve_refined(&a, &lu, &rhs).map_err(|e| match e {
        Refine::Sparse(s) => SolverError::Ritz(s),
        Refine::Residual(residual) => SolverError::Residual { residual },
    })?;
    Ok(FieldVector::new(x[..n].to_vec(), FieldRole::Generic))
}

/// Independent uniform values in `[−1, 1]` per dof from a seeded ChaCha8 stream.
pub fn random_initial_condition(n_dof: usize, seed: u64) -> FieldVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FieldVector::new(
        (0..n_dof).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        FieldRole::Concentration,
    )
}
