//! Time evolution of the master equation and two-time correlations.

mod correlation;
mod generator;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

pub use correlation::{reference_correlation, two_time_correlation, CorrelationGrid, CorrelationRun, TimeOrder};
pub use generator::{liouvillian_apply, Generator};

use crate::error::{check_dim, Error, Result};
use crate::hilbert::{expectation, ladder_operators, DensityMatrix, HilbertSpace, Ladder, OperatorMatrix};
use crate::model::{build_dissipators, build_hamiltonian, DissipatorSpec, ModelParams};

/// Trace drift that counts as a blown-up integration.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Classical fourth-order Runge-Kutta on the sparse generator.
    Rk4,
    /// `exp(L·dt)` computed once as a dense matrix, then applied per step.
    DensePropagator,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::DensePropagator => "dense",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "rk4" => Some(Method::Rk4),
            "dense" => Some(Method::DensePropagator),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    /// Upper bound on the horizon.
    pub t_max: f64,
    pub method: Method,
    /// Stop once `⟨σ₁†σ₁ + σ₂†σ₂ + a†a⟩` falls below this. Zero disables the
    /// adaptive horizon.
    pub leak_tolerance: f64,
    /// Memory allowed for the correlation grid, in bytes.
    pub grid_memory_budget: usize,
    /// Diagonalize every snapshot to track the smallest eigenvalue.
    pub check_positivity: bool,
    /// RK4 stages per output step; the snapshot mesh stays at `dt`.
    pub substeps: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            t_max: 250.0,
            method: Method::Rk4,
            leak_tolerance: 1e-4,
            grid_memory_budget: 2048 << 20,
            check_positivity: true,
            substeps: 8,
        }
    }
}

impl EvolutionConfig {
    /// Largest frequency scale the step has to resolve.
    pub fn frequency_scale(params: &ModelParams) -> f64 {
        [1.0, params.g_a, params.g_m, params.delta_ac.abs(), params.j.abs()]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(format!("numerics.dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return Err(Error::config(format!(
                "numerics.t_max = {} must be at least numerics.dt = {}",
                self.t_max, self.dt
            )));
        }
        let limit = 0.1 / Self::frequency_scale(params);
        if self.dt > limit {
            return Err(Error::config(format!(
                "numerics.dt = {} exceeds the stability guard {limit:.6} for these couplings",
                self.dt
            )));
        }
        if self.substeps == 0 {
            return Err(Error::config("numerics.substeps must be at least 1"));
        }
        if !(self.leak_tolerance >= 0.0) {
            return Err(Error::config("numerics.leak_tolerance must be non-negative"));
        }
        Ok(())
    }

    /// Number of steps that fit in `t_max`.
    pub fn max_steps(&self) -> usize {
        (self.t_max / self.dt + 1e-9).floor() as usize
    }
}

/// Everything needed to integrate one parameter point.
#[derive(Clone, Debug)]
pub struct OpenSystem {
    pub space: HilbertSpace,
    pub hamiltonian: OperatorMatrix,
    pub dissipators: DissipatorSpec,
    pub ladder: Ladder,
    /// `σ₁†σ₁ + σ₂†σ₂ + a†a`
    pub excitation: OperatorMatrix,
    generator: Generator,
}

impl OpenSystem {
    pub fn new(params: &ModelParams, space: HilbertSpace) -> Result<Self> {
        let hamiltonian = build_hamiltonian(params, &space);
        let dissipators = build_dissipators(params, &space)?;
        Self::from_parts(space, hamiltonian, dissipators)
    }

    pub fn from_parts(space: HilbertSpace, hamiltonian: OperatorMatrix, dissipators: DissipatorSpec) -> Result<Self> {
        check_dim(space.dim(), hamiltonian.dim())?;
        let ladder = ladder_operators(&space);
        let excitation = ladder.excitation_number();
        let generator = Generator::new(&hamiltonian, &dissipators)?;
        Ok(Self { space, hamiltonian, dissipators, ladder, excitation, generator })
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }
}

/// One-step map for `ẋ = S x`.
pub struct Propagator {
    kind: Kind,
    h: f64,
    substeps: usize,
    k: Vec<C64>,
    tmp: Vec<C64>,
    acc: Vec<C64>,
}

enum Kind {
    Rk4(Generator),
    Dense(DMatrix<C64>),
}

impl Propagator {
    pub fn new(generator: &Generator, method: Method, dt: f64) -> Self {
        Self::with_substeps(generator, method, dt, 1)
    }

    /// As [`Propagator::new`], but an RK4 step of `dt` is split into
    /// `substeps` equal stages. The dense backend is exact and ignores it.
    pub fn with_substeps(generator: &Generator, method: Method, dt: f64, substeps: usize) -> Self {
        let n = generator.dim();
        let substeps = substeps.max(1);
        let kind = match method {
            Method::Rk4 => Kind::Rk4(generator.clone()),
            Method::DensePropagator => Kind::Dense((generator.to_dense() * C64::new(dt, 0.0)).exp()),
        };
        Self { kind, h: dt / substeps as f64, substeps, k: vec![C64::default(); n], tmp: vec![C64::default(); n], acc: vec![C64::default(); n] }
    }

    pub fn step(&mut self, x: &mut [C64]) {
        match &self.kind {
            Kind::Rk4(_) => {
                for _ in 0..self.substeps {
                    self.rk4_stage(x);
                }
            }
            Kind::Dense(p) => {
                for (i, out) in self.tmp.iter_mut().enumerate() {
                    let mut s = C64::default();
                    for (j, v) in x.iter().enumerate() {
                        s += p[(i, j)] * v;
                    }
                    *out = s;
                }
                x.copy_from_slice(&self.tmp);
            }
        }
    }

    fn rk4_stage(&mut self, x: &mut [C64]) {
        match &self.kind {
            Kind::Dense(_) => unreachable!("dense propagation has no stages"),
            Kind::Rk4(gen) => {
                let h = self.h;
                // k1
                gen.apply_vec(x, &mut self.k);
                for i in 0..x.len() {
                    self.acc[i] = self.k[i];
                    self.tmp[i] = x[i] + self.k[i] * (0.5 * h);
                }
                // k2
                gen.apply_vec(&self.tmp, &mut self.k);
                for i in 0..x.len() {
                    self.acc[i] += self.k[i] * 2.0;
                    self.tmp[i] = x[i] + self.k[i] * (0.5 * h);
                }
                // k3
                gen.apply_vec(&self.tmp, &mut self.k);
                for i in 0..x.len() {
                    self.acc[i] += self.k[i] * 2.0;
                    self.tmp[i] = x[i] + self.k[i] * h;
                }
                // k4
                gen.apply_vec(&self.tmp, &mut self.k);
                for i in 0..x.len() {
                    self.acc[i] += self.k[i];
                    x[i] += self.acc[i] * (h / 6.0);
                }
            }
        }
    }
}

/// Running physicality diagnostics of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CptpStats {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// `None` when positivity tracking is disabled.
    pub min_eigenvalue: Option<f64>,
}

impl CptpStats {
    fn new(track_positivity: bool) -> Self {
        Self {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: track_positivity.then_some(f64::INFINITY),
        }
    }

    fn observe(&mut self, rho: &DensityMatrix) {
        self.max_trace_error = self.max_trace_error.max((rho.trace() - C64::new(1.0, 0.0)).norm());
        let n = rho.nrows();
        let mut herm: f64 = 0.0;
        for c in 0..n {
            for r in c..n {
                herm = herm.max((rho[(r, c)] - rho[(c, r)].conj()).norm());
            }
        }
        self.max_hermiticity_error = self.max_hermiticity_error.max(herm);
        if let Some(min) = self.min_eigenvalue.as_mut() {
            let sym = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
            let lowest = SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            *min = min.min(lowest);
        }
    }

    /// Fold another run's diagnostics into this one.
    pub fn merge(&mut self, other: &CptpStats) {
        self.max_trace_error = self.max_trace_error.max(other.max_trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(other.max_hermiticity_error);
        self.min_eigenvalue = match (self.min_eigenvalue, other.min_eigenvalue) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySummary {
    /// Number of snapshots, `t_k = k·dt` for `k < n_t`.
    pub n_t: usize,
    pub dt: f64,
    /// Time of the last snapshot.
    pub horizon: f64,
    pub residual_excitation: f64,
    pub stopped_by_leak: bool,
    pub cptp: CptpStats,
}

/// Integrates from `rho0`, handing every snapshot to `observe` in time order.
pub fn evolve_with<F>(
    rho0: &DensityMatrix,
    system: &OpenSystem,
    config: &EvolutionConfig,
    mut observe: F,
) -> Result<TrajectorySummary>
where
    F: FnMut(usize, &DensityMatrix),
{
    let d = system.space.dim();
    check_dim(d, rho0.nrows())?;
    check_dim(d, rho0.ncols())?;
    let trace0 = rho0.trace();
    if (trace0 - C64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::numerical(format!("initial state has trace {trace0}")));
    }
    if (rho0 - rho0.adjoint()).iter().any(|v| v.norm() > 1e-12) {
        return Err(Error::numerical("initial state is not Hermitian"));
    }

    let max_steps = config.max_steps();
    let mut stepper = Propagator::with_substeps(system.generator(), config.method, config.dt, config.substeps);
    let mut rho = rho0.clone();
    let mut stats = CptpStats::new(config.check_positivity);
    let mut k = 0;
    loop {
        stats.observe(&rho);
        observe(k, &rho);
        let excitation = expectation(&system.excitation, &rho)?.re;
        let leaked = excitation < config.leak_tolerance;
        if leaked || k == max_steps {
            return Ok(TrajectorySummary {
                n_t: k + 1,
                dt: config.dt,
                horizon: k as f64 * config.dt,
                residual_excitation: excitation,
                stopped_by_leak: leaked,
                cptp: stats,
            });
        }
        stepper.step(rho.as_mut_slice());
        k += 1;
        let tr = rho.trace();
        if !(tr.re.is_finite() && tr.im.is_finite()) || (tr - trace0).norm() > TRACE_DRIFT_LIMIT {
            return Err(Error::numerical(format!(
                "integration unstable at t = {:.4} (trace {tr}); reduce numerics.dt",
                k as f64 * config.dt
            )));
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<DensityMatrix>,
    pub summary: TrajectorySummary,
}

/// Integrates and keeps every snapshot. Intended for small spaces.
pub fn evolve(rho0: &DensityMatrix, system: &OpenSystem, config: &EvolutionConfig) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    let summary = evolve_with(rho0, system, config, |_, rho| snapshots.push(rho.clone()))?;
    Ok(Trajectory { snapshots, summary })
}

/// Runs both propagation backends side by side on a small copy of the model
/// and returns their largest disagreement. Errors if it exceeds `1e-8`.
pub fn backend_smoke_test(params: &ModelParams) -> Result<f64> {
    let space = HilbertSpace::new(1, 1, Some(1))?;
    let cold = ModelParams { mbar: 0.0, ..params.clone() };
    let system = OpenSystem::new(&cold, space)?;
    let rho0 = crate::model::initial_state(&cold, &system.space, crate::model::InitialExcitation::Atom1)?;
    let dt = 0.002;
    let mut rk = Propagator::new(system.generator(), Method::Rk4, dt);
    let mut dense = Propagator::new(system.generator(), Method::DensePropagator, dt);
    let mut x = rho0.as_slice().to_vec();
    let mut y = x.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        rk.step(&mut x);
        dense.step(&mut y);
        worst = x.iter().zip(&y).fold(worst, |m, (a, b)| m.max((a - b).norm()));
    }
    if !(worst < 1e-8) {
        return Err(Error::numerical(format!("propagator backends disagree by {worst:e}")));
    }
    Ok(worst)
}
