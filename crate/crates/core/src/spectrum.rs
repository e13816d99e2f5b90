//! Filtered counting rate of a Lorentzian detector and the detuning sweep.
//!
//! With `z = Γ − iΔ` the detector at detuning `Δ` reports
//! `N(T) = κΓ² ∬₀^T e^{−z(T−t′)} e^{−z̄(T−t″)} C(t′,t″) dt′dt″`.
//! Trapezoid quadrature on the grid, together with the Hermitian symmetry of
//! `C`, gives `N` at every node `t_m` in a single pass over the lower
//! triangle:
//!
//! ```text
//! ρ_m     = Σ_{k<m} a_k C[m][k] e^{−z̄(t_m − t_k)}      (a_0 = ½, a_k = 1)
//! N(t_m)  = κΓ²dt² (S_m + Re ρ_m + C[m][m]/4)
//! S_{m+1} = e^{−2Γdt} (S_m + a_m² C[m][m] + 2a_m Re ρ_m)
//! ```

use rayon::prelude::*;

use crate::dressed::AXIS_SIGN;
use crate::dynamics::{
    backend_smoke_test, two_time_correlation, CorrelationGrid, CorrelationRun, EvolutionConfig, OpenSystem,
    TrajectorySummary,
};
use crate::error::{Error, Result};
use crate::hilbert::Truncation;
use crate::model::{initial_state, InitialExcitation, ModelParams};

/// Detunings handled per pass over the grid.
const BLOCK: usize = 8;

/// How far a requested time may sit from a grid node, in steps.
const NODE_SNAP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct FilterParams {
    /// Filter bandwidth `Γ`.
    pub gamma: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub n_points: usize,
    /// Peaks below this fraction of the global maximum are ignored.
    pub peak_threshold: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { gamma: 0.01, delta_min: -8.0, delta_max: 8.0, n_points: 321, peak_threshold: 0.02 }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::config(format!("filter.Gamma must be positive, got {}", self.gamma)));
        }
        if !(self.delta_min.is_finite() && self.delta_max.is_finite() && self.delta_min < self.delta_max) {
            return Err(Error::config(format!(
                "filter.delta_min = {} must be below filter.delta_max = {}",
                self.delta_min, self.delta_max
            )));
        }
        if self.n_points < 2 {
            return Err(Error::config("filter.n_points must be at least 2"));
        }
        if !(self.peak_threshold > 0.0 && self.peak_threshold < 1.0) {
            return Err(Error::config("filter.peak_threshold must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.delta_max - self.delta_min) / (self.n_points - 1) as f64
    }

    pub fn deltas(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_points)
            .map(|i| if i + 1 == self.n_points { self.delta_max } else { self.delta_min + i as f64 * h })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumPoint {
    pub delta: f64,
    /// `N(T; Δ, Γ)` at the horizon, clipped at zero.
    pub intensity: f64,
    /// `∫₀^T N(t; Δ, Γ) dt`.
    pub integrated_counts: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
    /// Full width at half maximum, measured on the sampled curve.
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunInfo {
    pub n_t: usize,
    pub dt: f64,
    pub grid_bytes: usize,
    /// Absent when the grid was loaded from a dump.
    pub trajectory: Option<TrajectorySummary>,
    pub backend_deviation: Option<f64>,
    /// Most negative intensity before clipping.
    pub min_raw_intensity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    pub points: Vec<SpectrumPoint>,
    /// Evaluation time `T`.
    pub horizon: f64,
    pub params: ModelParams,
    pub filter: FilterParams,
    pub peaks: Vec<Peak>,
    pub info: RunInfo,
}

impl SpectrumResult {
    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta).collect()
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.intensity).collect()
    }

    pub fn max_intensity(&self) -> f64 {
        self.points.iter().map(|p| p.intensity).fold(0.0, f64::max)
    }

    pub fn total_counts(&self) -> f64 {
        self.points.iter().map(|p| p.integrated_counts).sum()
    }
}

fn node_index(grid: &CorrelationGrid, t: f64) -> Result<usize> {
    let x = t / grid.dt();
    let n = x.round();
    if !(n >= 0.0) || (x - n).abs() > NODE_SNAP {
        return Err(Error::numerical(format!(
            "evaluation time {t} is not a node of the grid with dt = {}",
            grid.dt()
        )));
    }
    let n = n as usize;
    if n >= grid.n_t() {
        return Err(Error::numerical(format!(
            "evaluation time {t} lies beyond the grid horizon {}",
            grid.horizon()
        )));
    }
    Ok(n)
}

/// `N(T; Δ, Γ)` straight from the double trapezoid sum over the grid.
pub fn filtered_counting_rate(grid: &CorrelationGrid, delta: f64, gamma: f64, t: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::config(format!("filter bandwidth must be positive, got {gamma}")));
    }
    let n = node_index(grid, t)?;
    if n == 0 {
        return Ok(0.0);
    }
    let dt = grid.dt();
    let z = num_complex::Complex64::new(gamma, -delta);
    let w: Vec<_> = (0..=n)
        .map(|j| {
            let trap = if j == 0 || j == n { 0.5 } else { 1.0 };
            (-z * ((n - j) as f64 * dt)).exp() * trap
        })
        .collect();
    let mut diag = 0.0;
    let mut lower = num_complex::Complex64::default();
    for j in 0..=n {
        let row = grid.row(j);
        diag += w[j].norm_sqr() * row[j].re;
        for k in 0..j {
            lower += w[j] * w[k].conj() * row[k];
        }
    }
    Ok(grid.kappa * gamma * gamma * dt * dt * (diag + 2.0 * lower.re))
}

/// `N(t_m; Δ, Γ)` for every node of the grid.
pub fn counting_rate_series(grid: &CorrelationGrid, delta: f64, gamma: f64) -> Vec<f64> {
    let mut out = sweep_block(grid, &[delta], gamma);
    out.pop().unwrap()
}

/// Runs the node recursion for up to [`BLOCK`] detunings at once.
fn sweep_block(grid: &CorrelationGrid, deltas: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    let n_t = grid.n_t();
    let dt = grid.dt();
    let nb = deltas.len();
    debug_assert!(nb <= BLOCK);
    // phase[n·BLOCK + d] = e^{−z̄_d n dt}
    let mut phase_re = vec![0.0; n_t * BLOCK];
    let mut phase_im = vec![0.0; n_t * BLOCK];
    for n in 0..n_t {
        let t = n as f64 * dt;
        let decay = (-gamma * t).exp();
        for (d, delta) in deltas.iter().enumerate() {
            let (s, c) = (-delta * t).sin_cos();
            phase_re[n * BLOCK + d] = decay * c;
            phase_im[n * BLOCK + d] = decay * s;
        }
    }
    let shrink = (-2.0 * gamma * dt).exp();
    let scale = grid.kappa * gamma * gamma * dt * dt;
    let mut running = [0.0; BLOCK];
    let mut series = vec![Vec::with_capacity(n_t); nb];
    for m in 0..n_t {
        let row = grid.row(m);
        let mut acc = [0.0; BLOCK];
        if m > 0 {
            let (c0, base) = (row[0] * 0.5, m * BLOCK);
            for d in 0..BLOCK {
                acc[d] += c0.re * phase_re[base + d] - c0.im * phase_im[base + d];
            }
            for k in 1..m {
                let c = row[k];
                let base = (m - k) * BLOCK;
                let pr = &phase_re[base..base + BLOCK];
                let pi = &phase_im[base..base + BLOCK];
                for d in 0..BLOCK {
                    acc[d] += c.re * pr[d] - c.im * pi[d];
                }
            }
        }
        let diag = row[m].re;
        let weight = if m == 0 { 0.5 } else { 1.0 };
        for d in 0..nb {
            let value = if m == 0 { 0.0 } else { scale * (running[d] + acc[d] + 0.25 * diag) };
            series[d].push(value);
            running[d] = shrink * (running[d] + weight * weight * diag + 2.0 * weight * acc[d]);
        }
    }
    series
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

/// Sweeps the filter over `filter.deltas()`, evaluating at the last grid node.
/// Returns the points and the smallest unclipped intensity.
pub fn spectrum_from_grid(grid: &CorrelationGrid, filter: &FilterParams) -> Result<(Vec<SpectrumPoint>, f64)> {
    filter.validate()?;
    let deltas = filter.deltas();
    let blocks: Vec<Vec<SpectrumPoint>> = deltas
        .par_chunks(BLOCK)
        .map(|chunk| {
            sweep_block(grid, chunk, filter.gamma)
                .into_iter()
                .zip(chunk)
                .map(|(series, &delta)| SpectrumPoint {
                    delta,
                    intensity: *series.last().unwrap(),
                    integrated_counts: trapezoid(&series, grid.dt()),
                })
                .collect()
        })
        .collect();
    let mut points: Vec<SpectrumPoint> = blocks.into_iter().flatten().collect();
    let min_raw = points.iter().map(|p| p.intensity).fold(f64::INFINITY, f64::min);
    for p in &mut points {
        p.intensity = p.intensity.max(0.0);
        p.integrated_counts = p.integrated_counts.max(0.0);
    }
    Ok((points, min_raw))
}

/// A simulated correlation grid plus the backend cross-check.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub run: CorrelationRun,
    pub backend_deviation: f64,
}

pub fn simulate(
    params: &ModelParams,
    truncation: &Truncation,
    excitation: InitialExcitation,
    numerics: &EvolutionConfig,
) -> Result<Simulation> {
    params.validate()?;
    numerics.validate(params)?;
    let backend_deviation = backend_smoke_test(params)?;
    let system = OpenSystem::new(params, truncation.build()?)?;
    let rho0 = initial_state(params, &system.space, excitation)?;
    let run = two_time_correlation(&rho0, &system, numerics)?;
    Ok(Simulation { run, backend_deviation })
}

/// Turns a grid into a full result with peak annotations.
pub fn assemble(
    grid: &CorrelationGrid,
    params: &ModelParams,
    filter: &FilterParams,
    trajectory: Option<TrajectorySummary>,
    backend_deviation: Option<f64>,
) -> Result<SpectrumResult> {
    let (points, min_raw_intensity) = spectrum_from_grid(grid, filter)?;
    let peaks = find_peaks(&points, filter.peak_threshold)?;
    Ok(SpectrumResult {
        points,
        horizon: grid.horizon(),
        params: params.clone(),
        filter: filter.clone(),
        peaks,
        info: RunInfo {
            n_t: grid.n_t(),
            dt: grid.dt(),
            grid_bytes: CorrelationGrid::memory_bytes(grid.n_t()),
            trajectory,
            backend_deviation,
            min_raw_intensity,
        },
    })
}

/// Simulates once and sweeps the filter over the whole detuning range.
pub fn stationary_spectrum(
    params: &ModelParams,
    truncation: &Truncation,
    excitation: InitialExcitation,
    filter: &FilterParams,
    numerics: &EvolutionConfig,
) -> Result<SpectrumResult> {
    filter.validate()?;
    let sim = simulate(params, truncation, excitation, numerics)?;
    assemble(&sim.run.grid, params, filter, Some(sim.run.trajectory.clone()), Some(sim.backend_deviation))
}

/// Local maxima above `min_height_fraction` of the global maximum, refined by
/// a parabola through the three samples around each maximum.
pub fn find_peaks(points: &[SpectrumPoint], min_height_fraction: f64) -> Result<Vec<Peak>> {
    if points.len() < 3 {
        return Err(Error::config(format!("peak search needs at least 3 points, got {}", points.len())));
    }
    if !(min_height_fraction > 0.0 && min_height_fraction < 1.0) {
        return Err(Error::config("peak threshold must lie in (0, 1)"));
    }
    let y: Vec<f64> = points.iter().map(|p| p.intensity).collect();
    let x: Vec<f64> = points.iter().map(|p| p.delta).collect();
    let top = y.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(Vec::new());
    }
    let floor = min_height_fraction * top;
    let mut peaks = Vec::new();
    for i in 1..y.len() - 1 {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] >= floor) {
            continue;
        }
        let h = x[i + 1] - x[i];
        let curvature = y[i - 1] - 2.0 * y[i] + y[i + 1];
        let (offset, height) = if curvature < 0.0 {
            let s = 0.5 * (y[i - 1] - y[i + 1]) / curvature;
            (s, y[i] - 0.25 * (y[i - 1] - y[i + 1]) * s)
        } else {
            (0.0, y[i])
        };
        peaks.push(Peak { position: x[i] + offset * h, height, width: half_width(&x, &y, i, height) });
    }
    Ok(peaks)
}

fn half_width(x: &[f64], y: &[f64], i: usize, height: f64) -> f64 {
    let half = 0.5 * height;
    let crossing = |a: usize, b: usize| x[a] + (half - y[a]) / (y[b] - y[a]) * (x[b] - x[a]);
    let mut left = x[0];
    let mut j = i;
    while j > 0 {
        if y[j - 1] < half {
            left = crossing(j - 1, j);
            break;
        }
        j -= 1;
    }
    let mut right = x[x.len() - 1];
    let mut j = i;
    while j + 1 < x.len() {
        if y[j + 1] < half {
            right = crossing(j, j + 1);
            break;
        }
        j += 1;
    }
    right - left
}

/// The tallest peak and the tallest one at least `min_separation` away from
/// it, ordered by position.
pub fn dominant_pair(peaks: &[Peak], min_separation: f64) -> Option<(Peak, Peak)> {
    let tallest = |it: &mut dyn Iterator<Item = &Peak>| {
        it.fold(None::<Peak>, |best, p| match best {
            Some(b) if b.height >= p.height => Some(b),
            _ => Some(*p),
        })
    };
    let first = tallest(&mut peaks.iter())?;
    let second = tallest(&mut peaks.iter().filter(|p| (p.position - first.position).abs() >= min_separation))?;
    Some(if first.position < second.position { (first, second) } else { (second, first) })
}

/// Closest the two main peaks may sit: the single-atom splitting `√2·g_a`,
/// half of the smallest collective one.
pub fn main_pair_floor(params: &ModelParams) -> f64 {
    (2f64.sqrt() * params.g_a).max(0.5)
}

/// The two main (Rabi) peaks of a computed spectrum.
pub fn main_pair(result: &SpectrumResult) -> Option<(Peak, Peak)> {
    dominant_pair(&result.peaks, main_pair_floor(&result.params))
}

/// Peaks that continue a ladder of spacing `ω_M` away from `parent`, on both
/// sides, each rung within `tolerance` of one mechanical quantum from the
/// previous one.
pub fn sideband_ladder(peaks: &[Peak], parent: &Peak, tolerance: f64) -> Vec<Peak> {
    let mut found = Vec::new();
    for dir in [-1.0, 1.0] {
        let mut rung = *parent;
        loop {
            let next = peaks
                .iter()
                .filter(|p| ((p.position - rung.position) * dir - 1.0).abs() <= tolerance)
                .min_by(|a, b| {
                    let da = ((a.position - rung.position) * dir - 1.0).abs();
                    let db = ((b.position - rung.position) * dir - 1.0).abs();
                    da.total_cmp(&db)
                });
            match next {
                Some(p) => {
                    found.push(*p);
                    rung = *p;
                }
                None => break,
            }
        }
    }
    found.sort_by(|a, b| a.position.total_cmp(&b.position));
    found
}

/// Ratio of the main peak at the larger detuning (on the line axis) to the
/// other one.
pub fn asymmetry_ratio(pair: &(Peak, Peak)) -> f64 {
    let (lo, hi) = pair;
    if AXIS_SIGN > 0.0 {
        hi.height / lo.height
    } else {
        lo.height / hi.height
    }
}
