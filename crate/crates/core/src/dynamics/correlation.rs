//! Two-time correlation `⟨a†(t′) a(t″)⟩` by quantum regression.
//!
//! For `t_j ≥ t_k` the regression formula reads
//! `C[j][k] = Tr[a† Φ_{t_j−t_k}(a ρ(t_k))]`. Rather than propagating every
//! column `a ρ(t_k)` forward, the grid is filled from the Heisenberg-picture
//! image of the cavity operator: with `B(τ)` the adjoint flow applied to `a`,
//! `C[j][k] = ⟨B(t_j − t_k), a ρ(t_k)⟩_HS`. One backward trajectory plus one
//! forward trajectory replace `n_t` forward ones; both one-step maps are exact
//! Hilbert-Schmidt adjoints of each other, so the two routes agree to
//! rounding. [`reference_correlation`] keeps the column-by-column route for
//! cross-checks.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::{evolve, evolve_with, EvolutionConfig, OpenSystem, Propagator, TrajectorySummary};
use crate::error::{Error, Result};
use crate::hilbert::{expectation, DensityMatrix, OperatorMatrix};

const COMPLEX_BYTES: usize = 16;

/// Lower triangle `C[j][k]`, `j ≥ k`, stored row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationGrid {
    n_t: usize,
    dt: f64,
    /// Cavity decay that scales the counting rate.
    pub kappa: f64,
    /// Identifies the parameter set the grid was computed from.
    pub param_hash: u64,
    values: Vec<C64>,
}

impl CorrelationGrid {
    pub fn memory_bytes(n_t: usize) -> usize {
        n_t * (n_t + 1) / 2 * COMPLEX_BYTES
    }

    /// Builds a grid by evaluating `f(j, k)` on the lower triangle.
    pub fn from_fn<F>(n_t: usize, dt: f64, kappa: f64, f: F) -> Self
    where
        F: Fn(usize, usize) -> C64,
    {
        let mut values = Vec::with_capacity(n_t * (n_t + 1) / 2);
        for j in 0..n_t {
            for k in 0..=j {
                values.push(f(j, k));
            }
        }
        Self { n_t, dt, kappa, param_hash: 0, values }
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of the last grid node.
    pub fn horizon(&self) -> f64 {
        (self.n_t - 1) as f64 * self.dt
    }

    /// Entries `C[j][0..=j]`.
    pub fn row(&self, j: usize) -> &[C64] {
        let start = j * (j + 1) / 2;
        &self.values[start..start + j + 1]
    }

    /// Any entry, using `C[k][j] = conj(C[j][k])` above the diagonal.
    pub fn get(&self, j: usize, k: usize) -> C64 {
        if j >= k {
            self.row(j)[k]
        } else {
            self.row(k)[j].conj()
        }
    }

    pub fn lower_triangle(&self) -> &[C64] {
        &self.values
    }

    /// The grid of `⟨a†(t″) a(t′)⟩`, i.e. the conjugate transpose kernel.
    pub fn conjugate_transpose(&self) -> Self {
        // the lower triangle of C† is the conjugated upper triangle of C
        Self::from_fn(self.n_t, self.dt, self.kappa, |j, k| self.get(k, j).conj())
    }

    /// Header `n_t: u64`, `dt: f64`, `param_hash: u64`, then the row-major
    /// lower triangle as `(re, im)` pairs, all little-endian.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n_t as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.param_hash.to_le_bytes())?;
        let mut buf = Vec::with_capacity(1 << 16);
        for chunk in self.values.chunks(4096) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R, kappa: f64) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n_t = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let dt = f64::from_le_bytes(word);
        r.read_exact(&mut word)?;
        let param_hash = u64::from_le_bytes(word);
        if n_t == 0 || !(dt > 0.0) {
            return Err(Error::config(format!("correlation dump header is invalid (n_t = {n_t}, dt = {dt})")));
        }
        let len = n_t * (n_t + 1) / 2;
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        if raw.len() != len * COMPLEX_BYTES {
            return Err(Error::config(format!(
                "correlation dump holds {} bytes of data, expected {}",
                raw.len(),
                len * COMPLEX_BYTES
            )));
        }
        let values = raw
            .chunks_exact(COMPLEX_BYTES)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                C64::new(re, im)
            })
            .collect();
        Ok(Self { n_t, dt, kappa, param_hash, values })
    }
}

#[derive(Clone, Debug)]
pub struct CorrelationRun {
    pub grid: CorrelationGrid,
    pub trajectory: TrajectorySummary,
    /// `⟨a†a⟩(t_k)` read directly off the forward trajectory.
    pub photon_number: Vec<f64>,
}

/// Split-complex storage so the inner products vectorize.
struct Packed {
    width: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Packed {
    fn with_capacity(width: usize, rows: usize) -> Self {
        Self { width, re: Vec::with_capacity(width * rows), im: Vec::with_capacity(width * rows) }
    }

    fn push(&mut self, v: C64) {
        self.re.push(v.re);
        self.im.push(v.im);
    }

    fn row(&self, i: usize) -> (&[f64], &[f64]) {
        let s = i * self.width..(i + 1) * self.width;
        (&self.re[s.clone()], &self.im[s])
    }
}

/// `Σ x·y` over split-complex slices with a fixed summation order.
fn packed_dot((xr, xi): (&[f64], &[f64]), (yr, yi): (&[f64], &[f64])) -> C64 {
    const LANES: usize = 4;
    let mut re = [0.0; LANES];
    let mut im = [0.0; LANES];
    let n = xr.len();
    let body = n - n % LANES;
    for base in (0..body).step_by(LANES) {
        for l in 0..LANES {
            let (a, b, c, d) = (xr[base + l], xi[base + l], yr[base + l], yi[base + l]);
            re[l] += a * c - b * d;
            im[l] += a * d + b * c;
        }
    }
    for i in body..n {
        re[0] += xr[i] * yr[i] - xi[i] * yi[i];
        im[0] += xr[i] * yi[i] + xi[i] * yr[i];
    }
    C64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3]))
}

/// Correlation grid on the uniform mesh `t_k = k·dt` up to the adaptive
/// horizon of the forward trajectory.
pub fn two_time_correlation(
    rho0: &DensityMatrix,
    system: &OpenSystem,
    config: &EvolutionConfig,
) -> Result<CorrelationRun> {
    let a = &system.ladder.a;
    let n_photon = system.ladder.photon_number();
    let d = system.space.dim();
    let rows = a.nonempty_rows();
    let row_width = rows.len() * d;

    // forward pass: keep the rows of a·ρ(t_k) that can be nonzero
    let mut operand: Vec<C64> = Vec::new();
    let mut photon_number = Vec::new();
    let mut failure = None;
    let trajectory = evolve_with(rho0, system, config, |_, rho| {
        match expectation(&n_photon, rho) {
            Ok(v) => photon_number.push(v.re),
            Err(e) => failure = Some(e),
        }
        for &r in &rows {
            for c in 0..d {
                let mut acc = C64::default();
                for (i, v) in a.row(r) {
                    acc += v * rho[(i, c)];
                }
                operand.push(acc);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let n_t = trajectory.n_t;

    let needed = CorrelationGrid::memory_bytes(n_t);
    if needed > config.grid_memory_budget {
        return Err(Error::numerical(format!(
            "correlation grid needs {} MiB for {n_t} time nodes, budget is {} MiB; use a coarser numerics.dt or a shorter numerics.t_max",
            needed >> 20,
            config.grid_memory_budget >> 20
        )));
    }

    // positions (row, col) of a·ρ that are ever nonzero
    let mut live = vec![false; row_width];
    for chunk in operand.chunks_exact(row_width) {
        for (flag, v) in live.iter_mut().zip(chunk) {
            *flag |= *v != C64::default();
        }
    }
    let positions: Vec<(usize, usize)> = (0..row_width)
        .filter(|&p| live[p])
        .map(|p| (rows[p / d], p % d))
        .collect();
    let width = positions.len();

    let mut x = Packed::with_capacity(width, n_t);
    for chunk in operand.chunks_exact(row_width) {
        for (p, flag) in live.iter().enumerate() {
            if *flag {
                x.push(chunk[p]);
            }
        }
    }
    drop(operand);

    // backward pass: conj(B(τ)) restricted to the same positions
    let adjoint = system.generator().adjoint();
    let mut stepper = Propagator::with_substeps(&adjoint, config.method, config.dt, config.substeps);
    let mut b = a.to_dense();
    let mut bc = Packed::with_capacity(width, n_t);
    for tau in 0..n_t {
        for &(r, c) in &positions {
            bc.push(b[(r, c)].conj());
        }
        if tau + 1 < n_t {
            stepper.step(b.as_mut_slice());
            if b.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(Error::numerical(format!(
                    "adjoint propagation diverged at tau = {:.4}; reduce numerics.dt",
                    (tau + 1) as f64 * config.dt
                )));
            }
        }
    }

    let mut values = vec![C64::default(); n_t * (n_t + 1) / 2];
    let mut row_slices = Vec::with_capacity(n_t);
    let mut rest = values.as_mut_slice();
    for j in 0..n_t {
        let (head, tail) = rest.split_at_mut(j + 1);
        row_slices.push(head);
        rest = tail;
    }
    row_slices.into_par_iter().enumerate().for_each(|(j, row)| {
        for (k, out) in row.iter_mut().enumerate() {
            *out = packed_dot(bc.row(j - k), x.row(k));
        }
        // ⟨a†a⟩ is real; drop the rounding residue
        row[j].im = 0.0;
    });

    let grid = CorrelationGrid { n_t, dt: config.dt, kappa: kappa_of(system), param_hash: 0, values };
    Ok(CorrelationRun { grid, trajectory, photon_number })
}

fn kappa_of(system: &OpenSystem) -> f64 {
    system
        .dissipators
        .channels
        .iter()
        .find(|c| c.label() == "a")
        .map(|c| c.rate())
        .unwrap_or(0.0)
}

/// Which triangle [`reference_correlation`] fills.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeOrder {
    /// `⟨a†(t_j) a(t_k)⟩`, `j ≥ k`, from `Tr[a† Φ_τ(a ρ(t_k))]`.
    Lower,
    /// `⟨a†(t_k) a(t_j)⟩`, `j ≥ k`, from `Tr[a Φ_τ(ρ(t_k) a†)]`.
    Upper,
}

/// Column-by-column forward regression, `O(n_t²)` propagation steps.
/// Returns a dense `n_t × n_t` matrix with the requested triangle filled
/// (diagonal included) and zeros elsewhere.
pub fn reference_correlation(
    rho0: &DensityMatrix,
    system: &OpenSystem,
    config: &EvolutionConfig,
    order: TimeOrder,
) -> Result<DMatrix<C64>> {
    let traj = evolve(rho0, system, config)?;
    let n_t = traj.summary.n_t;
    let a = &system.ladder.a;
    let ad = a.adjoint();
    let mut out = DMatrix::zeros(n_t, n_t);
    let mut stepper = Propagator::with_substeps(system.generator(), config.method, config.dt, config.substeps);
    for (k, rho) in traj.snapshots.iter().enumerate() {
        let (mut operand, probe): (DensityMatrix, &OperatorMatrix) = match order {
            TimeOrder::Lower => (a.mul_dense(rho)?, &ad),
            TimeOrder::Upper => (ad.dense_mul(rho)?, a),
        };
        for j in k..n_t {
            let v = expectation(probe, &operand)?;
            match order {
                TimeOrder::Lower => out[(j, k)] = v,
                TimeOrder::Upper => out[(k, j)] = v,
            }
            if j + 1 < n_t {
                stepper.step(operand.as_mut_slice());
            }
        }
    }
    Ok(out)
}
