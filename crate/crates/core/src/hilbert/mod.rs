//! Truncated atom ⊗ atom ⊗ photon ⊗ phonon state space and its ladder
//! operators.
//!
//! Flat indices run phonon-fastest, then photon, then atom 2, then atom 1.
//! With the single-excitation cap only the optical configurations
//! `|gg,0⟩, |gg,1⟩, |ge,0⟩, |eg,0⟩` survive, each carrying the full phonon
//! ladder.

mod operator;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub use operator::OperatorMatrix;

use crate::error::{check_dim, Error, Result};

/// Dense density matrix (or any dense operator acting on the space).
pub type DensityMatrix = DMatrix<C64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Ground,
    Excited,
}

impl Level {
    fn bit(self) -> usize {
        match self {
            Level::Ground => 0,
            Level::Excited => 1,
        }
    }

    fn from_bit(b: usize) -> Self {
        if b == 0 {
            Level::Ground
        } else {
            Level::Excited
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub atom1: Level,
    pub atom2: Level,
    pub photon: usize,
    pub phonon: usize,
}

impl BasisIndex {
    pub fn new(atom1: Level, atom2: Level, photon: usize, phonon: usize) -> Self {
        Self { atom1, atom2, photon, phonon }
    }

    /// Atomic excitations plus photons.
    pub fn optical_excitations(&self) -> usize {
        self.atom1.bit() + self.atom2.bit() + self.photon
    }
}

/// Cutoffs from which a [`HilbertSpace`] is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Truncation {
    pub photon_cutoff: usize,
    pub phonon_cutoff: usize,
    pub excitation_cap: Option<usize>,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { photon_cutoff: 1, phonon_cutoff: 8, excitation_cap: Some(1) }
    }
}

impl Truncation {
    pub fn build(&self) -> Result<HilbertSpace> {
        HilbertSpace::new(self.photon_cutoff, self.phonon_cutoff, self.excitation_cap)
    }
}

#[derive(Clone, Debug)]
pub struct HilbertSpace {
    photon_cutoff: usize,
    phonon_cutoff: usize,
    excitation_cap: Option<usize>,
    states: Vec<BasisIndex>,
    lookup: Vec<Option<usize>>,
}

impl HilbertSpace {
    /// `photon_cutoff` and `phonon_cutoff` are the largest occupation kept.
    /// The only supported cap is 1.
    pub fn new(
        photon_cutoff: usize,
        phonon_cutoff: usize,
        excitation_cap: Option<usize>,
    ) -> Result<Self> {
        if photon_cutoff < 1 {
            return Err(Error::config("photon cutoff must be at least 1"));
        }
        if let Some(cap) = excitation_cap {
            if cap != 1 {
                return Err(Error::config(format!(
                    "unsupported excitation cap {cap}; only 1 is available"
                )));
            }
        }
        let full = 4 * (photon_cutoff + 1) * (phonon_cutoff + 1);
        let mut states = Vec::new();
        let mut lookup = vec![None; full];
        for raw in 0..full {
            let idx = Self::decode_raw(raw, photon_cutoff, phonon_cutoff);
            if excitation_cap.is_some_and(|cap| idx.optical_excitations() > cap) {
                continue;
            }
            lookup[raw] = Some(states.len());
            states.push(idx);
        }
        Ok(Self { photon_cutoff, phonon_cutoff, excitation_cap, states, lookup })
    }

    fn decode_raw(raw: usize, nc: usize, nm: usize) -> BasisIndex {
        let phonon = raw % (nm + 1);
        let rest = raw / (nm + 1);
        let photon = rest % (nc + 1);
        let atoms = rest / (nc + 1);
        BasisIndex {
            atom1: Level::from_bit(atoms / 2),
            atom2: Level::from_bit(atoms % 2),
            photon,
            phonon,
        }
    }

    fn raw_index(&self, s: &BasisIndex) -> Option<usize> {
        if s.photon > self.photon_cutoff || s.phonon > self.phonon_cutoff {
            return None;
        }
        let atoms = s.atom1.bit() * 2 + s.atom2.bit();
        Some(((atoms * (self.photon_cutoff + 1)) + s.photon) * (self.phonon_cutoff + 1) + s.phonon)
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn photon_cutoff(&self) -> usize {
        self.photon_cutoff
    }

    pub fn phonon_cutoff(&self) -> usize {
        self.phonon_cutoff
    }

    pub fn excitation_cap(&self) -> Option<usize> {
        self.excitation_cap
    }

    /// Flat index of a basis label, `None` if it lies outside the truncation.
    pub fn index_of(&self, s: &BasisIndex) -> Option<usize> {
        self.raw_index(s).and_then(|raw| self.lookup[raw])
    }

    pub fn state(&self, i: usize) -> BasisIndex {
        self.states[i]
    }

    pub fn states(&self) -> &[BasisIndex] {
        &self.states
    }

    /// Operator from a single-state map: each basis state goes to at most one
    /// other state with the given amplitude. Targets outside the space are
    /// dropped.
    fn map_operator<F>(&self, f: F) -> OperatorMatrix
    where
        F: Fn(&BasisIndex) -> Option<(BasisIndex, f64)>,
    {
        let triplets = self.states.iter().enumerate().filter_map(|(col, s)| {
            let (target, amp) = f(s)?;
            let row = self.index_of(&target)?;
            Some((row, col, C64::new(amp, 0.0)))
        });
        OperatorMatrix::from_triplets(self.dim(), triplets)
    }

    pub fn identity(&self) -> OperatorMatrix {
        OperatorMatrix::identity(self.dim())
    }

    /// Pure-state projector `|s⟩⟨s|` as a dense matrix.
    pub fn projector(&self, s: &BasisIndex) -> Result<DensityMatrix> {
        let i = self
            .index_of(s)
            .ok_or_else(|| Error::config(format!("basis state {s:?} is outside the space")))?;
        let mut rho = DensityMatrix::zeros(self.dim(), self.dim());
        rho[(i, i)] = C64::new(1.0, 0.0);
        Ok(rho)
    }
}

/// Lowering operators of the two atoms, the cavity and the mirror.
#[derive(Clone, Debug)]
pub struct Ladder {
    pub a: OperatorMatrix,
    pub b: OperatorMatrix,
    pub sigma1: OperatorMatrix,
    pub sigma2: OperatorMatrix,
    photon_count: OperatorMatrix,
    phonon_count: OperatorMatrix,
}

impl Ladder {
    /// Total optical excitation `σ₁†σ₁ + σ₂†σ₂ + a†a`.
    pub fn excitation_number(&self) -> OperatorMatrix {
        let n1 = &self.sigma1.adjoint() * &self.sigma1;
        let n2 = &self.sigma2.adjoint() * &self.sigma2;
        &(&n1 + &n2) + &self.photon_count
    }

    /// `a†a`, built diagonally so the eigenvalues are exact integers.
    pub fn photon_number(&self) -> OperatorMatrix {
        self.photon_count.clone()
    }

    /// `b†b`, exact like [`Ladder::photon_number`].
    pub fn phonon_number(&self) -> OperatorMatrix {
        self.phonon_count.clone()
    }
}

pub fn ladder_operators(space: &HilbertSpace) -> Ladder {
    let a = space.map_operator(|s| {
        (s.photon > 0).then(|| (BasisIndex { photon: s.photon - 1, ..*s }, (s.photon as f64).sqrt()))
    });
    let b = space.map_operator(|s| {
        (s.phonon > 0).then(|| (BasisIndex { phonon: s.phonon - 1, ..*s }, (s.phonon as f64).sqrt()))
    });
    let sigma1 = space.map_operator(|s| {
        (s.atom1 == Level::Excited).then_some((BasisIndex { atom1: Level::Ground, ..*s }, 1.0))
    });
    let sigma2 = space.map_operator(|s| {
        (s.atom2 == Level::Excited).then_some((BasisIndex { atom2: Level::Ground, ..*s }, 1.0))
    });
    let photon_count = space.map_operator(|s| Some((*s, s.photon as f64)));
    let phonon_count = space.map_operator(|s| Some((*s, s.phonon as f64)));
    Ladder { a, b, sigma1, sigma2, photon_count, phonon_count }
}

/// `Tr(op · rho)`.
pub fn expectation(op: &OperatorMatrix, rho: &DensityMatrix) -> Result<C64> {
    check_dim(op.dim(), rho.nrows())?;
    check_dim(op.dim(), rho.ncols())?;
    let mut acc = C64::new(0.0, 0.0);
    for (r, c, v) in op.iter() {
        acc += v * rho[(c, r)];
    }
    Ok(acc)
}
