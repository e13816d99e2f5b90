//! Physical model: Hamiltonian, dissipation channels and initial states.
//!
//! All frequencies and rates are expressed in units of the mechanical
//! frequency, so `ω_M = 1` throughout.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{ladder_operators, BasisIndex, DensityMatrix, HilbertSpace, Level, OperatorMatrix};

/// Required fraction of the thermal phonon distribution kept by the cutoff.
pub const THERMAL_COVERAGE: f64 = 0.999;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Atom-cavity coupling.
    pub g_a: f64,
    /// Single-photon optomechanical coupling.
    pub g_m: f64,
    /// Atom-cavity detuning `ω_eg − ω_c`.
    pub delta_ac: f64,
    /// Dipole-dipole exchange strength.
    pub j: f64,
    pub kappa: f64,
    pub gamma_a: f64,
    /// Cooperative (cross) atomic decay.
    pub gamma_a_coop: f64,
    pub gamma_m: f64,
    /// Mean thermal phonon number of the mechanical bath.
    pub mbar: f64,
}

impl Default for ModelParams {
    /// Strong-strong coupling working point: g_a = 2.4, g_M = 1.2, κ = 0.2,
    /// γ_a = 0.05, everything else zero.
    fn default() -> Self {
        Self {
            g_a: 2.4,
            g_m: 1.2,
            delta_ac: 0.0,
            j: 0.0,
            kappa: 0.2,
            gamma_a: 0.05,
            gamma_a_coop: 0.0,
            gamma_m: 0.0,
            mbar: 0.0,
        }
    }
}

impl ModelParams {
    /// Displacement `β = g_M / ω_M`.
    pub fn beta(&self) -> f64 {
        self.g_m
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("g_a", self.g_a),
            ("g_M", self.g_m),
            ("delta_ac", self.delta_ac),
            ("J", self.j),
            ("kappa", self.kappa),
            ("gamma_a", self.gamma_a),
            ("gamma_a_coop", self.gamma_a_coop),
            ("gamma_M", self.gamma_m),
            ("Mbar", self.mbar),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::config(format!("model.{name} must be finite")));
            }
        }
        for (name, v) in [
            ("g_a", self.g_a),
            ("g_M", self.g_m),
            ("kappa", self.kappa),
            ("gamma_a", self.gamma_a),
            ("gamma_M", self.gamma_m),
            ("Mbar", self.mbar),
        ] {
            if v < 0.0 {
                return Err(Error::config(format!("model.{name} must be non-negative, got {v}")));
            }
        }
        if self.gamma_a_coop.abs() > self.gamma_a {
            return Err(Error::config(format!(
                "model.gamma_a_coop: |{}| exceeds gamma_a = {}; the atomic decay matrix would not be positive",
                self.gamma_a_coop, self.gamma_a
            )));
        }
        Ok(())
    }

    /// Rate of the `a†a` dephasing channel induced by the thermal mirror.
    /// Zero at `M̄ = 0`, the continuous limit of `1/ln(1 + 1/M̄)`.
    pub fn dephasing_rate(&self) -> f64 {
        if self.mbar <= 0.0 {
            return 0.0;
        }
        let beta = self.beta();
        2.0 * (2.0 * beta).powi(2) * self.gamma_m / (1.0 + 1.0 / self.mbar).ln()
    }
}

/// Geometry entering the dipole-dipole exchange. Any consistent unit system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipoleGeometry {
    pub gamma_0: f64,
    pub c_0: f64,
    pub omega_eg: f64,
    pub r: f64,
}

/// `J = ¾ γ₀ c₀³ / (ω_eg³ r³)`.
pub fn ddi_strength(geom: &DipoleGeometry) -> Result<f64> {
    let DipoleGeometry { gamma_0, c_0, omega_eg, r } = *geom;
    for (name, v) in [("gamma_0", gamma_0), ("c_0", c_0), ("omega_eg", omega_eg), ("r", r)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(0.75 * gamma_0 * (c_0 / (omega_eg * r)).powi(3))
}

/// Boltzmann occupation `M̄^m / (1 + M̄)^(m+1)` of phonon level `m0`.
pub fn thermal_weight(mbar: f64, m0: usize) -> f64 {
    if mbar == 0.0 {
        return if m0 == 0 { 1.0 } else { 0.0 };
    }
    let ratio = mbar / (1.0 + mbar);
    ratio.powi(m0 as i32) / (1.0 + mbar)
}

/// `H/ħ` in the frame rotating at the cavity frequency.
///
/// Products are written with lowering operators on the right so that, on a
/// capped space, each term equals the projection of the untruncated one.
pub fn build_hamiltonian(params: &ModelParams, space: &HilbertSpace) -> OperatorMatrix {
    let ops = ladder_operators(space);
    let s1d = ops.sigma1.adjoint();
    let s2d = ops.sigma2.adjoint();
    let ad = ops.a.adjoint();
    let bd = ops.b.adjoint();

    let atoms = &(&s1d * &ops.sigma1) + &(&s2d * &ops.sigma2);
    let coupling = &(&(&ad * &ops.sigma1) + &(&s1d * &ops.a)) + &(&(&ad * &ops.sigma2) + &(&s2d * &ops.a));
    let exchange = &(&s1d * &ops.sigma2) + &(&s2d * &ops.sigma1);
    let phonons = ops.phonon_number();
    let pressure = &ops.photon_number() * &(&bd + &ops.b);

    let terms = [
        &atoms * -params.delta_ac,
        &coupling * params.g_a,
        &exchange * params.j,
        phonons,
        &pressure * -params.g_m,
    ];
    terms.iter().fold(space.identity().scale(C64::new(0.0, 0.0)), |acc, t| &acc + t)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    /// `(rate/2)(2OρO† − O†Oρ − ρO†O)`.
    Local { label: &'static str, op: OperatorMatrix, rate: f64 },
    /// `(rate/2)(2·O₁ρO₂† − O₁†O₂ρ − ρO₁†O₂)`.
    Cross { label: &'static str, op1: OperatorMatrix, op2: OperatorMatrix, rate: f64 },
}

impl Channel {
    pub fn rate(&self) -> f64 {
        match self {
            Channel::Local { rate, .. } | Channel::Cross { rate, .. } => *rate,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Channel::Local { label, .. } | Channel::Cross { label, .. } => label,
        }
    }

    /// The operator pair `(O₁, O₂)`; equal for local channels.
    pub fn pair(&self) -> (&OperatorMatrix, &OperatorMatrix) {
        match self {
            Channel::Local { op, .. } => (op, op),
            Channel::Cross { op1, op2, .. } => (op1, op2),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DissipatorSpec {
    pub channels: Vec<Channel>,
}

impl DissipatorSpec {
    pub fn empty() -> Self {
        Self { channels: Vec::new() }
    }

    /// Channels whose rate is not exactly zero.
    pub fn active(&self) -> impl Iterator<Item = &Channel> {
        self.channels.iter().filter(|c| c.rate() != 0.0)
    }
}

/// The full non-local channel list: two atomic decays, the two cooperative
/// cross terms, cavity loss, thermal dephasing and the two displaced
/// mechanical jumps `b − β a†a`, `b† − β a†a`.
pub fn build_dissipators(params: &ModelParams, space: &HilbertSpace) -> Result<DissipatorSpec> {
    params.validate()?;
    let ops = ladder_operators(space);
    let beta = params.beta();
    let n_photon = &ops.a.adjoint() * &ops.a;
    let shift = &n_photon * beta;
    let lower = &ops.b - &shift;
    let raise = &ops.b.adjoint() - &shift;

    let channels = vec![
        Channel::Local { label: "sigma1", op: ops.sigma1.clone(), rate: params.gamma_a },
        Channel::Local { label: "sigma2", op: ops.sigma2.clone(), rate: params.gamma_a },
        Channel::Cross {
            label: "sigma1,sigma2",
            op1: ops.sigma1.clone(),
            op2: ops.sigma2.clone(),
            rate: params.gamma_a_coop,
        },
        Channel::Cross {
            label: "sigma2,sigma1",
            op1: ops.sigma2.clone(),
            op2: ops.sigma1.clone(),
            rate: params.gamma_a_coop,
        },
        Channel::Local { label: "a", op: ops.a.clone(), rate: params.kappa },
        Channel::Local { label: "a+a", op: n_photon, rate: params.dephasing_rate() },
        Channel::Local {
            label: "b-beta*a+a",
            op: lower,
            rate: params.gamma_m * (params.mbar + 1.0),
        },
        Channel::Local { label: "b+-beta*a+a", op: raise, rate: params.gamma_m * params.mbar },
    ];
    Ok(DissipatorSpec { channels })
}

/// Which atomic state carries the initial excitation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialExcitation {
    Atom1,
    Atom2,
    /// `(|eg⟩ + |ge⟩)/√2`
    Symmetric,
    /// `(|eg⟩ − |ge⟩)/√2`
    Antisymmetric,
}

impl InitialExcitation {
    pub fn name(&self) -> &'static str {
        match self {
            InitialExcitation::Atom1 => "atom1",
            InitialExcitation::Atom2 => "atom2",
            InitialExcitation::Symmetric => "symmetric",
            InitialExcitation::Antisymmetric => "antisymmetric",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "atom1" => InitialExcitation::Atom1,
            "atom2" => InitialExcitation::Atom2,
            "symmetric" => InitialExcitation::Symmetric,
            "antisymmetric" => InitialExcitation::Antisymmetric,
            _ => return None,
        })
    }

    /// Amplitudes on `|eg⟩` and `|ge⟩`.
    fn amplitudes(&self) -> (f64, f64) {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            InitialExcitation::Atom1 => (1.0, 0.0),
            InitialExcitation::Atom2 => (0.0, 1.0),
            InitialExcitation::Symmetric => (h, h),
            InitialExcitation::Antisymmetric => (h, -h),
        }
    }
}

/// One atomic excitation, empty cavity, thermal mirror.
pub fn initial_state(
    params: &ModelParams,
    space: &HilbertSpace,
    excitation: InitialExcitation,
) -> Result<DensityMatrix> {
    let nm = space.phonon_cutoff();
    let weights: Vec<f64> = (0..=nm).map(|m| thermal_weight(params.mbar, m)).collect();
    let captured: f64 = weights.iter().sum();
    if captured < THERMAL_COVERAGE {
        return Err(Error::config(format!(
            "phonon cutoff {nm} keeps only {:.4}% of the thermal distribution at Mbar = {}; increase numerics.phonon_cutoff",
            100.0 * captured,
            params.mbar
        )));
    }

    let (c1, c2) = excitation.amplitudes();
    let mut rho = DensityMatrix::zeros(space.dim(), space.dim());
    for (m, w) in weights.iter().enumerate() {
        let p = w / captured;
        let amps = [
            (BasisIndex::new(Level::Excited, Level::Ground, 0, m), c1),
            (BasisIndex::new(Level::Ground, Level::Excited, 0, m), c2),
        ];
        for (si, ai) in &amps {
            for (sj, aj) in &amps {
                if *ai == 0.0 || *aj == 0.0 {
                    continue;
                }
                let i = space.index_of(si).ok_or_else(|| Error::config("initial state outside space"))?;
                let j = space.index_of(sj).ok_or_else(|| Error::config("initial state outside space"))?;
                rho[(i, j)] += C64::new(p * ai * aj, 0.0);
            }
        }
    }
    Ok(rho)
}
