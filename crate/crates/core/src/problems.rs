//! The condensate driving (CD) and condensate splitting (CS) benchmarks.
//!
//! Internal units use `ħ = 1` with an energy scale `E = h·1 kHz` for both
//! problems; lengths are measured in `r₀ = 172 nm` (CD) or `1 µm` (CS). The
//! time unit is then `ħ/E ≈ 0.159 ms` and the dimensionless mass is
//! `m·ℓ²·E/ħ²`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::{linear_reference, TimeGrid, TransferFunction};
use crate::gpe::{
    excited_state, fidelity, ground_state, GpeParams, Potential, SpatialGrid, WaveFunction,
};
use crate::{Error, Result};

pub const HBAR: f64 = PLANCK / std::f64::consts::TAU;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
pub const RB87_MASS: f64 = 1.443_16e-25;
/// Tesla per Gauss.
const GAUSS: f64 = 1e-4;

/// Physical scales of one internal unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScales {
    /// Metres per internal length unit.
    pub length: f64,
    /// Joules per internal energy unit.
    pub energy: f64,
}

impl UnitScales {
    /// Seconds per internal time unit (`ħ/E`).
    pub fn time(&self) -> f64 {
        HBAR / self.energy
    }

    /// Dimensionless mass for which the kinetic term reads `-∂²/2m`.
    pub fn mass(&self, kg: f64) -> f64 {
        kg * self.length * self.length * self.energy / (HBAR * HBAR)
    }

    pub fn length_to_internal(&self, metres: f64) -> f64 {
        metres / self.length
    }

    pub fn length_to_physical(&self, x: f64) -> f64 {
        x * self.length
    }

    pub fn time_to_internal(&self, seconds: f64) -> f64 {
        seconds / self.time()
    }

    pub fn time_to_physical(&self, t: f64) -> f64 {
        t * self.time()
    }

    pub fn energy_to_internal(&self, joules: f64) -> f64 {
        joules / self.energy
    }

    pub fn energy_to_physical(&self, e: f64) -> f64 {
        e * self.energy
    }

    /// Internal duration for a physical one in milliseconds.
    pub fn ms_to_internal(&self, ms: f64) -> f64 {
        self.time_to_internal(ms * 1e-3)
    }

    pub fn internal_to_ms(&self, t: f64) -> f64 {
        self.time_to_physical(t) * 1e3
    }

    /// Cycles per internal time unit for a frequency in kHz.
    pub fn khz_to_internal(&self, khz: f64) -> f64 {
        khz * 1e3 * self.time()
    }
}

/// `V = p₂ξ² + p₄ξ⁴ + p₆ξ⁶` with `ξ = x − u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdPotential {
    pub p2: f64,
    pub p4: f64,
    pub p6: f64,
}

pub fn cd_potential(pot: &CdPotential, x: f64, u: f64) -> f64 {
    let s = (x - u) * (x - u);
    s * (pot.p2 + s * (pot.p4 + s * pot.p6))
}

pub fn cd_dv_du(pot: &CdPotential, x: f64, u: f64) -> f64 {
    let d = x - u;
    let s = d * d;
    -d * (2.0 * pot.p2 + s * (4.0 * pot.p4 + s * 6.0 * pot.p6))
}

impl Potential for CdPotential {
    fn value(&self, x: f64, u: f64) -> f64 {
        cd_potential(self, x, u)
    }

    fn du(&self, x: f64, u: f64) -> f64 {
        cd_dv_du(self, x, u)
    }
}

/// RF-dressed Ioffe-Pritchard potential in the rotating-wave approximation,
/// `V = g_Fµ_B·sqrt((B_S − ħω/g_Fµ_B)² + (B_RF·B_I/2B_S)²) − offset` with
/// `B_S = sqrt((Gx)² + B_I²)` and `B_RF = rf0 + rf_slope·u`. Fields are in
/// Gauss, `gradient` in Gauss per internal length unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsPotential {
    /// `|g_F|·µ_B` in internal energy per Gauss.
    pub moment: f64,
    /// `ħω / (|g_F| µ_B)` in Gauss.
    pub resonance: f64,
    pub b_i: f64,
    pub rf0: f64,
    pub rf_slope: f64,
    pub gradient: f64,
    /// Constant energy shift (the value at `x = 0, u = 0`).
    pub offset: f64,
}

impl CsPotential {
    fn fields(&self, x: f64, u: f64) -> (f64, f64, f64) {
        let gx = self.gradient * x;
        let bs = (gx * gx + self.b_i * self.b_i).sqrt();
        let detuning = bs - self.resonance;
        let coupling = (self.rf0 + self.rf_slope * u) * self.b_i / (2.0 * bs);
        (bs, detuning, coupling)
    }

    fn raw(&self, x: f64, u: f64) -> f64 {
        let (_, d, c) = self.fields(x, u);
        self.moment * (d * d + c * c).sqrt()
    }
}

pub fn cs_potential(pot: &CsPotential, x: f64, u: f64) -> f64 {
    pot.raw(x, u) - pot.offset
}

pub fn cs_dv_du(pot: &CsPotential, x: f64, u: f64) -> f64 {
    let (bs, d, c) = pot.fields(x, u);
    pot.moment * c * (pot.rf_slope * pot.b_i / (2.0 * bs)) / (d * d + c * c).sqrt()
}

impl Potential for CsPotential {
    fn value(&self, x: f64, u: f64) -> f64 {
        cs_potential(self, x, u)
    }

    fn du(&self, x: f64, u: f64) -> f64 {
        cs_dv_du(self, x, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// Condensate driving: ground state to first excited state by shaking.
    Cd,
    /// Condensate splitting: single well to double well.
    Cs,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Cd => "cd",
            ProblemKind::Cs => "cs",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cd" | "driving" => Ok(ProblemKind::Cd),
            "cs" | "splitting" => Ok(ProblemKind::Cs),
            _ => Err(Error::invalid(format!("unknown problem '{s}' (expected cd or cs)"))),
        }
    }
}

/// Optional overrides of a benchmark's defaults. Lengths, times and `beta`
/// are in internal units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemOverrides {
    pub n_points: Option<usize>,
    pub half_width: Option<f64>,
    pub dt: Option<f64>,
    pub gamma: Option<f64>,
    pub u_min: Option<f64>,
    pub u_max: Option<f64>,
    pub beta: Option<f64>,
    /// CD only: transfer-function cutoff in kHz; `0` disables the filter.
    pub bandwidth_khz: Option<f64>,
    /// CS only: Ioffe-field gradient in G/m.
    pub cs_gradient: Option<f64>,
    /// CS only: effective `|g_F|` entering `g_F µ_B`.
    pub cs_g_factor: Option<f64>,
}

/// Fully resolved benchmark settings; recorded in run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSettings {
    pub kind: ProblemKind,
    pub n_points: usize,
    pub half_width: f64,
    pub dt: f64,
    pub gamma: f64,
    pub u_bounds: (f64, f64),
    pub u_start: f64,
    pub u_end: f64,
    pub beta: f64,
    pub bandwidth_khz: Option<f64>,
    pub cs_gradient: Option<f64>,
    pub cs_g_factor: Option<f64>,
    pub units: UnitScales,
}

pub const CD_R0: f64 = 172e-9;
pub const CD_P2_HZ: f64 = 310.0;
pub const CD_P4_HZ: f64 = 13.6;
pub const CD_P6_HZ: f64 = -0.0634;
/// Nonlinearity for 700 atoms in units of ħ·µm·Hz.
pub const CD_BETA_HBAR_UM_HZ: f64 = 2.61;
pub const CD_ATOMS: u32 = 700;

pub const CS_DETUNING_MHZ: f64 = 1.26;
pub const CS_B_I: f64 = 1.0;
pub const CS_RF0: f64 = 0.5;
pub const CS_RF_SLOPE: f64 = 0.3;

const ENERGY_KHZ: f64 = PLANCK * 1e3;

pub fn cd_units() -> UnitScales {
    UnitScales {
        length: CD_R0,
        energy: ENERGY_KHZ,
    }
}

pub fn cs_units() -> UnitScales {
    UnitScales {
        length: 1e-6,
        energy: ENERGY_KHZ,
    }
}

/// CD polynomial coefficients in internal units (`h·kHz` per `r₀^k`).
pub fn cd_default_potential() -> CdPotential {
    let e_per_hz = PLANCK / ENERGY_KHZ;
    CdPotential {
        p2: CD_P2_HZ * e_per_hz,
        p4: CD_P4_HZ * e_per_hz,
        p6: CD_P6_HZ * e_per_hz,
    }
}

pub fn cd_default_beta() -> f64 {
    let u = cd_units();
    let joule_metres = CD_BETA_HBAR_UM_HZ * HBAR * 1e-6;
    joule_metres / (u.energy * u.length)
}

pub fn cs_potential_for(gradient_g_per_m: f64, g_factor: f64) -> CsPotential {
    let u = cs_units();
    let moment_joule_per_gauss = g_factor * BOHR_MAGNETON * GAUSS;
    let mut pot = CsPotential {
        moment: moment_joule_per_gauss / u.energy,
        resonance: PLANCK * CS_DETUNING_MHZ * 1e6 / moment_joule_per_gauss,
        b_i: CS_B_I,
        rf0: CS_RF0,
        rf_slope: CS_RF_SLOPE,
        gradient: gradient_g_per_m * u.length,
        offset: 0.0,
    };
    pot.offset = pot.raw(0.0, 0.0);
    pot
}

pub const CS_DEFAULT_GRADIENT: f64 = 3.0e5;
pub const CS_DEFAULT_G_FACTOR: f64 = 1.0;

impl ProblemSettings {
    pub fn resolve(kind: ProblemKind, o: &ProblemOverrides) -> Result<Self> {
        let s = match kind {
            ProblemKind::Cd => {
                let bw = o.bandwidth_khz.unwrap_or(5.0);
                Self {
                    kind,
                    n_points: o.n_points.unwrap_or(256),
                    half_width: o.half_width.unwrap_or(10.24),
                    dt: o.dt.unwrap_or(0.01),
                    gamma: o.gamma.unwrap_or(1e-6),
                    u_bounds: (o.u_min.unwrap_or(-2.0), o.u_max.unwrap_or(2.0)),
                    u_start: 0.0,
                    u_end: 0.0,
                    beta: o.beta.unwrap_or_else(cd_default_beta),
                    bandwidth_khz: (bw > 0.0).then_some(bw),
                    cs_gradient: None,
                    cs_g_factor: None,
                    units: cd_units(),
                }
            }
            ProblemKind::Cs => Self {
                kind,
                n_points: o.n_points.unwrap_or(256),
                half_width: o.half_width.unwrap_or(3.0),
                dt: o.dt.unwrap_or(0.01),
                gamma: o.gamma.unwrap_or(1e-6),
                u_bounds: (o.u_min.unwrap_or(0.0), o.u_max.unwrap_or(1.0)),
                u_start: 0.0,
                u_end: 1.0,
                beta: o.beta.unwrap_or(0.0),
                bandwidth_khz: None,
                cs_gradient: Some(o.cs_gradient.unwrap_or(CS_DEFAULT_GRADIENT)),
                cs_g_factor: Some(o.cs_g_factor.unwrap_or(CS_DEFAULT_G_FACTOR)),
                units: cs_units(),
            },
        };
        let (lo, hi) = s.u_bounds;
        if !(lo < hi) || !(lo..=hi).contains(&s.u_start) || !(lo..=hi).contains(&s.u_end) {
            return Err(Error::invalid(format!(
                "control bounds [{lo}, {hi}] must contain the boundary controls"
            )));
        }
        if !(s.gamma >= 0.0) || !(s.beta >= 0.0) {
            return Err(Error::invalid("gamma and beta must be non-negative"));
        }
        Ok(s)
    }

    pub fn potential(&self) -> Arc<dyn Potential> {
        match self.kind {
            ProblemKind::Cd => Arc::new(cd_default_potential()),
            ProblemKind::Cs => Arc::new(cs_potential_for(
                self.cs_gradient.unwrap_or(CS_DEFAULT_GRADIENT),
                self.cs_g_factor.unwrap_or(CS_DEFAULT_G_FACTOR),
            )),
        }
    }
}

/// A state-to-state control problem: potential, boundary controls and
/// states, admissible control box and optional transfer function.
#[derive(Debug, Clone)]
pub struct ProblemDefinition {
    pub name: String,
    pub grid: Arc<SpatialGrid>,
    /// `params.dt` is the largest allowed time step.
    pub params: GpeParams,
    pub potential: Arc<dyn Potential>,
    pub u_bounds: (f64, f64),
    pub u_start: f64,
    pub u_end: f64,
    pub gamma: f64,
    /// Transfer-function cutoff in cycles per internal time unit.
    pub transfer_bandwidth: Option<f64>,
    pub units: UnitScales,
    pub psi_initial: WaveFunction,
    pub psi_target: WaveFunction,
    pub settings: Option<ProblemSettings>,
}

impl ProblemDefinition {
    pub fn time_grid(&self, duration: f64) -> Result<TimeGrid> {
        TimeGrid::new(duration, self.params.dt)
    }

    /// Linear ramp `u₀(t)` between the boundary controls.
    pub fn reference(&self, tg: &TimeGrid) -> Vec<f64> {
        linear_reference(self.u_start, self.u_end, tg)
    }

    pub fn transfer(&self, tg: &TimeGrid) -> Result<Option<TransferFunction>> {
        self.transfer_bandwidth
            .map(|bw| TransferFunction::gaussian(bw, tg.dt))
            .transpose()
    }

    pub fn params_for(&self, tg: &TimeGrid) -> GpeParams {
        GpeParams {
            dt: tg.dt,
            ..self.params
        }
    }

    pub fn duration_from_ms(&self, ms: f64) -> f64 {
        self.units.ms_to_internal(ms)
    }

    pub fn potential_column(&self, u: f64) -> Vec<f64> {
        self.potential.column(&self.grid, u)
    }
}

/// Builds a benchmark with its boundary states prepared by imaginary-time
/// relaxation.
pub fn build_problem(kind: ProblemKind, overrides: &ProblemOverrides) -> Result<ProblemDefinition> {
    let settings = ProblemSettings::resolve(kind, overrides)?;
    build_from_settings(&settings)
}

pub fn build_from_settings(settings: &ProblemSettings) -> Result<ProblemDefinition> {
    let grid = Arc::new(SpatialGrid::symmetric(settings.half_width, settings.n_points)?);
    let mass = settings.units.mass(RB87_MASS);
    let params = GpeParams::new(mass, settings.beta, settings.dt)?;
    let potential = settings.potential();
    let psi_initial = ground_state(potential.as_ref(), settings.u_start, &grid, &params)?;
    let psi_target = match settings.kind {
        ProblemKind::Cd => excited_state(potential.as_ref(), settings.u_end, &grid, &params)?,
        ProblemKind::Cs => ground_state(potential.as_ref(), settings.u_end, &grid, &params)?,
    };
    let transfer_bandwidth = settings
        .bandwidth_khz
        .map(|khz| settings.units.khz_to_internal(khz));
    Ok(ProblemDefinition {
        name: settings.kind.to_string(),
        grid,
        params,
        potential,
        u_bounds: settings.u_bounds,
        u_start: settings.u_start,
        u_end: settings.u_end,
        gamma: settings.gamma,
        transfer_bandwidth,
        units: settings.units,
        psi_initial,
        psi_target,
        settings: Some(settings.clone()),
    })
}

impl ProblemDefinition {
    /// Overlap of the boundary states; small for a meaningful transfer task.
    pub fn boundary_fidelity(&self) -> Result<f64> {
        fidelity(&self.psi_initial, &self.psi_target)
    }
}
