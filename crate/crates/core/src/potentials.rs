//! Rydberg-dressed spin patterns and the Bell-state potential landscapes
//! they produce on top of an optical-tweezer trap.
//!
//! Units: ħ = 1, energies and rates in rad/s, lengths in μm. Van der Waals
//! coefficients are in rad/s·μm⁶.

use std::f64::consts::TAU;

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logical::DipolarModelParams;
use crate::quantum::{bell_basis, interaction_operator, BellState, C64};

/// 2π × 1 MHz in rad/s.
pub const MHZ: f64 = TAU * 1e6;
/// 2π × 1 kHz in rad/s.
pub const KHZ: f64 = TAU * 1e3;
/// ħ / m for ⁸⁷Rb in μm²/s.
pub const HBAR_OVER_M_RB87: f64 =
    1.054_571_817e-34 / (86.909_180_527 * 1.660_539_066_60e-27) * 1e12;
/// Ground-state Landé factor |g_F| of the 5²S₁/₂ states, Hz per gauss.
pub const G_F_HZ_PER_GAUSS: f64 = 0.70e6;
/// Lifetime of the 60P₁/₂ Rydberg state, s.
pub const TAU_60P: f64 = 133e-6;

const PERTURBATIVE_WARN: f64 = 0.2;
const PERTURBATIVE_MAX: f64 = 0.5;
const RESONANCE_TOL: f64 = 1e-6;

/// Which dressing branch supplies the single-particle light shift in Ṽ_αα.
///
/// The subscript on the first two terms of Ṽ_αα is ambiguous; `Opposite`
/// reads it as ᾱ = −α, which makes the large-R limit of Ṽ_αα equal to the
/// sum of two independent single-atom light shifts.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VaaBranch {
    #[default]
    Opposite,
    Same,
}

/// Relative phase between the dressed qubit basis and the Bell labels.
///
/// The step-like exchange terms W̃ fix J_x and J_y only up to a common sign,
/// set by the phase convention of |1⟩ on one atom: Z_a X_a Z_a = −X_a and
/// Z_a Y_a Z_a = −Y_a. Flipping that sign relabels ψ± ↔ ψ∓ and φ± ↔ φ∓ and
/// leaves the physics unchanged. `Flipped` uses J_x = −2(W̃₊₋ + W̃₊₊),
/// J_y = −2(W̃₊₋ − W̃₊₊), the convention under which the main-text pattern
/// protects |φ⁺⟩ and the alternative pattern protects |φ⁻⟩.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangePhase {
    #[default]
    Flipped,
    Literal,
}

impl ExchangePhase {
    pub fn sign(self) -> f64 {
        match self {
            ExchangePhase::Flipped => -1.0,
            ExchangePhase::Literal => 1.0,
        }
    }
}

/// Two-color dressing of the n²P₁/₂ manifold.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DressingParams {
    pub n: u32,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub c6a: f64,
    pub c6b: f64,
    pub c6c: f64,
    #[serde(default)]
    pub vaa_first_term_branch: VaaBranch,
    #[serde(default)]
    pub exchange_phase: ExchangePhase,
}

impl DressingParams {
    /// n = 60 channel coefficients.
    const C6_N60: (f64, f64, f64) = (-2.7e5 * MHZ, 1.1e3 * MHZ, 4.9e4 * MHZ);

    /// Main-text parameters: Δ₋ = −Δ₊ = 2π·50 MHz, Ω₋ = Ω₊/3 = 2π·3 MHz.
    pub fn paper_main() -> Self {
        let (c6a, c6b, c6c) = Self::C6_N60;
        DressingParams {
            n: 60,
            omega_plus: 9.0 * MHZ,
            omega_minus: 3.0 * MHZ,
            delta_plus: -50.0 * MHZ,
            delta_minus: 50.0 * MHZ,
            c6a,
            c6b,
            c6c,
            vaa_first_term_branch: VaaBranch::Opposite,
            exchange_phase: ExchangePhase::Flipped,
        }
    }

    /// Alternative pattern: Δ₊ = −2π·70 MHz, Δ₋ = 2π·30 MHz, Ω± = −2π·7 MHz.
    pub fn paper_appendix_c() -> Self {
        DressingParams {
            omega_plus: -7.0 * MHZ,
            omega_minus: -7.0 * MHZ,
            delta_plus: -70.0 * MHZ,
            delta_minus: 30.0 * MHZ,
            ..Self::paper_main()
        }
    }

    /// Checks the parameter region; returns non-fatal warnings.
    ///
    /// Δ₊ + Δ₋ = 0 is admitted: the main-text parameters sit exactly on
    /// that boundary, where the cross-channel resonance term vanishes.
    pub fn validate(&self) -> Result<Vec<String>> {
        let fields = [
            self.omega_plus,
            self.omega_minus,
            self.delta_plus,
            self.delta_minus,
            self.c6a,
            self.c6b,
            self.c6c,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dressing",
                reason: "all dressing parameters must be finite".into(),
            });
        }
        if self.delta_plus == 0.0 || self.delta_minus == 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "detunings must be nonzero".into(),
            });
        }
        let mut warnings = Vec::new();
        for (label, omega, delta) in [
            ("+", self.omega_plus, self.delta_plus),
            ("-", self.omega_minus, self.delta_minus),
        ] {
            let ratio = (omega / delta).abs();
            if ratio > PERTURBATIVE_MAX {
                return Err(Error::InvalidParameter {
                    name: "omega/delta",
                    reason: format!(
                        "|Omega{label}/Delta{label}| = {ratio:.3} exceeds {PERTURBATIVE_MAX}"
                    ),
                });
            }
            if ratio > PERTURBATIVE_WARN {
                warnings.push(format!(
                    "|Omega{label}/Delta{label}| = {ratio:.3} is above the perturbative guard {PERTURBATIVE_WARN}"
                ));
            }
        }
        if self.delta_plus / self.delta_minus >= 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "detunings must have opposite signs".into(),
            });
        }
        if self.delta_plus + self.delta_minus > 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!(
                    "Delta+ + Delta- = {:.4e} rad/s must not be positive",
                    self.delta_plus + self.delta_minus
                ),
            });
        }
        Ok(warnings)
    }

    fn branch(&self, plus: bool) -> (f64, f64) {
        if plus {
            (self.omega_plus, self.delta_plus)
        } else {
            (self.omega_minus, self.delta_minus)
        }
    }

    /// Same parameters with both Rabi frequencies scaled by `s`.
    pub fn with_rabi_scale(&self, s: f64) -> Self {
        DressingParams {
            omega_plus: s * self.omega_plus,
            omega_minus: s * self.omega_minus,
            ..*self
        }
    }

    /// Dressed interaction radius R_c = (|c₊₊| / 2|Δ₊|)^{1/6}.
    pub fn dressed_radius(&self) -> f64 {
        let (c_pp, _, _) = vdw_combination(self.c6a, self.c6b, self.c6c);
        (c_pp.abs() / (2.0 * self.delta_plus.abs())).powf(1.0 / 6.0)
    }
}

/// Bell-state van der Waals coefficients (c₊₊, c₊₋, w) from the channel
/// coefficients.
pub fn vdw_combination(c6a: f64, c6b: f64, c6c: f64) -> (f64, f64, f64) {
    let k = 2.0 / 81.0;
    (
        k * (5.0 * c6a + 14.0 * c6b + 8.0 * c6c),
        k * (c6a + 10.0 * c6b + 16.0 * c6c),
        k * (c6a + c6b - 2.0 * c6c),
    )
}

/// Bare van der Waals potentials at distance `r`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct VdwPotentials {
    pub v_pp: f64,
    pub v_pm: f64,
    pub w_pm: f64,
    pub w_pp: f64,
}

pub fn vdw_potentials(r: f64, params: &DressingParams) -> VdwPotentials {
    let (c_pp, c_pm, w) = vdw_combination(params.c6a, params.c6b, params.c6c);
    let r6 = r.powi(6);
    let w_pm = w / r6;
    VdwPotentials {
        v_pp: c_pp / r6,
        v_pm: c_pm / r6,
        w_pm,
        w_pp: -3.0 * w_pm,
    }
}

/// Effective step-like potentials at one distance.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Steplike {
    pub v_mm: f64,
    pub v_pm: f64,
    pub v_pp: f64,
    pub w_pm: f64,
    pub w_pp: f64,
}

fn check_denominator(value: f64, scale: f64, name: &'static str, r: f64) -> Result<()> {
    if !value.is_finite() || value.abs() <= RESONANCE_TOL * scale {
        return Err(Error::Resonance {
            denominator: name,
            r_um: r,
        });
    }
    Ok(())
}

/// Evaluates the dressed step-like potentials Ṽ₋₋, Ṽ₊₋, Ṽ₊₊, W̃₊₋, W̃₊₊.
pub fn steplike(r: f64, params: &DressingParams) -> Result<Steplike> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter {
            name: "R",
            reason: format!("distance must be positive, got {r}"),
        });
    }
    let (op, dp) = (params.omega_plus, params.delta_plus);
    let (om, dm) = (params.omega_minus, params.delta_minus);
    let bare = vdw_potentials(r, params);

    // Same-branch pair channel.
    let a_p = bare.v_pp - 2.0 * dp;
    let a_m = bare.v_pp - 2.0 * dm;
    let d1 = bare.w_pp * bare.w_pp - a_p * a_m;
    check_denominator(
        d1,
        bare.w_pp * bare.w_pp
            + (bare.v_pp.abs() + 2.0 * dp.abs()) * (bare.v_pp.abs() + 2.0 * dm.abs()),
        "W++^2 - (V++ - 2D+)(V++ - 2D-)",
        r,
    )?;

    let v_aa = |plus: bool| {
        let (o_bar, d_bar) = params.branch(!plus);
        let (o_first, d_first) = match params.vaa_first_term_branch {
            VaaBranch::Opposite => (o_bar, d_bar),
            VaaBranch::Same => params.branch(plus),
        };
        let (_, d_alpha) = params.branch(plus);
        o_first.powi(2) / (2.0 * d_first) - o_first.powi(4) / (4.0 * d_first.powi(3))
            + o_bar.powi(4) / (4.0 * d_bar * d_bar) * (bare.v_pp - 2.0 * d_alpha) / d1
    };

    // Cross-branch pair channel; its resonant part carries a Δ±² prefactor.
    let d_sum = dp + dm;
    let k = op * op * om * om / (16.0 * dp * dp * dm * dm);
    let (cross_v, w_pm) = if d_sum == 0.0 {
        (0.0, 0.0)
    } else {
        let u = d_sum - bare.v_pm;
        let d2 = u * u - bare.w_pm * bare.w_pm;
        check_denominator(
            d2,
            (d_sum.abs() + bare.v_pm.abs()).powi(2) + bare.w_pm * bare.w_pm,
            "(D+- - V+-)^2 - W+-^2",
            r,
        )?;
        (
            k * d_sum * d_sum * u / d2,
            k * d_sum * d_sum * bare.w_pm / d2,
        )
    };
    let v_pm = om * om / (4.0 * dm) + op * op / (4.0 * dp)
        - op * op * om * om / (16.0 * dp * dp * dm)
        - op * op * om * om / (16.0 * dm * dm * dp)
        - om.powi(4) / (16.0 * dm.powi(3))
        - op.powi(4) / (16.0 * dp.powi(3))
        + cross_v;
    let w_pp = op * op * om * om / (4.0 * dp * dm) * bare.w_pp / d1;

    Ok(Steplike {
        v_mm: v_aa(false),
        v_pm,
        v_pp: v_aa(true),
        w_pm,
        w_pp,
    })
}

/// Spin-pattern coefficients at one distance.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternPoint {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub jpar: f64,
}

impl PatternPoint {
    /// J_z = (Ṽ₋₋ − 2Ṽ₊₋ + Ṽ₊₊)/4, J_x = 2(W̃₊₋ + W̃₊₊), J_y = 2(W̃₊₋ − W̃₊₊),
    /// J_∥ = (Ṽ₋₋ − Ṽ₊₊)/4, with J_x and J_y multiplied by the exchange sign.
    pub fn from_steplike(s: &Steplike, phase: ExchangePhase) -> Self {
        let sign = phase.sign();
        PatternPoint {
            jx: sign * 2.0 * (s.w_pm + s.w_pp),
            jy: sign * 2.0 * (s.w_pm - s.w_pp),
            jz: 0.25 * (s.v_mm - 2.0 * s.v_pm + s.v_pp),
            jpar: 0.25 * (s.v_mm - s.v_pp),
        }
    }
}

/// Anything that yields J_x, J_y, J_z, J_∥ as a function of distance.
pub trait RadialPattern: Sync {
    fn at(&self, r: f64) -> Result<PatternPoint>;
}

impl RadialPattern for DressingParams {
    fn at(&self, r: f64) -> Result<PatternPoint> {
        steplike(r, self).map(|s| PatternPoint::from_steplike(&s, self.exchange_phase))
    }
}

/// The dipolar pattern J_α = (d²/R³) j_α.
impl RadialPattern for DipolarModelParams {
    fn at(&self, r: f64) -> Result<PatternPoint> {
        let s = self.d2 / (r * r * r);
        Ok(PatternPoint {
            jx: s * self.j_x,
            jy: s * self.j_y,
            jz: s * self.j_z,
            jpar: 0.0,
        })
    }
}

/// Pattern that vanishes everywhere.
#[derive(Copy, Clone, Debug, Default)]
pub struct ZeroPattern;

impl RadialPattern for ZeroPattern {
    fn at(&self, _r: f64) -> Result<PatternPoint> {
        Ok(PatternPoint::default())
    }
}

/// `n` logarithmically spaced points on [`r_min`, `r_max`].
pub fn log_grid(r_min: f64, r_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(r_min > 0.0 && r_max > r_min && n >= 2) {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!(
                "need 0 < r_min < r_max and n >= 2, got [{r_min}, {r_max}] with n = {n}"
            ),
        });
    }
    let (a, b) = (r_min.ln(), r_max.ln());
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    grid[0] = r_min;
    grid[n - 1] = r_max;
    Ok(grid)
}

/// Default landscape grid: 2000 log-spaced points on [0.2, 6] μm.
pub fn default_grid() -> Vec<f64> {
    log_grid(0.2, 6.0, 2000).expect("static grid parameters are valid")
}

/// Spin pattern sampled on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinPattern {
    pub r_grid: Vec<f64>,
    pub jx: Vec<f64>,
    pub jy: Vec<f64>,
    pub jz: Vec<f64>,
    pub jpar: Vec<f64>,
}

impl SpinPattern {
    pub fn len(&self) -> usize {
        self.r_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_grid.is_empty()
    }

    pub fn point(&self, i: usize) -> PatternPoint {
        PatternPoint {
            jx: self.jx[i],
            jy: self.jy[i],
            jz: self.jz[i],
            jpar: self.jpar[i],
        }
    }

    /// Largest relative change of any J array over the last decade of the
    /// grid, normalized by that array's largest magnitude on the grid.
    pub fn asymptotic_slope(&self) -> f64 {
        let r_end = *self.r_grid.last().unwrap_or(&0.0);
        let start = self
            .r_grid
            .iter()
            .position(|&r| r >= r_end / 10.0)
            .unwrap_or(0);
        let last = self.len().saturating_sub(1);
        [&self.jx, &self.jy, &self.jz, &self.jpar]
            .iter()
            .map(|j| {
                let scale = j.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if scale == 0.0 {
                    0.0
                } else {
                    (j[last] - j[start]).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid[0] <= 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter {
            name: "R_grid",
            reason: "grid must be non-empty, positive and strictly increasing".into(),
        });
    }
    Ok(())
}

/// Samples `source` on `grid` (data-parallel over points).
pub fn spin_pattern(grid: &[f64], source: &dyn RadialPattern) -> Result<SpinPattern> {
    check_grid(grid)?;
    let points: Vec<PatternPoint> = grid
        .par_iter()
        .map(|&r| source.at(r))
        .collect::<Result<_>>()?;
    if points
        .iter()
        .any(|p| ![p.jx, p.jy, p.jz, p.jpar].iter().all(|x| x.is_finite()))
    {
        return Err(Error::InvalidParameter {
            name: "pattern",
            reason: "non-finite coefficient".into(),
        });
    }
    Ok(SpinPattern {
        r_grid: grid.to_vec(),
        jx: points.iter().map(|p| p.jx).collect(),
        jy: points.iter().map(|p| p.jy).collect(),
        jz: points.iter().map(|p| p.jz).collect(),
        jpar: points.iter().map(|p| p.jpar).collect(),
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrapKind {
    Single,
    Double,
}

/// Spin-independent tweezer potential for the mobile atom.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSpec {
    pub kind: TrapKind,
    /// rad/s per μm²
    pub v0: f64,
    pub delta1: f64,
    #[serde(default)]
    pub delta2: f64,
}

impl TrapSpec {
    /// Two neighboring tweezers at 1.6 μm and 2.0 μm, V₀ = 15 × 10³ rad/s/μm².
    pub fn paper_main() -> Self {
        TrapSpec {
            kind: TrapKind::Double,
            v0: 15e3,
            delta1: 1.6,
            delta2: 2.0,
        }
    }

    /// Single tweezer at 2.30 μm.
    pub fn paper_appendix_c() -> Self {
        TrapSpec {
            kind: TrapKind::Single,
            v0: 15e3,
            delta1: 2.30,
            delta2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v0 > 0.0) || !self.v0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "V0",
                reason: format!("must be positive, got {}", self.v0),
            });
        }
        if !self.delta1.is_finite() || !self.delta2.is_finite() {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "trap centers must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn potential(&self, r: f64) -> f64 {
        match self.kind {
            TrapKind::Single => self.v0 * (r - self.delta1).powi(2),
            TrapKind::Double => self.v0 * ((r - self.delta1).powi(2) + (r - self.delta2).powi(2)),
        }
    }

    pub fn center(&self) -> f64 {
        match self.kind {
            TrapKind::Single => self.delta1,
            TrapKind::Double => 0.5 * (self.delta1 + self.delta2),
        }
    }
}

/// Angular trap frequency of ⁸⁷Rb in a potential of curvature `v2`
/// (rad/s per μm²); `None` if the curvature is not positive.
pub fn trap_frequency(v2: f64) -> Option<f64> {
    (v2 > 0.0).then(|| (HBAR_OVER_M_RB87 * v2).sqrt())
}

/// Interaction energy of `bell` at one pattern point. With `compensate`
/// the J_∥ term is dropped and the Bell eigenvalue is exact; otherwise the
/// eigenvalue of the full operator whose eigenvector overlaps most with
/// `bell` is returned.
pub fn interaction_energy(bell: BellState, p: &PatternPoint, compensate: bool) -> f64 {
    if compensate || p.jpar == 0.0 {
        return bell.eigenvalue(p.jx, p.jy, p.jz);
    }
    let op = interaction_operator(p.jx, p.jy, p.jz, p.jpar);
    let eig = op.matrix().symmetric_eigen();
    let target = bell.state();
    let overlaps: Vec<f64> = (0..4)
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            target.amplitudes().dotc(&v).norm_sqr()
        })
        .collect();
    let best = (0..4)
        .max_by(|&a, &b| overlaps[a].total_cmp(&overlaps[b]))
        .unwrap_or(0);
    eig.eigenvalues[best]
}

/// A located interior minimum of one landscape.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeMinimum {
    pub r0: f64,
    pub value: f64,
    /// V''(R₀), rad/s per μm².
    pub curvature: f64,
    /// Angular trap frequency for ⁸⁷Rb, rad/s.
    pub trap_frequency: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coincidence {
    pub first: BellState,
    pub second: BellState,
    pub max_difference: f64,
}

/// Bell-state landscapes V(R) = V_t(R) + ⟨B|V_I(R)|B⟩.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub pattern: SpinPattern,
    pub trap: TrapSpec,
    pub compensate_parallel: bool,
    /// Indexed by [`BellState::index`].
    pub values: [Vec<f64>; 4],
    /// Interior minima per Bell state, deepest first. Empty if the state
    /// has no bound position.
    pub minima: [Vec<LandscapeMinimum>; 4],
    /// Pairs whose traces agree within 1% of the interaction range.
    pub coincidences: Vec<Coincidence>,
    /// Largest spread of the spin-dependent part over the grid.
    pub interaction_range: f64,
}

/// Fraction of the interaction range below which two traces coincide.
pub const COINCIDENCE_FRACTION: f64 = 0.01;
const MINIMUM_TOL_UM: f64 = 1e-4;

fn golden_section(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

impl Landscape {
    /// Builds all four landscapes on `grid`. Minima are bracketed on the
    /// grid and refined to 1e-4 μm against `source`.
    pub fn new(
        source: &dyn RadialPattern,
        grid: &[f64],
        trap: TrapSpec,
        compensate_parallel: bool,
    ) -> Result<Self> {
        trap.validate()?;
        let pattern = spin_pattern(grid, source)?;
        let interaction: [Vec<f64>; 4] = BellState::ALL.map(|bell| {
            (0..pattern.len())
                .map(|i| interaction_energy(bell, &pattern.point(i), compensate_parallel))
                .collect()
        });
        let values: [Vec<f64>; 4] = BellState::ALL.map(|bell| {
            grid.iter()
                .zip(&interaction[bell.index()])
                .map(|(&r, e)| trap.potential(r) + e)
                .collect()
        });

        let (lo, hi) = interaction
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        let interaction_range = if hi > lo { hi - lo } else { 0.0 };

        let mut coincidences = Vec::new();
        for (i, &a) in BellState::ALL.iter().enumerate() {
            for &b in &BellState::ALL[i + 1..] {
                let max_difference = values[a.index()]
                    .iter()
                    .zip(&values[b.index()])
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if max_difference <= COINCIDENCE_FRACTION * interaction_range {
                    coincidences.push(Coincidence {
                        first: a,
                        second: b,
                        max_difference,
                    });
                }
            }
        }

        let mut minima: [Vec<LandscapeMinimum>; 4] = Default::default();
        for bell in BellState::ALL {
            let v = &values[bell.index()];
            let eval = |r: f64| -> Result<f64> {
                Ok(trap.potential(r)
                    + interaction_energy(bell, &source.at(r)?, compensate_parallel))
            };
            for i in 1..grid.len().saturating_sub(1) {
                if v[i] < v[i - 1] && v[i] <= v[i + 1] {
                    let r0 =
                        golden_section(&eval, grid[i - 1], grid[i + 1], MINIMUM_TOL_UM * 1e-2)?;
                    let h = 1e-3 * r0.max(1.0) * 0.1;
                    let (vm, v0, vp) = (eval(r0 - h)?, eval(r0)?, eval(r0 + h)?);
                    let curvature = (vp - 2.0 * v0 + vm) / (h * h);
                    minima[bell.index()].push(LandscapeMinimum {
                        r0,
                        value: v0,
                        curvature,
                        trap_frequency: trap_frequency(curvature),
                    });
                }
            }
            minima[bell.index()].sort_by(|a, b| a.value.total_cmp(&b.value));
        }

        Ok(Landscape {
            pattern,
            trap,
            compensate_parallel,
            values,
            minima,
            coincidences,
            interaction_range,
        })
    }

    pub fn values(&self, bell: BellState) -> &[f64] {
        &self.values[bell.index()]
    }

    /// Deepest interior minimum of `bell`, if any.
    pub fn minimum(&self, bell: BellState) -> Option<&LandscapeMinimum> {
        self.minima[bell.index()].first()
    }

    pub fn coincident(&self, a: BellState, b: BellState) -> bool {
        self.coincidences
            .iter()
            .any(|c| (c.first == a && c.second == b) || (c.first == b && c.second == a))
    }

    /// Distances between neighboring deepest minima, sorted by position.
    /// Coincident states contribute a single minimum.
    pub fn minimum_separations(&self) -> Vec<f64> {
        let r = self.cluster_positions();
        r.windows(2).map(|w| w[1].1 - w[0].1).collect()
    }

    /// (member states, position) of each distinct minimum, sorted by R.
    fn cluster_positions(&self) -> Vec<(Vec<BellState>, f64)> {
        let mut clusters: Vec<(Vec<BellState>, f64)> = Vec::new();
        for bell in BellState::ALL {
            let Some(m) = self.minimum(bell) else {
                continue;
            };
            match clusters
                .iter_mut()
                .find(|(members, _)| members.iter().any(|&o| self.coincident(o, bell)))
            {
                Some((members, _)) => members.push(bell),
                None => clusters.push((vec![bell], m.r0)),
            }
        }
        clusters.sort_by(|a, b| a.1.total_cmp(&b.1));
        clusters
    }

    /// State suited for protection: it must have a minimum, share its trace
    /// with no other state, and sit between the minima that its error
    /// partners fall into, so that the two correctors lie on opposite
    /// sides. Returns `None` when no state qualifies.
    pub fn suggested_protected_state(&self) -> Option<BellState> {
        let clusters = self.cluster_positions();
        if clusters.len() < 3 {
            return None;
        }
        clusters[1..clusters.len() - 1]
            .iter()
            .filter(|(members, _)| members.len() == 1)
            .map(|(members, _)| members[0])
            .next()
    }
}

/// Mean effective field and the static field needed to cancel it.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParallelFieldReport {
    pub r_min: f64,
    pub r_max: f64,
    /// rad/s
    pub mean_j_par: f64,
    /// gauss
    pub compensating_b: f64,
}

/// Averages J_∥ over [`r_min`, `r_max`] (trapezoid rule in R) and converts
/// it to a field with B = ⟨J_∥⟩ / (2π g_F).
pub fn parallel_field_report(
    pattern: &SpinPattern,
    r_min: f64,
    r_max: f64,
) -> Result<ParallelFieldReport> {
    let first = *pattern.r_grid.first().unwrap_or(&f64::NAN);
    let last = *pattern.r_grid.last().unwrap_or(&f64::NAN);
    if !(r_min < r_max && r_min >= first && r_max <= last) {
        return Err(Error::InvalidParameter {
            name: "R_range",
            reason: format!(
                "[{r_min}, {r_max}] must be a non-empty range inside [{first}, {last}]"
            ),
        });
    }
    let pts: Vec<(f64, f64)> = pattern
        .r_grid
        .iter()
        .zip(&pattern.jpar)
        .filter(|(r, _)| **r >= r_min && **r <= r_max)
        .map(|(&r, &j)| (r, j))
        .collect();
    let mean_j_par = match pts.len() {
        0 => return Err(Error::EmptyWindow { t_start: r_min }),
        1 => pts[0].1,
        _ => {
            let area: f64 = pts
                .windows(2)
                .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
                .sum();
            area / (pts[pts.len() - 1].0 - pts[0].0)
        }
    };
    Ok(ParallelFieldReport {
        r_min,
        r_max,
        mean_j_par,
        compensating_b: mean_j_par / (TAU * G_F_HZ_PER_GAUSS),
    })
}

/// Dressed-state lifetime and the matching depolarizing rate.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DressedLifetime {
    pub tau_s: f64,
    pub gamma: f64,
}

/// Value quoted alongside the lifetime estimate; it does not follow from
/// τ_s = (2Δ/Ω)² τ_r with the stated parameters and is reported for
/// comparison only.
pub const QUOTED_TAU_S: f64 = 9e-3;

/// τ_s = (2Δ/Ω)² τ_r.
pub fn dressed_lifetime(delta: f64, omega: f64, tau_r: f64) -> Result<DressedLifetime> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::InvalidParameter {
            name: "Omega",
            reason: "Rabi frequency must be nonzero".into(),
        });
    }
    let tau_s = (2.0 * delta / omega).powi(2) * tau_r;
    Ok(DressedLifetime {
        tau_s,
        gamma: 1.0 / tau_s,
    })
}

/// Dense-diagonalization cross-check: eigenvalues of V_I (with J_∥ = 0).
pub fn dense_interaction_spectrum(p: &PatternPoint) -> [f64; 4] {
    let op = interaction_operator(p.jx, p.jy, p.jz, 0.0);
    let m: Matrix4<C64> = *op.matrix();
    let basis = bell_basis();
    let eig = m.symmetric_eigen();
    let mut out = [0.0; 4];
    for (k, b) in basis.iter().enumerate() {
        let best = (0..4)
            .max_by(|&x, &y| {
                let ox = b.amplitudes().dotc(&eig.eigenvectors.column(x)).norm_sqr();
                let oy = b.amplitudes().dotc(&eig.eigenvectors.column(y)).norm_sqr();
                ox.total_cmp(&oy)
            })
            .unwrap_or(0);
        out[k] = eig.eigenvalues[best];
    }
    out
}
