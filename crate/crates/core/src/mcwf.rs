//! Coupled spin-motion Monte Carlo wavefunction dynamics.
//!
//! The spin of the nucleus is monitored in the Bell basis, so between jumps
//! it is a Bell ray. The motion of atom b lives in a truncated Fock space of
//! the |φ⁺⟩ trap; each Bell sector displaces the trap center, which enters
//! the Hamiltonian as a linear force term:
//!
//! H(|ψ⟩) = ω_t a†a − g(|ψ⟩)(a + a†),  g = ω_t ΔR₀(|ψ⟩) / (2 R_zpm).
//!
//! Motion steps (MMC) unfold the damped, optionally thermal, oscillator;
//! spin steps (SMMC) add the position-conditioned corrector jumps and the
//! depolarizing channel on particle b.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logical::{Corrector, Pauli, PauliString};
use crate::potentials::Landscape;
use crate::quantum::{
    ladder, BellState, MotionFrame, MotionOperator, MotionState, Particle, PositionProbe,
    SpinOperator, SpinState, C64, DEFAULT_TAIL_TOL,
};

/// ħ / k_B in K·s.
pub const HBAR_OVER_KB: f64 = 7.638_232_577e-12;

/// Largest admissible first-order jump probability per step.
pub const MAX_STEP_PROBABILITY: f64 = 0.1;

const BELL_TOL: f64 = 1e-6;
const NORM_TOL: f64 = 1e-9;

/// Parameters of one SMMC run. Rates are in 1/s, ω_t in rad/s, lengths in
/// μm and times in s. Corrector positions are relative to the |φ⁺⟩ trap
/// minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub gamma: f64,
    pub omega_t: f64,
    pub kappa: f64,
    pub dt: f64,
    pub t_final: f64,
    pub r_l1: f64,
    pub r_l2: f64,
    pub corrector_width: f64,
    pub r01: f64,
    pub r10: f64,
    pub r00: f64,
    pub nbar: f64,
    pub r_zpm: f64,
    pub wavepacket_sigma: f64,
    pub fock_dim: usize,
    pub record_stride: usize,
    pub correctors_enabled: bool,
    pub seed: u64,
}

impl SimParams {
    /// Damping reading κ = (0.1 ms)·ω_t² with ω_t angular.
    pub fn kappa_caption_angular(omega_t: f64) -> f64 {
        1e-4 * omega_t * omega_t
    }

    /// Damping reading κ = (0.1 ms)·(ω_t/2π)² with ω_t cyclic.
    pub fn kappa_caption_cyclic(omega_t: f64) -> f64 {
        let f = omega_t / std::f64::consts::TAU;
        1e-4 * f * f
    }

    /// Main simulation preset. Corrector L1 (Z_b) sits on the |φ⁻⟩ side of
    /// the |φ⁺⟩ minimum and L2 (X_b) on the |ψ±⟩ side.
    pub fn paper_main() -> Self {
        let omega_t = std::f64::consts::TAU * 1e3;
        SimParams {
            gamma: 100.0,
            omega_t,
            kappa: Self::kappa_caption_angular(omega_t),
            dt: 5e-6,
            t_final: 20e-3,
            r_l1: 0.63,
            r_l2: -0.63,
            corrector_width: CALIBRATED_CORRECTOR_WIDTH,
            r01: 1.90,
            r10: 2.20,
            r00: 1.64,
            nbar: 0.0,
            r_zpm: 0.23,
            wavepacket_sigma: 0.22,
            fock_dim: 32,
            record_stride: 20,
            correctors_enabled: true,
            seed: 1,
        }
    }

    /// Takes the three sector centers from the deepest landscape minima.
    pub fn with_landscape_centers(&self, landscape: &Landscape) -> Result<Self> {
        let center = |bell: BellState| {
            landscape
                .minimum(bell)
                .map(|m| m.r0)
                .ok_or(Error::InvalidParameter {
                    name: "landscape",
                    reason: format!("no minimum for {bell}"),
                })
        };
        Ok(SimParams {
            r01: center(BellState::PhiPlus)?,
            r10: center(BellState::PhiMinus)?,
            r00: center(BellState::PsiMinus)?,
            ..self.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_t", self.omega_t),
            ("dt", self.dt),
            ("t_final", self.t_final),
            ("corrector_width", self.corrector_width),
            ("r_zpm", self.r_zpm),
            ("wavepacket_sigma", self.wavepacket_sigma),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        let non_negative = [
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("nbar", self.nbar),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be non-negative and finite, got {v}"),
                });
            }
        }
        for (name, v) in [
            ("r_l1", self.r_l1),
            ("r_l2", self.r_l2),
            ("r01", self.r01),
            ("r10", self.r10),
            ("r00", self.r00),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite".into(),
                });
            }
        }
        if self.fock_dim < 8 {
            return Err(Error::Dimension(format!(
                "Fock dimension must be at least 8, got {}",
                self.fock_dim
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "record_stride",
                reason: "must be at least 1".into(),
            });
        }
        if self.t_final < self.dt {
            return Err(Error::InvalidParameter {
                name: "t_final",
                reason: "must cover at least one time step".into(),
            });
        }
        let depol = self.gamma * self.dt;
        if depol >= MAX_STEP_PROBABILITY {
            return Err(Error::TimeStep {
                what: "gamma*dt",
                value: depol,
                limit: MAX_STEP_PROBABILITY,
            });
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Trap-center shift ΔR₀ of a Bell sector relative to |φ⁺⟩.
    pub fn displacement(&self, bell: BellState) -> f64 {
        match Sector::of(bell) {
            Sector::PhiPlus => 0.0,
            Sector::PhiMinus => self.r10 - self.r01,
            Sector::Psi => self.r00 - self.r01,
        }
    }

    /// Force coupling g = ω_t ΔR₀ / (2 R_zpm) in rad/s.
    pub fn coupling(&self, bell: BellState) -> f64 {
        self.omega_t * self.displacement(bell) / (2.0 * self.r_zpm)
    }

    pub fn frame(&self) -> Result<MotionFrame> {
        MotionFrame::new(0.0, self.r_zpm)
    }
}

/// Corrector width (μm) fixed once as the grid value whose main-preset
/// steady-state overlap (10³ trajectories) lies closest to 0.70.
pub const CALIBRATED_CORRECTOR_WIDTH: f64 = 0.012;

/// n̄ = 1 / (exp(ħω/k_BT) − 1).
pub fn nbar_from_temperature(temperature_k: f64, omega_t: f64) -> Result<f64> {
    if !(temperature_k >= 0.0) || !(omega_t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "temperature",
            reason: format!("need T >= 0 and omega_t > 0, got T = {temperature_k}"),
        });
    }
    if temperature_k == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR_OVER_KB * omega_t / temperature_k).exp_m1())
}

/// Motion sectors: ψ⁺ and ψ⁻ share a trap.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Sector {
    PhiPlus,
    PhiMinus,
    Psi,
}

impl Sector {
    pub const ALL: [Sector; 3] = [Sector::PhiPlus, Sector::PhiMinus, Sector::Psi];

    pub fn of(bell: BellState) -> Sector {
        match bell {
            BellState::PhiPlus => Sector::PhiPlus,
            BellState::PhiMinus => Sector::PhiMinus,
            BellState::PsiPlus | BellState::PsiMinus => Sector::Psi,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn representative(self) -> BellState {
        match self {
            Sector::PhiPlus => BellState::PhiPlus,
            Sector::PhiMinus => BellState::PhiMinus,
            Sector::Psi => BellState::PsiMinus,
        }
    }
}

/// Bell label of a spin state that must be a Bell ray.
pub fn bell_label(spin: &SpinState) -> Result<BellState> {
    Ok(spin.bell_ray(BELL_TOL)?.0)
}

/// H(|ψ⟩) = ω_t a†a − g(|ψ⟩)(a + a†).
pub fn motion_hamiltonian(spin: &SpinState, params: &SimParams) -> Result<MotionOperator> {
    let bell = bell_label(spin)?;
    sector_hamiltonian(bell, params)
}

fn sector_hamiltonian(bell: BellState, params: &SimParams) -> Result<MotionOperator> {
    let (a, a_dag) = ladder(params.fock_dim)?;
    let number = a_dag.matrix() * a.matrix();
    let g = params.coupling(bell);
    let h = number * C64::from(params.omega_t) - (a.matrix() + a_dag.matrix()) * C64::from(g);
    Ok(MotionOperator::from_matrix(h))
}

/// Correction rates (γ_L1, γ_L2) in 1/s for a motion state.
#[derive(Clone, Debug)]
pub struct CorrectorProbes {
    l1: PositionProbe,
    l2: PositionProbe,
    width: f64,
    dt: f64,
    enabled: bool,
}

impl CorrectorProbes {
    pub fn new(params: &SimParams) -> Result<Self> {
        let frame = params.frame()?;
        Ok(CorrectorProbes {
            l1: PositionProbe::new(params.fock_dim, frame, params.r_l1),
            l2: PositionProbe::new(params.fock_dim, frame, params.r_l2),
            width: params.corrector_width,
            dt: params.dt,
            enabled: params.correctors_enabled,
        })
    }

    /// γ_Li δt = |φ(R_Li)|² · corrector_width.
    pub fn rates(&self, phi: &MotionState) -> Result<(f64, f64)> {
        if !self.enabled {
            return Ok((0.0, 0.0));
        }
        let mut out = [0.0; 2];
        for (slot, probe) in out.iter_mut().zip([&self.l1, &self.l2]) {
            let p = probe.density(phi.amplitudes()) * self.width;
            if p > 1.0 {
                return Err(Error::TimeStep {
                    what: "gamma_L*dt",
                    value: p,
                    limit: 1.0,
                });
            }
            *slot = p / self.dt;
        }
        Ok((out[0], out[1]))
    }
}

/// Correction rates for a single state.
pub fn correction_rates(phi: &MotionState, params: &SimParams) -> Result<(f64, f64)> {
    CorrectorProbes::new(params)?.rates(phi)
}

/// Motion jump channels.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionJump {
    PhononDecay,
    PhononExcite,
}

/// Deepest halving of δt the motion step may use to keep the first-order
/// jump probability below [`MAX_STEP_PROBABILITY`] (δt/16).
pub const MAX_SUBSTEP_LEVEL: usize = 4;

/// Precomputed no-jump propagators exp(−iĤδt/2^k), k = 0..=MAX_SUBSTEP_LEVEL,
/// with Ĥ = H − (i/2)κ[(n̄+1)a†a + n̄ a a†] for one Hamiltonian.
#[derive(Clone, Debug)]
pub struct MotionPropagator {
    no_jump: Vec<DMatrix<C64>>,
    a: DMatrix<C64>,
    a_dag: DMatrix<C64>,
    kappa: f64,
    nbar: f64,
    dt: f64,
}

impl MotionPropagator {
    pub fn new(h: &MotionOperator, kappa: f64, nbar: f64, dt: f64) -> Result<Self> {
        let n = h.dim();
        let (a, a_dag) = ladder(n)?;
        let (a, a_dag) = (a.into_matrix(), a_dag.into_matrix());
        let decay = (&a_dag * &a) * C64::from(kappa * (nbar + 1.0))
            + (&a * &a_dag) * C64::from(kappa * nbar);
        let generator = h.matrix() - decay * C64::new(0.0, 0.5);
        let no_jump = (0..=MAX_SUBSTEP_LEVEL)
            .map(|k| (&generator * C64::new(0.0, -dt / (1u32 << k) as f64)).exp())
            .collect();
        Ok(MotionPropagator {
            no_jump,
            a,
            a_dag,
            kappa,
            nbar,
            dt,
        })
    }

    /// (δv↓, δv↑) = (κ(n̄+1)δt⟨a†a⟩, κn̄δt⟨aa†⟩) for δt = dt/2^level.
    pub fn jump_probabilities(&self, phi: &MotionState, level: usize) -> (f64, f64) {
        let h = self.dt / (1u32 << level) as f64;
        (
            self.kappa * (self.nbar + 1.0) * h * phi.mean_number(),
            self.kappa * self.nbar * h * phi.mean_anti_number(),
        )
    }

    /// One MMC step of length dt: jump with probability δv↓ (apply a) or
    /// δv↑ (apply a†), then non-Hermitian evolution over dt; the result is
    /// renormalized. Fails if the jump probability reaches
    /// [`MAX_STEP_PROBABILITY`].
    pub fn step(&self, phi: &MotionState, q: f64) -> Result<(MotionState, Option<MotionJump>)> {
        self.step_at(phi, q, 0)
    }

    fn step_at(
        &self,
        phi: &MotionState,
        q: f64,
        level: usize,
    ) -> Result<(MotionState, Option<MotionJump>)> {
        let (down, up) = self.jump_probabilities(phi, level);
        if down + up >= MAX_STEP_PROBABILITY {
            return Err(Error::TimeStep {
                what: "kappa*dt*<n>",
                value: down + up,
                limit: MAX_STEP_PROBABILITY,
            });
        }
        let frame = phi.frame();
        let u = &self.no_jump[level];
        // A jump step still spends δt: the jump is followed by the no-jump
        // propagator, which makes coherent-state damping exact.
        if q < down {
            let next = MotionState::renormalized(u * (&self.a * phi.amplitudes()), frame)?;
            Ok((next, Some(MotionJump::PhononDecay)))
        } else if q < down + up {
            let next = MotionState::renormalized(u * (&self.a_dag * phi.amplitudes()), frame)?;
            next.check_tail(DEFAULT_TAIL_TOL)?;
            Ok((next, Some(MotionJump::PhononExcite)))
        } else {
            let next = MotionState::renormalized(u * phi.amplitudes(), frame)?;
            Ok((next, None))
        }
    }

    /// Advances by dt, halving the step (recursively, down to
    /// dt/2^MAX_SUBSTEP_LEVEL) wherever the jump probability would reach
    /// [`MAX_STEP_PROBABILITY`]. Jumps are appended to `jumps`.
    pub fn advance<R: RngExt>(
        &self,
        phi: MotionState,
        rng: &mut R,
        jumps: &mut Vec<MotionJump>,
    ) -> Result<MotionState> {
        self.advance_at(phi, 0, rng, jumps)
    }

    fn advance_at<R: RngExt>(
        &self,
        phi: MotionState,
        level: usize,
        rng: &mut R,
        jumps: &mut Vec<MotionJump>,
    ) -> Result<MotionState> {
        let (down, up) = self.jump_probabilities(&phi, level);
        if down + up < MAX_STEP_PROBABILITY || level == MAX_SUBSTEP_LEVEL {
            let (next, jump) = self.step_at(&phi, rng.random::<f64>(), level)?;
            jumps.extend(jump);
            return Ok(next);
        }
        let half = self.advance_at(phi, level + 1, rng, jumps)?;
        self.advance_at(half, level + 1, rng, jumps)
    }
}

/// One MMC step with a freshly built propagator (convenience form).
pub fn mmc_step<R: RngExt>(
    phi: &MotionState,
    h: &MotionOperator,
    kappa: f64,
    nbar: f64,
    dt: f64,
    rng: &mut R,
) -> Result<MotionState> {
    let prop = MotionPropagator::new(h, kappa, nbar, dt)?;
    prop.advance(phi.clone(), rng, &mut Vec::new())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    L1Correct,
    L2Correct,
    DepolX,
    DepolY,
    DepolZ,
    PhononDecay,
    PhononExcite,
}

impl JumpKind {
    /// Spin action of a spin jump; `None` for motion jumps.
    pub fn spin_action(self) -> Option<PauliString> {
        match self {
            JumpKind::L1Correct => Some(Corrector::L1.spin_action()),
            JumpKind::L2Correct => Some(Corrector::L2.spin_action()),
            JumpKind::DepolX => Some(PauliString::on(Particle::B, Pauli::X)),
            JumpKind::DepolY => Some(PauliString::on(Particle::B, Pauli::Y)),
            JumpKind::DepolZ => Some(PauliString::on(Particle::B, Pauli::Z)),
            JumpKind::PhononDecay | JumpKind::PhononExcite => None,
        }
    }

    pub fn is_corrective(self) -> bool {
        matches!(self, JumpKind::L1Correct | JumpKind::L2Correct)
    }
}

impl From<MotionJump> for JumpKind {
    fn from(j: MotionJump) -> Self {
        match j {
            MotionJump::PhononDecay => JumpKind::PhononDecay,
            MotionJump::PhononExcite => JumpKind::PhononExcite,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub kind: JumpKind,
    pub spin_before: BellState,
    pub spin_after: BellState,
    /// Position the motion collapsed to, for corrective jumps.
    pub collapse_um: Option<f64>,
}

/// Observables of one trajectory, sampled every `record_stride` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub overlap: Vec<f64>,
    pub pos_mean: Vec<f64>,
    pub pos_var: Vec<f64>,
    pub mean_number: Vec<f64>,
    pub gamma_l1: Vec<f64>,
    pub gamma_l2: Vec<f64>,
    pub events: Vec<JumpEvent>,
}

impl TrajectoryRecord {
    fn with_capacity(n: usize) -> Self {
        TrajectoryRecord {
            times: Vec::with_capacity(n),
            overlap: Vec::with_capacity(n),
            pos_mean: Vec::with_capacity(n),
            pos_var: Vec::with_capacity(n),
            mean_number: Vec::with_capacity(n),
            gamma_l1: Vec::with_capacity(n),
            gamma_l2: Vec::with_capacity(n),
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Everything that depends only on the parameters: sector Hamiltonians,
/// their no-jump propagators and the corrector probes. Shared read-only by
/// all trajectories.
#[derive(Clone, Debug)]
pub struct Engine {
    params: SimParams,
    frame: MotionFrame,
    hamiltonians: [MotionOperator; 3],
    propagators: [MotionPropagator; 3],
    probes: CorrectorProbes,
    initial_motion: MotionState,
}

impl Engine {
    pub fn new(params: SimParams) -> Result<Self> {
        params.validate()?;
        check_spin_dissipator_scalar()?;
        let frame = params.frame()?;
        let hamiltonians: [MotionOperator; 3] = [
            sector_hamiltonian(Sector::PhiPlus.representative(), &params)?,
            sector_hamiltonian(Sector::PhiMinus.representative(), &params)?,
            sector_hamiltonian(Sector::Psi.representative(), &params)?,
        ];
        let prop =
            |h: &MotionOperator| MotionPropagator::new(h, params.kappa, params.nbar, params.dt);
        let propagators = [
            prop(&hamiltonians[0])?,
            prop(&hamiltonians[1])?,
            prop(&hamiltonians[2])?,
        ];
        let probes = CorrectorProbes::new(&params)?;
        let initial_motion = MotionState::gaussian_wavepacket(
            params.fock_dim,
            0.0,
            params.wavepacket_sigma,
            frame,
            DEFAULT_TAIL_TOL,
        )?;
        Ok(Engine {
            params,
            frame,
            hamiltonians,
            propagators,
            probes,
            initial_motion,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn hamiltonian(&self, bell: BellState) -> &MotionOperator {
        &self.hamiltonians[Sector::of(bell).index()]
    }

    /// Trajectory `index` starting from |φ⁺⟩ ⊗ the initial wavepacket.
    pub fn trajectory(&self, index: u64) -> Trajectory<'_> {
        self.trajectory_from(
            BellState::PhiPlus.state(),
            self.initial_motion.clone(),
            index,
        )
    }

    pub fn trajectory_from(
        &self,
        spin: SpinState,
        motion: MotionState,
        index: u64,
    ) -> Trajectory<'_> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(index);
        Trajectory {
            engine: self,
            spin,
            motion,
            time: 0.0,
            steps: 0,
            rng,
            events: Vec::new(),
        }
    }

    /// Runs trajectory `index` to `t_final` and records observables.
    pub fn run(&self, index: u64) -> Result<TrajectoryRecord> {
        self.trajectory(index).run()
    }
}

/// Σ L_k†L_k over the Pauli-on-b jump operators is a multiple of the
/// identity, so the no-jump spin evolution is a pure phase.
fn check_spin_dissipator_scalar() -> Result<()> {
    let kinds = [
        JumpKind::L1Correct,
        JumpKind::L2Correct,
        JumpKind::DepolX,
        JumpKind::DepolY,
        JumpKind::DepolZ,
    ];
    let mut sum = SpinOperator::zero();
    for (k, kind) in kinds.iter().enumerate() {
        let l = kind.spin_action().expect("spin jump").matrix();
        // distinct weights: each term must be scalar on its own
        sum = sum.add(&(l.adjoint() * l).scale(C64::from(1.0 + k as f64)));
    }
    match sum.scalar_part(1e-12) {
        Some(_) => Ok(()),
        None => Err(Error::InvalidParameter {
            name: "jump operators",
            reason: "sum of L^dag L is not proportional to the identity".into(),
        }),
    }
}

/// Live state of one trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory<'a> {
    engine: &'a Engine,
    spin: SpinState,
    motion: MotionState,
    time: f64,
    steps: usize,
    rng: ChaCha8Rng,
    events: Vec<JumpEvent>,
}

impl<'a> Trajectory<'a> {
    pub fn spin(&self) -> &SpinState {
        &self.spin
    }

    pub fn motion(&self) -> &MotionState {
        &self.motion
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> &[JumpEvent] {
        &self.events
    }

    pub fn bell(&self) -> Result<BellState> {
        bell_label(&self.spin)
    }

    /// |⟨φ⁺|ψ⟩|²
    pub fn overlap(&self) -> f64 {
        BellState::PhiPlus.state().overlap(&self.spin)
    }

    pub fn rates(&self) -> Result<(f64, f64)> {
        self.engine.probes.rates(&self.motion)
    }

    fn mmc(&mut self, bell: BellState) -> Result<()> {
        let prop = &self.engine.propagators[Sector::of(bell).index()];
        let mut jumps = Vec::new();
        let phi = std::mem::replace(&mut self.motion, self.engine.initial_motion.clone());
        self.motion = prop.advance(phi, &mut self.rng, &mut jumps)?;
        for j in jumps {
            self.events.push(JumpEvent {
                time: self.time,
                kind: j.into(),
                spin_before: bell,
                spin_after: bell,
                collapse_um: None,
            });
        }
        Ok(())
    }

    /// Applies a spin jump: the spin action, and for corrective jumps the
    /// collapse of the motion onto the corrector position. Returns the
    /// Bell label before the jump (whose Hamiltonian drives the following
    /// motion step).
    pub fn apply_spin_jump(&mut self, kind: JumpKind) -> Result<BellState> {
        let before = self.bell()?;
        let action = kind.spin_action().ok_or(Error::InvalidParameter {
            name: "jump",
            reason: format!("{kind:?} is not a spin jump"),
        })?;
        self.spin = action.apply(&self.spin)?;
        let after = self.bell()?;
        let collapse_um = match kind {
            JumpKind::L1Correct => Some(self.engine.params.r_l1),
            JumpKind::L2Correct => Some(self.engine.params.r_l2),
            _ => None,
        };
        if let Some(r) = collapse_um {
            self.motion = MotionState::displaced_ground_state(
                self.engine.params.fock_dim,
                r,
                self.engine.frame,
                DEFAULT_TAIL_TOL,
            )?;
        }
        self.events.push(JumpEvent {
            time: self.time,
            kind,
            spin_before: before,
            spin_after: after,
            collapse_um,
        });
        Ok(before)
    }

    /// One SMMC iteration.
    pub fn step(&mut self) -> Result<()> {
        let bell = self.bell()?;
        let (g1, g2) = self.rates()?;
        let params = &self.engine.params;
        let dt = params.dt;
        let depol = params.gamma / 3.0 * dt;
        let weights = [
            (JumpKind::L1Correct, g1 * dt),
            (JumpKind::L2Correct, g2 * dt),
            (JumpKind::DepolX, depol),
            (JumpKind::DepolY, depol),
            (JumpKind::DepolZ, depol),
        ];
        let total: f64 = weights.iter().map(|w| w.1).sum();
        if total >= 1.0 {
            return Err(Error::TimeStep {
                what: "spin jump probability",
                value: total,
                limit: 1.0,
            });
        }
        let r = self.rng.random::<f64>();
        let mut chosen = None;
        if r < total {
            let mut acc = 0.0;
            for (kind, w) in weights {
                acc += w;
                if r < acc {
                    chosen = Some(kind);
                    break;
                }
            }
            chosen = chosen.or(Some(JumpKind::DepolZ));
        }
        match chosen {
            Some(kind) => {
                // the motion step uses the Hamiltonian of the pre-jump spin
                let before = self.apply_spin_jump(kind)?;
                self.mmc(before)?;
            }
            None => self.mmc(bell)?,
        }
        self.time += dt;
        self.steps += 1;
        self.check_invariants()
    }

    fn check_invariants(&self) -> Result<()> {
        let spin_norm = self.spin.norm_squared();
        if (spin_norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Norm {
                norm: spin_norm,
                context: "spin after SMMC step",
            });
        }
        let motion_norm = self.motion.norm_squared();
        if (motion_norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Norm {
                norm: motion_norm,
                context: "motion after SMMC step",
            });
        }
        self.spin.bell_ray(1e-9).map(|_| ())
    }

    fn record(&self, rec: &mut TrajectoryRecord) -> Result<()> {
        let (g1, g2) = self.rates()?;
        rec.times.push(self.steps as f64 * self.engine.params.dt);
        rec.overlap.push(self.overlap());
        rec.pos_mean.push(self.motion.mean_position());
        rec.pos_var.push(self.motion.position_variance());
        rec.mean_number.push(self.motion.mean_number());
        rec.gamma_l1.push(g1);
        rec.gamma_l2.push(g2);
        Ok(())
    }

    /// Iterates to `t_final`, sampling every `record_stride` steps
    /// (including t = 0 and the final step).
    pub fn run(mut self) -> Result<TrajectoryRecord> {
        let n = self.engine.params.n_steps();
        let stride = self.engine.params.record_stride;
        let mut rec = TrajectoryRecord::with_capacity(n / stride + 1);
        self.record(&mut rec)?;
        for k in 1..=n {
            self.step()?;
            if k % stride == 0 {
                self.record(&mut rec)?;
            }
        }
        rec.events = self.events;
        Ok(rec)
    }
}

/// Single trajectory with the given parameters and stream index.
pub fn run_trajectory(params: &SimParams, index: u64) -> Result<TrajectoryRecord> {
    Engine::new(params.clone())?.run(index)
}

/// Amplitudes of a motion state as a plain vector (for serialization).
pub fn motion_amplitudes(phi: &MotionState) -> DVector<C64> {
    phi.amplitudes().clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> SimParams {
        SimParams {
            gamma: 0.0,
            correctors_enabled: false,
            t_final: 1e-3,
            ..SimParams::paper_main()
        }
    }

    #[test]
    fn phi_plus_hamiltonian_is_bare_oscillator() {
        let p = SimParams::paper_main();
        let h = motion_hamiltonian(&BellState::PhiPlus.state(), &p).unwrap();
        let m = h.matrix();
        for i in 0..p.fock_dim {
            for j in 0..p.fock_dim {
                let want = if i == j { p.omega_t * i as f64 } else { 0.0 };
                assert!((m[(i, j)] - C64::from(want)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn phi_minus_coupling() {
        let p = SimParams::paper_main();
        let g = p.coupling(BellState::PhiMinus);
        // independent evaluation: m ω² ΔR R_zpm with R_zpm² = ħ/2mω (ħ = 1)
        let m_over_hbar = 1.0 / (2.0 * p.omega_t * p.r_zpm * p.r_zpm);
        let direct = m_over_hbar * p.omega_t * p.omega_t * (p.r10 - p.r01) * p.r_zpm;
        assert!((g - direct).abs() < 1e-9 * direct);
        assert!((g / p.omega_t - 0.652).abs() < 1e-3);
        let h = motion_hamiltonian(&BellState::PhiMinus.state(), &p).unwrap();
        assert!((h.matrix()[(0, 1)].re + g).abs() < 1e-9 * g);
    }

    #[test]
    fn psi_sectors_share_hamiltonian() {
        let p = SimParams::paper_main();
        let a = motion_hamiltonian(&BellState::PsiPlus.state(), &p).unwrap();
        let b = motion_hamiltonian(&BellState::PsiMinus.state(), &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_bell_spin_is_rejected() {
        let p = SimParams::paper_main();
        let mixed = SpinState::logical(C64::from(0.6), C64::from(0.8)).unwrap();
        assert!(matches!(
            motion_hamiltonian(&mixed, &p),
            Err(Error::NotBellRay { .. })
        ));
    }

    #[test]
    fn rates_far_from_correctors_are_negligible() {
        let p = SimParams::paper_main();
        let frame = p.frame().unwrap();
        let phi = MotionState::ground(p.fock_dim, frame).unwrap();
        let far = SimParams {
            r_l1: 6.5 * p.r_zpm,
            r_l2: -6.5 * p.r_zpm,
            ..p.clone()
        };
        let (g1, g2) = correction_rates(&phi, &far).unwrap();
        assert!(g1 * far.dt < 1e-6 && g2 * far.dt < 1e-6);
    }

    #[test]
    fn rate_at_packet_center() {
        let p = SimParams {
            corrector_width: 0.23,
            ..SimParams::paper_main()
        };
        let phi = MotionState::displaced_ground_state(p.fock_dim, p.r_l1, p.frame().unwrap(), 1e-6)
            .unwrap();
        let (g1, _) = correction_rates(&phi, &p).unwrap();
        let oracle = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((g1 * p.dt - oracle).abs() < 1e-6);
    }

    #[test]
    fn symmetric_state_has_equal_rates() {
        let p = SimParams::paper_main();
        let phi = MotionState::ground(p.fock_dim, p.frame().unwrap()).unwrap();
        let (g1, g2) = correction_rates(&phi, &p).unwrap();
        assert!((g1 - g2).abs() <= 1e-12 * g1);
    }

    #[test]
    fn oversized_width_is_a_time_step_error() {
        let p = SimParams {
            corrector_width: 5.0,
            ..SimParams::paper_main()
        };
        let phi = MotionState::displaced_ground_state(p.fock_dim, p.r_l1, p.frame().unwrap(), 1e-6)
            .unwrap();
        assert!(matches!(
            correction_rates(&phi, &p),
            Err(Error::TimeStep { .. })
        ));
    }

    #[test]
    fn ground_state_never_jumps_under_pure_damping() {
        let p = SimParams::paper_main();
        let frame = p.frame().unwrap();
        let h = motion_hamiltonian(&BellState::PhiPlus.state(), &p).unwrap();
        let prop = MotionPropagator::new(&h, p.kappa, 0.0, p.dt).unwrap();
        let mut phi = MotionState::ground(p.fock_dim, frame).unwrap();
        for k in 0..200 {
            let (next, jump) = prop.step(&phi, k as f64 / 200.0).unwrap();
            assert!(jump.is_none());
            phi = next;
        }
        assert!((phi.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forced_depolarization_moves_to_psi_sector() {
        let engine = Engine::new(quiet()).unwrap();
        let mut t = engine.trajectory(0);
        t.apply_spin_jump(JumpKind::DepolX).unwrap();
        assert_eq!(t.bell().unwrap(), BellState::PsiPlus);
        let h = motion_hamiltonian(t.spin(), engine.params()).unwrap();
        assert_eq!(&h, engine.hamiltonian(BellState::PsiMinus));
        let g = engine.params().coupling(BellState::PsiPlus);
        assert!((h.matrix()[(1, 0)].re + g).abs() < 1e-9);
    }

    #[test]
    fn corrective_jump_collapses_onto_corrector() {
        let engine = Engine::new(quiet()).unwrap();
        let mut t = engine.trajectory(0);
        t.apply_spin_jump(JumpKind::DepolX).unwrap();
        t.apply_spin_jump(JumpKind::L2Correct).unwrap();
        assert!((t.motion().mean_position() - engine.params().r_l2).abs() < 1e-6);
        assert_eq!(t.bell().unwrap(), BellState::PhiPlus);
        let last = t.events().last().unwrap();
        assert_eq!(last.collapse_um, Some(engine.params().r_l2));
    }

    #[test]
    fn quiet_run_is_a_fixed_point() {
        let p = SimParams {
            r_l1: 10.0,
            r_l2: -10.0,
            correctors_enabled: true,
            ..quiet()
        };
        let engine = Engine::new(p).unwrap();
        let frame = engine.params().frame().unwrap();
        let ground = MotionState::ground(engine.params().fock_dim, frame).unwrap();
        let rec = engine
            .trajectory_from(BellState::PhiPlus.state(), ground, 3)
            .run()
            .unwrap();
        assert!(rec.overlap.iter().all(|&f| (f - 1.0).abs() < 1e-12));
        assert!(rec.events.is_empty());
        assert_eq!(
            rec.len(),
            engine.params().n_steps() / engine.params().record_stride + 1
        );
    }

    #[test]
    fn same_seed_same_record() {
        let engine = Engine::new(SimParams::paper_main()).unwrap();
        assert_eq!(engine.run(7).unwrap(), engine.run(7).unwrap());
        assert_ne!(engine.run(7).unwrap().events, engine.run(8).unwrap().events);
    }

    #[test]
    fn substeps_keep_hot_motion_first_order() {
        let p = SimParams {
            nbar: 1.0,
            ..SimParams::paper_main()
        };
        let frame = p.frame().unwrap();
        let h = motion_hamiltonian(&BellState::PhiPlus.state(), &p).unwrap();
        let prop = MotionPropagator::new(&h, p.kappa, p.nbar, p.dt).unwrap();
        let hot = MotionState::fock(p.fock_dim, 4, frame).unwrap();
        // a full step would exceed the first-order bound ...
        let (d, u) = prop.jump_probabilities(&hot, 0);
        assert!(d + u >= MAX_STEP_PROBABILITY);
        assert!(matches!(prop.step(&hot, 0.5), Err(Error::TimeStep { .. })));
        // ... while the adaptive step halves it
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut jumps = Vec::new();
        let next = prop.advance(hot, &mut rng, &mut jumps).unwrap();
        assert!((next.norm_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn temperature_conversion() {
        let omega = std::f64::consts::TAU * 1e3;
        let n = nbar_from_temperature(10e-9, omega).unwrap();
        assert!((n - 0.0083).abs() < 2e-4, "{n}");
        assert_eq!(nbar_from_temperature(0.0, omega).unwrap(), 0.0);
        assert!(nbar_from_temperature(-1.0, omega).is_err());
    }

    #[test]
    fn validation() {
        let mut p = SimParams::paper_main();
        p.corrector_width = 0.0;
        assert!(p.validate().is_err());
        let p = SimParams {
            gamma: 1e5,
            ..SimParams::paper_main()
        };
        assert!(matches!(p.validate(), Err(Error::TimeStep { .. })));
    }
}
