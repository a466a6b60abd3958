//! Error-correction bookkeeping for the conceptual two-spin qubot.
//!
//! The logical code space is spanned by |0̄⟩ = |ψ⁻⟩ and |1̄⟩ = |φ⁻⟩. A physical
//! error moves the nucleus into another Bell sector; the sector decides which
//! corrector loops the mobile atom is driven through:
//!
//! * sign flip (ψ⁻→ψ⁺, φ⁻→φ⁺): L1, which applies Z_b;
//! * parity swap (ψ⁻↔φ⁻): L2, which applies X_b;
//! * both: L1 then L2.
//!
//! L1's spin action is taken as −Z_b. The global phase of a unitary is not
//! observable, but it is the convention under which the tabulated
//! corrected states and the post-correction joint state carry their signs.

use std::fmt;

use nalgebra::{DMatrix, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{kron2, pauli_2x2, Axis, BellState, Particle, SpinOperator, SpinState, C64};

/// Single-qubit Pauli factor.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn axis(self) -> Option<Axis> {
        match self {
            Pauli::I => None,
            Pauli::X => Some(Axis::X),
            Pauli::Y => Some(Axis::Y),
            Pauli::Z => Some(Axis::Z),
        }
    }

    /// `self · other = i^k · result`
    fn mul(self, other: Pauli) -> (Phase, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (Phase::ONE, p),
            (p, q) if p == q => (Phase::ONE, I),
            (X, Y) => (Phase::I, Z),
            (Y, Z) => (Phase::I, X),
            (Z, X) => (Phase::I, Y),
            (Y, X) => (Phase::MINUS_I, Z),
            (Z, Y) => (Phase::MINUS_I, X),
            (X, Z) => (Phase::MINUS_I, Y),
            _ => unreachable!(),
        }
    }
}

/// Exact quarter-turn phase i^k.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn times(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) % 4)
    }

    pub fn value(self) -> C64 {
        match self.0 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }

    /// Rounds a unit complex number to the nearest quarter turn, if it is
    /// within `tol` of one.
    pub fn from_complex(c: C64, tol: f64) -> Option<Phase> {
        (0..4).map(Phase).find(|p| (p.value() - c).norm() <= tol)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        })
    }
}

/// `phase · (factor_a ⊗ factor_b)`
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    pub factor_a: Pauli,
    pub factor_b: Pauli,
    pub phase: Phase,
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString {
        factor_a: Pauli::I,
        factor_b: Pauli::I,
        phase: Phase::ONE,
    };

    pub fn new(factor_a: Pauli, factor_b: Pauli, phase: Phase) -> Self {
        PauliString {
            factor_a,
            factor_b,
            phase,
        }
    }

    pub fn on(particle: Particle, p: Pauli) -> Self {
        match particle {
            Particle::A => PauliString::new(p, Pauli::I, Phase::ONE),
            Particle::B => PauliString::new(Pauli::I, p, Phase::ONE),
        }
    }

    /// Operator product `self · other` (other acts first).
    pub fn compose(&self, other: &PauliString) -> PauliString {
        let (pa, a) = self.factor_a.mul(other.factor_a);
        let (pb, b) = self.factor_b.mul(other.factor_b);
        PauliString {
            factor_a: a,
            factor_b: b,
            phase: self.phase.times(other.phase).times(pa).times(pb),
        }
    }

    pub fn with_phase(&self, phase: Phase) -> PauliString {
        PauliString {
            phase: self.phase.times(phase),
            ..*self
        }
    }

    pub fn matrix(&self) -> SpinOperator {
        let m = kron2(
            pauli_2x2(self.factor_a.axis()),
            pauli_2x2(self.factor_b.axis()),
        );
        SpinOperator::from_matrix(m * self.phase.value())
    }

    pub fn apply(&self, state: &SpinState) -> Result<SpinState> {
        state.apply(&self.matrix())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |p: Pauli| match p {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        write!(
            f,
            "{}{}{}",
            self.phase,
            name(self.factor_a),
            name(self.factor_b)
        )
    }
}

/// Corrector sites of the conceptual model.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corrector {
    L1,
    L2,
}

impl Corrector {
    /// Unitary applied to the nucleus when the atom enters the loop.
    pub fn spin_action(self) -> PauliString {
        match self {
            Corrector::L1 => PauliString::new(Pauli::I, Pauli::Z, Phase::MINUS_ONE),
            Corrector::L2 => PauliString::new(Pauli::I, Pauli::X, Phase::ONE),
        }
    }
}

/// Bits of the two corrector qubits; `true` is |μ₁⟩.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorrectorRegister {
    pub mu1: bool,
    pub mu2: bool,
}

impl CorrectorRegister {
    pub fn new(mu1: bool, mu2: bool) -> Self {
        CorrectorRegister { mu1, mu2 }
    }

    pub fn flipped_by(self, corrector: Corrector) -> Self {
        match corrector {
            Corrector::L1 => CorrectorRegister {
                mu1: !self.mu1,
                ..self
            },
            Corrector::L2 => CorrectorRegister {
                mu2: !self.mu2,
                ..self
            },
        }
    }
}

impl fmt::Display for CorrectorRegister {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.mu1 as u8, self.mu2 as u8)
    }
}

const CODE_SPACE_TOL: f64 = 1e-9;

/// Population outside span{|ψ⁻⟩, |φ⁻⟩}.
pub fn code_space_leakage(state: &SpinState) -> f64 {
    let c = state.bell_components();
    c[BellState::PsiPlus.index()].norm_sqr() + c[BellState::PhiPlus.index()].norm_sqr()
}

/// Corrector loops visited after `error`, inferred from how the error moves
/// each logical basis state between Bell sectors.
pub fn correction_path(error: &PauliString) -> Result<Vec<Corrector>> {
    let sector_change = |logical: BellState| -> Result<(bool, bool)> {
        let (after, _) = error.apply(&logical.state())?.bell_ray(1e-12)?;
        Ok((
            after.is_minus() != logical.is_minus(),
            after.is_phi() != logical.is_phi(),
        ))
    };
    let zero = sector_change(BellState::PsiMinus)?;
    let one = sector_change(BellState::PhiMinus)?;
    debug_assert_eq!(zero, one, "Pauli errors move both logical states alike");
    let (sign_flip, parity_swap) = zero;
    let mut path = Vec::with_capacity(2);
    if sign_flip {
        path.push(Corrector::L1);
    }
    if parity_swap {
        path.push(Corrector::L2);
    }
    Ok(path)
}

/// Outcome of one error followed by the corrector cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct Correction {
    pub state: SpinState,
    pub register: CorrectorRegister,
    pub path: Vec<Corrector>,
}

/// Applies `error` to a logical state and runs the correctors it triggers.
pub fn apply_error_and_correct(
    error: &PauliString,
    logical: &SpinState,
    register: CorrectorRegister,
) -> Result<Correction> {
    let leakage = code_space_leakage(logical);
    if leakage > CODE_SPACE_TOL {
        return Err(Error::OutsideCodeSpace { leakage });
    }
    let path = correction_path(error)?;
    let mut state = error.apply(logical)?;
    let mut register = register;
    for &c in &path {
        state = c.spin_action().apply(&state)?;
        register = register.flipped_by(c);
    }
    Ok(Correction {
        state,
        register,
        path,
    })
}

/// Signed Bell state, one cell of the error table.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedBell {
    pub sign: i8,
    pub bell: BellState,
}

impl SignedBell {
    pub const fn new(sign: i8, bell: BellState) -> Self {
        SignedBell { sign, bell }
    }

    fn state(&self) -> SpinState {
        self.bell.state().with_phase(C64::from(self.sign as f64))
    }
}

impl fmt::Display for SignedBell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}>",
            if self.sign < 0 { '-' } else { '+' },
            self.bell
        )
    }
}

/// One row of the error table: the error, its action on |ψ⁻⟩ and |φ⁻⟩,
/// and the signs (s₀, s₁) of the corrected state s₀α|0̄⟩ + s₁β|1̄⟩.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTableRow {
    pub label: String,
    pub error: PauliString,
    pub on_zero: SignedBell,
    pub on_one: SignedBell,
    pub corrected: (i8, i8),
}

/// The six tabulated single-qubit errors with their expected actions.
pub fn error_table() -> Vec<ErrorTableRow> {
    use BellState::*;
    let xa = PauliString::on(Particle::A, Pauli::X);
    let xb = PauliString::on(Particle::B, Pauli::X);
    let za = PauliString::on(Particle::A, Pauli::Z);
    let zb = PauliString::on(Particle::B, Pauli::Z);
    let row = |label: &str, error, z: SignedBell, o: SignedBell, corrected| ErrorTableRow {
        label: label.to_string(),
        error,
        on_zero: z,
        on_one: o,
        corrected,
    };
    vec![
        row(
            "X_a",
            xa,
            SignedBell::new(-1, PhiMinus),
            SignedBell::new(-1, PsiMinus),
            (-1, -1),
        ),
        row(
            "X_b",
            xb,
            SignedBell::new(1, PhiMinus),
            SignedBell::new(1, PsiMinus),
            (1, 1),
        ),
        row(
            "Z_a",
            za,
            SignedBell::new(1, PsiPlus),
            SignedBell::new(1, PhiPlus),
            (1, -1),
        ),
        row(
            "Z_b",
            zb,
            SignedBell::new(-1, PsiPlus),
            SignedBell::new(1, PhiPlus),
            (-1, -1),
        ),
        row(
            "Z_aX_a",
            za.compose(&xa),
            SignedBell::new(-1, PhiPlus),
            SignedBell::new(-1, PsiPlus),
            (1, -1),
        ),
        row(
            "Z_bX_b",
            zb.compose(&xb),
            SignedBell::new(1, PhiPlus),
            SignedBell::new(-1, PsiPlus),
            (-1, -1),
        ),
    ]
}

/// Result of checking one table entry against dense matrix algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub row: String,
    pub column: BellState,
    pub expected: String,
    pub computed: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectedCheck {
    pub row: String,
    pub expected: (i8, i8),
    pub computed: Option<(i8, i8)>,
    pub path: Vec<Corrector>,
    pub register: CorrectorRegister,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTableReport {
    pub cells: Vec<CellCheck>,
    pub corrected: Vec<CorrectedCheck>,
}

impl ErrorTableReport {
    pub fn all_pass(&self) -> bool {
        self.cells.iter().all(|c| c.pass) && self.corrected.iter().all(|c| c.pass)
    }
}

fn describe(state: &SpinState) -> String {
    match state.bell_ray(1e-12) {
        Ok((b, phase)) => match Phase::from_complex(phase, 1e-12) {
            Some(p) => format!("{p}|{b}>"),
            None => format!("({:.3}{:+.3}i)|{b}>", phase.re, phase.im),
        },
        Err(_) => "not a Bell ray".to_string(),
    }
}

/// Sign `s` such that `state = s · target`, if it is ±1.
fn real_sign(state: &SpinState, target: &SpinState) -> Option<i8> {
    let c = target.inner(state);
    if (c.norm_sqr() - 1.0).abs() > 1e-12 {
        return None;
    }
    Phase::from_complex(c, 1e-12).and_then(|p| match p {
        Phase::ONE => Some(1),
        Phase::MINUS_ONE => Some(-1),
        _ => None,
    })
}

/// Checks every cell of `rows` by dense Pauli-matrix application.
pub fn verify_error_table(rows: &[ErrorTableRow]) -> Result<ErrorTableReport> {
    let mut cells = Vec::with_capacity(2 * rows.len());
    let mut corrected = Vec::with_capacity(rows.len());
    let zero = BellState::PsiMinus.state();
    let one = BellState::PhiMinus.state();
    for row in rows {
        for (column, expected) in [
            (BellState::PsiMinus, row.on_zero),
            (BellState::PhiMinus, row.on_one),
        ] {
            let out = row.error.apply(&column.state())?;
            cells.push(CellCheck {
                row: row.label.clone(),
                column,
                expected: expected.to_string(),
                computed: describe(&out),
                pass: out.approx_eq(&expected.state(), 1e-12),
            });
        }
        let c0 = apply_error_and_correct(&row.error, &zero, CorrectorRegister::default())?;
        let c1 = apply_error_and_correct(&row.error, &one, CorrectorRegister::default())?;
        let computed = real_sign(&c0.state, &zero).zip(real_sign(&c1.state, &one));
        corrected.push(CorrectedCheck {
            row: row.label.clone(),
            expected: row.corrected,
            computed,
            path: c0.path,
            register: c0.register,
            pass: computed == Some(row.corrected),
        });
    }
    Ok(ErrorTableReport { cells, corrected })
}

/// Verifies the built-in error table.
pub fn table1_verify() -> Result<ErrorTableReport> {
    verify_error_table(&error_table())
}

/// One term of the joint nucleus ⊗ environment ⊗ corrector state.
#[derive(Clone, Debug, PartialEq)]
pub struct JointBranch {
    pub weight: f64,
    pub state: SpinState,
    pub environment: usize,
    pub register: CorrectorRegister,
    pub error: PauliString,
}

fn check_logical_amplitudes(alpha: C64, beta: C64) -> Result<SpinState> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "alpha, beta",
            reason: format!("|alpha|^2 + |beta|^2 = {norm}, expected 1"),
        });
    }
    SpinState::logical(alpha, beta)
}

/// Depolarizing channel on particle `b` acting on α|0̄⟩ + β|1̄⟩, as a
/// superposition over orthogonal environment states. Zero-weight branches
/// are omitted.
pub fn depolarize_joint(alpha: C64, beta: C64, p: f64) -> Result<Vec<JointBranch>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("error probability must lie in [0, 1], got {p}"),
        });
    }
    let psi = check_logical_amplitudes(alpha, beta)?;
    let xb = PauliString::on(Particle::B, Pauli::X);
    let zb = PauliString::on(Particle::B, Pauli::Z);
    let errors = [PauliString::IDENTITY, xb, zb, zb.compose(&xb)];
    let mut branches = Vec::with_capacity(4);
    for (environment, error) in errors.into_iter().enumerate() {
        let weight = if environment == 0 {
            (1.0 - p).sqrt()
        } else {
            (p / 3.0).sqrt()
        };
        if weight == 0.0 {
            continue;
        }
        branches.push(JointBranch {
            weight,
            state: error.apply(&psi)?,
            environment,
            register: CorrectorRegister::default(),
            error,
        });
    }
    Ok(branches)
}

/// Runs the corrector cycle on every branch.
pub fn correct_joint(branches: &[JointBranch]) -> Result<Vec<JointBranch>> {
    branches
        .iter()
        .map(|b| {
            let mut state = b.state;
            let mut register = b.register;
            for c in correction_path(&b.error)? {
                state = c.spin_action().apply(&state)?;
                register = register.flipped_by(c);
            }
            Ok(JointBranch {
                state,
                register,
                ..b.clone()
            })
        })
        .collect()
}

/// Reduced spin density matrix of a branch superposition with orthogonal
/// environment states.
pub fn reduced_spin_density(branches: &[JointBranch]) -> DMatrix<C64> {
    let mut rho = DMatrix::zeros(4, 4);
    for b in branches {
        let v: &Vector4<C64> = b.state.amplitudes();
        rho += (v * v.adjoint()) * C64::from(b.weight * b.weight);
    }
    rho
}

/// ⟨Ψ|ρ|Ψ⟩ for the logical state after depolarization and correction.
pub fn logical_fidelity_after_correction(alpha: C64, beta: C64, p: f64) -> Result<f64> {
    let psi = check_logical_amplitudes(alpha, beta)?;
    let corrected = correct_joint(&depolarize_joint(alpha, beta, p)?)?;
    let rho = reduced_spin_density(&corrected);
    let v = DMatrix::from_column_slice(4, 1, psi.amplitudes().as_slice());
    Ok((v.adjoint() * rho * &v)[(0, 0)].re)
}

/// |⟨Ψ|Ψ'⟩|² after a single `error`, with or without the corrector cycle.
pub fn logical_fidelity_with_error(
    error: &PauliString,
    alpha: C64,
    beta: C64,
    correct: bool,
) -> Result<f64> {
    let psi = check_logical_amplitudes(alpha, beta)?;
    let out = if correct {
        apply_error_and_correct(error, &psi, CorrectorRegister::default())?.state
    } else {
        error.apply(&psi)?
    };
    Ok(psi.overlap(&out))
}

/// Trap plus dipolar spin pattern `J_α = (d²/R³) j_α`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipolarModelParams {
    /// Trap curvature, rad/s per μm².
    pub v0: f64,
    /// Trap center, μm.
    pub delta: f64,
    /// Dipole strength d², rad/s·μm³.
    pub d2: f64,
    pub j_x: f64,
    pub j_y: f64,
    pub j_z: f64,
}

impl DipolarModelParams {
    /// Illustrative pattern with j_y = −3 j_x and j_z = 6 j_x, scaled so that
    /// |ψ⁺⟩ has no bound minimum while the other three Bell states do.
    pub fn fig1b() -> Self {
        DipolarModelParams {
            v0: 1.0,
            delta: 1.0,
            d2: 0.01,
            j_x: 1.0,
            j_y: -3.0,
            j_z: 6.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "v0",
                reason: format!("trap curvature must be positive, got {}", self.v0),
            });
        }
        let all = [self.v0, self.delta, self.d2, self.j_x, self.j_y, self.j_z];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dipolar params",
                reason: "all fields must be finite".into(),
            });
        }
        Ok(())
    }

    /// ⟨B|W|B⟩ for W = j_z ZZ + j_x XX + j_y YY.
    pub fn w_expectation(&self, bell: BellState) -> f64 {
        bell.eigenvalue(self.j_x, self.j_y, self.j_z)
    }

    pub fn potential(&self, bell: BellState, r: f64) -> f64 {
        let d = r - self.delta;
        self.v0 * d * d + self.d2 * self.w_expectation(bell) / (r * r * r)
    }

    pub fn curvature(&self, bell: BellState, r: f64) -> f64 {
        2.0 * self.v0 + 12.0 * self.d2 * self.w_expectation(bell) / r.powi(5)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtremumKind {
    Minimum,
    Maximum,
    Inflection,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRoot {
    pub r0: f64,
    pub kind: ExtremumKind,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibria {
    pub bell: BellState,
    pub w_expectation: f64,
    /// 3 d² ⟨W⟩ / 2 V₀
    pub rhs: f64,
    pub roots: Vec<EquilibriumRoot>,
}

impl Equilibria {
    pub fn minima(&self) -> impl Iterator<Item = &EquilibriumRoot> {
        self.roots
            .iter()
            .filter(|r| r.kind == ExtremumKind::Minimum)
    }

    pub fn has_minimum(&self) -> bool {
        self.minima().next().is_some()
    }
}

/// Real roots of a monic polynomial `x^n + c[n-1] x^{n-1} + … + c[0]` via
/// companion-matrix eigenvalues.
fn real_roots_monic(coeffs: &[f64], imag_tol: f64) -> Vec<f64> {
    let n = coeffs.len();
    let companion = DMatrix::from_fn(n, n, |r, c| {
        if c == n - 1 {
            -coeffs[r]
        } else if r == c + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() < imag_tol)
        .map(|z| z.re)
        .collect()
}

/// Positive equilibria of `V₀(R−δ)² + d²⟨W⟩/R³` for one Bell state:
/// roots of `R⁴(R−δ) = 3d²⟨W⟩/2V₀`. An empty root list means no
/// equilibrium exists for that state.
pub fn solve_equilibria(params: &DipolarModelParams, bell: BellState) -> Result<Equilibria> {
    params.validate()?;
    let w = params.w_expectation(bell);
    let rhs = 3.0 * params.d2 * w / (2.0 * params.v0);
    let delta = params.delta;
    let f = |r: f64| r.powi(4) * (r - delta) - rhs;
    let df = |r: f64| 5.0 * r.powi(4) - 4.0 * delta * r.powi(3);

    let candidates = if rhs == 0.0 {
        // R⁴(R−δ) = 0: the quadruple root at the origin is not an equilibrium.
        vec![delta]
    } else {
        real_roots_monic(&[-rhs, 0.0, 0.0, 0.0, -delta], 1e-8)
    };

    let mut roots: Vec<EquilibriumRoot> = Vec::new();
    for mut r in candidates.into_iter().filter(|r| *r > 0.0) {
        for _ in 0..50 {
            let d = df(r);
            if d == 0.0 {
                break;
            }
            let step = f(r) / d;
            r -= step;
            if step.abs() <= 1e-15 * r.abs().max(1.0) {
                break;
            }
        }
        if !(r > 0.0) || roots.iter().any(|x| (x.r0 - r).abs() < 1e-9 * r.max(1.0)) {
            continue;
        }
        let curvature = params.curvature(bell, r);
        let kind = if curvature > 0.0 {
            ExtremumKind::Minimum
        } else if curvature < 0.0 {
            ExtremumKind::Maximum
        } else {
            ExtremumKind::Inflection
        };
        roots.push(EquilibriumRoot {
            r0: r,
            kind,
            residual: f(r).abs(),
        });
    }
    roots.sort_by(|a, b| a.r0.total_cmp(&b.r0));
    Ok(Equilibria {
        bell,
        w_expectation: w,
        rhs,
        roots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn composition_matches_dense_products() {
        for a1 in Pauli::ALL {
            for b1 in Pauli::ALL {
                for a2 in Pauli::ALL {
                    for b2 in Pauli::ALL {
                        let p = PauliString::new(a1, b1, Phase::ONE);
                        let q = PauliString::new(a2, b2, Phase::ONE);
                        let dense = p.matrix() * q.matrix();
                        assert!(p.compose(&q).matrix().approx_eq(&dense, 1e-12), "{p} * {q}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn composition_is_associative(
            xs in proptest::collection::vec((0usize..4, 0usize..4, 0u8..4), 3)
        ) {
            let s: Vec<PauliString> = xs
                .iter()
                .map(|&(a, b, k)| PauliString::new(Pauli::ALL[a], Pauli::ALL[b], Phase(k)))
                .collect();
            let left = s[0].compose(&s[1]).compose(&s[2]);
            let right = s[0].compose(&s[1].compose(&s[2]));
            prop_assert_eq!(left, right);
        }
    }

    #[test]
    fn y_rows_differ_from_zx_by_global_i() {
        for particle in [Particle::A, Particle::B] {
            let zx =
                PauliString::on(particle, Pauli::Z).compose(&PauliString::on(particle, Pauli::X));
            let y = PauliString::on(particle, Pauli::Y);
            assert_eq!(zx, y.with_phase(Phase::I));
        }
    }

    #[test]
    fn x_b_error_is_corrected_through_l2() {
        let (alpha, beta) = (c(0.6), C64::new(0.0, 0.8));
        let psi = SpinState::logical(alpha, beta).unwrap();
        let xb = PauliString::on(Particle::B, Pauli::X);
        let out = apply_error_and_correct(&xb, &psi, CorrectorRegister::default()).unwrap();
        assert!(out.state.approx_eq(&psi, 1e-12));
        assert_eq!(out.register, CorrectorRegister::new(false, true));
        assert_eq!(out.path, vec![Corrector::L2]);
    }

    #[test]
    fn z_b_error_returns_negated_state_via_l1() {
        let psi = SpinState::logical(c(0.8), c(0.6)).unwrap();
        let zb = PauliString::on(Particle::B, Pauli::Z);
        let out = apply_error_and_correct(&zb, &psi, CorrectorRegister::default()).unwrap();
        assert!(out.state.approx_eq(&psi.with_phase(c(-1.0)), 1e-12));
        assert_eq!(out.register, CorrectorRegister::new(true, false));
    }

    #[test]
    fn identity_error_is_a_no_op() {
        let psi = SpinState::logical(c(0.8), c(0.6)).unwrap();
        let out =
            apply_error_and_correct(&PauliString::IDENTITY, &psi, CorrectorRegister::default())
                .unwrap();
        assert!(out.state.approx_eq(&psi, 0.0));
        assert_eq!(out.register, CorrectorRegister::default());
        assert!(out.path.is_empty());
    }

    #[test]
    fn leaked_states_are_rejected() {
        let xb = PauliString::on(Particle::B, Pauli::X);
        let err = apply_error_and_correct(
            &xb,
            &BellState::PhiPlus.state(),
            CorrectorRegister::default(),
        );
        assert!(matches!(err, Err(Error::OutsideCodeSpace { .. })));
    }

    #[test]
    fn error_table_cells() {
        let report = table1_verify().unwrap();
        let cell = |row: &str, col| {
            report
                .cells
                .iter()
                .find(|c| c.row == row && c.column == col)
                .unwrap()
        };
        assert_eq!(cell("X_a", BellState::PsiMinus).computed, "-|phi->");
        assert_eq!(cell("Z_a", BellState::PhiMinus).computed, "+|phi+>");
        assert_eq!(report.cells.len(), 12);
        assert!(report.all_pass(), "{report:#?}");
    }

    #[test]
    fn wrong_sign_is_detected() {
        let mut rows = error_table();
        rows[3].on_zero.sign = 1;
        let report = verify_error_table(&rows).unwrap();
        assert!(!report.all_pass());
        assert_eq!(report.cells.iter().filter(|c| !c.pass).count(), 1);
    }

    #[test]
    fn corrected_states_hold_on_a_bloch_grid() {
        for row in error_table() {
            for i in 0..5 {
                for j in 0..4 {
                    let theta = std::f64::consts::PI * i as f64 / 4.0;
                    let phi = std::f64::consts::TAU * j as f64 / 4.0;
                    let alpha = c((theta / 2.0).cos());
                    let beta = C64::from_polar((theta / 2.0).sin(), phi);
                    let psi = SpinState::logical(alpha, beta).unwrap();
                    let out =
                        apply_error_and_correct(&row.error, &psi, CorrectorRegister::default())
                            .unwrap();
                    let expected = SpinState::logical(
                        alpha * row.corrected.0 as f64,
                        beta * row.corrected.1 as f64,
                    )
                    .unwrap();
                    assert!(
                        out.state.approx_eq(&expected, 1e-12),
                        "{} at ({theta}, {phi})",
                        row.label
                    );
                }
            }
        }
    }

    #[test]
    fn depolarizing_branches() {
        let (alpha, beta) = (c(0.6), c(0.8));
        let b = depolarize_joint(alpha, beta, 0.0).unwrap();
        assert_eq!(b.len(), 1);
        assert!(b[0]
            .state
            .approx_eq(&SpinState::logical(alpha, beta).unwrap(), 0.0));

        let b = depolarize_joint(alpha, beta, 0.75).unwrap();
        assert_eq!(b.len(), 4);
        assert!(b.iter().all(|x| (x.weight - 0.5).abs() < 1e-15));

        let b = depolarize_joint(alpha, beta, 0.3).unwrap();
        let expected = SpinState::new(
            BellState::PhiMinus.state().amplitudes() * alpha
                + BellState::PsiMinus.state().amplitudes() * beta,
        )
        .unwrap();
        assert!(b[1].state.approx_eq(&expected, 1e-15));
        let total: f64 = b.iter().map(|x| x.weight * x.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);

        assert!(depolarize_joint(alpha, beta, 1.2).is_err());
        assert!(depolarize_joint(alpha, beta, f64::NAN).is_err());
        assert!(depolarize_joint(c(1.0), c(1.0), 0.1).is_err());
    }

    #[test]
    fn joint_correction_restores_logical_state_with_register_record() {
        let (alpha, beta) = (c(0.6), C64::new(0.0, 0.8));
        let psi = SpinState::logical(alpha, beta).unwrap();
        let corrected = correct_joint(&depolarize_joint(alpha, beta, 0.6).unwrap()).unwrap();
        let expect = [
            (1.0, CorrectorRegister::new(false, false)),
            (1.0, CorrectorRegister::new(false, true)),
            (-1.0, CorrectorRegister::new(true, false)),
            (-1.0, CorrectorRegister::new(true, true)),
        ];
        for (branch, (sign, reg)) in corrected.iter().zip(expect) {
            assert!(branch.state.approx_eq(&psi.with_phase(c(sign)), 1e-12));
            assert_eq!(branch.register, reg);
        }
    }

    #[test]
    fn fidelity_after_correction_is_one() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b, p) in [
            (c(1.0), c(0.0), 0.3),
            (c(h), c(h), 0.9),
            (c(0.6), C64::new(0.0, 0.8), 1.0),
        ] {
            assert!((logical_fidelity_after_correction(a, b, p).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn z_a_is_a_logical_phase_flip() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let za = PauliString::on(Particle::A, Pauli::Z);
        // Oracle: the corrected state is α|0̄⟩ − β|1̄⟩, so |⟨Ψ|Ψ'⟩|² = (|α|² − |β|²)².
        for (a, b) in [(c(h), c(h)), (c(0.6), c(0.8)), (c(1.0), c(0.0))] {
            let oracle = (a.norm_sqr() - b.norm_sqr()).powi(2);
            let f = logical_fidelity_with_error(&za, a, b, true).unwrap();
            assert!((f - oracle).abs() < 1e-12);
        }
        // without a corrector cycle the state leaves the code space entirely
        assert!(logical_fidelity_with_error(&za, c(h), c(h), false).unwrap() < 1e-12);
    }

    #[test]
    fn dipolar_expectations() {
        let p = DipolarModelParams::fig1b();
        assert_eq!(p.w_expectation(BellState::PsiMinus), -4.0 * p.j_x);
        assert_eq!(p.w_expectation(BellState::PhiPlus), 10.0 * p.j_x);
    }

    #[test]
    fn decoupled_limit_has_single_equilibrium_at_trap_center() {
        let p = DipolarModelParams {
            d2: 0.0,
            ..DipolarModelParams::fig1b()
        };
        for bell in BellState::ALL {
            let eq = solve_equilibria(&p, bell).unwrap();
            assert_eq!(eq.roots.len(), 1);
            assert!((eq.roots[0].r0 - p.delta).abs() < 1e-12);
            assert_eq!(eq.roots[0].kind, ExtremumKind::Minimum);
        }
    }

    #[test]
    fn fig1b_pattern_equilibria() {
        let p = DipolarModelParams::fig1b();
        for bell in BellState::ALL {
            let eq = solve_equilibria(&p, bell).unwrap();
            for root in &eq.roots {
                assert!(root.residual < 1e-9);
                // second difference of the full potential agrees in sign
                let h = 1e-4;
                let dd = (p.potential(bell, root.r0 + h) - 2.0 * p.potential(bell, root.r0)
                    + p.potential(bell, root.r0 - h))
                    / (h * h);
                match root.kind {
                    ExtremumKind::Minimum => assert!(dd > 0.0),
                    ExtremumKind::Maximum => assert!(dd < 0.0),
                    ExtremumKind::Inflection => {}
                }
            }
            assert_eq!(eq.has_minimum(), bell != BellState::PsiPlus, "{bell}");
        }
        let r = |b| solve_equilibria(&p, b).unwrap().minima().next().unwrap().r0;
        assert!(r(BellState::PsiMinus) < r(BellState::PhiMinus));
        assert!(r(BellState::PhiMinus) < r(BellState::PhiPlus));
    }

    #[test]
    fn invalid_trap_is_rejected() {
        let p = DipolarModelParams {
            v0: 0.0,
            ..DipolarModelParams::fig1b()
        };
        assert!(solve_equilibria(&p, BellState::PhiPlus).is_err());
    }
}
