//! Dense linear algebra for the two-spin nucleus and the truncated Fock
//! space of the mobile atom.
//!
//! Spin basis order is |00⟩, |01⟩, |10⟩, |11⟩ with particle `a` as the left
//! factor. Motion states live in the Fock basis of the |φ⁺⟩ trap; positions
//! are in μm and the position operator is `R = origin + R_zpm (a + a†)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::ops::Mul;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Allowed deviation of ‖ψ‖² from one after a public operation.
pub const NORM_TOL: f64 = 1e-9;

/// Default bound on the population of the top four Fock levels.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

/// Number of Fock levels counted as the truncation tail.
pub const TAIL_LEVELS: usize = 4;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Particle {
    A,
    B,
}

/// The four Bell states, listed in the order used throughout the crate.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellState {
    #[serde(rename = "psi-")]
    PsiMinus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "phi+")]
    PhiPlus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PsiMinus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PhiPlus,
    ];

    pub fn index(self) -> usize {
        match self {
            BellState::PsiMinus => 0,
            BellState::PhiMinus => 1,
            BellState::PsiPlus => 2,
            BellState::PhiPlus => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BellState::PsiMinus => "psi-",
            BellState::PhiMinus => "phi-",
            BellState::PsiPlus => "psi+",
            BellState::PhiPlus => "phi+",
        }
    }

    /// `true` for φ±, which have even parity (|00⟩, |11⟩ support).
    pub fn is_phi(self) -> bool {
        matches!(self, BellState::PhiMinus | BellState::PhiPlus)
    }

    /// `true` for the antisymmetric-sign members ψ⁻ and φ⁻.
    pub fn is_minus(self) -> bool {
        matches!(self, BellState::PsiMinus | BellState::PhiMinus)
    }

    pub fn from_parts(phi: bool, minus: bool) -> BellState {
        match (phi, minus) {
            (false, true) => BellState::PsiMinus,
            (true, true) => BellState::PhiMinus,
            (false, false) => BellState::PsiPlus,
            (true, false) => BellState::PhiPlus,
        }
    }

    pub fn state(self) -> SpinState {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        let v = match self {
            BellState::PsiMinus => Vector4::new(ZERO, h, -h, ZERO),
            BellState::PhiMinus => Vector4::new(h, ZERO, ZERO, -h),
            BellState::PsiPlus => Vector4::new(ZERO, h, h, ZERO),
            BellState::PhiPlus => Vector4::new(h, ZERO, ZERO, h),
        };
        SpinState(v)
    }

    /// Eigenvalue of `Jz ZaZb + Jx XaXb + Jy YaYb` on this Bell state.
    pub fn eigenvalue(self, jx: f64, jy: f64, jz: f64) -> f64 {
        match self {
            BellState::PsiMinus => -jx - jy - jz,
            BellState::PhiMinus => -jx + jy + jz,
            BellState::PsiPlus => jx + jy - jz,
            BellState::PhiPlus => jx - jy + jz,
        }
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Normalized pure state of the two spins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinState(Vector4<C64>);

impl SpinState {
    /// Wraps amplitudes that must already be normalized.
    pub fn new(amplitudes: Vector4<C64>) -> Result<Self> {
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Norm {
                norm,
                context: "SpinState::new",
            });
        }
        Ok(SpinState(amplitudes))
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amplitudes: Vector4<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Norm {
                norm,
                context: "SpinState::normalized",
            });
        }
        Ok(SpinState(amplitudes.unscale(norm)))
    }

    /// Computational basis state; `index` 0..4 in the order |00⟩,|01⟩,|10⟩,|11⟩.
    pub fn basis(index: usize) -> Self {
        assert!(index < 4, "spin basis index out of range");
        let mut v = Vector4::zeros();
        v[index] = ONE;
        SpinState(v)
    }

    /// α|ψ⁻⟩ + β|φ⁻⟩, the logical encoding of the conceptual model.
    pub fn logical(alpha: C64, beta: C64) -> Result<Self> {
        let v = BellState::PsiMinus.state().0 * alpha + BellState::PhiMinus.state().0 * beta;
        SpinState::new(v)
    }

    pub fn amplitudes(&self) -> &Vector4<C64> {
        &self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &SpinState) -> C64 {
        self.0.dotc(&other.0)
    }

    /// |⟨self|other⟩|²
    pub fn overlap(&self, other: &SpinState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Multiplies by a unit-modulus phase.
    pub fn with_phase(&self, phase: C64) -> SpinState {
        SpinState(self.0 * phase)
    }

    /// Applies a unitary and checks that the norm survived.
    pub fn apply(&self, op: &SpinOperator) -> Result<SpinState> {
        SpinState::new(op.0 * self.0)
    }

    /// Amplitudes ⟨B|ψ⟩ in `BellState::ALL` order.
    pub fn bell_components(&self) -> [C64; 4] {
        BellState::ALL.map(|b| b.state().inner(self))
    }

    /// Identifies the Bell state this vector is proportional to, returning it
    /// with the unit phase `c` such that `self = c |B⟩`.
    pub fn bell_ray(&self, tol: f64) -> Result<(BellState, C64)> {
        let comps = self.bell_components();
        let (best, amp) = BellState::ALL
            .iter()
            .zip(comps)
            .max_by(|x, y| x.1.norm_sqr().total_cmp(&y.1.norm_sqr()))
            .map(|(b, c)| (*b, c))
            .expect("four Bell components");
        let best_overlap = amp.norm_sqr();
        if (1.0 - best_overlap).abs() > tol {
            return Err(Error::NotBellRay { best_overlap });
        }
        Ok((best, amp / amp.norm()))
    }

    /// Equality up to a global phase.
    pub fn same_ray(&self, other: &SpinState, tol: f64) -> bool {
        (1.0 - self.overlap(other)).abs() <= tol
    }

    pub fn approx_eq(&self, other: &SpinState, tol: f64) -> bool {
        (self.0 - other.0).camax() <= tol
    }
}

/// Dense 4×4 operator on the spin space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinOperator(Matrix4<C64>);

impl SpinOperator {
    pub fn from_matrix(m: Matrix4<C64>) -> Self {
        SpinOperator(m)
    }

    pub fn identity() -> Self {
        SpinOperator(Matrix4::identity())
    }

    pub fn zero() -> Self {
        SpinOperator(Matrix4::zeros())
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        SpinOperator(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> Self {
        SpinOperator(self.0 * s)
    }

    pub fn add(&self, other: &SpinOperator) -> Self {
        SpinOperator(self.0 + other.0)
    }

    /// Raw matrix-vector product, no normalization.
    pub fn act(&self, state: &SpinState) -> Vector4<C64> {
        self.0 * state.0
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.0 - self.0.adjoint()).camax() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.0.adjoint() * self.0 - Matrix4::identity()).camax() <= tol
    }

    pub fn approx_eq(&self, other: &SpinOperator, tol: f64) -> bool {
        (self.0 - other.0).camax() <= tol
    }

    /// If the operator is `c·I`, returns `c`.
    pub fn scalar_part(&self, tol: f64) -> Option<C64> {
        let c = self.0[(0, 0)];
        ((self.0 - Matrix4::identity() * c).camax() <= tol).then_some(c)
    }
}

impl Mul for SpinOperator {
    type Output = SpinOperator;

    fn mul(self, rhs: SpinOperator) -> SpinOperator {
        SpinOperator(self.0 * rhs.0)
    }
}

fn single_pauli(axis: Axis) -> [[C64; 2]; 2] {
    match axis {
        Axis::X => [[ZERO, ONE], [ONE, ZERO]],
        Axis::Y => [[ZERO, -I], [I, ZERO]],
        Axis::Z => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// Kronecker product of two single-qubit matrices, `left` acting on `a`.
pub(crate) fn kron2(left: [[C64; 2]; 2], right: [[C64; 2]; 2]) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| left[r / 2][c / 2] * right[r % 2][c % 2])
}

const ID2: [[C64; 2]; 2] = [[ONE, ZERO], [ZERO, ONE]];

/// σ_axis ⊗ I for particle `a`, I ⊗ σ_axis for particle `b`.
pub fn pauli(axis: Axis, particle: Particle) -> SpinOperator {
    let p = single_pauli(axis);
    SpinOperator(match particle {
        Particle::A => kron2(p, ID2),
        Particle::B => kron2(ID2, p),
    })
}

/// The single-qubit matrix for a Pauli label, exposed for the Pauli-string
/// algebra in [`crate::logical`].
pub(crate) fn pauli_2x2(axis: Option<Axis>) -> [[C64; 2]; 2] {
    axis.map_or(ID2, single_pauli)
}

/// Bell basis in the order ψ⁻, φ⁻, ψ⁺, φ⁺.
pub fn bell_basis() -> [SpinState; 4] {
    BellState::ALL.map(BellState::state)
}

/// `Jz ZaZb + Jx XaXb + Jy YaYb + J∥ (Za + Zb)`.
pub fn interaction_operator(jx: f64, jy: f64, jz: f64, jpar: f64) -> SpinOperator {
    let pair = |axis| pauli(axis, Particle::A) * pauli(axis, Particle::B);
    let field = pauli(Axis::Z, Particle::A).add(&pauli(Axis::Z, Particle::B));
    pair(Axis::Z)
        .scale(jz.into())
        .add(&pair(Axis::X).scale(jx.into()))
        .add(&pair(Axis::Y).scale(jy.into()))
        .add(&field.scale(jpar.into()))
}

/// Dense N×N operator on the truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionOperator(DMatrix<C64>);

impl MotionOperator {
    pub fn from_matrix(m: DMatrix<C64>) -> Self {
        assert!(m.is_square(), "motion operators are square");
        MotionOperator(m)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn adjoint(&self) -> Self {
        MotionOperator(self.0.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.0 - self.0.adjoint()).camax() <= tol
    }

    /// Raw matrix-vector product, no normalization.
    pub fn act(&self, state: &MotionState) -> DVector<C64> {
        &self.0 * &state.amplitudes
    }

    /// ⟨φ|O|φ⟩
    pub fn expectation(&self, state: &MotionState) -> C64 {
        state.amplitudes.dotc(&(&self.0 * &state.amplitudes))
    }
}

impl Mul for &MotionOperator {
    type Output = MotionOperator;

    fn mul(self, rhs: &MotionOperator) -> MotionOperator {
        MotionOperator(&self.0 * &rhs.0)
    }
}

/// Annihilation and creation operators on an `n`-level Fock space.
pub fn ladder(n: usize) -> Result<(MotionOperator, MotionOperator)> {
    if n < 2 {
        return Err(Error::Dimension(format!(
            "Fock dimension must be at least 2, got {n}"
        )));
    }
    let mut a = DMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    let a = MotionOperator(a);
    let a_dag = a.adjoint();
    Ok((a, a_dag))
}

/// Position-space frame of a motion state: the trap origin and the
/// zero-point spread, both in μm.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionFrame {
    pub origin_um: f64,
    pub r_zpm_um: f64,
}

impl MotionFrame {
    pub fn new(origin_um: f64, r_zpm_um: f64) -> Result<Self> {
        if !(r_zpm_um > 0.0) || !r_zpm_um.is_finite() {
            return Err(Error::InvalidParameter {
                name: "r_zpm_um",
                reason: format!("must be positive and finite, got {r_zpm_um}"),
            });
        }
        if !origin_um.is_finite() {
            return Err(Error::InvalidParameter {
                name: "origin_um",
                reason: "must be finite".into(),
            });
        }
        Ok(MotionFrame {
            origin_um,
            r_zpm_um,
        })
    }

    /// Dimensionless Hermite-function argument for position `r`.
    fn xi(&self, r_um: f64) -> f64 {
        (r_um - self.origin_um) / (std::f64::consts::SQRT_2 * self.r_zpm_um)
    }

    /// Jacobian 1/(√2 R_zpm) converting |ψ(ξ)|² into a density per μm.
    fn density_scale(&self) -> f64 {
        1.0 / (std::f64::consts::SQRT_2 * self.r_zpm_um)
    }
}

/// Orthonormal harmonic-oscillator eigenfunctions ψ_0..ψ_{n-1} at `xi`,
/// from the normalized three-term recurrence.
pub fn hermite_functions(n: usize, xi: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let psi0 = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    out.push(psi0);
    if n == 1 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * xi * psi0);
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * xi * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Precomputed oscillator eigenfunctions at a fixed position, so repeated
/// density evaluations cost one dot product.
#[derive(Clone, Debug)]
pub struct PositionProbe {
    r_um: f64,
    chi: DVector<C64>,
    scale: f64,
}

impl PositionProbe {
    pub fn new(dim: usize, frame: MotionFrame, r_um: f64) -> Self {
        let chi = hermite_functions(dim, frame.xi(r_um));
        PositionProbe {
            r_um,
            chi: DVector::from_iterator(dim, chi.into_iter().map(C64::from)),
            scale: frame.density_scale(),
        }
    }

    pub fn position_um(&self) -> f64 {
        self.r_um
    }

    /// |φ(R)|² in 1/μm.
    pub fn density(&self, amplitudes: &DVector<C64>) -> f64 {
        self.chi.dot(amplitudes).norm_sqr() * self.scale
    }
}

/// Normalized motion state in the truncated Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionState {
    amplitudes: DVector<C64>,
    frame: MotionFrame,
}

impl MotionState {
    /// Wraps amplitudes that must already be normalized.
    pub fn new(amplitudes: DVector<C64>, frame: MotionFrame) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::Dimension(format!(
                "Fock dimension must be at least 2, got {}",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Norm {
                norm,
                context: "MotionState::new",
            });
        }
        Ok(MotionState { amplitudes, frame })
    }

    /// Renormalizes raw amplitudes, as after a jump or a non-unitary step.
    pub fn renormalized(amplitudes: DVector<C64>, frame: MotionFrame) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Norm {
                norm,
                context: "MotionState::renormalized",
            });
        }
        MotionState::new(amplitudes.unscale(norm), frame)
    }

    pub fn fock(dim: usize, level: usize, frame: MotionFrame) -> Result<Self> {
        if dim < 2 || level >= dim {
            return Err(Error::Dimension(format!(
                "Fock level {level} not in dimension {dim}"
            )));
        }
        let mut v = DVector::zeros(dim);
        v[level] = ONE;
        MotionState::new(v, frame)
    }

    pub fn ground(dim: usize, frame: MotionFrame) -> Result<Self> {
        MotionState::fock(dim, 0, frame)
    }

    /// Coherent state of width R_zpm centered at `target_um`; the surrogate
    /// for a position eigenstate |R⟩ in the truncated basis.
    pub fn displaced_ground_state(
        dim: usize,
        target_um: f64,
        frame: MotionFrame,
        tail_tol: f64,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension(format!(
                "Fock dimension must be at least 2, got {dim}"
            )));
        }
        let alpha = (target_um - frame.origin_um) / (2.0 * frame.r_zpm_um);
        let mut v = DVector::zeros(dim);
        let mut c = (-0.5 * alpha * alpha).exp();
        v[0] = C64::from(c);
        for n in 1..dim {
            c *= alpha / (n as f64).sqrt();
            v[n] = C64::from(c);
        }
        Self::finish_projection(v, frame, tail_tol)
    }

    /// Real Gaussian wavepacket with position standard deviation `sigma_um`,
    /// projected onto the Fock basis by quadrature.
    pub fn gaussian_wavepacket(
        dim: usize,
        center_um: f64,
        sigma_um: f64,
        frame: MotionFrame,
        tail_tol: f64,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension(format!(
                "Fock dimension must be at least 2, got {dim}"
            )));
        }
        if !(sigma_um > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma_um",
                reason: format!("must be positive, got {sigma_um}"),
            });
        }
        // Integrate in ξ over the union of the Hermite-function support and
        // the packet's support.
        let s = std::f64::consts::SQRT_2 * frame.r_zpm_um;
        let xi_c = (center_um - frame.origin_um) / s;
        let xi_w = sigma_um / s;
        let reach = ((2 * dim + 1) as f64).sqrt() + 8.0;
        let lo = (-reach).min(xi_c - 14.0 * xi_w);
        let hi = reach.max(xi_c + 14.0 * xi_w);
        let points = 6001;
        let h = (hi - lo) / (points - 1) as f64;
        let norm_g = (2.0 * PI * sigma_um * sigma_um).powf(-0.25) * s.sqrt();
        let mut coeffs = vec![0.0; dim];
        for k in 0..points {
            let xi = lo + h * k as f64;
            let x = xi * s + frame.origin_um;
            let d = x - center_um;
            let g = norm_g * (-(d * d) / (4.0 * sigma_um * sigma_um)).exp();
            let w = if k == 0 || k == points - 1 {
                0.5 * h
            } else {
                h
            };
            for (c, psi) in coeffs.iter_mut().zip(hermite_functions(dim, xi)) {
                *c += w * g * psi;
            }
        }
        let v = DVector::from_iterator(dim, coeffs.into_iter().map(C64::from));
        Self::finish_projection(v, frame, tail_tol)
    }

    fn finish_projection(v: DVector<C64>, frame: MotionFrame, tail_tol: f64) -> Result<Self> {
        let captured = v.norm_squared();
        let lost = (1.0 - captured).max(0.0);
        let state = MotionState::renormalized(v, frame)?;
        let population = state.tail_population().max(lost);
        if population > tail_tol {
            return Err(Error::Truncation {
                population,
                tolerance: tail_tol,
            });
        }
        Ok(state)
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn frame(&self) -> MotionFrame {
        self.frame
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// Population of the top [`TAIL_LEVELS`] Fock levels.
    pub fn tail_population(&self) -> f64 {
        let n = self.dim();
        let start = n.saturating_sub(TAIL_LEVELS);
        self.amplitudes.rows(start, n - start).norm_squared()
    }

    pub fn check_tail(&self, tail_tol: f64) -> Result<()> {
        let population = self.tail_population();
        if population > tail_tol {
            return Err(Error::Truncation {
                population,
                tolerance: tail_tol,
            });
        }
        Ok(())
    }

    /// ⟨a†a⟩
    pub fn mean_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.norm_sqr())
            .sum()
    }

    /// ⟨a a†⟩ in the truncated basis (the top level has no a† image).
    pub fn mean_anti_number(&self) -> f64 {
        let n = self.dim();
        self.amplitudes
            .iter()
            .take(n - 1)
            .enumerate()
            .map(|(k, c)| (k + 1) as f64 * c.norm_sqr())
            .sum()
    }

    /// ⟨a + a†⟩ and ⟨(a + a†)²⟩ from the tridiagonal quadrature.
    fn quadrature_moments(&self) -> (f64, f64) {
        let c = &self.amplitudes;
        let n = c.len();
        let mut first = 0.0;
        let mut second = 0.0;
        for k in 0..n {
            // (a + a†)|c⟩ at level k
            let mut y = ZERO;
            if k + 1 < n {
                y += c[k + 1] * ((k + 1) as f64).sqrt();
            }
            if k > 0 {
                y += c[k - 1] * (k as f64).sqrt();
            }
            first += (c[k].conj() * y).re;
            second += y.norm_sqr();
        }
        (first, second)
    }

    /// ⟨R⟩ in μm.
    pub fn mean_position(&self) -> f64 {
        let (m1, _) = self.quadrature_moments();
        self.frame.origin_um + self.frame.r_zpm_um * m1
    }

    /// Var(R) in μm².
    pub fn position_variance(&self) -> f64 {
        let (m1, m2) = self.quadrature_moments();
        let z = self.frame.r_zpm_um;
        (z * z * (m2 - m1 * m1)).max(0.0)
    }

    /// |φ(R)|² in 1/μm, without the truncation check.
    pub fn density_unchecked(&self, r_um: f64) -> f64 {
        PositionProbe::new(self.dim(), self.frame, r_um).density(&self.amplitudes)
    }

    /// |φ(R)|² in 1/μm. Fails when the truncation tail exceeds the default
    /// tolerance, since the density is then unreliable.
    pub fn position_density(&self, r_um: f64) -> Result<f64> {
        if !r_um.is_finite() {
            return Err(Error::InvalidParameter {
                name: "r_um",
                reason: "position must be finite".into(),
            });
        }
        self.check_tail(DEFAULT_TAIL_TOL)?;
        Ok(self.density_unchecked(r_um))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn frame() -> MotionFrame {
        MotionFrame::new(0.0, 0.23).unwrap()
    }

    #[test]
    fn pauli_z_a_fixes_00() {
        let s = SpinState::basis(0);
        let out = s.apply(&pauli(Axis::Z, Particle::A)).unwrap();
        assert!(out.approx_eq(&s, 1e-15));
    }

    #[test]
    fn pauli_x_b_maps_singlet_to_phi_minus() {
        let out = BellState::PsiMinus
            .state()
            .apply(&pauli(Axis::X, Particle::B))
            .unwrap();
        assert!(out.approx_eq(&BellState::PhiMinus.state(), 1e-15));
    }

    #[test]
    fn paulis_are_hermitian_unitary_involutions() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            for particle in [Particle::A, Particle::B] {
                let p = pauli(axis, particle);
                assert!(p.is_hermitian(1e-15));
                assert!(p.is_unitary(1e-12));
                assert!((p * p).approx_eq(&SpinOperator::identity(), 1e-12));
            }
        }
    }

    #[test]
    fn iy_equals_zx_on_each_particle() {
        for particle in [Particle::A, Particle::B] {
            let iy = pauli(Axis::Y, particle).scale(I);
            let zx = pauli(Axis::Z, particle) * pauli(Axis::X, particle);
            assert!(iy.approx_eq(&zx, 1e-12));
        }
    }

    #[test]
    fn bell_basis_is_orthonormal() {
        let basis = bell_basis();
        for (i, u) in basis.iter().enumerate() {
            for (j, v) in basis.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(u.overlap(v), expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn interaction_examples() {
        let op = interaction_operator(1.0, 1.0, 1.0, 0.0);
        let v = op.act(&BellState::PsiMinus.state());
        let expected = BellState::PsiMinus.state().amplitudes() * C64::from(-3.0);
        assert!((v - expected).camax() < 1e-14);

        assert!(interaction_operator(0.0, 0.0, 0.0, 0.0).approx_eq(&SpinOperator::zero(), 0.0));

        let op = interaction_operator(1.0, 2.0, 3.0, 0.0);
        let phi_p = BellState::PhiPlus.state();
        let lambda = phi_p.inner(&SpinState(op.act(&phi_p)));
        assert_relative_eq!(lambda.re, 2.0, epsilon = 1e-14);
        // dense diagonalization contains the same eigenvalue
        let eig = op.matrix().symmetric_eigen();
        assert!(eig.eigenvalues.iter().any(|e| (e - 2.0).abs() < 1e-12));
    }

    #[test]
    fn parallel_field_breaks_bell_basis_only_for_phi() {
        let op = interaction_operator(0.3, -0.2, 0.5, 0.7);
        for b in [BellState::PsiMinus, BellState::PsiPlus] {
            let v = SpinState::normalized(op.act(&b.state())).unwrap();
            assert!(v.same_ray(&b.state(), 1e-12));
        }
        let v = SpinState::normalized(op.act(&BellState::PhiPlus.state())).unwrap();
        assert!(!v.same_ray(&BellState::PhiPlus.state(), 1e-3));
    }

    #[test]
    fn ladder_rejects_small_dimension() {
        assert!(ladder(1).is_err());
        assert!(ladder(2).is_ok());
    }

    #[test]
    fn ladder_actions() {
        let n = 8;
        let (a, ad) = ladder(n).unwrap();
        let one = MotionState::fock(n, 1, frame()).unwrap();
        let v = a.act(&one);
        assert_relative_eq!(v[0].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-15);

        let num = &ad * &a;
        for k in 0..n - 1 {
            let s = MotionState::fock(n, k, frame()).unwrap();
            assert_relative_eq!(num.expectation(&s).re, k as f64, epsilon = 1e-12);
        }
        assert_eq!(ad.matrix(), &a.matrix().adjoint());
    }

    #[test]
    fn commutator_is_identity_below_truncation_edge() {
        let n = 10;
        let (a, ad) = ladder(n).unwrap();
        let comm = (&a * &ad).into_matrix() - (&ad * &a).into_matrix();
        for k in 0..n {
            let expected = if k < n - 1 { 1.0 } else { -((n - 1) as f64) };
            assert_relative_eq!(comm[(k, k)].re, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermite_recurrence_stays_finite_and_orthonormal() {
        let n = 40;
        // Gram matrix by trapezoid quadrature on a wide grid.
        let m = 8001;
        let (lo, hi) = (-14.0, 14.0);
        let h = (hi - lo) / (m - 1) as f64;
        let mut gram = vec![vec![0.0; n]; n];
        for k in 0..m {
            let psi = hermite_functions(n, lo + h * k as f64);
            assert!(psi.iter().all(|p| p.is_finite()));
            for i in 0..n {
                for j in 0..n {
                    gram[i][j] += h * psi[i] * psi[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[i][j] - expected).abs() < 1e-9,
                    "gram[{i}][{j}] = {}",
                    gram[i][j]
                );
            }
        }
    }

    #[test]
    fn ground_density_peak_and_parity_node() {
        let f = frame();
        let g = MotionState::ground(32, f).unwrap();
        let peak = g.position_density(0.0).unwrap();
        assert_relative_eq!(peak, 1.0 / ((2.0 * PI).sqrt() * 0.23), max_relative = 1e-12);
        let e1 = MotionState::fock(32, 1, f).unwrap();
        assert!(e1.position_density(0.0).unwrap().abs() < 1e-30);
    }

    #[test]
    fn densities_integrate_to_one() {
        let f = MotionFrame::new(1.9, 0.23).unwrap();
        let states = [
            MotionState::ground(32, f).unwrap(),
            MotionState::fock(32, 5, f).unwrap(),
            MotionState::displaced_ground_state(32, 2.4, f, 1e-6).unwrap(),
            MotionState::gaussian_wavepacket(32, 1.7, 0.3, f, 1e-6).unwrap(),
        ];
        for s in &states {
            let sigma = s.position_variance().sqrt();
            let mu = s.mean_position();
            let (lo, hi) = (
                mu - 8.0 * sigma.max(0.23) - 2.0,
                mu + 8.0 * sigma.max(0.23) + 2.0,
            );
            let m = 4001;
            let h = (hi - lo) / (m - 1) as f64;
            let total: f64 = (0..m)
                .map(|k| {
                    let w = if k == 0 || k == m - 1 { 0.5 } else { 1.0 };
                    w * h * s.density_unchecked(lo + h * k as f64)
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-6, "integral {total}");
        }
    }

    #[test]
    fn displaced_ground_state_moments() {
        let f = frame();
        let g = MotionState::displaced_ground_state(32, 0.0, f, 1e-6).unwrap();
        assert!((g.amplitudes()[0] - ONE).norm() < 1e-15);

        let target = 0.41;
        let s = MotionState::displaced_ground_state(32, target, f, 1e-6).unwrap();
        assert!((s.mean_position() - target).abs() < 1e-6);
        assert_relative_eq!(s.position_variance(), 0.23 * 0.23, max_relative = 1e-9);

        let two = MotionState::displaced_ground_state(32, 2.0 * 0.23, f, 1e-6).unwrap();
        assert!((two.mean_number() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn displacement_beyond_truncation_is_rejected() {
        let f = frame();
        let err = MotionState::displaced_ground_state(16, 10.0 * 0.23 * 2.0, f, 1e-6).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn gaussian_wavepacket_has_requested_width() {
        let f = frame();
        let s = MotionState::gaussian_wavepacket(32, 0.1, 0.22, f, 1e-6).unwrap();
        assert!((s.mean_position() - 0.1).abs() < 1e-9);
        assert_relative_eq!(s.position_variance().sqrt(), 0.22, max_relative = 1e-8);
        // width equal to R_zpm reproduces the coherent state
        let c = MotionState::gaussian_wavepacket(32, 0.3, 0.23, f, 1e-6).unwrap();
        let d = MotionState::displaced_ground_state(32, 0.3, f, 1e-6).unwrap();
        assert!((c.amplitudes() - d.amplitudes()).camax() < 1e-9);
    }

    #[test]
    fn bell_ray_detection() {
        let s = BellState::PhiPlus.state().with_phase(C64::new(0.0, -1.0));
        let (b, phase) = s.bell_ray(1e-9).unwrap();
        assert_eq!(b, BellState::PhiPlus);
        assert!((phase - C64::new(0.0, -1.0)).norm() < 1e-15);
        let mix = SpinState::logical(C64::from(0.6), C64::from(0.8)).unwrap();
        assert!(mix.bell_ray(1e-9).is_err());
    }
}
