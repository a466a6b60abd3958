//! Embedded acceptance assertions, shared by `--check` mode and the
//! acceptance test suite.

use serde::Serialize;

use qubot_core::ensemble::{EnsembleStats, Settling, SteadyState, SweepResult};
use qubot_core::potentials::{Landscape, ParallelFieldReport};
use qubot_core::quantum::BellState;

/// One named assertion with the measured quantity in `detail`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            pass,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Steady-state overlap band.
pub const STEADY_F_BAND: (f64, f64) = (0.65, 0.75);
/// The corrected curve must beat free decoherence from this time on (s).
pub const BEATS_FREE_FROM: f64 = 6e-3;
/// Settling-time band (s).
pub const SETTLING_BAND: (f64, f64) = (2e-3, 6e-3);
/// |⟨F⟩_s − e^{−Γ t_s}| bound.
pub const SETTLING_F_TOL: f64 = 0.08;
/// Pearson coefficient bound for "significant anti-correlation".
pub const PEARSON_MAX: f64 = -0.3;
/// Position sweep: the optimum and the region where ⟨F⟩_s < 0.5.
pub const OPTIMAL_POSITION: f64 = 0.63;
pub const CLOSE_CORRECTOR_LIMIT: f64 = 0.40;
pub const CLOSE_CORRECTOR_F_MAX: f64 = 0.5;
/// Landscape: adjacent minima separation band (μm).
pub const SEPARATION_BAND: (f64, f64) = (0.2, 0.4);
/// Landscape: local trap frequencies within this factor of 2π·1 kHz.
pub const TRAP_FREQUENCY_FACTOR: f64 = 2.0;
pub const TRAP_FREQUENCY_TARGET: f64 = std::f64::consts::TAU * 1e3;
/// ⟨J_∥⟩ targets (rad/s) and relative tolerance.
pub const JPAR_MAIN: f64 = 1401e3;
pub const JPAR_APPENDIX_C: f64 = 1803e3;
pub const JPAR_TOL: f64 = 0.10;
/// Compensating field "of order 2 G": within a factor 10.
pub const FIELD_TARGET_G: f64 = 2.0;
pub const FIELD_ORDER_FACTOR: f64 = 10.0;

/// ⟨F⟩_s band and the comparison with free decoherence.
pub fn simulation_headline(stats: &EnsembleStats, ss: &SteadyState, f_free: &[f64]) -> Vec<Check> {
    let (lo, hi) = STEADY_F_BAND;
    let mut worst: Option<(f64, f64)> = None;
    for ((t, f), g) in stats.times.iter().zip(&stats.f_mean).zip(f_free) {
        if *t >= BEATS_FREE_FROM - 1e-12 {
            let margin = f - g;
            if worst.is_none_or(|(_, m)| margin < m) {
                worst = Some((*t, margin));
            }
        }
    }
    let beats = worst.is_some_and(|(_, m)| m > 0.0);
    vec![
        Check::new(
            "steady-state overlap",
            ss.f >= lo && ss.f <= hi,
            format!("<F>_s = {:.4} (required [{lo}, {hi}])", ss.f),
        ),
        Check::new(
            "beats free decoherence",
            beats,
            match worst {
                Some((t, m)) => format!(
                    "smallest F - F_free for t >= {} ms is {m:.4} at t = {:.2} ms",
                    BEATS_FREE_FROM * 1e3,
                    t * 1e3
                ),
                None => "record ends before 6 ms".into(),
            },
        ),
    ]
}

pub fn settling(ss: &SteadyState, settling: Option<&Settling>) -> Vec<Check> {
    let (lo, hi) = SETTLING_BAND;
    match settling {
        None => vec![Check::new(
            "settling time",
            false,
            "no steady state detected".into(),
        )],
        Some(s) => {
            let diff = (ss.f - s.predicted_f).abs();
            vec![
                Check::new(
                    "settling time",
                    s.t_s >= lo && s.t_s <= hi,
                    format!(
                        "t_s = {:.2} ms (required [{}, {}] ms)",
                        s.t_s * 1e3,
                        lo * 1e3,
                        hi * 1e3
                    ),
                ),
                Check::new(
                    "settling consistency",
                    diff < SETTLING_F_TOL,
                    format!(
                        "|<F>_s - exp(-Gamma t_s)| = |{:.4} - {:.4}| = {diff:.4} (required < {SETTLING_F_TOL})",
                        ss.f, s.predicted_f
                    ),
                ),
            ]
        }
    }
}

pub fn anticorrelation(pearson: Option<f64>) -> Check {
    match pearson {
        Some(r) => Check::new(
            "rate anti-correlation",
            r < PEARSON_MAX,
            format!("Pearson(gamma_L1, gamma_L2) = {r:.4} (required < {PEARSON_MAX})"),
        ),
        None => Check::new(
            "rate anti-correlation",
            false,
            "undefined (zero variance)".into(),
        ),
    }
}

fn index_of(values: &[f64], target: f64) -> Option<usize> {
    values.iter().position(|v| (v - target).abs() < 1e-9)
}

/// Position sweep: optimum near 0.63 μm, collapse for close correctors,
/// and rates falling beyond the optimum.
pub fn position_sweep(s: &SweepResult) -> Vec<Check> {
    let mut order: Vec<usize> = (0..s.values.len()).collect();
    order.sort_by(|&a, &b| s.values[a].total_cmp(&s.values[b]));
    let sorted = |xs: &[f64]| order.iter().map(|&i| xs[i]).collect::<Vec<_>>();
    let (v, f, g, ge) = (
        sorted(&s.values),
        sorted(&s.f_s),
        sorted(&s.gamma_s),
        sorted(&s.gamma_s_err),
    );
    let mut checks = Vec::new();
    let best = (0..f.len()).max_by(|&a, &b| f[a].total_cmp(&f[b]));
    let target = index_of(&v, OPTIMAL_POSITION);
    checks.push(match (best, target) {
        (Some(b), Some(t)) => Check::new(
            "optimal corrector position",
            b.abs_diff(t) <= 1,
            format!(
                "argmax <F>_s at {:.2} um (<F>_s = {:.4}); required {OPTIMAL_POSITION} um +/- one grid step",
                v[b], f[b]
            ),
        ),
        _ => Check::new(
            "optimal corrector position",
            false,
            format!("sweep does not contain {OPTIMAL_POSITION} um"),
        ),
    });
    let close: Vec<usize> = (0..v.len())
        .filter(|&i| v[i] < CLOSE_CORRECTOR_LIMIT)
        .collect();
    if !close.is_empty() {
        let detail = close
            .iter()
            .map(|&i| format!("{:.2} um: {:.4}", v[i], f[i]))
            .collect::<Vec<_>>()
            .join(", ");
        checks.push(Check::new(
            "close correctors degrade overlap",
            close.iter().all(|&i| f[i] < CLOSE_CORRECTOR_F_MAX),
            format!("<F>_s for |R_L1| < {CLOSE_CORRECTOR_LIMIT} um: {detail} (required < {CLOSE_CORRECTOR_F_MAX})"),
        ));
    }
    if let Some(b) = best {
        let mut ok = true;
        let mut parts = Vec::new();
        for i in b..v.len().saturating_sub(1) {
            let within = g[i + 1] <= g[i] + ge[i] + ge[i + 1];
            ok &= within;
            parts.push(format!(
                "{:.2}->{:.2}: {:.0}->{:.0}",
                v[i],
                v[i + 1],
                g[i],
                g[i + 1]
            ));
        }
        checks.push(Check::new(
            "rates fall beyond the optimum",
            ok,
            format!("mean total rate (1/s) {}", parts.join(", ")),
        ));
    }
    checks
}

/// ⟨F⟩_s non-increasing in n̄ within one-standard-deviation bars.
pub fn temperature_sweep(s: &SweepResult) -> Check {
    let mut order: Vec<usize> = (0..s.values.len()).collect();
    order.sort_by(|&a, &b| s.values[a].total_cmp(&s.values[b]));
    let mut ok = true;
    let mut parts = Vec::new();
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        ok &= s.f_s[j] - s.f_s_err[j] <= s.f_s[i] + s.f_s_err[i];
    }
    for &i in &order {
        parts.push(format!(
            "nbar {}: {:.4} +/- {:.4}",
            s.values[i], s.f_s[i], s.f_s_err[i]
        ));
    }
    Check::new("overlap non-increasing in nbar", ok, parts.join(", "))
}

/// Which preset's ⟨J_∥⟩ target applies.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum JparTarget {
    Main,
    AppendixC,
    None,
}

/// Landscape claims per preset. Main text: adjacent minimum separations,
/// trap frequencies, the ψ⁻/ψ⁺ coincidence and ⟨J_∥⟩; alternative pattern:
/// |φ⁻⟩ as protected state and ⟨J_∥⟩. Both: the compensating-field order.
pub fn landscape(l: &Landscape, field: &ParallelFieldReport, target: JparTarget) -> Vec<Check> {
    let mut checks = Vec::new();
    match target {
        JparTarget::Main => {
            checks.extend(landscape_structure(l));
            checks.push(jpar(field, JPAR_MAIN));
        }
        JparTarget::AppendixC => {
            let s = l.suggested_protected_state();
            checks.push(Check::new(
                "protected-state suggestion",
                s == Some(BellState::PhiMinus),
                format!(
                    "suggested {} (required phi-)",
                    s.map(|b| b.label()).unwrap_or("none")
                ),
            ));
            checks.push(jpar(field, JPAR_APPENDIX_C));
        }
        JparTarget::None => {}
    }
    let b = field.compensating_b.abs();
    checks.push(Check::new(
        "compensating field order",
        (FIELD_TARGET_G / FIELD_ORDER_FACTOR..=FIELD_TARGET_G * FIELD_ORDER_FACTOR).contains(&b),
        format!("|B| = {b:.3} G (required within x{FIELD_ORDER_FACTOR} of {FIELD_TARGET_G} G)"),
    ));
    checks
}

pub fn jpar(field: &ParallelFieldReport, want: f64) -> Check {
    let rel = (field.mean_j_par.abs() - want).abs() / want;
    Check::new(
        "mean parallel field",
        rel <= JPAR_TOL,
        format!(
            "|<J_par>| = {:.1} rad/s vs {want:.0} (relative deviation {rel:.4}, required <= {JPAR_TOL})",
            field.mean_j_par.abs()
        ),
    )
}

/// Adjacent minimum separations, local trap frequencies and the ψ⁻/ψ⁺
/// coincidence.
pub fn landscape_structure(l: &Landscape) -> Vec<Check> {
    let (lo, hi) = SEPARATION_BAND;
    let gaps = l.minimum_separations();
    let mut checks = vec![Check::new(
        "minima separation",
        !gaps.is_empty() && gaps.iter().all(|g| *g >= lo && *g <= hi),
        format!(
            "adjacent minimum separations {:?} um (required each in [{lo}, {hi}])",
            gaps.iter()
                .map(|g| (g * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        ),
    )];
    let mut freqs = Vec::new();
    let mut freq_ok = true;
    for bell in BellState::ALL {
        if let Some(m) = l.minimum(bell) {
            match m.trap_frequency {
                Some(w) => {
                    let ratio = w / TRAP_FREQUENCY_TARGET;
                    freq_ok &=
                        (1.0 / TRAP_FREQUENCY_FACTOR..=TRAP_FREQUENCY_FACTOR).contains(&ratio);
                    freqs.push(format!(
                        "{bell}: {:.3} kHz",
                        w / std::f64::consts::TAU / 1e3
                    ));
                }
                None => {
                    freq_ok = false;
                    freqs.push(format!("{bell}: flat"));
                }
            }
        }
    }
    checks.push(Check::new(
        "local trap frequencies",
        freq_ok && !freqs.is_empty(),
        format!(
            "{} (required within x{TRAP_FREQUENCY_FACTOR} of 1 kHz)",
            freqs.join(", ")
        ),
    ));
    let coincident = l.coincident(BellState::PsiMinus, BellState::PsiPlus);
    checks.push(Check::new(
        "psi-/psi+ coincidence",
        coincident,
        format!("coincident = {coincident}"),
    ));
    checks
}
