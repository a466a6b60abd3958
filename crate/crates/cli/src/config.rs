//! Run configuration: compiled-in presets, JSON files and flag overrides.
//!
//! Frequencies in configuration files are cyclic (Hz, MHz) and converted to
//! angular units internally. Rates (Γ, κ) are plain rates in 1/s. The
//! dressing strength V₀ is given directly in rad/s/μm².

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use qubot_core::mcwf::{nbar_from_temperature, SimParams};
use qubot_core::potentials::{DressingParams, ExchangePhase, TrapSpec, VaaBranch, MHZ};

use crate::error::CliError;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PresetName {
    PaperMain,
    PaperAppendixC,
    Custom,
}

/// How κ is obtained from the rule κ = 0.1 ms × ω_t².
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaReading {
    /// ω_t angular: κ = 1e-4 s · ω_t².
    CaptionAngular,
    /// ω_t cyclic: κ = 1e-4 s · (ω_t/2π)².
    CaptionCyclic,
}

/// Either a reading of that rule or an explicit rate in 1/s.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    Reading(KappaReading),
    PerSecond(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub gamma_per_s: f64,
    pub trap_frequency_hz: f64,
    pub kappa: KappaSpec,
    pub dt_s: f64,
    pub t_final_s: f64,
    pub r_l1_um: f64,
    pub r_l2_um: f64,
    pub corrector_width_um: f64,
    pub r01_um: f64,
    pub r10_um: f64,
    pub r00_um: f64,
    pub nbar: f64,
    /// When set, replaces `nbar` by 1/(exp(ħω_t/k_BT) − 1).
    pub temperature_k: Option<f64>,
    pub r_zpm_um: f64,
    pub wavepacket_sigma_um: f64,
    pub fock_dim: usize,
    pub record_stride: usize,
    pub correctors_enabled: bool,
    pub steady_state_start_s: f64,
    /// Also write every trajectory record.
    pub write_trajectories: bool,
}

impl SimulationConfig {
    pub fn paper_main() -> Self {
        let p = SimParams::paper_main();
        SimulationConfig {
            gamma_per_s: p.gamma,
            trap_frequency_hz: p.omega_t / TAU,
            kappa: KappaSpec::Reading(KappaReading::CaptionAngular),
            dt_s: p.dt,
            t_final_s: p.t_final,
            r_l1_um: p.r_l1,
            r_l2_um: p.r_l2,
            corrector_width_um: p.corrector_width,
            r01_um: p.r01,
            r10_um: p.r10,
            r00_um: p.r00,
            nbar: p.nbar,
            temperature_k: None,
            r_zpm_um: p.r_zpm,
            wavepacket_sigma_um: p.wavepacket_sigma,
            fock_dim: p.fock_dim,
            record_stride: p.record_stride,
            correctors_enabled: p.correctors_enabled,
            steady_state_start_s: qubot_core::ensemble::STEADY_STATE_START,
            write_trajectories: false,
        }
    }

    pub fn omega_t(&self) -> f64 {
        TAU * self.trap_frequency_hz
    }

    pub fn kappa_per_s(&self) -> f64 {
        match self.kappa {
            KappaSpec::Reading(KappaReading::CaptionAngular) => {
                SimParams::kappa_caption_angular(self.omega_t())
            }
            KappaSpec::Reading(KappaReading::CaptionCyclic) => {
                SimParams::kappa_caption_cyclic(self.omega_t())
            }
            KappaSpec::PerSecond(k) => k,
        }
    }

    /// Engine parameters in internal units.
    pub fn to_params(&self, seed: u64) -> Result<SimParams, CliError> {
        let omega_t = self.omega_t();
        let nbar = match self.temperature_k {
            Some(t) => nbar_from_temperature(t, omega_t).map_err(CliError::config)?,
            None => self.nbar,
        };
        let p = SimParams {
            gamma: self.gamma_per_s,
            omega_t,
            kappa: self.kappa_per_s(),
            dt: self.dt_s,
            t_final: self.t_final_s,
            r_l1: self.r_l1_um,
            r_l2: self.r_l2_um,
            corrector_width: self.corrector_width_um,
            r01: self.r01_um,
            r10: self.r10_um,
            r00: self.r00_um,
            nbar,
            r_zpm: self.r_zpm_um,
            wavepacket_sigma: self.wavepacket_sigma_um,
            fock_dim: self.fock_dim,
            record_stride: self.record_stride,
            correctors_enabled: self.correctors_enabled,
            seed,
        };
        p.validate().map_err(CliError::config)?;
        if !(self.steady_state_start_s >= 0.0 && self.steady_state_start_s < self.t_final_s) {
            return Err(CliError::Config(format!(
                "simulation.steady_state_start_s must lie in [0, t_final_s), got {}",
                self.steady_state_start_s
            )));
        }
        Ok(p)
    }
}

/// Dressing parameters with cyclic MHz frequencies and C₆ in MHz·μm⁶.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DressingConfig {
    pub n: u32,
    pub omega_plus_mhz: f64,
    pub omega_minus_mhz: f64,
    pub delta_plus_mhz: f64,
    pub delta_minus_mhz: f64,
    pub c6a_mhz_um6: f64,
    pub c6b_mhz_um6: f64,
    pub c6c_mhz_um6: f64,
    pub vaa_first_term_branch: VaaBranch,
    pub exchange_phase: ExchangePhase,
}

impl DressingConfig {
    pub fn from_params(p: &DressingParams) -> Self {
        DressingConfig {
            n: p.n,
            omega_plus_mhz: p.omega_plus / MHZ,
            omega_minus_mhz: p.omega_minus / MHZ,
            delta_plus_mhz: p.delta_plus / MHZ,
            delta_minus_mhz: p.delta_minus / MHZ,
            c6a_mhz_um6: p.c6a / MHZ,
            c6b_mhz_um6: p.c6b / MHZ,
            c6c_mhz_um6: p.c6c / MHZ,
            vaa_first_term_branch: p.vaa_first_term_branch,
            exchange_phase: p.exchange_phase,
        }
    }

    /// Internal parameters plus non-fatal warnings.
    pub fn to_params(&self) -> Result<(DressingParams, Vec<String>), CliError> {
        let p = DressingParams {
            n: self.n,
            omega_plus: self.omega_plus_mhz * MHZ,
            omega_minus: self.omega_minus_mhz * MHZ,
            delta_plus: self.delta_plus_mhz * MHZ,
            delta_minus: self.delta_minus_mhz * MHZ,
            c6a: self.c6a_mhz_um6 * MHZ,
            c6b: self.c6b_mhz_um6 * MHZ,
            c6c: self.c6c_mhz_um6 * MHZ,
            vaa_first_term_branch: self.vaa_first_term_branch,
            exchange_phase: self.exchange_phase,
        };
        let warnings = p.validate().map_err(CliError::config)?;
        Ok((p, warnings))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    pub r_min_um: f64,
    pub r_max_um: f64,
    pub points: usize,
    pub compensate_parallel: bool,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig {
            r_min_um: 0.2,
            r_max_um: 6.0,
            points: 2000,
            compensate_parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// |R_L1| values; each point uses R_L1 = +v, R_L2 = −v.
    pub positions_um: Vec<f64>,
    pub nbar: Vec<f64>,
    pub trajectories_per_point: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            positions_um: vec![0.47, 0.52, 0.58, 0.63, 0.69, 0.74, 0.80],
            nbar: vec![0.0, 0.1, 0.3, 1.0],
            trajectories_per_point: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: PresetName,
    pub seed: u64,
    pub trajectories: usize,
    /// Worker threads; `null` uses the available parallelism.
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub simulation: SimulationConfig,
    pub dressing: DressingConfig,
    pub trap: TrapSpec,
    pub landscape: LandscapeConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn preset(name: PresetName) -> Self {
        let (dressing, trap) = match name {
            PresetName::PaperAppendixC => (
                DressingParams::paper_appendix_c(),
                TrapSpec::paper_appendix_c(),
            ),
            PresetName::PaperMain | PresetName::Custom => {
                (DressingParams::paper_main(), TrapSpec::paper_main())
            }
        };
        RunConfig {
            preset: name,
            seed: SimParams::paper_main().seed,
            trajectories: 1000,
            workers: None,
            out: PathBuf::from("out"),
            simulation: SimulationConfig::paper_main(),
            dressing: DressingConfig::from_params(&dressing),
            trap,
            landscape: LandscapeConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    pub fn sim_params(&self) -> Result<SimParams, CliError> {
        self.simulation.to_params(self.seed)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trajectories == 0 {
            return Err(CliError::Config("trajectories must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if self.sweep.trajectories_per_point == 0 {
            return Err(CliError::Config(
                "sweep.trajectories_per_point must be at least 1".into(),
            ));
        }
        self.sim_params()?;
        self.dressing.to_params()?;
        self.trap.validate().map_err(CliError::config)?;
        let l = &self.landscape;
        if !(l.r_min_um > 0.0 && l.r_min_um < l.r_max_um && l.points >= 16) {
            return Err(CliError::Config(format!(
                "landscape grid needs 0 < r_min_um < r_max_um and points >= 16, got [{}, {}] with {}",
                l.r_min_um, l.r_max_um, l.points
            )));
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }
}

/// Command-line overrides; `None` leaves the lower layers in place.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Deep merge of `patch` into `base`; objects merge key by key, everything
/// else is replaced.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Preset, then file, then flags. The file may name its own preset, which
/// the `--preset` flag in turn overrides.
pub fn resolve(
    preset_flag: Option<PresetName>,
    file: Option<&Path>,
    overrides: &Overrides,
) -> Result<RunConfig, CliError> {
    let patch = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            let v: Value = serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!("malformed config {}: {e}", path.display()))
            })?;
            if !v.is_object() {
                return Err(CliError::Config(format!(
                    "config {} must be a JSON object",
                    path.display()
                )));
            }
            Some(v)
        }
        None => None,
    };
    let file_preset = match patch.as_ref().and_then(|p| p.get("preset")) {
        Some(v) => Some(
            serde_json::from_value::<PresetName>(v.clone())
                .map_err(|e| CliError::Config(format!("preset: {e}")))?,
        ),
        None => None,
    };
    let name = preset_flag.or(file_preset).unwrap_or(PresetName::PaperMain);
    let mut value = serde_json::to_value(RunConfig::preset(name))
        .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(p) = patch {
        merge(&mut value, p);
    }
    let mut cfg: RunConfig =
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("config: {e}")))?;
    cfg.preset = name;
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(n) = overrides.trajectories {
        cfg.trajectories = n;
        cfg.sweep.trajectories_per_point = n;
    }
    if let Some(w) = overrides.workers {
        cfg.workers = Some(w);
    }
    if let Some(o) = &overrides.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in [
            PresetName::PaperMain,
            PresetName::PaperAppendixC,
            PresetName::Custom,
        ] {
            RunConfig::preset(name).validate().unwrap();
        }
    }

    #[test]
    fn cyclic_frequencies_round_trip() {
        let cfg = RunConfig::preset(PresetName::PaperMain);
        assert!((cfg.simulation.trap_frequency_hz - 1000.0).abs() < 1e-9);
        assert!((cfg.dressing.omega_plus_mhz - 9.0).abs() < 1e-12);
        let (p, _) = cfg.dressing.to_params().unwrap();
        assert_eq!(p, DressingParams::paper_main());
        let sim = cfg.sim_params().unwrap();
        assert_eq!(sim, SimParams::paper_main());
    }

    #[test]
    fn kappa_forms() {
        let mut s = SimulationConfig::paper_main();
        assert!((s.kappa_per_s() - 1e-4 * (TAU * 1e3).powi(2)).abs() < 1e-9);
        s.kappa = KappaSpec::Reading(KappaReading::CaptionCyclic);
        assert!((s.kappa_per_s() - 100.0).abs() < 1e-9);
        let v: KappaSpec = serde_json::from_str("250.0").unwrap();
        assert_eq!(v, KappaSpec::PerSecond(250.0));
        let v: KappaSpec = serde_json::from_str("\"caption_cyclic\"").unwrap();
        assert_eq!(v, KappaSpec::Reading(KappaReading::CaptionCyclic));
    }

    #[test]
    fn merge_is_deep() {
        let mut base = serde_json::json!({"a": {"b": 1, "c": 2}, "d": 3});
        merge(&mut base, serde_json::json!({"a": {"c": 5}}));
        assert_eq!(base, serde_json::json!({"a": {"b": 1, "c": 5}, "d": 3}));
    }

    #[test]
    fn temperature_replaces_nbar() {
        let mut cfg = RunConfig::preset(PresetName::PaperMain);
        cfg.simulation.temperature_k = Some(10e-9);
        let p = cfg.sim_params().unwrap();
        assert!((p.nbar - 0.0083).abs() < 2e-4);
    }
}
