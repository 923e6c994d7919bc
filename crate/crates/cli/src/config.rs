//! Run configuration: a strict TOML schema plus dotted-key overrides.

use std::path::Path;

use arraymech::dynamics::BasisChoice;
use arraymech::modes::KGrid;
use arraymech::params::Polarization;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub units: UnitsSection,
    pub lattice: LatticeSection,
    pub trap: TrapSection,
    pub drive: DriveSection,
    #[serde(default)]
    pub lattice_sum: LatticeSumSection,
    #[serde(default)]
    pub modes: ModesSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub heating: HeatingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSection {
    #[serde(rename = "hbar_gamma_over_Er")]
    pub hbar_gamma_over_er: f64,
}

impl Default for UnitsSection {
    fn default() -> Self {
        UnitsSection { hbar_gamma_over_er: 810.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    /// Spacing in λ.
    pub a: f64,
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "default_polarization")]
    pub polarization: Polarization,
}

fn default_polarization() -> Polarization {
    Polarization::CircularXy
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    #[serde(rename = "depth_Er")]
    pub depth_er: f64,
    pub length_lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub detuning_gamma: f64,
    #[serde(default)]
    pub relative_to_cooperative: bool,
    pub rabi_gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waist_lambda: Option<f64>,
    /// Backward-beam amplitude relative to the forward beam; absent means one-sided.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backward_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub backward_phase_rad: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSumSection {
    pub initial_envelope_lambda: f64,
    pub max_envelope_lambda: f64,
    pub tolerance_gamma: f64,
    pub cutoff_ratio: f64,
}

impl Default for LatticeSumSection {
    fn default() -> Self {
        let p = arraymech::cooperative::TruncationPolicy::default();
        LatticeSumSection {
            initial_envelope_lambda: p.initial_envelope,
            max_envelope_lambda: p.max_envelope,
            tolerance_gamma: p.tolerance,
            cutoff_ratio: p.cutoff_ratio,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Periodic,
    StandingWave,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesSection {
    /// Wavevectors per axis for `bz-spectrum`.
    pub grid: usize,
    pub grid_kind: GridKind,
    pub shell: usize,
    pub max_shell: usize,
    pub shell_tolerance_nu0: f64,
    pub gap_threshold_nu0: f64,
    pub near_tolerance: f64,
    pub write_eigenvectors: bool,
}

impl Default for ModesSection {
    fn default() -> Self {
        ModesSection {
            grid: 16,
            grid_kind: GridKind::Periodic,
            shell: arraymech::modes::DEFAULT_SHELL,
            max_shell: 4 * arraymech::modes::DEFAULT_SHELL,
            shell_tolerance_nu0: 0.05,
            gap_threshold_nu0: arraymech::modes::DEFAULT_GAP_THRESHOLD,
            near_tolerance: arraymech::modes::DEFAULT_NEAR_TOLERANCE,
            write_eigenvectors: true,
        }
    }
}

impl ModesSection {
    pub fn k_grid(&self) -> KGrid {
        match self.grid_kind {
            GridKind::Periodic => KGrid::Periodic { n: self.grid },
            GridKind::StandingWave => KGrid::StandingWave {
                nx: self.grid,
                ny: self.grid,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKey {
    Auto,
    Site,
    Mode,
}

impl From<BasisKey> for BasisChoice {
    fn from(b: BasisKey) -> Self {
        match b {
            BasisKey::Auto => BasisChoice::Auto,
            BasisKey::Site => BasisChoice::Site,
            BasisKey::Mode => BasisChoice::Mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub n_traj: usize,
    pub seed: u64,
    /// Defaults to `0.05/max|ν_k|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_gamma_inv: Option<f64>,
    /// Defaults to `10/min α` when every coordinate is damped, else 50 trap periods.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final_gamma_inv: Option<f64>,
    pub outputs: usize,
    pub basis: BasisKey,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        DynamicsSection {
            n_traj: 10_000,
            seed: 1,
            dt_gamma_inv: None,
            t_final_gamma_inv: None,
            outputs: 50,
            basis: BasisKey::Auto,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatingSection {
    /// Beam waist for the photon budget; defaults to `drive.waist_lambda`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waist_lambda: Option<f64>,
    /// Atom index reported; defaults to the site nearest the array center.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepCommand {
    Response,
    Modes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Dotted key of the swept parameter, e.g. `lattice.a`.
    pub parameter: String,
    pub values: Vec<f64>,
    #[serde(default = "default_sweep_command")]
    pub command: SweepCommand,
}

fn default_sweep_command() -> SweepCommand {
    SweepCommand::Modes
}

/// One `--set` override as applied.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Override {
    pub key: String,
    /// Value in the file before the override, if any.
    pub file_value: Option<String>,
    pub value: String,
}

#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub overrides: Vec<Override>,
}

pub const CONFIG_HELP: &str = "\
CONFIGURATION KEYS (TOML; unit suffix in the key name, unknown keys are rejected)

  [units]
    hbar_gamma_over_Er        ħγ/E_R, fixes the atomic mass            [810]
  [lattice]
    a                         lattice spacing in λ                      (required)
    nx, ny                    sites per axis                            (required)
    polarization              \"circular-xy\" or \"linear-x\"               [circular-xy]
  [trap]
    depth_Er                  trap depth V/E_R                          (required)
    length_lambda             trap length l in λ                        (required)
  [drive]
    detuning_gamma            laser detuning in γ                       (required)
    relative_to_cooperative   detuning measured from δ_L = Δ            [false]
    rabi_gamma                peak Rabi frequency in γ                  (required)
    waist_lambda              Gaussian beam waist in λ; absent = uniform
    backward_ratio            backward/forward amplitude; absent = one-sided
    backward_phase_rad        phase of the backward beam                [0]
  [lattice_sum]
    initial_envelope_lambda   first Gaussian envelope width (≥ 50)      [150]
    max_envelope_lambda       largest envelope before giving up         [1200]
    tolerance_gamma           convergence tolerance on Δ and Γ          [1e-4]
    cutoff_ratio              hard cutoff in envelope widths            [4.5]
  [modes]
    grid                      wavevectors per axis for bz-spectrum      [16]
    grid_kind                 \"periodic\" or \"standing-wave\"             [periodic]
    shell                     half-width of the real-space shell sum    [60]
    max_shell                 shell doubling limit                      [240]
    shell_tolerance_nu0       shell convergence tolerance in ν0         [0.05]
    gap_threshold_nu0         reported spectral gaps exceed this        [0.02]
    near_tolerance            relative band counted as ν ≈ ν0           [0.01]
    write_eigenvectors        write eigenvectors.csv                    [true]
  [dynamics]
    n_traj                    Monte Carlo trajectories                  [10000]
    seed                      RNG seed (ChaCha8, one stream per trajectory) [1]
    dt_gamma_inv              time step in 1/γ                          [0.05/max ν_k]
    t_final_gamma_inv         duration in 1/γ                           [10/min α or 50 periods]
    outputs                   number of output intervals                [50]
    basis                     \"auto\", \"site\" or \"mode\"                  [auto]
  [heating]
    waist_lambda              beam waist for the photon budget          [drive.waist_lambda]
    atom                      reported atom index                       [center]
  [sweep]
    parameter                 dotted key to sweep, e.g. lattice.a       (required for sweep)
    values                    list of values                            (required for sweep)
    command                   \"modes\" or \"response\"                     [modes]

Any key can be overridden with --set section.key=value; the manifest records
the file value next to the override.";

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<LoadedConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_with_overrides(&text, overrides)
    }

    /// Parse file text, then apply `key=value` overrides in order.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<LoadedConfig, CliError> {
        // Parse once without overrides so schema errors carry file positions.
        let base: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if overrides.is_empty() {
            base.validate()?;
            return Ok(LoadedConfig {
                config: base,
                overrides: Vec::new(),
            });
        }
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut applied = Vec::new();
        for raw in overrides {
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{raw}` is not of the form key=value")))?;
            applied.push(set_dotted(&mut table, key.trim(), parse_value(value.trim()))?);
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("after overrides: {e}")))?;
        config.validate()?;
        Ok(LoadedConfig {
            config,
            overrides: applied,
        })
    }

    /// Copy of this configuration with one dotted key replaced.
    pub fn with_value(&self, key: &str, value: f64) -> Result<RunConfig, CliError> {
        let mut table: toml::Table =
            toml::from_str(&self.to_toml()).map_err(|e| CliError::Config(e.to_string()))?;
        set_dotted(&mut table, key, toml::Value::Float(value))?;
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("sweep value {value} for `{key}`: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        let mut positive = |key: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("`{key}` must be positive, got {v}"));
            }
        };
        positive("units.hbar_gamma_over_Er", self.units.hbar_gamma_over_er);
        positive("lattice.a", self.lattice.a);
        positive("trap.depth_Er", self.trap.depth_er);
        positive("trap.length_lambda", self.trap.length_lambda);
        positive("lattice_sum.tolerance_gamma", self.lattice_sum.tolerance_gamma);
        positive("lattice_sum.cutoff_ratio", self.lattice_sum.cutoff_ratio);
        positive("modes.shell_tolerance_nu0", self.modes.shell_tolerance_nu0);
        positive("modes.gap_threshold_nu0", self.modes.gap_threshold_nu0);
        positive("modes.near_tolerance", self.modes.near_tolerance);
        if let Some(w) = self.drive.waist_lambda {
            positive("drive.waist_lambda", w);
        }
        if let Some(w) = self.heating.waist_lambda {
            positive("heating.waist_lambda", w);
        }
        if let Some(dt) = self.dynamics.dt_gamma_inv {
            positive("dynamics.dt_gamma_inv", dt);
        }
        if let Some(t) = self.dynamics.t_final_gamma_inv {
            positive("dynamics.t_final_gamma_inv", t);
        }
        if !self.drive.detuning_gamma.is_finite() {
            problems.push("`drive.detuning_gamma` must be finite".into());
        }
        if !(self.drive.rabi_gamma >= 0.0) {
            problems.push(format!("`drive.rabi_gamma` must be non-negative, got {}", self.drive.rabi_gamma));
        }
        if let Some(r) = self.drive.backward_ratio {
            if !(r >= 0.0) {
                problems.push(format!("`drive.backward_ratio` must be non-negative, got {r}"));
            }
        }
        if self.lattice.nx == 0 || self.lattice.ny == 0 {
            problems.push("`lattice.nx` and `lattice.ny` must be at least 1".into());
        }
        if self.modes.grid == 0 {
            problems.push("`modes.grid` must be at least 1".into());
        }
        if self.modes.shell < 30 || self.modes.max_shell < self.modes.shell {
            problems.push("`modes.shell` must be ≥ 30 and ≤ `modes.max_shell`".into());
        }
        if self.dynamics.n_traj < 2 {
            problems.push("`dynamics.n_traj` must be at least 2".into());
        }
        if self.dynamics.outputs == 0 {
            problems.push("`dynamics.outputs` must be at least 1".into());
        }
        if let Some(atom) = self.heating.atom {
            if atom >= self.lattice.nx * self.lattice.ny {
                problems.push(format!("`heating.atom` = {atom} is outside the array"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                problems.push("`sweep.values` is empty".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems.join("; ")))
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<Override, CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("malformed key `{key}`")));
    }
    let (last, path) = parts.split_last().expect("split of a non-empty key");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    let previous = cur.get(*last).cloned();
    // Keep integer-typed keys integral and float-typed keys floating.
    let value = match (&previous, value) {
        (Some(toml::Value::Integer(_)), toml::Value::Float(f)) if f.fract() == 0.0 => toml::Value::Integer(f as i64),
        (Some(toml::Value::Float(_)) | None, toml::Value::Integer(i)) if !is_integer_key(key) => {
            toml::Value::Float(i as f64)
        }
        (None, toml::Value::Float(f)) if is_integer_key(key) && f.fract() == 0.0 => toml::Value::Integer(f as i64),
        (_, v) => v,
    };
    let shown = value.to_string();
    cur.insert(last.to_string(), value);
    Ok(Override {
        key: key.to_string(),
        file_value: previous.map(|v| v.to_string()),
        value: shown,
    })
}

fn is_integer_key(key: &str) -> bool {
    matches!(
        key,
        "lattice.nx"
            | "lattice.ny"
            | "modes.grid"
            | "modes.shell"
            | "modes.max_shell"
            | "dynamics.n_traj"
            | "dynamics.seed"
            | "dynamics.outputs"
            | "heating.atom"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[lattice]
a = 0.5
nx = 4
ny = 4

[trap]
depth_Er = 200.0
length_lambda = 0.682

[drive]
detuning_gamma = 0.0
relative_to_cooperative = true
rabi_gamma = 0.25
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.units.hbar_gamma_over_er, 810.0);
        assert_eq!(c.modes.shell, 60);
        assert_eq!(c.dynamics.n_traj, 10_000);
        assert_eq!(c.lattice.polarization, Polarization::CircularXy);
        assert!(c.drive.waist_lambda.is_none());
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("rabi_gamma", "rabbi_gamma");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("rabbi_gamma"), "{err}");
        let text = format!("{MINIMAL}\n[modes]\nshel = 3\n");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("shel"), "{err}");
    }

    #[test]
    fn non_numeric_value_rejected() {
        let text = MINIMAL.replace("a = 0.5", "a = \"half\"");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn negative_spacing_rejected() {
        let text = MINIMAL.replace("a = 0.5", "a = -0.5");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("lattice.a"));
    }

    #[test]
    fn override_wins_and_is_recorded() {
        let loaded =
            RunConfig::parse_with_overrides(MINIMAL, &["lattice.a=0.8".into(), "dynamics.seed=9".into()]).unwrap();
        assert_eq!(loaded.config.lattice.a, 0.8);
        assert_eq!(loaded.config.dynamics.seed, 9);
        assert_eq!(loaded.overrides[0].file_value.as_deref(), Some("0.5"));
        assert_eq!(loaded.overrides[0].value, "0.8");
        assert_eq!(loaded.overrides[1].file_value, None);
    }

    #[test]
    fn integer_override_of_float_key() {
        let loaded = RunConfig::parse_with_overrides(MINIMAL, &["lattice.a=1".into(), "drive.waist_lambda=3".into()])
            .unwrap();
        assert_eq!(loaded.config.lattice.a, 1.0);
        assert_eq!(loaded.config.drive.waist_lambda, Some(3.0));
    }

    #[test]
    fn bad_override_is_config_error() {
        assert!(RunConfig::parse_with_overrides(MINIMAL, &["lattice.a".into()]).is_err());
        assert!(RunConfig::parse_with_overrides(MINIMAL, &["lattice.q=1".into()]).is_err());
        assert!(RunConfig::parse_with_overrides(MINIMAL, &["lattice.a.b=1".into()]).is_err());
    }

    #[test]
    fn sweep_value_keeps_integer_keys_integral() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.with_value("lattice.nx", 6.0).unwrap().lattice.nx, 6);
        assert_eq!(c.with_value("lattice.a", 0.7).unwrap().lattice.a, 0.7);
        assert!(c.with_value("lattice.nx", 6.5).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_config() -> impl Strategy<Value = RunConfig> {
            (
                (0.05f64..2.0, 1usize..30, 1usize..30, prop::bool::ANY),
                (1.0f64..5000.0, 0.05f64..2.0),
                (-5.0f64..5.0, prop::bool::ANY, 0.0f64..2.0, prop::option::of(0.1f64..100.0)),
                (prop::option::of(0.0f64..2.0), -3.0f64..3.0),
                (2usize..100_000, any::<u64>(), prop::option::of(0.01f64..10.0), 1usize..500),
                prop::option::of(prop::collection::vec(0.1f64..1.0, 1..5)),
            )
                .prop_map(|(l, t, d, b, dy, sweep)| RunConfig {
                    units: UnitsSection::default(),
                    lattice: LatticeSection {
                        a: l.0,
                        nx: l.1,
                        ny: l.2,
                        polarization: if l.3 { Polarization::CircularXy } else { Polarization::LinearX },
                    },
                    trap: TrapSection {
                        depth_er: t.0,
                        length_lambda: t.1,
                    },
                    drive: DriveSection {
                        detuning_gamma: d.0,
                        relative_to_cooperative: d.1,
                        rabi_gamma: d.2,
                        waist_lambda: d.3,
                        backward_ratio: b.0,
                        backward_phase_rad: b.1,
                    },
                    lattice_sum: LatticeSumSection::default(),
                    modes: ModesSection::default(),
                    dynamics: DynamicsSection {
                        n_traj: dy.0,
                        seed: dy.1 >> 1,
                        dt_gamma_inv: dy.2,
                        t_final_gamma_inv: None,
                        outputs: dy.3,
                        basis: BasisKey::Site,
                    },
                    heating: HeatingSection::default(),
                    sweep: sweep.map(|values| SweepSection {
                        parameter: "lattice.a".into(),
                        values,
                        command: SweepCommand::Response,
                    }),
                })
        }

        proptest! {
            #[test]
            fn toml_round_trip(c in arb_config()) {
                let text = c.to_toml();
                let back = RunConfig::from_toml(&text).unwrap();
                prop_assert_eq!(back, c);
            }
        }
    }
}
