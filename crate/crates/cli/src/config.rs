//! Experiment configuration: named presets, TOML overlays and environment overrides.
//!
//! Resolution order, later entries winning: preset, `--config` file,
//! `POLYPTYCH__<SECTION>__<KEY>` environment variables, command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use polyptych::baseline::PimConfig;
use polyptych::recon::ReconConfig;
use polyptych::scenario::Scenario;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const ENV_PREFIX: &str = "POLYPTYCH__";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Export PGM images of the estimates.
    pub images: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { images: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub recon: ReconConfig,
    pub pim: PimConfig,
    pub run: RunConfig,
}

pub const PRESETS: &[&str] = &[
    "full-nonblind",
    "full-nonblind-af0",
    "full-nonblind-af01",
    "full-blind",
    "full-blind-pim01",
    "full-split-200x5",
    "full-split-100x10",
    "desk-nonblind",
    "desk-blind",
    "desk-split-20x5",
    "desk-split-10x10",
];

fn nonblind_recon(iterations: usize) -> ReconConfig {
    ReconConfig {
        iterations,
        ..Default::default()
    }
}

fn split(mut cfg: ExperimentConfig, outer: usize, inner: usize) -> ExperimentConfig {
    cfg.recon.iterations = outer;
    cfg.recon.object_steps = inner;
    cfg.recon.window_steps = inner;
    cfg
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let full = Scenario::full();
    let desk = Scenario::desk();
    let pim = |alpha: f64, blind: bool, sweeps: usize| PimConfig {
        alpha,
        blind,
        sweeps,
        ..Default::default()
    };
    let full_blind = ExperimentConfig {
        scenario: full.clone(),
        recon: nonblind_recon(1000),
        pim: pim(1.0, true, 1000),
        run: RunConfig::default(),
    };
    let desk_blind = ExperimentConfig {
        scenario: desk.clone(),
        recon: nonblind_recon(100),
        pim: pim(1.0, true, 100),
        run: RunConfig::default(),
    };
    let cfg = match name {
        "full-nonblind" => ExperimentConfig {
            scenario: full,
            recon: nonblind_recon(1000),
            pim: pim(1.0, false, 1000),
            run: RunConfig::default(),
        },
        "full-nonblind-af0" => {
            let mut c = preset("full-nonblind")?;
            c.recon.alpha_s = 0.0;
            c.recon.line_search = false;
            c
        }
        "full-nonblind-af01" => {
            let mut c = preset("full-nonblind")?;
            c.recon.line_search = false;
            c
        }
        "full-blind" => full_blind,
        "full-blind-pim01" => {
            let mut c = full_blind;
            c.pim.alpha = 0.1;
            c
        }
        "full-split-200x5" => split(full_blind, 200, 5),
        "full-split-100x10" => split(full_blind, 100, 10),
        "desk-nonblind" => ExperimentConfig {
            scenario: desk,
            recon: nonblind_recon(200),
            pim: pim(1.0, false, 200),
            run: RunConfig::default(),
        },
        "desk-blind" => desk_blind,
        "desk-split-20x5" => split(desk_blind, 20, 5),
        "desk-split-10x10" => split(desk_blind, 10, 10),
        other => bail!(
            "unknown preset {other:?}; known presets: {}",
            PRESETS.join(", ")
        ),
    };
    Ok(cfg)
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut Table, top: Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Parses an environment value as a TOML literal, falling back to a plain string.
fn env_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Result<Table> {
    let mut out = Table::new();
    for (key, raw) in vars {
        let Some(path) = key.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let parts: Vec<String> = path.split("__").map(str::to_lowercase).collect();
        if parts.iter().any(String::is_empty) {
            bail!("malformed override variable {key}");
        }
        let mut table = &mut out;
        for part in &parts[..parts.len() - 1] {
            table = table
                .entry(part.clone())
                .or_insert_with(|| Value::Table(Table::new()))
                .as_table_mut()
                .with_context(|| format!("override {key} conflicts with another override"))?;
        }
        table.insert(parts[parts.len() - 1].clone(), env_value(&raw));
    }
    Ok(out)
}

/// Preset, then file, then environment.
pub fn resolve(
    preset_name: Option<&str>,
    file: Option<&Path>,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<ExperimentConfig> {
    let base = match preset_name {
        Some(name) => preset(name)?,
        None => ExperimentConfig {
            scenario: Scenario::desk(),
            ..Default::default()
        },
    };
    let mut table = Table::try_from(&base).context("serializing the base configuration")?;
    if let Some(path) = file {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let overlay: Table =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        merge(&mut table, overlay);
    }
    merge(&mut table, env_overrides(vars)?);
    let cfg: ExperimentConfig = table.try_into().context("invalid configuration")?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.recon.validate()?;
        self.pim.validate()?;
        self.scenario.model().context("invalid scan geometry")?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn every_preset_resolves_and_round_trips() {
        for name in PRESETS {
            let cfg = resolve(Some(name), None, vec![]).unwrap();
            assert_eq!(cfg, preset(name).unwrap(), "{name}");
            let back: ExperimentConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn full_presets_carry_the_reference_parameters() {
        let blind = preset("full-blind").unwrap();
        assert_eq!(
            (
                blind.recon.alpha_t,
                blind.recon.alpha_s,
                blind.recon.beta_t,
                blind.recon.beta_s
            ),
            (1e-2, 0.1, 10.0, 0.0)
        );
        assert_eq!(
            (blind.recon.trials, blind.recon.tau, blind.recon.iterations),
            (1, 0.5, 1000)
        );
        let af0 = preset("full-nonblind-af0").unwrap();
        assert_eq!((af0.recon.alpha_s, af0.recon.line_search), (0.0, false));
        for (name, outer, inner) in [("full-split-200x5", 200, 5), ("full-split-100x10", 100, 10)] {
            let c = preset(name).unwrap();
            assert_eq!(c.recon.iterations * c.recon.object_steps, 1000);
            assert_eq!((c.recon.iterations, c.recon.window_steps), (outer, inner));
        }
    }

    #[test]
    fn environment_overrides_win() {
        let cfg = resolve(
            Some("desk-blind"),
            None,
            vars(&[
                ("POLYPTYCH__RECON__ITERATIONS", "7"),
                ("POLYPTYCH__SCENARIO__LAMBDAS", "[1.0, 2.0]"),
                ("POLYPTYCH__SCENARIO__SPECTRAL_WEIGHTS", "[0.5, 0.5]"),
                ("UNRELATED", "x"),
            ]),
        )
        .unwrap();
        assert_eq!(cfg.recon.iterations, 7);
        assert_eq!(cfg.scenario.lambdas, vec![1.0, 2.0]);
    }

    #[test]
    fn unknown_keys_and_presets_are_rejected() {
        assert!(resolve(Some("nope"), None, vec![]).is_err());
        assert!(resolve(None, None, vars(&[("POLYPTYCH__RECON__ITERATONS", "7")])).is_err());
        assert!(resolve(None, None, vars(&[("POLYPTYCH__RECON__TAU", "2.0")])).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[scenario]\nsides = 3\n").unwrap();
        assert!(resolve(None, Some(&path), vec![]).is_err());
        std::fs::write(&path, "[scenario]\nside = 24\nprobe_side = 8\n").unwrap();
        assert_eq!(
            resolve(None, Some(&path), vec![]).unwrap().scenario.side,
            24
        );
    }
}
