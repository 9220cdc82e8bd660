//! Sweep configuration documents and input-law descriptions.

use std::path::{Path, PathBuf};

use macex_core::code::LawFile;
use macex_core::{InputLaw, SolverSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Input law as written in a config file or a `--law` JSON file.
///
/// Either `uniform = true` (with `u_size`, default 1) or the three factors
/// `p_u`, `x_given_u`, `y_given_u`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_u: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_given_u: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_given_u: Option<Vec<Vec<f64>>>,
}

impl LawSpec {
    pub fn uniform(u_size: usize) -> Self {
        LawSpec {
            uniform: Some(true),
            u_size: Some(u_size),
            ..LawSpec::default()
        }
    }

    pub fn build(&self, x_size: usize, y_size: usize) -> Result<InputLaw, CliError> {
        match (&self.p_u, &self.x_given_u, &self.y_given_u) {
            (Some(pu), Some(xu), Some(yu)) => {
                if self.uniform == Some(true) {
                    return Err(CliError::Validation("input_law: give either uniform or p_u/x_given_u/y_given_u".into()));
                }
                if xu.iter().any(|r| r.len() != x_size) || yu.iter().any(|r| r.len() != y_size) {
                    return Err(CliError::Validation(format!(
                        "input_law: conditional rows must have {x_size} (X) and {y_size} (Y) entries"
                    )));
                }
                Ok(InputLaw::from_conditionals(pu, xu, yu)?)
            }
            (None, None, None) if self.uniform != Some(false) => Ok(InputLaw::uniform(self.u_size.unwrap_or(1), x_size, y_size)?),
            _ => Err(CliError::Validation(
                "input_law: give either uniform = true or all of p_u, x_given_u, y_given_u".into(),
            )),
        }
    }

    /// Reads a JSON law: either this format or the joint `{u_size, x_size, y_size, probs}` form.
    pub fn load_json(path: &Path, x_size: usize, y_size: usize) -> Result<InputLaw, CliError> {
        let text = read(path)?;
        if let Ok(spec) = serde_json::from_str::<LawSpec>(&text) {
            return spec.build(x_size, y_size);
        }
        let file: LawFile = serde_json::from_str(&text).map_err(|e| {
            CliError::Validation(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
        })?;
        let law = file.into_law()?;
        if law.x_size() != x_size || law.y_size() != y_size {
            return Err(CliError::Validation(format!("{}: alphabet sizes do not match", path.display())));
        }
        Ok(law)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateGrid {
    pub r_x: Vec<f64>,
    pub r_y: Vec<f64>,
}

/// Declarative description of an exponent sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Channel JSON file, relative to the config file.
    pub channel: PathBuf,
    #[serde(default)]
    pub input_law: LawSpec,
    pub rates: RateGrid,
    pub solver: SolverSpec,
    #[serde(default)]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl SweepConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| CliError::Validation(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut cfg = SweepConfig::parse(&read(path)?, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.channel.is_relative() {
            cfg.channel = base.join(&cfg.channel);
        }
        if let Some(out) = &cfg.output {
            if out.is_relative() {
                cfg.output = Some(base.join(out));
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.rates.r_x.is_empty() || self.rates.r_y.is_empty() {
            return Err(CliError::Validation("rates: grid must be nonempty".into()));
        }
        if self.rates.r_x.iter().chain(&self.rates.r_y).any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(CliError::Validation("rates: every rate must be finite and nonnegative".into()));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(CliError::Validation("delta must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = SweepConfig::parse(
            "channel = \"w.json\"\n[rates]\nr_x = [0.1]\nr_y = [0.2, 0.3]\n[solver]\nlattice_denominator = 4\n",
            "t",
        )
        .unwrap();
        assert_eq!(cfg.input_law, LawSpec::default());
        assert_eq!(cfg.solver.lattice_denominator, 4);
        assert_eq!(cfg.delta, 0.0);
    }

    #[test]
    fn bad_configs() {
        let base = "channel = \"w.json\"\n[solver]\nlattice_denominator = 4\n";
        assert!(SweepConfig::parse(&format!("{base}[rates]\nr_x = []\nr_y = [0.1]\n"), "t").is_err());
        assert!(SweepConfig::parse(&format!("{base}[rates]\nr_x = [-0.1]\nr_y = [0.1]\n"), "t").is_err());
        assert!(SweepConfig::parse(&format!("{base}[rates]\nr_x = [0.1]\nr_y = [0.1]\nbogus = 1\n"), "t").is_err());
    }

    #[test]
    fn laws() {
        assert_eq!(LawSpec::uniform(2).build(2, 2).unwrap().u_size(), 2);
        let spec = LawSpec {
            p_u: Some(vec![1.0]),
            x_given_u: Some(vec![vec![0.25, 0.75]]),
            y_given_u: Some(vec![vec![0.5, 0.5]]),
            ..LawSpec::default()
        };
        let law = spec.build(2, 2).unwrap();
        assert_eq!(law.p_ux(0, 1), 0.75);
        assert!(spec.build(3, 2).is_err());
    }
}
