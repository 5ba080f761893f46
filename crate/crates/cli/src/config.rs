//! Run configuration: flags override the `--run-config` file, which overrides
//! built-in defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use twosided_core::aggregate::DiagnosticThresholds;
use twosided_core::estimate::{read_phi_from_estimates, DEFAULT_MIN_QUADS};
use twosided_core::ModelParams;

use crate::CliError;

pub const OUT_DIR_ENV: &str = "TWOSIDED_OUT_DIR";

#[derive(Args, Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamArgs {
    /// Elasticity of substitution across suppliers.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Elasticity of demand for the importer's input bundle.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Returns-to-scale parameter of exporter technology.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Importer bargaining weight.
    #[arg(long)]
    pub phi: Option<f64>,
    /// Imported-input share in final production.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Final-goods elasticity of substitution.
    #[arg(long)]
    pub nu: Option<f64>,
}

impl ParamArgs {
    fn or(self, other: ParamArgs) -> ParamArgs {
        ParamArgs {
            rho: self.rho.or(other.rho),
            eta: self.eta.or(other.eta),
            theta: self.theta.or(other.theta),
            phi: self.phi.or(other.phi),
            gamma: self.gamma.or(other.gamma),
            nu: self.nu.or(other.nu),
        }
    }
}

/// Contents of a `--run-config` JSON file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub params: ParamArgs,
    pub phi_from: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub thresholds: Option<DiagnosticThresholds>,
    pub min_quads: Option<usize>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read run config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid run config {}: {e}", path.display())))
    }
}

/// Settings after merging flags, file and defaults.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub params: ModelParams,
    pub phi_source: String,
    pub out_dir: PathBuf,
    pub thresholds: DiagnosticThresholds,
    pub min_quads: usize,
}

pub struct Layers<'a> {
    pub flags: ParamArgs,
    pub phi_from: Option<&'a Path>,
    pub out_dir: Option<&'a Path>,
    pub min_quads: Option<usize>,
    pub file: &'a RunConfigFile,
}

pub fn resolve(layers: Layers<'_>) -> Result<Resolved, CliError> {
    let file = layers.file;
    let merged = layers.flags.or(file.params);
    let base = ModelParams::calibrated();
    let gamma = merged.gamma.unwrap_or(base.gamma());
    let nu = merged.nu.unwrap_or(base.nu());
    let rho = merged.rho.unwrap_or(base.rho());
    let theta = merged.theta.unwrap_or(base.theta());

    // a phi flag beats a phi file from any layer; a phi file flag beats a phi value in the config file
    let (phi, phi_source) = match (layers.flags.phi, layers.phi_from, file.params.phi, &file.phi_from) {
        (Some(phi), _, _, _) => (phi, "flag".to_string()),
        (None, Some(path), _, _) => (read_phi(path)?, path.display().to_string()),
        (None, None, Some(phi), _) => (phi, "run-config".to_string()),
        (None, None, None, Some(path)) => (read_phi(path)?, path.display().to_string()),
        (None, None, None, None) => (base.phi(), "default".to_string()),
    };
    let params = match merged.eta {
        Some(eta) => ModelParams::new(rho, eta, theta, phi, gamma, nu),
        None if merged.gamma.is_some() || merged.nu.is_some() => {
            ModelParams::from_primitives(rho, theta, phi, gamma, nu)
        }
        None => ModelParams::new(rho, base.eta(), theta, phi, gamma, nu),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let out_dir = match layers.out_dir {
        Some(d) => d.to_path_buf(),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => file.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
        },
    };
    Ok(Resolved {
        params,
        phi_source,
        out_dir,
        thresholds: file.thresholds.unwrap_or_default(),
        min_quads: layers.min_quads.or(file.min_quads).unwrap_or(DEFAULT_MIN_QUADS),
    })
}

fn read_phi(path: &Path) -> Result<f64, CliError> {
    let f = std::fs::File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))?;
    Ok(read_phi_from_estimates(f)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layers<'a>(flags: ParamArgs, file: &'a RunConfigFile) -> Layers<'a> {
        Layers {
            flags,
            phi_from: None,
            out_dir: Some(Path::new("out")),
            min_quads: None,
            file,
        }
    }

    #[test]
    fn defaults_are_calibrated() {
        let file = RunConfigFile::default();
        let r = resolve(layers(ParamArgs::default(), &file)).unwrap();
        assert_eq!(r.params, ModelParams::calibrated());
        assert_eq!(r.min_quads, 30);
    }

    #[test]
    fn flags_override_file() {
        let file: RunConfigFile =
            serde_json::from_str(r#"{"params": {"phi": 0.2, "theta": 0.9}, "min_quads": 10}"#).unwrap();
        let flags = ParamArgs {
            phi: Some(0.7),
            ..Default::default()
        };
        let r = resolve(layers(flags, &file)).unwrap();
        assert_eq!(r.params.phi(), 0.7);
        assert_eq!(r.params.theta(), 0.9);
        assert_eq!(r.min_quads, 10);
    }

    #[test]
    fn primitives_derive_eta() {
        let file = RunConfigFile::default();
        let flags = ParamArgs {
            gamma: Some(0.5),
            ..Default::default()
        };
        let r = resolve(layers(flags, &file)).unwrap();
        assert_eq!(r.params.eta(), 1.0 - 0.5 + 2.5 * 0.5);
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let file = RunConfigFile::default();
        let flags = ParamArgs {
            theta: Some(1.5),
            ..Default::default()
        };
        assert!(matches!(resolve(layers(flags, &file)), Err(CliError::Usage(_))));
        assert!(serde_json::from_str::<RunConfigFile>(r#"{"bogus": 1}"#).is_err());
    }
}
