//! JSON model configuration: process parameters, curve and pricing defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::{AffineModel, JumpLaw, JumpOuParams, WishartParams};
use crate::caps::FourierConfig;
use crate::libor::{FitOptions, LiborError, LiborModel, TenorCurve};
use crate::matcore::{MatrixJson, SquareMat, SymMat};
use crate::oracle::{McConfig, Scheme};
use crate::swaptions::MAX_ORDER;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}, at `{path}`: {msg}")]
    Syntax {
        line: usize,
        column: usize,
        path: String,
        msg: String,
    },
    #[error("{}at `{path}`: {msg}", line.map(|l| format!("line {l}, ")).unwrap_or_default())]
    Invalid {
        path: String,
        line: Option<usize>,
        msg: String,
    },
    #[error("curve fit failed: {0}")]
    Fit(#[from] LiborError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Wishart,
    JumpOu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WishartBlock {
    pub sigma0: MatrixJson,
    pub m: MatrixJson,
    pub q: MatrixJson,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLawBlock {
    Wishart { n: f64, q: MatrixJson },
    NoncentralWishart { n: f64, q: MatrixJson, mm: MatrixJson },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpOuBlock {
    pub sigma0: MatrixJson,
    pub m: MatrixJson,
    pub lambda: f64,
    pub law: JumpLawBlock,
}

/// Either `libors` (N forward rates) or `ratios` plus `terminal_bond`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveBlock {
    pub delta_t: f64,
    pub n_tenors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub libors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_bond: Option<f64>,
    /// Negative definite ũ; omitted means the auto-scaled -c·I.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_direction: Option<MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingBlock {
    pub fourier: FourierConfig,
    pub edgeworth_order: usize,
    pub mc: McConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema_version: u32,
    pub process: ProcessKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wishart: Option<WishartBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_ou: Option<JumpOuBlock>,
    pub curve: CurveBlock,
    pub pricing: PricingBlock,
}

impl ModelConfig {
    /// Benchmark Wishart model on a flat 5% curve, ΔT = 1/3, N = 12.
    pub fn benchmark() -> Self {
        let p = WishartParams::benchmark();
        let delta_t = 1.0 / 3.0;
        ModelConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            process: ProcessKind::Wishart,
            wishart: Some(WishartBlock {
                sigma0: p.sigma0().into(),
                m: p.m().into(),
                q: p.q().into(),
                kappa: p.kappa(),
            }),
            jump_ou: None,
            curve: CurveBlock {
                delta_t,
                n_tenors: 12,
                libors: Some(vec![0.05; 12]),
                ratios: None,
                terminal_bond: None,
                base_direction: None,
            },
            pricing: PricingBlock {
                fourier: FourierConfig::default(),
                edgeworth_order: MAX_ORDER,
                mc: McConfig::for_tenor(delta_t, Scheme::ExactSquaredOu, 100_000, 20240601),
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Parses and validates; errors carry the field path and the source line.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ModelConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::Syntax {
                line: inner.line(),
                column: inner.column(),
                path,
                msg: inner.to_string(),
            }
        })?;
        cfg.validate().map_err(|(path, msg)| ConfigError::Invalid {
            line: locate(text, &path),
            path,
            msg,
        })?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    fn validate(&self) -> Result<(), (String, String)> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err((
                "schema_version".into(),
                format!("unsupported version {}, expected {CONFIG_SCHEMA_VERSION}", self.schema_version),
            ));
        }
        match (self.process, &self.wishart, &self.jump_ou) {
            (ProcessKind::Wishart, Some(_), None) | (ProcessKind::JumpOu, None, Some(_)) => {}
            (ProcessKind::Wishart, _, _) => {
                return Err(("process".into(), "process \"wishart\" needs exactly the `wishart` block".into()))
            }
            (ProcessKind::JumpOu, _, _) => {
                return Err(("process".into(), "process \"jump_ou\" needs exactly the `jump_ou` block".into()))
            }
        }
        self.model()?;
        self.tenor_curve()?;
        if let Some(b) = &self.curve.base_direction {
            sym("curve.base_direction", b)?;
        }
        let p = &self.pricing;
        p.fourier
            .validate()
            .map_err(|e| ("pricing.fourier".to_string(), e.to_string()))?;
        if !(1..=MAX_ORDER).contains(&p.edgeworth_order) {
            return Err((
                "pricing.edgeworth_order".into(),
                format!("must lie in 1..={MAX_ORDER}"),
            ));
        }
        p.mc
            .validate(Some(self.curve.delta_t))
            .map_err(|e| ("pricing.mc".to_string(), e.to_string()))?;
        Ok(())
    }

    fn model(&self) -> Result<AffineModel, (String, String)> {
        if let Some(w) = &self.wishart {
            let p = WishartParams::new(
                sym("wishart.sigma0", &w.sigma0)?,
                square("wishart.m", &w.m)?,
                square("wishart.q", &w.q)?,
                w.kappa,
            )
            .map_err(|e| ("wishart".to_string(), e.to_string()))?;
            return Ok(AffineModel::Wishart(p));
        }
        let j = self.jump_ou.as_ref().expect("validated block presence");
        let law = match &j.law {
            JumpLawBlock::Wishart { n, q } => JumpLaw::Wishart {
                n: *n,
                q: sym("jump_ou.law.q", q)?,
            },
            JumpLawBlock::NoncentralWishart { n, q, mm } => JumpLaw::NonCentralWishart {
                n: *n,
                q: sym("jump_ou.law.q", q)?,
                mm: square("jump_ou.law.mm", mm)?,
            },
        };
        let p = JumpOuParams::new(
            sym("jump_ou.sigma0", &j.sigma0)?,
            square("jump_ou.m", &j.m)?,
            j.lambda,
            law,
        )
        .map_err(|e| ("jump_ou".to_string(), e.to_string()))?;
        Ok(AffineModel::JumpOu(p))
    }

    fn tenor_curve(&self) -> Result<TenorCurve, (String, String)> {
        let c = &self.curve;
        let err = |field: &str, e: LiborError| (format!("curve.{field}"), e.to_string());
        match (&c.libors, &c.ratios, c.terminal_bond) {
            (Some(l), None, None) => {
                if l.len() != c.n_tenors {
                    return Err(("curve.libors".into(), format!("expected {} rates, got {}", c.n_tenors, l.len())));
                }
                TenorCurve::from_libors(c.delta_t, l).map_err(|e| err("libors", e))
            }
            (None, Some(r), Some(b)) => {
                if r.len() != c.n_tenors {
                    return Err(("curve.ratios".into(), format!("expected {} ratios, got {}", c.n_tenors, r.len())));
                }
                TenorCurve::from_ratios(c.delta_t, r.clone(), b).map_err(|e| err("ratios", e))
            }
            _ => Err((
                "curve".into(),
                "give either `libors` or `ratios` together with `terminal_bond`".into(),
            )),
        }
    }

    pub fn affine_model(&self) -> AffineModel {
        self.model().expect("validated at load")
    }

    pub fn curve(&self) -> TenorCurve {
        self.tenor_curve().expect("validated at load")
    }

    pub fn base_direction(&self) -> Option<SymMat> {
        self.curve
            .base_direction
            .as_ref()
            .map(|b| SymMat::try_from(b).expect("validated at load"))
    }

    /// Fits the martingale family to the configured curve.
    pub fn fit(&self) -> Result<LiborModel, ConfigError> {
        Ok(LiborModel::fit(
            self.affine_model(),
            self.curve(),
            self.base_direction().as_ref(),
            &FitOptions::default(),
        )?)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.pricing.mc.seed = seed;
        self
    }
}

fn sym(path: &str, m: &MatrixJson) -> Result<SymMat, (String, String)> {
    SymMat::try_from(m).map_err(|e| (path.to_string(), e.to_string()))
}

fn square(path: &str, m: &MatrixJson) -> Result<SquareMat, (String, String)> {
    SquareMat::try_from(m).map_err(|e| (path.to_string(), e.to_string()))
}

/// Line of the last key in a dotted path, found by scanning keys in order.
fn locate(text: &str, path: &str) -> Option<usize> {
    let mut pos = 0;
    for key in path.split('.') {
        let needle = format!("\"{key}\"");
        pos += text[pos..].find(&needle)?;
    }
    Some(text[..pos].matches('\n').count() + 1)
}
