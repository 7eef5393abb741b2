//! Scenario file schema (version 1).

use std::collections::BTreeMap;

use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Default sample grid for paths without their own.
    pub grid: Option<usize>,
    pub crossed_module: String,
    pub base: String,
    pub bundle: Option<BundleSpec>,
    pub connection: Option<ConnectionSpec>,
    pub vb: Option<VbSpec>,
    #[serde(default)]
    pub paths: Vec<LazyPathSpec>,
    pub checks: Vec<CheckSpec>,
    /// Per-suite default tolerances.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BundleSpec {
    Decorate {
        cocycle: String,
        expected_class: Option<String>,
    },
    QuasiDecorate {
        /// A named pseudo-principal preset; excludes the other fields.
        preset: Option<String>,
        cocycle: Option<String>,
        #[serde(rename = "Hu")]
        hu: Option<String>,
        #[serde(rename = "Hm")]
        hm: Option<String>,
        expected_class: Option<String>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    /// `trivial` (any bundle, global trivialization) or `decorated`.
    pub kind: String,
    /// A potential name with an optional strength, e.g. `constant:0.8`.
    #[serde(rename = "A0")]
    pub a0: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VbSpec {
    pub action: String,
    #[serde(rename = "V")]
    pub v: VectorSpaceSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorSpaceSpec {
    #[serde(rename = "V0_dim")]
    pub v0_dim: usize,
    #[serde(rename = "V1_dim")]
    pub v1_dim: usize,
    pub structure: String,
}

/// A lazy path; `arrows` defaults to the units at the path endpoints.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LazyPathSpec {
    pub arrows: Option<Vec<Vec<f64>>>,
    pub paths: Vec<PathSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub grid: Option<usize>,
    pub plateau: Option<usize>,
    pub waypoints: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub suite: String,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, String> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if s.schema != SCHEMA_VERSION {
            return Err(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", s.schema));
        }
        Ok(s)
    }
}
