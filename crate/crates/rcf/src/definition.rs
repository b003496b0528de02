//! Metric definition files (JSON or TOML) and fixture resolution.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rcf_core::expr::FieldTable;
use rcf_core::metric::{fixture, MetricData};
use serde::{Deserialize, Serialize};

/// Coefficient fields as expression strings. An empty string marks an
/// absent slot; `a_mixed` may be omitted entirely.
///
/// ```toml
/// name = "tilted"
/// n = 2
/// a = [["1", "0"], ["0", "exp(z1 + conj(z1))"]]
/// b = ["2", "0.5*z2"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDefinition {
    #[serde(default = "default_name")]
    pub name: String,
    pub n: usize,
    pub a: Vec<Vec<String>>,
    #[serde(default)]
    pub a_mixed: Vec<Vec<String>>,
    pub b: Vec<String>,
}

fn default_name() -> String {
    "custom".into()
}

impl MetricDefinition {
    pub fn from_metric(m: &MetricData) -> Self {
        let (a, a_mixed, b) = m.fields.to_strings();
        MetricDefinition {
            name: m.name.clone(),
            n: m.dim(),
            a,
            a_mixed,
            b,
        }
    }

    pub fn to_metric(&self) -> Result<MetricData> {
        let table = FieldTable::from_strings(self.n, &self.a, &self.a_mixed, &self.b)
            .with_context(|| format!("metric definition '{}'", self.name))?;
        Ok(MetricData::new(self.name.clone(), table))
    }

    pub fn parse(text: &str, toml_format: bool) -> Result<Self> {
        if toml_format {
            Ok(toml::from_str(text)?)
        } else {
            Ok(serde_json::from_str(text)?)
        }
    }

    /// Reads `.toml` files as TOML and everything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        Self::parse(&text, is_toml).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricSource {
    Fixture { name: String, b: Option<Vec<f64>> },
    File(std::path::PathBuf),
    Inline(MetricDefinition),
}

impl MetricSource {
    /// `seed` feeds the `random-seeded` fixture.
    pub fn resolve(&self, seed: u64) -> Result<MetricData> {
        match self {
            MetricSource::Fixture { name, b } => {
                if b.is_some() && name != "flat-real" {
                    bail!("--b only applies to the flat-real fixture");
                }
                Ok(fixture(name, seed, b.as_deref())?)
            }
            MetricSource::File(p) => MetricDefinition::load(p)?.to_metric(),
            MetricSource::Inline(d) => d.to_metric(),
        }
    }
}
