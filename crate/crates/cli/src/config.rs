//! TOML run configuration. Every key is optional; command-line flags take
//! precedence over the file, and the file over built-in defaults.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use warmtrend_core::simulation::{Table1Config, Table2Config};
use warmtrend_core::PipelineConfig;

/// Shown after `--help`; lists every key accepted in the `--config` file.
pub const CONFIG_HELP: &str = "\
CONFIG FILE (--config, TOML; unknown keys are rejected)

  seed = 0                        master seed, overridden by --seed
  threads = 1                     worker threads (>= 1), overridden by --threads

  [pipeline]                      used by `analyze` and `cluster`
  span = 0.3                      seasonal smoother window as a fraction of the year, in (0, 1]
  k_max = 30                      number of sliding start years (>= 1)
  k_compare = [20, 30]            two start-year offsets compared for acceleration
  replicates = 100                bootstrap replicates per compared offset (>= 1)
  selection_replicates = 200      inner replicates of the AR(1) weight selection (>= 2)
  missing_threshold = 0.2         cells with a larger missing fraction are excluded, in [0, 1]
  first_year = 1950               first analysed year (default: first full year of each cell)
  last_year = 2015                last analysed year (default: last full year of each cell)
  cluster_k_min = 1               smallest number of mixture components (>= 1)
  cluster_k_max = 20              largest number of mixture components (>= cluster_k_min)
  families = [\"EII\", \"VII\", \"EEE\", \"VEV\", \"VVV\"]
                                  covariance families tried by the BIC search

  [table1]                        used by `simulate-table1`
  n = 23360                       series length in days (>= 100)
  r = 0.812                       AR(1) coefficient of the errors, |r| < 1
  trend = 8.6e-5                  trend per day
  innovation_sd = 1.874           sd of the AR(1) innovations (> 0)
  outer = 500                     simulated series (>= 2)
  inner = 500                     bootstrap replicates per series and method (>= 2)
  selection_replicates = 200      inner replicates of the AR(1) weight selection (>= 2)

  [table2]                        used by `simulate-table2`
  year_counts = [10, 30, 60]      series lengths in years of 365 days
  trend = 1e-4                    trend per day
  r = 0.9                         AR(1) coefficient of the errors, |r| < 1
  innovation_sd = 0.43589         sd of the AR(1) innovations, default sqrt(0.19)
  outer = 100                     simulated series per year count (>= 1)
  inner = 500                     bootstrap replicates per series (>= 2)
  selection_replicates = 200      inner replicates of the AR(1) weight selection (>= 2)

  [bootstrap]                     used by `bootstrap`
  method = \"dep_wild_ar1\"         efron | wild | wild_normal | dep_wild_ar1 | dep_wild_kernel | moving_block
  replicates = 500                bootstrap replicates (>= 1)
  weight_r = 0.9                  fixed AR(1) weight coefficient in (0, 1) (default: selected from the data)
  selection_replicates = 200      inner replicates of the AR(1) weight selection (>= 2)
  bandwidth = 25                  Bartlett kernel bandwidth for dep_wild_kernel (>= 1)
  block_length = 40               block length for moving_block (default: Politis-White rule)
";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub pipeline: PipelineSection,
    pub table1: Table1Section,
    pub table2: Table2Section,
    pub bootstrap: BootstrapSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub span: Option<f64>,
    pub k_max: Option<usize>,
    pub k_compare: Option<Vec<usize>>,
    pub replicates: Option<usize>,
    pub selection_replicates: Option<usize>,
    pub missing_threshold: Option<f64>,
    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
    pub cluster_k_min: Option<usize>,
    pub cluster_k_max: Option<usize>,
    pub families: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Section {
    pub n: Option<usize>,
    pub r: Option<f64>,
    pub trend: Option<f64>,
    pub innovation_sd: Option<f64>,
    pub outer: Option<usize>,
    pub inner: Option<usize>,
    pub selection_replicates: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table2Section {
    pub year_counts: Option<Vec<usize>>,
    pub trend: Option<f64>,
    pub r: Option<f64>,
    pub innovation_sd: Option<f64>,
    pub outer: Option<usize>,
    pub inner: Option<usize>,
    pub selection_replicates: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub method: Option<String>,
    pub replicates: Option<usize>,
    pub weight_r: Option<f64>,
    pub selection_replicates: Option<usize>,
    pub bandwidth: Option<usize>,
    pub block_length: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if config.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        Ok(config)
    }

    /// A configuration with every key set; used to check the help text.
    #[cfg(test)]
    pub fn example() -> Self {
        Self {
            seed: Some(0),
            threads: Some(1),
            pipeline: PipelineSection {
                span: Some(0.3),
                k_max: Some(30),
                k_compare: Some(vec![20, 30]),
                replicates: Some(100),
                selection_replicates: Some(200),
                missing_threshold: Some(0.2),
                first_year: Some(1950),
                last_year: Some(2015),
                cluster_k_min: Some(1),
                cluster_k_max: Some(20),
                families: Some(vec!["EII".into()]),
            },
            table1: Table1Section {
                n: Some(23360),
                r: Some(0.812),
                trend: Some(8.6e-5),
                innovation_sd: Some(1.874),
                outer: Some(500),
                inner: Some(500),
                selection_replicates: Some(200),
            },
            table2: Table2Section {
                year_counts: Some(vec![10, 30, 60]),
                trend: Some(1e-4),
                r: Some(0.9),
                innovation_sd: Some(0.19f64.sqrt()),
                outer: Some(100),
                inner: Some(500),
                selection_replicates: Some(200),
            },
            bootstrap: BootstrapSection {
                method: Some("dep_wild_ar1".into()),
                replicates: Some(500),
                weight_r: Some(0.9),
                selection_replicates: Some(200),
                bandwidth: Some(25),
                block_length: Some(40),
            },
        }
    }
}

impl PipelineSection {
    pub fn resolve(&self, seed: u64) -> PipelineConfig {
        let d = PipelineConfig::default();
        PipelineConfig {
            span: self.span.unwrap_or(d.span),
            k_max: self.k_max.unwrap_or(d.k_max),
            k_compare: self.k_compare.clone().unwrap_or(d.k_compare),
            replicates: self.replicates.unwrap_or(d.replicates),
            selection_replicates: self.selection_replicates.unwrap_or(d.selection_replicates),
            missing_threshold: self.missing_threshold.unwrap_or(d.missing_threshold),
            seed,
            first_year: self.first_year.or(d.first_year),
            last_year: self.last_year.or(d.last_year),
            cluster_k_min: self.cluster_k_min.unwrap_or(d.cluster_k_min),
            cluster_k_max: self.cluster_k_max.unwrap_or(d.cluster_k_max),
            families: self.families.clone().unwrap_or(d.families),
        }
    }
}

impl Table1Section {
    pub fn resolve(&self, seed: u64) -> Table1Config {
        let d = Table1Config::default();
        Table1Config {
            n: self.n.unwrap_or(d.n),
            r: self.r.unwrap_or(d.r),
            trend: self.trend.unwrap_or(d.trend),
            innovation_sd: self.innovation_sd.unwrap_or(d.innovation_sd),
            outer: self.outer.unwrap_or(d.outer),
            inner: self.inner.unwrap_or(d.inner),
            selection_replicates: self.selection_replicates.unwrap_or(d.selection_replicates),
            seed,
        }
    }
}

impl Table2Section {
    pub fn resolve(&self, seed: u64) -> Table2Config {
        let d = Table2Config::default();
        Table2Config {
            year_counts: self.year_counts.clone().unwrap_or(d.year_counts),
            trend: self.trend.unwrap_or(d.trend),
            r: self.r.unwrap_or(d.r),
            innovation_sd: self.innovation_sd.unwrap_or(d.innovation_sd),
            outer: self.outer.unwrap_or(d.outer),
            inner: self.inner.unwrap_or(d.inner),
            selection_replicates: self.selection_replicates.unwrap_or(d.selection_replicates),
            seed,
        }
    }
}

/// Dotted names of every key set in `config`, e.g. `table1.outer`.
#[cfg(test)]
pub fn key_names(config: &RunConfig) -> Vec<String> {
    fn walk(prefix: &str, value: &toml::Value, out: &mut Vec<String>) {
        if let toml::Value::Table(table) = value {
            for (k, v) in table {
                let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                if v.is_table() {
                    walk(&name, v, out);
                } else {
                    out.push(name);
                }
            }
        }
    }
    let mut out = Vec::new();
    walk("", &toml::Value::try_from(config).expect("config serializes"), &mut out);
    out
}
