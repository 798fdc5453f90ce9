//! Run configuration: a flat TOML key-value file whose keys double as
//! command-line flags (`rho_grid` <-> `--rho-grid`). Flags override the
//! file. Each command resolves the merged configuration into a typed job and
//! validates it completely before touching any output.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use selcert::ensemble::synthetic::BlobSpec;
use selcert::ensemble::{BaseLearnerSpec, DEFAULT_EXPAND_SIZE};
use selcert::oracle::GridCaps;
use selcert::{ClassId, Exec, PoisoningModel, SelectionScheme};

use crate::error::{CliError, CliResult};

pub const CONFIG_ENV: &str = "SELCERT_CONFIG";
pub const DEFAULT_ALPHA: f64 = 0.001;
pub const DEFAULT_TRIALS: u64 = 1000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// without-replacement | with-replacement | binomial
    #[arg(long)]
    pub scheme: Option<String>,
    /// Subset size (bagging), or expected size for binomial when `p` is unset.
    #[arg(long)]
    pub n_s: Option<u64>,
    /// Binomial inclusion probability.
    #[arg(long)]
    pub p: Option<f64>,
    /// p1 .. p6
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub rho_grid: Option<Vec<i64>>,
    #[arg(long)]
    pub rho_cap: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// logistic | centroid
    #[arg(long)]
    pub learner: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub expand_size: Option<usize>,
    /// case1 | case2 | case3
    #[arg(long)]
    pub case: Option<String>,
    /// Case 2: number of training samples drawn as known clean.
    #[arg(long)]
    pub n_clean: Option<usize>,
    /// Case 3: classes whose samples are all known clean.
    #[arg(long, value_delimiter = ',')]
    pub clean_classes: Option<Vec<ClassId>>,
    /// Case 3: optional explicit complement of `clean_classes`.
    #[arg(long, value_delimiter = ',')]
    pub poisoned_classes: Option<Vec<ClassId>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// csv | idx
    #[arg(long)]
    pub format: Option<String>,
    /// Training CSV, or IDX image file.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// IDX label file for `train`.
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// IDX digits to keep, relabelled by position.
    #[arg(long, value_delimiter = ',')]
    pub idx_classes: Option<Vec<u8>>,
    #[arg(long)]
    pub num_classes: Option<u32>,
    #[arg(long)]
    pub votes: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Machine-readable summary path (oracle-check).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Number of classes to generate.
    #[arg(long)]
    pub classes: Option<u32>,
    /// Number of samples (generate) or dataset size (radius).
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub max_n: Option<u64>,
    #[arg(long)]
    pub max_rho: Option<u64>,
    #[arg(long)]
    pub max_ns: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub perturb_pi: Option<bool>,
    /// Disable data parallelism.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub sequential: Option<bool>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn required<'a, T>(value: &'a Option<T>, key: &str) -> CliResult<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| bad(format!("missing required key `{key}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    /// `self` with every key set in `top` replaced.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(self, top;
            scheme, n_s, p, model, rho_grid, rho_cap, alpha, trials, learner, epochs,
            learning_rate, l2, expand_size, case, n_clean, clean_classes, poisoned_classes,
            seed, format, train, train_labels, test, test_labels, idx_classes, num_classes,
            votes, output, summary, classes, n, dim, separation, margin, max_n, max_rho,
            max_ns, perturb_pi, sequential,
        );
        self
    }

    pub fn exec(&self) -> Exec {
        if self.sequential.unwrap_or(false) {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn alpha(&self) -> CliResult<f64> {
        let alpha = self.alpha.unwrap_or(DEFAULT_ALPHA);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(bad(format!("alpha {alpha} must lie in (0, 1)")));
        }
        Ok(alpha)
    }

    pub fn trials(&self) -> CliResult<usize> {
        match self.trials.unwrap_or(DEFAULT_TRIALS) {
            0 => Err(bad("trials must be at least 1")),
            t => Ok(t as usize),
        }
    }

    pub fn model(&self) -> CliResult<PoisoningModel> {
        required(&self.model, "model")?
            .parse()
            .map_err(|e: selcert::Error| bad(e.to_string()))
    }

    pub fn scheme(&self) -> CliResult<SchemeSpec> {
        let spec = match required(&self.scheme, "scheme")?.as_str() {
            "without-replacement" | "wor" => {
                SchemeSpec::Fixed(SelectionScheme::WithoutReplacement {
                    n_s: *required(&self.n_s, "n_s")?,
                })
            }
            "with-replacement" | "wr" => SchemeSpec::Fixed(SelectionScheme::WithReplacement {
                n_s: *required(&self.n_s, "n_s")?,
            }),
            "binomial" => match (self.p, self.n_s) {
                (Some(p), _) => SchemeSpec::Fixed(SelectionScheme::Binomial { p }),
                (None, Some(n_s)) => SchemeSpec::BinomialExpected(n_s),
                (None, None) => return Err(bad("binomial scheme needs `p` or `n_s`")),
            },
            other => return Err(bad(format!("unknown scheme {other:?}"))),
        };
        if let SchemeSpec::Fixed(s) = &spec {
            s.validate().map_err(|e| bad(e.to_string()))?;
        }
        if matches!(spec, SchemeSpec::BinomialExpected(0)) {
            return Err(bad("binomial expected size n_s must be positive"));
        }
        Ok(spec)
    }

    pub fn learner(&self) -> CliResult<BaseLearnerSpec> {
        let spec = match self.learner.as_deref().unwrap_or("logistic") {
            "logistic" | "logistic-regression" => {
                let BaseLearnerSpec::LogisticRegression {
                    epochs,
                    learning_rate,
                    l2,
                } = BaseLearnerSpec::default()
                else {
                    unreachable!("default learner is logistic")
                };
                BaseLearnerSpec::LogisticRegression {
                    epochs: self.epochs.unwrap_or(epochs),
                    learning_rate: self.learning_rate.unwrap_or(learning_rate),
                    l2: self.l2.unwrap_or(l2),
                }
            }
            "centroid" | "nearest-centroid" => BaseLearnerSpec::NearestCentroid,
            other => return Err(bad(format!("unknown learner {other:?}"))),
        };
        spec.validate().map_err(|e| bad(e.to_string()))?;
        Ok(spec)
    }

    pub fn expand_size(&self) -> CliResult<usize> {
        match self.expand_size.unwrap_or(DEFAULT_EXPAND_SIZE) {
            0 => Err(bad("expand_size must be at least 1")),
            s => Ok(s),
        }
    }

    pub fn rho_grid(&self) -> CliResult<Vec<u64>> {
        let grid = required(&self.rho_grid, "rho_grid")?;
        if grid.is_empty() {
            return Err(bad("rho_grid is empty"));
        }
        grid.iter()
            .map(|&r| u64::try_from(r).map_err(|_| bad(format!("rho_grid value {r} is negative"))))
            .collect()
    }

    pub fn rho_cap(&self) -> u64 {
        self.rho_cap.unwrap_or(u64::MAX)
    }

    pub fn case(&self) -> CliResult<CaseSpec> {
        match self.case.as_deref().unwrap_or("case1") {
            "case1" | "1" => Ok(CaseSpec::Case1),
            "case2" | "2" => match *required(&self.n_clean, "n_clean")? {
                0 => Err(bad("case2 needs n_clean >= 1")),
                k => Ok(CaseSpec::Case2 { n_clean: k }),
            },
            "case3" | "3" => {
                let clean = required(&self.clean_classes, "clean_classes")?.clone();
                if let Some(poisoned) = &self.poisoned_classes {
                    if let Some(c) = poisoned.iter().find(|c| clean.contains(c)) {
                        return Err(bad(format!(
                            "class {c} is listed as both clean and poisoned"
                        )));
                    }
                }
                Ok(CaseSpec::Case3 {
                    clean_classes: clean,
                    poisoned_classes: self.poisoned_classes.clone(),
                })
            }
            other => Err(bad(format!("unknown case {other:?}"))),
        }
    }

    pub fn data(&self) -> CliResult<DataSpec> {
        match self.format.as_deref().unwrap_or("csv") {
            "csv" => Ok(DataSpec::Csv {
                train: required(&self.train, "train")?.clone(),
                test: required(&self.test, "test")?.clone(),
            }),
            "idx" => Ok(DataSpec::Idx {
                train: (
                    required(&self.train, "train")?.clone(),
                    required(&self.train_labels, "train_labels")?.clone(),
                ),
                test: (
                    required(&self.test, "test")?.clone(),
                    required(&self.test_labels, "test_labels")?.clone(),
                ),
                keep: self.idx_classes.clone(),
            }),
            other => Err(bad(format!("unknown data format {other:?}"))),
        }
    }

    pub fn blob_spec(&self) -> CliResult<BlobSpec> {
        let spec = BlobSpec {
            classes: self.classes.unwrap_or(2),
            n: self.n.unwrap_or(2000) as usize,
            dim: self.dim.unwrap_or(10),
            separation: self.separation.unwrap_or(6.0),
            seed: self.seed(),
        };
        spec.validate().map_err(|e| bad(e.to_string()))?;
        Ok(spec)
    }

    pub fn grid_caps(&self) -> CliResult<GridCaps> {
        let d = GridCaps::default();
        let caps = GridCaps {
            min_n: d.min_n,
            max_n: self.max_n.unwrap_or(d.max_n),
            max_rho: self.max_rho.unwrap_or(d.max_rho),
            max_ns: self.max_ns.unwrap_or(d.max_ns),
        };
        caps.validate().map_err(|e| bad(e.to_string()))?;
        Ok(caps)
    }
}

/// A scheme whose binomial probability may depend on the dataset size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeSpec {
    Fixed(SelectionScheme),
    /// Binomial with `p = n_s / n`.
    BinomialExpected(u64),
}

impl SchemeSpec {
    pub fn resolve(self, n: u64) -> CliResult<SelectionScheme> {
        let scheme = match self {
            SchemeSpec::Fixed(s) => s,
            SchemeSpec::BinomialExpected(n_s) => {
                SelectionScheme::binomial_for_size(n_s, n).map_err(|e| bad(e.to_string()))?
            }
        };
        if n == 0 || !scheme.can_sample(n) {
            return Err(bad(format!(
                "scheme {scheme} cannot sample from {n} samples"
            )));
        }
        Ok(scheme)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "lowercase")]
pub enum CaseSpec {
    Case1,
    Case2 {
        n_clean: usize,
    },
    Case3 {
        clean_classes: Vec<ClassId>,
        poisoned_classes: Option<Vec<ClassId>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Csv {
        train: PathBuf,
        test: PathBuf,
    },
    Idx {
        train: (PathBuf, PathBuf),
        test: (PathBuf, PathBuf),
        keep: Option<Vec<u8>>,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let file = RunConfig::parse("scheme = \"wr\"\nn_s = 30\nalpha = 0.01\nrho_grid = [0, 5]\n")
            .unwrap();
        let flags = RunConfig {
            alpha: Some(0.05),
            ..Default::default()
        };
        let merged = file.overlay(&flags);
        assert_eq!(merged.alpha().unwrap(), 0.05);
        assert_eq!(merged.rho_grid().unwrap(), vec![0, 5]);
        assert_eq!(
            merged.scheme().unwrap(),
            SchemeSpec::Fixed(SelectionScheme::WithReplacement { n_s: 30 })
        );
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("bogus = 1").is_err());
        let c = RunConfig::parse("rho_grid = [0, -3]").unwrap();
        assert!(c.rho_grid().is_err());
        let c = RunConfig::parse("alpha = 1.5").unwrap();
        assert!(c.alpha().is_err());
        let c =
            RunConfig::parse("case = \"case3\"\nclean_classes = [0, 1]\npoisoned_classes = [1, 2]")
                .unwrap();
        assert!(c.case().is_err());
        let c = RunConfig::parse("scheme = \"binomial\"\np = 1.5").unwrap();
        assert!(c.scheme().is_err());
    }

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.alpha().unwrap(), DEFAULT_ALPHA);
        assert_eq!(c.trials().unwrap(), DEFAULT_TRIALS as usize);
        assert_eq!(c.case().unwrap(), CaseSpec::Case1);
        assert!(c.model().is_err());
    }
}
