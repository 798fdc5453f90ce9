//! The votes file: a JSON document holding a header that describes how the
//! ensemble was trained and one vote record per test example.

use std::path::Path;

use serde::{Deserialize, Serialize};

use selcert::{ClassId, SelectionScheme, VoteRecord};

use crate::error::{CliError, CliResult};
use crate::fsio;

pub const FORMAT: &str = "selcert-votes";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VotesHeader {
    /// Number of base classifiers; every record sums to this.
    pub trials: u64,
    pub classes: Vec<ClassId>,
    pub scheme: SelectionScheme,
    /// Size of the potentially poisoned training part.
    pub n: u64,
    /// Size of the known-clean training part.
    pub n_c: u64,
    pub master_seed: u64,
    /// SHA-256 over the training parameters and input data.
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VotesFile {
    pub format: String,
    pub version: u32,
    pub header: VotesHeader,
    pub records: Vec<VoteRecord>,
}

impl VotesFile {
    pub fn new(header: VotesHeader, records: Vec<VoteRecord>) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            header,
            records,
        }
    }

    pub fn validate(&self) -> selcert::Result<()> {
        use selcert::Error;
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported votes format {}/{}",
                self.format, self.version
            )));
        }
        self.header.scheme.validate()?;
        for r in &self.records {
            if r.trials != self.header.trials {
                return Err(Error::MalformedVote {
                    id: r.example_id.clone(),
                    reason: format!(
                        "trials {} differ from header {}",
                        r.trials, self.header.trials
                    ),
                });
            }
            r.validate(Some(&self.header.classes))?;
            let total: u64 = r.counts.values().sum();
            if total != self.header.trials {
                return Err(Error::MalformedVote {
                    id: r.example_id.clone(),
                    reason: format!("{total} votes, header declares {}", self.header.trials),
                });
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = fsio::read(path)?;
        let file: Self =
            serde_json::from_slice(&bytes).map_err(|e| CliError::format(path, e.to_string()))?;
        file.validate()
            .map_err(|e| CliError::format(path, e.to_string()))?;
        Ok(file)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("votes serialise");
        bytes.push(b'\n');
        bytes
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        fsio::write_atomic(path, &self.to_bytes())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn sample() -> VotesFile {
        VotesFile::new(
            VotesHeader {
                trials: 3,
                classes: vec![0, 1],
                scheme: SelectionScheme::WithReplacement { n_s: 2 },
                n: 10,
                n_c: 0,
                master_seed: 1,
                config_digest: "00".into(),
            },
            vec![VoteRecord::new("a", BTreeMap::from([(0, 2), (1, 1)]), 3).with_label(0)],
        )
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.json");
        sample().save(&path).unwrap();
        assert_eq!(VotesFile::load(&path).unwrap(), sample());
    }

    #[test]
    fn rejects_bad_sums_and_classes() {
        let mut f = sample();
        f.records[0].counts.insert(1, 2);
        assert!(f.validate().is_err());
        let mut f = sample();
        f.records[0].counts = BTreeMap::from([(0, 2), (5, 1)]);
        assert!(f.validate().is_err());
        let mut f = sample();
        f.records[0].counts.insert(1, 0);
        f.records[0].counts.insert(0, 1);
        assert!(f.validate().is_err());
        let mut f = sample();
        f.records[0].trials = 4;
        assert!(f.validate().is_err());
    }
}
