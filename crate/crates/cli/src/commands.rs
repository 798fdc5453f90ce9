use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use selcert::ensemble::synthetic::gaussian_blobs;
use selcert::ensemble::{
    predict_votes, train_ensemble_case12, train_ensemble_case3, BaseLearnerSpec, Dataset,
    PriorKnowledge, TrainConfig, Voter,
};
use selcert::oracle::run_grid;
use selcert::rng::derive_seed;
use selcert::{
    accuracy_curve, certified_radius, certify_batch, CertifyParams, ClassId, Exec, Radius,
    SelectionScheme, VoteRecord,
};

use crate::config::{CaseSpec, DataSpec, RunConfig, SchemeSpec};
use crate::data::{self, RawTable};
use crate::error::{CliError, CliResult};
use crate::fsio;
use crate::votes::{VotesFile, VotesHeader};

/// Seed stream for drawing the case-2 clean subset; member streams use
/// small indices and the second phase uses `u64::MAX`.
const CLEAN_STREAM: u64 = u64::MAX - 1;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn output_path(cfg: &RunConfig) -> CliResult<Option<PathBuf>> {
    if let Some(p) = &cfg.output {
        fsio::check_output_dir(p)?;
    }
    Ok(cfg.output.clone())
}

fn write_or_print(path: Option<&Path>, bytes: &[u8], out: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => fsio::write_atomic(p, bytes),
        None => out
            .write_all(bytes)
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> CliResult<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::io("<stdout>", e))
}

pub fn generate(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let spec = cfg.blob_spec()?;
    let path = output_path(cfg)?.ok_or_else(|| bad("missing required key `output`"))?;
    let data = gaussian_blobs(&spec, "r")?;
    data::write_csv(&path, &data)?;
    say(
        out,
        format!(
            "wrote {} samples ({} classes, dim {}) to {}",
            spec.n,
            spec.classes,
            spec.dim,
            path.display()
        ),
    )
}

struct Inputs {
    train: Dataset,
    test: Dataset,
    digests: Vec<String>,
}

fn load_inputs(spec: &DataSpec, num_classes: Option<u32>) -> CliResult<Inputs> {
    let (train, test, files, keep_len): (RawTable, RawTable, Vec<&PathBuf>, Option<usize>) =
        match spec {
            DataSpec::Csv { train, test } => (
                data::read_csv(train)?,
                data::read_csv(test)?,
                vec![train, test],
                None,
            ),
            DataSpec::Idx { train, test, keep } => (
                data::read_idx(&train.0, &train.1, keep.as_deref())?,
                data::read_idx(&test.0, &test.1, keep.as_deref())?,
                vec![&train.0, &train.1, &test.0, &test.1],
                keep.as_ref().map(Vec::len),
            ),
        };
    if train.dim != test.dim {
        return Err(bad(format!(
            "train has {} features, test has {}",
            train.dim, test.dim
        )));
    }
    let k = match (num_classes, keep_len) {
        (Some(k), _) => k,
        (None, Some(k)) => k as u32,
        (None, None) => 1 + train.max_label().max(test.max_label()).unwrap_or(0),
    };
    let digests = files
        .into_iter()
        .map(|p| fsio::read(p).map(|b| fsio::sha256_hex(&b)))
        .collect::<CliResult<_>>()?;
    Ok(Inputs {
        train: train.into_dataset(k, "train")?,
        test: test.into_dataset(k, "test")?,
        digests,
    })
}

fn split(train: &Dataset, case: &CaseSpec, seed: u64) -> CliResult<(Dataset, Dataset)> {
    let knowledge = match case {
        CaseSpec::Case1 => PriorKnowledge::Case1,
        CaseSpec::Case2 { n_clean } => {
            if *n_clean >= train.len() {
                return Err(bad(format!(
                    "n_clean {n_clean} leaves no potentially poisoned samples out of {}",
                    train.len()
                )));
            }
            let clean = SelectionScheme::WithoutReplacement {
                n_s: *n_clean as u64,
            }
            .sample_indices(train.len(), derive_seed(seed, CLEAN_STREAM))?;
            PriorKnowledge::Case2 { clean }
        }
        CaseSpec::Case3 {
            clean_classes,
            poisoned_classes,
        } => {
            if let Some(poisoned) = poisoned_classes {
                let mut all: Vec<ClassId> = clean_classes.iter().chain(poisoned).copied().collect();
                all.sort_unstable();
                if all != (0..train.num_classes()).collect::<Vec<_>>() {
                    return Err(bad(
                        "clean_classes and poisoned_classes must partition the class set",
                    ));
                }
            }
            PriorKnowledge::Case3 {
                clean_classes: clean_classes.clone(),
            }
        }
    };
    Ok(knowledge.split(train)?)
}

/// A fully validated training run.
pub struct TrainJob {
    pub config: TrainConfig,
    pub scheme_spec: SchemeSpec,
    /// The whole training set before the prior-knowledge split.
    pub train: Dataset,
    pub case: CaseSpec,
    pub poisoned: Dataset,
    pub clean: Dataset,
    pub test: Dataset,
    pub digest: String,
}

#[derive(Serialize)]
struct DigestInput<'a> {
    scheme: &'a SelectionScheme,
    trials: usize,
    learner: &'a BaseLearnerSpec,
    expand_size: usize,
    case: &'a CaseSpec,
    seed: u64,
    num_classes: u32,
    inputs: &'a [String],
}

pub fn prepare_train(cfg: &RunConfig) -> CliResult<TrainJob> {
    let scheme_spec = cfg.scheme()?;
    let trials = cfg.trials()?;
    let learner = cfg.learner()?;
    let expand_size = cfg.expand_size()?;
    let case = cfg.case()?;
    let seed = cfg.seed();
    let inputs = load_inputs(&cfg.data()?, cfg.num_classes)?;
    let (poisoned, clean) = split(&inputs.train, &case, seed)?;
    let scheme = scheme_spec.resolve(poisoned.len() as u64)?;
    let mut config = TrainConfig::new(scheme, trials, learner, seed);
    config.expand_size = expand_size;
    config.exec = cfg.exec();
    config.validate(poisoned.len())?;
    let digest = fsio::sha256_hex(
        &serde_json::to_vec(&DigestInput {
            scheme: &scheme,
            trials,
            learner: &learner,
            expand_size,
            case: &case,
            seed,
            num_classes: inputs.train.num_classes(),
            inputs: &inputs.digests,
        })
        .expect("digest input serialises"),
    );
    Ok(TrainJob {
        config,
        scheme_spec,
        train: inputs.train,
        case,
        poisoned,
        clean,
        test: inputs.test,
        digest,
    })
}

impl TrainJob {
    fn header(&self) -> VotesHeader {
        VotesHeader {
            trials: self.config.trials as u64,
            classes: (0..self.test.num_classes()).collect(),
            scheme: self.config.scheme,
            n: self.poisoned.len() as u64,
            n_c: self.clean.len() as u64,
            master_seed: self.config.master_seed,
            config_digest: self.digest.clone(),
        }
    }

    fn clean_classes(&self) -> Option<&[ClassId]> {
        match &self.case {
            CaseSpec::Case3 { clean_classes, .. } => Some(clean_classes),
            _ => None,
        }
    }

    /// Votes of the ensemble the prior-knowledge case calls for.
    pub fn run(&self) -> CliResult<VotesFile> {
        let records = match self.clean_classes() {
            Some(clean_classes) => {
                let e =
                    train_ensemble_case3(&self.poisoned, &self.clean, clean_classes, &self.config)?;
                predict_votes(&e, &self.test, self.config.exec)?
            }
            None => self.flat_votes()?,
        };
        Ok(VotesFile::new(self.header(), records))
    }

    fn flat_votes(&self) -> CliResult<Vec<VoteRecord>> {
        let e = train_ensemble_case12(&self.poisoned, &self.clean, &self.config)?;
        Ok(predict_votes(&e, &self.test, self.config.exec)?)
    }

    /// Training without prior knowledge: every training sample is treated as
    /// potentially poisoned. Returns the scheme used and the votes.
    fn unaware_votes(&self) -> CliResult<(SelectionScheme, Vec<VoteRecord>)> {
        let scheme = self.scheme_spec.resolve(self.train.len() as u64)?;
        let config = TrainConfig {
            scheme,
            ..self.config
        };
        config.validate(self.train.len())?;
        let e = train_ensemble_case12(&self.train, &self.train.select(&[]), &config)?;
        Ok((scheme, predict_votes(&e, &self.test, config.exec)?))
    }
}

pub fn train(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let job = prepare_train(cfg)?;
    let path = output_path(cfg)?.ok_or_else(|| bad("missing required key `output`"))?;
    let votes = job.run()?;
    votes.save(&path)?;
    say(
        out,
        format!(
            "wrote {} vote records (T={}, n={}, n_c={}) to {}",
            votes.records.len(),
            votes.header.trials,
            votes.header.n,
            votes.header.n_c,
            path.display()
        ),
    )
}

fn load_votes(cfg: &RunConfig) -> CliResult<VotesFile> {
    let path = cfg
        .votes
        .as_ref()
        .ok_or_else(|| bad("missing required key `votes`"))?;
    VotesFile::load(path)
}

fn certify_params(cfg: &RunConfig, header: &VotesHeader) -> CliResult<CertifyParams> {
    let params = CertifyParams {
        alpha: cfg.alpha()?,
        scheme: header.scheme,
        model: cfg.model()?,
        n: header.n,
        rho_cap: cfg.rho_cap(),
    };
    params.validate()?;
    Ok(params)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn certify(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    cfg.model()?;
    cfg.alpha()?;
    let path = output_path(cfg)?;
    let votes = load_votes(cfg)?;
    let params = certify_params(cfg, &votes.header)?;
    let certs = certify_batch(&votes.records, &params, cfg.exec())?;
    let rows = votes.records.iter().zip(&certs).map(|(v, c)| {
        vec![
            v.example_id.clone(),
            c.label
                .map_or_else(|| "ABSTAIN".to_string(), |l| l.to_string()),
            c.radius.to_string(),
            c.p1_lower.to_string(),
            c.p2_upper.to_string(),
            c.is_abstain().to_string(),
        ]
    });
    let bytes = csv_bytes(
        &[
            "example_id",
            "label",
            "radius",
            "p1_lower",
            "p2_upper",
            "abstain",
        ],
        rows,
    );
    write_or_print(path.as_deref(), &bytes, out)
}

pub fn curve(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let grid = cfg.rho_grid()?;
    cfg.model()?;
    cfg.alpha()?;
    let path = output_path(cfg)?;
    let votes = load_votes(cfg)?;
    let params = certify_params(cfg, &votes.header)?;
    let points = accuracy_curve(&votes.records, &grid, &params, cfg.exec())?;
    let bytes = csv_bytes(
        &["rho", "certified_accuracy"],
        points
            .iter()
            .map(|(r, a)| vec![r.to_string(), a.to_string()]),
    );
    write_or_print(path.as_deref(), &bytes, out)
}

pub fn radius(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    say(out, radius_value(cfg)?.to_string())
}

pub fn oracle_check(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let caps = cfg.grid_caps()?;
    if let Some(p) = &cfg.summary {
        fsio::check_output_dir(p)?;
    }
    let perturb = cfg.perturb_pi.unwrap_or(false);
    let report = run_grid(&caps, perturb, cfg.exec())?;
    say(
        out,
        format!(
            "oracle grid: {} instances, n {}..={}, rho <= {}, n_s <= {}{}",
            report.instances,
            caps.min_n,
            caps.max_n,
            caps.max_rho,
            caps.max_ns,
            if perturb { " (pi perturbed)" } else { "" }
        ),
    )?;
    say(
        out,
        format!(
            "delta: max |closed - exact| = {:e}, {} failures (tolerance {:e})",
            report.max_abs_error, report.delta_failures, report.tolerance
        ),
    )?;
    say(out, format!("pi bounds: {} failures", report.pi_failures))?;
    say(
        out,
        format!("tightness: {} failures", report.tightness_failures),
    )?;
    for e in report
        .entries
        .iter()
        .filter(|e| !(e.delta_ok && e.pi_ok && e.tight_ok))
    {
        say(out, format!("FAIL {}: {}", e.instance, e.notes.join("; ")))?;
    }
    say(out, if report.passed() { "PASS" } else { "FAIL" })?;
    if let Some(p) = &cfg.summary {
        let mut bytes = serde_json::to_vec_pretty(&report).expect("report serialises");
        bytes.push(b'\n');
        fsio::write_atomic(p, &bytes)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "{} delta, {} pi, {} tightness failures",
            report.delta_failures, report.pi_failures, report.tightness_failures
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparePoint {
    pub rho: u64,
    pub flat: f64,
    pub two_phase: f64,
}

/// 2-phase training versus flat training that ignores the clean-class
/// knowledge (every training sample potentially poisoned), at the same
/// scheme parameters, `T`, learner, seed, `alpha` and model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub model: String,
    pub alpha: f64,
    pub trials: u64,
    pub two_phase_scheme: SelectionScheme,
    /// Size of the poisonable part for the 2-phase ensemble.
    pub two_phase_n: u64,
    pub n_c: u64,
    pub flat_scheme: SelectionScheme,
    /// Size of the poisonable part for the flat ensemble (the whole set).
    pub flat_n: u64,
    pub clean_classes: Vec<ClassId>,
    pub phase_two_clean_accuracy: f64,
    pub flat_accuracy: f64,
    pub two_phase_accuracy: f64,
    pub points: Vec<ComparePoint>,
    pub two_phase_at_least_flat: usize,
}

fn majority_accuracy(votes: &[VoteRecord]) -> f64 {
    let hits = votes
        .iter()
        .filter(|v| v.majority() == v.true_label)
        .count();
    hits as f64 / votes.len().max(1) as f64
}

pub fn compare_case3(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let grid = cfg.rho_grid()?;
    let model = cfg.model()?;
    let alpha = cfg.alpha()?;
    let path = output_path(cfg)?;
    let job = prepare_train(cfg)?;
    let Some(clean_classes) = job.clean_classes().map(<[ClassId]>::to_vec) else {
        return Err(bad("compare-case3 needs case = \"case3\""));
    };
    let header = job.header();
    let params = certify_params(cfg, &header)?;
    let exec: Exec = job.config.exec;

    let two_phase = train_ensemble_case3(&job.poisoned, &job.clean, &clean_classes, &job.config)?;
    let two_phase_votes = predict_votes(&two_phase, &job.test, exec)?;
    let (flat_scheme, flat_votes) = job.unaware_votes()?;
    let flat_params = CertifyParams {
        scheme: flat_scheme,
        n: job.train.len() as u64,
        ..params
    };
    flat_params.validate()?;

    let clean_rows: Vec<usize> = (0..job.test.len())
        .filter(|&i| clean_classes.contains(&job.test.label(i)))
        .collect();
    let phase_two_hits = clean_rows
        .iter()
        .filter(|&&i| {
            two_phase.phase_two(&two_phase.normalize(job.test.row(i))) == job.test.label(i)
        })
        .count();

    let flat_curve = accuracy_curve(&flat_votes, &grid, &flat_params, exec)?;
    let two_curve = accuracy_curve(&two_phase_votes, &grid, &params, exec)?;
    let points: Vec<ComparePoint> = flat_curve
        .iter()
        .zip(&two_curve)
        .map(|(&(rho, flat), &(_, two_phase))| ComparePoint {
            rho,
            flat,
            two_phase,
        })
        .collect();
    let report = CompareReport {
        model: model.to_string(),
        alpha,
        trials: header.trials,
        two_phase_scheme: header.scheme,
        two_phase_n: header.n,
        n_c: header.n_c,
        flat_scheme,
        flat_n: flat_params.n,
        clean_classes,
        phase_two_clean_accuracy: phase_two_hits as f64 / clean_rows.len().max(1) as f64,
        flat_accuracy: majority_accuracy(&flat_votes),
        two_phase_accuracy: majority_accuracy(&two_phase_votes),
        two_phase_at_least_flat: points.iter().filter(|p| p.two_phase >= p.flat).count(),
        points,
    };

    say(
        out,
        format!(
            "phase-two accuracy on clean classes: {:.4}",
            report.phase_two_clean_accuracy
        ),
    )?;
    say(out, "rho\tflat\ttwo_phase")?;
    for p in &report.points {
        say(out, format!("{}\t{:.4}\t{:.4}", p.rho, p.flat, p.two_phase))?;
    }
    say(
        out,
        format!(
            "two-phase >= flat at {}/{} grid points",
            report.two_phase_at_least_flat,
            report.points.len()
        ),
    )?;
    if let Some(p) = path {
        let mut bytes = serde_json::to_vec_pretty(&report).expect("report serialises");
        bytes.push(b'\n');
        fsio::write_atomic(&p, &bytes)?;
    }
    Ok(())
}

pub fn radius_value(cfg: &RunConfig) -> CliResult<Radius> {
    let n = cfg.n.ok_or_else(|| bad("missing required key `n`"))?;
    let scheme = cfg.scheme()?.resolve(n)?;
    let margin = cfg
        .margin
        .ok_or_else(|| bad("missing required key `margin`"))?;
    Ok(certified_radius(
        &scheme,
        cfg.model()?,
        n,
        margin,
        cfg.rho_cap(),
    )?)
}
