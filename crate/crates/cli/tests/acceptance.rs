//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use selcert::combinatorics::{cp_lower, cp_upper};
use selcert::ensemble::synthetic::{gaussian_blobs, BlobSpec};
use selcert::ensemble::{
    predict_votes, train_ensemble_case12, BaseLearnerSpec, Dataset, TrainConfig,
};
use selcert::oracle::{run_grid, GridCaps};
use selcert::rng::{derive_seed, rng_from_seed};
use selcert::{
    certify_batch, certify_prediction, delta, CertifyParams, Exec, PoisoningModel, Radius,
    SelectionScheme, VoteRecord,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn schemes_for(n: u64, n_s: u64) -> [SelectionScheme; 3] {
    [
        SelectionScheme::WithoutReplacement { n_s },
        SelectionScheme::WithReplacement { n_s },
        SelectionScheme::binomial_for_size(n_s, n).unwrap(),
    ]
}

fn grid_report() -> (selcert::oracle::GridReport, Duration) {
    let start = Instant::now();
    let report = run_grid(&GridCaps::default(), false, Exec::default()).unwrap();
    (report, start.elapsed())
}

fn oracle_equivalence() -> Outcome {
    let (r, took) = grid_report();
    let expected = 5 * (3 * 2 + 2) * 6 * 3;
    check(
        r.instances == expected && r.delta_failures == 0 && took < Duration::from_secs(120),
        format!(
            "{} instances, {} mismatches, max |closed - exact| = {:e}, {:.1?}",
            r.instances, r.delta_failures, r.max_abs_error, took
        ),
    )
}

fn pi_and_tightness() -> Outcome {
    let (r, took) = grid_report();
    check(
        r.pi_failures == 0 && r.tightness_failures == 0 && took < Duration::from_secs(300),
        format!(
            "{} instances, {} pi failures, {} tightness failures, {:.1?}",
            r.instances, r.pi_failures, r.tightness_failures, took
        ),
    )
}

fn monotonicity() -> Outcome {
    use PoisoningModel::*;
    let start = Instant::now();
    let mut problems = Vec::new();
    let mut curves = 0;
    for (n, n_s) in [(1000u64, 10u64), (13007, 10), (50000, 1000)] {
        for scheme in schemes_for(n, n_s) {
            let table: BTreeMap<PoisoningModel, Vec<f64>> = PoisoningModel::ALL
                .iter()
                .map(|&m| {
                    (
                        m,
                        (0..=500)
                            .map(|rho| delta(&scheme, m, n, rho).unwrap())
                            .collect(),
                    )
                })
                .collect();
            for (m, d) in &table {
                curves += 1;
                if d[0] != 0.0 {
                    problems.push(format!("{scheme} {m} n={n}: delta(0) = {}", d[0]));
                }
                if let Some(rho) = (1..d.len()).find(|&r| d[r] < d[r - 1]) {
                    problems.push(format!("{scheme} {m} n={n}: decreases at rho={rho}"));
                }
            }
            for (lo, hi) in [
                (Insert, InsertModify),
                (InsertModify, InsertDeleteModify),
                (Delete, DeleteModify),
                (DeleteModify, InsertDeleteModify),
                (Modify, InsertModify),
                (Modify, DeleteModify),
            ] {
                if let Some(rho) = (0..=500).find(|&r| table[&lo][r] > table[&hi][r]) {
                    problems.push(format!("{scheme} n={n}: {lo} > {hi} at rho={rho}"));
                }
            }
        }
    }
    let took = start.elapsed();
    check(
        problems.is_empty() && took < Duration::from_secs(60),
        format!(
            "{curves} curves over rho 0..=500, {} violations{}, {took:.1?}",
            problems.len(),
            problems
                .first()
                .map_or(String::new(), |p| format!(" (first: {p})"))
        ),
    )
}

fn ideal_zero_point(scheme: SelectionScheme) -> u64 {
    let vote = VoteRecord::new("ideal", BTreeMap::from([(0, 1000)]), 1000);
    let params = CertifyParams {
        alpha: 0.001,
        scheme,
        model: PoisoningModel::InsertDeleteModify,
        n: 13007,
        rho_cap: u64::MAX,
    };
    match certify_prediction(&vote, &params).unwrap().radius {
        Radius::Certified(r) => r,
        Radius::Abstain => 0,
    }
}

fn zero_points() -> Outcome {
    let start = Instant::now();
    let [wor, wr, bin] = schemes_for(13007, 10).map(ideal_zero_point);
    let took = start.elapsed();
    let near = |got: u64, want: u64| got.abs_diff(want) <= 20;
    check(
        wor <= wr
            && wr < bin
            && near(wor, 855)
            && near(wr, 857)
            && near(bin, 868)
            && took < Duration::from_secs(10),
        format!("without {wor}, with {wr}, binomial {bin} (reference 855 / 857 / 868), {took:.1?}"),
    )
}

fn delta_ordering() -> Outcome {
    let start = Instant::now();
    let [wor, wr, bin] = schemes_for(13007, 10)
        .map(|s| delta(&s, PoisoningModel::InsertDeleteModify, 13007, 500).unwrap());
    let took = start.elapsed();
    check(
        bin < wr && wr < wor && took < Duration::from_secs(1),
        format!("binomial {bin:.6} < with {wr:.6} < without {wor:.6}, {took:.1?}"),
    )
}

fn clopper_pearson() -> Outcome {
    use rand::Rng;
    let start = Instant::now();
    let alpha: f64 = 0.001;
    let a = alpha / 2.0;
    let mut worst_closed: f64 = 0.0;
    for trials in [1u64, 10, 100, 1000, 10000] {
        let want = a.powf(1.0 / trials as f64);
        worst_closed = worst_closed
            .max((cp_lower(trials, trials, a).unwrap() - want).abs())
            .max((cp_upper(0, trials, a).unwrap() - (1.0 - want)).abs());
    }
    let trials = 100u64;
    let bounds: Vec<(f64, f64)> = (0..=trials)
        .map(|k| {
            (
                cp_lower(k, trials, a).unwrap(),
                cp_upper(k, trials, a).unwrap(),
            )
        })
        .collect();
    let mut rng = rng_from_seed(6);
    let mut worst_cover: f64 = 1.0;
    for p in [0.1, 0.5, 0.9] {
        let (mut lo_ok, mut hi_ok) = (0u32, 0u32);
        for _ in 0..10_000 {
            let k = (0..trials).filter(|_| rng.random::<f64>() < p).count();
            lo_ok += (bounds[k].0 <= p) as u32;
            hi_ok += (bounds[k].1 >= p) as u32;
        }
        worst_cover = worst_cover.min(lo_ok.min(hi_ok) as f64 / 10_000.0);
    }
    let took = start.elapsed();
    check(
        worst_closed <= 1e-9 && worst_cover >= 1.0 - a - 0.01 && took < Duration::from_secs(60),
        format!("closed-form error {worst_closed:e}, worst one-sided coverage {worst_cover:.4}, {took:.1?}"),
    )
}

fn selcert(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_selcert"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "selcert {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    selcert(
        d,
        &[
            "generate",
            "--classes",
            "2",
            "--n",
            "2000",
            "--dim",
            "10",
            "--separation",
            "6",
            "--seed",
            "1",
            "--output",
            "train.csv",
        ],
    )?;
    selcert(
        d,
        &[
            "generate",
            "--classes",
            "2",
            "--n",
            "500",
            "--dim",
            "10",
            "--separation",
            "6",
            "--seed",
            "2",
            "--output",
            "test.csv",
        ],
    )?;
    let train = |out: &str| {
        selcert(
            d,
            &[
                "train",
                "--train",
                "train.csv",
                "--test",
                "test.csv",
                "--scheme",
                "with-replacement",
                "--n-s",
                "30",
                "--trials",
                "200",
                "--learner",
                "logistic",
                "--seed",
                "7",
                "--output",
                out,
            ],
        )
    };
    train("a.json")?;
    train("b.json")?;
    let identical = std::fs::read(d.join("a.json")).map_err(|e| e.to_string())?
        == std::fs::read(d.join("b.json")).map_err(|e| e.to_string())?;
    let grid = "0,5,10,15,20,25,30,35,40,45,50,60";
    selcert(
        d,
        &[
            "curve",
            "--votes",
            "a.json",
            "--model",
            "p3",
            "--rho-grid",
            grid,
            "--output",
            "curve.csv",
        ],
    )?;
    let text = std::fs::read_to_string(d.join("curve.csv")).map_err(|e| e.to_string())?;
    let ca: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let nonincreasing = ca.windows(2).all(|w| w[1] <= w[0]);
    let took = start.elapsed();
    check(
        ca[0] >= 0.9 && nonincreasing && identical && took < Duration::from_secs(300),
        format!(
            "CA(0) = {:.3}, CA over grid {grid}: {ca:?}, nonincreasing {nonincreasing}, byte-identical votes {identical}, {took:.1?}",
            ca[0]
        ),
    )
}

fn case3_pipeline() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    selcert(
        d,
        &[
            "generate",
            "--classes",
            "4",
            "--n",
            "2000",
            "--dim",
            "10",
            "--separation",
            "5",
            "--seed",
            "11",
            "--output",
            "train.csv",
        ],
    )?;
    selcert(
        d,
        &[
            "generate",
            "--classes",
            "4",
            "--n",
            "800",
            "--dim",
            "10",
            "--separation",
            "5",
            "--seed",
            "111",
            "--output",
            "test.csv",
        ],
    )?;
    selcert(
        d,
        &[
            "compare-case3",
            "--train",
            "train.csv",
            "--test",
            "test.csv",
            "--case",
            "case3",
            "--clean-classes",
            "0,1",
            "--scheme",
            "with-replacement",
            "--n-s",
            "6",
            "--trials",
            "200",
            "--seed",
            "11",
            "--model",
            "p3",
            "--rho-grid",
            "0,10,20,30,40,50,60,70,80,90,100",
            "--output",
            "report.json",
        ],
    )?;
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let phase_two = report["phase_two_clean_accuracy"].as_f64().unwrap();
    let wins = report["two_phase_at_least_flat"].as_u64().unwrap();
    let points = report["points"].as_array().unwrap().len() as u64;
    let took = start.elapsed();
    check(
        phase_two >= 0.95 && 2 * wins > points && took < Duration::from_secs(300),
        format!("phase-two clean accuracy {phase_two:.4}, two-phase >= flat at {wins}/{points} grid points, {took:.1?}"),
    )
}

fn blobs(n: usize, seed: u64) -> Dataset {
    gaussian_blobs(
        &BlobSpec {
            classes: 2,
            n,
            dim: 10,
            separation: 6.0,
            seed,
        },
        "s",
    )
    .unwrap()
}

fn attack_sanity() -> Outcome {
    let start = Instant::now();
    let train = blobs(2000, 21);
    let test = blobs(300, 22);
    let empty = train.select(&[]);
    let config = TrainConfig::new(
        SelectionScheme::WithReplacement { n_s: 30 },
        200,
        BaseLearnerSpec::default(),
        9,
    );
    let params = CertifyParams {
        alpha: 0.001,
        scheme: config.scheme,
        model: PoisoningModel::Modify,
        n: train.len() as u64,
        rho_cap: u64::MAX,
    };
    let votes = predict_votes(
        &train_ensemble_case12(&train, &empty, &config).unwrap(),
        &test,
        config.exec,
    )
    .unwrap();
    let certs = certify_batch(&votes, &params, config.exec).unwrap();
    let max_radius = certs
        .iter()
        .filter_map(|c| c.radius.value())
        .max()
        .unwrap_or(0);
    if max_radius == 0 {
        return Err("no example certified at a positive radius".into());
    }
    let (mut checked, mut flipped) = (0usize, 0usize);
    for t in 0..20u64 {
        let size = 1 + derive_seed(100, t) % max_radius;
        let victims = SelectionScheme::WithoutReplacement { n_s: size }
            .sample_indices(train.len(), derive_seed(200, t))
            .unwrap();
        let mut poisoned = train.clone();
        for &i in &victims {
            let label = poisoned.label(i);
            poisoned.set_label(i, 1 - label).unwrap();
        }
        let after = predict_votes(
            &train_ensemble_case12(&poisoned, &empty, &config).unwrap(),
            &test,
            config.exec,
        )
        .unwrap();
        for (cert, vote) in certs.iter().zip(&after) {
            if let (Some(label), Radius::Certified(r)) = (cert.label, cert.radius) {
                if r >= size {
                    checked += 1;
                    flipped += (vote.majority() != Some(label)) as usize;
                }
            }
        }
    }
    let took = start.elapsed();
    check(
        flipped == 0 && checked > 0 && took < Duration::from_secs(600),
        format!("20 attacks up to {max_radius} flips, {checked} certified predictions checked, {flipped} changed, {took:.1?}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("pi validity and tightness", pi_and_tightness),
        ("monotonicity and model dominance", monotonicity),
        ("ideal-vote zero points", zero_points),
        ("delta ordering at rho=500", delta_ordering),
        ("Clopper-Pearson bounds", clopper_pearson),
        ("end-to-end desk scale", end_to_end),
        ("2-phase pipeline", case3_pipeline),
        ("label-flip attack sanity", attack_sanity),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("{} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let outcome =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let line = match outcome {
            Ok(detail) => format!("PASS  criterion {label}: {detail}"),
            Err(detail) => {
                failed += 1;
                format!("FAIL  criterion {label}: {detail}")
            }
        };
        writeln!(out, "{line}").unwrap();
        out.flush().unwrap();
    }
    if failed > 0 {
        writeln!(out, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}
