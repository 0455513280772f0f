use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{DataSource, ExperimentConfig, GridPoint, SweepParam};
use super::dataset::{load_dataset, Dataset};
use super::split::split;
use super::synthetic::generate_synthetic;
use crate::error::{Error, Result};
use crate::evaluation::io::{format_gmad, format_ranking, format_report, format_scores};
use crate::evaluation::{evaluate, gmad_pairs, spot_failures, srcc, EvalReport};
use crate::fsutil::write_atomic;
use crate::model::save_checkpoint;
use crate::trainer::train;

/// Data shared by every grid point and repeat.
struct ExperimentData {
    labeled: Dataset,
    /// Training pool, labels removed.
    unlabeled: Dataset,
    /// Failure-spotting and gMAD pool, with MOS where known.
    pool: Option<Dataset>,
}

fn load_data(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    match &cfg.data {
        DataSource::Synthetic(spec) => {
            let d = generate_synthetic(spec)?;
            d.write_to(&cfg.output_dir.join("data"))?;
            let pool = (!d.unlabeled.is_empty()).then(|| d.unlabeled_with_mos());
            Ok(ExperimentData {
                labeled: d.labeled,
                unlabeled: d.unlabeled,
                pool,
            })
        }
        DataSource::Files {
            labeled,
            unlabeled,
            unlabeled_blind,
        } => {
            let labeled = load_dataset(labeled)?;
            let (unlabeled, pool) = match unlabeled {
                None => (Dataset { dim: labeled.dim, samples: Vec::new() }, None),
                Some(path) => {
                    let ds = load_dataset(path)?;
                    if ds.samples.iter().any(|s| s.mos.is_some()) && !unlabeled_blind {
                        return Err(Error::Config(format!(
                            "{} carries MOS values; set unlabeled_blind = true to use it as an unlabeled pool",
                            path.display()
                        )));
                    }
                    (ds.label_blind(), Some(ds))
                }
            };
            if !unlabeled.is_empty() && unlabeled.dim != labeled.dim {
                return Err(Error::Config(format!(
                    "labeled data has dimension {}, unlabeled {}",
                    labeled.dim, unlabeled.dim
                )));
            }
            Ok(ExperimentData { labeled, unlabeled, pool })
        }
    }
}

/// Outcome of one repeat at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub dir: PathBuf,
    pub result: std::result::Result<RepeatResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatResult {
    pub report: EvalReport,
    pub best_epoch: usize,
    /// Ensemble SRCC on the `spot_k` maximal-disagreement pool samples and on
    /// `spot_k` uniformly drawn pool samples, when the pool has MOS.
    pub spot_srcc: Option<(f64, f64)>,
    /// Ensemble scores on the pool, kept for gMAD.
    pub pool_scores: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub label: String,
    pub param: Option<SweepParam>,
    pub value: Option<f64>,
    pub repeats: Vec<RepeatOutcome>,
    pub mean_srcc: f64,
    pub mean_plcc: f64,
    pub mean_spot_top: Option<f64>,
    pub mean_spot_random: Option<f64>,
}

impl PointSummary {
    pub fn repeats_ok(&self) -> usize {
        self.repeats.iter().filter(|r| r.result.is_ok()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.repeats_ok() == self.repeats.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub output_dir: PathBuf,
    pub points: Vec<PointSummary>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn subset_srcc(ids: &[&str], scores: &BTreeMap<String, f64>, moss: &BTreeMap<&str, f64>) -> Result<f64> {
    let p: Vec<f64> = ids.iter().map(|id| scores[*id]).collect();
    let m: Vec<f64> = ids.iter().map(|id| moss[id]).collect();
    srcc(&p, &m)
}

fn run_repeat(
    cfg: &ExperimentConfig,
    point: &GridPoint,
    data: &ExperimentData,
    repeat: usize,
    dir: &Path,
) -> Result<RepeatResult> {
    let (tr, val, test) = split(&data.labeled, &cfg.split, repeat)?;
    let mut tc = point.train.clone();
    tc.seed = tc.seed.wrapping_add(repeat as u64);
    let (params, history) = train(&tc, &tr.samples, &data.unlabeled.samples, &val.samples)?;
    save_checkpoint(&params, &dir.join("checkpoint.txt"))?;
    history.save(&dir.join("history.tsv"))?;
    write_atomic(&dir.join("timing.tsv"), history.format_timing().as_bytes())?;

    let test_feats: Vec<&[f64]> = test.samples.iter().map(|s| s.features.as_slice()).collect();
    let preds = params.predict(&test_feats)?;
    write_atomic(
        &dir.join("test_scores.tsv"),
        format_scores(test.samples.iter().map(|s| s.id.as_str()).zip(preds.iter().copied())).as_bytes(),
    )?;
    let moss = test.moss().expect("labeled split");
    let report = evaluate(&preds, &moss)?;
    let mut records = report.to_records();
    records.push(("best_epoch".into(), history.best_epoch.to_string()));

    let mut spot_srcc = None;
    let mut pool_scores = None;
    if let Some(pool) = &data.pool {
        let feats: Vec<&[f64]> = pool.samples.iter().map(|s| s.features.as_slice()).collect();
        let scores: BTreeMap<String, f64> = pool
            .samples
            .iter()
            .map(|s| s.id.clone())
            .zip(params.predict(&feats)?)
            .collect();
        if cfg.analysis.spot_k > 0 {
            let k = cfg.analysis.spot_k.min(pool.len());
            let ranking = spot_failures(&params, &pool.samples, k)?;
            write_atomic(&dir.join("spot.tsv"), format_ranking(&ranking).as_bytes())?;
            let labeled: BTreeMap<&str, f64> =
                pool.samples.iter().filter_map(|s| s.mos.map(|m| (s.id.as_str(), m))).collect();
            if labeled.len() == pool.len() && k >= 3 {
                let top: Vec<&str> = ranking.ids().collect();
                let mut order: Vec<&str> = pool.samples.iter().map(|s| s.id.as_str()).collect();
                let seed = cfg.split.seeds[repeat] ^ 0x5EED;
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let top_srcc = subset_srcc(&top, &scores, &labeled)?;
                let rand_srcc = subset_srcc(&order[..k], &scores, &labeled)?;
                records.push(("spot_srcc_top".into(), top_srcc.to_string()));
                records.push(("spot_srcc_random".into(), rand_srcc.to_string()));
                spot_srcc = Some((top_srcc, rand_srcc));
            }
        }
        if cfg.analysis.gmad_levels > 0 {
            write_atomic(
                &dir.join("pool_scores.tsv"),
                format_scores(scores.iter().map(|(k, v)| (k.as_str(), *v))).as_bytes(),
            )?;
            pool_scores = Some(scores);
        }
    }
    write_atomic(&dir.join("report.tsv"), format_report(&records).as_bytes())?;
    Ok(RepeatResult {
        report,
        best_epoch: history.best_epoch,
        spot_srcc,
        pool_scores,
    })
}

fn format_point(p: &PointSummary) -> String {
    let failed: Vec<String> = p
        .repeats
        .iter()
        .filter(|r| r.result.is_err())
        .map(|r| r.repeat.to_string())
        .collect();
    let records = vec![
        ("label".to_string(), p.label.clone()),
        ("repeats_total".into(), p.repeats.len().to_string()),
        ("repeats_ok".into(), p.repeats_ok().to_string()),
        ("failed_repeats".into(), if failed.is_empty() { "-".into() } else { failed.join(",") }),
        ("mean_srcc".into(), p.mean_srcc.to_string()),
        ("mean_plcc".into(), p.mean_plcc.to_string()),
        ("mean_spot_srcc_top".into(), opt(p.mean_spot_top)),
        ("mean_spot_srcc_random".into(), opt(p.mean_spot_random)),
    ];
    format_report(&records)
}

/// Table with one line per grid point.
pub fn format_summary(s: &ExperimentSummary) -> String {
    let mut out = String::from(
        "#label\tparam\tvalue\trepeats_ok\trepeats_total\tmean_srcc\tmean_plcc\tmean_spot_srcc_top\tmean_spot_srcc_random\n",
    );
    for p in &s.points {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.label,
            p.param.map_or("-", |x| x.as_str()),
            opt(p.value),
            p.repeats_ok(),
            p.repeats.len(),
            p.mean_srcc,
            p.mean_plcc,
            opt(p.mean_spot_top),
            opt(p.mean_spot_random),
        );
    }
    out
}

/// Runs every grid point over every split repeat and writes
///
/// ```text
/// <output>/data/...                      generated data (synthetic source only)
/// <output>/<label>/summary.tsv           mean of the completed repeats
/// <output>/<label>/repeat<r>/            checkpoint.txt history.tsv timing.tsv
///                                        test_scores.tsv report.tsv
///                                        spot.tsv pool_scores.tsv gmad_*.tsv
///                                        error.txt (failed repeats only)
/// <output>/summary.tsv                   one line per grid point
/// ```
///
/// A failing repeat is recorded and skipped. gMAD is played between every
/// grid point and the first one, in both roles, on the analysis pool.
pub fn run_config(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let data = load_data(cfg)?;
    let grid = cfg.grid(data.labeled.dim)?;
    let mut points = Vec::with_capacity(grid.len());
    for point in &grid {
        let pdir = cfg.output_dir.join(&point.label);
        let mut repeats = Vec::new();
        for r in 0..cfg.split.seeds.len() {
            let dir = pdir.join(format!("repeat{r}"));
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let result = run_repeat(cfg, point, &data, r, &dir).map_err(|e| {
                let line = format!("{}\t{}\n", e.kind(), e.to_string().replace('\n', " "));
                let _ = write_atomic(&dir.join("error.txt"), line.as_bytes());
                e.to_string()
            });
            repeats.push(RepeatOutcome { repeat: r, dir, result });
        }
        let ok: Vec<&RepeatResult> = repeats.iter().filter_map(|r| r.result.as_ref().ok()).collect();
        let spots: Vec<(f64, f64)> = ok.iter().filter_map(|r| r.spot_srcc).collect();
        let summary = PointSummary {
            label: point.label.clone(),
            param: point.param,
            value: point.value,
            mean_srcc: mean_of(ok.iter().map(|r| r.report.srcc)),
            mean_plcc: mean_of(ok.iter().map(|r| r.report.plcc)),
            mean_spot_top: (!spots.is_empty()).then(|| mean_of(spots.iter().map(|s| s.0))),
            mean_spot_random: (!spots.is_empty()).then(|| mean_of(spots.iter().map(|s| s.1))),
            repeats,
        };
        write_atomic(&pdir.join("summary.tsv"), format_point(&summary).as_bytes())?;
        points.push(summary);
    }

    if cfg.analysis.gmad_levels > 0 && points.len() > 1 {
        let (reference, rest) = points.split_first().expect("non-empty grid");
        for p in rest {
            for (mine, theirs) in p.repeats.iter().zip(&reference.repeats) {
                let (Ok(a), Ok(b)) = (&mine.result, &theirs.result) else { continue };
                let (Some(sa), Some(sb)) = (&a.pool_scores, &b.pool_scores) else { continue };
                let defend = gmad_pairs(sa, sb, cfg.analysis.gmad_levels)?;
                let attack = gmad_pairs(sb, sa, cfg.analysis.gmad_levels)?;
                let name = &reference.label;
                write_atomic(&mine.dir.join(format!("gmad_defender_vs_{name}.tsv")), format_gmad(&defend).as_bytes())?;
                write_atomic(&mine.dir.join(format!("gmad_attacker_vs_{name}.tsv")), format_gmad(&attack).as_bytes())?;
            }
        }
    }

    let summary = ExperimentSummary {
        output_dir: cfg.output_dir.clone(),
        points,
    };
    write_atomic(&cfg.output_dir.join("summary.tsv"), format_summary(&summary).as_bytes())?;
    Ok(summary)
}

/// Loads the config at `path` and runs it.
pub fn run_experiment(path: &Path) -> Result<ExperimentSummary> {
    run_config(&ExperimentConfig::load(path)?)
}

/// Trains and evaluates a single grid point on a single split repeat,
/// writing the per-repeat artifacts into `dir`. `point` selects a grid point
/// by label; the first point is used when it is `None`.
pub fn run_single(cfg: &ExperimentConfig, point: Option<&str>, repeat: usize, dir: &Path) -> Result<RepeatResult> {
    let data = load_data(cfg)?;
    let grid = cfg.grid(data.labeled.dim)?;
    let chosen = match point {
        None => &grid[0],
        Some(label) => grid.iter().find(|p| p.label == label).ok_or_else(|| {
            let labels: Vec<&str> = grid.iter().map(|p| p.label.as_str()).collect();
            Error::invalid(format!("no grid point `{label}`; available: {}", labels.join(", ")))
        })?,
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    run_repeat(cfg, chosen, &data, repeat, dir)
}
