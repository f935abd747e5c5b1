use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cpte::classify::{build_feature_table, cross_validate, threshold_sweep, CvReport, FeatureTable, Measure};
use cpte::ingest::{load_manifest, CohortManifest};
use cpte::netmetrics::{binarize, connectivity_density};
use cpte::pipeline::PipelineConfig;
use cpte::seed::derive_seed;
use cpte::stats::{group_summary, Aggregation};
use cpte::synth::{gen_cohort, gen_coupled_channels, CouplingSpec};
use cpte::{BandSpec, Group, SyncMatrix64};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cache::MatrixCache;
use crate::config::{parse_grid, RunConfig};
use crate::{BenchArgs, ClassifyArgs, CpteArgs, DensityArgs, StatsArgs, SweepArgs, SynthArgs};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(path, s)
}

/// CSV preceded by a `# run_config=` comment line carrying the full config.
fn write_csv(path: &Path, cfg: &RunConfig, header: &str, rows: &[String]) -> Result<()> {
    let mut s = format!("# run_config={}\n{header}\n", serde_json::to_string(cfg)?);
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    write(path, s)
}

struct Cohort {
    manifest: CohortManifest,
    pipeline: PipelineConfig,
    cache: MatrixCache,
}

impl Cohort {
    fn open(args: &crate::PipelineArgs, out: &Path) -> Result<Self> {
        let mut manifest = load_manifest(&args.manifest)
            .with_context(|| format!("loading manifest {}", args.manifest.display()))?;
        manifest.entries.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
        let pipeline = args.pipeline();
        pipeline.validate()?;
        let cache = MatrixCache::new(args.cache.clone().unwrap_or_else(|| out.join("cache")));
        Ok(Self {
            manifest,
            pipeline,
            cache,
        })
    }

    /// Bands named in `names` (comma list), or every manifest band when `None`.
    fn bands(&self, names: Option<&str>) -> Result<Vec<BandSpec>> {
        match names {
            None => Ok(self.manifest.bands.clone()),
            Some(list) => list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|name| {
                    self.manifest
                        .band(name)
                        .cloned()
                        .with_context(|| format!("band {name:?} is not defined in the manifest"))
                })
                .collect(),
        }
    }

    /// Matrices of every subject in `band`, sorted by subject then epoch.
    fn matrices(&self, band: &BandSpec) -> Result<Vec<SyncMatrix64>> {
        let per_subject = self
            .manifest
            .entries
            .par_iter()
            .map(|e| {
                self.cache
                    .subject_band(e, band, &self.pipeline)
                    .with_context(|| format!("subject {}, band {}", e.subject_id, band.name))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(per_subject.into_iter().flatten().collect())
    }

    fn config(&self, mut cfg: RunConfig, args: &crate::PipelineArgs, bands: &[BandSpec]) -> RunConfig {
        cfg.manifest = Some(args.manifest.clone());
        cfg.bands = bands.to_vec();
        cfg.pipeline = Some(self.pipeline);
        cfg
    }
}

pub fn synth(args: &SynthArgs) -> Result<Value> {
    let base = CouplingSpec {
        coupling: 0.0,
        n_channels: args.channels,
        n_samples: args.samples,
        sampling_rate_hz: args.fs,
        source_band: args.source_band,
        noise_amplitude: args.amplitude,
        seed: args.common.seed,
    };
    let (manifest, path) = gen_cohort(&args.common.out, args.group_a, args.group_b, &base, args.common.seed)?;
    let cfg = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": "synth",
        "seed": args.common.seed,
        "out": args.common.out,
        "group_a": args.group_a,
        "group_b": args.group_b,
        "base": base,
    });
    write_json(&args.common.out.join("synth_config.json"), &cfg)?;
    println!("{}", path.display());
    Ok(json!({
        "manifest": path,
        "recordings": manifest.entries.len(),
        "group_a": manifest.count(Group::GroupA),
        "group_b": manifest.count(Group::GroupB),
    }))
}

#[derive(Serialize)]
struct MatrixFile<'a> {
    subject_id: &'a str,
    group: Group,
    band: &'a str,
    epoch_index: usize,
    channel_names: &'a [String],
    degenerate: bool,
    raw_min: f64,
    raw_max: f64,
    values: Vec<&'a [f64]>,
}

#[derive(Serialize)]
struct GroupMeanFile<'a> {
    run_config: &'a RunConfig,
    group: Group,
    band: &'a str,
    n_subjects: usize,
    n_epochs: usize,
    channel_names: &'a [String],
    values: Vec<Vec<f64>>,
}

fn rows(m: &SyncMatrix64) -> Vec<&[f64]> {
    m.values.chunks(m.n).collect()
}

pub fn cpte(args: &CpteArgs) -> Result<Value> {
    let out = &args.common.out;
    let cohort = Cohort::open(&args.pipeline, out)?;
    let bands = cohort.bands(args.bands.as_deref())?;
    let cfg = cohort.config(RunConfig::new("cpte", &args.common), &args.pipeline, &bands);
    let root = out.join("matrices");
    create_dir(&root)?;
    write_json(&root.join("run_config.json"), &cfg)?;
    let mut n_files = 0usize;
    for band in &bands {
        let mats = cohort.matrices(band)?;
        let band_dir = root.join(&band.name);
        for m in &mats {
            let dir = band_dir.join(&m.subject_id);
            create_dir(&dir)?;
            let file = MatrixFile {
                subject_id: &m.subject_id,
                group: m.group,
                band: &m.band,
                epoch_index: m.epoch_index,
                channel_names: &m.channel_names,
                degenerate: m.degenerate,
                raw_min: m.raw_min,
                raw_max: m.raw_max,
                values: rows(m),
            };
            write_json(&dir.join(format!("epoch_{:04}.json", m.epoch_index)), &file)?;
            n_files += 1;
        }
        for g in Group::ALL {
            let members: Vec<&SyncMatrix64> = mats.iter().filter(|m| m.group == g).collect();
            let Some(first) = members.first() else { continue };
            let n = first.n;
            let mut sum = vec![0.0; n * n];
            for m in &members {
                for (s, v) in sum.iter_mut().zip(&m.values) {
                    *s += v;
                }
            }
            let count = members.len() as f64;
            let mut subjects: Vec<&str> = members.iter().map(|m| m.subject_id.as_str()).collect();
            subjects.dedup();
            let file = GroupMeanFile {
                run_config: &cfg,
                group: g,
                band: &band.name,
                n_subjects: subjects.len(),
                n_epochs: members.len(),
                channel_names: &first.channel_names,
                values: sum.chunks(n).map(|r| r.iter().map(|v| v / count).collect()).collect(),
            };
            write_json(&band_dir.join(format!("group_mean_{g}.json")), &file)?;
        }
    }
    Ok(json!({ "matrix_files": n_files, "bands": bands.len(), "out": root }))
}

pub fn density(args: &DensityArgs) -> Result<Value> {
    let out = &args.common.out;
    let cohort = Cohort::open(&args.pipeline, out)?;
    let bands = cohort.bands(args.bands.as_deref())?;
    let grid = parse_grid(&args.grid).map_err(anyhow::Error::msg)?;
    let mut cfg = cohort.config(RunConfig::new("density", &args.common), &args.pipeline, &bands);
    cfg.threshold_grid = grid.clone();
    create_dir(out)?;
    let mut lines = Vec::new();
    for band in &bands {
        let mats = cohort.matrices(band)?;
        for g in Group::ALL {
            let members: Vec<&SyncMatrix64> = mats.iter().filter(|m| m.group == g).collect();
            if members.is_empty() {
                continue;
            }
            for &th in &grid {
                let total = members
                    .iter()
                    .map(|m| Ok(connectivity_density::<f64>(&binarize(m, th)?)))
                    .sum::<Result<f64>>()?;
                lines.push(format!("{},{g},{th},{},{}", band.name, total / members.len() as f64, members.len()));
            }
        }
    }
    let path = out.join("density.csv");
    write_csv(&path, &cfg, "band,group,th,mean_nd,n_epochs", &lines)?;
    Ok(json!({ "rows": lines.len(), "out": path }))
}

fn single_band(cohort: &Cohort, name: &str) -> Result<BandSpec> {
    let mut b = cohort.bands(Some(name))?;
    if b.len() != 1 {
        bail!("expected exactly one band, got {name:?}");
    }
    Ok(b.remove(0))
}

pub fn sweep(args: &SweepArgs) -> Result<Value> {
    let out = &args.common.out;
    let cohort = Cohort::open(&args.pipeline, out)?;
    let band = single_band(&cohort, &args.band)?;
    let grid = parse_grid(&args.grid).map_err(anyhow::Error::msg)?;
    let measures = Measure::parse_list(&args.classifier.measures)?;
    let specs = args.classifier.specs();
    let cv = args.classifier.cv(args.common.seed);
    let mut cfg = cohort.config(RunConfig::new("sweep", &args.common), &args.pipeline, std::slice::from_ref(&band));
    cfg.threshold_grid = grid.clone();
    cfg.measures = measures.clone();
    cfg.classifiers = specs.clone();
    cfg.cv = Some(cv.clone());

    let mats = cohort.matrices(&band)?;
    create_dir(out)?;
    let mut results = Vec::new();
    let mut lines = Vec::new();
    for spec in &specs {
        let r = threshold_sweep(&mats, &measures, spec, &grid, &cv)?;
        for p in &r.points {
            lines.push(format!("{},{},{},{},{}", band.name, r.classifier, p.threshold, p.accuracy_mean, p.accuracy_std));
        }
        results.push(r);
    }
    let path = out.join(format!("sweep_{}.json", band.name));
    write_json(&path, &json!({ "run_config": cfg, "results": results }))?;
    write_csv(
        &out.join(format!("sweep_{}.csv", band.name)),
        &cfg,
        "band,classifier,th,accuracy_mean,accuracy_std",
        &lines,
    )?;
    let best: Vec<Value> = results
        .iter()
        .map(|r| json!({ "classifier": r.classifier, "best_threshold": r.best_threshold, "points": r.points.len() }))
        .collect();
    Ok(json!({ "out": path, "best": best }))
}

/// Permutes the group labels across rows; used as a chance-level control.
fn shuffle_labels(table: &mut FeatureTable, seed: u64) {
    let mut labels = table.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5eed]));
    labels.shuffle(&mut rng);
    for (row, g) in table.rows.iter_mut().zip(labels) {
        row.group = g;
    }
}

#[derive(Serialize)]
struct ClassifyFile<'a> {
    run_config: &'a RunConfig,
    report: &'a CvReport,
}

pub fn classify(args: &ClassifyArgs) -> Result<Value> {
    let out = &args.common.out;
    let cohort = Cohort::open(&args.pipeline, out)?;
    let band = single_band(&cohort, &args.band)?;
    let measures = Measure::parse_list(&args.classifier.measures)?;
    let specs = args.classifier.specs();
    let cv = args.classifier.cv(args.common.seed);
    let mut cfg = cohort.config(RunConfig::new("classify", &args.common), &args.pipeline, std::slice::from_ref(&band));
    cfg.threshold = Some(args.th);
    cfg.measures = measures.clone();
    cfg.classifiers = specs.clone();
    cfg.cv = Some(cv.clone());
    cfg.shuffle_labels = args.shuffle_labels;

    let mats = cohort.matrices(&band)?;
    let mut table = build_feature_table(&mats, args.th, &measures)?;
    if args.shuffle_labels {
        shuffle_labels(&mut table, args.common.seed);
    }
    create_dir(out)?;
    let suffix = if args.shuffle_labels { "_shuffled" } else { "" };
    let mut summary = Vec::new();
    let mut lines = Vec::new();
    for spec in &specs {
        let report = cross_validate(&table, spec, &cv)?;
        let name = format!("classify_{}_{}{suffix}.json", report.classifier.to_lowercase(), band.name);
        write_json(&out.join(&name), &ClassifyFile { run_config: &cfg, report: &report })?;
        lines.push(format!(
            "{},{},{},{},{},{},{},{},{},{}",
            band.name,
            report.classifier,
            args.th,
            report.n_features,
            report.accuracy.mean,
            report.accuracy.std,
            report.sensitivity.mean,
            report.sensitivity.std,
            report.specificity.mean,
            report.specificity.std
        ));
        summary.push(json!({
            "classifier": report.classifier,
            "file": name,
            "n_features": report.n_features,
            "accuracy": report.accuracy.mean,
        }));
    }
    write_csv(
        &out.join(format!("classify_{}{suffix}.csv", band.name)),
        &cfg,
        "band,classifier,th,n_features,accuracy_mean,accuracy_std,sensitivity_mean,sensitivity_std,specificity_mean,specificity_std",
        &lines,
    )?;
    Ok(json!({ "reports": summary }))
}

pub fn stats(args: &StatsArgs) -> Result<Value> {
    let out = &args.common.out;
    let cohort = Cohort::open(&args.pipeline, out)?;
    let bands = cohort.bands(args.bands.as_deref())?;
    let measures = Measure::parse_list(&args.measures)?;
    let aggregation = if args.subject_mean {
        Aggregation::SubjectMean
    } else {
        Aggregation::Epoch
    };
    let mut cfg = cohort.config(RunConfig::new("stats", &args.common), &args.pipeline, &bands);
    cfg.threshold = Some(args.th);
    cfg.measures = measures.clone();
    create_dir(out)?;
    let mut lines = Vec::new();
    for band in &bands {
        let table = build_feature_table(&cohort.matrices(band)?, args.th, &measures)?;
        for m in &measures {
            let s = group_summary(&table, &m.to_string(), aggregation)?;
            let t = &s.test;
            lines.push(format!(
                "{m},{},{},{},{},{},{},{},{}",
                band.name, t.median_a, t.median_b, t.t_statistic, t.degrees_of_freedom, t.p_value, t.n_a, t.n_b
            ));
        }
    }
    let path = out.join("stats.csv");
    write_csv(
        &path,
        &cfg,
        "measure,band,median_group_a,median_group_b,t,df,p_value,n_group_a,n_group_b",
        &lines,
    )?;
    Ok(json!({ "rows": lines.len(), "out": path }))
}

#[derive(Serialize)]
pub struct BenchReport {
    pub channels: usize,
    pub samples: usize,
    pub pairs: usize,
    pub repetitions: usize,
    pub threads: usize,
    pub median_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

/// Times one full pairwise CPTE matrix on a seeded synthetic epoch.
pub fn bench_matrix(channels: usize, samples: usize, reps: usize, seed: u64, threads: usize) -> Result<BenchReport> {
    let spec = CouplingSpec {
        coupling: 0.3,
        n_channels: channels,
        n_samples: samples,
        seed,
        ..CouplingSpec::default()
    };
    let data = gen_coupled_channels(&spec)?;
    let cfg = cpte::cpte::PartitionConfig::default();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let mut times: Vec<f64> = pool.install(|| {
        cpte::cpte::pairwise_cpte(&data, &cfg)?;
        (0..reps.max(1))
            .map(|_| {
                let t = Instant::now();
                cpte::cpte::pairwise_cpte(&data, &cfg)?;
                Ok(t.elapsed().as_secs_f64() * 1e3)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    times.sort_by(f64::total_cmp);
    Ok(BenchReport {
        channels,
        samples,
        pairs: channels * (channels - 1) / 2,
        repetitions: times.len(),
        threads,
        median_ms: times[times.len() / 2],
        min_ms: times[0],
        max_ms: times[times.len() - 1],
    })
}

pub fn bench(args: &BenchArgs) -> Result<Value> {
    let report = bench_matrix(args.channels, args.samples, args.reps, args.common.seed, args.threads)?;
    create_dir(&args.common.out)?;
    let cfg = RunConfig::new("bench", &args.common);
    write_json(&args.common.out.join("bench.json"), &json!({ "run_config": cfg, "report": report }))?;
    let mut line = String::new();
    write!(
        line,
        "{} pairs x {} samples: median {:.2} ms per matrix ({} threads, {} reps)",
        report.pairs, report.samples, report.median_ms, report.threads, report.repetitions
    )?;
    println!("{line}");
    Ok(serde_json::to_value(report)?)
}

