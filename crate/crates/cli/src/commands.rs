use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use lowlight::dataset::prd::{self, Dtype, PrdWriter};
use lowlight::dataset::{generate_dataset, images_from_prd, Dataset, GenerateOptions, Role};
use lowlight::metrics::mean_std;
use lowlight::{pcc, recover_scale, Error, GsOptions, GsStatus, MetricsRecord, RealImage, Retriever, RunConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{self, Summary};
use crate::MethodArg;

pub const RECON_FORMAT: &str = "lowlight-reconstruction/1";
pub const RECON_FILE: &str = "reconstruction.toml";
pub const PHASE_FILE: &str = "phase.prd";
pub const RESIDUAL_FILE: &str = "residuals.tsv";

/// Metadata of a reconstruction directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconMeta {
    pub format: String,
    /// Name of the dataset the inputs came from.
    pub dataset: String,
    pub dataset_path: PathBuf,
    pub noise_level: u8,
    pub method: String,
    pub split: String,
    pub first_id: u64,
    pub count: usize,
    pub phase_file: String,
    pub phase_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<GsOptions>,
    #[serde(default)]
    pub example: Vec<ExampleLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleLog {
    pub id: u64,
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub status: GsStatus,
}

fn pool(threads: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .context("building thread pool")
}

fn fresh_dir(dir: &Path, force: bool) -> lowlight::Result<()> {
    if dir.exists() {
        if !force {
            return Err(Error::AlreadyExists(dir.to_owned()));
        }
        fs::remove_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

fn io(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> lowlight::Result<()> {
    fs::write(path, text).map_err(|e| io(path, e))
}

pub fn dataset(config: &Path, out: Option<&Path>, threads: Option<usize>, force: bool) -> anyhow::Result<Vec<Dataset>> {
    let cfg = RunConfig::load(config)?;
    let root = out.map_or_else(|| cfg.dataset.output_dir.clone(), Path::to_owned);
    let opts = GenerateOptions { threads, force };
    let mut written = Vec::new();
    for recipe in cfg.recipes()? {
        let ds = generate_dataset(&recipe, &root, &opts)?;
        print_summary(&ds);
        written.push(ds);
    }
    Ok(written)
}

fn print_summary(ds: &Dataset) {
    let m = ds.manifest();
    println!("{} (noise level {}) -> {}", m.recipe.name, m.recipe.noise_level, ds.root().display());
    for split in m.split.iter().filter(|s| s.count > 0) {
        println!("  {:<10} {:>6} examples", split.name, split.count);
        for rec in m.array.iter().filter(|a| a.split == split.name) {
            println!("    {:<28} {}", rec.file, rec.sha256);
        }
    }
    let total: usize = m.split.iter().map(|s| s.count).sum();
    println!("  {total} examples written");
    if m.diagnostics.saturated_pixels > 0 {
        println!(
            "  saturated pixels: {} (max fraction {:.3e})",
            m.diagnostics.saturated_pixels, m.diagnostics.max_saturated_fraction
        );
    }
}

pub struct ReconstructJob<'a> {
    pub dataset: &'a Path,
    pub method: MethodArg,
    pub split: &'a str,
    pub out: &'a Path,
    pub opts: GsOptions,
    pub threads: Option<usize>,
    pub force: bool,
}

struct Reconstructed {
    phase: RealImage,
    residuals: Vec<f64>,
    status: GsStatus,
}

pub fn reconstruct(job: &ReconstructJob) -> anyhow::Result<()> {
    let ds = Dataset::open(job.dataset)?;
    let split = ds.split(job.split)?.clone();
    let raw_rec = ds.record(job.split, Role::Raw)?;
    let raw_path = ds.root().join(&raw_rec.file);
    let actual = prd::file_checksum(&raw_path)?;
    if actual != raw_rec.sha256 {
        return Err(Error::Checksum {
            path: raw_path,
            expected: raw_rec.sha256.clone(),
            actual,
        }
        .into());
    }
    let m = ds.manifest();
    let retriever = Retriever::new(&m.recipe.geometry)?;
    let opts = GsOptions {
        offset: m.normalization.offset,
        ..job.opts
    };
    fresh_dir(job.out, job.force)?;

    let pool = pool(job.threads)?;
    let results: Vec<lowlight::Result<Reconstructed>> = pool.install(|| {
        (0..split.count)
            .into_par_iter()
            .map(|i| {
                let raw = ds.read_item(job.split, Role::Raw, i)?;
                Ok(match job.method {
                    MethodArg::Gs => {
                        let r = retriever.gs_reconstruct(&raw, &opts)?;
                        Reconstructed {
                            phase: r.phase,
                            residuals: r.residual_history,
                            status: r.status,
                        }
                    }
                    MethodArg::Approximant => Reconstructed {
                        phase: retriever.approximant(&raw, opts.offset)?.phase,
                        residuals: Vec::new(),
                        status: GsStatus::MaxIterations,
                    },
                })
            })
            .collect()
    });

    let p = m.recipe.geometry.object_pixels;
    let phase_path = job.out.join(PHASE_FILE);
    let mut writer = PrdWriter::create(&phase_path, &[split.count, p, p], Dtype::F32)?;
    let mut residual_tsv = String::from("example_id\titeration\tresidual\n");
    let mut logs = Vec::new();
    for (id, res) in split.ids().zip(results) {
        let r = res?;
        let v: Vec<f32> = r.phase.iter().map(|&x| x as f32).collect();
        writer.write_f32(&v)?;
        for (k, e) in r.residuals.iter().enumerate() {
            residual_tsv.push_str(&format!("{id}\t{k}\t{e:e}\n"));
        }
        if job.method == MethodArg::Gs {
            logs.push(ExampleLog {
                id,
                iterations: r.residuals.len(),
                initial_residual: r.residuals.first().copied().unwrap_or(0.0),
                final_residual: r.residuals.last().copied().unwrap_or(0.0),
                status: r.status,
            });
        }
    }
    let sha = writer.finish()?;
    if job.method == MethodArg::Gs {
        write_file(&job.out.join(RESIDUAL_FILE), &residual_tsv)?;
    }

    let dataset_path = fs::canonicalize(ds.root()).map_err(|e| io(ds.root(), e))?;
    let meta = ReconMeta {
        format: RECON_FORMAT.into(),
        dataset: m.recipe.name.clone(),
        dataset_path,
        noise_level: m.recipe.noise_level,
        method: job.method.name().into(),
        split: split.name.clone(),
        first_id: split.first_id,
        count: split.count,
        phase_file: PHASE_FILE.into(),
        phase_sha256: sha,
        options: (job.method == MethodArg::Gs).then_some(opts),
        example: logs,
    };
    let text = toml::to_string(&meta).context("serialising reconstruction metadata")?;
    write_file(&job.out.join(RECON_FILE), &text)?;
    println!(
        "{} {} examples of {} ({}) -> {}",
        job.method.name(),
        split.count,
        m.recipe.name,
        split.name,
        job.out.display()
    );
    Ok(())
}

pub fn read_meta(dir: &Path) -> lowlight::Result<ReconMeta> {
    let path = dir.join(RECON_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
    let meta: ReconMeta = toml::from_str(&text).map_err(|e| Error::Format {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    if meta.format != RECON_FORMAT {
        return Err(Error::Format {
            path,
            reason: format!("unsupported format `{}`", meta.format),
        });
    }
    Ok(meta)
}

/// One scored input: which dataset split it pairs with and its images.
struct Scored {
    noise_level: u8,
    method: String,
    split: String,
    ids: std::ops::Range<u64>,
    truth: Vec<RealImage>,
    recon: Vec<RealImage>,
}

fn pair_recon(dir: &Path, datasets: &[Dataset]) -> lowlight::Result<Scored> {
    let meta = read_meta(dir)?;
    let opened;
    let ds = if datasets.is_empty() {
        opened = Dataset::open(&meta.dataset_path)?;
        &opened
    } else {
        datasets
            .iter()
            .find(|d| d.manifest().recipe.name == meta.dataset)
            .ok_or_else(|| Error::PairingError(format!("{}: no dataset named `{}` given", dir.display(), meta.dataset)))?
    };
    let split = ds.split(&meta.split)?;
    if split.first_id != meta.first_id || split.count != meta.count {
        return Err(Error::PairingError(format!(
            "{}: ids {}..{} do not match split {} of {} ({}..{})",
            dir.display(),
            meta.first_id,
            meta.first_id + meta.count as u64,
            split.name,
            ds.manifest().recipe.name,
            split.first_id,
            split.first_id + split.count as u64
        )));
    }
    let phase_path = dir.join(&meta.phase_file);
    let actual = prd::file_checksum(&phase_path)?;
    if actual != meta.phase_sha256 {
        return Err(Error::Checksum {
            path: phase_path,
            expected: meta.phase_sha256,
            actual,
        });
    }
    let recon = images_from_prd(&prd::read_prd(&phase_path)?)?;
    let truth = ds.read(&meta.split, Role::Truth)?;
    if recon.len() != truth.len() {
        return Err(Error::PairingError(format!(
            "{}: {} reconstructions for {} ground truths",
            dir.display(),
            recon.len(),
            truth.len()
        )));
    }
    if recon[0].shape() != truth[0].shape() {
        return Err(Error::PairingError(format!(
            "{}: reconstructions are {:?}, ground truth is {:?}",
            dir.display(),
            recon[0].shape(),
            truth[0].shape()
        )));
    }
    Ok(Scored {
        noise_level: meta.noise_level,
        method: meta.method,
        split: meta.split,
        ids: split.ids(),
        truth,
        recon,
    })
}

fn self_pair(ds: &Dataset) -> lowlight::Result<Scored> {
    let split = ds.split("test")?;
    let truth = ds.read("test", Role::Truth)?;
    Ok(Scored {
        noise_level: ds.manifest().recipe.noise_level,
        method: "truth".into(),
        split: split.name.clone(),
        ids: split.ids(),
        recon: truth.clone(),
        truth,
    })
}

fn score(s: &Scored) -> lowlight::Result<Vec<MetricsRecord>> {
    let alpha = recover_scale(&s.truth, &s.recon)?;
    s.ids
        .clone()
        .zip(s.truth.iter().zip(&s.recon))
        .map(|(id, (t, r))| Ok(MetricsRecord::new(id, &s.split, s.noise_level, &s.method, pcc(t, r)?, alpha)))
        .collect()
}

pub fn evaluate(
    inputs: &[PathBuf],
    dataset_dirs: &[PathBuf],
    report_path: &Path,
    plot: Option<&Path>,
    records_path: Option<&Path>,
) -> anyhow::Result<()> {
    if inputs.is_empty() {
        return Err(Error::ConfigInvalid("no reconstructions to evaluate".into()).into());
    }
    let datasets = dataset_dirs
        .iter()
        .map(|d| Dataset::open(d))
        .collect::<lowlight::Result<Vec<_>>>()?;
    let mut records = Vec::new();
    for input in inputs {
        let scored = if input.join(RECON_FILE).exists() {
            pair_recon(input, &datasets)?
        } else if input.join(lowlight::dataset::manifest::MANIFEST_FILE).exists() {
            self_pair(&Dataset::open(input)?)?
        } else {
            return Err(Error::Format {
                path: input.clone(),
                reason: "neither a reconstruction nor a dataset directory".into(),
            }
            .into());
        };
        records.extend(score(&scored).with_context(|| format!("scoring {}", input.display()))?);
    }

    let mut groups: BTreeMap<(u8, String), Vec<f64>> = BTreeMap::new();
    for r in &records {
        groups.entry((r.noise_level, r.method.clone())).or_default().push(r.pcc);
    }
    let summaries: Vec<Summary> = groups
        .into_iter()
        .map(|((noise_level, method), v)| {
            let (mean_pcc, std_pcc) = mean_std(&v);
            Summary {
                noise_level,
                method,
                mean_pcc,
                std_pcc,
                n: v.len(),
            }
        })
        .collect();
    write_file(report_path, &report::summary_tsv(&summaries))?;
    if let Some(path) = records_path {
        write_file(path, &report::records_tsv(&records))?;
    }
    if let Some(path) = plot {
        write_file(path, &report::pcc_plot(&summaries))?;
    }
    for s in &summaries {
        println!(
            "level {}  {:<12} mean PCC {:.4} +/- {:.4}  (n={})",
            s.noise_level, s.method, s.mean_pcc, s.std_pcc, s.n
        );
    }
    Ok(())
}

pub fn sweep(config: &Path, out: Option<&Path>, threads: Option<usize>, force: bool) -> anyhow::Result<()> {
    let cfg = RunConfig::load(config)?;
    let root = out.map_or_else(|| cfg.dataset.output_dir.clone(), Path::to_owned);
    let datasets = dataset(config, Some(&root), threads, force)?;
    let recon_root = root.join("reconstructions");
    let mut inputs = Vec::new();
    for ds in &datasets {
        for method in [MethodArg::Gs, MethodArg::Approximant] {
            let out = recon_root.join(&ds.manifest().recipe.name).join(method.name());
            reconstruct(&ReconstructJob {
                dataset: ds.root(),
                method,
                split: "test",
                out: &out,
                opts: cfg.retrieval,
                threads,
                force,
            })?;
            inputs.push(out);
        }
    }
    let dirs: Vec<PathBuf> = datasets.iter().map(|d| d.root().to_owned()).collect();
    let name = &cfg.dataset.name;
    evaluate(
        &inputs,
        &dirs,
        &root.join(format!("{name}-report.tsv")),
        Some(&root.join(format!("{name}-pcc.svg"))),
        Some(&root.join(format!("{name}-records.tsv"))),
    )
}
