//! Command implementations. Each returns a one-line summary on success.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use serde::Serialize;
use turbkit::benchmark::BenchmarkSpec;
use turbkit::coop::{
    pgcl_cycle, CycleConfig, CycleReport, CycleRun, GroundTruth, IdentityRestorer, OracleRestorer, Restorer,
    StageMetrics, StructureFunctionMeasurer, TemporalRestorer,
};
use turbkit::fields::{generate_field, TurbulenceField};
use turbkit::io::{self, write_pfm, write_pgm, BitDepth};
use turbkit::optics::add_thermal_fluctuations;
use turbkit::optics::degrade_sequence;
use turbkit::scene::render_scene;
use turbkit::spectral::{nrmse, psnr, ssim, ImageMetrics};
use turbkit::FrameSequence;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Tbt,
    Pgm,
    Pfm,
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

fn field_exists(dir: &Path, stem: &str) -> bool {
    io::field_paths(dir, stem).iter().all(|p| p.is_file())
}

/// Gray level `round(255·clamp(v/norm, 0, 1))`.
pub fn write_heatmap(path: &Path, grid: &Array2<f64>, norm: f64) -> CliResult<()> {
    Ok(write_pgm(path, &grid.mapv(|v| v / norm), BitDepth::Eight)?)
}

/// Export each frame as `{stem}_{i:03}.pgm` (16-bit) or `.pfm`.
pub fn export_frames(dir: &Path, stem: &str, seq: &FrameSequence, format: Format) -> CliResult<()> {
    for (i, frame) in seq.frames.axis_iter(Axis(0)).enumerate() {
        let frame = frame.to_owned();
        match format {
            Format::Tbt => {}
            Format::Pgm => write_pgm(dir.join(format!("{stem}_{i:03}.pgm")), &frame, BitDepth::Sixteen)?,
            Format::Pfm => write_pfm(dir.join(format!("{stem}_{i:03}.pfm")), &frame)?,
        }
    }
    Ok(())
}

pub fn gen_field(cfg: &RunConfig, format: Format) -> CliResult<String> {
    let field = generate_field(&cfg.field_spec).map_err(|e| CliError::config(e.to_string()))?;
    let dir = cfg.out_dir();
    ensure_dir(dir)?;
    io::write_field(dir, &cfg.io.field_stem, &field)?;
    let stem = &cfg.io.field_stem;
    match format {
        Format::Tbt => {}
        Format::Pgm => write_heatmap(
            &dir.join(format!("{stem}_cn2.pgm")),
            &field.cn2,
            cfg.cycle.cn2_normalizer,
        )?,
        Format::Pfm => write_pfm(dir.join(format!("{stem}_cn2.pfm")), &field.cn2)?,
    }
    let (gh, gw) = field.grid_dims();
    Ok(format!("field {gw}×{gh} blocks written to {}", dir.display()))
}

fn load_field(cfg: &RunConfig) -> CliResult<TurbulenceField> {
    let dir = cfg.out_dir();
    if !field_exists(dir, &cfg.io.field_stem) {
        return Err(CliError::config(format!(
            "no field '{}' in {}; run gen-field first",
            cfg.io.field_stem,
            dir.display()
        )));
    }
    Ok(io::read_field(dir, &cfg.io.field_stem)?)
}

pub fn simulate(cfg: &RunConfig, format: Format) -> CliResult<String> {
    let field = load_field(cfg)?;
    let clean = render_scene(&field, &cfg.scene, &cfg.sensor).map_err(|e| CliError::config(e.to_string()))?;
    let mut turb = degrade_sequence(&clean, &field, &cfg.degradation)?;
    if cfg.thermal {
        turb = add_thermal_fluctuations(&turb, &field, cfg.sensor.gain, cfg.seeds.thermal)?;
    }
    let dir = cfg.out_dir();
    io::write_sequence(dir.join(&cfg.io.clean), &clean)?;
    io::write_sequence(dir.join(&cfg.io.turb), &turb)?;
    export_frames(dir, "clean", &clean, format)?;
    export_frames(dir, "turb", &turb, format)?;
    let (h, w) = clean.frame_dims();
    Ok(format!(
        "{} frames of {w}×{h} written to {}",
        clean.len(),
        dir.display()
    ))
}

#[derive(Debug, Serialize)]
struct FieldRow<'a> {
    quantity: &'a str,
    mode: &'a str,
    mae: f64,
    rmse: f64,
    msle: f64,
    r2: f64,
}

#[derive(Debug, Serialize)]
struct ImageRow<'a> {
    sequence: &'a str,
    nrmse: f64,
    psnr_db: f64,
    ssim: f64,
}

fn write_field_csv(path: &Path, report: &CycleReport) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let modes: [(&str, &Option<StageMetrics>); 2] = [("single", &report.single_mode), ("dual", &report.dual_mode)];
    for (mode, m) in modes {
        let Some(m) = m else { continue };
        for (quantity, f) in [("cn2", m.cn2), ("ct2", m.ct2), ("temp", m.temp)] {
            w.serialize(FieldRow {
                quantity,
                mode,
                mae: f.mae,
                rmse: f.rmse,
                msle: f.msle,
                r2: f.r2,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_image_csv(path: &Path, rows: &[(&str, ImageMetrics)]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (sequence, m) in rows {
        w.serialize(ImageRow {
            sequence,
            nrmse: m.nrmse,
            psnr_db: m.psnr_db,
            ssim: m.ssim,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn cycle(cfg: &RunConfig, format: Format) -> CliResult<String> {
    let dir = cfg.out_dir();
    let turb_path = dir.join(&cfg.io.turb);
    if !turb_path.is_file() {
        return Err(CliError::config(format!(
            "no sequence at {}; run simulate first",
            turb_path.display()
        )));
    }
    let turb = io::read_sequence(&turb_path)?;
    let clean_path = dir.join(&cfg.io.clean);
    let clean = if clean_path.is_file() {
        Some(io::read_sequence(&clean_path)?)
    } else {
        None
    };
    let field = if field_exists(dir, &cfg.io.field_stem) {
        Some(io::read_field(dir, &cfg.io.field_stem)?)
    } else {
        None
    };

    let measurer = cfg.measurer()?;
    let restorer = cfg.restorer()?;
    let truth = GroundTruth {
        field: field.as_ref(),
        clean: clean.as_ref(),
    };
    let run = pgcl_cycle(
        &turb,
        &cfg.sensor,
        measurer.as_ref(),
        restorer.as_ref(),
        truth,
        &cfg.cycle,
    )?;
    write_cycle_outputs(dir, cfg, &run, field.as_ref(), format)?;
    Ok(summarize(&run.report))
}

fn write_cycle_outputs(
    dir: &Path,
    cfg: &RunConfig,
    run: &CycleRun,
    field: Option<&TurbulenceField>,
    format: Format,
) -> CliResult<()> {
    let report = &run.report;
    fs::write(dir.join(&cfg.io.report), serde_json::to_string_pretty(report)?)?;
    io::write_sequence(dir.join(&cfg.io.restored), &run.restored)?;
    export_frames(dir, "restored", &run.restored, format)?;
    let norm = cfg.cycle.cn2_normalizer;
    write_heatmap(&dir.join("cn2_single.pgm"), &run.single.cn2, norm)?;
    write_heatmap(&dir.join("cn2_dual.pgm"), &run.dual.cn2, norm)?;
    if let Some(f) = field {
        write_heatmap(&dir.join("cn2_truth.pgm"), &f.cn2, norm)?;
    }
    if report.single_mode.is_some() {
        write_field_csv(&dir.join("field_metrics.csv"), report)?;
    }
    let mut rows = Vec::new();
    if let Some(m) = report.turbulent {
        rows.push(("turbulent", m));
    }
    if let Some(m) = report.restored {
        rows.push(("restored", m));
    }
    if !rows.is_empty() {
        write_image_csv(&dir.join("image_metrics.csv"), &rows)?;
    }
    Ok(())
}

fn summarize(r: &CycleReport) -> String {
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    format!(
        "{} → {} frames; Cn² MAE single {} dual {}; R² dual {}",
        r.input_frames,
        r.restored_frames,
        opt(r.mae_cn2_single),
        opt(r.mae_cn2_dual),
        opt(r.r2_cn2_dual)
    )
}

#[derive(Debug, Serialize)]
struct FrameRow {
    frame: String,
    nrmse: f64,
    psnr_db: f64,
    ssim: f64,
}

/// Per-frame image metrics of `restored` against `reference`. A reference
/// four frames longer is aligned to its frames `2..L−2`.
pub fn metrics(restored: &Path, reference: &Path, out: Option<&Path>) -> CliResult<String> {
    let read = |p: &Path| -> CliResult<FrameSequence> {
        if !p.is_file() {
            return Err(CliError::config(format!("no sequence at {}", p.display())));
        }
        Ok(io::read_sequence(p)?)
    };
    let rest = read(restored)?;
    let mut gt = read(reference)?;
    if gt.len() == rest.len() + 4 {
        gt = gt.slice_frames(2, gt.len() - 2)?;
    }
    rest.ensure_same_dims(&gt, "restored vs reference")?;
    let mut rows = Vec::with_capacity(rest.len() + 1);
    let (mut sn, mut sp, mut ss) = (0.0, 0.0, 0.0);
    for i in 0..rest.len() {
        let (a, b) = (rest.frame(i), gt.frame(i));
        let row = FrameRow {
            frame: i.to_string(),
            nrmse: nrmse(&a, &b),
            psnr_db: psnr(&a, &b),
            ssim: ssim(&a, &b)?,
        };
        sn += row.nrmse;
        sp += row.psnr_db;
        ss += row.ssim;
        rows.push(row);
    }
    let n = rest.len() as f64;
    rows.push(FrameRow {
        frame: "mean".into(),
        nrmse: sn / n,
        psnr_db: sp / n,
        ssim: ss / n,
    });

    let mut buf = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        buf.serialize(r)?;
    }
    let text = String::from_utf8(buf.into_inner().map_err(|e| CliError::io(e.to_string()))?)
        .map_err(|e| CliError::io(e.to_string()))?;
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            fs::write(dir.join("metrics.csv"), &text)?;
        }
        None => print!("{text}"),
    }
    Ok(format!("mean PSNR {:.3} dB, SSIM {:.4}", sp / n, ss / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    #[default]
    Standard,
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchRestorer {
    Oracle,
    #[default]
    Temporal,
    Identity,
}

#[derive(Debug, Serialize)]
struct BenchRow {
    seed: u64,
    mae_cn2_single: f64,
    mae_cn2_dual: f64,
    r2_cn2_single: f64,
    r2_cn2_dual: f64,
    psnr_turbulent_db: f64,
    psnr_restored_db: f64,
    dual_improved: bool,
}

#[derive(Debug, Serialize)]
pub struct BenchSummary {
    pub suite: Suite,
    pub restorer: BenchRestorer,
    pub cases: usize,
    pub dual_not_worse: usize,
    pub mean_mae_cn2_single: f64,
    pub mean_mae_cn2_dual: f64,
    pub mean_r2_cn2_single: f64,
    pub mean_r2_cn2_dual: f64,
    pub mean_psnr_turbulent_db: f64,
    pub mean_psnr_restored_db: f64,
}

pub fn bench(suite: Suite, which: BenchRestorer, seed: Option<u64>, out: &Path) -> CliResult<String> {
    let mut spec = match suite {
        Suite::Standard => BenchmarkSpec::standard(),
        Suite::Noisy => BenchmarkSpec::noisy(),
    };
    if let Some(s) = seed {
        spec.seeds = (0..spec.seeds.len() as u64).map(|i| s.wrapping_add(i)).collect();
    }
    let measurer = StructureFunctionMeasurer::default();
    let config = CycleConfig::default();
    let mut rows = Vec::new();
    for case in spec.cases()? {
        let restorer: Box<dyn Restorer> = match which {
            BenchRestorer::Oracle => Box::new(OracleRestorer {
                clean: case.clean.clone(),
            }),
            BenchRestorer::Temporal => Box::new(TemporalRestorer::default()),
            BenchRestorer::Identity => Box::new(IdentityRestorer),
        };
        let truth = GroundTruth {
            field: Some(&case.field),
            clean: Some(&case.clean),
        };
        let r = pgcl_cycle(&case.turb, &case.sensor, &measurer, restorer.as_ref(), truth, &config)?.report;
        let get = |v: Option<f64>| v.unwrap_or(f64::NAN);
        rows.push(BenchRow {
            seed: case.seed,
            mae_cn2_single: get(r.mae_cn2_single),
            mae_cn2_dual: get(r.mae_cn2_dual),
            r2_cn2_single: get(r.r2_cn2_single),
            r2_cn2_dual: get(r.r2_cn2_dual),
            psnr_turbulent_db: r.turbulent.map_or(f64::NAN, |m| m.psnr_db),
            psnr_restored_db: r.restored.map_or(f64::NAN, |m| m.psnr_db),
            dual_improved: r.dual_improved.unwrap_or(false),
        });
    }
    ensure_dir(out)?;
    let mut w = csv::Writer::from_path(out.join("bench.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let n = rows.len() as f64;
    let mean = |f: fn(&BenchRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let summary = BenchSummary {
        suite,
        restorer: which,
        cases: rows.len(),
        dual_not_worse: rows.iter().filter(|r| r.mae_cn2_dual <= r.mae_cn2_single).count(),
        mean_mae_cn2_single: mean(|r| r.mae_cn2_single),
        mean_mae_cn2_dual: mean(|r| r.mae_cn2_dual),
        mean_r2_cn2_single: mean(|r| r.r2_cn2_single),
        mean_r2_cn2_dual: mean(|r| r.r2_cn2_dual),
        mean_psnr_turbulent_db: mean(|r| r.psnr_turbulent_db),
        mean_psnr_restored_db: mean(|r| r.psnr_restored_db),
    };
    fs::write(out.join("bench_summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(format!(
        "{} cases; dual ≤ single on {}; mean R² dual {:.4}; PSNR {:.2} → {:.2} dB",
        summary.cases,
        summary.dual_not_worse,
        summary.mean_r2_cn2_dual,
        summary.mean_psnr_turbulent_db,
        summary.mean_psnr_restored_db
    ))
}

/// Resolve `--out` against the configured output directory.
pub fn resolve_out(cfg: &mut RunConfig, out: Option<PathBuf>) {
    if let Some(o) = out {
        cfg.io.out_dir = o;
    }
}
