use std::path::{Path, PathBuf};

use serde::Serialize;
use stabilikit::com::{
    comnet_forward_batch, comnet_train_with_history, dempster_com, loso_splits, ComModel, ComNetShape, ForwardMode,
    MlpParams, TrainConfig,
};
use stabilikit::eval::{combinatorial_study, error_stats, threshold_sweep, ErrorStats, StudyConfig, SweepConfig};
use stabilikit::geometry::Point3;
use stabilikit::io::{cell, write_csv_report, write_json_report, write_model, write_pose3d, write_synth_take, RunConfig};
use stabilikit::pose::{hip_center, Pose3dFrame};
use stabilikit::stability::{compute_series, lowpass_trend, ImageCom, Metric, SeriesConfig};
use stabilikit::synth::{generate_take, NoiseSpec, SynthRig};
use stabilikit::take::Take;
use stabilikit::Result;

use crate::inputs::{image_com, load_all, load_models, model_path};
use crate::*;

pub fn dispatch(cmd: &Command, mut cfg: RunConfig) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a, &cfg),
        Command::Triangulate(a) => triangulate(a, &cfg),
        Command::TrainCom(a) => {
            cfg.loso = !a.no_loso;
            train_com(a, &cfg)
        }
        Command::ComEval(a) => com_eval(a, &cfg),
        Command::Stability(a) => {
            if let Some(c) = a.channels {
                cfg.channels = c;
            }
            if let Some(t) = a.threshold {
                cfg.threshold = t;
            }
            cfg.validate()?;
            stability(a, &cfg)
        }
        Command::Sweep(a) => sweep(a, &cfg),
        Command::Study(a) => {
            if let Some(t) = a.threshold {
                cfg.threshold = t;
            }
            cfg.validate()?;
            study(a, &cfg)
        }
        Command::Trend(a) => {
            if let Some(c) = a.channels {
                cfg.channels = c;
            }
            if let Some(c) = a.cutoff {
                cfg.cutoff = c;
            }
            cfg.validate()?;
            trend(a, &cfg)
        }
    }
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn file_stem(take: &Take) -> String {
    format!("{}_{}", take.subject, take.take)
}

fn num(x: f64) -> String {
    x.to_string()
}

#[derive(Serialize)]
struct SynthEntry {
    subject: String,
    take: String,
    program: String,
    frames: usize,
    manifest: PathBuf,
}

#[derive(Serialize)]
struct SynthOutput<'a> {
    rig: &'a SynthRig,
    noise: NoiseSpec,
    duration: f64,
    takes: Vec<SynthEntry>,
}

fn synth(a: &SynthArgs, cfg: &RunConfig) -> Result<()> {
    let rig = SynthRig::new(cfg.seed)?;
    let noise = NoiseSpec {
        pixel_px: a.pixel_noise,
        joint_mm: a.joint_noise,
        pressure_kpa: a.pressure_noise,
        com_mm: a.com_noise,
        occlusion: a.occlusion,
        seed: cfg.seed,
    };
    let dir = out(cfg, "takes");
    let mut entries = Vec::new();
    for s in 0..a.subjects {
        let subject = rig.subject(s);
        for (k, &program) in a.programs.iter().enumerate() {
            let take = generate_take(&rig, &subject, &format!("T{:02}", k + 1), program, a.duration, &noise)?;
            let manifest = write_synth_take(&take, &dir)?;
            entries.push(SynthEntry {
                subject: subject.id.clone(),
                take: take.take.clone(),
                program: program.to_string(),
                frames: take.frames.len(),
                manifest: manifest.strip_prefix(&cfg.output_dir).unwrap_or(&manifest).to_path_buf(),
            });
        }
    }
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            vec![
                e.subject.clone(),
                e.take.clone(),
                e.program.clone(),
                e.frames.to_string(),
                e.manifest.display().to_string(),
            ]
        })
        .collect();
    write_csv_report(&out(cfg, "synth.csv"), "synth", cfg, &["subject", "take", "program", "frames", "manifest"], &rows)?;
    let report = SynthOutput {
        rig: &rig,
        noise,
        duration: a.duration,
        takes: entries,
    };
    write_json_report(&out(cfg, "synth.json"), "synth", cfg, &report)
}

#[derive(Serialize)]
struct TriangulationSummary {
    take: String,
    frames: usize,
    valid_joint_fraction: f64,
    file: PathBuf,
}

fn triangulate(a: &InputArgs, cfg: &RunConfig) -> Result<()> {
    let loaded = load_all(&a.inputs)?;
    let mut summary = Vec::new();
    for take in &loaded.takes {
        let frames: Vec<Pose3dFrame> = take.frames.iter().filter_map(|f| f.op_pose.clone()).collect();
        let name = PathBuf::from(format!("{}_op_pose.csv", file_stem(take)));
        write_pose3d(&out(cfg, &name.to_string_lossy()), &frames)?;
        let joints: usize = frames.iter().map(|f| f.joints.len()).sum();
        let valid: usize = frames.iter().map(|f| f.joints.iter().filter(|j| j.valid).count()).sum();
        summary.push(TriangulationSummary {
            take: take.id(),
            frames: frames.len(),
            valid_joint_fraction: if joints == 0 { 0.0 } else { valid as f64 / joints as f64 },
            file: name,
        });
    }
    let rows: Vec<Vec<String>> = summary
        .iter()
        .map(|s| vec![s.take.clone(), s.frames.to_string(), num(s.valid_joint_fraction), s.file.display().to_string()])
        .collect();
    write_csv_report(&out(cfg, "triangulate.csv"), "triangulate", cfg, &["take", "frames", "valid_joint_fraction", "file"], &rows)?;
    write_json_report(&out(cfg, "triangulate.json"), "triangulate", cfg, &summary)
}

/// (image pose, GT CoM) pairs from frames where both are complete.
fn com_dataset(takes: &[&Take]) -> Vec<(Pose3dFrame, Point3)> {
    takes
        .iter()
        .flat_map(|t| &t.frames)
        .filter_map(|f| {
            let pose = f.image_pose()?;
            (pose.all_valid()).then_some((pose, f.gt_com?))
        })
        .collect()
}

fn mean_error(params: &MlpParams, data: &[(Pose3dFrame, Point3)]) -> Result<(f64, f64)> {
    let poses: Vec<Pose3dFrame> = data.iter().map(|d| d.0.clone()).collect();
    let pred = comnet_forward_batch(&poses, params, ForwardMode::Eval)?;
    let mut net = 0.0;
    let mut hip = 0.0;
    for (p, (pose, com)) in pred.iter().zip(data) {
        net += (*p - *com).norm();
        hip += (hip_center(pose)? - *com).norm();
    }
    let n = data.len() as f64;
    Ok((net / n, hip / n))
}

#[derive(Serialize)]
struct FoldReport {
    held_out: String,
    train_frames: usize,
    test_frames: usize,
    comnet_error_mm: Option<f64>,
    hip_error_mm: Option<f64>,
    epoch_losses: Vec<f64>,
    model: PathBuf,
}

fn train_com(a: &TrainArgs, cfg: &RunConfig) -> Result<()> {
    let loaded = load_all(&a.input.inputs)?;
    let tc = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        initial_lr: a.lr,
        seed: cfg.seed,
        shape: ComNetShape {
            width: a.width,
            ..ComNetShape::default()
        },
        ..TrainConfig::default()
    };
    let mut folds = Vec::new();
    if cfg.loso {
        for split in loso_splits(&loaded.takes, |t| t.subject.clone())? {
            let pick = |idx: &[usize]| idx.iter().map(|&i| &loaded.takes[i]).collect::<Vec<_>>();
            let train = com_dataset(&pick(&split.train));
            let test = com_dataset(&pick(&split.test));
            let outcome = comnet_train_with_history(&train, &tc)?;
            let (net, hip) = if test.is_empty() {
                (None, None)
            } else {
                let (n, h) = mean_error(&outcome.params, &test)?;
                (Some(n), Some(h))
            };
            let name = model_path(Path::new("models"), &split.subject);
            write_model(&cfg.output_dir.join(&name), &outcome.params)?;
            folds.push(FoldReport {
                held_out: split.subject,
                train_frames: train.len(),
                test_frames: test.len(),
                comnet_error_mm: net,
                hip_error_mm: hip,
                epoch_losses: outcome.epoch_losses,
                model: name,
            });
        }
    } else {
        let all: Vec<&Take> = loaded.takes.iter().collect();
        let train = com_dataset(&all);
        let outcome = comnet_train_with_history(&train, &tc)?;
        let name = PathBuf::from("models").join("com.stbk");
        write_model(&cfg.output_dir.join(&name), &outcome.params)?;
        folds.push(FoldReport {
            held_out: String::new(),
            train_frames: train.len(),
            test_frames: 0,
            comnet_error_mm: None,
            hip_error_mm: None,
            epoch_losses: outcome.epoch_losses,
            model: name,
        });
    }
    let rows: Vec<Vec<String>> = folds
        .iter()
        .map(|f| {
            vec![
                f.held_out.clone(),
                f.train_frames.to_string(),
                f.test_frames.to_string(),
                cell(f.comnet_error_mm),
                cell(f.hip_error_mm),
                cell(f.epoch_losses.last().copied()),
                f.model.display().to_string(),
            ]
        })
        .collect();
    let header = ["held_out", "train_frames", "test_frames", "comnet_error_mm", "hip_error_mm", "final_loss", "model"];
    write_csv_report(&out(cfg, "train_com.csv"), "train-com", cfg, &header, &rows)?;
    write_json_report(&out(cfg, "train_com.json"), "train-com", cfg, &folds)
}

#[derive(Serialize)]
struct MethodStats {
    method: String,
    stats: ErrorStats,
}

/// CoM error per estimator against the GT CoM labels.
fn com_eval(a: &ComEvalArgs, cfg: &RunConfig) -> Result<()> {
    let loaded = load_all(&a.input.inputs)?;
    let models = a.models.as_deref().map(load_models).transpose()?;
    let mocap = ComModel::motion_capture();
    let mut errors: Vec<(&str, Vec<f64>)> = vec![("mocap", vec![]), ("hip", vec![]), ("dempster", vec![]), ("provided", vec![])];
    if models.is_some() {
        errors.push(("comnet", vec![]));
    }
    for take in &loaded.takes {
        for f in &take.frames {
            let Some(label) = f.gt_com else { continue };
            let mut push = |k: usize, est: Result<Point3>| {
                if let Ok(p) = est {
                    errors[k].1.push((p - label).norm());
                }
            };
            if let Some(gt) = &f.gt_pose {
                push(0, dempster_com(gt, &mocap));
            }
            if let Some(im) = f.image_pose() {
                push(1, hip_center(&im));
                push(2, ComModel::for_layout(im.layout).and_then(|m| dempster_com(&im, &m)));
                match &models {
                    Some(ImageCom::ComNet(p)) => push(4, comnet_single(&im, p)),
                    Some(ImageCom::ComNetBySubject(by)) => {
                        if let Some(p) = by.get(&take.subject) {
                            push(4, comnet_single(&im, p));
                        }
                    }
                    _ => {}
                }
            }
            if let Some(c) = f.im_com {
                push(3, Ok(c));
            }
        }
    }
    let stats: Vec<MethodStats> = errors
        .into_iter()
        .filter(|(_, e)| !e.is_empty())
        .map(|(m, e)| Ok(MethodStats { method: m.into(), stats: error_stats(&e)? }))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = stats
        .iter()
        .map(|m| {
            let s = &m.stats;
            vec![m.method.clone(), num(s.mean), num(s.std), num(s.median), num(s.rstd), s.n.to_string()]
        })
        .collect();
    write_csv_report(&out(cfg, "com_eval.csv"), "com-eval", cfg, &["method", "mean_mm", "std_mm", "median_mm", "rstd_mm", "n"], &rows)?;
    write_json_report(&out(cfg, "com_eval.json"), "com-eval", cfg, &stats)
}

fn comnet_single(pose: &Pose3dFrame, p: &MlpParams) -> Result<Point3> {
    stabilikit::com::comnet_forward(pose, p, ForwardMode::Eval)
}

fn series_config(cfg: &RunConfig, com: &ImageComArgs) -> Result<SeriesConfig> {
    Ok(SeriesConfig {
        threshold: cfg.threshold,
        image_com: image_com(com)?,
        ..SeriesConfig::default()
    })
}

fn stability(a: &StabilityArgs, cfg: &RunConfig) -> Result<()> {
    let loaded = load_all(&a.input.inputs)?;
    let sc = series_config(cfg, &a.com)?;
    for take in &loaded.takes {
        let series = compute_series(take, cfg.channels, &sc)?;
        let rows: Vec<Vec<String>> = series
            .frames
            .iter()
            .map(|f| {
                vec![
                    f.frame_index.to_string(),
                    cell(f.com2d.map(|p| p.x)),
                    cell(f.com2d.map(|p| p.y)),
                    cell(f.cop.map(|p| p.x)),
                    cell(f.cop.map(|p| p.y)),
                    cell(f.com_to_cop),
                    cell(f.com_to_bos),
                ]
            })
            .collect();
        let header = ["frame", "com_x", "com_y", "cop_x", "cop_y", "com_to_cop", "com_to_bos"];
        let stem = format!("stability_{}", file_stem(take));
        write_csv_report(&out(cfg, &format!("{stem}.csv")), "stability", cfg, &header, &rows)?;
        write_json_report(&out(cfg, &format!("{stem}.json")), "stability", cfg, &series)?;
    }
    Ok(())
}

fn sweep(a: &SweepArgs, cfg: &RunConfig) -> Result<()> {
    let loaded = load_all(&a.input.inputs)?;
    let sc = SweepConfig {
        thresholds: cfg.sweep_grid.clone(),
        ..SweepConfig::default()
    };
    let result = threshold_sweep(&loaded.takes, a.localization, a.metric, &sc)?;
    let mut header = vec!["threshold".to_string(), "mean".into(), "median".into(), "valid_frames".into(), "gaps".into()];
    header.extend(result.subjects.iter().map(|s| format!("mean_{s}")));
    let rows: Vec<Vec<String>> = (0..result.thresholds.len())
        .map(|i| {
            let mut row = vec![
                num(result.thresholds[i]),
                cell(result.overall_mean[i]),
                cell(result.overall_median[i]),
                result.valid_frames[i].to_string(),
                result.gaps[i].to_string(),
            ];
            row.extend(result.per_subject_mean[i].iter().map(|v| cell(*v)));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let stem = format!("sweep_{}_{}", a.metric, a.localization);
    write_csv_report(&out(cfg, &format!("{stem}.csv")), "sweep", cfg, &header, &rows)?;
    write_json_report(&out(cfg, &format!("{stem}.json")), "sweep", cfg, &result)
}

#[derive(Serialize)]
struct StudyOutput<'a> {
    report: &'a stabilikit::eval::StudyReport,
    excluded_by_manifest: &'a [(String, String)],
}

fn study(a: &StudyArgs, cfg: &RunConfig) -> Result<()> {
    let loaded = load_all(&a.input.inputs)?;
    let sc = StudyConfig {
        series: series_config(cfg, &a.com)?,
        ..StudyConfig::default()
    };
    let report = combinatorial_study(&loaded.takes, &sc)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.channels.to_string(),
                r.metric.name().to_string(),
                cell(r.r_mean),
                cell(r.r_std),
                cell(r.mae_mean),
                cell(r.mae_std),
                r.folds.to_string(),
                r.skipped_folds.to_string(),
                r.paired_frames.to_string(),
            ]
        })
        .collect();
    let header = ["channels", "metric", "r_mean", "r_std", "mae_mean", "mae_std", "folds", "skipped_folds", "paired_frames"];
    write_csv_report(&out(cfg, "study.csv"), "study", cfg, &header, &rows)?;
    let body = StudyOutput {
        report: &report,
        excluded_by_manifest: &loaded.excluded,
    };
    write_json_report(&out(cfg, "study.json"), "study", cfg, &body)
}

fn trend(a: &TrendArgs, cfg: &RunConfig) -> Result<()> {
    let loaded = load_all(&a.input.inputs)?;
    let sc = series_config(cfg, &a.com)?;
    for take in &loaded.takes {
        let series = compute_series(take, cfg.channels, &sc)?;
        let tr = lowpass_trend(&series, cfg.cutoff)?;
        let raw_cop = series.values(Metric::ComToCop);
        let raw_bos = series.values(Metric::ComToBos);
        let rows: Vec<Vec<String>> = (0..tr.frame_indices.len())
            .map(|i| {
                vec![
                    tr.frame_indices[i].to_string(),
                    cell(raw_cop[i]),
                    cell(tr.com_to_cop[i]),
                    cell(raw_bos[i]),
                    cell(tr.com_to_bos[i]),
                    u8::from(tr.passthrough[i]).to_string(),
                ]
            })
            .collect();
        let header = ["frame", "com_to_cop", "com_to_cop_trend", "com_to_bos", "com_to_bos_trend", "passthrough"];
        let stem = format!("trend_{}", file_stem(take));
        write_csv_report(&out(cfg, &format!("{stem}.csv")), "trend", cfg, &header, &rows)?;
        write_json_report(&out(cfg, &format!("{stem}.json")), "trend", cfg, &tr)?;
    }
    Ok(())
}
