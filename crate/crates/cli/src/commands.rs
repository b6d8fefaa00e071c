use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use edgeuq::adaptation::{events_to_jsonl, load_run, persist_run, replay, run_loop, LoopSummary};
use edgeuq::calibration::{
    calibrate, calibrate_per_segment, CalibratedModel, CalibrationResult, SegmentedCalibration,
};
use edgeuq::dataset::{assign_segments, load_csv, save_csv, split, write_csv, Dataset, Sample, SegmentRule, Segmenter};
use edgeuq::driftsim::make_stream;
use edgeuq::metrics::{evaluate, IntervalReport};
use edgeuq::regressor::{fit, Regressor};
use edgeuq::residuals::split_residuals;
use edgeuq::{seed, PredictionInterval};

use crate::config::{RunConfig, SegmentSection};
use crate::failure::Failure;

type Res<T> = Result<T, Failure>;

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Res<()> {
    fs::write(path, bytes).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn read(path: &Path) -> Res<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Res<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))
}

/// Fails early if `dir` cannot be created or written to.
fn probe_writable(dir: &Path) -> Res<()> {
    create_dir(dir)?;
    let probe = dir.join(".edgeuq-probe");
    write(&probe, b"")?;
    fs::remove_file(&probe).map_err(|e| Failure::io(format!("cannot clean {}: {e}", probe.display())))
}

/// Ordered `key = value` lines.
#[derive(Default)]
struct KeyValues(String);

impl KeyValues {
    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        writeln!(self.0, "{key} = {value}").unwrap();
    }
}

/// Moves a numeric column out of the features and into each sample's segment label.
fn segment_column(ds: Dataset<f64>, column: &str) -> Res<Dataset<f64>> {
    let j = ds
        .feature_names()
        .iter()
        .position(|n| n == column)
        .ok_or_else(|| Failure::data(format!("segment column {column:?} not found in {}", ds.name())))?;
    let mut names = ds.feature_names().to_vec();
    names.remove(j);
    let samples = ds
        .iter()
        .map(|s| {
            let mut x = s.x.clone();
            let label = x.remove(j);
            Sample::new(s.id, x, s.y).with_segment(format!("{label}"))
        })
        .collect();
    Ok(Dataset::with_names(ds.name(), names, ds.target_name(), samples)?)
}

fn load_data(cfg: &RunConfig, path: &Path) -> Res<Dataset<f64>> {
    let ds = load_csv::<f64>(path, cfg.target())?;
    match &cfg.calibration.segments {
        Some(SegmentSection::Column { column, .. }) => segment_column(ds, column),
        _ => Ok(ds),
    }
}

fn save_triplet(dir: &Path, m: &CalibratedModel<f64>) -> Res<()> {
    create_dir(dir)?;
    write(&dir.join("f.model"), m.f.save())?;
    write(&dir.join("u.model"), m.u.save())?;
    write(&dir.join("l.model"), m.l.save())?;
    write(&dir.join("calibration.txt"), m.result.to_text())
}

fn put_calibration(kv: &mut KeyValues, prefix: &str, r: &CalibrationResult<f64>) {
    kv.put(&format!("{prefix}alpha"), r.alpha);
    kv.put(&format!("{prefix}beta"), r.beta);
    kv.put(&format!("{prefix}parent_n"), r.parent_n);
    kv.put(&format!("{prefix}target_per_tail"), r.target_per_tail);
    kv.put(&format!("{prefix}upper_exceedances"), r.upper_exceedances);
    kv.put(&format!("{prefix}lower_exceedances"), r.lower_exceedances);
}

/// Deployed calibration: either one global triplet or per-segment triplets.
enum Deployed {
    Global(CalibratedModel<f64>),
    Segmented {
        cal: SegmentedCalibration<f64>,
        segmenter: Option<Segmenter>,
    },
}

type Predicted = (Vec<PredictionInterval<f64>>, Option<Vec<String>>);

impl Deployed {
    fn predict(&self, ds: &Dataset<f64>) -> Res<Predicted> {
        match self {
            Deployed::Global(m) => Ok((m.predict_dataset(ds)?, None)),
            Deployed::Segmented { cal, segmenter } => {
                let mut ints = Vec::with_capacity(ds.len());
                let mut labels = Vec::with_capacity(ds.len());
                for s in ds {
                    let label = match segmenter {
                        Some(seg) => seg.label(&s.x),
                        None => s.segment.clone(),
                    };
                    ints.push(cal.predict(&s.x, label.as_deref())?);
                    labels.push(label.unwrap_or_else(|| "unlabelled".into()));
                }
                Ok((ints, Some(labels)))
            }
        }
    }
}

fn report_on(deployed: &Deployed, ds: &Dataset<f64>) -> Res<IntervalReport> {
    let (ints, labels) = deployed.predict(ds)?;
    Ok(evaluate(&ints, &ds.targets(), labels.as_deref())?)
}

pub struct CalibrateOutput {
    pub dir: PathBuf,
    pub report: IntervalReport,
}

/// fit, split residuals, calibrate (per segment if configured), report on the test split.
pub fn cmd_calibrate(cfg: &RunConfig, data: &Path, out: &Path) -> Res<CalibrateOutput> {
    let gamma = cfg.confidence()?;
    let opts = cfg.bisect_options();
    let ds = load_data(cfg, data)?;
    let (train, cal, test) = split(&ds, &cfg.split)?;
    let f = fit(&cfg.model, &train)?;

    let mut kv = KeyValues::default();
    kv.put("command", "calibrate");
    kv.put("data_rows", ds.len());
    kv.put("train_rows", train.len());
    kv.put("calibration_rows", cal.len());
    kv.put("test_rows", test.len());
    kv.put("gamma", gamma.value());
    kv.put("f_train_mse", f.mse(&train)?);

    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let mut triplets: Vec<(PathBuf, CalibratedModel<f64>)> = Vec::new();
    let (deployed, cal_for_export) = match &cfg.calibration.segments {
        None => {
            let residuals = split_residuals(&f, &cal)?;
            let model = calibrate(&f, &residuals, cfg.bound_spec(), gamma, &opts)?;
            put_calibration(&mut kv, "calibration.", &model.result);
            let mut d1 = Vec::new();
            write_csv(&residuals.d1, &mut d1)?;
            let mut d0 = Vec::new();
            write_csv(&residuals.d0, &mut d0)?;
            files.push((out.join("d1.csv"), d1));
            files.push((out.join("d0.csv"), d0));
            triplets.push((out.to_path_buf(), model.clone()));
            (Deployed::Global(model), cal)
        }
        Some(section) => {
            let (labelled, segmenter) = match section {
                SegmentSection::QuantileBins { feature, bins, .. } => {
                    let (l, s) = assign_segments(&cal, &SegmentRule::QuantileBins { feature: *feature, bins: *bins })?;
                    (l, Some(s))
                }
                SegmentSection::Column { .. } => (cal, None),
            };
            let seg = calibrate_per_segment(&f, &labelled, cfg.bound_spec(), gamma, &opts, section.min_population())?;
            if let Some(g) = &seg.global {
                put_calibration(&mut kv, "calibration.", &g.result);
                triplets.push((out.to_path_buf(), g.clone()));
            }
            for (label, s) in &seg.segments {
                let prefix = format!("calibration.{label}.");
                kv.put(&format!("{prefix}population"), s.population);
                kv.put(&format!("{prefix}fallback"), s.fallback);
                put_calibration(&mut kv, &prefix, &s.model.result);
                if !s.fallback {
                    triplets.push((out.join("segments").join(label), s.model.clone()));
                }
            }
            if let Some(s) = &segmenter {
                let mut json = serde_json::to_string_pretty(s).expect("segmenter serializes");
                json.push('\n');
                files.push((out.join("segmenter.json"), json.into_bytes()));
            }
            (Deployed::Segmented { cal: seg, segmenter }, labelled)
        }
    };

    let (eval_set, evaluated_on) = if test.is_empty() { (&cal_for_export, "calibration") } else { (&test, "test") };
    let report = report_on(&deployed, eval_set)?;
    kv.put("evaluated_on", evaluated_on);
    kv.0.push_str(&report.to_key_values());

    create_dir(out)?;
    for (dir, m) in &triplets {
        save_triplet(dir, m)?;
    }
    if triplets.is_empty() {
        write(&out.join("f.model"), f.save())?;
    }
    for (path, bytes) in files {
        write(&path, bytes)?;
    }
    save_csv(&exportable(cfg, &cal_for_export)?, out.join("cal.csv"))?;
    if !test.is_empty() {
        save_csv(&exportable(cfg, &test)?, out.join("test.csv"))?;
    }
    write(&out.join("report.txt"), &kv.0)?;
    write(&out.join("report_table.txt"), report.to_table())?;
    Ok(CalibrateOutput { dir: out.to_path_buf(), report })
}

/// The dataset as it would be read back by `load_data`: a segment column is
/// restored as the last feature, other labels are dropped.
fn exportable(cfg: &RunConfig, ds: &Dataset<f64>) -> Res<Dataset<f64>> {
    let column = match &cfg.calibration.segments {
        Some(SegmentSection::Column { column, .. }) => Some(column),
        _ => None,
    };
    let mut names = ds.feature_names().to_vec();
    names.extend(column.cloned());
    let mut samples = Vec::with_capacity(ds.len());
    for s in ds {
        let mut x = s.x.clone();
        if column.is_some() {
            let label = s.segment.as_deref().unwrap_or_default();
            x.push(label.parse().map_err(|_| Failure::data(format!("segment label {label:?} is not numeric")))?);
        }
        samples.push(Sample::new(s.id, x, s.y));
    }
    Ok(Dataset::with_names(ds.name(), names, ds.target_name(), samples)?)
}

fn load_model(path: &Path) -> Res<Regressor<f64>> {
    Ok(Regressor::load(&read(path)?)?)
}

fn load_triplet(dir: &Path, f: &Regressor<f64>) -> Res<CalibratedModel<f64>> {
    let text = String::from_utf8(read(&dir.join("calibration.txt"))?)
        .map_err(|_| Failure::data(format!("{} is not UTF-8", dir.join("calibration.txt").display())))?;
    let result = CalibrationResult::from_text(&text)?;
    let u = load_model(&dir.join("u.model"))?;
    let l = load_model(&dir.join("l.model"))?;
    Ok(CalibratedModel::new(f.clone(), u, l, result)?)
}

fn load_deployed(cfg: &RunConfig, dir: &Path) -> Res<Deployed> {
    let gamma = cfg.confidence()?;
    let f = load_model(&dir.join("f.model"))?;
    let global = if dir.join("calibration.txt").exists() { Some(load_triplet(dir, &f)?) } else { None };
    let seg_dir = dir.join("segments");
    let deployed = if seg_dir.is_dir() || dir.join("segmenter.json").exists() {
        let mut segments = BTreeMap::new();
        if seg_dir.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(&seg_dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
            entries.sort();
            for p in entries {
                let label = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
                let model = load_triplet(&p, &f)?;
                segments.insert(
                    label,
                    edgeuq::calibration::SegmentCalibration { population: model.result.parent_n, model, fallback: false },
                );
            }
        }
        let segmenter = if dir.join("segmenter.json").exists() {
            Some(
                serde_json::from_slice(&read(&dir.join("segmenter.json"))?)
                    .map_err(|e| Failure::data(format!("segmenter.json: {e}")))?,
            )
        } else {
            None
        };
        Deployed::Segmented { cal: SegmentedCalibration { global, segments }, segmenter }
    } else {
        Deployed::Global(global.ok_or_else(|| Failure::data(format!("{} has no calibration.txt", dir.display())))?)
    };
    let stored: Vec<f64> = match &deployed {
        Deployed::Global(m) => vec![m.result.gamma.value()],
        Deployed::Segmented { cal, .. } => cal
            .global
            .iter()
            .map(|m| m.result.gamma.value())
            .chain(cal.segments.values().map(|s| s.model.result.gamma.value()))
            .collect(),
    };
    if let Some(&g) = stored.iter().find(|&&g| g != gamma.value()) {
        return Err(Failure::config(format!(
            "calibration.gamma: {} does not match the stored calibration ({g})",
            gamma.value()
        )));
    }
    Ok(deployed)
}

/// Intervals from a calibrated model directory evaluated on `data`.
pub fn cmd_eval(cfg: &RunConfig, model_dir: &Path, data: &Path, out: &Path) -> Res<IntervalReport> {
    let deployed = load_deployed(cfg, model_dir)?;
    let ds = load_data(cfg, data)?;
    let report = report_on(&deployed, &ds)?;
    let mut kv = KeyValues::default();
    kv.put("command", "eval");
    kv.put("gamma", cfg.confidence()?.value());
    kv.put("data_rows", ds.len());
    kv.0.push_str(&report.to_key_values());
    create_dir(out)?;
    write(&out.join("eval_report.txt"), &kv.0)?;
    write(&out.join("eval_table.txt"), report.to_table())?;
    Ok(report)
}

/// Writes the configured number of stream samples to `stream.csv`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Res<PathBuf> {
    let scenario = cfg.scenario()?;
    let samples = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| Failure::config("simulate: section is required for this command"))?
        .samples;
    let mut stream = make_stream(scenario)?;
    let ds = if samples == 0 {
        Dataset::<f64>::new("stream", scenario.dim, Vec::new())?
    } else {
        stream.next_batch::<f64>(samples)?.samples
    };
    let mut csv = Vec::new();
    write_csv(&ds, &mut csv)?;

    let mut kv = KeyValues::default();
    kv.put("command", "simulate");
    kv.put("samples", samples);
    kv.put("scenario_fingerprint", scenario.fingerprint());
    kv.put("csv_sha256", seed::digest(&csv));
    let table = format!(
        "samples   {samples}\nkind      {:?}\nbase      {:?}\nonset     {}\nmagnitude {}\n",
        scenario.kind, scenario.base, scenario.onset, scenario.magnitude
    );
    create_dir(out)?;
    let path = out.join("stream.csv");
    write(&path, csv)?;
    write(&out.join("report.txt"), &kv.0)?;
    write(&out.join("report_table.txt"), table)?;
    Ok(path)
}

fn summary_key_values(s: &LoopSummary) -> KeyValues {
    let mut kv = KeyValues::default();
    kv.put("command", "loop");
    kv.put("versions", s.versions);
    kv.put("windows", s.windows);
    kv.put("breaches", s.breaches);
    kv.put("redeploys", s.redeploys);
    kv.put("failures", s.failures);
    kv.put("final_picp", s.final_picp);
    kv.put("stream_end", s.stream_end);
    kv
}

/// Runs the adaptation loop and persists everything `replay` needs.
pub fn cmd_loop(cfg: &RunConfig, out: &Path) -> Res<LoopSummary> {
    probe_writable(out)?;
    let (scenario, initial, loop_cfg) = cfg.loop_setup()?;
    let outcome = run_loop::<f64>(&scenario, initial, &loop_cfg)?;
    persist_run(out, &outcome)?;
    let summary = outcome.manifest.summary.clone();
    let mut kv = summary_key_values(&summary);
    kv.put("run_fingerprint", &outcome.manifest.run_fingerprint);
    kv.put("events_fingerprint", &outcome.manifest.events_fingerprint);
    kv.put("registry_fingerprint", &outcome.manifest.registry_fingerprint);
    write(&out.join("report.txt"), &kv.0)?;
    let mut table = summary.to_table();
    for v in &outcome.manifest.versions {
        let parent = v.parent.map_or_else(|| "-".to_owned(), |p| p.to_string());
        writeln!(table, "v{:<3} parent {:<3} deployed at {}", v.version, parent, v.deployed_at).unwrap();
    }
    write(&out.join("report_table.txt"), table)?;
    Ok(summary)
}

/// Reruns a persisted run from its manifest and checks the outputs byte for byte.
pub fn cmd_replay(run_dir: &Path) -> Res<LoopSummary> {
    let (manifest, _) = load_run::<f64>(run_dir)?;
    let outcome = replay::<f64>(&manifest)?;
    let stored_manifest = read(&run_dir.join("manifest.json"))?;
    let stored_events = read(&run_dir.join("events.jsonl"))?;
    if outcome.manifest.to_json().as_bytes() != stored_manifest.as_slice() {
        return Err(Failure::data("replayed manifest differs from manifest.json"));
    }
    if events_to_jsonl(&outcome.events).as_bytes() != stored_events.as_slice() {
        return Err(Failure::data("replayed event log differs from events.jsonl"));
    }
    Ok(outcome.manifest.summary)
}
