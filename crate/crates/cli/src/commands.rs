use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, ensure, Context, Result};
use isingml::pipeline::{
    cross_validate, fraction_sweep, run_benchmark, train_method, Classifier, HyperParam, Method,
    Preprocessing, ReductionSpec, RunReport,
};
use isingml::seed::{derive_seed, stream};
use isingml::solvers::{exhaustive_solve_top, SolveResult};
use isingml::stats::{bonferroni, wilcoxon_signed_rank, PairedSample, WilcoxonResult};
use isingml::{
    ensemble_average, field_solve, random_search, simulated_anneal, AnnealSchedule, IsingProblem,
    LabeledDataset, Metric, MetricSet, SyntheticSpec,
};
use serde::{Deserialize, Serialize};

use crate::config::{parse_fractions, parse_methods, sha256_hex, RunConfig};
use crate::{EvaluateArgs, RunArgs, SolveArgs, SolverKind, StatsArgs, SynthArgs, SynthKind, TrainArgs};

/// File defaults, overridden by flags and environment variables.
fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &args.data {
        c.dataset = Some(d.clone());
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(m) = &args.methods {
        c.methods = parse_methods(m)?;
    }
    match (args.pca_k, args.pc1_features) {
        (Some(0), _) => c.reduction = ReductionSpec::None,
        (Some(k), _) => c.reduction = ReductionSpec::Pca { k },
        (None, Some(n)) => c.reduction = ReductionSpec::Pc1Features { n },
        (None, None) => {}
    }
    if let Some(n) = args.splits {
        c.n_splits = n;
    }
    if let Some(f) = &args.fractions {
        c.fractions = parse_fractions(f)?;
    }
    if let Some(o) = &args.out_dir {
        c.out_dir = o.clone();
    }
    if args.threads.is_some() {
        c.threads = args.threads;
    }
    Ok(c)
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        ensure!(n > 0, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn load_dataset(path: &Path) -> Result<(LabeledDataset, String)> {
    let bytes = fs::read(path).with_context(|| format!("reading dataset {}", path.display()))?;
    let data = LabeledDataset::read_csv(bytes.as_slice()).with_context(|| format!("parsing dataset {}", path.display()))?;
    Ok((data, sha256_hex(&bytes)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Configuration recorded in reports: everything that can change a result.
/// Output location and thread count are left out.
fn snapshot(c: &RunConfig, dataset_sha256: &str) -> Result<serde_json::Value> {
    let mut run = serde_json::to_value(c)?;
    if let Some(obj) = run.as_object_mut() {
        obj.remove("out_dir");
        obj.remove("threads");
    }
    Ok(serde_json::json!({ "run_config": run, "dataset_sha256": dataset_sha256 }))
}

fn write_report(mut report: RunReport, c: &RunConfig, dataset_sha256: &str, prefix: &str) -> Result<()> {
    report.config_snapshot = snapshot(c, dataset_sha256)?;
    let digest = sha256_hex(serde_json::to_string(&report.config_snapshot)?.as_bytes());
    fs::create_dir_all(&c.out_dir).with_context(|| format!("creating {}", c.out_dir.display()))?;
    let provenance = [("master_seed", report.master_seed.to_string()), ("config_digest", digest)];

    let report_path = c.out_dir.join(format!("{prefix}_report.json"));
    fs::write(&report_path, report.to_json_pretty()?).with_context(|| format!("writing {}", report_path.display()))?;
    let metrics_path = c.out_dir.join(format!("{prefix}_metrics.csv"));
    report.write_metrics_csv(
        BufWriter::new(File::create(&metrics_path).with_context(|| format!("creating {}", metrics_path.display()))?),
        &provenance,
    )?;
    let agg_path = c.out_dir.join(format!("{prefix}_aggregate.csv"));
    report.write_aggregate_csv(
        BufWriter::new(File::create(&agg_path).with_context(|| format!("creating {}", agg_path.display()))?),
        &provenance,
    )?;
    for row in &report.aggregate {
        let fraction = row.fraction.map(|f| format!("fraction {f} ")).unwrap_or_default();
        eprintln!(
            "{fraction}{:<10} balanced accuracy {:.4} ± {:.4}  (n = {})",
            row.method.name(),
            row.balanced_accuracy.mean,
            row.balanced_accuracy.sem,
            row.n_splits
        );
    }
    eprintln!("wrote {}", report_path.display());
    Ok(())
}

pub fn benchmark(args: &RunArgs) -> Result<()> {
    let c = resolve(args)?;
    init_threads(c.threads)?;
    let (data, sha) = load_dataset(c.dataset_path()?)?;
    let report = run_benchmark(&data, &c.benchmark())?;
    write_report(report, &c, &sha, "benchmark")
}

pub fn sweep(args: &RunArgs) -> Result<()> {
    let c = resolve(args)?;
    init_threads(c.threads)?;
    let (data, sha) = load_dataset(c.dataset_path()?)?;
    let report = fraction_sweep(&data, &c.benchmark(), &c.fractions)?;
    write_report(report, &c, &sha, "sweep")
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            if p.extension().is_some_and(|e| e == "toml") {
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            } else {
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
        }
        None => match args.kind {
            SynthKind::Shift => SyntheticSpec::two_class_shift(args.features, args.delta, args.n_per_class)?,
            SynthKind::Axis => SyntheticSpec::two_class_axis(args.features, args.delta, args.n_per_class)?,
            SynthKind::Axes => {
                SyntheticSpec::multiclass_axes(args.classes, args.features, args.delta, args.n_per_class)?
            }
        },
    };
    let data = spec.generate(args.seed)?;
    data.write_csv_path(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "wrote {} samples, {} features, {} classes to {}",
        data.n_samples(),
        data.n_features(),
        data.n_classes(),
        args.out.display()
    );
    Ok(())
}

/// Saved output of `train`.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    method: Method,
    hyperparameter: HyperParam,
    cv_scores: Vec<f64>,
    seed: u64,
    dataset_sha256: String,
    class_names: Vec<String>,
    feature_names: Vec<String>,
    classifier: Classifier,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let c = resolve(&args.run)?;
    init_threads(c.threads)?;
    let method: Method = args.method.parse()?;
    let (data, sha) = load_dataset(c.dataset_path()?)?;
    let pre = Preprocessing::fit(&data, &c.reduction)?;
    let input = pre.apply(&data)?;
    let grid = c.settings.grid(method);
    let cv = cross_validate(
        &input,
        method,
        &grid,
        &c.settings,
        c.folds,
        derive_seed(c.seed, stream::CV, method.id()),
    )?;
    let mut classifier = train_method(
        method,
        &input,
        &cv.best,
        &c.settings,
        derive_seed(c.seed, stream::SOLVER, method.id()),
    )?;
    let train_metrics = classifier.evaluate(&input)?;
    classifier.set_preprocessing(Some(pre));
    let file = ModelFile {
        method,
        hyperparameter: cv.best,
        cv_scores: cv.scores,
        seed: c.seed,
        dataset_sha256: sha,
        class_names: data.class_names().to_vec(),
        feature_names: data.feature_names().to_vec(),
        classifier,
    };
    write_json(&args.out, &file)?;
    eprintln!(
        "{method} ({}) training balanced accuracy {:.4}; wrote {}",
        file.hyperparameter,
        train_metrics.balanced_accuracy,
        args.out.display()
    );
    Ok(())
}

/// Re-expresses `data`'s labels in the model's class order.
fn align_classes(data: &LabeledDataset, model: &ModelFile) -> Result<LabeledDataset> {
    ensure!(
        data.n_features() == model.feature_names.len(),
        "dataset has {} features, model expects {}",
        data.n_features(),
        model.feature_names.len()
    );
    let labels = data
        .labels()
        .iter()
        .map(|&y| {
            let name = &data.class_names()[y];
            model
                .class_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| anyhow!("label `{name}` is not a class of the model"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset::new(
        data.features().clone(),
        labels,
        model.class_names.len(),
        data.feature_names().to_vec(),
        data.sample_ids().to_vec(),
        model.class_names.clone(),
    )?)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let model: ModelFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.model.display()))?;
    let (raw, _) = load_dataset(&args.data)?;
    let data = align_classes(&raw, &model)?;
    let metrics: MetricSet = model.classifier.evaluate_raw(&data)?;
    let json = serde_json::to_string_pretty(&metrics)?;
    println!("{json}");
    if let Some(out) = &args.out {
        write_json(out, &metrics)?;
    }
    if let Some(path) = &args.predictions {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        let mut header = vec!["sample_id".to_string(), "label".into(), "predicted".into()];
        header.extend(model.class_names.iter().map(|c| format!("p_{c}")));
        w.write_record(&header)?;
        for i in 0..data.n_samples() {
            let x: Vec<f64> = data.features().row(i).iter().copied().collect();
            let p = model.classifier.predict_proba_raw(&x)?;
            let pred = isingml::eval::argmax(&p);
            let mut row = vec![
                data.sample_ids()[i].clone(),
                model.class_names[data.labels()[i]].clone(),
                model.class_names[pred].clone(),
            ];
            row.extend(p.iter().map(|v| format!("{v:?}")));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct StatsOutput {
    a: String,
    b: String,
    n_pairs: usize,
    #[serde(flatten)]
    result: WilcoxonResult,
    family_size: usize,
    p_adjusted: f64,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow!("column `{name}` not found"))
}

fn parse_cell(record: &csv::StringRecord, idx: usize, row: usize) -> Result<f64> {
    let cell = record.get(idx).unwrap_or("");
    cell.trim()
        .parse()
        .with_context(|| format!("row {row}: `{cell}` is not a number"))
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let mut reader = csv::Reader::from_reader(BufReader::new(
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?,
    ));
    let headers = reader.headers()?.clone();
    let (a_name, b_name, a, b) = if let Some(cols) = &args.columns {
        let (ia, ib) = (column(&headers, &cols[0])?, column(&headers, &cols[1])?);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (r, rec) in reader.records().enumerate() {
            let rec = rec?;
            a.push(parse_cell(&rec, ia, r + 2)?);
            b.push(parse_cell(&rec, ib, r + 2)?);
        }
        (cols[0].clone(), cols[1].clone(), a, b)
    } else {
        let metric = Metric::parse(&args.metric).ok_or_else(|| anyhow!("unknown metric `{}`", args.metric))?;
        let methods = parse_methods(args.methods.as_deref().ok_or_else(|| anyhow!("--methods a,b or --columns A B is required"))?)?;
        ensure!(methods.len() == 2, "--methods needs exactly two methods");
        let (i_method, i_split, i_frac) = (
            column(&headers, "method")?,
            column(&headers, "split_id")?,
            column(&headers, "fraction")?,
        );
        let i_value = column(&headers, &format!("test_{}", metric.name()))?;
        let mut by_split: [BTreeMap<(String, u64), f64>; 2] = Default::default();
        for (r, rec) in reader.records().enumerate() {
            let rec = rec?;
            let frac = rec.get(i_frac).unwrap_or("").to_string();
            if let Some(want) = args.fraction {
                if frac.parse::<f64>().ok() != Some(want) {
                    continue;
                }
            }
            let method = rec.get(i_method).unwrap_or("");
            let Some(slot) = methods.iter().position(|m| m.name() == method) else {
                continue;
            };
            let split: u64 = rec
                .get(i_split)
                .unwrap_or("")
                .parse()
                .with_context(|| format!("row {}: bad split_id", r + 2))?;
            by_split[slot].insert((frac, split), parse_cell(&rec, i_value, r + 2)?);
        }
        let keys: Vec<&(String, u64)> = by_split[0].keys().filter(|k| by_split[1].contains_key(k)).collect();
        ensure!(
            keys.len() == by_split[0].len() && keys.len() == by_split[1].len(),
            "methods do not cover the same splits; pass --fraction for sweep files"
        );
        let a = keys.iter().map(|k| by_split[0][*k]).collect();
        let b = keys.iter().map(|k| by_split[1][*k]).collect();
        (methods[0].name().to_string(), methods[1].name().to_string(), a, b)
    };
    ensure!(!a.is_empty(), "no paired values found");
    let n_pairs = a.len();
    let pair = PairedSample::new(a, b)?;
    let result = wilcoxon_signed_rank(&pair);
    let p_adjusted = bonferroni(&[result.p_value], args.m)?[0];
    let out = StatsOutput {
        a: a_name,
        b: b_name,
        n_pairs,
        result,
        family_size: args.m,
        p_adjusted,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

#[derive(Serialize)]
struct ConfigOut {
    spins: Vec<i8>,
    energy: f64,
}

#[derive(Serialize)]
struct SolveOutput {
    solver: &'static str,
    n_spins: usize,
    seed: u64,
    best_energy: f64,
    configurations: Vec<ConfigOut>,
    /// Greedy average of the reported configurations.
    ensemble_weights: Vec<f64>,
    ensemble_energy: f64,
}

pub fn solve(args: &SolveArgs) -> Result<()> {
    init_threads(args.threads)?;
    let file = File::open(&args.problem).with_context(|| format!("opening {}", args.problem.display()))?;
    let problem = IsingProblem::read_text(BufReader::new(file)).with_context(|| format!("parsing {}", args.problem.display()))?;
    ensure!(args.top >= 1, "--top must be at least 1");
    let (name, result): (&str, SolveResult) = match args.solver {
        SolverKind::Sa => {
            let schedule = AnnealSchedule::new(args.sweeps, args.beta_initial, args.beta_final)?;
            ("sa", simulated_anneal(&problem, &schedule, args.restarts, args.seed)?)
        }
        SolverKind::Random => ("random", random_search(&problem, args.samples, args.seed)?),
        SolverKind::Exhaustive => ("exhaustive", exhaustive_solve_top(&problem, args.top)?),
        SolverKind::Field => {
            let c = field_solve(&problem);
            let energy = problem.energy(c.spins())?;
            let out = SolveOutput {
                solver: "field",
                n_spins: problem.n_spins(),
                seed: args.seed,
                best_energy: energy,
                ensemble_weights: c.to_real(),
                ensemble_energy: energy,
                configurations: vec![ConfigOut {
                    spins: c.spins().to_vec(),
                    energy,
                }],
            };
            return emit(&out, args.out.as_deref());
        }
    };
    let weights = ensemble_average(&problem, &result, args.top)?;
    let configurations = result
        .configurations
        .iter()
        .take(args.top)
        .map(|c| -> Result<ConfigOut> {
            Ok(ConfigOut {
                spins: c.spins().to_vec(),
                energy: match c.energy() {
                    Some(e) => e,
                    None => problem.energy(c.spins())?,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = SolveOutput {
        solver: name,
        n_spins: problem.n_spins(),
        seed: args.seed,
        best_energy: configurations.first().map(|c| c.energy).ok_or_else(|| anyhow!("solver returned nothing"))?,
        ensemble_energy: problem.energy_real(&weights)?,
        ensemble_weights: weights,
        configurations,
    };
    emit(&out, args.out.as_deref())
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
            Ok(())
        }
    }
}
