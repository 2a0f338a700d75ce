use std::fs::File;

use ratio_cpd::benchmark::write_benchmark_csv;
use ratio_cpd::datasets::{label_series, load_csv, load_labels, write_csv, write_labels, SyntheticSpec};
use ratio_cpd::evaluation::roc_auc_exact;
use ratio_cpd::{align, detect_with, threshold_alarms, BenchmarkPlan, DetectorConfig, Execution};

use crate::args::{BenchPreset, BenchmarkArgs, Command, DetectArgs, EvaluateArgs, GenerateArgs, PlotArgs, Preset};
use crate::manifest::{sidecar, RunManifest, Source};
use crate::output::{io_result, write_atomic, Classify, CliResult, Failure};
use crate::plot;
use crate::scores::{read_scores, write_scores};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Detect(a) => detect(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::ExportPlot(a) => export_plot(a),
    }
}

/// Runs `f` on a pool of `jobs` threads; one job means sequential execution.
fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce(Execution) -> T + Send) -> CliResult<T> {
    match jobs {
        Some(0) => Err(Failure::usage("--jobs must be at least 1")),
        Some(1) => Ok(f(Execution::Sequential)),
        #[cfg(feature = "parallel")]
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Failure::new(crate::output::Exit::Runtime, e))?;
            Ok(pool.install(|| f(Execution::Parallel)))
        }
        #[cfg(feature = "parallel")]
        None => Ok(f(Execution::Parallel)),
        #[cfg(not(feature = "parallel"))]
        _ => Ok(f(Execution::Sequential)),
    }
}

fn generate(args: GenerateArgs) -> CliResult<()> {
    let (dataset, seed, series_path, labels_path) = match &args.from_manifest {
        Some(path) => {
            let m = RunManifest::load_for(path, "generate")?;
            let Source::Generator { dataset, seed } = m.source else {
                return Err(Failure::data("generate manifest has no generator source"));
            };
            let series = args.out_series.clone().unwrap_or(m.output(0)?.to_path_buf());
            let labels = args.out_labels.clone().unwrap_or(m.output(1)?.to_path_buf());
            (dataset, seed, series, labels)
        }
        None => (
            args.dataset.expect("required by clap"),
            args.seed,
            args.out_series.expect("required by clap"),
            args.out_labels.expect("required by clap"),
        ),
    };
    let ls = SyntheticSpec::new(dataset, seed).generate();
    write_atomic(&series_path, |w| io_result(write_csv(&ls.series, w)))?;
    write_atomic(&labels_path, |w| io_result(write_labels(&ls.change_points, w)))?;
    let manifest = RunManifest::new(
        "generate",
        Source::Generator { dataset, seed },
        None,
        vec![series_path.clone(), labels_path.clone()],
    );
    manifest.save_beside(&series_path)?;
    eprintln!(
        "dataset {dataset}: {} x {} series -> {}, {} change points -> {}",
        ls.series.len(),
        ls.series.dim(),
        series_path.display(),
        ls.change_points.len(),
        labels_path.display()
    );
    Ok(())
}

fn config_from_flags(args: &DetectArgs) -> CliResult<DetectorConfig> {
    let n = args.n.unwrap_or(match args.preset {
        Some(Preset::ShortGap) => 200,
        None => 500,
    });
    let base = DetectorConfig::new(args.estimator);
    let config = DetectorConfig {
        k: args.k,
        n,
        m: args.m,
        dt: args.dt,
        score: args.score.map_or(base.score, Into::into),
        seed: args.seed,
        threshold: args.threshold,
        scaling: args.scaling.into(),
        ..base
    };
    config.validate().cpd("invalid detector settings")?;
    Ok(config)
}

fn detect(args: DetectArgs) -> CliResult<()> {
    let (input, header, config, out) = match &args.from_manifest {
        Some(path) => {
            let m = RunManifest::load_for(path, "detect")?;
            let Source::Series { path: input, header } = m.source.clone() else {
                return Err(Failure::data("detect manifest has no series source"));
            };
            let config = m
                .detector
                .clone()
                .ok_or_else(|| Failure::data("detect manifest has no detector settings"))?;
            let out = args.out.clone().unwrap_or(m.output(0)?.to_path_buf());
            (input, header, config, out)
        }
        None => (
            args.input.clone().expect("required by clap"),
            args.header,
            config_from_flags(&args)?,
            args.out.clone().expect("required by clap"),
        ),
    };
    let series = load_csv(&input, header).input(format!("cannot load series {}", input.display()))?;
    let scores = with_jobs(args.jobs.jobs, |exec| detect_with(&series, &config, exec))?
        .cpd(format!("detection on {} failed", input.display()))?;

    write_atomic(&out, |w| write_scores(&scores, w))?;
    let manifest = RunManifest::new(
        "detect",
        Source::Series { path: input, header },
        Some(config.clone()),
        vec![out.clone()],
    );
    manifest.save_beside(&out)?;
    eprintln!(
        "{} scores ({} / {}) from t = {} -> {}",
        scores.len(),
        config.estimator,
        config.score.name(),
        config.first_time(),
        out.display()
    );
    if let Some(mu) = config.threshold {
        let alarms = threshold_alarms(&scores, mu);
        for t in alarms.detections {
            println!("{t}");
        }
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let file = File::open(&args.scores).input(format!("cannot open scores {}", args.scores.display()))?;
    let scores = read_scores(file, &args.scores.display().to_string())?;
    let scores_manifest = sidecar(&args.scores);
    let detector = if scores_manifest.exists() {
        RunManifest::load(&scores_manifest)?.detector
    } else {
        None
    };
    let n = args
        .n
        .or(detector.as_ref().map(|d| d.n))
        .unwrap_or(DetectorConfig::default().n);
    let change_points = load_labels(&args.labels).input(format!("cannot load labels {}", args.labels.display()))?;

    let last_t = scores.entries.last().map_or(0, |e| e.0);
    let len = last_t.max(change_points.last().copied().unwrap_or(0)) + 1;
    let labels = label_series(len, &change_points, n).cpd("cannot build labels")?;
    let run = align(&scores, &labels).input("scores and labels disagree")?;
    let auc = roc_auc_exact(&run.scores, &run.labels).input(format!("cannot score {}", args.scores.display()))?;

    let field = |f: &dyn Fn(&DetectorConfig) -> String| detector.as_ref().map(f).unwrap_or_default();
    let dt = field(&|d| d.dt.to_string());
    let seed = field(&|d| d.seed.to_string());
    let estimator = field(&|d| d.estimator.to_string());
    let score = field(&|d| d.score.name().to_string());
    write_atomic(&args.out, |w| {
        writeln!(
            w,
            "scores,labels,estimator,score,n,dt,seed,evaluated,positives,negatives,auc"
        )?;
        writeln!(
            w,
            "{},{},{estimator},{score},{n},{dt},{seed},{},{},{},{:.6}",
            args.scores.display(),
            args.labels.display(),
            run.scores.len(),
            auc.positives,
            auc.negatives,
            auc.value()
        )
    })?;
    let mut config = detector;
    if let Some(c) = config.as_mut() {
        c.n = n;
    }
    let manifest = RunManifest::new(
        "evaluate",
        Source::Scores {
            scores: args.scores.clone(),
            labels: args.labels.clone(),
        },
        config,
        vec![args.out.clone()],
    );
    manifest.save_beside(&args.out)?;
    println!("{:.6}", auc.value());
    Ok(())
}

fn plan_from_flags(args: &BenchmarkArgs) -> CliResult<BenchmarkPlan> {
    let mut plan = match args.preset {
        BenchPreset::Desk => BenchmarkPlan::desk(args.seed),
        BenchPreset::Paper => BenchmarkPlan::full(args.seed),
    };
    if !args.datasets.is_empty() {
        plan.datasets = dedup(&args.datasets);
    }
    if !args.estimators.is_empty() {
        plan.estimators = dedup(&args.estimators);
    }
    if let Some(r) = args.runs {
        plan.runs = r;
    }
    if let Some(dt) = args.dt {
        plan.dt = dt;
    }
    if plan.runs == 0 || plan.dt == 0 {
        return Err(Failure::usage("--runs and --dt must be at least 1"));
    }
    Ok(plan)
}

fn dedup<T: PartialEq + Copy>(items: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    for &x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn benchmark(args: BenchmarkArgs) -> CliResult<()> {
    let (plan, out) = match &args.from_manifest {
        Some(path) => {
            let m = RunManifest::load_for(path, "benchmark")?;
            let Source::Benchmark { plan } = m.source.clone() else {
                return Err(Failure::data("benchmark manifest has no plan"));
            };
            let out = args.out.clone().unwrap_or(m.output(0)?.to_path_buf());
            (*plan, out)
        }
        None => (plan_from_flags(&args)?, args.out.clone().expect("required by clap")),
    };
    eprintln!(
        "benchmark: {} datasets x {} estimators x {} runs, dt = {}",
        plan.datasets.len(),
        plan.estimators.len(),
        plan.runs,
        plan.dt
    );
    let rows = with_jobs(args.jobs.jobs, |exec| ratio_cpd::run_benchmark(&plan, exec))?.cpd("benchmark failed")?;
    write_atomic(&out, |w| io_result(write_benchmark_csv(&rows, w)))?;
    let manifest = RunManifest::new(
        "benchmark",
        Source::Benchmark { plan: Box::new(plan) },
        None,
        vec![out.clone()],
    );
    manifest.save_beside(&out)?;
    for r in &rows {
        println!(
            "{:<16} dataset {}  {:.3} +- {:.3}",
            r.algorithm, r.dataset, r.mean_auc, r.stderr
        );
    }
    Ok(())
}

fn export_plot(args: PlotArgs) -> CliResult<()> {
    let series = load_csv(&args.series, args.header).input(format!("cannot load series {}", args.series.display()))?;
    let file = File::open(&args.scores).input(format!("cannot open scores {}", args.scores.display()))?;
    let scores = read_scores(file, &args.scores.display().to_string())?;
    let change_points = match &args.labels {
        Some(p) => load_labels(p).input(format!("cannot load labels {}", p.display()))?,
        None => Vec::new(),
    };
    let svg = plot::render(&series, &scores, &change_points);
    write_atomic(&args.out, |w| w.write_all(svg.as_bytes()))?;
    eprintln!("plot -> {}", args.out.display());
    Ok(())
}
