use std::fmt::Write as _;
use std::path::Path;

use seed_core::estimator::{mu_path, theta_path};
use seed_core::netinfer::{evaluate_graph, fit_var, VarSpec};
use seed_core::selection::{hard_threshold, logspace, tune_thresholds_cv, ThresholdRule};
use seed_core::simgen::{
    normalized_estimation_error, replication_data, run_replications, MetricSummary,
    ReplicationSummary,
};
use seed_core::{fit, par, predict};
use serde_json::json;

use crate::args::{
    BenchmarkArgs, FitArgs, FormatArg, InferArgs, PredictArgs, SimKind, SimulateArgs, SweepArg,
};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{fmt_num, read_adjacency, read_matrix, write_atomic, write_json, write_matrix};
use crate::model_file::{ModelFile, NetworkRecord};

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(&args.common)?;
    let out = cfg.output_dir(&args.common);
    match args.kind {
        SimKind::Regression => {
            cfg.apply_sim(&args.sim);
            let spec = &cfg.sim;
            spec.validate()?;
            let (truth, train, test) = replication_data(spec, 0)?;
            write_matrix(&out.join("X.csv"), train.x.as_array())?;
            write_matrix(&out.join("Y.csv"), train.y.as_array())?;
            write_matrix(&out.join("C_true.csv"), truth.c.as_array())?;
            write_matrix(&out.join("X_test.csv"), test.x.as_array())?;
            write_matrix(&out.join("Y_test.csv"), test.y.as_array())?;
            write_json(
                &out.join("truth.json"),
                &json!({
                    "schema_version": 1,
                    "kind": "regression",
                    "rank": truth.rank,
                    "singular_values": truth.singular_values,
                    "u_supports": truth.u_supports,
                    "v_supports": truth.v_supports,
                    "block": {
                        "layout": "leading rows and columns",
                        "rows": spec.block_shape().0,
                        "cols": spec.block_shape().1,
                    },
                    "seed": spec.seed,
                    "stream": 0,
                    "generator": spec,
                }),
            )?;
            println!(
                "wrote X.csv ({}x{}), Y.csv ({}x{}), C_true.csv, X_test.csv, Y_test.csv, truth.json to {}",
                train.x.rows(),
                train.x.cols(),
                train.y.rows(),
                train.y.cols(),
                out.display()
            );
        }
        SimKind::Network => {
            cfg.apply_network_sim(&args.network, &args.sim);
            let sim = &cfg.network_sim;
            sim.validate()?;
            let truth = sim.generate(0)?;
            let reference = truth.reference.mapv(|b| if b { 1.0 } else { 0.0 });
            write_matrix(&out.join("series.csv"), truth.series.as_array())?;
            write_matrix(&out.join("reference.csv"), &reference)?;
            let lag_matrices: Vec<Vec<Vec<f64>>> = truth
                .lag_matrices
                .iter()
                .map(|a| a.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect();
            write_json(
                &out.join("truth.json"),
                &json!({
                    "schema_version": 1,
                    "kind": "network",
                    "nodes": sim.nodes,
                    "lags": sim.lags,
                    "edges": truth.reference.iter().filter(|b| **b).count(),
                    "lag_matrices": lag_matrices,
                    "seed": sim.seed,
                    "generator": sim,
                }),
            )?;
            println!(
                "wrote series.csv ({}x{}), reference.csv, truth.json to {}",
                truth.series.rows(),
                truth.series.cols(),
                out.display()
            );
        }
    }
    Ok(())
}

pub fn fit_cmd(args: &FitArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(&args.common)?;
    cfg.apply_model(&args.model);
    let out = cfg.output_dir(&args.common);
    let x = read_matrix(&args.x)?;
    let y = read_matrix(&args.y)?;
    if x.rows() != y.rows() {
        return Err(CliError::input(format!(
            "X has {} rows but Y has {}",
            x.rows(),
            y.rows()
        )));
    }
    cfg.model.validate(x.rows(), x.cols(), y.cols())?;
    let truth = args.truth.as_deref().map(read_matrix).transpose()?;
    let mut model = fit(&x, &y, &cfg.model)?;
    if let Some(folds) = args.cv_folds {
        let grid = logspace(-3.0, -0.5, 6);
        let tuning = tune_thresholds_cv(&x, &y, &cfg.model, &grid, &grid, folds)?;
        apply_thresholds(&mut model, tuning.theta_u, tuning.theta_v)?;
        let mut body = String::from("theta_u,theta_v,cv_error\n");
        for (tu, tv, e) in &tuning.scores {
            let _ = writeln!(body, "{},{},{}", fmt_num(*tu), fmt_num(*tv), fmt_num(*e));
        }
        write_atomic(&out.join("cv_scores.csv"), body.as_bytes())?;
        println!(
            "cv theta_u {} theta_v {}",
            fmt_num(tuning.theta_u),
            fmt_num(tuning.theta_v)
        );
    }
    write_json(&out.join("model.json"), &ModelFile::from_model(&model, None))?;
    write_matrix(&out.join("C_hat.csv"), model.coefficient.as_array())?;
    println!("rank {} ({} factors extracted)", model.rank, model.extracted());
    if let Some(c_true) = truth {
        let err = normalized_estimation_error(&model.coefficient, &c_true)?;
        println!("estimation error {}", fmt_num(err));
    }
    Ok(())
}

/// Hard-thresholds every reported factor; `theta_v` is relative to the largest right-vector entry.
fn apply_thresholds(model: &mut seed_core::SeedModel, theta_u: f64, theta_v: f64) -> CliResult<()> {
    let vmax = model
        .factors
        .iter()
        .flat_map(|f| f.v.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut c = ndarray::Array2::<f64>::zeros(model.coefficient.dim());
    for f in &mut model.factors {
        f.u = hard_threshold(f.u.view(), ThresholdRule { theta: theta_u });
        f.v = hard_threshold(f.v.view(), ThresholdRule { theta: theta_v * vmax });
        c += &f.outer();
    }
    model.coefficient = seed_core::Matrix::from_array(c)?;
    Ok(())
}

pub fn predict_cmd(args: &PredictArgs) -> CliResult<()> {
    let cfg = RunConfig::load(&args.common)?;
    let out = cfg.output_dir(&args.common);
    let model = ModelFile::read(&args.model)?.to_model()?;
    let x = read_matrix(&args.x)?;
    let yhat = predict(&model, &x)?;
    let path = out.join(&args.output);
    write_matrix(&path, yhat.as_array())?;
    println!("wrote {} ({}x{})", path.display(), yhat.rows(), yhat.cols());
    Ok(())
}

fn thread_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    builder
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))
}

pub fn benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(&args.common)?;
    cfg.apply_sim(&args.sim);
    cfg.apply_model(&args.model);
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if args.jobs.is_some() {
        cfg.jobs = args.jobs;
    }
    if args.baseline {
        cfg.baseline = true;
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    if cfg.reps == 0 {
        return Err(CliError::usage("--reps must be at least 1"));
    }
    cfg.sim.validate()?;
    cfg.model.validate(cfg.sim.n, cfg.sim.p, cfg.sim.q)?;
    let out = cfg.output_dir(&args.common);
    let pool = thread_pool(cfg.jobs)?;
    match args.sweep {
        None => {
            let summary = pool.install(|| run_replications(&cfg.sim, &cfg.model, cfg.reps, cfg.baseline))?;
            write_benchmark(&out, &summary, cfg.format)?;
            report_benchmark(&summary, cfg.reps)
        }
        Some(SweepArg::Mu) => {
            let grid = args.grid.clone().unwrap_or_else(|| logspace(-5.0, -1.0, 5));
            let rows = pool.install(|| sweep_mu(&cfg, &grid))?;
            write_atomic(&out.join("mu_path.csv"), rows.0.as_bytes())?;
            write_atomic(&out.join("mu_summary.csv"), rows.1.as_bytes())?;
            print!("{}", rows.1);
            Ok(())
        }
        Some(SweepArg::Theta) => {
            let grid = args
                .grid
                .clone()
                .unwrap_or_else(|| logspace(-1.0, 20f64.log10(), 10));
            let rows = pool.install(|| sweep_theta(&cfg, &grid))?;
            write_atomic(&out.join("theta_path.csv"), rows.0.as_bytes())?;
            write_atomic(&out.join("theta_summary.csv"), rows.1.as_bytes())?;
            print!("{}", rows.1);
            Ok(())
        }
    }
}

fn summary_csv(metrics: &[(String, MetricSummary)]) -> String {
    let mut s = String::from("metric,mean,stderr\n");
    for (name, m) in metrics {
        let _ = writeln!(s, "{name},{},{}", fmt_num(m.mean), fmt_num(m.stderr));
    }
    s
}

fn write_benchmark(out: &Path, summary: &ReplicationSummary, format: FormatArg) -> CliResult<()> {
    write_atomic(&out.join("summary.csv"), summary_csv(&summary.seed_metrics).as_bytes())?;
    if !summary.baseline_metrics.is_empty() {
        write_atomic(
            &out.join("baseline_summary.csv"),
            summary_csv(&summary.baseline_metrics).as_bytes(),
        )?;
    }
    match format {
        FormatArg::JsonLines => {
            let mut s = String::new();
            for o in &summary.outcomes {
                let line = json!({
                    "index": o.index,
                    "seed": o.seed,
                    "stream": o.stream,
                    "selected_rank": o.selected_rank,
                    "metrics": o.metrics,
                    "baseline": o.baseline,
                    "error": o.error,
                });
                s.push_str(&serde_json::to_string(&line)?);
                s.push('\n');
            }
            write_atomic(&out.join("detail.jsonl"), s.as_bytes())
        }
        FormatArg::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::input(e.to_string());
            w.write_record([
                "index",
                "seed",
                "stream",
                "selected_rank",
                "pred_error",
                "est_error",
                "rank_error",
                "support_auc",
                "error",
            ])
            .map_err(io)?;
            for o in &summary.outcomes {
                let m = o.metrics;
                let cell = |f: fn(&seed_core::simgen::MetricsReport) -> String| {
                    m.as_ref().map(f).unwrap_or_default()
                };
                w.write_record([
                    o.index.to_string(),
                    o.seed.to_string(),
                    o.stream.to_string(),
                    o.selected_rank.map(|r| r.to_string()).unwrap_or_default(),
                    cell(|m| fmt_num(m.pred_error)),
                    cell(|m| fmt_num(m.est_error)),
                    cell(|m| m.rank_error.to_string()),
                    cell(|m| fmt_num(m.support_auc)),
                    o.error.clone().unwrap_or_default(),
                ])
                .map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
            write_atomic(&out.join("detail.csv"), &bytes)
        }
    }
}

fn report_benchmark(summary: &ReplicationSummary, reps: usize) -> CliResult<()> {
    println!("{} replications, {} failed", reps, summary.failures);
    print!("{}", summary_csv(&summary.seed_metrics));
    if !summary.baseline_metrics.is_empty() {
        println!("baseline:");
        print!("{}", summary_csv(&summary.baseline_metrics));
    }
    let failed: Vec<String> = summary
        .outcomes
        .iter()
        .filter_map(|o| o.error.as_ref().map(|e| format!("replication {}: {e}", o.index)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::solver(failed.join("\n")))
    }
}

fn first_error<T>(results: Vec<CliResult<T>>) -> CliResult<Vec<T>> {
    results.into_iter().collect()
}

type SweepTables = (String, String);

fn sweep_mu(cfg: &RunConfig, grid: &[f64]) -> CliResult<SweepTables> {
    let per_rep = par::map_indexed(cfg.reps, |i| -> CliResult<_> {
        let (_, train, _) =
            replication_data(&cfg.sim, i).map_err(|e| CliError::from(e).context(format!("replication {i}")))?;
        mu_path(&train.x, &train.y, &cfg.model, grid)
            .map_err(|e| CliError::from(e).context(format!("replication {i}")))
    });
    let per_rep = first_error(per_rep)?;
    let mut detail = String::from("rep,mu,factors,rank,effective_rank,sv1,sv2,sv3,sv4,sv5\n");
    for (i, points) in per_rep.iter().enumerate() {
        for pt in points {
            let mut sv: Vec<String> = pt.top_singular_values.iter().map(|v| fmt_num(*v)).collect();
            sv.resize(5, String::new());
            let _ = writeln!(
                detail,
                "{i},{},{},{},{},{}",
                fmt_num(pt.mu),
                pt.factors,
                pt.rank,
                pt.effective_rank,
                sv.join(",")
            );
        }
    }
    let mut summary = String::from(
        "mu,rank_mean,rank_stderr,sv1_mean,sv2_mean,sv3_mean,sv4_mean,sv5_mean\n",
    );
    for (g, &mu) in grid.iter().enumerate() {
        let ranks: Vec<f64> = per_rep.iter().map(|pts| pts[g].rank as f64).collect();
        let r = MetricSummary::from_values(&ranks).expect("at least one replication");
        let svs: Vec<String> = (0..5)
            .map(|k| {
                let vals: Vec<f64> = per_rep
                    .iter()
                    .map(|pts| pts[g].top_singular_values.get(k).copied().unwrap_or(0.0))
                    .collect();
                fmt_num(vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect();
        let _ = writeln!(
            summary,
            "{},{},{},{}",
            fmt_num(mu),
            fmt_num(r.mean),
            fmt_num(r.stderr),
            svs.join(",")
        );
    }
    Ok((detail, summary))
}

fn sweep_theta(cfg: &RunConfig, grid: &[f64]) -> CliResult<SweepTables> {
    let per_rep = par::map_indexed(cfg.reps, |i| -> CliResult<_> {
        let ctx = |e: seed_core::Error| CliError::from(e).context(format!("replication {i}"));
        let (truth, train, _) = replication_data(&cfg.sim, i).map_err(ctx)?;
        let points = theta_path(&train.x, &train.y, &cfg.model, grid).map_err(ctx)?;
        let leading = truth.u_supports.first().cloned().unwrap_or_default();
        Ok((points, leading))
    });
    let per_rep = first_error(per_rep)?;
    let kept = |support: &Option<Vec<usize>>, leading: &[usize]| {
        support
            .as_ref()
            .is_some_and(|s| leading.iter().all(|j| s.contains(j)))
    };
    let mut detail = String::from("rep,theta,support_size,sigma_hat,true_support_kept,support\n");
    for (i, (points, leading)) in per_rep.iter().enumerate() {
        for pt in points {
            let support = pt
                .support
                .as_ref()
                .map(|s| s.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" "))
                .unwrap_or_default();
            let _ = writeln!(
                detail,
                "{i},{},{},{},{},{support}",
                fmt_num(pt.theta),
                pt.support.as_ref().map_or(0, |s| s.len()),
                pt.sigma_hat.map(fmt_num).unwrap_or_default(),
                kept(&pt.support, leading),
            );
        }
    }
    let mut summary = String::from("theta,support_size_mean,support_size_stderr,kept_fraction\n");
    for (g, &theta) in grid.iter().enumerate() {
        let sizes: Vec<f64> = per_rep
            .iter()
            .map(|(pts, _)| pts[g].support.as_ref().map_or(0, |s| s.len()) as f64)
            .collect();
        let s = MetricSummary::from_values(&sizes).expect("at least one replication");
        let kept_frac = per_rep
            .iter()
            .filter(|(pts, leading)| kept(&pts[g].support, leading))
            .count() as f64
            / per_rep.len() as f64;
        let _ = writeln!(
            summary,
            "{},{},{},{}",
            fmt_num(theta),
            fmt_num(s.mean),
            fmt_num(s.stderr),
            fmt_num(kept_frac)
        );
    }
    Ok((detail, summary))
}

pub fn infer_network(args: &InferArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(&args.common)?;
    cfg.apply_model(&args.model);
    if let Some(l) = args.lags {
        cfg.network.lags = l;
    }
    if args.standardize {
        cfg.network.standardize = true;
    }
    if args.edge_threshold.is_some() {
        cfg.network.edge_threshold = args.edge_threshold;
    }
    let out = cfg.output_dir(&args.common);
    let series = read_matrix(&args.series)?;
    let spec = VarSpec::new(cfg.network.lags, series.cols())?;
    if series.rows() <= spec.lags {
        return Err(CliError::input(format!(
            "series has {} time points, need more than {} lags",
            series.rows(),
            spec.lags
        )));
    }
    let reference = args.reference.as_deref().map(read_adjacency).transpose()?;
    if let Some(r) = &reference {
        if r.dim() != (spec.nodes, spec.nodes) {
            return Err(CliError::input(format!(
                "reference is {}x{}, series has {} nodes",
                r.nrows(),
                r.ncols(),
                spec.nodes
            )));
        }
    }
    let (model, mut graph) = fit_var(&series, &spec, &cfg.model, cfg.network.standardize)?;
    if let Some(cut) = cfg.network.edge_threshold {
        graph.threshold(cut)?;
    }
    let auc = reference
        .map(|r| evaluate_graph(&graph.scores, &r, true))
        .transpose()?;
    write_matrix(&out.join("scores.csv"), &graph.scores)?;
    let mut edges = String::from("source,target,score\n");
    for (source, target, score) in graph.edge_list() {
        let _ = writeln!(edges, "{source},{target},{}", fmt_num(score));
    }
    write_atomic(&out.join("edges.csv"), edges.as_bytes())?;
    let record = NetworkRecord {
        nodes: spec.nodes,
        lags: spec.lags,
        lag_order: "most_recent_first".into(),
        standardize: cfg.network.standardize,
    };
    write_json(&out.join("model.json"), &ModelFile::from_model(&model, Some(record)))?;
    println!(
        "rank {} ({} factors extracted), {} nodes, {} lags",
        model.rank,
        model.extracted(),
        spec.nodes,
        spec.lags
    );
    if let Some(auc) = auc {
        println!("AUC {}", fmt_num(auc));
    }
    Ok(())
}
