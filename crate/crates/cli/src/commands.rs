use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};
use tvkern::bandwidth::{cv_select, CvPlan, CvResult};
use tvkern::datagen::{
    gamma_range, generate_pair, parse_config, run_sweep, BiasFamily, BiasKind, EstimatorId,
    SimConfig,
};
use tvkern::empirical::fixture::{fixture_files, fixture_inputs, FIXTURE_SEED};
use tvkern::empirical::{
    read_series, run_pipeline, write_predictions, write_results, write_triples, CleanOptions,
    DomainInputs, PipelineOptions,
};
use tvkern::estimators::evaluate_surface;
use tvkern::metrics::{write_error_reports, write_error_summary, write_surface};
use tvkern::transfer::fit_transfer_cv_with;
use tvkern::{
    fit_surface, oracle_rate, Bandwidth, Domain, Error, GridSpec, KernelSpec, Result, Sample,
};

use crate::input::read_sample;
use crate::manifest::Run;
use crate::{
    BandwidthArgs, Cli, Command, CvArgs, EmpiricalArgs, FitArgs, RatesArgs, SimArgs, SimulateArgs,
    TransferArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => simulate(cli, args),
        Command::Fit(args) => fit(cli, args),
        Command::Transfer(args) => transfer(cli, args),
        Command::Cv(args) => cv(cli, args),
        Command::Empirical(args) => empirical(cli, args),
        Command::Rates(args) => rates(args),
    }
}

/// Defaults, then the config file, then command-line overrides, then `--seed`.
fn resolve_config(cli: &Cli, sim: &SimArgs) -> Result<SimConfig> {
    let base = if sim.full_scale {
        SimConfig::full_scale()
    } else {
        SimConfig::default()
    };
    let mut cfg = match &cli.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?, base)?,
        None => base,
    };
    if let Some(v) = sim.t0 {
        cfg.t0 = v;
    }
    if let Some(v) = sim.t1 {
        cfg.t1 = v;
    }
    if let Some(v) = sim.noise_sd {
        cfg.noise_sd = v;
    }
    if let Some(v) = &sim.families {
        cfg.families = v.clone();
    }
    if let Some(v) = sim.replications {
        cfg.replications = v;
    }
    if let Some(v) = sim.grid_n {
        cfg.grid_n = v;
    }
    if sim.gamma_min.is_some() || sim.gamma_max.is_some() || sim.gamma_step.is_some() {
        let sweep = &cfg.gamma_sweep;
        let step = match sweep.as_slice() {
            [a, b, ..] => b - a,
            _ => 1.0,
        };
        cfg.gamma_sweep = gamma_range(
            sim.gamma_min.unwrap_or(sweep[0]),
            sim.gamma_max.unwrap_or(sweep[sweep.len() - 1]),
            sim.gamma_step.unwrap_or(step),
        )?;
    }
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_json(cfg: &SimConfig) -> Value {
    json!({
        "t0": cfg.t0,
        "t1": cfg.t1,
        "noise_sd": cfg.noise_sd,
        "gamma_sweep": cfg.gamma_sweep,
        "families": cfg.families.iter().map(|f| f.label()).collect::<Vec<_>>(),
        "replications": cfg.replications,
        "grid_n": cfg.grid_n,
        "seed": cfg.base_seed,
    })
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let cfg = resolve_config(cli, &args.sim)?;
    let suite = args
        .estimators
        .clone()
        .unwrap_or_else(|| EstimatorId::ALL.to_vec());
    let mut config = config_json(&cfg);
    config["estimators"] = json!(suite.iter().map(|e| e.label()).collect::<Vec<_>>());
    let reports = run_sweep(&cfg, &suite)?;

    let mut run = Run::start("simulate", config, cfg.base_seed, &cli.out)?;
    write_error_reports(run.create("errors.csv")?, &reports)?;
    write_error_summary(run.create("summary.csv")?, &reports)?;
    run.finish()?;
    Ok(())
}

/// The CSV sample, or the target sample of replication 0 of the configured design.
fn load_or_simulate(cli: &Cli, data: Option<&Path>, sim: &SimArgs) -> Result<(Sample, Value, u64)> {
    match data {
        Some(path) => {
            let seed = cli.seed.unwrap_or(0);
            Ok((
                read_sample(path, Domain::Target)?,
                json!({ "data": path.display().to_string() }),
                seed,
            ))
        }
        None => {
            let cfg = resolve_config(cli, sim)?;
            let (target, _) = generate_pair(&cfg, &BiasFamily::new(BiasKind::Quad, 0.0)?, 0)?;
            Ok((target, config_json(&cfg), cfg.base_seed))
        }
    }
}

/// Unit square for simulated data; the data ranges otherwise.
fn grid_for(sample: &Sample, simulated: bool, n: usize) -> Result<GridSpec> {
    if simulated {
        return GridSpec::unit_square(n);
    }
    let u = sample.times();
    let x_ranges = (0..sample.dim())
        .map(|j| sample.covariate_range(j))
        .collect();
    GridSpec::new(n, (u[0], u[u.len() - 1]), x_ranges)
}

fn fixed_bandwidth(args: &BandwidthArgs) -> Result<Option<Bandwidth>> {
    match (args.h_time, &args.h_cov) {
        (Some(h), Some(c)) => Ok(Some(Bandwidth::new(h, c.clone())?)),
        (None, None) => Ok(None),
        _ => Err(Error::InvalidInput(
            "give both --h-time and --h-cov, or neither".into(),
        )),
    }
}

fn bw_header(d: usize) -> Vec<String> {
    let mut h = vec!["h_time".to_string()];
    if d == 1 {
        h.push("h_cov".into());
    } else {
        h.extend((1..=d).map(|j| format!("h_cov{j}")));
    }
    h
}

fn bw_fields(bw: &Bandwidth) -> Vec<String> {
    std::iter::once(bw.h_time())
        .chain(bw.h_cov().iter().copied())
        .map(|v| v.to_string())
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv {
        path: "<output>".into(),
        message: e.to_string(),
    }
}

fn write_bandwidths<W: Write>(out: W, rows: &[(&str, &Bandwidth)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = rows.first().map_or(1, |r| r.1.dim());
    let mut header = vec!["role".to_string()];
    header.extend(bw_header(d));
    w.write_record(&header).map_err(csv_err)?;
    for (role, bw) in rows {
        let mut rec = vec![role.to_string()];
        rec.extend(bw_fields(bw));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    let (sample, mut config, seed) = load_or_simulate(cli, args.data.as_deref(), &args.sim)?;
    let spec = KernelSpec::epanechnikov();
    let bw = match fixed_bandwidth(&args.bw)? {
        Some(bw) => bw,
        None => {
            let plan = CvPlan::default_for(&sample, args.method)?.with_scheme(args.bw.fold_scheme);
            cv_select(&sample, &spec, &plan)?.best
        }
    };
    let grid_n = args.sim.grid_n.unwrap_or(SimConfig::default().grid_n);
    let grid = grid_for(&sample, args.data.is_none(), grid_n)?;
    let surface = fit_surface(&sample, &spec, &bw, &grid, args.method)?;

    config["method"] = json!(args.method.label());
    config["fold_scheme"] = json!(args.bw.fold_scheme.label());
    config["grid_n"] = json!(grid_n);
    let mut run = Run::start("fit", config, seed, &cli.out)?;
    write_surface(run.create("surface.csv")?, &surface)?;
    write_bandwidths(run.create("bandwidth.csv")?, &[("fit", &bw)])?;
    run.finish()?;
    Ok(())
}

fn transfer(cli: &Cli, args: &TransferArgs) -> Result<()> {
    let (target, source, mut config, seed) = match (&args.target, &args.source) {
        (Some(t), Some(s)) => (
            read_sample(t, Domain::Target)?,
            read_sample(s, Domain::Source)?,
            json!({ "target": t.display().to_string(), "source": s.display().to_string() }),
            cli.seed.unwrap_or(0),
        ),
        _ => {
            let cfg = resolve_config(cli, &args.sim)?;
            let (t, s) = generate_pair(&cfg, &BiasFamily::new(args.family, args.gamma)?, 0)?;
            let mut config = config_json(&cfg);
            config["family"] = json!(args.family.label());
            config["gamma"] = json!(args.gamma);
            (t, s, config, cfg.base_seed)
        }
    };
    let spec = KernelSpec::epanechnikov();
    let (fit, selection) =
        fit_transfer_cv_with(&target, &source, &spec, args.method, args.fold_scheme)?;
    let grid_n = args.sim.grid_n.unwrap_or(SimConfig::default().grid_n);
    let grid = grid_for(&target, args.target.is_none(), grid_n)?;
    let surface = evaluate_surface(&grid, |u, x| fit.predict(u, x))?;
    let bias = evaluate_surface(&grid, |u, x| fit.bias_predict(u, x))?;

    config["method"] = json!(args.method.label());
    config["fold_scheme"] = json!(args.fold_scheme.label());
    config["grid_n"] = json!(grid_n);
    let mut run = Run::start("transfer", config, seed, &cli.out)?;
    write_surface(run.create("surface.csv")?, &surface)?;
    write_surface(run.create("bias_surface.csv")?, &bias)?;
    write_bandwidths(
        run.create("bandwidth.csv")?,
        &[
            ("source", &selection.source_cv.best),
            ("bias", &selection.bias_cv.best),
        ],
    )?;
    run.finish()?;
    Ok(())
}

fn write_cv_scores<W: Write>(out: W, result: &CvResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = result.best.dim();
    let mut header = bw_header(d);
    header.extend(["score", "n_scored", "n_skipped", "selected"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for c in &result.scores {
        let mut rec = bw_fields(&c.bandwidth);
        rec.push(c.score.map(|s| s.to_string()).unwrap_or_default());
        rec.push(c.n_scored.to_string());
        rec.push(c.n_skipped.to_string());
        rec.push(u8::from(c.bandwidth == result.best).to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn cv(cli: &Cli, args: &CvArgs) -> Result<()> {
    let (sample, mut config, seed) = load_or_simulate(cli, args.data.as_deref(), &args.sim)?;
    let plan = CvPlan::new(args.folds, tvkern::default_grid(&sample)?, args.method)?
        .with_scheme(args.fold_scheme);
    let result = cv_select(&sample, &KernelSpec::epanechnikov(), &plan)?;

    config["method"] = json!(args.method.label());
    config["folds"] = json!(args.folds);
    config["fold_scheme"] = json!(args.fold_scheme.label());
    let mut run = Run::start("cv", config, seed, &cli.out)?;
    write_cv_scores(run.create("cv_scores.csv")?, &result)?;
    write_bandwidths(run.create("selected.csv")?, &[("selected", &result.best)])?;
    run.finish()?;
    Ok(())
}

fn empirical(cli: &Cli, args: &EmpiricalArgs) -> Result<()> {
    let column = Some(args.column.as_str());
    let (mut source, mut target, mut config) = match (
        &args.source_response,
        &args.source_covariate,
        &args.target_response,
        &args.target_covariate,
    ) {
        (Some(sr), Some(sc), Some(tr), Some(tc)) => {
            let input = |response: &Path, covariate: &Path, mode| -> Result<DomainInputs> {
                Ok(DomainInputs {
                    response: read_series(response, column)?,
                    covariate: read_series(covariate, column)?,
                    mode,
                })
            };
            (
                input(sr, sc, args.source_mode)?,
                input(tr, tc, args.target_mode)?,
                json!({
                    "source_response": sr.display().to_string(),
                    "source_covariate": sc.display().to_string(),
                    "target_response": tr.display().to_string(),
                    "target_covariate": tc.display().to_string(),
                    "column": args.column,
                }),
            )
        }
        _ => {
            let (s, t) = fixture_inputs(cli.seed.unwrap_or(FIXTURE_SEED))?;
            (
                s,
                t,
                json!({ "fixture_seed": cli.seed.unwrap_or(FIXTURE_SEED) }),
            )
        }
    };
    source.mode = args.source_mode;
    target.mode = args.target_mode;

    let opts = PipelineOptions {
        clean: CleanOptions {
            max_gap: args.max_gap,
            min_valid: args.min_valid,
        },
        fold_scheme: args.fold_scheme,
        spec: KernelSpec::epanechnikov(),
    };
    let (data, report) = run_pipeline(&source, &target, &opts)?;

    config["source_mode"] = json!(format!("{:?}", args.source_mode));
    config["target_mode"] = json!(format!("{:?}", args.target_mode));
    config["max_gap"] = json!(args.max_gap);
    config["min_valid"] = json!(args.min_valid);
    config["fold_scheme"] = json!(opts.fold_scheme.label());
    let seed = cli.seed.unwrap_or(FIXTURE_SEED);
    let mut run = Run::start("empirical", config, seed, &cli.out)?;
    if args.write_fixture {
        for (name, text) in fixture_files(seed) {
            run.create(name)?.write_all(text.as_bytes())?;
        }
    }
    write_triples(run.create("triples.csv")?, &data)?;
    for preds in &report.predictions {
        let name = format!(
            "predictions_{}.csv",
            preds.method.label().to_ascii_lowercase()
        );
        write_predictions(run.create(&name)?, preds)?;
    }
    write_results(run.create("results.csv")?, &report)?;
    run.finish()?;
    write_results(std::io::stdout().lock(), &report)
}

fn rates(args: &RatesArgs) -> Result<()> {
    let r = oracle_rate(args.t0, args.d, args.r, args.eta2)?;
    println!("Case {}", r.case.number());
    println!(
        "h_tl order: {} (T0 exponent {})",
        r.h_tl_order, r.h_exponent
    );
    println!(
        "rate order: {} (T0 exponent {})",
        r.rate_order, r.rate_exponent
    );
    println!("eta2 threshold: {}", r.eta_threshold);
    Ok(())
}
