use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use combireg::constraints::{
    build_cardinality, build_matching, build_partial_order, enumerate_feasible, is_tum, verify_integral,
    MAX_ENUMERATION_DIM,
};
use combireg::duck::{matching_curves, write_curves_csv, DuckData, DuckScenario};
use combireg::inference::{acf, event_probability, posterior_summary, predict_outcome_law, rmse, EventQuery};
use combireg::mcmc::{run_chain, run_hierarchical_chain, Chain, ChainMetadata, Dataset};
use combireg::simulate::{simulate_intercept, simulate_regression};
use combireg::{BipartiteGraph, ConstraintSystem, Error};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::{
    parse_grid, parse_list, read_chain, read_constraints, read_data, read_json, write_chain, write_data, write_json,
    DataFile,
};
use crate::{CheckArgs, CliError, DiagnoseArgs, FitArgs, PredictArgs, SamplerArgs, SimulateArgs};

fn out_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn record(cfg: &mut RunConfig, command: &str, inputs: &[Option<&Path>]) {
    cfg.run.command = command.into();
    cfg.run.inputs = inputs.iter().flatten().map(|p| p.display().to_string()).collect();
}

fn usize_field(s: &str, what: &str) -> Result<usize, CliError> {
    s.parse().map_err(|_| CliError::usage(format!("{what}: {s:?} is not a non-negative integer")))
}

fn pairs(s: &str) -> Result<Vec<(usize, usize)>, CliError> {
    s.split(',')
        .map(|pair| {
            let (a, b) = pair.split_once('-').ok_or_else(|| CliError::usage(format!("pair {pair:?} must be a-b")))?;
            Ok((usize_field(a, "pair")?, usize_field(b, "pair")?))
        })
        .collect()
}

/// Builds a system from `cardinality:D:M`, `matching:L:R[:a-b,...]`,
/// `partial-order:D:j-k,...` or `box:D`.
pub fn build_from_spec(spec: &str) -> Result<ConstraintSystem, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let cs = match parts.as_slice() {
        ["cardinality", d, m] => build_cardinality(usize_field(d, "D")?, usize_field(m, "M")?)?,
        ["matching", l, r] => build_matching(&BipartiteGraph::complete(usize_field(l, "L")?, usize_field(r, "R")?)?)?,
        ["matching", l, r, edges] => {
            build_matching(&BipartiteGraph::new(usize_field(l, "L")?, usize_field(r, "R")?, pairs(edges)?)?)?
        }
        ["partial-order", d, ps] => build_partial_order(usize_field(d, "D")?, &pairs(ps)?)?,
        ["box", d] => {
            ConstraintSystem::new(usize_field(d, "D")?, Vec::new(), Vec::new())?.with_label(Some("box".into()))
        }
        _ => return Err(CliError::usage(format!("unknown builder spec {spec:?}"))),
    };
    Ok(cs)
}

pub fn check(args: &CheckArgs) -> Result<ExitCode, CliError> {
    let cs = match (&args.constraints, &args.emit) {
        (Some(p), _) => read_constraints(p)?,
        (None, Some(spec)) => {
            let cs = build_from_spec(spec)?;
            match &args.out {
                Some(p) => std::fs::write(p, cs.to_json() + "\n")?,
                None => {
                    println!("{}", cs.to_json());
                    return Ok(ExitCode::SUCCESS);
                }
            }
            cs
        }
        (None, None) => return Err(CliError::usage("need --constraints or --emit")),
    };
    let tum = match is_tum(&cs.matrix()) {
        Ok(t) => Some(t),
        Err(Error::SizeLimitExceeded(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let integral = match tum {
        Some(true) => Some(true),
        _ => match verify_integral(&cs) {
            Ok(v) => Some(v),
            Err(Error::SizeLimitExceeded(_)) => None,
            Err(e) => return Err(e.into()),
        },
    };
    let word = |v: Option<bool>| match v {
        Some(true) => "yes",
        Some(false) => "no",
        None => "unknown",
    };
    let outcomes = if cs.dim() <= MAX_ENUMERATION_DIM {
        enumerate_feasible(&cs)?.len().to_string()
    } else {
        format!("not enumerated (d = {} > {MAX_ENUMERATION_DIM})", cs.dim())
    };
    println!("TUM: {}, integral: {}, feasible outcomes: {outcomes}", word(tum), word(integral));
    if integral == Some(true) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}

pub fn simulate(args: &SimulateArgs, mut cfg: RunConfig) -> Result<ExitCode, CliError> {
    let s = &mut cfg.simulate;
    if let Some(v) = args.n {
        s.n = v;
    }
    if let Some(v) = args.p {
        s.p = v;
    }
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = args.beta_scale {
        s.beta_scale = v;
    }
    if let Some(v) = &args.intercept {
        s.intercept = Some(parse_list(v)?);
    }
    if let Some(v) = &args.scenario {
        s.scenario = Some(v.clone());
    }
    record(&mut cfg, "simulate", &[args.constraints.as_deref()]);
    out_dir(&args.out)?;
    let s = cfg.simulate.clone();

    if let Some(name) = &s.scenario {
        if name != "duck" {
            return Err(CliError::usage(format!("unknown scenario {name:?}")));
        }
        let scenario = DuckScenario { seed: s.seed, ..DuckScenario::default() };
        let data = scenario.generate()?;
        write_data(
            &args.out.join("data.csv"),
            &DataFile { y: data.responses.clone(), x: None, t: Some(data.times.clone()) },
        )?;
        write_json(&args.out.join("hierarchy.json"), &scenario)?;
        std::fs::write(args.out.join("constraints.json"), data.constraints.to_json() + "\n")?;
        let mut truth = Chain::new(data.spec.kappa(), data.spec.num_groups, 3, ChainMetadata::default());
        truth.push(0, &data.true_beta, &data.true_alpha);
        write_chain(&args.out.join("truth.csv"), &truth)?;
        println!(
            "simulated {} weeks of matchings over {} ducks and {} possible pairs",
            data.times.len(),
            scenario.num_ducks(),
            scenario.num_pairs()
        );
    } else {
        let path = args.constraints.as_deref().ok_or_else(|| CliError::usage("--constraints is required"))?;
        let cs = read_constraints(path)?;
        let (data, beta) = match &s.intercept {
            Some(mu) => {
                if mu.len() != cs.dim() {
                    return Err(CliError::usage(format!("--intercept has {} entries, d = {}", mu.len(), cs.dim())));
                }
                let y = simulate_intercept(&cs, mu, s.n, s.seed)?;
                (DataFile { y, x: None, t: None }, DMatrix::from_column_slice(cs.dim(), 1, mu))
            }
            None => {
                let sim = simulate_regression(&cs, s.n, s.p, None, s.beta_scale, s.seed)?;
                let y = sim.dataset.responses().to_vec();
                (DataFile { y, x: Some(sim.dataset.covariates().clone()), t: None }, sim.beta)
            }
        };
        write_data(&args.out.join("data.csv"), &data)?;
        std::fs::write(args.out.join("constraints.json"), cs.to_json() + "\n")?;
        let mut truth = Chain::new(beta.nrows(), beta.ncols(), 0, ChainMetadata::default());
        truth.push(0, &beta, &[]);
        write_chain(&args.out.join("truth.csv"), &truth)?;
        println!("simulated {} observations with d = {}", data.y.len(), cs.dim());
    }
    cfg.write_resolved(&args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn apply_sampler(cfg: &mut RunConfig, a: &SamplerArgs) {
    let s = &mut cfg.sampler;
    if let Some(v) = a.iters {
        s.iterations = v;
    }
    if let Some(v) = a.burnin {
        s.burnin = v;
    }
    if let Some(v) = a.thin {
        s.thin = v;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = a.tau {
        s.tau = v;
    }
    if let Some(v) = a.block_size {
        s.block_size = Some(v);
    }
    if let Some(v) = a.hitrun_steps {
        s.hitrun_steps = v;
    }
    if a.check_identity {
        s.check_identity = true;
    }
    if a.no_adapt {
        s.adapt_block_size = false;
    }
}

fn duck_data(path: &Path, y: Option<Vec<Vec<u8>>>) -> Result<DuckData, CliError> {
    let scenario: DuckScenario = read_json(path)?;
    let data = scenario.design()?;
    Ok(match y {
        Some(y) => data.with_responses(y)?,
        None => data,
    })
}

#[derive(Serialize)]
struct FitSummary {
    draws: usize,
    mean_acceptance: f64,
    final_block_size: usize,
    wall_seconds: f64,
    identity_checks: u64,
    identity_violations: u64,
    rmse: Option<f64>,
}

pub fn fit(args: &FitArgs, mut cfg: RunConfig) -> Result<ExitCode, CliError> {
    apply_sampler(&mut cfg, &args.sampler);
    record(
        &mut cfg,
        "fit",
        &[Some(&args.data), args.constraints.as_deref(), args.hierarchy.as_deref(), args.truth.as_deref()],
    );
    cfg.sampler.validate()?;
    out_dir(&args.out)?;
    let file = read_data(&args.data)?;

    let chain = match &args.hierarchy {
        Some(h) => {
            let data = duck_data(h, Some(file.y))?;
            if let Some(t) = &file.t {
                if t != &data.times {
                    return Err(CliError::usage("t column does not match the scenario's observation times"));
                }
            }
            if let Some(p) = &args.constraints {
                if read_constraints(p)? != data.constraints {
                    return Err(CliError::usage("--constraints differs from the scenario's matching system"));
                }
            }
            run_hierarchical_chain(&data.spec, &data.responses, &data.constraints, &cfg.sampler)?
        }
        None => {
            let path = args.constraints.as_deref().ok_or_else(|| CliError::usage("--constraints is required"))?;
            let cs = read_constraints(path)?;
            let n = file.y.len();
            let x = file.x.unwrap_or_else(|| DMatrix::from_element(1, n, 1.0));
            run_chain(&Dataset::new(file.y, x, cs)?, &cfg.sampler)?
        }
    };
    write_chain(&args.out.join("chain.csv"), &chain)?;
    write_json(&args.out.join("metadata.json"), &chain.metadata)?;
    cfg.write_resolved(&args.out)?;

    let m = &chain.metadata;
    let mean_acceptance = m.acceptance_rates.iter().sum::<f64>() / m.acceptance_rates.len().max(1) as f64;
    let rmse = match &args.truth {
        Some(p) => {
            let truth = read_chain(p, None)?;
            if truth.is_empty() {
                return Err(CliError::usage("truth file has no rows"));
            }
            Some(rmse(&chain.posterior_mean_beta()?, &truth.beta(0))?)
        }
        None => None,
    };
    let summary = FitSummary {
        draws: chain.len(),
        mean_acceptance,
        final_block_size: m.final_block_size,
        wall_seconds: m.wall_seconds,
        identity_checks: m.identity_checks,
        identity_violations: m.identity_violations,
        rmse,
    };
    write_json(&args.out.join("fit_summary.json"), &summary)?;
    println!(
        "{} draws in {:.1} s, mean acceptance {:.3}, block size {}",
        summary.draws, summary.wall_seconds, summary.mean_acceptance, summary.final_block_size
    );
    if m.identity_checks > 0 {
        println!("identity checks: {} violations in {}", m.identity_violations, m.identity_checks);
    }
    if let Some(r) = rmse {
        println!("posterior-mean RMSE vs truth: {r:.4}");
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct EventReport {
    query: EventQuery,
    x: Vec<f64>,
    #[serde(flatten)]
    estimate: combireg::inference::EventEstimate,
}

pub fn predict(args: &PredictArgs, mut cfg: RunConfig) -> Result<ExitCode, CliError> {
    let p = &mut cfg.predict;
    if let Some(v) = args.mc_draws {
        p.mc_draws = v;
    }
    if let Some(v) = args.seed {
        p.seed = v;
    }
    if let Some(v) = &args.x {
        p.x = Some(parse_list(v)?);
    }
    if let Some(v) = &args.grid {
        p.grid = Some(v.clone());
    }
    if args.competition {
        p.competition = true;
    }
    record(
        &mut cfg,
        "predict",
        &[Some(&args.chain), args.constraints.as_deref(), args.query.as_deref(), args.hierarchy.as_deref()],
    );
    out_dir(&args.out)?;
    let chain = read_chain(&args.chain, None)?;
    let p = cfg.predict.clone();
    if p.mc_draws == 0 {
        return Err(CliError::usage("mc_draws must be positive"));
    }

    if let Some(h) = &args.hierarchy {
        let data = duck_data(h, None)?;
        let grid = match &p.grid {
            Some(g) => parse_grid(g)?,
            None => parse_grid(&format!("1:{}:1", data.scenario.weeks))?,
        };
        let points = matching_curves(&data, &chain, &grid, p.mc_draws, p.competition, p.seed)?;
        let mut w = BufWriter::new(File::create(args.out.join("curves.csv"))?);
        write_curves_csv(&points, &mut w)?;
        w.flush()?;
        println!("{} curve points for {} species", points.len(), data.scenario.species.len());
        cfg.write_resolved(&args.out)?;
        return Ok(ExitCode::SUCCESS);
    }

    let path = args.constraints.as_deref().ok_or_else(|| CliError::usage("--constraints is required"))?;
    let cs = read_constraints(path)?;
    let x = match &p.x {
        Some(x) => x.clone(),
        None if chain.beta_cols == 1 => vec![1.0],
        None => return Err(CliError::usage(format!("--x needs {} covariates", chain.beta_cols))),
    };
    match &args.query {
        Some(q) => {
            let text = std::fs::read_to_string(q).map_err(|e| CliError::usage(format!("{}: {e}", q.display())))?;
            let query = EventQuery::from_json(&text)?;
            let estimate = event_probability(&chain, &x, &cs, &query, p.mc_draws, p.seed)?;
            println!("P(event) = {:.4} (95% band {:.4} to {:.4})", estimate.mean, estimate.lower, estimate.upper);
            write_json(&args.out.join("event.json"), &EventReport { query, x, estimate })?;
        }
        None => {
            let law = predict_outcome_law(&chain, &x, &cs, p.mc_draws, p.seed)?;
            let mut w = BufWriter::new(File::create(args.out.join("law.csv"))?);
            law.write_csv(&mut w)?;
            w.flush()?;
            println!("law over {} outcomes written", law.outcomes.len());
        }
    }
    cfg.write_resolved(&args.out)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct AcceptanceSummary {
    mean: f64,
    min: f64,
    max: f64,
    block_size: usize,
    final_block_size: usize,
}

#[derive(Serialize)]
struct DiagnoseSummary {
    draws: usize,
    parameters: Vec<combireg::inference::ParamSummary>,
    /// Parameters whose ACF could not be computed, with the reason.
    acf_errors: std::collections::BTreeMap<String, String>,
    /// Largest absolute autocorrelation at lag 25 among retained draws.
    max_abs_acf_lag25: Option<f64>,
    acceptance: Option<AcceptanceSummary>,
}

pub fn diagnose(args: &DiagnoseArgs, mut cfg: RunConfig) -> Result<ExitCode, CliError> {
    record(&mut cfg, "diagnose", &[Some(&args.chain), args.metadata.as_deref()]);
    out_dir(&args.out)?;
    let chain = read_chain(&args.chain, args.metadata.as_deref())?;
    let names = chain.param_names();
    let mut columns = Vec::with_capacity(names.len());
    let mut acf_errors = std::collections::BTreeMap::new();
    for (k, name) in names.iter().enumerate() {
        match acf(&chain.series(k), args.max_lag) {
            Ok(r) => columns.push(Some(r)),
            Err(e @ (Error::ConstantSeries | Error::SeriesTooShort { .. })) => {
                acf_errors.insert(name.clone(), e.to_string());
                columns.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mut w = csv::Writer::from_path(args.out.join("acf.csv"))?;
    w.write_record(std::iter::once("lag").chain(names.iter().map(String::as_str)))?;
    for lag in 0..=args.max_lag {
        let mut rec = vec![lag.to_string()];
        rec.extend(columns.iter().map(|c| c.as_ref().map_or(String::new(), |r| r[lag].to_string())));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let max_abs_acf_lag25 = (args.max_lag >= 25)
        .then(|| {
            columns
                .iter()
                .flatten()
                .map(|r| r[25].abs())
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        })
        .flatten();
    let m = &chain.metadata;
    let acceptance = (!m.acceptance_rates.is_empty()).then(|| AcceptanceSummary {
        mean: m.acceptance_rates.iter().sum::<f64>() / m.acceptance_rates.len() as f64,
        min: m.acceptance_rates.iter().copied().fold(f64::INFINITY, f64::min),
        max: m.acceptance_rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        block_size: m.block_size,
        final_block_size: m.final_block_size,
    });
    let summary = DiagnoseSummary {
        draws: chain.len(),
        parameters: posterior_summary(&chain)?,
        acf_errors,
        max_abs_acf_lag25,
        acceptance,
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    if let Some(v) = summary.max_abs_acf_lag25 {
        println!("max |ACF| at lag 25: {v:.3}");
    }
    if let Some(a) = &summary.acceptance {
        println!("acceptance: mean {:.3}, min {:.3}, max {:.3}", a.mean, a.min, a.max);
    }
    cfg.write_resolved(&args.out)?;
    Ok(ExitCode::SUCCESS)
}
