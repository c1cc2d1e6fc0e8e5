use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use psrf_core::chains::{format_chain_csv, load_chain_csv};
use psrf_core::experiments::{self, Configuration, Experiment};
use psrf_core::monitor::{format_trace_csv, Termination};
use psrf_core::psrf::component_psrfs;
use psrf_core::samplers::titanic::load_titanic;
use psrf_core::samplers::{ar1_crossing, SamplerSpec, Simulation, Target};
use psrf_core::{
    assemble, delta_threshold, diagnose_static, ess_estimate, run_monitor, BatchConfig, ChainSet,
    EssThreshold, MonitorPlan, Reduction, Schedule, Statistic, StatisticKind,
};

use crate::report::*;
use crate::{
    ChainInput, DiagnoseArgs, EssArgs, Format, MonitorArgs, Precision, ReproduceArgs, SamplerArgs,
    SimulateArgs, TargetName, ThresholdArgs,
};

pub enum Outcome {
    Done,
    Converged,
    NotConverged,
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    print_stdout(&format!("{text}\n"))
}

/// A closed pipe downstream (`| head`) is not an error.
fn print_stdout(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load_chains(input: &ChainInput) -> Result<ChainSet> {
    let chains = input
        .chains
        .iter()
        .map(|path| load_chain_csv(path, !input.no_header))
        .collect::<psrf_core::Result<Vec<_>>>()?;
    Ok(assemble(&chains, input.burnin)?)
}

/// Threshold and default minimum effort for the requested precision.
fn threshold_for(precision: &Precision, p: usize, m: usize) -> Result<(EssThreshold, usize)> {
    let (th, default_effort) = match precision.delta {
        Some(delta) => (EssThreshold::from_delta(delta, precision.alpha, p, m)?, 1),
        None => {
            let th = delta_threshold(precision.alpha, precision.eps, p, m)?;
            (th, th.min_ess_ceil as usize)
        }
    };
    Ok((th, precision.min_effort.unwrap_or(default_effort).max(1)))
}

fn stat_name(kind: StatisticKind) -> &'static str {
    match kind {
        StatisticKind::Lugsail => "lugsail",
        StatisticKind::Classic => "classic",
    }
}

fn reduction_name(reduction: Reduction) -> &'static str {
    match reduction {
        Reduction::Determinant => "det",
        Reduction::MaxEigenvalue => "maxeig",
    }
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<Outcome> {
    let cs = load_chains(&args.input)?;
    let kind = StatisticKind::from(args.stat);
    let reduction = Reduction::from(args.mv);
    let (th, min_effort) = threshold_for(&args.precision, cs.p(), cs.m())?;
    let plan = MonitorPlan::new(th)
        .with_statistic(Statistic::from_parts(kind, reduction))
        .with_batch(args.input.batch)
        .with_min_effort(min_effort)
        .with_max_iterations(min_effort.max(psrf_core::monitor::DEFAULT_MAX_ITERATIONS));
    let bc = BatchConfig::resolve(args.input.batch, cs.n())?;
    if kind == StatisticKind::Classic && cs.m() < 2 {
        bail!("classic PSRF requires ≥2 chains, got {}", cs.m());
    }
    let d = diagnose_static(&cs, &plan)?;
    let Some(report) = d.report else {
        bail!("PSRF is undefined: the within-chain covariance is singular or the variance estimate has no positive part");
    };
    let component_values = if cs.p() == 1 {
        vec![report.value]
    } else {
        component_psrfs(&cs, kind, Some(&bc))?
            .iter()
            .map(|r| r.value)
            .collect()
    };
    let out = DiagnoseReport {
        schema_version: SCHEMA_VERSION,
        statistic: stat_name(kind),
        reduction: reduction_name(reduction),
        m: cs.m(),
        n: cs.n(),
        p: cs.p(),
        burnin: args.input.burnin,
        psrf: report.value,
        component_psrfs: component_values,
        ess: ess_estimate(&cs, &bc)?,
        min_ess: th.min_ess,
        min_ess_ceil: th.min_ess_ceil,
        delta: th.delta,
        alpha: th.alpha,
        epsilon: th.epsilon,
        min_effort,
        converged: d.converged,
        batch: BatchReport::from(&bc),
        psd_repaired: report.psd_repaired,
        between_rank_deficient: report.between_rank_deficient,
    };
    print_json(&out)?;
    Ok(if d.converged {
        Outcome::Converged
    } else {
        Outcome::NotConverged
    })
}

pub fn threshold(args: &ThresholdArgs) -> Result<Outcome> {
    let th = delta_threshold(args.alpha, args.eps, args.p, args.m)?;
    let r = ThresholdReport::from(&th);
    match args.format {
        Format::Json => print_json(&r)?,
        Format::Csv => {
            print_stdout(&format!(
                "alpha,epsilon,p,m,min_ess,min_ess_ceil,delta\n{},{},{},{},{},{},{}\n",
                r.alpha, r.epsilon, r.p, r.m, r.min_ess, r.min_ess_ceil, r.delta
            ))?;
        }
    }
    Ok(Outcome::Done)
}

pub fn ess(args: &EssArgs) -> Result<Outcome> {
    let cs = load_chains(&args.input)?;
    let bc = BatchConfig::resolve(args.input.batch, cs.n())?;
    let th = delta_threshold(args.alpha, args.eps, cs.p(), cs.m())?;
    let ess = ess_estimate(&cs, &bc)?;
    print_json(&EssReport {
        schema_version: SCHEMA_VERSION,
        m: cs.m(),
        n: cs.n(),
        p: cs.p(),
        burnin: args.input.burnin,
        ess,
        min_ess: th.min_ess,
        min_ess_ceil: th.min_ess_ceil,
        enough: ess >= th.min_ess,
        batch: BatchReport::from(&bc),
    })?;
    Ok(Outcome::Done)
}

fn titanic_model(data: Option<&Path>) -> Result<Arc<psrf_core::samplers::LogisticModel>> {
    let Some(path) = data else {
        bail!("the titanic target needs --data <train.csv> (see scripts/fetch_titanic.sh)");
    };
    let model = load_titanic(path)?.into_model(experiments::TITANIC_PRIOR_VAR)?;
    Ok(Arc::new(model))
}

fn build_spec(args: &SamplerArgs) -> Result<SamplerSpec> {
    let mut spec = match args.target {
        TargetName::T5 => experiments::t5_spec(args.seed),
        TargetName::Ar1 => {
            let mut s = experiments::ar1_spec(5, args.seed);
            s.target = Target::Ar1 {
                rho: args.rho.unwrap_or(experiments::AR1_RHO),
                nu: args.nu.unwrap_or(experiments::AR1_NU),
            };
            s
        }
        TargetName::Bimodal => {
            experiments::bimodal_spec(args.proposal_var.unwrap_or(10.0), args.seed)
        }
        TargetName::Titanic => {
            experiments::titanic_spec(titanic_model(args.data.as_deref())?, args.seed)?
        }
    };
    if let Some(m) = args.m {
        spec.m = m;
    }
    if let Some(v) = args.proposal_var {
        spec.proposal_var = v;
    }
    spec.validate()?;
    Ok(spec)
}

/// Writes through a temporary sibling so readers never see partial files.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn component_header(p: usize) -> Vec<String> {
    (1..=p).map(|k| format!("x{k}")).collect()
}

pub fn simulate(args: &SimulateArgs) -> Result<Outcome> {
    let spec = build_spec(&args.sampler)?;
    if args.n < 2 {
        bail!("--n must be at least 2");
    }
    let mut sim = Simulation::new(spec.clone())?;
    sim.extend_to(args.n);
    let cs = sim.chain_set()?;
    create_dir(&args.outdir)?;
    let header = component_header(cs.p());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut files = Vec::new();
    for i in 0..cs.m() {
        let path = args.outdir.join(format!("chain_{}.csv", i + 1));
        write_atomic(&path, &format_chain_csv(&cs.chain_matrix(i), Some(&header)))?;
        files.push(path.display().to_string());
    }
    print_json(&SimulateReport {
        schema_version: SCHEMA_VERSION,
        m: cs.m(),
        n: cs.n(),
        p: cs.p(),
        seed: spec.seed,
        files,
        acceptance_rates: sim.acceptance_rates(),
    })?;
    Ok(Outcome::Done)
}

fn parse_schedule(text: &str, start: usize) -> Result<Schedule> {
    let (kind, value) = text.split_once(':').with_context(|| {
        format!("schedule {text:?} must look like fixed:<k> or geometric:<rate>")
    })?;
    match kind {
        "fixed" => Ok(Schedule::FixedIncrement(
            value
                .parse()
                .with_context(|| format!("bad increment {value:?}"))?,
        )),
        "geometric" => Ok(Schedule::Geometric {
            start,
            rate: value
                .parse()
                .with_context(|| format!("bad rate {value:?}"))?,
        }),
        _ => bail!("unknown schedule {kind:?} (expected fixed or geometric)"),
    }
}

pub fn monitor(args: &MonitorArgs) -> Result<Outcome> {
    let spec = build_spec(&args.sampler)?;
    let (th, min_effort) = threshold_for(&args.precision, spec.dim(), spec.m)?;
    let plan = MonitorPlan::new(th)
        .with_schedule(parse_schedule(&args.schedule, args.start)?)
        .with_min_effort(min_effort)
        .with_max_iterations(args.cap)
        .with_statistic(Statistic::from_parts(args.stat.into(), args.mv.into()))
        .with_batch(args.batch)
        .with_burnin_fraction(args.burnin_fraction);
    let trace = run_monitor(&spec, &plan)?;
    if let Some(path) = &args.trace {
        write_atomic(path, &format_trace_csv(&trace.entries))?;
    }
    let last = trace.last();
    print_json(&MonitorReport {
        schema_version: SCHEMA_VERSION,
        reason: trace.reason.as_str(),
        termination_n: trace.termination_n(),
        checkpoints: trace.entries.len(),
        psrf: last.psrf,
        ess: last.ess,
        delta: plan.delta(),
        min_effort: plan.min_effort,
        means: trace.chains.pooled_mean(),
        acceptance_rates: trace.acceptance_rates.clone(),
    })?;
    Ok(match trace.reason {
        Termination::ThresholdMet => Outcome::Converged,
        Termination::CapHit => Outcome::NotConverged,
    })
}

fn configurations(args: &ReproduceArgs) -> Result<Vec<Configuration>> {
    Ok(match args.experiment {
        Experiment::T5 => experiments::t5_configurations()?,
        Experiment::Ar1 => experiments::ar1_configurations()?,
        Experiment::Bimodal => experiments::bimodal_configurations()?,
        Experiment::Titanic => {
            experiments::titanic_configurations(titanic_model(args.data.as_deref())?)?
        }
    })
}

fn default_replications(experiment: Experiment) -> usize {
    match experiment {
        Experiment::T5 | Experiment::Bimodal => 100,
        Experiment::Ar1 => 50,
        Experiment::Titanic => 10,
    }
}

pub fn reproduce(args: &ReproduceArgs) -> Result<Outcome> {
    let configs = configurations(args)?;
    let reps = args
        .replications
        .unwrap_or_else(|| default_replications(args.experiment));
    if reps < 2 {
        bail!("--replications must be at least 2");
    }
    let root: PathBuf = args.outdir.join(args.experiment.to_string());
    create_dir(&root)?;

    let mut summaries = Vec::new();
    let mut summary_csv = String::from(
        "configuration,statistic,delta,min_effort,replications,threshold_met,\
         termination_mean,termination_median,termination_var,component,mean_of_means,sd_of_means\n",
    );
    for config in &configs {
        let dir = root.join(&config.label);
        let traces = dir.join("traces");
        create_dir(&traces)?;
        let results = experiments::replicate(config, reps, args.seed)?;
        for r in &results {
            write_atomic(
                &traces.join(format!("rep_{:04}.csv", r.rep)),
                &format_trace_csv(&r.trace),
            )?;
        }
        write_atomic(
            &dir.join("replications.csv"),
            &experiments::format_replications_csv(&results),
        )?;
        let s = experiments::summarize_replications(&results)?;
        let statistic = stat_name(config.plan.statistic.kind());
        for (k, (mu, sd)) in s.mean_of_means.iter().zip(&s.sd_of_means).enumerate() {
            let _ = writeln!(
                summary_csv,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                config.label,
                statistic,
                config.plan.delta(),
                config.plan.min_effort,
                s.replications,
                s.threshold_met,
                s.termination_mean,
                s.termination_median,
                s.termination_var,
                k + 1,
                mu,
                sd
            );
        }
        summaries.push(ConfigurationSummary {
            configuration: config.label.clone(),
            statistic,
            delta: config.plan.delta(),
            min_effort: config.plan.min_effort,
            replications: s.replications,
            threshold_met: s.threshold_met,
            termination_mean: s.termination_mean,
            termination_median: s.termination_median,
            termination_var: s.termination_var,
            mean_of_means: s.mean_of_means,
            sd_of_means: s.sd_of_means,
        });
    }
    if args.experiment == Experiment::Ar1 {
        let delta = configs[0].plan.delta();
        let n_star = ar1_crossing(experiments::AR1_RHO, experiments::AR1_NU, delta)?;
        write_atomic(
            &root.join("truth.csv"),
            &format!(
                "rho,nu,delta,true_crossing_n\n{},{},{},{}\n",
                experiments::AR1_RHO,
                experiments::AR1_NU,
                delta,
                n_star
            ),
        )?;
    }
    write_atomic(&root.join("summary.csv"), &summary_csv)?;
    print_json(&ReproduceReport {
        schema_version: SCHEMA_VERSION,
        experiment: args.experiment.to_string(),
        seed: args.seed,
        outdir: root.display().to_string(),
        configurations: summaries,
    })?;
    Ok(Outcome::Done)
}
