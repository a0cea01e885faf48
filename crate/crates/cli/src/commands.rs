use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fairshare::audit::{run_checks, AuditOptions, AuditResult, Counterexample, DeviationSpace, CHECKS};
use fairshare::games::{best_game, marg_game, shapley_exact, shapley_sampled};
use fairshare::matching::solve_optimal;
use fairshare::model::{verify, Allocation, Scenario};
use fairshare::payments::{DeltaBasis, Rule, EXACT_MAX_AGENTS};
use fairshare::sampling::SamplingConfig;
use serde::Serialize;

use crate::schema::ScenarioFile;
use crate::{CliError, Command, GameKind, Mode, RuleArgs, RuleKind, SamplingArgs};

#[derive(Serialize)]
struct Bundle {
    agent: String,
    goods: Vec<String>,
}

fn bundles(s: &Scenario, pi: &Allocation) -> Vec<Bundle> {
    pi.named(s)
        .into_iter()
        .map(|(agent, goods)| Bundle { agent, goods })
        .collect()
}

#[derive(Serialize)]
struct SolveReport {
    allocation: Vec<Bundle>,
    declared_value: f64,
}

#[derive(Serialize)]
struct AgentLine {
    agent: String,
    payment: f64,
    utility: f64,
    share: f64,
}

#[derive(Serialize)]
struct PayReport {
    rule: String,
    allocation: Vec<Bundle>,
    agents: Vec<AgentLine>,
    declared_value: f64,
    verified_value: f64,
    verified_goods: Vec<String>,
    budget: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampling: Option<SamplingConfig>,
    diagnostics: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct AuditLine {
    check: String,
    rule: String,
    passed: bool,
    trials: usize,
    tolerance: f64,
    details: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct AuditReport {
    rule: String,
    passed: bool,
    results: Vec<AuditLine>,
}

#[derive(Serialize)]
struct FoundCounterexample<'a> {
    check: &'a str,
    counterexample: &'a Counterexample,
}

#[derive(Serialize)]
struct ShapleyLine {
    agent: String,
    value: f64,
}

#[derive(Serialize)]
struct ShapleyReport {
    game: &'static str,
    mode: &'static str,
    scores: &'static str,
    values: Vec<ShapleyLine>,
    total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampling: Option<SamplingConfig>,
}

fn print<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serialises"));
}

fn load(path: &Path) -> Result<ScenarioFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    ScenarioFile::parse(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn sampling(n: usize, a: &SamplingArgs) -> Result<SamplingConfig, CliError> {
    let mut cfg = SamplingConfig::from_accuracy(n, a.epsilon, a.delta, a.seed)?;
    if let Some(m) = a.samples {
        cfg = cfg.with_samples(m);
    }
    if let Some(r) = a.reps {
        cfg = cfg.with_reps(r);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn rule(n: usize, a: &RuleArgs) -> Result<Rule, CliError> {
    Ok(match a.rule {
        RuleKind::Exact => Rule::EXACT,
        RuleKind::ExactDeclared => Rule::Exact(DeltaBasis::Declared),
        RuleKind::Sampled => Rule::Sampled(sampling(n, &a.sampling)?),
        RuleKind::Normalized => Rule::Normalized {
            cfg: sampling(n, &a.sampling)?,
            flipped_sign: a.flipped_sign,
        },
        RuleKind::Proj => Rule::Proj,
        RuleKind::Owner => Rule::Owner,
        RuleKind::All => Rule::All { variant: a.variant_all },
    })
}

pub fn run(cmd: Command) -> Result<u8, CliError> {
    match cmd {
        Command::Solve { file } => {
            let f = load(&file)?;
            let pi = solve_optimal(&f.scenario, &f.declared)?;
            print(&SolveReport {
                allocation: bundles(&f.scenario, &pi),
                declared_value: pi.value(&f.declared),
            });
            Ok(0)
        }
        Command::Pay {
            file,
            rule: args,
            fallback_sampled,
        } => {
            let f = load(&file)?;
            let s = &f.scenario;
            let truth = f.require_truth("pay")?;
            let mut r = rule(s.n_agents(), &args)?;
            if matches!(r, Rule::Exact(_)) && s.n_agents() > EXACT_MAX_AGENTS && fallback_sampled {
                eprintln!(
                    "warning: {} agents exceed the exact rule's cap of {EXACT_MAX_AGENTS}; using the sampled rule",
                    s.n_agents()
                );
                r = Rule::Sampled(sampling(s.n_agents(), &args.sampling)?);
            }
            let pi = solve_optimal(s, &f.declared)?;
            let view = verify(truth, &pi)?;
            let report = r.pay(s, &pi, &f.declared, &view)?;
            print(&PayReport {
                rule: report.rule.clone(),
                allocation: bundles(s, &pi),
                agents: (0..s.n_agents())
                    .map(|i| AgentLine {
                        agent: s.agents()[i].clone(),
                        payment: report.payments[i],
                        utility: report.utilities[i],
                        share: report.shares[i],
                    })
                    .collect(),
                declared_value: pi.value(&f.declared),
                verified_value: pi.value(truth),
                verified_goods: view.verified_goods().iter().map(|&g| s.goods()[g].clone()).collect(),
                budget: report.budget(),
                sampling: report.sampling,
                diagnostics: report.diagnostics.clone(),
            });
            Ok(0)
        }
        Command::Audit {
            file,
            checks,
            rule: args,
            deviations,
            trials,
            sampler_trials,
            out,
        } => {
            let f = load(&file)?;
            let s = &f.scenario;
            let truth = f.require_truth("audit")?;
            let r = rule(s.n_agents(), &args)?;
            let checks: Vec<String> = match checks {
                Some(list) => list.into_iter().filter(|c| !c.is_empty()).collect(),
                None => CHECKS.iter().map(|c| c.to_string()).collect(),
            };
            if let Some(bad) = checks.iter().find(|c| !CHECKS.contains(&c.as_str())) {
                return Err(CliError::Input(format!(
                    "unknown check `{bad}`; expected one of {}",
                    CHECKS.join(", ")
                )));
            }
            let mut opts = AuditOptions::new(s.n_agents(), args.sampling.seed)?;
            opts.trials = trials;
            opts.sampler_trials = sampler_trials;
            opts.sampling = sampling(s.n_agents(), &args.sampling)?;
            opts.space = named_deviations(opts.space, &f, &deviations)?;
            let names: Vec<&str> = checks.iter().map(String::as_str).collect();
            let results = run_checks(s, truth, &r, &names, &opts)?;
            let passed = results.iter().all(|r| r.passed);
            print(&AuditReport {
                rule: r.name().to_string(),
                passed,
                results: results.iter().map(line).collect(),
            });
            write_counterexamples(&results, out.as_deref())?;
            Ok(if passed { 0 } else { 1 })
        }
        Command::Shapley {
            file,
            game,
            mode,
            sampling: args,
        } => {
            let f = load(&file)?;
            let s = &f.scenario;
            let (scores, w) = match &f.truth {
                Some(t) => ("true", t),
                None => ("declared", &f.declared),
            };
            let g = match game {
                GameKind::Best => best_game(s, w)?,
                GameKind::Marg => marg_game(s, w)?,
            };
            let (sv, cfg) = match mode {
                Mode::Exact => (shapley_exact(&g)?, None),
                Mode::Sampled => {
                    let cfg = sampling(s.n_agents(), &args)?;
                    (shapley_sampled(&g, &cfg)?, Some(cfg))
                }
            };
            print(&ShapleyReport {
                game: match game {
                    GameKind::Best => "best",
                    GameKind::Marg => "marg",
                },
                mode: match mode {
                    Mode::Exact => "exact",
                    Mode::Sampled => "sampled",
                },
                scores,
                total: sv.total(),
                values: sv
                    .players
                    .into_iter()
                    .zip(sv.values)
                    .map(|(agent, value)| ShapleyLine { agent, value })
                    .collect(),
                sampling: cfg,
            });
            Ok(0)
        }
        Command::Check { file } => {
            println!("{}", load(&file)?.to_json());
            Ok(0)
        }
    }
}

fn line(r: &AuditResult) -> AuditLine {
    AuditLine {
        check: r.check.clone(),
        rule: r.rule.clone(),
        passed: r.passed,
        trials: r.trials,
        tolerance: r.tolerance,
        details: r.details.clone(),
    }
}

/// `agent:good=score,good=score`
fn named_deviations(mut space: DeviationSpace, f: &ScenarioFile, specs: &[String]) -> Result<DeviationSpace, CliError> {
    let truth = f.require_truth("audit")?;
    for spec in specs {
        let bad = || CliError::Input(format!("bad deviation `{spec}`; expected agent:good=score,..."));
        let (agent, rest) = spec.split_once(':').ok_or_else(bad)?;
        let mut changes = Vec::new();
        for part in rest.split(',') {
            let (good, score) = part.split_once('=').ok_or_else(bad)?;
            let score: f64 = score.trim().parse().map_err(|_| bad())?;
            changes.push((good.trim(), score));
        }
        space = space
            .with_named(&f.scenario, truth, agent.trim(), &changes)
            .map_err(|e| CliError::Input(format!("deviation `{spec}`: {e}")))?;
    }
    Ok(space)
}

fn write_counterexamples(results: &[AuditResult], out: Option<&Path>) -> Result<(), CliError> {
    let found: Vec<FoundCounterexample> = results
        .iter()
        .filter_map(|r| {
            r.counterexample.as_ref().map(|c| FoundCounterexample {
                check: &r.check,
                counterexample: c,
            })
        })
        .collect();
    let text = serde_json::to_string_pretty(&found).expect("counterexamples serialise");
    match out {
        Some(path) => fs::write(path, text + "\n")?,
        None if !found.is_empty() => eprintln!("{text}"),
        None => {}
    }
    Ok(())
}
