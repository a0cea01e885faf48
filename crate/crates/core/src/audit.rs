//! Mechanised property checks for a mechanism `(A, p)` where `A` is the
//! canonical optimal allocation of the declared scores and `p` a payment
//! rule.
//!
//! Each check returns an [`AuditResult`]. A failing result carries a
//! [`Counterexample`] holding the whole instance, so it can be replayed
//! without the code that found it. Deviation searches are falsification
//! tools: a pass means no profitable deviation was found on the searched
//! grid, not that none exists.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{for_each_allocation, solve_optimal, tolerance, Market};
use crate::model::{verify, Allocation, Scenario, TypeVector};
use crate::payments::{pay_exact, pay_sampled, PaymentReport, Rule};
use crate::sampling::{sample_seed, SamplingConfig};

/// Absolute tolerance of every check that expects exact arithmetic.
pub const EXACT_TOLERANCE: f64 = 1e-9;

/// Most allocations an exhaustive check will enumerate.
pub const MAX_ENUMERATED_ALLOCATIONS: usize = 200_000;

/// Self-contained copy of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSnapshot {
    pub agents: Vec<(String, u32)>,
    pub goods: Vec<String>,
    pub truth: Vec<Vec<f64>>,
}

impl InstanceSnapshot {
    pub fn of(s: &Scenario, t: &TypeVector) -> Self {
        InstanceSnapshot {
            agents: s
                .agents()
                .iter()
                .enumerate()
                .map(|(i, a)| (a.clone(), s.capacity(i)))
                .collect(),
            goods: s.goods().to_vec(),
            truth: rows(t),
        }
    }

    pub fn restore(&self) -> Result<(Scenario, TypeVector)> {
        let s = Scenario::new(self.agents.iter().cloned(), self.goods.iter().cloned())?;
        let t = TypeVector::from_rows(&s, self.truth.clone())?;
        Ok((s, t))
    }
}

fn rows(t: &TypeVector) -> Vec<Vec<f64>> {
    (0..t.n_agents()).map(|i| t.row(i).to_vec()).collect()
}

/// Inputs that violate a checked property, and the values that show it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub description: String,
    pub instance: InstanceSnapshot,
    /// declared scores, when they differ from the truth
    pub declared: Option<Vec<Vec<f64>>>,
    /// a second declaration profile compared against `declared`
    pub alternative: Option<Vec<Vec<f64>>>,
    /// allocation under scrutiny, as agent → good ids
    pub allocation: Option<Vec<Vec<String>>>,
    pub seed: Option<u64>,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub check: String,
    pub rule: String,
    pub passed: bool,
    pub counterexample: Option<Counterexample>,
    pub trials: usize,
    pub tolerance: f64,
    pub details: BTreeMap<String, f64>,
}

impl AuditResult {
    fn new(check: &str, rule: &Rule, tolerance: f64) -> Self {
        AuditResult {
            check: check.to_string(),
            rule: rule.name().to_string(),
            passed: true,
            counterexample: None,
            trials: 0,
            tolerance,
            details: BTreeMap::new(),
        }
    }

    fn fail(&mut self, c: Counterexample) {
        self.passed = false;
        if self.counterexample.is_none() {
            self.counterexample = Some(c);
        }
    }
}

fn named_alloc(s: &Scenario, pi: &Allocation) -> Vec<Vec<String>> {
    pi.named(s).into_iter().map(|(_, b)| b).collect()
}

fn counterexample(s: &Scenario, t: &TypeVector, description: String) -> Counterexample {
    Counterexample {
        description,
        instance: InstanceSnapshot::of(s, t),
        declared: None,
        alternative: None,
        allocation: None,
        seed: None,
        values: BTreeMap::new(),
    }
}

/// The mechanism: allocate on declarations, verify, pay.
pub fn run_mechanism(s: &Scenario, t: &TypeVector, d: &TypeVector, rule: &Rule) -> Result<PaymentReport> {
    let pi = solve_optimal(s, d)?;
    let view = verify(t, &pi)?;
    rule.pay(s, &pi, d, &view)
}

/// Candidate declarations searched by [`check_truthfulness`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSpace {
    /// per-agent cap on grid combinations; larger grids are subsampled
    pub max_combinations: usize,
    /// declaration profiles of the other agents tried besides the truthful one
    pub opponent_profiles: usize,
    pub seed: u64,
    /// agent index → full declared rows, tried before the grid
    pub named: Vec<(usize, Vec<f64>)>,
}

impl Default for DeviationSpace {
    fn default() -> Self {
        DeviationSpace {
            max_combinations: 2000,
            opponent_profiles: 2,
            seed: 0,
            named: Vec::new(),
        }
    }
}

impl DeviationSpace {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Adds a specific declaration of `agent`: `changes` overrides the true
    /// scores of the given goods.
    pub fn with_named(mut self, s: &Scenario, t: &TypeVector, agent: &str, changes: &[(&str, f64)]) -> Result<Self> {
        let i = s.agent_index(agent)?;
        let mut row = t.row(i).to_vec();
        for &(g, x) in changes {
            if !x.is_finite() {
                return Err(Error::structural(format!("non-finite score {x}")));
            }
            row[s.good_index(g)?] = x;
        }
        self.named.push((i, row));
        Ok(self)
    }

    /// Per owned good `g` (true score positive), the values
    /// `{t−3, t−1, t, t+1, t+3, 0}` clipped at −1; other goods keep their
    /// true score. The first row is always the truth.
    pub fn grid(&self, t: &TypeVector, agent: usize) -> Vec<Vec<f64>> {
        let truth = t.row(agent).to_vec();
        let owned: Vec<(usize, Vec<f64>)> = truth
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(|(g, &x)| {
                let mut vals: Vec<f64> = [x, x - 3.0, x - 1.0, x + 1.0, x + 3.0, 0.0]
                    .iter()
                    .map(|v| v.max(-1.0))
                    .collect();
                let mut seen = Vec::new();
                vals.retain(|v| {
                    let fresh = !seen.contains(&v.to_bits());
                    seen.push(v.to_bits());
                    fresh
                });
                (g, vals)
            })
            .collect();
        let total = owned
            .iter()
            .try_fold(1usize, |acc, (_, v)| acc.checked_mul(v.len()));
        let build = |choice: &[usize]| {
            let mut row = truth.clone();
            for ((g, vals), &k) in owned.iter().zip(choice) {
                row[*g] = vals[k];
            }
            row
        };
        match total {
            Some(total) if total <= self.max_combinations => {
                let mut out = Vec::with_capacity(total);
                let mut choice = vec![0usize; owned.len()];
                loop {
                    out.push(build(&choice));
                    // odometer over the choices
                    let mut k = 0;
                    while k < choice.len() {
                        choice[k] += 1;
                        if choice[k] < owned[k].1.len() {
                            break;
                        }
                        choice[k] = 0;
                        k += 1;
                    }
                    if k == choice.len() {
                        break;
                    }
                }
                out
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(self.seed, agent as u64, 0x6772_6964));
                let mut seen = BTreeSet::new();
                let mut out = vec![truth.clone()];
                seen.insert(vec![0usize; owned.len()]);
                let mut attempts = 0;
                while out.len() < self.max_combinations && attempts < 20 * self.max_combinations {
                    attempts += 1;
                    let choice: Vec<usize> = owned.iter().map(|(_, v)| rng.gen_range(0..v.len())).collect();
                    if seen.insert(choice.clone()) {
                        out.push(build(&choice));
                    }
                }
                out
            }
        }
    }
}

/// Truthful reporting must be a dominant strategy: for every agent and
/// every searched deviation, against truthful and sampled opponents, the
/// agent's true utility may not increase.
pub fn check_truthfulness(s: &Scenario, t: &TypeVector, rule: &Rule, space: &DeviationSpace) -> Result<AuditResult> {
    t.check_shape(s)?;
    let mut res = AuditResult::new("truthfulness", rule, EXACT_TOLERANCE);
    let n = s.n_agents();
    let grids: Vec<Vec<Vec<f64>>> = (0..n).map(|i| space.grid(t, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(space.seed, 0x7472_7574, 0));

    for i in 0..n {
        // opponents: truthful first, then sampled grid profiles
        let mut opponents = vec![t.clone()];
        for _ in 0..space.opponent_profiles.min(if n > 1 { usize::MAX } else { 0 }) {
            let mut w = t.clone();
            for j in (0..n).filter(|&j| j != i) {
                let row = grids[j].choose(&mut rng).expect("grid contains the truth");
                w = w.with_row(j, row)?;
            }
            opponents.push(w);
        }
        let mut candidates: Vec<&Vec<f64>> = space
            .named
            .iter()
            .filter(|(a, _)| *a == i)
            .map(|(_, r)| r)
            .collect();
        candidates.extend(grids[i].iter().skip(1));

        for base in &opponents {
            let honest = base.with_row(i, t.row(i))?;
            let u_honest = run_mechanism(s, t, &honest, rule)?.utilities[i];
            let outcomes: Vec<Result<(f64, usize)>> = candidates
                .par_iter()
                .enumerate()
                .map(|(k, row)| {
                    let d = base.with_row(i, row)?;
                    Ok((run_mechanism(s, t, &d, rule)?.utilities[i], k))
                })
                .collect();
            for out in outcomes {
                let (u_dev, k) = out?;
                res.trials += 1;
                if u_dev > u_honest + EXACT_TOLERANCE && res.passed {
                    let d = base.with_row(i, candidates[k])?;
                    let pi = solve_optimal(s, &d)?;
                    let mut c = counterexample(
                        s,
                        t,
                        format!(
                            "agent `{}` raises its utility from {u_honest} to {u_dev} by misreporting",
                            s.agents()[i]
                        ),
                    );
                    c.declared = Some(rows(&d));
                    c.alternative = Some(rows(&honest));
                    c.allocation = Some(named_alloc(s, &pi));
                    c.seed = Some(space.seed);
                    c.values.insert("agent".into(), i as f64);
                    c.values.insert("utility_truthful".into(), u_honest);
                    c.values.insert("utility_deviation".into(), u_dev);
                    res.fail(c);
                }
            }
        }
    }
    Ok(res)
}

/// At truthful declarations, payments must sum to zero: within 1e-9 for
/// deterministic rules, within `ε·opt` for the plain sampled rule.
pub fn check_budget_balance(s: &Scenario, t: &TypeVector, rule: &Rule) -> Result<AuditResult> {
    let report = run_mechanism(s, t, t, rule)?;
    let opt = report.allocation.value(t);
    let tol = match rule {
        Rule::Sampled(cfg) => cfg.epsilon * opt.abs() + EXACT_TOLERANCE,
        _ => EXACT_TOLERANCE,
    };
    let mut res = AuditResult::new("budget-balance", rule, tol);
    res.trials = 1;
    let sum = report.budget();
    res.details.insert("payment_sum".into(), sum);
    res.details.insert("opt".into(), opt);
    if sum.abs() > tol {
        let mut c = counterexample(s, t, format!("payments sum to {sum} at truthful declarations"));
        c.allocation = Some(named_alloc(s, &report.allocation));
        c.seed = rule.sampling().map(|c| c.seed);
        c.values.insert("payment_sum".into(), sum);
        res.fail(c);
    }
    Ok(res)
}

/// Utilities of every feasible allocation when declarations are truthful,
/// `None` where the rule is undefined.
struct Outcomes {
    equilibrium: PaymentReport,
    all: Vec<(Allocation, Option<Vec<f64>>)>,
}

fn outcomes(s: &Scenario, t: &TypeVector, rule: &Rule) -> Result<Outcomes> {
    let equilibrium = run_mechanism(s, t, t, rule)?;
    let mut allocs = Vec::new();
    for_each_allocation(s, MAX_ENUMERATED_ALLOCATIONS, |a| allocs.push(a.clone()))?;
    let all = allocs
        .into_par_iter()
        .map(|pi| {
            let u = verify(t, &pi)
                .and_then(|view| rule.pay(s, &pi, t, &view))
                .map(|r| r.utilities)
                .ok();
            (pi, u)
        })
        .collect();
    Ok(Outcomes { equilibrium, all })
}

fn fairness_from(s: &Scenario, t: &TypeVector, rule: &Rule, o: &Outcomes) -> AuditResult {
    let mut res = AuditResult::new("fairness", rule, EXACT_TOLERANCE);
    let star = &o.equilibrium.utilities;
    let goods: Vec<usize> = (0..s.n_goods()).collect();
    let market = Market::new(s, t, &goods);
    let opt = market.solve_agents(0..s.n_agents());
    let mut undefined = 0;
    let mut strict_checked = 0;
    for (pi, u) in &o.all {
        let Some(u) = u else {
            undefined += 1;
            continue;
        };
        res.trials += 1;
        if let Some(i) = (0..s.n_agents()).find(|&i| u[i] > star[i] + EXACT_TOLERANCE) {
            let mut c = counterexample(
                s,
                t,
                format!(
                    "agent `{}` prefers an alternative allocation ({} > {})",
                    s.agents()[i],
                    u[i],
                    star[i]
                ),
            );
            c.allocation = Some(named_alloc(s, pi));
            c.values.insert("agent".into(), i as f64);
            c.values.insert("utility_equilibrium".into(), star[i]);
            c.values.insert("utility_alternative".into(), u[i]);
            res.fail(c);
        }
        // strict part: an allocation whose goods cannot support an optimum
        // must leave someone strictly worse off
        let img_opt = Market::new(s, t, &pi.image()).solve_agents(0..s.n_agents());
        if img_opt < opt - tolerance(opt) {
            strict_checked += 1;
            if (0..s.n_agents()).all(|i| star[i] <= u[i] + EXACT_TOLERANCE) {
                let mut c = counterexample(s, t, "a suboptimal allocation hurts no agent".into());
                c.allocation = Some(named_alloc(s, pi));
                res.fail(c);
            }
        }
    }
    res.details.insert("undefined_allocations".into(), undefined as f64);
    res.details.insert("strictly_checked".into(), strict_checked as f64);
    res
}

fn envy_from(s: &Scenario, t: &TypeVector, rule: &Rule, o: &Outcomes) -> AuditResult {
    let mut res = AuditResult::new("envy-freeness", rule, EXACT_TOLERANCE);
    let star = &o.equilibrium.utilities;
    let eq = &o.equilibrium.allocation;
    for (pi, u) in &o.all {
        let Some(u) = u else { continue };
        for i in 0..s.n_agents() {
            for j in 0..s.n_agents() {
                if pi.bundle(i) != eq.bundle(j) {
                    continue;
                }
                res.trials += 1;
                if u[i] > star[i] + EXACT_TOLERANCE {
                    let mut c = counterexample(
                        s,
                        t,
                        format!(
                            "agent `{}` envies the bundle of `{}` ({} > {})",
                            s.agents()[i],
                            s.agents()[j],
                            u[i],
                            star[i]
                        ),
                    );
                    c.allocation = Some(named_alloc(s, pi));
                    c.values.insert("agent".into(), i as f64);
                    c.values.insert("other".into(), j as f64);
                    res.fail(c);
                }
            }
        }
    }
    res
}

fn pareto_from(s: &Scenario, t: &TypeVector, rule: &Rule, o: &Outcomes) -> AuditResult {
    let mut res = AuditResult::new("pareto", rule, EXACT_TOLERANCE);
    let star = &o.equilibrium.utilities;
    for (pi, u) in &o.all {
        let Some(u) = u else { continue };
        res.trials += 1;
        let weakly = (0..s.n_agents()).all(|i| u[i] >= star[i] - EXACT_TOLERANCE);
        let strictly = (0..s.n_agents()).any(|i| u[i] > star[i] + EXACT_TOLERANCE);
        if weakly && strictly {
            let mut c = counterexample(s, t, "an alternative allocation Pareto-dominates the equilibrium".into());
            c.allocation = Some(named_alloc(s, pi));
            res.fail(c);
        }
    }
    res
}

/// At truth, no agent prefers any feasible allocation to the mechanism's;
/// allocations that cannot support an optimum make some agent strictly
/// worse off.
pub fn check_fairness(s: &Scenario, t: &TypeVector, rule: &Rule) -> Result<AuditResult> {
    Ok(fairness_from(s, t, rule, &outcomes(s, t, rule)?))
}

/// No agent gains by receiving another agent's equilibrium bundle instead,
/// whatever the others receive.
pub fn check_envy_freeness(s: &Scenario, t: &TypeVector, rule: &Rule) -> Result<AuditResult> {
    Ok(envy_from(s, t, rule, &outcomes(s, t, rule)?))
}

/// No feasible allocation weakly improves every agent and strictly improves
/// one.
pub fn check_pareto(s: &Scenario, t: &TypeVector, rule: &Rule) -> Result<AuditResult> {
    Ok(pareto_from(s, t, rule, &outcomes(s, t, rule)?))
}

fn trial_rng(seed: u64, trial: usize, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sample_seed(seed, salt, trial as u64))
}

/// A declaration profile near the truth: a few random scores replaced.
fn random_declaration(s: &Scenario, t: &TypeVector, rng: &mut ChaCha8Rng) -> Result<TypeVector> {
    let mut d = t.clone();
    if s.n_agents() == 0 || s.n_goods() == 0 {
        return Ok(d);
    }
    for _ in 0..rng.gen_range(0..=s.n_goods()) {
        let (i, g) = (rng.gen_range(0..s.n_agents()), rng.gen_range(0..s.n_goods()));
        d.set(i, g, rng.gen_range(-1..=10) as f64)?;
    }
    Ok(d)
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Changing declared scores of goods outside `img(π)` must leave every
/// payment bit-identical.
pub fn check_implementability(s: &Scenario, t: &TypeVector, rule: &Rule, trials: usize, seed: u64) -> Result<AuditResult> {
    let mut res = AuditResult::new("implementability", rule, 0.0);
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial, 0x696d_706c);
        let w = random_declaration(s, t, &mut rng)?;
        let pi = solve_optimal(s, &w)?;
        let view = verify(t, &pi)?;
        let img = pi.image();
        let outside: Vec<usize> = (0..s.n_goods()).filter(|g| img.binary_search(g).is_err()).collect();
        let mut w2 = w.clone();
        if !outside.is_empty() {
            for i in 0..s.n_agents() {
                for &g in &outside {
                    if rng.gen_bool(0.5) {
                        w2.set(i, g, rng.gen_range(-1..=10) as f64)?;
                    }
                }
            }
        }
        let a = rule.pay(s, &pi, &w, &view)?;
        let b = rule.pay(s, &pi, &w2, &view)?;
        res.trials += 1;
        if !same_bits(&a.payments, &b.payments) {
            let mut c = counterexample(s, t, "payments depend on declarations outside the allocated goods".into());
            c.declared = Some(rows(&w));
            c.alternative = Some(rows(&w2));
            c.allocation = Some(named_alloc(s, &pi));
            c.seed = Some(seed);
            c.values.insert("trial".into(), trial as f64);
            res.fail(c);
        }
    }
    Ok(res)
}

/// Replacing an agent's declaration by its true type must leave that
/// agent's payment bit-identical, for any allocation and any declarations
/// of the others.
pub fn check_no_punishment(s: &Scenario, t: &TypeVector, rule: &Rule, trials: usize, seed: u64) -> Result<AuditResult> {
    let mut res = AuditResult::new("no-punishment", rule, 0.0);
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial, 0x7075_6e69);
        let w = random_declaration(s, t, &mut rng)?;
        let pi = solve_optimal(s, &w)?;
        let view = verify(t, &pi)?;
        let base = rule.pay(s, &pi, &w, &view)?;
        for i in 0..s.n_agents() {
            let honest = w.with_row(i, t.row(i))?;
            let p = rule.pay(s, &pi, &honest, &view)?;
            res.trials += 1;
            if p.payments[i].to_bits() != base.payments[i].to_bits() {
                let mut c = counterexample(
                    s,
                    t,
                    format!(
                        "payment of `{}` changes from {} to {} when it reports truthfully",
                        s.agents()[i],
                        base.payments[i],
                        p.payments[i]
                    ),
                );
                c.declared = Some(rows(&w));
                c.alternative = Some(rows(&honest));
                c.allocation = Some(named_alloc(s, &pi));
                c.seed = Some(seed);
                c.values.insert("agent".into(), i as f64);
                c.values.insert("trial".into(), trial as f64);
                res.fail(c);
            }
        }
    }
    Ok(res)
}

/// Largest agent count for [`check_sampler_accuracy`], which needs the
/// exact rule as reference.
pub const SAMPLER_CHECK_MAX_AGENTS: usize = 10;

/// Runs the sampled rule `trials` times with derived seeds and counts the
/// runs in which some utility misses the exact one by more than a relative
/// `ε`. Passes if that frequency stays within `δ + 3·sqrt(δ(1−δ)/trials)`;
/// the measured rate is always reported.
pub fn check_sampler_accuracy(s: &Scenario, t: &TypeVector, cfg: &SamplingConfig, trials: usize) -> Result<AuditResult> {
    if s.n_agents() > SAMPLER_CHECK_MAX_AGENTS {
        return Err(Error::size("sampler accuracy check", s.n_agents(), SAMPLER_CHECK_MAX_AGENTS));
    }
    cfg.validate()?;
    let rule = Rule::Sampled(*cfg);
    let pi = solve_optimal(s, t)?;
    let view = verify(t, &pi)?;
    let exact = pay_exact(s, &pi, t, &view)?.utilities;
    let runs: Vec<Result<(bool, Vec<f64>)>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let c = cfg.with_seed(sample_seed(cfg.seed, 0x7361_6d70, k as u64));
            let u = pay_sampled(s, &pi, t, &view, &c)?.utilities;
            let miss = u
                .iter()
                .zip(&exact)
                .any(|(a, b)| (a - b).abs() > cfg.epsilon * b.abs() + EXACT_TOLERANCE);
            Ok((miss, u))
        })
        .collect();
    let mut res = AuditResult::new("sampler-accuracy", &rule, cfg.epsilon);
    let mut misses = 0;
    let mut worst: Option<(usize, Vec<f64>)> = None;
    for (k, r) in runs.into_iter().enumerate() {
        let (miss, u) = r?;
        res.trials += 1;
        if miss {
            misses += 1;
            worst.get_or_insert((k, u));
        }
    }
    let rate = if trials == 0 { 0.0 } else { misses as f64 / trials as f64 };
    let d = cfg.delta;
    let bound = if trials == 0 { 1.0 } else { d + 3.0 * (d * (1.0 - d) / trials as f64).sqrt() };
    res.details.insert("failure_rate".into(), rate);
    res.details.insert("failure_bound".into(), bound);
    res.details.insert("failures".into(), misses as f64);
    if rate > bound {
        let (k, u) = worst.expect("a failing run exists");
        let mut c = counterexample(s, t, format!("sampled utilities miss the exact ones in {misses} of {trials} runs"));
        c.allocation = Some(named_alloc(s, &pi));
        c.seed = Some(sample_seed(cfg.seed, 0x7361_6d70, k as u64));
        for (i, (a, b)) in u.iter().zip(&exact).enumerate() {
            c.values.insert(format!("sampled_{}", s.agents()[i]), *a);
            c.values.insert(format!("exact_{}", s.agents()[i]), *b);
        }
        res.fail(c);
    }
    Ok(res)
}

/// Names accepted by [`run_checks`].
pub const CHECKS: [&str; 8] = [
    "truthfulness",
    "budget-balance",
    "fairness",
    "envy-freeness",
    "pareto",
    "implementability",
    "no-punishment",
    "sampler-accuracy",
];

/// Options shared by [`run_checks`].
#[derive(Debug, Clone)]
pub struct AuditOptions {
    pub space: DeviationSpace,
    pub trials: usize,
    pub seed: u64,
    /// used by `sampler-accuracy`
    pub sampling: SamplingConfig,
    pub sampler_trials: usize,
}

impl AuditOptions {
    pub fn new(n_agents: usize, seed: u64) -> Result<Self> {
        Ok(AuditOptions {
            space: DeviationSpace::default().with_seed(seed),
            trials: 100,
            seed,
            sampling: SamplingConfig::from_accuracy(n_agents, 0.1, 0.25, seed)?,
            sampler_trials: 200,
        })
    }
}

/// Runs the named checks in order. The exhaustive checks share one
/// enumeration of all allocations.
pub fn run_checks(
    s: &Scenario,
    t: &TypeVector,
    rule: &Rule,
    checks: &[&str],
    opts: &AuditOptions,
) -> Result<Vec<AuditResult>> {
    if let Some(bad) = checks.iter().find(|c| !CHECKS.contains(c)) {
        return Err(Error::Config(format!(
            "unknown check `{bad}`; expected one of {}",
            CHECKS.join(", ")
        )));
    }
    let needs_outcomes = checks
        .iter()
        .any(|c| matches!(*c, "fairness" | "envy-freeness" | "pareto"));
    let shared = if needs_outcomes { Some(outcomes(s, t, rule)?) } else { None };
    checks
        .iter()
        .map(|&c| match c {
            "truthfulness" => check_truthfulness(s, t, rule, &opts.space),
            "budget-balance" => check_budget_balance(s, t, rule),
            "fairness" => Ok(fairness_from(s, t, rule, shared.as_ref().unwrap())),
            "envy-freeness" => Ok(envy_from(s, t, rule, shared.as_ref().unwrap())),
            "pareto" => Ok(pareto_from(s, t, rule, shared.as_ref().unwrap())),
            "implementability" => check_implementability(s, t, rule, opts.trials, opts.seed),
            "no-punishment" => check_no_punishment(s, t, rule, opts.trials, opts.seed),
            "sampler-accuracy" => check_sampler_accuracy(s, t, &opts.sampling, opts.sampler_trials),
            _ => unreachable!("validated above"),
        })
        .collect()
}
