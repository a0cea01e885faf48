//! Payment rules: the verified Shapley-share rules (exact, sampled and
//! normalized) and the three division baselines.
//!
//! Every rule sees the scenario, the allocation `π`, the declared vector `w`
//! and the verifier's view of `img(π)`. Utilities are quasi-linear:
//! `u_i = v_i(π) + p_i`.
//!
//! The share `ξ_i` of the exact rule is the Shapley-weighted sum over
//! coalitions `C ∋ i` of `Δ¹_{C,i} − Δ²_{C,i}` where, by default,
//! `Δ¹_{C,i} = opt(C, img(π), (v_i, w_{−i}))` and
//! `Δ²_{C,i} = opt(C∖{i}, img(π), w)`. [`DeltaBasis::Declared`] instead
//! evaluates agent `i`'s verified scores on the allocation that is optimal
//! for the declarations; that variant can punish an agent for someone
//! else's misreport and is kept for comparison only.

mod baselines;
mod engine;

use std::collections::BTreeMap;

use serde::Serialize;

pub use baselines::{authorship, divide_all, divide_owner, divide_proj, Authorship};

use crate::error::{Error, Result};
use crate::matching::{canonical_optimum, Market};
use crate::model::{Allocation, Scenario, TypeVector, VerifiedView};
use crate::sampling::SamplingConfig;
use engine::{exact_shares, median_estimate, median_reps, Estimator, RuleGame};

pub(crate) use engine::{coalition_table, shapley_weights};

/// Largest agent count accepted by the exact rule.
pub const EXACT_MAX_AGENTS: usize = 18;

/// How the exact rule values an agent's own contribution to a coalition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum DeltaBasis {
    /// Best value of the coalition when the agent's row is replaced by its
    /// verified scores.
    #[default]
    VerifiedSelf,
    /// Verified scores of the agent on the allocation that is optimal for
    /// the declared scores.
    Declared,
}

/// A payment rule together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Rule {
    Exact(DeltaBasis),
    Sampled(SamplingConfig),
    /// `flipped_sign` selects `p_i = v_i(π) − ξ̂_i·R` instead of the default
    /// `p_i = ξ̂_i·R − v_i(π)`.
    Normalized { cfg: SamplingConfig, flipped_sign: bool },
    Proj,
    Owner,
    /// `variant` scales by the total verified value instead of the agent's
    /// own verified value.
    All { variant: bool },
}

impl Rule {
    pub const EXACT: Rule = Rule::Exact(DeltaBasis::VerifiedSelf);

    pub fn name(&self) -> &'static str {
        match self {
            Rule::Exact(DeltaBasis::VerifiedSelf) => "exact",
            Rule::Exact(DeltaBasis::Declared) => "exact-declared",
            Rule::Sampled(_) => "sampled",
            Rule::Normalized { .. } => "normalized",
            Rule::Proj => "proj",
            Rule::Owner => "owner",
            Rule::All { variant: false } => "all",
            Rule::All { variant: true } => "all-variant",
        }
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self, Rule::Sampled(_) | Rule::Normalized { .. })
    }

    pub fn sampling(&self) -> Option<SamplingConfig> {
        match *self {
            Rule::Sampled(cfg) | Rule::Normalized { cfg, .. } => Some(cfg),
            _ => None,
        }
    }

    pub fn pay(&self, s: &Scenario, pi: &Allocation, w: &TypeVector, view: &VerifiedView) -> Result<PaymentReport> {
        match *self {
            Rule::Exact(basis) => pay_exact_with(s, pi, w, view, basis),
            Rule::Sampled(cfg) => pay_sampled(s, pi, w, view, &cfg),
            Rule::Normalized { cfg, flipped_sign } => pay_normalized_with(s, pi, w, view, &cfg, flipped_sign),
            Rule::Proj => {
                check_inputs(s, pi, w, view)?;
                division_report(self.name(), s, pi, view, divide_proj(pi, view)?)
            }
            Rule::Owner => {
                check_inputs(s, pi, w, view)?;
                division_report(self.name(), s, pi, view, divide_owner(pi, view, &authorship(view))?)
            }
            Rule::All { variant } => {
                check_inputs(s, pi, w, view)?;
                division_report(self.name(), s, pi, view, divide_all(pi, view, w, variant)?)
            }
        }
    }
}

/// Payments and utilities of one rule on one allocation. Vectors are indexed
/// by agent position in the scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaymentReport {
    pub rule: String,
    pub allocation: Allocation,
    pub payments: Vec<f64>,
    pub utilities: Vec<f64>,
    /// `ξ_i` for the share rules, the division for the baselines
    pub shares: Vec<f64>,
    pub sampling: Option<SamplingConfig>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl PaymentReport {
    fn new(rule: &str, pi: &Allocation, view: &VerifiedView, payments: Vec<f64>, shares: Vec<f64>) -> Result<Self> {
        let utilities = utilities(pi, view, &payments)?;
        Ok(PaymentReport {
            rule: rule.to_string(),
            allocation: pi.clone(),
            payments,
            utilities,
            shares,
            sampling: None,
            diagnostics: BTreeMap::new(),
        })
    }

    /// `Σ_i p_i`.
    pub fn budget(&self) -> f64 {
        self.payments.iter().sum()
    }
}

/// `u_i = v_i(π) + p_i` for the payments of `report`.
pub fn utility_of(report: &PaymentReport, view: &VerifiedView, pi: &Allocation) -> Result<Vec<f64>> {
    utilities(pi, view, &report.payments)
}

fn utilities(pi: &Allocation, view: &VerifiedView, payments: &[f64]) -> Result<Vec<f64>> {
    if payments.len() != pi.n_agents() {
        return Err(Error::structural("payment vector does not match the allocation"));
    }
    (0..pi.n_agents())
        .map(|i| Ok(view.bundle_value(i, pi)? + payments[i]))
        .collect()
}

fn check_inputs(s: &Scenario, pi: &Allocation, w: &TypeVector, view: &VerifiedView) -> Result<()> {
    w.check_shape(s)?;
    pi.check_shape(s)?;
    // revalidate against this scenario's capacities and goods
    Allocation::new(s, pi.bundles().to_vec())?;
    view.check_matches(pi)
}

fn division_report(
    name: &str,
    s: &Scenario,
    pi: &Allocation,
    view: &VerifiedView,
    division: Vec<f64>,
) -> Result<PaymentReport> {
    let payments = (0..s.n_agents())
        .map(|i| Ok(division[i] - view.bundle_value(i, pi)?))
        .collect::<Result<Vec<_>>>()?;
    PaymentReport::new(name, pi, view, payments, division)
}

fn exact_cap(s: &Scenario) -> Result<()> {
    if s.n_agents() > EXACT_MAX_AGENTS {
        return Err(Error::size("exact payment rule", s.n_agents(), EXACT_MAX_AGENTS)
            .with_hint("use the sampled rule for larger instances"));
    }
    Ok(())
}

/// The exact verified Shapley-share rule: `p_i = ξ_i(π, w) − v_i(π)`.
pub fn pay_exact(s: &Scenario, pi: &Allocation, w: &TypeVector, view: &VerifiedView) -> Result<PaymentReport> {
    pay_exact_with(s, pi, w, view, DeltaBasis::VerifiedSelf)
}

pub fn pay_exact_with(
    s: &Scenario,
    pi: &Allocation,
    w: &TypeVector,
    view: &VerifiedView,
    basis: DeltaBasis,
) -> Result<PaymentReport> {
    check_inputs(s, pi, w, view)?;
    exact_cap(s)?;
    let shares = match basis {
        DeltaBasis::VerifiedSelf => exact_shares(&RuleGame::verified_self(s, w, view)),
        DeltaBasis::Declared => declared_shares(s, w, view),
    };
    let payments = (0..s.n_agents())
        .map(|i| Ok(shares[i] - view.bundle_value(i, pi)?))
        .collect::<Result<Vec<_>>>()?;
    let name = Rule::Exact(basis).name();
    PaymentReport::new(name, pi, view, payments, shares)
}

fn declared_shares(s: &Scenario, w: &TypeVector, view: &VerifiedView) -> Vec<f64> {
    let n = s.n_agents();
    let base = Market::new(s, w, view.verified_goods());
    let all: Vec<usize> = (0..n).collect();
    let table = coalition_table(&base, &all);
    let weights = shapley_weights(n);
    let mut shares = vec![0.0; n];
    for mask in 1usize..1 << n {
        let mut market = base.clone();
        for (i, c) in market.caps.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *c = 0;
            }
        }
        let pi_c = canonical_optimum(s, &market);
        let total = pi_c.value(w);
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            let own_w: f64 = pi_c.bundle(i).iter().map(|&g| w.get(i, g)).sum();
            let own_v: f64 = pi_c.bundle(i).iter().map(|&g| view.score(i, g)).sum();
            let delta1 = own_v + total - own_w;
            let delta2 = table[mask ^ 1 << i];
            shares[i] += weights[mask.count_ones() as usize] * (delta1 - delta2);
        }
    }
    shares
}

fn sampling_report(mut report: PaymentReport, cfg: &SamplingConfig, est: &Estimator) -> PaymentReport {
    report.sampling = Some(*cfg);
    report
        .diagnostics
        .insert("largest_component".into(), est.largest_component() as f64);
    report
        .diagnostics
        .insert("memoised_coalitions".into(), est.memo_entries() as f64);
    report
}

/// The sampled rule: `ξ̂_i` is the componentwise median over repetitions of
/// permutation-sampled marginal contributions.
pub fn pay_sampled(
    s: &Scenario,
    pi: &Allocation,
    w: &TypeVector,
    view: &VerifiedView,
    cfg: &SamplingConfig,
) -> Result<PaymentReport> {
    check_inputs(s, pi, w, view)?;
    cfg.validate()?;
    let games = [RuleGame::verified_self(s, w, view)];
    let est = Estimator::new(&games);
    let reps = est.run(cfg);
    let shares = median_estimate(&reps, 0);
    let payments = (0..s.n_agents())
        .map(|i| Ok(shares[i] - view.bundle_value(i, pi)?))
        .collect::<Result<Vec<_>>>()?;
    let report = PaymentReport::new(Rule::Sampled(*cfg).name(), pi, view, payments, shares)?;
    Ok(sampling_report(report, cfg, &est))
}

/// The normalized sampled rule: shares are rescaled so that, at truthful
/// declarations, payments sum to zero exactly.
pub fn pay_normalized(
    s: &Scenario,
    pi: &Allocation,
    w: &TypeVector,
    view: &VerifiedView,
    cfg: &SamplingConfig,
) -> Result<PaymentReport> {
    pay_normalized_with(s, pi, w, view, cfg, false)
}

pub fn pay_normalized_with(
    s: &Scenario,
    pi: &Allocation,
    w: &TypeVector,
    view: &VerifiedView,
    cfg: &SamplingConfig,
    flipped_sign: bool,
) -> Result<PaymentReport> {
    check_inputs(s, pi, w, view)?;
    cfg.validate()?;
    let games = [RuleGame::verified_self(s, w, view), RuleGame::verified(s, view)];
    let est = Estimator::new(&games);
    let reps = est.run(cfg);
    // both estimates of an agent come from the repetition that attains its
    // declared-score median
    let picks = median_reps(&reps, 0);
    let xi_w: Vec<f64> = picks.iter().enumerate().map(|(i, &r)| reps[r][0][i]).collect();
    let xi_v: Vec<f64> = picks.iter().enumerate().map(|(i, &r)| reps[r][1][i]).collect();
    let opt_v = games[1].base.solve_agents(0..s.n_agents());
    let denom: f64 = xi_v.iter().sum();
    let ratio = if denom == 0.0 { 1.0 } else { opt_v / denom };
    let shares: Vec<f64> = xi_w.iter().map(|x| x * ratio).collect();
    let payments = (0..s.n_agents())
        .map(|i| {
            let v = view.bundle_value(i, pi)?;
            Ok(if flipped_sign { v - shares[i] } else { shares[i] - v })
        })
        .collect::<Result<Vec<_>>>()?;
    let rule = Rule::Normalized {
        cfg: *cfg,
        flipped_sign,
    };
    let mut report = PaymentReport::new(rule.name(), pi, view, payments, shares)?;
    report.diagnostics.insert("normalization".into(), ratio);
    report.diagnostics.insert("verified_opt".into(), opt_v);
    Ok(sampling_report(report, cfg, &est))
}
