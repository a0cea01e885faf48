//! Canonical and randomly generated instances.
//!
//! `vqr8` is the two-researcher, eight-product running example: researchers
//! `r1` and `r2` may each submit three products, `p4` and `p5` are
//! co-authored.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Allocation, Scenario, TypeVector};

/// A scenario together with its true type vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub scenario: Scenario,
    pub truth: TypeVector,
}

pub const VQR8_SCORES: [(&str, &str, f64); 10] = [
    ("r1", "p1", 10.0),
    ("r1", "p2", 7.0),
    ("r1", "p3", 7.0),
    ("r1", "p4", 8.0),
    ("r1", "p5", 8.0),
    ("r2", "p4", 8.0),
    ("r2", "p5", 8.0),
    ("r2", "p6", 7.0),
    ("r2", "p7", 8.0),
    ("r2", "p8", 10.0),
];

pub fn vqr8() -> Instance {
    let scenario = Scenario::new(
        [("r1", 3), ("r2", 3)],
        (1..=8).map(|k| format!("p{k}")),
    )
    .expect("fixture scenario");
    let truth = TypeVector::from_sparse(&scenario, VQR8_SCORES).expect("fixture scores");
    Instance { scenario, truth }
}

/// `vqr8` cut down to capacity 1 and goods `{p1, p4, p7}`, small enough to
/// enumerate every allocation by hand.
pub fn vqr8_small() -> Instance {
    let full = vqr8();
    let goods = ["p1", "p4", "p7"];
    let scenario = Scenario::new([("r1", 1), ("r2", 1)], goods).expect("fixture scenario");
    let cols: Vec<usize> = goods
        .iter()
        .map(|g| full.scenario.good_index(g).unwrap())
        .collect();
    let truth = full.truth.restrict_indices(&[0, 1], &cols).unwrap();
    Instance { scenario, truth }
}

/// `Σ* = {r1: {p1,p2,p4}, r2: {p5,p7,p8}}`.
pub fn sigma_star(s: &Scenario) -> Allocation {
    Allocation::from_ids(s, &[("r1", &["p1", "p2", "p4"]), ("r2", &["p5", "p7", "p8"])])
        .expect("fixture allocation")
}

/// `Ŝ* = {r1: {p1,p4,p5}, r2: {p6,p7,p8}}`.
pub fn sigma_hat(s: &Scenario) -> Allocation {
    Allocation::from_ids(s, &[("r1", &["p1", "p4", "p5"]), ("r2", &["p6", "p7", "p8"])])
        .expect("fixture allocation")
}

/// Bounds for [`random_instance`]. Scores are integers in
/// `[min_score, max_score]`.
#[derive(Debug, Clone, Copy)]
pub struct RandomSpec {
    pub max_agents: usize,
    pub max_capacity: u32,
    pub max_goods: usize,
    pub min_score: i32,
    pub max_score: i32,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_agents: 4,
            max_capacity: 2,
            max_goods: 6,
            min_score: -1,
            max_score: 10,
        }
    }
}

pub fn random_instance(seed: u64, spec: RandomSpec) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=spec.max_agents);
    let m = rng.gen_range(1..=spec.max_goods);
    exact_random_instance(&mut rng, n, m, spec)
}

/// Same distribution of scores with the agent and good counts pinned.
pub fn random_instance_sized(seed: u64, n_agents: usize, n_goods: usize, spec: RandomSpec) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    exact_random_instance(&mut rng, n_agents, n_goods, spec)
}

fn exact_random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize, spec: RandomSpec) -> Instance {
    let agents: Vec<(String, u32)> = (1..=n)
        .map(|i| (format!("a{i}"), rng.gen_range(1..=spec.max_capacity)))
        .collect();
    let scenario = Scenario::new(agents, (1..=m).map(|g| format!("g{g}"))).unwrap();
    let rows = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| rng.gen_range(spec.min_score..=spec.max_score) as f64)
                .collect()
        })
        .collect();
    let truth = TypeVector::from_rows(&scenario, rows).unwrap();
    Instance { scenario, truth }
}

/// A research-structure-like instance: each agent authors a handful of
/// products, some of which are shared with one other co-author who then
/// gives them the same score. Everything else is [`NOT_AUTHORED`](crate::model::NOT_AUTHORED).
pub fn coauthorship_instance(seed: u64, n_agents: usize, capacity: u32) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut goods = Vec::new();
    let mut authors: Vec<Vec<usize>> = Vec::new();
    for i in 0..n_agents {
        for _ in 0..rng.gen_range(2..=5) {
            let mut who = vec![i];
            if n_agents > 1 && rng.gen_bool(0.3) {
                let mut others: Vec<usize> = (0..n_agents).filter(|&j| j != i).collect();
                others.shuffle(&mut rng);
                who.push(others[0]);
            }
            goods.push(format!("g{}", goods.len() + 1));
            authors.push(who);
        }
    }
    let scenario = Scenario::new(
        (1..=n_agents).map(|i| (format!("a{i}"), capacity)),
        goods.iter().cloned(),
    )
    .unwrap();
    let mut truth = TypeVector::unauthored(&scenario);
    for (g, who) in authors.iter().enumerate() {
        let score = rng.gen_range(1..=10) as f64;
        for &i in who {
            truth.set(i, g, score).unwrap();
        }
    }
    Instance { scenario, truth }
}
