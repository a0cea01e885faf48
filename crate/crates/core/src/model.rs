//! Allocation scenarios, type vectors, allocations, the one-good clone
//! reduction and the verifier.
//!
//! Agents and goods are identified by string ids but addressed internally by
//! their position in the scenario's ordered lists. Those positions are the
//! canonical order every downstream tie-break relies on.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Score conventionally given to a good an agent did not author.
pub const NOT_AUTHORED: f64 = -1.0;

/// Maximum number of agents addressable by a [`Coalition`] bitmask.
pub const MAX_MASK_AGENTS: usize = 64;

/// An allocation scenario: ordered agents with capacities, ordered goods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    agents: Vec<String>,
    goods: Vec<String>,
    capacity: Vec<u32>,
    agent_index: HashMap<String, usize>,
    good_index: HashMap<String, usize>,
}

impl Scenario {
    pub fn new<A, G>(agents: impl IntoIterator<Item = (A, u32)>, goods: impl IntoIterator<Item = G>) -> Result<Self>
    where
        A: Into<String>,
        G: Into<String>,
    {
        let mut ids = Vec::new();
        let mut capacity = Vec::new();
        let mut agent_index = HashMap::new();
        for (id, cap) in agents {
            let id = id.into();
            if cap == 0 {
                return Err(Error::structural(format!("agent `{id}` has capacity 0")));
            }
            if agent_index.insert(id.clone(), ids.len()).is_some() {
                return Err(Error::structural(format!("duplicate agent id `{id}`")));
            }
            ids.push(id);
            capacity.push(cap);
        }
        let mut good_ids = Vec::new();
        let mut good_index = HashMap::new();
        for id in goods {
            let id = id.into();
            if good_index.insert(id.clone(), good_ids.len()).is_some() {
                return Err(Error::structural(format!("duplicate good id `{id}`")));
            }
            good_ids.push(id);
        }
        Ok(Scenario {
            agents: ids,
            goods: good_ids,
            capacity,
            agent_index,
            good_index,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_goods(&self) -> usize {
        self.goods.len()
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn goods(&self) -> &[String] {
        &self.goods
    }

    pub fn capacity(&self, agent: usize) -> u32 {
        self.capacity[agent]
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacity
    }

    /// Total number of unit slots, i.e. the agent count of the one-good version.
    pub fn total_capacity(&self) -> usize {
        self.capacity.iter().map(|&c| c as usize).sum()
    }

    pub fn agent_index(&self, id: &str) -> Result<usize> {
        self.agent_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::structural(format!("unknown agent `{id}`")))
    }

    pub fn good_index(&self, id: &str) -> Result<usize> {
        self.good_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::structural(format!("unknown good `{id}`")))
    }

    /// Bitmask of the whole agent set. Fails above [`MAX_MASK_AGENTS`].
    pub fn grand_coalition(&self) -> Result<Coalition> {
        Coalition::full(self.n_agents())
    }

    /// Restriction to a coalition and a set of goods, by id. Orderings of the
    /// original scenario are preserved whatever order the ids come in.
    pub fn restrict<'a>(
        &self,
        coalition: impl IntoIterator<Item = &'a str>,
        goods: impl IntoIterator<Item = &'a str>,
    ) -> Result<Scenario> {
        let agents = coalition
            .into_iter()
            .map(|a| self.agent_index(a))
            .collect::<Result<Vec<_>>>()?;
        let goods = goods
            .into_iter()
            .map(|g| self.good_index(g))
            .collect::<Result<Vec<_>>>()?;
        self.restrict_indices(&agents, &goods)
    }

    pub fn restrict_indices(&self, agents: &[usize], goods: &[usize]) -> Result<Scenario> {
        let agents = sorted_unique(agents, self.n_agents(), "agent")?;
        let goods = sorted_unique(goods, self.n_goods(), "good")?;
        Scenario::new(
            agents
                .iter()
                .map(|&i| (self.agents[i].clone(), self.capacity[i])),
            goods.iter().map(|&g| self.goods[g].clone()),
        )
    }
}

fn sorted_unique(idx: &[usize], bound: usize, what: &str) -> Result<Vec<usize>> {
    let mut v = idx.to_vec();
    v.sort_unstable();
    v.dedup();
    if let Some(&bad) = v.iter().find(|&&i| i >= bound) {
        return Err(Error::structural(format!("{what} index {bad} out of range")));
    }
    Ok(v)
}

/// Per-agent real-valued scores over the goods of a scenario, stored densely.
/// Absent scores are [`NOT_AUTHORED`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeVector {
    n_agents: usize,
    n_goods: usize,
    scores: Vec<f64>,
}

impl TypeVector {
    /// Everyone scores every good as not authored.
    pub fn unauthored(s: &Scenario) -> Self {
        Self::filled(s.n_agents(), s.n_goods(), NOT_AUTHORED)
    }

    pub fn filled(n_agents: usize, n_goods: usize, value: f64) -> Self {
        TypeVector {
            n_agents,
            n_goods,
            scores: vec![value; n_agents * n_goods],
        }
    }

    /// Dense construction from rows, one per agent in scenario order.
    pub fn from_rows(s: &Scenario, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != s.n_agents() {
            return Err(Error::structural(format!(
                "expected {} score rows, got {}",
                s.n_agents(),
                rows.len()
            )));
        }
        let mut scores = Vec::with_capacity(s.n_agents() * s.n_goods());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != s.n_goods() {
                return Err(Error::structural(format!(
                    "score row of `{}` has {} entries, expected {}",
                    s.agents()[i],
                    row.len(),
                    s.n_goods()
                )));
            }
            scores.extend(row);
        }
        let t = TypeVector {
            n_agents: s.n_agents(),
            n_goods: s.n_goods(),
            scores,
        };
        t.check_finite()?;
        Ok(t)
    }

    /// Sparse construction by id; unspecified pairs get [`NOT_AUTHORED`].
    pub fn from_sparse<'a>(
        s: &Scenario,
        entries: impl IntoIterator<Item = (&'a str, &'a str, f64)>,
    ) -> Result<Self> {
        let mut t = Self::unauthored(s);
        for (a, g, score) in entries {
            let (i, j) = (s.agent_index(a)?, s.good_index(g)?);
            t.set(i, j, score)?;
        }
        Ok(t)
    }

    fn check_finite(&self) -> Result<()> {
        match self.scores.iter().position(|x| !x.is_finite()) {
            Some(k) => Err(Error::structural(format!(
                "non-finite score for agent #{} good #{}",
                k / self.n_goods.max(1),
                k % self.n_goods.max(1)
            ))),
            None => Ok(()),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_goods(&self) -> usize {
        self.n_goods
    }

    pub fn get(&self, agent: usize, good: usize) -> f64 {
        self.scores[agent * self.n_goods + good]
    }

    pub fn set(&mut self, agent: usize, good: usize, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::structural(format!("non-finite score {score}")));
        }
        if agent >= self.n_agents || good >= self.n_goods {
            return Err(Error::structural("score index out of range"));
        }
        self.scores[agent * self.n_goods + good] = score;
        Ok(())
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        &self.scores[agent * self.n_goods..(agent + 1) * self.n_goods]
    }

    /// Replace one agent's whole type, as in `(d_i, w_{-i})`.
    pub fn with_row(&self, agent: usize, row: &[f64]) -> Result<Self> {
        if row.len() != self.n_goods {
            return Err(Error::structural("replacement row has wrong length"));
        }
        let mut out = self.clone();
        out.scores[agent * self.n_goods..(agent + 1) * self.n_goods].copy_from_slice(row);
        out.check_finite()?;
        Ok(out)
    }

    /// Sub-vector matching [`Scenario::restrict_indices`].
    pub fn restrict_indices(&self, agents: &[usize], goods: &[usize]) -> Result<Self> {
        let agents = sorted_unique(agents, self.n_agents, "agent")?;
        let goods = sorted_unique(goods, self.n_goods, "good")?;
        let mut scores = Vec::with_capacity(agents.len() * goods.len());
        for &i in &agents {
            scores.extend(goods.iter().map(|&g| self.get(i, g)));
        }
        Ok(TypeVector {
            n_agents: agents.len(),
            n_goods: goods.len(),
            scores,
        })
    }

    pub(crate) fn check_shape(&self, s: &Scenario) -> Result<()> {
        if self.n_agents != s.n_agents() || self.n_goods != s.n_goods() {
            return Err(Error::structural(format!(
                "type vector is {}x{}, scenario is {}x{}",
                self.n_agents,
                self.n_goods,
                s.n_agents(),
                s.n_goods()
            )));
        }
        Ok(())
    }
}

/// An agent authors a good iff its score for it is positive.
pub fn is_authored(score: f64) -> bool {
    score > 0.0
}

/// Agent → disjoint bundle of goods. Bundles hold good indices in increasing
/// order and respect the scenario capacities.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Allocation {
    bundles: Vec<Vec<usize>>,
}

impl Allocation {
    pub fn empty(s: &Scenario) -> Self {
        Allocation {
            bundles: vec![Vec::new(); s.n_agents()],
        }
    }

    /// Validating constructor from per-agent index bundles.
    pub fn new(s: &Scenario, mut bundles: Vec<Vec<usize>>) -> Result<Self> {
        if bundles.len() != s.n_agents() {
            return Err(Error::structural(format!(
                "allocation has {} bundles for {} agents",
                bundles.len(),
                s.n_agents()
            )));
        }
        let mut owner = vec![usize::MAX; s.n_goods()];
        for (i, b) in bundles.iter_mut().enumerate() {
            b.sort_unstable();
            if b.len() > s.capacity(i) as usize {
                return Err(Error::structural(format!(
                    "agent `{}` receives {} goods, capacity {}",
                    s.agents()[i],
                    b.len(),
                    s.capacity(i)
                )));
            }
            for &g in b.iter() {
                if g >= s.n_goods() {
                    return Err(Error::structural(format!("good index {g} out of range")));
                }
                if owner[g] != usize::MAX {
                    return Err(Error::structural(format!(
                        "good `{}` allocated twice",
                        s.goods()[g]
                    )));
                }
                owner[g] = i;
            }
        }
        Ok(Allocation { bundles })
    }

    /// Construction by ids; agents not mentioned get empty bundles.
    pub fn from_ids<'a>(s: &Scenario, bundles: &[(&'a str, &[&'a str])]) -> Result<Self> {
        let mut out = vec![Vec::new(); s.n_agents()];
        for (a, goods) in bundles {
            let i = s.agent_index(a)?;
            for g in goods.iter() {
                out[i].push(s.good_index(g)?);
            }
        }
        Allocation::new(s, out)
    }

    pub fn n_agents(&self) -> usize {
        self.bundles.len()
    }

    pub fn bundle(&self, agent: usize) -> &[usize] {
        &self.bundles[agent]
    }

    pub fn bundles(&self) -> &[Vec<usize>] {
        &self.bundles
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.iter().all(Vec::is_empty)
    }

    /// `img(π)`: allocated goods in increasing index order.
    pub fn image(&self) -> Vec<usize> {
        let mut img: Vec<usize> = self.bundles.iter().flatten().copied().collect();
        img.sort_unstable();
        img
    }

    /// Additive value `Σ_i Σ_{g∈π(i)} w_i(g)`.
    pub fn value(&self, w: &TypeVector) -> f64 {
        self.bundles
            .iter()
            .enumerate()
            .map(|(i, b)| b.iter().map(|&g| w.get(i, g)).sum::<f64>())
            .sum()
    }

    pub(crate) fn check_shape(&self, s: &Scenario) -> Result<()> {
        if self.bundles.len() != s.n_agents() {
            return Err(Error::structural("allocation does not match scenario"));
        }
        Ok(())
    }

    /// Bundles rendered with ids, for display and reports.
    pub fn named(&self, s: &Scenario) -> Vec<(String, Vec<String>)> {
        self.bundles
            .iter()
            .enumerate()
            .map(|(i, b)| {
                (
                    s.agents()[i].clone(),
                    b.iter().map(|&g| s.goods()[g].clone()).collect(),
                )
            })
            .collect()
    }
}

/// `value(π, w)` with shape checks.
pub fn value(s: &Scenario, alloc: &Allocation, w: &TypeVector) -> Result<f64> {
    alloc.check_shape(s)?;
    w.check_shape(s)?;
    Ok(alloc.value(w))
}

/// The one-good version of a scenario: each agent `i` becomes `ω(i)` unit
/// capacity clones named `<agent>#<k>`, `k = 1..=ω(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneGoodScenario {
    pub original: Scenario,
    pub clones: Scenario,
    /// clone index → original agent index
    pub clone_owner: Vec<usize>,
}

impl OneGoodScenario {
    pub fn clones_of(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        self.clone_owner
            .iter()
            .enumerate()
            .filter(move |&(_, &o)| o == agent)
            .map(|(c, _)| c)
    }
}

pub fn clone_id(agent: &str, k: u32) -> String {
    format!("{agent}#{k}")
}

pub fn to_one_good(s: &Scenario, w: &TypeVector) -> Result<(OneGoodScenario, TypeVector)> {
    w.check_shape(s)?;
    let mut agents = Vec::with_capacity(s.total_capacity());
    let mut owner = Vec::with_capacity(s.total_capacity());
    let mut rows = Vec::with_capacity(s.total_capacity());
    for (i, id) in s.agents().iter().enumerate() {
        for k in 1..=s.capacity(i) {
            agents.push((clone_id(id, k), 1u32));
            owner.push(i);
            rows.push(w.row(i).to_vec());
        }
    }
    let clones = Scenario::new(agents, s.goods().iter().cloned())?;
    let w1 = TypeVector::from_rows(&clones, rows)?;
    Ok((
        OneGoodScenario {
            original: s.clone(),
            clones,
            clone_owner: owner,
        },
        w1,
    ))
}

/// Groups clone bundles back under their owners (the `ωnorm` map).
pub fn from_one_good(alloc1: &Allocation, m: &OneGoodScenario) -> Result<Allocation> {
    if alloc1.n_agents() != m.clone_owner.len() {
        return Err(Error::structural(format!(
            "one-good allocation has {} bundles, scenario has {} clones",
            alloc1.n_agents(),
            m.clone_owner.len()
        )));
    }
    let mut bundles = vec![Vec::new(); m.original.n_agents()];
    for (c, b) in alloc1.bundles().iter().enumerate() {
        if b.len() > 1 {
            return Err(Error::structural(format!(
                "clone `{}` holds {} goods",
                m.clones.agents()[c],
                b.len()
            )));
        }
        bundles[m.clone_owner[c]].extend_from_slice(b);
    }
    Allocation::new(&m.original, bundles)
}

/// What the verifier discloses after allocation: every agent's true score on
/// every allocated good, and nothing else.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifiedView {
    goods: Vec<usize>,
    verified: Vec<bool>,
    n_goods: usize,
    // NaN outside the verified goods; never handed out.
    scores: Vec<f64>,
}

/// The verifier: reveals `t` restricted to `img(alloc)`.
pub fn verify(t: &TypeVector, alloc: &Allocation) -> Result<VerifiedView> {
    if alloc.n_agents() != t.n_agents() {
        return Err(Error::structural("allocation and type vector disagree on agents"));
    }
    let goods = alloc.image();
    let n_goods = t.n_goods();
    let mut verified = vec![false; n_goods];
    for &g in &goods {
        if g >= n_goods {
            return Err(Error::structural(format!("good index {g} out of range")));
        }
        verified[g] = true;
    }
    let mut scores = vec![f64::NAN; t.n_agents() * n_goods];
    for i in 0..t.n_agents() {
        for &g in &goods {
            scores[i * n_goods + g] = t.get(i, g);
        }
    }
    Ok(VerifiedView {
        goods,
        verified,
        n_goods,
        scores,
    })
}

impl VerifiedView {
    pub fn verified_goods(&self) -> &[usize] {
        &self.goods
    }

    pub fn is_verified(&self, good: usize) -> bool {
        self.verified.get(good).copied().unwrap_or(false)
    }

    pub fn n_agents(&self) -> usize {
        self.scores.len() / self.n_goods.max(1)
    }

    /// `v_i(g)`; an error for any good outside `img(π)`.
    pub fn get(&self, agent: usize, good: usize) -> Result<f64> {
        if !self.is_verified(good) {
            return Err(Error::contract(format!(
                "good #{good} was not allocated and is not verified"
            )));
        }
        if agent >= self.n_agents() {
            return Err(Error::structural(format!("agent index {agent} out of range")));
        }
        Ok(self.scores[agent * self.n_goods + good])
    }

    pub(crate) fn score(&self, agent: usize, good: usize) -> f64 {
        debug_assert!(self.verified[good]);
        self.scores[agent * self.n_goods + good]
    }

    /// `v_i(π)`, the verified value of agent `i`'s own bundle.
    pub fn bundle_value(&self, agent: usize, alloc: &Allocation) -> Result<f64> {
        alloc
            .bundle(agent)
            .iter()
            .map(|&g| self.get(agent, g))
            .sum()
    }

    /// Checks that the view was produced for exactly this allocation.
    pub fn check_matches(&self, alloc: &Allocation) -> Result<()> {
        if self.goods != alloc.image() {
            return Err(Error::contract(
                "verified view does not cover exactly the allocated goods",
            ));
        }
        if self.n_agents() != alloc.n_agents() {
            return Err(Error::contract("verified view and allocation disagree on agents"));
        }
        Ok(())
    }
}

/// A set of agents as a bitmask over the scenario's agent order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Coalition(pub u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn full(n: usize) -> Result<Coalition> {
        if n > MAX_MASK_AGENTS {
            return Err(Error::size("coalition bitmask", n, MAX_MASK_AGENTS));
        }
        Ok(Coalition(if n == 64 { u64::MAX } else { (1u64 << n) - 1 }))
    }

    pub fn singleton(i: usize) -> Coalition {
        Coalition(1 << i)
    }

    pub fn from_members(members: impl IntoIterator<Item = usize>) -> Coalition {
        Coalition(members.into_iter().fold(0, |m, i| m | (1 << i)))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Coalition {
        Coalition(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Coalition {
        Coalition(self.0 & !(1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, o: Coalition) -> Coalition {
        Coalition(self.0 | o.0)
    }

    pub fn intersection(self, o: Coalition) -> Coalition {
        Coalition(self.0 & o.0)
    }

    /// Complement within the first `n` agents.
    pub fn complement(self, n: usize) -> Coalition {
        let full = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
        Coalition(!self.0 & full)
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut m = self.0;
        std::iter::from_fn(move || {
            if m == 0 {
                None
            } else {
                let i = m.trailing_zeros() as usize;
                m &= m - 1;
                Some(i)
            }
        })
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}
