//! Coalition value tables and Shapley-style estimators over `img(π)`.
//!
//! A [`RuleGame`] is the coalitional game a payment rule evaluates: values
//! `opt(C, img(π), w)`, except that when agent `i` joins a coalition its own
//! row may be swapped for an alternative (its verified scores). Agents whose
//! alternative row induces the same edges as their declared row are stored
//! without one, which is what makes the rule blind to declarations that are
//! never used.

use std::hash::BuildHasherDefault;
use std::sync::atomic::{AtomicUsize, Ordering};

use dashmap::DashMap;
use rayon::prelude::*;
use rustc_hash::FxHasher;

use crate::matching::{edge_list, Market, Matcher};
use crate::model::{Scenario, TypeVector, VerifiedView};
use crate::sampling::{median_index, permutation, SamplingConfig};

pub(crate) type Edges = Vec<(u32, f64)>;

#[derive(Debug, Clone)]
pub(crate) struct RuleGame {
    pub base: Market,
    pub alt: Vec<Option<Edges>>,
}

impl RuleGame {
    /// `opt(C, img, w)` with agent `i`'s marginal using its verified row.
    pub fn verified_self(s: &Scenario, w: &TypeVector, view: &VerifiedView) -> RuleGame {
        let img = view.verified_goods();
        let base = Market::new(s, w, img);
        let alt = (0..s.n_agents())
            .map(|i| {
                let e = edge_list(img.iter().map(|&g| view.score(i, g)));
                (e != base.edges[i]).then_some(e)
            })
            .collect();
        RuleGame { base, alt }
    }

    /// Plain game `opt(C, img, v)` on verified scores.
    pub fn verified(s: &Scenario, view: &VerifiedView) -> RuleGame {
        let img = view.verified_goods();
        let edges = (0..s.n_agents())
            .map(|i| edge_list(img.iter().map(|&g| view.score(i, g))))
            .collect();
        RuleGame {
            base: Market {
                cols: img.to_vec(),
                caps: s.capacities().to_vec(),
                edges,
            },
            alt: vec![None; s.n_agents()],
        }
    }

    fn n_agents(&self) -> usize {
        self.base.n_agents()
    }

    fn alt_market(&self, i: usize) -> Option<Market> {
        self.alt[i].as_ref().map(|e| {
            let mut m = self.base.clone();
            m.edges[i] = e.clone();
            m
        })
    }
}

/// `table[mask]` = optimal value of the local agents in `mask`, where bit
/// `k` stands for `agents[k]`. Each coalition is reached by adding its
/// members in increasing order to a cloned matcher, so values are
/// independent of scheduling.
pub(crate) fn coalition_table(market: &Market, agents: &[usize]) -> Vec<f64> {
    let k = agents.len();
    let mut table = vec![0.0; 1usize << k];
    if k == 0 {
        return table;
    }
    let rows: Vec<(&[(u32, f64)], u32)> = agents
        .iter()
        .map(|&i| (market.edges[i].as_slice(), market.caps[i]))
        .collect();

    fn fill<'a>(
        rows: &[(&'a [(u32, f64)], u32)],
        from: usize,
        mask: usize,
        state: &Matcher<'a>,
        out: &mut [f64],
    ) {
        for j in from..rows.len() {
            let mut next = state.clone();
            for _ in 0..rows[j].1 {
                next.add_row(rows[j].0);
            }
            let m = mask | 1 << j;
            out[m] = next.value();
            if j + 1 < rows.len() {
                fill(rows, j + 1, m, &next, out);
            }
        }
    }

    // one independent branch per lowest member; branch j owns the masks
    // (1<<j) | (h << (j+1)), stored by h
    let branches: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|j| {
            let mut out = vec![0.0; 1usize << (k - j - 1)];
            let mut root = Matcher::new(market.cols.len());
            for _ in 0..rows[j].1 {
                root.add_row(rows[j].0);
            }
            out[0] = root.value();
            // within the branch, bit b stands for agent j+1+b
            fill(&rows[j + 1..], 0, 0, &root, &mut out);
            out
        })
        .collect();

    for (j, b) in branches.into_iter().enumerate() {
        for (h, v) in b.into_iter().enumerate() {
            table[(1 << j) | (h << (j + 1))] = v;
        }
    }
    table
}

/// Local coalition tables for one group of agents and every game.
struct Tables {
    base: Vec<Vec<f64>>,
    alt: Vec<Vec<Option<Vec<f64>>>>,
}

/// Values of connected coalitions of one component, computed on demand and
/// shared by all repetitions. Each value is always computed the same way
/// (members added in increasing local order), so whether it came from the
/// memo or not never changes a result.
struct Memo {
    /// local agent → local agents sharing a good with it
    adj: Vec<Vec<usize>>,
    /// per game: (local mask, substituted local agent or NO_ALT) → value
    values: Vec<DashMap<(u64, u32), f64, BuildHasherDefault<FxHasher>>>,
    stored: AtomicUsize,
}

const NO_ALT: u32 = u32::MAX;

/// Cap on memoised coalition values per component.
const MEMO_BUDGET: usize = 1 << 23;

enum Body {
    Tables(Tables),
    Memo(Memo),
    Chain,
}

struct Component {
    agents: Vec<usize>,
    body: Body,
}

/// Upper bound on table entries kept per component before falling back to
/// re-solving along each sampled permutation.
const TABLE_BUDGET: usize = 1 << 23;

/// Agents grouped into independent components: two agents interact only if
/// they both have an edge, in some game, to the same good.
fn components(games: &[RuleGame]) -> Vec<Vec<usize>> {
    let n = games[0].n_agents();
    let ncols = games[0].base.cols.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut first = vec![usize::MAX; ncols];
    for g in games {
        for i in 0..n {
            let rows = std::iter::once(&g.base.edges[i]).chain(g.alt[i].as_ref());
            for e in rows {
                for &(c, _) in e {
                    let c = c as usize;
                    if first[c] == usize::MAX {
                        first[c] = i;
                    } else {
                        let (a, b) = (find(&mut parent, first[c]), find(&mut parent, i));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Permutation estimator of the rule share `ξ` for several games at once,
/// all driven by the same sampled permutations.
pub(crate) struct Estimator<'g> {
    games: &'g [RuleGame],
    comps: Vec<Component>,
    /// agent → (component, local bit)
    loc: Vec<(usize, usize)>,
}

/// Per-repetition estimates: `[rep][game][agent]`.
pub(crate) type RepEstimates = Vec<Vec<Vec<f64>>>;

impl<'g> Estimator<'g> {
    pub fn new(games: &'g [RuleGame]) -> Self {
        let groups = components(games);
        let n = games[0].n_agents();
        let mut loc = vec![(0, 0); n];
        let comps = groups
            .into_par_iter()
            .map(|agents| {
                let k = agents.len();
                let n_alt: usize = games
                    .iter()
                    .map(|g| agents.iter().filter(|&&i| g.alt[i].is_some()).count())
                    .sum();
                let entries = (games.len() + n_alt).saturating_mul(1usize.checked_shl(k as u32).unwrap_or(usize::MAX));
                let body = if k < 40 && entries <= TABLE_BUDGET {
                    Body::Tables(Tables {
                        base: games.iter().map(|g| coalition_table(&g.base, &agents)).collect(),
                        alt: games
                            .iter()
                            .map(|g| {
                                agents
                                    .iter()
                                    .map(|&i| g.alt_market(i).map(|m| coalition_table(&m, &agents)))
                                    .collect()
                            })
                            .collect(),
                    })
                } else if k <= 64 {
                    Body::Memo(Memo::new(games, &agents))
                } else {
                    Body::Chain
                };
                Component { agents, body }
            })
            .collect::<Vec<_>>();
        for (c, comp) in comps.iter().enumerate() {
            for (l, &i) in comp.agents.iter().enumerate() {
                loc[i] = (c, l);
            }
        }
        Estimator { games, comps, loc }
    }

    pub fn largest_component(&self) -> usize {
        self.comps.iter().map(|c| c.agents.len()).max().unwrap_or(0)
    }

    pub fn n_agents(&self) -> usize {
        self.loc.len()
    }

    /// Coalition values memoised so far across all components.
    pub fn memo_entries(&self) -> usize {
        self.comps
            .iter()
            .map(|c| match &c.body {
                Body::Memo(m) => m.stored.load(Ordering::Relaxed),
                _ => 0,
            })
            .sum()
    }

    /// Mean marginal contributions of every agent over the samples of one
    /// repetition, per game.
    pub fn repetition(&self, cfg: &SamplingConfig, rep: usize) -> Vec<Vec<f64>> {
        let n = self.n_agents();
        let ng = self.games.len();
        let mut sums = vec![vec![0.0; n]; ng];
        let mut perm = vec![0usize; n];
        let mut masks = vec![0usize; self.comps.len()];
        let mut chains: Vec<Vec<Matcher<'_>>> = self
            .comps
            .iter()
            .map(|c| match c.body {
                Body::Chain => self
                    .games
                    .iter()
                    .map(|g| Matcher::new(g.base.cols.len()))
                    .collect(),
                _ => Vec::new(),
            })
            .collect();
        let mut forests: Vec<Option<Forest>> = self
            .comps
            .iter()
            .map(|c| match c.body {
                Body::Memo(_) => Some(Forest::new(c.agents.len(), ng)),
                _ => None,
            })
            .collect();
        let mut before = vec![0.0; ng];
        let mut roots = Vec::new();

        for sample in 0..cfg.samples {
            permutation(&mut perm, cfg.seed, rep, sample);
            masks.iter_mut().for_each(|m| *m = 0);
            chains.iter_mut().flatten().for_each(Matcher::reset);
            forests.iter_mut().flatten().for_each(Forest::clear);
            for &i in &perm {
                let (c, l) = self.loc[i];
                match &self.comps[c].body {
                    Body::Tables(t) => {
                        let before = masks[c];
                        let after = before | 1 << l;
                        for g in 0..ng {
                            let top = match &t.alt[g][l] {
                                Some(alt) => alt[after],
                                None => t.base[g][after],
                            };
                            sums[g][i] += top - t.base[g][before];
                        }
                        masks[c] = after;
                    }
                    Body::Memo(memo) => {
                        let f = forests[c].as_mut().expect("forest for memo component");
                        // the coalition i joins: its connected neighbours so far
                        roots.clear();
                        before.iter_mut().for_each(|b| *b = 0.0);
                        let mut mask = 1u64 << l;
                        for &nb in &memo.adj[l] {
                            if f.present >> nb & 1 == 1 {
                                let r = f.find(nb);
                                if !roots.contains(&r) {
                                    roots.push(r);
                                    mask |= f.mask[r];
                                    for g in 0..ng {
                                        before[g] += f.value[g][r];
                                    }
                                }
                            }
                        }
                        for (g, game) in self.games.iter().enumerate() {
                            let merged = memo.value(game, &self.comps[c].agents, g, mask, NO_ALT);
                            let top = if game.alt[i].is_some() {
                                memo.value(game, &self.comps[c].agents, g, mask, l as u32)
                            } else {
                                merged
                            };
                            sums[g][i] += top - before[g];
                            f.value[g][l] = merged;
                        }
                        for &r in &roots {
                            f.parent[r] = l;
                        }
                        f.parent[l] = l;
                        f.mask[l] = mask;
                        f.present |= 1 << l;
                    }
                    Body::Chain => {
                        for (g, game) in self.games.iter().enumerate() {
                            let m = &mut chains[c][g];
                            let before = m.value();
                            let cap = game.base.caps[i];
                            if let Some(alt) = &game.alt[i] {
                                let mut probe = m.clone();
                                for _ in 0..cap {
                                    probe.add_row(alt);
                                }
                                sums[g][i] += probe.value() - before;
                            }
                            for _ in 0..cap {
                                m.add_row(&game.base.edges[i]);
                            }
                            if game.alt[i].is_none() {
                                sums[g][i] += m.value() - before;
                            }
                        }
                    }
                }
            }
        }
        let m = cfg.samples as f64;
        for row in &mut sums {
            row.iter_mut().for_each(|x| *x /= m);
        }
        sums
    }

    /// All repetitions, in repetition order.
    pub fn run(&self, cfg: &SamplingConfig) -> RepEstimates {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| self.repetition(cfg, rep))
            .collect()
    }
}

impl Memo {
    fn new(games: &[RuleGame], agents: &[usize]) -> Memo {
        let k = agents.len();
        let ncols = games[0].base.cols.len();
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); ncols];
        for (l, &i) in agents.iter().enumerate() {
            for g in games {
                for e in std::iter::once(&g.base.edges[i]).chain(g.alt[i].as_ref()) {
                    for &(c, _) in e {
                        users[c as usize].push(l);
                    }
                }
            }
        }
        let mut adj = vec![Vec::new(); k];
        for u in &mut users {
            u.sort_unstable();
            u.dedup();
            for &a in u.iter() {
                for &b in u.iter() {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        Memo {
            adj,
            values: games.iter().map(|_| DashMap::default()).collect(),
            stored: AtomicUsize::new(0),
        }
    }

    fn value(&self, game: &RuleGame, agents: &[usize], g: usize, mask: u64, alt: u32) -> f64 {
        if let Some(v) = self.values[g].get(&(mask, alt)) {
            return *v;
        }
        let mut m = Matcher::new(game.base.cols.len());
        let mut bits = mask;
        while bits != 0 {
            let l = bits.trailing_zeros();
            bits &= bits - 1;
            let i = agents[l as usize];
            let edges = match &game.alt[i] {
                Some(e) if l == alt => e,
                _ => &game.base.edges[i],
            };
            for _ in 0..game.base.caps[i] {
                m.add_row(edges);
            }
        }
        let v = m.value();
        if self.stored.load(Ordering::Relaxed) < MEMO_BUDGET {
            self.stored.fetch_add(1, Ordering::Relaxed);
            self.values[g].insert((mask, alt), v);
        }
        v
    }
}

/// Connected groups of the agents placed so far in one permutation.
struct Forest {
    parent: Vec<usize>,
    mask: Vec<u64>,
    /// per game, per root: value of the root's group
    value: Vec<Vec<f64>>,
    present: u64,
}

impl Forest {
    fn new(k: usize, games: usize) -> Forest {
        Forest {
            parent: (0..k).collect(),
            mask: vec![0; k],
            value: vec![vec![0.0; k]; games],
            present: 0,
        }
    }

    fn clear(&mut self) {
        self.present = 0;
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            let p = self.parent[x];
            self.parent[x] = self.parent[p];
            x = p;
        }
        x
    }
}

/// Componentwise median across repetitions of one game.
pub(crate) fn median_estimate(reps: &RepEstimates, game: usize) -> Vec<f64> {
    let n = reps.first().map_or(0, |r| r[game].len());
    (0..n)
        .map(|i| {
            let vals: Vec<f64> = reps.iter().map(|r| r[game][i]).collect();
            vals[median_index(&vals)]
        })
        .collect()
}

/// For each agent, the repetition attaining its median in `game`.
pub(crate) fn median_reps(reps: &RepEstimates, game: usize) -> Vec<usize> {
    let n = reps.first().map_or(0, |r| r[game].len());
    (0..n)
        .map(|i| {
            let vals: Vec<f64> = reps.iter().map(|r| r[game][i]).collect();
            median_index(&vals)
        })
        .collect()
}

/// Weight of a coalition of size `size` containing a fixed agent among
/// `n`: `(n−|C|)!(|C|−1)!/n!`.
pub(crate) fn shapley_weights(n: usize) -> Vec<f64> {
    // 1 / (n · C(n−1, s−1)), s = 1..=n; index 0 unused
    let mut w = vec![0.0; n + 1];
    let mut binom = 1.0f64;
    for s in 1..=n {
        if s > 1 {
            binom = binom * (n - s + 1) as f64 / (s - 1) as f64;
        }
        w[s] = 1.0 / (n as f64 * binom);
    }
    w
}

/// Exact rule shares for every agent from full coalition tables.
pub(crate) fn exact_shares(game: &RuleGame) -> Vec<f64> {
    let n = game.n_agents();
    let all: Vec<usize> = (0..n).collect();
    let base = coalition_table(&game.base, &all);
    let weights = shapley_weights(n);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let alt = game.alt_market(i).map(|m| coalition_table(&m, &all));
            let top = alt.as_ref().unwrap_or(&base);
            let bit = 1usize << i;
            let terms: Vec<f64> = (0..base.len())
                .filter(|m| m & bit != 0)
                .map(|m| weights[m.count_ones() as usize] * (top[m] - base[m ^ bit]))
                .collect();
            pairwise_sum(&terms)
        })
        .collect()
}

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
