//! Optimal allocations via maximum-weight bipartite matching.
//!
//! A scenario is reduced to its one-good form: every agent contributes
//! `ω(i)` unit rows carrying its scores, goods are columns, and only
//! positive scores become edges (a slot may always stay empty). The
//! `Matcher` grows an optimal matching one row at a time. Each new row
//! triggers a single Dijkstra search for the best alternating path over
//! reduced costs kept non-negative by LP duals, i.e. successive shortest
//! paths on the min-cost-flow formulation. Because rows can be added
//! incrementally, the value of a coalition prefix `P ∪ {i}` is obtained from
//! the state for `P` in one augmentation per clone of `i`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use dashmap::DashMap;

use crate::error::{Error, Result};
use crate::model::{Allocation, Coalition, Scenario, TypeVector};

const NONE: u32 = u32::MAX;

/// Relative tolerance used when comparing allocation values for optimality.
pub const OPT_TOLERANCE: f64 = 1e-9;

/// Hard guard for [`enumerate_optima`]: total one-good clones.
pub const ENUM_MAX_CLONES: usize = 8;
/// Hard guard for [`enumerate_optima`]: goods.
pub const ENUM_MAX_GOODS: usize = 8;

pub(crate) fn tolerance(v: f64) -> f64 {
    OPT_TOLERANCE * v.abs().max(1.0)
}

#[derive(Debug, Clone, Copy)]
struct HeapItem {
    dist: f64,
    node: u32,
    is_col: bool,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    // min-heap on distance, ties broken by node for determinism
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.is_col.cmp(&self.is_col))
            .then_with(|| other.node.cmp(&self.node))
    }
}

#[derive(Debug, Clone, Copy)]
enum End {
    Row(u32),
    Col(u32),
}

/// Incremental maximum-weight bipartite matching over a fixed column space.
///
/// Invariants between calls: `row_dual + col_dual ≥ w` on every edge with
/// equality on matched edges, all duals non-negative, and unmatched rows and
/// columns have zero dual. The current matching is therefore optimal for
/// the rows added so far.
#[derive(Debug, Clone)]
pub(crate) struct Matcher<'a> {
    rows: Vec<&'a [(u32, f64)]>,
    row_dual: Vec<f64>,
    row_match: Vec<u32>,
    col_dual: Vec<f64>,
    col_match: Vec<u32>,
    blocked: Option<&'a [bool]>,
    value: f64,

    stamp: u32,
    row_seen: Vec<u32>,
    row_done: Vec<u32>,
    row_dist: Vec<f64>,
    row_prev: Vec<u32>,
    col_seen: Vec<u32>,
    col_done: Vec<u32>,
    col_dist: Vec<f64>,
    col_prev: Vec<u32>,
    visited: Vec<(bool, u32)>,
    heap: BinaryHeap<HeapItem>,
}

impl<'a> Matcher<'a> {
    pub fn new(ncols: usize) -> Self {
        Matcher {
            rows: Vec::new(),
            row_dual: Vec::new(),
            row_match: Vec::new(),
            col_dual: vec![0.0; ncols],
            col_match: vec![NONE; ncols],
            blocked: None,
            value: 0.0,
            stamp: 0,
            row_seen: Vec::new(),
            row_done: Vec::new(),
            row_dist: Vec::new(),
            row_prev: Vec::new(),
            col_seen: vec![0; ncols],
            col_done: vec![0; ncols],
            col_dist: vec![0.0; ncols],
            col_prev: vec![NONE; ncols],
            visited: Vec::new(),
            heap: BinaryHeap::new(),
        }
    }

    /// Columns flagged `true` are treated as absent.
    pub fn with_blocked(mut self, blocked: &'a [bool]) -> Self {
        self.blocked = Some(blocked);
        self
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Drop all rows, keeping scratch allocations.
    pub fn reset(&mut self) {
        self.rows.clear();
        self.row_dual.clear();
        self.row_match.clear();
        self.col_dual.iter_mut().for_each(|y| *y = 0.0);
        self.col_match.iter_mut().for_each(|m| *m = NONE);
        self.value = 0.0;
    }

    /// Matched `(row, col)` pairs.
    #[cfg(test)]
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_match
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != NONE)
            .map(|(r, &c)| (r, c as usize))
    }

    fn is_blocked(&self, c: u32) -> bool {
        self.blocked.is_some_and(|b| b[c as usize])
    }

    fn next_stamp(&mut self) {
        if self.stamp == u32::MAX {
            self.stamp = 0;
            self.row_seen.iter_mut().for_each(|s| *s = 0);
            self.row_done.iter_mut().for_each(|s| *s = 0);
            self.col_seen.iter_mut().for_each(|s| *s = 0);
            self.col_done.iter_mut().for_each(|s| *s = 0);
        }
        self.stamp += 1;
    }

    /// Add a unit row with the given positive-weight edges and re-optimise.
    /// Returns the increase of the optimal value.
    pub fn add_row(&mut self, edges: &'a [(u32, f64)]) -> f64 {
        let r = self.rows.len() as u32;
        let mut y_r = 0.0f64;
        let mut arg = NONE;
        for &(c, w) in edges {
            if !self.is_blocked(c) && w - self.col_dual[c as usize] > y_r {
                y_r = w - self.col_dual[c as usize];
                arg = c;
            }
        }
        if arg != NONE && self.col_match[arg as usize] == NONE {
            // a free column on a tight edge is a zero-length path: take it
            self.rows.push(edges);
            self.row_dual.push(y_r);
            self.row_match.push(arg);
            self.row_seen.push(0);
            self.row_done.push(0);
            self.row_dist.push(0.0);
            self.row_prev.push(NONE);
            self.col_match[arg as usize] = r;
            self.value += y_r;
            return y_r;
        }
        self.rows.push(edges);
        self.row_dual.push(y_r);
        self.row_match.push(NONE);
        self.row_seen.push(0);
        self.row_done.push(0);
        self.row_dist.push(0.0);
        self.row_prev.push(NONE);
        if y_r <= 0.0 {
            // no edge can pay for itself against the current duals
            self.row_dual[r as usize] = 0.0;
            return 0.0;
        }

        self.next_stamp();
        let stamp = self.stamp;
        self.visited.clear();
        self.heap.clear();
        self.row_seen[r as usize] = stamp;
        self.row_dist[r as usize] = 0.0;
        self.heap.push(HeapItem {
            dist: 0.0,
            node: r,
            is_col: false,
        });
        let mut best = (y_r, End::Row(r));

        while let Some(item) = self.heap.pop() {
            if item.dist >= best.0 {
                break;
            }
            let d = item.dist;
            if item.is_col {
                let c = item.node as usize;
                if self.col_done[c] == stamp || d > self.col_dist[c] {
                    continue;
                }
                self.col_done[c] = stamp;
                self.visited.push((true, item.node));
                let u = self.col_match[c];
                if u == NONE {
                    let cand = d + self.col_dual[c];
                    if cand < best.0 {
                        best = (cand, End::Col(item.node));
                    }
                } else {
                    // matched edge is tight: zero reduced cost
                    let ui = u as usize;
                    if self.row_seen[ui] != stamp || d < self.row_dist[ui] {
                        self.row_seen[ui] = stamp;
                        self.row_dist[ui] = d;
                        self.row_prev[ui] = item.node;
                        self.heap.push(HeapItem {
                            dist: d,
                            node: u,
                            is_col: false,
                        });
                    }
                }
            } else {
                let u = item.node as usize;
                if self.row_done[u] == stamp || d > self.row_dist[u] {
                    continue;
                }
                self.row_done[u] = stamp;
                self.visited.push((false, item.node));
                let y_u = self.row_dual[u];
                let cand = d + y_u;
                if cand < best.0 {
                    best = (cand, End::Row(item.node));
                }
                let matched = self.row_match[u];
                let edges = self.rows[u];
                for &(c, w) in edges {
                    if c == matched || self.is_blocked(c) {
                        continue;
                    }
                    let ci = c as usize;
                    if self.col_done[ci] == stamp {
                        continue;
                    }
                    let nd = d + (y_u + self.col_dual[ci] - w).max(0.0);
                    if self.col_seen[ci] != stamp || nd < self.col_dist[ci] {
                        self.col_seen[ci] = stamp;
                        self.col_dist[ci] = nd;
                        self.col_prev[ci] = item.node;
                        self.heap.push(HeapItem {
                            dist: nd,
                            node: c,
                            is_col: true,
                        });
                    }
                }
            }
        }

        let total = best.0;
        let gain = y_r - total;
        for &(is_col, k) in &self.visited {
            let k = k as usize;
            if is_col {
                let slack = total - self.col_dist[k];
                if slack > 0.0 {
                    self.col_dual[k] += slack;
                }
            } else {
                let slack = total - self.row_dist[k];
                if slack > 0.0 {
                    self.row_dual[k] = (self.row_dual[k] - slack).max(0.0);
                }
            }
        }

        let mut col = match best.1 {
            End::Row(u) if u == r => return 0.0,
            End::Row(u) => {
                let c = self.row_match[u as usize];
                self.row_match[u as usize] = NONE;
                self.col_match[c as usize] = NONE;
                self.row_dual[u as usize] = 0.0;
                c
            }
            End::Col(c) => c,
        };
        loop {
            let u = self.col_prev[col as usize];
            let old = self.row_match[u as usize];
            self.row_match[u as usize] = col;
            self.col_match[col as usize] = u;
            if u == r {
                break;
            }
            col = old;
        }
        self.value += gain;
        gain
    }
}

/// Scores of a scenario restricted to a column set of goods, as
/// positive-weight edge lists per agent.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Market {
    /// good index of each column
    pub cols: Vec<usize>,
    pub caps: Vec<u32>,
    pub edges: Vec<Vec<(u32, f64)>>,
}

impl Market {
    pub fn new(s: &Scenario, w: &TypeVector, goods: &[usize]) -> Market {
        let edges = (0..s.n_agents())
            .map(|i| edge_list(goods.iter().map(|&g| w.get(i, g))))
            .collect();
        Market {
            cols: goods.to_vec(),
            caps: s.capacities().to_vec(),
            edges,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.edges.len()
    }

    pub fn matcher(&self) -> Matcher<'_> {
        Matcher::new(self.cols.len())
    }

    /// Optimal value for the agents of `mask`, solved from scratch.
    pub fn solve(&self, mask: Coalition) -> f64 {
        self.solve_agents(mask.members())
    }

    pub fn solve_agents(&self, agents: impl Iterator<Item = usize>) -> f64 {
        let mut m = self.matcher();
        for i in agents {
            for _ in 0..self.caps[i] {
                m.add_row(&self.edges[i]);
            }
        }
        m.value()
    }

    fn solve_with(&self, caps: &[u32], blocked: &[bool]) -> f64 {
        let mut m = Matcher::new(self.cols.len()).with_blocked(blocked);
        for (i, e) in self.edges.iter().enumerate() {
            for _ in 0..caps[i] {
                m.add_row(e);
            }
        }
        m.value()
    }
}

/// Positive entries of a score row as `(column, weight)` pairs.
pub(crate) fn edge_list(scores: impl Iterator<Item = f64>) -> Vec<(u32, f64)> {
    scores
        .enumerate()
        .filter(|&(_, w)| w > 0.0)
        .map(|(c, w)| (c as u32, w))
        .collect()
}

/// An optimal allocation. Among optima, returns the one whose `(agent,
/// good)` pairs, listed in agent order then good order, form the
/// lexicographically smallest sequence. Goods with non-positive score for
/// their assignee are never allocated.
pub fn solve_optimal(s: &Scenario, w: &TypeVector) -> Result<Allocation> {
    w.check_shape(s)?;
    let all: Vec<usize> = (0..s.n_goods()).collect();
    let market = Market::new(s, w, &all);
    Ok(canonical_optimum(s, &market))
}

pub(crate) fn canonical_optimum(s: &Scenario, market: &Market) -> Allocation {
    let best = market.solve_agents(0..market.n_agents());
    let tol = tolerance(best);
    let mut caps = market.caps.clone();
    let mut blocked = vec![false; market.cols.len()];
    let mut fixed = 0.0;
    let mut bundles = vec![Vec::new(); market.n_agents()];
    for i in 0..market.n_agents() {
        for &(c, w) in &market.edges[i] {
            if caps[i] == 0 {
                break;
            }
            if blocked[c as usize] {
                continue;
            }
            blocked[c as usize] = true;
            caps[i] -= 1;
            let rest = market.solve_with(&caps, &blocked);
            if fixed + w + rest >= best - tol {
                fixed += w;
                bundles[i].push(market.cols[c as usize]);
            } else {
                blocked[c as usize] = false;
                caps[i] += 1;
            }
        }
    }
    Allocation::new(s, bundles).expect("greedy optimum respects capacities")
}

/// Memo of coalition optima for one fixed `(scenario, type vector)` pair,
/// keyed by agent bitmask and goods subset. Safe for concurrent use; racing
/// writers insert identical values.
#[derive(Debug, Default)]
pub struct OptCache {
    entries: DashMap<(u64, Vec<u64>), f64>,
}

impl OptCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn goods_key(goods: &[usize], n_goods: usize) -> Result<Vec<u64>> {
    let mut words = vec![0u64; n_goods.div_ceil(64)];
    for &g in goods {
        if g >= n_goods {
            return Err(Error::structural(format!("good index {g} out of range")));
        }
        words[g / 64] |= 1 << (g % 64);
    }
    Ok(words)
}

/// `opt(⟨C, G', ω|C⟩, w|C)`, memoised in `cache`.
pub fn opt_value(
    s: &Scenario,
    coalition: Coalition,
    goods: &[usize],
    w: &TypeVector,
    cache: &OptCache,
) -> Result<f64> {
    w.check_shape(s)?;
    if let Some(bad) = coalition.members().find(|&i| i >= s.n_agents()) {
        return Err(Error::structural(format!("agent index {bad} out of range")));
    }
    let key = (coalition.0, goods_key(goods, s.n_goods())?);
    if coalition.is_empty() || goods.is_empty() {
        return Ok(0.0);
    }
    if let Some(v) = cache.entries.get(&key) {
        return Ok(*v);
    }
    let mut cols: Vec<usize> = goods.to_vec();
    cols.sort_unstable();
    cols.dedup();
    let v = Market::new(s, w, &cols).solve(coalition);
    cache.entries.insert(key, v);
    Ok(v)
}

/// All distinct optimal allocations, up to `limit`, in a deterministic
/// order. Allocations that add zero-score goods to an optimum are optima too
/// and are listed.
pub fn enumerate_optima(s: &Scenario, w: &TypeVector, limit: usize) -> Result<Vec<Allocation>> {
    w.check_shape(s)?;
    if s.total_capacity() > ENUM_MAX_CLONES {
        return Err(Error::size("enumerate_optima clones", s.total_capacity(), ENUM_MAX_CLONES));
    }
    if s.n_goods() > ENUM_MAX_GOODS {
        return Err(Error::size("enumerate_optima goods", s.n_goods(), ENUM_MAX_GOODS));
    }
    let all: Vec<usize> = (0..s.n_goods()).collect();
    let best = Market::new(s, w, &all).solve_agents(0..s.n_agents());
    let tol = tolerance(best);

    // optimistic completion from good g onwards
    let mut tail = vec![0.0; s.n_goods() + 1];
    for g in (0..s.n_goods()).rev() {
        let top = (0..s.n_agents()).map(|i| w.get(i, g)).fold(0.0, f64::max);
        tail[g] = tail[g + 1] + top;
    }

    struct Search<'s> {
        w: &'s TypeVector,
        tail: Vec<f64>,
        target: f64,
        limit: usize,
        caps: Vec<u32>,
        bundles: Vec<Vec<usize>>,
        out: Vec<Vec<Vec<usize>>>,
    }
    impl Search<'_> {
        fn go(&mut self, g: usize, acc: f64) {
            if self.out.len() >= self.limit || acc + self.tail[g] < self.target {
                return;
            }
            if g == self.tail.len() - 1 {
                self.out.push(self.bundles.clone());
                return;
            }
            self.go(g + 1, acc);
            for i in 0..self.caps.len() {
                if self.caps[i] == 0 {
                    continue;
                }
                self.caps[i] -= 1;
                self.bundles[i].push(g);
                self.go(g + 1, acc + self.w.get(i, g));
                self.bundles[i].pop();
                self.caps[i] += 1;
            }
        }
    }

    let mut search = Search {
        w,
        tail,
        target: best - tol,
        limit,
        caps: s.capacities().to_vec(),
        bundles: vec![Vec::new(); s.n_agents()],
        out: Vec::new(),
    };
    search.go(0, 0.0);
    search
        .out
        .into_iter()
        .map(|b| Allocation::new(s, b))
        .collect()
}

/// Calls `f` on every feasible allocation of a small scenario, goods
/// unallocated included. Fails if more than `limit` allocations would be
/// generated.
pub fn for_each_allocation(s: &Scenario, limit: usize, mut f: impl FnMut(&Allocation)) -> Result<usize> {
    let bound = (s.n_agents() as f64 + 1.0).powi(s.n_goods() as i32);
    if bound > limit as f64 {
        return Err(Error::size(
            "allocation enumeration",
            bound.min(usize::MAX as f64) as usize,
            limit,
        ));
    }
    fn go(
        s: &Scenario,
        g: usize,
        caps: &mut [u32],
        bundles: &mut Vec<Vec<usize>>,
        f: &mut dyn FnMut(&Allocation),
        count: &mut usize,
    ) {
        if g == s.n_goods() {
            *count += 1;
            f(&Allocation::new(s, bundles.clone()).expect("feasible by construction"));
            return;
        }
        go(s, g + 1, caps, bundles, f, count);
        for i in 0..caps.len() {
            if caps[i] > 0 {
                caps[i] -= 1;
                bundles[i].push(g);
                go(s, g + 1, caps, bundles, f, count);
                bundles[i].pop();
                caps[i] += 1;
            }
        }
    }
    let mut caps = s.capacities().to_vec();
    let mut bundles = vec![Vec::new(); s.n_agents()];
    let mut count = 0;
    go(s, 0, &mut caps, &mut bundles, &mut f, &mut count);
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, RandomSpec};
    use crate::model::{from_one_good, to_one_good};
    use proptest::prelude::*;

    /// Independent oracle: every feasible allocation, by plain recursion.
    fn brute_force_all(s: &Scenario) -> Vec<Allocation> {
        fn rec(s: &Scenario, g: usize, caps: &mut Vec<u32>, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Allocation>) {
            if g == s.n_goods() {
                out.push(Allocation::new(s, cur.clone()).unwrap());
                return;
            }
            rec(s, g + 1, caps, cur, out);
            for i in 0..s.n_agents() {
                if caps[i] > 0 {
                    caps[i] -= 1;
                    cur[i].push(g);
                    rec(s, g + 1, caps, cur, out);
                    cur[i].pop();
                    caps[i] += 1;
                }
            }
        }
        let mut out = Vec::new();
        rec(s, 0, &mut s.capacities().to_vec(), &mut vec![Vec::new(); s.n_agents()], &mut out);
        out
    }

    fn brute_force_opt(s: &Scenario, w: &TypeVector) -> f64 {
        brute_force_all(s)
            .iter()
            .map(|a| a.value(w))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn ids(s: &Scenario, a: &Allocation, agent: usize) -> Vec<String> {
        a.bundle(agent).iter().map(|&g| s.goods()[g].clone()).collect()
    }

    #[test]
    fn fixture_optimum_is_sigma_star() {
        let f = fixtures::vqr8();
        let a = solve_optimal(&f.scenario, &f.truth).unwrap();
        assert_eq!(a.value(&f.truth), 51.0);
        assert_eq!(a, fixtures::sigma_star(&f.scenario));
    }

    #[test]
    fn single_agent_optimum() {
        let f = fixtures::vqr8();
        let s1 = f.scenario.restrict_indices(&[0], &(0..8).collect::<Vec<_>>()).unwrap();
        let t1 = f.truth.restrict_indices(&[0], &(0..8).collect::<Vec<_>>()).unwrap();
        let a = solve_optimal(&s1, &t1).unwrap();
        assert_eq!(a.value(&t1), 26.0);
        assert_eq!(ids(&s1, &a, 0), ["p1", "p4", "p5"]);
    }

    #[test]
    fn underreported_products_change_the_submission() {
        let f = fixtures::vqr8();
        let s = &f.scenario;
        let mut d = f.truth.clone();
        d.set(0, s.good_index("p2").unwrap(), 2.0).unwrap();
        d.set(0, s.good_index("p3").unwrap(), 2.0).unwrap();
        let a = solve_optimal(s, &d).unwrap();
        let img: Vec<&str> = a.image().iter().map(|&g| s.goods()[g].as_str()).collect();
        assert_eq!(img, ["p1", "p4", "p5", "p6", "p7", "p8"]);
    }

    #[test]
    fn opt_value_examples() {
        let f = fixtures::vqr8();
        let s = &f.scenario;
        let cache = OptCache::new();
        let all: Vec<usize> = (0..8).collect();
        assert_eq!(opt_value(s, Coalition::singleton(1), &all, &f.truth, &cache).unwrap(), 26.0);
        assert_eq!(opt_value(s, Coalition::singleton(0), &all, &f.truth, &cache).unwrap(), 26.0);
        assert_eq!(opt_value(s, Coalition::EMPTY, &all, &f.truth, &cache).unwrap(), 0.0);
        let img = fixtures::sigma_star(s).image();
        let both = Coalition::full(2).unwrap();
        assert_eq!(opt_value(s, both, &img, &f.truth, &cache).unwrap(), 51.0);
        assert_eq!(opt_value(s, both, &all, &f.truth, &cache).unwrap(), 51.0);
        assert_eq!(cache.len(), 4);
        // second lookup served from the cache
        assert_eq!(opt_value(s, both, &img, &f.truth, &cache).unwrap(), 51.0);
        assert_eq!(cache.len(), 4);
        assert!(opt_value(s, Coalition::singleton(5), &all, &f.truth, &cache).is_err());
    }

    #[test]
    fn fixture_optima_include_both_known_allocations() {
        let f = fixtures::vqr8();
        let opts = enumerate_optima(&f.scenario, &f.truth, 1000).unwrap();
        assert!(opts.contains(&fixtures::sigma_star(&f.scenario)));
        assert!(opts.contains(&fixtures::sigma_hat(&f.scenario)));
        assert!(opts.iter().all(|a| a.value(&f.truth) == 51.0));
    }

    #[test]
    fn single_positive_good_has_one_optimum() {
        let s = Scenario::new([("a", 1)], ["x"]).unwrap();
        let w = TypeVector::from_rows(&s, vec![vec![4.0]]).unwrap();
        let opts = enumerate_optima(&s, &w, 10).unwrap();
        assert_eq!(opts.len(), 1);
        assert_eq!(opts[0].bundle(0), &[0]);
    }

    #[test]
    fn enumerate_refuses_large_instances() {
        let s = Scenario::new([("a", 5), ("b", 4)], ["x"]).unwrap();
        let w = TypeVector::unauthored(&s);
        assert!(matches!(enumerate_optima(&s, &w, 10), Err(Error::Size { .. })));
    }

    #[test]
    fn optimum_count_matches_brute_force() {
        for seed in 0..20 {
            let inst = fixtures::random_instance(seed, RandomSpec::default());
            let (s, w) = (&inst.scenario, &inst.truth);
            let best = brute_force_opt(s, w);
            let expected = brute_force_all(s)
                .into_iter()
                .filter(|a| (a.value(w) - best).abs() <= 1e-9)
                .count();
            let got = enumerate_optima(s, w, usize::MAX).unwrap();
            assert_eq!(got.len(), expected, "seed {seed}");
        }
    }

    #[test]
    fn matcher_handles_path_ending_at_dropped_row() {
        // second row steals the good, first row is left empty
        let e1 = vec![(0u32, 2.0)];
        let e2 = vec![(0u32, 5.0)];
        let mut m = Matcher::new(1);
        assert_eq!(m.add_row(&e1), 2.0);
        assert_eq!(m.add_row(&e2), 3.0);
        assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(1, 0)]);
        // a third, weaker row changes nothing
        let e3 = vec![(0u32, 1.0)];
        assert_eq!(m.add_row(&e3), 0.0);
        assert_eq!(m.value(), 5.0);
    }

    #[test]
    fn matcher_reset_reuses_state() {
        let e = vec![(0u32, 3.0), (1, 1.0)];
        let mut m = Matcher::new(2);
        m.add_row(&e);
        m.add_row(&e);
        assert_eq!(m.value(), 4.0);
        m.reset();
        assert_eq!(m.value(), 0.0);
        m.add_row(&e);
        assert_eq!(m.value(), 3.0);
    }

    #[test]
    fn empty_goods_give_empty_allocation() {
        let s = Scenario::new([("a", 2)], Vec::<String>::new()).unwrap();
        let w = TypeVector::unauthored(&s);
        let a = solve_optimal(&s, &w).unwrap();
        assert!(a.is_empty());
    }

    fn small_instance() -> impl Strategy<Value = (Scenario, TypeVector)> {
        (1usize..=3, 1usize..=5).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(1u32..=2, n),
                proptest::collection::vec(proptest::collection::vec(-1i32..=10, m), n),
            )
                .prop_map(move |(caps, rows)| {
                    let s = Scenario::new(
                        caps.iter().enumerate().map(|(i, &c)| (format!("a{i}"), c)),
                        (0..m).map(|g| format!("g{g}")),
                    )
                    .unwrap();
                    let rows = rows
                        .into_iter()
                        .map(|r| r.into_iter().map(f64::from).collect())
                        .collect();
                    let w = TypeVector::from_rows(&s, rows).unwrap();
                    (s, w)
                })
        })
    }

    fn real_instance() -> impl Strategy<Value = (Scenario, TypeVector)> {
        (1usize..=3, 1usize..=5).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(1u32..=2, n),
                proptest::collection::vec(proptest::collection::vec(-2.0f64..10.0, m), n),
            )
                .prop_map(move |(caps, rows)| {
                    let s = Scenario::new(
                        caps.iter().enumerate().map(|(i, &c)| (format!("a{i}"), c)),
                        (0..m).map(|g| format!("g{g}")),
                    )
                    .unwrap();
                    let w = TypeVector::from_rows(&s, rows).unwrap();
                    (s, w)
                })
        })
    }

    proptest! {
        #[test]
        fn optimum_matches_brute_force((s, w) in small_instance()) {
            let a = solve_optimal(&s, &w).unwrap();
            prop_assert!((a.value(&w) - brute_force_opt(&s, &w)).abs() <= 1e-9);
            for (i, b) in a.bundles().iter().enumerate() {
                prop_assert!(b.iter().all(|&g| w.get(i, g) > 0.0));
            }
        }

        #[test]
        fn optimum_matches_brute_force_real_scores((s, w) in real_instance()) {
            let a = solve_optimal(&s, &w).unwrap();
            prop_assert!((a.value(&w) - brute_force_opt(&s, &w)).abs() <= 1e-9);
        }

        #[test]
        fn solve_is_deterministic((s, w) in small_instance()) {
            prop_assert_eq!(solve_optimal(&s, &w).unwrap(), solve_optimal(&s, &w).unwrap());
        }

        #[test]
        fn canonical_optimum_is_lexicographically_smallest((s, w) in small_instance()) {
            let a = solve_optimal(&s, &w).unwrap();
            let pairs = |x: &Allocation| -> Vec<(usize, usize)> {
                x.bundles().iter().enumerate().flat_map(|(i, b)| b.iter().map(move |&g| (i, g))).collect()
            };
            let best = a.value(&w);
            for other in brute_force_all(&s) {
                let positive = other.bundles().iter().enumerate().all(|(i, b)| b.iter().all(|&g| w.get(i, g) > 0.0));
                if positive && (other.value(&w) - best).abs() <= 1e-9 {
                    prop_assert!(pairs(&a) <= pairs(&other));
                }
            }
        }

        #[test]
        fn one_good_round_trip_preserves_value((s, w) in small_instance()) {
            let (m, w1) = to_one_good(&s, &w).unwrap();
            let a1 = solve_optimal(&m.clones, &w1).unwrap();
            let a = from_one_good(&a1, &m).unwrap();
            prop_assert_eq!(a.value(&w), a1.value(&w1));
            prop_assert!((a.value(&w) - solve_optimal(&s, &w).unwrap().value(&w)).abs() <= 1e-9);
        }
    }
}
