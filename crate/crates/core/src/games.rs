//! Coalitional games induced by an allocation scenario, their Shapley
//! values and modularity tests.
//!
//! `best(C)` is what the agents of `C` could achieve were they the only
//! agents; `marg(C)` is what the whole set loses when `C` is removed.

use std::fmt;
use std::sync::Arc;

use dashmap::DashMap;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matching::Market;
use crate::model::{Coalition, Scenario, TypeVector, MAX_MASK_AGENTS};
use crate::payments::shapley_weights;
use crate::sampling::{median_index, permutation, SamplingConfig};

/// Largest player count accepted by [`shapley_exact`].
pub const SHAPLEY_EXACT_MAX_PLAYERS: usize = 20;
/// Largest player count accepted by the modularity tests.
pub const MODULARITY_MAX_PLAYERS: usize = 5;

const TOLERANCE: f64 = 1e-9;

type Worth = dyn Fn(Coalition) -> f64 + Send + Sync;

/// A game `⟨N, φ⟩` with `φ(∅) = 0`. Worth values are memoised.
#[derive(Clone)]
pub struct CoalitionalGame {
    players: Vec<String>,
    worth: Arc<Worth>,
    memo: Arc<DashMap<u64, f64>>,
}

impl fmt::Debug for CoalitionalGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoalitionalGame")
            .field("players", &self.players)
            .field("memoised", &self.memo.len())
            .finish()
    }
}

impl CoalitionalGame {
    /// `worth` is never called on the empty coalition.
    pub fn new<F>(players: Vec<String>, worth: F) -> Result<Self>
    where
        F: Fn(Coalition) -> f64 + Send + Sync + 'static,
    {
        if players.len() > MAX_MASK_AGENTS {
            return Err(Error::size("coalitional game players", players.len(), MAX_MASK_AGENTS));
        }
        Ok(CoalitionalGame {
            players,
            worth: Arc::new(worth),
            memo: Arc::new(DashMap::new()),
        })
    }

    /// Game given by its full worth table, indexed by coalition bitmask.
    pub fn from_table(players: Vec<String>, table: Vec<f64>) -> Result<Self> {
        let n = players.len();
        if n >= usize::BITS as usize || table.len() != 1 << n {
            return Err(Error::structural(format!(
                "worth table for {n} players must have 2^{n} entries, got {}",
                table.len()
            )));
        }
        if table[0] != 0.0 {
            return Err(Error::structural("worth of the empty coalition must be 0"));
        }
        Self::new(players, move |c| table[c.0 as usize])
    }

    pub fn players(&self) -> &[String] {
        &self.players
    }

    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    pub fn grand_coalition(&self) -> Coalition {
        Coalition::full(self.n_players()).expect("player count checked at construction")
    }

    pub fn worth(&self, c: Coalition) -> f64 {
        if c.is_empty() {
            return 0.0;
        }
        if let Some(v) = self.memo.get(&c.0) {
            return *v;
        }
        let v = (self.worth)(c);
        self.memo.insert(c.0, v);
        v
    }
}

/// `best(C) = opt(⟨C, G, ω|C⟩, w|C)` over all goods.
pub fn best_game(s: &Scenario, w: &TypeVector) -> Result<CoalitionalGame> {
    w.check_shape(s)?;
    let goods: Vec<usize> = (0..s.n_goods()).collect();
    let market = Market::new(s, w, &goods);
    CoalitionalGame::new(s.agents().to_vec(), move |c| market.solve(c))
}

/// `marg(C) = opt(⟨A, G, ω⟩, w) − opt(⟨A∖C, G, ω|A∖C⟩, w|A∖C)`.
pub fn marg_game(s: &Scenario, w: &TypeVector) -> Result<CoalitionalGame> {
    w.check_shape(s)?;
    let all = s.grand_coalition()?;
    let goods: Vec<usize> = (0..s.n_goods()).collect();
    let market = Market::new(s, w, &goods);
    let total = market.solve(all);
    let n = s.n_agents();
    CoalitionalGame::new(s.agents().to_vec(), move |c| total - market.solve(c.complement(n)))
}

/// Per-player values of a game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapleyVector {
    pub players: Vec<String>,
    pub values: Vec<f64>,
}

impl ShapleyVector {
    pub fn get(&self, player: &str) -> Option<f64> {
        self.players
            .iter()
            .position(|p| p == player)
            .map(|k| self.values[k])
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `Sv_i = Σ_{C∋i} (|N|−|C|)!(|C|−1)!/|N|! · (φ(C) − φ(C∖{i}))`.
pub fn shapley_exact(g: &CoalitionalGame) -> Result<ShapleyVector> {
    let n = g.n_players();
    if n > SHAPLEY_EXACT_MAX_PLAYERS {
        return Err(Error::size("exact Shapley value", n, SHAPLEY_EXACT_MAX_PLAYERS)
            .with_hint("use sampled mode for larger games"));
    }
    let table: Vec<f64> = (0..1u64 << n)
        .into_par_iter()
        .map(|m| g.worth(Coalition(m)))
        .collect();
    let weights = shapley_weights(n);
    let values = (0..n)
        .map(|i| {
            let bit = 1usize << i;
            (0..table.len())
                .filter(|m| m & bit != 0)
                .map(|m| weights[m.count_ones() as usize] * (table[m] - table[m ^ bit]))
                .sum()
        })
        .collect();
    Ok(ShapleyVector {
        players: g.players().to_vec(),
        values,
    })
}

/// Permutation-sampled Shapley value, componentwise median over
/// repetitions.
pub fn shapley_sampled(g: &CoalitionalGame, cfg: &SamplingConfig) -> Result<ShapleyVector> {
    cfg.validate()?;
    let n = g.n_players();
    let reps: Vec<Vec<f64>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut sums = vec![0.0; n];
            let mut perm = vec![0; n];
            for sample in 0..cfg.samples {
                permutation(&mut perm, cfg.seed, rep, sample);
                let mut prefix = Coalition::EMPTY;
                let mut before = 0.0;
                for &i in &perm {
                    prefix = prefix.with(i);
                    let after = g.worth(prefix);
                    sums[i] += after - before;
                    before = after;
                }
            }
            sums.iter().map(|x| x / cfg.samples as f64).collect()
        })
        .collect();
    let values = (0..n)
        .map(|i| {
            let col: Vec<f64> = reps.iter().map(|r| r[i]).collect();
            col[median_index(&col)]
        })
        .collect();
    Ok(ShapleyVector {
        players: g.players().to_vec(),
        values,
    })
}

fn check_modularity_size(g: &CoalitionalGame) -> Result<()> {
    if g.n_players() > MODULARITY_MAX_PLAYERS {
        return Err(Error::size("modularity test", g.n_players(), MODULARITY_MAX_PLAYERS));
    }
    Ok(())
}

/// `φ(R∪T) + φ(R∩T) ≤ φ(R) + φ(T)` for every pair, within 1e-9.
pub fn is_submodular(g: &CoalitionalGame) -> Result<bool> {
    check_modularity_size(g)?;
    Ok(all_pairs(g, |union, inter, r, t| union + inter <= r + t + TOLERANCE))
}

/// `φ(R∪T) + φ(R∩T) ≥ φ(R) + φ(T)` for every pair, within 1e-9.
pub fn is_supermodular(g: &CoalitionalGame) -> Result<bool> {
    check_modularity_size(g)?;
    Ok(all_pairs(g, |union, inter, r, t| union + inter + TOLERANCE >= r + t))
}

fn all_pairs(g: &CoalitionalGame, ok: impl Fn(f64, f64, f64, f64) -> bool) -> bool {
    let n = 1u64 << g.n_players();
    (0..n).all(|r| {
        (0..n).all(|t| {
            let (r, t) = (Coalition(r), Coalition(t));
            ok(
                g.worth(r.union(t)),
                g.worth(r.intersection(t)),
                g.worth(r),
                g.worth(t),
            )
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn fixture_games() {
        let f = fixtures::vqr8();
        let best = best_game(&f.scenario, &f.truth).unwrap();
        assert_eq!(best.worth(Coalition::singleton(0)), 26.0);
        assert_eq!(best.worth(Coalition::singleton(1)), 26.0);
        assert_eq!(best.worth(Coalition(3)), 51.0);
        assert_eq!(best.worth(Coalition::EMPTY), 0.0);
        let marg = marg_game(&f.scenario, &f.truth).unwrap();
        assert_eq!(marg.worth(Coalition::singleton(0)), 25.0);
        assert_eq!(marg.worth(Coalition::EMPTY), 0.0);
        assert_eq!(marg.worth(Coalition(3)), 51.0);

        let sv = shapley_exact(&best).unwrap();
        assert_eq!(sv.values, vec![25.5, 25.5]);
        assert_eq!(sv.get("r2"), Some(25.5));
        assert!(is_submodular(&best).unwrap());
        assert!(is_supermodular(&marg).unwrap());
    }

    #[test]
    fn single_player() {
        let g = CoalitionalGame::from_table(ids(1), vec![0.0, 7.0]).unwrap();
        assert_eq!(shapley_exact(&g).unwrap().values, vec![7.0]);
    }

    #[test]
    fn additive_game_is_modular() {
        let g = CoalitionalGame::new(ids(4), |c| c.len() as f64).unwrap();
        assert!(is_submodular(&g).unwrap());
        assert!(is_supermodular(&g).unwrap());
        assert_eq!(shapley_exact(&g).unwrap().values, vec![1.0; 4]);
    }

    #[test]
    fn table_validation() {
        assert!(CoalitionalGame::from_table(ids(2), vec![0.0; 3]).is_err());
        assert!(CoalitionalGame::from_table(ids(1), vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn size_guards() {
        let g = CoalitionalGame::new(ids(21), |c| c.len() as f64).unwrap();
        let err = shapley_exact(&g).unwrap_err();
        assert!(err.to_string().contains("sampled"));
        let g = CoalitionalGame::new(ids(6), |c| c.len() as f64).unwrap();
        assert!(is_submodular(&g).is_err());
    }

    /// Oracle: average marginal contribution over every permutation.
    fn permutation_average(g: &CoalitionalGame) -> Vec<f64> {
        fn perms(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
            if k == items.len() {
                out.push(items.clone());
                return;
            }
            for j in k..items.len() {
                items.swap(k, j);
                perms(items, k + 1, out);
                items.swap(k, j);
            }
        }
        let n = g.n_players();
        let mut all = Vec::new();
        perms(&mut (0..n).collect(), 0, &mut all);
        let mut sums = vec![0.0; n];
        for p in &all {
            let mut c = Coalition::EMPTY;
            for &i in p {
                let before = g.worth(c);
                c = c.with(i);
                sums[i] += g.worth(c) - before;
            }
        }
        sums.iter().map(|s| s / all.len() as f64).collect()
    }

    #[test]
    fn exact_matches_permutation_oracle() {
        for seed in 0..10 {
            let inst = fixtures::random_instance_sized(seed, 4, 5, Default::default());
            let g = best_game(&inst.scenario, &inst.truth).unwrap();
            let sv = shapley_exact(&g).unwrap();
            for (a, b) in sv.values.iter().zip(permutation_average(&g)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sampled_with_many_samples_is_close() {
        let inst = fixtures::random_instance_sized(4, 4, 6, Default::default());
        let g = best_game(&inst.scenario, &inst.truth).unwrap();
        let exact = shapley_exact(&g).unwrap();
        let cfg = SamplingConfig::new(20_000, 3, 1).unwrap();
        let approx = shapley_sampled(&g, &cfg).unwrap();
        for (a, b) in exact.values.iter().zip(&approx.values) {
            assert!((a - b).abs() < 0.25, "{a} vs {b}");
        }
        assert_eq!(approx, shapley_sampled(&g, &cfg).unwrap());
    }
}
