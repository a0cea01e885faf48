//! Division baselines. Each returns the amount credited to every agent; as
//! payment rules they pay `division_i − v_i(π)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{is_authored, Allocation, TypeVector, VerifiedView};

/// Verified good → agents with a positive verified score for it.
pub type Authorship = BTreeMap<usize, Vec<usize>>;

pub fn authorship(view: &VerifiedView) -> Authorship {
    view.verified_goods()
        .iter()
        .map(|&g| {
            let authors = (0..view.n_agents())
                .filter(|&i| is_authored(view.score(i, g)))
                .collect();
            (g, authors)
        })
        .collect()
}

/// Each agent is credited with the verified value of its own bundle.
pub fn divide_proj(pi: &Allocation, view: &VerifiedView) -> Result<Vec<f64>> {
    (0..pi.n_agents()).map(|i| view.bundle_value(i, pi)).collect()
}

/// The verified score of every allocated good is split evenly among its
/// authors, whoever it was allocated to.
pub fn divide_owner(pi: &Allocation, view: &VerifiedView, authors: &Authorship) -> Result<Vec<f64>> {
    let mut out = vec![0.0; pi.n_agents()];
    for (holder, bundle) in pi.bundles().iter().enumerate() {
        for &g in bundle {
            let who = authors.get(&g).map(Vec::as_slice).unwrap_or_default();
            if who.is_empty() {
                return Err(Error::structural(format!(
                    "allocated good #{g} has no author"
                )));
            }
            let score = view.get(holder, g)?;
            for &a in who {
                out[a] += score / who.len() as f64;
            }
        }
    }
    Ok(out)
}

/// Proportional to declared overall production: agent `i` receives the
/// fraction `Σ_{g: d_i(g)>0} d_i(g) / Σ_j Σ_{g: d_j(g)>0} d_j(g)` of the
/// verified value of its own bundle, or of the whole allocation when
/// `variant` is set.
pub fn divide_all(pi: &Allocation, view: &VerifiedView, d: &TypeVector, variant: bool) -> Result<Vec<f64>> {
    if d.n_agents() != pi.n_agents() {
        return Err(Error::structural("declared vector and allocation disagree on agents"));
    }
    let production: Vec<f64> = (0..d.n_agents())
        .map(|i| d.row(i).iter().filter(|&&x| is_authored(x)).sum())
        .collect();
    let denom: f64 = production.iter().sum();
    if denom == 0.0 {
        return Err(Error::structural("no agent declares any production"));
    }
    let own = divide_proj(pi, view)?;
    let total: f64 = own.iter().sum();
    Ok((0..pi.n_agents())
        .map(|i| production[i] / denom * if variant { total } else { own[i] })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{verify, Scenario};

    #[test]
    fn proj_on_fixture() {
        let f = fixtures::vqr8();
        let s = &f.scenario;
        let view = verify(&f.truth, &fixtures::sigma_star(s)).unwrap();
        assert_eq!(divide_proj(&fixtures::sigma_star(s), &view).unwrap(), vec![25.0, 26.0]);
        let hat = fixtures::sigma_hat(s);
        let view = verify(&f.truth, &hat).unwrap();
        assert_eq!(divide_proj(&hat, &view).unwrap(), vec![26.0, 25.0]);
        let empty = Allocation::empty(s);
        let view = verify(&f.truth, &empty).unwrap();
        assert_eq!(divide_proj(&empty, &view).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn owner_on_fixture() {
        let f = fixtures::vqr8();
        let s = &f.scenario;
        let hat = fixtures::sigma_hat(s);
        let view = verify(&f.truth, &hat).unwrap();
        assert_eq!(divide_owner(&hat, &view, &authorship(&view)).unwrap()[1], 33.0);
        let star = fixtures::sigma_star(s);
        let view = verify(&f.truth, &star).unwrap();
        assert_eq!(divide_owner(&star, &view, &authorship(&view)).unwrap()[1], 26.0);
    }

    #[test]
    fn owner_equals_proj_without_coauthors() {
        let s = Scenario::new([("a", 1), ("b", 1)], ["x", "y"]).unwrap();
        let t = TypeVector::from_rows(&s, vec![vec![4.0, -1.0], vec![-1.0, 6.0]]).unwrap();
        let pi = Allocation::new(&s, vec![vec![0], vec![1]]).unwrap();
        let view = verify(&t, &pi).unwrap();
        assert_eq!(
            divide_owner(&pi, &view, &authorship(&view)).unwrap(),
            divide_proj(&pi, &view).unwrap()
        );
    }

    #[test]
    fn owner_rejects_unauthored_goods() {
        let s = Scenario::new([("a", 1)], ["x"]).unwrap();
        let t = TypeVector::from_rows(&s, vec![vec![0.0]]).unwrap();
        let pi = Allocation::new(&s, vec![vec![0]]).unwrap();
        let view = verify(&t, &pi).unwrap();
        assert!(divide_owner(&pi, &view, &authorship(&view)).is_err());
    }

    #[test]
    fn all_on_fixture() {
        let f = fixtures::vqr8();
        let s = &f.scenario;
        let pi = fixtures::sigma_star(s);
        let view = verify(&f.truth, &pi).unwrap();
        let a = divide_all(&pi, &view, &f.truth, false).unwrap();
        assert!((a[0] - 40.0 / 81.0 * 25.0).abs() < 1e-12);
        let v = divide_all(&pi, &view, &f.truth, true).unwrap();
        assert!((v[0] - 40.0 / 81.0 * 51.0).abs() < 1e-12);
        assert!((v.iter().sum::<f64>() - 51.0).abs() < 1e-12);
    }

    #[test]
    fn all_single_agent_and_zero_production() {
        let s = Scenario::new([("a", 2)], ["x", "y"]).unwrap();
        let t = TypeVector::from_rows(&s, vec![vec![3.0, 2.0]]).unwrap();
        let pi = Allocation::new(&s, vec![vec![0, 1]]).unwrap();
        let view = verify(&t, &pi).unwrap();
        assert_eq!(divide_all(&pi, &view, &t, false).unwrap(), vec![5.0]);
        let zero = TypeVector::filled(1, 2, -1.0);
        assert!(divide_all(&pi, &view, &zero, false).is_err());
    }
}
