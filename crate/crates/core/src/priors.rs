//! Partition priors and their single-site conditionals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{Mode, Partition};
use crate::specfun::lgamma;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "prior", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionPrior {
    /// Symmetric Dirichlet(α/K) allocation over labeled vectors with K labels.
    DirichletMultinomial { alpha: f64, k: usize },
    /// Chinese restaurant process (Ewens) over set partitions.
    Crp { alpha: f64 },
}

impl PartitionPrior {
    pub fn alpha(&self) -> f64 {
        match *self {
            PartitionPrior::DirichletMultinomial { alpha, .. } | PartitionPrior::Crp { alpha } => {
                alpha
            }
        }
    }

    pub fn mode(&self) -> Mode {
        match *self {
            PartitionPrior::DirichletMultinomial { k, .. } => Mode::Fixed(k),
            PartitionPrior::Crp { .. } => Mode::Open,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.alpha();
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::config(format!(
                "prior concentration must be positive, got {a}"
            )));
        }
        if let PartitionPrior::DirichletMultinomial { k: 0, .. } = self {
            return Err(Error::config("dirichlet_multinomial prior needs k >= 1"));
        }
        Ok(())
    }

    fn check_mode(&self, part: &Partition) -> Result<()> {
        if part.mode() != self.mode() {
            return Err(Error::usage(format!(
                "partition mode {:?} does not match prior mode {:?}",
                part.mode(),
                self.mode()
            )));
        }
        Ok(())
    }
}

/// Normalized log prior probability of a complete partition.
pub fn log_prior(prior: &PartitionPrior, part: &Partition) -> Result<f64> {
    prior.validate()?;
    prior.check_mode(part)?;
    if part.detached().is_some() {
        return Err(Error::usage("log_prior needs a complete partition"));
    }
    let n = part.n() as f64;
    Ok(match *prior {
        PartitionPrior::DirichletMultinomial { alpha, k } => {
            let ak = alpha / k as f64;
            let mut v = lgamma(alpha) - lgamma(alpha + n);
            for &nk in part.sizes() {
                if nk > 0 {
                    v += lgamma(ak + nk as f64) - lgamma(ak);
                }
            }
            v
        }
        PartitionPrior::Crp { alpha } => {
            let mut v = 0.0;
            for &nk in part.sizes() {
                if nk > 0 {
                    v += alpha.ln() + lgamma(nk as f64);
                }
            }
            // Σ_{m<n} ln(α+m) = lnΓ(α+n) − lnΓ(α)
            v - (lgamma(alpha + n) - lgamma(alpha))
        }
    })
}

/// ln p(z_i = k | z_{−i}) for the detached node. Under the CRP,
/// `k == part.num_labels()` denotes a new cluster.
pub fn log_conditional(prior: &PartitionPrior, part: &Partition, k: usize) -> Result<f64> {
    prior.check_mode(part)?;
    if part.detached().is_none() {
        return Err(Error::usage("log_conditional needs a detached node"));
    }
    let nl = part.num_labels();
    if k > nl || (k == nl && matches!(prior, PartitionPrior::DirichletMultinomial { .. })) {
        return Err(Error::usage(format!(
            "label {k} is not a candidate under {prior:?}"
        )));
    }
    Ok(conditional(prior, part, k))
}

#[inline]
pub(crate) fn conditional(prior: &PartitionPrior, part: &Partition, k: usize) -> f64 {
    let others = (part.n() - 1) as f64;
    match *prior {
        PartitionPrior::DirichletMultinomial { alpha, k: kk } => {
            (part.sizes()[k] as f64 + alpha / kk as f64).ln() - (others + alpha).ln()
        }
        PartitionPrior::Crp { alpha } => {
            let w = if k < part.num_labels() {
                part.sizes()[k] as f64
            } else {
                alpha
            };
            w.ln() - (others + alpha).ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::log_sum_exp;

    fn dm(alpha: f64, k: usize) -> PartitionPrior {
        PartitionPrior::DirichletMultinomial { alpha, k }
    }

    fn all_vectors(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let total = k.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            out.push(
                (0..n)
                    .map(|_| {
                        let v = c % k;
                        c /= k;
                        v
                    })
                    .collect(),
            );
        }
        out
    }

    /// Restricted-growth strings enumerate set partitions once each.
    fn set_partitions(n: usize) -> Vec<Vec<usize>> {
        fn rec(z: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
            if z.len() == n {
                out.push(z.clone());
                return;
            }
            let next = z.iter().copied().max().map_or(0, |m| m + 1);
            for k in 0..=next {
                z.push(k);
                rec(z, n, out);
                z.pop();
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), n, &mut out);
        out
    }

    #[test]
    fn dm_two_nodes_together() {
        let p = Partition::new(vec![0, 0], Mode::Fixed(2)).unwrap();
        assert!((log_prior(&dm(1.0, 2), &p).unwrap() - 0.375_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn crp_base_cases() {
        let crp = PartitionPrior::Crp { alpha: 1.0 };
        let p = Partition::new(vec![0, 0], Mode::Open).unwrap();
        assert!((log_prior(&crp, &p).unwrap() - 0.5_f64.ln()).abs() < 1e-14);
        let p = Partition::new(vec![0], Mode::Open).unwrap();
        assert!(log_prior(&crp, &p).unwrap().abs() < 1e-15);

        let mut p = Partition::new(vec![0, 1, 0], Mode::Open).unwrap();
        p.remove(1);
        let new = log_conditional(&crp, &p, p.num_labels()).unwrap();
        assert!((new - (1.0_f64 / 3.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn dm_rejects_new_cluster() {
        let mut p = Partition::new(vec![0, 1, 0], Mode::Fixed(2)).unwrap();
        p.remove(0);
        assert!(log_conditional(&dm(1.0, 2), &p, 2).is_err());
        assert!(log_conditional(&dm(1.0, 2), &p, 1).is_ok());
    }

    #[test]
    fn dm_normalizes_over_labeled_vectors() {
        for n in 1..=6 {
            for k in 1..=3 {
                let prior = dm(1.7, k);
                let vals: Vec<f64> = all_vectors(n, k)
                    .into_iter()
                    .map(|z| {
                        log_prior(&prior, &Partition::new(z, Mode::Fixed(k)).unwrap()).unwrap()
                    })
                    .collect();
                assert!(log_sum_exp(&vals).unwrap().abs() < 1e-10, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn crp_normalizes_over_set_partitions() {
        for n in 1..=8 {
            let prior = PartitionPrior::Crp { alpha: 0.6 };
            let vals: Vec<f64> = set_partitions(n)
                .into_iter()
                .map(|z| log_prior(&prior, &Partition::new(z, Mode::Open).unwrap()).unwrap())
                .collect();
            assert!(log_sum_exp(&vals).unwrap().abs() < 1e-10, "n={n}");
        }
    }

    /// p(z) equals the product of conditionals as nodes are added one by one.
    fn sequential_product(prior: &PartitionPrior, z: &[usize], order: &[usize]) -> f64 {
        let mode = prior.mode();
        let n = z.len();
        let mut total = 0.0;
        for step in 1..=n {
            let present: Vec<usize> = order[..step].to_vec();
            // partition over the first `step` nodes, newest detached
            let sub: Vec<usize> = present.iter().map(|&i| z[i]).collect();
            let (sub, mode) = match mode {
                Mode::Open => (Partition::compact(&sub), Mode::Open),
                m => (sub, m),
            };
            let mut p = Partition::new(sub.clone(), mode).unwrap();
            let label = {
                let last = step - 1;
                let lab = sub[last];
                let lone = sub.iter().filter(|&&v| v == lab).count() == 1;
                p.remove(last);
                if mode == Mode::Open && lone {
                    p.num_labels()
                } else {
                    lab
                }
            };
            total += log_conditional(prior, &p, label).unwrap();
        }
        total
    }

    #[test]
    fn conditionals_multiply_to_joint() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in 2..=6 {
            for prior in [dm(1.3, 3), PartitionPrior::Crp { alpha: 0.8 }] {
                let k = if let Mode::Fixed(k) = prior.mode() {
                    k
                } else {
                    n
                };
                for z in all_vectors(n, k.min(3)).into_iter().step_by(7) {
                    let (z, mode) = match prior.mode() {
                        Mode::Open => (Partition::compact(&z), Mode::Open),
                        m => (z, m),
                    };
                    let joint =
                        log_prior(&prior, &Partition::new(z.clone(), mode).unwrap()).unwrap();
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(&mut rng);
                    let seq = sequential_product(&prior, &z, &order);
                    assert!(
                        (joint - seq).abs() < 1e-10,
                        "{prior:?} z={z:?} {joint} vs {seq}"
                    );
                }
            }
        }
    }
}
