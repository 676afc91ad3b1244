//! Collapsed block marginals and conjugate posterior summaries.
//!
//! Every marginal is `ln ∫ p(Y_block | θ) p(θ) dθ` for one block, written in
//! terms of the block's sufficient statistics. An empty block always scores 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netdata::Modality;
use crate::specfun::{
    self, inv_reg_inc_beta_ln, inv_reg_lower_inc_gamma_ln, lbeta, lgamma, ln_reg_inc_beta,
    ln_reg_lower_inc_gamma,
};
use crate::stats::BlockStats;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// A conjugate block family and its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    BetaBernoulli {
        a: f64,
        b: f64,
    },
    GammaPoisson {
        a: f64,
        b: f64,
    },
    Nig {
        mu0: f64,
        kappa0: f64,
        alpha0: f64,
        beta0: f64,
    },
    /// Beta prior restricted to `[0, x_max]`.
    TruncBeta {
        a: f64,
        b: f64,
        x_max: f64,
    },
    /// Gamma prior restricted to `[0, x_max]`.
    TruncGamma {
        a: f64,
        b: f64,
        x_max: f64,
    },
    DirMult {
        alpha: Vec<f64>,
    },
    /// Zero-inflated Poisson: Beta prior on activity, Gamma prior on the rate
    /// of active dyads.
    Zip {
        a_p: f64,
        b_p: f64,
        a_lambda: f64,
        b_lambda: f64,
    },
    /// Finite mixture over block types, `weights` summing to one.
    Mixture {
        weights: Vec<f64>,
        types: Vec<Family>,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::BetaBernoulli { .. } => "beta_bernoulli",
            Family::GammaPoisson { .. } => "gamma_poisson",
            Family::Nig { .. } => "nig",
            Family::TruncBeta { .. } => "trunc_beta",
            Family::TruncGamma { .. } => "trunc_gamma",
            Family::DirMult { .. } => "dir_mult",
            Family::Zip { .. } => "zip",
            Family::Mixture { .. } => "mixture",
        }
    }

    /// Default family for a modality with all hyperparameters at 1.
    pub fn default_for(modality: Modality) -> Family {
        match modality {
            Modality::Binary => Family::BetaBernoulli { a: 1.0, b: 1.0 },
            Modality::Count => Family::GammaPoisson { a: 1.0, b: 1.0 },
            Modality::Real => Family::Nig {
                mu0: 0.0,
                kappa0: 1.0,
                alpha0: 1.0,
                beta0: 1.0,
            },
            Modality::Signed => Family::DirMult {
                alpha: vec![1.0; 3],
            },
            Modality::Dyad4 => Family::DirMult {
                alpha: vec![1.0; 4],
            },
        }
    }

    pub fn is_zip(&self) -> bool {
        matches!(self, Family::Zip { .. })
    }

    /// Checks hyperparameters and that the family can score `modality` data.
    pub fn validate(&self, modality: Modality) -> Result<()> {
        let pos = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "{}: {name} must be positive, got {v}",
                    self.name()
                )))
            }
        };
        let wrong = || {
            Err(Error::config(format!(
                "family {} cannot score {modality:?} data",
                self.name()
            )))
        };
        match self {
            Family::BetaBernoulli { a, b } => {
                pos("a", *a)?;
                pos("b", *b)?;
                if modality != Modality::Binary {
                    return wrong();
                }
            }
            Family::GammaPoisson { a, b } => {
                pos("a", *a)?;
                pos("b", *b)?;
                if modality != Modality::Count {
                    return wrong();
                }
            }
            Family::Nig {
                mu0,
                kappa0,
                alpha0,
                beta0,
            } => {
                if !mu0.is_finite() {
                    return Err(Error::config("nig: mu0 must be finite"));
                }
                pos("kappa0", *kappa0)?;
                pos("alpha0", *alpha0)?;
                pos("beta0", *beta0)?;
                if modality != Modality::Real {
                    return wrong();
                }
            }
            Family::TruncBeta { a, b, x_max } => {
                pos("a", *a)?;
                pos("b", *b)?;
                if !(*x_max > 0.0 && *x_max <= 1.0) {
                    return Err(Error::config(format!(
                        "trunc_beta: x_max must lie in (0, 1], got {x_max}"
                    )));
                }
                if modality != Modality::Binary {
                    return wrong();
                }
            }
            Family::TruncGamma { a, b, x_max } => {
                pos("a", *a)?;
                pos("b", *b)?;
                if !(*x_max > 0.0) || x_max.is_nan() {
                    return Err(Error::config(format!(
                        "trunc_gamma: x_max must be positive, got {x_max}"
                    )));
                }
                if modality != Modality::Count {
                    return wrong();
                }
            }
            Family::DirMult { alpha } => {
                for &a in alpha {
                    pos("alpha", a)?;
                }
                match modality.categories() {
                    Some(m) if m == alpha.len() => {}
                    Some(m) => {
                        return Err(Error::config(format!(
                            "dir_mult: {modality:?} data has {m} categories but alpha has {}",
                            alpha.len()
                        )))
                    }
                    None => return wrong(),
                }
                // Swapping two labels reverses the orientation of their block, so
                // the one-way states must share a concentration.
                if modality == Modality::Dyad4 && alpha[1] != alpha[2] {
                    return Err(Error::config(format!(
                        "dir_mult: dyad-state alpha must give 10 and 01 equal weight, got {} and {}",
                        alpha[1], alpha[2]
                    )));
                }
            }
            Family::Zip {
                a_p,
                b_p,
                a_lambda,
                b_lambda,
            } => {
                pos("a_p", *a_p)?;
                pos("b_p", *b_p)?;
                pos("a_lambda", *a_lambda)?;
                pos("b_lambda", *b_lambda)?;
                if modality != Modality::Count {
                    return wrong();
                }
            }
            Family::Mixture { weights, types } => {
                if types.is_empty() {
                    return Err(Error::config("mixture: at least one type is required"));
                }
                if weights.len() != types.len() {
                    return Err(Error::config("mixture: weights and types differ in length"));
                }
                for &w in weights {
                    pos("weight", w)?;
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::config(format!(
                        "mixture: weights sum to {total}, not 1"
                    )));
                }
                for t in types {
                    if matches!(t, Family::Mixture { .. } | Family::Zip { .. }) {
                        return Err(Error::config(
                            "mixture: types must be plain conjugate families",
                        ));
                    }
                    t.validate(modality)?;
                }
            }
        }
        Ok(())
    }
}

/// Which family scores diagonal and off-diagonal blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub diag: Family,
    pub offdiag: Family,
    /// Omit pure-data constants such as Σ ln y! from the likelihood.
    #[serde(default)]
    pub drop_constants: bool,
}

impl FamilySpec {
    pub fn uniform(family: Family) -> Self {
        FamilySpec {
            diag: family.clone(),
            offdiag: family,
            drop_constants: false,
        }
    }

    pub fn default_for(modality: Modality) -> Self {
        FamilySpec::uniform(Family::default_for(modality))
    }

    pub fn is_zip(&self) -> bool {
        self.diag.is_zip()
    }

    pub fn validate(&self, modality: Modality) -> Result<()> {
        self.diag.validate(modality)?;
        self.offdiag.validate(modality)?;
        if self.diag.is_zip() != self.offdiag.is_zip() {
            return Err(Error::config(
                "zip must govern both diagonal and off-diagonal blocks",
            ));
        }
        Ok(())
    }
}

fn check_pos(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

/// ln[B(a+s, b+n−s) / B(a, b)].
pub fn bb_log_marginal(s: u64, n: u64, a: f64, b: f64) -> Result<f64> {
    check_pos("a", a)?;
    check_pos("b", b)?;
    if s > n {
        return Err(Error::domain(format!(
            "edge count {s} exceeds dyad count {n}"
        )));
    }
    Ok(bb(s as f64, n as f64, a, b, lbeta(a, b)))
}

#[inline]
fn bb(s: f64, n: f64, a: f64, b: f64, norm: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    lbeta(a + s, b + n - s) - norm
}

/// Gamma-Poisson block marginal. `ln_fact` is Σ ln(y!) over the block, or
/// `None` to drop that data-only constant.
pub fn gp_log_marginal(sum: u64, n: u64, a: f64, b: f64, ln_fact: Option<f64>) -> Result<f64> {
    check_pos("a", a)?;
    check_pos("b", b)?;
    if n == 0 && sum > 0 {
        return Err(Error::domain("nonzero value sum over an empty block"));
    }
    let norm = a * b.ln() - lgamma(a);
    Ok(gp(sum as f64, n as f64, a, b, norm) - ln_fact.unwrap_or(0.0))
}

#[inline]
fn gp(s: f64, n: f64, a: f64, b: f64, norm: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    norm + lgamma(a + s) - (a + s) * (b + n).ln()
}

/// Posterior NIG parameters (μn, κn, αn, βn) after `n` observations.
fn nig_update(
    n: f64,
    sum: f64,
    sum_sq: f64,
    mu0: f64,
    kappa0: f64,
    alpha0: f64,
    beta0: f64,
) -> Result<(f64, f64, f64, f64)> {
    if n == 0.0 {
        return Ok((mu0, kappa0, alpha0, beta0));
    }
    let mean = sum / n;
    let mut q = sum_sq - sum * mean;
    if q < 0.0 {
        if q < -1e-9 * sum_sq.abs().max(1.0) {
            return Err(Error::numeric(format!(
                "negative within-block sum of squares {q} (n={n}, sum={sum}, sum_sq={sum_sq})"
            )));
        }
        q = 0.0;
    }
    let kn = kappa0 + n;
    let dev = mean - mu0;
    let bn = beta0 + 0.5 * q + kappa0 * n * dev * dev / (2.0 * kn);
    Ok(((kappa0 * mu0 + sum) / kn, kn, alpha0 + 0.5 * n, bn))
}

/// Normal-Inverse-Gamma block marginal for real weights.
pub fn nig_log_marginal(
    n: u64,
    sum_y: f64,
    sum_y2: f64,
    mu0: f64,
    kappa0: f64,
    alpha0: f64,
    beta0: f64,
) -> Result<f64> {
    check_pos("kappa0", kappa0)?;
    check_pos("alpha0", alpha0)?;
    check_pos("beta0", beta0)?;
    if !mu0.is_finite() || !sum_y.is_finite() || !sum_y2.is_finite() {
        return Err(Error::domain("non-finite NIG input"));
    }
    nig(
        n as f64,
        sum_y,
        sum_y2,
        mu0,
        kappa0,
        alpha0,
        beta0,
        alpha0 * beta0.ln() - lgamma(alpha0),
    )
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn nig(
    n: f64,
    sum: f64,
    sum_sq: f64,
    mu0: f64,
    kappa0: f64,
    alpha0: f64,
    beta0: f64,
    norm: f64,
) -> Result<f64> {
    if n == 0.0 {
        return Ok(0.0);
    }
    let (_, kn, an, bn) = nig_update(n, sum, sum_sq, mu0, kappa0, alpha0, beta0)?;
    Ok(-n * HALF_LN_2PI + 0.5 * (kappa0 / kn).ln() + lgamma(an) + norm - an * bn.ln())
}

fn ln_mass_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if x >= 1.0 {
        return Ok(0.0);
    }
    let v = ln_reg_inc_beta(x, a, b)?;
    if !v.is_finite() {
        return Err(Error::numeric(format!(
            "truncated beta mass I_{x}({a}, {b}) underflows to zero"
        )));
    }
    Ok(v)
}

fn ln_mass_gamma(a: f64, bx: f64) -> Result<f64> {
    if bx.is_infinite() {
        return Ok(0.0);
    }
    let v = ln_reg_lower_inc_gamma(a, bx)?;
    if !v.is_finite() {
        return Err(Error::numeric(format!(
            "truncated gamma mass P({a}, {bx}) underflows to zero"
        )));
    }
    Ok(v)
}

/// Beta-Bernoulli marginal with the prior restricted to `[0, x_max]`.
pub fn tbb_log_marginal(s: u64, n: u64, a: f64, b: f64, x_max: f64) -> Result<f64> {
    let base = bb_log_marginal(s, n, a, b)?;
    if !(x_max > 0.0 && x_max <= 1.0) {
        return Err(Error::domain(format!(
            "x_max must lie in (0, 1], got {x_max}"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let (s, n) = (s as f64, n as f64);
    Ok(base + ln_mass_beta(x_max, a + s, b + n - s)? - ln_mass_beta(x_max, a, b)?)
}

/// Gamma-Poisson marginal with the prior restricted to `[0, x_max]`.
/// Pure-data constants are dropped.
pub fn tgp_log_marginal(sum: u64, n: u64, a: f64, b: f64, x_max: f64) -> Result<f64> {
    check_pos("a", a)?;
    check_pos("b", b)?;
    if !(x_max > 0.0) || x_max.is_nan() {
        return Err(Error::domain(format!(
            "x_max must be positive, got {x_max}"
        )));
    }
    let norm = a * b.ln() - lgamma(a) - ln_mass_gamma(a, b * x_max)?;
    tgp(sum as f64, n as f64, a, b, x_max, norm)
}

#[inline]
fn tgp(s: f64, n: f64, a: f64, b: f64, x_max: f64, norm: f64) -> Result<f64> {
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok(norm + lgamma(a + s) + ln_mass_gamma(a + s, (b + n) * x_max)? - (a + s) * (b + n).ln())
}

/// Dirichlet-multinomial marginal of category counts.
pub fn dirmult_log_marginal(counts: &[u64], alpha: &[f64]) -> Result<f64> {
    if counts.len() != alpha.len() {
        return Err(Error::domain(format!(
            "{} counts against {} concentrations",
            counts.len(),
            alpha.len()
        )));
    }
    for &a in alpha {
        check_pos("alpha", a)?;
    }
    let sa: f64 = alpha.iter().sum();
    let norm = lgamma(sa) - alpha.iter().map(|&a| lgamma(a)).sum::<f64>();
    Ok(dm(counts, alpha, sa, norm))
}

#[inline]
fn dm(counts: &[u64], alpha: &[f64], sum_alpha: f64, norm: f64) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let mut v = norm - lgamma(sum_alpha + total as f64);
    for (&c, &a) in counts.iter().zip(alpha) {
        v += lgamma(a + c as f64);
    }
    v
}

/// Zero-inflated Poisson block: Beta-Bernoulli over activity plus
/// Gamma-Poisson over the active dyads (pure-data constants dropped).
pub fn zip_log_block_marginal(
    m_active: u64,
    n: u64,
    s_active: u64,
    a_p: f64,
    b_p: f64,
    a_lambda: f64,
    b_lambda: f64,
) -> Result<f64> {
    Ok(bb_log_marginal(m_active, n, a_p, b_p)?
        + gp_log_marginal(s_active, m_active, a_lambda, b_lambda, None)?)
}

/// ln Σ_t π_t m_t(stats) for a mixture of block types.
pub fn type_mixture_log_marginal(
    stats: &BlockStats,
    modality: Modality,
    weights: &[f64],
    types: &[Family],
) -> Result<f64> {
    if types.is_empty() {
        return Err(Error::usage("type mixture with no types"));
    }
    let fam = Family::Mixture {
        weights: weights.to_vec(),
        types: types.to_vec(),
    };
    fam.validate(modality)
        .map_err(|e| Error::domain(e.to_string()))?;
    CompiledFamily::new(&fam, modality)?.log_marginal(stats)
}

fn category_counts(st: &BlockStats, m: usize) -> [u64; 4] {
    if m == 2 {
        [st.dyads - st.edges, st.edges, 0, 0]
    } else {
        st.categories(m)
    }
}

/// A family with its prior normalizers precomputed, for the sampler's inner loop.
#[derive(Clone, Debug)]
pub(crate) enum CompiledFamily {
    Bb {
        a: f64,
        b: f64,
        norm: f64,
    },
    Gp {
        a: f64,
        b: f64,
        norm: f64,
    },
    Nig {
        mu0: f64,
        kappa0: f64,
        alpha0: f64,
        beta0: f64,
        norm: f64,
    },
    Tb {
        a: f64,
        b: f64,
        x: f64,
        norm: f64,
    },
    Tg {
        a: f64,
        b: f64,
        x: f64,
        norm: f64,
    },
    Dm {
        alpha: [f64; 4],
        m: usize,
        sum: f64,
        norm: f64,
    },
    Zip {
        a_p: f64,
        b_p: f64,
        a_l: f64,
        b_l: f64,
        bb_norm: f64,
        gp_norm: f64,
    },
    Mix {
        ln_w: Vec<f64>,
        types: Vec<CompiledFamily>,
    },
}

impl CompiledFamily {
    pub(crate) fn new(f: &Family, modality: Modality) -> Result<Self> {
        f.validate(modality)?;
        Ok(match f {
            &Family::BetaBernoulli { a, b } => CompiledFamily::Bb {
                a,
                b,
                norm: lbeta(a, b),
            },
            &Family::GammaPoisson { a, b } => CompiledFamily::Gp {
                a,
                b,
                norm: a * b.ln() - lgamma(a),
            },
            &Family::Nig {
                mu0,
                kappa0,
                alpha0,
                beta0,
            } => CompiledFamily::Nig {
                mu0,
                kappa0,
                alpha0,
                beta0,
                norm: alpha0 * beta0.ln() - lgamma(alpha0),
            },
            &Family::TruncBeta { a, b, x_max } => CompiledFamily::Tb {
                a,
                b,
                x: x_max,
                norm: lbeta(a, b) + ln_mass_beta(x_max, a, b)?,
            },
            &Family::TruncGamma { a, b, x_max } => CompiledFamily::Tg {
                a,
                b,
                x: x_max,
                norm: a * b.ln() - lgamma(a) - ln_mass_gamma(a, b * x_max)?,
            },
            Family::DirMult { alpha } => {
                let mut arr = [1.0; 4];
                arr[..alpha.len()].copy_from_slice(alpha);
                let sum: f64 = alpha.iter().sum();
                CompiledFamily::Dm {
                    alpha: arr,
                    m: alpha.len(),
                    sum,
                    norm: lgamma(sum) - alpha.iter().map(|&a| lgamma(a)).sum::<f64>(),
                }
            }
            &Family::Zip {
                a_p,
                b_p,
                a_lambda,
                b_lambda,
            } => CompiledFamily::Zip {
                a_p,
                b_p,
                a_l: a_lambda,
                b_l: b_lambda,
                bb_norm: lbeta(a_p, b_p),
                gp_norm: a_lambda * b_lambda.ln() - lgamma(a_lambda),
            },
            Family::Mixture { weights, types } => CompiledFamily::Mix {
                ln_w: weights.iter().map(|w| w.ln()).collect(),
                types: types
                    .iter()
                    .map(|t| CompiledFamily::new(t, modality))
                    .collect::<Result<_>>()?,
            },
        })
    }

    /// Log marginal of one block in one layer.
    pub(crate) fn log_marginal(&self, st: &BlockStats) -> Result<f64> {
        if st.dyads == 0 {
            return Ok(0.0);
        }
        let n = st.dyads as f64;
        Ok(match self {
            &CompiledFamily::Bb { a, b, norm } => bb(st.edges as f64, n, a, b, norm),
            &CompiledFamily::Gp { a, b, norm } => gp(st.total as f64, n, a, b, norm),
            &CompiledFamily::Nig {
                mu0,
                kappa0,
                alpha0,
                beta0,
                norm,
            } => nig(
                n,
                st.sum.value(),
                st.sum_sq.value(),
                mu0,
                kappa0,
                alpha0,
                beta0,
                norm,
            )?,
            &CompiledFamily::Tb { a, b, x, norm } => {
                let s = st.edges as f64;
                let (pa, pb) = (a + s, b + n - s);
                lbeta(pa, pb) + ln_mass_beta(x, pa, pb)? - norm
            }
            &CompiledFamily::Tg { a, b, x, norm } => tgp(st.total as f64, n, a, b, x, norm)?,
            CompiledFamily::Dm {
                alpha,
                m,
                sum,
                norm,
            } => {
                let c = category_counts(st, *m);
                dm(&c[..*m], &alpha[..*m], *sum, *norm)
            }
            &CompiledFamily::Zip {
                a_p,
                b_p,
                a_l,
                b_l,
                bb_norm,
                gp_norm,
            } => {
                let m = st.edges as f64;
                bb(m, n, a_p, b_p, bb_norm) + gp(st.total as f64, m, a_l, b_l, gp_norm)
            }
            CompiledFamily::Mix { ln_w, types } => {
                let mut terms = [0.0; 8];
                let mut buf = Vec::new();
                let vals: &mut [f64] = if types.len() <= 8 {
                    &mut terms[..types.len()]
                } else {
                    buf.resize(types.len(), 0.0);
                    &mut buf
                };
                for ((v, t), w) in vals.iter_mut().zip(types).zip(ln_w) {
                    *v = w + t.log_marginal(st)?;
                }
                specfun::log_sum_exp(vals)?
            }
        })
    }
}

/// Posterior summary of one scalar block parameter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Conjugate posterior of one block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockPosterior {
    pub family: &'static str,
    /// Updated hyperparameters, e.g. `a_post`, `b_post`.
    pub params: Vec<(String, f64)>,
    pub summaries: Vec<ParamSummary>,
    /// Zero-inflated blocks: expected count p̄·λ̄ and nonzero probability
    /// p̄(1 − e^{−λ̄}) at the posterior means.
    pub mu: Option<f64>,
    pub q: Option<f64>,
    /// Mixture blocks: posterior type probabilities (summaries follow the
    /// most probable type).
    pub type_weights: Option<Vec<f64>>,
}

fn beta_summary(name: &str, a: f64, b: f64, tail: f64) -> Result<ParamSummary> {
    Ok(ParamSummary {
        name: name.into(),
        mean: a / (a + b),
        lo: inv_reg_inc_beta_ln(tail.ln(), a, b, 1.0)?,
        hi: inv_reg_inc_beta_ln((1.0 - tail).ln(), a, b, 1.0)?,
    })
}

fn trunc_beta_summary(name: &str, a: f64, b: f64, x: f64, tail: f64) -> Result<ParamSummary> {
    if x >= 1.0 {
        return beta_summary(name, a, b, tail);
    }
    let ln_mass = ln_mass_beta(x, a, b)?;
    let ratio = (ln_reg_inc_beta(x, a + 1.0, b)? - ln_mass).exp();
    Ok(ParamSummary {
        name: name.into(),
        mean: a / (a + b) * ratio,
        lo: inv_reg_inc_beta_ln(tail.ln() + ln_mass, a, b, x)?,
        hi: inv_reg_inc_beta_ln((1.0 - tail).ln() + ln_mass, a, b, x)?,
    })
}

fn gamma_summary(name: &str, a: f64, b: f64, tail: f64) -> Result<ParamSummary> {
    Ok(ParamSummary {
        name: name.into(),
        mean: a / b,
        lo: inv_reg_lower_inc_gamma_ln(tail.ln(), a, f64::INFINITY)? / b,
        hi: inv_reg_lower_inc_gamma_ln((1.0 - tail).ln(), a, f64::INFINITY)? / b,
    })
}

fn trunc_gamma_summary(name: &str, a: f64, b: f64, x: f64, tail: f64) -> Result<ParamSummary> {
    let ln_mass = ln_mass_gamma(a, b * x)?;
    let ratio = (ln_reg_lower_inc_gamma(a + 1.0, b * x)? - ln_mass).exp();
    Ok(ParamSummary {
        name: name.into(),
        mean: a / b * ratio,
        lo: inv_reg_lower_inc_gamma_ln(tail.ln() + ln_mass, a, b * x)? / b,
        hi: inv_reg_lower_inc_gamma_ln((1.0 - tail).ln() + ln_mass, a, b * x)? / b,
    })
}

/// Posterior of one block's parameters given its statistics. `level` is the
/// central credible mass, e.g. 0.95.
pub fn block_posterior(
    family: &Family,
    st: &BlockStats,
    modality: Modality,
    level: f64,
) -> Result<BlockPosterior> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!(
            "credible level must lie in (0, 1), got {level}"
        )));
    }
    family.validate(modality)?;
    let tail = 0.5 * (1.0 - level);
    let n = st.dyads as f64;
    let mut out = BlockPosterior {
        family: family.name(),
        params: Vec::new(),
        summaries: Vec::new(),
        mu: None,
        q: None,
        type_weights: None,
    };
    match family {
        &Family::BetaBernoulli { a, b } | &Family::TruncBeta { a, b, .. } => {
            let s = st.edges as f64;
            let (pa, pb) = (a + s, b + n - s);
            out.params = vec![("a_post".into(), pa), ("b_post".into(), pb)];
            let x = if let Family::TruncBeta { x_max, .. } = family {
                *x_max
            } else {
                1.0
            };
            out.summaries
                .push(trunc_beta_summary("p", pa, pb, x, tail)?);
        }
        &Family::GammaPoisson { a, b } => {
            let (pa, pb) = (a + st.total as f64, b + n);
            out.params = vec![("a_post".into(), pa), ("b_post".into(), pb)];
            out.summaries.push(gamma_summary("lambda", pa, pb, tail)?);
        }
        &Family::TruncGamma { a, b, x_max } => {
            let (pa, pb) = (a + st.total as f64, b + n);
            out.params = vec![("a_post".into(), pa), ("b_post".into(), pb)];
            out.summaries
                .push(trunc_gamma_summary("lambda", pa, pb, x_max, tail)?);
        }
        &Family::Nig {
            mu0,
            kappa0,
            alpha0,
            beta0,
        } => {
            let (mn, kn, an, bn) = nig_update(
                n,
                st.sum.value(),
                st.sum_sq.value(),
                mu0,
                kappa0,
                alpha0,
                beta0,
            )?;
            out.params = vec![
                ("mu_post".into(), mn),
                ("kappa_post".into(), kn),
                ("alpha_post".into(), an),
                ("beta_post".into(), bn),
            ];
            // μ is Student-t with 2αn degrees of freedom
            let scale = (bn / (an * kn)).sqrt();
            let t = specfun::student_t_quantile(1.0 - tail, 2.0 * an)?;
            out.summaries.push(ParamSummary {
                name: "mu".into(),
                mean: mn,
                lo: mn - t * scale,
                hi: mn + t * scale,
            });
            // σ² is inverse gamma(αn, βn); σ = sqrt(βn / G) with G ~ Gamma(αn, 1)
            let mean_sigma = if an > 0.5 {
                bn.sqrt() * (lgamma(an - 0.5) - lgamma(an)).exp()
            } else {
                f64::INFINITY
            };
            let g_hi = inv_reg_lower_inc_gamma_ln((1.0 - tail).ln(), an, f64::INFINITY)?;
            let g_lo = inv_reg_lower_inc_gamma_ln(tail.ln(), an, f64::INFINITY)?;
            out.summaries.push(ParamSummary {
                name: "sigma".into(),
                mean: mean_sigma,
                lo: (bn / g_hi).sqrt(),
                hi: (bn / g_lo).sqrt(),
            });
        }
        Family::DirMult { alpha } => {
            let m = alpha.len();
            let c = category_counts(st, m);
            let post: Vec<f64> = alpha.iter().zip(&c).map(|(a, &c)| a + c as f64).collect();
            let total: f64 = post.iter().sum();
            let names: &[&str] = match m {
                2 => &["0", "1"],
                3 => &["0", "+", "-"],
                _ => &["00", "10", "01", "11"],
            };
            for (k, &pk) in post.iter().enumerate() {
                out.params.push((format!("alpha_post_{}", names[k]), pk));
                out.summaries.push(beta_summary(
                    &format!("p_{}", names[k]),
                    pk,
                    total - pk,
                    tail,
                )?);
            }
        }
        &Family::Zip {
            a_p,
            b_p,
            a_lambda,
            b_lambda,
        } => {
            let m = st.edges as f64;
            let (pa, pb) = (a_p + m, b_p + n - m);
            let (la, lb) = (a_lambda + st.total as f64, b_lambda + m);
            out.params = vec![
                ("a_p_post".into(), pa),
                ("b_p_post".into(), pb),
                ("a_lambda_post".into(), la),
                ("b_lambda_post".into(), lb),
            ];
            let p = beta_summary("p", pa, pb, tail)?;
            let l = gamma_summary("lambda", la, lb, tail)?;
            out.mu = Some(p.mean * l.mean);
            out.q = Some(p.mean * (1.0 - (-l.mean).exp()));
            out.summaries.push(p);
            out.summaries.push(l);
        }
        Family::Mixture { weights, types } => {
            let mut lw = Vec::with_capacity(types.len());
            for (w, t) in weights.iter().zip(types) {
                lw.push(w.ln() + CompiledFamily::new(t, modality)?.log_marginal(st)?);
            }
            let z = specfun::log_sum_exp(&lw)?;
            let post: Vec<f64> = lw.iter().map(|v| (v - z).exp()).collect();
            let best = post
                .iter()
                .enumerate()
                .fold(0, |bi, (i, &p)| if p > post[bi] { i } else { bi });
            let inner = block_posterior(&types[best], st, modality, level)?;
            out.params = inner.params;
            out.summaries = inner.summaries;
            out.type_weights = Some(post);
        }
    }
    Ok(out)
}
