//! Planted-partition generators.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netdata::{DyadData, Kind, Modality};

/// Edge-generating mechanism given the planted labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mechanism {
    Bernoulli {
        p_in: f64,
        p_out: f64,
    },
    Poisson {
        lambda_in: f64,
        lambda_out: f64,
    },
    /// Real weights; `sigma_out` defaults to `sigma`.
    Gaussian {
        mu_in: f64,
        mu_out: f64,
        sigma: f64,
        #[serde(default)]
        sigma_out: Option<f64>,
    },
    /// Active with probability p, then Poisson(λ).
    Zip {
        p_in: f64,
        p_out: f64,
        lambda_in: f64,
        lambda_out: f64,
    },
    /// One Bernoulli layer per entry.
    Multiplex {
        layers: Vec<LayerSpec>,
    },
    /// Dyad-state probabilities over (00, 10, 01, 11).
    Dyad4 {
        pi_in: [f64; 4],
        pi_out: [f64; 4],
    },
    /// Sign probabilities over (0, +, −).
    Signed {
        theta_in: [f64; 3],
        theta_out: [f64; 3],
    },
}

/// Within-community probability for each community, plus a shared between
/// probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub p_in: Vec<f64>,
    pub p_out: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub n: usize,
    pub k: usize,
    /// Community sizes; equal split (remainder to the first) when omitted.
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
    pub mechanism: Mechanism,
    pub seed: u64,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::config(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn check_simplex(name: &str, p: &[f64]) -> Result<()> {
    for &v in p {
        check_prob(name, v)?;
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("{name} must sum to 1, got {s}")));
    }
    Ok(())
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n < self.k {
            return Err(Error::config(format!(
                "need 1 <= k <= n, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if let Some(sz) = &self.sizes {
            if sz.len() != self.k || sz.iter().sum::<usize>() != self.n || sz.contains(&0) {
                return Err(Error::config(
                    "sizes must list k positive counts summing to n",
                ));
            }
        }
        match &self.mechanism {
            Mechanism::Bernoulli { p_in, p_out } => {
                check_prob("p_in", *p_in)?;
                check_prob("p_out", *p_out)?;
            }
            Mechanism::Poisson {
                lambda_in,
                lambda_out,
            } => {
                check_positive("lambda_in", *lambda_in)?;
                check_positive("lambda_out", *lambda_out)?;
            }
            Mechanism::Gaussian {
                mu_in,
                mu_out,
                sigma,
                sigma_out,
            } => {
                if !(mu_in.is_finite() && mu_out.is_finite()) {
                    return Err(Error::config("gaussian means must be finite"));
                }
                check_positive("sigma", *sigma)?;
                if let Some(s) = sigma_out {
                    check_positive("sigma_out", *s)?;
                }
            }
            Mechanism::Zip {
                p_in,
                p_out,
                lambda_in,
                lambda_out,
            } => {
                check_prob("p_in", *p_in)?;
                check_prob("p_out", *p_out)?;
                check_positive("lambda_in", *lambda_in)?;
                check_positive("lambda_out", *lambda_out)?;
            }
            Mechanism::Multiplex { layers } => {
                if layers.is_empty() {
                    return Err(Error::config("multiplex needs at least one layer"));
                }
                for l in layers {
                    if l.p_in.len() != self.k {
                        return Err(Error::config(format!(
                            "each layer needs {} within probabilities, got {}",
                            self.k,
                            l.p_in.len()
                        )));
                    }
                    for &p in &l.p_in {
                        check_prob("p_in", p)?;
                    }
                    check_prob("p_out", l.p_out)?;
                }
            }
            Mechanism::Dyad4 { pi_in, pi_out } => {
                check_simplex("pi_in", pi_in)?;
                check_simplex("pi_out", pi_out)?;
            }
            Mechanism::Signed {
                theta_in,
                theta_out,
            } => {
                check_simplex("theta_in", theta_in)?;
                check_simplex("theta_out", theta_out)?;
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> Kind {
        match self.mechanism {
            Mechanism::Dyad4 { .. } => Kind::Directed,
            _ => Kind::Undirected,
        }
    }

    pub fn modality(&self) -> Modality {
        match self.mechanism {
            Mechanism::Bernoulli { .. } | Mechanism::Multiplex { .. } => Modality::Binary,
            Mechanism::Poisson { .. } | Mechanism::Zip { .. } => Modality::Count,
            Mechanism::Gaussian { .. } => Modality::Real,
            Mechanism::Dyad4 { .. } => Modality::Dyad4,
            Mechanism::Signed { .. } => Modality::Signed,
        }
    }

    /// Contiguous planted labels.
    pub fn truth(&self) -> Vec<usize> {
        let sizes = self.sizes.clone().unwrap_or_else(|| {
            let (q, r) = (self.n / self.k, self.n % self.k);
            (0..self.k).map(|c| q + usize::from(c < r)).collect()
        });
        sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &m)| std::iter::repeat_n(c, m))
            .collect()
    }
}

fn categorical<R: Rng>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k;
        }
    }
    p.len() - 1
}

/// Draws data given the planted labels. Every dyad is independent given the
/// labels; pairs are visited in (i, j), i < j order so output is a pure
/// function of the spec.
pub fn generate(spec: &GenSpec) -> Result<(DyadData, Vec<usize>)> {
    spec.validate()?;
    let z = spec.truth();
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_layers = match &spec.mechanism {
        Mechanism::Multiplex { layers } => layers.len(),
        _ => 1,
    };
    let mut maps: Vec<BTreeMap<(usize, usize), f64>> = vec![BTreeMap::new(); n_layers];
    let distr_err = |e: String| Error::config(e);
    for i in 0..n {
        for j in i + 1..n {
            let within = z[i] == z[j];
            let v = match &spec.mechanism {
                Mechanism::Bernoulli { p_in, p_out } => {
                    let p = if within { *p_in } else { *p_out };
                    f64::from(u8::from(rng.random::<f64>() < p))
                }
                Mechanism::Poisson {
                    lambda_in,
                    lambda_out,
                } => {
                    let l = if within { *lambda_in } else { *lambda_out };
                    Poisson::new(l)
                        .map_err(|e| distr_err(e.to_string()))?
                        .sample(&mut rng)
                }
                Mechanism::Gaussian {
                    mu_in,
                    mu_out,
                    sigma,
                    sigma_out,
                } => {
                    let (m, s) = if within {
                        (*mu_in, *sigma)
                    } else {
                        (*mu_out, sigma_out.unwrap_or(*sigma))
                    };
                    Normal::new(m, s)
                        .map_err(|e| distr_err(e.to_string()))?
                        .sample(&mut rng)
                }
                Mechanism::Zip {
                    p_in,
                    p_out,
                    lambda_in,
                    lambda_out,
                } => {
                    let (p, l) = if within {
                        (*p_in, *lambda_in)
                    } else {
                        (*p_out, *lambda_out)
                    };
                    let active = rng.random::<f64>() < p;
                    let draw = Poisson::new(l)
                        .map_err(|e| distr_err(e.to_string()))?
                        .sample(&mut rng);
                    if active {
                        draw
                    } else {
                        0.0
                    }
                }
                Mechanism::Multiplex { layers } => {
                    for (l, ls) in layers.iter().enumerate() {
                        let p = if within { ls.p_in[z[i]] } else { ls.p_out };
                        if rng.random::<f64>() < p {
                            maps[l].insert((i, j), 1.0);
                        }
                    }
                    continue;
                }
                Mechanism::Dyad4 { pi_in, pi_out } => {
                    categorical(&mut rng, if within { pi_in } else { pi_out }) as f64
                }
                Mechanism::Signed {
                    theta_in,
                    theta_out,
                } => match categorical(&mut rng, if within { theta_in } else { theta_out }) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => -1.0,
                },
            };
            if v != 0.0 || spec.modality() == Modality::Real {
                maps[0].insert((i, j), v);
            }
        }
    }
    let data = DyadData::new(n, spec.kind(), spec.modality(), maps)?;
    Ok((data, z))
}

/// Writes `index<TAB>label` with 1-based labels.
pub fn write_truth(path: impl AsRef<Path>, z: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let res: std::io::Result<()> = (|| {
        for (i, &k) in z.iter().enumerate() {
            writeln!(w, "{i}\t{}", k + 1)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Reads an `index<TAB>label` file (1-based labels) into 0-based labels.
pub fn read_truth(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let perr = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let mut it = body.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(perr("expected `index<TAB>label`".into()));
        };
        let i: usize = a.parse().map_err(|_| perr(format!("bad index `{a}`")))?;
        let k: usize = b.parse().map_err(|_| perr(format!("bad label `{b}`")))?;
        if k == 0 {
            return Err(perr("labels are 1-based".into()));
        }
        pairs.push((i, k - 1));
    }
    let n = pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0);
    let mut z = vec![usize::MAX; n];
    for (i, k) in pairs {
        z[i] = k;
    }
    if let Some(i) = z.iter().position(|&k| k == usize::MAX) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("node {i} has no label"),
        });
    }
    Ok(z)
}
