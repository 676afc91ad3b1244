#![allow(dead_code)]

use std::collections::{BTreeMap, BinaryHeap};

use csbm::families::{
    bb_log_marginal, dirmult_log_marginal, gp_log_marginal, nig_log_marginal, tbb_log_marginal,
    tgp_log_marginal, zip_log_block_marginal,
};
use csbm::netdata::flip_state;
use csbm::specfun::{log_gamma, log_sum_exp};
use csbm::stats::BlockStats;
use csbm::{DyadData, Family, FamilySpec, Kind, Modality};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod (7/15) quadrature

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive integration of a nonnegative integrand over the given
/// breakpoints: the piece with the largest error estimate is bisected until
/// the total estimate is below `rel` of the value.
pub fn integrate(f: &dyn Fn(f64) -> f64, breaks: &[f64], rel: f64) -> f64 {
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (val, err) = gk15(f, w[0], w[1]);
            heap.push(Piece {
                a: w[0],
                b: w[1],
                val,
                err,
            });
        }
    }
    for _ in 0..200_000 {
        let total: f64 = heap.iter().map(|p| p.val).sum();
        let err: f64 = heap.iter().map(|p| p.err).sum();
        if err <= rel * total.abs() {
            return total;
        }
        let p = heap.pop().unwrap();
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(Piece { err: 0.0, ..p });
            continue;
        }
        for (a, b) in [(p.a, m), (m, p.b)] {
            let (val, err) = gk15(f, a, b);
            heap.push(Piece { a, b, val, err });
        }
    }
    panic!("quadrature did not converge");
}

/// Breakpoints on [0, x] at the mode and mode ± 2^j σ.
fn breaks(x: f64, mode: f64, sigma: f64) -> Vec<f64> {
    let mut v = vec![0.0, x];
    let m = mode.clamp(0.0, x);
    v.push(m);
    for j in 0..8 {
        let d = sigma * f64::from(1 << j);
        for p in [m - d, m + d] {
            if p > 0.0 && p < x {
                v.push(p);
            }
        }
    }
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// ln ∫₀ˣ t^(α−1) (1−t)^(β−1) dt.
pub fn ln_beta_integral(alpha: f64, beta: f64, x: f64) -> f64 {
    let g = |t: f64| (alpha - 1.0) * t.ln() + (beta - 1.0) * (-t).ln_1p();
    let mode = if alpha > 1.0 && beta > 1.0 {
        (alpha - 1.0) / (alpha + beta - 2.0)
    } else if alpha <= 1.0 {
        0.0
    } else {
        1.0
    };
    let sd = (alpha * beta / ((alpha + beta).powi(2) * (alpha + beta + 1.0))).sqrt();
    let reference = g(mode.clamp(x * 1e-9, x * (1.0 - 1e-12)));
    let f = |t: f64| (g(t) - reference).exp();
    integrate(&f, &breaks(x, mode, sd), 1e-12).ln() + reference
}

/// ln ∫₀ˣ λ^(α−1) e^(−βλ) dλ.
pub fn ln_gamma_integral(alpha: f64, beta: f64, x: f64) -> f64 {
    let g = |t: f64| (alpha - 1.0) * t.ln() - beta * t;
    let mode = if alpha > 1.0 {
        (alpha - 1.0) / beta
    } else {
        0.0
    };
    let sd = alpha.sqrt() / beta;
    let reference = g(mode.clamp(x * 1e-9, x));
    let f = |t: f64| (g(t) - reference).exp();
    integrate(&f, &breaks(x, mode, sd), 1e-12).ln() + reference
}

pub fn tbb_oracle(s: u64, n: u64, a: f64, b: f64, x: f64) -> f64 {
    let (s, n) = (s as f64, n as f64);
    ln_beta_integral(a + s, b + n - s, x) - ln_beta_integral(a, b, x)
}

pub fn tgp_oracle(sum: u64, n: u64, a: f64, b: f64, x: f64) -> f64 {
    let (s, n) = (sum as f64, n as f64);
    ln_gamma_integral(a + s, b + n, x) - ln_gamma_integral(a, b, x)
}

// ---------------------------------------------------------------------------
// Brute-force block statistics

/// Block statistics by scanning every dyad. Keys are (r, s) with r ≤ s for
/// undirected and dyad-state data.
pub fn brute_stats(
    data: &DyadData,
    z: &[usize],
    zip_active: Option<&[Vec<bool>]>,
) -> Vec<BTreeMap<(usize, usize), BlockStats>> {
    let n = data.n();
    let directed = data.kind() == Kind::Directed && data.modality() != Modality::Dyad4;
    let mut out = Vec::new();
    for l in 0..data.n_layers() {
        let lay = data.layer(l);
        let mut m: BTreeMap<(usize, usize), BlockStats> = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || (!directed && j < i) {
                    continue;
                }
                let (r, s) = (z[i], z[j]);
                let mut v = lay.get(i, j);
                let key = if directed || r <= s {
                    (r, s)
                } else {
                    if data.modality() == Modality::Dyad4 {
                        v = flip_state(v);
                    }
                    (s, r)
                };
                let st = m.entry(key).or_default();
                st.dyads += 1;
                match data.modality() {
                    Modality::Binary => st.edges += (v != 0.0) as u64,
                    Modality::Count => {
                        let active = v != 0.0 || zip_active.is_some_and(|za| za[i][j]);
                        st.edges += active as u64;
                        st.total += v as u64;
                    }
                    Modality::Real => {
                        st.sum.add(v);
                        st.sum_sq.add(v * v);
                    }
                    Modality::Signed => {
                        if v > 0.0 {
                            st.cats[1] += 1;
                        } else if v < 0.0 {
                            st.cats[2] += 1;
                        }
                    }
                    Modality::Dyad4 => {
                        if v != 0.0 {
                            st.cats[v as usize] += 1;
                        }
                    }
                }
            }
        }
        out.push(m);
    }
    out
}

fn categories(st: &BlockStats, m: usize) -> Vec<u64> {
    if m == 2 {
        return vec![st.dyads - st.edges, st.edges];
    }
    let nz: u64 = st.cats[1..m].iter().sum();
    let mut c = vec![st.dyads - nz];
    c.extend_from_slice(&st.cats[1..m]);
    c
}

/// One block's log marginal from the public closed forms.
pub fn block_lm(fam: &Family, st: &BlockStats) -> f64 {
    if st.dyads == 0 {
        return 0.0;
    }
    match fam {
        &Family::BetaBernoulli { a, b } => bb_log_marginal(st.edges, st.dyads, a, b).unwrap(),
        &Family::GammaPoisson { a, b } => gp_log_marginal(st.total, st.dyads, a, b, None).unwrap(),
        &Family::Nig {
            mu0,
            kappa0,
            alpha0,
            beta0,
        } => nig_log_marginal(
            st.dyads,
            st.sum.value(),
            st.sum_sq.value(),
            mu0,
            kappa0,
            alpha0,
            beta0,
        )
        .unwrap(),
        &Family::TruncBeta { a, b, x_max } => {
            tbb_log_marginal(st.edges, st.dyads, a, b, x_max).unwrap()
        }
        &Family::TruncGamma { a, b, x_max } => {
            tgp_log_marginal(st.total, st.dyads, a, b, x_max).unwrap()
        }
        Family::DirMult { alpha } => {
            dirmult_log_marginal(&categories(st, alpha.len()), alpha).unwrap()
        }
        &Family::Zip {
            a_p,
            b_p,
            a_lambda,
            b_lambda,
        } => zip_log_block_marginal(st.edges, st.dyads, st.total, a_p, b_p, a_lambda, b_lambda)
            .unwrap(),
        Family::Mixture { weights, types } => {
            let v: Vec<f64> = weights
                .iter()
                .zip(types)
                .map(|(w, t)| w.ln() + block_lm(t, st))
                .collect();
            log_sum_exp(&v).unwrap()
        }
    }
}

/// ln p(Y | z) by brute force, including −Σ ln y! unless dropped.
pub fn brute_loglik(
    data: &DyadData,
    z: &[usize],
    spec: &FamilySpec,
    zip_active: Option<&[Vec<bool>]>,
) -> f64 {
    let mut v = 0.0;
    if !spec.drop_constants && data.modality() == Modality::Count {
        for l in 0..data.n_layers() {
            for &y in data.layer(l).entries().values() {
                v -= log_gamma(y + 1.0).unwrap();
            }
        }
    }
    for m in brute_stats(data, z, zip_active) {
        for (&(r, s), st) in &m {
            let fam = if r == s { &spec.diag } else { &spec.offdiag };
            v += block_lm(fam, st);
        }
    }
    v
}

// ---------------------------------------------------------------------------
// Random instances

pub fn random_data(
    rng: &mut ChaCha8Rng,
    n: usize,
    kind: Kind,
    modality: Modality,
    layers: usize,
    density: f64,
) -> DyadData {
    let canonical = kind == Kind::Undirected || modality == Modality::Dyad4;
    let mut maps = Vec::new();
    for _ in 0..layers {
        let mut m = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || (canonical && j < i) {
                    continue;
                }
                if modality != Modality::Real && rng.random::<f64>() >= density {
                    continue;
                }
                let v = match modality {
                    Modality::Binary => 1.0,
                    Modality::Count => rng.random_range(1..6) as f64,
                    Modality::Real => {
                        if rng.random::<f64>() < 0.2 {
                            0.0
                        } else {
                            rng.random_range(-2.0..3.0)
                        }
                    }
                    Modality::Signed => {
                        if rng.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    Modality::Dyad4 => rng.random_range(1..4) as f64,
                };
                m.insert((i, j), v);
            }
        }
        maps.push(m);
    }
    DyadData::new(n, kind, modality, maps).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A family for the modality, chosen by `pick`, with varied hyperparameters.
pub fn family_for(modality: Modality, pick: usize) -> Family {
    match modality {
        Modality::Binary => match pick % 4 {
            0 => Family::BetaBernoulli { a: 1.0, b: 1.0 },
            1 => Family::BetaBernoulli { a: 0.7, b: 2.5 },
            2 => Family::TruncBeta {
                a: 1.2,
                b: 1.0,
                x_max: 0.4,
            },
            _ => Family::DirMult {
                alpha: vec![1.5, 0.5],
            },
        },
        Modality::Count => match pick % 3 {
            0 => Family::GammaPoisson { a: 1.0, b: 1.0 },
            1 => Family::TruncGamma {
                a: 1.5,
                b: 0.8,
                x_max: 2.0,
            },
            _ => Family::Mixture {
                weights: vec![0.3, 0.7],
                types: vec![
                    Family::GammaPoisson { a: 2.0, b: 1.0 },
                    Family::GammaPoisson { a: 0.5, b: 3.0 },
                ],
            },
        },
        Modality::Real => Family::Nig {
            mu0: 0.3,
            kappa0: 0.5 + pick as f64,
            alpha0: 2.0,
            beta0: 1.5,
        },
        Modality::Signed => Family::DirMult {
            alpha: vec![1.0, 0.5 + pick as f64 * 0.25, 0.8],
        },
        Modality::Dyad4 => Family::DirMult {
            alpha: vec![2.0, 0.6, 0.6, 1.0 + pick as f64 * 0.5],
        },
    }
}

/// Every (kind, modality) pair the ledger supports.
pub fn shapes() -> Vec<(Kind, Modality)> {
    vec![
        (Kind::Undirected, Modality::Binary),
        (Kind::Undirected, Modality::Count),
        (Kind::Undirected, Modality::Real),
        (Kind::Undirected, Modality::Signed),
        (Kind::Directed, Modality::Binary),
        (Kind::Directed, Modality::Count),
        (Kind::Directed, Modality::Real),
        (Kind::Directed, Modality::Signed),
        (Kind::Directed, Modality::Dyad4),
    ]
}
