use csbm::synthgen::{generate, GenSpec, LayerSpec, Mechanism};
use csbm::DyadData;

fn spec(n: usize, k: usize, mechanism: Mechanism, seed: u64) -> GenSpec {
    GenSpec {
        n,
        k,
        sizes: None,
        mechanism,
        seed,
    }
}

/// Per-dyad values split into within and between pairs.
fn split(data: &DyadData, z: &[usize], layer: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut w, mut b) = (Vec::new(), Vec::new());
    for i in 0..data.n() {
        for j in i + 1..data.n() {
            let v = data.layer(layer).get(i, j);
            if z[i] == z[j] {
                w.push(v);
            } else {
                b.push(v);
            }
        }
    }
    (w, b)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Asserts that the sample mean of `f(v)` is within four standard errors of
/// `mu` given the per-draw variance `var`.
fn within_4se(v: &[f64], f: impl Fn(f64) -> f64, mu: f64, var: f64, what: &str) {
    let xs: Vec<f64> = v.iter().map(|&x| f(x)).collect();
    let se = (var / xs.len() as f64).sqrt();
    let m = mean(&xs);
    assert!(
        (m - mu).abs() <= 4.0 * se,
        "{what}: mean {m} vs {mu} (se {se})"
    );
}

fn indicator(target: f64) -> impl Fn(f64) -> f64 {
    move |x| f64::from(u8::from(x == target))
}

#[test]
fn s1_reference_density_inside_envelope() {
    let mut dens = Vec::new();
    let mut degs = Vec::new();
    for s in 0..400 {
        let (d, _) = generate(&spec(
            150,
            3,
            Mechanism::Bernoulli {
                p_in: 0.15,
                p_out: 0.02,
            },
            s,
        ))
        .unwrap();
        let e = d.layer(0).entries().len() as f64;
        dens.push(e / d.dyad_count() as f64);
        degs.push(2.0 * e / 150.0);
    }
    let q = |v: &mut Vec<f64>, p: f64| {
        v.sort_by(f64::total_cmp);
        v[((v.len() - 1) as f64 * p).round() as usize]
    };
    let (dlo, dhi) = (q(&mut dens, 0.005), q(&mut dens, 0.995));
    let (glo, ghi) = (q(&mut degs, 0.005), q(&mut degs, 0.995));
    assert!(
        (dlo..=dhi).contains(&0.0659),
        "density envelope [{dlo}, {dhi}]"
    );
    assert!(
        (glo..=ghi).contains(&9.81),
        "degree envelope [{glo}, {ghi}]"
    );
}

#[test]
fn equal_rates_give_er_null() {
    for s in 0..5 {
        let (d, z) = generate(&spec(
            120,
            3,
            Mechanism::Bernoulli {
                p_in: 0.1,
                p_out: 0.1,
            },
            40 + s,
        ))
        .unwrap();
        let (w, b) = split(&d, &z, 0);
        let (mw, mb) = (mean(&w), mean(&b));
        let se = (0.09 / w.len() as f64 + 0.09 / b.len() as f64).sqrt();
        assert!((mw - mb).abs() < 3.0 * se, "seed {s}: {mw} vs {mb}");
    }
}

#[test]
fn block_moments_match_parameters() {
    for s in 0..4 {
        let seed = 1000 + s;
        let (d, z) = generate(&spec(
            90,
            3,
            Mechanism::Bernoulli {
                p_in: 0.3,
                p_out: 0.05,
            },
            seed,
        ))
        .unwrap();
        let (w, b) = split(&d, &z, 0);
        within_4se(&w, |x| x, 0.3, 0.3 * 0.7, "bernoulli within");
        within_4se(&b, |x| x, 0.05, 0.05 * 0.95, "bernoulli between");

        let (d, z) = generate(&spec(
            90,
            3,
            Mechanism::Poisson {
                lambda_in: 1.5,
                lambda_out: 0.15,
            },
            seed,
        ))
        .unwrap();
        let (w, b) = split(&d, &z, 0);
        within_4se(&w, |x| x, 1.5, 1.5, "poisson within");
        within_4se(&b, |x| x, 0.15, 0.15, "poisson between");

        let g = Mechanism::Gaussian {
            mu_in: 1.0,
            mu_out: -0.5,
            sigma: 0.8,
            sigma_out: Some(1.2),
        };
        let (d, z) = generate(&spec(90, 3, g, seed)).unwrap();
        let (w, b) = split(&d, &z, 0);
        within_4se(&w, |x| x, 1.0, 0.64, "gaussian within");
        within_4se(&b, |x| x, -0.5, 1.44, "gaussian between");
        // E[(x − μ)²] = σ², Var = 2σ⁴
        within_4se(
            &w,
            |x| (x - 1.0).powi(2),
            0.64,
            2.0 * 0.64f64.powi(2),
            "gaussian within variance",
        );

        let zip = Mechanism::Zip {
            p_in: 0.5,
            p_out: 0.05,
            lambda_in: 2.0,
            lambda_out: 0.5,
        };
        let (d, z) = generate(&spec(120, 3, zip, seed)).unwrap();
        let (w, b) = split(&d, &z, 0);
        // mean pλ, variance pλ(1 + λ − pλ)
        within_4se(&w, |x| x, 1.0, 1.0 * (1.0 + 2.0 - 1.0), "zip within");
        within_4se(&b, |x| x, 0.025, 0.025 * (1.0 + 0.5 - 0.025), "zip between");
        let p0 = 0.5 + 0.5 * (-2.0f64).exp();
        within_4se(&w, indicator(0.0), p0, p0 * (1.0 - p0), "zip within zeros");

        let pi_in = [0.6, 0.15, 0.15, 0.1];
        let pi_out = [0.9, 0.05, 0.03, 0.02];
        let (d, z) = generate(&spec(100, 2, Mechanism::Dyad4 { pi_in, pi_out }, seed)).unwrap();
        let (w, b) = split(&d, &z, 0);
        for c in 0..4 {
            let (pw, pb) = (pi_in[c], pi_out[c]);
            within_4se(&w, indicator(c as f64), pw, pw * (1.0 - pw), "dyad4 within");
            within_4se(
                &b,
                indicator(c as f64),
                pb,
                pb * (1.0 - pb),
                "dyad4 between",
            );
        }

        let theta_in = [0.8, 0.15, 0.05];
        let theta_out = [0.85, 0.03, 0.12];
        let (d, z) = generate(&spec(
            100,
            3,
            Mechanism::Signed {
                theta_in,
                theta_out,
            },
            seed,
        ))
        .unwrap();
        let (w, b) = split(&d, &z, 0);
        for (c, v) in [0.0, 1.0, -1.0].into_iter().enumerate() {
            within_4se(
                &w,
                indicator(v),
                theta_in[c],
                theta_in[c] * (1.0 - theta_in[c]),
                "signed within",
            );
            within_4se(
                &b,
                indicator(v),
                theta_out[c],
                theta_out[c] * (1.0 - theta_out[c]),
                "signed between",
            );
        }

        let layers = vec![
            LayerSpec {
                p_in: vec![0.3, 0.1, 0.1],
                p_out: 0.02,
            },
            LayerSpec {
                p_in: vec![0.1, 0.3, 0.1],
                p_out: 0.04,
            },
        ];
        let (d, z) = generate(&spec(
            90,
            3,
            Mechanism::Multiplex {
                layers: layers.clone(),
            },
            seed,
        ))
        .unwrap();
        assert_eq!(d.n_layers(), 2);
        for (l, ls) in layers.iter().enumerate() {
            let (_, b) = split(&d, &z, l);
            within_4se(
                &b,
                |x| x,
                ls.p_out,
                ls.p_out * (1.0 - ls.p_out),
                "multiplex between",
            );
            for c in 0..3 {
                let mut vals = Vec::new();
                for i in 0..90 {
                    for j in i + 1..90 {
                        if z[i] == c && z[j] == c {
                            vals.push(d.layer(l).get(i, j));
                        }
                    }
                }
                let p = ls.p_in[c];
                within_4se(&vals, |x| x, p, p * (1.0 - p), "multiplex within");
            }
        }
    }
}

#[test]
fn symmetric_dyad_states_balance() {
    let pi = [0.5, 0.2, 0.2, 0.1];
    for s in 0..5 {
        let (d, _) = generate(&spec(
            150,
            2,
            Mechanism::Dyad4 {
                pi_in: pi,
                pi_out: pi,
            },
            70 + s,
        ))
        .unwrap();
        let vals: Vec<f64> = d.layer(0).entries().values().copied().collect();
        let n10 = vals.iter().filter(|&&v| v == 1.0).count() as f64;
        let n01 = vals.iter().filter(|&&v| v == 2.0).count() as f64;
        // given n10 + n01 the split is Binomial(m, 1/2)
        let m = n10 + n01;
        assert!(
            (n10 - n01).abs() <= 4.0 * m.sqrt(),
            "seed {s}: {n10} vs {n01}"
        );
    }
}

#[test]
fn sizes_follow_request() {
    let g = GenSpec {
        n: 10,
        k: 3,
        sizes: Some(vec![2, 3, 5]),
        mechanism: Mechanism::Bernoulli {
            p_in: 0.5,
            p_out: 0.1,
        },
        seed: 1,
    };
    let (_, z) = generate(&g).unwrap();
    let mut counts = [0; 3];
    for k in z {
        counts[k] += 1;
    }
    assert_eq!(counts, [2, 3, 5]);
}
