#![allow(dead_code)]

use adaswitch::harness::{parse_config, ScenarioConfig};
use rand::Rng;
use serde_json::{json, Value};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending. Written against plain arrays so it shares nothing with the
/// library's eigen path.
pub fn jacobi_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

/// Rank with eigenvalues above `tol · λ_max`.
pub fn oracle_rank(m: &[Vec<f64>], tol: f64) -> usize {
    let ev = jacobi_eigenvalues(m);
    let top = ev.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    ev.iter().filter(|&&x| x > tol * top).count()
}

pub fn outer_sum(samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = samples.first().map_or(0, |s| s.len());
    let mut g = vec![vec![0.0; n]; n];
    for s in samples {
        for i in 0..n {
            for j in 0..n {
                g[i][j] += s[i] * s[j];
            }
        }
    }
    g
}

/// Coefficients of `∏ (1 − r q⁻¹)` for real roots and conjugate pairs.
pub fn poly_from_roots(real: &[f64], pairs: &[(f64, f64)]) -> Vec<f64> {
    let mut p = vec![1.0];
    let mul = |p: &Vec<f64>, f: &[f64]| {
        let mut out = vec![0.0; p.len() + f.len() - 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in f.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    };
    for &r in real {
        p = mul(&p, &[1.0, -r]);
    }
    for &(re, im) in pairs {
        p = mul(&p, &[1.0, -2.0 * re, re * re + im * im]);
    }
    p
}

/// Random monic polynomial of degree `deg` with roots of modulus below
/// `rmax`.
pub fn random_poly<R: Rng>(rng: &mut R, deg: usize, rmax: f64) -> Vec<f64> {
    let mut real = Vec::new();
    let mut pairs = Vec::new();
    let mut left = deg;
    while left > 0 {
        if left >= 2 && rng.gen_bool(0.5) {
            let r = rng.gen_range(0.0..rmax);
            let ang = rng.gen_range(0.1..3.0);
            pairs.push((r * f64::cos(ang), r * f64::sin(ang)));
            left -= 2;
        } else {
            real.push(rng.gen_range(-rmax..rmax));
            left -= 1;
        }
    }
    poly_from_roots(&real, &pairs)
}

/// The plant used by the closed-loop scenarios: m₁ = 2, m₂ = 1, zero of
/// B at −1/3.
pub const PLANT_A: [f64; 2] = [-1.2, 0.5];
pub const PLANT_B: [f64; 2] = [0.3, 0.1];

pub fn scenario(policy: &str, n_apps: usize, disturbance: Value) -> ScenarioConfig {
    let plant = json!({ "a": PLANT_A, "b": PLANT_B });
    let cfg = json!({
        "name": format!("{policy}-{n_apps}"),
        "horizon": 5000,
        "seed": 11,
        "plants": vec![plant; n_apps],
        "reference": {
            "kind": "sinusoid_sum",
            "components": [{ "amplitude": 1.0, "frequency": 0.05 }],
            "nominal_sr_order": 2
        },
        "bus": { "d2": 2, "eth": 0.05, "minislots_per_cycle": 3 },
        "disturbance": disturbance,
        "policy": policy,
        "gammas": [0.5, 0.5]
    });
    parse_config(&cfg.to_string()).expect("scenario config")
}

pub fn impulses() -> Value {
    json!({ "kind": "random", "amplitudes": 1.0, "min_gap": 500 })
}

pub fn quiet() -> Value {
    json!({ "kind": "none" })
}
