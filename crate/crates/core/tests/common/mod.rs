//! Reference implementations used only by the tests. None of these share
//! code paths with the library beyond the `Matrix` container.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal, Poisson, StandardNormal};
use resi::{Dataset, Matrix};
use statrs::function::gamma::{gamma_lr, ln_gamma};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Poisson mixture summed from `k = 0` far past the mode, using statrs'
/// regularized incomplete gamma for the central terms.
pub fn ncx2_cdf_naive(x: f64, df: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return gamma_lr(df / 2.0, x / 2.0);
    }
    let h = lambda / 2.0;
    let kmax = (h + 40.0 * h.sqrt() + 60.0).ceil() as usize;
    (0..=kmax)
        .map(|k| {
            let kf = k as f64;
            let w = (kf * h.ln() - h - ln_gamma(kf + 1.0)).exp();
            w * gamma_lr(df / 2.0 + kf, x / 2.0)
        })
        .sum()
}

/// One noncentral chi-squared draw as a Poisson mixture of central ones.
pub fn ncx2_draw<R: Rng>(rng: &mut R, df: f64, lambda: f64) -> f64 {
    let k = if lambda > 0.0 {
        Poisson::new(lambda / 2.0).unwrap().sample(rng) as f64
    } else {
        0.0
    };
    ChiSquared::new(df + 2.0 * k).unwrap().sample(rng)
}

/// Monte Carlo estimate of `P(X ≤ x)` with its standard error.
pub fn ncx2_cdf_mc(x: f64, df: f64, lambda: f64, draws: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let hits = (0..draws).filter(|_| ncx2_draw(&mut r, df, lambda) <= x).count();
    let p = hits as f64 / draws as f64;
    (p, (p * (1.0 - p) / draws as f64).sqrt())
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
            .unwrap();
        m.swap(c, p);
        let d = m[c][c];
        assert!(d != 0.0, "singular matrix");
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for i in 0..n {
            if i != c {
                let f = m[i][c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[i][j] -= f * m[c][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for l in 0..k {
            for j in 0..p {
                out[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    out
}

pub fn mat_sub(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect())
        .collect()
}

pub fn mat_add(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// `n⁻¹ X_kᵀ diag(w) X_l`.
fn a_kl(xk: &[Vec<f64>], xl: &[Vec<f64>], w: &[f64]) -> Vec<Vec<f64>> {
    let n = w.len() as f64;
    let (pk, pl) = (xk[0].len(), xl[0].len());
    let mut out = vec![vec![0.0; pl]; pk];
    for ((rk, rl), &wi) in xk.iter().zip(xl).zip(w) {
        for a in 0..pk {
            for b in 0..pl {
                out[a][b] += wi * rk[a] * rl[b] / n;
            }
        }
    }
    out
}

fn expit(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Rows of `[1 | nuisance]` and of the target block.
pub fn logistic_blocks(data: &Dataset<f64>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = data.n();
    let x0 = (0..n)
        .map(|i| {
            let mut r = vec![1.0];
            r.extend_from_slice(data.x_nuisance().row(i));
            r
        })
        .collect();
    let x1 = (0..n).map(|i| data.x_target().row(i).to_vec()).collect();
    (x0, x1)
}

/// `I_β` from the nuisance-adjusted `P`-weighted blocks.
pub fn logistic_info_beta(data: &Dataset<f64>, theta: &[f64]) -> Vec<Vec<f64>> {
    let (x0, x1) = logistic_blocks(data);
    let p: Vec<f64> = probs(&x0, &x1, theta).iter().map(|&q| q * (1.0 - q)).collect();
    let a00 = invert(&a_kl(&x0, &x0, &p));
    let a10 = a_kl(&x1, &x0, &p);
    let a01 = a_kl(&x0, &x1, &p);
    mat_sub(&a_kl(&x1, &x1, &p), &mat_mul(&mat_mul(&a10, &a00), &a01))
}

fn probs(x0: &[Vec<f64>], x1: &[Vec<f64>], theta: &[f64]) -> Vec<f64> {
    let m0 = x0[0].len();
    x0.iter()
        .zip(x1)
        .map(|(r0, r1)| {
            let eta: f64 = r0.iter().zip(&theta[..m0]).map(|(a, b)| a * b).sum::<f64>()
                + r1.iter().zip(&theta[m0..]).map(|(a, b)| a * b).sum::<f64>();
            expit(eta)
        })
        .collect()
}

/// The explicit `A_kl(P)`, `A_kl(Q)` expression for the robust covariance
/// of `β̂` in logistic regression.
pub fn logistic_sigma_beta_explicit(data: &Dataset<f64>, theta: &[f64]) -> Vec<Vec<f64>> {
    let (x0, x1) = logistic_blocks(data);
    let pr = probs(&x0, &x1, theta);
    let p: Vec<f64> = pr.iter().map(|&q| q * (1.0 - q)).collect();
    let q: Vec<f64> = pr.iter().zip(data.y()).map(|(&q, &y)| (y - q) * (y - q)).collect();
    let a00p_inv = invert(&a_kl(&x0, &x0, &p));
    let a10p = a_kl(&x1, &x0, &p);
    let a01p = a_kl(&x0, &x1, &p);
    let a11p = a_kl(&x1, &x1, &p);
    let i_inv = invert(&mat_sub(&a11p, &mat_mul(&mat_mul(&a10p, &a00p_inv), &a01p)));
    let b = mat_mul(&a10p, &a00p_inv);
    let first = mat_sub(
        &mat_mul(&mat_mul(&b, &a_kl(&x0, &x0, &q)), &mat_mul(&a00p_inv, &a01p)),
        &mat_mul(&b, &a_kl(&x0, &x1, &q)),
    );
    let second = mat_sub(
        &a_kl(&x1, &x1, &q),
        &mat_mul(&mat_mul(&a_kl(&x1, &x0, &q), &a00p_inv), &a01p),
    );
    let mid = mat_add(&first, &second);
    mat_mul(&mat_mul(&i_inv, &mid), &i_inv)
}

/// Rows of correlated standard normals: every pair has correlation `rho`.
pub fn equicorrelated(n: usize, p: usize, rho: f64, r: &mut ChaCha8Rng) -> Matrix<f64> {
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        let common: f64 = r.sample(StandardNormal);
        for v in x.row_mut(i) {
            *v = a * common + b * r.sample::<f64, _>(StandardNormal);
        }
    }
    x
}

/// `y = 1 + Z·γ + X·β + σ ε` with equicorrelated covariates.
pub fn linear_data(
    n: usize,
    gamma: &[f64],
    beta: &[f64],
    sigma: f64,
    rho: f64,
    seed: u64,
) -> Dataset<f64> {
    let mut r = rng(seed);
    let (m0, m1) = (gamma.len(), beta.len());
    let all = equicorrelated(n, m0 + m1, rho, &mut r);
    let noise = Normal::new(0.0, sigma).unwrap();
    let y = (0..n)
        .map(|i| {
            let row = all.row(i);
            1.0 + row[..m0].iter().zip(gamma).map(|(a, b)| a * b).sum::<f64>()
                + row[m0..].iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
                + noise.sample(&mut r)
        })
        .collect();
    Dataset::new(y, all.columns(0, m0), all.columns(m0, m1), vec![], vec![]).unwrap()
}

/// Bernoulli outcomes from `expit(α₀ + Zα + Xβ)`; `alpha[0]` is the intercept.
pub fn logistic_data(n: usize, alpha: &[f64], beta: &[f64], rho: f64, seed: u64) -> Dataset<f64> {
    let mut r = rng(seed);
    let (m0, m1) = (alpha.len() - 1, beta.len());
    let all = equicorrelated(n, m0 + m1, rho, &mut r);
    let y = (0..n)
        .map(|i| {
            let row = all.row(i);
            let eta = alpha[0]
                + row[..m0].iter().zip(&alpha[1..]).map(|(a, b)| a * b).sum::<f64>()
                + row[m0..].iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            if r.random::<f64>() < expit(eta) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Dataset::new(y, all.columns(0, m0), all.columns(m0, m1), vec![], vec![]).unwrap()
}

/// Two normal groups with independent group membership `~ Bernoulli(pi1)`.
pub fn two_means_data(n: usize, pi1: f64, mu: (f64, f64), sd: (f64, f64), seed: u64) -> Dataset<f64> {
    let mut r = rng(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let g = r.random::<f64>() < pi1;
        let z: f64 = r.sample(StandardNormal);
        x.push(if g { 1.0 } else { 0.0 });
        y.push(if g { mu.0 + sd.0 * z } else { mu.1 + sd.1 * z });
    }
    Dataset::simple(y, x).unwrap()
}

/// Maximum relative entrywise difference, scaled by the larger magnitude.
pub fn max_rel_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let scale = a
        .iter()
        .flatten()
        .chain(b.iter().flatten())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs() / scale))
}

pub fn read_ncx2_grid() -> Vec<(f64, f64, f64, f64)> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/ncx2_grid.csv");
    let text = std::fs::read_to_string(path).expect("grid file");
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|c| c.trim().parse().unwrap()).collect();
            (v[0], v[1], v[2], v[3])
        })
        .collect()
}
