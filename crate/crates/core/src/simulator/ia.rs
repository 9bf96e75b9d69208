use crate::analysis::SystemConfig;
use crate::linalg::{dot, min_eigenvectors, svd_square, CMat};

use super::channel::ChannelRealization;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IaOptions {
    pub max_iter: usize,
    /// Target relative leakage.
    pub tol: f64,
}

impl Default for IaOptions {
    fn default() -> Self {
        IaOptions {
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

/// Precoders `w[i]` (`nt x d_i`) and combiners `v[k]` (`nr x d_k`), all with
/// orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct IaSolution {
    pub w: Vec<CMat>,
    pub v: Vec<CMat>,
    /// Leakage per constrained stream pair, in units of the mean gain of a
    /// unit-norm channel (so 1 means "not aligned at all").
    pub leakage: f64,
    /// Relative leakage after each half-step.
    pub history: Vec<f64>,
    pub converged: bool,
}

fn leakage(h: &[Vec<CMat>], v: &[CMat], w: &[CMat]) -> f64 {
    let k = v.len();
    let mut total = 0.0;
    for rx in 0..k {
        for tx in 0..k {
            if tx != rx {
                total += v[rx].adj_mul(&h[rx][tx].mul(&w[tx])).frobenius_sq();
            }
        }
    }
    total
}

/// Alternating leakage minimization on the quantized channels `hhat[k][i]`
/// (`nr x nt`, transmitter `i` to receiver `k`). Combiners start from the
/// quietest receive directions of an isotropic transmitter, which makes the
/// whole iteration equivariant under per-node unitary rotations.
///
/// When a pair carries several streams its own channel `hhat[k][k]` is used
/// to make the streams mutually orthogonal at the receiver.
pub fn ia_solve(hhat: &[Vec<CMat>], d: &[u32], opts: IaOptions) -> IaSolution {
    let k = d.len();
    let nr = hhat[0][0].rows();
    let nt = hhat[0][0].cols();
    let pairs: u32 = (0..k)
        .flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| d[a] * d[b]))
        .sum();
    let norm = (nr * nt) as f64 / pairs.max(1) as f64;

    let mut v: Vec<CMat> = (0..k)
        .map(|rx| {
            let mut cov = CMat::zeros(nr, nr);
            for tx in (0..k).filter(|&tx| tx != rx) {
                let g = hhat[rx][tx].mul(&hhat[rx][tx].adjoint());
                for j in 0..nr {
                    for i in 0..nr {
                        cov[(i, j)] += g[(i, j)];
                    }
                }
            }
            min_eigenvectors(&cov, d[rx] as usize)
        })
        .collect();
    let mut w: Vec<CMat> = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        w = (0..k)
            .map(|tx| {
                let mut cov = CMat::zeros(nt, nt);
                for rx in (0..k).filter(|&rx| rx != tx) {
                    let a = hhat[rx][tx].adj_mul(&v[rx]);
                    for c in 0..a.cols() {
                        cov.add_outer(a.col(c), 1.0);
                    }
                }
                min_eigenvectors(&cov, d[tx] as usize)
            })
            .collect();
        let leak = leakage(hhat, &v, &w) * norm;
        history.push(leak);
        if leak <= opts.tol {
            converged = true;
            break;
        }
        v = (0..k)
            .map(|rx| {
                let mut cov = CMat::zeros(nr, nr);
                for tx in (0..k).filter(|&tx| tx != rx) {
                    let a = hhat[rx][tx].mul(&w[tx]);
                    for c in 0..a.cols() {
                        cov.add_outer(a.col(c), 1.0);
                    }
                }
                min_eigenvectors(&cov, d[rx] as usize)
            })
            .collect();
        let leak = leakage(hhat, &v, &w) * norm;
        history.push(leak);
        if leak <= opts.tol {
            converged = true;
            break;
        }
    }
    for p in 0..k {
        if d[p] > 1 {
            let m = v[p].adj_mul(&hhat[p][p].mul(&w[p]));
            let (u, _, y) = svd_square(&m);
            v[p] = v[p].mul(&u);
            w[p] = w[p].mul(&y);
        }
    }
    let leakage = *history.last().unwrap_or(&f64::INFINITY);
    IaSolution {
        w,
        v,
        leakage,
        history,
        converged,
    }
}

/// Desired gain and total interference of stream `j` at receiver `k`, both
/// per unit transmit SNR: the SINR is `snr * s / (1 + snr * i)`.
pub fn sinr_parts(sol: &IaSolution, ch: &ChannelRealization, sys: &SystemConfig, k: usize, j: usize) -> (f64, f64) {
    let v = sol.v[k].col(j);
    let mut signal = 0.0;
    let mut interference = 0.0;
    for i in 0..sys.k {
        let hw = ch.h[k][i].mul(&sol.w[i]);
        let scale = sys.alpha[k][i] / sys.d[i] as f64;
        for l in 0..hw.cols() {
            let g = scale * dot(v, hw.col(l)).norm_sqr();
            if i == k && l == j {
                signal = g;
            } else {
                interference += g;
            }
        }
    }
    (signal, interference)
}

/// SINR of stream `j` at receiver `k` on the true channels.
pub fn sinr(sol: &IaSolution, ch: &ChannelRealization, sys: &SystemConfig, k: usize, j: usize) -> f64 {
    let (s, i) = sinr_parts(sol, ch, sys, k, j);
    let snr = sys.snr();
    snr * s / (1.0 + snr * i)
}
