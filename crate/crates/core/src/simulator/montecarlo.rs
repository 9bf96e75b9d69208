use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{conditional_ser, Bits, FeedbackConfig, Modulation, ModulationFamily, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::quadrature::gauss_legendre_64;

use super::channel::{rvq_quantize, sample_channels, Codebook, ErrorParts, QuantMode, QuantizedCsi, RVQ_MAX_BITS};
use super::ia::{ia_solve, sinr_parts, IaOptions};
use super::{feasibility_check, MetricEstimate};

/// Trials per work unit. Fixed so the reduction order, and hence every
/// floating-point result, is independent of the thread count.
const CHUNK: u64 = 1024;
/// Codebooks up to this size are stored; larger ones are regenerated per use.
const STORED_CODEBOOK_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub trials: u64,
    pub seed: u64,
    pub mode: QuantMode,
    pub ia: IaOptions,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            trials: 100_000,
            seed: 1,
            mode: QuantMode::ErrorModel,
            ia: IaOptions::default(),
            threads: None,
        }
    }
}

/// Streaming mean and second central moment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    pub fn estimate(&self) -> MetricEstimate {
        let var = if self.n > 1 { self.m2.max(0.0) / (self.n - 1) as f64 } else { 0.0 };
        MetricEstimate {
            mean: self.mean,
            stderr: (var / self.n.max(1) as f64).sqrt(),
            trials: self.n,
        }
    }
}

/// One trial's view of the tagged stream under one feedback configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSample {
    /// `alpha_kk / d_k |v^H H_kk w|^2`.
    pub signal: f64,
    /// Residual interference per unit SNR.
    pub interference: f64,
    pub leakage: f64,
    pub converged: bool,
}

impl PairSample {
    pub fn sinr(&self, snr: f64) -> f64 {
        snr * self.signal / (1.0 + snr * self.interference)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRequest {
    /// Linear outage threshold.
    pub gamma_th: f64,
    pub modulations: Vec<Modulation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub config: usize,
    pub snr_db: f64,
    pub outage: MetricEstimate,
    pub rate: MetricEstimate,
    pub ser: Vec<MetricEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    /// Residual interference per unit SNR, one entry per feedback config.
    pub interference: Vec<MetricEstimate>,
    pub nonconverged: Vec<u64>,
    pub trials: u64,
}

impl SweepResult {
    pub fn cell(&self, config: usize, snr_index: usize) -> &SweepCell {
        let per = self.cells.len() / self.interference.len();
        &self.cells[config * per + snr_index]
    }

    pub fn nonconverged_fraction(&self) -> f64 {
        self.nonconverged.iter().copied().max().unwrap_or(0) as f64 / self.trials.max(1) as f64
    }
}

enum CodebookEntry {
    Stored(Codebook),
    Streamed(ChaCha8Rng),
}

/// Conditional SER as `sum_m c_m exp(-gamma e_m)`, tabulated once per
/// modulation (PSK) or via the Q function (PAM, QAM).
enum SerKernel {
    Table { coef: Vec<f64>, expo: Vec<f64> },
    Closed(Modulation),
}

impl SerKernel {
    fn new(m: &Modulation) -> Self {
        if m.family != ModulationFamily::Psk {
            return SerKernel::Closed(*m);
        }
        let rule = gauss_legendre_64();
        let g = m.g();
        let hi = (m.order as f64 - 1.0) * std::f64::consts::PI / m.order as f64;
        let (c, h) = (0.5 * hi, 0.5 * hi);
        let mut coef = Vec::new();
        let mut expo = Vec::new();
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let s = (c + h * x).sin();
            coef.push(w * h / std::f64::consts::PI);
            expo.push(g / (s * s));
        }
        SerKernel::Table { coef, expo }
    }

    fn eval(&self, gamma: f64) -> f64 {
        match self {
            SerKernel::Table { coef, expo } => coef.iter().zip(expo).map(|(c, e)| c * (-gamma * e).exp()).sum(),
            SerKernel::Closed(m) => conditional_ser(m, gamma),
        }
    }
}

/// A prepared Monte Carlo run: shares channel draws across several feedback
/// configurations of the same system.
pub struct Simulation {
    sys: SystemConfig,
    fbs: Vec<FeedbackConfig>,
    k: usize,
    j: usize,
    opts: SimOptions,
    base: ChaCha8Rng,
    codebooks: HashMap<(usize, usize, u32), CodebookEntry>,
}

impl Simulation {
    pub fn new(sys: &SystemConfig, fbs: &[FeedbackConfig], k: usize, j: usize, opts: SimOptions) -> Result<Self> {
        sys.validate()?;
        sys.check_pair(k)?;
        if j >= sys.d[k] as usize {
            return Err(Error::Index(format!("stream {j} of {}", sys.d[k])));
        }
        let feas = feasibility_check(sys);
        if !feas.feasible {
            return Err(Error::Infeasible(feas.message));
        }
        if fbs.is_empty() {
            return Err(Error::Config("no feedback configuration to simulate".into()));
        }
        for fb in fbs {
            fb.validate(sys)?;
        }
        let mut codebooks = HashMap::new();
        if opts.mode == QuantMode::Rvq {
            let n = sys.nt * sys.nr;
            for fb in fbs {
                for (rx, row) in fb.bits.iter().enumerate() {
                    for (tx, b) in row.iter().enumerate() {
                        let Bits::Finite(b) = *b else { continue };
                        if b > RVQ_MAX_BITS {
                            return Err(Error::BudgetExceeded { bits: b, cap: RVQ_MAX_BITS });
                        }
                        codebooks.entry((rx, tx, b)).or_insert_with(|| {
                            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
                            rng.set_stream(((rx * sys.k + tx) as u64) << 8 | b as u64);
                            if b <= STORED_CODEBOOK_BITS {
                                CodebookEntry::Stored(Codebook::generate(n, b, &mut rng))
                            } else {
                                CodebookEntry::Streamed(rng)
                            }
                        });
                    }
                }
            }
        }
        Ok(Simulation {
            sys: sys.clone(),
            fbs: fbs.to_vec(),
            k,
            j,
            opts,
            base: ChaCha8Rng::seed_from_u64(opts.seed),
            codebooks,
        })
    }

    fn needs_link(&self, rx: usize, tx: usize) -> bool {
        rx != tx || self.sys.d[rx] > 1
    }

    /// Draws trial `trial` and evaluates every feedback configuration on it.
    pub fn sample(&self, trial: u64) -> Result<Vec<PairSample>> {
        let sys = &self.sys;
        let mut rng = self.base.clone();
        rng.set_stream(trial);
        let ch = sample_channels(sys, &mut rng);
        let parts: Vec<Vec<Option<ErrorParts>>> = (0..sys.k)
            .map(|rx| {
                (0..sys.k)
                    .map(|tx| {
                        (self.opts.mode == QuantMode::ErrorModel && self.needs_link(rx, tx))
                            .then(|| ErrorParts::draw(ch.h[rx][tx].as_slice(), &mut rng))
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(self.fbs.len());
        for fb in &self.fbs {
            let mut hhat = Vec::with_capacity(sys.k);
            for rx in 0..sys.k {
                let mut row = Vec::with_capacity(sys.k);
                for tx in 0..sys.k {
                    let h = &ch.h[rx][tx];
                    let q = if !self.needs_link(rx, tx) {
                        None
                    } else if let Some(p) = &parts[rx][tx] {
                        Some(p.quantize(fb.bits[rx][tx]))
                    } else {
                        Some(self.rvq(h, rx, tx, fb.bits[rx][tx])?)
                    };
                    let data = match q {
                        Some(q) => q.hhat,
                        None => h.as_slice().to_vec(),
                    };
                    row.push(CMat::from_col_major(h.rows(), h.cols(), data));
                }
                hhat.push(row);
            }
            let sol = ia_solve(&hhat, &sys.d, self.opts.ia);
            let (signal, interference) = sinr_parts(&sol, &ch, sys, self.k, self.j);
            out.push(PairSample {
                signal,
                interference,
                leakage: sol.leakage,
                converged: sol.converged,
            });
        }
        Ok(out)
    }

    fn rvq(&self, h: &CMat, rx: usize, tx: usize, bits: Bits) -> Result<QuantizedCsi> {
        let Bits::Finite(b) = bits else {
            return rvq_quantize(h.as_slice(), bits, &mut ChaCha8Rng::seed_from_u64(0));
        };
        match &self.codebooks[&(rx, tx, b)] {
            CodebookEntry::Stored(book) => Ok(book.quantize(h.as_slice())),
            CodebookEntry::Streamed(rng) => rvq_quantize(h.as_slice(), bits, &mut rng.clone()),
        }
    }

    /// Estimates every metric at every SNR for every feedback configuration.
    pub fn run(&self, snr_db: &[f64], req: &SweepRequest) -> Result<SweepResult> {
        if self.opts.trials < 1000 {
            return Err(Error::Config(format!("need at least 1000 trials, got {}", self.opts.trials)));
        }
        if snr_db.is_empty() {
            return Err(Error::Config("SNR axis is empty".into()));
        }
        for m in &req.modulations {
            m.validate()?;
        }
        let kernels: Vec<SerKernel> = req.modulations.iter().map(SerKernel::new).collect();
        let snrs: Vec<f64> = snr_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let nm = 2 + kernels.len();
        let nf = self.fbs.len();
        let per_cfg = snrs.len() * nm;
        let chunks = self.opts.trials.div_ceil(CHUNK);

        let work = |c: u64| -> Result<(Vec<Moments>, Vec<Moments>, Vec<u64>)> {
            let mut acc = vec![Moments::default(); nf * per_cfg];
            let mut interf = vec![Moments::default(); nf];
            let mut bad = vec![0u64; nf];
            let end = ((c + 1) * CHUNK).min(self.opts.trials);
            for trial in c * CHUNK..end {
                for (f, s) in self.sample(trial)?.iter().enumerate() {
                    interf[f].push(s.interference);
                    bad[f] += u64::from(!s.converged);
                    for (si, &snr) in snrs.iter().enumerate() {
                        let g = s.sinr(snr);
                        let base = f * per_cfg + si * nm;
                        acc[base].push(if g <= req.gamma_th { 1.0 } else { 0.0 });
                        acc[base + 1].push(g.ln_1p() / std::f64::consts::LN_2);
                        for (mi, kern) in kernels.iter().enumerate() {
                            acc[base + 2 + mi].push(kern.eval(g));
                        }
                    }
                }
            }
            Ok((acc, interf, bad))
        };
        let parts: Vec<_> = match self.opts.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(|| (0..chunks).into_par_iter().map(work).collect::<Result<Vec<_>>>())?,
            None => (0..chunks).into_par_iter().map(work).collect::<Result<Vec<_>>>()?,
        };
        let mut acc = vec![Moments::default(); nf * per_cfg];
        let mut interf = vec![Moments::default(); nf];
        let mut bad = vec![0u64; nf];
        for (a, i, b) in &parts {
            acc.iter_mut().zip(a).for_each(|(x, y)| x.merge(y));
            interf.iter_mut().zip(i).for_each(|(x, y)| x.merge(y));
            bad.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        let mut cells = Vec::with_capacity(nf * snrs.len());
        for f in 0..nf {
            for (si, &db) in snr_db.iter().enumerate() {
                let base = f * per_cfg + si * nm;
                cells.push(SweepCell {
                    config: f,
                    snr_db: db,
                    outage: acc[base].estimate(),
                    rate: acc[base + 1].estimate(),
                    ser: (0..kernels.len()).map(|mi| acc[base + 2 + mi].estimate()).collect(),
                });
            }
        }
        Ok(SweepResult {
            cells,
            interference: interf.iter().map(Moments::estimate).collect(),
            nonconverged: bad,
            trials: self.opts.trials,
        })
    }
}

/// Trials for several feedback configs and SNRs sharing the same channels.
pub fn sweep(
    sys: &SystemConfig,
    fbs: &[FeedbackConfig],
    k: usize,
    j: usize,
    snr_db: &[f64],
    req: &SweepRequest,
    opts: SimOptions,
) -> Result<SweepResult> {
    Simulation::new(sys, fbs, k, j, opts)?.run(snr_db, req)
}

/// Single trial, for distribution-level checks.
pub fn sample_pair(sys: &SystemConfig, fb: &FeedbackConfig, k: usize, j: usize, opts: SimOptions, trial: u64) -> Result<PairSample> {
    Ok(Simulation::new(sys, std::slice::from_ref(fb), k, j, opts)?.sample(trial)?[0])
}

fn single(sys: &SystemConfig, fb: &FeedbackConfig, k: usize, j: usize, req: SweepRequest, opts: SimOptions) -> Result<SweepCell> {
    let r = sweep(sys, std::slice::from_ref(fb), k, j, &[sys.snr_db()], &req, opts)?;
    Ok(r.cells.into_iter().next().expect("one cell"))
}

/// Fraction of trials with SINR at or below `gamma_th`.
pub fn estimate_outage(
    sys: &SystemConfig,
    fb: &FeedbackConfig,
    k: usize,
    j: usize,
    gamma_th: f64,
    opts: SimOptions,
) -> Result<MetricEstimate> {
    let req = SweepRequest {
        gamma_th,
        modulations: vec![],
    };
    Ok(single(sys, fb, k, j, req, opts)?.outage)
}

/// Mean of `log2(1 + SINR)`.
pub fn estimate_rate(sys: &SystemConfig, fb: &FeedbackConfig, k: usize, j: usize, opts: SimOptions) -> Result<MetricEstimate> {
    let req = SweepRequest {
        gamma_th: 0.0,
        modulations: vec![],
    };
    Ok(single(sys, fb, k, j, req, opts)?.rate)
}

/// Mean of the conditional SER at each sampled SINR.
pub fn estimate_ser(
    sys: &SystemConfig,
    fb: &FeedbackConfig,
    k: usize,
    j: usize,
    modulation: &Modulation,
    opts: SimOptions,
) -> Result<MetricEstimate> {
    let req = SweepRequest {
        gamma_th: 0.0,
        modulations: vec![*modulation],
    };
    Ok(single(sys, fb, k, j, req, opts)?.ser[0])
}
