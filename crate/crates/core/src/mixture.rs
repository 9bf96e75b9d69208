//! Erlang mixtures: the exact law of a sum of independent integer-shape gamma
//! variables with distinct scales.
//!
//! A [`SourceSpec`] lists the independent sources `Gamma(shape_q, scale_q)`.
//! [`build_mixture`] expands their sum into signed-weight gamma components
//! `sum_i sum_{t<=shape_i} Xi(i, t) Gamma(t, scale_i)`. The weights come from
//! a nested sum over a chain of indices `shape_i = l_0 >= l_1 >= ... >=
//! l_{K-1} = t`, one layer per "other" source.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::special_fn::{gamma_p_int, ln_factorial};

/// Scales closer than this (relative) are the same scale and get merged.
pub const MERGE_RTOL: f64 = 1e-9;
/// Two scales are put in one cluster when the partial-fraction weights
/// between them could grow beyond `10^CLUSTER_LOG10_GAIN`.
pub const CLUSTER_LOG10_GAIN: f64 = 4.0;
/// Mass left out when truncating a cluster's series expansion.
const SERIES_TAIL: f64 = 1e-17;
/// Weight normalization error that triggers the double-double recompute.
pub const RENORM_TRIGGER: f64 = 1e-10;

/// How a source's aggregate scale maps onto the gamma scale of its
/// `shape`-fold sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parametrization {
    /// Each of the `shape` unit terms is exponential with mean `scale`, so the
    /// source is `Gamma(shape, scale)` with mean `shape * scale`. This is what
    /// the error-model simulator reproduces.
    #[default]
    PerStream,
    /// The source is `Gamma(shape, scale / shape)`: total mean `scale`
    /// regardless of the number of streams.
    ShapeNormalized,
}

impl Parametrization {
    pub fn gamma_scale(self, shape: u32, scale: f64) -> f64 {
        match self {
            Parametrization::PerStream => scale,
            Parametrization::ShapeNormalized => scale / shape as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaComponent {
    pub shape: u32,
    pub scale: f64,
    pub weight: f64,
}

/// Independent gamma sources `Gamma(shapes[q], scales[q])`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceSpec {
    shapes: Vec<u32>,
    scales: Vec<f64>,
}

impl SourceSpec {
    /// Builds a spec, silently dropping zero-shape sources.
    pub fn new(shapes: &[u32], scales: &[f64]) -> Result<Self> {
        if shapes.len() != scales.len() {
            return Err(Error::Config(format!(
                "source spec has {} shapes but {} scales",
                shapes.len(),
                scales.len()
            )));
        }
        let mut spec = SourceSpec::default();
        for (&shape, &scale) in shapes.iter().zip(scales) {
            if shape == 0 {
                continue;
            }
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::Config(format!("source scale must be positive and finite, got {scale}")));
            }
            spec.shapes.push(shape);
            spec.scales.push(scale);
        }
        Ok(spec)
    }

    /// Applies a parametrization to aggregate source scales.
    pub fn with_parametrization(shapes: &[u32], source_scales: &[f64], param: Parametrization) -> Result<Self> {
        let scales: Vec<f64> = shapes
            .iter()
            .zip(source_scales)
            .map(|(&s, &r)| if s == 0 { r } else { param.gamma_scale(s, r) })
            .collect();
        Self::new(shapes, &scales)
    }

    pub fn shapes(&self) -> &[u32] {
        &self.shapes
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn count(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    /// Sum of shapes.
    pub fn total_shape(&self) -> u32 {
        self.shapes.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.shapes.iter().zip(&self.scales).map(|(&s, &c)| s as f64 * c).sum()
    }

    /// Merges equal scales (summing shapes); sources come back sorted by
    /// scale.
    pub fn normalized(&self) -> SourceSpec {
        let mut pairs: Vec<(u32, f64)> = self.shapes.iter().copied().zip(self.scales.iter().copied()).collect();
        pairs.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (shape, scale) in pairs {
            match merged.last_mut() {
                Some(last) if (scale - last.1).abs() <= MERGE_RTOL * scale.max(last.1) => {
                    last.0 += shape;
                }
                _ => merged.push((shape, scale)),
            }
        }
        SourceSpec {
            shapes: merged.iter().map(|p| p.0).collect(),
            scales: merged.iter().map(|p| p.1).collect(),
        }
    }

    fn check_distinct(&self) -> Result<()> {
        for a in 0..self.count() {
            for b in a + 1..self.count() {
                let (x, y) = (self.scales[a], self.scales[b]);
                if (x - y).abs() <= MERGE_RTOL * x.max(y) {
                    return Err(Error::DuplicateScales(a, b));
                }
            }
        }
        Ok(())
    }
}

/// Minimal real arithmetic used by the weight recursion, so the same code
/// runs in `f64` and in double-double.
trait Real: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self> {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn powu(self, n: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Double-double number `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self - o * DoubleDouble::from_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * DoubleDouble::from_f64(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo } + DoubleDouble::from_f64(q3)
    }
}

impl Real for DoubleDouble {
    fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    // C(n, k), exact for the small arguments that occur here
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp().round()
}

/// Per-layer data for the "other" source visited at that layer.
struct Layer<T> {
    shape: u32,
    /// `scale_i / (scale_i - scale_o)` raised to `shape_o`
    lead: T,
    /// `scale_o / (scale_o - scale_i)`
    ratio: T,
}

/// Sums the chain `l_{s-1} -> l_s` over layers `s..`, where the last layer is
/// pinned to `l = t`.
fn chain_sum<T: Real>(layers: &[Layer<T>], prev_l: u32, t: u32, acc_f64: &mut CompensatedSum, acc: &mut T, prefix: T) {
    let (layer, rest) = layers.split_first().expect("at least one layer");
    let step = |l: u32| {
        let m = prev_l - l;
        // Gamma(l_{s-1} + shape_o - l_s) / (Gamma(shape_o) Gamma(l_{s-1} - l_s + 1))
        let c = T::from_f64(binomial(m + layer.shape - 1, m));
        c * layer.lead * layer.ratio.powu(m)
    };
    if rest.is_empty() {
        let term = prefix * step(t);
        *acc = *acc + term;
        acc_f64.add(term.to_f64());
        return;
    }
    for l in t..=prev_l {
        chain_sum(rest, l, t, acc_f64, acc, prefix * step(l));
    }
}

fn xi_weight_generic<T: Real>(spec: &SourceSpec, i: usize, t: u32, compensated: bool) -> f64 {
    let k = spec.count();
    let theta_i = spec.scales[i];
    let eta_i = spec.shapes[i];
    // other sources in order: index m maps to m + U(m - i), i.e. skip i
    let layers: Vec<Layer<T>> = (0..k - 1)
        .map(|m| if m >= i { m + 1 } else { m })
        .map(|o| {
            let theta_o = spec.scales[o];
            let ti = T::from_f64(theta_i);
            let to = T::from_f64(theta_o);
            Layer {
                shape: spec.shapes[o],
                lead: (ti / (ti - to)).powu(spec.shapes[o]),
                ratio: to / (to - ti),
            }
        })
        .collect();
    let mut acc = T::zero();
    let mut acc_f64 = CompensatedSum::default();
    chain_sum(&layers, eta_i, t, &mut acc_f64, &mut acc, T::one());
    if compensated {
        acc_f64.value()
    } else {
        acc.to_f64()
    }
}

/// Mixture weight `Xi(i, t)` for source `i` and shape index `t`.
///
/// The spec must hold at least two sources with pairwise-distinct scales.
pub fn xi_weight(spec: &SourceSpec, i: usize, t: u32) -> Result<f64> {
    if spec.count() < 2 {
        return Err(Error::TooFewSources(spec.count()));
    }
    if i >= spec.count() {
        return Err(Error::Index(format!("source {i} of {}", spec.count())));
    }
    if t < 1 || t > spec.shapes[i] {
        return Err(Error::Index(format!("shape index {t} outside 1..={}", spec.shapes[i])));
    }
    spec.check_distinct()?;
    Ok(xi_weight_generic::<f64>(spec, i, t, true))
}

fn all_weights(spec: &SourceSpec, extended: bool) -> Vec<GammaComponent> {
    let mut out = Vec::with_capacity(spec.total_shape() as usize);
    for i in 0..spec.count() {
        for t in 1..=spec.shapes[i] {
            let weight = if extended {
                xi_weight_generic::<DoubleDouble>(spec, i, t, false)
            } else {
                xi_weight_generic::<f64>(spec, i, t, true)
            };
            out.push(GammaComponent {
                shape: t,
                scale: spec.scales[i],
                weight,
            });
        }
    }
    out
}

/// Sources whose scales are too close for stable partial fractions, written
/// exactly as `sum_m series[m] Gamma(shape + m, base)` with nonnegative
/// coefficients (expansion of every member around the smallest scale).
#[derive(Debug, Clone)]
struct Cluster {
    base: f64,
    shape: u32,
    series: Vec<f64>,
}

/// Coefficients of `Gamma(shape, scale)` as a negative-binomial mixture of
/// `Gamma(shape + m, base)`, `base <= scale`.
fn rescale_series(shape: u32, scale: f64, base: f64) -> Vec<f64> {
    let p = base / scale;
    let q = 1.0 - p;
    let mut a = p.powi(shape as i32);
    let mut out = vec![a];
    let mode = (shape as f64 - 1.0) * q / p;
    // past the mode the terms fall geometrically, so a / p bounds the tail
    let mut m = 0u32;
    while ((m as f64) < mode || a / p > SERIES_TAIL) && m < 20_000 {
        m += 1;
        a *= (shape + m - 1) as f64 / m as f64 * q;
        out.push(a);
    }
    out
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    // drop the negligible tail
    let mut tail = 0.0;
    while out.len() > 1 && tail + out[out.len() - 1] < SERIES_TAIL {
        tail += out.pop().expect("nonempty");
    }
    out
}

fn clusters(spec: &SourceSpec) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    for (&shape, &scale) in spec.shapes.iter().zip(&spec.scales) {
        if let Some(c) = out.last_mut() {
            let gain = (c.shape + shape) as f64 * (scale / (scale - c.base)).log10();
            if gain > CLUSTER_LOG10_GAIN {
                c.series = convolve(&c.series, &rescale_series(shape, scale, c.base));
                c.shape += shape;
                continue;
            }
        }
        out.push(Cluster {
            base: scale,
            shape,
            series: vec![1.0],
        });
    }
    out
}

/// Partial-fraction weights for distinct, well-separated scales, redone in
/// double-double if the `f64` pass misses normalization.
fn separated_weights(spec: &SourceSpec) -> Vec<GammaComponent> {
    if spec.count() == 1 {
        return vec![GammaComponent {
            shape: spec.shapes[0],
            scale: spec.scales[0],
            weight: 1.0,
        }];
    }
    let components = all_weights(spec, false);
    let total: CompensatedSum = components.iter().map(|c| c.weight).collect();
    if (total.value() - 1.0).abs() > RENORM_TRIGGER {
        return all_weights(spec, true);
    }
    components
}

/// Expands a source spec into its Erlang mixture.
///
/// Equal scales are merged first. Scales close enough to make the
/// partial-fraction weights explode are grouped, and each group is expanded
/// around its smallest scale with nonnegative weights; partial fractions are
/// used only between groups. If the `f64` weights miss `sum = 1` by more than
/// [`RENORM_TRIGGER`], they are recomputed in double-double.
pub fn build_mixture(spec: &SourceSpec) -> Result<ErlangMixture> {
    let spec = spec.normalized();
    if spec.is_empty() {
        return Ok(ErlangMixture::default());
    }
    let groups = clusters(&spec);
    let mut acc: Vec<Vec<CompensatedSum>> = groups
        .iter()
        .map(|g| vec![CompensatedSum::default(); (g.shape as usize) + g.series.len()])
        .collect();
    let mut index = vec![0usize; groups.len()];
    loop {
        let coef: f64 = groups.iter().zip(&index).map(|(g, &m)| g.series[m]).product();
        if coef > 0.0 {
            let shapes: Vec<u32> = groups.iter().zip(&index).map(|(g, &m)| g.shape + m as u32).collect();
            let scales: Vec<f64> = groups.iter().map(|g| g.base).collect();
            for c in separated_weights(&SourceSpec { shapes, scales }) {
                let g = groups.iter().position(|g| g.base == c.scale).expect("known scale");
                acc[g][c.shape as usize - 1].add(coef * c.weight);
            }
        }
        // odometer over the series indices
        let mut pos = 0;
        loop {
            if pos == groups.len() {
                let components = groups
                    .iter()
                    .zip(&acc)
                    .flat_map(|(g, row)| {
                        row.iter().enumerate().filter(|(_, w)| w.value() != 0.0).map(|(t, w)| GammaComponent {
                            shape: t as u32 + 1,
                            scale: g.base,
                            weight: w.value(),
                        })
                    })
                    .collect();
                return Ok(ErlangMixture { components });
            }
            index[pos] += 1;
            if index[pos] < groups[pos].series.len() {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}

/// Signed-weight sum of gamma densities. Empty means a point mass at zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErlangMixture {
    components: Vec<GammaComponent>,
}

impl ErlangMixture {
    pub fn from_components(components: Vec<GammaComponent>) -> Self {
        Self { components }
    }

    pub fn components(&self) -> &[GammaComponent] {
        &self.components
    }

    pub fn is_point_mass(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.components.iter().map(|c| c.weight).collect::<CompensatedSum>().value()
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|shape, scale| shape as f64 * scale)
    }

    /// `sum_c weight_c * f(shape_c, scale_c)` with compensated accumulation.
    /// `f` should return the expectation of the quantity under one component.
    pub fn expectation<F: FnMut(u32, f64) -> f64>(&self, mut f: F) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * f(c.shape, c.scale))
            .collect::<CompensatedSum>()
            .value()
    }

    /// Fallible version of [`ErlangMixture::expectation`].
    pub fn try_expectation<F: FnMut(u32, f64) -> Result<f64>>(&self, mut f: F) -> Result<f64> {
        let mut acc = CompensatedSum::default();
        for c in &self.components {
            acc.add(c.weight * f(c.shape, c.scale)?);
        }
        Ok(acc.value())
    }
}

/// Gamma density `x^{t-1} e^{-x/z} / (z^t Gamma(t))`.
pub fn gamma_density(x: f64, shape: u32, scale: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if shape == 1 { 1.0 / scale } else { 0.0 };
    }
    let y = x / scale;
    let log_v = (shape as f64 - 1.0) * y.ln() - y - ln_factorial(shape - 1);
    log_v.exp() / scale
}

pub fn mixture_pdf(m: &ErlangMixture, x: f64) -> f64 {
    m.expectation(|shape, scale| gamma_density(x, shape, scale))
}

pub fn mixture_cdf(m: &ErlangMixture, x: f64) -> f64 {
    if m.is_point_mass() {
        return if x >= 0.0 { 1.0 } else { 0.0 };
    }
    if x <= 0.0 {
        return 0.0;
    }
    m.expectation(|shape, scale| gamma_p_int(shape, x / scale))
}

/// Hypoexponential density: the sum of independent exponentials with
/// pairwise-distinct `rates`.
///
/// `prod_t rates_t * sum_i e^{-rates_i x} / prod_{l != i} (rates_l - rates_i)`
pub fn hypoexp_pdf(rates: &[f64], x: f64) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::TooFewSources(0));
    }
    for (a, &ra) in rates.iter().enumerate() {
        if !(ra > 0.0 && ra.is_finite()) {
            return Err(Error::Config(format!("rate must be positive and finite, got {ra}")));
        }
        for (b, &rb) in rates.iter().enumerate().skip(a + 1) {
            if (ra - rb).abs() <= MERGE_RTOL * ra.max(rb) {
                return Err(Error::DuplicateScales(a, b));
            }
        }
    }
    if x < 0.0 {
        return Ok(0.0);
    }
    Ok(hypoexp_weights(rates)
        .iter()
        .zip(rates)
        .map(|(w, &r)| w * r * (-r * x).exp())
        .collect::<CompensatedSum>()
        .value())
}

/// Partial-fraction weights `prod_{l != i} rates_l / (rates_l - rates_i)`
/// of a hypoexponential law, one per rate. Rates must be distinct.
pub fn hypoexp_weights(rates: &[f64]) -> Vec<f64> {
    (0..rates.len())
        .map(|i| {
            rates
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != i)
                .map(|(_, &rl)| rl / (rl - rates[i]))
                .product()
        })
        .collect()
}
