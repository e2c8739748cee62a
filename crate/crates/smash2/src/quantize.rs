//! Continuous-to-symbolic conversion and quantization-quality scoring.
//!
//! A scheme is written `D<d>N<0|1>[p1 p2 ...]`: difference the series `d`
//! times, optionally normalize it to mean 0 / variance 1, then map each value
//! to the index of its partition cell, where cell `i` is `[p_i, p_{i+1})`
//! with implicit end points at minus and plus infinity. `D1N1[3.]` means
//! detrend once, normalize, and split at 3.0.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::metric::{distance_matrix, BaseSet, CoordNorm, DistMatrix, MetricError};
use crate::pfsa::SymbolSeq;

#[derive(Debug, Error)]
pub enum QuantError {
    #[error("scheme parse error: {0}")]
    Parse(String),
    #[error("cut-offs must be strictly increasing and finite (offending value {0})")]
    BadCutoffs(f64),
    #[error("series of {len} points is too short for detrend depth {detrend}")]
    TooShort { len: usize, detrend: usize },
    #[error("degenerate signal: zero variance after transform")]
    ZeroVariance,
    #[error("degenerate partition: fewer than {k} distinct values in the pooled sample")]
    DegeneratePartition { k: usize },
    #[error("labels missing or not aligned with series")]
    BadLabels,
    #[error("need at least two classes and one same-class pair")]
    NotEnoughClasses,
    #[error("search grid is empty")]
    EmptyGrid,
    #[error("every scheme in the grid failed; first error: {0}")]
    AllSchemesFailed(String),
    #[error("alphabet size {k} exceeds the base set's alphabet {base}")]
    AlphabetTooLarge { k: usize, base: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// A quantization scheme: detrend depth, normalization flag, and the
/// strictly increasing partition cut-offs (alphabet size = cut-offs + 1).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantScheme {
    pub detrend: usize,
    pub normalize: bool,
    pub cutoffs: Vec<f64>,
}

impl QuantScheme {
    pub fn new(detrend: usize, normalize: bool, cutoffs: Vec<f64>) -> Result<Self, QuantError> {
        check_cutoffs(&cutoffs)?;
        Ok(QuantScheme {
            detrend,
            normalize,
            cutoffs,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.cutoffs.len() + 1
    }
}

fn check_cutoffs(cutoffs: &[f64]) -> Result<(), QuantError> {
    if cutoffs.is_empty() {
        return Err(QuantError::Parse(
            "a scheme needs at least one cut-off".into(),
        ));
    }
    for (i, &c) in cutoffs.iter().enumerate() {
        if !c.is_finite() {
            return Err(QuantError::BadCutoffs(c));
        }
        if i > 0 && c <= cutoffs[i - 1] {
            return Err(QuantError::BadCutoffs(c));
        }
    }
    Ok(())
}

pub fn parse_scheme(text: &str) -> Result<QuantScheme, QuantError> {
    text.parse()
}

pub fn format_scheme(scheme: &QuantScheme) -> String {
    scheme.to_string()
}

impl FromStr for QuantScheme {
    type Err = QuantError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let s = text.trim();
        let rest = s
            .strip_prefix('D')
            .ok_or_else(|| QuantError::Parse(format!("expected 'D', found {s:?}")))?;
        let digits = rest.chars().take_while(|c| c.is_ascii_digit()).count();
        if digits == 0 {
            return Err(QuantError::Parse(format!(
                "expected detrend count after 'D' in {s:?}"
            )));
        }
        let detrend: usize = rest[..digits]
            .parse()
            .map_err(|_| QuantError::Parse(format!("bad detrend count {:?}", &rest[..digits])))?;
        let rest = &rest[digits..];
        let rest = rest.strip_prefix('N').ok_or_else(|| {
            QuantError::Parse(format!("expected 'N' after detrend count in {s:?}"))
        })?;
        let (normalize, rest) = match rest.as_bytes().first() {
            Some(b'0') => (false, &rest[1..]),
            Some(b'1') => (true, &rest[1..]),
            other => {
                return Err(QuantError::Parse(format!(
                    "expected '0' or '1' after 'N', found {:?}",
                    other.map(|&b| b as char)
                )))
            }
        };
        let rest = rest
            .strip_prefix('[')
            .ok_or_else(|| QuantError::Parse(format!("expected '[' before cut-offs in {s:?}")))?;
        let inner = rest
            .strip_suffix(']')
            .ok_or_else(|| QuantError::Parse(format!("expected closing ']' in {s:?}")))?;
        let mut cutoffs = Vec::new();
        for tok in inner.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| QuantError::Parse(format!("bad cut-off value {tok:?}")))?;
            cutoffs.push(v);
        }
        QuantScheme::new(detrend, normalize, cutoffs)
    }
}

impl fmt::Display for QuantScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "D{}N{}[",
            self.detrend,
            if self.normalize { 1 } else { 0 }
        )?;
        for (i, c) in self.cutoffs.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// A set of real-valued series with optional class labels (one per series).
#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    pub series: Vec<Vec<f64>>,
    pub labels: Option<Vec<String>>,
}

impl LabeledDataset {
    pub fn unlabeled(series: Vec<Vec<f64>>) -> Self {
        LabeledDataset {
            series,
            labels: None,
        }
    }

    pub fn labeled(series: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self, QuantError> {
        if labels.len() != series.len() {
            return Err(QuantError::BadLabels);
        }
        Ok(LabeledDataset {
            series,
            labels: Some(labels),
        })
    }
}

fn detrend_once(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Applies the detrend / normalize stages of a scheme without partitioning.
fn transform(x: &[f64], detrend: usize, normalize: bool) -> Result<Vec<f64>, QuantError> {
    if x.len() <= detrend {
        return Err(QuantError::TooShort {
            len: x.len(),
            detrend,
        });
    }
    let mut v = x.to_vec();
    for _ in 0..detrend {
        v = detrend_once(&v);
    }
    if normalize {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        if var <= 0.0 {
            return Err(QuantError::ZeroVariance);
        }
        let sd = var.sqrt();
        for a in &mut v {
            *a = (*a - mean) / sd;
        }
    }
    Ok(v)
}

/// Quantizes one series: detrend, optional normalization, then partition
/// lookup. The output is `detrend` symbols shorter than the input.
pub fn apply_scheme(x: &[f64], scheme: &QuantScheme) -> Result<SymbolSeq, QuantError> {
    let v = transform(x, scheme.detrend, scheme.normalize)?;
    let symbols = v
        .iter()
        .map(|&p| scheme.cutoffs.partition_point(|&c| c <= p))
        .collect();
    Ok(SymbolSeq::new(symbols))
}

/// Cut-offs at the empirical `i/k` quantiles of the pooled transformed
/// values, making the symbol counts as even as the data allows.
pub fn maxent_partition(
    data: &LabeledDataset,
    detrend: usize,
    normalize: bool,
    k: usize,
) -> Result<Vec<f64>, QuantError> {
    if k < 2 {
        return Err(QuantError::DegeneratePartition { k });
    }
    let mut pooled = Vec::new();
    for series in &data.series {
        pooled.extend(transform(series, detrend, normalize)?);
    }
    if pooled.is_empty() {
        return Err(QuantError::TooShort { len: 0, detrend });
    }
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = 1;
    for w in pooled.windows(2) {
        if w[1] > w[0] {
            distinct += 1;
        }
    }
    if distinct < k {
        return Err(QuantError::DegeneratePartition { k });
    }
    let cutoffs = quantile_cutoffs(&pooled, k, 0.0)?;
    Ok(cutoffs)
}

/// Cut-offs at quantiles `(i + shift)/k` of an already-sorted pooled sample.
fn quantile_cutoffs(sorted: &[f64], k: usize, shift: f64) -> Result<Vec<f64>, QuantError> {
    let n = sorted.len();
    let mut cutoffs = Vec::with_capacity(k - 1);
    for i in 1..k {
        let q = (i as f64 + shift) / k as f64;
        let idx = ((q * n as f64) as usize).min(n - 1);
        cutoffs.push(sorted[idx]);
    }
    check_cutoffs(&cutoffs)?;
    Ok(cutoffs)
}

/// Average same-class distance `s`, average cross-class distance `d`, and
/// their ratio `r = s/d`; smaller `r` means better class separation. Sums run
/// over all ordered pairs including the diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSeparation {
    pub same_class_avg: f64,
    pub cross_class_avg: f64,
    pub ratio: f64,
}

pub fn class_separation<L: PartialEq>(
    d: &DistMatrix,
    labels: &[L],
) -> Result<ClassSeparation, QuantError> {
    let n = d.n();
    if labels.len() != n {
        return Err(QuantError::BadLabels);
    }
    let mut same_sum = 0.0;
    let mut same_count = 0usize;
    let mut cross_sum = 0.0;
    let mut cross_count = 0usize;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                same_sum += d.get(i, j);
                same_count += 1;
            } else {
                cross_sum += d.get(i, j);
                cross_count += 1;
            }
        }
    }
    if cross_count == 0 {
        return Err(QuantError::NotEnoughClasses);
    }
    let same_class_avg = same_sum / same_count as f64;
    let cross_class_avg = cross_sum / cross_count as f64;
    Ok(ClassSeparation {
        same_class_avg,
        cross_class_avg,
        ratio: same_class_avg / cross_class_avg,
    })
}

/// Grid of schemes for [`scheme_search`]: the cross product of detrend
/// depths, normalization flags, and alphabet sizes, with cut-offs from
/// [`maxent_partition`]; `perturb` adds two shifted-quantile variants per
/// combination.
#[derive(Debug, Clone)]
pub struct SearchGrid {
    pub detrend: Vec<usize>,
    pub normalize: Vec<bool>,
    pub alphabet_sizes: Vec<usize>,
    pub perturb: bool,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid {
            detrend: vec![0, 1],
            normalize: vec![false, true],
            alphabet_sizes: vec![2],
            perturb: false,
        }
    }
}

/// One scored scheme from a search.
#[derive(Debug, Clone)]
pub struct SchemeScore {
    pub scheme: QuantScheme,
    pub separation: ClassSeparation,
    /// Series that failed this scheme's transform (with their labels) and
    /// were left out of the distance matrix.
    pub skipped_series: usize,
}

/// A scheme combination that could not be scored at all.
#[derive(Debug, Clone)]
pub struct FailedScheme {
    pub detrend: usize,
    pub normalize: bool,
    pub alphabet_size: usize,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Scored schemes, best (smallest ratio) first.
    pub ranked: Vec<SchemeScore>,
    pub failed: Vec<FailedScheme>,
}

/// Scores every scheme in the grid on labeled data: quantize, build the
/// distance matrix over the base set, and compute the separation ratio.
/// Schemes failing outright are reported in `failed`; the call errors only
/// when nothing could be scored.
pub fn scheme_search(
    data: &LabeledDataset,
    grid: &SearchGrid,
    base: &BaseSet,
    norm: CoordNorm,
) -> Result<SearchOutcome, QuantError> {
    let labels = data.labels.as_ref().ok_or(QuantError::BadLabels)?;
    if labels.len() != data.series.len() {
        return Err(QuantError::BadLabels);
    }
    if grid.detrend.is_empty() || grid.normalize.is_empty() || grid.alphabet_sizes.is_empty() {
        return Err(QuantError::EmptyGrid);
    }
    let mut ranked = Vec::new();
    let mut failed = Vec::new();
    for &d in &grid.detrend {
        for &nz in &grid.normalize {
            for &k in &grid.alphabet_sizes {
                let record_fail = |err: String, failed: &mut Vec<FailedScheme>| {
                    failed.push(FailedScheme {
                        detrend: d,
                        normalize: nz,
                        alphabet_size: k,
                        error: err,
                    });
                };
                if k > base.alphabet_size() {
                    record_fail(
                        QuantError::AlphabetTooLarge {
                            k,
                            base: base.alphabet_size(),
                        }
                        .to_string(),
                        &mut failed,
                    );
                    continue;
                }
                let shifts: &[f64] = if grid.perturb {
                    &[0.0, -0.5, 0.5]
                } else {
                    &[0.0]
                };
                for &shift in shifts {
                    let cutoffs = match cutoffs_for(data, d, nz, k, shift) {
                        Ok(c) => c,
                        Err(e) => {
                            record_fail(e.to_string(), &mut failed);
                            continue;
                        }
                    };
                    let scheme = match QuantScheme::new(d, nz, cutoffs) {
                        Ok(s) => s,
                        Err(e) => {
                            record_fail(e.to_string(), &mut failed);
                            continue;
                        }
                    };
                    match score_scheme(data, labels, &scheme, base, norm) {
                        Ok(score) => ranked.push(score),
                        Err(e) => record_fail(e.to_string(), &mut failed),
                    }
                }
            }
        }
    }
    if ranked.is_empty() {
        let first = failed
            .first()
            .map(|f| f.error.clone())
            .unwrap_or_else(|| "empty grid".into());
        return Err(QuantError::AllSchemesFailed(first));
    }
    ranked.sort_by(|a, b| a.separation.ratio.partial_cmp(&b.separation.ratio).unwrap());
    Ok(SearchOutcome { ranked, failed })
}

fn cutoffs_for(
    data: &LabeledDataset,
    detrend: usize,
    normalize: bool,
    k: usize,
    shift: f64,
) -> Result<Vec<f64>, QuantError> {
    if shift == 0.0 {
        return maxent_partition(data, detrend, normalize, k);
    }
    let mut pooled = Vec::new();
    for series in &data.series {
        pooled.extend(transform(series, detrend, normalize)?);
    }
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_cutoffs(&pooled, k, shift)
}

fn score_scheme(
    data: &LabeledDataset,
    labels: &[String],
    scheme: &QuantScheme,
    base: &BaseSet,
    norm: CoordNorm,
) -> Result<SchemeScore, QuantError> {
    let mut seqs = Vec::new();
    let mut kept_labels = Vec::new();
    let mut skipped = 0usize;
    for (series, label) in data.series.iter().zip(labels) {
        match apply_scheme(series, scheme) {
            Ok(seq) if !seq.is_empty() => {
                seqs.push(seq);
                kept_labels.push(label.clone());
            }
            _ => skipped += 1,
        }
    }
    if seqs.is_empty() {
        return Err(QuantError::TooShort {
            len: 0,
            detrend: scheme.detrend,
        });
    }
    let dm = distance_matrix(&seqs, base, norm)?;
    let separation = class_separation(&dm, &kept_labels)?;
    Ok(SchemeScore {
        scheme: scheme.clone(),
        separation,
        skipped_series: skipped,
    })
}
