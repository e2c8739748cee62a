//! Sequence distance from likelihood coordinates.
//!
//! Each sequence is mapped to the vector of its per-symbol log-likelihoods
//! under a fixed base set of machines; the distance between two sequences is
//! a norm of the difference of their coordinate vectors. Two sequences from
//! the same generator land near the same point regardless of how their
//! realizations look pointwise, which is the whole trick.

use thiserror::Error;

use crate::measures::{log_likelihood, MeasureError};
use crate::pfsa::{Pfsa, PfsaError, StateRecord, SymbolSeq};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("base set must contain at least one machine")]
    EmptyBaseSet,
    #[error("base machines disagree on alphabet size ({0} vs {1})")]
    MixedAlphabets(usize, usize),
    #[error(
        "base machine {index} has a zero observation probability (state {state}, symbol {symbol})"
    )]
    ZeroSupport {
        index: usize,
        state: usize,
        symbol: usize,
    },
    #[error("sequence uses symbol {symbol} but the base alphabet size is {alphabet_size}")]
    AlphabetMismatch { symbol: usize, alphabet_size: usize },
    #[error("sequences must be nonempty")]
    EmptySequence,
    #[error(transparent)]
    Pfsa(#[from] PfsaError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// A nonempty set of valid machines over one alphabet. Every observation
/// probability must be positive so the likelihood filter never clamps and
/// coordinates are always finite.
#[derive(Debug, Clone)]
pub struct BaseSet {
    machines: Vec<Pfsa>,
}

impl BaseSet {
    pub fn new(machines: Vec<Pfsa>) -> Result<Self, MetricError> {
        let first = machines.first().ok_or(MetricError::EmptyBaseSet)?;
        let k = first.alphabet_size();
        for (index, m) in machines.iter().enumerate() {
            if m.alphabet_size() != k {
                return Err(MetricError::MixedAlphabets(k, m.alphabet_size()));
            }
            let violations = m.validate();
            if !violations.is_empty() {
                return Err(PfsaError::Invalid(violations).into());
            }
            for (state, st) in m.states().iter().enumerate() {
                for (symbol, &p) in st.obs_probs.iter().enumerate() {
                    if p <= 0.0 {
                        return Err(MetricError::ZeroSupport {
                            index,
                            state,
                            symbol,
                        });
                    }
                }
            }
        }
        Ok(BaseSet { machines })
    }

    pub fn machines(&self) -> &[Pfsa] {
        &self.machines
    }

    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.machines[0].alphabet_size()
    }
}

/// The built-in base: four small binary machines with distinct transition
/// structures (two 2-state variants, a 3-state cycle, and a 4-state machine).
pub fn default_base_set() -> BaseSet {
    let machines = vec![
        Pfsa::checked(
            2,
            vec![
                StateRecord::full(vec![0.3, 0.7], vec![0, 1]),
                StateRecord::full(vec![0.7, 0.3], vec![0, 1]),
            ],
        )
        .unwrap(),
        Pfsa::checked(
            2,
            vec![
                StateRecord::full(vec![0.3, 0.7], vec![0, 1]),
                StateRecord::full(vec![0.7, 0.3], vec![1, 0]),
            ],
        )
        .unwrap(),
        Pfsa::checked(
            2,
            vec![
                StateRecord::full(vec![0.3, 0.7], vec![1, 2]),
                StateRecord::full(vec![0.7, 0.3], vec![2, 0]),
                StateRecord::full(vec![0.6, 0.4], vec![0, 1]),
            ],
        )
        .unwrap(),
        Pfsa::checked(
            2,
            vec![
                StateRecord::full(vec![0.3, 0.7], vec![0, 1]),
                StateRecord::full(vec![0.7, 0.3], vec![2, 3]),
                StateRecord::full(vec![0.8, 0.2], vec![0, 1]),
                StateRecord::full(vec![0.2, 0.8], vec![2, 3]),
            ],
        )
        .unwrap(),
    ];
    BaseSet::new(machines).expect("built-in base set is valid")
}

/// Likelihood coordinates of one sequence: one bits-per-symbol value per base
/// machine.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVec {
    pub coords: Vec<f64>,
}

/// Norm applied to coordinate differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordNorm {
    /// Sum of absolute differences.
    #[default]
    L1,
    L2,
    Linf,
}

impl CoordNorm {
    fn apply(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            CoordNorm::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            CoordNorm::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            CoordNorm::Linf => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
        }
    }
}

pub fn featurize(x: &SymbolSeq, base: &BaseSet) -> Result<FeatureVec, MetricError> {
    if x.is_empty() {
        return Err(MetricError::EmptySequence);
    }
    if let Some(max) = x.max_symbol() {
        if max >= base.alphabet_size() {
            return Err(MetricError::AlphabetMismatch {
                symbol: max,
                alphabet_size: base.alphabet_size(),
            });
        }
    }
    let coords = base
        .machines()
        .iter()
        .map(|m| log_likelihood(x, m).map(|l| l.bits))
        .collect::<Result<Vec<f64>, MeasureError>>()?;
    Ok(FeatureVec { coords })
}

pub fn distance(
    x: &SymbolSeq,
    y: &SymbolSeq,
    base: &BaseSet,
    norm: CoordNorm,
) -> Result<f64, MetricError> {
    let fx = featurize(x, base)?;
    let fy = featurize(y, base)?;
    Ok(norm.apply(&fx.coords, &fy.coords))
}

/// Symmetric nonnegative matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for row in &rows {
            assert_eq!(row.len(), n, "distance matrix must be square");
            values.extend_from_slice(row);
        }
        DistMatrix { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Pairwise distances over a dataset. Coordinates are computed once per
/// sequence (n featurize calls), then combined pairwise; the result is
/// identical to calling [`distance`] on every pair.
pub fn distance_matrix(
    seqs: &[SymbolSeq],
    base: &BaseSet,
    norm: CoordNorm,
) -> Result<DistMatrix, MetricError> {
    let features = seqs
        .iter()
        .map(|x| featurize(x, base))
        .collect::<Result<Vec<_>, _>>()?;
    let n = seqs.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = norm.apply(&features[i].coords, &features[j].coords);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DistMatrix { n, values })
}
