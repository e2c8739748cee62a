//! Probabilistic finite-state automata: a finite alphabet, a finite state set,
//! a partial symbol-indexed transition map, and a per-state distribution over
//! the next emitted symbol. Generation emits a symbol from the current state's
//! distribution and then follows the transition labeled by that symbol.
//!
//! Machines are immutable after construction; every operation here is a pure
//! function, so values can be shared freely across threads.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph;

/// Tolerance for probability-vector normalization checks.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Two observation rows closer than this (sup norm) are treated as equal
/// during minimization. Machines read from files carry exact duplicates;
/// inferred machines should be minimized with a user-chosen tolerance instead.
pub const ROW_EQ_TOL: f64 = 1e-9;
/// Target residual for the stationary-distribution solver.
pub const STATIONARY_TOL: f64 = 1e-12;

const STATIONARY_MAX_ITERS: usize = 1_000_000;
/// Above this state count the stationary solver switches from a direct linear
/// solve to averaged power iteration.
const DIRECT_SOLVE_LIMIT: usize = 512;

#[derive(Debug, Error)]
pub enum PfsaError {
    #[error("machine failed validation: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("stationary distribution did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("start state {state} out of range for {states} states")]
    StartStateOutOfRange { state: usize, states: usize },
    #[error("symbol key {0:?} is not a valid symbol index")]
    BadSymbolKey(String),
    #[error("not a probability distribution: sum {0}")]
    BadDistribution(f64),
    #[error("character {0:?} is not a digit symbol")]
    BadSymbolChar(char),
    #[error("malformed model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(vs: &[Violation]) -> String {
    let items: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
    items.join("; ")
}

/// A single invariant violation found by [`Pfsa::validate`]. Violations are
/// data, not failures: collecting all of them lets a loader report everything
/// wrong with a file at once.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    AlphabetTooSmall {
        alphabet_size: usize,
    },
    NoStates,
    RowArity {
        state: usize,
        probs_len: usize,
        next_len: usize,
    },
    NegativeProb {
        state: usize,
        symbol: usize,
        value: f64,
    },
    RowSum {
        state: usize,
        sum: f64,
    },
    /// The transition map must be defined exactly where the observation
    /// probability is positive.
    TransitionDomain {
        state: usize,
        symbol: usize,
        has_prob: bool,
        has_next: bool,
    },
    TransitionTarget {
        state: usize,
        symbol: usize,
        target: usize,
    },
    NotStronglyConnected {
        components: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AlphabetTooSmall { alphabet_size } => {
                write!(f, "alphabet size {alphabet_size} < 2")
            }
            Violation::NoStates => write!(f, "machine has no states"),
            Violation::RowArity {
                state,
                probs_len,
                next_len,
            } => write!(
                f,
                "state {state}: row arity mismatch (probs {probs_len}, next {next_len})"
            ),
            Violation::NegativeProb {
                state,
                symbol,
                value,
            } => {
                write!(
                    f,
                    "state {state}, symbol {symbol}: negative probability {value}"
                )
            }
            Violation::RowSum { state, sum } => {
                write!(f, "state {state}: observation row sums to {sum}")
            }
            Violation::TransitionDomain {
                state,
                symbol,
                has_prob,
                has_next,
            } => write!(
                f,
                "state {state}, symbol {symbol}: probability {} but transition {}",
                if *has_prob { "positive" } else { "zero" },
                if *has_next { "present" } else { "absent" },
            ),
            Violation::TransitionTarget {
                state,
                symbol,
                target,
            } => {
                write!(
                    f,
                    "state {state}, symbol {symbol}: transition target {target} out of range"
                )
            }
            Violation::NotStronglyConnected { components } => {
                write!(
                    f,
                    "transition graph is not strongly connected ({components} components)"
                )
            }
        }
    }
}

/// One state: its next-symbol distribution and, for each positive-probability
/// symbol, the state reached after emitting it.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRecord {
    pub obs_probs: Vec<f64>,
    pub next: Vec<Option<usize>>,
}

impl StateRecord {
    pub fn new(obs_probs: Vec<f64>, next: Vec<Option<usize>>) -> Self {
        StateRecord { obs_probs, next }
    }

    /// Full-support row: every symbol has positive probability, so the
    /// transition list is given without options.
    pub fn full(obs_probs: Vec<f64>, next: Vec<usize>) -> Self {
        StateRecord {
            obs_probs,
            next: next.into_iter().map(Some).collect(),
        }
    }
}

/// A probabilistic finite-state automaton over the symbols `0..alphabet_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pfsa {
    alphabet_size: usize,
    states: Vec<StateRecord>,
}

/// Probability distribution over the states of one machine.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDist {
    probs: Vec<f64>,
}

impl StateDist {
    pub fn new(probs: Vec<f64>) -> Result<Self, PfsaError> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(PfsaError::Invalid(vec![Violation::RowSum {
                state: 0,
                sum,
            }]));
        }
        Ok(StateDist { probs })
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        StateDist { probs }
    }

    pub fn uniform(n: usize) -> Self {
        StateDist {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point(n: usize, state: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[state] = 1.0;
        StateDist { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// A finite sequence of symbols drawn from `0..alphabet_size` of whichever
/// machine it is evaluated against. The empty sequence is legal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SymbolSeq {
    symbols: Vec<usize>,
}

impl SymbolSeq {
    pub fn new(symbols: Vec<usize>) -> Self {
        SymbolSeq { symbols }
    }

    pub fn empty() -> Self {
        SymbolSeq {
            symbols: Vec::new(),
        }
    }

    /// Parses a run of decimal digits, e.g. `"0110"`, into symbols 0..=9.
    pub fn from_digits(text: &str) -> Result<Self, PfsaError> {
        let mut symbols = Vec::with_capacity(text.len());
        for ch in text.chars() {
            let d = ch.to_digit(10).ok_or(PfsaError::BadSymbolChar(ch))? as usize;
            symbols.push(d);
        }
        Ok(SymbolSeq { symbols })
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.symbols
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.symbols.iter()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn max_symbol(&self) -> Option<usize> {
        self.symbols.iter().copied().max()
    }
}

impl From<Vec<usize>> for SymbolSeq {
    fn from(symbols: Vec<usize>) -> Self {
        SymbolSeq { symbols }
    }
}

/// Where sampling starts: a draw from the stationary distribution, or a fixed
/// state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Stationary,
    State(usize),
}

impl Pfsa {
    /// Builds a machine without checking invariants; call [`Pfsa::validate`],
    /// or use [`Pfsa::checked`] when a valid machine is required.
    pub fn new(alphabet_size: usize, states: Vec<StateRecord>) -> Self {
        Pfsa {
            alphabet_size,
            states,
        }
    }

    /// Builds and validates in one step.
    pub fn checked(alphabet_size: usize, states: Vec<StateRecord>) -> Result<Self, PfsaError> {
        let m = Pfsa::new(alphabet_size, states);
        let violations = m.validate();
        if violations.is_empty() {
            Ok(m)
        } else {
            Err(PfsaError::Invalid(violations))
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[StateRecord] {
        &self.states
    }

    pub fn obs_row(&self, state: usize) -> &[f64] {
        &self.states[state].obs_probs
    }

    pub fn obs_prob(&self, state: usize, symbol: usize) -> f64 {
        self.states[state].obs_probs[symbol]
    }

    pub fn next(&self, state: usize, symbol: usize) -> Option<usize> {
        self.states[state].next[symbol]
    }

    /// Checks every machine invariant and returns all violations found; an
    /// empty list means the machine is valid. Operations on this type assume
    /// a valid machine unless stated otherwise.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.alphabet_size < 2 {
            out.push(Violation::AlphabetTooSmall {
                alphabet_size: self.alphabet_size,
            });
        }
        if self.states.is_empty() {
            out.push(Violation::NoStates);
            return out;
        }
        let k = self.alphabet_size;
        let mut arity_ok = true;
        for (q, st) in self.states.iter().enumerate() {
            if st.obs_probs.len() != k || st.next.len() != k {
                out.push(Violation::RowArity {
                    state: q,
                    probs_len: st.obs_probs.len(),
                    next_len: st.next.len(),
                });
                arity_ok = false;
                continue;
            }
            let mut sum = 0.0;
            for (sym, &p) in st.obs_probs.iter().enumerate() {
                if p < 0.0 || !p.is_finite() {
                    out.push(Violation::NegativeProb {
                        state: q,
                        symbol: sym,
                        value: p,
                    });
                }
                sum += p;
                let has_prob = p > 0.0;
                let has_next = st.next[sym].is_some();
                if has_prob != has_next {
                    out.push(Violation::TransitionDomain {
                        state: q,
                        symbol: sym,
                        has_prob,
                        has_next,
                    });
                }
                if let Some(t) = st.next[sym] {
                    if t >= self.states.len() {
                        out.push(Violation::TransitionTarget {
                            state: q,
                            symbol: sym,
                            target: t,
                        });
                    }
                }
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                out.push(Violation::RowSum { state: q, sum });
            }
        }
        if arity_ok
            && out
                .iter()
                .all(|v| !matches!(v, Violation::TransitionTarget { .. }))
        {
            let adj = self.adjacency();
            let comps = graph::sccs(&adj);
            if comps.len() != 1 {
                out.push(Violation::NotStronglyConnected {
                    components: comps.len(),
                });
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub(crate) fn adjacency(&self) -> Vec<Vec<usize>> {
        self.states
            .iter()
            .map(|st| st.next.iter().flatten().copied().collect())
            .collect()
    }

    /// The state-to-state transition matrix: entry `(q, q')` sums the
    /// observation probabilities of every symbol that moves `q` to `q'`.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.states.len();
        let mut m = vec![vec![0.0; n]; n];
        for (q, st) in self.states.iter().enumerate() {
            for (sym, &p) in st.obs_probs.iter().enumerate() {
                if p > 0.0 {
                    let t = st.next[sym].expect("valid machine: positive prob has a target");
                    m[q][t] += p;
                }
            }
        }
        m
    }

    /// The unique distribution fixed by the transition matrix. Solved directly
    /// for small machines; large ones use power iteration on the half-lazy
    /// kernel `(p + pPi)/2`, which shares the fixed point and converges
    /// geometrically even on periodic chains.
    pub fn stationary_distribution(&self) -> Result<StateDist, PfsaError> {
        let pi = self.transition_matrix();
        let n = pi.len();
        if n == 1 {
            return Ok(StateDist::from_raw(vec![1.0]));
        }
        if n <= DIRECT_SOLVE_LIMIT {
            if let Some(mut p) = solve_stationary_direct(&pi) {
                // A handful of lazy steps scrubs elimination round-off.
                for _ in 0..64 {
                    if residual(&p, &pi) <= STATIONARY_TOL {
                        return Ok(StateDist::from_raw(p));
                    }
                    p = lazy_step(&p, &pi);
                }
                if residual(&p, &pi) <= STATIONARY_TOL {
                    return Ok(StateDist::from_raw(p));
                }
            }
        }
        let mut p = vec![1.0 / n as f64; n];
        for _ in 0..STATIONARY_MAX_ITERS {
            if residual(&p, &pi) <= STATIONARY_TOL {
                return Ok(StateDist::from_raw(p));
            }
            p = lazy_step(&p, &pi);
        }
        Err(PfsaError::NoConvergence(STATIONARY_MAX_ITERS))
    }

    /// Generates `length` symbols. Identical `(machine, length, seed, start)`
    /// always produce identical output; parallel callers pick distinct seeds.
    pub fn sample(&self, length: usize, seed: u64, start: Start) -> Result<SymbolSeq, PfsaError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = match start {
            Start::State(i) => {
                if i >= self.states.len() {
                    return Err(PfsaError::StartStateOutOfRange {
                        state: i,
                        states: self.states.len(),
                    });
                }
                i
            }
            Start::Stationary => {
                let stat = self.stationary_distribution()?;
                draw_index(&mut rng, stat.probs())
            }
        };
        let mut symbols = Vec::with_capacity(length);
        for _ in 0..length {
            let sym = draw_index(&mut rng, &self.states[state].obs_probs);
            symbols.push(sym);
            state =
                self.states[state].next[sym].expect("valid machine: positive prob has a target");
        }
        Ok(SymbolSeq::new(symbols))
    }

    /// Collapses equivalent states by partition refinement: states start in
    /// blocks of equal observation rows (sup norm within [`ROW_EQ_TOL`]) and
    /// blocks split until transition targets agree blockwise. The quotient
    /// machine generates the same process and has no equivalent states.
    pub fn minimize(&self) -> Pfsa {
        let n = self.states.len();
        if n <= 1 {
            return self.clone();
        }

        // Initial partition on observation rows.
        let mut block = vec![usize::MAX; n];
        let mut reps: Vec<usize> = Vec::new();
        for (q, slot) in block.iter_mut().enumerate() {
            let found = reps
                .iter()
                .position(|&r| rows_equal(self.obs_row(r), self.obs_row(q)));
            *slot = match found {
                Some(b) => b,
                None => {
                    reps.push(q);
                    reps.len() - 1
                }
            };
        }

        // Refine on successor blocks until stable.
        loop {
            let mut sig_to_block: BTreeMap<(usize, Vec<Option<usize>>), usize> = BTreeMap::new();
            let mut new_block = vec![usize::MAX; n];
            for q in 0..n {
                let succ: Vec<Option<usize>> = self.states[q]
                    .next
                    .iter()
                    .map(|t| t.map(|t| block[t]))
                    .collect();
                let key = (block[q], succ);
                let next_id = sig_to_block.len();
                let id = *sig_to_block.entry(key).or_insert(next_id);
                new_block[q] = id;
            }
            if new_block == block {
                break;
            }
            block = new_block;
        }

        // The map above assigns ids by signature order; renumber blocks by
        // first occurrence so the quotient is stable under state order.
        let mut order: Vec<usize> = Vec::new();
        for &b in &block {
            if !order.contains(&b) {
                order.push(b);
            }
        }
        let renum: Vec<usize> = {
            let mut r = vec![0; order.len()];
            for (new_id, &old_id) in order.iter().enumerate() {
                r[old_id] = new_id;
            }
            r
        };
        let block: Vec<usize> = block.into_iter().map(|b| renum[b]).collect();
        let num_blocks = order.len();

        let mut rep_of = vec![usize::MAX; num_blocks];
        for q in 0..n {
            if rep_of[block[q]] == usize::MAX {
                rep_of[block[q]] = q;
            }
        }

        let states = (0..num_blocks)
            .map(|b| {
                let rep = rep_of[b];
                StateRecord {
                    obs_probs: self.states[rep].obs_probs.clone(),
                    next: self.states[rep]
                        .next
                        .iter()
                        .map(|t| t.map(|t| block[t]))
                        .collect(),
                }
            })
            .collect();
        Pfsa::new(self.alphabet_size, states)
    }
}

fn rows_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= ROW_EQ_TOL)
}

fn draw_index<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

fn residual(p: &[f64], pi: &[Vec<f64>]) -> f64 {
    let stepped = apply_kernel(p, pi);
    p.iter()
        .zip(&stepped)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn apply_kernel(p: &[f64], pi: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut out = vec![0.0; n];
    for (q, &mass) in p.iter().enumerate() {
        if mass > 0.0 {
            for (t, &w) in pi[q].iter().enumerate() {
                if w > 0.0 {
                    out[t] += mass * w;
                }
            }
        }
    }
    out
}

fn lazy_step(p: &[f64], pi: &[Vec<f64>]) -> Vec<f64> {
    let stepped = apply_kernel(p, pi);
    let mut out: Vec<f64> = p.iter().zip(&stepped).map(|(a, b)| 0.5 * (a + b)).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Gaussian elimination on `(Pi^T - I) p = 0` with the last equation replaced
/// by the normalization constraint. Returns `None` on a vanishing pivot.
#[allow(clippy::needless_range_loop)]
fn solve_stationary_direct(pi: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = pi.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = pi[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[n - 1][j] = 1.0;
    }
    a[n - 1][n] = 1.0;

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut v = a[row][n];
        for k in row + 1..n {
            v -= a[row][k] * x[k];
        }
        x[row] = v / a[row][row];
    }
    // Round-off can leave hair-thin negatives; anything worse means the
    // solve is untrustworthy.
    for v in &mut x {
        if *v < 0.0 {
            if *v < -1e-9 {
                return None;
            }
            *v = 0.0;
        }
    }
    let sum: f64 = x.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        return None;
    }
    for v in &mut x {
        *v /= sum;
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// JSON model format:
// {"alphabet_size": k, "states": [{"probs": [...], "next": {"0": j, ...}}]}
// Keys of "next" are decimal symbol strings; an absent key means the symbol
// has probability zero in that state.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MachineFile {
    alphabet_size: usize,
    states: Vec<MachineStateFile>,
}

#[derive(Serialize, Deserialize)]
struct MachineStateFile {
    probs: Vec<f64>,
    #[serde(default)]
    next: BTreeMap<String, usize>,
}

impl Pfsa {
    pub fn to_json(&self) -> String {
        let file = MachineFile {
            alphabet_size: self.alphabet_size,
            states: self
                .states
                .iter()
                .map(|st| MachineStateFile {
                    probs: st.obs_probs.clone(),
                    next: st
                        .next
                        .iter()
                        .enumerate()
                        .filter_map(|(sym, t)| t.map(|t| (sym.to_string(), t)))
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("machine serialization cannot fail")
    }

    /// Parses and validates a machine; invalid machines are rejected with the
    /// full violation list.
    pub fn from_json(text: &str) -> Result<Self, PfsaError> {
        let file: MachineFile = serde_json::from_str(text)?;
        let k = file.alphabet_size;
        let mut states = Vec::with_capacity(file.states.len());
        for st in file.states {
            let mut next = vec![None; k.max(st.probs.len())];
            for (key, target) in st.next {
                let sym: usize = key
                    .parse()
                    .map_err(|_| PfsaError::BadSymbolKey(key.clone()))?;
                if sym >= next.len() {
                    return Err(PfsaError::BadSymbolKey(key));
                }
                next[sym] = Some(target);
            }
            next.truncate(k.max(st.probs.len()));
            states.push(StateRecord {
                obs_probs: st.probs,
                next,
            });
        }
        Pfsa::checked(k, states)
    }

    pub fn save(&self, path: &Path) -> Result<(), PfsaError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PfsaError> {
        let text = std::fs::read_to_string(path)?;
        Pfsa::from_json(&text)
    }
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_accepts_reference_machines() {
        assert!(machine_g().validate().is_empty());
        assert!(machine_h().validate().is_empty());
        assert!(fair_coin().validate().is_empty());
    }

    #[test]
    fn validate_reports_bad_row_sum() {
        let m = Pfsa::new(
            2,
            vec![
                StateRecord::full(vec![0.6, 0.3], vec![0, 1]),
                StateRecord::full(vec![0.4, 0.6], vec![0, 1]),
            ],
        );
        let vs = m.validate();
        assert!(
            vs.iter()
                .any(|v| matches!(v, Violation::RowSum { state: 0, .. })),
            "{vs:?}"
        );
    }

    #[test]
    fn validate_reports_disconnected_machine() {
        // Two self-loop states with no cross edges.
        let m = Pfsa::new(
            2,
            vec![
                StateRecord::full(vec![0.5, 0.5], vec![0, 0]),
                StateRecord::full(vec![0.5, 0.5], vec![1, 1]),
            ],
        );
        let vs = m.validate();
        assert!(
            vs.iter()
                .any(|v| matches!(v, Violation::NotStronglyConnected { .. })),
            "{vs:?}"
        );
    }

    #[test]
    fn validate_reports_domain_mismatch() {
        let m = Pfsa::new(
            2,
            vec![StateRecord::new(vec![1.0, 0.0], vec![Some(0), Some(0)])],
        );
        let vs = m.validate();
        assert!(
            vs.iter().any(|v| matches!(
                v,
                Violation::TransitionDomain {
                    state: 0,
                    symbol: 1,
                    has_prob: false,
                    has_next: true
                }
            )),
            "{vs:?}"
        );
    }

    #[test]
    fn transition_matrix_of_g() {
        let pi = machine_g().transition_matrix();
        assert_eq!(pi, vec![vec![0.6, 0.4], vec![0.4, 0.6]]);
    }

    #[test]
    fn transition_matrix_single_state() {
        let pi = fair_coin().transition_matrix();
        assert_eq!(pi, vec![vec![1.0]]);
    }

    #[test]
    fn transition_matrix_of_h_first_row() {
        let pi = machine_h().transition_matrix();
        assert_eq!(pi[0], vec![0.3, 0.7, 0.0, 0.0]);
    }

    #[test]
    fn stationary_of_g_is_half_half() {
        let p = machine_g().stationary_distribution().unwrap();
        assert!((p.probs()[0] - 0.5).abs() < 1e-12);
        assert!((p.probs()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_of_h_matches_hand_solution() {
        let p = machine_h().stationary_distribution().unwrap();
        let expect = [4.0 / 15.0, 7.0 / 30.0, 7.0 / 30.0, 4.0 / 15.0];
        for (got, want) in p.probs().iter().zip(expect) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn stationary_of_single_state() {
        let p = fair_coin().stationary_distribution().unwrap();
        assert_eq!(p.probs(), &[1.0]);
    }

    #[test]
    fn stationary_of_periodic_chain() {
        // Deterministic two-cycle: the transition matrix is periodic, so the
        // averaged iteration has to do the work if the direct solve bows out.
        let m = Pfsa::checked(
            2,
            vec![
                StateRecord::new(vec![0.0, 1.0], vec![None, Some(1)]),
                StateRecord::new(vec![1.0, 0.0], vec![Some(0), None]),
            ],
        )
        .unwrap();
        let p = m.stationary_distribution().unwrap();
        assert!((p.probs()[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn sample_zero_length_is_empty() {
        let s = machine_g().sample(0, 7, Start::Stationary).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn sample_is_deterministic_per_seed() {
        let a = machine_g().sample(1000, 42, Start::Stationary).unwrap();
        let b = machine_g().sample(1000, 42, Start::Stationary).unwrap();
        assert_eq!(a, b);
        let c = machine_g().sample(1000, 43, Start::Stationary).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_matches_stationary_symbol_frequency() {
        let s = machine_g().sample(1_000_000, 1, Start::Stationary).unwrap();
        let zeros = s.iter().filter(|&&x| x == 0).count() as f64;
        let freq = zeros / s.len() as f64;
        assert!((0.498..=0.502).contains(&freq), "freq {freq}");
    }

    #[test]
    fn sample_fixed_start_state() {
        let s = machine_g().sample(10, 5, Start::State(1)).unwrap();
        assert_eq!(s.len(), 10);
        assert!(machine_g().sample(10, 5, Start::State(9)).is_err());
    }

    #[test]
    fn minimize_keeps_irreducible_machine() {
        let m = machine_g().minimize();
        assert_eq!(m.num_states(), 2);
        assert_eq!(m, machine_g());
    }

    #[test]
    fn minimize_collapses_duplicated_state() {
        let m = duplicated_g().minimize();
        assert_eq!(m.num_states(), 2);
        assert!(m.is_valid());
        // Quotient rows match the original machine's rows up to relabeling.
        assert_eq!(m.obs_row(0), &[0.6, 0.4]);
        assert_eq!(m.obs_row(1), &[0.4, 0.6]);
    }

    #[test]
    fn minimize_respects_transition_structure() {
        // Equal rows but different successor behavior must not merge.
        let m = Pfsa::checked(
            2,
            vec![
                StateRecord::full(vec![0.5, 0.5], vec![1, 0]),
                StateRecord::full(vec![0.5, 0.5], vec![1, 2]),
                StateRecord::full(vec![0.9, 0.1], vec![0, 1]),
            ],
        )
        .unwrap();
        assert_eq!(m.minimize().num_states(), 3);
    }

    #[test]
    fn json_round_trip() {
        let g = machine_g();
        let text = g.to_json();
        let back = Pfsa::from_json(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn json_zero_prob_symbols_have_no_next_key() {
        let m = Pfsa::checked(
            2,
            vec![
                StateRecord::new(vec![0.0, 1.0], vec![None, Some(1)]),
                StateRecord::new(vec![1.0, 0.0], vec![Some(0), None]),
            ],
        )
        .unwrap();
        let text = m.to_json();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(parsed["states"][0]["next"].get("0").is_none());
        assert_eq!(Pfsa::from_json(&text).unwrap(), m);
    }

    #[test]
    fn json_rejects_invalid_machine() {
        let text =
            r#"{"alphabet_size": 2, "states": [{"probs": [0.6, 0.3], "next": {"0": 0, "1": 0}}]}"#;
        match Pfsa::from_json(text) {
            Err(PfsaError::Invalid(vs)) => {
                assert!(vs.iter().any(|v| matches!(v, Violation::RowSum { .. })))
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn from_digits_round_trip() {
        let s = SymbolSeq::from_digits("0110").unwrap();
        assert_eq!(s.as_slice(), &[0, 1, 1, 0]);
        assert!(SymbolSeq::from_digits("01a").is_err());
    }

    use super::testutil::arb_pfsa;

    proptest! {
        #[test]
        fn prop_stationary_residual_and_sum(m in arb_pfsa(6, 2)) {
            let p = m.stationary_distribution().unwrap();
            let pi = m.transition_matrix();
            prop_assert!(residual(p.probs(), &pi) <= STATIONARY_TOL);
            let sum: f64 = p.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn prop_transition_rows_sum_to_one(m in arb_pfsa(6, 3)) {
            for row in m.transition_matrix() {
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn prop_minimize_idempotent_and_shrinking(m in arb_pfsa(6, 2)) {
            let m1 = m.minimize();
            prop_assert!(m1.num_states() <= m.num_states());
            prop_assert_eq!(m1.minimize(), m1);
        }

        #[test]
        fn prop_sample_deterministic(m in arb_pfsa(4, 2), seed in 0u64..1000, len in 0usize..200) {
            let a = m.sample(len, seed, Start::Stationary).unwrap();
            let b = m.sample(len, seed, Start::Stationary).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
