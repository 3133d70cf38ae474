//! Continuous-time Markov chain machinery: generator validation, stationary
//! distribution, and exact path sampling of the switching signal.
//!
//! Conventions: the generator `Q` has nonnegative off-diagonal rates and zero
//! row sums; the exit rate of state `i` is `q_i = -Q[i][i]` (the sign making
//! mean holding times `1/(r q_i)` positive). The chain actually simulated has
//! generator `r Q` for a rate multiplier `r > 0`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rngutil::{stream_rng, uniform_open_closed, StreamDomain};

#[derive(Debug, Error)]
pub enum CtmcError {
    #[error("generator must be square with at least one state")]
    BadShape,
    #[error("generator entry ({i},{j}) is not finite: {value}")]
    NonFinite { i: usize, j: usize, value: f64 },
    #[error("negative off-diagonal rate at ({i},{j}): {value}")]
    NegativeRate { i: usize, j: usize, value: f64 },
    #[error("row {row} sums to {sum:e}, exceeding the 1e-12 zero-sum tolerance")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("not irreducible: state {state} is {direction} the positive-rate graph from state 0")]
    NotIrreducible { state: usize, direction: &'static str },
    #[error("rate multiplier must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("initial state {state} out of range for {n_states} states")]
    BadState { state: usize, n_states: usize },
    #[error("horizon must be finite and nonnegative, got {0}")]
    BadHorizon(f64),
    #[error("occupation fractions need a positive horizon")]
    ZeroHorizon,
    #[error("stationary solve failed: {0}")]
    StationarySolve(String),
}

/// Validated CTMC generator.
///
/// A single-state generator (`Q = [[0]]`) is accepted as the degenerate
/// "never switches" chain, which the simulator uses for systems with one
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    q: DMatrix<f64>,
}

/// JSON wire form: `{"states": n, "Q": [[...], ...]}`.
#[derive(Serialize, Deserialize)]
struct GeneratorJson {
    states: usize,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
}

impl Serialize for Generator {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        GeneratorJson {
            states: self.n_states(),
            q: (0..self.n_states())
                .map(|i| (0..self.n_states()).map(|j| self.q[(i, j)]).collect())
                .collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Generator {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = GeneratorJson::deserialize(de)?;
        if raw.q.len() != raw.states || raw.q.iter().any(|r| r.len() != raw.states) {
            return Err(serde::de::Error::custom(format!(
                "generator declares {} states but Q is not {0}x{0}",
                raw.states
            )));
        }
        let m = DMatrix::from_fn(raw.states, raw.states, |i, j| raw.q[i][j]);
        Generator::new(m).map_err(serde::de::Error::custom)
    }
}

impl Generator {
    /// Validate and wrap a generator matrix.
    pub fn new(q: DMatrix<f64>) -> Result<Self, CtmcError> {
        if q.nrows() == 0 || q.nrows() != q.ncols() {
            return Err(CtmcError::BadShape);
        }
        let n = q.nrows();
        for i in 0..n {
            for j in 0..n {
                let v = q[(i, j)];
                if !v.is_finite() {
                    return Err(CtmcError::NonFinite { i, j, value: v });
                }
                if i != j && v < 0.0 {
                    return Err(CtmcError::NegativeRate { i, j, value: v });
                }
            }
        }
        for i in 0..n {
            let sum: f64 = (0..n).map(|j| q[(i, j)]).sum();
            if sum.abs() > 1e-12 {
                return Err(CtmcError::RowSumViolation { row: i, sum });
            }
        }
        // Strong connectivity of the positive-rate digraph.
        if n > 1 {
            let forward = reachable(&q, false);
            if let Some(s) = (0..n).find(|s| !forward[*s]) {
                return Err(CtmcError::NotIrreducible {
                    state: s,
                    direction: "unreachable in",
                });
            }
            let backward = reachable(&q, true);
            if let Some(s) = (0..n).find(|s| !backward[*s]) {
                return Err(CtmcError::NotIrreducible {
                    state: s,
                    direction: "unable to reach state 0 in",
                });
            }
        }
        Ok(Self { q })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CtmcError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(CtmcError::BadShape);
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Symmetric two-state generator with unit rates, the workhorse of the
    /// worked examples.
    pub fn symmetric_two_state() -> Self {
        Self::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).expect("static generator is valid")
    }

    pub fn n_states(&self) -> usize {
        self.q.nrows()
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    /// Exit rate `q_i = -Q[i][i]`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.q[(i, i)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.q
    }
}

fn reachable(q: &DMatrix<f64>, reversed: bool) -> Vec<bool> {
    let n = q.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            let rate = if reversed { q[(j, i)] } else { q[(i, j)] };
            if i != j && rate > 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// Stationary distribution: the probability vector solving `pi Q = 0`.
#[derive(Debug, Clone)]
pub struct StationaryDist {
    probs: Vec<f64>,
}

impl StationaryDist {
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// `sum_i pi_i q_i`, the long-run jump intensity per unit of `r`.
    pub fn jump_intensity(&self, generator: &Generator) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * generator.exit_rate(i))
            .sum()
    }
}

/// Solve `pi Q = 0`, `sum pi = 1` by replacing one redundant equation of the
/// transposed system with the normalization row.
pub fn stationary(generator: &Generator) -> Result<StationaryDist, CtmcError> {
    let n = generator.n_states();
    if n == 1 {
        return Ok(StationaryDist { probs: vec![1.0] });
    }
    let mut m = generator.q.transpose();
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = m.lu();
    let pi = lu
        .solve(&rhs)
        .ok_or_else(|| CtmcError::StationarySolve("singular system".into()))?;
    let sum: f64 = pi.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        return Err(CtmcError::StationarySolve(format!("bad normalization {sum}")));
    }
    let probs: Vec<f64> = pi.iter().map(|p| p / sum).collect();
    if let Some((i, &p)) = probs.iter().enumerate().find(|(_, p)| **p <= 0.0) {
        return Err(CtmcError::StationarySolve(format!(
            "nonpositive stationary probability pi[{i}] = {p}"
        )));
    }
    let residual = (DVector::from_vec(probs.clone()).transpose() * &generator.q)
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    if residual > 1e-10 {
        return Err(CtmcError::StationarySolve(format!(
            "residual ||pi Q|| = {residual:e}"
        )));
    }
    Ok(StationaryDist { probs })
}

/// One completed holding period: the chain sat in `state` for `holding`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub state: usize,
    pub holding: f64,
}

/// A realization of the switching signal on `[0, T]`.
///
/// The chain visits `segments[k].state` for `segments[k].holding` time units
/// (k = 1..N(T) in paper counting), then sits in `final_state` for the
/// residual `a_T = T - sum of holdings`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    initial_state: usize,
    segments: Vec<Segment>,
    final_state: usize,
    residual: f64,
    horizon: f64,
}

impl JumpPath {
    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// Completed holds, in order.
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn final_state(&self) -> usize {
        self.final_state
    }

    /// Time since the last switch at the horizon.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of switches before the horizon.
    pub fn jump_count(&self) -> usize {
        self.segments.len()
    }

    /// Every flow interval in order, residual included: the pairs
    /// `(state, duration)` a propagator must apply.
    pub fn flow_segments(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.segments
            .iter()
            .map(|s| (s.state, s.holding))
            .chain(std::iter::once((self.final_state, self.residual)))
    }

    /// CSV rows `k,state,holding_time`; the final row carries the residual.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "k,state,holding_time")?;
        for (k, s) in self.segments.iter().enumerate() {
            writeln!(w, "{},{},{}", k + 1, s.state, crate::fmt_float(s.holding))?;
        }
        writeln!(
            w,
            "{},{},{}",
            self.segments.len() + 1,
            self.final_state,
            crate::fmt_float(self.residual)
        )
    }
}

/// Sample a path of the chain with generator `r Q` started at `i0`.
///
/// State `i` holds for an Exponential(`r q_i`) time drawn by inverse CDF;
/// the next state is chosen by cumulative-sum inversion in ascending state
/// order. Identical `(Q, r, i0, T, seed)` give a bit-identical path.
pub fn sample_path(
    generator: &Generator,
    r: f64,
    i0: usize,
    horizon: f64,
    seed: u64,
) -> Result<JumpPath, CtmcError> {
    let mut rng = stream_rng(seed, StreamDomain::Path, 0);
    sample_path_with(generator, r, i0, horizon, &mut rng)
}

/// As [`sample_path`], drawing from a caller-provided generator stream.
pub fn sample_path_with<R: Rng>(
    generator: &Generator,
    r: f64,
    i0: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<JumpPath, CtmcError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(CtmcError::BadRate(r));
    }
    if i0 >= generator.n_states() {
        return Err(CtmcError::BadState {
            state: i0,
            n_states: generator.n_states(),
        });
    }
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(CtmcError::BadHorizon(horizon));
    }

    let n = generator.n_states();
    let mut segments = Vec::new();
    let mut state = i0;
    let mut elapsed = 0.0f64;
    loop {
        let qi = generator.exit_rate(state);
        if qi <= 0.0 {
            // Absorbing only in the degenerate single-state chain.
            break;
        }
        let hold = -uniform_open_closed(rng).ln() / (r * qi);
        if elapsed + hold >= horizon {
            break;
        }
        elapsed += hold;
        segments.push(Segment {
            state,
            holding: hold,
        });
        // Embedded-chain step: cumulative-sum inversion, ascending order.
        let u = rng.random::<f64>() * qi;
        let mut acc = 0.0;
        let mut next = state;
        for j in 0..n {
            if j == state {
                continue;
            }
            let rate = generator.rate(state, j);
            if rate <= 0.0 {
                continue;
            }
            acc += rate;
            next = j;
            if acc > u {
                break;
            }
        }
        state = next;
    }
    Ok(JumpPath {
        initial_state: i0,
        segments,
        final_state: state,
        residual: horizon - elapsed,
        horizon,
    })
}

/// Fraction of `[0, T]` spent in each state.
pub fn occupation_fractions(path: &JumpPath, n_states: usize) -> Result<Vec<f64>, CtmcError> {
    if path.horizon() <= 0.0 {
        return Err(CtmcError::ZeroHorizon);
    }
    let mut occ = vec![0.0; n_states];
    for (state, duration) in path.flow_segments() {
        occ[state] += duration;
    }
    for o in &mut occ {
        *o /= path.horizon();
    }
    Ok(occ)
}
