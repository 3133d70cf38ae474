//! The switched process itself: exact propagation of `x' = A_{I_t} x` along
//! sampled jump paths, in dense coordinates or in polar (direction +
//! log-radius) form, plus Monte Carlo estimators built on top.
//!
//! Propagation is exact per segment: each holding interval applies a matrix
//! exponential, so the only numerical errors are the exponential's tolerance
//! and Monte Carlo variance. Polar propagation renormalizes the direction
//! after every factor and accumulates the log of the norm, which never
//! overflows; dense propagation is guarded by a norm-growth bound.

use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

use crate::ctmc::{sample_path_with, CtmcError, Generator, JumpPath};
use crate::linalg::{
    is_hurwitz, is_normal, mat_exp, operator_norm, LinalgError, SquareMatrix, Stability,
    DEFAULT_PREDICATE_TOL, DEFAULT_SPECTRAL_TOL, EXP_HORIZON_LIMIT,
};
use crate::rngutil::{random_unit_vector, stream_rng, StreamDomain};

/// Norm-growth cap per polar substep in dimensions other than 2.
const POLAR_LOG_CAP: f64 = 30.0;

/// Angle-increment cap per polar substep in dimension 2: keeps the lifted
/// angle's branch choice unambiguous.
const POLAR_ANGLE_CAP: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("system has {matrices} matrices but the generator has {states} states")]
    MatrixCount { matrices: usize, states: usize },
    #[error("matrix {index} has dimension {dim}, expected {expected}")]
    MatrixDim {
        index: usize,
        dim: usize,
        expected: usize,
    },
    #[error("switching rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("initial vector must have positive finite norm")]
    ZeroInitialNorm,
    #[error("direction must be a unit vector (norm deviates by {0:e})")]
    NotUnit(f64),
    #[error(
        "norm bound Lambda*T = {lambda_t:.3e} exceeds the dense horizon {limit}; \
         use polar propagation"
    )]
    DenseOverflow { lambda_t: f64, limit: f64 },
    #[error("matrix {index} violates the hypothesis: {what}")]
    HypothesisViolated { index: usize, what: String },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Ctmc(#[from] CtmcError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A switched linear system: one matrix per chain state, a generator, and
/// the switching-rate multiplier.
#[derive(Debug, Clone)]
pub struct SwitchedSystem {
    matrices: Vec<SquareMatrix>,
    generator: Generator,
    rate: f64,
    matrix_norms: Vec<f64>,
    norm_bound: f64,
}

impl SwitchedSystem {
    pub fn new(
        matrices: Vec<SquareMatrix>,
        generator: Generator,
        rate: f64,
    ) -> Result<Self, SimError> {
        if matrices.len() != generator.n_states() {
            return Err(SimError::MatrixCount {
                matrices: matrices.len(),
                states: generator.n_states(),
            });
        }
        let dim = matrices[0].dim();
        for (index, m) in matrices.iter().enumerate() {
            if m.dim() != dim {
                return Err(SimError::MatrixDim {
                    index,
                    dim: m.dim(),
                    expected: dim,
                });
            }
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(SimError::BadRate(rate));
        }
        let matrix_norms: Vec<f64> = matrices.iter().map(operator_norm).collect();
        let norm_bound = matrix_norms.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            matrices,
            generator,
            rate,
            matrix_norms,
            norm_bound,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn matrices(&self) -> &[SquareMatrix] {
        &self.matrices
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `Lambda = max_i ||A_i||`: the norm-growth bound of any trajectory.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// Same system with a different switching rate.
    pub fn with_rate(&self, rate: f64) -> Result<Self, SimError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(SimError::BadRate(rate));
        }
        let mut sys = self.clone();
        sys.rate = rate;
        Ok(sys)
    }

    fn sample<R: rand::Rng>(&self, horizon: f64, rng: &mut R) -> Result<JumpPath, SimError> {
        Ok(sample_path_with(&self.generator, self.rate, 0, horizon, rng)?)
    }

    /// Deterministic generic start direction `(1,...,1)/sqrt(d)`: it has
    /// nonzero overlap with every coordinate block, so block-diagonal
    /// systems see all of their invariant subspaces.
    pub fn default_direction(&self) -> DVector<f64> {
        let d = self.dim();
        DVector::from_element(d, 1.0 / (d as f64).sqrt())
    }
}

/// Direction, log-radius, and (planar only) lifted angle of a trajectory.
#[derive(Debug, Clone)]
pub struct PolarState {
    pub direction: DVector<f64>,
    pub log_radius: f64,
    pub lifted_angle: Option<f64>,
}

/// Polar tracker holding the direction in signed-log form: component `i`
/// is `signs[i] * exp(log_mags[i])`, normalized to unit radius.
///
/// A plain unit vector cannot represent directions whose components differ
/// by more than the f64 exponent range, which genuinely happens under slow
/// switching between systems with misaligned expanding directions: the
/// suppressed component saturates at the subnormal floor and the simulated
/// exponent is biased. In log form the dynamic range is effectively
/// unlimited and components can only reach exact zero through exact zeros
/// of the flow matrices.
#[derive(Debug, Clone)]
struct PolarTracker {
    signs: Vec<f64>,
    log_mags: Vec<f64>,
    log_radius: f64,
    lifted_angle: Option<f64>,
}

impl PolarTracker {
    fn start(u0: &DVector<f64>) -> Self {
        let lifted_angle = if u0.len() == 2 {
            Some(u0[1].atan2(u0[0]))
        } else {
            None
        };
        Self {
            signs: u0.iter().map(|x| if *x < 0.0 { -1.0 } else { 1.0 }).collect(),
            log_mags: u0.iter().map(|x| x.abs().ln()).collect(),
            log_radius: 0.0,
            lifted_angle,
        }
    }

    fn component(&self, i: usize) -> f64 {
        self.signs[i] * self.log_mags[i].exp()
    }

    fn into_state(self) -> PolarState {
        let direction = DVector::from_fn(self.log_mags.len(), |i, _| self.component(i));
        PolarState {
            direction,
            log_radius: self.log_radius,
            lifted_angle: self.lifted_angle,
        }
    }

    /// Advance through one flow interval `exp(A dt)`, splitting into
    /// substeps that bound norm growth and (planar) angle increments.
    fn advance(
        &mut self,
        matrix: &SquareMatrix,
        matrix_norm: f64,
        duration: f64,
    ) -> Result<(), SimError> {
        if duration <= 0.0 {
            return Ok(());
        }
        let d = self.log_mags.len();
        let cap = if d == 2 { POLAR_ANGLE_CAP } else { POLAR_LOG_CAP };
        let n_sub = if matrix_norm * duration > cap {
            (matrix_norm * duration / cap).ceil() as usize
        } else {
            1
        };
        let dt = duration / n_sub as f64;
        let factor = mat_exp(matrix, dt)?;
        // Signed logs of the factor entries, reused across substeps.
        let m = factor.as_dmatrix();
        let entry_sign: Vec<f64> = m.iter().map(|x| if *x < 0.0 { -1.0 } else { 1.0 }).collect();
        let entry_log: Vec<f64> = m.iter().map(|x| x.abs().ln()).collect();
        let mut new_signs = vec![0.0f64; d];
        let mut new_logs = vec![0.0f64; d];
        for _ in 0..n_sub {
            for i in 0..d {
                // v_i = sum_j m[i][j] u_j in signed log-sum-exp form.
                let mut peak = f64::NEG_INFINITY;
                for j in 0..d {
                    let t = entry_log[i + j * d] + self.log_mags[j];
                    if t > peak {
                        peak = t;
                    }
                }
                if peak == f64::NEG_INFINITY {
                    new_signs[i] = 1.0;
                    new_logs[i] = f64::NEG_INFINITY;
                    continue;
                }
                let mut acc = 0.0f64;
                for j in 0..d {
                    let t = entry_log[i + j * d] + self.log_mags[j];
                    if t > f64::NEG_INFINITY {
                        acc += entry_sign[i + j * d] * self.signs[j] * (t - peak).exp();
                    }
                }
                if acc == 0.0 {
                    new_signs[i] = 1.0;
                    new_logs[i] = f64::NEG_INFINITY;
                } else {
                    new_signs[i] = if acc < 0.0 { -1.0 } else { 1.0 };
                    new_logs[i] = peak + acc.abs().ln();
                }
            }
            // Renormalize to the unit sphere, accumulating the log radius.
            let top = new_logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sumsq: f64 = new_logs.iter().map(|l| (2.0 * (l - top)).exp()).sum();
            let gain = top + 0.5 * sumsq.ln();
            for i in 0..d {
                self.signs[i] = new_signs[i];
                self.log_mags[i] = new_logs[i] - gain;
            }
            self.log_radius += gain;
            if self.lifted_angle.is_some() {
                let raw = self.component(1).atan2(self.component(0));
                let theta = self.lifted_angle.as_mut().expect("checked above");
                let mut delta = raw - (*theta).rem_euclid(2.0 * std::f64::consts::PI);
                // Closest branch: increments are capped below pi/2.
                while delta > std::f64::consts::PI {
                    delta -= 2.0 * std::f64::consts::PI;
                }
                while delta < -std::f64::consts::PI {
                    delta += 2.0 * std::f64::consts::PI;
                }
                *theta += delta;
            }
        }
        Ok(())
    }
}

/// Monte Carlo estimate of the top Lyapunov exponent.
#[derive(Debug, Clone)]
pub struct LyapunovEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
    pub horizon: f64,
    pub burn_in: f64,
}

impl LyapunovEstimate {
    /// Sign verdict at `k` standard errors.
    pub fn verdict(&self, k: f64) -> Stability {
        if self.mean + k * self.stderr < 0.0 {
            Stability::Hurwitz
        } else if self.mean - k * self.stderr > 0.0 {
            Stability::Unstable
        } else {
            Stability::Marginal
        }
    }
}

/// Mean and standard error of a scalar Monte Carlo estimate.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Dense propagation `X_T = exp(A_{xi_{N+1}} a_T) ... exp(A_{xi_1} tau_1) X_0`.
pub fn propagate_dense(
    sys: &SwitchedSystem,
    path: &JumpPath,
    x0: &DVector<f64>,
) -> Result<DVector<f64>, SimError> {
    let n0 = x0.norm();
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(SimError::ZeroInitialNorm);
    }
    let lambda_t = sys.norm_bound * path.horizon();
    if lambda_t > EXP_HORIZON_LIMIT {
        return Err(SimError::DenseOverflow {
            lambda_t,
            limit: EXP_HORIZON_LIMIT,
        });
    }
    let mut x = x0.clone();
    for (state, duration) in path.flow_segments() {
        if duration == 0.0 {
            continue;
        }
        x = mat_exp(&sys.matrices[state], duration)?.mul_vec(&x);
    }
    Ok(x)
}

/// The operator mapping `X_0` to `X_T` along a path; invertible since it is
/// a product of exponentials.
#[derive(Debug, Clone)]
pub struct Propagator {
    matrix: SquareMatrix,
}

impl Propagator {
    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn norm(&self) -> f64 {
        operator_norm(&self.matrix)
    }
}

/// Full path product as a matrix, subject to the same growth guard as
/// [`propagate_dense`].
pub fn path_propagator(sys: &SwitchedSystem, path: &JumpPath) -> Result<Propagator, SimError> {
    let lambda_t = sys.norm_bound * path.horizon();
    if lambda_t > EXP_HORIZON_LIMIT {
        return Err(SimError::DenseOverflow {
            lambda_t,
            limit: EXP_HORIZON_LIMIT,
        });
    }
    let mut s = SquareMatrix::identity(sys.dim());
    for (state, duration) in path.flow_segments() {
        if duration == 0.0 {
            continue;
        }
        s = mat_exp(&sys.matrices[state], duration)?.mul(&s)?;
    }
    Ok(Propagator { matrix: s })
}

fn check_unit(u0: &DVector<f64>) -> Result<(), SimError> {
    let dev = (u0.norm() - 1.0).abs();
    if dev > 1e-12 {
        return Err(SimError::NotUnit(dev));
    }
    Ok(())
}

/// Polar propagation along a path: exact direction and log-norm of the flow,
/// with the planar lifted angle maintained continuously.
pub fn propagate_polar(
    sys: &SwitchedSystem,
    path: &JumpPath,
    u0: &DVector<f64>,
) -> Result<PolarState, SimError> {
    check_unit(u0)?;
    let mut tracker = PolarTracker::start(u0);
    for (chain_state, duration) in path.flow_segments() {
        tracker.advance(
            &sys.matrices[chain_state],
            sys.matrix_norms[chain_state],
            duration,
        )?;
    }
    Ok(tracker.into_state())
}

/// Polar propagation that also reports the log-radius at `checkpoint`.
fn polar_with_checkpoint(
    sys: &SwitchedSystem,
    path: &JumpPath,
    u0: &DVector<f64>,
    checkpoint: f64,
) -> Result<(PolarState, f64), SimError> {
    let mut tracker = PolarTracker::start(u0);
    let mut elapsed = 0.0;
    let mut at_checkpoint = if checkpoint <= 0.0 { Some(0.0) } else { None };
    for (chain_state, duration) in path.flow_segments() {
        let m = &sys.matrices[chain_state];
        let norm = sys.matrix_norms[chain_state];
        if at_checkpoint.is_none() && elapsed + duration >= checkpoint {
            let first = checkpoint - elapsed;
            tracker.advance(m, norm, first)?;
            at_checkpoint = Some(tracker.log_radius);
            tracker.advance(m, norm, duration - first)?;
        } else {
            tracker.advance(m, norm, duration)?;
        }
        elapsed += duration;
    }
    let log_at_checkpoint = at_checkpoint.unwrap_or(tracker.log_radius);
    Ok((tracker.into_state(), log_at_checkpoint))
}

/// Monte Carlo estimate of `lim (1/t) log(R_t/R_0)`.
///
/// Each replica samples its own path on `[0, burn_in + horizon]`, propagates
/// in polar form from the generic default direction, and records the
/// log-radius gain over `[burn_in, burn_in + horizon]` divided by `horizon`.
/// Replicas use independent seed streams and are reduced in replica order,
/// so the result does not depend on scheduling.
pub fn lyapunov_mc(
    sys: &SwitchedSystem,
    horizon: f64,
    burn_in: f64,
    n_reps: usize,
    seed: u64,
) -> Result<LyapunovEstimate, SimError> {
    if !(horizon > burn_in) || burn_in < 0.0 || !horizon.is_finite() {
        return Err(SimError::BadParams(format!(
            "need horizon > burn_in >= 0, got horizon {horizon}, burn_in {burn_in}"
        )));
    }
    if n_reps < 2 {
        return Err(SimError::BadParams(format!(
            "need at least 2 replicas, got {n_reps}"
        )));
    }
    let u0 = sys.default_direction();
    let total = burn_in + horizon;
    let rates = (0..n_reps)
        .into_par_iter()
        .map(|k| -> Result<f64, SimError> {
            let mut rng = stream_rng(seed, StreamDomain::Lyapunov, k as u64);
            let path = sys.sample(total, &mut rng)?;
            let (state, log_at_burn) = polar_with_checkpoint(sys, &path, &u0, burn_in)?;
            Ok((state.log_radius - log_at_burn) / horizon)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (mean, stderr) = mean_stderr(&rates);
    Ok(LyapunovEstimate {
        mean,
        stderr,
        replicas: n_reps,
        horizon,
        burn_in,
    })
}

/// Monte Carlo mean of the propagator's spectral norm `||S_T||`.
pub fn propagator_norm_mc(
    sys: &SwitchedSystem,
    horizon: f64,
    n_reps: usize,
    seed: u64,
) -> Result<NormEstimate, SimError> {
    if n_reps < 2 {
        return Err(SimError::BadParams(format!(
            "need at least 2 replicas, got {n_reps}"
        )));
    }
    let lambda_t = sys.norm_bound * horizon;
    if lambda_t > EXP_HORIZON_LIMIT {
        return Err(SimError::DenseOverflow {
            lambda_t,
            limit: EXP_HORIZON_LIMIT,
        });
    }
    let norms = (0..n_reps)
        .into_par_iter()
        .map(|k| -> Result<f64, SimError> {
            let mut rng = stream_rng(seed, StreamDomain::PropagatorNorm, k as u64);
            let path = sys.sample(horizon, &mut rng)?;
            Ok(path_propagator(sys, &path)?.norm())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (mean, stderr) = mean_stderr(&norms);
    Ok(NormEstimate {
        mean,
        stderr,
        replicas: n_reps,
    })
}

/// Check that `||X_t||` is nonincreasing along sampled paths, as it must be
/// when every matrix is normal and Hurwitz.
///
/// Each path starts from its own random unit vector and is probed at
/// `samples_per_path` uniform times with relative slack 1e-9.
pub fn monotone_norm_check(
    sys: &SwitchedSystem,
    n_paths: usize,
    horizon: f64,
    samples_per_path: usize,
    seed: u64,
) -> Result<bool, SimError> {
    for (index, m) in sys.matrices.iter().enumerate() {
        if !is_normal(m, DEFAULT_PREDICATE_TOL) {
            return Err(SimError::HypothesisViolated {
                index,
                what: "matrix is not normal".into(),
            });
        }
        if is_hurwitz(m, DEFAULT_SPECTRAL_TOL)? != Stability::Hurwitz {
            return Err(SimError::HypothesisViolated {
                index,
                what: "matrix is not Hurwitz".into(),
            });
        }
    }
    if n_paths == 0 || samples_per_path == 0 || !(horizon > 0.0) {
        return Err(SimError::BadParams(
            "need n_paths >= 1, samples_per_path >= 1, horizon > 0".into(),
        ));
    }
    let ok = (0..n_paths)
        .into_par_iter()
        .map(|k| -> Result<bool, SimError> {
            let mut rng = stream_rng(seed, StreamDomain::MonotoneCheck, k as u64);
            let x0 = DVector::from_vec(random_unit_vector(&mut rng, sys.dim()));
            let path = sys.sample(horizon, &mut rng)?;
            let mut prev_norm = x0.norm();
            let mut x_seg = x0;
            let mut seg_start = 0.0;
            let mut segs = path.flow_segments();
            let (mut state, mut dur) = segs.next().expect("paths have at least one segment");
            for j in 0..samples_per_path {
                let t = horizon * (j + 1) as f64 / samples_per_path as f64;
                while t > seg_start + dur {
                    x_seg = mat_exp(&sys.matrices[state], dur)?.mul_vec(&x_seg);
                    seg_start += dur;
                    match segs.next() {
                        Some((s, d)) => {
                            state = s;
                            dur = d;
                        }
                        // Rounding at the horizon: stay in the last segment.
                        None => break,
                    }
                }
                let x_t = mat_exp(&sys.matrices[state], t - seg_start)?.mul_vec(&x_seg);
                let norm = x_t.norm();
                if norm > prev_norm * (1.0 + 1e-9) {
                    return Ok(false);
                }
                prev_norm = norm;
            }
            Ok(true)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ok.into_iter().all(|b| b))
}

/// Trajectory CSV: columns `t,state,log_radius,theta` with one row per
/// segment boundary; `theta` is empty unless the system is planar.
pub fn write_trajectory_csv<W: std::io::Write>(
    sys: &SwitchedSystem,
    path: &JumpPath,
    u0: &DVector<f64>,
    w: &mut W,
) -> Result<(), SimError> {
    check_unit(u0)?;
    writeln!(w, "t,state,log_radius,theta").map_err(io_err)?;
    let mut tracker = PolarTracker::start(u0);
    let mut t = 0.0;
    let fmt_theta = |s: &PolarTracker| {
        s.lifted_angle
            .map(crate::fmt_float)
            .unwrap_or_default()
    };
    writeln!(
        w,
        "{},{},{},{}",
        crate::fmt_float(t),
        path.initial_state(),
        crate::fmt_float(tracker.log_radius),
        fmt_theta(&tracker)
    )
    .map_err(io_err)?;
    for (chain_state, duration) in path.flow_segments() {
        tracker.advance(
            &sys.matrices[chain_state],
            sys.matrix_norms[chain_state],
            duration,
        )?;
        t += duration;
        writeln!(
            w,
            "{},{},{},{}",
            crate::fmt_float(t),
            chain_state,
            crate::fmt_float(tracker.log_radius),
            fmt_theta(&tracker)
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn io_err(e: std::io::Error) -> SimError {
    SimError::BadParams(format!("io error: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::sample_path;
    use approx::assert_abs_diff_eq;

    fn mat(rows: &[&[f64]]) -> SquareMatrix {
        SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn planar_system(alpha: f64, c: f64, r: f64) -> SwitchedSystem {
        let a0 = mat(&[&[-alpha, c], &[0.0, -alpha]]);
        let a1 = mat(&[&[-alpha, 0.0], &[-c, -alpha]]);
        SwitchedSystem::new(vec![a0, a1], Generator::symmetric_two_state(), r).unwrap()
    }

    fn single_state_system(m: SquareMatrix, r: f64) -> SwitchedSystem {
        let g = Generator::from_rows(&[vec![0.0]]).unwrap();
        SwitchedSystem::new(vec![m], g, r).unwrap()
    }

    #[test]
    fn dense_no_jump_is_matrix_exponential() {
        let sys = single_state_system(mat(&[&[-1.0, 2.0], &[0.0, -0.5]]), 1.0);
        let path = sample_path(sys.generator(), 1.0, 0, 3.0, 1).unwrap();
        let x0 = DVector::from_vec(vec![1.0, 2.0]);
        let x = propagate_dense(&sys, &path, &x0).unwrap();
        let expected = mat_exp(&sys.matrices()[0], 3.0).unwrap().mul_vec(&x0);
        assert!((x - expected).norm() < 1e-12);
    }

    #[test]
    fn dense_composes_across_segments() {
        let sys = planar_system(1.0, 2.0, 1.0);
        let path = sample_path(sys.generator(), 1.0, 0, 5.0, 3).unwrap();
        assert!(path.jump_count() > 0);
        let x0 = DVector::from_vec(vec![0.6, -0.8]);
        let whole = propagate_dense(&sys, &path, &x0).unwrap();
        // Apply the factors one by one through single-segment systems.
        let mut x = x0;
        for (state, duration) in path.flow_segments() {
            x = mat_exp(&sys.matrices()[state], duration).unwrap().mul_vec(&x);
        }
        assert!((whole - x).norm() < 1e-12);
    }

    #[test]
    fn dense_growth_bound_holds() {
        let sys = planar_system(0.5, 3.0, 2.0);
        let lambda = sys.norm_bound();
        for seed in 0..10 {
            let path = sample_path(sys.generator(), 2.0, 0, 4.0, seed).unwrap();
            let x0 = DVector::from_vec(vec![1.0, 0.0]);
            let x = propagate_dense(&sys, &path, &x0).unwrap();
            assert!(x.norm() <= (lambda * 4.0).exp() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn dense_rejects_overflow_horizon() {
        let sys = planar_system(1.0, 2.0, 1.0);
        let path = sample_path(sys.generator(), 1.0, 0, 1000.0, 1).unwrap();
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            propagate_dense(&sys, &path, &x0),
            Err(SimError::DenseOverflow { .. })
        ));
    }

    #[test]
    fn polar_pure_decay() {
        let sys = single_state_system(
            SquareMatrix::diagonal(&[-1.0, -1.0]).unwrap(),
            1.0,
        );
        let path = sample_path(sys.generator(), 1.0, 0, 7.0, 1).unwrap();
        let u0 = DVector::from_vec(vec![0.6, 0.8]);
        let polar = propagate_polar(&sys, &path, &u0).unwrap();
        assert_abs_diff_eq!(polar.log_radius, -7.0, epsilon = 1e-12);
        assert!((polar.direction - u0).norm() < 1e-12);
    }

    #[test]
    fn polar_matches_dense_log_norm() {
        let sys = planar_system(1.0, 2.0, 1.5);
        for seed in 0..10 {
            let path = sample_path(sys.generator(), 1.5, 0, 8.0, seed).unwrap();
            let u0 = DVector::from_vec(vec![1.0, 0.0]);
            let dense = propagate_dense(&sys, &path, &u0).unwrap();
            let polar = propagate_polar(&sys, &path, &u0).unwrap();
            let lt = sys.norm_bound() * 8.0;
            assert!(
                (polar.log_radius - dense.norm().ln()).abs() <= 1e-8 * (1.0 + lt),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn polar_angle_tracks_direction_and_decreases_for_the_construction() {
        let sys = planar_system(1.0, 2.0, 1.0);
        for seed in 0..10 {
            let path = sample_path(sys.generator(), 1.0, 0, 10.0, seed).unwrap();
            let u0 = DVector::from_vec(vec![1.0, 0.0]);
            let polar = propagate_polar(&sys, &path, &u0).unwrap();
            let theta = polar.lifted_angle.unwrap();
            assert_abs_diff_eq!(theta.cos(), polar.direction[0], epsilon = 1e-9);
            assert_abs_diff_eq!(theta.sin(), polar.direction[1], epsilon = 1e-9);
            // The lift only moves clockwise for this family.
            assert!(theta <= 0.0 + 1e-12, "seed {seed}: theta {theta}");
        }
    }

    #[test]
    fn polar_rejects_non_unit_start() {
        let sys = planar_system(1.0, 2.0, 1.0);
        let path = sample_path(sys.generator(), 1.0, 0, 1.0, 1).unwrap();
        let bad = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            propagate_polar(&sys, &path, &bad),
            Err(SimError::NotUnit(_))
        ));
    }

    #[test]
    fn lyapunov_single_state_top_eigenvalue() {
        let sys = single_state_system(SquareMatrix::diagonal(&[-1.0, -3.0]).unwrap(), 1.0);
        let est = lyapunov_mc(&sys, 200.0, 20.0, 4, 0).unwrap();
        // Deterministic flow: every replica sees the same decay, dominated
        // by the top eigenvalue once the slow mode dies.
        assert!(est.stderr < 1e-12);
        assert!((est.mean - (-1.0)).abs() < 0.05, "mean {}", est.mean);
    }

    #[test]
    fn lyapunov_estimates_are_deterministic_and_seed_sensitive() {
        let sys = planar_system(1.0, 2.0, 0.5);
        let a = lyapunov_mc(&sys, 50.0, 5.0, 8, 123).unwrap();
        let b = lyapunov_mc(&sys, 50.0, 5.0, 8, 123).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr, b.stderr);
        let c = lyapunov_mc(&sys, 50.0, 5.0, 8, 124).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn lyapunov_rejects_bad_params() {
        let sys = planar_system(1.0, 2.0, 0.5);
        assert!(lyapunov_mc(&sys, 10.0, 20.0, 4, 0).is_err());
        assert!(lyapunov_mc(&sys, 10.0, 1.0, 1, 0).is_err());
    }

    #[test]
    fn propagator_norm_single_state_is_exact() {
        let m = mat(&[&[-0.3, 1.0], &[0.0, -0.7]]);
        let sys = single_state_system(m.clone(), 1.0);
        let est = propagator_norm_mc(&sys, 2.0, 4, 0).unwrap();
        let exact = operator_norm(&mat_exp(&m, 2.0).unwrap());
        assert_abs_diff_eq!(est.mean, exact, epsilon = 1e-12);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn propagator_norm_respects_growth_bound() {
        let sys = planar_system(0.5, 2.0, 1.0);
        let est = propagator_norm_mc(&sys, 3.0, 32, 9).unwrap();
        let bound = (sys.norm_bound() * 3.0).exp();
        assert!(est.mean <= bound * (1.0 + 3.0 * est.stderr));
    }

    #[test]
    fn monotone_check_accepts_normal_hurwitz_pair() {
        let a0 = mat(&[&[-1.0, 2.0], &[-2.0, -1.0]]);
        let a1 = mat(&[&[-2.0, -5.0], &[5.0, -2.0]]);
        let sys =
            SwitchedSystem::new(vec![a0, a1], Generator::symmetric_two_state(), 1.0).unwrap();
        assert!(monotone_norm_check(&sys, 20, 10.0, 100, 5).unwrap());
    }

    #[test]
    fn monotone_check_rejects_non_normal_matrix() {
        let sys = planar_system(1.0, 2.0, 1.0);
        match monotone_norm_check(&sys, 5, 5.0, 10, 0) {
            Err(SimError::HypothesisViolated { what, .. }) => {
                assert!(what.contains("normal"), "{what}");
            }
            other => panic!("expected hypothesis violation, got {other:?}"),
        }
    }

    #[test]
    fn monotone_check_rejects_unstable_matrix() {
        let a0 = mat(&[&[1.0, 0.0], &[0.0, -2.0]]); // symmetric but not Hurwitz
        let a1 = mat(&[&[-1.0, 0.0], &[0.0, -1.0]]);
        let sys =
            SwitchedSystem::new(vec![a0, a1], Generator::symmetric_two_state(), 1.0).unwrap();
        match monotone_norm_check(&sys, 5, 5.0, 10, 0) {
            Err(SimError::HypothesisViolated { index: 0, what }) => {
                assert!(what.contains("Hurwitz"), "{what}");
            }
            other => panic!("expected hypothesis violation, got {other:?}"),
        }
    }

    #[test]
    fn trajectory_csv_shape() {
        let sys = planar_system(1.0, 2.0, 1.0);
        let path = sample_path(sys.generator(), 1.0, 0, 5.0, 2).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&sys, &path, &sys.default_direction(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,state,log_radius,theta");
        let n_rows = lines.count();
        assert_eq!(n_rows, path.jump_count() + 2);
        // Planar system: theta column nonempty on every data row.
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').count(), 4);
            assert!(!line.ends_with(','));
        }
    }

    #[test]
    fn system_validation_errors() {
        let g = Generator::symmetric_two_state();
        let m = mat(&[&[-1.0, 0.0], &[0.0, -1.0]]);
        assert!(matches!(
            SwitchedSystem::new(vec![m.clone()], g.clone(), 1.0),
            Err(SimError::MatrixCount { .. })
        ));
        assert!(matches!(
            SwitchedSystem::new(vec![m.clone(), SquareMatrix::zeros(3)], g.clone(), 1.0),
            Err(SimError::MatrixDim { .. })
        ));
        assert!(matches!(
            SwitchedSystem::new(vec![m.clone(), m], g, 0.0),
            Err(SimError::BadRate(_))
        ));
    }
}
