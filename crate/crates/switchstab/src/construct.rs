//! Generators for the named example systems: the fast-switching-only pair,
//! the planar one-transition family, and the block-diagonal systems whose
//! stability flips any prescribed number of times as the rate varies.

use serde::Serialize;
use thiserror::Error;

use crate::ctmc::Generator;
use crate::linalg::SquareMatrix;
use crate::planar::{find_window, lyapunov_analytic, PlanarError, PlanarParams};

/// Smallest coupling allowed in a block construction; deeper scaling would
/// drown in rounding.
const MIN_COUPLING: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("parameters must be positive and finite: {0}")]
    BadParams(String),
    #[error("no instability window: alpha = {alpha} is at or above c * sup G = {ceiling}")]
    NoWindow { alpha: f64, ceiling: f64 },
    #[error("scale factor N = {n} must exceed b1/a1 = {required}")]
    ScaleTooSmall { n: f64, required: f64 },
    #[error("block {index} coupling c = {c:e} underflows the {MIN_COUPLING:e} floor; reduce k or N")]
    ScaleUnderflow { index: usize, c: f64 },
    #[error(transparent)]
    Planar(#[from] PlanarError),
}

/// The pair whose members are both unstable while their average is Hurwitz,
/// with the symmetric two-state generator.
pub fn example_fast_only() -> (SquareMatrix, SquareMatrix, Generator) {
    let a0 = SquareMatrix::from_rows(&[vec![1.0, 4.0], vec![0.0, -2.0]])
        .expect("static matrix is valid");
    let a1 = SquareMatrix::from_rows(&[vec![-2.0, 0.0], vec![0.0, 1.0]])
        .expect("static matrix is valid");
    (a0, a1, Generator::symmetric_two_state())
}

/// The one-transition pair for positive `alpha` and `c`.
pub fn planar_pair(alpha: f64, c: f64) -> Result<(SquareMatrix, SquareMatrix), ConstructError> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(ConstructError::BadParams(format!("coupling c = {c}")));
    }
    planar_pair_relaxed(alpha, c)
}

/// As [`planar_pair`] but accepting the degenerate `c = 0`, where both
/// matrices collapse to `-alpha I`.
pub fn planar_pair_relaxed(
    alpha: f64,
    c: f64,
) -> Result<(SquareMatrix, SquareMatrix), ConstructError> {
    if !(alpha > 0.0) || !alpha.is_finite() || !(c >= 0.0) || !c.is_finite() {
        return Err(ConstructError::BadParams(format!(
            "alpha = {alpha}, c = {c}"
        )));
    }
    let a0 = SquareMatrix::from_rows(&[vec![-alpha, c], vec![0.0, -alpha]])
        .expect("entries are finite");
    let a1 = SquareMatrix::from_rows(&[vec![-alpha, 0.0], vec![-c, -alpha]])
        .expect("entries are finite");
    Ok((a0, a1))
}

/// Parameters of one diagonal block together with its instability window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlockParams {
    pub alpha: f64,
    pub c: f64,
    pub r_star: f64,
    pub a: f64,
    pub b: f64,
}

/// A `2k x 2k` block construction: block `i` is the planar pair scaled by
/// `N^-(i-1)`, so its window sits a factor `N` below the previous one.
#[derive(Debug, Clone, Serialize)]
pub struct MultiSystemSpec {
    pub k: usize,
    pub n_scale: f64,
    pub blocks: Vec<BlockParams>,
}

impl MultiSystemSpec {
    pub fn block_params(&self, i: usize) -> PlanarParams {
        PlanarParams::new(self.blocks[i].alpha, self.blocks[i].c)
            .expect("block parameters are positive by construction")
    }
}

/// Window report wire form: `{"windows": [{"a":..,"b":..,"r_star":..}], "N":..}`.
#[derive(Debug, Serialize)]
pub struct WindowsReport {
    pub windows: Vec<WindowEntry>,
    #[serde(rename = "N")]
    pub n_scale: f64,
}

#[derive(Debug, Serialize)]
pub struct WindowEntry {
    pub a: f64,
    pub b: f64,
    pub r_star: f64,
}

impl From<&MultiSystemSpec> for WindowsReport {
    fn from(spec: &MultiSystemSpec) -> Self {
        WindowsReport {
            windows: spec
                .blocks
                .iter()
                .map(|b| WindowEntry {
                    a: b.a,
                    b: b.b,
                    r_star: b.r_star,
                })
                .collect(),
            n_scale: spec.n_scale,
        }
    }
}

/// Build the `2k x 2k` block-diagonal pair with `k` disjoint instability
/// windows.
///
/// The base window `(r_1, a_1, b_1)` is located numerically from
/// `(alpha_1, c_1)` unless supplied; the scale defaults to `N = 2 b_1/a_1`,
/// which satisfies the disjointness requirement `N > b_1/a_1` with margin.
pub fn multi_transition(
    k: usize,
    alpha1: f64,
    c1: f64,
    n_scale: Option<f64>,
    tol: f64,
    base_window: Option<(f64, f64, f64)>,
) -> Result<(SquareMatrix, SquareMatrix, MultiSystemSpec), ConstructError> {
    if k == 0 {
        return Err(ConstructError::BadParams("k must be at least 1".into()));
    }
    let params = PlanarParams::new(alpha1, c1)
        .map_err(|e| ConstructError::BadParams(e.to_string()))?;
    let (r1, a1, b1) = match base_window {
        Some((r, a, b)) => {
            if !(0.0 < a && a < r && r < b) {
                return Err(ConstructError::BadParams(format!(
                    "window override must satisfy 0 < a < r < b, got ({r}, {a}, {b})"
                )));
            }
            (r, a, b)
        }
        None => match find_window(&params, tol)? {
            Some(w) => (w.r_star, w.a, w.b),
            None => {
                let (_, g_star) = crate::planar::g_max(tol)?;
                return Err(ConstructError::NoWindow {
                    alpha: alpha1,
                    ceiling: c1 * g_star,
                });
            }
        },
    };
    let required = b1 / a1;
    let n = n_scale.unwrap_or(2.0 * required);
    if !(n > required) || !n.is_finite() {
        return Err(ConstructError::ScaleTooSmall { n, required });
    }

    let mut blocks = Vec::with_capacity(k);
    let mut scale = 1.0;
    for i in 0..k {
        let c = c1 * scale;
        if c < MIN_COUPLING {
            return Err(ConstructError::ScaleUnderflow { index: i, c });
        }
        blocks.push(BlockParams {
            alpha: alpha1 * scale,
            c,
            r_star: r1 * scale,
            a: a1 * scale,
            b: b1 * scale,
        });
        scale /= n;
    }

    let dim = 2 * k;
    let mut rows0 = vec![vec![0.0; dim]; dim];
    let mut rows1 = vec![vec![0.0; dim]; dim];
    for (i, blk) in blocks.iter().enumerate() {
        let (b0, b1m) = planar_pair(blk.alpha, blk.c)?;
        for r in 0..2 {
            for c in 0..2 {
                rows0[2 * i + r][2 * i + c] = b0.entry(r, c);
                rows1[2 * i + r][2 * i + c] = b1m.entry(r, c);
            }
        }
    }
    let a0 = SquareMatrix::from_rows(&rows0).expect("entries are finite");
    let a1m = SquareMatrix::from_rows(&rows1).expect("entries are finite");
    Ok((
        a0,
        a1m,
        MultiSystemSpec {
            k,
            n_scale: n,
            blocks,
        },
    ))
}

/// Top Lyapunov exponent of the block system at rate `r`: the blocks are
/// uncoupled, so it is the max of the per-block analytic exponents.
pub fn block_lyapunov(spec: &MultiSystemSpec, r: f64, tol: f64) -> Result<f64, ConstructError> {
    let mut best = f64::NEG_INFINITY;
    for i in 0..spec.k {
        let e = lyapunov_analytic(&spec.block_params(i), r, tol)?;
        best = best.max(e);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{
        average_matrix, eigenvalues, is_hurwitz, Stability, DEFAULT_SPECTRAL_TOL,
    };

    #[test]
    fn fast_only_example_properties() {
        let (a0, a1, q) = example_fast_only();
        assert_eq!(is_hurwitz(&a0, DEFAULT_SPECTRAL_TOL).unwrap(), Stability::Unstable);
        assert_eq!(is_hurwitz(&a1, DEFAULT_SPECTRAL_TOL).unwrap(), Stability::Unstable);
        let avg = average_matrix(&[a0, a1], &[0.5, 0.5]).unwrap();
        assert_eq!(
            avg,
            SquareMatrix::from_rows(&[vec![-0.5, 2.0], vec![0.0, -0.5]]).unwrap()
        );
        assert_eq!(is_hurwitz(&avg, DEFAULT_SPECTRAL_TOL).unwrap(), Stability::Hurwitz);
        assert_eq!(q.n_states(), 2);
    }

    #[test]
    fn planar_pair_spectra() {
        let (alpha, c) = (1.0, 2.0);
        let (a0, a1) = planar_pair(alpha, c).unwrap();
        for m in [&a0, &a1] {
            let s = eigenvalues(m).unwrap();
            for z in s.eigenvalues() {
                assert_eq!(*z, nalgebra::Complex::new(-alpha, 0.0));
            }
            assert_eq!(is_hurwitz(m, DEFAULT_SPECTRAL_TOL).unwrap(), Stability::Hurwitz);
        }
        let avg = average_matrix(&[a0, a1], &[0.5, 0.5]).unwrap();
        let s = eigenvalues(&avg).unwrap();
        let eig = s.eigenvalues();
        assert!((eig[0].re + alpha).abs() < 1e-14);
        assert!((eig[0].im.abs() - 0.5 * c).abs() < 1e-14);
    }

    #[test]
    fn degenerate_coupling_needs_the_relaxed_constructor() {
        assert!(planar_pair(1.0, 0.0).is_err());
        let (a0, a1) = planar_pair_relaxed(1.0, 0.0).unwrap();
        assert_eq!(a0, a1);
        assert_eq!(a0, SquareMatrix::diagonal(&[-1.0, -1.0]).unwrap());
    }

    #[test]
    fn multi_with_k1_reduces_to_planar_pair() {
        let (a0, a1, spec) =
            multi_transition(1, 0.09, 1.0, None, 1e-8, Some((0.25, 0.03, 1.2))).unwrap();
        let (p0, p1) = planar_pair(0.09, 1.0).unwrap();
        assert_eq!(a0, p0);
        assert_eq!(a1, p1);
        assert_eq!(spec.k, 1);
    }

    #[test]
    fn multi_windows_disjoint_and_blocks_exact() {
        let (a0, a1, spec) =
            multi_transition(3, 0.09, 1.0, None, 1e-8, Some((0.25, 0.03, 1.2))).unwrap();
        assert_eq!(a0.dim(), 6);
        for i in 1..spec.k {
            assert!(spec.blocks[i].a < spec.blocks[i].b);
            assert!(
                spec.blocks[i].b < spec.blocks[i - 1].a,
                "windows overlap at block {i}"
            );
        }
        // Diagonal blocks match the scaled pairs exactly; off-blocks are zero.
        for (i, blk) in spec.blocks.iter().enumerate() {
            let (p0, p1) = planar_pair(blk.alpha, blk.c).unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    assert_eq!(a0.entry(2 * i + r, 2 * i + c), p0.entry(r, c));
                    assert_eq!(a1.entry(2 * i + r, 2 * i + c), p1.entry(r, c));
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                if i / 2 != j / 2 {
                    assert_eq!(a0.entry(i, j), 0.0);
                    assert_eq!(a1.entry(i, j), 0.0);
                }
            }
        }
        assert_eq!(is_hurwitz(&a0, DEFAULT_SPECTRAL_TOL).unwrap(), Stability::Hurwitz);
        assert_eq!(is_hurwitz(&a1, DEFAULT_SPECTRAL_TOL).unwrap(), Stability::Hurwitz);
        let avg = average_matrix(&[a0, a1], &[0.5, 0.5]).unwrap();
        assert_eq!(is_hurwitz(&avg, DEFAULT_SPECTRAL_TOL).unwrap(), Stability::Hurwitz);
    }

    #[test]
    fn multi_rejects_small_scale_and_underflow() {
        let window = Some((0.25, 0.03, 1.2));
        assert!(matches!(
            multi_transition(2, 0.09, 1.0, Some(10.0), 1e-8, window),
            Err(ConstructError::ScaleTooSmall { .. })
        ));
        assert!(matches!(
            multi_transition(5, 0.09, 1.0, Some(100.0), 1e-8, window),
            Err(ConstructError::ScaleUnderflow { .. })
        ));
    }

    #[test]
    fn multi_rejects_dominated_alpha() {
        match multi_transition(2, 50.0, 1.0, None, 1e-8, None) {
            Err(ConstructError::NoWindow { ceiling, .. }) => {
                assert!(ceiling < 1.0, "sup G should be well below 1, got {ceiling}")
            }
            other => panic!("expected NoWindow, got {other:?}"),
        }
    }

    #[test]
    fn block_lyapunov_k1_equals_planar_analytic() {
        let (_, _, spec) =
            multi_transition(1, 0.09, 1.0, None, 1e-8, Some((0.25, 0.03, 1.2))).unwrap();
        let direct =
            lyapunov_analytic(&PlanarParams::new(0.09, 1.0).unwrap(), 0.25, 1e-10).unwrap();
        let block = block_lyapunov(&spec, 0.25, 1e-10).unwrap();
        assert_eq!(direct, block);
    }

    #[test]
    fn windows_report_serialization() {
        let (_, _, spec) =
            multi_transition(2, 0.09, 1.0, None, 1e-8, Some((0.25, 0.03, 1.2))).unwrap();
        let report = WindowsReport::from(&spec);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"windows\""));
        assert!(json.contains("\"N\""));
        assert!(json.contains("\"r_star\""));
    }
}
