//! switchstab: simulation and stability analysis of randomly switched
//! linear ODEs `x' = A_{I_t} x`, where `I_t` is a finite-state Markov chain
//! with generator `r Q`.
//!
//! The crate estimates top Lyapunov exponents by Monte Carlo over exact
//! piecewise flows, evaluates the closed-form angular invariant density of
//! the planar one-transition family, locates instability windows in the
//! switching rate, and builds block systems with any prescribed number of
//! stability phase transitions.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --release --example instability_window
//! cargo run --release --example rate_scan
//! ```
//!
//! or the `switchstab` binary, which exposes the same capabilities as
//! subcommands (`check`, `lyapunov`, `scan`, `window`, `construct`,
//! `density`, `kurtz`).

pub mod cli;
pub mod construct;
pub mod ctmc;
pub mod linalg;
pub mod planar;
pub mod quad;
pub mod rngutil;
pub mod sim;

pub use construct::{example_fast_only, multi_transition, planar_pair, MultiSystemSpec};
pub use ctmc::{occupation_fractions, sample_path, stationary, Generator, JumpPath, StationaryDist};
pub use linalg::{
    average_matrix, commute, eigenvalues, is_hurwitz, is_normal, mat_exp, operator_norm,
    Spectrum, SquareMatrix, Stability,
};
pub use planar::{
    classify, find_window, g_eval, h_deriv, h_eval, lyapunov_analytic, AngularDensity,
    InstabilityWindow, PlanarParams, StabilityVerdict, Verdict,
};
pub use sim::{
    lyapunov_mc, monotone_norm_check, propagate_dense, propagate_polar, propagator_norm_mc,
    LyapunovEstimate, PolarState, Propagator, SwitchedSystem,
};

/// Render a float with 17 significant digits: enough for a lossless
/// f64 round-trip through text.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::fmt_float;

    #[test]
    fn float_formatting_round_trips() {
        for x in [
            0.1,
            -1.0 / 3.0,
            std::f64::consts::PI,
            6.02e23,
            -2.2250738585072014e-308,
        ] {
            let back: f64 = fmt_float(x).parse().unwrap();
            assert_eq!(back, x, "{x} -> {}", fmt_float(x));
        }
    }
}
