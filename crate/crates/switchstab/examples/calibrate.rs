use std::time::Instant;

use switchstab::construct::{block_lyapunov, example_fast_only, multi_transition, planar_pair};
use switchstab::ctmc::Generator;
use switchstab::planar::{g_max, lyapunov_analytic, PlanarParams};
use switchstab::sim::{lyapunov_mc, SwitchedSystem};

fn main() {
    let t0 = Instant::now();
    let (_lam_star, g_star) = g_max(1e-8).unwrap();
    let alpha = 0.5 * g_star;
    let params = PlanarParams::new(alpha, 1.0).unwrap();
    let w = switchstab::planar::find_window(&params, 1e-8).unwrap().unwrap();
    let (a0, a1) = planar_pair(alpha, 1.0).unwrap();
    for r in [0.5 * w.a, w.a, w.r_star, w.b, 2.0 * w.b] {
        let sys = SwitchedSystem::new(
            vec![a0.clone(), a1.clone()],
            Generator::symmetric_two_state(),
            r,
        )
        .unwrap();
        let t = Instant::now();
        let est = lyapunov_mc(&sys, 2000.0, 200.0, 200, 42).unwrap();
        let analytic = lyapunov_analytic(&params, r, 1e-10).unwrap();
        println!(
            "C3 r={r:9.5}: |mc-analytic|={:.3e} vs tol={:.3e}  [{:?}]",
            (est.mean - analytic).abs(),
            3.0 * est.stderr + 1e-6,
            t.elapsed()
        );
    }
    let (m0, m1, spec) = multi_transition(3, alpha, 1.0, None, 1e-8, None).unwrap();
    let r1 = spec.blocks[0].r_star;
    let r2 = spec.blocks[1].r_star;
    let b1 = spec.blocks[0].b;
    for (r, horizon) in [(r1, 2000.0), (r2, 20000.0), (2.0 * b1, 20000.0)] {
        let sys = SwitchedSystem::new(
            vec![m0.clone(), m1.clone()],
            Generator::symmetric_two_state(),
            r,
        )
        .unwrap();
        let t = Instant::now();
        let est = lyapunov_mc(&sys, horizon, horizon / 10.0, 200, 42).unwrap();
        let analytic = block_lyapunov(&spec, r, 1e-10).unwrap();
        println!(
            "C5 r={r:9.5} T={horizon}: |mc-analytic|={:.3e} vs tol={:.3e}  [{:?}]",
            (est.mean - analytic).abs(),
            3.0 * est.stderr + 1e-6,
            t.elapsed()
        );
    }
    // C8 commuting pair
    let d0 = switchstab::SquareMatrix::diagonal(&[1.0, -2.0]).unwrap();
    let d1 = switchstab::SquareMatrix::diagonal(&[-2.0, 1.0]).unwrap();
    for r in [0.1, 1.0, 10.0] {
        let sys = SwitchedSystem::new(
            vec![d0.clone(), d1.clone()],
            Generator::symmetric_two_state(),
            r,
        )
        .unwrap();
        let t = Instant::now();
        let est = lyapunov_mc(&sys, 1000.0, 100.0, 200, 42).unwrap();
        println!(
            "C8 r={r:5}: mean+3se={:+.4} (must be < 0)  [{:?}]",
            est.mean + 3.0 * est.stderr,
            t.elapsed()
        );
    }
    let (f0, f1, q) = example_fast_only();
    let t = Instant::now();
    let sys = SwitchedSystem::new(vec![f0, f1], q, 100.0).unwrap();
    let est = lyapunov_mc(&sys, 2000.0, 200.0, 200, 42).unwrap();
    println!("C6 fast side: mean+3se={:+.4}  [{:?}]", est.mean + 3.0 * est.stderr, t.elapsed());
    println!("total {:?}", t0.elapsed());
}
