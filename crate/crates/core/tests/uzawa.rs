use fdcrack_core::error::Block;
use fdcrack_core::manufactured::ManufacturedCase;
use fdcrack_core::problem::{run_manufactured, ElementCouple, SolverChoice};
use fdcrack_core::solver::{dual_value, uzawa_cg, Factor, UzawaConfig};

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn couple(s: &str) -> ElementCouple {
    s.parse().unwrap()
}

#[test]
fn uzawa_converges_to_monolithic_solution() {
    let case = ManufacturedCase::reference();
    let mono = run_manufactured(&case, couple("P2/P0"), 20, 0.0, &SolverChoice::Monolithic).unwrap();
    // The dual operator is poorly conditioned on cut meshes, so the squared
    // gradient ratio has to go well below 1e-12 before Λ agrees to 1e-6.
    let cfg = UzawaConfig { eps: 1e-20, ..UzawaConfig::default() };
    let uz = uzawa_cg(&mono.system, &cfg).unwrap();
    assert!(uz.converged, "{} iterations, ratio {}", uz.iterations, uz.ratio);
    let m = &mono.solution;
    assert!(rel_diff(&uz.u_plus, &m.u_plus) <= 1e-6);
    assert!(rel_diff(&uz.u_minus, &m.u_minus) <= 1e-6);
    assert!(rel_diff(&uz.lambda, &m.lambda) <= 1e-6);
}

#[test]
fn dual_functional_never_decreases() {
    let case = ManufacturedCase::reference();
    for c in ["P2/P0", "P2/P1"] {
        let run = run_manufactured(&case, couple(c), 20, 0.0, &SolverChoice::Monolithic).unwrap();
        let uz = uzawa_cg(&run.system, &UzawaConfig { eps: 1e-12, ..UzawaConfig::default() }).unwrap();
        assert!(uz.trace.len() > 2);
        for w in uz.trace.windows(2) {
            let slack = 1e-12 * w[0].dual.abs().max(1.0);
            assert!(w[1].dual >= w[0].dual - slack, "{c}: J* fell from {} to {}", w[0].dual, w[1].dual);
        }
        // The trace is recorded from the iterates themselves.
        let last = uz.trace.last().unwrap();
        assert_eq!(last.iteration, uz.iterations);
        assert_eq!(last.dual, dual_value(&run.system, &uz.u_plus, &uz.u_minus, &uz.lambda));
    }
}

#[test]
fn recurrence_gradient_matches_recomputed_residual() {
    let case = ManufacturedCase::reference();
    let run = run_manufactured(&case, couple("P2/P0"), 10, 0.0, &SolverChoice::Monolithic).unwrap();
    let sys = &run.system;
    let uz = uzawa_cg(sys, &UzawaConfig { eps: 1e-30, k_max: 7, lambda0: None }).unwrap();
    assert_eq!(uz.iterations, 7);
    // Displacements from scratch for the final multiplier.
    let fp = Factor::cholesky(&sys.a_plus, Block::DisplacementPlus).unwrap();
    let fm = Factor::cholesky(&sys.a_minus, Block::DisplacementMinus).unwrap();
    let mut rp = sys.f_plus.clone();
    sys.b_plus.tr_mul_vec_add(-1.0, &uz.lambda, &mut rp);
    let mut rm = sys.f_minus.clone();
    sys.b_minus.tr_mul_vec_add(1.0, &uz.lambda, &mut rm);
    let (up, um) = (fp.solve(&rp), fm.solve(&rm));
    assert!(rel_diff(&uz.u_plus, &up) < 1e-9);
    assert!(rel_diff(&uz.u_minus, &um) < 1e-9);
    let mut r = sys.b_plus.mul_vec(&up);
    sys.b_minus.mul_vec_add(-1.0, &um, &mut r);
    for (ri, gi) in r.iter_mut().zip(&sys.g) {
        *ri -= gi;
    }
    let g = Factor::cholesky(&sys.mass, Block::Multiplier).unwrap().solve(&r);
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in uz.gradient.iter().zip(&g) {
        assert!((a - b).abs() <= 1e-7 * scale, "{a} vs {b}");
    }
}

#[test]
fn finite_termination_on_small_multiplier_space() {
    let case = ManufacturedCase::reference();
    let run = run_manufactured(&case, couple("P2/P0"), 4, 0.0, &SolverChoice::Monolithic).unwrap();
    let m = run.system.n_multiplier();
    assert!(m > 0 && m <= 30, "m = {m}");
    let uz = uzawa_cg(&run.system, &UzawaConfig { eps: 1e-10, k_max: 500, lambda0: None }).unwrap();
    assert!(uz.converged && uz.iterations <= m, "{} iterations for m = {m}", uz.iterations);
}

#[test]
fn converged_start_stops_immediately() {
    let case = ManufacturedCase::reference();
    let run = run_manufactured(&case, couple("P2/P1"), 10, 0.0, &SolverChoice::Monolithic).unwrap();
    let cfg = UzawaConfig { eps: 1e-12, k_max: 50, lambda0: Some(run.solution.lambda.clone()) };
    let uz = uzawa_cg(&run.system, &cfg).unwrap();
    assert_eq!(uz.iterations, 0);
    assert!(uz.converged);
    assert_eq!(uz.trace.len(), 1);
}

#[test]
fn stabilized_system_is_not_accepted() {
    let case = ManufacturedCase::reference();
    let run = run_manufactured(&case, couple("P1/P0"), 6, 0.03, &SolverChoice::Monolithic).unwrap();
    assert!(uzawa_cg(&run.system, &UzawaConfig::default()).is_err());
}
