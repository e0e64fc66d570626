//! Acceptance gate: one line per criterion, non-zero exit if any fails.

use std::time::Instant;

use rand::Rng;
use symrec::bounds::{
    bound_terms, evaluate_formula, evaluate_matrix_bound, instance_errors, matrix_terms, variance_terms,
    imbalance_operator, BoundKind, FluctuationStrategy, MatrixBoundKind,
};
use symrec::hp::{concentration_sweep, foggy_mirror_experiment, mean_law, HpConfig, PhiSelector, PsiSelector};
use symrec::instances::{random_small_instance, swap_instance, two_charge_instance, QubitShape, StateKind, ViolationFamily};
use symrec::linalg::{
    diag_real, random_density, random_hermitian, random_pure_state, rng_from_seed, unitary_exp,
    CMat,
};
use symrec::metrics::{
    avg_from_entanglement_fidelity, entanglement_fidelity_sq, minimal_variance_reference, mvd_tradeoff_check, qfi,
    qfi_finite_difference, variance,
};
use symrec::qec::{audit_code, dicke_code, dicke_family_parameters};
use symrec::recovery::{decoupling_residuals, eigen_decomposition, optimize_recovery, CodeErrorOptions, RecoveryMode, SeesawOptions};
use symrec::showcase::verify_alleviation;
use symrec::symmetry::conservation_check;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn alleviation() -> Outcome {
    let start = Instant::now();
    let mut worst_err: f64 = 0.0;
    let mut problems = Vec::new();
    for m in [1u32, 2, 4, 8, 16, 32] {
        let r = verify_alleviation(m, None).map_err(err)?;
        worst_err = worst_err.max((r.recovery_error - r.expected_error).abs());
        if (r.recovery_error - r.expected_error).abs() > 1e-9 {
            problems.push(format!("M={m} error {}", r.recovery_error));
        }
        if (r.a_single - 0.5).abs() > 1e-12 || (r.delta_plus - 1.0).abs() > 1e-12 {
            problems.push(format!("M={m} A={} Δ+={}", r.a_single, r.delta_plus));
        }
        if !r.siq1_holds() {
            problems.push(format!("M={m} SIQ1 {} > {}", r.siq1, r.recovery_error));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 60.0 {
        problems.push(format!("runtime {secs:.1}s"));
    }
    check(problems.is_empty(), format!("max |error − 1/√(2M+1)| = {worst_err:.2e}, {secs:.2}s {}", problems.join("; ")))
}

fn lemma1() -> Outcome {
    let opts = SeesawOptions::default();
    let mut violations = 0;
    let mut margin = f64::INFINITY;
    for seed in 0..100 {
        let inst = random_small_instance(1000 + seed).map_err(err)?;
        let up = optimize_recovery(&inst, RecoveryMode::WithRb, &opts).map_err(err)?.achieved_error;
        let dec = eigen_decomposition(&inst.rho_a(), 1e-12).map_err(err)?;
        let r = decoupling_residuals(&inst, &dec).map_err(err)?;
        let slack = 4.0 * up * up + 1e-6 - r.residual_to_average;
        margin = margin.min(slack);
        if slack < 0.0 {
            violations += 1;
        }
    }
    check(violations == 0, format!("100 instances, violations={violations}, min slack {margin:.3e}"))
}

fn soundness() -> Outcome {
    let opts = SeesawOptions::default();
    let mut violations = Vec::new();
    let mut closest = f64::NEG_INFINITY;
    for seed in 0..200 {
        let inst = random_small_instance(seed).map_err(err)?;
        let terms = bound_terms(&inst, FluctuationStrategy::Exact).map_err(err)?;
        let errs = instance_errors(&inst, &terms, &opts).map_err(err)?;
        for kind in BoundKind::INSTANCE {
            let lhs = terms.lhs(kind).map_err(err)?;
            let up = if kind.targets_delta_tilde() { errs.delta_tilde.upper } else { errs.delta.upper };
            closest = closest.max(lhs - up);
            if lhs > up + 1e-6 {
                violations.push(format!("seed {seed} {kind}"));
            }
        }
    }
    check(
        violations.is_empty(),
        format!("200 instances × 7 kinds, violations={}, max(lhs − δ_up) = {closest:.3e} {}", violations.len(), violations.join(",")),
    )
}

fn violated_symmetry() -> Outcome {
    let opts = SeesawOptions::default();
    let thetas = [0.0, 1e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3];
    let mut problems = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    let mut points = 0;
    for seed in 0..10u64 {
        let shape = QubitShape { qa: 1 + (seed % 2) as usize, qb: 1 + (seed / 2 % 2) as usize, l: 1 };
        let fam = ViolationFamily::new(500 + seed, shape, StateKind::Random).map_err(err)?;
        for &theta in &thetas {
            let inst = fam.at(theta).map_err(err)?;
            let terms = bound_terms(&inst, FluctuationStrategy::Exact).map_err(err)?;
            let up = optimize_recovery(&inst, RecoveryMode::WithRb, &opts).map_err(err)?.achieved_error;
            let dz = terms.d_z;
            points += 1;
            for (v, c) in [
                (BoundKind::Siqv1, BoundKind::Siq1),
                (BoundKind::Siqv2, BoundKind::Siq2),
                (BoundKind::Rsiqv1, BoundKind::Rsiq1),
                (BoundKind::Rsiqv2, BoundKind::Rsiq2),
            ] {
                let lhs = terms.lhs(v).map_err(err)?;
                if lhs > up + 1e-6 {
                    problems.push(format!("seed {seed} θ={theta} {v}: {lhs} > {up}"));
                }
                if matches!(v, BoundKind::Siqv1 | BoundKind::Siqv2) {
                    let mut inputs = terms.inputs(c).map_err(err)?;
                    inputs.insert("d_z".into(), 0.0);
                    let conserved_form = evaluate_formula(c, &inputs).map_err(err)?;
                    let diff = (conserved_form - lhs).abs();
                    if dz > 0.0 {
                        worst_ratio = worst_ratio.max(diff / dz);
                    }
                    if diff > 10.0 * dz + 1e-12 {
                        problems.push(format!("seed {seed} θ={theta} {v}: |Δ| = {diff:.3e} > 10·𝒟_Z = {:.3e}", 10.0 * dz));
                    }
                }
            }
        }
    }
    check(
        problems.is_empty(),
        format!("{points} points, max |SIQ-v − SIQ|/𝒟_Z = {worst_ratio:.3} {}", problems.join("; ")),
    )
}

fn matrix_bounds() -> Outcome {
    let opts = SeesawOptions::default();
    let mut min_margin = f64::INFINITY;
    let mut problems = Vec::new();
    for seed in 0..50u64 {
        for inst in [two_charge_instance(seed, 1 + (seed % 3) as usize).map_err(err)?, swap_instance(seed).map_err(err)?] {
            let up = optimize_recovery(&inst, RecoveryMode::WithRb, &opts).map_err(err)?.achieved_error;
            let mut decs = vec![eigen_decomposition(&inst.rho_a(), 1e-12).map_err(err)?];
            for ch in 0..inst.charges.len() {
                let fl = symrec::bounds::dynamical_fluctuation_for(&inst, ch, FluctuationStrategy::Exact).map_err(err)?;
                decs.push(fl.witness);
                decs.push(fl.two_term_witness);
            }
            for dec in &decs {
                let t = matrix_terms(&inst, dec).map_err(err)?;
                for kind in [MatrixBoundKind::Msiq1, MatrixBoundKind::Msiq2] {
                    let r = evaluate_matrix_bound(kind, &t, up);
                    min_margin = min_margin.min(r.min_eigenvalue / r.scale);
                    if r.min_eigenvalue < -1e-8 * r.scale {
                        problems.push(format!("seed {seed} {}: {:.3e}", kind.name(), r.min_eigenvalue));
                    }
                }
            }
        }
    }
    let mut max_gap: f64 = 0.0;
    for seed in 0..20u64 {
        let inst = random_small_instance(seed).map_err(err)?;
        let terms = bound_terms(&inst, FluctuationStrategy::Exact).map_err(err)?;
        let g = imbalance_operator(&inst, inst.charge()).map_err(err)?;
        let dec = &terms.fluctuation.witness;
        let (av, s) = variance_terms(&g, dec);
        let t = matrix_terms(&inst, dec).map_err(err)?;
        let b = s / 2.0 + 8.0 * (terms.var_a + terms.var_a_out);
        for (x, y) in [(t.a_var[(0, 0)], av), (t.b[(0, 0)], b), (t.f[(0, 0)], terms.f), (t.f_f[(0, 0)], terms.f_f)] {
            max_gap = max_gap.max((x - y).abs());
        }
    }
    if max_gap > 1e-10 {
        problems.push(format!("1×1 case differs from scalar terms by {max_gap:.3e}"));
    }
    check(
        problems.is_empty(),
        format!("100 instances, min normalised eigenvalue {min_margin:.3e}, 1-generator gap {max_gap:.1e} {}", problems.join("; ")),
    )
}

fn metrics_oracles() -> Outcome {
    let mut rng = rng_from_seed(77);
    let mut problems = Vec::new();
    let mut fd_gap: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.random_range(2..=4);
        let rank = rng.random_range(1..=d);
        let rho = random_density(&mut rng, d, rank);
        let x = random_hermitian(&mut rng, d);
        let exact = qfi(&rho, &x).map_err(err)?;
        let fd = qfi_finite_difference(&rho, &x, 1e-4).map_err(err)?;
        fd_gap = fd_gap.max((exact - fd).abs());
    }
    if fd_gap > 1e-4 {
        problems.push(format!("finite difference gap {fd_gap:.3e}"));
    }
    let mut pure_gap: f64 = 0.0;
    let mut mvr_gap: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.random_range(2..=4);
        let v = random_pure_state(&mut rng, d);
        let rho = &v * v.adjoint();
        let x = random_hermitian(&mut rng, d);
        pure_gap = pure_gap.max((qfi(&rho, &x).map_err(err)? - 4.0 * variance(&rho, &x)).abs());
        let mixed = random_density(&mut rng, d, d);
        let r = minimal_variance_reference(&mixed, &x).map_err(err)?;
        mvr_gap = mvr_gap.max((4.0 * r.total_variance(&x) - qfi(&mixed, &x).map_err(err)?).abs());
    }
    if pure_gap > 1e-9 {
        problems.push(format!("pure-state gap {pure_gap:.3e}"));
    }
    if mvr_gap > 1e-8 {
        problems.push(format!("minimal-variance reference gap {mvr_gap:.3e}"));
    }
    let mut rcr2 = 0;
    let mut nrc = 0;
    for i in 0..10_000 {
        let d = rng.random_range(2..=3);
        let rank = rng.random_range(1..=d);
        let rho = random_density(&mut rng, d, rank);
        let x = random_hermitian(&mut rng, d);
        let sigma = if i % 2 == 0 {
            let rank = rng.random_range(1..=d);
            random_density(&mut rng, d, rank)
        } else {
            let h = random_hermitian(&mut rng, d);
            let u = unitary_exp(&h, rng.random_range(0.0..0.2)).map_err(err)?;
            &u * &rho * u.adjoint()
        };
        let t = mvd_tradeoff_check(&rho, &sigma, &x).map_err(err)?;
        if !t.rcr2_holds(1e-10) {
            rcr2 += 1;
        }
        if !t.nrc_holds(1e-10) {
            nrc += 1;
        }
    }
    if rcr2 + nrc > 0 {
        problems.push(format!("tradeoff violations rcr2={rcr2} nrc={nrc}"));
    }
    check(
        problems.is_empty(),
        format!(
            "QFI fd gap {fd_gap:.1e}, pure F−4V {pure_gap:.1e}, reference {mvr_gap:.1e}, 10⁴ pairs rcr2={rcr2} nrc={nrc} {}",
            problems.join("; ")
        ),
    )
}

fn hp_statistics() -> Outcome {
    let cfg = HpConfig { samples: 500, seed: 11, ..HpConfig::new(1, 2, 1) };
    let m = mean_law(&cfg, &diag_real(&[0.0, 1.0])).map_err(err)?;
    let cfg = HpConfig { s: 1, samples: 1000, seed: 5, phi: PhiSelector::SectorTruncated, ..HpConfig::new(1, 3, 2) };
    let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.1).collect();
    let tails = concentration_sweep(&cfg, &CMat::identity(2, 2).scale(0.5), &grid).map_err(err)?;
    let bad = tails.iter().filter(|r| !r.consistent(3.0)).count();
    let z = (m.mean - m.predicted).abs() / m.std_err;
    check(
        m.within(3.0) && bad == 0,
        format!(
            "mean {:.5} vs {:.5} ({z:.2} SE, 500 samples); tails above bound at {bad}/{} grid points (1000 samples)",
            m.mean,
            m.predicted,
            tails.len()
        ),
    )
}

fn foggy_mirror() -> Outcome {
    let cfg = HpConfig { psi: PsiSelector::EigenMixture(vec![(0, 0.5), (1, 0.5)]), seed: 3, ..HpConfig::new(1, 3, 1) };
    let rows = foggy_mirror_experiment(&cfg, &[1, 2, 3], &SeesawOptions::default()).map_err(err)?;
    let mut desc = Vec::new();
    let mut ok = true;
    for r in &rows {
        ok &= r.bound_holds() && (r.base_bound - 0.05).abs() < 1e-12 && r.term_bounds_hold();
        desc.push(format!("l={} bound {:.4} ≤ δ_up {:.4} (ε̂={:.3})", r.l, r.hp.base, r.delta_upper, r.epsilon_hat));
    }
    let same = rows.windows(2).all(|w| w[0].base_bound == w[1].base_bound);
    check(ok && same, format!("base value 0.05 at every l; {}", desc.join(", ")))
}

fn eastin_knill() -> Outcome {
    let v = symrec::bounds::ek17(1.0, 1.0, 3.0);
    let mut ok = (v - 1.0 / 13.0).abs() < 1e-15;
    let mut worst = f64::INFINITY;
    for a in dicke_family_parameters() {
        let r = audit_code(&dicke_code(a).map_err(err)?, &CodeErrorOptions::default()).map_err(err)?;
        ok &= r.applicable && r.consistent();
        worst = worst.min(r.delta_c_estimate - r.ek17);
    }
    check(ok, format!("EK17(1,1,3) = {v:.6}; {} codes, min(δ_C est − bound) = {worst:.4}", dicke_family_parameters().len()))
}

fn avg_ent() -> Outcome {
    let mut rng = rng_from_seed(2024);
    let n = 100_000;
    let mut out = Vec::new();
    let mut ok = true;
    for p in [0.0, 0.1, 0.25, 0.4, 0.5] {
        let z = diag_real(&[1.0, -1.0]);
        let kraus = vec![CMat::identity(2, 2).scale((1.0 - p as f64).sqrt()), z.scale((p as f64).sqrt())];
        let f_ent = entanglement_fidelity_sq(&kraus).map_err(err)?;
        let predicted = avg_from_entanglement_fidelity(f_ent, 2).map_err(err)?;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let v = random_pure_state(&mut rng, 2);
            let rho = &v * v.adjoint();
            let mut out_state = CMat::zeros(2, 2);
            for k in &kraus {
                out_state += k * &rho * k.adjoint();
            }
            let f = (v.adjoint() * out_state * &v)[(0, 0)].re;
            sum += f;
            sum2 += f * f;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        let within = (mean - predicted).abs() <= 3.0 * se.max(1e-15);
        ok &= within;
        out.push(format!("p={p}: {mean:.5}±{se:.1e} vs {predicted:.5}"));
    }
    check(ok, out.join(", "))
}

fn conservation_of_generators() -> Result<(), String> {
    for seed in 0..5 {
        let inst = random_small_instance(seed).map_err(err)?;
        if conservation_check(&inst.u, inst.charge()).map_err(err)?.operator_norm > 1e-10 {
            return Err(format!("seed {seed} generator not conserved"));
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = conservation_of_generators() {
        println!("FAIL precondition: {e}");
        std::process::exit(1);
    }
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("alleviation golden values", alleviation),
        ("small-correlation lemma", lemma1),
        ("main-bound soundness sweep", soundness),
        ("violated-symmetry continuity", violated_symmetry),
        ("matrix bounds", matrix_bounds),
        ("metrics oracles", metrics_oracles),
        ("HP mean law and concentration", hp_statistics),
        ("foggy mirror", foggy_mirror),
        ("Eastin-Knill bound and code audit", eastin_knill),
        ("average vs entanglement fidelity", avg_ent),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS [{:>2}] {name} ({secs:.1}s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL [{:>2}] {name} ({secs:.1}s): {msg}", i + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
