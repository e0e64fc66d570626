use symrec::bounds::{bound_terms, instance_errors, BoundKind, FluctuationStrategy};
use symrec::instances::random_small_instance;
use symrec::recovery::SeesawOptions;

#[test]
fn instance_bounds_stay_below_recovery_error() {
    let opts = SeesawOptions::default();
    let mut worst: f64 = f64::NEG_INFINITY;
    for seed in 0..20 {
        let inst = random_small_instance(seed).unwrap();
        let terms = bound_terms(&inst, FluctuationStrategy::Exact).unwrap();
        let errs = instance_errors(&inst, &terms, &opts).unwrap();
        for kind in BoundKind::INSTANCE {
            let lhs = terms.lhs(kind).unwrap();
            let up = if kind.targets_delta_tilde() { errs.delta_tilde.upper } else { errs.delta.upper };
            worst = worst.max(lhs - up);
            assert!(lhs <= up + 1e-6, "seed {seed} {kind}: {lhs} > {up}");
        }
    }
    eprintln!("largest lhs - upper: {worst:.3e}");
}
