use symrec::hp::{
    concentration_sweep, equidistribution_check, foggy_mirror_experiment, mean_law, no_symmetry_control, HpConfig,
    PhiSelector, PsiSelector,
};
use symrec::linalg::{diag_real, CMat};
use symrec::recovery::SeesawOptions;

#[test]
fn mean_of_a_out_charge_follows_equidistribution() {
    let cfg = HpConfig { samples: 500, seed: 11, ..HpConfig::new(1, 2, 1) };
    let r = mean_law(&cfg, &diag_real(&[0.0, 1.0])).unwrap();
    assert!((r.predicted - 2.0 / 3.0).abs() < 1e-12);
    assert!(r.within(3.0), "{r:?}");
}

#[test]
fn concentration_tails_below_bound() {
    let cfg = HpConfig { s: 1, samples: 1000, seed: 5, phi: PhiSelector::SectorTruncated, ..HpConfig::new(1, 3, 2) };
    let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.1).collect();
    let rows = concentration_sweep(&cfg, &CMat::identity(2, 2).scale(0.5), &grid).unwrap();
    for r in &rows {
        eprintln!("{r:?}");
        assert!(r.consistent(3.0));
    }
    assert_eq!(rows.last().unwrap().frequency, 0.0);
}

#[test]
fn foggy_mirror_bound_is_sound_and_l_independent() {
    let cfg = HpConfig { psi: PsiSelector::EigenMixture(vec![(0, 0.5), (1, 0.5)]), seed: 3, ..HpConfig::new(1, 3, 1) };
    let rows = foggy_mirror_experiment(&cfg, &[1, 2, 3], &SeesawOptions::default()).unwrap();
    for r in &rows {
        eprintln!("l={} eps={:.4} base={:.5} siq1={:.5} siq2={:.5} up={:.5} a={:.4}/{:.4} ff={:.4}/{:.4} dm={:.4}/{:.4}", r.l, r.epsilon_hat, r.hp.base, r.siq1, r.siq2, r.delta_upper, r.a_sum, r.hp.a_lower, r.sqrt_f_f, r.hp.sqrt_f_f_upper, r.delta_max, r.hp.delta_max_upper);
        assert!(r.bound_holds());
        assert!(r.term_bounds_hold());
        assert!((r.base_bound - 0.05).abs() < 1e-12);
    }
    let eq = equidistribution_check(&HpConfig { samples: 20, ..cfg.clone() }).unwrap();
    eprintln!("eps {:?} mean {:?}", eq.epsilon_hat, eq.epsilon_hat_mean);
    let ctl = no_symmetry_control(&cfg, &[1, 2, 3], &SeesawOptions::default()).unwrap();
    eprintln!("{ctl:?}");
}
