use symrec::linalg::{c, CVec};
use symrec::qec::{
    audit_code, covariant_erasure, dicke_code, dicke_family_parameters, erasure_with_resets, four_qubit_erasure_code,
    repetition_code, trivial_code,
};
use symrec::recovery::{code_error, CodeErrorOptions};

fn plus() -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_vec(vec![c(s, 0.0), c(s, 0.0)])
}

#[test]
fn dicke_family_audit_is_consistent() {
    for a in dicke_family_parameters() {
        let r = audit_code(&dicke_code(a).unwrap(), &CodeErrorOptions::default()).unwrap();
        eprintln!("{a:.3} ek17={:.5} me={:.5} est={:.5} rounds", r.ek17, r.me_error, r.delta_c_estimate);
        assert!(r.applicable);
        assert!((r.ek17 - 1.0 / 13.0).abs() < 1e-12);
        assert!(r.noise_covariance_deviation < 1e-10);
        assert!(r.consistent());
    }
}

#[test]
fn reset_state_does_not_change_code_error() {
    let code = dicke_code(0.4).unwrap();
    let opts = CodeErrorOptions::default();
    let cov = code_error(&code.isometry, &covariant_erasure(&code).unwrap(), &opts).unwrap();
    let plain = code_error(&code.isometry, &erasure_with_resets(&code, &[plus(), plus(), plus()]).unwrap(), &opts).unwrap();
    eprintln!("me {} {} worst {} {}", cov.maximally_entangled_error, plain.maximally_entangled_error, cov.worst_case_estimate, plain.worst_case_estimate);
    assert!((cov.maximally_entangled_error - plain.maximally_entangled_error).abs() < 1e-8);
    assert!((cov.worst_case_estimate - plain.worst_case_estimate).abs() < 1e-6);
}

#[test]
fn erasure_correcting_code_has_vanishing_error() {
    let code = four_qubit_erasure_code().unwrap();
    let r = code_error(&code.isometry, &covariant_erasure(&code).unwrap(), &CodeErrorOptions::default()).unwrap();
    eprintln!("four {} {}", r.maximally_entangled_error, r.worst_case_estimate);
    assert!(r.worst_case_estimate < 1e-6);
}

#[test]
fn repetition_and_trivial_codes_fail_under_erasure() {
    let rep = repetition_code().unwrap();
    let r = audit_code(&rep, &CodeErrorOptions::default()).unwrap();
    eprintln!("rep {} {} cov {}", r.me_error, r.delta_c_estimate, r.covariance_deviation);
    assert!(!r.applicable && r.consistent());
    assert!(r.delta_c_estimate > 0.1);
    let t = trivial_code().unwrap();
    let r = code_error(&t.isometry, &covariant_erasure(&t).unwrap(), &CodeErrorOptions::default()).unwrap();
    eprintln!("trivial {} {}", r.maximally_entangled_error, r.worst_case_estimate);
    assert!(r.worst_case_estimate >= 0.5);
}
