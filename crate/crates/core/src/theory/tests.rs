use super::*;
use proptest::prelude::*;

fn two_d(points: &[(f64, f64, f64)]) -> DisentangledSet {
    DisentangledSet::new(
        points.iter().map(|p| vec![p.0, p.1]).collect(),
        points.iter().map(|p| p.2).collect(),
        vec![1],
        vec![1],
    )
    .unwrap()
}

/// Causal coordinate separates with margin 0.5; the spurious one adds margin.
fn canonical() -> DisentangledSet {
    two_d(&[(0.5, 1.0, 1.0), (1.0, 0.8, 1.0), (-0.5, -1.0, -1.0), (-0.9, -0.7, -1.0)])
}

fn instance(te_ca: f64, te_sp: f64) -> TheoremInstance {
    TheoremInstance::new(canonical(), &[te_ca], &[te_sp], 2.0).unwrap()
}

#[test]
fn max_margin_examples() {
    let d = two_d(&[(1.0, 0.0, 1.0), (-1.0, 0.0, -1.0)]);
    let c = max_margin(&d, &[BlockKind::Causal, BlockKind::Spurious]).unwrap();
    assert_eq!(c.w, vec![1.0, 0.0]);
    assert_eq!(c.margin(&d), 1.0);
    let des = max_margin(&canonical(), &[BlockKind::Causal]).unwrap();
    assert_eq!(des.w[1], 0.0);
    assert!((des.norm() - 1.0).abs() < 1e-12);
    let bad = two_d(&[(1.0, 1.0, 1.0), (1.0, 1.0, -1.0)]);
    assert!(matches!(max_margin(&bad, &[BlockKind::Causal]), Err(Error::NotSeparable(_))));
}

#[test]
fn lambda_examples() {
    assert_eq!(compute_lambdas(&[1.0, 0.1, 0.0, -0.5], LAMBDA_CLAMP), vec![1.0, 10.0, 1000.0, 2.0]);
}

fn manual(eta: f64, l_ca: f64, l_sp: f64) -> TheoremInstance {
    // a K=J=1 instance whose norms produce the requested η
    let mut inst = instance(0.5, 0.5);
    let s = 0.6;
    inst.c_mm.w = vec![1.0 - eta * s, s];
    inst.c_des.w = vec![1.0, 0.0];
    inst.lambda_ca = vec![l_ca];
    inst.lambda_sp = vec![l_sp];
    inst
}

#[test]
fn mean_condition_examples() {
    let (v, holds) = mean_condition(&manual(0.5, 2.0, 2.0));
    assert!((v - 0.5).abs() < 1e-12 && holds);
    assert!(mean_condition(&manual(-0.3, 5.0, 1.0)).1);
    assert!(!mean_condition(&manual(1.0, 100.0, 1.0)).1);
}

#[test]
fn strict_condition_examples() {
    assert!(strict_condition(&manual(0.5, 1.0, 0.6)));
    assert!(!strict_condition(&manual(0.5, 2.0, 1.0)));
    assert!(!strict_condition(&manual(0.5, 1.0, 0.5)) || (0.5f64 * 1.0 - 0.5).abs() > 1e-15);
}

#[test]
fn threshold_brackets_the_preference() {
    let inst = instance(0.8, 0.1);
    let t = r_threshold(&inst).unwrap();
    assert!(t > 0.0 && t.is_finite());
    assert!(mean_condition(&inst).1);
    assert!(verify_preference(&inst, t * 1.01));
    assert!(!verify_preference(&inst, t * 0.5));
    assert!(!verify_preference(&inst, 0.0));
}

#[test]
fn larger_causal_margin_needs_no_strength() {
    let d = two_d(&[(1.0, 0.1, 1.0), (-1.0, -0.1, -1.0), (1.0, -0.5, 1.0)]);
    let inst = TheoremInstance::new(d, &[0.5], &[0.5], 2.0).unwrap();
    let t = r_threshold(&inst).unwrap();
    assert!(t <= 1e-12, "{t}");
}

#[test]
fn eta_of_theta_decreases() {
    assert_eq!(eta_of_theta(0.0), 1.0);
    assert!((eta_of_theta(0.5) - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    let v: Vec<f64> = (0..1000).map(|i| eta_of_theta(i as f64 / 1000.0)).collect();
    assert!(v.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn global_optimum_on_the_canonical_instance() {
    let d = canonical();
    let r = 1.5 * sufficient_r_global(&d, 1.25, 10.0).unwrap();
    let rep = verify_global_optimum(&d, 1.25, 10.0, r, 1e-3).unwrap();
    assert!(rep.holds, "{rep:?}");
    assert_eq!(rep.best_theta, 1.0);
    assert!(verify_global_optimum(&d, 1.25, 10.0, r, 0.1).is_err());
    // without regularization the spurious coordinate wins
    let free = verify_global_optimum(&d, 1.25, 10.0, 0.0, 1e-3).unwrap();
    assert!(!free.holds);
}

#[test]
fn audit_has_no_counterexamples() {
    let s = audit(&AuditConfig { instances: 40, seed: 3, ..Default::default() }).unwrap();
    assert_eq!(s.rows.len(), 40);
    assert!(s.passed(), "{s:?}");
    assert!(s.mean_holding > 0 && s.mean_holding < 40, "mean condition held on {}", s.mean_holding);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn zero_strength_never_prefers_the_causal_only_classifier(index in 0usize..1000) {
        let inst = random_instance(&AuditConfig::default(), index).unwrap();
        prop_assert!(!verify_preference(&inst, 0.0));
        prop_assert!((inst.c_mm.norm() - 1.0).abs() < 1e-9);
        let (v, holds) = mean_condition(&inst);
        if strict_condition(&inst) {
            prop_assert!(holds, "mean {v}");
        }
    }
}
