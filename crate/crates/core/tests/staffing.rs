use proptest::prelude::*;
use shelterq::erlang::{erlang_a_metrics, SystemParams};
use shelterq::staffing::{
    min_beds_for_abandonment, min_beds_for_wait, solve_beta_star, solve_beta_star_in, staff_ed, staff_qd, staff_qed,
    QedAsymptotics, QosTargets, Regime,
};

/// Normal hazard phi(x)/(1 - Phi(x)) with the tail integrated by Simpson's rule.
fn hazard_by_quadrature(x: f64) -> f64 {
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (a, b, steps) = (x, x + 40.0, 200_000);
    let h = (b - a) / steps as f64;
    let mut s = phi(a) + phi(b);
    for i in 1..steps {
        s += phi(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    phi(x) / (s * h / 3.0)
}

#[test]
fn balance_matches_quadrature_oracle() {
    let p = SystemParams::new(4.44, 0.016, 0.5).unwrap();
    for beta in [-1.5, -0.3, 0.0, 0.02, 0.7, 2.0] {
        let q = QedAsymptotics::at(beta, &p);
        let bh = beta * (p.mu / p.theta).sqrt();
        let pa = p.theta.sqrt() * (hazard_by_quadrature(bh) - bh);
        let pw = 1.0 / (1.0 + (p.theta / p.mu).sqrt() * hazard_by_quadrature(bh) / hazard_by_quadrature(-beta));
        assert!((q.p_a - pa).abs() < 1e-9 * pa.abs().max(1.0), "beta {beta}");
        assert!((q.p_w - pw).abs() < 1e-9);
    }
}

#[test]
fn shelter_regimes() {
    let p = SystemParams::new(4.44, 0.016, 0.5).unwrap();
    assert_eq!(staff_qd(&p, 0.04).unwrap().beds, 289);
    assert_eq!(staff_ed(&p, 0.04).unwrap().beds, 267);
    let qed = staff_qed(0.04, &p).unwrap();
    assert!((265..=280).contains(&qed.beds));
    assert_eq!(qed.regime, Regime::Qed);
    let r = qed.offered_load;
    assert_eq!(qed.beds, (r + qed.beta_star.unwrap() * r.sqrt()).ceil() as u32);
}

#[test]
fn exact_search_certificate() {
    let p = SystemParams::new(4.44, 0.016, 0.5).unwrap();
    let s = min_beds_for_abandonment(&p, 0.04).unwrap();
    let cert = s.certificate.unwrap();
    assert!(cert.at_beds.p_ab <= 0.04);
    assert!(cert.one_fewer.unwrap().p_ab > 0.04);
    assert_eq!(cert.at_beds, erlang_a_metrics(s.beds, &p).unwrap());
}

#[test]
fn qos_lists_must_skip_lowest_class() {
    let qos = QosTargets::shelter_baseline();
    assert!(qos.validate(6).is_ok());
    assert!(qos.validate(5).is_err());
}

fn params() -> impl Strategy<Value = SystemParams> {
    (0.5f64..20.0, 0.01f64..2.0, 0.05f64..3.0).prop_map(|(l, m, t)| SystemParams::new(l, m, t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beds_grow_with_lambda(p in params(), bump in 1.0f64..2.0, gamma in 0.01f64..0.3) {
        let q = SystemParams::new(p.lambda * bump, p.mu, p.theta).unwrap();
        prop_assert!(staff_qd(&q, gamma).unwrap().beds >= staff_qd(&p, gamma).unwrap().beds);
        prop_assert!(staff_ed(&q, gamma).unwrap().beds >= staff_ed(&p, gamma).unwrap().beds);
        prop_assert!(staff_qed(gamma, &q).unwrap().beds >= staff_qed(gamma, &p).unwrap().beds);
        prop_assert!(min_beds_for_abandonment(&q, gamma).unwrap().beds >= min_beds_for_abandonment(&p, gamma).unwrap().beds);
    }

    #[test]
    fn beds_shrink_with_mu(p in params(), bump in 1.0f64..2.0, gamma in 0.01f64..0.3) {
        let q = SystemParams::new(p.lambda, p.mu * bump, p.theta).unwrap();
        prop_assert!(staff_qd(&q, gamma).unwrap().beds <= staff_qd(&p, gamma).unwrap().beds);
        prop_assert!(staff_ed(&q, gamma).unwrap().beds <= staff_ed(&p, gamma).unwrap().beds);
        prop_assert!(min_beds_for_abandonment(&q, gamma).unwrap().beds <= min_beds_for_abandonment(&p, gamma).unwrap().beds);
    }

    #[test]
    fn exact_searches_relax_with_targets(p in params(), a in 0.01f64..0.3, b in 0.01f64..0.3) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(min_beds_for_abandonment(&p, hi).unwrap().beds <= min_beds_for_abandonment(&p, lo).unwrap().beds);
        prop_assert!(min_beds_for_wait(&p, hi).unwrap().beds <= min_beds_for_wait(&p, lo).unwrap().beds);
    }

    #[test]
    fn beta_root_is_stable(p in params(), target in 0.005f64..0.2, shift in -3.0f64..3.0) {
        let beta = solve_beta_star(target, &p).unwrap();
        let residual = QedAsymptotics::at(beta, &p).balance() - target * p.lambda.sqrt();
        prop_assert!(residual.abs() <= 1e-9);
        let again = solve_beta_star_in(target, &p, (shift - 7.0, shift + 4.0)).unwrap();
        prop_assert!((again - beta).abs() <= 1e-8);
    }
}
