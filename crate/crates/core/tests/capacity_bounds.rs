use std::f64::consts::{E, LN_2, PI};

use binomcap::capacity_bounds::*;
use binomcap::channel::{beta_binomial_reference, mutual_information, mutual_information_beta_input, DiscreteInput};
use binomcap::numerics::EULER_GAMMA;
use binomcap::solver::{blahut_arimoto, SolverConfig};
use proptest::prelude::*;

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<u64> {
    let mut v: Vec<u64> = (0..count)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (count - 1) as f64).exp().round() as u64)
        .collect();
    v.dedup();
    v
}

#[test]
fn lower_bound_at_one_is_below_ln_two() {
    let expect = (1.0 - EULER_GAMMA) - 3f64.ln() + 0.5 * (3.0 * PI / (2.0 * E)).ln();
    let lb = capacity_lower_bound(1).unwrap();
    assert!((lb - expect).abs() < 1e-15);
    assert!(lb < LN_2);
}

#[test]
fn lower_bound_near_asymptote_for_large_n() {
    let n = 1_000_000;
    let d = capacity_lower_bound(n).unwrap() - asymptote(n);
    assert!((-0.01..=0.01).contains(&d));
}

#[test]
fn second_order_lower_term() {
    // The term is defined so that LB(n) >= asymptote(n) + r_lb(n); at n = 1
    // it is negative.
    let v = r_lb(1).unwrap();
    let magnitude = -0.5 * (4f64 / 3.0).ln() + 1.5f64.ln() + 0.5;
    assert!((v + magnitude).abs() < 1e-15);
    assert!(r_lb(100_000_000).unwrap().abs() <= 1e-3);
}

#[test]
fn lower_bound_dominates_its_expansion() {
    let mut ns: Vec<u64> = (1..=1000).collect();
    ns.extend(log_spaced(1000.0, 1e6, 200));
    for n in ns {
        let slack = capacity_lower_bound(n).unwrap() - asymptote(n) - r_lb(n).unwrap();
        assert!(slack >= -1e-10, "n={n}: {slack}");
    }
}

#[test]
fn upper_bound_range_and_sandwich() {
    assert!(capacity_upper_bound(27).is_err());
    let ub = capacity_upper_bound(28).unwrap();
    assert!(ub.is_finite() && ub > 0.0);
    assert!(ub >= capacity_lower_bound(28).unwrap());
    let n = 1_000_000;
    let width = capacity_upper_bound(n).unwrap() - capacity_lower_bound(n).unwrap();
    assert!(width <= 17.0 / log_arg(n as f64));
}

#[test]
fn gap_examples() {
    for n in [444u64, 10_000, 100_000_000] {
        let g = gap(n).unwrap();
        assert!(g <= 17.0 / (n as f64 * PI / (2.0 * E)).ln(), "n={n}");
        assert!(g >= 0.0);
        assert_eq!(gap_cap(n).unwrap(), 17.0 / log_arg(n as f64));
    }
    assert!(gap_cap(443).is_err());
    let lb = capacity_lower_bound(444).unwrap();
    let ub = capacity_upper_bound(444).unwrap();
    assert!(ub - lb <= gap_cap(444).unwrap());
}

#[test]
fn gap_cap_log_spaced_sweep() {
    let ns = log_spaced(444.0, 1e8, 50);
    assert!(ns.len() >= 45);
    let mut prev = f64::INFINITY;
    for n in ns {
        let g = gap(n).unwrap();
        assert!(g <= gap_cap(n).unwrap(), "n={n}");
        assert!(g < prev, "gap not decreasing at n={n}");
        prev = g;
    }
}

#[test]
fn report_optional_fields() {
    let r = CapacityReport::new(27).unwrap();
    assert!(r.ub.is_none() && r.r_ub.is_none() && r.gap.is_none() && r.gap_cap.is_none());
    let r = CapacityReport::new(100).unwrap();
    assert!(r.ub.is_some() && r.gap_cap.is_none());
    let r = CapacityReport::new(444).unwrap().with_ba_estimate(2.8);
    assert!(r.gap_cap.is_some());
    let text = serde_json::to_string(&r).unwrap();
    assert_eq!(serde_json::from_str::<CapacityReport>(&text).unwrap(), r);
}

#[test]
fn mixture_output() {
    let (eta, c) = canonical_parameters(100).unwrap();
    let q = xie_barron_output(100, eta, c).unwrap();
    let total: f64 = q.probs().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(xie_barron_output(100, 0.0, c).is_err());

    let (eta, c) = canonical_parameters(1000).unwrap();
    let q = xie_barron_output(1000, eta, c).unwrap();
    let r = beta_binomial_reference(1000);
    for y in 0..=1000 {
        assert!(q.prob(y) >= (1.0 - 2.0 * eta) * r.prob(y) * (1.0 - 1e-12));
    }
}

#[test]
fn certificate_below_ceiling() {
    for n in [28u64, 50, 100, 444, 2000] {
        let (eta, c) = canonical_parameters(n).unwrap();
        let v = dual_certificate_max(n, eta, c, 2000).unwrap();
        assert!(v <= dual_certificate_ceiling(n, eta, c), "n={n}");
        assert!(v <= capacity_upper_bound(n).unwrap() + 1e-12, "n={n}");
    }
}

#[test]
fn certificate_grid_refinement() {
    let (eta, c) = canonical_parameters(100).unwrap();
    let a = dual_certificate_max(100, eta, c, 5000).unwrap();
    let b = dual_certificate_max(100, eta, c, 10_000).unwrap();
    assert!((a - b).abs() <= 1e-4);
}

#[test]
fn weak_duality_against_solver_and_arcsine_input() {
    let n = 200;
    let (eta, c) = canonical_parameters(n).unwrap();
    let dual = dual_certificate_max(n, eta, c, 4000).unwrap();
    let ba = blahut_arimoto(n, &SolverConfig::for_n(n)).unwrap();
    assert!(dual >= ba.capacity_estimate);

    let n = 1000;
    let (eta, c) = canonical_parameters(n).unwrap();
    let dual = dual_certificate_max(n, eta, c, 4000).unwrap();
    assert!(dual >= mutual_information_beta_input(n, 8000).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn certificate_dominates_any_input(
        n in 28u64..150,
        atoms in prop::collection::vec((0.0f64..=1.0, 0.05f64..1.0), 1..6),
    ) {
        let input = DiscreteInput::from_weights(&atoms).unwrap();
        let (eta, c) = canonical_parameters(n).unwrap();
        let dual = dual_certificate_max(n, eta, c, 1000).unwrap();
        prop_assert!(dual >= mutual_information(&input, n).unwrap() - 1e-6);
    }

    #[test]
    fn bounds_ordered(n in 28u64..5_000_000) {
        prop_assert!(capacity_lower_bound(n).unwrap() <= capacity_upper_bound(n).unwrap());
    }
}
