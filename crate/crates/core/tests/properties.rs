use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbound::bases::BasisMap;
use rbound::experiments::{random_gap_map, zero_insertion_bound, zero_insertion_ratio};
use rbound::rademacher::{khintchine_range, khintchine_ratio, rad_norm, RadNormConfig};
use rbound::semigroup::{MultiplierSemigroup, RadElement, Time};
use rbound::spaces::{norm, norm_sparse, CoeffVec, SpaceSpec};

fn coeffs(max_dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, 1..max_dim)
}

fn space() -> impl Strategy<Value = SpaceSpec> {
    prop_oneof![
        Just(SpaceSpec::SupC0),
        (1.0..6.0f64).prop_map(SpaceSpec::Lp),
        (1.0..6.0f64).prop_map(SpaceSpec::BlockXp),
    ]
}

fn basis(dim: usize, pick: u8) -> BasisMap {
    match pick % 5 {
        0 => BasisMap::standard(dim).unwrap(),
        1 => BasisMap::summing(dim).unwrap(),
        2 => BasisMap::difference(dim).unwrap(),
        3 => BasisMap::fprime(dim.div_ceil(2)).unwrap(),
        _ => BasisMap::fsecond(dim.div_ceil(2)).unwrap(),
    }
}

fn rad(terms: &[Vec<f64>]) -> RadElement {
    RadElement::new(
        terms
            .iter()
            .map(|t| CoeffVec::new(t.clone()).unwrap())
            .collect(),
    )
    .unwrap()
}

fn rad_terms(max_n: usize, max_dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..max_n, 1..max_dim).prop_flat_map(|(n, dim)| {
        prop::collection::vec(prop::collection::vec(-10.0..10.0f64, dim), n)
    })
}

proptest! {
    #[test]
    fn norms_are_homogeneous(x in coeffs(40), c in -50.0..50.0f64, s in space()) {
        let v = CoeffVec::new(x).unwrap();
        let lhs = norm(&v.scaled(c), &s).unwrap();
        let rhs = c.abs() * norm(&v, &s).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn triangle_inequality(x in coeffs(40), y in coeffs(40), s in space()) {
        let (x, y) = (CoeffVec::new(x).unwrap(), CoeffVec::new(y).unwrap());
        let lhs = norm(&x.add(&y), &s).unwrap();
        let rhs = norm(&x, &s).unwrap() + norm(&y, &s).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn block_space_two_is_l2(x in coeffs(60)) {
        let v = CoeffVec::new(x).unwrap();
        let a = norm(&v, &SpaceSpec::BlockXp(2.0)).unwrap();
        let b = norm(&v, &SpaceSpec::Lp(2.0)).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * b.max(1e-300));
    }

    #[test]
    fn norms_ignore_signs(x in coeffs(40), flips in prop::collection::vec(any::<bool>(), 40), s in space()) {
        let v = CoeffVec::new(x.clone()).unwrap();
        let w: Vec<f64> = x.iter().zip(&flips).map(|(a, f)| if *f { -a } else { *a }).collect();
        prop_assert_eq!(norm(&v, &s).unwrap(), norm(&CoeffVec::new(w).unwrap(), &s).unwrap());
    }

    #[test]
    fn sparse_and_dense_norms_agree(x in coeffs(80), s in space()) {
        let v = CoeffVec::new(x).unwrap();
        prop_assert_eq!(norm(&v, &s).unwrap(), norm_sparse(&v.to_sparse(), &s).unwrap());
    }

    #[test]
    fn analysis_inverts_synthesis(a in coeffs(60), pick in any::<u8>()) {
        let dim = if pick % 5 >= 3 { a.len() + a.len() % 2 } else { a.len() };
        let b = basis(dim, pick);
        let a = CoeffVec::new(a).unwrap().resized(b.len());
        let x = b.synthesize(&a).unwrap();
        let back = b.analyze(&x).unwrap();
        let scale = a.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(back.max_abs_diff(&a) <= 1e-12 * scale);
        let sparse = b.synthesize_sparse(&a.to_sparse()).unwrap();
        prop_assert_eq!(sparse.to_dense(x.dim()).unwrap(), x);
    }

    #[test]
    fn semigroup_law(x in coeffs(16), s in 0.0..0.5f64, t in 0.0..0.5f64, pick in 0u8..3) {
        let b = basis(x.len(), pick);
        let sg = MultiplierSemigroup::new(b);
        let x = CoeffVec::new(x).unwrap();
        let two_steps = sg.apply(Time::Real(s), &sg.apply(Time::Real(t), &x).unwrap()).unwrap();
        let one_step = sg.apply(Time::Real(s + t), &x).unwrap();
        let scale = x.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs())) * x.dim() as f64;
        prop_assert!(two_steps.max_abs_diff(&one_step) <= 1e-12 * scale);
    }

    #[test]
    fn rad_norm_ignores_signs_and_order(
        terms in rad_terms(9, 8),
        flips in prop::collection::vec(any::<bool>(), 9),
        rot in 0usize..9,
        s in space(),
    ) {
        let exact = RadNormConfig::exact();
        let base = rad_norm(&rad(&terms), &s, &exact).unwrap().value;
        let mut changed: Vec<Vec<f64>> = terms
            .iter()
            .zip(&flips)
            .map(|(t, f)| if *f { t.iter().map(|v| -v).collect() } else { t.clone() })
            .collect();
        let len = changed.len();
        changed.rotate_left(rot % len);
        prop_assert_eq!(base, rad_norm(&rad(&changed), &s, &exact).unwrap().value);
    }

    #[test]
    fn khintchine_ratio_at_most_one(a in prop::collection::vec(-5.0..5.0f64, 1..12)) {
        let v = CoeffVec::new(a).unwrap();
        prop_assume!(!v.is_zero());
        let r = khintchine_ratio(&v, &RadNormConfig::exact()).unwrap();
        prop_assert!(r <= 1.0 + 1e-15);
        prop_assert!(r >= std::f64::consts::FRAC_1_SQRT_2 - 1e-12);
    }

    #[test]
    fn zero_insertion_respects_bound(a in coeffs(50), seed in any::<u64>(), p in 1.0..4.0f64) {
        let v = CoeffVec::new(a).unwrap();
        prop_assume!(!v.is_zero());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_gap_map(v.dim(), &mut rng);
        let r = zero_insertion_ratio(&v, &phi, p).unwrap();
        prop_assert!(r <= zero_insertion_bound(p) * (1.0 + 1e-12));
    }
}

#[test]
fn round_trips_at_dimension_ten_thousand() {
    let dim = 10_000;
    let a: Vec<f64> = (1..=dim).map(|i| ((i * 37) % 101) as f64 - 50.0).collect();
    for pick in 0..5 {
        let b = basis(dim, pick);
        let a = CoeffVec::new(a.clone()).unwrap();
        let back = b.analyze(&b.synthesize(&a).unwrap()).unwrap();
        assert!(back.max_abs_diff(&a) <= 1e-9, "basis {:?}", b.kind());
    }
}

#[test]
fn exact_averages_do_not_depend_on_threads() {
    let terms: Vec<Vec<f64>> = (0..15)
        .map(|k| {
            (0..6)
                .map(|i| ((k * 7 + i * 3) % 11) as f64 / 7.0 - 0.6)
                .collect()
        })
        .collect();
    let r = rad(&terms);
    let run = |threads: usize, cfg: RadNormConfig| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| rad_norm(&r, &SpaceSpec::BlockXp(1.5), &cfg).unwrap())
    };
    for cfg in [RadNormConfig::exact(), RadNormConfig::monte_carlo(5000, 3)] {
        let one = run(1, cfg);
        assert_eq!(one, run(3, cfg));
        assert_eq!(one, run(8, cfg));
    }
}

#[test]
fn monte_carlo_agrees_with_exact() {
    let terms: Vec<Vec<f64>> = (0..10)
        .map(|k| (0..5).map(|i| ((k + 2 * i) % 5) as f64 - 2.0).collect())
        .collect();
    let r = rad(&terms);
    for (space, seed) in [
        (SpaceSpec::SupC0, 1),
        (SpaceSpec::Lp(1.0), 2),
        (SpaceSpec::BlockXp(3.0), 3),
    ] {
        let exact = rad_norm(&r, &space, &RadNormConfig::exact()).unwrap().value;
        for cfg in [
            RadNormConfig::monte_carlo(20_000, seed),
            RadNormConfig::monte_carlo(20_000, seed).with_exponent(2.0),
        ] {
            let mc = rad_norm(&r, &space, &cfg).unwrap();
            let target = rad_norm(
                &r,
                &space,
                &RadNormConfig {
                    mode: RadNormConfig::exact().mode,
                    ..cfg
                },
            )
            .unwrap()
            .value;
            assert!(mc.stderr > 0.0);
            assert!(
                (mc.value - target).abs() <= 4.0 * mc.stderr,
                "{space}: {} vs {target}",
                mc.value
            );
        }
        assert!(exact > 0.0);
    }
    let single = rad_norm(&r, &SpaceSpec::SupC0, &RadNormConfig::monte_carlo(1, 9)).unwrap();
    assert!(single.stderr.is_nan());
}

#[test]
fn khintchine_constants_stable_in_n() {
    for p in [1.0, 2.0, 4.0] {
        let c: Vec<f64> = [8, 12, 16]
            .iter()
            .map(|&n| khintchine_range(p, n, 500, 5).unwrap().constant())
            .collect();
        let spread =
            c.iter().cloned().fold(0.0, f64::max) / c.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 1.1, "p = {p}: {c:?}");
        if p == 2.0 {
            assert!(c.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        }
    }
}
