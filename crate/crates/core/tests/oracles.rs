//! Library results against independent brute-force computations and frozen
//! reference values.

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rbound::bases::BasisMap;
use rbound::experiments::{run_c0_blowup, run_l1_blowup};
use rbound::rademacher::{rad_norm, RadNormConfig};
use rbound::semigroup::RadElement;
use rbound::spaces::{CoeffVec, SpaceSpec};

/// Plain loops, no compensated sums.
fn naive_norm(x: &[f64], space: SpaceSpec) -> f64 {
    match space {
        SpaceSpec::SupC0 => x.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        SpaceSpec::Lp(p) => x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p),
        SpaceSpec::BlockXp(p) => {
            let mut total = 0.0;
            let mut start = 0;
            let mut len = 1;
            while start < x.len() {
                let end = (start + len).min(x.len());
                let sq: f64 = x[start..end].iter().map(|v| v * v).sum();
                total += sq.sqrt().powf(p);
                start = end;
                len += 1;
            }
            total.powf(1.0 / p)
        }
    }
}

fn naive_rad(terms: &[Vec<f64>], space: SpaceSpec) -> f64 {
    let n = terms.len();
    let dim = terms[0].len();
    let mut total = 0.0;
    for pattern in 0..1u32 << n {
        let y: Vec<f64> = (0..dim)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        if pattern >> k & 1 == 1 {
                            -terms[k][i]
                        } else {
                            terms[k][i]
                        }
                    })
                    .sum()
            })
            .collect();
        total += naive_norm(&y, space);
    }
    total / f64::from(1u32 << n)
}

#[test]
fn rad_norm_matches_naive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let spaces = [
        SpaceSpec::SupC0,
        SpaceSpec::Lp(1.0),
        SpaceSpec::Lp(2.5),
        SpaceSpec::BlockXp(1.5),
        SpaceSpec::BlockXp(3.0),
    ];
    for _ in 0..40 {
        let n = rng.gen_range(1..=9);
        let dim = rng.gen_range(1..=12);
        let terms: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let r = RadElement::new(
            terms
                .iter()
                .map(|t| CoeffVec::new(t.clone()).unwrap())
                .collect(),
        )
        .unwrap();
        for space in spaces {
            let got = rad_norm(&r, &space, &RadNormConfig::exact()).unwrap().value;
            assert_relative_eq!(got, naive_rad(&terms, space), max_relative = 1e-12);
        }
    }
}

#[test]
fn c0_outputs_match_closed_form_images() {
    // T(q_m) e_{2m} = s_{2m}/4 - s_{2m-1}/2: -1/4 on 1..2m-1, +1/4 at 2m
    let exact = RadNormConfig::exact();
    let ns: Vec<usize> = (1..=10).collect();
    let table = run_c0_blowup(&ns, &exact).unwrap();
    for row in &table.rows {
        let n = row.n;
        let terms: Vec<Vec<f64>> = (1..=n)
            .map(|m| {
                let mut v = vec![0.0; 2 * n];
                v[..2 * m - 1].fill(-0.25);
                v[2 * m - 1] = 0.25;
                v
            })
            .collect();
        assert_eq!(row.output_norm, naive_rad(&terms, SpaceSpec::SupC0));
    }
}

#[test]
fn c0_frozen_values() {
    let t = run_c0_blowup(&[1, 2, 3, 4, 8, 12], &RadNormConfig::exact()).unwrap();
    assert_eq!(
        t.outputs(),
        vec![0.25, 0.5, 0.625, 0.6875, 0.97265625, 1.180908203125]
    );
}

#[test]
fn l1_outputs_match_closed_form_images() {
    // T(ln2/2^n) e_N = sum_{m<N} (c_m - c_{m+1}) e_m + c_N e_N,
    // c_m = 2^{-2^{m-n}}
    let table = run_l1_blowup(&(1..=8).collect::<Vec<_>>(), &RadNormConfig::exact()).unwrap();
    for row in &table.rows {
        let big_n = row.n;
        let c = |m: usize, n: usize| 2f64.powf(-(2f64.powi(m as i32 - n as i32)));
        let terms: Vec<Vec<f64>> = (1..=big_n)
            .map(|n| {
                (1..=big_n)
                    .map(|m| {
                        if m < big_n {
                            c(m, n) - c(m + 1, n)
                        } else {
                            c(m, n)
                        }
                    })
                    .collect()
            })
            .collect();
        assert_relative_eq!(
            row.output_norm,
            naive_rad(&terms, SpaceSpec::Lp(1.0)),
            max_relative = 1e-12
        );
    }
}

#[test]
fn l1_frozen_values() {
    let t = run_l1_blowup(&[1, 2, 3, 8, 12], &RadNormConfig::exact()).unwrap();
    let want = [
        0.5,
        0.75,
        1.117751598220131,
        2.786220220447335,
        4.130537998836253,
    ];
    for (got, want) in t.outputs().iter().zip(want) {
        assert_relative_eq!(*got, want, max_relative = 1e-12);
    }
}

#[test]
fn basis_vectors_match_definitions() {
    let dim = 9;
    let summing = BasisMap::summing(dim).unwrap();
    let difference = BasisMap::difference(dim).unwrap();
    for m in 1..=dim {
        let s: Vec<f64> = (1..=dim).map(|i| if i <= m { 1.0 } else { 0.0 }).collect();
        assert_eq!(summing.basis_vector(m).unwrap().as_slice(), &s[..]);
        let mut d = vec![0.0; dim];
        d[m - 1] = 1.0;
        if m > 1 {
            d[m - 2] = -1.0;
        }
        assert_eq!(difference.basis_vector(m).unwrap().as_slice(), &d[..]);
    }
    let fp = BasisMap::fprime(6).unwrap();
    let fs = BasisMap::fsecond(6).unwrap();
    let pi = fp.permutation().unwrap().clone();
    let amb = fp.ambient_dim();
    let unit = |i: usize| CoeffVec::unit(i, amb).unwrap();
    for m in 1..=12 {
        let want_fp = if m % 2 == 1 {
            unit(m)
        } else {
            unit(pi.apply(m).unwrap()).add(&unit(m - 1))
        };
        assert_eq!(fp.basis_vector(m).unwrap(), want_fp);
        let want_fs = if m % 2 == 1 {
            unit(m).add(&unit(pi.apply(m + 1).unwrap()))
        } else {
            unit(pi.apply(m).unwrap())
        };
        assert_eq!(fs.basis_vector(m).unwrap(), want_fs);
    }
}
