use proptest::prelude::*;

use psrf_core::chains::format_chain_csv;
use psrf_core::linalg::{sym_eigen, SymMatrix};
use psrf_core::samplers::Rng;
use psrf_core::{
    ess_estimate, parse_chain_csv, psrf_classic, psrf_lugsail, psrf_multivariate, BatchConfig,
    BatchPolicy, ChainMatrix, ChainSet, Reduction, StatisticKind,
};

/// Autocorrelated chains from a seed, so shrinking stays meaningful.
fn chains(seed: u64, m: usize, n: usize, p: usize) -> ChainSet {
    let mut rng = Rng::new(seed, 0);
    let mut data = Vec::with_capacity(m * n * p);
    for _ in 0..m {
        let mut state: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
        for _ in 0..n {
            for (k, s) in state.iter_mut().enumerate() {
                *s = 0.5 * *s + rng.normal() * (1.0 + k as f64);
            }
            data.extend(
                state
                    .iter()
                    .enumerate()
                    .map(|(k, s)| s + 0.3 * state[0] * k as f64),
            );
        }
    }
    ChainSet::new(m, n, p, data).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn univariate_location_scale_invariance(
        seed in any::<u64>(),
        m in 2usize..5,
        n in 30usize..400,
        shift in -1e3f64..1e3,
        scale in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
    ) {
        let cs = chains(seed, m, n, 1);
        let moved = cs.map_rows(|r| vec![shift + scale * r[0]]).unwrap();
        let bc = BatchConfig::resolve(BatchPolicy::Sqrt, n).unwrap();
        let c0 = psrf_classic(&cs).unwrap().value;
        let c1 = psrf_classic(&moved).unwrap().value;
        prop_assert!(close(c0, c1, 1e-9), "{c0} vs {c1}");
        match (psrf_lugsail(&cs, &bc), psrf_lugsail(&moved, &bc)) {
            (Ok(a), Ok(b)) => prop_assert!(close(a.value, b.value, 1e-9)),
            (a, b) => prop_assert_eq!(a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn chain_order_does_not_matter(seed in any::<u64>(), m in 2usize..6, n in 20usize..200, p in 1usize..4) {
        let cs = chains(seed, m, n, p);
        let reversed: Vec<ChainMatrix> = (0..m).rev().map(|i| cs.chain_matrix(i)).collect();
        let rev = psrf_core::assemble(&reversed, 0).unwrap();
        let bc = BatchConfig::resolve(BatchPolicy::Sqrt, n).unwrap();
        let a = psrf_multivariate(&cs, StatisticKind::Lugsail, Reduction::Determinant, Some(&bc));
        let b = psrf_multivariate(&rev, StatisticKind::Lugsail, Reduction::Determinant, Some(&bc));
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!(close(a.value, b.value, 1e-10)),
            (a, b) => prop_assert_eq!(a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn csv_round_trip_is_exact(seed in any::<u64>(), n in 1usize..50, p in 1usize..5) {
        let mut rng = Rng::new(seed, 1);
        let values: Vec<f64> = (0..n * p)
            .map(|_| rng.normal() * 10f64.powi((rng.next_u64() % 40) as i32 - 20))
            .collect();
        let chain = ChainMatrix::new(n, p, values).unwrap();
        let names: Vec<String> = (0..p).map(|k| format!("x{k}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        prop_assert_eq!(&parse_chain_csv(&format_chain_csv(&chain, Some(&names)), true).unwrap(), &chain);
        prop_assert_eq!(&parse_chain_csv(&format_chain_csv(&chain, None), false).unwrap(), &chain);
    }

    #[test]
    fn determinant_never_exceeds_max_eigenvalue(seed in any::<u64>(), m in 1usize..4, n in 60usize..400, p in 2usize..5) {
        let cs = chains(seed, m, n, p);
        let bc = BatchConfig::resolve(BatchPolicy::Sqrt, n).unwrap();
        let det = psrf_multivariate(&cs, StatisticKind::Lugsail, Reduction::Determinant, Some(&bc));
        let max = psrf_multivariate(&cs, StatisticKind::Lugsail, Reduction::MaxEigenvalue, Some(&bc));
        if let (Ok(det), Ok(max)) = (det, max) {
            prop_assert!(det.value <= max.value * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ess_matches_lugsail_psrf(seed in any::<u64>(), m in 1usize..4, n in 40usize..300, p in 1usize..4) {
        let cs = chains(seed, m, n, p);
        let bc = BatchConfig::resolve(BatchPolicy::Sqrt, n).unwrap();
        let r = psrf_multivariate(&cs, StatisticKind::Lugsail, Reduction::Determinant, Some(&bc));
        match (r, ess_estimate(&cs, &bc)) {
            (Ok(r), Ok(ess)) => {
                let nf = n as f64;
                prop_assert!((((nf - 1.0) / nf + m as f64 / ess).sqrt() - r.value).abs() < 1e-12);
            }
            (r, ess) => prop_assert!(r.is_err() && ess.is_err()),
        }
    }

    #[test]
    fn eigen_reconstruction(seed in any::<u64>(), p in 1usize..7) {
        let mut rng = Rng::new(seed, 2);
        let a = SymMatrix::from_fn(p, |_, _| rng.normal());
        let e = sym_eigen(&a).unwrap();
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let back = e.reconstruct_with(&e.values);
        let gap = back.combine(1.0, &a, -1.0).unwrap().frobenius_norm();
        prop_assert!(gap <= 1e-10 * a.frobenius_norm().max(1.0));
    }

    #[test]
    fn congruence_matches_dense_product(seed in any::<u64>(), p in 1usize..5, q in 1usize..5) {
        let mut rng = Rng::new(seed, 3);
        let s = SymMatrix::from_fn(p, |_, _| rng.normal());
        let a: Vec<f64> = (0..q * p).map(|_| rng.normal()).collect();
        let got = s.congruence(&a, q).unwrap();
        let sd = s.to_dense();
        for i in 0..q {
            for j in 0..q {
                let mut want = 0.0;
                for k in 0..p {
                    for l in 0..p {
                        want += a[i * p + k] * sd[k * p + l] * a[j * p + l];
                    }
                }
                prop_assert!((got.get(i, j) - want).abs() <= 1e-10 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn batch_policy_parses_what_it_prints(b in 1usize..10_000) {
        for policy in [BatchPolicy::Sqrt, BatchPolicy::CubeRoot, BatchPolicy::Explicit(b)] {
            prop_assert_eq!(policy.to_string().parse::<BatchPolicy>().unwrap(), policy);
        }
    }
}

#[test]
fn affine_invariance_of_determinant_statistic() {
    let cs = chains(7, 4, 500, 3);
    let bc = BatchConfig::resolve(BatchPolicy::Sqrt, 500).unwrap();
    let base = psrf_multivariate(
        &cs,
        StatisticKind::Lugsail,
        Reduction::Determinant,
        Some(&bc),
    )
    .unwrap()
    .value;
    let a = [2.0, -1.0, 0.5, 0.0, 3.0, 1.0, 1.0, 1.0, -4.0];
    let moved = cs
        .map_rows(|r| {
            (0..3)
                .map(|i| 7.0 + (0..3).map(|j| a[i * 3 + j] * r[j]).sum::<f64>())
                .collect()
        })
        .unwrap();
    let after = psrf_multivariate(
        &moved,
        StatisticKind::Lugsail,
        Reduction::Determinant,
        Some(&bc),
    )
    .unwrap()
    .value;
    assert!((base - after).abs() < 1e-10);
}
