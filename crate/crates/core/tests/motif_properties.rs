use proptest::prelude::*;

use refined_motif::mask::MaskSpec;
use refined_motif::motif::{distance_table, extract_motif, similarity_profile, MotifState, Threshold};
use refined_motif::series::DayMatrix;
use refined_motif::Execution;

const M: usize = 8;

fn day_rows(max_days: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..3.0, M), 2..max_days)
}

fn mask() -> MaskSpec {
    MaskSpec::new(2, 6, M).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profile_decomposes_into_count_and_distance(rows in day_rows(15), t in 0.0f64..4.0) {
        let days = DayMatrix::new("p", rows).unwrap();
        let table = distance_table(&days, &mask(), t, Execution::Sequential).unwrap();
        let sp = similarity_profile(&table);
        let n = days.n_days();
        for i in 0..n {
            prop_assert!(sp.c_hat[i] < n);
            if sp.max_d > 0.0 {
                prop_assert!((sp.sp[i] + sp.d_hat[i] / sp.max_d - sp.c_hat[i] as f64).abs() < 1e-12);
            } else {
                prop_assert_eq!(sp.sp[i], sp.c_hat[i] as f64);
            }
        }
        let motif = extract_motif(&days, &sp).unwrap();
        prop_assert_eq!(&motif.values[..], days.row(motif.source_day_index));
    }

    #[test]
    fn permuting_days_permutes_the_profile(rows in day_rows(12), t in 0.0f64..4.0, shift in 1usize..11) {
        let n = rows.len();
        let perm: Vec<usize> = (0..n).map(|k| (k + shift) % n).collect();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&k| rows[k].clone()).collect();
        let a = DayMatrix::new("p", rows).unwrap();
        let b = DayMatrix::new("p", permuted).unwrap();
        let sa = similarity_profile(&distance_table(&a, &mask(), t, Execution::Sequential).unwrap());
        let sb = similarity_profile(&distance_table(&b, &mask(), t, Execution::Sequential).unwrap());
        for (k, &src) in perm.iter().enumerate() {
            prop_assert_eq!(sb.c_hat[k], sa.c_hat[src]);
            prop_assert!((sb.sp[k] - sa.sp[src]).abs() < 1e-12);
        }
        let best = sa.sp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unique = sa.sp.iter().filter(|&&v| v > best - 1e-9).count() == 1;
        if unique {
            prop_assert_eq!(extract_motif(&a, &sa).unwrap().values, extract_motif(&b, &sb).unwrap().values);
        }
    }

    #[test]
    fn infinite_threshold_ranks_by_average_distance(rows in day_rows(12)) {
        let days = DayMatrix::new("p", rows).unwrap();
        let full = MaskSpec::full(M).unwrap();
        let sp = similarity_profile(&distance_table(&days, &full, f64::INFINITY, Execution::Sequential).unwrap());
        let n = days.n_days();
        prop_assert!(sp.c_hat.iter().all(|&c| c == n - 1));
        for i in 0..n {
            for j in 0..n {
                if sp.d_hat[i] < sp.d_hat[j] {
                    prop_assert!(sp.sp[i] >= sp.sp[j]);
                }
            }
        }
    }

    #[test]
    fn appends_match_full_recompute(rows in day_rows(14), t in 0.0f64..4.0) {
        let start = 2;
        let mut state = MotifState::discover(
            DayMatrix::new("p", rows[..start].to_vec()).unwrap(), &mask(), t, Execution::Sequential,
        ).unwrap();
        for k in start..rows.len() {
            prop_assert_eq!(state.append_day(&rows[k]).unwrap(), k as u64);
            let full = MotifState::discover(
                DayMatrix::new("p", rows[..=k].to_vec()).unwrap(), &mask(), t, Execution::Sequential,
            ).unwrap();
            prop_assert_eq!(&state.profile, &full.profile);
            prop_assert_eq!(&state.motif, &full.motif);
        }
    }

    #[test]
    fn parallel_table_equals_sequential(rows in day_rows(20)) {
        let days = DayMatrix::new("p", rows).unwrap();
        let a = distance_table(&days, &mask(), Threshold::DynamicMedian, Execution::Sequential).unwrap();
        let b = distance_table(&days, &mask(), Threshold::DynamicMedian, Execution::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }
}
