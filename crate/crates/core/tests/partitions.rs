use ghzbayes::partitions::{self, Partition};
use ghzbayes::unwind::ExtendedPartition;
use proptest::prelude::*;
use std::collections::HashSet;

/// Binary partition counts by the textbook recurrence b(2n+1) = b(2n),
/// b(2n) = b(2n−1) + b(n).
fn binary_count(n: usize) -> u64 {
    let mut b = vec![1u64; n + 1];
    for i in 1..=n {
        b[i] = if i % 2 == 1 { b[i - 1] } else { b[i - 1] + b[i / 2] };
    }
    b[n]
}

/// Brute-force subset-sum counts over every subset of the block list.
fn brute_counts(sizes: &[usize]) -> Vec<f64> {
    let n: usize = sizes.iter().sum();
    let mut c = vec![0.0; n + 1];
    for mask in 0..(1usize << sizes.len()) {
        let s: usize = (0..sizes.len()).filter(|i| mask >> i & 1 == 1).map(|i| sizes[i]).sum();
        c[s] += 1.0;
    }
    c
}

#[test]
fn counts_match_recurrence() {
    for n in 1..=40 {
        let all = partitions::enumerate_partitions(n, None).unwrap();
        assert_eq!(all.len() as u64, binary_count(n), "n = {n}");
        assert_eq!(partitions::binary_partition_count(n), binary_count(n) as u128);
        let unique: HashSet<_> = all.iter().cloned().collect();
        assert_eq!(unique.len(), all.len());
        assert!(all.iter().all(|p| p.n_total() == n));
    }
}

#[test]
fn capped_enumeration_respects_cap() {
    for n in [7, 12, 21] {
        for cap in 0..3u32 {
            let v = partitions::enumerate_partitions(n, Some(cap)).unwrap();
            assert!(v.iter().all(|p| p.blocks().iter().all(|&(k, _)| k <= cap)));
            let full = partitions::enumerate_partitions(n, None).unwrap();
            let expect = full.iter().filter(|p| p.blocks().iter().all(|&(k, _)| k <= cap)).count();
            assert_eq!(v.len(), expect);
        }
    }
}

#[test]
fn spectra_match_brute_force() {
    for n in [3, 6, 9, 13] {
        for p in partitions::enumerate_partitions(n, None).unwrap() {
            if p.copies() > 14 {
                continue;
            }
            let sizes = p.block_sizes();
            assert_eq!(partitions::subset_counts(&p), brute_counts(&sizes));
            let amp = partitions::frequency_amplitudes(&p).amplitude;
            let norm: f64 = amp.iter().map(|a| a * a).sum();
            assert!((norm - 1.0).abs() < 1e-14);
        }
    }
}

fn partition_strategy() -> impl Strategy<Value = Partition> {
    prop::collection::vec((0u32..6, 1u32..5), 1..5).prop_map(|v| Partition::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn partition_text_round_trips(p in partition_strategy()) {
        let s = p.to_string();
        let q: Partition = s.parse().unwrap();
        prop_assert_eq!(&q, &p);
        prop_assert_eq!(Partition::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn fisher_is_sum_of_squares(p in partition_strategy()) {
        let f: f64 = p.block_sizes().iter().map(|&s| (s * s) as f64).sum();
        prop_assert_eq!(p.fisher(), f);
    }

    #[test]
    fn extended_text_round_trips(v in prop::collection::vec((-4i32..4, 1u32..4), 1..5)) {
        let ep = ExtendedPartition::new(v, false).unwrap();
        let back: ExtendedPartition = ep.to_string().parse().unwrap();
        prop_assert_eq!(back, ep);
    }
}
