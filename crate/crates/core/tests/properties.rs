mod common;

use factory_tsn::compression::{mos_from_psnr, psnr, MosThresholds};
use factory_tsn::frame::{pcp_to_priority, priority_to_pcp, serialization_time};
use factory_tsn::SimTime;
use proptest::prelude::*;

#[test]
fn cbs_credit_follows_closed_form() {
    common::cbs_suite(1000).unwrap();
}

#[test]
fn tas_matches_brute_force() {
    common::tas_suite(500).unwrap();
}

#[test]
fn preemption_storms_reassemble() {
    common::fp_suite(24).unwrap();
}

#[test]
fn conservation_across_presets() {
    common::conservation_suite(16).unwrap();
}

#[test]
fn serialization_examples() {
    let t = |b, r| serialization_time(b, r).unwrap();
    assert_eq!(t(1500, common::MBPS_100), SimTime::from_micros(120));
    assert_eq!(t(354, common::GBPS_1), SimTime::from_nanos(2832));
    assert_eq!(t(500, common::MBPS_100), SimTime::from_micros(40));
    assert!(serialization_time(64, 0).is_err());
}

#[test]
fn psnr_inverts_at_36_db() {
    let mse = 255.0_f64 * 255.0 / 10f64.powf(3.6);
    assert!((mse - 16.33).abs() < 0.01);
    assert!((psnr(255.0, mse).unwrap() - 36.0).abs() < 1e-9);
    assert_eq!(mos_from_psnr(36.0, &MosThresholds::default()), 4);
}

proptest! {
    #[test]
    fn serialization_scales(size in 64u64..=1522, rate in prop::sample::select(vec![10_000_000u64, 100_000_000, 1_000_000_000])) {
        let one = serialization_time(size, rate).unwrap().as_nanos();
        let two = serialization_time(2 * size, rate).unwrap().as_nanos();
        let fast = serialization_time(size, 10 * rate).unwrap().as_nanos();
        prop_assert!(two.abs_diff(2 * one) <= 1);
        prop_assert!((fast * 10).abs_diff(one) <= 10);
        // ceil of the exact bit time
        prop_assert!(one as u128 * rate as u128 >= size as u128 * 8 * 1_000_000_000);
        prop_assert!((one as u128 - 1) * (rate as u128) < size as u128 * 8 * 1_000_000_000);
    }

    #[test]
    fn pcp_mapping_is_a_bijection(pcp in 0u8..8) {
        let q = pcp_to_priority(pcp).unwrap();
        prop_assert!(q < 8);
        prop_assert_eq!(priority_to_pcp(q).unwrap(), pcp);
    }

    #[test]
    fn psnr_decreases_with_mse(a in 0.01f64..1e4, b in 0.01f64..1e4) {
        prop_assume!(a < b);
        prop_assert!(psnr(255.0, a).unwrap() > psnr(255.0, b).unwrap());
    }
}
