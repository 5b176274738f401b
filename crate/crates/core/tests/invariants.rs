use proptest::prelude::*;

use dpmix::distributions::{tv_univariate_gaussians, UnivariateGaussian};
use dpmix::io::{read_dataset, write_dataset};
use dpmix::learner::{simplex_net, snap_component};
use dpmix::privacy::{
    compose_advanced, compose_basic, empirical_frequencies, split_budget_for_gaussian_decoder, stable_histogram,
    BinPartition,
};
use dpmix::rng::stream;
use dpmix::selection::exponential_mechanism;
use dpmix::distributions::AxisAlignedGaussian;
use dpmix::{Dataset, PrivacyBudget};

fn budget() -> impl Strategy<Value = PrivacyBudget> {
    (1e-3..1.0f64, 1e-9..1e-3f64).prop_map(|(e, d)| PrivacyBudget::new(e, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn basic_composition_adds(parts in prop::collection::vec(budget(), 1..12)) {
        let total = compose_basic(&parts).unwrap();
        let eps: f64 = parts.iter().map(|b| b.epsilon).sum();
        let delta: f64 = parts.iter().map(|b| b.delta).sum();
        prop_assert!((total.epsilon - eps).abs() <= 1e-12 * eps.max(1.0));
        prop_assert!((total.delta - delta).abs() <= 1e-12);
    }

    #[test]
    fn advanced_composition_grows_with_steps(eps0 in 1e-4..0.5f64, steps in 1usize..200, delta0 in 1e-9..0.5f64) {
        let a = compose_advanced(eps0, &vec![0.0; steps], delta0).unwrap();
        let b = compose_advanced(eps0, &vec![0.0; steps + 1], delta0).unwrap();
        prop_assert!(b.epsilon > a.epsilon);
        prop_assert_eq!(a.delta, delta0);
    }

    #[test]
    fn decoder_split_stays_within_budget(b in budget(), gamma in 0.0..0.95f64) {
        let split = split_budget_for_gaussian_decoder(&b, gamma).unwrap();
        prop_assert!(split.recompose().unwrap().fits_within(&b));
    }

    #[test]
    fn histogram_reports_only_occupied_bins(
        data in prop::collection::vec(-50.0..50.0f64, 1..400),
        width in 0.1..5.0f64,
        seed in any::<u64>(),
    ) {
        let bins = BinPartition::unit_width(width).unwrap();
        let b = PrivacyBudget::new(1.0, 1e-4).unwrap();
        let hist = stable_histogram(&b, 0.1, 0.1, &data, &bins, &mut stream(seed)).unwrap();
        let occupied = empirical_frequencies(&data, &bins);
        for (i, &p) in &hist.estimates {
            prop_assert!(occupied.contains_key(i));
            prop_assert!(p >= hist.threshold && p <= 1.0);
        }
    }

    #[test]
    fn unit_bins_contain_their_points(x in -1e6..1e6f64, width in 1e-3..1e3f64) {
        let bins = BinPartition::unit_width(width).unwrap();
        let (lo, hi) = bins.bounds(bins.index_of(x).unwrap());
        prop_assert!(lo < x + 1e-9 * width && x <= hi + 1e-9 * width);
    }

    #[test]
    fn dyadic_bins_contain_their_points(x in 1e-12..1e12f64) {
        let (lo, hi) = BinPartition::Dyadic.bounds(BinPartition::Dyadic.index_of(x).unwrap());
        prop_assert!(lo < x && x <= hi);
    }

    #[test]
    fn tv_is_a_symmetric_distance(
        m1 in -20.0..20.0f64, s1 in 0.05..10.0f64,
        m2 in -20.0..20.0f64, s2 in 0.05..10.0f64,
    ) {
        let a = UnivariateGaussian::new(m1, s1).unwrap();
        let b = UnivariateGaussian::new(m2, s2).unwrap();
        let ab = tv_univariate_gaussians(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - tv_univariate_gaussians(&b, &a)).abs() < 1e-12);
        prop_assert!(tv_univariate_gaussians(&a, &a) < 1e-12);
    }

    #[test]
    fn net_rounding_stays_within_accuracy(raw in prop::collection::vec(0.01..1.0f64, 1..6), level in 0usize..4) {
        let alpha = 1.0 / (1u32 << level) as f64;
        let total: f64 = raw.iter().sum();
        let x: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let net = simplex_net(x.len(), alpha, usize::MAX).unwrap();
        let rounded = net.round(&x).unwrap();
        prop_assert_eq!(rounded.iter().sum::<usize>(), net.resolution());
        for (t, v) in rounded.iter().zip(&x) {
            prop_assert!((*t as f64 / net.resolution() as f64 - v).abs() <= alpha + 1e-12);
        }
    }

    #[test]
    fn snapping_is_idempotent(mu in -100.0..100.0f64, sigma in 0.01..100.0f64, radius in 1e-3..0.1f64) {
        let g = AxisAlignedGaussian::new(vec![mu], vec![sigma]).unwrap();
        let once = snap_component(&g, radius);
        let twice = snap_component(&once, radius);
        prop_assert!((once.mus()[0] - twice.mus()[0]).abs() <= 1e-9 * (1.0 + mu.abs()));
        prop_assert!((once.sigmas()[0] / twice.sigmas()[0] - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn mechanism_returns_a_valid_index(u in prop::collection::vec(-1e6..0.0f64, 1..50), scale in 0.0..10.0f64, seed in any::<u64>()) {
        let i = exponential_mechanism(&u, scale, &mut stream(seed)).unwrap();
        prop_assert!(i < u.len());
    }

    #[test]
    fn dataset_text_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e12..1e12f64, 3), 1..50)) {
        let data = Dataset::from_rows(&rows).unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        prop_assert_eq!(read_dataset(buf.as_slice()).unwrap(), data);
    }
}
