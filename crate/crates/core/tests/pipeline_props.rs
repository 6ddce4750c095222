//! Property tests over the predictor and the logistic layer.

use pilc_core::logistic::{
    admissible_cap, discretized_logistic_pmf, recentre_symbol, unrecentre_symbol, ScaleGrid,
};
use pilc_core::twar::{decode_parallel, decode_sequential, forward_residual};
use pilc_core::{RgbImage, TwarParams};
use proptest::prelude::*;

fn image() -> impl Strategy<Value = RgbImage> {
    (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), w * h * 3)
            .prop_map(move |data| RgbImage::new(w, h, data).unwrap())
    })
}

fn params() -> impl Strategy<Value = TwarParams> {
    (
        proptest::array::uniform9(-2.0f32..2.0),
        proptest::array::uniform3(-50.0f32..50.0),
    )
        .prop_map(|(w, b)| {
            TwarParams::new(
                [[w[0], w[1], w[2]], [w[3], w[4], w[5]], [w[6], w[7], w[8]]],
                b,
            )
            .unwrap()
        })
}

proptest! {
    #[test]
    fn residual_round_trip(image in image(), params in params()) {
        let residual = forward_residual(&image, &params);
        let sequential = decode_sequential(&residual, &params);
        prop_assert_eq!(&sequential, &image);
        prop_assert_eq!(decode_parallel(&residual, &params), sequential);
    }

    #[test]
    fn recentring_inverts(t in any::<u8>(), mu in -10.0f64..270.0) {
        let (coded, shift) = recentre_symbol(t, mu);
        prop_assert_eq!(unrecentre_symbol(coded, shift), t);
    }

    #[test]
    fn logistic_pmfs_are_admissible(mu in 0.0f64..255.0, s in 0.05f64..200.0, m in 9u32..=12) {
        let pmf = discretized_logistic_pmf(mu, s, m).unwrap();
        prop_assert_eq!(pmf.masses().iter().map(|&p| u32::from(p)).sum::<u32>(), 1 << m);
        prop_assert!(pmf.masses().iter().all(|&p| p >= 1 && u32::from(p) <= admissible_cap(m)));
    }

    #[test]
    fn grid_lookup_is_log_nearest(s in 0.01f64..500.0) {
        let grid = ScaleGrid::default();
        let d = grid.index_of(s);
        let distance = |v: f64| (v.ln() - s.ln()).abs();
        let best = grid.values().iter().map(|&v| distance(v)).fold(f64::INFINITY, f64::min);
        prop_assert!((distance(grid.values()[d]) - best).abs() < 1e-9);
    }
}
