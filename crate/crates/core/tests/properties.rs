//! Property tests over randomized inputs.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scanpath_core::config::RunConfig;
use scanpath_core::data::{decode_tensor, encode_tensor, fit_length, Checkpoint, GrayImage};
use scanpath_core::loss::{lambda_schedule, soft_dtw_value, LossConfig};
use scanpath_core::metrics::{
    compare, dtw_matrix, encode, euclidean_costs, fdtw, frechet, hausdorff, levenshtein, Metric, MetricConfig,
};
use scanpath_core::model::{sample_next_point, surviving_pixels, ThresholdMode};
use scanpath_core::tensor::{Graph, Tensor};
use scanpath_core::types::{gaussian_map, map_argmax, spatialize, GazePoint, GridSpec, ProbMap, Scanpath};

fn points(max_len: usize, w: f64, h: f64) -> impl Strategy<Value = Vec<GazePoint>> {
    prop::collection::vec((0.0..w, 0.0..h).prop_map(|(x, y)| GazePoint::new(x, y)), 1..=max_len)
}

fn cost_matrix() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..=5, 1usize..=5)
        .prop_flat_map(|(n, m)| prop::collection::vec(0.0f64..5.0, n * m).prop_map(move |d| (n, m, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn levenshtein_is_a_metric(
        a in prop::collection::vec(0u8..4, 0..8),
        b in prop::collection::vec(0u8..4, 0..8),
        c in prop::collection::vec(0u8..4, 0..8),
    ) {
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        prop_assert!(levenshtein(&a, &b) <= a.len().max(b.len()));
        prop_assert!(levenshtein(&a, &b) >= a.len().abs_diff(b.len()));
    }

    #[test]
    fn soft_dtw_sits_below_hard_dtw((n, m, d) in cost_matrix(), gamma in 1e-3f64..2.0) {
        let hard = dtw_matrix(&d, n, m);
        let soft = soft_dtw_value(&d, n, m, gamma).unwrap();
        prop_assert!(soft <= hard + 1e-12);
        // At most every monotone alignment contributes: soft >= hard - gamma ln(paths),
        // and there are fewer than 3^(n+m) of them.
        prop_assert!(soft >= hard - gamma * ((n + m) as f64) * 3f64.ln() - 1e-12);
    }

    #[test]
    fn soft_dtw_is_monotone_in_each_cost((n, m, d) in cost_matrix(), pick in any::<prop::sample::Index>(), bump in 0.0f64..3.0) {
        let before = soft_dtw_value(&d, n, m, 0.1).unwrap();
        let mut up = d.clone();
        up[pick.index(d.len())] += bump;
        prop_assert!(soft_dtw_value(&up, n, m, 0.1).unwrap() >= before - 1e-12);
    }

    #[test]
    fn soft_dtw_gap_shrinks_with_temperature((n, m, d) in cost_matrix()) {
        let hard = dtw_matrix(&d, n, m);
        let gaps: Vec<f64> = [1.0, 0.1, 0.01, 1e-4]
            .iter()
            .map(|g| hard - soft_dtw_value(&d, n, m, *g).unwrap())
            .collect();
        for w in gaps.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        prop_assert!(gaps[3] < 1e-3);
    }

    #[test]
    fn kl_is_nonnegative(p in prop::collection::vec(0.0f64..1.0, 9), q in prop::collection::vec(0.0f64..1.0, 9)) {
        let grid = GridSpec::square(3).unwrap();
        let (p, q) = (ProbMap::from_weights(grid, &p).unwrap(), ProbMap::from_weights(grid, &q).unwrap());
        let g = Graph::new();
        let (vp, vq) = (g.constant(p.to_tensor()), g.constant(q.to_tensor()));
        prop_assert!(g.scalar_value(g.kl_div(vp, vq).unwrap()) >= -1e-15);
        prop_assert!(g.scalar_value(g.kl_div(vp, vp).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn map_softmax_is_shift_invariant(x in prop::collection::vec(-5.0f64..5.0, 12), c in -50.0f64..50.0) {
        let g = Graph::new();
        let a = g.map_softmax(g.constant(Tensor::from_vec(vec![3, 4], x.clone()).unwrap()));
        let b = g.map_softmax(g.constant(Tensor::from_vec(vec![3, 4], x.iter().map(|v| v + c).collect()).unwrap()));
        prop_assert!((g.value(a).data().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(g.value(a).max_abs_diff(&g.value(b)) < 1e-9);
    }

    #[test]
    fn lambda_schedule_is_logarithmic(a in 0.0f64..1.0, b in 0.0f64..1.0, t1 in 0u32..50, dt in 0u32..50) {
        let cfg = LossConfig { lambda_base: a, lambda_slope: b, ..LossConfig::default() };
        let (t1, t2) = (t1 as f64, (t1 + dt) as f64);
        let diff = lambda_schedule(t2, &cfg) - lambda_schedule(t1, &cfg);
        prop_assert!(diff >= 0.0);
        prop_assert!((diff - b * ((t2 + 1.0) / (t1 + 1.0)).ln()).abs() < 1e-12);
    }

    #[test]
    fn prob_maps_are_normalized(w in prop::collection::vec(0.0f64..10.0, 20)) {
        let m = ProbMap::from_weights(GridSpec::new(5, 4).unwrap(), &w).unwrap();
        prop_assert!((m.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(m.values().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn gaussian_maps_translate_in_the_interior(x in 14u32..18, y in 14u32..18, dx in -2i32..=2, dy in -2i32..=2) {
        // Both centers stay over 10 sigma from every border, so truncation
        // changes the normalizer by less than exp(-50).
        let grid = GridSpec::square(32).unwrap();
        let sigma = 1.0;
        let p = GazePoint::new(x as f64, y as f64);
        let q = GazePoint::new(x as f64 + dx as f64, y as f64 + dy as f64);
        let (a, b) = (gaussian_map(p, grid, sigma).unwrap(), gaussian_map(q, grid, sigma).unwrap());
        // Compare the window within 3 sigma of each center.
        for oy in -3i32..=3 {
            for ox in -3i32..=3 {
                let va = a.get((x as i32 + ox) as usize, (y as i32 + oy) as usize);
                let vb = b.get((x as i32 + dx + ox) as usize, (y as i32 + dy + oy) as usize);
                prop_assert!((va - vb).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn argmax_recovers_rounded_fixations(pts in points(6, 15.49, 9.49)) {
        let grid = GridSpec::new(16, 10).unwrap();
        let s = Scanpath::new("i", "o", pts.clone());
        let maps = spatialize(&s, grid, 1.5).unwrap();
        for (p, m) in pts.iter().zip(&maps.maps) {
            let (c, r) = p.rounded();
            // Exact half-pixel positions tie; skip them.
            if (p.x.fract() - 0.5).abs() > 1e-6 && (p.y.fract() - 0.5).abs() > 1e-6 {
                prop_assert_eq!(map_argmax(m), GazePoint::new(c as f64, r as f64));
            }
        }
    }

    #[test]
    fn sampled_points_survive_the_threshold(w in prop::collection::vec(0.0f64..1.0, 16), th in 0.05f64..1.0, seed in any::<u64>()) {
        let m = ProbMap::from_weights(GridSpec::square(4).unwrap(), &w).unwrap();
        let survivors = surviving_pixels(&m, th, ThresholdMode::Relative);
        let argmax = map_argmax(&m);
        prop_assert!(survivors.contains(&(argmax.y as usize * 4 + argmax.x as usize)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let p = sample_next_point(&m, th, ThresholdMode::Relative, &mut rng);
            prop_assert!(survivors.contains(&(p.y as usize * 4 + p.x as usize)));
        }
        // Lowering the threshold only adds candidates.
        let wider = surviving_pixels(&m, th * 0.5, ThresholdMode::Relative);
        prop_assert!(survivors.iter().all(|i| wider.contains(i)));
    }

    #[test]
    fn curve_metrics_are_symmetric(a in points(6, 100.0, 100.0), b in points(6, 100.0, 100.0)) {
        prop_assert_eq!(hausdorff(&a, &b), hausdorff(&b, &a));
        prop_assert!((frechet(&a, &b) - frechet(&b, &a)).abs() < 1e-12);
        let ends = a[0].distance(&b[0]).max(a[a.len() - 1].distance(&b[b.len() - 1]));
        prop_assert!(frechet(&a, &b) >= ends - 1e-12);
        prop_assert!(fdtw(&a, &b) >= frechet(&a, &b) - 1e-9);
    }

    #[test]
    fn fdtw_matches_low_temperature_soft_dtw(a in points(6, 300.0, 200.0), b in points(6, 300.0, 200.0)) {
        let soft = soft_dtw_value(&euclidean_costs(&a, &b), a.len(), b.len(), 1e-8).unwrap();
        prop_assert!((fdtw(&a, &b) - soft).abs() < 1e-3);
    }

    #[test]
    fn coordinate_scaling(a in points(7, 64.0, 48.0), b in points(7, 64.0, 48.0), k in 0u32..4) {
        // Powers of two keep the scaled coordinates exact.
        let s = 2f64.powi(k as i32 - 1);
        let space = GridSpec::new(64, 48).unwrap();
        let big = GridSpec::new((64.0 * s) as usize, (48.0 * s) as usize).unwrap();
        let cfg = MetricConfig::default();
        let scale = |p: &[GazePoint]| Scanpath::new("i", "o", p.iter().map(|q| q.scaled(s)).collect());
        let v = compare(&Scanpath::new("i", "o", a.clone()), &Scanpath::new("i", "o", b.clone()), space, &cfg).unwrap();
        let w = compare(&scale(&a), &scale(&b), big, &cfg).unwrap();
        for m in Metric::ALL {
            let (x, y) = (v[m.index()], w[m.index()]);
            match m {
                Metric::Hau | Metric::Fre | Metric::Fdtw | Metric::Tde => {
                    prop_assert_eq!(x.is_some(), y.is_some());
                    if let (Some(x), Some(y)) = (x, y) {
                        prop_assert!((y - s * x).abs() <= 1e-9 * (1.0 + y.abs()), "{} {} {}", m.name(), x, y);
                    }
                }
                _ => prop_assert_eq!(x, y, "{}", m.name()),
            }
        }
        prop_assert_eq!(encode(&a, space, &cfg), encode(&scale(&a).points, big, &cfg));
    }

    #[test]
    fn tensor_files_round_trip_bitwise(bits in prop::collection::vec(any::<u64>(), 1..40)) {
        let data: Vec<f64> = bits.iter().map(|b| f64::from_bits(*b)).collect();
        let t = Tensor::from_vec(vec![data.len()], data).unwrap();
        let bytes = encode_tensor(&t);
        let back = decode_tensor(&bytes).unwrap();
        prop_assert_eq!(encode_tensor(&back), bytes);
        let same = back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn checkpoints_round_trip_bitwise(vals in prop::collection::vec(any::<f64>(), 1..10), key in "[a-z.]{1,8}", value in "[ -~]{0,12}") {
        let mut ck = Checkpoint::default();
        ck.tensors.push(("w".into(), Tensor::from_vec(vec![vals.len()], vals).unwrap()));
        ck.meta.insert(key, value.replace('\n', " "));
        let bytes = ck.encode();
        prop_assert_eq!(Checkpoint::decode(&bytes).unwrap().encode(), bytes);
    }

    #[test]
    fn pgm_round_trip(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = GrayImage { width: w, height: h, pixels: (0..w * h).map(|_| rng.random()).collect() };
        let bytes = img.encode();
        prop_assert_eq!(GrayImage::decode(&bytes).unwrap(), img);
    }

    #[test]
    fn fit_length_always_yields_n(len in 0usize..15, n in 1usize..12) {
        let pts: Vec<GazePoint> = (0..len).map(|i| GazePoint::new(i as f64, 0.0)).collect();
        match fit_length(&pts, n) {
            Some(out) => {
                prop_assert!(len >= 4);
                prop_assert_eq!(out.len(), n);
                prop_assert_eq!(&out[..n.min(len)], &pts[..n.min(len)]);
            }
            None => prop_assert!(len < 4),
        }
    }

    #[test]
    fn config_text_round_trip(lr in 1e-6f64..1.0, th in 0.01f64..1.0, hidden in 1usize..32, seed in any::<u64>()) {
        let mut cfg = RunConfig::default();
        cfg.train.lr = lr;
        cfg.train.model.th = th;
        cfg.train.model.hidden_channels = hidden;
        cfg.train.seed = seed;
        prop_assert_eq!(RunConfig::parse_text(&cfg.to_text()).unwrap(), cfg);
    }
}
