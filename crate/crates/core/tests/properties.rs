use plenumlab_core::dataprep::{LevelNorm, MinMaxNorm};
use plenumlab_core::geometry::{AssemblyMap, MAP_SIZE};
use plenumlab_core::meshstudy::{error_maps, ErrorMaps, ErrorMode, Reference};
use plenumlab_core::metrics::compute_metrics;
use plenumlab_core::probes::{FlowDataset, LAYERS, SNAPSHOT_LEN};
use proptest::prelude::*;

fn series() -> impl Strategy<Value = Vec<(f64, f64, bool)>> {
    prop::collection::vec((1.0f64..100.0, 1.0f64..100.0, prop::bool::weighted(0.8)), 2..60)
}

fn dataset(values: &[f64], t0: f64) -> FlowDataset {
    let mask = AssemblyMap::standard().valid;
    let mut d = FlowDataset::empty(mask, t0, 0.01);
    for chunk in values.chunks(SNAPSHOT_LEN) {
        d.push(chunk).unwrap();
    }
    d
}

/// Snapshots whose cell values vary smoothly with a per-run seed.
fn field(t_len: usize, phase: f64, amp: f64) -> Vec<f64> {
    (0..t_len * SNAPSHOT_LEN).map(|i| 40.0 + amp * ((i as f64) * 0.37 + phase).sin()).collect()
}

proptest! {
    #[test]
    fn metrics_ignore_sample_order(rows in series(), rot in 0usize..60) {
        prop_assume!(rows.iter().any(|r| r.2));
        let (p, t, m): (Vec<f64>, Vec<f64>, Vec<bool>) = rows.iter().fold((vec![], vec![], vec![]), |mut acc, r| {
            acc.0.push(r.0); acc.1.push(r.1); acc.2.push(r.2); acc
        });
        let a = compute_metrics(&p, &t, &m).unwrap();
        let k = rot % rows.len();
        let rotate = |v: &[f64]| { let mut w = v.to_vec(); w.rotate_left(k); w };
        let mut mr = m.clone();
        mr.rotate_left(k);
        let mut rev: Vec<usize> = (0..rows.len()).collect();
        rev.reverse();
        let b = compute_metrics(&rotate(&p), &rotate(&t), &mr).unwrap();
        let c = compute_metrics(
            &rev.iter().map(|i| p[*i]).collect::<Vec<_>>(),
            &rev.iter().map(|i| t[*i]).collect::<Vec<_>>(),
            &rev.iter().map(|i| m[*i]).collect::<Vec<_>>(),
        ).unwrap();
        for other in [b, c] {
            prop_assert!((a.mae - other.mae).abs() <= 1e-9 * a.mae.max(1.0));
            prop_assert!((a.mape - other.mape).abs() <= 1e-9 * a.mape.max(1.0));
            if a.r2.is_finite() {
                prop_assert!((a.r2 - other.r2).abs() <= 1e-9 * a.r2.abs().max(1.0));
            }
            prop_assert_eq!(a.n, other.n);
        }
    }

    #[test]
    fn scaling_leaves_mape_and_r2_and_scales_mae(rows in series(), s in 0.01f64..100.0) {
        prop_assume!(rows.iter().any(|r| r.2));
        let p: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let t: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let m: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let a = compute_metrics(&p, &t, &m).unwrap();
        let ps: Vec<f64> = p.iter().map(|v| v * s).collect();
        let ts: Vec<f64> = t.iter().map(|v| v * s).collect();
        let b = compute_metrics(&ps, &ts, &m).unwrap();
        prop_assert!((b.mae - s * a.mae).abs() <= 1e-9 * (s * a.mae).max(1e-12));
        prop_assert!((b.mape - a.mape).abs() <= 1e-9 * a.mape.max(1.0));
        if a.r2.is_finite() {
            prop_assert!((b.r2 - a.r2).abs() <= 1e-7 * a.r2.abs().max(1.0));
        }
    }

    #[test]
    fn max_error_dominates_time_average(pa in 0.0f64..6.0, pb in 0.0f64..6.0, t_len in 1usize..5) {
        let a = dataset(&field(t_len, pa, 10.0), 0.0);
        let b = dataset(&field(t_len, pb, 12.0), 0.0);
        let pairs: Vec<(usize, usize)> = (0..t_len).map(|i| (i, i)).collect();
        let maps = error_maps(&a, &b, &pairs, Reference::A, ErrorMode::Max).unwrap();
        for l in 0..LAYERS {
            for r in 0..MAP_SIZE {
                for c in 0..MAP_SIZE {
                    let mx = ErrorMaps::at(&maps.max_pct, l, r, c);
                    let av = ErrorMaps::at(&maps.timeavg_pct, l, r, c);
                    prop_assert_eq!(mx.is_nan(), av.is_nan());
                    if !mx.is_nan() {
                        prop_assert!(mx.abs() + 1e-12 >= av.abs());
                    }
                }
            }
        }
        for l in 0..LAYERS {
            prop_assert!(maps.abs_layer_avg[l] + 1e-12 >= maps.signed_layer_avg()[l].abs());
        }
    }

    #[test]
    fn swapping_reference_inverts_ratio(pa in 0.0f64..6.0, pb in 0.0f64..6.0) {
        let a = dataset(&field(1, pa, 10.0), 0.0);
        let b = dataset(&field(1, pb, 12.0), 0.0);
        let ab = error_maps(&a, &b, &[(0, 0)], Reference::A, ErrorMode::Timeavg).unwrap();
        let ba = error_maps(&a, &b, &[(0, 0)], Reference::B, ErrorMode::Timeavg).unwrap();
        for (x, y) in ab.timeavg_pct.iter().zip(&ba.timeavg_pct) {
            prop_assert_eq!(x.is_nan(), y.is_nan());
            if !x.is_nan() {
                prop_assert!(((1.0 + x / 100.0) * (1.0 + y / 100.0) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zscore_round_trips(phase in 0.0f64..6.0, amp in 0.1f64..20.0, x in -500.0f64..500.0) {
        let d = dataset(&field(4, phase, amp), 0.0);
        let mask = AssemblyMap::standard().valid;
        let norm = LevelNorm::fit(&d, &[0, 3, 8], &mask, 0..4).unwrap();
        for k in 0..3 {
            let back = norm.invert(k, norm.apply(k, x));
            prop_assert!((back - x).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn minmax_round_trips_and_bounds_training_rows(
        table in prop::collection::vec(-1e3f64..1e3, 12..60),
        x in -2e3f64..2e3,
    ) {
        let n_features = 3;
        let rows = table.len() / n_features;
        let table = &table[..rows * n_features];
        let norm = MinMaxNorm::fit(table, n_features, 0..rows);
        for j in 0..n_features {
            if norm.max[j] > norm.min[j] {
                let back = norm.invert(j, norm.apply(j, x));
                prop_assert!((back - x).abs() <= 1e-9 * x.abs().max(1e3));
            }
            for t in 0..rows {
                let y = norm.apply(j, table[t * n_features + j]);
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&y));
            }
        }
    }
}
