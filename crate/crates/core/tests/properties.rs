use std::collections::BTreeMap;
use std::fmt::Write as _;

use proptest::prelude::*;
use shiftbench::metrics::{
    aggregate_family_accuracy, clopper_pearson, pmk_accuracy, top1_accuracy, Family,
};
use shiftbench::prediction_store::{
    validate_grid, EvalSetting, FrameSet, ModelCategory, ModelRecord, ModelRegistry, PredictionStore, SettingKind,
    SettingView,
};
use shiftbench::robustness::{
    bootstrap_fit_band, cross_shift_correlation_table, effective_robustness, fit_baseline, inverse_logit, logit,
    pearson_correlation, Baseline, BootstrapConfig, FitPoint, LinearFit, ModelFilter, ShiftRobustness,
    DEFAULT_CLAMP_EPSILON,
};

fn classes(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

/// A view with truth `truth[i]` for example `e<i>` and one cell per model.
fn view(truth: &[usize], cells: &[(&str, &[usize])], n_classes: usize) -> SettingView {
    let mut v = SettingView::new(EvalSetting::new("s", SettingKind::NaturalDataset, classes(n_classes))).unwrap();
    let mut t = String::new();
    for (i, l) in truth.iter().enumerate() {
        writeln!(t, "e{i},c{l}").unwrap();
    }
    v.ingest_truth_str(&t, "truth").unwrap();
    let mut p = String::new();
    for (m, preds) in cells {
        for (i, l) in preds.iter().enumerate() {
            writeln!(p, "{m},s,e{i},c{l}").unwrap();
        }
    }
    v.ingest_predictions_str(&p, "preds").unwrap();
    v
}

fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clopper_pearson_monotone_and_nested(n in 1u64..400, k in 0u64..400, l1 in 0.5f64..0.99, dl in 0.001f64..0.0099) {
        let k = k % (n + 1);
        let lo_level = l1;
        let hi_level = l1 + dl;
        let (a_lo, a_hi) = clopper_pearson(k, n, lo_level).unwrap();
        let (b_lo, b_hi) = clopper_pearson(k, n, hi_level).unwrap();
        prop_assert!(b_lo <= a_lo + 1e-12 && a_hi <= b_hi + 1e-12);
        if k < n {
            let (c_lo, c_hi) = clopper_pearson(k + 1, n, lo_level).unwrap();
            prop_assert!(c_lo >= a_lo - 1e-12 && c_hi >= a_hi - 1e-12);
        }
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= a_lo && a_lo <= p && p <= a_hi && a_hi <= 1.0);
    }

    #[test]
    fn top1_on_concatenation_is_weighted_mean(
        t1 in labels(30, 4), p1 in labels(30, 4), t2 in labels(50, 4), p2 in labels(50, 4),
    ) {
        let a = top1_accuracy(&view(&t1, &[("m", &p1)], 4), "m", 0.95).unwrap();
        let b = top1_accuracy(&view(&t2, &[("m", &p2)], 4), "m", 0.95).unwrap();
        let t: Vec<usize> = t1.iter().chain(&t2).copied().collect();
        let p: Vec<usize> = p1.iter().chain(&p2).copied().collect();
        let c = top1_accuracy(&view(&t, &[("m", &p)], 4), "m", 0.95).unwrap();
        let weighted = (a.point * 30.0 + b.point * 50.0) / 80.0;
        prop_assert!((c.point - weighted).abs() < 1e-12);
    }

    #[test]
    fn pm_k_never_exceeds_pm_0(truth in labels(40, 3), preds in labels(40, 3), k in 1usize..4) {
        // Sets of 4 consecutive frames share the anchor's label.
        let truth: Vec<usize> = truth.iter().enumerate().map(|(i, _)| truth[i - i % 4]).collect();
        let v = view(&truth, &[("m", &preds)], 3);
        let sets: Vec<FrameSet> = (0..10)
            .map(|s| {
                let n = (1..4).map(|j| format!("e{}", 4 * s + j)).take(2 * k).collect();
                FrameSet::new(format!("e{}", 4 * s), format!("c{}", truth[4 * s]), n).unwrap()
            })
            .collect();
        let pm0 = pmk_accuracy(&v, "m", &sets, 0, 0.95).unwrap();
        let pmk = pmk_accuracy(&v, "m", &sets, k, 0.95).unwrap();
        prop_assert!(pmk.point <= pm0.point);
    }

    #[test]
    fn family_average_is_permutation_invariant(accs in prop::collection::vec(0.0f64..1.0, 1..12), seed in any::<u64>()) {
        let ids: Vec<String> = (0..accs.len()).map(|i| format!("s{i}")).collect();
        let lookup: BTreeMap<String, f64> = ids.iter().cloned().zip(accs.iter().copied()).collect();
        let mut shuffled = ids.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            let j = (seed.wrapping_mul(i as u64 + 7) >> 7) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let a = aggregate_family_accuracy(&Family::Flat(ids), |s| lookup.get(s).copied()).unwrap();
        let b = aggregate_family_accuracy(&Family::Flat(shuffled), |s| lookup.get(s).copied()).unwrap();
        prop_assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn fit_ignores_non_standard_points(
        std_pts in prop::collection::vec((0.05f64..0.95, 0.05f64..0.95), 3..20),
        other in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..10),
    ) {
        let mut recs = Vec::new();
        let mut pts = Vec::new();
        for (i, (a, b)) in std_pts.iter().enumerate() {
            recs.push(ModelRecord::new(format!("s{i}"), ModelCategory::Standard));
            pts.push(FitPoint::new(format!("s{i}"), *a, *b));
        }
        let base = pts.clone();
        for (i, (a, b)) in other.iter().enumerate() {
            recs.push(ModelRecord::new(format!("o{i}"), ModelCategory::MoreData));
            pts.push(FitPoint::new(format!("o{i}"), *a, *b));
        }
        let reg = ModelRegistry::from_records(recs).unwrap();
        let Ok(f1) = fit_baseline(&base, &reg) else { return Ok(()); };
        let f2 = fit_baseline(&pts, &reg).unwrap();
        prop_assert_eq!(f1.slope.to_bits(), f2.slope.to_bits());
        prop_assert_eq!(f1.intercept.to_bits(), f2.intercept.to_bits());
        prop_assert_eq!(f1.r_squared.to_bits(), f2.r_squared.to_bits());
        // OLS residuals in logit space sum to zero.
        let resid: f64 = base
            .iter()
            .map(|p| logit(p.acc2) - f1.predict_logit(logit(p.acc1)))
            .sum();
        prop_assert!(resid.abs() < 1e-9, "{}", resid);
        prop_assert!((0.0..=1.0).contains(&f1.r_squared));
    }

    #[test]
    fn beta_monotone_and_rho_round_trip(slope in 0.01f64..3.0, intercept in -3.0f64..3.0, a in 0.001f64..0.999, b in 0.001f64..0.999) {
        let fit = Baseline::Single(LinearFit {
            slope,
            intercept,
            r_squared: 1.0,
            training_models: vec![],
            x_clamp_epsilon: DEFAULT_CLAMP_EPSILON,
        });
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(fit.predict(lo) <= fit.predict(hi));
        prop_assert_eq!(effective_robustness(a, fit.predict(a), &fit), 0.0);
    }

    #[test]
    fn pearson_affine_invariance_and_negation(
        xy in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30),
        scale in 0.1f64..10.0, shift in -5.0f64..5.0,
    ) {
        let xs: Vec<f64> = xy.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = xy.iter().map(|p| p.1).collect();
        let Ok(r) = pearson_correlation(&xs, &ys) else { return Ok(()); };
        let neg: Vec<f64> = ys.iter().map(|y| -y).collect();
        let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        prop_assert!((pearson_correlation(&xs, &neg).unwrap() + r).abs() < 1e-9);
        prop_assert!((pearson_correlation(&moved, &ys).unwrap() - r).abs() < 1e-9);
    }

    #[test]
    fn ingested_grids_have_no_structural_errors(
        n_models in 1usize..5, n_examples in 1usize..20, holes in prop::collection::vec(any::<bool>(), 10),
    ) {
        let mut store = PredictionStore::new();
        let mut recs = Vec::new();
        for m in 0..n_models {
            recs.push(ModelRecord::new(format!("m{m}"), ModelCategory::Standard));
        }
        let reg = ModelRegistry::from_records(recs).unwrap();
        for s in 0..2 {
            let id = format!("s{s}");
            store.add_setting(EvalSetting::new(&id, SettingKind::NaturalDataset, classes(3))).unwrap();
            let mut t = String::new();
            for e in 0..n_examples {
                writeln!(t, "e{e},c{}", e % 3).unwrap();
            }
            store.setting_mut(&id).unwrap().ingest_truth_str(&t, "t").unwrap();
            let mut p = String::new();
            for m in 0..n_models {
                if holes[(m * 2 + s) % holes.len()] && m > 0 {
                    continue;
                }
                for e in 0..n_examples {
                    writeln!(p, "m{m},{id},e{e},c{}", (e + m) % 3).unwrap();
                }
            }
            store.setting_mut(&id).unwrap().ingest_predictions_str(&p, "p").unwrap();
            // Loading the same records again never double counts.
            prop_assert!(store.setting_mut(&id).unwrap().ingest_predictions_str(&p, "p").is_err());
        }
        let report = validate_grid(&store, &reg);
        prop_assert!(!report.has_structural_errors(), "{:?}", report);
    }
}

#[test]
fn top1_matches_linear_scan() {
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = |k: u64| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state % k) as usize
    };
    let truth: Vec<usize> = (0..200).map(|_| next(10)).collect();
    let preds: Vec<usize> = truth.iter().map(|&t| if next(3) == 0 { (t + 1) % 10 } else { t }).collect();
    let hits = truth.iter().zip(&preds).filter(|(a, b)| a == b).count();
    let acc = top1_accuracy(&view(&truth, &[("m", &preds)], 10), "m", 0.95).unwrap();
    assert_eq!(acc.correct as usize, hits);
    assert_eq!(acc.point, hits as f64 / 200.0);
}

#[test]
fn pm_k_matches_brute_force_on_100_sets() {
    // 100 sets with 1..=4 neighbors each, frames laid out consecutively.
    let mut truth = Vec::new();
    let mut layout = Vec::new();
    for s in 0..100usize {
        let size = 1 + (s * 7 + 3) % 5;
        layout.push((truth.len(), size));
        truth.extend(std::iter::repeat_n(s % 6, size));
    }
    let preds: Vec<usize> = truth
        .iter()
        .enumerate()
        .map(|(i, &t)| if (i * 31 + 5) % 13 == 0 { (t + 1) % 6 } else { t })
        .collect();
    let v = view(&truth, &[("m", &preds)], 6);
    let sets: Vec<FrameSet> = layout
        .iter()
        .map(|&(start, size)| {
            let n = (start + 1..start + size).map(|i| format!("e{i}")).collect();
            FrameSet::new(format!("e{start}"), format!("c{}", truth[start]), n).unwrap()
        })
        .collect();
    let brute = layout
        .iter()
        .filter(|&&(start, size)| (start..start + size).all(|i| preds[i] == truth[i]))
        .count();
    let anchors = layout.iter().filter(|&&(start, _)| preds[start] == truth[start]).count();
    assert_eq!(pmk_accuracy(&v, "m", &sets, 2, 0.95).unwrap().correct as usize, brute);
    assert_eq!(pmk_accuracy(&v, "m", &sets, 0, 0.95).unwrap().correct as usize, anchors);
    assert!(brute < anchors);
}

#[test]
fn family_of_38_by_5_matches_two_level_loop() {
    let acc = |c: usize, s: usize| ((c * 37 + s * 11) % 100) as f64 / 100.0;
    let groups: Vec<Vec<String>> = (0..38).map(|c| (1..=5).map(|s| format!("k{c}_{s}")).collect()).collect();
    let lookup = |id: &str| -> Option<f64> {
        let (c, s) = id[1..].split_once('_')?;
        Some(acc(c.parse().ok()?, s.parse().ok()?))
    };
    let got = aggregate_family_accuracy(&Family::Grouped(groups), lookup).unwrap();
    let mut outer = 0.0;
    for c in 0..38 {
        let mut inner = 0.0;
        for s in 1..=5 {
            inner += acc(c, s);
        }
        outer += inner / 5.0;
    }
    assert!((got.value - outer / 38.0).abs() < 1e-12);
    assert_eq!(got.used, 190);
}

#[test]
fn correlation_table_matches_direct_formula() {
    let mut recs = Vec::new();
    let mut x = ShiftRobustness { shift_id: "x".into(), rho: BTreeMap::new() };
    let mut y = ShiftRobustness { shift_id: "y".into(), rho: BTreeMap::new() };
    for i in 0..10 {
        let id = format!("m{i}");
        recs.push(ModelRecord::new(&id, ModelCategory::RobustnessIntervention));
        x.rho.insert(id.clone(), ((i * 17 % 10) as f64 - 4.5) / 100.0);
        y.rho.insert(id, ((i * 7 % 10) as f64 - 3.0) / 80.0);
    }
    let reg = ModelRegistry::from_records(recs).unwrap();
    let got = cross_shift_correlation_table(&[x.clone()], &[y.clone()], &reg, ModelFilter::NonStandardOnly).unwrap();
    let xs: Vec<f64> = x.rho.values().copied().collect();
    let ys: Vec<f64> = y.rho.values().copied().collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|b| (b - my).powi(2)).sum();
    assert!((got[0].r - sxy / (sxx * syy).sqrt()).abs() < 1e-12);
    assert_eq!(got[0].n_models, 10);
}

#[test]
fn bootstrap_band_independent_of_workers() {
    let mut recs = Vec::new();
    let mut pts = Vec::new();
    for i in 0..20 {
        let a1 = 0.4 + 0.02 * i as f64;
        let noise = ((i * 13 % 7) as f64 - 3.0) * 0.03;
        recs.push(ModelRecord::new(format!("m{i}"), ModelCategory::Standard));
        pts.push(FitPoint::new(format!("m{i}"), a1, inverse_logit(0.8 * logit(a1) - 0.2 + noise)));
    }
    let reg = ModelRegistry::from_records(recs).unwrap();
    let band = |w| {
        bootstrap_fit_band(
            &pts,
            &reg,
            &BootstrapConfig {
                replicates: 300,
                master_seed: 42,
                workers: Some(w),
                ..BootstrapConfig::default()
            },
        )
        .unwrap()
    };
    let (a, b, c) = (band(1), band(3), band(8));
    assert_eq!(a, b);
    assert_eq!(a, c);
}
