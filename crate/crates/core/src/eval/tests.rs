use super::*;
use crate::oracle::SemanticRegion;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn field() -> FieldGeometry {
    FieldGeometry::with_ppd(44, 320, 320).unwrap()
}

fn rect(x: f64, y: f64, w: f64, h: f64) -> Mask {
    Mask::Rect {
        x,
        y,
        width: w,
        height: h,
    }
}

fn region(id: &str, m: Mask, c: Category) -> SemanticRegion {
    SemanticRegion::new(id, m, 1.0, vec![1.0, 0.0], c)
}

fn scene(id: &str, regions: Vec<SemanticRegion>) -> Scene {
    Scene::new(id, Placement::full(&field()), regions, vec![0.0, 1.0])
}

fn seq(scene: &str, subject: &str, pts: &[(f64, f64)]) -> FixationSequence {
    let mut f = vec![FixationPoint::new(160.0, 160.0, 0)];
    f.extend(pts.iter().enumerate().map(|(i, &(x, y))| FixationPoint::new(x, y, i + 1)));
    let mut s = FixationSequence::new(scene, "test", f);
    s.subject_id = Some(subject.into());
    s
}

fn masks_of(s: &Scene) -> CategoryMaskSet {
    CategoryMaskSet::from_scene(s, &field(), CENTER_BIAS_DIAMETER_DVA).unwrap()
}

fn map(w: usize, h: usize, values: Vec<f64>) -> PriorityMap {
    PriorityMap {
        width: w,
        height: h,
        values,
        source: "t".into(),
    }
}

#[test]
fn tolerance_boundary_in_degrees() {
    // pixels 100..=119; last pixel centre at x = 119
    let s = scene("a", vec![region("t", rect(100.0, 100.0, 20.0, 20.0), Category::Text)]);
    let m = masks_of(&s);
    let at = |dva: f64| seq("a", "p", &[(119.0 + dva * 44.0, 110.0)]);
    assert_eq!(assign_fixations(&at(0.69), &m, 0.7, 4)[EvalCategory::Text.index()], Some(1.0));
    assert_eq!(assign_fixations(&at(0.71), &m, 0.7, 4)[EvalCategory::Text.index()], Some(0.0));
    assert_eq!(assign_fixations(&at(0.0), &m, 0.0, 4)[EvalCategory::Text.index()], Some(1.0));
}

#[test]
fn only_the_first_post_initial_fixations_count() {
    let s = scene("a", vec![region("t", rect(0.0, 0.0, 20.0, 20.0), Category::Text)]);
    let m = masks_of(&s);
    let far = (300.0, 300.0);
    let near = (10.0, 10.0);
    let q = seq("a", "p", &[far, far, far, far, near, near]);
    assert_eq!(assign_fixations(&q, &m, 0.7, 4)[EvalCategory::Text.index()], Some(0.0));
    assert_eq!(assign_fixations(&q, &m, 0.7, 6)[EvalCategory::Text.index()], Some(2.0));
    // the initial fixation never counts
    let mut only = seq("a", "p", &[]);
    only.fixations[0] = FixationPoint::new(10.0, 10.0, 0);
    assert_eq!(assign_fixations(&only, &m, 0.7, 4)[EvalCategory::Text.index()], Some(0.0));
}

#[test]
fn one_fixation_counts_for_every_category_it_touches() {
    let s = scene(
        "a",
        vec![
            region("p", rect(150.0, 150.0, 20.0, 20.0), Category::Person),
            region("t", rect(150.0, 150.0, 20.0, 20.0), Category::Text),
            region("t2", rect(155.0, 155.0, 5.0, 5.0), Category::Text),
        ],
    );
    let h = assign_fixations(&seq("a", "p", &[(157.0, 157.0)]), &masks_of(&s), 0.7, 4);
    assert_eq!(h[EvalCategory::People.index()], Some(1.0));
    assert_eq!(h[EvalCategory::Text.index()], Some(1.0));
    assert_eq!(h[EvalCategory::CenterBias.index()], Some(1.0));
    assert_eq!(h[EvalCategory::SuI.index()], None);
}

#[test]
fn su_i_hits_are_divided_by_object_count() {
    let objs = (0..4)
        .map(|i| region(&format!("o{i}"), rect(i as f64 * 80.0, 0.0, 10.0, 10.0), Category::SuI))
        .collect();
    let m = masks_of(&scene("a", objs));
    let h = assign_fixations(&seq("a", "p", &[(5.0, 5.0), (85.0, 5.0), (5.0, 300.0)]), &m, 0.1, 4);
    assert!((h[EvalCategory::SuI.index()].unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn su_r_applicability() {
    let cued = {
        let mut r = region("r", rect(0.0, 0.0, 10.0, 10.0), Category::SuR);
        r.gaze_grasp = true;
        r
    };
    let plain = region("r2", rect(50.0, 0.0, 10.0, 10.0), Category::SuR);
    let person = region("p", rect(200.0, 200.0, 10.0, 10.0), Category::Person);
    let gg = EvalCategory::SuRGazeGrasp;
    let no = EvalCategory::SuRNoGazeGrasp;

    let with_cue = masks_of(&scene("a", vec![cued.clone(), plain.clone(), person.clone()]));
    assert!(with_cue.applies(gg) && !with_cue.applies(no));
    assert_eq!(with_cue.get(gg).unwrap().objects.len(), 1);

    let people_no_cue = masks_of(&scene("b", vec![plain.clone(), person]));
    assert!(!people_no_cue.applies(gg) && !people_no_cue.applies(no));

    let no_people = masks_of(&scene("c", vec![cued, plain]));
    assert!(!no_people.applies(gg) && no_people.applies(no));
    assert_eq!(no_people.get(no).unwrap().objects.len(), 2);
    assert!(no_people.applies(EvalCategory::CenterBias));
    assert!(!no_people.applies(EvalCategory::People));
}

#[test]
fn center_bias_disc_has_five_degree_diameter() {
    let m = masks_of(&scene("a", vec![region("t", rect(0.0, 0.0, 4.0, 4.0), Category::Text)]));
    let d = &m.get(EvalCategory::CenterBias).unwrap().objects[0];
    let r = 2.5 * 44.0;
    let expect = std::f64::consts::PI * r * r;
    assert!((d.area as f64 - expect).abs() / expect < 0.01, "{} vs {expect}", d.area);
    let (cx, cy) = d.centroid().unwrap();
    assert!((cx - 160.0).abs() < 1.0 && (cy - 160.0).abs() < 1.0);
}

#[test]
fn salient_disc_at_map_maximum() {
    let f = field();
    let mut m = masks_of(&scene("a", vec![region("t", rect(0.0, 0.0, 4.0, 4.0), Category::Text)]));
    assert!(!m.applies(EvalCategory::Salient));
    let mut values = vec![0.0; 320 * 320];
    values[200 * 320 + 100] = 1.0;
    m.set_salient_from_map(&map(320, 320, values), 400.0, &f).unwrap();
    let d = &m.get(EvalCategory::Salient).unwrap().objects[0];
    assert!(d.contains_pixel(100, 200));
    assert!((d.area as f64 - 400.0).abs() < 40.0);
}

#[test]
fn dilation_matches_pixel_distance() {
    let masks = [
        rect(30.0, 40.0, 17.0, 9.0),
        Mask::Ellipse {
            cx: 60.0,
            cy: 50.0,
            rx: 12.0,
            ry: 5.0,
        },
    ];
    for m in masks {
        let r = m.rasterize(100, 100).unwrap();
        for radius in [0.0, 1.0, 3.5, 7.2] {
            let d = dilate(&r, radius, 100, 100);
            for y in 0..100usize {
                for x in 0..100usize {
                    let want = r.distance(x as f64, y as f64) <= radius;
                    assert_eq!(d.contains_pixel(x, y), want, "({x},{y}) r={radius}");
                }
            }
        }
    }
}

#[test]
fn dilated_fraction_of_whole_image() {
    let s = scene("a", vec![region("t", rect(0.0, 0.0, 320.0, 320.0), Category::Text)]);
    let m = masks_of(&s);
    assert!((m.dilated_fraction(EvalCategory::Text, 0.7).unwrap() - 1.0).abs() < 1e-12);
    assert!(m.dilated_fraction(EvalCategory::People, 0.7).is_none());
    // a single pixel at 0 tolerance
    let s = scene("b", vec![region("t", rect(10.0, 10.0, 1.0, 1.0), Category::SuI)]);
    let m = masks_of(&s);
    assert!((m.dilated_fraction(EvalCategory::SuI, 0.0).unwrap() - 1.0 / (320.0 * 320.0)).abs() < 1e-15);
}

#[test]
fn frequency_table_uses_subject_means() {
    let a = scene("a", vec![region("t", rect(0.0, 0.0, 20.0, 20.0), Category::Text)]);
    let b = scene("b", vec![region("p", rect(0.0, 0.0, 20.0, 20.0), Category::Person)]);
    let masks: BTreeMap<_, _> = [(a.id.clone(), masks_of(&a)), (b.id.clone(), masks_of(&b))].into();
    let on = (10.0, 10.0);
    let off = (300.0, 10.0);
    let seqs = vec![
        seq("a", "s1", &[on, on, off, off]),
        seq("a", "s2", &[on, off, off, off]),
        seq("b", "s1", &[on, off, off, off]),
        seq("b", "s2", &[on, off, off, off]),
        seq("missing", "s1", &[on]),
    ];
    let t = frequency_table("human", &seqs, &masks, 0.7, 4).unwrap();
    let text = t.stat(EvalCategory::Text).unwrap();
    assert_eq!((text.images, text.units), (1, 2));
    assert!((text.mean - 1.5).abs() < 1e-12);
    // sd of {2, 1} is √0.5, over √2
    assert!((text.se - 0.5).abs() < 1e-12);
    let people = t.stat(EvalCategory::People).unwrap();
    assert_eq!((people.mean, people.se), (1.0, 0.0));
    assert!(t.stat(EvalCategory::SuI).is_none());
    // center bias applies to both images
    assert_eq!(t.stat(EvalCategory::CenterBias).unwrap().images, 2);
    assert!(frequency_table("x", &seqs[4..], &masks, 0.7, 4).is_err());
}

#[test]
fn repeated_runs_of_a_unit_are_averaged() {
    let a = scene("a", vec![region("t", rect(0.0, 0.0, 20.0, 20.0), Category::Text)]);
    let masks: BTreeMap<_, _> = [(a.id.clone(), masks_of(&a))].into();
    let seqs = vec![seq("a", "m", &[(10.0, 10.0)]), seq("a", "m", &[(300.0, 300.0)])];
    let t = frequency_table("model", &seqs, &masks, 0.7, 4).unwrap();
    assert_eq!(t.stat(EvalCategory::Text).unwrap().mean, 0.5);
    assert_eq!(t.unit_means.len(), 1);
}

#[test]
fn independent_nll_by_hand() {
    let v = nll_independent(&[1.0, 2.0], &[1.0, 0.0], &[0.5, 2.0]).unwrap();
    let two_pi = 2.0 * std::f64::consts::PI;
    let expect = 0.5 * (two_pi * 0.25).ln() + 4.0 / 8.0 + 0.5 * (two_pi * 4.0).ln();
    assert!((v - expect).abs() < 1e-12);
    assert!(nll_independent(&[1.0], &[1.0], &[0.0]).is_err());
    assert!(nll_independent(&[1.0, 2.0], &[1.0], &[1.0]).is_err());
}

#[test]
fn mvn_nll_against_closed_form_2x2() {
    let (a, b, d): (f64, f64, f64) = (0.04, 0.01, 0.09);
    let cov = DMatrix::from_row_slice(2, 2, &[a, b, b, d]);
    let (x, mu) = ([0.3, -0.1], [0.1, 0.2]);
    let det = a * d - b * b;
    let (e0, e1) = (x[0] - mu[0], x[1] - mu[1]);
    let quad = (d * e0 * e0 - 2.0 * b * e0 * e1 + a * e1 * e1) / det;
    let expect = 0.5 * quad + 0.5 * det.ln() + (2.0 * std::f64::consts::PI).ln();
    assert!((nll_mvn(&x, &mu, &cov).unwrap() - expect).abs() < 1e-10);
}

#[test]
fn mvn_ridge_rescues_rank_deficient_covariance() {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    let v = nll_mvn(&[0.0, 0.0], &[0.0, 0.0], &cov).unwrap();
    assert!(v.is_finite());
    assert!(nll_mvn(&[0.0, 0.0], &[0.0, 0.0], &DMatrix::zeros(2, 2)).is_err());
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    assert!(nll_mvn(&[0.0, 0.0], &[0.0, 0.0], &asym).is_err());
}

#[test]
fn nnll_rejects_non_positive_baseline() {
    assert_eq!(nnll(3.0, 6.0).unwrap(), 0.5);
    assert!(nnll(3.0, 0.0).is_err());
    let e = nnll(3.0, -1.0).unwrap_err().to_string();
    assert!(e.contains("raw"), "{e}");
}

#[test]
fn covariance_of_means_has_se_on_the_diagonal() {
    let a = scene("a", vec![region("t", rect(0.0, 0.0, 20.0, 20.0), Category::Text)]);
    let masks: BTreeMap<_, _> = [(a.id.clone(), masks_of(&a))].into();
    let on = (10.0, 10.0);
    let off = (300.0, 10.0);
    let seqs = vec![
        seq("a", "s1", &[on, on, off]),
        seq("a", "s2", &[on, off, off]),
        seq("a", "s3", &[off, off, (160.0, 160.0)]),
    ];
    let t = frequency_table("h", &seqs, &masks, 0.7, 4).unwrap();
    let cats = t.complete_categories();
    assert_eq!(cats, vec![EvalCategory::CenterBias, EvalCategory::Text]);
    let cov = t.mean_covariance(&cats).unwrap();
    for (i, c) in cats.iter().enumerate() {
        assert!((cov[(i, i)] - t.stat(*c).unwrap().se.powi(2)).abs() < 1e-12);
    }
    assert!((cov[(0, 1)] - cov[(1, 0)]).abs() < 1e-15);
}

#[test]
fn heatmap_shape() {
    let f = field();
    let p = FixationPoint::new(100.0, 120.0, 1);
    let m = fixation_heatmap(&[p], &f, 0.25).unwrap();
    let sigma = 11.0;
    assert!((m.get(100, 120) - 1.0).abs() < 1e-12);
    assert!((m.get(111, 120) - (-0.5f64).exp()).abs() < 1e-12);
    assert!((m.get(100, 109) - (-0.5f64).exp()).abs() < 1e-12);
    assert_eq!(m.get(100 + (5.0 * sigma) as usize + 2, 120), 0.0);

    let two = fixation_heatmap(&[p, p], &f, 0.25).unwrap();
    for (a, b) in m.values.iter().zip(&two.values) {
        assert!((2.0 * a - b).abs() < 1e-12);
    }
    let q = FixationPoint::new(200.4, 60.0, 2);
    let both = fixation_heatmap(&[p, q], &f, 0.25).unwrap();
    let kernel = m.values.iter().sum::<f64>();
    assert!((both.values.iter().sum::<f64>() - 2.0 * kernel).abs() < 1e-9);
    // continuous kernel mass 2πσ²
    assert!((kernel / (2.0 * std::f64::consts::PI * sigma * sigma) - 1.0).abs() < 1e-3);
    assert!(fixation_heatmap(&[FixationPoint::new(400.0, 0.0, 1)], &f, 0.25).is_err());
    assert!(fixation_heatmap(&[p], &f, 0.0).is_err());
}

/// ROC area by sweeping every distinct map value.
fn brute_auc(m: &PriorityMap, fix: &[(usize, usize)]) -> f64 {
    let fixated: BTreeSet<usize> = fix.iter().map(|&(x, y)| y * m.width + x).collect();
    let mut thresholds: Vec<f64> = fix.iter().map(|&(x, y)| m.get(x, y)).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let neg = (m.values.len() - fix.len()) as f64;
    let mut pts = vec![(0.0, 0.0)];
    for t in thresholds {
        let tp = fix.iter().filter(|&&(x, y)| m.get(x, y) >= t).count() as f64 / fix.len() as f64;
        let fp = (0..m.values.len())
            .filter(|i| !fixated.contains(i) && m.values[*i] >= t)
            .count() as f64
            / neg;
        pts.push((fp, tp));
    }
    pts.push((1.0, 1.0));
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

#[test]
fn auc_on_a_checkerboard() {
    let (w, h) = (16, 12);
    let values: Vec<f64> = (0..w * h).map(|i| ((i % w / 4 + i / w / 4) % 2) as f64).collect();
    let m = map(w, h, values);
    let fix = [(0, 4), (5, 0), (13, 9), (9, 5)];
    for &(x, y) in &fix {
        assert_eq!(m.get(x, y), 1.0);
    }
    let pts: Vec<_> = fix.iter().map(|&(x, y)| FixationPoint::new(x as f64, y as f64, 1)).collect();
    let a = auc(&m, &pts).unwrap();
    let high = m.values.iter().filter(|v| **v == 1.0).count() as f64;
    let fp = (high - 4.0) / (w * h - 4) as f64;
    assert!((a.value - (1.0 - fp / 2.0)).abs() < 1e-12);
    assert!((a.value - brute_auc(&m, &fix)).abs() < 1e-12);
    assert!(!a.flagged);
}

#[test]
fn auc_constant_map_is_flagged_chance() {
    let m = map(4, 4, vec![0.3; 16]);
    let a = auc(&m, &[FixationPoint::new(1.0, 1.0, 1)]).unwrap();
    assert_eq!(a, AucScore { value: 0.5, flagged: true });
    assert!(auc(&m, &[]).is_err());
    assert!(auc(&map(4, 4, (0..16).map(f64::from).collect()), &[FixationPoint::new(9.0, 1.0, 1)]).is_err());
}

#[test]
fn cc_basics() {
    let a = map(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 7.0]);
    let neg = map(3, 2, a.values.iter().map(|v| -v).collect());
    assert!((cc(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    assert!((cc(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
    assert!(cc(&a, &map(3, 2, vec![2.0; 6])).is_err());
    assert!(cc(&a, &map(2, 3, a.values.clone())).is_err());
}

#[test]
fn cc_of_independent_noise_is_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100 * 100;
    let a = map(100, 100, (0..n).map(|_| rng.random::<f64>()).collect());
    let b = map(100, 100, (0..n).map(|_| rng.random::<f64>()).collect());
    assert!(cc(&a, &b).unwrap().abs() < 0.05);
}

#[test]
fn bootstrap_interval_brackets_the_mean() {
    let vals: Vec<f64> = (0..40).map(|i| (i % 7) as f64).collect();
    let mean = vals.iter().sum::<f64>() / 40.0;
    let stat = |idx: &[usize]| idx.iter().map(|&i| vals[i]).sum::<f64>() / idx.len() as f64;
    let mut r1 = ChaCha8Rng::seed_from_u64(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(1);
    let (lo, hi) = bootstrap_ci(40, 2000, 0.95, &mut r1, stat).unwrap();
    assert!(lo < mean && mean < hi);
    assert_eq!((lo, hi), bootstrap_ci(40, 2000, 0.95, &mut r2, stat).unwrap());
    // sd ≈ 2 → SE ≈ 0.32; interval roughly ±1.96 SE
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 39.0).sqrt();
    let width = hi - lo;
    assert!((width / (2.0 * 1.96 * sd / 40f64.sqrt()) - 1.0).abs() < 0.15, "{width}");
    assert!(bootstrap_ci(0, 10, 0.95, &mut r1, stat).is_err());
    assert!(bootstrap_ci(4, 10, 1.0, &mut r1, stat).is_err());
}

fn two_scene_study() -> (Vec<Scene>, Vec<FixationSequence>) {
    let a = scene(
        "a",
        vec![
            region("t", rect(20.0, 20.0, 40.0, 40.0), Category::Text),
            region("p", rect(240.0, 240.0, 40.0, 60.0), Category::Person),
        ],
    );
    let b = scene("b", vec![region("t", rect(250.0, 20.0, 40.0, 40.0), Category::Text)]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut human = Vec::new();
    for s in 0..6 {
        for (id, target) in [("a", (40.0, 40.0)), ("b", (270.0, 40.0))] {
            let pts: Vec<(f64, f64)> = (0..4)
                .map(|_| {
                    if rng.random::<f64>() < 0.6 {
                        (target.0 + rng.random_range(-10.0..10.0), target.1 + rng.random_range(-10.0..10.0))
                    } else {
                        (rng.random_range(0.0..319.0), rng.random_range(0.0..319.0))
                    }
                })
                .collect();
            human.push(seq(id, &format!("s{s}"), &pts));
        }
    }
    (vec![a, b], human)
}

#[test]
fn evaluation_prefers_the_human_like_model() {
    let (scenes, human) = two_scene_study();
    let f = field();
    let model = |name: &str, a: (f64, f64), b: (f64, f64)| {
        let mk = |id: &str, p: (f64, f64)| {
            let mut s = FixationSequence::new(id, name, vec![FixationPoint::new(160.0, 160.0, 0)]);
            s.fixations.extend((1..=4).map(|i| FixationPoint::new(p.0 + i as f64, p.1, i)));
            s
        };
        vec![mk("a", a), mk("b", b)]
    };
    let models: BTreeMap<String, Vec<FixationSequence>> = [
        ("good".to_string(), model("good", (40.0, 40.0), (270.0, 40.0))),
        ("bad".to_string(), model("bad", (150.0, 300.0), (20.0, 300.0))),
    ]
    .into();
    let config = EvalConfig {
        baseline: Some("bad".into()),
        frequency_resamples: 500,
        map_resamples: 50,
        ..EvalConfig::default()
    };
    let r = evaluate(&scenes, &f, &human, &models, &config, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let get = |n: &str| r.scores.iter().find(|s| s.source == n).unwrap();
    let (good, bad) = (get("good"), get("bad"));
    assert!(good.auc > bad.auc, "{} {}", good.auc, bad.auc);
    assert!(good.cc > bad.cc);
    assert!(good.auc_ci.0 <= good.auc && good.auc <= good.auc_ci.1);
    assert_eq!(bad.nnll_indep, Some(1.0));
    assert!(good.nnll_indep.unwrap() < 1.0);
    assert_eq!(r.human.stat(EvalCategory::Text).unwrap().units, 6);
    assert!(r.human_ci.contains_key(&EvalCategory::Text));

    let back = EvaluationReport::from_json(&r.to_json().unwrap()).unwrap();
    assert_eq!(back.scores.len(), 2);
    assert_eq!(back.human, r.human);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("freq.csv");
    r.write_frequency_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("source,category,mean,se,images,units\n"));
    assert!(text.contains("human,text,"));
    assert!(text.contains("good,people,"));

    let missing = EvalConfig {
        baseline: Some("nobody".into()),
        ..config
    };
    assert!(evaluate(&scenes, &f, &human, &models, &missing, &mut ChaCha8Rng::seed_from_u64(9)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn diagonal_mvn_equals_independent(
        v in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, 0.01f64..1.5), 1..7)
    ) {
        let x: Vec<f64> = v.iter().map(|t| t.0).collect();
        let mu: Vec<f64> = v.iter().map(|t| t.1).collect();
        let se: Vec<f64> = v.iter().map(|t| t.2).collect();
        let cov = DMatrix::from_diagonal(&DVector::from_iterator(se.len(), se.iter().map(|s| s * s)));
        let a = nll_independent(&x, &mu, &se).unwrap();
        let b = nll_mvn(&x, &mu, &cov).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{} {}", a, b);
    }

    #[test]
    fn auc_is_invariant_to_monotone_transforms(
        values in proptest::collection::vec(0.0f64..1.0, 64),
        fix in proptest::collection::vec((0usize..8, 0usize..8), 1..10),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let m = map(8, 8, values.clone());
        let t = map(8, 8, values.iter().map(|v| (scale * v + shift).exp()).collect());
        let pts: Vec<_> = fix.iter().map(|&(x, y)| FixationPoint::new(x as f64, y as f64, 1)).collect();
        let a = auc(&m, &pts).unwrap().value;
        let b = auc(&t, &pts).unwrap().value;
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn auc_matches_brute_force(
        values in proptest::collection::vec(0u8..6, 36),
        fix in proptest::collection::btree_set((0usize..6, 0usize..6), 1..8),
    ) {
        let m = map(6, 6, values.iter().map(|&v| v as f64).collect());
        prop_assume!(m.values.iter().any(|v| *v != m.values[0]));
        let fix: Vec<_> = fix.into_iter().collect();
        let pts: Vec<_> = fix.iter().map(|&(x, y)| FixationPoint::new(x as f64, y as f64, 1)).collect();
        prop_assert!((auc(&m, &pts).unwrap().value - brute_auc(&m, &fix)).abs() < 1e-12);
    }

    #[test]
    fn cc_is_invariant_to_positive_affine_maps(
        values in proptest::collection::vec(-1.0f64..1.0, 30),
        other in proptest::collection::vec(-1.0f64..1.0, 30),
        scale in 0.01f64..100.0,
        shift in -10.0f64..10.0,
    ) {
        let a = map(6, 5, values.clone());
        let b = map(6, 5, other);
        let t = map(6, 5, values.iter().map(|v| scale * v + shift).collect());
        let (x, y) = (cc(&a, &b).unwrap(), cc(&t, &b).unwrap());
        prop_assert!((x - y).abs() < 1e-9);
        prop_assert!(x.abs() <= 1.0 + 1e-12);
    }
}
