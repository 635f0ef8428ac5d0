use std::collections::{BTreeMap, BTreeSet};

use cishtex_core::evaluation::{
    aggregate, confusion, crop_path, grade_classes, sample_tiles, weighted_mean, AnnotationRecord, SampleCandidate,
    CLASS_ROW_TILE_ID,
};
use cishtex_core::io::{read_annotations, write_annotations};
use cishtex_core::Error;
use proptest::prelude::*;

const EVALUATORS: [(&str, f64); 4] = [("e1", 3.0), ("e2", 2.0), ("e3", 1.0), ("e4", 1.0)];

fn rec(evaluator: &str, weight: f64, tile_id: i64, strength: i64, pattern: i64) -> AnnotationRecord {
    AnnotationRecord {
        evaluator_id: evaluator.into(),
        weight,
        tile_id,
        strength,
        pattern,
        class_id: None,
    }
}

fn class_rec(evaluator: &str, weight: f64, class: usize, strength: i64, pattern: i64) -> AnnotationRecord {
    AnnotationRecord {
        class_id: Some(class),
        ..rec(evaluator, weight, CLASS_ROW_TILE_ID, strength, pattern)
    }
}

fn panel(tile_id: i64, strengths: [i64; 4], patterns: [i64; 4]) -> Vec<AnnotationRecord> {
    EVALUATORS
        .iter()
        .enumerate()
        .map(|(i, &(id, w))| rec(id, w, tile_id, strengths[i], patterns[i]))
        .collect()
}

#[test]
fn weighted_examples() {
    let g = aggregate(&panel(0, [3, 2, 1, 0], [0; 4]), None).unwrap();
    assert_eq!(g[0].strength_mean, 2.0);
    assert_eq!(g[0].strength, 2);
    let g = aggregate(&panel(0, [1, 1, 0, 0], [2, 2, 2, 2]), None).unwrap();
    assert_eq!(g[0].strength_mean, 5.0 / 7.0);
    assert_eq!(g[0].strength, 1);
    assert_eq!((g[0].pattern_mean, g[0].pattern), (2.0, 2));
    assert_eq!(g[0].evaluators, 4);
    assert_eq!(g[0].weight_total, 7.0);
}

#[test]
fn class_grade_examples() {
    let classes: BTreeSet<usize> = [0, 1, 2].into();
    let mut records = Vec::new();
    for (id, w) in EVALUATORS {
        records.push(class_rec(id, w, 0, 3, 2));
    }
    for ((id, w), s) in EVALUATORS.iter().zip([2, 2, 3, 3]) {
        records.push(class_rec(id, *w, 1, s, 1));
    }
    records.push(class_rec("e3", 1.0, 2, 1, 0));
    let g = grade_classes(&records, &classes).unwrap();
    assert_eq!((g[0].strength, g[0].pattern), (3, 2));
    assert_eq!(g[1].strength_mean, 16.0 / 7.0);
    assert_eq!(g[1].strength, 2);
    assert_eq!((g[2].strength, g[2].pattern), (1, 0));

    let more: BTreeSet<usize> = [0, 1, 2, 3].into();
    assert!(matches!(
        grade_classes(&records, &more),
        Err(Error::MissingClassScore(3))
    ));
    let fewer: BTreeSet<usize> = [0, 1].into();
    assert!(matches!(grade_classes(&records, &fewer), Err(Error::UnknownClass(2))));
}

#[test]
fn bad_records_rejected() {
    assert!(matches!(
        aggregate(&[rec("a", 1.0, 0, 4, 0)], None),
        Err(Error::OutOfRangeScore(_))
    ));
    assert!(matches!(
        aggregate(&[rec("a", 1.0, 0, 0, 3)], None),
        Err(Error::OutOfRangeScore(_))
    ));
    assert!(matches!(
        aggregate(&[rec("a", 1.0, 0, -1, 0)], None),
        Err(Error::OutOfRangeScore(_))
    ));
    assert!(matches!(
        aggregate(&[rec("a", 0.0, 0, 1, 0)], None),
        Err(Error::OutOfRangeScore(_))
    ));
    let known: BTreeSet<i64> = [1, 2].into();
    assert!(matches!(
        aggregate(&[rec("a", 1.0, 5, 1, 0)], Some(&known)),
        Err(Error::UnknownTile(5))
    ));
}

fn perfect_fixture(tiles: i64, classes: usize) -> (Vec<AnnotationRecord>, BTreeMap<i64, usize>) {
    let mut records = Vec::new();
    let mut labels = BTreeMap::new();
    for t in 0..tiles {
        let class = t as usize % classes;
        labels.insert(t, class);
        let s = (class % 4) as i64;
        let p = (class % 3) as i64;
        records.extend(panel(t, [s; 4], [p; 4]));
    }
    for class in 0..classes {
        for (id, w) in EVALUATORS {
            records.push(class_rec(id, w, class, (class % 4) as i64, (class % 3) as i64));
        }
    }
    (records, labels)
}

fn report(records: &[AnnotationRecord], labels: &BTreeMap<i64, usize>) -> cishtex_core::evaluation::EvaluationReport {
    let classes: BTreeSet<usize> = labels.values().copied().collect();
    let tiles = aggregate(records, None).unwrap();
    let class_grades = grade_classes(records, &classes).unwrap();
    confusion(&tiles, &class_grades, labels).unwrap()
}

#[test]
fn perfect_agreement_on_seventy_tiles() {
    let (records, labels) = perfect_fixture(70, 7);
    let rep = report(&records, &labels);
    assert_eq!(rep.annotated_tiles, 70);
    for axis in [&rep.strength, &rep.pattern] {
        assert_eq!(axis.accuracy, 1.0);
        assert_eq!(axis.adjacent_accuracy, 1.0);
        assert_eq!(axis.total(), 70);
        for (i, row) in axis.matrix.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert!(i == j || v == 0);
            }
        }
    }
    assert_eq!(rep.strength.matrix.len(), 4);
    assert_eq!(rep.pattern.matrix.len(), 3);
}

#[test]
fn scaling_weights_by_ten_changes_nothing() {
    let (records, labels) = perfect_fixture(70, 7);
    let mut noisy = records.clone();
    for (i, r) in noisy.iter_mut().enumerate() {
        r.strength = (r.strength + (i % 3) as i64).min(3);
        r.pattern = (r.pattern + (i % 2) as i64).min(2);
    }
    let scaled: Vec<AnnotationRecord> = noisy
        .iter()
        .map(|r| AnnotationRecord {
            weight: r.weight * 10.0,
            ..r.clone()
        })
        .collect();
    let a = report(&noisy, &labels);
    let b = report(&scaled, &labels);
    assert_eq!(a.strength, b.strength);
    assert_eq!(a.pattern, b.pattern);
    assert_eq!(a.class_grades, b.class_grades);
    assert_eq!(a.tiles, b.tiles);
}

#[test]
fn annotations_csv_round_trip() {
    let mut records = panel(4, [3, 2, 1, 0], [2, 1, 0, 0]);
    records.push(class_rec("e1", 3.0, 2, 1, 1));
    let mut buf = Vec::new();
    write_annotations(&mut buf, &records).unwrap();
    assert_eq!(read_annotations(buf.as_slice()).unwrap(), records);
    // class_id is optional when no class rows are present.
    let plain = "evaluator_id,weight,tile_id,strength,pattern\ne1,3,7,2,1\n";
    assert_eq!(
        read_annotations(plain.as_bytes()).unwrap(),
        vec![rec("e1", 3.0, 7, 2, 1)]
    );
}

fn candidates(per_class: &[usize]) -> Vec<SampleCandidate> {
    let mut out = Vec::new();
    for (class, &n) in per_class.iter().enumerate() {
        for _ in 0..n {
            let id = out.len();
            out.push(SampleCandidate {
                tile_id: id,
                class,
                bbox: [id, id, id + 10, id + 10],
            });
        }
    }
    out
}

#[test]
fn seventy_tiles_from_seven_classes() {
    let c = candidates(&[10, 14, 30, 11, 25, 12, 40]);
    let m = sample_tiles(&c, 10, 2024);
    assert_eq!(m.tiles.len(), 70);
    assert!(m.warnings.is_empty());
    let mut per_class = BTreeMap::new();
    for e in &m.tiles {
        *per_class.entry(e.hidden_class).or_insert(0) += 1;
        assert_eq!(e.image_path, crop_path(e.tile_id));
        assert_eq!(c[e.tile_id].class, e.hidden_class);
    }
    assert!(per_class.values().all(|&n| n == 10));
    let mut order: Vec<usize> = m.tiles.iter().map(|e| e.order).collect();
    order.sort();
    assert_eq!(order, (0..70).collect::<Vec<_>>());
    assert_eq!(sample_tiles(&c, 10, 2024), m);
    assert_ne!(sample_tiles(&c, 10, 2025).tiles, m.tiles);
}

#[test]
fn short_class_exhausted_with_warning() {
    let m = sample_tiles(&candidates(&[3, 12]), 10, 1);
    assert_eq!(m.tiles.iter().filter(|e| e.hidden_class == 0).count(), 3);
    assert_eq!(m.warnings.len(), 1);
}

proptest! {
    #[test]
    fn mean_within_score_range(scores in prop::collection::vec((0.01f64..50.0, 0i64..=3), 1..12)) {
        let pairs: Vec<(f64, f64)> = scores.iter().map(|&(w, s)| (w, s as f64)).collect();
        let m = weighted_mean(&pairs);
        let lo = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= m && m <= hi);
    }

    #[test]
    fn integer_weight_scaling_is_exact(
        scores in prop::collection::vec((1u32..10, 0i64..=3, 0i64..=2), 1..8),
        factor in prop::sample::select(vec![2.0f64, 4.0, 10.0, 0.5]),
    ) {
        let records: Vec<AnnotationRecord> = scores
            .iter()
            .enumerate()
            .map(|(i, &(w, s, p))| rec(&format!("e{i}"), w as f64, 0, s, p))
            .collect();
        let scaled: Vec<AnnotationRecord> = records
            .iter()
            .map(|r| AnnotationRecord { weight: r.weight * factor, ..r.clone() })
            .collect();
        let a = aggregate(&records, None).unwrap();
        let b = aggregate(&scaled, None).unwrap();
        prop_assert_eq!(a[0].strength_mean, b[0].strength_mean);
        prop_assert_eq!(a[0].pattern_mean, b[0].pattern_mean);
        prop_assert_eq!((a[0].strength, a[0].pattern), (b[0].strength, b[0].pattern));
    }

    #[test]
    fn confusion_totals_match_tile_count(
        grades in prop::collection::vec((0i64..=3, 0i64..=2, 0usize..4), 1..60),
    ) {
        let mut records = Vec::new();
        let mut labels = BTreeMap::new();
        for (t, &(s, p, class)) in grades.iter().enumerate() {
            records.push(rec("e", 1.0, t as i64, s, p));
            labels.insert(t as i64, class);
        }
        for class in 0..4 {
            records.push(class_rec("e", 1.0, class, class as i64 % 4, class as i64 % 3));
        }
        let classes: BTreeSet<usize> = (0..4).collect();
        let rep = confusion(
            &aggregate(&records, None).unwrap(),
            &grade_classes(&records, &classes).unwrap(),
            &labels,
        )
        .unwrap();
        prop_assert_eq!(rep.strength.total(), grades.len() as u64);
        prop_assert_eq!(rep.pattern.total(), grades.len() as u64);
        prop_assert!(rep.strength.adjacent_accuracy >= rep.strength.accuracy);
    }
}
