use std::path::Path;

use proptest::prelude::*;

use synseg::eval::{evaluate_dataset, mean_iou, per_class_iou, ConfusionMatrix};
use synseg::LabelImage;

fn label(w: u32, h: u32, data: &[u8]) -> LabelImage {
    LabelImage::new(w, h, data.to_vec()).unwrap()
}

fn write_dir(dir: &Path, images: &[(&str, LabelImage)]) {
    std::fs::create_dir_all(dir).unwrap();
    for (id, img) in images {
        img.write(&dir.join(format!("{id}.png"))).unwrap();
    }
}

/// Two 1x4 images whose pooled IoU differs from the average of per-image
/// IoUs.
///
/// A: gt 1 1 1 1, pred 1 1 1 0.  B: gt 0 0 0 1, pred 0 0 0 0.
/// Pooled counts (gt, pred): (0,0)=3, (1,0)=2, (1,1)=3, so both classes
/// score 3 / 5 = 0.6. Per image: A has class 0 at 0 and class 1 at 3/4; B
/// has class 0 at 3/4 and class 1 at 0; each averages 0.375.
fn two_image_fixture() -> Vec<(&'static str, LabelImage, LabelImage)> {
    vec![
        ("a", label(4, 1, &[1, 1, 1, 1]), label(4, 1, &[1, 1, 1, 0])),
        ("b", label(4, 1, &[0, 0, 0, 1]), label(4, 1, &[0, 0, 0, 0])),
    ]
}

#[test]
fn pooled_iou_differs_from_per_image_average() {
    let fixture = two_image_fixture();
    let dir = tempfile::tempdir().unwrap();
    let gts: Vec<_> = fixture.iter().map(|(id, g, _)| (*id, g.clone())).collect();
    let preds: Vec<_> = fixture.iter().map(|(id, _, p)| (*id, p.clone())).collect();
    write_dir(&dir.path().join("gt"), &gts);
    write_dir(&dir.path().join("pred"), &preds);
    let report = evaluate_dataset(&dir.path().join("pred"), &dir.path().join("gt")).unwrap();
    assert_eq!(report.images, 2);
    assert_eq!(report.confusion.get(0, 0), 3);
    assert_eq!(report.confusion.get(1, 0), 2);
    assert_eq!(report.confusion.get(1, 1), 3);
    assert!((report.mean - 0.6).abs() < 1e-12);

    let per_image: Vec<f64> = fixture
        .iter()
        .map(|(_, g, p)| {
            let mut m = ConfusionMatrix::new(21);
            m.accumulate(g, p).unwrap();
            mean_iou(&per_class_iou(&m)).unwrap()
        })
        .collect();
    assert_eq!(per_image, vec![0.375, 0.375]);
    assert!((report.mean - 0.375).abs() > 0.2);
}

#[test]
fn identical_directories_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = vec![
        ("x", label(3, 2, &[0, 1, 2, 255, 2, 2])),
        ("y", label(2, 2, &[5, 5, 0, 255])),
    ];
    write_dir(dir.path(), &imgs);
    let report = evaluate_dataset(dir.path(), dir.path()).unwrap();
    assert_eq!(report.mean, 1.0);
    assert_eq!(report.per_class[1], Some(1.0));
    assert_eq!(report.per_class[7], None);
}

#[test]
fn missing_prediction_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    write_dir(&dir.path().join("gt"), &[("x", label(1, 1, &[0])), ("y", label(1, 1, &[1]))]);
    write_dir(&dir.path().join("pred"), &[("x", label(1, 1, &[0]))]);
    assert!(evaluate_dataset(&dir.path().join("pred"), &dir.path().join("gt")).is_err());
}

fn pair() -> impl Strategy<Value = (LabelImage, LabelImage)> {
    (1u32..6, 1u32..6).prop_flat_map(|(w, h)| {
        let n = (w * h) as usize;
        (
            proptest::collection::vec(0u8..4, n),
            proptest::collection::vec(0u8..4, n),
        )
            .prop_map(move |(g, p)| (label(w, h, &g), label(w, h, &p)))
    })
}

proptest! {
    #[test]
    fn order_does_not_matter(pairs in proptest::collection::vec(pair(), 1..6)) {
        let mut fwd = ConfusionMatrix::new(21);
        for (g, p) in &pairs {
            fwd.accumulate(g, p).unwrap();
        }
        let mut rev = ConfusionMatrix::new(21);
        for (g, p) in pairs.iter().rev() {
            rev.accumulate(g, p).unwrap();
        }
        prop_assert_eq!(&fwd, &rev);
    }

    #[test]
    fn swapping_roles_transposes(pairs in proptest::collection::vec(pair(), 1..6)) {
        let mut m = ConfusionMatrix::new(21);
        let mut swapped = ConfusionMatrix::new(21);
        for (g, p) in &pairs {
            m.accumulate(g, p).unwrap();
            swapped.accumulate(p, g).unwrap();
        }
        prop_assert_eq!(&m.transposed(), &swapped);
        // IoU is symmetric in prediction and ground truth.
        prop_assert_eq!(per_class_iou(&m), per_class_iou(&swapped));
    }
}
