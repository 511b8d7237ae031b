use crate::error::{Error, Result};
use crate::voc::{BoxAnnotation, LabelImage};

use super::grabcut::BinaryMask;

/// Combines per-box foreground masks into one label image. Where several
/// masks claim a pixel the smallest box wins, then the lowest class index.
pub fn merge_instance_masks(
    annotation: &BoxAnnotation,
    masks: &[BinaryMask],
    width: u32,
    height: u32,
) -> Result<LabelImage> {
    if masks.len() != annotation.boxes.len() {
        return Err(Error::CountMismatch {
            expected: annotation.boxes.len(),
            found: masks.len(),
        });
    }
    if let Some(m) = masks.iter().find(|m| m.dims() != (width, height)) {
        return Err(Error::DimensionMismatch {
            expected: (width, height),
            found: m.dims(),
            context: Some(annotation.image_id.clone()),
        });
    }
    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by_key(|&i| {
        let b = &annotation.boxes[i];
        (b.area(), b.class_index)
    });
    let mut label = LabelImage::filled(width, height, 0);
    for y in 0..height {
        for x in 0..width {
            if let Some(&i) = order.iter().find(|&&i| masks[i].get(x, y)) {
                label.set(x, y, annotation.boxes[i].class_index);
            }
        }
    }
    Ok(label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voc::LabeledBox;

    fn rect_mask(w: u32, h: u32, b: &LabeledBox) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| b.contains(x, y))
    }

    #[test]
    fn disjoint_masks() {
        let boxes = vec![LabeledBox::new(2, 0, 0, 2, 2), LabeledBox::new(9, 2, 2, 4, 4)];
        let masks: Vec<_> = boxes.iter().map(|b| rect_mask(4, 4, b)).collect();
        let ann = BoxAnnotation::new("a", boxes);
        let l = merge_instance_masks(&ann, &masks, 4, 4).unwrap();
        assert_eq!(
            l.data(),
            &[2, 2, 0, 0, 2, 2, 0, 0, 0, 0, 9, 9, 0, 0, 9, 9]
        );
    }

    #[test]
    fn nested_box_wins() {
        let outer = LabeledBox::new(15, 0, 0, 4, 4);
        let inner = LabeledBox::new(8, 1, 1, 3, 3);
        let masks = vec![rect_mask(4, 4, &outer), rect_mask(4, 4, &inner)];
        let ann = BoxAnnotation::new("a", vec![outer, inner]);
        let l = merge_instance_masks(&ann, &masks, 4, 4).unwrap();
        assert_eq!(
            l.data(),
            &[15, 15, 15, 15, 15, 8, 8, 15, 15, 8, 8, 15, 15, 15, 15, 15]
        );
    }

    #[test]
    fn equal_area_tie_goes_to_lower_class() {
        let a = LabeledBox::new(12, 0, 0, 2, 2);
        let b = LabeledBox::new(4, 1, 1, 3, 3);
        let masks = vec![rect_mask(3, 3, &a), rect_mask(3, 3, &b)];
        let ann = BoxAnnotation::new("a", vec![a, b]);
        let l = merge_instance_masks(&ann, &masks, 3, 3).unwrap();
        assert_eq!(l.get(1, 1), 4);
    }

    #[test]
    fn zero_boxes_and_errors() {
        let ann = BoxAnnotation::new("a", vec![]);
        let l = merge_instance_masks(&ann, &[], 3, 2).unwrap();
        assert_eq!(l, LabelImage::filled(3, 2, 0));
        assert!(matches!(
            merge_instance_masks(&ann, &[BinaryMask::background(3, 2)], 3, 2),
            Err(Error::CountMismatch { expected: 0, found: 1 })
        ));
        let one = BoxAnnotation::new("a", vec![LabeledBox::new(1, 0, 0, 1, 1)]);
        assert!(merge_instance_masks(&one, &[BinaryMask::background(2, 2)], 3, 2).is_err());
    }
}
