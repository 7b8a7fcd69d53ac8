//! Box overlap and distance measures.
//!
//! Zero-area boxes have no overlap with anything, including an identical
//! zero-area box, so their IoU is always `0`.

use crate::graph::BoundingBox;
use crate::scalar::Scalar;

fn intersection<T: Scalar>(a: &BoundingBox<T>, b: &BoundingBox<T>) -> T {
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(T::zero());
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(T::zero());
    w * h
}

fn iou_parts<T: Scalar>(a: &BoundingBox<T>, b: &BoundingBox<T>) -> (T, T) {
    let inter = intersection(a, b);
    let union = a.area() + b.area() - inter;
    (inter, union)
}

/// Intersection over union, in `[0, 1]`.
pub fn iou<T: Scalar>(a: &BoundingBox<T>, b: &BoundingBox<T>) -> T {
    let (inter, union) = iou_parts(a, b);
    if union > T::zero() {
        (inter / union).min(T::one())
    } else {
        T::zero()
    }
}

/// Generalized IoU, in `[-1, 1]`: IoU minus the fraction of the smallest
/// enclosing box not covered by the union. When the enclosing box itself
/// has zero area the result is the plain IoU (`0`).
pub fn giou<T: Scalar>(a: &BoundingBox<T>, b: &BoundingBox<T>) -> T {
    let (inter, union) = iou_parts(a, b);
    let iou = if union > T::zero() {
        (inter / union).min(T::one())
    } else {
        T::zero()
    };
    let ew = a.x2.max(b.x2) - a.x1.min(b.x1);
    let eh = a.y2.max(b.y2) - a.y1.min(b.y1);
    let enclosing = ew.max(T::zero()) * eh.max(T::zero());
    if enclosing > T::zero() {
        (iou - (enclosing - union) / enclosing).max(-T::one())
    } else {
        iou
    }
}

/// L1 distance between boxes after dividing x by `frame_w` and y by
/// `frame_h`. Bounded by 4 for boxes inside the frame.
pub fn l1_box<T: Scalar>(a: &BoundingBox<T>, b: &BoundingBox<T>, frame_w: T, frame_h: T) -> T {
    ((a.x1 - b.x1).abs() + (a.x2 - b.x2).abs()) / frame_w
        + ((a.y1 - b.y1).abs() + (a.y2 - b.y2).abs()) / frame_h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    fn b(c: [f64; 4]) -> BoundingBox<f64> {
        BoundingBox::from_f64(c)
    }

    #[test]
    fn iou_examples() {
        let a = b([0.0, 0.0, 10.0, 10.0]);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b([20.0, 20.0, 30.0, 30.0])), 0.0);
        // I = 50, U = 150
        assert!(close(iou(&a, &b([5.0, 0.0, 15.0, 10.0])), 1.0 / 3.0));
    }

    #[test]
    fn giou_examples() {
        let a = b([0.0, 0.0, 10.0, 10.0]);
        assert_eq!(giou(&a, &a), 1.0);
        // IoU 0, enclosing 3, union 2
        assert!(close(
            giou(&b([0.0, 0.0, 1.0, 1.0]), &b([2.0, 0.0, 3.0, 1.0])),
            -1.0 / 3.0
        ));
        // I = 1, U = 7, enclosing 9: 1/7 - 2/9 = -5/63
        assert!(close(
            giou(&b([0.0, 0.0, 2.0, 2.0]), &b([1.0, 1.0, 3.0, 3.0])),
            -5.0 / 63.0
        ));
    }

    #[test]
    fn degenerate_boxes() {
        let p = b([3.0, 3.0, 3.0, 3.0]);
        assert_eq!(iou(&p, &p), 0.0);
        assert_eq!(giou(&p, &p), 0.0);
        assert_eq!(iou(&p, &b([0.0, 0.0, 10.0, 10.0])), 0.0);
        assert_eq!(giou(&p, &b([3.0, 3.0, 3.0, 5.0])), 0.0);
        assert_eq!(giou(&p, &b([5.0, 5.0, 5.0, 5.0])), -1.0);
    }

    #[test]
    fn l1_examples() {
        let a = b([10.0, 10.0, 50.0, 50.0]);
        assert_eq!(l1_box(&a, &a, 640.0, 480.0), 0.0);
        let shifted = b([11.0, 10.0, 50.0, 50.0]);
        assert!(close(l1_box(&a, &shifted, 640.0, 480.0), 1.0 / 640.0));
        let full = b([0.0, 0.0, 640.0, 480.0]);
        let corner = b([0.0, 0.0, 0.0, 0.0]);
        assert!(l1_box(&full, &corner, 640.0, 480.0) <= 4.0);
    }

    #[test]
    fn works_for_f32() {
        let a = BoundingBox::<f32>::from_f64([0.0, 0.0, 10.0, 10.0]);
        let c = BoundingBox::<f32>::from_f64([5.0, 0.0, 15.0, 10.0]);
        assert!((iou(&a, &c) - 1.0 / 3.0).abs() < 1e-6);
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox<f64>> {
        (0.0..640.0f64, 0.0..480.0f64, 0.0..200.0f64, 0.0..200.0f64)
            .prop_map(|(x, y, w, h)| b([x, y, x + w, y + h]))
    }

    proptest! {
        #[test]
        fn symmetric_and_ordered(a in arb_box(), c in arb_box()) {
            let (i1, i2) = (iou(&a, &c), iou(&c, &a));
            let (g1, g2) = (giou(&a, &c), giou(&c, &a));
            prop_assert!((i1 - i2).abs() < 1e-12);
            prop_assert!((g1 - g2).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&i1));
            prop_assert!((-1.0..=1.0).contains(&g1));
            prop_assert!(g1 <= i1 + 1e-12);
        }

        #[test]
        fn giou_equals_iou_when_union_fills_enclosure(a in arb_box()) {
            // nested boxes: enclosing box is the outer box, which is the union
            let inner = b([a.x1, a.y1, (a.x1 + a.x2) / 2.0, (a.y1 + a.y2) / 2.0]);
            prop_assert!((giou(&a, &inner) - iou(&a, &inner)).abs() < 1e-12);
        }
    }
}
