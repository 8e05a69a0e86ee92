use serde::{Deserialize, Serialize};

/// Axis-aligned box with integer pixel corners covering `[x, x+w) × [y, y+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    /// Returns `None` when either extent is zero.
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Option<Self> {
        (w > 0 && h > 0).then_some(Self { x, y, w, h })
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    fn right(&self) -> i64 {
        i64::from(self.x) + i64::from(self.w)
    }

    fn bottom(&self) -> i64 {
        i64::from(self.y) + i64::from(self.h)
    }

    /// Number of integer pixels shared by both boxes.
    pub fn intersection_area(&self, other: &Self) -> u64 {
        let w = self.right().min(other.right()) - i64::from(self.x.max(other.x));
        let h = self.bottom().min(other.bottom()) - i64::from(self.y.max(other.y));
        if w <= 0 || h <= 0 {
            0
        } else {
            (w as u64) * (h as u64)
        }
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(x: i32, y: i32, w: u32, h: u32) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    /// Counts shared pixels one by one.
    fn enumerated_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
        let inside = |bb: &BoundingBox, px: i64, py: i64| {
            px >= i64::from(bb.x) && px < bb.right() && py >= i64::from(bb.y) && py < bb.bottom()
        };
        let (mut inter, mut union) = (0u64, 0u64);
        let x0 = i64::from(a.x.min(b.x));
        let y0 = i64::from(a.y.min(b.y));
        for py in y0..a.bottom().max(b.bottom()) {
            for px in x0..a.right().max(b.right()) {
                let (ia, ib) = (inside(a, px, py), inside(b, px, py));
                inter += u64::from(ia && ib);
                union += u64::from(ia || ib);
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn identical_and_disjoint() {
        let a = bx(3, 4, 10, 7);
        assert_eq!(box_iou(&a, &a), 1.0);
        assert_eq!(box_iou(&a, &bx(13, 4, 5, 5)), 0.0);
    }

    #[test]
    fn half_shifted_unit_boxes() {
        let a = bx(0, 0, 2, 2);
        let b = bx(1, 0, 2, 2);
        let expected = enumerated_iou(&a, &b);
        assert_eq!(expected, 2.0 / 6.0);
        assert_eq!(box_iou(&a, &b), expected);
    }

    #[test]
    fn zero_extent_rejected() {
        assert!(BoundingBox::new(0, 0, 0, 3).is_none());
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_matches_enumeration(
            ax in -8i32..8, ay in -8i32..8, aw in 1u32..10, ah in 1u32..10,
            bx_ in -8i32..8, by in -8i32..8, bw in 1u32..10, bh in 1u32..10,
        ) {
            let a = bx(ax, ay, aw, ah);
            let b = bx(bx_, by, bw, bh);
            let iou = box_iou(&a, &b);
            prop_assert_eq!(iou, box_iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&iou));
            prop_assert!((iou - enumerated_iou(&a, &b)).abs() < 1e-15);
        }
    }
}
