//! Axis-aligned boxes in `[x, y, w, h]` pixel coordinates.

use serde::{Deserialize, Serialize};

/// Axis-aligned box with top-left corner `(x, y)` and extent `w` x `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_array([x, y, w, h]: [f64; 4]) -> Self {
        Self { x, y, w, h }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Square root of the area.
    pub fn absolute_size(&self) -> f64 {
        (self.w * self.h).sqrt()
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.w / self.h
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        self.intersection(other).map_or(0.0, |b| b.area())
    }

    /// Intersection over union.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }

    /// Intersection over the area of `self`, where `self` is a detection and
    /// `region` an ignore region.
    pub fn iod(&self, region: &BBox) -> f64 {
        let inter = self.intersection_area(region);
        if inter <= 0.0 {
            return 0.0;
        }
        (inter / self.area()).clamp(0.0, 1.0)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    pub fn scale(&self, c: f64) -> BBox {
        BBox::new(self.x * c, self.y * c, self.w * c, self.h * c)
    }

    /// Clip to `[0, width] x [0, height]`. Returns `None` when nothing remains.
    pub fn clip(&self, width: f64, height: f64) -> Option<BBox> {
        self.intersection(&BBox::new(0.0, 0.0, width, height))
    }

    pub fn is_within(&self, width: f64, height: f64) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= width && self.bottom() <= height
    }
}

/// Intersection over union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

/// Intersection over the detection's own area; used against ignore regions.
pub fn iod(det: &BBox, ignore: &BBox) -> f64 {
    det.iod(ignore)
}
