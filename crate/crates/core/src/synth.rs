//! Seeded synthetic datasets with controlled object-size distributions.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{BoxRecord, Category, DatasetAnnotations, ImageRecord};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::geometry::BBox;

/// Distribution of absolute box size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum SizeLaw {
    Uniform { low: f64, high: f64 },
    Lognormal { mu: f64, sigma: f64 },
    PointMass { size: f64 },
    Mixture { components: Vec<(f64, SizeLaw)> },
}

/// Distribution of the aspect ratio `w / h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum AspectLaw {
    Fixed { ratio: f64 },
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub n_images: usize,
    /// Inclusive range of boxes per image.
    pub boxes_per_image: (usize, usize),
    pub size_law: SizeLaw,
    pub aspect_law: AspectLaw,
    pub image_width: u32,
    pub image_height: u32,
    pub ignore_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            n_images: 100,
            boxes_per_image: (1, 10),
            // heavy right tail around a median of 18 px
            size_law: SizeLaw::Lognormal {
                mu: 18f64.ln(),
                sigma: 0.8,
            },
            aspect_law: AspectLaw::Fixed { ratio: 0.676 },
            image_width: 1920,
            image_height: 1080,
            ignore_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SizeLaw {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            SizeLaw::Uniform { low, high } => *low > 0.0 && low <= high,
            SizeLaw::Lognormal { mu, sigma } => mu.is_finite() && *sigma > 0.0,
            SizeLaw::PointMass { size } => *size > 0.0,
            SizeLaw::Mixture { components } => {
                for (_, law) in components {
                    law.validate()?;
                }
                !components.is_empty() && components.iter().all(|(w, _)| *w > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid size law {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SizeLaw::Uniform { low, high } if low < high => rng.random_range(*low..*high),
            SizeLaw::Uniform { low, .. } => *low,
            SizeLaw::Lognormal { mu, sigma } => LogNormal::new(*mu, *sigma)
                .expect("validated lognormal parameters")
                .sample(rng),
            SizeLaw::PointMass { size } => *size,
            SizeLaw::Mixture { components } => {
                let weights =
                    WeightedIndex::new(components.iter().map(|(w, _)| *w)).expect("validated mixture weights");
                components[weights.sample(rng)].1.sample(rng)
            }
        }
    }
}

impl AspectLaw {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            AspectLaw::Fixed { ratio } => *ratio > 0.0,
            AspectLaw::Uniform { low, high } => *low > 0.0 && low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid aspect law {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            AspectLaw::Fixed { ratio } => *ratio,
            AspectLaw::Uniform { low, high } if low < high => rng.random_range(*low..*high),
            AspectLaw::Uniform { low, .. } => *low,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        self.size_law.validate()?;
        self.aspect_law.validate()?;
        let (lo, hi) = self.boxes_per_image;
        if lo > hi || self.image_width == 0 || self.image_height == 0 {
            return Err(Error::InvalidParameter(format!(
                "boxes per image {lo}..={hi} or image {}x{} invalid",
                self.image_width, self.image_height
            )));
        }
        if !(0.0..1.0).contains(&self.ignore_fraction) {
            return Err(Error::InvalidParameter(format!(
                "ignore fraction {} outside [0, 1)",
                self.ignore_fraction
            )));
        }
        Ok(())
    }
}

/// Generate a dataset. Boxes lie wholly inside their image, and the absolute
/// size of each box is the drawn size.
pub fn generate(spec: &SynthSpec) -> Result<DatasetAnnotations> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (width, height) = (spec.image_width as f64, spec.image_height as f64);
    let mut images = Vec::with_capacity(spec.n_images);
    let mut boxes = Vec::new();
    for i in 1..=spec.n_images as u64 {
        images.push(ImageRecord::new(i, width, height, format!("{i:06}.png")));
        let count = rng.random_range(spec.boxes_per_image.0..=spec.boxes_per_image.1);
        for _ in 0..count {
            let size = spec.size_law.sample(&mut rng);
            let ratio = spec.aspect_law.sample(&mut rng);
            let w = size * ratio.sqrt();
            let h = size / ratio.sqrt();
            if w > width || h > height {
                return Err(Error::InfeasiblePlacement {
                    w,
                    h,
                    width: spec.image_width,
                    height: spec.image_height,
                });
            }
            let x = rng.random::<f64>() * (width - w);
            let y = rng.random::<f64>() * (height - h);
            let category = if rng.random::<f64>() < spec.ignore_fraction {
                Category::IgnoreRegion
            } else {
                Category::Person
            };
            let id = boxes.len() as u64 + 1;
            boxes.push(BoxRecord {
                category,
                ..BoxRecord::person(id, i, BBox::new(x, y, w, h))
            });
        }
    }
    DatasetAnnotations::new(spec.name.clone(), images, boxes)
}

/// Write one flat-color PNG per image with boxes painted in a second color,
/// enough to exercise resize, fill and tiling on real pixels.
pub fn write_blank_images(ds: &DatasetAnnotations, dir: &Path) -> Result<()> {
    let by_image = ds.boxes_by_image();
    for img in ds.images() {
        let (w, h) = (img.width.ceil() as u32, img.height.ceil() as u32);
        let mut pixels = RgbImage::from_pixel(w, h, Rgb([96, 128, 160]));
        for b in by_image.get(&img.id).into_iter().flatten() {
            let color = if b.is_person() {
                Rgb([220, 40, 40])
            } else {
                Rgb([30, 30, 30])
            };
            let x0 = b.bbox.x.floor().max(0.0) as u32;
            let y0 = b.bbox.y.floor().max(0.0) as u32;
            let x1 = (b.bbox.right().ceil() as u32).min(w);
            let y1 = (b.bbox.bottom().ceil() as u32).min(h);
            for y in y0..y1 {
                for x in x0..x1 {
                    pixels.put_pixel(x, y, color);
                }
            }
        }
        fsutil::save_image_atomic(&dir.join(&img.file_name), &image::DynamicImage::ImageRgb8(pixels))?;
    }
    Ok(())
}
