//! Overlapping tiles for large images, ignore-region filling, and merging of
//! per-tile detections back into the original image with greedy NMS.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    AnnotationId, BoxRecord, Category, DatasetAnnotations, Detection, DetectionSet, ImageId, ImageRecord,
};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::geometry::BBox;

pub const TILE_INDEX_SCHEMA: &str = "scalematch.tiles/1";

/// Minimum fraction of a box's area that must fall inside a tile for the box
/// to be assigned there as a person.
pub const ASSIGN_FRACTION: f64 = 0.5;

pub const DEFAULT_NMS_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGeometry {
    pub tile_w: u32,
    pub tile_h: u32,
    pub overlap: u32,
}

impl Default for TileGeometry {
    fn default() -> Self {
        Self {
            tile_w: 1000,
            tile_h: 1000,
            overlap: 100,
        }
    }
}

impl TileGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.tile_w == 0 || self.tile_h == 0 || self.overlap >= self.tile_w.min(self.tile_h) {
            return Err(Error::InvalidOverlap {
                overlap: self.overlap,
                tile_w: self.tile_w,
                tile_h: self.tile_h,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TileSpec {
    pub image_id: ImageId,
    pub geometry: TileGeometry,
    pub x_offsets: Vec<u32>,
    pub y_offsets: Vec<u32>,
}

impl TileSpec {
    /// Tile origins, row by row.
    pub fn origins(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.y_offsets
            .iter()
            .flat_map(move |&oy| self.x_offsets.iter().map(move |&ox| (ox, oy)))
    }
}

/// Offsets `0, stride, 2*stride, ...` along one axis; the last one is pulled
/// back to `dim - tile` so no tile overruns the image.
pub fn axis_offsets(dim: u32, tile: u32, overlap: u32) -> Vec<u32> {
    if dim <= tile {
        return vec![0];
    }
    let stride = tile - overlap;
    let mut offsets = Vec::new();
    let mut o = 0u32;
    loop {
        if o + tile >= dim {
            let last = dim - tile;
            if offsets.last() != Some(&last) {
                offsets.push(last);
            }
            break;
        }
        offsets.push(o);
        o += stride;
    }
    offsets
}

fn pixel_dims(img: &ImageRecord) -> (u32, u32) {
    (img.width.ceil() as u32, img.height.ceil() as u32)
}

pub fn plan_tiles(img: &ImageRecord, geometry: TileGeometry) -> Result<TileSpec> {
    geometry.validate()?;
    let (w, h) = pixel_dims(img);
    Ok(TileSpec {
        image_id: img.id,
        geometry,
        x_offsets: axis_offsets(w, geometry.tile_w, geometry.overlap),
        y_offsets: axis_offsets(h, geometry.tile_h, geometry.overlap),
    })
}

/// Where a tile came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileProvenance {
    pub tile_image_id: ImageId,
    pub parent_image_id: ImageId,
    pub ox: u32,
    pub oy: u32,
    pub width: u32,
    pub height: u32,
    /// No person box was assigned to this tile.
    pub background: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileIndex {
    pub schema: String,
    pub geometry: TileGeometry,
    pub tiles: Vec<TileProvenance>,
}

pub fn save_tile_index(index: &TileIndex, path: &Path) -> Result<()> {
    fsutil::write_json_atomic(path, index)
}

pub fn load_tile_index(path: &Path) -> Result<TileIndex> {
    let index: TileIndex = fsutil::read_json(path)?;
    if index.schema != TILE_INDEX_SCHEMA {
        return Err(Error::Schema(format!(
            "{}: expected schema {TILE_INDEX_SCHEMA}, found {}",
            path.display(),
            index.schema
        )));
    }
    Ok(index)
}

/// Pixel input/output for [`cut_dataset`].
#[derive(Debug, Clone)]
pub struct TileIo {
    pub image_dir_in: PathBuf,
    pub image_dir_out: PathBuf,
    /// Fill ignore (and uncertain) regions with this value before cutting.
    pub fill: Option<[f64; 3]>,
}

fn tile_file_name(parent: &str, ox: u32, oy: u32) -> String {
    let path = Path::new(parent);
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "png".into());
    format!("{stem}__x{ox}_y{oy}.{ext}")
}

struct CutTile {
    image: ImageRecord,
    provenance: TileProvenance,
    boxes: Vec<BoxRecord>,
}

/// Assign one image's boxes to the tile at `(ox, oy)`. Ids are filled in later.
fn boxes_for_tile(boxes: &[&BoxRecord], rect: &BBox) -> Vec<BoxRecord> {
    let mut out = Vec::new();
    for b in boxes {
        let Some(inter) = b.bbox.intersection(rect) else {
            continue;
        };
        let local = inter.translate(-rect.x, -rect.y);
        let category = match b.category {
            Category::Person if inter.area() / b.bbox.area() >= ASSIGN_FRACTION => Category::Person,
            _ => Category::IgnoreRegion,
        };
        out.push(BoxRecord {
            bbox: local,
            category,
            ..(*b).clone()
        });
    }
    out
}

/// Cut every image into tiles. A person box goes to each tile holding at
/// least half of its area, clipped and shifted into tile coordinates; a
/// smaller part of it becomes an ignore region of that tile.
pub fn cut_dataset(
    ds: &DatasetAnnotations,
    geometry: TileGeometry,
    pixels: Option<&TileIo>,
) -> Result<(DatasetAnnotations, TileIndex)> {
    geometry.validate()?;
    let by_image = ds.boxes_by_image();
    let per_image: Vec<Result<Vec<CutTile>>> = ds
        .images()
        .par_iter()
        .map(|img| {
            let spec = plan_tiles(img, geometry)?;
            let boxes = by_image.get(&img.id).map(Vec::as_slice).unwrap_or(&[]);
            let (w, h) = pixel_dims(img);
            let parent_pixels = match pixels {
                Some(io) => {
                    let mut rgb = fsutil::open_image(&io.image_dir_in.join(&img.file_name))?.to_rgb8();
                    if let Some(fill) = io.fill {
                        let regions: Vec<BBox> = boxes
                            .iter()
                            .filter(|b| b.acts_as_ignore(true))
                            .map(|b| b.bbox)
                            .collect();
                        fill_ignore_regions(&mut rgb, &regions, fill);
                    }
                    Some(rgb)
                }
                None => None,
            };
            let mut tiles = Vec::new();
            for (ox, oy) in spec.origins() {
                let tw = geometry.tile_w.min(w);
                let th = geometry.tile_h.min(h);
                let rect = BBox::new(ox as f64, oy as f64, tw as f64, th as f64);
                let tile_boxes = boxes_for_tile(boxes, &rect);
                let file_name = tile_file_name(&img.file_name, ox, oy);
                if let (Some(io), Some(rgb)) = (pixels, parent_pixels.as_ref()) {
                    let crop = image::imageops::crop_imm(rgb, ox, oy, tw, th).to_image();
                    fsutil::save_image_atomic(
                        &io.image_dir_out.join(&file_name),
                        &image::DynamicImage::ImageRgb8(crop),
                    )?;
                }
                let background = !tile_boxes.iter().any(|b| b.is_person());
                tiles.push(CutTile {
                    image: ImageRecord {
                        id: ImageId(0),
                        width: tw as f64,
                        height: th as f64,
                        file_name,
                        source_video: img.source_video.clone(),
                    },
                    provenance: TileProvenance {
                        tile_image_id: ImageId(0),
                        parent_image_id: img.id,
                        ox,
                        oy,
                        width: tw,
                        height: th,
                        background,
                    },
                    boxes: tile_boxes,
                });
            }
            Ok(tiles)
        })
        .collect();

    let mut images = Vec::new();
    let mut boxes = Vec::new();
    let mut provenance = Vec::new();
    let mut next_box = 1u64;
    for tiles in per_image {
        for mut tile in tiles? {
            let id = ImageId(images.len() as u64 + 1);
            tile.image.id = id;
            tile.provenance.tile_image_id = id;
            for mut b in tile.boxes {
                b.id = AnnotationId(next_box);
                b.image_id = id;
                next_box += 1;
                boxes.push(b);
            }
            images.push(tile.image);
            provenance.push(tile.provenance);
        }
    }
    let background = provenance.iter().filter(|p| p.background).count();
    if background > 0 {
        log::info!("{background} of {} tiles hold no person box", provenance.len());
    }
    let out = DatasetAnnotations::new(format!("{}-tiles", ds.name), images, boxes)?;
    Ok((
        out,
        TileIndex {
            schema: TILE_INDEX_SCHEMA.into(),
            geometry,
            tiles: provenance,
        },
    ))
}

/// Pixel rows/columns touched by `[start, start + len)`, clamped to `[0, dim)`.
fn pixel_span(start: f64, len: f64, dim: u32) -> std::ops::Range<u32> {
    let lo = start.floor().max(0.0).min(dim as f64) as u32;
    let hi = (start + len).ceil().max(0.0).min(dim as f64) as u32;
    lo..hi.max(lo)
}

/// Set every pixel touched by one of `regions` to `fill` (rounded per channel).
pub fn fill_ignore_regions(img: &mut RgbImage, regions: &[BBox], fill: [f64; 3]) {
    let value = image::Rgb(fill.map(|v| v.round().clamp(0.0, 255.0) as u8));
    let (w, h) = img.dimensions();
    for r in regions {
        for y in pixel_span(r.y, r.h, h) {
            for x in pixel_span(r.x, r.w, w) {
                img.put_pixel(x, y, value);
            }
        }
    }
}

/// Per-channel mean pixel value over a set of images.
pub fn mean_pixel_value<'a>(images: impl IntoIterator<Item = &'a RgbImage>) -> Option<[f64; 3]> {
    let mut sum = [0.0f64; 3];
    let mut n = 0u64;
    for img in images {
        for p in img.pixels() {
            for c in 0..3 {
                sum[c] += p[c] as f64;
            }
        }
        n += img.pixels().len() as u64;
    }
    (n > 0).then(|| sum.map(|s| s / n as f64))
}

/// Greedy NMS: visit by descending score (larger box first among equal
/// scores, then input order) and drop any box whose IoU with an already kept
/// box exceeds `iou_threshold`.
pub fn nms(mut dets: Vec<Detection>, iou_threshold: f64) -> Vec<Detection> {
    dets.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| b.bbox.area().total_cmp(&a.bbox.area()))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for d in dets {
        if kept.iter().all(|k| k.bbox.iou(&d.bbox) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept
}

/// Map tile detections back to their parent images and merge with NMS. The
/// per-image cap is applied after NMS.
pub fn merge_detections(
    tile_dets: &DetectionSet,
    index: &TileIndex,
    nms_iou: f64,
    cap_per_image: usize,
) -> Result<DetectionSet> {
    let tiles: HashMap<ImageId, &TileProvenance> = index.tiles.iter().map(|t| (t.tile_image_id, t)).collect();
    let mut per_parent: BTreeMap<ImageId, Vec<Detection>> = BTreeMap::new();
    for d in tile_dets.detections() {
        let t = tiles.get(&d.image_id).ok_or(Error::UnknownTile(d.image_id.0))?;
        per_parent.entry(t.parent_image_id).or_default().push(Detection {
            image_id: t.parent_image_id,
            bbox: d.bbox.translate(t.ox as f64, t.oy as f64),
            score: d.score,
        });
    }
    let merged: Vec<Detection> = per_parent
        .into_par_iter()
        .flat_map_iter(|(_, dets)| nms(dets, nms_iou))
        .collect();
    DetectionSet::new(merged, cap_per_image)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_examples() {
        assert_eq!(axis_offsets(2000, 1000, 100), vec![0, 900, 1000]);
        assert_eq!(axis_offsets(800, 1000, 100), vec![0]);
        assert_eq!(axis_offsets(1000, 1000, 100), vec![0]);
        assert_eq!(axis_offsets(1900, 1000, 100), vec![0, 900]);
        assert_eq!(axis_offsets(1080, 1000, 100), vec![0, 80]);
    }

    #[test]
    fn overlap_equal_tile_rejected() {
        let img = ImageRecord::new(1, 2000.0, 1000.0, "a.jpg");
        let geom = TileGeometry {
            tile_w: 1000,
            tile_h: 1000,
            overlap: 1000,
        };
        assert!(matches!(plan_tiles(&img, geom), Err(Error::InvalidOverlap { .. })));
    }

    #[test]
    fn full_hd_frame() {
        let img = ImageRecord::new(1, 1920.0, 1080.0, "a.jpg");
        let spec = plan_tiles(&img, TileGeometry::default()).unwrap();
        assert_eq!(spec.x_offsets, vec![0, 900, 920]);
        assert_eq!(spec.y_offsets, vec![0, 80]);
        assert_eq!(spec.origins().count(), 6);
    }

    fn one_image(boxes: Vec<BoxRecord>, w: f64, h: f64) -> DatasetAnnotations {
        DatasetAnnotations::new("d", vec![ImageRecord::new(1, w, h, "frame.jpg")], boxes).unwrap()
    }

    #[test]
    fn box_inside_one_tile_is_shifted() {
        let ds = one_image(
            vec![BoxRecord::person(1, 1, BBox::new(1500.0, 200.0, 20.0, 30.0))],
            2000.0,
            1000.0,
        );
        let (tiles, index) = cut_dataset(&ds, TileGeometry::default(), None).unwrap();
        assert_eq!(tiles.images().len(), 3);
        let persons: Vec<_> = tiles.boxes().iter().filter(|b| b.is_person()).collect();
        assert_eq!(persons.len(), 2, "tiles at x=900 and x=1000 both contain it");
        for p in persons {
            let prov = index.tiles.iter().find(|t| t.tile_image_id == p.image_id).unwrap();
            assert_eq!(p.bbox, BBox::new(1500.0 - prov.ox as f64, 200.0, 20.0, 30.0));
        }
        let bg: Vec<bool> = index.tiles.iter().map(|t| t.background).collect();
        assert_eq!(bg, vec![true, false, false]);
        assert_eq!(tiles.images()[1].file_name, "frame__x900_y0.jpg");
    }

    #[test]
    fn seam_tie_goes_to_both_tiles() {
        let ds = one_image(
            vec![BoxRecord::person(1, 1, BBox::new(950.0, 10.0, 100.0, 40.0))],
            2000.0,
            1000.0,
        );
        let geom = TileGeometry {
            tile_w: 1000,
            tile_h: 1000,
            overlap: 0,
        };
        let (tiles, _) = cut_dataset(&ds, geom, None).unwrap();
        let persons: Vec<_> = tiles.boxes().iter().filter(|b| b.is_person()).collect();
        assert_eq!(persons.len(), 2);
        assert_eq!(persons[0].bbox, BBox::new(950.0, 10.0, 50.0, 40.0));
        assert_eq!(persons[1].bbox, BBox::new(0.0, 10.0, 50.0, 40.0));
    }

    #[test]
    fn small_sliver_becomes_ignore() {
        let ds = one_image(
            vec![BoxRecord::person(1, 1, BBox::new(980.0, 10.0, 100.0, 40.0))],
            2000.0,
            1000.0,
        );
        let geom = TileGeometry {
            tile_w: 1000,
            tile_h: 1000,
            overlap: 0,
        };
        let (tiles, index) = cut_dataset(&ds, geom, None).unwrap();
        let first: Vec<_> = tiles
            .boxes()
            .iter()
            .filter(|b| b.image_id == index.tiles[0].tile_image_id)
            .collect();
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].category, Category::IgnoreRegion);
        assert_eq!(first[0].bbox, BBox::new(980.0, 10.0, 20.0, 40.0));
    }

    #[test]
    fn fill_exact_pixel_count() {
        let mut img = RgbImage::from_pixel(40, 30, image::Rgb([7, 8, 9]));
        fill_ignore_regions(&mut img, &[BBox::new(5.0, 5.0, 10.0, 10.0)], [200.0, 100.0, 50.0]);
        let filled = img.pixels().filter(|p| p.0 == [200, 100, 50]).count();
        assert_eq!(filled, 100);
        let untouched = img.pixels().filter(|p| p.0 == [7, 8, 9]).count();
        assert_eq!(untouched, 40 * 30 - 100);
    }

    #[test]
    fn fill_with_own_value_or_nothing_is_identity() {
        let orig = RgbImage::from_pixel(10, 10, image::Rgb([3, 3, 3]));
        let mut img = orig.clone();
        fill_ignore_regions(&mut img, &[BBox::new(1.0, 1.0, 4.0, 4.0)], [3.0, 3.0, 3.0]);
        assert_eq!(img, orig);
        fill_ignore_regions(&mut img, &[], [100.0, 0.0, 0.0]);
        assert_eq!(img, orig);
    }

    #[test]
    fn mean_pixel() {
        let a = RgbImage::from_pixel(2, 2, image::Rgb([0, 10, 20]));
        let b = RgbImage::from_pixel(2, 2, image::Rgb([100, 10, 40]));
        assert_eq!(mean_pixel_value([&a, &b]), Some([50.0, 10.0, 30.0]));
        assert_eq!(mean_pixel_value(std::iter::empty()), None);
    }

    fn index_with(tile: u64, parent: u64, ox: u32, oy: u32) -> TileIndex {
        TileIndex {
            schema: TILE_INDEX_SCHEMA.into(),
            geometry: TileGeometry::default(),
            tiles: vec![TileProvenance {
                tile_image_id: ImageId(tile),
                parent_image_id: ImageId(parent),
                ox,
                oy,
                width: 1000,
                height: 1000,
                background: false,
            }],
        }
    }

    #[test]
    fn merge_translates() {
        let dets = DetectionSet::new(vec![Detection::new(3, BBox::new(5.0, 5.0, 10.0, 10.0), 0.7)], 200).unwrap();
        let merged = merge_detections(&dets, &index_with(3, 1, 900, 0), 0.5, 200).unwrap();
        assert_eq!(merged.detections()[0].bbox, BBox::new(905.0, 5.0, 10.0, 10.0));
        assert_eq!(merged.detections()[0].image_id, ImageId(1));
    }

    #[test]
    fn merge_unknown_tile() {
        let dets = DetectionSet::new(vec![Detection::new(9, BBox::new(5.0, 5.0, 10.0, 10.0), 0.7)], 200).unwrap();
        assert!(matches!(
            merge_detections(&dets, &index_with(3, 1, 0, 0), 0.5, 200),
            Err(Error::UnknownTile(9))
        ));
    }

    #[test]
    fn nms_examples() {
        let a = Detection::new(1, BBox::new(0.0, 0.0, 10.0, 10.0), 0.9);
        // IoU 0.8 with a: shift by 10/9 px horizontally
        let shift = 10.0 - 160.0 / 18.0;
        let b = Detection::new(1, BBox::new(shift, 0.0, 10.0, 10.0), 0.8);
        assert!((a.bbox.iou(&b.bbox) - 0.8).abs() < 1e-12);
        let kept = nms(vec![b, a], 0.5);
        assert_eq!(kept, vec![a]);
        let far = Detection::new(1, BBox::new(100.0, 100.0, 10.0, 10.0), 0.1);
        assert_eq!(nms(vec![a, far], 0.5).len(), 2);
    }
}
