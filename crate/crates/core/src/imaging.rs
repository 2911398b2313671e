//! Image ingestion and edge-based blob detection: binary PGM decode, box
//! downscaling, Sobel edge maps, thresholding, connected components, and
//! merge proposals for over-segmented characters.

use serde::{Deserialize, Serialize};

use crate::types::{BlobBox, TextCandidate};
use crate::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub samples: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        GrayImage { width, height, samples: vec![fill; width * height] }
    }

    pub fn from_samples(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        if samples.len() != width * height {
            return Err(Error::Pgm(format!(
                "sample count {} does not match {width}x{height}",
                samples.len()
            )));
        }
        Ok(GrayImage { width, height, samples })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.samples[y * self.width + x] = v;
    }
}

/// Binary image (thresholded edge map), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryImage { width, height, bits: vec![false; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Blob-detection thresholds. The source material leaves all of these open;
/// the defaults were tuned on the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImagingParams {
    /// Longest image side after downscaling.
    pub max_dim: usize,
    /// Edge-magnitude threshold for binarization.
    pub edge_threshold: u16,
    /// Minimum component area in pixels.
    pub min_area: usize,
    /// Maximum component area as a fraction of the image area.
    pub max_area_frac: f64,
    /// Two blobs are mergeable when their box gap is at most this fraction
    /// of the larger box side.
    pub gap_frac: f64,
    /// Minimum covered fraction of the union box for a merge proposal.
    pub cover_min: f64,
    /// Admissible width/height ratio window for a merge proposal.
    pub aspect_lo: f64,
    pub aspect_hi: f64,
}

impl Default for ImagingParams {
    fn default() -> Self {
        ImagingParams {
            max_dim: 1024,
            edge_threshold: 96,
            min_area: 12,
            max_area_frac: 0.25,
            gap_frac: 0.2,
            cover_min: 0.45,
            aspect_lo: 0.7,
            aspect_hi: 1.4,
        }
    }
}

impl ImagingParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_dim < 16 {
            return Err(Error::InvalidParams("max_dim must be at least 16".into()));
        }
        if self.edge_threshold > 256 {
            return Err(Error::InvalidParams("edge_threshold must be at most 256".into()));
        }
        if !self.max_area_frac.is_finite() || self.max_area_frac <= 0.0 {
            return Err(Error::InvalidParams("max_area_frac must be finite and > 0".into()));
        }
        if !self.gap_frac.is_finite() || self.gap_frac < 0.0 {
            return Err(Error::InvalidParams("gap_frac must be finite and >= 0".into()));
        }
        if !self.cover_min.is_finite() || !(0.0..=1.0).contains(&self.cover_min) {
            return Err(Error::InvalidParams("cover_min must be in [0, 1]".into()));
        }
        for (v, name) in [(self.aspect_lo, "aspect_lo"), (self.aspect_hi, "aspect_hi")] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0")));
            }
        }
        if self.aspect_lo > self.aspect_hi {
            return Err(Error::InvalidParams("aspect_lo must not exceed aspect_hi".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

fn is_pgm_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\r' | b'\n' | 0x0b | 0x0c)
}

/// Read the next header token, skipping whitespace and `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && is_pgm_space(bytes[*pos]) {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !is_pgm_space(bytes[*pos]) && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Pgm("unexpected end of header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn parse_dim(token: &[u8], what: &str) -> Result<usize> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| Error::Pgm(format!("invalid {what}")))
}

/// Decode a binary (P5) portable graymap with maxval up to 255.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    if next_token(bytes, &mut pos)? != b"P5" {
        return Err(Error::Pgm("not a binary PGM (expected P5 magic)".into()));
    }
    let width = parse_dim(next_token(bytes, &mut pos)?, "width")?;
    let height = parse_dim(next_token(bytes, &mut pos)?, "height")?;
    let maxval = parse_dim(next_token(bytes, &mut pos)?, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Pgm("zero image dimension".into()));
    }
    if !(1..=255).contains(&maxval) {
        return Err(Error::Pgm(format!("unsupported maxval {maxval}")));
    }
    if pos >= bytes.len() || !is_pgm_space(bytes[pos]) {
        return Err(Error::Pgm("missing whitespace before pixel data".into()));
    }
    pos += 1;
    let need = width * height;
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(Error::Pgm(format!(
            "truncated payload: need {need} bytes, found {}",
            payload.len()
        )));
    }
    GrayImage::from_samples(width, height, payload[..need].to_vec())
}

/// Encode as binary P5 with maxval 255.
pub fn save_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.samples);
    out
}

// ---------------------------------------------------------------------------
// Downscale / edges / threshold
// ---------------------------------------------------------------------------

/// Downscale so the longest side is at most `max_dim`, averaging source
/// pixels per target cell (box filter, integer mean). Images already small
/// enough are returned unchanged. `max_dim` must be at least 16.
pub fn downscale(img: &GrayImage, max_dim: usize) -> GrayImage {
    assert!(max_dim >= 16, "max_dim must be >= 16");
    let longest = img.width.max(img.height);
    if longest <= max_dim {
        return img.clone();
    }
    let (tw, th) = if img.width >= img.height {
        (max_dim, ((img.height * max_dim + img.width / 2) / img.width).max(1))
    } else {
        (((img.width * max_dim + img.height / 2) / img.height).max(1), max_dim)
    };
    let mut out = GrayImage::new(tw, th, 0);
    for ty in 0..th {
        let y0 = ty * img.height / th;
        let y1 = ((ty + 1) * img.height / th).max(y0 + 1);
        for tx in 0..tw {
            let x0 = tx * img.width / tw;
            let x1 = ((tx + 1) * img.width / tw).max(x0 + 1);
            let mut sum: u64 = 0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += img.get(x, y) as u64;
                }
            }
            let count = ((y1 - y0) * (x1 - x0)) as u64;
            out.set(tx, ty, (sum / count) as u8);
        }
    }
    out
}

/// Combined Sobel edge magnitude `min(255, |Gx| + |Gy|)` with zeroed borders.
pub fn sobel_edge_map(img: &GrayImage) -> Result<GrayImage> {
    if img.width < 3 || img.height < 3 {
        return Err(Error::ImageTooSmall(img.width, img.height));
    }
    let mut out = GrayImage::new(img.width, img.height, 0);
    for y in 1..img.height - 1 {
        for x in 1..img.width - 1 {
            let p = |dx: isize, dy: isize| {
                img.get((x as isize + dx) as usize, (y as isize + dy) as usize) as i32
            };
            let gx = -p(-1, -1) + p(1, -1) - 2 * p(-1, 0) + 2 * p(1, 0) - p(-1, 1) + p(1, 1);
            let gy = -p(-1, -1) - 2 * p(0, -1) - p(1, -1) + p(-1, 1) + 2 * p(0, 1) + p(1, 1);
            let mag = (gx.abs() + gy.abs()).min(255);
            out.set(x, y, mag as u8);
        }
    }
    Ok(out)
}

/// Threshold an edge map: a bit is set iff its magnitude is at least
/// `threshold` (so 0 selects everything and anything above 255 nothing).
pub fn binarize(edge_map: &GrayImage, threshold: u16) -> BinaryImage {
    let mut out = BinaryImage::new(edge_map.width, edge_map.height);
    for (i, &v) in edge_map.samples.iter().enumerate() {
        out.bits[i] = (v as u16) >= threshold;
    }
    out
}

// ---------------------------------------------------------------------------
// Connected components
// ---------------------------------------------------------------------------

/// Extract 8-connected components whose pixel count lies within
/// `[min_area, max_area_frac * image_area]`, as blobs with tight bounding
/// boxes (right/bottom exclusive). Ids follow the scanline order of each
/// component's first pixel, starting at 0.
pub fn connected_components(
    bin: &BinaryImage,
    min_area: usize,
    max_area_frac: f64,
) -> Vec<TextCandidate> {
    let max_area = (max_area_frac * (bin.width * bin.height) as f64).floor() as usize;
    let mut visited = vec![false; bin.bits.len()];
    let mut out = Vec::new();
    let mut next_id = 0;
    let mut stack = Vec::new();
    for start in 0..bin.bits.len() {
        if visited[start] || !bin.bits[start] {
            continue;
        }
        let (mut min_x, mut min_y) = (usize::MAX, usize::MAX);
        let (mut max_x, mut max_y) = (0usize, 0usize);
        let mut area = 0usize;
        visited[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % bin.width, i / bin.width);
            area += 1;
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= bin.width as isize || ny >= bin.height as isize {
                        continue;
                    }
                    let j = ny as usize * bin.width + nx as usize;
                    if bin.bits[j] && !visited[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if area >= min_area && area <= max_area {
            out.push(TextCandidate::new(
                next_id,
                BlobBox::new(min_x as f64, min_y as f64, (max_x + 1) as f64, (max_y + 1) as f64),
            ));
            next_id += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Merge proposals
// ---------------------------------------------------------------------------

/// Chebyshev-style gap between two boxes: the larger of the horizontal and
/// vertical clearances (0 when the boxes touch or overlap).
fn box_gap(a: &BlobBox, b: &BlobBox) -> f64 {
    let h = (a.left.max(b.left) - a.right.min(b.right)).max(0.0);
    let v = (a.top.max(b.top) - a.bottom.min(b.bottom)).max(0.0);
    h.max(v)
}

fn max_side(a: &BlobBox, b: &BlobBox) -> f64 {
    a.width().max(a.height()).max(b.width()).max(b.height())
}

fn close(a: &BlobBox, b: &BlobBox, gap_frac: f64) -> bool {
    box_gap(a, b) <= gap_frac * max_side(a, b)
}

fn merge_candidate(
    members: &[&TextCandidate],
    cover_min: f64,
    aspect_lo: f64,
    aspect_hi: f64,
) -> Option<BlobBox> {
    let mut union = members[0].bbox;
    let mut covered = 0.0;
    for m in members {
        union = union.union(&m.bbox);
        covered += m.bbox.area();
    }
    let aspect = union.width() / union.height();
    (covered / union.area() >= cover_min && aspect >= aspect_lo && aspect <= aspect_hi)
        .then_some(union)
}

/// Propose merged blobs for over-segmented characters: every pair and triple
/// of mutually close blobs whose union box is covered well enough and has a
/// near-square aspect yields a new candidate. Proposals get fresh ids after
/// the existing maximum; the input blobs are untouched (callers append).
pub fn propose_merged_blobs(
    blobs: &[TextCandidate],
    gap_frac: f64,
    cover_min: f64,
    aspect_lo: f64,
    aspect_hi: f64,
) -> Vec<TextCandidate> {
    let mut next_id = blobs.iter().map(|b| b.id + 1).max().unwrap_or(0);
    let mut out = Vec::new();
    let n = blobs.len();
    let mut emit = |bbox: BlobBox, next_id: &mut u32| {
        out.push(TextCandidate::new(*next_id, bbox));
        *next_id += 1;
    };
    for i in 0..n {
        for j in (i + 1)..n {
            if !close(&blobs[i].bbox, &blobs[j].bbox, gap_frac) {
                continue;
            }
            if let Some(u) =
                merge_candidate(&[&blobs[i], &blobs[j]], cover_min, aspect_lo, aspect_hi)
            {
                emit(u, &mut next_id);
            }
            for k in (j + 1)..n {
                if close(&blobs[i].bbox, &blobs[k].bbox, gap_frac)
                    && close(&blobs[j].bbox, &blobs[k].bbox, gap_frac)
                {
                    if let Some(u) = merge_candidate(
                        &[&blobs[i], &blobs[j], &blobs[k]],
                        cover_min,
                        aspect_lo,
                        aspect_hi,
                    ) {
                        emit(u, &mut next_id);
                    }
                }
            }
        }
    }
    out
}

/// The full detection pipeline on a grayscale image: downscale, Sobel,
/// threshold, connected components, then merge proposals appended after the
/// originals. Coordinates refer to the downscaled image.
pub fn detect_blobs(img: &GrayImage, params: &ImagingParams) -> Result<Vec<TextCandidate>> {
    let small = downscale(img, params.max_dim);
    let edges = sobel_edge_map(&small)?;
    let bin = binarize(&edges, params.edge_threshold);
    let mut blobs = connected_components(&bin, params.min_area, params.max_area_frac);
    let proposals = propose_merged_blobs(
        &blobs,
        params.gap_frac,
        params.cover_min,
        params.aspect_lo,
        params.aspect_hi,
    );
    blobs.extend(proposals);
    Ok(blobs)
}
