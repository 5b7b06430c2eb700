//! Patch parameterization: the search vector, its decoded genome, and the
//! rendering of a genome into both modalities.
//!
//! A vector is laid out as `[x, y, r?, R1, G1, B1, ..., Rn, Gn, Bn]`. The
//! radius slot is present only when the radius is searched; the color slots
//! are absent when colors are frozen (position-only ablation).
//!
//! Colors are cycled over the mask pixels in row-major order. The infrared
//! patch reuses the visible colors: each color is converted to luma and then
//! affinely compressed with `beta * gray + gamma`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{disk_mask, embed_patch, luma, Image, ImagePair, Mask};

pub type Rgb = [f64; 3];

/// Affine intensity compression used to derive the infrared patch from the
/// visible colors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionParams {
    pub beta: f64,
    pub gamma: f64,
}

impl CompressionParams {
    /// Plain grayscale reuse with no compression.
    pub const IDENTITY: CompressionParams = CompressionParams {
        beta: 1.0,
        gamma: 0.0,
    };

    #[inline]
    pub fn infrared_value(&self, rgb: Rgb) -> f64 {
        (self.beta * luma(rgb) + self.gamma).clamp(0.0, 1.0)
    }
}

impl Default for CompressionParams {
    fn default() -> Self {
        CompressionParams {
            beta: 0.5,
            gamma: 0.25,
        }
    }
}

/// Which modalities receive the patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    #[default]
    Both,
    VisibleOnly,
    InfraredOnly,
}

impl Modality {
    pub fn patches_visible(self) -> bool {
        matches!(self, Modality::Both | Modality::VisibleOnly)
    }

    pub fn patches_infrared(self) -> bool {
        matches!(self, Modality::Both | Modality::InfraredOnly)
    }
}

/// One candidate patch: a disk center, a radius and an ordered color list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchGenome {
    pub x: usize,
    pub y: usize,
    pub r: usize,
    pub colors: Vec<Rgb>,
}

impl PatchGenome {
    pub fn validate(&self, dims: (usize, usize)) -> Result<()> {
        if self.colors.is_empty() {
            return Err(Error::InvalidValue("patch needs at least one color".into()));
        }
        if let Some(c) = self
            .colors
            .iter()
            .flatten()
            .find(|c| !(0.0..=1.0).contains(*c))
        {
            return Err(Error::InvalidValue(format!(
                "color component {c} outside [0, 1]"
            )));
        }
        self.mask(dims).map(|_| ())
    }

    pub fn mask(&self, dims: (usize, usize)) -> Result<Mask> {
        disk_mask(self.x, self.y, self.r, dims.0, dims.1)
    }
}

impl fmt::Display for PatchGenome {
    /// Flat record: `x y r n R1 G1 B1 ... Rn Gn Bn`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.x, self.y, self.r, self.colors.len())?;
        for c in &self.colors {
            write!(f, " {} {} {}", c[0], c[1], c[2])?;
        }
        Ok(())
    }
}

impl FromStr for PatchGenome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::InvalidValue(format!("genome record: {what}: {s:?}"));
        let fields: Vec<&str> = s.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(bad("too few fields"));
        }
        let int = |i: usize| fields[i].parse::<usize>().map_err(|_| bad("bad integer"));
        let (x, y, r, n) = (int(0)?, int(1)?, int(2)?, int(3)?);
        if fields.len() != 4 + 3 * n {
            return Err(bad("color count does not match field count"));
        }
        let values = fields[4..]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| bad("bad color component")))
            .collect::<Result<Vec<_>>>()?;
        let colors = values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(PatchGenome { x, y, r, colors })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMode {
    Fixed(usize),
    Searched { min: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorMode {
    /// `n` colors are part of the search vector.
    Searched(usize),
    /// Colors are held constant and excluded from the vector.
    Frozen(Vec<Rgb>),
}

/// Describes how a flat search vector maps onto a [`PatchGenome`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub radius: RadiusMode,
    pub colors: ColorMode,
}

impl ParamLayout {
    pub fn new(radius: RadiusMode, colors: ColorMode) -> Result<Self> {
        match &radius {
            RadiusMode::Fixed(0) => return Err(Error::Config("radius must be positive".into())),
            RadiusMode::Searched { min, max } if *min == 0 || min > max => {
                return Err(Error::Config(format!("bad radius range [{min}, {max}]")))
            }
            _ => {}
        }
        match &colors {
            ColorMode::Searched(0) => {
                return Err(Error::Config("color count must be positive".into()))
            }
            ColorMode::Frozen(c) if c.is_empty() => {
                return Err(Error::Config("frozen color list is empty".into()))
            }
            _ => {}
        }
        Ok(ParamLayout { radius, colors })
    }

    pub fn fixed(radius: usize, colors: usize) -> Result<Self> {
        Self::new(RadiusMode::Fixed(radius), ColorMode::Searched(colors))
    }

    fn spatial_len(&self) -> usize {
        match self.radius {
            RadiusMode::Fixed(_) => 2,
            RadiusMode::Searched { .. } => 3,
        }
    }

    pub fn len(&self) -> usize {
        self.spatial_len()
            + match self.colors {
                ColorMode::Searched(n) => 3 * n,
                ColorMode::Frozen(_) => 0,
            }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn min_radius(&self) -> usize {
        match self.radius {
            RadiusMode::Fixed(r) => r,
            RadiusMode::Searched { min, .. } => min,
        }
    }

    /// Search-space box. Positions use the smallest admissible radius; decode
    /// clamps them again once the actual radius is known.
    pub fn bounds(&self, dims: (usize, usize)) -> Result<Vec<(f64, f64)>> {
        let (w, h) = dims;
        let r_lo = self.min_radius();
        if 2 * r_lo > w || 2 * r_lo > h {
            return Err(Error::Feasibility(format!(
                "radius {r_lo} does not fit a {w}x{h} image"
            )));
        }
        let mut bounds = vec![
            (r_lo as f64, (w - r_lo) as f64),
            (r_lo as f64, (h - r_lo) as f64),
        ];
        if let RadiusMode::Searched { min, max } = self.radius {
            let cap = max.min(w / 2).min(h / 2);
            bounds.push((min as f64, cap as f64));
        }
        if let ColorMode::Searched(n) = self.colors {
            bounds.extend(std::iter::repeat((0.0, 1.0)).take(3 * n));
        }
        Ok(bounds)
    }

    /// Decodes a vector into a feasible genome: positions and radius are
    /// rounded half-up and clamped, colors are clipped into `[0, 1]`.
    pub fn decode(&self, vector: &[f64], dims: (usize, usize)) -> Result<PatchGenome> {
        if vector.len() != self.len() {
            return Err(Error::Dimension(format!(
                "parameter vector has {} values, layout expects {}",
                vector.len(),
                self.len()
            )));
        }
        let (w, h) = dims;
        let r = match self.radius {
            RadiusMode::Fixed(r) => r,
            RadiusMode::Searched { min, max } => {
                let cap = max.min(w / 2).min(h / 2).max(min);
                round_half_up(vector[2]).clamp(min as f64, cap as f64) as usize
            }
        };
        if 2 * r > w || 2 * r > h {
            return Err(Error::Feasibility(format!(
                "radius {r} does not fit a {w}x{h} image"
            )));
        }
        let x = round_half_up(vector[0]).clamp(r as f64, (w - r) as f64) as usize;
        let y = round_half_up(vector[1]).clamp(r as f64, (h - r) as f64) as usize;
        let colors = match &self.colors {
            ColorMode::Frozen(c) => c.clone(),
            ColorMode::Searched(_) => vector[self.spatial_len()..]
                .chunks_exact(3)
                .map(|c| [c[0].clamp(0.0, 1.0), c[1].clamp(0.0, 1.0), c[2].clamp(0.0, 1.0)])
                .collect(),
        };
        Ok(PatchGenome { x, y, r, colors })
    }

    pub fn encode(&self, genome: &PatchGenome) -> Vec<f64> {
        let mut v = vec![genome.x as f64, genome.y as f64];
        if matches!(self.radius, RadiusMode::Searched { .. }) {
            v.push(genome.r as f64);
        }
        if matches!(self.colors, ColorMode::Searched(_)) {
            v.extend(genome.colors.iter().flatten());
        }
        v
    }
}

#[inline]
fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

/// Both modality contents of a patch plus its mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPatch {
    pub visible_content: Image,
    pub infrared_content: Image,
    pub mask: Mask,
}

/// Visible patch content: the k-th mask pixel in row-major order receives
/// `colors[k % n]`. Off-mask pixels are zero.
pub fn render_visible(genome: &PatchGenome, dims: (usize, usize)) -> Result<Image> {
    genome.validate(dims)?;
    let mask = genome.mask(dims)?;
    let mut data = vec![0.0; dims.0 * dims.1 * 3];
    let n = genome.colors.len();
    for (k, i) in mask.indices().enumerate() {
        data[3 * i..3 * i + 3].copy_from_slice(&genome.colors[k % n]);
    }
    Ok(Image::from_raw_unchecked(dims.0, dims.1, 3, data))
}

pub fn render_infrared(
    genome: &PatchGenome,
    dims: (usize, usize),
    compression: CompressionParams,
) -> Result<Image> {
    genome.validate(dims)?;
    let mask = genome.mask(dims)?;
    let mut data = vec![0.0; dims.0 * dims.1];
    let levels: Vec<f64> = genome
        .colors
        .iter()
        .map(|&c| compression.infrared_value(c))
        .collect();
    for (k, i) in mask.indices().enumerate() {
        data[i] = levels[k % levels.len()];
    }
    Ok(Image::from_raw_unchecked(dims.0, dims.1, 1, data))
}

pub fn render(
    genome: &PatchGenome,
    dims: (usize, usize),
    compression: CompressionParams,
) -> Result<RenderedPatch> {
    Ok(RenderedPatch {
        visible_content: render_visible(genome, dims)?,
        infrared_content: render_infrared(genome, dims, compression)?,
        mask: genome.mask(dims)?,
    })
}

/// Embeds the patch into both modalities.
pub fn apply(
    genome: &PatchGenome,
    pair: &ImagePair,
    compression: CompressionParams,
) -> Result<ImagePair> {
    apply_to(genome, pair, compression, Modality::Both)
}

/// Embeds the patch into the selected modalities; the others are returned
/// untouched.
pub fn apply_to(
    genome: &PatchGenome,
    pair: &ImagePair,
    compression: CompressionParams,
    modality: Modality,
) -> Result<ImagePair> {
    let dims = pair.dims();
    genome.validate(dims)?;
    let mask = genome.mask(dims)?;
    let n = genome.colors.len();

    let mut visible = pair.visible().clone();
    if modality.patches_visible() {
        let data = visible.data_mut();
        for (k, i) in mask.indices().enumerate() {
            data[3 * i..3 * i + 3].copy_from_slice(&genome.colors[k % n]);
        }
    }
    let mut infrared = pair.infrared().clone();
    if modality.patches_infrared() {
        let levels: Vec<f64> = genome
            .colors
            .iter()
            .map(|&c| compression.infrared_value(c))
            .collect();
        let data = infrared.data_mut();
        for (k, i) in mask.indices().enumerate() {
            data[i] = levels[k % n];
        }
    }
    ImagePair::new(visible, infrared)
}

/// Reference composition of [`apply`] through the generic embedding path.
pub fn apply_via_embedding(
    genome: &PatchGenome,
    pair: &ImagePair,
    compression: CompressionParams,
) -> Result<ImagePair> {
    let patch = render(genome, pair.dims(), compression)?;
    ImagePair::new(
        embed_patch(pair.visible(), &patch.visible_content, &patch.mask)?,
        embed_patch(pair.infrared(), &patch.infrared_content, &patch.mask)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn genome(x: usize, y: usize, r: usize, colors: Vec<Rgb>) -> PatchGenome {
        PatchGenome { x, y, r, colors }
    }

    #[test]
    fn decode_rounds_half_up() {
        let layout = ParamLayout::fixed(40, 1).unwrap();
        let g = layout
            .decode(&[100.4, 50.6, 1.0, 0.0, 0.0], (640, 480))
            .unwrap();
        assert_eq!(g, genome(100, 51, 40, vec![[1.0, 0.0, 0.0]]));
        let g = layout.decode(&[100.5, 50.5, 0.0, 0.0, 0.0], (640, 480)).unwrap();
        assert_eq!((g.x, g.y), (101, 51));
    }

    #[test]
    fn decode_clamps_into_feasible_region() {
        let layout = ParamLayout::fixed(10, 1).unwrap();
        let g = layout
            .decode(&[-5.0, 1e9, 2.0, -1.0, 0.5], (100, 50))
            .unwrap();
        assert_eq!((g.x, g.y), (10, 40));
        assert_eq!(g.colors, vec![[1.0, 0.0, 0.5]]);
        assert!(g.validate((100, 50)).is_ok());
    }

    #[test]
    fn ten_colors_decode_to_ten() {
        let layout = ParamLayout::fixed(40, 10).unwrap();
        let mut v = vec![320.0, 240.0];
        v.extend((0..30).map(|i| i as f64 / 30.0));
        assert_eq!(layout.len(), 32);
        assert_eq!(layout.decode(&v, (640, 480)).unwrap().colors.len(), 10);
    }

    #[test]
    fn encode_inverts_decode_up_to_rounding() {
        let layout = ParamLayout::new(RadiusMode::Searched { min: 5, max: 30 }, ColorMode::Searched(2))
            .unwrap();
        let v = [33.3, 20.7, 12.5, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let g = layout.decode(&v, (80, 60)).unwrap();
        assert_eq!(g.r, 13);
        let back = layout.encode(&g);
        assert_eq!(back, vec![33.0, 21.0, 13.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(layout.decode(&back, (80, 60)).unwrap(), g);
    }

    #[test]
    fn frozen_colors_are_not_in_vector() {
        let frozen = vec![[0.2, 0.3, 0.4]];
        let layout = ParamLayout::new(RadiusMode::Fixed(4), ColorMode::Frozen(frozen.clone())).unwrap();
        assert_eq!(layout.len(), 2);
        assert_eq!(layout.bounds((20, 20)).unwrap().len(), 2);
        assert_eq!(layout.decode(&[9.0, 9.0], (20, 20)).unwrap().colors, frozen);
    }

    #[test]
    fn bounds_follow_feasibility_region() {
        let layout = ParamLayout::fixed(40, 2).unwrap();
        let b = layout.bounds((640, 480)).unwrap();
        assert_eq!(b[0], (40.0, 600.0));
        assert_eq!(b[1], (40.0, 440.0));
        assert!(b[2..].iter().all(|&r| r == (0.0, 1.0)));
        assert!(layout.bounds((60, 60)).is_err());
    }

    #[test]
    fn cyclic_assignment_row_major() {
        let colors = vec![[0.1, 0.0, 0.0], [0.2, 0.0, 0.0], [0.3, 0.0, 0.0]];
        let g = genome(2, 2, 2, colors.clone());
        let img = render_visible(&g, (5, 5)).unwrap();
        let mut got = Vec::new();
        for y in 0..5 {
            for x in 0..5 {
                if (x as i64 - 2).pow(2) + (y as i64 - 2).pow(2) <= 4 {
                    got.push(img.get(x, y, 0));
                }
            }
        }
        assert_eq!(got.len(), 13);
        assert_eq!(&got[..7], &[0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.1]);
        let expected: Vec<f64> = (0..13).map(|k| colors[k % 3][0]).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn ten_colors_used_evenly() {
        let colors: Vec<Rgb> = (0..10).map(|i| [i as f64 / 10.0, 0.0, 0.0]).collect();
        let g = genome(50, 50, 40, colors.clone());
        let img = render_visible(&g, (100, 100)).unwrap();
        let mask = g.mask((100, 100)).unwrap();
        let mut uses = [0usize; 10];
        for i in mask.indices() {
            let k = colors.iter().position(|c| c[0] == img.pixel(i)[0]).unwrap();
            uses[k] += 1;
        }
        let n = mask.count();
        assert!(uses.iter().all(|&u| u == n / 10 || u == n.div_ceil(10)), "{uses:?}");
    }

    #[test]
    fn single_color_fills_patch() {
        let g = genome(8, 8, 5, vec![[0.9, 0.1, 0.4]]);
        let img = render_visible(&g, (20, 20)).unwrap();
        let mask = g.mask((20, 20)).unwrap();
        for i in 0..400 {
            let expect: &[f64] = if mask.bits()[i] { &[0.9, 0.1, 0.4] } else { &[0.0; 3] };
            assert_eq!(img.pixel(i), expect);
        }
    }

    #[test]
    fn infrared_compression_examples() {
        let red = vec![[1.0, 0.0, 0.0], [0.2, 0.7, 0.9]];
        let g = genome(5, 5, 3, red.clone());
        let dims = (12, 12);
        let mask = g.mask(dims).unwrap();

        let ident = render_infrared(&g, dims, CompressionParams::IDENTITY).unwrap();
        let vis_gray = render_visible(&g, dims).unwrap().to_grayscale();
        for i in mask.indices() {
            assert!((ident.data()[i] - vis_gray.data()[i]).abs() < 1e-15);
        }

        let flat = render_infrared(&g, dims, CompressionParams { beta: 0.0, gamma: 0.5 }).unwrap();
        assert!(mask.indices().all(|i| flat.data()[i] == 0.5));

        let def = CompressionParams::default();
        assert!((def.infrared_value([1.0, 0.0, 0.0]) - 0.3995).abs() < 1e-12);
    }

    #[test]
    fn fast_apply_matches_embedding_composition() {
        let vis = Image::from_fn(30, 20, 3, |x, y, c| ((x * 7 + y * 3 + c) % 11) as f64 / 10.0);
        let ir = Image::from_fn(30, 20, 1, |x, y, _| ((x + y) % 5) as f64 / 4.0);
        let pair = ImagePair::new(vis, ir).unwrap();
        let g = genome(14, 9, 6, vec![[0.9, 0.2, 0.1], [0.0, 1.0, 0.5], [0.3, 0.3, 0.3]]);
        let c = CompressionParams::default();
        assert_eq!(
            apply(&g, &pair, c).unwrap(),
            apply_via_embedding(&g, &pair, c).unwrap()
        );
    }

    #[test]
    fn single_modality_application() {
        let pair = ImagePair::new(Image::filled(20, 20, 3, 0.1), Image::filled(20, 20, 1, 0.1)).unwrap();
        let g = genome(10, 10, 4, vec![[1.0, 1.0, 1.0]]);
        let c = CompressionParams::default();
        let vis_only = apply_to(&g, &pair, c, Modality::VisibleOnly).unwrap();
        assert_ne!(vis_only.visible(), pair.visible());
        assert_eq!(vis_only.infrared(), pair.infrared());
        let ir_only = apply_to(&g, &pair, c, Modality::InfraredOnly).unwrap();
        assert_eq!(ir_only.visible(), pair.visible());
        assert_ne!(ir_only.infrared(), pair.infrared());
    }

    #[test]
    fn genome_record_round_trip() {
        let g = genome(100, 51, 40, vec![[1.0, 0.0, 0.25], [0.1, 0.2, 0.30000000000000004]]);
        let line = g.to_string();
        assert!(line.starts_with("100 51 40 2 1 0 0.25"));
        assert_eq!(line.parse::<PatchGenome>().unwrap(), g);
        assert!("1 2 3 2 0 0 0".parse::<PatchGenome>().is_err());
        assert!("1 2".parse::<PatchGenome>().is_err());
    }

    #[test]
    fn infeasible_genome_is_rejected_by_render() {
        let g = genome(2, 10, 5, vec![[0.0; 3]]);
        assert!(matches!(render_visible(&g, (20, 20)), Err(Error::Feasibility(_))));
        let g = genome(10, 10, 5, vec![]);
        assert!(render_visible(&g, (20, 20)).is_err());
    }
}
