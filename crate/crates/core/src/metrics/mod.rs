//! Attack effectiveness and stealthiness measures.

mod counting;
mod fusion;
mod quality;
mod segmentation;
mod table;

pub use counting::{
    game, game0_from_counts, grid_density_counts, grid_point_counts, mean_absolute_error, rmse,
    PointAnnotations,
};
pub use fusion::{
    cc, fusion_losses, fusion_ssim, pearson, qabf, sobel, sobel_magnitude, vif, viff,
};
pub use quality::{mse, psnr, psnr_from_mse, ssim, PSNR_CAP, SSIM_WINDOW};
pub use segmentation::{confusion_matrix, miou, recall, ClassMap};
pub use table::{format_value, Metric, MetricTable};

use crate::error::Result;
use crate::image::{Image, ImagePair};

/// Similarity of an adversarial pair to its clean pair, per modality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stealth {
    pub psnr_vis: f64,
    pub ssim_vis: f64,
    pub psnr_inf: f64,
    pub ssim_inf: f64,
}

impl Stealth {
    pub fn measure(clean: &ImagePair, adversarial: &ImagePair) -> Result<Self> {
        Ok(Stealth {
            psnr_vis: psnr(clean.visible(), adversarial.visible())?,
            ssim_vis: ssim(clean.visible(), adversarial.visible())?,
            psnr_inf: psnr(clean.infrared(), adversarial.infrared())?,
            ssim_inf: ssim(clean.infrared(), adversarial.infrared())?,
        })
    }

    pub fn record(&self, table: &mut MetricTable) {
        table
            .set(Metric::PsnrVis, self.psnr_vis)
            .set(Metric::SsimVis, self.ssim_vis)
            .set(Metric::PsnrInf, self.psnr_inf)
            .set(Metric::SsimInf, self.ssim_inf);
    }
}

/// Fusion quality of `fused` against the clean sources of `pair`.
pub fn fusion_table(pair: &ImagePair, fused: &Image) -> Result<MetricTable> {
    let (vis, inf) = (pair.visible(), pair.infrared());
    let vis_gray = vis.to_grayscale();
    let psnr_fused = 0.5 * (psnr(fused, &vis_gray)? + psnr(fused, inf)?);
    Ok(MetricTable::new()
        .with(Metric::Qabf, qabf(vis, inf, fused)?)
        .with(Metric::Viff, viff(vis, inf, fused)?)
        .with(Metric::Cc, cc(vis, inf, fused)?)
        .with(Metric::PsnrFused, psnr_fused)
        .with(Metric::SsimFused, fusion_ssim(vis, inf, fused)?))
}
