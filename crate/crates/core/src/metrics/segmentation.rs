use crate::error::{Error, Result};

/// Per-pixel class labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl ClassMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} class map needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(ClassMap {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }
}

/// Confusion counts `m[i][j]`: pixels of ground-truth class `i` predicted as
/// class `j`.
pub fn confusion_matrix(pred: &ClassMap, gt: &ClassMap, num_classes: usize) -> Result<Vec<Vec<u64>>> {
    if pred.dims() != gt.dims() {
        return Err(Error::Dimension(format!(
            "class maps {:?} vs {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    let mut m = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        let (p, g) = (p as usize, g as usize);
        if p >= num_classes || g >= num_classes {
            return Err(Error::InvalidValue(format!(
                "label {} outside 0..{num_classes}",
                p.max(g)
            )));
        }
        m[g][p] += 1;
    }
    Ok(m)
}

/// Mean IoU over classes that occur in either map.
pub fn miou(pred: &ClassMap, gt: &ClassMap, num_classes: usize) -> Result<f64> {
    let m = confusion_matrix(pred, gt, num_classes)?;
    let mut sum = 0.0;
    let mut present = 0usize;
    for i in 0..num_classes {
        let tp = m[i][i];
        let gt_total: u64 = m[i].iter().sum();
        let pred_total: u64 = m.iter().map(|row| row[i]).sum();
        let union = gt_total + pred_total - tp;
        if union > 0 {
            sum += tp as f64 / union as f64;
            present += 1;
        }
    }
    Ok(if present == 0 { 1.0 } else { sum / present as f64 })
}

/// Mean per-class recall over classes present in the ground truth.
pub fn recall(pred: &ClassMap, gt: &ClassMap, num_classes: usize) -> Result<f64> {
    let m = confusion_matrix(pred, gt, num_classes)?;
    let mut sum = 0.0;
    let mut present = 0usize;
    for (i, row) in m.iter().enumerate() {
        let gt_total: u64 = row.iter().sum();
        if gt_total > 0 {
            sum += row[i] as f64 / gt_total as f64;
            present += 1;
        }
    }
    Ok(if present == 0 { 1.0 } else { sum / present as f64 })
}
