use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::field::C64;

pub const DPU_CROP: usize = 4;
pub const DPU_PADDED: usize = 50;
pub const DPU_UPSAMPLE: usize = 8;
pub const DPU_SAMPLES: usize = DPU_PADDED * DPU_UPSAMPLE;
/// Zeros placed before the 16 crop values.
pub const DPU_PAD_BEFORE: usize = (DPU_PADDED - DPU_CROP * DPU_CROP) / 2;

/// Flattens a 4x4 crop, centers it in 50 samples and repeats each sample 8 times.
pub fn dpu_input_pipeline(crop: ArrayView2<'_, C64>) -> Result<Vec<C64>> {
    if crop.dim() != (DPU_CROP, DPU_CROP) {
        return Err(Error::Argument(format!("DPU crop must be 4x4, got {:?}", crop.dim())));
    }
    let mut padded = vec![C64::new(0.0, 0.0); DPU_PADDED];
    for (dst, &v) in padded[DPU_PAD_BEFORE..].iter_mut().zip(crop.iter()) {
        *dst = v;
    }
    Ok(padded
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, DPU_UPSAMPLE))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn single_value_lands_after_padding() {
        let mut crop = Array2::zeros((4, 4));
        let c = C64::new(0.3, -0.2);
        crop[[0, 0]] = c;
        let out = dpu_input_pipeline(crop.view()).unwrap();
        assert_eq!(out.len(), 400);
        for (i, v) in out.iter().enumerate() {
            if (136..144).contains(&i) {
                assert_eq!(*v, c);
            } else {
                assert_eq!(*v, C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn shape_checked() {
        assert!(dpu_input_pipeline(Array2::zeros((6, 6)).view()).is_err());
        let out = dpu_input_pipeline(Array2::zeros((4, 4)).view()).unwrap();
        assert!(out.iter().all(|v| v.norm() == 0.0));
    }
}
