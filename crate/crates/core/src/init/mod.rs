//! Initialization: endmembers by VCA, abundances by FCLS on the coarse grid
//! upsampled bicubically, and `Psi = 1 1^T`.

mod bicubic;
mod fcls;
mod vca;

pub use bicubic::bicubic_upsample;
pub use fcls::{fcls_abundances, fcls_kkt_residual, nnls, FclsSolver};
pub use vca::{vca_extract, VcaResult};

use crate::error::{FuvarError, Result};
use crate::types::{AbundanceMap, Decimation, EndmemberMatrix, ImageCube};

/// FCLS abundances of the observed HS cube, upsampled to the fine grid.
pub fn initial_abundances(
    yh: &ImageCube,
    endmembers: &EndmemberMatrix,
    decimation: Decimation,
) -> Result<AbundanceMap> {
    if yh.bands() != endmembers.bands() {
        return Err(FuvarError::InvalidDimensions(format!(
            "HS cube has {} bands, endmembers {}",
            yh.bands(),
            endmembers.bands()
        )));
    }
    let coarse = fcls_abundances(&yh.to_band_matrix(), endmembers)?;
    let fine = bicubic_upsample(
        &coarse,
        yh.rows(),
        yh.cols(),
        decimation.factor,
        decimation.phase,
    )?;
    AbundanceMap::new(yh.rows() * decimation.factor, yh.cols() * decimation.factor, fine)
}
