//! Cost evaluators for the three kernels.
//!
//! The contrast terms sum over all frames, so the log-det terms carry a
//! matching frame-count weight: `T` for the IVA family (the square-root
//! contrast contributes a factor 1/2 in the majorization) and `2T` for
//! ILRMA. With these weights each iterative-projection sweep is the exact
//! minimizer of its auxiliary function, which is what makes the traces
//! monotone.

use crate::error::{Error, Result};
use crate::linalg;
use crate::stft::Spectrogram;
use crate::subband::{Band, SubbandPlan};

use super::{demix, DemixingStack, NmfModel};

fn log_det_sum(w: &DemixingStack) -> f64 {
    let mut total = 0.0;
    for f in 0..w.n_bins() {
        let ld = linalg::log_abs_det(w.mat(f)).unwrap_or(f64::NEG_INFINITY);
        if ld == f64::NEG_INFINITY {
            log::warn!("singular demixing matrix at bin {f}; cost saturates to +inf");
            return f64::NEG_INFINITY;
        }
        total += ld;
    }
    total
}

fn check_cost_inputs(w: &DemixingStack, x: &Spectrogram) -> Result<()> {
    if !w.is_square() {
        return Err(Error::ShapeMismatch(
            "cost evaluation requires a square demixing stack".into(),
        ));
    }
    if w.n_bins() != x.n_bins() || w.n_channels() != x.n_channels() {
        return Err(Error::ShapeMismatch(format!(
            "demixing stack ({} bins, {} channels) does not match spectrogram ({} bins, {} channels)",
            w.n_bins(),
            w.n_channels(),
            x.n_bins(),
            x.n_channels()
        )));
    }
    Ok(())
}

fn clique_contrast(y: &Spectrogram, bands: &[Band]) -> f64 {
    let yd = y.data();
    let (_, n_frames, n_src) = yd.dim();
    let mut contrast = 0.0;
    for band in bands {
        for t in 0..n_frames {
            for n in 0..n_src {
                let mut energy = 0.0;
                for f in band.indices() {
                    energy += yd[[f, t, n]].norm_sqr();
                }
                contrast += energy.sqrt();
            }
        }
    }
    contrast
}

/// IVA cost: `sum_{n,t} sqrt(sum_f |y_ftn|^2) - T sum_f log|det W_f|`.
/// Returns `+inf` when some `W_f` is singular.
pub fn iva_cost(w: &DemixingStack, x: &Spectrogram) -> Result<f64> {
    check_cost_inputs(w, x)?;
    let y = demix(w, x)?;
    let full = [Band::new(1, x.n_bins())];
    let contrast = clique_contrast(&y, &full);
    Ok(contrast - x.n_frames() as f64 * log_det_sum(w))
}

/// OC-IVA cost: the vector-norm contrast runs over every clique of `plan`.
pub fn oc_iva_cost(w: &DemixingStack, x: &Spectrogram, plan: &SubbandPlan) -> Result<f64> {
    check_cost_inputs(w, x)?;
    if plan.n_bins() != x.n_bins() {
        return Err(Error::ShapeMismatch(format!(
            "plan covers {} bins, spectrogram has {}",
            plan.n_bins(),
            x.n_bins()
        )));
    }
    let y = demix(w, x)?;
    let contrast = clique_contrast(&y, plan.bands());
    Ok(contrast - x.n_frames() as f64 * log_det_sum(w))
}

/// ILRMA cost:
/// `sum_{f,t,n} (|y_ftn|^2 / r_ftn + log r_ftn) - 2T sum_f log|det W_f|`
/// with the model variance `r_ftn = t_fn^T v_tn`.
pub fn ilrma_cost(w: &DemixingStack, x: &Spectrogram, nmf: &NmfModel) -> Result<f64> {
    check_cost_inputs(w, x)?;
    if nmf.n_sources() != w.n_sources() || nmf.n_bins() != x.n_bins() || nmf.n_frames() != x.n_frames()
    {
        return Err(Error::ShapeMismatch(format!(
            "NMF model ({} sources, {} bins, {} frames) does not match spectrogram",
            nmf.n_sources(),
            nmf.n_bins(),
            nmf.n_frames()
        )));
    }
    let y = demix(w, x)?;
    let yd = y.data();
    let (n_bins, n_frames, n_src) = yd.dim();
    let mut contrast = 0.0;
    for n in 0..n_src {
        let variance = nmf.variance(n);
        for f in 0..n_bins {
            for t in 0..n_frames {
                let r = variance[[f, t]];
                if !(r > 0.0) {
                    return Err(Error::NonPositiveVariance {
                        bin: f,
                        frame: t,
                        source: n,
                    });
                }
                contrast += yd[[f, t, n]].norm_sqr() / r + r.ln();
            }
        }
    }
    Ok(contrast - 2.0 * x.n_frames() as f64 * log_det_sum(w))
}
