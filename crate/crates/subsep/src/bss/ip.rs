//! Iterative-projection sweep shared by AuxIVA, ILRMA and OC-IVA.
//!
//! One sweep updates source rows in ascending order. For each source n and
//! bin f it forms the weighted covariance
//! `U_fn = (1/T) sum_t weight(f,t,n) x_ft x_ft^H`, solves
//! `(W_f U_fn) z = e_n`, normalizes `z / sqrt(z^H U_fn z)` and writes `z^H`
//! into row n of `W_f`. The methods differ only in the weights.

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::stft::Spectrogram;
use crate::subband::{Band, SubbandPlan};

use super::{demix, DemixingStack, DIAG_LOAD, EPS_R};

/// Clique weights of the IVA family: for every band i containing f,
/// `1 / max(r_itn, eps)` with `r_itn = sqrt(sum_{f in band_i} |y_ftn|^2)`.
/// A single full band reduces this to the plain AuxIVA weights.
pub(crate) fn iva_clique_weights(y: &Spectrogram, bands: &[Band]) -> Array3<f64> {
    let (n_bins, n_frames, n_src) = y.data().dim();
    let yd = y.data();
    let mut weights = Array3::<f64>::zeros((n_bins, n_frames, n_src));
    for band in bands {
        for t in 0..n_frames {
            for n in 0..n_src {
                let mut energy = 0.0;
                for f in band.indices() {
                    energy += yd[[f, t, n]].norm_sqr();
                }
                let inv = 1.0 / energy.sqrt().max(EPS_R);
                for f in band.indices() {
                    weights[[f, t, n]] += inv;
                }
            }
        }
    }
    weights
}

/// One iterative-projection sweep over all sources and bins.
pub(crate) fn ip_sweep(
    x: &Spectrogram,
    w: &mut DemixingStack,
    weights: &Array3<f64>,
) -> Result<()> {
    let (n_bins, n_frames, n_ch) = x.data().dim();
    let n_src = w.n_sources();
    debug_assert_eq!(n_src, n_ch, "IP sweep requires a square demixing stack");
    let xd = x.data();

    let mut u = Array2::<Complex64>::zeros((n_ch, n_ch));
    let mut wu = Array2::<Complex64>::zeros((n_ch, n_ch));
    let mut rhs = vec![Complex64::new(0.0, 0.0); n_ch];

    for n in 0..n_src {
        for f in 0..n_bins {
            u.fill(Complex64::new(0.0, 0.0));
            for t in 0..n_frames {
                let wgt = weights[[f, t, n]];
                for a in 0..n_ch {
                    let xa = xd[[f, t, a]] * wgt;
                    for b in 0..n_ch {
                        u[[a, b]] += xa * xd[[f, t, b]].conj();
                    }
                }
            }
            let inv_t = 1.0 / n_frames as f64;
            u.mapv_inplace(|v| v * inv_t);
            let trace: f64 = (0..n_ch).map(|a| u[[a, a]].re).sum();
            let load = DIAG_LOAD * trace / n_ch as f64;
            for a in 0..n_ch {
                u[[a, a]] += load;
            }

            // wu = W_f U
            let wd = w.data();
            for a in 0..n_src {
                for b in 0..n_ch {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..n_ch {
                        acc += wd[[f, a, k]] * u[[k, b]];
                    }
                    wu[[a, b]] = acc;
                }
            }
            for (i, r) in rhs.iter_mut().enumerate() {
                *r = Complex64::new(if i == n { 1.0 } else { 0.0 }, 0.0);
            }
            let z = linalg::solve(wu.view(), &rhs).map_err(|e| match e {
                Error::SingularMatrix { .. } => Error::SingularMatrix { bin: f },
                other => other,
            })?;

            // norm^2 = z^H U z (real and positive thanks to the loading)
            let mut norm_sq = 0.0;
            for a in 0..n_ch {
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..n_ch {
                    acc += u[[a, b]] * z[b];
                }
                norm_sq += (z[a].conj() * acc).re;
            }
            if !(norm_sq > 0.0 && norm_sq.is_finite()) {
                return Err(Error::SingularMatrix { bin: f });
            }
            let scale = 1.0 / norm_sq.sqrt();
            let wd = w.data_mut();
            for m in 0..n_ch {
                wd[[f, n, m]] = z[m].conj() * scale;
            }
        }
    }
    Ok(())
}

/// One AuxIVA iteration, in place.
pub(crate) fn auxiva_step(x: &Spectrogram, w: &mut DemixingStack) -> Result<()> {
    let y = demix(w, x)?;
    let full = [Band::new(1, x.n_bins())];
    let weights = iva_clique_weights(&y, &full);
    ip_sweep(x, w, &weights)
}

/// One OC-IVA iteration (joint update of all cliques), in place.
pub(crate) fn oc_iva_step(x: &Spectrogram, w: &mut DemixingStack, plan: &SubbandPlan) -> Result<()> {
    let y = demix(w, x)?;
    let weights = iva_clique_weights(&y, plan.bands());
    ip_sweep(x, w, &weights)
}

/// One full AuxIVA iterative-projection sweep.
pub fn auxiva_update(x: &Spectrogram, w: &DemixingStack) -> Result<DemixingStack> {
    if !w.is_square() {
        return Err(Error::ShapeMismatch(
            "AuxIVA update requires a square demixing stack".into(),
        ));
    }
    let mut out = w.clone();
    auxiva_step(x, &mut out)?;
    Ok(out)
}

/// One OC-IVA sweep with clique weights taken from `plan`.
pub fn oc_iva_update(
    x: &Spectrogram,
    w: &DemixingStack,
    plan: &SubbandPlan,
) -> Result<DemixingStack> {
    if !w.is_square() {
        return Err(Error::ShapeMismatch(
            "OC-IVA update requires a square demixing stack".into(),
        ));
    }
    if plan.n_bins() != x.n_bins() {
        return Err(Error::ShapeMismatch(format!(
            "plan covers {} bins, spectrogram has {}",
            plan.n_bins(),
            x.n_bins()
        )));
    }
    let mut out = w.clone();
    oc_iva_step(x, &mut out, plan)?;
    Ok(out)
}
