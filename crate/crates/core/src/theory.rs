//! Closed-form logit variance predictions.

use crate::error::{Error, Result};

fn check_dz(d_z: usize) -> Result<f64> {
    if d_z < 3 {
        return Err(Error::Domain(format!("feature dimension must be at least 3, got {d_z}")));
    }
    Ok(d_z as f64)
}

/// Predicted variance of `γ²·cos(z, p)` for `d_z`-dimensional isotropic
/// Gaussian vectors: `γ⁴ · d_z / (d_z − 2)²`.
pub fn predicted_ns_variance(gamma: f64, d_z: usize) -> Result<f64> {
    let d = check_dz(d_z)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    Ok(gamma.powi(4) * d / ((d - 2.0) * (d - 2.0)))
}

/// Scale `γ` that makes [`predicted_ns_variance`] equal `nu`:
/// `(ν · (d_z − 2)² / d_z)^{1/4}`.
pub fn optimal_gamma(nu: f64, d_z: usize) -> Result<f64> {
    let d = check_dz(d_z)?;
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::Domain(format!("target variance must be positive, got {nu}")));
    }
    Ok((nu * (d - 2.0) * (d - 2.0) / d).powf(0.25))
}

/// Pre-logit variance `d_z · Var(z_i) · Var(V_ij) · E‖x‖²`, where `x` is the
/// input of the output projection (attributes for a linear embedder, the
/// hidden representation for a deep one).
pub fn predicted_prelogit_variance(d_z: usize, var_z: f64, var_v: f64, mean_sq_norm: f64) -> Result<f64> {
    if d_z == 0 {
        return Err(Error::Domain("feature dimension must be positive".into()));
    }
    for (name, v) in [("Var(z)", var_z), ("Var(V)", var_v), ("E|x|^2", mean_sq_norm)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(d_z as f64 * var_z * var_v * mean_sq_norm)
}
