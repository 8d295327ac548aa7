//! Perfectly inelastic two-body impacts and single-vehicle impact energies.
//!
//! After an inelastic impact both bodies share the velocity of the center of
//! mass. The kinetic energy lost to deformation is `½·m_r·|v1 − v2|²`, with
//! `m_r = m1·m2/(m1+m2)` the reduced mass, and each vehicle's share is
//! `½·m_i·|Δv_i|²`. The velocity changes are antiparallel, with magnitudes in
//! the inverse ratio of the masses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Relative tolerance of the internal check that `½·m_r·ΔV²` equals the
/// kinetic-energy difference, measured against the pre-impact energy.
const ENERGY_IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrashKinematics {
    /// Common post-impact velocity, m/s.
    pub combined_velocity: Vec2,
    pub delta_v1: Vec2,
    pub delta_v2: Vec2,
    /// |v1 − v2|, m/s.
    pub delta_v12_mag: f64,
    /// Energy absorbed by the impact, J.
    pub absorbed_total: f64,
    pub absorbed_1: f64,
    pub absorbed_2: f64,
    pub reduced_mass: f64,
    pub kinetic_before: f64,
    pub kinetic_after: f64,
}

fn check_masses(m1: f64, m2: f64) -> Result<()> {
    if !(m1.is_finite() && m1 > 0.0 && m2.is_finite() && m2 > 0.0) {
        return Err(Error::invalid(format!("masses must be positive, got {m1} and {m2}")));
    }
    Ok(())
}

/// Velocity of the joined bodies: `(m1·v1 + m2·v2)/(m1 + m2)`.
pub fn combined_velocity(m1: f64, v1: Vec2, m2: f64, v2: Vec2) -> Result<Vec2> {
    check_masses(m1, m2)?;
    Ok((v1 * m1 + v2 * m2) / (m1 + m2))
}

/// Velocity change of each body, `(V − v1, V − v2)`.
pub fn delta_v(m1: f64, v1: Vec2, m2: f64, v2: Vec2) -> Result<(Vec2, Vec2)> {
    let v = combined_velocity(m1, v1, m2, v2)?;
    Ok((v - v1, v - v2))
}

pub fn reduced_mass(m1: f64, m2: f64) -> Result<f64> {
    check_masses(m1, m2)?;
    Ok(m1 * m2 / (m1 + m2))
}

/// Full impact bookkeeping.
///
/// The absorbed energy is evaluated both as `½·m_r·ΔV²` and as `Ka − Kb`;
/// a disagreement beyond roundoff is reported as [`Error::Internal`].
pub fn absorbed_energy(m1: f64, v1: Vec2, m2: f64, v2: Vec2) -> Result<CrashKinematics> {
    let combined = combined_velocity(m1, v1, m2, v2)?;
    let (dv1, dv2) = (combined - v1, combined - v2);
    let mr = reduced_mass(m1, m2)?;
    let rel = v1 - v2;
    let absorbed_total = 0.5 * mr * rel.norm_squared();
    let kinetic_before = 0.5 * m1 * v1.norm_squared() + 0.5 * m2 * v2.norm_squared();
    let kinetic_after = 0.5 * (m1 + m2) * combined.norm_squared();

    let diff = kinetic_before - kinetic_after;
    if (absorbed_total - diff).abs() > ENERGY_IDENTITY_TOL * kinetic_before.max(f64::MIN_POSITIVE) {
        return Err(Error::Internal(format!(
            "absorbed energy {absorbed_total} J disagrees with kinetic difference {diff} J"
        )));
    }

    Ok(CrashKinematics {
        combined_velocity: combined,
        delta_v1: dv1,
        delta_v2: dv2,
        delta_v12_mag: rel.norm(),
        absorbed_total,
        absorbed_1: 0.5 * m1 * dv1.norm_squared(),
        absorbed_2: 0.5 * m2 * dv2.norm_squared(),
        reduced_mass: mr,
        kinetic_before,
        kinetic_after,
    })
}

/// Power-law injury risk `min(1, (ΔV/α)^k)`.
pub fn injury_probability(delta_v_mag: f64, alpha: f64, k: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0 && k.is_finite() && k > 0.0) {
        return Err(Error::invalid(format!("alpha and k must be positive, got {alpha} and {k}")));
    }
    if !(delta_v_mag >= 0.0) {
        return Err(Error::invalid(format!("delta-v must be >= 0, got {delta_v_mag}")));
    }
    Ok((delta_v_mag / alpha).powf(k).min(1.0))
}

/// Energy of an impact against a rigid straight barrier: only the velocity
/// component along the barrier normal is absorbed.
pub fn barrier_energy(mass: f64, v: Vec2, normal: Vec2) -> Result<f64> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::invalid(format!("mass must be positive, got {mass}")));
    }
    if (normal.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("barrier normal must be a unit vector, |n| = {}", normal.norm())));
    }
    let vn = v.dot(normal);
    Ok(0.5 * mass * vn * vn)
}

/// Energy of an impact against a rigid point obstacle: the whole kinetic energy.
pub fn obstacle_energy(mass: f64, speed: f64) -> Result<f64> {
    if !(mass.is_finite() && mass > 0.0) || !(speed >= 0.0) {
        return Err(Error::invalid(format!(
            "mass must be positive and speed non-negative, got {mass} and {speed}"
        )));
    }
    Ok(0.5 * mass * speed * speed)
}
