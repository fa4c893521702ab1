//! Geometric features of hit pairs and triplets.

use crate::error::{Error, Result};
use crate::event::{wrap_angle, Hit};

/// Characteristic lengths dividing (r, phi, z) so no cylindrical direction
/// dominates the opening angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    pub r: f64,
    pub phi: f64,
    pub z: f64,
}

impl Default for Scales {
    fn default() -> Self {
        Scales { r: 1000.0, phi: std::f64::consts::PI, z: 1000.0 }
    }
}

/// Segment `a -> b` in standardized cylindrical space. The azimuthal step is
/// wrapped into (-pi, pi] before scaling.
pub fn standardized_segment(a: &Hit, b: &Hit, scales: &Scales) -> [f64; 3] {
    [(b.r - a.r) / scales.r, wrap_angle(b.phi - a.phi) / scales.phi, (b.z - a.z) / scales.z]
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(u: &[f64], v: &[f64]) -> Option<f64> {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Some((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Opening-angle cosines of the hit triplet `a -> b -> c`.
///
/// `cos_theta` uses the standardized (r, phi, z) segments, `cos_phi` the
/// Cartesian projections on the transverse plane. Both are +1 for a
/// continuation without a kink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletAngles {
    pub cos_theta: f64,
    pub cos_phi: f64,
}

pub fn angle_kernel(a: &Hit, b: &Hit, c: &Hit, scales: &Scales) -> Result<TripletAngles> {
    let ab = standardized_segment(a, b, scales);
    let bc = standardized_segment(b, c, scales);
    let cos_theta = cosine(&ab, &bc)
        .ok_or_else(|| Error::Geometry(format!("zero-length segment in triplet ({}, {}, {})", a.id, b.id, c.id)))?;
    let uxy = [b.x - a.x, b.y - a.y];
    let vxy = [c.x - b.x, c.y - b.y];
    let cos_phi = cosine(&uxy, &vxy)
        .ok_or_else(|| Error::Geometry(format!("zero transverse length in triplet ({}, {}, {})", a.id, b.id, c.id)))?;
    Ok(TripletAngles { cos_theta, cos_phi })
}

/// Length of segment `a -> b` in standardized space.
pub fn standardized_length(a: &Hit, b: &Hit, scales: &Scales) -> f64 {
    norm(&standardized_segment(a, b, scales))
}

/// z (mm) where the rz-line through `a` and `c` reaches r = 0.
pub fn z_intercept(a: &Hit, c: &Hit) -> Result<f64> {
    z_intercept_rz(a.r, a.z, c.r, c.z)
        .ok_or_else(|| Error::Geometry(format!("hits {} and {} share r = {}", a.id, c.id, a.r)))
}

pub(crate) fn z_intercept_rz(ra: f64, za: f64, rc: f64, zc: f64) -> Option<f64> {
    if ra == rc {
        return None;
    }
    Some(zc - (zc - za) / (rc - ra) * rc)
}

/// Inclination of segment `a -> b` in the rz-plane, `atan2(dz, dr)`.
pub fn rz_angle(a: &Hit, b: &Hit) -> f64 {
    (b.z - a.z).atan2(b.r - a.r)
}
