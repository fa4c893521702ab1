use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Event;

/// Number of azimuthal sectors in the default partition.
pub const N_SECTORS: usize = 32;

/// One azimuthal sector. Sector `k` spans `[phi_min, phi_max)` with
/// `phi_min = -pi + k * 2pi/n` and width `2 * 2pi/n`, so neighbours overlap
/// by half a width. The last sector's `phi_max` exceeds pi and wraps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub index: usize,
    pub phi_min: f64,
    pub phi_max: f64,
    /// Member hits ordered by (r, id).
    pub hit_ids: Vec<u64>,
}

impl Sector {
    pub fn width(&self) -> f64 {
        self.phi_max - self.phi_min
    }

    /// Whether `phi` in (-pi, pi] lies inside this sector (wrap-aware).
    /// Uses the same slice arithmetic as [`sectors_of`] so boundary hits agree.
    pub fn contains(&self, phi: f64) -> bool {
        let n = (2.0 * TAU / self.width()).round() as usize;
        sectors_of(phi, n).contains(&self.index)
    }
}

/// Indices of the two sectors containing `phi` in an `n`-sector partition.
pub fn sectors_of(phi: f64, n: usize) -> [usize; 2] {
    let stride = TAU / n as f64;
    let slice = (((phi + PI) / stride).floor() as i64).rem_euclid(n as i64) as usize;
    [(slice + n - 1) % n, slice]
}

/// Split the event into the default 32 half-overlapping sectors.
pub fn sectorize(event: &Event) -> Vec<Sector> {
    sectorize_with(event, N_SECTORS).expect("default sector count is valid")
}

pub fn sectorize_with(event: &Event, n: usize) -> Result<Vec<Sector>> {
    if n < 2 {
        return Err(Error::Config(format!("sector count {n} must be at least 2")));
    }
    let stride = TAU / n as f64;
    let mut sectors: Vec<Sector> = (0..n)
        .map(|k| {
            let phi_min = -PI + k as f64 * stride;
            Sector { index: k, phi_min, phi_max: phi_min + 2.0 * stride, hit_ids: Vec::new() }
        })
        .collect();
    let mut order: Vec<_> = event.hits().iter().collect();
    order.sort_by(|a, b| a.r.total_cmp(&b.r).then(a.id.cmp(&b.id)));
    for h in order {
        for k in sectors_of(h.phi, n) {
            sectors[k].hit_ids.push(h.id);
        }
    }
    Ok(sectors)
}
