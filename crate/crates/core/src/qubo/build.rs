use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::geometry::{angle_kernel, standardized_length, z_intercept, Scales};
use super::Qubo;
use crate::error::{Error, Result};
use crate::event::{Event, Hit};
use crate::preprocess::Edge;

/// Weights of the track energy. Defaults are the Bayesian-optimised values
/// quoted for the TrackML tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuboParams {
    /// Exponent sharpening the angle cosines.
    pub lambda: f64,
    /// Weight of the transverse (xy) alignment term.
    pub rho: f64,
    /// Weight of the z-intercept penalty.
    pub eta_bias: f64,
    /// Exponent of the z-intercept penalty.
    pub zeta: f64,
    /// Bifurcation penalty.
    pub alpha: f64,
    /// Prior bias weight.
    pub beta: f64,
    /// Constant per-edge inhibition.
    pub gamma: f64,
    /// Pairs with `cos^lambda(theta) < tau` get no alignment reward.
    pub tau: f64,
    pub scale_r: f64,
    pub scale_phi: f64,
    pub scale_z: f64,
}

impl Default for QuboParams {
    fn default() -> Self {
        QuboParams {
            lambda: 13.17,
            rho: 5.00,
            eta_bias: 14.41,
            zeta: 1.79,
            alpha: 86.20,
            beta: 20.91,
            gamma: 9.79,
            tau: 0.996,
            scale_r: 1000.0,
            scale_phi: std::f64::consts::PI,
            scale_z: 1000.0,
        }
    }
}

impl QuboParams {
    pub fn scales(&self) -> Scales {
        Scales { r: self.scale_r, phi: self.scale_phi, z: self.scale_z }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda", self.lambda),
            ("rho", self.rho),
            ("eta_bias", self.eta_bias),
            ("zeta", self.zeta),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("tau", self.tau),
        ];
        if let Some((name, v)) = named.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("{name} = {v} is not finite")));
        }
        if !(self.tau > -1.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau = {} outside (-1, 1]", self.tau)));
        }
        for (name, v) in [("scale_r", self.scale_r), ("scale_phi", self.scale_phi), ("scale_z", self.scale_z)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    /// Mutable access by name, used by the tuner.
    pub fn get_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "lambda" => &mut self.lambda,
            "rho" => &mut self.rho,
            "eta_bias" => &mut self.eta_bias,
            "zeta" => &mut self.zeta,
            "alpha" => &mut self.alpha,
            "beta" => &mut self.beta,
            "gamma" => &mut self.gamma,
            "tau" => &mut self.tau,
            "scale_r" => &mut self.scale_r,
            "scale_phi" => &mut self.scale_phi,
            "scale_z" => &mut self.scale_z,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuboMode {
    /// Alignment reward, z-intercept penalty, bifurcation penalty and prior bias.
    Full,
    /// Alignment reward and z-intercept penalty only.
    Partial,
    /// The original Denby-Peterson energy with a global edge-count term.
    ClassicDp,
}

impl std::str::FromStr for QuboMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(QuboMode::Full),
            "partial" => Ok(QuboMode::Partial),
            "classic_dp" | "classic-dp" => Ok(QuboMode::ClassicDp),
            other => Err(Error::Config(format!("unknown QUBO mode {other:?}"))),
        }
    }
}

fn pow_clamped(c: f64, lambda: f64) -> f64 {
    c.max(0.0).powf(lambda)
}

/// Build the energy over `edges`. Variables are ordered by edge id so the
/// result does not depend on the input order.
pub fn build_qubo(edges: &[Edge], event: &Event, params: &QuboParams, mode: QuboMode) -> Result<Qubo> {
    let mut edges = edges.to_vec();
    edges.sort_by_key(|e| e.id);
    if let Some(w) = edges.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Config(format!("edge id {} listed twice", w[0].id)));
    }
    let ends: Vec<(&Hit, &Hit)> =
        edges.iter().map(|e| Ok((event.try_hit(e.a)?, event.try_hit(e.b)?))).collect::<Result<_>>()?;
    let scales = params.scales();
    let mut q = Qubo::with_edges(edges.iter().map(|e| e.id).collect());

    let mut outgoing: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut incoming: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        outgoing.entry(e.a).or_default().push(i);
        incoming.entry(e.b).or_default().push(i);
    }
    let lengths: Vec<f64> = ends.iter().map(|(a, b)| standardized_length(a, b, &scales)).collect();

    // Chained pairs a -> b -> c.
    let mut middles: Vec<&u64> = incoming.keys().filter(|h| outgoing.contains_key(h)).collect();
    middles.sort_unstable();
    for b in middles {
        for &i in &incoming[b] {
            for &j in &outgoing[b] {
                let (ha, hb) = ends[i];
                let hc = ends[j].1;
                let k = angle_kernel(ha, hb, hc, &scales)?;
                let len = lengths[i] + lengths[j];
                let v = match mode {
                    QuboMode::Full | QuboMode::Partial => {
                        let ct = pow_clamped(k.cos_theta, params.lambda);
                        let reward = if ct < params.tau {
                            0.0
                        } else {
                            -(ct + params.rho * pow_clamped(k.cos_phi, params.lambda)) / len
                        };
                        let zi = z_intercept(ha, hc)? / params.scale_z;
                        reward + params.eta_bias * zi.abs().powf(params.zeta)
                    }
                    QuboMode::ClassicDp => -0.5 * pow_clamped(k.cos_theta, params.lambda) / len,
                };
                q.add_quadratic(i, j, v);
            }
        }
    }

    match mode {
        QuboMode::Full => {
            add_bifurcations(&mut q, &outgoing, &incoming, params.alpha);
            for (i, e) in edges.iter().enumerate() {
                q.add_linear(i, -(params.beta * e.prior - params.gamma));
            }
        }
        QuboMode::Partial => {}
        QuboMode::ClassicDp => {
            add_bifurcations(&mut q, &outgoing, &incoming, params.alpha);
            // (beta / 2) (sum s - N)^2 with N the candidate count.
            let n = q.n as f64;
            for i in 0..q.n {
                q.add_linear(i, params.beta / 2.0 * (1.0 - 2.0 * n));
                for j in i + 1..q.n {
                    q.add_quadratic(i, j, params.beta);
                }
            }
            q.offset += params.beta / 2.0 * n * n;
        }
    }
    Ok(q)
}

fn add_bifurcations(
    q: &mut Qubo,
    outgoing: &HashMap<u64, Vec<usize>>,
    incoming: &HashMap<u64, Vec<usize>>,
    alpha: f64,
) {
    let mut groups: Vec<&Vec<usize>> = outgoing.values().chain(incoming.values()).collect();
    groups.sort_unstable();
    for g in groups {
        for (x, &i) in g.iter().enumerate() {
            for &j in &g[x + 1..] {
                q.add_quadratic(i, j, alpha);
            }
        }
    }
}

/// Attractive couplings as `(edge_a, edge_b, strength)` links, strength = -J.
pub fn reward_links(q: &Qubo) -> Vec<(u64, u64, f64)> {
    q.quadratic.iter().filter(|(_, v)| **v < 0.0).map(|(&(i, j), v)| (q.var_to_edge[i], q.var_to_edge[j], -v)).collect()
}
