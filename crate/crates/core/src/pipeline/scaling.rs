//! Annealing-time scaling: measure convergence on every sub-QUBO across
//! event sizes and fit log t = a + log sum_i exp(c m_i).

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, PipelineConfig};
use super::run::{build_subproblems, in_pool, preprocess_event};
use crate::anneal::{bootstrap_mean, measure_convergence, DEFAULT_PSEUDO};
use crate::error::{Error, Result, StageContext};
use crate::event::{dedup_hits, generate_event};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub c: f64,
    /// Infinite when the size distributions cannot separate c from the amplitude.
    pub stderr: f64,
    pub log_amplitude: f64,
    pub residuals: Vec<f64>,
}

impl fmt::Display for ExpFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.c == 0.0 || !self.stderr.is_finite() {
            return write!(f, "c = {:.3e} ± {:.3e}", self.c, self.stderr);
        }
        let e = self.c.abs().log10().floor() as i32;
        let s = 10f64.powi(e);
        write!(f, "c = ({:.2} ± {:.3}) × 10^{}", self.c / s, self.stderr / s, e)
    }
}

/// log sum_i exp(c m_i) and its derivative in c (softmax-weighted mean size).
fn log_sum_exp(sizes: &[f64], c: f64) -> (f64, f64) {
    let top = sizes.iter().map(|&m| c * m).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut zm) = (0.0, 0.0);
    for &m in sizes {
        let w = (c * m - top).exp();
        z += w;
        zm += w * m;
    }
    (top + z.ln(), zm / z)
}

/// Profiled residuals and Jacobian in c; the intercept is solved exactly.
fn profile(points: &[(Vec<f64>, f64)], c: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let n = points.len() as f64;
    let (l, d): (Vec<f64>, Vec<f64>) = points.iter().map(|(m, _)| log_sum_exp(m, c)).unzip();
    let a = points.iter().zip(&l).map(|((_, t), l)| t.ln() - l).sum::<f64>() / n;
    let dbar = d.iter().sum::<f64>() / n;
    let r = points.iter().zip(&l).map(|((_, t), l)| t.ln() - a - l).collect();
    let j = d.iter().map(|d| -(d - dbar)).collect();
    (a, r, j)
}

fn rss(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Least-squares fit of c in t_k ~ A sum_i exp(c m_{k,i}).
pub fn fit_exponential(points: &[(Vec<f64>, f64)]) -> Result<ExpFit> {
    if points.len() < 3 {
        return Err(Error::Insufficient(format!("exponential fit needs at least 3 points, got {}", points.len())));
    }
    if let Some((_, t)) = points.iter().find(|(_, t)| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::Config(format!("times must be positive, got {t}")));
    }
    if points.iter().any(|(m, _)| m.is_empty() || m.iter().any(|x| !x.is_finite())) {
        return Err(Error::Insufficient("every point needs a non-empty, finite size distribution".into()));
    }
    let mut c = 0.0;
    let (mut a, mut r, mut j) = profile(points, c);
    for _ in 0..200 {
        let jj: f64 = j.iter().map(|x| x * x).sum();
        if jj < 1e-300 {
            break;
        }
        let step = -j.iter().zip(&r).map(|(j, r)| j * r).sum::<f64>() / jj;
        let base = rss(&r);
        let mut lambda = 1.0;
        let mut moved = false;
        while lambda > 1e-6 {
            let (a2, r2, j2) = profile(points, c + lambda * step);
            if rss(&r2) <= base {
                c += lambda * step;
                (a, r, j) = (a2, r2, j2);
                moved = true;
                break;
            }
            lambda /= 2.0;
        }
        if !moved || (lambda * step).abs() <= 1e-12 * c.abs().max(1e-12) {
            break;
        }
    }
    let jj: f64 = j.iter().map(|x| x * x).sum();
    let dof = (points.len() - 2) as f64;
    let stderr = if jj < 1e-300 { f64::INFINITY } else { (rss(&r) / dof / jj).sqrt() };
    Ok(ExpFit { c, stderr, log_amplitude: a, residuals: r })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub track_count: usize,
    pub events: usize,
    pub n_subgraphs: usize,
    /// Sub-graph size -> count, pooled over events.
    pub histogram: BTreeMap<usize, usize>,
    /// Mean per event of sum_i m_i.
    pub size_sum: f64,
    /// Mean per event of the bootstrapped total, in sweeps x variables.
    pub mean_time: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub censored: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<ScalingPoint>,
    pub c: f64,
    pub c_stderr: f64,
    pub fit: ExpFit,
}

impl ScalingPoint {
    pub fn sizes(&self) -> Vec<f64> {
        self.histogram.iter().flat_map(|(&m, &k)| std::iter::repeat_n(m as f64, k)).collect()
    }
}

pub fn scaling_benchmark(
    track_counts: &[usize],
    config: &PipelineConfig,
    events_per_point: usize,
) -> Result<ScalingFit> {
    config.validate()?;
    if track_counts.len() < 3 {
        return Err(Error::Insufficient(format!("scaling needs at least 3 track counts, got {}", track_counts.len())));
    }
    if track_counts.windows(2).any(|w| w[0] >= w[1]) || track_counts[0] == 0 {
        return Err(Error::Config("track counts must be positive and strictly ascending".into()));
    }
    if events_per_point == 0 {
        return Err(Error::Config("events_per_point must be at least 1".into()));
    }
    let calibration = config.calibration().stage("calibrate")?;
    let mut points = Vec::new();
    for &tracks in track_counts {
        let start = Instant::now();
        let mut histogram = BTreeMap::new();
        let (mut n_subgraphs, mut size_sum, mut censored) = (0, 0.0, 0);
        let (mut mean, mut lo, mut hi) = (0.0, 0.0, 0.0);
        for e in 0..events_per_point {
            let mut gen = config.generator.clone().with_seed(derive_seed(config.seed, &[3, tracks as u64, e as u64]));
            gen.n_particles = tracks;
            let event = dedup_hits(&generate_event(&gen).stage("generate")?);
            let pre = preprocess_event(&event, &calibration, config)?;
            let problems = build_subproblems(&pre, &event, config)?;
            let stats = in_pool(config.threads, || {
                problems
                    .par_iter()
                    .map(|p| {
                        let seed =
                            derive_seed(config.seed, &[4, tracks as u64, e as u64, p.sector as u64, p.subgraph as u64]);
                        measure_convergence(&p.qubo, &config.protocol, seed).stage_at("measure_convergence", || {
                            format!("sector {}, sub-graph {}", p.sector, p.subgraph)
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })??;
            let mut samples = BTreeMap::new();
            for (p, s) in problems.iter().zip(&stats) {
                let m = p.qubo.n;
                *histogram.entry(m).or_insert(0) += 1;
                size_sum += m as f64;
                censored += s.censored;
                samples.insert((p.sector, p.subgraph), s.sweeps_to_converge.iter().map(|&k| (k * m) as f64).collect());
            }
            n_subgraphs += problems.len();
            let b = bootstrap_mean(&samples, DEFAULT_PSEUDO, derive_seed(config.seed, &[5, tracks as u64, e as u64]))
                .stage("bootstrap")?;
            mean += b.mean;
            lo += b.ci_low;
            hi += b.ci_high;
        }
        let k = events_per_point as f64;
        points.push(ScalingPoint {
            track_count: tracks,
            events: events_per_point,
            n_subgraphs,
            histogram,
            size_sum: size_sum / k,
            mean_time: mean / k,
            ci_low: lo / k,
            ci_high: hi / k,
            censored,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    let data: Vec<(Vec<f64>, f64)> = points.iter().map(|p| (p.sizes(), p.mean_time)).collect();
    let fit = fit_exponential(&data).stage("fit_exponential")?;
    Ok(ScalingFit { points, c: fit.c, c_stderr: fit.stderr, fit })
}
