//! Random search over QUBO weights, scored by mean F1 on calibration events.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::run::run_pipeline;
use crate::error::{Error, Result, StageContext};
use crate::qubo::QuboParams;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    F1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTrial {
    pub index: usize,
    pub values: BTreeMap<String, f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: QuboParams,
    pub best_score: f64,
    pub trials: Vec<TuneTrial>,
}

/// Sample `budget` points uniformly from `space` (name -> [lo, hi]). Trial k
/// depends only on `seed` and k, so a larger budget extends the same sequence.
pub fn tune_params(
    space: &BTreeMap<String, (f64, f64)>,
    objective: Objective,
    budget: usize,
    seed: u64,
    config: &PipelineConfig,
) -> Result<TuneResult> {
    if space.is_empty() {
        return Err(Error::Config("tuning space is empty".into()));
    }
    if budget == 0 {
        return Err(Error::Config("tuning budget must be at least 1".into()));
    }
    let mut probe = config.qubo;
    for (name, &(lo, hi)) in space {
        if probe.get_mut(name).is_none() {
            return Err(Error::Config(format!("unknown parameter {name:?}")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("bad range for {name}: [{lo}, {hi}]")));
        }
    }
    let calibration = config.calibration().stage("calibrate")?;
    let events = config.calibration_events().stage("generate")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<(f64, QuboParams)> = None;
    for index in 0..budget {
        let mut cfg = config.clone();
        let mut values = BTreeMap::new();
        for (name, &(lo, hi)) in space {
            let v = if lo == hi { lo } else { rng.random_range(lo..hi) };
            *cfg.qubo.get_mut(name).expect("checked above") = v;
            values.insert(name.clone(), v);
        }
        cfg.qubo.validate()?;
        let mut total = 0.0;
        for ev in &events {
            let report = run_pipeline(ev, &calibration, &cfg)?;
            total += match objective {
                Objective::F1 => report.metrics.f1.unwrap_or(0.0),
            };
        }
        let score = total / events.len() as f64;
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, cfg.qubo));
        }
        trials.push(TuneTrial { index, values, score });
    }
    let (best_score, best) = best.expect("budget is at least 1");
    Ok(TuneResult { best, best_score, trials })
}
