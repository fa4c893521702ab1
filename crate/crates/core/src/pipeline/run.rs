//! End-to-end reconstruction of one event.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, Decomposition, PipelineConfig, UNPARTITIONED_LIMIT};
use crate::anneal::{random_baseline, simulated_anneal};
use crate::error::{Error, Result, StageContext};
use crate::event::{dedup_hits, Event};
use crate::preprocess::{
    edge_sector, linear_biases, sectorize_with, select_candidates, subgraph, subgraph_by_links, true_edge_set,
    Calibration, Edge, SubGraph,
};
use crate::qubo::{build_qubo, reward_links, Qubo, QuboMode};
use crate::tracking::{assemble_tracks, binned_metrics, merge_sectors, score, BinMetrics, Metrics, TrackCandidate};

pub const ARTIFACT_VERSION: u32 = 1;
pub const REPORT_VERSION: u32 = 1;

/// Candidates and sub-graphs of one sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorCandidates {
    pub sector: usize,
    pub edges: Vec<Edge>,
    pub pair_visits: u64,
    pub subgraphs: Vec<SubGraph>,
}

/// Output of the pre-processing stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessed {
    pub version: u32,
    pub threshold: f64,
    pub calibration_recall: f64,
    pub sectors: Vec<SectorCandidates>,
}

impl Preprocessed {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let p: Preprocessed = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if p.version != ARTIFACT_VERSION {
            return Err(Error::Config(format!("unsupported artifact version {}", p.version)));
        }
        Ok(p)
    }

    /// Every candidate edge by id.
    pub fn edge_index(&self) -> HashMap<u64, Edge> {
        self.sectors.iter().flat_map(|s| s.edges.iter().map(|e| (e.id, *e))).collect()
    }

    /// Candidates of all sectors, one per hit pair.
    pub fn merged_candidates(&self) -> Vec<Edge> {
        merge_sectors(self.sectors.iter().map(|s| &s.edges))
    }
}

/// One QUBO to anneal.
#[derive(Debug, Clone, PartialEq)]
pub struct SubProblem {
    pub sector: usize,
    pub subgraph: usize,
    pub qubo: Qubo,
}

impl SubProblem {
    pub fn file_name(&self) -> String {
        format!("s{:02}_g{:05}.qubo", self.sector, self.subgraph)
    }

    fn parse_name(name: &str) -> Option<(usize, usize)> {
        let (s, g) = name.strip_suffix(".qubo")?.strip_prefix('s')?.split_once("_g")?;
        Some((s.parse().ok()?, g.parse().ok()?))
    }

    /// Write every problem into `dir`, returning the file names.
    pub fn save_all(problems: &[SubProblem], dir: &Path) -> Result<Vec<String>> {
        fs::create_dir_all(dir)?;
        problems
            .iter()
            .map(|p| {
                let name = p.file_name();
                p.qubo.save(&dir.join(&name))?;
                Ok(name)
            })
            .collect()
    }

    /// Read back every `sXX_gYYYYY.qubo` in `dir`, ordered by (sector, sub-graph).
    pub fn load_all(dir: &Path) -> Result<Vec<SubProblem>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some((sector, subgraph)) = Self::parse_name(&name) {
                out.push(SubProblem { sector, subgraph, qubo: Qubo::load(&entry.path())? });
            }
        }
        out.sort_by_key(|p| (p.sector, p.subgraph));
        Ok(out)
    }
}

pub fn save_solutions(solutions: &[Solution], path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(solutions)? + "\n")?;
    Ok(())
}

pub fn load_solutions(path: &Path) -> Result<Vec<Solution>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Annealing result of one sub-problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub sector: usize,
    pub subgraph: usize,
    pub n: usize,
    pub energy: f64,
    pub selected: Vec<u64>,
}

pub(crate) fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Split one sector's candidates into independent sub-graphs.
pub fn decompose(edges: &[Edge], event: &Event, config: &PipelineConfig) -> Result<Vec<SubGraph>> {
    match config.decomposition {
        Decomposition::Degree => {
            subgraph(edges, &linear_biases(edges, config.qubo.beta, config.qubo.gamma), config.max_degree)
        }
        Decomposition::Links => {
            let q = build_qubo(edges, event, &config.qubo, QuboMode::Partial)?;
            subgraph_by_links(&q.var_to_edge, &reward_links(&q), config.max_links.unwrap_or(usize::MAX))
        }
        Decomposition::Sector => {
            let mut ids: Vec<u64> = edges.iter().map(|e| e.id).collect();
            ids.sort_unstable();
            ids.dedup();
            Ok(if ids.is_empty() { Vec::new() } else { vec![SubGraph { index: 0, m: ids.len(), edge_ids: ids }] })
        }
    }
}

/// Sectorise, select candidates with the frozen calibration and decompose
/// into sub-graphs.
pub fn preprocess_event(event: &Event, calibration: &Calibration, config: &PipelineConfig) -> Result<Preprocessed> {
    let sectors = sectorize_with(event, config.n_sectors).stage("sectorize")?;
    let per_sector = in_pool(config.threads, || {
        sectors
            .par_iter()
            .map(|s| {
                let loc = || format!("sector {}", s.index);
                let cands = select_candidates(s, event, calibration).stage_at("select_candidates", loc)?;
                let subgraphs = decompose(&cands.edges, event, config).stage_at("subgraph", loc)?;
                Ok(SectorCandidates { sector: s.index, edges: cands.edges, pair_visits: cands.pair_visits, subgraphs })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(Preprocessed {
        version: ARTIFACT_VERSION,
        threshold: calibration.threshold,
        calibration_recall: calibration.recall,
        sectors: per_sector,
    })
}

/// One QUBO per sub-graph, or a single event-wide QUBO when partitioning is off.
pub fn build_subproblems(pre: &Preprocessed, event: &Event, config: &PipelineConfig) -> Result<Vec<SubProblem>> {
    if !config.partition {
        let edges = pre.merged_candidates();
        if edges.len() > UNPARTITIONED_LIMIT {
            return Err(Error::TooLarge(format!(
                "{} variables exceed the unpartitioned limit of {UNPARTITIONED_LIMIT}",
                edges.len()
            )))
            .stage("build_qubo");
        }
        let qubo = build_qubo(&edges, event, &config.qubo, config.mode).stage("build_qubo")?;
        return Ok(vec![SubProblem { sector: 0, subgraph: 0, qubo }]);
    }
    let units: Vec<(&SectorCandidates, &SubGraph)> =
        pre.sectors.iter().flat_map(|s| s.subgraphs.iter().map(move |g| (s, g))).collect();
    in_pool(config.threads, || {
        units
            .par_iter()
            .map(|(s, g)| {
                let by_id: HashMap<u64, &Edge> = s.edges.iter().map(|e| (e.id, e)).collect();
                let loc = || format!("sector {}, sub-graph {}", s.sector, g.index);
                let edges = g
                    .edge_ids
                    .iter()
                    .map(|id| by_id.get(id).map(|e| **e).ok_or(Error::Config(format!("edge {id} not in sector"))))
                    .collect::<Result<Vec<Edge>>>()
                    .stage_at("build_qubo", loc)?;
                let qubo = build_qubo(&edges, event, &config.qubo, config.mode).stage_at("build_qubo", loc)?;
                Ok(SubProblem { sector: s.sector, subgraph: g.index, qubo })
            })
            .collect()
    })?
}

/// Anneal every sub-problem with its own derived seed.
pub fn solve_subproblems(problems: &[SubProblem], config: &PipelineConfig) -> Result<Vec<Solution>> {
    in_pool(config.threads, || {
        problems
            .par_iter()
            .map(|p| {
                let seed = derive_seed(config.seed, &[1, p.sector as u64, p.subgraph as u64]);
                let a = simulated_anneal(&p.qubo, &config.schedule, config.runs, seed)
                    .stage_at("anneal", || format!("sector {}, sub-graph {}", p.sector, p.subgraph))?;
                Ok(Solution {
                    sector: p.sector,
                    subgraph: p.subgraph,
                    n: p.qubo.n,
                    energy: a.energy,
                    selected: p.qubo.selected_edges(&a.bits),
                })
            })
            .collect()
    })?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    /// Distinct hit pairs over all sectors.
    pub n_edges: usize,
    pub n_true: usize,
    pub n_true_edges: usize,
    pub true_fraction: f64,
    pub recall: f64,
    pub calibration_recall: f64,
    pub threshold: f64,
    pub pair_visits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphSummary {
    pub count: usize,
    pub variables: usize,
    pub largest: usize,
    /// Size -> number of sub-graphs of that size.
    pub histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSigma {
    pub purity: Option<f64>,
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub bin_center: f64,
    pub lo: f64,
    pub hi: f64,
    pub purity: Option<f64>,
    pub efficiency: Option<f64>,
    /// Reconstructable particles in the bin.
    pub n: usize,
    pub n_reconstructed: usize,
    pub sigma: BinSigma,
}

impl From<&BinMetrics> for BinRow {
    fn from(b: &BinMetrics) -> Self {
        BinRow {
            bin_center: b.center,
            lo: b.lo,
            hi: b.hi,
            purity: b.metrics.purity,
            efficiency: b.metrics.efficiency,
            n: b.metrics.n_true,
            n_reconstructed: b.metrics.n_reconstructed,
            sigma: BinSigma { purity: b.metrics.purity_sigma, efficiency: b.metrics.efficiency_sigma },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub n_hits: usize,
    pub n_particles: usize,
    pub candidates: CandidateSummary,
    pub subgraphs: SubgraphSummary,
    /// Annealing cost in sweeps times variables, summed over sub-problems.
    pub sweep_variables: u64,
    pub total_energy: f64,
    pub n_selected: usize,
    pub n_tracks: usize,
    pub metrics: Metrics,
    /// Random selection at the candidate true fraction.
    pub baseline: Metrics,
    pub bins: BTreeMap<String, Vec<BinRow>>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub(crate) fn candidate_summary(pre: &Preprocessed, event: &Event) -> CandidateSummary {
    let truth = true_edge_set(event);
    let merged = pre.merged_candidates();
    let n_true = merged.iter().filter(|e| truth.contains(&(e.a, e.b))).count();
    CandidateSummary {
        n_edges: merged.len(),
        n_true,
        n_true_edges: truth.len(),
        true_fraction: if merged.is_empty() { 0.0 } else { n_true as f64 / merged.len() as f64 },
        recall: if truth.is_empty() { 0.0 } else { n_true as f64 / truth.len() as f64 },
        calibration_recall: pre.calibration_recall,
        threshold: pre.threshold,
        pair_visits: pre.sectors.iter().map(|s| s.pair_visits).sum(),
    }
}

pub(crate) fn histogram(sizes: impl IntoIterator<Item = usize>) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for m in sizes {
        *h.entry(m).or_insert(0) += 1;
    }
    h
}

/// Selected edge ids grouped back into their sectors and merged.
pub(crate) fn merge_selected(ids: &[u64], index: &HashMap<u64, Edge>) -> Result<Vec<Edge>> {
    let mut per_sector: BTreeMap<usize, Vec<Edge>> = BTreeMap::new();
    for id in ids {
        let e = index.get(id).ok_or_else(|| Error::Config(format!("selected edge {id} is not a candidate")))?;
        per_sector.entry(edge_sector(*id)).or_default().push(*e);
    }
    Ok(merge_sectors(per_sector.values()))
}

/// Tracks from a selection, scored.
pub fn tracks_and_metrics(
    selected: &[Edge],
    event: &Event,
    config: &PipelineConfig,
) -> Result<(Vec<TrackCandidate>, Metrics)> {
    let tracks = assemble_tracks(selected, event, &config.qubo.scales()).stage("assemble_tracks")?;
    let m = score(&tracks, event, config.min_hits, config.match_rule).stage("score")?;
    Ok((tracks, m))
}

/// Random-selection baseline over the merged candidates.
pub fn baseline_metrics(pre: &Preprocessed, event: &Event, config: &PipelineConfig) -> Result<Metrics> {
    let merged = pre.merged_candidates();
    let summary = candidate_summary(pre, event);
    let bits = random_baseline(merged.len(), summary.true_fraction, derive_seed(config.seed, &[2]))
        .stage("random_baseline")?;
    let chosen: Vec<Edge> = merged.iter().zip(&bits).filter(|(_, b)| **b).map(|(e, _)| *e).collect();
    Ok(tracks_and_metrics(&chosen, event, config)?.1)
}

/// Merge the solutions, assemble tracks and score them.
pub fn finish(pre: &Preprocessed, solutions: &[Solution], event: &Event, config: &PipelineConfig) -> Result<Report> {
    let mut solutions = solutions.to_vec();
    solutions.sort_by_key(|s| (s.sector, s.subgraph));
    let ids: Vec<u64> = solutions.iter().flat_map(|s| s.selected.iter().copied()).collect();
    let selected = merge_selected(&ids, &pre.edge_index()).stage("merge_sectors")?;
    let (tracks, metrics) = tracks_and_metrics(&selected, event, config)?;
    let mut bins = BTreeMap::new();
    for (var, edges) in config.bin_specs()? {
        let b =
            binned_metrics(&tracks, event, var, &edges, config.min_hits, config.match_rule).stage("binned_metrics")?;
        bins.insert(var.name().to_string(), b.iter().map(BinRow::from).collect());
    }
    let sizes: Vec<usize> = solutions.iter().map(|s| s.n).collect();
    Ok(Report {
        version: REPORT_VERSION,
        config_hash: config.hash()?,
        seed: config.seed,
        n_hits: event.hits().len(),
        n_particles: event.particles().len(),
        candidates: candidate_summary(pre, event),
        subgraphs: SubgraphSummary {
            count: sizes.len(),
            variables: sizes.iter().sum(),
            largest: sizes.iter().copied().max().unwrap_or(0),
            histogram: histogram(sizes.iter().copied()),
        },
        sweep_variables: (config.runs * config.schedule.sweeps) as u64 * sizes.iter().sum::<usize>() as u64,
        total_energy: solutions.iter().map(|s| s.energy).sum(),
        n_selected: selected.len(),
        n_tracks: tracks.len(),
        metrics,
        baseline: baseline_metrics(pre, event, config)?,
        bins,
    })
}

/// Full reconstruction: dedup, pre-process, anneal, merge, assemble, score.
pub fn run_pipeline(event: &Event, calibration: &Calibration, config: &PipelineConfig) -> Result<Report> {
    config.validate()?;
    let event = dedup_hits(event);
    let pre = preprocess_event(&event, calibration, config)?;
    let problems = build_subproblems(&pre, &event, config)?;
    let solutions = solve_subproblems(&problems, config)?;
    finish(&pre, &solutions, &event, config)
}

/// Per-bin series as CSV, one file per binning variable.
pub fn write_bin_csv<W: Write>(rows: &[BinRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "bin_center",
        "lo",
        "hi",
        "purity",
        "efficiency",
        "n",
        "n_reconstructed",
        "sigma_purity",
        "sigma_efficiency",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            format!("{}", r.bin_center),
            format!("{}", r.lo),
            format!("{}", r.hi),
            opt(r.purity),
            opt(r.efficiency),
            r.n.to_string(),
            r.n_reconstructed.to_string(),
            opt(r.sigma.purity),
            opt(r.sigma.efficiency),
        ])?;
    }
    w.flush()?;
    Ok(())
}
