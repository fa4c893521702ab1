//! Three-stage sparse reconstruction: a partial QUBO for efficiency, then
//! the full QUBO on survivors, first per sub-graph and finally per sector.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, PipelineConfig};
use super::run::{candidate_summary, decompose, in_pool, merge_selected, tracks_and_metrics, CandidateSummary};
use super::run::{Preprocessed, SectorCandidates, ARTIFACT_VERSION};
use crate::anneal::simulated_anneal;
use crate::error::{Result, StageContext};
use crate::event::{dedup_hits, Event};
use crate::preprocess::{sectorize_with, select_candidates, subgraph_by_links, Calibration, Edge};
use crate::qubo::{build_qubo, reward_links, QuboMode};
use crate::tracking::Metrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub mode: QuboMode,
    pub n_subgraphs: usize,
    pub largest: usize,
    /// Distinct hit pairs entering the stage.
    pub n_input: usize,
    pub n_selected: usize,
    /// Selected pairs that join consecutive hits of one particle.
    pub n_true_selected: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedReport {
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub candidates: CandidateSummary,
    pub stages: Vec<StageReport>,
}

impl StagedReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

struct Group {
    sector: usize,
    index: usize,
    edges: Vec<Edge>,
}

/// Anneal each group and return the selected edges per sector.
fn anneal_groups(
    groups: &[Group],
    event: &Event,
    config: &PipelineConfig,
    mode: QuboMode,
    stage: u64,
) -> Result<BTreeMap<usize, Vec<Edge>>> {
    let name = ["", "stage 1", "stage 2", "stage 3"][stage as usize];
    let picked = in_pool(config.threads, || {
        groups
            .par_iter()
            .map(|g| {
                let loc = || format!("{name}, sector {}, sub-graph {}", g.sector, g.index);
                let q = build_qubo(&g.edges, event, &config.qubo, mode).stage_at("build_qubo", loc)?;
                let seed = derive_seed(config.seed, &[10 + stage, g.sector as u64, g.index as u64]);
                let a = simulated_anneal(&q, &config.schedule, config.runs, seed).stage_at("anneal", loc)?;
                let on: HashSet<u64> = q.selected_edges(&a.bits).into_iter().collect();
                Ok((g.sector, g.edges.iter().filter(|e| on.contains(&e.id)).copied().collect::<Vec<_>>()))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut out: BTreeMap<usize, Vec<Edge>> = BTreeMap::new();
    for (s, mut edges) in picked {
        out.entry(s).or_default().append(&mut edges);
    }
    for v in out.values_mut() {
        v.sort_by_key(|e| e.id);
    }
    Ok(out)
}

fn groups_of(sector: usize, edges: &[Edge], subgraphs: &[crate::preprocess::SubGraph]) -> Vec<Group> {
    let by_id: HashMap<u64, Edge> = edges.iter().map(|e| (e.id, *e)).collect();
    subgraphs
        .iter()
        .map(|g| Group { sector, index: g.index, edges: g.edge_ids.iter().map(|id| by_id[id]).collect() })
        .collect()
}

/// Stage-1 sub-graphs: components of the alignment-reward links of the
/// partial QUBO. Raising tau removes links, so the count can only grow.
pub fn stage_one_subgraphs(
    edges: &[Edge],
    event: &Event,
    config: &PipelineConfig,
) -> Result<Vec<crate::preprocess::SubGraph>> {
    let q = build_qubo(edges, event, &config.qubo, QuboMode::Partial)?;
    subgraph_by_links(&q.var_to_edge, &reward_links(&q), config.max_links.unwrap_or(usize::MAX))
}

fn stage_report(
    stage: usize,
    mode: QuboMode,
    groups: &[Group],
    selected: &BTreeMap<usize, Vec<Edge>>,
    index: &HashMap<u64, Edge>,
    event: &Event,
    config: &PipelineConfig,
) -> Result<StageReport> {
    let input: Vec<u64> = groups.iter().flat_map(|g| g.edges.iter().map(|e| e.id)).collect();
    let ids: Vec<u64> = selected.values().flatten().map(|e| e.id).collect();
    let merged = merge_selected(&ids, index).stage("merge_sectors")?;
    let (_, metrics) = tracks_and_metrics(&merged, event, config)?;
    let truth: HashSet<(u64, u64)> = event.true_edges().into_iter().collect();
    Ok(StageReport {
        stage,
        mode,
        n_subgraphs: groups.len(),
        largest: groups.iter().map(|g| g.edges.len()).max().unwrap_or(0),
        n_input: merge_selected(&input, index)?.len(),
        n_selected: merged.len(),
        n_true_selected: merged.iter().filter(|e| truth.contains(&(e.a, e.b))).count(),
        metrics,
    })
}

pub fn run_staged_sparse(event: &Event, calibration: &Calibration, config: &PipelineConfig) -> Result<StagedReport> {
    config.validate()?;
    let event = dedup_hits(event);
    let sectors = sectorize_with(&event, config.n_sectors).stage("sectorize")?;
    let cands = sectors
        .iter()
        .map(|s| {
            select_candidates(s, &event, calibration).stage_at("select_candidates", || format!("sector {}", s.index))
        })
        .collect::<Result<Vec<_>>>()?;
    let index: HashMap<u64, Edge> = cands.iter().flat_map(|c| c.edges.iter().map(|e| (e.id, *e))).collect();

    // Stage 1: partial QUBO on reward-link components. Isolated edges carry
    // no energy and stay off.
    let mut groups = Vec::new();
    for c in &cands {
        let sg = stage_one_subgraphs(&c.edges, &event, config)
            .stage_at("subgraph", || format!("stage 1, sector {}", c.sector))?;
        groups.extend(groups_of(c.sector, &c.edges, &sg));
    }
    let linked: Vec<Group> = groups
        .iter()
        .filter(|g| g.edges.len() > 1)
        .map(|g| Group { sector: g.sector, index: g.index, edges: g.edges.clone() })
        .collect();
    let s1 = anneal_groups(&linked, &event, config, QuboMode::Partial, 1)?;
    let mut stages = vec![stage_report(1, QuboMode::Partial, &groups, &s1, &index, &event, config)?];

    // Stage 2: full QUBO on re-decomposed survivors.
    let mut groups = Vec::new();
    for (sector, edges) in &s1 {
        let sg = decompose(edges, &event, config).stage_at("subgraph", || format!("stage 2, sector {sector}"))?;
        groups.extend(groups_of(*sector, edges, &sg));
    }
    let s2 = anneal_groups(&groups, &event, config, QuboMode::Full, 2)?;
    stages.push(stage_report(2, QuboMode::Full, &groups, &s2, &index, &event, config)?);

    // Stage 3: full QUBO over each sector's survivors, no sub-graphs.
    let groups: Vec<Group> = s2
        .iter()
        .filter(|(_, e)| !e.is_empty())
        .map(|(s, e)| Group { sector: *s, index: 0, edges: e.clone() })
        .collect();
    let s3 = anneal_groups(&groups, &event, config, QuboMode::Full, 3)?;
    stages.push(stage_report(3, QuboMode::Full, &groups, &s3, &index, &event, config)?);

    let pre = Preprocessed {
        version: ARTIFACT_VERSION,
        threshold: calibration.threshold,
        calibration_recall: calibration.recall,
        sectors: cands
            .into_iter()
            .map(|c| SectorCandidates {
                sector: c.sector,
                edges: c.edges,
                pair_visits: c.pair_visits,
                subgraphs: Vec::new(),
            })
            .collect(),
    };
    Ok(StagedReport {
        version: super::run::REPORT_VERSION,
        config_hash: config.hash()?,
        seed: config.seed,
        candidates: candidate_summary(&pre, &event),
        stages,
    })
}
