//! The adaptive loop: solve, estimate, mark, refine.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clustergap::cluster_gap::{estimate_cluster_gap, hausdorff};
use clustergap::exec::Exec;
use clustergap::feast::feast_iterate;
use clustergap::filters::RationalFilter;
use clustergap::mesh::{greedy_mark, TriMesh};
use clustergap::c64;

use crate::config::RunConfig;
use crate::problem::{self, Discretization};

pub const CSV_HEADER: &str = "ndofs,hausdorff,l2_eta,eta_max,round,dim_Eh";

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub ndofs: usize,
    pub hausdorff: f64,
    pub l2_eta: f64,
    pub eta_max: f64,
    pub round: usize,
    pub dim_eh: usize,
}

impl ConvergenceRow {
    /// Fields in header order; floats in shortest round-trip form.
    pub fn record(&self) -> [String; 6] {
        [
            self.ndofs.to_string(),
            format!("{:e}", self.hausdorff),
            format!("{:e}", self.l2_eta),
            format!("{:e}", self.eta_max),
            self.round.to_string(),
            self.dim_eh.to_string(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub rows: Vec<ConvergenceRow>,
    pub ritz_values: Vec<Vec<c64>>,
    pub csv_path: PathBuf,
    pub mesh_paths: Vec<PathBuf>,
    pub final_mesh: TriMesh,
}

pub fn csv_path(prefix: &Path) -> PathBuf {
    PathBuf::from(format!("{}_data.csv", prefix.display()))
}

pub fn mesh_path(prefix: &Path, round: usize) -> PathBuf {
    PathBuf::from(format!("{}_mesh_{round}.txt", prefix.display()))
}

/// Runs up to `max_rounds` rounds. Rows are flushed as they are produced,
/// so a failure leaves the rows of the completed rounds on disk.
pub fn run_adapt(cfg: &RunConfig, exec: Exec, log: &mut dyn Write) -> Result<AdaptOutcome> {
    cfg.validate()?;
    let contour = problem::contour(cfg)?;
    let filter = RationalFilter::butterworth(&contour);
    let opts = problem::feast_options(cfg, exec);

    let csv_path = csv_path(&cfg.output_prefix);
    let file = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    let mut file = BufWriter::new(file);
    if cfg.reference.is_empty() {
        writeln!(file, "# hausdorff: distance to the previous round's Ritz values (no reference given); 0 in the first row")?;
    }
    let mut csv = csv::Writer::from_writer(file);
    csv.write_record(CSV_HEADER.split(','))?;
    csv.flush()?;

    let mut mesh = problem::initial_mesh(cfg)?;
    let mut rows = Vec::new();
    let mut ritz_values: Vec<Vec<c64>> = Vec::new();
    let mut mesh_paths = Vec::new();
    for round in 1..=cfg.max_rounds {
        let mesh_arc = Arc::new(mesh.clone());
        let disc = Discretization::new(cfg, mesh_arc, &filter, exec)?;
        if disc.ndofs() > cfg.max_ndofs {
            writeln!(log, "round {round}: {} dofs exceed the cap {}; stopping", disc.ndofs(), cfg.max_ndofs)?;
            break;
        }
        let cluster = feast_iterate(&*disc.backend, &filter, &contour, &opts)
            .with_context(|| format!("subspace iteration in round {round}"))?;
        let est = estimate_cluster_gap(&cluster.basis, disc.gram(), disc.estimator.as_ref())
            .with_context(|| format!("gap estimate in round {round}"))?;
        let dist = if !cfg.reference.is_empty() {
            hausdorff(&cluster.ritz_values, &cfg.reference)?
        } else if let Some(prev) = ritz_values.last() {
            hausdorff(&cluster.ritz_values, prev)?
        } else {
            0.0
        };
        let row = ConvergenceRow {
            ndofs: disc.ndofs(),
            hausdorff: dist,
            l2_eta: est.eta_l2,
            eta_max: est.eta_max,
            round,
            dim_eh: cluster.dim(),
        };
        csv.write_record(row.record())?;
        csv.flush()?;
        let mpath = mesh_path(&cfg.output_prefix, round);
        mesh.write(&mpath).with_context(|| format!("writing {}", mpath.display()))?;
        mesh_paths.push(mpath);
        writeln!(
            log,
            "round {round}: ndofs {} dim {} iterations {} hausdorff {:.3e} l2_eta {:.3e}",
            row.ndofs,
            row.dim_eh,
            cluster.iterations,
            row.hausdorff,
            row.l2_eta
        )?;
        rows.push(row);
        ritz_values.push(cluster.ritz_values);
        if round == cfg.max_rounds {
            break;
        }
        let marks = greedy_mark(&est.eta_local, cfg.theta)?;
        mesh = mesh.refine_marked(&marks)?;
    }
    anyhow::ensure!(!rows.is_empty(), "the initial mesh already exceeds max_ndofs = {}", cfg.max_ndofs);
    Ok(AdaptOutcome { rows, ritz_values, csv_path, mesh_paths, final_mesh: mesh })
}

/// Parses a CSV written by [`run_adapt`]; `#` lines are skipped.
pub fn read_csv(text: &str) -> Result<Vec<ConvergenceRow>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header.join(",") == CSV_HEADER, "unexpected header `{}`", header.join(","));
    reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let field = |k: usize| rec.get(k).with_context(|| format!("row {}: missing field {k}", i + 1));
            Ok(ConvergenceRow {
                ndofs: field(0)?.parse()?,
                hausdorff: field(1)?.parse()?,
                l2_eta: field(2)?.parse()?,
                eta_max: field(3)?.parse()?,
                round: field(4)?.parse()?,
                dim_eh: field(5)?.parse()?,
            })
        })
        .collect()
}
