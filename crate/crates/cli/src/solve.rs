//! One-shot cluster solves on a fixed mesh or a dense matrix.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clustergap::cluster_gap::{estimate_cluster_gap, hausdorff, GapEstimate};
use clustergap::dense_oracle::DenseOperator;
use clustergap::exec::Exec;
use clustergap::feast::{feast_iterate, ClusterResult};
use clustergap::fem::DenseResolvent;
use clustergap::filters::RationalFilter;
use clustergap::c64;

use crate::config::{parse_complex, RunConfig};
use crate::problem::{self, Discretization};

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub ndofs: usize,
    pub cluster: ClusterResult,
    pub estimate: GapEstimate,
}

pub fn run_solve(cfg: &RunConfig, exec: Exec, out: &mut dyn Write) -> Result<SolveReport> {
    cfg.validate()?;
    let contour = problem::contour(cfg)?;
    let filter = RationalFilter::butterworth(&contour);
    let mesh = Arc::new(problem::initial_mesh(cfg)?);
    let disc = Discretization::new(cfg, mesh, &filter, exec)?;
    let cluster = feast_iterate(&*disc.backend, &filter, &contour, &problem::feast_options(cfg, exec))?;
    let estimate = estimate_cluster_gap(&cluster.basis, disc.gram(), disc.estimator.as_ref())?;
    writeln!(out, "ndofs      = {}", disc.ndofs())?;
    writeln!(out, "iterations = {}", cluster.iterations)?;
    for (k, l) in cluster.ritz_values.iter().enumerate() {
        writeln!(out, "ritz[{k}]    = {:.12e} {:+.12e}i", l.re, l.im)?;
    }
    if !cfg.reference.is_empty() {
        writeln!(out, "hausdorff  = {:.12e}", hausdorff(&cluster.ritz_values, &cfg.reference)?)?;
    }
    write!(out, "{}", estimate.report(false))?;
    Ok(SolveReport { ndofs: disc.ndofs(), cluster, estimate })
}

/// First line `n`, then `n` rows of `n` complex entries (`a`, `a+bi`).
pub fn parse_matrix(text: &str) -> Result<DenseOperator> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, first) = lines.next().context("empty matrix file")?;
    let n: usize = first.parse().with_context(|| format!("line 1: bad dimension `{first}`"))?;
    let mut entries = Vec::with_capacity(n * n);
    for (row, (line, l)) in lines.enumerate() {
        if row >= n {
            bail!("line {line}: more than {n} rows");
        }
        let vals: Vec<c64> = l
            .split_whitespace()
            .map(parse_complex)
            .collect::<Result<_, _>>()
            .map_err(|e| anyhow::anyhow!("line {line}: {e}"))?;
        if vals.len() != n {
            bail!("line {line}: expected {n} entries, found {}", vals.len());
        }
        entries.extend(vals);
    }
    if entries.len() != n * n {
        bail!("expected {n} rows, found {}", entries.len() / n.max(1));
    }
    Ok(DenseOperator::from_rows(n, &entries)?)
}

#[derive(Debug, Clone)]
pub struct DenseReport {
    pub ritz_values: Vec<c64>,
    /// Eigenvalues of the matrix inside the contour.
    pub reference: Vec<c64>,
    pub hausdorff: f64,
    pub dim: usize,
}

pub fn run_dense(cfg: &RunConfig, path: &Path, exec: Exec, out: &mut dyn Write) -> Result<DenseReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let op = parse_matrix(&text)?;
    let contour = problem::contour(cfg)?;
    let filter = RationalFilter::butterworth(&contour);
    let n = op.dim();
    let backend = DenseResolvent::new(op.matrix().clone())?;
    let mut opts = problem::feast_options(cfg, exec);
    opts.m = opts.m.min(n);
    let cluster = feast_iterate(&backend, &filter, &contour, &opts)?;
    let reference: Vec<c64> = op.eigenvalues()?.into_iter().filter(|&l| contour.contains(l, 0.0)).collect();
    let dist = if reference.is_empty() { f64::INFINITY } else { hausdorff(&cluster.ritz_values, &reference)? };
    writeln!(out, "dim        = {}", cluster.dim())?;
    for (k, l) in cluster.ritz_values.iter().enumerate() {
        writeln!(out, "ritz[{k}]    = {:.12e} {:+.12e}i", l.re, l.im)?;
    }
    for (k, l) in reference.iter().enumerate() {
        writeln!(out, "dense[{k}]   = {:.12e} {:+.12e}i", l.re, l.im)?;
    }
    writeln!(out, "hausdorff  = {dist:.3e}")?;
    let dim = cluster.dim();
    Ok(DenseReport { ritz_values: cluster.ritz_values, reference, hausdorff: dist, dim })
}
