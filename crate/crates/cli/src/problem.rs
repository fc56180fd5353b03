//! Builds meshes, spaces, solvers and estimators from a [`RunConfig`].

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clustergap::estimators::{FoslsEstimator, ResidualEstimator, SourceEstimator};
use clustergap::exec::Exec;
use clustergap::feast::{FeastOptions, ResolventBackend};
use clustergap::fem::{CgResolvent, FoslsResolvent, LagrangeSpace, OperatorSpec};
use clustergap::filters::{ContourCircle, RationalFilter};
use clustergap::mesh::{Point, TriMesh};
use clustergap::c64;

use crate::config::{BackendKind, EstimatorKind, Problem, RunConfig};

/// Reads `x y` vertex lines; blank lines and `#` comments are skipped.
pub fn read_polygon(path: &Path) -> Result<Vec<Point>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pts = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let xy: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}:{}: bad coordinate", path.display(), i + 1))?;
        if xy.len() != 2 {
            bail!("{}:{}: expected `x y`", path.display(), i + 1);
        }
        pts.push([xy[0], xy[1]]);
    }
    Ok(pts)
}

pub fn initial_mesh(cfg: &RunConfig) -> Result<TriMesh> {
    Ok(match cfg.problem {
        Problem::Square => TriMesh::structured_square(cfg.n),
        Problem::Lshape => TriMesh::lshape(cfg.n),
        Problem::Polygon => {
            let path = cfg.geometry.as_deref().context("polygon problem without geometry")?;
            TriMesh::from_polygon(&read_polygon(path)?, cfg.hmax)?
        }
        Problem::Mesh => {
            let path = cfg.geometry.as_deref().context("mesh problem without geometry")?;
            TriMesh::read(path).with_context(|| format!("reading mesh {}", path.display()))?
        }
    })
}

pub fn operator(cfg: &RunConfig) -> OperatorSpec {
    if cfg.potential == c64::from(0.0) {
        OperatorSpec::laplacian()
    } else {
        OperatorSpec::left_half(cfg.potential)
    }
}

pub fn contour(cfg: &RunConfig) -> Result<ContourCircle> {
    Ok(ContourCircle::with_phase_sign(cfg.center, cfg.radius, cfg.nquad, cfg.negative_phase)?)
}

pub fn feast_options(cfg: &RunConfig, exec: Exec) -> FeastOptions {
    FeastOptions { m: cfg.block_size(), seed: cfg.seed, tol: cfg.tol_feast, maxit: cfg.maxit, exec }
}

/// Solver and estimator on one mesh.
pub struct Discretization {
    pub space: Arc<LagrangeSpace>,
    pub backend: Arc<dyn ResolventBackend>,
    pub estimator: Box<dyn SourceEstimator>,
}

impl Discretization {
    pub fn new(cfg: &RunConfig, mesh: Arc<TriMesh>, filter: &RationalFilter, exec: Exec) -> Result<Self> {
        let space = LagrangeSpace::new(mesh.clone(), cfg.degree)?;
        let (backend, cg): (Arc<dyn ResolventBackend>, Option<Arc<CgResolvent>>) = match cfg.backend {
            BackendKind::Cg => {
                let cg = Arc::new(CgResolvent::new(space.clone(), operator(cfg), exec));
                (cg.clone(), Some(cg))
            }
            BackendKind::Fosls => (Arc::new(FoslsResolvent::new(space.clone(), space.clone(), exec)?), None),
        };
        let estimator: Box<dyn SourceEstimator> = match cfg.estimator {
            EstimatorKind::Residual => {
                let cg = match cg {
                    Some(cg) => cg,
                    None => Arc::new(CgResolvent::new(space.clone(), operator(cfg), exec)),
                };
                Box::new(ResidualEstimator::new(cg, filter))
            }
            EstimatorKind::Fosls => {
                let scalar = if cfg.degree == 1 { space.clone() } else { LagrangeSpace::new(mesh, 1)? };
                let fosls = Arc::new(FoslsResolvent::new(scalar, space.clone(), exec)?);
                Box::new(FoslsEstimator::new(fosls, filter))
            }
        };
        Ok(Self { space, backend, estimator })
    }

    pub fn ndofs(&self) -> usize {
        self.space.ndofs()
    }

    /// `V` Gram matrix applied to a block.
    pub fn gram(&self) -> impl Fn(&clustergap::linalg::CMatrix) -> clustergap::linalg::CMatrix + '_ {
        move |x| self.backend.apply_gram(x)
    }
}
