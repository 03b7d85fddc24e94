use std::sync::{Arc, OnceLock, RwLock};

use canopy_core::pipeline::{analyze_grid, LightAnalysis, TreeStructure};
use canopy_core::scoring::score_set;
use canopy_core::{CutSpec, PipelineConfig, PointCloud, ScoreReport, SkyModel, Vec3};

use crate::error::ApiError;

/// One state of a tree: a cloud, the cuts that produced it, and lazily
/// computed analysis.
#[derive(Debug)]
pub struct Variant {
    pub cloud: PointCloud,
    pub history: Vec<CutSpec>,
    analysis: OnceLock<LightAnalysis>,
    structure: OnceLock<TreeStructure>,
}

impl Variant {
    fn new(cloud: PointCloud, history: Vec<CutSpec>) -> Self {
        Self {
            cloud,
            history,
            analysis: OnceLock::new(),
            structure: OnceLock::new(),
        }
    }

    pub fn analysis(&self, config: &PipelineConfig) -> Result<&LightAnalysis, ApiError> {
        if let Some(a) = self.analysis.get() {
            return Ok(a);
        }
        let sky: SkyModel = config.sky()?;
        let a = canopy_core::pipeline::analyze(&self.cloud, &sky, config)?;
        Ok(self.analysis.get_or_init(|| a))
    }
}

pub struct Session {
    pub id: u64,
    pub config: Arc<PipelineConfig>,
    /// Serializes accept and undo within the session.
    pub writer: tokio::sync::Mutex<()>,
    original: Arc<Variant>,
    current: RwLock<Arc<Variant>>,
    trunk: OnceLock<Vec3>,
}

/// Outcome of applying one cut to a variant.
pub struct Trial {
    pub variant: Arc<Variant>,
    /// Indices into the cloud the cut was applied to.
    pub removed_point_indices: Vec<usize>,
}

impl Session {
    pub fn new(id: u64, cloud: PointCloud, config: Arc<PipelineConfig>) -> Self {
        let original = Arc::new(Variant::new(cloud, Vec::new()));
        Self {
            id,
            config,
            writer: tokio::sync::Mutex::new(()),
            current: RwLock::new(original.clone()),
            original,
            trunk: OnceLock::new(),
        }
    }

    pub fn original(&self) -> Arc<Variant> {
        self.original.clone()
    }

    pub fn current(&self) -> Arc<Variant> {
        self.current.read().expect("session poisoned").clone()
    }

    pub(crate) fn set_current(&self, v: Arc<Variant>) {
        *self.current.write().expect("session poisoned") = v;
    }

    /// Trunk position found on the original cloud; every later variant
    /// keeps it.
    pub fn trunk(&self) -> Result<Vec3, ApiError> {
        if let Some(t) = self.trunk.get() {
            return Ok(*t);
        }
        let s = self.structure(&self.original)?;
        Ok(*self.trunk.get_or_init(|| s.trunk_position()))
    }

    pub fn structure<'a>(&self, v: &'a Variant) -> Result<&'a TreeStructure, ApiError> {
        if let Some(s) = v.structure.get() {
            return Ok(s);
        }
        let s = if v.history.is_empty() {
            TreeStructure::build(&v.cloud, &self.config)?
        } else {
            TreeStructure::build_with_trunk_at(&v.cloud, &self.config, self.trunk()?)?
        };
        Ok(v.structure.get_or_init(|| s))
    }

    /// Score of `v` normalized over {original, v}.
    pub fn report(&self, v: &Variant) -> Result<ScoreReport, ApiError> {
        let base = self.original.analysis(&self.config)?.measurement;
        let m = v.analysis(&self.config)?.measurement;
        Ok(score_set(&[base, m], self.config.coefficients)?[1])
    }

    /// Applies `cut` to `from` without touching the session.
    pub fn try_cut(&self, from: &Variant, cut: CutSpec) -> Result<Trial, ApiError> {
        self.trunk()?;
        let structure = self.structure(from)?;
        let (result, kept, _) = structure.prune(&from.cloud, &[cut])?;
        let mut history = from.history.clone();
        history.push(cut);
        let variant = Variant::new(kept, history);
        // Removal is per cell, so the kept cells are the old grid minus the
        // removed ones.
        let removed_cells = result.removed_nodes.iter().map(|&n| structure.graph.nodes[n].cell);
        let grid = structure.grid.without(removed_cells);
        let sky = self.config.sky()?;
        let _ = variant.analysis.set(analyze_grid(grid, &sky, &self.config)?);
        Ok(Trial {
            variant: Arc::new(variant),
            removed_point_indices: result.removed_point_indices,
        })
    }
}

/// Applies `cuts` in order to the session's original cloud.
pub fn replay(session: &Session, cuts: &[CutSpec]) -> Result<Arc<Variant>, ApiError> {
    let mut v = session.original();
    for &cut in cuts {
        v = session.try_cut(&v, cut)?.variant;
    }
    Ok(v)
}
