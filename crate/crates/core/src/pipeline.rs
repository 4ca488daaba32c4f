//! The two end-to-end per-interval procedures and the final estimators.
//!
//! Motion-guided processing consumes dense motion-filtered 3D points plus
//! ITD values, sweeps the number of components with BIC, and emits located
//! AV objects with speaking flags. Face-guided processing consumes a handful
//! of detected face positions, fixes `N` to their count, and only infers
//! speaking activity.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ItdValue, MicPairConfig, ScenePoint};
use crate::mixture::{
    em_fusion, em_fusion_anchored, em_visual, log_likelihood, MixtureParams, OutlierDomain,
    RespMatrix,
};
use crate::selection::{
    bic_score, init_from_previous, merge_clusters, reject_spurious, select_model, ScoredModel,
};

/// Default interval length in seconds (6 visual frames at 15 FPS).
pub const DEFAULT_INTERVAL_S: f64 = 0.4;

/// Frames with sound energy below this are not processed.
pub const DEFAULT_ENERGY_GATE: f64 = 0.001;

/// Initial ITD variance of a face-guided component (seconds squared).
pub const FACE_INIT_VARIANCE: f64 = 1e-9;

/// Components with less responsibility mass than this are dropped from the
/// position estimates.
const MIN_POSITION_MASS: f64 = 1e-8;

/// Observations gathered during one time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalObservations {
    pub visual_3d: Vec<ScenePoint>,
    pub auditory: Vec<ItdValue>,
    pub interval_index: usize,
    pub duration: f64,
}

impl IntervalObservations {
    pub fn new(visual_3d: Vec<ScenePoint>, auditory: Vec<ItdValue>, interval_index: usize) -> Self {
        Self {
            visual_3d,
            auditory,
            interval_index,
            duration: DEFAULT_INTERVAL_S,
        }
    }
}

/// One detected speaker: position, spatial spread, mixture mass and
/// speaking state.
#[derive(Debug, Clone, PartialEq)]
pub struct AVObject {
    pub position: ScenePoint,
    /// 3D scatter of the supporting visual features (m²); zero for
    /// face-guided objects whose position comes straight from the detector.
    pub covariance: Matrix3<f64>,
    /// Pooled responsibility mass of the component (visual + auditory).
    pub weight: f64,
    pub speaking: bool,
    /// Auditory responsibility mass backing the speaking flag.
    pub auditory_mass: f64,
}

/// Tunable parameters shared by both pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineKnobs {
    /// Absolute log-likelihood gain below which EM stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest candidate number of AV objects.
    pub n_max: usize,
    /// Covariance determinant below which a cluster is spurious (m⁶).
    pub det_threshold: f64,
    /// Outlier-domain widening as a fraction of the physical ITD range.
    pub domain_margin: f64,
    /// Sound-energy gate for frame processing.
    pub energy_gate: f64,
}

impl Default for PipelineKnobs {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
            n_max: 10,
            det_threshold: 1e-10,
            domain_margin: 0.1,
            energy_gate: DEFAULT_ENERGY_GATE,
        }
    }
}

/// Position and scatter of one mixture component, estimated from the 3D
/// features it explains.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    /// Index of the component in the mixture.
    pub component: usize,
    pub position: ScenePoint,
    pub covariance: Matrix3<f64>,
    /// Visual responsibility mass `ᾱ_n`.
    pub mass: f64,
}

/// Responsibility-weighted 3D means and scatters, one entry per Gaussian
/// component carrying visual mass of at least 1e−8.
pub fn estimate_positions(
    visual_3d: &[ScenePoint],
    alpha: &RespMatrix,
) -> Result<Vec<PositionEstimate>> {
    if alpha.n_rows() != visual_3d.len() {
        return Err(Error::InvalidInput(format!(
            "{} responsibility rows for {} visual features",
            alpha.n_rows(),
            visual_3d.len()
        )));
    }
    if visual_3d.is_empty() {
        return Ok(Vec::new());
    }
    let n_gauss = alpha.n_cols() - 1;
    let mut estimates = Vec::new();
    for comp in 0..n_gauss {
        let mass: f64 = (0..visual_3d.len()).map(|i| alpha.get(i, comp)).sum();
        if mass < MIN_POSITION_MASS {
            continue;
        }
        let mut mean = nalgebra::Vector3::zeros();
        for (i, p) in visual_3d.iter().enumerate() {
            mean += alpha.get(i, comp) * p.to_vector();
        }
        mean /= mass;

        let mut scatter = Matrix3::zeros();
        for (i, p) in visual_3d.iter().enumerate() {
            let d = p.to_vector() - mean;
            scatter += alpha.get(i, comp) * (d * d.transpose());
        }
        scatter /= mass;

        estimates.push(PositionEstimate {
            component: comp,
            position: ScenePoint::from_vector(mean),
            covariance: scatter,
            mass,
        });
    }
    Ok(estimates)
}

/// Speaking threshold `τ_A = K/(N+2)`.
pub fn speaking_threshold(n_components: usize, k: usize) -> f64 {
    k as f64 / (n_components + 2) as f64
}

/// Per-component speaking flags: `ê_n = 1` iff the auditory mass `β̄_n`
/// exceeds `τ_A`.
pub fn estimate_speaking(beta: &RespMatrix, n_components: usize, k: usize) -> Result<Vec<bool>> {
    if beta.n_rows() != k {
        return Err(Error::InvalidInput(format!(
            "{} auditory responsibility rows for k={k}",
            beta.n_rows()
        )));
    }
    let tau = speaking_threshold(n_components, k);
    let masses = if k == 0 {
        vec![0.0; n_components]
    } else {
        beta.column_sums()
    };
    Ok((0..n_components).map(|n| masses[n] > tau).collect())
}

/// Whether a frame carries enough sound energy to be processed (inclusive
/// at the gate value).
pub fn energy_gate(frame_energy: f64) -> bool {
    energy_gate_at(frame_energy, DEFAULT_ENERGY_GATE)
}

pub fn energy_gate_at(frame_energy: f64, threshold: f64) -> bool {
    frame_energy >= threshold
}

/// Fits and scores one candidate model per `N` in `0..=n_max`: warm-start
/// initialization, visual EM, vision-guided fusion EM, then BIC on the full
/// marginal log-likelihood. Candidates are fitted in parallel.
pub fn fit_candidates(
    v_proj: &[ItdValue],
    auditory: &[ItdValue],
    prev: Option<&MixtureParams>,
    domain: &OutlierDomain,
    knobs: &PipelineKnobs,
) -> Result<Vec<ScoredModel>> {
    let n_obs = v_proj.len() + auditory.len();
    if n_obs == 0 {
        return Err(Error::InvalidInput(
            "candidate fitting needs at least one observation".into(),
        ));
    }
    (0..=knobs.n_max)
        .into_par_iter()
        .map(|n| -> Result<ScoredModel> {
            let init = init_from_previous(prev, n, knobs.n_max, domain)?;
            let visual_run = em_visual(v_proj, &init, knobs.tol, knobs.max_iter)?;
            let fused = em_fusion(
                v_proj,
                auditory,
                &visual_run.posteriors,
                &visual_run.params,
                knobs.tol,
                knobs.max_iter,
            )?;
            let loglik = log_likelihood(v_proj, auditory, &fused.params)?;
            let bic = bic_score(loglik, n, n_obs)?;
            Ok(ScoredModel {
                n_components: n,
                params: fused.params,
                posteriors: fused.posteriors,
                bic,
                loglik,
            })
        })
        .collect()
}

/// Motion-guided processing of one interval.
///
/// Projects the 3D features into the auditory space, sweeps `N` from 0 to
/// `n_max` (initializing from the previous interval's model), selects by
/// BIC, merges unimodal component pairs, rejects flat clusters, and emits
/// the surviving AV objects. The returned model seeds the next interval;
/// with no observations at all, the previous model is passed through.
pub fn motion_guided_interval(
    obs: &IntervalObservations,
    cfg: &MicPairConfig,
    prev: Option<&MixtureParams>,
    knobs: &PipelineKnobs,
) -> Result<(Vec<AVObject>, Option<MixtureParams>)> {
    cfg.validate()?;
    if obs.visual_3d.is_empty() && obs.auditory.is_empty() {
        return Ok((Vec::new(), prev.cloned()));
    }

    let domain = OutlierDomain::from_mic_config(cfg, knobs.domain_margin)?;
    let v_proj = cfg.project_points(&obs.visual_3d)?;
    let k = obs.auditory.len();

    let candidates = fit_candidates(&v_proj, &obs.auditory, prev, &domain, knobs)?;
    let selected = select_model(candidates)?;
    let (params, posteriors) = merge_clusters(&selected.params, &selected.posteriors)?;

    let positions = estimate_positions(&obs.visual_3d, &posteriors.visual)?;
    let speaking = estimate_speaking(&posteriors.auditory, params.n_components(), k)?;
    let auditory_masses = if k == 0 {
        vec![0.0; params.n_components() + 1]
    } else {
        posteriors.auditory.column_sums()
    };

    let objects: Vec<AVObject> = positions
        .into_iter()
        .map(|est| AVObject {
            position: est.position,
            covariance: est.covariance,
            weight: est.mass + auditory_masses[est.component],
            speaking: speaking[est.component],
            auditory_mass: auditory_masses[est.component],
        })
        .collect();
    let objects = reject_spurious(objects, knobs.det_threshold)?;

    Ok((objects, Some(params)))
}

/// Face-guided processing of one interval.
///
/// One component per detected face, its mean pinned at the face's
/// projection (the mean of a component tied to a known position is not a
/// free parameter) with initial variance [`FACE_INIT_VARIANCE`]; a single
/// auditory-only fusion EM adapts weights and variances, and the reported
/// positions stay the face positions themselves. Runs in `O(N·K)` per EM
/// iteration.
pub fn face_guided_interval(
    faces: &[ScenePoint],
    auditory: &[ItdValue],
    cfg: &MicPairConfig,
    knobs: &PipelineKnobs,
) -> Result<Vec<AVObject>> {
    cfg.validate()?;
    if faces.is_empty() {
        return Ok(Vec::new());
    }

    let domain = OutlierDomain::from_mic_config(cfg, knobs.domain_margin)?;
    let n = faces.len();
    let means: Vec<f64> = cfg
        .project_points(faces)?
        .into_iter()
        .map(|itd| itd.0.clamp(domain.lo, domain.hi))
        .collect();
    let init = MixtureParams::new(
        vec![1.0 / (n + 1) as f64; n + 1],
        means,
        vec![FACE_INIT_VARIANCE.sqrt(); n],
        domain,
    )?;

    let alpha_fixed = RespMatrix::zeros(0, n + 1);
    let run = em_fusion_anchored(&[], auditory, &alpha_fixed, &init, knobs.tol, knobs.max_iter)?;
    let speaking = estimate_speaking(&run.posteriors.auditory, n, auditory.len())?;
    let masses = if auditory.is_empty() {
        vec![0.0; n + 1]
    } else {
        run.posteriors.auditory.column_sums()
    };

    Ok(faces
        .iter()
        .enumerate()
        .map(|(i, face)| AVObject {
            position: *face,
            covariance: Matrix3::zeros(),
            weight: masses[i],
            speaking: speaking[i],
            auditory_mass: masses[i],
        })
        .collect())
}
