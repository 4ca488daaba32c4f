//! 1D Gaussian-plus-uniform mixture model, its log-likelihood, and the EM
//! machinery for both modalities.
//!
//! Observations (projected visual features and ITD values) live on the same
//! auditory axis. Each of the `N` speakers contributes a Gaussian component;
//! a uniform component over the auditory domain absorbs outliers. Two
//! estimators are provided:
//!
//! * [`em_visual`] — standard EM over one modality;
//! * [`em_fusion`] — the vision-guided variant whose E-step updates only the
//!   auditory responsibilities while the visual ones stay frozen, and whose
//!   M-step pools both modalities.
//!
//! All densities are handled in the log domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ItdValue, MicPairConfig};

/// Variance floor applied in every M-step (seconds squared); prevents
/// collapse onto duplicated observations.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Below this responsibility mass a component is considered empty and its
/// mean/stddev are frozen for the iteration.
pub const EMPTY_COMPONENT_MASS: f64 = 1e-8;

const LOG_2PI: f64 = 1.8378770664093453; // ln(2π)

/// Support of the uniform outlier component over the auditory axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierDomain {
    pub lo: f64,
    pub hi: f64,
}

impl OutlierDomain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(format!(
                "outlier domain must satisfy lo < hi with finite bounds, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Domain derived from the microphone pair: the affine image of the
    /// physically reachable raw ITD range, widened by `margin_frac` of its
    /// width on each side.
    pub fn from_mic_config(cfg: &MicPairConfig, margin_frac: f64) -> Result<Self> {
        cfg.validate()?;
        if !(margin_frac >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "domain margin must be non-negative, got {margin_frac}"
            )));
        }
        let bound = cfg.raw_itd_bound();
        let e1 = cfg.c1 * (-bound) + cfg.c0;
        let e2 = cfg.c1 * bound + cfg.c0;
        let lo = e1.min(e2);
        let hi = e1.max(e2);
        let margin = margin_frac * (hi - lo);
        Self::new(lo - margin, hi + margin)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Uniform density inside the support.
    pub fn density(&self) -> f64 {
        1.0 / self.width()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Parameters of the mixture: `N+1` weights (last one is the outlier
/// component), `N` means and `N` standard deviations, plus the uniform
/// support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
    pub domain: OutlierDomain,
}

impl MixtureParams {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<f64>,
        stddevs: Vec<f64>,
        domain: OutlierDomain,
    ) -> Result<Self> {
        let params = Self {
            weights,
            means,
            stddevs,
            domain,
        };
        params.validate()?;
        Ok(params)
    }

    /// The model with no Gaussian components: everything is outlier.
    pub fn pure_outlier(domain: OutlierDomain) -> Self {
        Self {
            weights: vec![1.0],
            means: Vec::new(),
            stddevs: Vec::new(),
            domain,
        }
    }

    /// Number of Gaussian components `N`.
    pub fn n_components(&self) -> usize {
        self.means.len()
    }

    pub fn outlier_weight(&self) -> f64 {
        *self.weights.last().unwrap_or(&0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::InvalidModel("empty weight vector".into()));
        }
        if self.weights.len() != self.means.len() + 1 || self.means.len() != self.stddevs.len() {
            return Err(Error::InvalidModel(format!(
                "inconsistent sizes: {} weights, {} means, {} stddevs",
                self.weights.len(),
                self.means.len(),
                self.stddevs.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidModel("weights must be non-negative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        if self.stddevs.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidModel(
                "standard deviations must be positive".into(),
            ));
        }
        if self
            .means
            .iter()
            .any(|m| !m.is_finite() || !self.domain.contains(*m))
        {
            return Err(Error::InvalidModel(
                "means must be finite and inside the outlier domain".into(),
            ));
        }
        Ok(())
    }
}

/// Row-stochastic responsibility matrix, one row per observation and one
/// column per mixture component (the last column is the outlier).
#[derive(Debug, Clone, PartialEq)]
pub struct RespMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RespMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        let n_rows = rows.len();
        for r in rows {
            if r.len() != cols {
                return Err(Error::InvalidInput(format!(
                    "row length {} does not match column count {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(&r);
        }
        Ok(Self {
            rows: n_rows,
            cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Per-column responsibility mass.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sums
    }

    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        (0..self.rows).all(|i| {
            let s: f64 = self.row(i).iter().sum();
            self.row(i).iter().all(|v| *v >= -tol) && (s - 1.0).abs() <= tol
        })
    }
}

/// Visual and auditory responsibilities of one fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    /// `M × (N+1)`, one row per projected visual feature.
    pub visual: RespMatrix,
    /// `K × (N+1)`, one row per auditory observation.
    pub auditory: RespMatrix,
}

/// Result of an EM run.
#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub params: MixtureParams,
    pub posteriors: RespMatrix,
    /// Objective value before each update and after the last one.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// Result of a vision-guided fusion EM run.
#[derive(Debug, Clone)]
pub struct FusionOutcome {
    pub params: MixtureParams,
    pub posteriors: Posteriors,
    /// Constrained objective (visual expected complete-data term with the
    /// frozen responsibilities, plus the auditory marginal log-likelihood).
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// Precomputed per-component log-density coefficients.
struct LogDensity {
    /// `ln π_n − ln σ_n − ½ ln 2π` per Gaussian.
    gauss_coeff: Vec<f64>,
    /// `1/(2σ_n²)` per Gaussian.
    inv_two_var: Vec<f64>,
    means: Vec<f64>,
    /// `ln π_{N+1} − ln(hi−lo)`, valid inside the domain only.
    outlier: f64,
    lo: f64,
    hi: f64,
}

impl LogDensity {
    fn new(params: &MixtureParams) -> Self {
        let n = params.n_components();
        let mut gauss_coeff = Vec::with_capacity(n);
        let mut inv_two_var = Vec::with_capacity(n);
        for i in 0..n {
            let w = params.weights[i];
            let s = params.stddevs[i];
            let coeff = if w > 0.0 {
                w.ln() - s.ln() - 0.5 * LOG_2PI
            } else {
                f64::NEG_INFINITY
            };
            gauss_coeff.push(coeff);
            inv_two_var.push(1.0 / (2.0 * s * s));
        }
        let w_out = params.outlier_weight();
        let outlier = if w_out > 0.0 {
            w_out.ln() - params.domain.width().ln()
        } else {
            f64::NEG_INFINITY
        };
        Self {
            gauss_coeff,
            inv_two_var,
            means: params.means.clone(),
            outlier,
            lo: params.domain.lo,
            hi: params.domain.hi,
        }
    }

    /// Fills `out` (length N+1) with `ln(π_n p(x|n))` per component.
    fn log_terms(&self, x: f64, out: &mut [f64]) {
        let n = self.means.len();
        for i in 0..n {
            let d = x - self.means[i];
            out[i] = self.gauss_coeff[i] - d * d * self.inv_two_var[i];
        }
        out[n] = if self.lo <= x && x <= self.hi {
            self.outlier
        } else {
            f64::NEG_INFINITY
        };
    }
}

/// Neumaier-compensated summation; keeps long log-likelihood sums accurate
/// enough for the −1e−9 monotonicity tolerance.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

fn to_f64(values: &[ItdValue]) -> Vec<f64> {
    values.iter().map(|v| v.0).collect()
}

/// `logsumexp` over one row of log terms; `scratch` receives `exp(t − max)`.
fn log_sum_exp(terms: &[f64], scratch: &mut [f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for (s, t) in scratch.iter_mut().zip(terms) {
        *s = (t - max).exp();
        sum += *s;
    }
    max + sum.ln()
}

/// E-step over one modality plus the marginal log-likelihood of the same
/// observations under `params`.
fn e_step_with_ll(values: &[f64], params: &MixtureParams) -> (RespMatrix, f64) {
    let n_cols = params.n_components() + 1;
    let density = LogDensity::new(params);
    let mut resp = RespMatrix::zeros(values.len(), n_cols);
    let mut terms = vec![0.0; n_cols];
    let mut scratch = vec![0.0; n_cols];
    let mut ll = CompensatedSum::default();

    for (i, &x) in values.iter().enumerate() {
        density.log_terms(x, &mut terms);
        let log_p = log_sum_exp(&terms, &mut scratch);
        ll.add(log_p);
        let row = resp.row_mut(i);
        if log_p == f64::NEG_INFINITY {
            // Zero total density: the outlier component absorbs the point.
            row.fill(0.0);
            row[n_cols - 1] = 1.0;
        } else {
            let total: f64 = scratch.iter().sum();
            for (r, s) in row.iter_mut().zip(&scratch) {
                *r = s / total;
            }
        }
    }
    (resp, ll.value())
}

/// Marginal log-likelihood of both observation sets under the mixture.
///
/// Observations outside the uniform support receive no outlier density;
/// a point with zero total density contributes `−∞`.
pub fn log_likelihood(
    v_proj: &[ItdValue],
    auditory: &[ItdValue],
    params: &MixtureParams,
) -> Result<f64> {
    params.validate()?;
    let density = LogDensity::new(params);
    let n_cols = params.n_components() + 1;
    let mut terms = vec![0.0; n_cols];
    let mut scratch = vec![0.0; n_cols];
    let mut ll = CompensatedSum::default();
    for x in v_proj.iter().chain(auditory) {
        density.log_terms(x.0, &mut terms);
        ll.add(log_sum_exp(&terms, &mut scratch));
    }
    Ok(ll.value())
}

/// E-step for the visual modality: responsibilities
/// `α_{mn} = π_n p(ṽ_m|n) / Σ_i π_i p(ṽ_m|i)`.
pub fn e_step_visual(v_proj: &[ItdValue], params: &MixtureParams) -> Result<RespMatrix> {
    params.validate()?;
    Ok(e_step_with_ll(&to_f64(v_proj), params).0)
}

fn check_resp(resp: &RespMatrix, n_obs: usize, n_cols: usize, what: &str) -> Result<()> {
    if resp.n_rows() != n_obs {
        return Err(Error::InvalidInput(format!(
            "{what} responsibilities have {} rows for {} observations",
            resp.n_rows(),
            n_obs
        )));
    }
    if n_obs > 0 && resp.n_cols() != n_cols {
        return Err(Error::InvalidInput(format!(
            "{what} responsibilities have {} columns, expected {n_cols}",
            resp.n_cols()
        )));
    }
    if !resp.is_row_stochastic(1e-6) {
        return Err(Error::InvalidInput(format!(
            "{what} responsibilities are not row-stochastic"
        )));
    }
    Ok(())
}

/// Pooled M-step shared by both estimators. `values_a`/`beta` may be empty.
/// With `fix_means`, the Gaussian means stay at their previous values and
/// only weights and variances are re-estimated.
fn m_step_pooled(
    values_v: &[f64],
    values_a: &[f64],
    alpha: &RespMatrix,
    beta: &RespMatrix,
    prev: &MixtureParams,
    fix_means: bool,
) -> Result<MixtureParams> {
    let n = prev.n_components();
    let total = (values_v.len() + values_a.len()) as f64;
    if total == 0.0 {
        return Err(Error::InvalidInput(
            "M-step needs at least one observation".into(),
        ));
    }

    let mut gamma = vec![0.0; n + 1];
    for (g, a) in gamma.iter_mut().zip(alpha.column_sums()) {
        *g += a;
    }
    for (g, b) in gamma.iter_mut().zip(beta.column_sums()) {
        *g += b;
    }

    let weights: Vec<f64> = gamma.iter().map(|g| g / total).collect();
    let mut means = Vec::with_capacity(n);
    let mut stddevs = Vec::with_capacity(n);

    for comp in 0..n {
        if gamma[comp] < EMPTY_COMPONENT_MASS {
            // Empty component: freeze its shape for this iteration.
            means.push(prev.means[comp]);
            stddevs.push(prev.stddevs[comp]);
            continue;
        }
        let mean = if fix_means {
            prev.means[comp]
        } else {
            let mut num = 0.0;
            for (i, &x) in values_v.iter().enumerate() {
                num += alpha.get(i, comp) * x;
            }
            for (k, &x) in values_a.iter().enumerate() {
                num += beta.get(k, comp) * x;
            }
            (num / gamma[comp]).clamp(prev.domain.lo, prev.domain.hi)
        };

        let mut ss = 0.0;
        for (i, &x) in values_v.iter().enumerate() {
            let d = x - mean;
            ss += alpha.get(i, comp) * d * d;
        }
        for (k, &x) in values_a.iter().enumerate() {
            let d = x - mean;
            ss += beta.get(k, comp) * d * d;
        }
        let var = (ss / gamma[comp]).max(VARIANCE_FLOOR);
        means.push(mean);
        stddevs.push(var.sqrt());
    }

    MixtureParams::new(weights, means, stddevs, prev.domain)
}

/// M-step over the visual modality alone: `π_n = ᾱ_n/M`, weighted moments
/// for the Gaussian parameters. Components with no mass keep their previous
/// shape; variances are floored at [`VARIANCE_FLOOR`].
pub fn m_step_visual(
    v_proj: &[ItdValue],
    alpha: &RespMatrix,
    prev: &MixtureParams,
) -> Result<MixtureParams> {
    prev.validate()?;
    check_resp(alpha, v_proj.len(), prev.n_components() + 1, "visual")?;
    let empty = RespMatrix::zeros(0, prev.n_components() + 1);
    m_step_pooled(&to_f64(v_proj), &[], alpha, &empty, prev, false)
}

/// Combined-modality M-step of the fusion algorithm: `π_n = γ_n/(M+K)` with
/// `γ_n = ᾱ_n + β̄_n`, and pooled means/variances.
pub fn m_step_fusion(
    v_proj: &[ItdValue],
    auditory: &[ItdValue],
    alpha: &RespMatrix,
    beta: &RespMatrix,
    prev: &MixtureParams,
) -> Result<MixtureParams> {
    prev.validate()?;
    check_resp(alpha, v_proj.len(), prev.n_components() + 1, "visual")?;
    check_resp(beta, auditory.len(), prev.n_components() + 1, "auditory")?;
    m_step_pooled(&to_f64(v_proj), &to_f64(auditory), alpha, beta, prev, false)
}

/// Standard EM over the projected visual features.
///
/// Stops when the marginal log-likelihood gain drops below `tol` (absolute)
/// or after `max_iter` updates. The returned trace holds the log-likelihood
/// of each visited parameter set; it is non-decreasing.
pub fn em_visual(
    v_proj: &[ItdValue],
    init: &MixtureParams,
    tol: f64,
    max_iter: usize,
) -> Result<EmOutcome> {
    init.validate()?;
    let values = to_f64(v_proj);
    if values.is_empty() {
        return Ok(EmOutcome {
            params: init.clone(),
            posteriors: RespMatrix::zeros(0, init.n_components() + 1),
            objective_trace: vec![0.0],
            iterations: 0,
        });
    }

    let mut params = init.clone();
    let (mut alpha, mut ll) = e_step_with_ll(&values, &params);
    let mut trace = vec![ll];
    let mut iterations = 0;

    for _ in 0..max_iter {
        let next = m_step_pooled(
            &values,
            &[],
            &alpha,
            &RespMatrix::zeros(0, params.n_components() + 1),
            &params,
            false,
        )?;
        let (next_alpha, next_ll) = e_step_with_ll(&values, &next);
        params = next;
        alpha = next_alpha;
        iterations += 1;
        trace.push(next_ll);
        let gain = next_ll - ll;
        ll = next_ll;
        if gain < tol {
            break;
        }
    }

    Ok(EmOutcome {
        params,
        posteriors: alpha,
        objective_trace: trace,
        iterations,
    })
}

/// Constrained objective of the fusion estimator: the expected
/// complete-data log-likelihood of the visual modality under the frozen
/// responsibilities, plus the marginal log-likelihood of the auditory
/// observations.
pub fn fusion_objective(
    v_proj: &[ItdValue],
    auditory: &[ItdValue],
    alpha_fixed: &RespMatrix,
    params: &MixtureParams,
) -> Result<f64> {
    params.validate()?;
    check_resp(alpha_fixed, v_proj.len(), params.n_components() + 1, "visual")?;
    let density = LogDensity::new(params);
    let n_cols = params.n_components() + 1;
    let mut terms = vec![0.0; n_cols];
    let mut scratch = vec![0.0; n_cols];
    let mut obj = CompensatedSum::default();

    for (i, x) in v_proj.iter().enumerate() {
        density.log_terms(x.0, &mut terms);
        for (a, t) in alpha_fixed.row(i).iter().zip(&terms) {
            if *a > 0.0 {
                obj.add(a * t);
            }
        }
    }
    for x in auditory {
        density.log_terms(x.0, &mut terms);
        obj.add(log_sum_exp(&terms, &mut scratch));
    }
    Ok(obj.value())
}

/// Vision-guided EM fusion.
///
/// The visual responsibilities `alpha_fixed` are never updated; each E-step
/// recomputes only the auditory responsibilities, and the M-step pools both
/// modalities. The recorded objective (see [`fusion_objective`]) is
/// non-decreasing across iterations.
pub fn em_fusion(
    v_proj: &[ItdValue],
    auditory: &[ItdValue],
    alpha_fixed: &RespMatrix,
    init: &MixtureParams,
    tol: f64,
    max_iter: usize,
) -> Result<FusionOutcome> {
    em_fusion_impl(v_proj, auditory, alpha_fixed, init, tol, max_iter, false)
}

/// Fusion EM with the Gaussian means anchored at their initial values.
///
/// Used when the means are determined by known 3D positions (detected
/// faces): a mean tied to `Ā(S_n)` is not a free parameter, and letting it
/// drift would collapse distant components onto whichever cluster is
/// active. Weights and variances still adapt; the objective remains
/// non-decreasing (coordinate ascent over the remaining parameters).
pub fn em_fusion_anchored(
    v_proj: &[ItdValue],
    auditory: &[ItdValue],
    alpha_fixed: &RespMatrix,
    init: &MixtureParams,
    tol: f64,
    max_iter: usize,
) -> Result<FusionOutcome> {
    em_fusion_impl(v_proj, auditory, alpha_fixed, init, tol, max_iter, true)
}

fn em_fusion_impl(
    v_proj: &[ItdValue],
    auditory: &[ItdValue],
    alpha_fixed: &RespMatrix,
    init: &MixtureParams,
    tol: f64,
    max_iter: usize,
    fix_means: bool,
) -> Result<FusionOutcome> {
    init.validate()?;
    let n_cols = init.n_components() + 1;
    check_resp(alpha_fixed, v_proj.len(), n_cols, "visual")?;
    let values_v = to_f64(v_proj);
    let values_a = to_f64(auditory);

    if values_v.is_empty() && values_a.is_empty() {
        return Ok(FusionOutcome {
            params: init.clone(),
            posteriors: Posteriors {
                visual: alpha_fixed.clone(),
                auditory: RespMatrix::zeros(0, n_cols),
            },
            objective_trace: vec![0.0],
            iterations: 0,
        });
    }

    let mut params = init.clone();
    let mut beta = e_step_with_ll(&values_a, &params).0;
    let mut obj = fusion_objective(v_proj, auditory, alpha_fixed, &params)?;
    let mut trace = vec![obj];
    let mut iterations = 0;

    for _ in 0..max_iter {
        let next = m_step_pooled(&values_v, &values_a, alpha_fixed, &beta, &params, fix_means)?;
        let next_beta = e_step_with_ll(&values_a, &next).0;
        let next_obj = fusion_objective(v_proj, auditory, alpha_fixed, &next)?;
        params = next;
        beta = next_beta;
        iterations += 1;
        trace.push(next_obj);
        let gain = next_obj - obj;
        obj = next_obj;
        if gain < tol {
            break;
        }
    }

    Ok(FusionOutcome {
        params,
        posteriors: Posteriors {
            visual: alpha_fixed.clone(),
            auditory: beta,
        },
        objective_trace: trace,
        iterations,
    })
}
