//! Model scoring and structural post-processing: BIC selection of the number
//! of speakers, warm-start initialization from the previous interval,
//! merging of overlapping components and rejection of spurious clusters.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::mixture::{MixtureParams, OutlierDomain, Posteriors, RespMatrix, VARIANCE_FLOOR};
use crate::pipeline::AVObject;

/// A candidate mixture fitted for one value of `N`, with its scores.
#[derive(Debug, Clone)]
pub struct ScoredModel {
    pub n_components: usize,
    pub params: MixtureParams,
    pub posteriors: Posteriors,
    pub bic: f64,
    pub loglik: f64,
}

impl ScoredModel {
    /// Number of observations the model was scored on.
    pub fn n_obs(&self) -> usize {
        self.posteriors.visual.n_rows() + self.posteriors.auditory.n_rows()
    }

    /// Whether the stored BIC matches `loglik − 3N·log(M+K)/2`.
    pub fn bic_consistent(&self, tol: f64) -> bool {
        match bic_score(self.loglik, self.n_components, self.n_obs()) {
            Ok(expected) => (expected - self.bic).abs() <= tol,
            Err(_) => false,
        }
    }
}

/// BIC score `loglik − (3N/2)·log(n_obs)`; each Gaussian component
/// contributes three free parameters.
pub fn bic_score(loglik: f64, n_components: usize, n_obs: usize) -> Result<f64> {
    if n_obs == 0 {
        return Err(Error::InvalidInput(
            "BIC needs at least one observation".into(),
        ));
    }
    let d = 3.0 * n_components as f64;
    Ok(loglik - 0.5 * d * (n_obs as f64).ln())
}

/// Picks the candidate with the highest BIC; ties go to the smaller `N`.
pub fn select_model(models: Vec<ScoredModel>) -> Result<ScoredModel> {
    if models.is_empty() {
        return Err(Error::InvalidInput("no candidate models to select".into()));
    }
    let mut best: Option<ScoredModel> = None;
    for m in models {
        let score = if m.bic.is_nan() { f64::NEG_INFINITY } else { m.bic };
        let better = match &best {
            None => true,
            Some(b) => {
                let best_score = if b.bic.is_nan() { f64::NEG_INFINITY } else { b.bic };
                score > best_score || (score == best_score && m.n_components < b.n_components)
            }
        };
        if better {
            best = Some(m);
        }
    }
    Ok(best.expect("non-empty"))
}

/// Davies-Bouldin index of every Gaussian component:
/// `DW_i = max_{j≠i} (σ_i+σ_j)/|μ_i−μ_j|`.
///
/// A lone component has no partner and gets `+∞` so it is always the one
/// chosen for splitting.
pub fn davies_bouldin_indices(params: &MixtureParams) -> Vec<f64> {
    let n = params.n_components();
    (0..n)
        .map(|i| {
            let mut worst = f64::NEG_INFINITY;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let sep = (params.means[i] - params.means[j]).abs();
                let ratio = if sep == 0.0 {
                    f64::INFINITY
                } else {
                    (params.stddevs[i] + params.stddevs[j]) / sep
                };
                worst = worst.max(ratio);
            }
            if worst == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                worst
            }
        })
        .collect()
}

fn uniform_init(target_n: usize, domain: &OutlierDomain) -> MixtureParams {
    if target_n == 0 {
        return MixtureParams::pure_outlier(*domain);
    }
    let w = 1.0 / (target_n + 1) as f64;
    let width = domain.width();
    let means: Vec<f64> = (0..target_n)
        .map(|i| domain.lo + (i as f64 + 0.5) * width / target_n as f64)
        .collect();
    let sigma = width / (4.0 * target_n as f64);
    MixtureParams {
        weights: vec![w; target_n + 1],
        means,
        stddevs: vec![sigma; target_n],
        domain: *domain,
    }
}

/// Initial model with `target_n` components for the current interval.
///
/// With a previous model available, either the `target_n` highest-weight
/// clusters are kept (weights renormalized, outlier kept proportionally) or
/// the cluster with the highest Davies-Bouldin index is split repeatedly:
/// two children at `μ±σ`, each with half the weight. Without one, components
/// are equally weighted and equally spaced over the outlier domain.
pub fn init_from_previous(
    prev: Option<&MixtureParams>,
    target_n: usize,
    n_max: usize,
    domain: &OutlierDomain,
) -> Result<MixtureParams> {
    if target_n > n_max {
        return Err(Error::InvalidInput(format!(
            "target_n {target_n} exceeds n_max {n_max}"
        )));
    }
    let prev = match prev {
        Some(p) if p.n_components() > 0 || target_n == 0 => p,
        _ => return Ok(uniform_init(target_n, domain)),
    };
    prev.validate()?;
    let n_prev = prev.n_components();

    if target_n <= n_prev {
        // Keep the highest-weight clusters, preserving their original order.
        let mut order: Vec<usize> = (0..n_prev).collect();
        order.sort_by(|a, b| {
            prev.weights[*b]
                .partial_cmp(&prev.weights[*a])
                .unwrap()
                .then(a.cmp(b))
        });
        let mut keep: Vec<usize> = order.into_iter().take(target_n).collect();
        keep.sort_unstable();

        let mut weights: Vec<f64> = keep.iter().map(|i| prev.weights[*i]).collect();
        weights.push(prev.outlier_weight());
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Ok(uniform_init(target_n, &prev.domain));
        }
        for w in &mut weights {
            *w /= total;
        }
        MixtureParams::new(
            weights,
            keep.iter().map(|i| prev.means[*i]).collect(),
            keep.iter().map(|i| prev.stddevs[*i]).collect(),
            prev.domain,
        )
    } else {
        let mut params = prev.clone();
        while params.n_components() < target_n {
            // The two members of the most-overlapping pair share the maximal
            // index; ties go to the wider component, then the lower index.
            let dw = davies_bouldin_indices(&params);
            let split = (0..params.n_components())
                .max_by(|&a, &b| {
                    dw[a]
                        .partial_cmp(&dw[b])
                        .unwrap()
                        .then(params.stddevs[a].partial_cmp(&params.stddevs[b]).unwrap())
                        .then(b.cmp(&a))
                })
                .expect("at least one component");

            let w = params.weights[split];
            let mu = params.means[split];
            let sigma = params.stddevs[split];
            let lo = params.domain.lo;
            let hi = params.domain.hi;

            params.weights[split] = 0.5 * w;
            params.weights.insert(split + 1, 0.5 * w);
            params.means[split] = (mu - sigma).clamp(lo, hi);
            params.means.insert(split + 1, (mu + sigma).clamp(lo, hi));
            params.stddevs.insert(split + 1, sigma);
        }
        params.validate()?;
        Ok(params)
    }
}

/// Whether the two-component sub-mixture `(w_a, μ_a, σ_a) + (w_b, μ_b, σ_b)`
/// has a single mode. Checked by a dense scan of the density between the two
/// means; all critical points of a two-Gaussian mixture lie there.
fn pair_is_unimodal(w_a: f64, mu_a: f64, sigma_a: f64, w_b: f64, mu_b: f64, sigma_b: f64) -> bool {
    let lo = mu_a.min(mu_b);
    let hi = mu_a.max(mu_b);
    if hi - lo <= f64::EPSILON * (1.0 + hi.abs()) {
        return true;
    }
    let total = w_a + w_b;
    let (wa, wb) = if total > 0.0 {
        (w_a / total, w_b / total)
    } else {
        (0.5, 0.5)
    };

    const SCAN_POINTS: usize = 1000;
    let density = |x: f64| {
        let da = (-((x - mu_a) / sigma_a).powi(2) / 2.0).exp() / sigma_a;
        let db = (-((x - mu_b) / sigma_b).powi(2) / 2.0).exp() / sigma_b;
        wa * da + wb * db
    };

    let mut values = Vec::with_capacity(SCAN_POINTS);
    for i in 0..SCAN_POINTS {
        let x = lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64;
        values.push(density(x));
    }

    // Single peak: non-decreasing up to the global maximum, non-increasing
    // after it (up to floating-point noise).
    let peak = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let slack = values[peak] * 1e-12;
    values[..=peak].windows(2).all(|p| p[1] >= p[0] - slack)
        && values[peak..].windows(2).all(|p| p[1] <= p[0] + slack)
}

fn merge_resp_columns(resp: &RespMatrix, keep: usize, drop: usize) -> RespMatrix {
    let rows = resp.n_rows();
    let cols = resp.n_cols();
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let row = resp.row(i);
        let mut new_row = Vec::with_capacity(cols - 1);
        for (j, v) in row.iter().enumerate() {
            if j == drop {
                continue;
            }
            if j == keep {
                new_row.push(v + row[drop]);
            } else {
                new_row.push(*v);
            }
        }
        out.push(new_row);
    }
    RespMatrix::from_rows(out, cols - 1).expect("consistent row lengths")
}

/// Merges every pair of Gaussian components whose sub-mixture is unimodal
/// into a single moment-matched component, repeating until no pair merges.
/// Posterior columns of merged pairs are summed.
pub fn merge_clusters(
    params: &MixtureParams,
    posteriors: &Posteriors,
) -> Result<(MixtureParams, Posteriors)> {
    params.validate()?;
    let mut params = params.clone();
    let mut visual = posteriors.visual.clone();
    let mut auditory = posteriors.auditory.clone();

    loop {
        let n = params.n_components();
        // Most-overlapping mergeable pair first.
        let mut candidate: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                if !pair_is_unimodal(
                    params.weights[i],
                    params.means[i],
                    params.stddevs[i],
                    params.weights[j],
                    params.means[j],
                    params.stddevs[j],
                ) {
                    continue;
                }
                let ratio = (params.means[i] - params.means[j]).abs()
                    / (params.stddevs[i] + params.stddevs[j]);
                if candidate.is_none() || ratio < candidate.unwrap().2 {
                    candidate = Some((i, j, ratio));
                }
            }
        }
        let Some((i, j, _)) = candidate else {
            break;
        };

        let (wi, wj) = (params.weights[i], params.weights[j]);
        let (mi, mj) = (params.means[i], params.means[j]);
        let (si, sj) = (params.stddevs[i], params.stddevs[j]);
        let w = wi + wj;
        let (mean, var) = if w > 0.0 {
            let mean = (wi * mi + wj * mj) / w;
            // Pooled second moment about the new mean.
            let second = (wi * (si * si + mi * mi) + wj * (sj * sj + mj * mj)) / w;
            (mean, second - mean * mean)
        } else {
            let mean = 0.5 * (mi + mj);
            (mean, si.max(sj).powi(2))
        };

        params.weights[i] = w;
        params.means[i] = mean;
        params.stddevs[i] = var.max(VARIANCE_FLOOR).sqrt();
        params.weights.remove(j);
        params.means.remove(j);
        params.stddevs.remove(j);

        visual = merge_resp_columns(&visual, i, j);
        auditory = merge_resp_columns(&auditory, i, j);
    }

    params.validate()?;
    Ok((params, Posteriors { visual, auditory }))
}

fn check_covariance(cov: &Matrix3<f64>) -> Result<()> {
    let scale = cov.amax().max(1e-30);
    for r in 0..3 {
        for c in (r + 1)..3 {
            if (cov[(r, c)] - cov[(c, r)]).abs() > 1e-9 * scale {
                return Err(Error::InvalidInput(
                    "covariance matrix is not symmetric".into(),
                ));
            }
        }
    }
    let eigen = cov.symmetric_eigenvalues();
    if eigen.iter().any(|e| *e < -1e-9 * scale) {
        return Err(Error::InvalidInput(
            "covariance matrix is not positive semidefinite".into(),
        ));
    }
    Ok(())
}

/// Drops detected objects whose 3D covariance determinant falls below
/// `det_threshold`; such clusters hug a level surface of the ITD mapping and
/// do not correspond to a physical speaker.
pub fn reject_spurious(objects: Vec<AVObject>, det_threshold: f64) -> Result<Vec<AVObject>> {
    for obj in &objects {
        check_covariance(&obj.covariance)?;
    }
    Ok(objects
        .into_iter()
        .filter(|o| o.covariance.determinant() >= det_threshold)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ScenePoint;
    use approx::assert_relative_eq;

    fn domain() -> OutlierDomain {
        OutlierDomain::new(-1.0, 1.0).unwrap()
    }

    fn empty_posteriors(n_cols: usize) -> Posteriors {
        Posteriors {
            visual: RespMatrix::zeros(0, n_cols),
            auditory: RespMatrix::zeros(0, n_cols),
        }
    }

    #[test]
    fn bic_zero_penalty_for_empty_model() {
        assert_eq!(bic_score(0.0, 0, 17).unwrap(), 0.0);
    }

    #[test]
    fn bic_direct_arithmetic() {
        let bic = bic_score(-10.0, 2, 100).unwrap();
        assert_relative_eq!(bic, -10.0 - 3.0 * 100.0f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(bic, -23.8155, epsilon = 1e-4);
    }

    #[test]
    fn bic_penalty_monotone_in_n() {
        let b1 = bic_score(-5.0, 1, 50).unwrap();
        let b2 = bic_score(-5.0, 2, 50).unwrap();
        assert!(b1 > b2);
        assert!(bic_score(0.0, 0, 0).is_err());
    }

    fn scored(n: usize, bic: f64) -> ScoredModel {
        ScoredModel {
            n_components: n,
            params: MixtureParams::pure_outlier(domain()),
            posteriors: empty_posteriors(n + 1),
            bic,
            loglik: bic,
        }
    }

    #[test]
    fn select_model_argmax_and_ties() {
        let best = select_model(vec![scored(1, -5.0), scored(2, -3.0), scored(3, -9.0)]).unwrap();
        assert_eq!(best.n_components, 2);

        let single = select_model(vec![scored(4, -1.0)]).unwrap();
        assert_eq!(single.n_components, 4);

        let tie = select_model(vec![scored(3, -2.0), scored(1, -2.0)]).unwrap();
        assert_eq!(tie.n_components, 1);

        assert!(select_model(vec![]).is_err());
    }

    #[test]
    fn init_keeps_highest_weight_clusters() {
        let prev = MixtureParams::new(
            vec![0.5, 0.1, 0.3, 0.1],
            vec![-0.5, 0.0, 0.5],
            vec![0.01, 0.01, 0.01],
            domain(),
        )
        .unwrap();
        let init = init_from_previous(Some(&prev), 2, 10, &domain()).unwrap();
        assert_eq!(init.n_components(), 2);
        assert_eq!(init.means, vec![-0.5, 0.5]);
        // Renormalized over {0.5, 0.3, 0.1}: ratios preserved.
        assert_relative_eq!(init.weights[0], 0.5 / 0.9, epsilon = 1e-12);
        assert_relative_eq!(init.weights[1], 0.3 / 0.9, epsilon = 1e-12);
        assert_relative_eq!(init.weights[2], 0.1 / 0.9, epsilon = 1e-12);
    }

    #[test]
    fn init_splits_single_cluster() {
        let prev = MixtureParams::new(vec![0.8, 0.2], vec![0.0], vec![1e-4], domain()).unwrap();
        let init = init_from_previous(Some(&prev), 2, 10, &domain()).unwrap();
        assert_eq!(init.n_components(), 2);
        assert_relative_eq!(init.means[0], -1e-4, epsilon = 1e-18);
        assert_relative_eq!(init.means[1], 1e-4, epsilon = 1e-18);
        assert_relative_eq!(init.weights[0], 0.4, epsilon = 1e-12);
        assert_relative_eq!(init.weights[1], 0.4, epsilon = 1e-12);
        assert_relative_eq!(init.weights[2], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn init_without_previous_model() {
        let init = init_from_previous(None, 1, 10, &domain()).unwrap();
        assert_eq!(init.n_components(), 1);
        assert_relative_eq!(init.means[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(init.weights[0], 0.5, epsilon = 1e-12);

        let three = init_from_previous(None, 3, 10, &domain()).unwrap();
        assert_eq!(three.n_components(), 3);
        assert!(three.validate().is_ok());

        assert!(init_from_previous(None, 11, 10, &domain()).is_err());
    }

    #[test]
    fn init_always_valid() {
        let prev = MixtureParams::new(
            vec![0.6, 0.3, 0.1],
            vec![-0.99, 0.99],
            vec![0.05, 0.05],
            domain(),
        )
        .unwrap();
        for target in 0..=10usize {
            let init = init_from_previous(Some(&prev), target, 10, &domain()).unwrap();
            assert!(init.validate().is_ok(), "target {target}");
            assert_eq!(init.n_components(), target);
        }
    }

    #[test]
    fn split_picks_highest_davies_bouldin() {
        // Two tight separated clusters plus one wide cluster overlapping the
        // second. The overlapping pair (1,2) shares the dominating DW value
        // and the wider member is the one split.
        let prev = MixtureParams::new(
            vec![0.3, 0.3, 0.3, 0.1],
            vec![-0.8, 0.3, 0.4],
            vec![0.01, 0.01, 0.2],
            domain(),
        )
        .unwrap();
        let dw = davies_bouldin_indices(&prev);
        assert!(dw[1] > dw[0] && dw[2] > dw[0]);
        assert_relative_eq!(dw[1], dw[2], epsilon = 1e-12);
        let init = init_from_previous(Some(&prev), 4, 10, &domain()).unwrap();
        // Component 2 was split into means 0.4 ± 0.2.
        assert_relative_eq!(init.means[2], 0.2, epsilon = 1e-12);
        assert_relative_eq!(init.means[3], 0.6, epsilon = 1e-12);
    }

    #[test]
    fn merge_identical_components() {
        let params = MixtureParams::new(
            vec![0.3, 0.3, 0.4],
            vec![0.2, 0.2],
            vec![0.05, 0.05],
            domain(),
        )
        .unwrap();
        let post = Posteriors {
            visual: RespMatrix::from_rows(vec![vec![0.25, 0.25, 0.5]], 3).unwrap(),
            auditory: RespMatrix::zeros(0, 3),
        };
        let (merged, post) = merge_clusters(&params, &post).unwrap();
        assert_eq!(merged.n_components(), 1);
        assert_relative_eq!(merged.weights[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(merged.means[0], 0.2, epsilon = 1e-12);
        assert_relative_eq!(merged.stddevs[0], 0.05, epsilon = 1e-12);
        assert_relative_eq!(post.visual.get(0, 0), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn merge_leaves_separated_components() {
        let params = MixtureParams::new(
            vec![0.4, 0.4, 0.2],
            vec![-0.5, 0.5],
            vec![0.05, 0.05],
            domain(),
        )
        .unwrap();
        // Separation 1.0 > 4·(σ1+σ2) = 0.4.
        let (merged, _) = merge_clusters(&params, &empty_posteriors(3)).unwrap();
        assert_eq!(merged.n_components(), 2);
    }

    #[test]
    fn merge_overlapping_matches_moment_oracle() {
        let (w1, m1, s1) = (0.3, 0.00, 0.04);
        let (w2, m2, s2) = (0.3, 0.05, 0.06);
        // Separation 0.05 = 0.5·(σ1+σ2): unimodal, must merge.
        let params = MixtureParams::new(
            vec![w1, w2, 0.4],
            vec![m1, m2],
            vec![s1, s2],
            domain(),
        )
        .unwrap();
        let (merged, _) = merge_clusters(&params, &empty_posteriors(3)).unwrap();
        assert_eq!(merged.n_components(), 1);

        let w = w1 + w2;
        let mean = (w1 * m1 + w2 * m2) / w;
        let var = (w1 * (s1 * s1 + m1 * m1) + w2 * (s2 * s2 + m2 * m2)) / w - mean * mean;
        assert_relative_eq!(merged.weights[0], w, epsilon = 1e-12);
        assert_relative_eq!(merged.means[0], mean, epsilon = 1e-12);
        assert_relative_eq!(merged.stddevs[0], var.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn merge_conserves_gaussian_mass() {
        let params = MixtureParams::new(
            vec![0.2, 0.25, 0.15, 0.4],
            vec![-0.1, 0.0, 0.1],
            vec![0.2, 0.2, 0.2],
            domain(),
        )
        .unwrap();
        let (merged, _) = merge_clusters(&params, &empty_posteriors(4)).unwrap();
        assert!(merged.n_components() <= 3);
        let mass: f64 = merged.weights[..merged.n_components()].iter().sum();
        assert_relative_eq!(mass, 0.6, epsilon = 1e-12);
        assert_relative_eq!(merged.outlier_weight(), 0.4, epsilon = 1e-12);
    }

    fn object_with_cov(cov: Matrix3<f64>) -> AVObject {
        AVObject {
            position: ScenePoint::new(0.0, 0.0, 2.0),
            covariance: cov,
            weight: 1.0,
            speaking: false,
            auditory_mass: 0.0,
        }
    }

    #[test]
    fn reject_keeps_isotropic_cluster() {
        // 5 cm per axis: det = (0.0025)^3 ≈ 1.56e-8.
        let cov = Matrix3::from_diagonal_element(0.0025);
        let kept = reject_spurious(vec![object_with_cov(cov)], 1e-10).unwrap();
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn reject_drops_flat_cluster() {
        // 1 mm thickness along one axis: det = 2.5e-3 · 2.5e-3 · 1e-6.
        let cov = Matrix3::from_diagonal(&nalgebra::Vector3::new(2.5e-3, 2.5e-3, 1e-6));
        let kept = reject_spurious(vec![object_with_cov(cov)], 1e-10).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn reject_empty_and_idempotent() {
        assert!(reject_spurious(vec![], 1e-10).unwrap().is_empty());
        let cov = Matrix3::from_diagonal_element(0.0025);
        let once = reject_spurious(vec![object_with_cov(cov)], 1e-10).unwrap();
        let twice = reject_spurious(once.clone(), 1e-10).unwrap();
        assert_eq!(once.len(), twice.len());
    }

    #[test]
    fn reject_validates_covariance() {
        let mut cov = Matrix3::from_diagonal_element(0.01);
        cov[(0, 1)] = 0.5; // asymmetric
        assert!(reject_spurious(vec![object_with_cov(cov)], 1e-10).is_err());

        let negative = Matrix3::from_diagonal(&nalgebra::Vector3::new(0.01, -0.01, 0.01));
        assert!(reject_spurious(vec![object_with_cov(negative)], 1e-10).is_err());
    }
}
