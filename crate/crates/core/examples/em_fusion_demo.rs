//! Vision-guided EM fusion on one synthetic interval, step by step.
//!
//! Two speakers project dense visual mass onto the ITD axis; a handful of
//! auditory observations cluster at the speaking one. The visual EM fixes
//! the responsibilities, then the fusion EM folds the auditory data in
//! without touching them.
//!
//! Run with: `cargo run --example em_fusion_demo`

use avfusion::geometry::ItdValue;
use avfusion::mixture::{em_fusion, em_visual, MixtureParams, OutlierDomain};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() {
    let domain = OutlierDomain::new(-7e-4, 7e-4).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);

    // Projected visual features of two speakers at ITD -2e-4 and +1.5e-4.
    let cluster_a = Normal::new(-2e-4, 8e-6).unwrap();
    let cluster_b = Normal::new(1.5e-4, 8e-6).unwrap();
    let mut v_proj: Vec<ItdValue> = Vec::new();
    v_proj.extend((0..300).map(|_| ItdValue(cluster_a.sample(&mut rng))));
    v_proj.extend((0..260).map(|_| ItdValue(cluster_b.sample(&mut rng))));

    // Speaker B talks: its ITDs are noisier than the visual projections.
    let voice = Normal::new(1.5e-4, 2e-5).unwrap();
    let mut auditory: Vec<ItdValue> = (0..18).map(|_| ItdValue(voice.sample(&mut rng))).collect();
    auditory.push(ItdValue(-5.5e-4)); // reverberation artifact

    let init = MixtureParams::new(
        vec![0.4, 0.4, 0.2],
        vec![-3e-4, 3e-4],
        vec![1e-4, 1e-4],
        domain,
    )
    .unwrap();

    let visual = em_visual(&v_proj, &init, 1e-6, 100).unwrap();
    println!(
        "visual EM: {} iterations, log-likelihood {:.2}",
        visual.iterations,
        visual.objective_trace.last().unwrap()
    );

    let fused = em_fusion(
        &v_proj,
        &auditory,
        &visual.posteriors,
        &visual.params,
        1e-6,
        100,
    )
    .unwrap();
    println!(
        "fusion EM: {} iterations, objective trace {:?}",
        fused.iterations,
        fused
            .objective_trace
            .iter()
            .map(|v| format!("{v:.1}"))
            .collect::<Vec<_>>()
    );

    let masses = fused.posteriors.auditory.column_sums();
    for (i, ((mean, sigma), weight)) in fused
        .params
        .means
        .iter()
        .zip(&fused.params.stddevs)
        .zip(&fused.params.weights)
        .enumerate()
    {
        println!(
            "component {i}: mean {:.2e}s, sigma {:.1e}s, weight {:.3}, auditory mass {:.2}",
            mean, sigma, weight, masses[i]
        );
    }
    println!(
        "outlier weight {:.3}, auditory outlier mass {:.2}",
        fused.params.outlier_weight(),
        masses.last().unwrap()
    );
}
