//! Counting speakers with BIC.
//!
//! Fits candidate mixtures for every N from 0 to n_max on a three-cluster
//! scene and prints the score curve; the maximum lands on the true count.
//!
//! Run with: `cargo run --example count_speakers`

use avfusion::geometry::ItdValue;
use avfusion::mixture::OutlierDomain;
use avfusion::pipeline::{fit_candidates, PipelineKnobs};
use avfusion::selection::select_model;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

fn main() {
    let domain = OutlierDomain::new(-7e-4, 7e-4).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);

    let centers = [-2.5e-4, 0.0, 2.2e-4];
    let mut v_proj: Vec<ItdValue> = Vec::new();
    let mut auditory: Vec<ItdValue> = Vec::new();
    for c in centers {
        let visual = Normal::new(c, 1e-5).unwrap();
        v_proj.extend((0..220).map(|_| ItdValue(visual.sample(&mut rng))));
        let voice = Normal::new(c, 2e-5).unwrap();
        auditory.extend((0..8).map(|_| ItdValue(voice.sample(&mut rng))));
    }
    // 5% outliers across the whole domain.
    for _ in 0..33 {
        v_proj.push(ItdValue(rng.random_range(domain.lo..domain.hi)));
    }
    auditory.push(ItdValue(rng.random_range(domain.lo..domain.hi)));

    let knobs = PipelineKnobs::default();
    let candidates = fit_candidates(&v_proj, &auditory, None, &domain, &knobs).unwrap();
    println!("  N        BIC   log-likelihood");
    for c in &candidates {
        println!("{:>3} {:>10.1} {:>10.1}", c.n_components, c.bic, c.loglik);
    }

    let best = select_model(candidates).unwrap();
    println!(
        "selected N = {} (true count {})",
        best.n_components,
        centers.len()
    );
}
