use std::collections::BTreeMap;

use isl_core::distributions::{sample_target, TargetSpec};
use isl_core::metrics::{
    accdf_area, kl_histogram, ks_distance, mae_mse_of_map, mean_marginal_js, mode_coverage, HistogramGrid,
    KsReference,
};
use isl_core::training::TrainedGenerator;
use isl_core::{RandomSource, Result};

use crate::config::{EvalCounts, Metric};

fn nonzero_abs(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| x.abs()).filter(|&x| x > 0.0).collect()
}

/// Evaluates `selected` metrics for a trained generator. All draws come from
/// sub-streams of `root`, so the values are a function of the seed.
pub fn evaluate(
    gen: &TrainedGenerator,
    target: &TargetSpec,
    selected: &[Metric],
    counts: &EvalCounts,
    root: &RandomSource,
) -> Result<BTreeMap<String, f64>> {
    let reference = sample_target(target, counts.n_reference, &mut root.substream("reference"))?;
    let generated = gen.sample(counts.n_samples, &mut root.substream("generated"))?;
    let mut out = BTreeMap::new();
    for &metric in selected {
        match metric {
            Metric::Ksd => {
                let cdf = |x: f64| target.cdf(x).expect("1D target has a cdf");
                let d = ks_distance(generated.as_slice(), KsReference::Cdf(&cdf))?;
                out.insert("ksd".into(), d);
            }
            Metric::MaeMse => {
                let mut rng = root.substream("optimal-map");
                let r = mae_mse_of_map(|z| gen.map(z), &gen.noise, target, counts.n_mc, &mut rng)?;
                out.insert("mae".into(), r.mae);
                out.insert("mse".into(), r.mse);
                out.insert("n_mc".into(), r.n_mc as f64);
            }
            Metric::Accdf => {
                let a = accdf_area(&nonzero_abs(reference.as_slice()), &nonzero_abs(generated.as_slice()))?;
                out.insert("accdf".into(), a);
            }
            Metric::Modes => {
                let layout = target.mode_layout().expect("checked by config validation");
                let c = mode_coverage(&generated, &layout)?;
                out.insert("n_modes".into(), c.n_modes as f64);
                out.insert("pct_hq".into(), c.pct_hq);
            }
            Metric::Kl => {
                let grid = HistogramGrid::around(&reference, counts.bins)?;
                out.insert("kl".into(), kl_histogram(&reference, &generated, &grid)?);
            }
            Metric::JsMarginal => {
                out.insert("js_marginal".into(), mean_marginal_js(&reference, &generated, counts.bins)?);
            }
        }
    }
    Ok(out)
}
