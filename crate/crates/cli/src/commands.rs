use std::fmt::Write as _;
use std::io::BufReader;
use std::path::Path;

use isl_core::distributions::{sample_target, TargetSpec};
use isl_core::rank_stats::{chi2_uniformity, hard_rank, Chi2Outcome, RankHistogram};
use isl_core::training::TrainedGenerator;
use isl_core::{IslError, Matrix, RandomSource};

use crate::error::CliError;
use crate::experiment::format_float;

pub fn load_checkpoint(path: &Path) -> Result<TrainedGenerator, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path.display(), e))?;
    TrainedGenerator::load(BufReader::new(f)).map_err(|e| match e {
        IslError::Io(err) => CliError::io(path.display(), err),
        other => CliError::Numeric(other),
    })
}

/// A target given inline as JSON or as `@path` to a JSON file.
pub fn parse_target(arg: &str) -> Result<TargetSpec, CliError> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
        None => arg.to_string(),
    };
    let de = &mut serde_json::Deserializer::from_str(&text);
    let t: TargetSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(Some(if path == "." { "target".into() } else { format!("target.{path}") }), e.inner().to_string())
    })?;
    t.validate().map_err(|e| CliError::config(Some("target".into()), e.to_string()))?;
    Ok(t)
}

pub struct RankDiagnostic {
    pub histogram: RankHistogram,
    pub chi2: Chi2Outcome,
}

/// Ranks `n` target draws against `k` fresh generator draws each, optionally
/// after projecting both onto `direction`.
pub fn rank_diagnostic(
    gen: &TrainedGenerator,
    target: &TargetSpec,
    k: usize,
    n: usize,
    direction: Option<&[f64]>,
    seed: u64,
) -> Result<RankDiagnostic, CliError> {
    if k == 0 || n == 0 {
        return Err(CliError::config(Some("k".into()), "K and n must be >= 1"));
    }
    let d = target.dim();
    if gen.dim() != d {
        return Err(CliError::Numeric(IslError::ShapeMismatch {
            expected: format!("generator output width {d} (target dimension)"),
            actual: gen.dim().to_string(),
        }));
    }
    let unit: Option<Vec<f64>> = match direction {
        Some(s) => {
            let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            if s.len() != d || !(norm > 0.0) || !norm.is_finite() {
                return Err(CliError::config(
                    Some("direction".into()),
                    format!("direction must have {d} finite entries and nonzero norm"),
                ));
            }
            Some(s.iter().map(|x| x / norm).collect())
        }
        None if d == 1 => None,
        None => {
            return Err(CliError::config(
                Some("direction".into()),
                format!("a {d}-dimensional target needs a direction"),
            ))
        }
    };
    let project = |m: &Matrix| match &unit {
        Some(s) => m.project(s),
        None => m.col(0),
    };
    let root = RandomSource::new(seed);
    let real = project(&sample_target(target, n, &mut root.substream("rankdiag-target"))?);
    let fake = project(&gen.sample(n * k, &mut root.substream("rankdiag-generator"))?);
    let mut histogram = RankHistogram::new(k);
    for (i, y) in real.iter().enumerate() {
        histogram.record(hard_rank(*y, &fake[i * k..(i + 1) * k])?);
    }
    let chi2 = chi2_uniformity(&histogram, 0.05)?;
    Ok(RankDiagnostic { histogram, chi2 })
}

pub fn rank_diagnostic_csv(diag: &RankDiagnostic) -> String {
    let mut s = String::from("bin,count,q_hat\n");
    let pmf = diag.histogram.pmf();
    for (i, (c, q)) in diag.histogram.counts().iter().zip(&pmf).enumerate() {
        writeln!(s, "{i},{c},{}", format_float(*q)).expect("write to String");
    }
    writeln!(s, "# chi2_statistic={}", format_float(diag.chi2.statistic)).expect("write to String");
    writeln!(s, "# p_value={}", format_float(diag.chi2.p_value)).expect("write to String");
    s
}

pub fn samples_csv(samples: &Matrix) -> String {
    let mut s = (0..samples.cols()).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for row in samples.iter_rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
