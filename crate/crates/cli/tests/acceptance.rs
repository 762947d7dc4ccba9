//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run all with `cargo test -p isl-cli --test acceptance`; pass criterion
//! numbers or name fragments after `--` to run a subset. FAIL lines are
//! reported without failing the target; set `ISL_ACCEPTANCE_STRICT=1` to exit
//! nonzero when any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use isl_cli::experiment::run_seed;
use isl_cli::{EvalCounts, ExperimentConfig, Metric};
use isl_core::diff_engine::{mlp_forward, Activation, GeneratorSpec, ParamVector};
use isl_core::distributions::{sample_noise, sample_target, sample_unit_sphere, NoiseSpec, TargetSpec};
use isl_core::isl_loss::{
    isl_loss_and_gradient, marginal_isl_loss, rbf_soft_histogram, sliced_isl_loss, soft_rank, IslHyperparams,
    LossAndGrad,
};
use isl_core::metrics::ks_one_sample;
use isl_core::rank_stats::{chi2_uniformity, hard_rank, rank_histogram, RankHistogram};
use isl_core::training::{hill_estimator, Method, TrainConfig, Trainer1d, TrainerSliced};
use isl_core::{Matrix, RandomSource};

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = Result<Outcome, String>;
type Criterion = (usize, &'static str, fn(&mut Suite) -> Check);

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn fmt_list(xs: &[f64], digits: usize) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.digits$}")).collect();
    format!("[{}]", parts.join(", "))
}

/// A configured run whose summary row is replayed by the determinism check.
struct Recorded {
    label: &'static str,
    config: ExperimentConfig,
    seed: u64,
    row: String,
}

#[derive(Default)]
struct Suite {
    recorded: Vec<Recorded>,
    /// Runs whose last epoch-mean loss is not below the first one at the final K.
    diverged: Vec<String>,
    runs: usize,
}

impl Suite {
    fn run_recorded(&mut self, label: &'static str, cfg: &ExperimentConfig, seed: u64) -> Result<isl_cli::SeedOutcome, String> {
        let out = run_seed(cfg, seed).map_err(err)?;
        let epochs = &out.report.epochs;
        let at_final_k = epochs.iter().find(|e| e.k == out.report.final_k);
        if let (Some(first), Some(last)) = (at_final_k, epochs.last()) {
            self.runs += 1;
            if last.loss >= first.loss || last.loss.is_nan() {
                self.diverged.push(format!("{label}/seed {seed}"));
            }
        }
        if !self.recorded.iter().any(|r| r.label == label) {
            self.recorded.push(Recorded {
                label,
                config: cfg.clone(),
                seed,
                row: out.summary_row.clone(),
            });
        }
        Ok(out)
    }
}

fn experiment(method: Method, train: TrainConfig, metrics: Vec<Metric>) -> ExperimentConfig {
    ExperimentConfig {
        method,
        train,
        pareto_xi: None,
        output_dir: PathBuf::from("unused"),
        metrics: Some(metrics),
        seeds: vec![0],
        eval: EvalCounts::default(),
        record_timings: false,
    }
}

// 1. Ranks of exact samples are uniform.
fn rank_uniformity(_: &mut Suite) -> Check {
    let target = TargetSpec::Gaussian { mean: 4.0, std: 2.0 };
    let mut accepted = 0;
    for seed in 0..100u64 {
        let root = RandomSource::new(seed);
        let real = sample_target(&target, 5000, &mut root.substream("real")).map_err(err)?;
        let sampler = |k: usize, rng: &mut RandomSource| sample_target(&target, k, rng).map(Matrix::into_vec);
        let hist = rank_histogram(real.as_slice(), sampler, 10, &mut root.substream("fake")).map_err(err)?;
        if chi2_uniformity(&hist, 0.05).map_err(err)?.accept {
            accepted += 1;
        }
    }
    Ok(Outcome {
        pass: accepted >= 90,
        detail: format!("chi2 accepted {accepted}/100 seeds (need >= 90)"),
    })
}

/// L-inf gap between the hard rank pmf and the soft histogram, with each
/// datum ranked against its own K fakes; `normalize` rescales q to sum to one.
fn soft_hard_gap(real: &[f64], fake: &[f64], k: usize, alpha: f64, nu: f64, normalize: bool) -> f64 {
    let mut hist = RankHistogram::new(k);
    let soft: Vec<f64> = real
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = &fake[i * k..(i + 1) * k];
            hist.record(hard_rank(y, f).expect("finite"));
            soft_rank(y, f, alpha)
        })
        .collect();
    let mut q = rbf_soft_histogram(&soft, k, nu);
    if normalize {
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= s);
    }
    hist.pmf().iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

// 2. The soft histogram tracks the hard one.
fn surrogate_fidelity(_: &mut Suite) -> Check {
    let (k, n) = (10, 1000);
    let target = TargetSpec::Gaussian { mean: 4.0, std: 2.0 };
    let root = RandomSource::new(0);
    let real = sample_target(&target, n, &mut root.substream("data")).map_err(err)?.into_vec();
    let gen = GeneratorSpec::mlp(1, &[32, 32], 1, Activation::Tanh, 0);
    let params = gen.init_params().map_err(err)?;
    let z = sample_noise(&NoiseSpec::standard_normal(1), n * k, &mut root.substream("noise")).map_err(err)?;
    let fake = mlp_forward(&params, &gen, &z).map_err(err)?.into_vec();
    let min_gap = real
        .iter()
        .enumerate()
        .flat_map(|(i, y)| fake[i * k..(i + 1) * k].iter().map(move |f| (y - f).abs()))
        .fold(f64::INFINITY, f64::min);
    let sharp = soft_hard_gap(&real, &fake, k, 1e4, 1e-3, false);
    let broad = soft_hard_gap(&real, &fake, k, 10.0, 0.5, true);
    let raw = soft_hard_gap(&real, &fake, k, 10.0, 0.5, false);
    Ok(Outcome {
        pass: sharp < 1e-6 && broad < 0.05,
        detail: format!(
            "alpha=1e4 nu=1e-3: gap {sharp:.2e} (< 1e-6; min |y - fake| {min_gap:.1e}); \
             alpha=10 nu=0.5: gap {broad:.4} (< 0.05; unnormalized q {raw:.4})"
        ),
    })
}

fn gaussian_1d_config(seed: u64, schedule: Option<Vec<usize>>) -> TrainConfig {
    let gen = GeneratorSpec::mlp(1, &[32, 32], 1, Activation::Tanh, seed);
    let mut c = TrainConfig::new(TargetSpec::Gaussian { mean: 4.0, std: 2.0 }, NoiseSpec::standard_normal(1), gen, 200);
    c.seed = seed;
    c.k_schedule = schedule;
    c
}

/// Final KSD and training seconds until KSD first drops to `threshold`
/// (infinite when it never does). Evaluation time is excluded.
fn ksd_trajectory(config: TrainConfig, threshold: f64) -> Result<(f64, f64), String> {
    let target = config.target.clone();
    let epochs = config.epochs;
    let mut t = Trainer1d::new(config).map_err(err)?;
    let mut train_secs = 0.0;
    let mut hit = f64::INFINITY;
    let mut ksd = f64::NAN;
    for _ in 0..epochs {
        let start = Instant::now();
        t.run_epoch().map_err(err)?;
        train_secs += start.elapsed().as_secs_f64();
        let s = t.generator().sample(10_000, &mut RandomSource::new(7)).map_err(err)?;
        ksd = ks_one_sample(s.as_slice(), |x| target.cdf(x).expect("1D")).map_err(err)?;
        if ksd <= threshold && hit.is_infinite() {
            hit = train_secs;
        }
    }
    Ok((ksd, hit))
}

// 3. Progressive K converges and gets there sooner than fixed K.
fn progressive_k(suite: &mut Suite) -> Check {
    let (mut finals, mut t_prog, mut t_fixed) = (vec![], vec![], vec![]);
    for seed in 0..5u64 {
        let (ksd, hit) = ksd_trajectory(gaussian_1d_config(seed, None), 0.03)?;
        finals.push(ksd);
        t_prog.push(hit);
        let (_, hit_fixed) = ksd_trajectory(gaussian_1d_config(seed, Some(vec![10])), 0.03)?;
        t_fixed.push(hit_fixed);
    }
    suite.run_recorded("progressive", &experiment(Method::Isl1d, gaussian_1d_config(0, None), vec![Metric::Ksd]), 0)?;
    let converged = finals.iter().filter(|&&k| k < 0.05).count();
    let (mp, mf) = (median(t_prog.clone()), median(t_fixed.clone()));
    let saving = 1.0 - mp / mf;
    Ok(Outcome {
        pass: converged >= 4 && mp.is_finite() && saving >= 0.15,
        detail: format!(
            "final KSD {} ({converged}/5 < 0.05); secs to KSD<=0.03 progressive {} vs fixed {}: median saving {:.0}% (need >= 15%)",
            fmt_list(&finals, 4),
            fmt_list(&t_prog, 2),
            fmt_list(&t_fixed, 2),
            100.0 * saving
        ),
    })
}

fn cauchy_config(noise: NoiseSpec) -> TrainConfig {
    let gen = GeneratorSpec::mlp(1, &[35, 35, 35], 1, Activation::Relu, 0);
    let mut c = TrainConfig::new(TargetSpec::Cauchy { loc: 1.0, scale: 2.0 }, noise, gen, 1000);
    c.k_max = 20;
    c.learning_rate = 3e-3;
    c.lr_final = Some(1e-5);
    c
}

// 4. Pareto-ISL fits the Cauchy law and its tail better than Gaussian noise.
fn pareto_tails(suite: &mut Suite) -> Check {
    let metrics = vec![Metric::Ksd, Metric::Accdf];
    let mut pareto = experiment(Method::ParetoIsl, cauchy_config(NoiseSpec::standard_normal(1)), metrics.clone());
    pareto.pareto_xi = Some(1.0);
    let gauss = experiment(Method::Isl1d, cauchy_config(NoiseSpec::standard_normal(1)), metrics);
    let (mut ksd, mut a_p, mut a_g) = (vec![], vec![], vec![]);
    for seed in 0..5u64 {
        let p = suite.run_recorded("pareto", &pareto, seed)?;
        let g = suite.run_recorded("gaussian-noise", &gauss, seed)?;
        ksd.push(p.report.metrics["ksd"]);
        a_p.push(p.report.metrics["accdf"]);
        a_g.push(g.report.metrics["accdf"]);
    }
    let (mk, mp, mg) = (median(ksd.clone()), median(a_p.clone()), median(a_g.clone()));
    Ok(Outcome {
        pass: mk < 0.05 && mp < mg,
        detail: format!(
            "median KSD {mk:.4} (< 0.05) of {}; median A_CCDF pareto {mp:.3} vs gaussian {mg:.3} ({} vs {})",
            fmt_list(&ksd, 4),
            fmt_list(&a_p, 2),
            fmt_list(&a_g, 2)
        ),
    })
}

// 5. GPD draws follow the analytic CCDF.
fn gpd_sampler(_: &mut Suite) -> Check {
    let mut worst: f64 = 0.0;
    let mut parts = vec![];
    for (i, xi) in [-0.25, 0.0, 0.5, 1.0].into_iter().enumerate() {
        let spec = NoiseSpec::gpd(xi, 1.0, 1);
        let s = sample_noise(&spec, 100_000, &mut RandomSource::new(50 + i as u64)).map_err(err)?;
        let d = ks_one_sample(s.as_slice(), |z| spec.cdf(z)).map_err(err)?;
        worst = worst.max(d);
        parts.push(format!("xi={xi}: {d:.4}"));
    }
    Ok(Outcome {
        pass: worst < 0.01,
        detail: format!("KS {} (< 0.01)", parts.join(", ")),
    })
}

// 6. Hill recovers the Pareto(1, 1) tail index.
fn hill(_: &mut Suite) -> Check {
    let target = TargetSpec::Pareto { scale: 1.0, shape: 1.0 };
    let mut inside = 0;
    let mut est = vec![];
    for seed in 0..20u64 {
        let x = sample_target(&target, 100_000, &mut RandomSource::new(seed)).map_err(err)?;
        let xi = hill_estimator(x.as_slice(), 1000).map_err(err)?;
        if (0.9..=1.1).contains(&xi) {
            inside += 1;
        }
        est.push(xi);
    }
    Ok(Outcome {
        pass: inside >= 18,
        detail: format!("{inside}/20 estimates in [0.9, 1.1] (need >= 18); range {:.3}..{:.3}", est.iter().cloned().fold(f64::INFINITY, f64::min), est.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
    })
}

fn ring_config() -> TrainConfig {
    let gen = GeneratorSpec::mlp(2, &[32, 32], 2, Activation::Tanh, 0);
    let mut c = TrainConfig::new(TargetSpec::ring2d(), NoiseSpec::standard_normal(2), gen, 250);
    c.projections = 5;
    c.learning_rate = 3e-3;
    c
}

// 7. Slicing covers the ring's modes.
fn ring_coverage(suite: &mut Suite) -> Check {
    let cfg = experiment(Method::IslSliced, ring_config(), vec![Metric::Modes]);
    let mut modes = vec![];
    let mut hq = vec![];
    for seed in 0..5u64 {
        let out = suite.run_recorded("ring", &cfg, seed)?;
        modes.push(out.report.metrics["n_modes"]);
        hq.push(out.report.metrics["pct_hq"]);
    }
    let m = median(modes.clone());
    Ok(Outcome {
        pass: m >= 7.0,
        detail: format!("median modes {m} of 8 (need >= 7) from {}; %HQ {}", fmt_list(&modes, 0), fmt_list(&hq, 2)),
    })
}

fn hd_config(seed: u64, epochs: usize) -> TrainConfig {
    let target = TargetSpec::LinearGaussianHd { dim: 20, latent_dim: 2, matrix_seed: 0 };
    let gen = GeneratorSpec::mlp(2, &[32], 20, Activation::Tanh, seed);
    let mut c = TrainConfig::new(target, NoiseSpec::standard_normal(2), gen, epochs);
    c.projections = 10;
    c.learning_rate = 1e-2;
    c.lr_final = Some(1e-4);
    c.seed = seed;
    c
}

fn seconds_per_iteration(config: TrainConfig, marginal: bool) -> Result<f64, String> {
    let mut t = TrainerSliced::new(config, marginal).map_err(err)?;
    t.run_iterations(5).map_err(err)?;
    let start = Instant::now();
    t.run_iterations(100).map_err(err)?;
    Ok(start.elapsed().as_secs_f64() / 100.0)
}

// 8. Slicing beats per-marginal training at equal wall-clock and costs less per step.
fn slicing_vs_marginals(suite: &mut Suite) -> Check {
    const MARGINAL_EPOCHS: usize = 120;
    let (mut ratios, mut js_s, mut js_m) = (vec![], vec![], vec![]);
    for seed in 0..3u64 {
        let c_s = seconds_per_iteration(hd_config(seed, 1), false)?;
        let c_m = seconds_per_iteration(hd_config(seed, 1), true)?;
        ratios.push(c_m / c_s);
        // same wall-clock budget: the cheaper method gets proportionally more epochs
        let sliced_epochs = ((MARGINAL_EPOCHS as f64) * c_m / c_s).floor() as usize;
        let sliced = experiment(Method::IslSliced, hd_config(seed, sliced_epochs), vec![Metric::JsMarginal]);
        let marginal = experiment(Method::IslMarginal, hd_config(seed, MARGINAL_EPOCHS), vec![Metric::JsMarginal]);
        js_s.push(suite.run_recorded("slicing-hd", &sliced, seed)?.report.metrics["js_marginal"]);
        js_m.push(suite.run_recorded("marginal-hd", &marginal, seed)?.report.metrics["js_marginal"]);
    }
    let (ms, mm, mr) = (median(js_s.clone()), median(js_m.clone()), median(ratios.clone()));
    Ok(Outcome {
        pass: ms <= mm && mr >= 1.5,
        detail: format!(
            "median JS slicing {ms:.4} vs marginals {mm:.4} ({} vs {}); per-iteration cost ratio {} median {mr:.2} (need >= 1.5)",
            fmt_list(&js_s, 4),
            fmt_list(&js_m, 4),
            fmt_list(&ratios, 2)
        ),
    })
}

fn fd_error(params: &ParamVector, seed: u64, eval: impl Fn(&ParamVector) -> LossAndGrad) -> f64 {
    let g = eval(params).grad;
    let mut rng = RandomSource::new(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..32 {
        let mut v: Vec<f64> = (0..params.len()).map(|_| rng.standard_normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let shifted = |sign: f64| {
            let mut p = params.clone();
            p.values.iter_mut().zip(&v).for_each(|(a, b)| *a += sign * h * b);
            eval(&p).loss
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
        let ad: f64 = g.values.iter().zip(&v).map(|(a, b)| a * b).sum();
        worst = worst.max((ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-8));
    }
    worst
}

// 9. Reverse-mode gradients agree with central differences.
fn gradient_suite(_: &mut Suite) -> Check {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (a, act) in [Activation::Relu, Activation::Tanh, Activation::Identity].into_iter().enumerate() {
        for (l, hidden) in [&[6][..], &[6, 5], &[5, 4, 3]].into_iter().enumerate() {
            let seed = (10 * a + l) as u64;
            let mut rng = RandomSource::new(seed);
            let mut h = IslHyperparams::new(5);
            h.fresh_fakes_per_datum = l % 2 == 0;

            let g1 = GeneratorSpec::mlp(1, hidden, 1, act, seed);
            let p1 = g1.init_params().map_err(err)?;
            let real: Vec<f64> = (0..10).map(|_| rng.normal(0.5, 1.5)).collect();
            let z1 = sample_noise(&NoiseSpec::standard_normal(1), h.fakes_per_projection(10), &mut rng).map_err(err)?;
            worst = worst.max(fd_error(&p1, seed, |p| isl_loss_and_gradient(p, &real, &z1, &h, &g1).expect("loss")));

            let d = 3;
            let g3 = GeneratorSpec::mlp(2, hidden, d, act, seed);
            let p3 = g3.init_params().map_err(err)?;
            let real3 = Matrix::from_vec(10, d, (0..10 * d).map(|_| rng.normal(0.0, 1.2)).collect()).map_err(err)?;
            let dirs = sample_unit_sphere(d, 4, &mut rng).map_err(err)?;
            let z3 = sample_noise(&NoiseSpec::standard_normal(2), 4 * h.fakes_per_projection(10), &mut rng).map_err(err)?;
            worst = worst.max(fd_error(&p3, seed + 1, |p| sliced_isl_loss(p, &real3, &z3, &dirs, &h, &g3).expect("loss")));
            let zm = sample_noise(&NoiseSpec::standard_normal(2), h.fakes_per_projection(10), &mut rng).map_err(err)?;
            worst = worst.max(fd_error(&p3, seed + 2, |p| marginal_isl_loss(p, &real3, &zm, &h, &g3).expect("loss")));
            cases += 3;
        }
    }
    Ok(Outcome {
        pass: worst < 1e-4,
        detail: format!("{cases} loss/architecture cases x 32 directions, worst relative error {worst:.2e} (< 1e-4)"),
    })
}

// 10. Re-running a configured seed reproduces its summary row byte for byte.
fn determinism(suite: &mut Suite) -> Check {
    if suite.recorded.is_empty() {
        let mut c = gaussian_1d_config(0, None);
        c.epochs = 20;
        suite.run_recorded("progressive-short", &experiment(Method::Isl1d, c, vec![Metric::Ksd, Metric::MaeMse]), 0)?;
    }
    let mut mismatched = vec![];
    for r in &suite.recorded {
        let again = run_seed(&r.config, r.seed).map_err(err)?;
        if again.summary_row != r.row {
            mismatched.push(r.label);
        }
    }
    let labels: Vec<&str> = suite.recorded.iter().map(|r| r.label).collect();
    Ok(Outcome {
        pass: mismatched.is_empty(),
        detail: format!("replayed {} runs ({}); mismatched: {mismatched:?}", labels.len(), labels.join(", ")),
    })
}

fn main() {
    // criterion numbers or name fragments select a subset; libtest-style flags are ignored
    let args: Vec<String> = std::env::args().skip(1).collect();
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 10] = [
        (1, "rank uniformity", rank_uniformity),
        (2, "surrogate fidelity", surrogate_fidelity),
        (3, "progressive K", progressive_k),
        (4, "Pareto-ISL tails", pareto_tails),
        (5, "GPD sampler", gpd_sampler),
        (6, "Hill estimator", hill),
        (7, "slicing mode coverage", ring_coverage),
        (8, "slicing vs marginals", slicing_vs_marginals),
        (9, "gradient suite", gradient_suite),
        (10, "determinism", determinism),
    ];
    let selected = |id: usize, name: &str| {
        filters.is_empty() || filters.iter().any(|f| f.parse() == Ok(id) || name.contains(f.as_str()))
    };
    if args.iter().any(|a| a == "--list") {
        for (id, name, _) in criteria.iter().filter(|(id, name, _)| selected(*id, name)) {
            println!("{id}: {name}: test");
        }
        return;
    }
    let mut suite = Suite::default();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in criteria {
        if !selected(id, name) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = check(&mut suite).unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        let secs = start.elapsed().as_secs_f64();
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {} ({secs:.1} s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    if suite.runs > 0 {
        println!(
            "note: last epoch loss below the first epoch loss at the final K in {}/{} training runs; exceptions: {:?}",
            suite.runs - suite.diverged.len(),
            suite.runs,
            suite.diverged
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    // the workspace test run keeps going past this target unless strict mode is asked for
    if failed > 0 && std::env::var_os("ISL_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
