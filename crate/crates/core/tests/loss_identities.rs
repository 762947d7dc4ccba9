use approx::assert_relative_eq;
use isl_core::diff_engine::{mlp_forward, Activation, GeneratorSpec, ParamVector};
use isl_core::distributions::{sample_noise, sample_unit_sphere, NoiseSpec};
use isl_core::isl_loss::{
    axis_directions, isl_loss_and_gradient, marginal_isl_loss, rbf_soft_histogram, sliced_isl_loss, soft_rank,
    IslHyperparams,
};
use isl_core::rank_stats::{hard_rank, RankHistogram};
use isl_core::{Matrix, RandomSource};
use proptest::prelude::*;

fn gaussian_matrix(rows: usize, cols: usize, mean: f64, std: f64, rng: &mut RandomSource) -> Matrix {
    let v = (0..rows * cols).map(|_| rng.normal(mean, std)).collect();
    Matrix::from_vec(rows, cols, v).unwrap()
}

fn identity_generator(d: usize) -> (GeneratorSpec, ParamVector) {
    let gen = GeneratorSpec::mlp(d, &[], d, Activation::Identity, 0);
    let mut params = gen.init_params().unwrap();
    params.values.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..d {
        params.values[i * d + i] = 1.0;
    }
    (gen, params)
}

/// A two-output network and the one-output network that computes its first output.
fn first_output_pair(seed: u64) -> (GeneratorSpec, ParamVector, GeneratorSpec, ParamVector) {
    let hidden = 6;
    let gen2 = GeneratorSpec::mlp(1, &[hidden], 2, Activation::Tanh, seed);
    let p2 = gen2.init_params().unwrap();
    let gen1 = GeneratorSpec::mlp(1, &[hidden], 1, Activation::Tanh, seed);
    let out = &p2.layout.layers[1];
    let mut v1 = p2.values[..out.offset].to_vec();
    v1.extend_from_slice(&p2.values[out.offset..out.offset + hidden]);
    v1.push(p2.values[out.biases().start]);
    let p1 = ParamVector::new(gen1.layout(), v1).unwrap();
    (gen2, p2, gen1, p1)
}

#[test]
fn single_axis_slice_is_the_one_dimensional_loss() {
    for fresh in [false, true] {
        let (gen2, p2, gen1, p1) = first_output_pair(3);
        let mut rng = RandomSource::new(11);
        let real = gaussian_matrix(15, 2, 0.2, 1.0, &mut rng);
        let mut h = IslHyperparams::new(7);
        h.fresh_fakes_per_datum = fresh;
        let noise = sample_noise(&NoiseSpec::standard_normal(1), h.fakes_per_projection(15), &mut rng).unwrap();
        let axis = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let sliced = sliced_isl_loss(&p2, &real, &noise, &axis, &h, &gen2).unwrap();
        let one = isl_loss_and_gradient(&p1, &real.col(0), &noise, &h, &gen1).unwrap();
        assert_eq!(sliced.loss, one.loss);
        let out = &p2.layout.layers[1];
        let hidden = out.fan_in;
        let shared = out.offset;
        assert_eq!(&sliced.grad.values[..shared], &one.grad.values[..shared]);
        assert_eq!(&sliced.grad.values[shared..shared + hidden], &one.grad.values[shared..shared + hidden]);
        assert!(sliced.grad.values[shared + hidden..shared + 2 * hidden].iter().all(|&g| g == 0.0));
        assert_eq!(sliced.grad.values[out.biases().start], one.grad.values[shared + hidden]);
    }
}

#[test]
fn repeated_direction_pairs_do_not_change_the_mean() {
    let gen = GeneratorSpec::mlp(2, &[5], 3, Activation::Relu, 4);
    let params = gen.init_params().unwrap();
    let mut rng = RandomSource::new(5);
    let real = gaussian_matrix(12, 3, 0.0, 1.3, &mut rng);
    let h = IslHyperparams::new(6);
    let noise = sample_noise(&NoiseSpec::standard_normal(2), 6, &mut rng).unwrap();
    let s = sample_unit_sphere(3, 1, &mut rng).unwrap().row(0).to_vec();
    let neg: Vec<f64> = s.iter().map(|x| -x).collect();
    let two = Matrix::from_rows(&[s.clone(), neg.clone()]).unwrap();
    let four = Matrix::from_rows(&[s.clone(), neg.clone(), s, neg]).unwrap();
    let a = sliced_isl_loss(&params, &real, &noise, &two, &h, &gen).unwrap();
    let b = sliced_isl_loss(&params, &real, &noise, &four, &h, &gen).unwrap();
    assert_relative_eq!(a.loss, b.loss, max_relative = 1e-14);
    for (x, y) in a.grad.values.iter().zip(&b.grad.values) {
        assert_relative_eq!(x, y, max_relative = 1e-12, epsilon = 1e-15);
    }
}

#[test]
fn marginal_loss_is_dimension_times_axis_sliced_loss() {
    let d = 4;
    let gen = GeneratorSpec::mlp(2, &[6], d, Activation::Tanh, 8);
    let params = gen.init_params().unwrap();
    let mut rng = RandomSource::new(9);
    let real = gaussian_matrix(10, d, 0.5, 2.0, &mut rng);
    let h = IslHyperparams::new(5);
    let noise = sample_noise(&NoiseSpec::standard_normal(2), 5, &mut rng).unwrap();
    let marg = marginal_isl_loss(&params, &real, &noise, &h, &gen).unwrap();
    let sliced = sliced_isl_loss(&params, &real, &noise, &axis_directions(d), &h, &gen).unwrap();
    assert_relative_eq!(marg.loss, d as f64 * sliced.loss, max_relative = 1e-14);
    assert_eq!(marg.per_projection, sliced.per_projection);
    for (x, y) in marg.grad.values.iter().zip(&sliced.grad.values) {
        assert_relative_eq!(*x, d as f64 * y, max_relative = 1e-12, epsilon = 1e-15);
    }
}

#[test]
fn one_dimensional_marginal_loss_is_the_plain_loss() {
    let gen = GeneratorSpec::mlp(1, &[8, 4], 1, Activation::Relu, 12);
    let params = gen.init_params().unwrap();
    let mut rng = RandomSource::new(13);
    let real = gaussian_matrix(20, 1, 1.0, 1.0, &mut rng);
    for fresh in [false, true] {
        let mut h = IslHyperparams::new(9);
        h.fresh_fakes_per_datum = fresh;
        let noise = sample_noise(&NoiseSpec::standard_normal(1), h.fakes_per_projection(20), &mut rng).unwrap();
        let marg = marginal_isl_loss(&params, &real, &noise, &h, &gen).unwrap();
        let one = isl_loss_and_gradient(&params, real.as_slice(), &noise, &h, &gen).unwrap();
        assert_eq!(marg.loss, one.loss);
        assert_eq!(marg.grad.values, one.grad.values);
    }
}

#[test]
fn exchangeable_axes_have_equal_expected_losses() {
    let (gen, params) = identity_generator(2);
    let h = IslHyperparams::new(10);
    let diffs: Vec<f64> = (0..50)
        .map(|seed| {
            let mut rng = RandomSource::new(seed);
            let real = gaussian_matrix(200, 2, 0.7, 1.5, &mut rng);
            let noise = sample_noise(&NoiseSpec::standard_normal(2), 10, &mut rng).unwrap();
            let l = marginal_isl_loss(&params, &real, &noise, &h, &gen).unwrap();
            l.per_projection[0] - l.per_projection[1]
        })
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 3.0 * sd / n.sqrt(), "mean {mean} sd {sd}");
}

#[test]
fn loss_grows_with_location_shift() {
    let (gen, params) = identity_generator(1);
    let h = IslHyperparams::new(10);
    let expected: Vec<f64> = [0.0, 0.5, 1.0, 2.0]
        .iter()
        .map(|&mu| {
            (0..50u64)
                .map(|seed| {
                    let mut rng = RandomSource::new(seed);
                    let real: Vec<f64> = (0..2000).map(|_| rng.normal(mu, 1.0)).collect();
                    let noise = sample_noise(&NoiseSpec::standard_normal(1), 10, &mut rng).unwrap();
                    isl_loss_and_gradient(&params, &real, &noise, &h, &gen).unwrap().loss
                })
                .sum::<f64>()
                / 50.0
        })
        .collect();
    for w in expected.windows(2) {
        assert!(w[1] >= w[0], "{expected:?}");
    }
}

#[test]
fn sliced_loss_spread_shrinks_like_inverse_sqrt_m() {
    let d = 5;
    let (gen, params) = identity_generator(d);
    let mut rng = RandomSource::new(21);
    // anisotropic data against an isotropic generator: the slice loss depends on the direction
    let mut real = gaussian_matrix(100, d, 0.0, 1.0, &mut rng);
    for r in 0..real.rows() {
        for c in 0..d {
            let v = real.get(r, c) * (0.4 + 0.6 * c as f64);
            real.set(r, c, v);
        }
    }
    let h = IslHyperparams::new(10);
    let noise = sample_noise(&NoiseSpec::standard_normal(d), 10, &mut rng).unwrap();
    let spread = |m: usize| {
        let draws: Vec<f64> = (0..150u64)
            .map(|i| {
                let dirs = sample_unit_sphere(d, m, &mut RandomSource::new(1000 + i)).unwrap();
                sliced_isl_loss(&params, &real, &noise, &dirs, &h, &gen).unwrap().loss
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt()
    };
    let ratio = spread(10) / spread(40);
    assert!((ratio - 2.0).abs() <= 0.5, "ratio {ratio}");
}

fn hard_and_soft(seed: u64, k: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let gen = GeneratorSpec::mlp(1, &[4], 1, Activation::Tanh, seed);
    let params = gen.init_params().unwrap();
    let mut rng = RandomSource::new(seed);
    let real: Vec<f64> = (0..n).map(|_| rng.normal(4.0, 2.0)).collect();
    let noise = sample_noise(&NoiseSpec::standard_normal(1), k, &mut rng).unwrap();
    let fake = mlp_forward(&params, &gen, &noise).unwrap().into_vec();
    let gap = real
        .iter()
        .flat_map(|y| fake.iter().map(move |f| (y - f).abs()))
        .fold(f64::INFINITY, f64::min);
    let alpha = 1e4 / gap;
    let mut hist = RankHistogram::new(k);
    let ranks: Vec<f64> = real
        .iter()
        .map(|&y| {
            hist.record(hard_rank(y, &fake).unwrap());
            soft_rank(y, &fake, alpha)
        })
        .collect();
    (hist.pmf(), rbf_soft_histogram(&ranks, k, 1e-3))
}

#[test]
fn sharp_soft_histogram_is_the_hard_histogram() {
    let (hard, soft) = hard_and_soft(1, 10, 1000);
    let gap = hard.iter().zip(&soft).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-6, "L-inf gap {gap}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn sharp_soft_histogram_matches_for_any_seed(seed in 0u64..10_000, k in 1usize..20, n in 1usize..300) {
        let (hard, soft) = hard_and_soft(seed, k, n);
        for (a, b) in hard.iter().zip(&soft) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }
}
