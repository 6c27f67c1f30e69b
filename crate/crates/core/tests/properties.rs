//! Invariants checked on random inputs, plus fixed-seed statistical checks
//! of the samplers against their own densities and distribution functions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use proptest::prelude::*;
use rand::Rng;

use mee::config::{parse_config, Command};
use mee::data::Dataset;
use mee::hypothesis::{BasisFn, Hypothesis, SpaceKind};
use mee::lab::{fit_rate, BandwidthSchedule, ExperimentRecord, Metric};
use mee::model::{model_by_id, RegressionModel};
use mee::noise::NoiseFamily;
use mee::objective::{empirical_info_error, gaussian_kernel, grad_info_error, Objective};
use mee::oracle::{cx_decompose, entropy, info_error_true, variance_identity, CX_OPTIMAL_V};
use mee::rng::stream;

fn model(id: &str) -> RegressionModel {
    model_by_id(id, &BTreeMap::new()).unwrap()
}

fn basis_space() -> SpaceKind {
    SpaceKind::Basis {
        functions: vec![
            BasisFn::Constant,
            BasisFn::Linear { lo: 0.0, hi: 1.0 },
            BasisFn::Step { at: 0.4 },
            BasisFn::Sin { freq: 3.0 },
        ],
    }
}

fn sample(id: &str, n: usize, seed: u64) -> Dataset {
    model(id).sample(n, &mut stream(seed, 1, n as u64)).unwrap()
}

/// Plain double loop with libm `exp`.
fn naive_objective(f: &Hypothesis, data: &Dataset, h: f64) -> f64 {
    let e: Vec<f64> = data.x().iter().zip(data.y()).map(|(&x, &y)| y - f.eval(x)).collect();
    let c = 1.0 / ((2.0 * PI).sqrt() * h);
    let mut s = 0.0;
    for a in &e {
        for b in &e {
            let t = (a - b) / h;
            s += c * (-0.5 * t * t).exp();
        }
    }
    -s / (e.len() * e.len()) as f64
}

/// θ scaled so that `Σ|θ_k| ≤ bound`, hence `sup |f_θ| ≤ bound` for basis
/// functions with values in `[-1, 1]`.
fn scaled(raw: Vec<f64>, bound: f64) -> Vec<f64> {
    let s: f64 = raw.iter().map(|t| t.abs()).sum();
    if s <= bound {
        raw
    } else {
        raw.iter().map(|t| t * bound / s).collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn objective_matches_double_loop(
        raw in prop::collection::vec(-1.0f64..1.0, 4),
        h in 0.05f64..3.0,
        n in 1usize..120,
        seed in 0u64..1000,
    ) {
        let data = sample("gaussian", n, seed);
        let f = Hypothesis::new(basis_space(), scaled(raw, 1.0), 1.0).unwrap();
        let fast = empirical_info_error(&f, &data, h).unwrap();
        let slow = naive_objective(&f, &data, h);
        prop_assert!((fast - slow).abs() <= 1e-12 * slow.abs(), "{fast} vs {slow}");
        prop_assert!(fast < 0.0 && fast >= -1.0 / ((2.0 * PI).sqrt() * h) * (1.0 + 1e-14));
    }

    #[test]
    fn objective_ignores_sample_order_and_shifts(
        values in prop::collection::vec(-1.0f64..1.0, 3),
        shift in -0.5f64..0.5,
        h in 0.1f64..2.0,
        seed in 0u64..1000,
    ) {
        let data = sample("laplace", 200, seed);
        let space = SpaceKind::piecewise_constant(&[0.3, 0.6]);
        let bound = 2.0;
        let f = Hypothesis::new(space.clone(), values.clone(), bound).unwrap();
        let g = Hypothesis::new(space, values.iter().map(|v| v + shift).collect(), bound).unwrap();
        let base = empirical_info_error(&f, &data, h).unwrap();
        let shifted = empirical_info_error(&g, &data, h).unwrap();
        prop_assert!((base - shifted).abs() <= 1e-13 * base.abs());

        let mut pairs: Vec<(f64, f64)> = data.x().iter().copied().zip(data.y().iter().copied()).collect();
        pairs.reverse();
        pairs.rotate_left((seed % 200) as usize);
        let permuted = Dataset::from_pairs(&pairs).unwrap();
        let again = empirical_info_error(&f, &permuted, h).unwrap();
        prop_assert!((base - again).abs() <= 1e-13 * base.abs());
    }

    #[test]
    fn gradient_matches_central_differences(
        raw in prop::collection::vec(-1.0f64..1.0, 4),
        h in 0.2f64..2.0,
        seed in 0u64..1000,
    ) {
        let data = sample("gaussian", 60, seed);
        let theta = scaled(raw, 0.9);
        let f = Hypothesis::new(basis_space(), theta.clone(), 1.0).unwrap();
        let g = grad_info_error(&f, &data, h).unwrap();
        let obj = Objective::new(&data, &basis_space(), h).unwrap();
        let step = 1e-5;
        for k in 0..theta.len() {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[k] += step;
            down[k] -= step;
            let fd = (obj.value(&up) - obj.value(&down)) / (2.0 * step);
            prop_assert!((g[k] - fd).abs() <= 1e-6 * g[k].abs().max(1.0), "k={k}: {} vs {fd}", g[k]);
        }
        let (v, g2) = obj.value_and_grad(&theta);
        prop_assert!((v - obj.value(&theta)).abs() <= 1e-13 * v.abs());
        for (a, b) in g.iter().zip(&g2) {
            prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1e-3));
        }
    }

    #[test]
    fn kernel_is_lipschitz(a in -5.0f64..5.0, b in -5.0f64..5.0, h in 0.05f64..4.0) {
        let lip = 1.0 / (h * h * (2.0 * PI * 1f64.exp()).sqrt());
        let ga = gaussian_kernel(a, h).unwrap();
        let gb = gaussian_kernel(b, h).unwrap();
        // absolute slack for rounding when a ≈ b
        prop_assert!((ga - gb).abs() <= lip * (a - b).abs() * (1.0 + 1e-12) + 1e-15 / h);
        prop_assert!(ga >= 0.0 && ga <= 1.0 / ((2.0 * PI).sqrt() * h));
    }

    #[test]
    fn projection_enforces_the_bound(raw in prop::collection::vec(-10.0f64..10.0, 4), bound in 0.1f64..3.0) {
        for space in [basis_space(), SpaceKind::piecewise_constant(&[0.2, 0.5, 0.9])] {
            let mut theta = raw.clone();
            space.project(&mut theta, bound);
            prop_assert!(space.sup_bound(&theta) <= bound * (1.0 + 1e-12));
            let before = theta.clone();
            space.project(&mut theta, bound);
            for (a, b) in before.iter().zip(&theta) {
                prop_assert!((a - b).abs() <= 1e-15 * bound);
            }
        }
    }

    #[test]
    fn counterexample_decomposition_adds_up(f1 in -1.0f64..1.0, f2 in -1.0f64..1.0) {
        let d = cx_decompose(f1, f2, 1.0).unwrap();
        prop_assert!((d.v_total - (d.v11 + d.v22 + d.v12)).abs() <= 1e-15);
        prop_assert!(d.v11 >= -0.25 - 1e-15 && d.v22 >= -0.125 - 1e-15 && d.v12 >= -0.25 - 1e-15);
        prop_assert!(d.v_total >= CX_OPTIMAL_V - 1e-15 && d.v_total < 0.0);
        prop_assert_eq!(d.r(), -(-d.v_total).ln());
    }

    #[test]
    fn variance_identity_holds(raw in prop::collection::vec(-1.0f64..1.0, 4), id in prop::sample::select(vec!["gaussian", "counterexample"])) {
        let m = model(id);
        let f = Hypothesis::new(basis_space(), scaled(raw, 1.0), 1.0).unwrap();
        let (lhs, rhs) = variance_identity(&m, &f);
        prop_assert!((lhs - rhs).abs() <= 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn rates_are_exact_on_power_laws(scale in 0.01f64..100.0, slope in -2.0f64..0.5, seeds in 1u64..5) {
        let mut records = Vec::new();
        for n in [100usize, 400, 1600, 6400] {
            for seed in 0..seeds {
                let v = scale * (n as f64).powf(slope);
                records.push(ExperimentRecord {
                    model_id: "gaussian".into(),
                    space: "piecewise_constant(0.5)".into(),
                    n,
                    seed,
                    h: 1.0,
                    entropy_gap: v,
                    l2_centered: v,
                    dist_minset: None,
                    min_b_l2: v.sqrt(),
                    wall_time_ms: 0,
                });
            }
        }
        let r = fit_rate(&records, Metric::L2Centered).unwrap();
        prop_assert!((r.slope - slope).abs() < 1e-10);
        prop_assert!((r.intercept - scale.ln()).abs() < 1e-9);
        let r = fit_rate(&records, Metric::MinBL2).unwrap();
        prop_assert!((r.slope - 0.5 * slope).abs() < 1e-10);
        prop_assert!(fit_rate(&records, Metric::DistMinset).is_err());
    }

    #[test]
    fn config_round_trips(
        n in 1usize..100_000,
        seed in any::<u64>(),
        h in 0.01f64..10.0,
        restarts in 1usize..20,
        bound in 0.1f64..5.0,
        sigma in 0.1f64..3.0,
    ) {
        let text = format!(
            "# generated\ncommand = fit\nmodel_id = gaussian\nparam.sigma = {sigma}\nn = {n}\nh = {h}\n\
             seed = {seed}  # trailing comment\nrestarts = {restarts}\nbound = {bound}\n"
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(cfg.command, Command::Fit);
        prop_assert_eq!(cfg.n, Some(n));
        prop_assert_eq!(cfg.h, Some(h));
        prop_assert_eq!(cfg.fit.seed, seed);
        prop_assert_eq!(cfg.fit.restarts, restarts);
        prop_assert_eq!(cfg.fit.bound, bound);
        prop_assert_eq!(cfg.params.get("sigma").copied(), Some(sigma));
        prop_assert_eq!(cfg.bandwidth(n).unwrap(), h);
    }

    #[test]
    fn schedules_and_spaces_round_trip(c in 0.01f64..10.0, theta in -0.24f64..0.24, cut in 0.01f64..0.99) {
        let s = BandwidthSchedule::PowerLaw { c, theta };
        let back: BandwidthSchedule = s.to_string().parse().unwrap();
        prop_assert_eq!(back, s);
        let space = SpaceKind::Basis {
            functions: vec![BasisFn::Constant, BasisFn::Step { at: cut }, BasisFn::Cos { freq: c }],
        };
        let back: SpaceKind = space.to_string().parse().unwrap();
        prop_assert_eq!(back, space);
    }
}

proptest! {
    // every case runs the oracle's quadrature, so fewer of them
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn true_regression_minimizes_v_under_homoskedastic_noise(
        raw in prop::collection::vec(-1.0f64..1.0, 2),
        id in prop::sample::select(vec!["gaussian", "laplace", "uniform", "split_uniform", "cauchy"]),
    ) {
        let m = model(id);
        let f = m.hypothesis(raw).unwrap();
        let v_star = entropy(&m, &m.f_star).unwrap().v;
        let v = entropy(&m, &f).unwrap().v;
        prop_assert!(v_star <= v + 1e-9, "{id}: V(f*) = {v_star} > V(f) = {v}");
    }

    #[test]
    fn true_regression_minimizes_the_information_error(
        raw in prop::collection::vec(-1.0f64..1.0, 2),
        id in prop::sample::select(vec!["gaussian", "laplace"]),
    ) {
        let m = model(id);
        let f = m.hypothesis(raw).unwrap();
        for h in [0.5, 1.0, 2.0] {
            let at_star = info_error_true(&m, &m.f_star, h).unwrap();
            let at_f = info_error_true(&m, &f, h).unwrap();
            prop_assert!(at_star <= at_f + 1e-9, "{id} h={h}: {at_star} > {at_f}");
        }
    }

    #[test]
    fn counterexample_excess_controls_the_distance(raw in prop::collection::vec(-1.0f64..1.0, 4)) {
        // linear on each input interval, with a jump between them
        let space = SpaceKind::Basis {
            functions: vec![
                BasisFn::Constant,
                BasisFn::Linear { lo: 0.0, hi: 0.5 },
                BasisFn::Linear { lo: 1.0, hi: 1.5 },
                BasisFn::Step { at: 0.75 },
            ],
        };
        let bound = 1.0;
        let f = Hypothesis::new(space, scaled(raw, bound), bound).unwrap();
        // mean and centered square of a linear piece over an interval of mass ½
        let piece = |a: f64, b: f64| (0.5 * (a + b), 0.5 * (b - a) * (b - a) / 12.0);
        let (m1, c1) = piece(f.eval(0.0), f.eval(0.5));
        let (m2, c2) = piece(f.eval(1.0), f.eval(1.5));
        let gap = (m1 - m2).abs() - 1.0;
        let c = 1.0 / (400.0 * PI * PI * bound.powi(3));
        let excess = entropy(&model("counterexample"), &f).unwrap().v - CX_OPTIMAL_V;
        prop_assert!(excess >= c * (gap * gap + c1 + c2) - 1e-12, "{excess} vs {}", c * (gap * gap + c1 + c2));
    }

    #[test]
    fn heavy_tailed_characteristic_functions_match_quadrature(
        xi in -6.0f64..6.0,
        noise in prop::sample::select(vec![
            NoiseFamily::Cauchy { gamma: 0.7 },
            NoiseFamily::Stable { gamma: 1.0, alpha: 1.5 },
            NoiseFamily::Linnik { lambda: 1.0, alpha: 1.5 },
            NoiseFamily::CenteredExponential { rate: 2.0 },
        ]),
    ) {
        let exact = noise.char_fn(xi, 0.5);
        let quad = noise.char_fn_quadrature(xi, 0.5, 1e-9).unwrap();
        prop_assert!((exact - quad).norm() < 1e-6, "{noise:?} at {xi}: {exact} vs {quad}");
    }
}

fn all_noises() -> Vec<NoiseFamily> {
    vec![
        NoiseFamily::Gaussian { sigma: 1.3 },
        NoiseFamily::Laplace { scale: 0.8 },
        NoiseFamily::Uniform { half_width: 0.5 },
        NoiseFamily::SplitUniform,
        NoiseFamily::Cauchy { gamma: 1.0 },
        NoiseFamily::Stable { gamma: 1.0, alpha: 1.5 },
        NoiseFamily::Linnik { lambda: 1.0, alpha: 1.5 },
        NoiseFamily::CenteredExponential { rate: 1.5 },
        NoiseFamily::TwoInterval,
    ]
}

#[test]
fn samplers_pass_kolmogorov_smirnov() {
    let n = 4000;
    // 0.1% critical value of the one-sample statistic
    let critical = 1.95 / (n as f64).sqrt();
    for (k, noise) in all_noises().into_iter().enumerate() {
        for x in [0.25f64, 1.25] {
            let mut rng = stream(2024, k as u64, x.to_bits());
            let mut draws: Vec<f64> = (0..n).map(|_| noise.sample(x, &mut rng)).collect();
            draws.sort_by(f64::total_cmp);
            // the statistic at 39 sample quantiles; stable and Linnik CDFs are
            // integrals, so evaluating all n of them would be slow
            let d = (1..40)
                .map(|q| {
                    let i = q * n / 40;
                    let c = noise.cdf(draws[i], x);
                    (c - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - c)
                })
                .fold(0.0, f64::max);
            assert!(d < critical, "{noise:?} at x={x}: D = {d}");
        }
    }
}

#[test]
fn empirical_characteristic_functions_agree() {
    let n = 20_000;
    for (k, noise) in all_noises().into_iter().enumerate() {
        let mut rng = stream(99, k as u64, 0);
        let x = 0.3;
        let draws: Vec<f64> = (0..n).map(|_| noise.sample(x, &mut rng)).collect();
        for xi in [0.3, 1.0, 2.5] {
            let re = draws.iter().map(|e| (xi * e).cos()).sum::<f64>() / n as f64;
            let im = -draws.iter().map(|e| (xi * e).sin()).sum::<f64>() / n as f64;
            let exact = noise.char_fn(xi, x);
            // each part is a mean of n values in [-1, 1]
            let tol = 5.0 / (n as f64).sqrt();
            assert!(
                (re - exact.re).abs() < tol && (im - exact.im).abs() < tol,
                "{noise:?} at {xi}: ({re}, {im}) vs {exact}"
            );
        }
    }
}

#[test]
fn empirical_objective_approaches_the_information_error() {
    let mut rng = stream(5, 5, 5);
    for id in ["gaussian", "uniform", "counterexample"] {
        let m = model(id);
        let f = m.hypothesis(vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]).unwrap();
        let target = info_error_true(&m, &f, 0.7).unwrap();
        let mut gaps = Vec::new();
        for n in [500, 4000] {
            let data = m.sample(n, &mut stream(7, 0, n as u64)).unwrap();
            gaps.push((empirical_info_error(&f, &data, 0.7).unwrap() - target).abs());
        }
        assert!(gaps[1] < 0.01, "{id}: {gaps:?}");
    }
}
