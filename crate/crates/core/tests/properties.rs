use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srlab::analysis::{norm_lp, Domain};
use srlab::classes::{class_membership_check, sample_class, ClassSpec, Profile};
use srlab::dictionary::{explicit_dictionary, gegenbauer_dictionary, gegenbauer_eval, Dictionary, DictionarySpec, GegenbauerParams};
use srlab::discretization::{verify_universal_discretization, DiscretizationOptions, Side};
use srlab::frequency::{build_frequency_set, FrequencyKind};
use srlab::lower_bounds::nullspace_basis;
use srlab::oracles::{oga_approximate, sigma_v, SigmaOptions};
use srlab::recovery::{sparse_ls_recover, SearchOptions, Strategy};
use srlab::workspace::{HilbertNorm, Norm, PointSet, Workspace, WorkspaceOptions};
use srlab::C64;

fn trig(lo: i64, hi: i64) -> Dictionary {
    DictionarySpec::Trig {
        dim: 1,
        frequencies: FrequencyKind::Range { lo, hi },
    }
    .build()
    .unwrap()
}

fn coefficients(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn workspace(dict: &Dictionary, m: usize, seed: u64, oversample: usize) -> Workspace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi = PointSet::random(dict, m, &mut rng).unwrap();
    Workspace::new(
        dict.clone(),
        xi,
        WorkspaceOptions {
            quadrature_resolution: None,
            oversample,
        },
    )
    .unwrap()
}

/// Expansion in the dictionary plus an exponential outside of it.
fn target(ws: &Workspace, seed: u64) -> srlab::workspace::Sampled {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = coefficients(&mut rng, ws.n());
    let a = C64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let k = 6.0 + rng.random_range(0..3) as f64;
    ws.sample_fn(|x| {
        let s: C64 = ws.dict.eval_all(x).unwrap().iter().zip(&c).map(|(p, c)| p * c).sum();
        s + a * C64::from_polar(1.0, k * x[0])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trig_parseval(seed in any::<u64>()) {
        let dict = trig(-4, 4);
        let ws = workspace(&dict, 4, 0, 0);
        let c = coefficients(&mut ChaCha8Rng::seed_from_u64(seed), dict.len());
        let f = ws.expansion(&c);
        let lhs = ws.norm(&f, Norm::L2Mu).unwrap().powi(2);
        let rhs: f64 = c.iter().map(|x| x.norm_sqr()).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
    }

    #[test]
    fn norm_lp_is_a_norm(seed in any::<u64>(), p in 1.0f64..6.0, t in -3.0f64..3.0) {
        let dict = trig(-3, 3);
        let q = dict.quadrature(None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = coefficients(&mut rng, q.nodes.len());
        let g = coefficients(&mut rng, q.nodes.len());
        let scaled: Vec<C64> = f.iter().map(|x| x * t).collect();
        let sum: Vec<C64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let nf = norm_lp(&f, &q, p).unwrap();
        prop_assert!((norm_lp(&scaled, &q, p).unwrap() - t.abs() * nf).abs() <= 1e-12 * nf.max(1.0));
        prop_assert!(norm_lp(&sum, &q, p).unwrap() <= nf + norm_lp(&g, &q, p).unwrap() + 1e-12);
    }

    #[test]
    fn mixture_measure_sandwich(seed in any::<u64>(), m in 1usize..12) {
        let dict = trig(-3, 3);
        let ws = workspace(&dict, m, seed, 0);
        let f = target(&ws, seed ^ 1);
        let mix = ws.norm(&f, Norm::L2MuXi).unwrap();
        prop_assert!(ws.norm(&f, Norm::L2Mu).unwrap() <= std::f64::consts::SQRT_2 * mix + 1e-12);
        let avg = f.on_points.iter().map(|x| x.norm_sqr()).sum::<f64>() / m as f64;
        prop_assert!(avg <= 2.0 * mix * mix + 1e-12);
    }

    #[test]
    fn certified_constant_is_sound(seed in any::<u64>(), m in 4usize..14) {
        let dict = trig(-3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = PointSet::random(&dict, m, &mut rng).unwrap();
        let r = verify_universal_discretization(&dict, &xi, 2, &DiscretizationOptions::default()).unwrap();
        let phi = dict.design(&xi.points).unwrap();
        for _ in 0..200 {
            let a = rng.random_range(0..dict.len());
            let b = (a + rng.random_range(1..dict.len())) % dict.len();
            let c = coefficients(&mut rng, 2);
            let sampled: f64 = (0..m)
                .map(|i| xi.weights[i] * (phi[(i, a)] * c[0] + phi[(i, b)] * c[1]).norm_sqr())
                .sum();
            let norm = c[0].norm_sqr() + c[1].norm_sqr();
            prop_assert!(sampled >= (r.c1 - 1e-9) * norm);
        }
    }

    #[test]
    fn lower_constant_decreases_in_v(seed in any::<u64>(), m in 3usize..12) {
        let dict = trig(-3, 3);
        let xi = PointSet::random(&dict, m, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let opts = DiscretizationOptions { side: Side::OneSided, ..Default::default() };
        let mut last = f64::INFINITY;
        for v in 1..=4 {
            let c1 = verify_universal_discretization(&dict, &xi, v, &opts).unwrap().c1;
            prop_assert!(c1 <= last + 1e-12);
            last = c1;
        }
    }

    #[test]
    fn sigma_decreases_and_vanishes_on_the_span(seed in any::<u64>()) {
        let dict = trig(-2, 2);
        let ws = workspace(&dict, 6, seed, 0);
        let f = target(&ws, seed ^ 2);
        let mut last = f64::INFINITY;
        let mut last_mix = f64::INFINITY;
        for v in 1..=dict.len() {
            let s = sigma_v(&ws, &f, v, Norm::L2Mu, &SigmaOptions::default()).unwrap().value;
            let mix = sigma_v(&ws, &f, v, Norm::L2MuXi, &SigmaOptions::default()).unwrap().value;
            prop_assert!(s <= last + 1e-12);
            prop_assert!(mix <= last_mix + 1e-12);
            last = s;
            last_mix = mix;
        }
        let c = coefficients(&mut ChaCha8Rng::seed_from_u64(seed), dict.len());
        let g = ws.expansion(&c);
        prop_assert!(sigma_v(&ws, &g, dict.len(), Norm::L2Mu, &SigmaOptions::default()).unwrap().value <= 1e-10);
    }

    #[test]
    fn norm_chain_for_sigma(seed in any::<u64>(), m in 2usize..8) {
        let dict = trig(-2, 2);
        let ws = workspace(&dict, m, seed, 8);
        let f = target(&ws, seed ^ 3);
        let opts = SigmaOptions::default();
        for v in 1..=2 {
            let s2 = sigma_v(&ws, &f, v, Norm::L2Mu, &opts).unwrap().value;
            let mix = sigma_v(&ws, &f, v, Norm::L2MuXi, &opts).unwrap().value;
            let inf = sigma_v(&ws, &f, v, Norm::Uniform, &opts).unwrap();
            prop_assert!(s2 / std::f64::consts::SQRT_2 <= mix + 1e-10);
            prop_assert!(mix <= inf.value + 1e-8);
        }
    }

    #[test]
    fn greedy_residuals_decrease_and_dominate_sigma(seed in any::<u64>()) {
        let dict = trig(-3, 3);
        let ws = workspace(&dict, 5, seed, 0);
        let f = target(&ws, seed ^ 4);
        let oga = oga_approximate(&ws, &f, 5, HilbertNorm::L2Mu).unwrap();
        for w in oga.residual_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        for v in 1..=5 {
            let exact = sigma_v(&ws, &f, v, Norm::L2Mu, &SigmaOptions::default()).unwrap().value;
            prop_assert!(oga.residual_history[v] >= exact - 1e-10);
        }
    }

    #[test]
    fn least_squares_properties(seed in any::<u64>(), m in 4usize..10) {
        let dict = trig(-3, 3);
        let ws = workspace(&dict, m, seed, 0);
        let f = target(&ws, seed ^ 5);
        let opts = SearchOptions::default();
        let exhaustive = sparse_ls_recover(&ws, &f, 2, Strategy::Exhaustive, &opts).unwrap();
        let greedy = sparse_ls_recover(&ws, &f, 2, Strategy::Greedy, &opts).unwrap();
        prop_assert!(exhaustive.residual_l2_mu <= greedy.residual_l2_mu + 1e-12);
        let u = ws.expansion(&exhaustive.dense_coefficients(dict.len()));
        let again = sparse_ls_recover(&ws, &u, 2, Strategy::Exhaustive, &opts).unwrap();
        prop_assert!(again.residual_l2_mu <= 1e-10);
    }

    #[test]
    fn samplers_saturate_their_budget(seed in any::<u64>(), r in 0.0f64..2.0, theta in 0.3f64..=1.0) {
        let dict = trig(-7, 8);
        let geg = gegenbauer_dictionary(GegenbauerParams::new(0.5, 15).unwrap(), false).unwrap();
        let step = DictionarySpec::Trig { dim: 1, frequencies: FrequencyKind::StepCross { n: 4 } }.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cases = [
            (ClassSpec::A1r { r, support: None }, &dict),
            (ClassSpec::GegWiener { alpha: 0.5, r: 1.0 + r, theta, profile: Profile::Flat }, &geg),
            (ClassSpec::GegWiener { alpha: 0.5, r: 1.0 + r, theta, profile: Profile::Critical }, &geg),
            (ClassSpec::WabA { a: 1.0 + r, b: 0.0, d: 1, max_level: 4 }, &step),
        ];
        for (spec, d) in cases {
            let c = sample_class(&spec, d, &mut rng).unwrap();
            let m = class_membership_check(&c, &spec, d).unwrap();
            prop_assert!(m.member);
            prop_assert!((m.budget - 1.0).abs() <= 1e-12, "{spec:?}: {}", m.budget);
        }
    }

    #[test]
    fn wiener_norm_dominates_grid_norm(seed in any::<u64>()) {
        let step = DictionarySpec::Trig { dim: 1, frequencies: FrequencyKind::StepCross { n: 4 } }.build().unwrap();
        let spec = ClassSpec::WabA { a: 1.0, b: 0.5, d: 1, max_level: 4 };
        let c = sample_class(&spec, &step, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let ws = workspace(&step, 3, 0, 8);
        let freqs = step.frequencies().unwrap();
        for s in 0..=4u32 {
            let block: Vec<C64> = c
                .iter()
                .zip(&freqs.indices)
                .map(|(x, k)| if srlab::frequency::block_of(k) == vec![s] { *x } else { C64::new(0.0, 0.0) })
                .collect();
            let a_norm: f64 = block.iter().map(|x| x.norm()).sum();
            let f = ws.expansion(&block);
            let grid = f.on_grid.unwrap().iter().map(|x| x.norm()).fold(0.0, f64::max);
            prop_assert!(a_norm.is_finite());
            prop_assert!(grid <= a_norm + 1e-12);
        }
    }

    #[test]
    fn nullspace_has_full_dimension(seed in any::<u64>(), m in 1usize..12) {
        let dict = trig(-3, 4);
        let xi = PointSet::random(&dict, m, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = nullspace_basis(&dict, &xi.points).unwrap();
        prop_assert!(b.dimension + m >= dict.len());
        prop_assert!(b.max_point_value <= 1e-10);
    }
}

#[test]
fn gegenbauer_maximum_is_at_the_endpoint() {
    let grid: Vec<f64> = (0..=4000).map(|k| -1.0 + k as f64 / 2000.0).collect();
    for alpha in [0.0, 0.5, 1.5] {
        let p = GegenbauerParams::new(alpha, 12).unwrap();
        let mut last = 0.0;
        for n in 0..=12 {
            let max = grid
                .iter()
                .map(|x| gegenbauer_eval(&p, n, *x).unwrap().abs())
                .fold(0.0, f64::max);
            let end = gegenbauer_eval(&p, n, 1.0).unwrap();
            assert!((max - end).abs() <= 1e-10 * end, "alpha {alpha}, n {n}");
            assert!(max >= last - 1e-12);
            last = max;
        }
    }
}

#[test]
fn frequency_sets_nest() {
    let set = |kind| {
        let s = build_frequency_set(kind, 2).unwrap();
        s.indices.into_iter().collect::<std::collections::BTreeSet<_>>()
    };
    for n in 1..6u32 {
        assert!(set(FrequencyKind::StepCross { n }).is_subset(&set(FrequencyKind::StepCross { n: n + 1 })));
    }
    for n in 1..12u64 {
        assert!(set(FrequencyKind::HyperbolicCross { n })
            .is_subset(&set(FrequencyKind::HyperbolicCross { n: n + 1 })));
    }
    let blocks: Vec<_> = srlab::frequency::levels_up_to(4, 2)
        .into_iter()
        .map(|s| set(FrequencyKind::DyadicBlock { s }))
        .collect();
    for i in 0..blocks.len() {
        for j in i + 1..blocks.len() {
            assert!(blocks[i].is_disjoint(&blocks[j]));
        }
    }
}

#[test]
fn duplicated_element_is_rejected_for_pairs() {
    let g = 8;
    let nodes: Vec<Vec<f64>> = (0..g).map(|k| vec![-1.0 + 2.0 * (k as f64 + 0.5) / g as f64]).collect();
    let first: Vec<C64> = nodes.iter().map(|x| C64::new(x[0], 0.0)).collect();
    let other: Vec<C64> = nodes.iter().map(|_| C64::new(1.0, 0.0)).collect();
    let dict = explicit_dictionary(Domain::Interval, nodes.clone(), None, vec![first.clone(), first, other]).unwrap();
    let xi = PointSet::uniform(nodes[..4].to_vec(), srlab::workspace::Provenance::User).unwrap();
    let r1 = verify_universal_discretization(&dict, &xi, 1, &DiscretizationOptions::default()).unwrap();
    assert!(r1.c1 > 0.0);
    let err = verify_universal_discretization(&dict, &xi, 2, &DiscretizationOptions::default()).unwrap_err();
    assert!(err.to_string().contains("[0, 1]"), "{err}");
}
