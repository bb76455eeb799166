use loclearn::Error;
use loclearn::geometry::{sup_distance, AxisBox};
use loclearn::io::{read_dataset_from, write_dataset_to, Dataset};
use loclearn::lipschitz::{erm_fit_with, random_lipschitz_fn, ErmProblem, ErmSolver, ExtensionRule, LIPSCHITZ_TOLERANCE};
use loclearn::nw::{check_kernel_stability, importance_ratio_bound, prediction_probs, DiagonalTransform, EIGEN_HI, EIGEN_LO};
use loclearn::partition::preprocess;
use proptest::prelude::*;
use rand::SeedableRng;

fn point(dims: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, dims)
}

fn points(dims: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(point(dims), n)
}

fn transform(dims: usize) -> impl Strategy<Value = DiagonalTransform> {
    prop::collection::vec(EIGEN_LO..=EIGEN_HI, dims).prop_map(|e| DiagonalTransform::new(e).unwrap())
}

fn rule() -> impl Strategy<Value = ExtensionRule> {
    prop_oneof![
        Just(ExtensionRule::UpperMcshane),
        Just(ExtensionRule::LowerMcshane),
        Just(ExtensionRule::Midpoint)
    ]
}

fn labeled(dims: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    prop::collection::vec((point(dims), prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64]), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prediction_probs_are_a_distribution((s, q, a) in (1usize..=3).prop_flat_map(|d| (points(d, 1..15), point(d), transform(d)))) {
        let p = prediction_probs(&a, &s, &q).unwrap();
        prop_assert_eq!(p.len(), s.len());
        prop_assert!(p.iter().all(|&v| v > 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_probs_follow_a_permutation((s, q, a, k) in (1usize..=3).prop_flat_map(|d| (points(d, 2..12), point(d), transform(d), 1usize..12))) {
        let k = k % s.len();
        let mut rotated = s.clone();
        rotated.rotate_left(k);
        let p = prediction_probs(&a, &s, &q).unwrap();
        let mut r = prediction_probs(&a, &rotated, &q).unwrap();
        r.rotate_right(k);
        for (x, y) in p.iter().zip(&r) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(*y));
        }
    }

    #[test]
    fn kernel_ratio_respects_its_bounds((s, q, a1, a2, i) in (1usize..=3).prop_flat_map(|d| (points(d, 1..10), point(d), transform(d), transform(d), 0usize..10))) {
        let i = i % s.len();
        let (ratio, bound) = check_kernel_stability(&a1, &a2, &s, i, &q).unwrap();
        prop_assert!(ratio <= bound && ratio >= 1.0 / bound);
        let base = prediction_probs(&DiagonalTransform::identity(s[0].len()), &s, &q).unwrap()[i];
        let p = prediction_probs(&a1, &s, &q).unwrap()[i];
        prop_assert!(p <= importance_ratio_bound(EIGEN_LO, EIGEN_HI) * base);
    }

    #[test]
    fn extensions_stay_lipschitz_and_interpolate(
        seed in any::<u64>(),
        dims in 1usize..=3,
        l in 0.5..30.0f64,
        rule in rule(),
        probes in points(3, 10..20),
    ) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = random_lipschitz_fn(dims, l, 15, rule, &mut rng).unwrap();
        for a in f.anchors() {
            prop_assert!((f.evaluate(&a.point) - a.value).abs() <= LIPSCHITZ_TOLERANCE);
        }
        let xs: Vec<&[f64]> = probes.iter().map(|p| &p[..dims]).collect();
        for x in &xs {
            let v = f.evaluate(x);
            prop_assert!((0.0..=1.0).contains(&v));
            for y in &xs {
                prop_assert!((v - f.evaluate(y)).abs() <= l * sup_distance(x, y) + LIPSCHITZ_TOLERANCE);
            }
        }
    }

    #[test]
    fn erm_fit_is_feasible((samples, l) in ((1usize..=3).prop_flat_map(|d| labeled(d, 1..40)), 0.5..25.0f64)) {
        let dims = samples[0].0.len();
        let p = ErmProblem::new(samples, l, AxisBox::unit(dims)).unwrap();
        let f = erm_fit_with(&p, ErmSolver::Auto).unwrap();
        let a = f.anchors();
        for i in 0..a.len() {
            prop_assert!((0.0..=1.0).contains(&a[i].value));
            for j in 0..a.len() {
                let excess = a[i].value - a[j].value - l * sup_distance(&a[i].point, &a[j].point);
                prop_assert!(excess <= 1e-7, "pair {} {} excess {}", i, j, excess);
            }
        }
    }

    #[test]
    fn erm_solvers_reach_the_same_loss((samples, l) in (labeled(1, 1..50), 0.0..40.0f64)) {
        let p = ErmProblem::new(samples, l, AxisBox::unit(1)).unwrap();
        let chain = p.objective(&erm_fit_with(&p, ErmSolver::Chain).unwrap());
        let flow = p.objective(&erm_fit_with(&p, ErmSolver::Flow).unwrap());
        let lp = p.objective(&erm_fit_with(&p, ErmSolver::LinearProgram).unwrap());
        prop_assert!((chain - flow).abs() < 1e-6, "chain {} flow {}", chain, flow);
        prop_assert!((chain - lp).abs() < 1e-6, "chain {} lp {}", chain, lp);
    }

    #[test]
    fn flow_matches_lp_in_two_dimensions((samples, l) in (labeled(2, 1..40), 0.5..25.0f64)) {
        let p = ErmProblem::new(samples, l, AxisBox::unit(2)).unwrap();
        let flow = p.objective(&erm_fit_with(&p, ErmSolver::Flow).unwrap());
        let lp = p.objective(&erm_fit_with(&p, ErmSolver::LinearProgram).unwrap());
        prop_assert!((flow - lp).abs() < 1e-6, "flow {} lp {}", flow, lp);
    }

    #[test]
    fn located_cells_contain_their_points(
        seed in any::<u64>(),
        dims in 1usize..=2,
        l in 2.0..120.0f64,
        eps in 0.1..0.9f64,
        xs in points(2, 1..30),
    ) {
        let p = match preprocess(l, eps, dims, seed) {
            Err(Error::DegenerateScale { .. }) => return Ok(()),
            r => r.unwrap(),
        };
        for x in &xs {
            let x = &x[..dims];
            let cell = p.locate(x).unwrap();
            prop_assert!(p.cell_box(&cell).contains(x));
        }
    }

    #[test]
    fn partitions_survive_json(seed in any::<u64>(), dims in 1usize..=2, l in 2.0..120.0f64, eps in 0.1..0.9f64) {
        let p = match preprocess(l, eps, dims, seed) {
            Err(Error::DegenerateScale { .. }) => return Ok(()),
            r => r.unwrap(),
        };
        let back = loclearn::partition::Partition::from_json(&p.to_json().unwrap()).unwrap();
        prop_assert_eq!(p, back);
    }

    #[test]
    fn datasets_survive_csv((pts, labels) in (1usize..=3).prop_flat_map(|d| points(d, 1..20)).prop_flat_map(|p| {
        let n = p.len();
        (Just(p), prop::option::of(prop::collection::vec(0.0..=1.0f64, n)))
    })) {
        let ds = Dataset { points: pts, labels };
        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &ds).unwrap();
        prop_assert_eq!(read_dataset_from(buf.as_slice()).unwrap(), ds);
    }
}
