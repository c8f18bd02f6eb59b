use std::sync::Arc;

use proptest::prelude::*;

use reflected_fb::harness::parse_config;
use reflected_fb::operators::{
    prox_conjugate, AffineMap, BallIndicator, BoxIndicator, DenseLinearMap, GradientMap, L1Norm, LeastSquares,
    LinearMap, LipschitzMonotone, ProxFunction, ResolvableOperator, ScaledIdentity, SimplexIndicator, SquaredNorm,
    Subdifferential, ZeroFunction, ZeroMap,
};
use reflected_fb::oracles::{NoiseSpec, VarianceSchedule};
use reflected_fb::problems::{duality_gap, evaluate_gap, make_affine_inclusion, make_matrix_game, make_random_lasso};
use reflected_fb::schedules::{burn_in_n0, strongly_monotone_gamma, tau, StepSchedule};
use reflected_fb::{Matrix, Vector, ONE_PLUS_SQRT2, SQRT2_MINUS_ONE};

fn vector(dim: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-10.0..10.0f64, dim).prop_map(Vector::from_vec)
}

fn pair() -> impl Strategy<Value = (Vector, Vector)> {
    (1..8usize).prop_flat_map(|d| (vector(d), vector(d)))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v))
}

fn prox_functions(dim: usize) -> Vec<Arc<dyn ProxFunction>> {
    vec![
        Arc::new(ZeroFunction),
        Arc::new(L1Norm::new(0.7)),
        Arc::new(SquaredNorm::new(1.3)),
        Arc::new(BoxIndicator::uniform(dim, -0.5, 1.5)),
        Arc::new(BallIndicator::new(Vector::from_element(dim, 0.25), 1.2).unwrap()),
        Arc::new(SimplexIndicator::new(dim)),
    ]
}

fn maps(dim: usize, seed: u64) -> Vec<Arc<dyn LipschitzMonotone>> {
    let lasso = make_random_lasso(dim + 3, dim, 0.1, seed).unwrap();
    let design = Matrix::from_fn(dim + 2, dim, |i, j| ((i * 7 + j * 3 + seed as usize) % 5) as f64 - 2.0);
    let ls = LeastSquares::new(design, Vector::from_element(dim + 2, 1.0)).unwrap();
    vec![
        Arc::new(ZeroMap::new(dim)),
        Arc::new(ScaledIdentity::new(dim, 0.8)),
        make_affine_inclusion(dim, 0.5, 2.0, seed).unwrap().b,
        Arc::new(AffineMap::new(None, Some(Matrix::identity(dim, dim) * 2.0), Vector::zeros(dim)).unwrap()),
        Arc::new(GradientMap(Arc::new(ls))),
        Arc::new(GradientMap(lasso.h.clone())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn resolvents_are_firmly_nonexpansive((z1, z2) in pair(), gamma in 0.01..10.0f64) {
        for f in prox_functions(z1.len()) {
            let a = Subdifferential(f);
            let (j1, j2) = (a.resolvent(gamma, &z1).unwrap(), a.resolvent(gamma, &z2).unwrap());
            let dj = &j1 - &j2;
            prop_assert!(dj.dot(&(&z1 - &z2)) >= dj.norm_squared() - 1e-10, "{a:?}");
        }
    }

    #[test]
    fn resolvent_is_deterministic(z in vector(5), gamma in 0.01..10.0f64) {
        for f in prox_functions(5) {
            let a = Subdifferential(f);
            prop_assert_eq!(a.resolvent(gamma, &z).unwrap(), a.resolvent(gamma, &z).unwrap());
        }
    }

    #[test]
    fn prox_inequality((x, w) in pair()) {
        for f in prox_functions(x.len()) {
            let p = f.prox(1.0, &x).unwrap();
            // project w into the domain so value(y) is finite
            let y = f.prox(1.0, &w).unwrap();
            prop_assert!(f.value(&p) - f.value(&y) <= (&y - &p).dot(&(&p - &x)) + 1e-10, "{f:?}");
        }
    }

    #[test]
    fn moreau_reconstruction(z in (1..8usize).prop_flat_map(vector), gamma in 0.05..20.0f64) {
        for f in prox_functions(z.len()) {
            let rebuilt = prox_conjugate(f.as_ref(), gamma, &z).unwrap() + f.prox(1.0 / gamma, &(&z / gamma)).unwrap() * gamma;
            prop_assert!((rebuilt - &z).amax() <= 1e-12 * (1.0 + z.amax()), "{f:?}");
        }
    }

    #[test]
    fn conjugate_closed_forms(z in (1..8usize).prop_flat_map(vector), gamma in 0.05..20.0f64, w in 0.1..5.0f64) {
        let l1 = prox_conjugate(&L1Norm::new(w), gamma, &z).unwrap();
        prop_assert!((l1 - z.map(|c| c.clamp(-w, w))).amax() <= 1e-12 * (1.0 + z.amax()));
        let sq = prox_conjugate(&SquaredNorm::new(w), gamma, &z).unwrap();
        prop_assert!((sq - &z * (w / (w + gamma))).amax() <= 1e-12 * (1.0 + z.amax()));
        prop_assert!(prox_conjugate(&ZeroFunction, gamma, &z).unwrap().amax() <= 1e-12 * (1.0 + z.amax()));
    }

    #[test]
    fn maps_are_lipschitz_and_monotone((x, y) in pair(), seed in 0..50u64) {
        for b in maps(x.len(), seed) {
            let (bx, by) = (b.eval(&x).unwrap(), b.eval(&y).unwrap());
            let d = &x - &y;
            prop_assert!((&bx - &by).norm() <= (b.lipschitz() + 1e-9) * d.norm(), "{b:?}");
            prop_assert!((&bx - &by).dot(&d) >= b.strong_monotonicity() * d.norm_squared() - 1e-10, "{b:?}");
        }
    }

    #[test]
    fn adjoint_identity(k in (1..8usize, 1..8usize).prop_flat_map(|(m, n)| (matrix(m, n), vector(n), vector(m)))) {
        let (m, x, v) = k;
        let k = DenseLinearMap::new(m);
        let (a, b) = (k.apply(&x).unwrap().dot(&v), x.dot(&k.adjoint(&v).unwrap()));
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs())));
    }

    #[test]
    fn constant_step_below_bound_has_positive_tau(mu in 0.01..100.0f64, frac in 0.01..0.999f64) {
        let s = StepSchedule::constant(frac * SQRT2_MINUS_ONE / mu).unwrap();
        prop_assert!(tau(&s, mu, 100) > 0.0);
    }

    #[test]
    fn schedules_are_positive(g in 1e-3..10.0f64, c in 0.01..1.0f64, p in 0.0..2.0f64, n in 0..1_000_000u64) {
        for s in [
            StepSchedule::constant(g).unwrap(),
            StepSchedule::band(c, g).unwrap(),
            StepSchedule::strongly_monotone(g).unwrap(),
            StepSchedule::power_decay(g, p).unwrap(),
        ] {
            prop_assert!(s.gamma(n) > 0.0);
        }
    }

    #[test]
    fn strongly_monotone_steps(nu in 1e-3..100.0f64, n in 0..1_000_000u64) {
        let g = strongly_monotone_gamma(nu, n).unwrap();
        prop_assert_eq!(g, 1.0 / (2.0 * nu * (n as f64 + 1.0)));
        prop_assert_eq!(StepSchedule::strongly_monotone(nu).unwrap().gamma(n), g);
        prop_assert!(strongly_monotone_gamma(nu, n + 1).unwrap() < g);
    }

    #[test]
    fn burn_in_is_the_first_integer_past_the_threshold(nu in 1e-2..10.0f64, mu in 0.0..10.0f64) {
        let threshold = 4.0 * mu * ONE_PLUS_SQRT2 / nu;
        let n0 = burn_in_n0(nu, mu) as f64;
        prop_assert!(n0 > threshold);
        prop_assert!(n0 - 1.0 <= threshold);
    }

    #[test]
    fn same_seed_same_draws(seed in any::<u64>(), c in 0.0..4.0f64) {
        let p = make_affine_inclusion(4, 1.0, 2.0, 3).unwrap();
        let noise = NoiseSpec::Gaussian { variance: VarianceSchedule::Constant { c } };
        let mut o1 = noise.build(p.b.clone(), None, seed, 0).unwrap();
        let mut o2 = noise.build(p.b.clone(), None, seed, 0).unwrap();
        let y = Vector::from_element(4, 0.5);
        for n in 0..20 {
            prop_assert_eq!(o1.draw(n, &y).unwrap(), o2.draw(n, &y).unwrap());
        }
    }

    #[test]
    fn exact_draws_equal_the_map(y in vector(6), seed in any::<u64>(), n in any::<u64>()) {
        let p = make_affine_inclusion(6, 0.3, 1.5, 9).unwrap();
        let mut o = NoiseSpec::Exact.build(p.b.clone(), None, seed, 0).unwrap();
        prop_assert_eq!(o.draw(n, &y).unwrap(), p.b.eval(&y).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn generated_zeros_are_fixed_points(dim in 2..12usize, nu in 0.0..3.0f64, skew in 0.5..6.0f64, seed in any::<u64>()) {
        let p = make_affine_inclusion(dim, nu, skew, seed).unwrap();
        let zero = p.known_zero.clone().unwrap();
        let scale = 1.0 + zero.norm();
        prop_assert!(p.fixed_point_residual(&zero, 0.5 / p.mu).unwrap() <= 1e-9 * scale);
        prop_assert!((p.mu - skew).abs() <= 1e-6 * skew);
    }

    #[test]
    fn lasso_zero_is_a_fixed_point(rows in 5..30usize, cols in 2..8usize, seed in any::<u64>()) {
        let c = make_random_lasso(rows, cols, 0.1, seed).unwrap();
        let p = c.as_inclusion().unwrap();
        prop_assert!(p.fixed_point_residual(p.known_zero.as_ref().unwrap(), 0.5 / p.mu).unwrap() <= 1e-9);
    }

    #[test]
    fn gap_matches_vertex_enumeration(
        (m, n, payoff, xr, vr) in (1..5usize, 1..5usize).prop_flat_map(|(m, n)| {
            (Just(m), Just(n), matrix(m, n), prop::collection::vec(0.0..1.0f64, m), prop::collection::vec(0.0..1.0f64, n))
        })
    ) {
        let game = make_matrix_game(payoff).unwrap();
        let normalize = |w: Vec<f64>| {
            let w: Vec<f64> = w.iter().map(|c| c + 1e-3).collect();
            let s: f64 = w.iter().sum();
            Vector::from_iterator(w.len(), w.iter().map(|c| c / s))
        };
        let (x, v) = (normalize(xr), normalize(vr));
        let vertex = |k: usize, d: usize| Vector::from_fn(d, |i, _| if i == k { 1.0 } else { 0.0 });
        let sup_v = (0..n).map(|j| evaluate_gap(&game, &x, &vertex(j, n)).unwrap()).fold(f64::NEG_INFINITY, f64::max);
        let inf_x = (0..m).map(|i| evaluate_gap(&game, &vertex(i, m), &v).unwrap()).fold(f64::INFINITY, f64::min);
        let gap = duality_gap(&game, &x, &v).unwrap();
        prop_assert!(gap >= 0.0);
        prop_assert!((gap - (sup_v - inf_x)).abs() <= 1e-10 * (1.0 + gap.abs()));
    }

    #[test]
    fn digest_ignores_key_order(budget in 0..1000u64, nu in 0.1..5.0f64, seed in any::<u32>()) {
        let a = format!(
            r#"{{"problem": {{"kind": "random_affine", "dim": 3, "nu": {nu}, "skew_scale": 1.0, "seed": {seed}}}, "solver": "rfb", "budget": {budget}}}"#
        );
        let b = format!(
            r#"{{"budget": {budget}, "solver": "rfb", "problem": {{"seed": {seed}, "skew_scale": 1.0, "nu": {nu}, "dim": 3, "kind": "random_affine"}}}}"#
        );
        prop_assert_eq!(parse_config(&a).unwrap().digest().unwrap(), parse_config(&b).unwrap().digest().unwrap());
    }
}
