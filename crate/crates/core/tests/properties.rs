use proptest::prelude::*;
use rand::Rng;

use qdyn_core::channel::{
    choi_from_kraus, choi_of, dual, is_cp, is_tp, kraus_from_choi, random_unitary_mix, superop_from_choi,
    tensor_superop, Superoperator,
};
use qdyn_core::closed_forms::{
    lie_split, pump_cool_solution, pump_cool_spec, pure_decoherence_map, pure_decoherence_spec, qubit_dissipators,
    random_unitary_map, random_unitary_spec, trace_gen_solution, wilcox_final_map, OmegaFamily, PumpCoolParams,
    TraceGenParams, WilcoxPair,
};
use qdyn_core::evolution::{commutative_evolve, semigroup_evolve, t_ordered_evolve, TimeGrid};
use qdyn_core::generator::{dual_generator, gksl_build, is_gksl, GkslSpec, Jump, TimeLocalGenerator};
use qdyn_core::linalg::{self, pauli, ComplexMatrix, C64};
use qdyn_core::markovianity::{blp_report, classify, divisibility_report, legitimacy_report, Tier, Tolerances};
use qdyn_core::random::{
    ginibre, haar_unitary, random_cp, random_cptp, random_density_matrix, random_hermitian, seeded, SeededRng,
};
use qdyn_core::rates::RateFunction;
use qdyn_core::report::{self, RunOptions};
use qdyn_core::scenario::{self, Preset, PRESETS};
use qdyn_core::state::{bloch_to_state, state_to_bloch, BlochVector};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn nonnegative_rate(rng: &mut SeededRng) -> RateFunction {
    match rng.random_range(0..3) {
        0 => RateFunction::constant(rng.random_range(0.0..1.5)),
        1 => RateFunction::exponential(rng.random_range(0.0..1.5), rng.random_range(0.0..1.0)),
        _ => RateFunction::polynomial(vec![rng.random_range(0.0..1.0), rng.random_range(0.0..0.5)]),
    }
}

fn any_rate(rng: &mut SeededRng) -> RateFunction {
    match rng.random_range(0..3) {
        0 => RateFunction::constant(rng.random_range(-1.0..1.5)),
        1 => RateFunction::exponential(rng.random_range(-1.0..1.5), rng.random_range(0.0..1.0)),
        _ => RateFunction::sinusoidal(rng.random_range(-1.0..1.0), rng.random_range(0.5..3.0), rng.random_range(0.0..6.0)),
    }
}

fn random_spec(n: usize, rng: &mut SeededRng, rate: fn(&mut SeededRng) -> RateFunction) -> GkslSpec {
    let jumps = (0..rng.random_range(1..4))
        .map(|_| Jump {
            operator: ginibre(n, rng).scale_re(0.5),
            rate: rate(rng),
        })
        .collect();
    GkslSpec::new(random_hermitian(n, rng).scale_re(0.5), jumps).unwrap()
}

/// `Λ_t ≈ 1 + ∫L + ∫∫LL + ∫∫∫LLL`, each level by trapezoid on `m` substeps.
fn dyson_three_terms(generator: &dyn TimeLocalGenerator, t: f64, m: usize) -> Superoperator {
    let n = generator.dim();
    let h = t / m as f64;
    let ls: Vec<Superoperator> = (0..=m).map(|k| generator.at(k as f64 * h)).collect();
    let mut level = vec![Superoperator::identity(n); m + 1];
    let mut total = Superoperator::identity(n);
    for _ in 0..3 {
        let integrand: Vec<Superoperator> = ls.iter().zip(&level).map(|(l, d)| l.compose(d)).collect();
        let mut next = vec![Superoperator::zero(n)];
        for k in 1..=m {
            let piece = (&integrand[k - 1] + &integrand[k]).scale(0.5 * h);
            next.push(&next[k - 1] + &piece);
        }
        total = &total + &next[m];
        level = next;
    }
    total
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn trace_norm_is_a_norm(seed in any::<u64>(), c in -3.0f64..3.0) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..5);
        let (a, b) = (ginibre(n, &mut rng), ginibre(n, &mut rng));
        let na = linalg::trace_norm(&a).unwrap();
        let nb = linalg::trace_norm(&b).unwrap();
        prop_assert!((linalg::trace_norm(&a.scale_re(c)).unwrap() - c.abs() * na).abs() <= 1e-10);
        prop_assert!(linalg::trace_norm(&(&a + &b)).unwrap() <= na + nb + 1e-10);
    }

    #[test]
    fn partial_traces_keep_the_trace(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let (n, m) = (rng.random_range(1..4), rng.random_range(1..4));
        let x = ginibre(n * m, &mut rng);
        let tr = x.trace();
        prop_assert!((linalg::partial_trace_first(&x, n, m).unwrap().trace() - tr).norm() <= 1e-12);
        prop_assert!((linalg::partial_trace_second(&x, n, m).unwrap().trace() - tr).norm() <= 1e-12);
    }

    #[test]
    fn exp_of_commuting_sum_factorizes(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..5);
        let u = haar_unitary(n, &mut rng);
        let diag = |rng: &mut SeededRng| {
            let d: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            &(&u * &ComplexMatrix::diag(&d)) * &u.adjoint()
        };
        let (a, b) = (diag(&mut rng), diag(&mut rng));
        let lhs = linalg::matrix_exp(&(&a + &b)).unwrap();
        let rhs = &linalg::matrix_exp(&a).unwrap() * &linalg::matrix_exp(&b).unwrap();
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-9);
    }

    #[test]
    fn vectorize_round_trip(seed in any::<u64>(), c in -2.0f64..2.0) {
        let mut rng = seeded(seed);
        let n = rng.random_range(1..5);
        let (a, b) = (ginibre(n, &mut rng), ginibre(n, &mut rng));
        prop_assert_eq!(linalg::devectorize(&linalg::vectorize(&a)).unwrap(), a.clone());
        let lin: Vec<C64> = linalg::vectorize(&a).iter().zip(linalg::vectorize(&b)).map(|(x, y)| x * c + y).collect();
        let direct = linalg::vectorize(&(&a.scale_re(c) + &b));
        prop_assert!(lin.iter().zip(&direct).all(|(x, y)| (x - y).norm() <= 1e-14));
    }
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn bloch_round_trip(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        let v = BlochVector::new(x, y, z);
        prop_assume!(v.norm() <= 1.0);
        let back = state_to_bloch(&bloch_to_state(v).unwrap()).unwrap();
        prop_assert!(back.distance(&v) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(config(500))]

    #[test]
    fn cptp_maps_contract_trace_norm(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..4);
        let phi = random_cptp(n, &mut rng);
        let x = random_hermitian(n, &mut rng);
        let after = linalg::trace_norm(&phi.apply(&x).unwrap()).unwrap();
        prop_assert!(after <= linalg::trace_norm(&x).unwrap() + 1e-10);
    }

    #[test]
    fn choi_round_trip(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(1..4);
        let phi = Superoperator::from_matrix(n, ginibre(n * n, &mut rng)).unwrap();
        prop_assert!(superop_from_choi(&choi_of(&phi)).distance(&phi) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn kraus_round_trip(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(1..4);
        let rank = rng.random_range(1..=n * n);
        let c = choi_of(&random_cp(n, rank, &mut rng));
        let k = kraus_from_choi(&c, 1e-10).unwrap();
        prop_assert!((choi_from_kraus(&k).matrix() - c.matrix()).max_abs() <= 1e-10);
        prop_assert!(k.rank() <= n * n);
    }

    #[test]
    fn channels_induce_stochastic_matrices(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..4);
        let transfer = |phi: &Superoperator| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| (0..n).map(|j| phi.apply(&ComplexMatrix::unit(n, j, j)).unwrap()[(i, i)].re).collect())
                .collect()
        };
        let t = transfer(&random_cptp(n, &mut rng));
        for j in 0..n {
            prop_assert!((0..n).all(|i| t[i][j] >= -1e-12));
            prop_assert!(((0..n).map(|i| t[i][j]).sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let mut p: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        let us: Vec<ComplexMatrix> = (0..3).map(|_| haar_unitary(n, &mut rng)).collect();
        let t = transfer(&random_unitary_mix(&p, &us).unwrap());
        for i in 0..n {
            prop_assert!(((0..n).map(|j| t[i][j]).sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dual_is_an_involution(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(1..4);
        let phi = Superoperator::from_matrix(n, ginibre(n * n, &mut rng)).unwrap();
        prop_assert_eq!(dual(&dual(&phi)), phi.clone());
        prop_assert_eq!(dual_generator(&dual_generator(&phi)), phi);
    }

    #[test]
    fn tensor_of_cp_maps_is_cp(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let a = random_cp(2, rng.random_range(1..5), &mut rng);
        let b = random_cp(2, rng.random_range(1..5), &mut rng);
        prop_assert!(is_cp(&tensor_superop(&a, &b), 1e-10).unwrap().is_cp());
    }

    #[test]
    fn generators_annihilate_trace(seed in any::<u64>(), t in 0.0f64..3.0) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..4);
        let spec = random_spec(n, &mut rng, any_rate);
        let x = ginibre(n, &mut rng);
        prop_assert!(gksl_build(&spec, t).apply(&x).unwrap().trace().norm() <= 1e-12);
    }

    #[test]
    fn nonnegative_rates_give_gksl(seed in any::<u64>(), t in 0.0f64..3.0) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..4);
        let spec = random_spec(n, &mut rng, nonnegative_rate);
        prop_assert!(is_gksl(&gksl_build(&spec, t), 1e-10).is_gksl());
    }

    #[test]
    fn commutator_form_of_dissipator_agrees(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..4);
        let v = ginibre(n, &mut rng);
        let vd = v.adjoint();
        let commutator_form = Superoperator::from_fn(n, |rho| {
            let a = linalg::commutator(&v, &(rho * &vd));
            let b = linalg::commutator(&(&v * rho), &vd);
            (&a + &b).scale_re(0.5)
        });
        let spec = GkslSpec::dissipative(n, vec![(v, RateFunction::constant(1.0))]).unwrap();
        prop_assert!(gksl_build(&spec, 0.0).distance(&commutator_form) <= 1e-13);
    }
}

proptest! {
    #![proptest_config(config(50))]

    #[test]
    fn semigroups_of_gksl_generators_are_channels(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..4);
        let l = gksl_build(&random_spec(n, &mut rng, |r| RateFunction::constant(r.random_range(0.0..1.5))), 0.0);
        for t in [0.1, 1.0, 10.0] {
            let m = l.scale(t).exp();
            prop_assert!(is_cp(&m, 1e-9).unwrap().is_cp());
            prop_assert!(is_tp(&m, 1e-9));
        }
    }

    #[test]
    fn nonnegative_rates_give_cptp_trajectories(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..4);
        let spec = random_spec(n, &mut rng, nonnegative_rate);
        let traj = t_ordered_evolve(&spec, TimeGrid::new(2.0, 40).unwrap());
        for m in traj.maps().iter().chain(traj.step_propagators()) {
            prop_assert!(is_tp(m, 1e-9));
            prop_assert!(is_cp(m, 1e-8).unwrap().is_cp());
        }
    }

    #[test]
    fn trace_preserved_for_any_rate_sign(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..4);
        let spec = random_spec(n, &mut rng, any_rate);
        let traj = t_ordered_evolve(&spec, TimeGrid::new(2.0, 40).unwrap());
        prop_assert!(traj.maps().iter().all(|m| is_tp(m, 1e-10)));
    }

    #[test]
    fn semigroup_composition(seed in any::<u64>(), i in 1usize..10, j in 1usize..10) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..4);
        let l = gksl_build(&random_spec(n, &mut rng, |r| RateFunction::constant(r.random_range(0.0..1.5))), 0.0);
        let traj = semigroup_evolve(&l, TimeGrid::new(2.0, 20).unwrap());
        let composed = traj.map(i).compose(traj.map(j));
        prop_assert!(composed.distance(traj.map(i + j)) <= 1e-10);
    }

    #[test]
    fn t_ordered_is_second_order(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let gamma = RateFunction::exponential(rng.random_range(0.2..1.5), rng.random_range(0.2..1.5));
        let exact = pure_decoherence_map(&gamma, 1.0);
        // The time-dependent part needs a noncommuting Hamiltonian to be a real test.
        let spec = GkslSpec::new(
            pauli::x().scale_re(0.3),
            vec![Jump { operator: pauli::z(), rate: gamma.scaled(0.5) }],
        ).unwrap();
        let reference = t_ordered_evolve(&spec, TimeGrid::new(1.0, 3200).unwrap());
        let e1 = t_ordered_evolve(&spec, TimeGrid::new(1.0, 50).unwrap()).last().distance(reference.last());
        let e2 = t_ordered_evolve(&spec, TimeGrid::new(1.0, 100).unwrap()).last().distance(reference.last());
        prop_assert!((3.5..=4.5).contains(&(e1 / e2)), "ratio {}", e1 / e2);
        let pure = pure_decoherence_spec(&gamma);
        let e1 = t_ordered_evolve(&pure, TimeGrid::new(1.0, 10).unwrap()).last().distance(&exact);
        let e2 = t_ordered_evolve(&pure, TimeGrid::new(1.0, 20).unwrap()).last().distance(&exact);
        prop_assert!((3.5..=4.5).contains(&(e1 / e2)), "ratio {}", e1 / e2);
    }

    #[test]
    fn dyson_series_matches_to_fourth_order(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let spec = random_spec(2, &mut rng, nonnegative_rate);
        let err = |t: f64| {
            let exact = t_ordered_evolve(&spec, TimeGrid::new(t, 400).unwrap());
            dyson_three_terms(&spec, t, 4000).distance(exact.last())
        };
        let (e1, e2) = (err(0.2), err(0.1));
        prop_assert!((10.0..=22.0).contains(&(e1 / e2)), "ratio {} ({e1:e}, {e2:e})", e1 / e2);
    }

    #[test]
    fn classifier_tiers_are_nested(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let spec = random_spec(2, &mut rng, any_rate);
        let c = classify(&spec, TimeGrid::new(2.0, 100).unwrap(), Tolerances::default());
        if c.tier >= Tier::LegitimateNonMarkovian {
            prop_assert!(c.legitimacy.is_legitimate());
        }
        if c.tier >= Tier::MarkovianDivisible {
            prop_assert!(c.divisibility.is_divisible());
        }
    }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn divisible_dynamics_is_blp_monotone(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..4);
        let spec = random_spec(n, &mut rng, nonnegative_rate);
        let traj = t_ordered_evolve(&spec, TimeGrid::new(2.0, 50).unwrap());
        prop_assert!(divisibility_report(&traj, 1e-7).is_divisible());
        prop_assert!(blp_report(&traj, 20, seed, 1e-7).is_monotone());
    }
}

proptest! {
    #![proptest_config(config(50))]

    #[test]
    fn extended_trace_norm_non_increasing(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..4);
        let traj = t_ordered_evolve(&random_spec(n, &mut rng, nonnegative_rate), TimeGrid::new(2.0, 50).unwrap());
        let x = random_hermitian(n * n, &mut rng);
        let norms = qdyn_core::markovianity::extended_trace_norm_series(&traj, &x, n).unwrap();
        let h = traj.grid().h();
        prop_assert!(norms.windows(2).all(|w| (w[1] - w[0]) / h <= 1e-7));
    }

    #[test]
    fn pure_decoherence_closed_form_matches_engine(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let gamma = any_rate(&mut rng);
        let grid = TimeGrid::new(2.0, 20).unwrap();
        let traj = commutative_evolve(&pure_decoherence_spec(&gamma), grid, Some(1e-10)).unwrap();
        for k in 0..=20 {
            prop_assert!(traj.map(k).distance(&pure_decoherence_map(&gamma, grid.t(k))) <= 1e-10);
        }
    }

    #[test]
    fn random_unitary_closed_form_matches_engine(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let rates = [any_rate(&mut rng), any_rate(&mut rng), any_rate(&mut rng)];
        let grid = TimeGrid::new(2.0, 20).unwrap();
        let traj = commutative_evolve(&random_unitary_spec(&rates), grid, Some(1e-10)).unwrap();
        for k in 0..=20 {
            prop_assert!(traj.map(k).distance(&random_unitary_map(&rates, grid.t(k)).map) <= 1e-10);
        }
    }

    #[test]
    fn pump_cool_closed_form_matches_engine(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let p = PumpCoolParams {
            omega: rng.random_range(-2.0..2.0),
            gamma1: rng.random_range(0.0..2.0),
            gamma2: rng.random_range(0.0..2.0),
            gamma: rng.random_range(0.0..1.0),
        };
        let grid = TimeGrid::new(3.0, 30).unwrap();
        let traj = semigroup_evolve(&gksl_build(&pump_cool_spec(&p), 0.0), grid);
        let rho0 = random_density_matrix(2, &mut rng);
        for k in 0..=30 {
            let engine = traj.map(k).apply(rho0.matrix()).unwrap();
            let closed = pump_cool_solution(&p, &rho0, grid.t(k)).unwrap();
            prop_assert!((&engine - closed.matrix()).max_abs() <= 1e-10);
        }
    }

    #[test]
    fn trace_generator_closed_form_matches_engine(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let gamma = nonnegative_rate(&mut rng);
        let base = random_density_matrix(2, &mut rng).into_matrix();
        let direction = &random_density_matrix(2, &mut rng).into_matrix() - &base;
        let omega = OmegaFamily::Pulse { base, direction, amplitude: 0.5, frequency: 1.0, power: 1 };
        let grid = TimeGrid::new(2.0, 400).unwrap();
        let p = TraceGenParams::new(gamma, omega, &grid).unwrap();
        let traj = t_ordered_evolve(&p, grid);
        let rho0 = random_density_matrix(2, &mut rng);
        for k in (0..=400).step_by(40) {
            let engine = traj.map(k).apply(rho0.matrix()).unwrap();
            let closed = trace_gen_solution(&p, &rho0, grid.t(k)).unwrap();
            prop_assert!((&engine - &closed.rho).max_abs() <= 1e-5);
        }
    }

    #[test]
    fn wilcox_final_map_matches_engine(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let w = WilcoxPair::new(nonnegative_rate(&mut rng), nonnegative_rate(&mut rng));
        let grid = TimeGrid::new(2.0, 400).unwrap();
        let traj = t_ordered_evolve(&w.local_generator(), grid);
        for k in (40..=400).step_by(120) {
            let t = grid.t(k);
            prop_assert!(traj.map(k).distance(&w.exponent(t).exp()) <= 1e-4);
            let fm = wilcox_final_map(&|s| w.b1(s), &|s| w.b2(s), t);
            prop_assert!(fm.map.distance(traj.map(k)) <= 1e-4);
        }
    }

    #[test]
    fn lie_split_reproduces_exponential(a1 in 0.0f64..3.0, a2 in 0.0f64..3.0) {
        let d = qubit_dissipators();
        let (n1, n2) = lie_split(a1, a2).unwrap();
        let lhs = d.l1.scale(n1).exp().compose(&d.l2.scale(n2).exp());
        prop_assert!(lhs.distance(&(&d.l1.scale(a1) + &d.l2.scale(a2)).exp()) <= 1e-10);
    }
}

#[test]
fn remark6_disagreement_is_required() {
    let s = report::apply_overrides(Preset::Remark6Counterexample.template(), &RunOptions::default());
    let out = report::run(&s).unwrap();
    let r = out.report.results;
    assert!(r.legitimacy.unwrap().legitimate);
    assert!(matches!(r.blp.unwrap().verdict, qdyn_core::markovianity::Blp::Monotone { .. }));
    assert!(!r.divisibility.unwrap().verdict.eq(&qdyn_core::markovianity::Divisibility::Divisible));
}

#[test]
fn report_echo_round_trips() {
    for (name, _) in PRESETS {
        let mut s = Preset::by_name(name).unwrap().template();
        s.grid.steps = s.grid.steps.min(200);
        s.blp_pairs = Some(10);
        let s = report::apply_overrides(s, &RunOptions { seed: Some(3), ..RunOptions::default() });
        let first = report::run(&s).unwrap();
        let echoed = serde_json::to_string(&first.report.scenario).unwrap();
        let again = scenario::parse(&echoed).unwrap();
        assert!(again.validate().is_empty());
        let second = report::run(&again).unwrap();
        assert_eq!(first.report.to_json(), second.report.to_json());
        assert_eq!(first.csv, second.csv);
    }
}

#[test]
fn legitimacy_flags_negative_rates() {
    let traj = t_ordered_evolve(&pure_decoherence_spec(&RateFunction::constant(-1.0)), TimeGrid::new(1.0, 10).unwrap());
    assert!(!legitimacy_report(&traj, 1e-9).is_legitimate());
}
