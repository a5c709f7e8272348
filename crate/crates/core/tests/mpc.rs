use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recopt_core::mpc::{build_problem, solve_step, MpcInputs, StepVar, VARS_PER_STEP};
use recopt_core::{tariff_preset, BatterySpec, CommunityKind, COMPLEMENTARITY_TOL};
use recopt_milp::{solve_lp, MilpProblem, Relation};

fn t1_inputs() -> MpcInputs {
    MpcInputs {
        soc_now: 0.5,
        forecast_res: vec![100.0],
        forecast_common_load: vec![20.0],
        forecast_member_demand: vec![40.0],
        export_price: vec![0.100],
        import_tariff: vec![0.150],
        battery: BatterySpec::reference(),
        grid_limit_kwh: 100.0,
        rates: tariff_preset(CommunityKind::Cer),
    }
}

fn random_inputs(rng: &mut ChaCha8Rng, t: usize) -> MpcInputs {
    let mut v = |lo: f64, hi: f64| -> Vec<f64> { (0..t).map(|_| rng.random_range(lo..hi)).collect() };
    let forecast_res = v(0.0, 100.0);
    let forecast_common_load = v(0.0, 100.0);
    let forecast_member_demand = v(0.0, 100.0);
    let export_price = v(0.05, 0.3);
    let import_tariff = v(0.05, 0.3);
    MpcInputs {
        soc_now: rng.random_range(0.05..0.95),
        forecast_res,
        forecast_common_load,
        forecast_member_demand,
        export_price,
        import_tariff,
        battery: BatterySpec::reference(),
        grid_limit_kwh: 100.0,
        rates: tariff_preset(CommunityKind::Cer),
    }
}

/// Upper bound on the LP optimum implied by row multipliers `y` (weak duality), or `None`
/// when `y` has the wrong sign for some inequality row.
fn dual_bound(p: &MilpProblem, bounds: &[(f64, f64)], y: &[f64]) -> Option<f64> {
    let mut reduced = p.objective().to_vec();
    let mut bound = 0.0;
    for (row, &yi) in p.constraints().iter().zip(y) {
        match row.relation {
            Relation::Le if yi < -1e-9 => return None,
            Relation::Ge if yi > 1e-9 => return None,
            _ => {}
        }
        bound += yi * row.rhs;
        for &(j, a) in &row.coeffs {
            reduced[j] -= yi * a;
        }
    }
    for (&d, &(lo, hi)) in reduced.iter().zip(bounds) {
        bound += (d * lo).max(d * hi);
    }
    Some(bound)
}

/// Exhaustive enumeration over the binaries; each fixed LP is certified by a matching
/// primal point and dual bound.
fn enumeration_oracle(p: &MilpProblem) -> f64 {
    let bins = p.binaries().to_vec();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << bins.len()) {
        let mut bounds = p.bounds().to_vec();
        for (i, &b) in bins.iter().enumerate() {
            let v = f64::from((mask >> i) & 1);
            bounds[b] = (v, v);
        }
        let fixed = p.with_bounds(bounds.clone()).relaxed();
        let sol = solve_lp(&fixed).unwrap();
        if !sol.is_optimal() {
            continue;
        }
        assert!(fixed.max_violation(&sol.x) <= 1e-7);
        let ub = dual_bound(&fixed, &bounds, &sol.duals).expect("sign-feasible duals");
        assert!((ub - sol.objective_value).abs() <= 1e-7 * ub.abs().max(1.0), "{ub} vs {}", sol.objective_value);
        best = best.max(sol.objective_value);
    }
    best
}

#[test]
fn single_hour_discharges_into_the_export_cap() {
    let (u, plan) = solve_step(&t1_inputs()).unwrap();
    assert!((plan.objective_value - 14.72).abs() <= 1e-6, "{}", plan.objective_value);
    assert!((u.e_dsc - 20.0).abs() <= 1e-6 && u.e_ch == 0.0);
    assert!((plan.e_export[0] - 100.0).abs() <= 1e-6);
    assert!((plan.e_shared[0] - 40.0).abs() <= 1e-6);
    assert_eq!(plan.e_import_common[0], 0.0);
    // Hand count: 0.118 · 40 + 0.100 · 100.
    assert!((0.118 * 40.0 + 0.1 * 100.0 - 14.72f64).abs() < 1e-12);
}

#[test]
fn idle_hour_plans_nothing() {
    let mut inputs = t1_inputs();
    inputs.soc_now = 0.05;
    inputs.forecast_res = vec![0.0];
    inputs.forecast_common_load = vec![0.0];
    inputs.forecast_member_demand = vec![0.0];
    let (u, plan) = solve_step(&inputs).unwrap();
    assert_eq!((u.e_ch, u.e_dsc), (0.0, 0.0));
    assert_eq!(plan.objective_value, 0.0);
    assert_eq!((plan.e_export[0], plan.e_import_common[0]), (0.0, 0.0));
}

#[test]
fn problem_dimensions() {
    let p = build_problem(&t1_inputs()).unwrap();
    assert_eq!(p.num_vars(), 8);
    assert_eq!(p.binaries().len(), 2);
    let eq_rows = p.constraints().iter().filter(|c| c.relation == Relation::Eq).count();
    assert_eq!(eq_rows, 2);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = build_problem(&random_inputs(&mut rng, 24)).unwrap();
    assert_eq!(p.num_vars(), 192);
    assert_eq!(p.binaries().len(), 48);
    assert_eq!(VARS_PER_STEP * 24, 192);
    assert_eq!(StepVar::Charge.index(3), 24);
}

#[test]
fn zero_battery_fixes_battery_flows() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut inputs = random_inputs(&mut rng, 6);
    inputs.battery.hourly_limit_kwh = 0.0;
    let p = build_problem(&inputs).unwrap();
    for tau in 0..6 {
        for v in [StepVar::Charge, StepVar::Discharge] {
            assert_eq!(p.bounds()[v.index(tau)], (0.0, 0.0));
        }
    }
    let (_, plan) = solve_step(&inputs).unwrap();
    assert!(plan.e_ch.iter().chain(&plan.e_dsc).all(|&v| v == 0.0));
}

#[test]
fn matches_binary_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..40 {
        let t = 1 + case % 4;
        let inputs = random_inputs(&mut rng, t);
        let oracle = enumeration_oracle(&build_problem(&inputs).unwrap());
        let (_, plan) = solve_step(&inputs).unwrap();
        let tol = 1e-6 * oracle.abs().max(1.0);
        assert!((plan.objective_value - oracle).abs() <= tol, "case {case}: {} vs {oracle}", plan.objective_value);
    }
}

fn check_plan_invariants(inputs: &MpcInputs) -> Result<(), TestCaseError> {
    let (_, plan) = solve_step(inputs).unwrap();
    let b = &inputs.battery;
    let mut soc = inputs.soc_now;
    for tau in 0..inputs.horizon() {
        prop_assert!(plan.soc_next[tau] >= b.soc_min - 1e-9 && plan.soc_next[tau] <= b.soc_max + 1e-9);
        prop_assert!(plan.e_ch[tau] * plan.e_dsc[tau] <= COMPLEMENTARITY_TOL);
        prop_assert!(plan.e_export[tau] * plan.e_import_common[tau] <= COMPLEMENTARITY_TOL);
        prop_assert!(plan.e_ch[tau] <= inputs.forecast_res[tau] + 1e-9);
        let balance = inputs.forecast_res[tau] - plan.e_ch[tau] + plan.e_dsc[tau] - inputs.forecast_common_load[tau]
            - plan.e_export[tau]
            + plan.e_import_common[tau];
        prop_assert!(balance.abs() <= 1e-7, "balance residual {balance}");
        prop_assert!((plan.e_shared[tau] - plan.e_export[tau].min(inputs.forecast_member_demand[tau])).abs() <= 1e-9);
        soc += (b.eff_charge * plan.e_ch[tau] - plan.e_dsc[tau] / b.eff_discharge) / b.capacity_kwh;
        prop_assert!((soc - plan.soc_next[tau]).abs() <= 1e-7);
    }
    let income: f64 = (0..inputs.horizon()).map(|tau| plan.step_income(inputs, tau)).sum();
    prop_assert!((income - plan.objective_value).abs() <= 1e-6 * income.abs().max(1.0));
    Ok(())
}

fn solve_obj(inputs: &MpcInputs) -> f64 {
    solve_step(inputs).unwrap().1.objective_value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plan_invariants(seed in any::<u64>(), t in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        check_plan_invariants(&random_inputs(&mut rng, t))?;
    }

    #[test]
    fn larger_limits_never_hurt(seed in any::<u64>(), t in 1usize..=6, grow in 1.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_inputs(&mut rng, t);
        let tol = 1e-6 * solve_obj(&base).abs().max(1.0);
        let v0 = solve_obj(&base);

        let mut no_battery = base.clone();
        no_battery.battery.hourly_limit_kwh = 0.0;
        prop_assert!(v0 >= solve_obj(&no_battery) - tol);

        let mut bigger = base.clone();
        bigger.battery.hourly_limit_kwh *= grow;
        prop_assert!(solve_obj(&bigger) >= v0 - tol);

        let mut grid = base.clone();
        grid.grid_limit_kwh *= grow;
        prop_assert!(solve_obj(&grid) >= v0 - tol);

        let mut res = base.clone();
        for r in &mut res.forecast_res {
            *r *= grow;
        }
        let mut ok = true;
        for tau in 0..t {
            // Keep the scaled instance feasible under the grid limit.
            ok &= res.forecast_res[tau] - res.forecast_common_load[tau] <= res.grid_limit_kwh + res.battery.hourly_limit_kwh;
        }
        if ok {
            prop_assert!(solve_obj(&res) >= v0 - tol);
        }
    }

    #[test]
    fn price_scaling_scales_objective(seed in any::<u64>(), t in 1usize..=6, factor in 0.2f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_inputs(&mut rng, t);
        let mut scaled = base.clone();
        scaled.rates.restitution *= factor;
        scaled.rates.incentive *= factor;
        for p in scaled.export_price.iter_mut().chain(scaled.import_tariff.iter_mut()) {
            *p *= factor;
        }
        let (v0, v1) = (solve_obj(&base), solve_obj(&scaled));
        prop_assert!((v1 - factor * v0).abs() <= 1e-6 * (factor * v0).abs().max(1.0), "{v1} vs {}", factor * v0);
    }
}
