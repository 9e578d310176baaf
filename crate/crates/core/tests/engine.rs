//! End-to-end checks on simulated paths at reduced path counts.

use fva_core::fvacore::{
    borrowing_spread, compensated_sum, decompose, evaluate, Factor, FvaFlags, Spread, SpreadKind,
};
use fva_core::mcsim::{sample_moments, PathBlock, PathSource, SimConfig, Simulator};
use fva_core::scenarios::{load_scenario, swap_variant, Scenario};
use fva_core::swap::{pathwise_exposure, Direction, SwapSpec};

fn cfg(n_paths: usize, seed: u64) -> SimConfig {
    SimConfig { n_paths, seed, ..SimConfig::default() }
}

fn simulate(s: &Scenario, c: SimConfig) -> PathBlock {
    Simulator::new(&s.dynamics().unwrap(), c).unwrap().simulate().unwrap()
}

#[test]
fn discount_and_survival_fit_the_input_curves() {
    let s = load_scenario("builtin:2").unwrap();
    let d = s.dynamics().unwrap();
    let block = simulate(&s, cfg(20_000, 7));
    for (k, &u) in block.grid.iter().enumerate() {
        let states = block.date(k);
        let checks = [
            (sample_moments(states, |p| (-p.int_r).exp()), d.rates.curve().df(u).unwrap()),
            (sample_moments(states, |p| (-p.cum_i).exp()), d.inst.curve().df(u).unwrap()),
            (sample_moments(states, |p| (-p.cum_c).exp()), d.cpty.curve().df(u).unwrap()),
        ];
        for ((mean, se), target) in checks {
            assert!((mean - target).abs() <= 3.0 * se + 1e-12, "u={u}: {mean} vs {target} (se {se})");
        }
    }
}

#[test]
fn zero_coupon_martingale() {
    // E[D(0,10) P(10,30)] = P(0,30)
    let s = load_scenario("builtin:2").unwrap();
    let d = s.dynamics().unwrap();
    let block = simulate(&s, cfg(20_000, 11));
    let k = block.grid.iter().position(|&u| (u - 10.0).abs() < 1e-9).unwrap();
    let (mean, se) =
        sample_moments(block.date(k), |p| (-p.int_r).exp() * d.rates.zcb(10.0, 30.0, p.x_r).unwrap());
    let target = d.rates.curve().df(30.0).unwrap();
    assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target} (se {se})");
}

#[test]
fn sub_step_refinement_leaves_long_discount_unchanged() {
    let s = load_scenario("builtin:2").unwrap();
    let last = |sub_steps: usize| {
        let block = simulate(&s, SimConfig { sub_steps, ..cfg(20_000, 3) });
        sample_moments(block.date(block.grid.len() - 1), |p| (-p.int_r).exp())
    };
    let ((m10, se10), (m40, se40)) = (last(10), last(40));
    let rel = (m40 / m10 - 1.0).abs();
    let noise = 3.0 * (se10 * se10 + se40 * se40).sqrt() / m10;
    assert!(rel < 2e-4_f64.max(noise), "relative change {rel}, 3 SE {noise}");
}

#[test]
fn exposures_are_sign_consistent() {
    let s = load_scenario("builtin:2").unwrap();
    let d = s.dynamics().unwrap();
    let block = simulate(&s, cfg(4_000, 5));
    let curve = s.yield_curve().unwrap();
    let recv = swap_variant(&curve, "receiver:atm").unwrap();
    let pay = swap_variant(&curve, "payer:atm").unwrap();
    let h_recv = pathwise_exposure(&block, &recv, &d.rates).unwrap();
    let h_pay = pathwise_exposure(&block, &pay, &d.rates).unwrap();
    for (a, b) in h_recv.iter().zip(&h_pay) {
        assert!(a.iter().zip(b).all(|(x, y)| x * y == 0.0 && *x >= 0.0 && *y >= 0.0));
    }
    // swap value is zero at maturity
    assert!(h_recv.last().unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn deep_out_of_the_money_payer_has_no_exposure() {
    // at 10% above par a payer can only come back into the money through a
    // multi-sigma rate move, so the low-vol scenario is used
    let s = load_scenario("builtin:1").unwrap();
    let d = s.dynamics().unwrap();
    let block = simulate(&s, cfg(4_000, 5));
    let par = swap_variant(&s.yield_curve().unwrap(), "payer:atm").unwrap().fixed_rate;
    let deep = SwapSpec { fixed_rate: par + 0.10, ..SwapSpec::standard(Direction::Payer, 0.0) };
    let h = pathwise_exposure(&block, &deep, &d.rates).unwrap();
    assert!(h.iter().flatten().all(|&x| x == 0.0));
}

#[test]
fn discounted_swap_value_is_a_martingale() {
    let s = load_scenario("builtin:2").unwrap();
    let d = s.dynamics().unwrap();
    let block = simulate(&s, cfg(20_000, 9));
    let curve = s.yield_curve().unwrap();
    let recv = SwapSpec { fixed_rate: 0.045, ..swap_variant(&curve, "receiver:atm").unwrap() };
    let pay = SwapSpec { direction: Direction::Payer, ..recv };
    let h_recv = pathwise_exposure(&block, &recv, &d.rates).unwrap();
    let h_pay = pathwise_exposure(&block, &pay, &d.rates).unwrap();
    let v0 = h_recv[0][0] - h_pay[0][0];
    // before the first payment
    let k = 5;
    let v: Vec<f64> = h_recv[k].iter().zip(&h_pay[k]).map(|(a, b)| a - b).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let se = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((mean - v0).abs() < 3.0 * se, "{mean} vs {v0} (se {se})");
}

#[test]
fn deterministic_spread_is_the_average_stochastic_spread() {
    let s = load_scenario("builtin:11").unwrap();
    let d = s.dynamics().unwrap();
    let block = simulate(&s, cfg(20_000, 13));
    let inputs = s.spread_inputs();
    let (Spread::Pathwise(stoch), Spread::Deterministic(det)) = (
        borrowing_spread(&block, &d.inst, &inputs, SpreadKind::Stochastic).unwrap(),
        borrowing_spread(&block, &d.inst, &inputs, SpreadKind::Deterministic).unwrap(),
    ) else {
        panic!("unexpected spread kinds")
    };
    for (k, (row, &target)) in stoch.iter().zip(&det).enumerate() {
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let se = (row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((mean - target).abs() <= 3.0 * se + 1e-12, "date {k}: {mean} vs {target}");
    }
}

#[test]
fn decomposition_identity_on_simulated_inputs() {
    let s = load_scenario("builtin:1").unwrap();
    let d = s.dynamics().unwrap();
    let block = simulate(&s, cfg(5_000, 17));
    let swap = swap_variant(&s.yield_curve().unwrap(), "receiver:itm").unwrap();
    let h = pathwise_exposure(&block, &swap, &d.rates).unwrap();
    let Spread::Pathwise(xi) = borrowing_spread(&block, &d.inst, &s.spread_inputs(), SpreadKind::Stochastic).unwrap()
    else {
        panic!("expected a pathwise spread")
    };
    let surv: Vec<Vec<f64>> =
        (0..block.grid.len()).map(|k| block.date(k).iter().map(|p| (-(p.cum_i + p.cum_c)).exp()).collect()).collect();
    let f: Vec<Factor> = surv.iter().map(|v| Factor::Pathwise(v)).collect();
    let g: Vec<Factor> = xi.iter().map(|v| Factor::Pathwise(v)).collect();
    let dates = decompose(&f, &g, &h).unwrap();
    for (k, dd) in dates.iter().enumerate() {
        let n = h[k].len() as f64;
        let direct = compensated_sum((0..h[k].len()).map(|i| surv[k][i] * xi[k][i] * h[k][i])) / n;
        let sum = dd.indep + dd.wwr;
        assert!((sum - direct).abs() <= 1e-12 * direct.abs().max(1e-300), "date {k}: {sum} vs {direct}");
    }
}

#[test]
fn evaluation_is_reproducible_and_streaming_matches_stored_paths() {
    let s = load_scenario("builtin:11").unwrap();
    let d = s.dynamics().unwrap();
    let c = cfg(3_000, 21);
    let swap = swap_variant(&s.yield_curve().unwrap(), "receiver:atm").unwrap();
    let regimes = FvaFlags::all();
    let sim = Simulator::new(&d, c).unwrap();
    let streamed = evaluate(&sim, &d, &s.spread_inputs(), &[swap], &regimes).unwrap();
    let stored = evaluate(&sim.simulate().unwrap(), &d, &s.spread_inputs(), &[swap], &regimes).unwrap();
    assert_eq!(streamed, stored);
}

#[test]
fn credit_adjustment_ordering_holds_on_shared_paths() {
    let s = load_scenario("builtin:7").unwrap();
    let d = s.dynamics().unwrap();
    let sim = Simulator::new(&d, cfg(3_000, 23)).unwrap();
    let swap = swap_variant(&s.yield_curve().unwrap(), "receiver:atm").unwrap();
    for spread in [SpreadKind::Stochastic, SpreadKind::Deterministic] {
        let grid = FvaFlags::credit_grid(spread);
        let eval = evaluate(&sim, &d, &s.spread_inputs(), &[swap], &grid).unwrap();
        let v: Vec<f64> = grid.iter().map(|f| eval.find(&swap, *f).unwrap().result.fva_indep).collect();
        assert!(v[0] >= v[1] && v[0] >= v[2] && v[1] >= v[3] && v[2] >= v[3], "{v:?}");
    }
}

#[test]
fn zero_correlation_has_no_significant_wwr() {
    let mut s = load_scenario("builtin:2").unwrap();
    s.correlation = Default::default();
    let d = s.dynamics().unwrap();
    let sim = Simulator::new(&d, cfg(10_000, 29)).unwrap();
    let swap = swap_variant(&s.yield_curve().unwrap(), "receiver:atm").unwrap();
    let eval = evaluate(&sim, &d, &s.spread_inputs(), &[swap], &FvaFlags::all()).unwrap();
    for r in &eval.runs {
        assert!(r.result.fva_wwr.abs() <= 3.0 * r.result.se_wwr, "{}: {:?}", r.flags.label(), r.result);
    }
}

#[test]
fn path_dump_round_trips() {
    let s = load_scenario("builtin:2").unwrap();
    let block = simulate(&s, SimConfig { horizon: 1.0, ..cfg(64, 1) });
    let dir = std::env::temp_dir().join(format!("fva-dump-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let stem = dir.join("paths");
    block.dump(&stem).unwrap();
    let back = PathBlock::load(&stem).unwrap();
    std::fs::remove_dir_all(&dir).ok();
    assert_eq!(back, block);
    assert_eq!(back.n_paths(), 64);
}
