//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any gated criterion fails. Criterion 11 is reported only.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sidelink::harness::{run_sweep_samples, ExperimentSpec, SampleSet, SweepValue, SweepVar};
use sidelink::model::{gen_instance, path_gain, ModelConfig};
use sidelink::parallel::Execution;
use sidelink::protocol::{message_bound, run_discovery, CollisionModel};
use sidelink::rate::{evaluate, feasible_rate, hop1_capacities, hop2_capacities, Schedule};
use sidelink::sched::{
    admission_stats, draw_arrival_rates, max_wait, simulate, update_weight_queue, update_weight_wait,
    FairPolicy, TraceRow,
};
use sidelink::solvers::{solve_exhaustive, solve_greedy, valid_schedule_count};
use sidelink::stats::{mean, paired_lower_bound, welch_lower_bound};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn samples<'a>(sets: &'a [SampleSet], value: &str, method: &str, metric: &str) -> &'a [f64] {
    &sets
        .iter()
        .find(|s| s.sweep_value == value && s.method == method && s.metric == metric)
        .unwrap_or_else(|| panic!("missing cell {value}/{method}/{metric}"))
        .samples
}

fn sweep(var: SweepVar, values: &[f64], base: ModelConfig, trials: usize, solvers: &[&str], seed: u64) -> Vec<SampleSet> {
    let spec = ExperimentSpec {
        sweep_variable: var,
        values: values.iter().map(|&v| SweepValue::Number(v)).collect(),
        trials,
        base,
        solvers: solvers.iter().map(|s| s.to_string()).collect(),
        seed,
        ..ExperimentSpec::default()
    };
    run_sweep_samples(&spec, Execution::default()).expect("sweep")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut greedy_over = 0;
    for seed in 0..100u64 {
        let n = 1 + (seed % 3) as usize;
        let inst = gen_instance(&ModelConfig { r_max: 0.3, ..ModelConfig::square(n) }, &mut rng(seed)).unwrap();
        let ex = solve_exhaustive(&inst, 50_000, &mut rng(0));
        let (bf_val, bf_assign) = common::brute_force(&inst);
        if !ex.exhaustive_complete || ex.schedule.assign != bf_assign || !close(ex.report.weighted_sum, bf_val) {
            mismatches += 1;
        }
        if solve_greedy(&inst).report.weighted_sum > bf_val + 1e-12 {
            greedy_over += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && greedy_over == 0 && elapsed < Duration::from_secs(10),
        format!("100 instances, {mismatches} mismatches, greedy above optimum {greedy_over}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let mut failed = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if !close(got, want) {
            failed.push(format!("{name}: {got} vs {want}"));
        }
    };
    check("gain d=2 a=2", path_gain(2.0, 2.0).unwrap(), 0.25);
    check("gain d=2 a=4", path_gain(2.0, 4.0).unwrap(), 0.0625);

    let one = common::instance(vec![vec![0.25]], vec![1.0]);
    let s = Schedule::from_assign(vec![Some(0)]);
    check("c1 single", hop1_capacities(&one, &s)[0][0], 0.321928094887362);
    check("c1 inactive", hop1_capacities(&one, &Schedule::empty(1))[0][0], 0.0);
    let two = common::instance(vec![vec![0.25, 0.25]; 2], vec![1.0, 1.0]);
    let c1 = hop1_capacities(&two, &Schedule::from_assign(vec![Some(0), Some(1)]));
    check("c1 pair 0", c1[0][0], 1.2f64.log2());
    check("c1 pair 1", c1[1][1], 1.2f64.log2());
    check("c1 pair 1.2", c1[0][0], 0.263034405833794);

    check("c2 P=1", hop2_capacities(&one)[0], 1.0);
    let mut three = one.clone();
    three.gains.p_inner = vec![3.0];
    check("c2 P=3", hop2_capacities(&three)[0], 2.0);

    check("feasible hop1", feasible_rate(2.0, 3.0, 0.5), 2.0);
    check("feasible hop2", feasible_rate(2.0, 1.0, 0.5), 0.5);
    check("feasible clipped", feasible_rate(2.0, 0.3, 0.5), 0.0);

    check("evaluate empty", evaluate(&one, &Schedule::empty(1)).unwrap().weighted_sum, 0.0);
    check("evaluate single", evaluate(&one, &s).unwrap().weighted_sum, 1.25f64.log2());

    check("wait idle", update_weight_wait(3.0, false), 4.0);
    check("wait floor", update_weight_wait(1.0, true), 1.0);
    check("wait served", update_weight_wait(5.0, true), 4.0);
    check("queue idle", update_weight_queue(2.0, 0.3, false, 0.0), 2.3);
    check("queue floor", update_weight_queue(0.4, 0.3, true, 1.0), 0.0);
    check("queue served", update_weight_queue(2.0, 0.3, true, 1.0), 1.3);

    check("bound 5", message_bound(5) as f64, 21.0);
    check("bound 0", message_bound(0) as f64, 1.0);
    check("bound 100", message_bound(100) as f64, 401.0);
    check("valid 2x2", valid_schedule_count(2, 2) as f64, 7.0);

    let (m, v) = admission_stats(&[(0..10).collect(), vec![]], 10).unwrap();
    check("admission mean", m, 0.5);
    check("admission var", v, 0.25);
    check("max wait", max_wait(&[vec![0, 4]], 10).unwrap() as f64, 6.0);

    let inst = gen_instance(&ModelConfig::square(5), &mut rng(5)).unwrap();
    let t = run_discovery(&inst, CollisionModel::None, &mut rng(0)).unwrap();
    check("protocol n=5", t.total_messages as f64, 21.0);

    let n = 29;
    outcome(failed.is_empty(), format!("{} of {n} examples exact to 1e-9 {:?}", n - failed.len(), failed))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let base = ModelConfig { alpha: 2.0, r_max: 0.0, ..ModelConfig::square(5) };
    let sets = sweep(SweepVar::NOuter, &[5.0], base, 500, &["greedy", "best_channel", "random"], 3);
    let g = samples(&sets, "5", "greedy", "sum_rate");
    let b = samples(&sets, "5", "best_channel", "sum_rate");
    let r = samples(&sets, "5", "random", "sum_rate");
    let (lb_gb, lb_br) = (paired_lower_bound(g, b), paired_lower_bound(b, r));
    let elapsed = start.elapsed();
    outcome(
        lb_gb > 0.0 && lb_br > 0.0 && elapsed < Duration::from_secs(120),
        format!(
            "means greedy {:.4} best_channel {:.4} random {:.4}; 95% lower bounds {lb_gb:.4}, {lb_br:.4}; {elapsed:.2?}",
            mean(g),
            mean(b),
            mean(r)
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let ns = [2.0, 4.0, 8.0, 16.0, 32.0];
    let sets = sweep(SweepVar::NOuter, &ns, ModelConfig::default(), 200, &["greedy"], 4);
    let means: Vec<f64> = ns
        .iter()
        .map(|n| mean(samples(&sets, &n.to_string(), "greedy", "sum_rate")))
        .collect();
    let nondecreasing = means.windows(2).all(|w| w[1] >= w[0]);

    let sets = sweep(SweepVar::NOuter, &[10.0], ModelConfig::default(), 200, &["greedy", "exhaustive"], 40);
    let g = samples(&sets, "10", "greedy", "sum_rate");
    let e = samples(&sets, "10", "exhaustive", "sum_rate");
    let lb = paired_lower_bound(g, e);
    let elapsed = start.elapsed();
    outcome(
        nondecreasing && lb > 0.0 && elapsed < Duration::from_secs(600),
        format!(
            "greedy means over n_o 2..32 {:.3?}; n_o=10 greedy {:.4} vs capped exhaustive {:.4}, 95% lower bound {lb:.4}; {elapsed:.2?}",
            means,
            mean(g),
            mean(e)
        ),
    )
}

fn criterion_5() -> Outcome {
    let r = [0.0, 0.25, 0.5, 1.0];
    let sets = sweep(SweepVar::RMax, &r, ModelConfig::square(5), 500, &["greedy"], 5);
    let cells: Vec<&[f64]> = r
        .iter()
        .map(|v| samples(&sets, &v.to_string(), "greedy", "sum_rate"))
        .collect();
    let bounds: Vec<f64> = cells.windows(2).map(|w| welch_lower_bound(w[0], w[1])).collect();
    let means: Vec<f64> = cells.iter().map(|c| mean(c)).collect();
    outcome(
        bounds.iter().all(|&b| b > 0.0),
        format!("means over r_max {r:?}: {means:.4?}; 95% lower bounds of successive drops {bounds:.4?}"),
    )
}

fn criterion_6() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (n, seed, better, worse) in [(2usize, 6u64, 2.0, 4.0), (16, 16, 4.0, 2.0)] {
        let sets = sweep(SweepVar::Alpha, &[2.0, 4.0], ModelConfig::square(n), 500, &["greedy"], seed);
        let hi = samples(&sets, &better.to_string(), "greedy", "sum_rate");
        let lo = samples(&sets, &worse.to_string(), "greedy", "sum_rate");
        let lb = welch_lower_bound(hi, lo);
        pass &= lb > 0.0;
        parts.push(format!(
            "n_o={n}: alpha {better} {:.4} vs alpha {worse} {:.4}, 95% lower bound {lb:.4}",
            mean(hi),
            mean(lo)
        ));
    }
    // Not gated: the same comparison with the transmit power raised to 100.
    let mut hi_snr = Vec::new();
    for n in [2usize, 16] {
        let base = ModelConfig { power: 100.0, ..ModelConfig::square(n) };
        let sets = sweep(SweepVar::Alpha, &[2.0, 4.0], base, 200, &["greedy"], 60 + n as u64);
        let a2 = mean(samples(&sets, "2", "greedy", "sum_rate"));
        let a4 = mean(samples(&sets, "4", "greedy", "sum_rate"));
        hi_snr.push(format!("n_o={n} alpha 2 {a2:.3} alpha 4 {a4:.3}"));
    }
    parts.push(format!("(power 100, not gated: {})", hi_snr.join(", ")));
    outcome(pass, parts.join("; "))
}

fn fairness_sets() -> Vec<SampleSet> {
    let spec = ExperimentSpec {
        sweep_variable: SweepVar::NOuter,
        values: vec![SweepValue::Number(4.0), SweepValue::Number(8.0)],
        trials: 500,
        slots: 500,
        solvers: Vec::new(),
        policies: vec!["GREEDY_STATIC".into(), "WAIT_TIME".into(), "QUEUE".into()],
        seed: 7,
        ..ExperimentSpec::default()
    };
    run_sweep_samples(&spec, Execution::default()).expect("fairness sweep")
}

fn criterion_7(sets: &[SampleSet]) -> Outcome {
    let m = |n: &str, p: &str, metric: &str| mean(samples(sets, n, p, metric));
    let mut broken = Vec::new();
    let mut parts = Vec::new();
    for n in ["4", "8"] {
        let adm = ["GREEDY_STATIC", "WAIT_TIME", "QUEUE"].map(|p| m(n, p, "mean_admission"));
        let var = ["GREEDY_STATIC", "WAIT_TIME", "QUEUE"].map(|p| m(n, p, "var_admission"));
        let rate = ["GREEDY_STATIC", "WAIT_TIME", "QUEUE"].map(|p| m(n, p, "sum_rate"));
        if adm[1] <= adm[0] {
            broken.push(format!("admission WAIT > STATIC at n_o={n}"));
        }
        if var[1] >= var[0] {
            broken.push(format!("variance WAIT < STATIC at n_o={n}"));
        }
        if rate[0] < rate[1] || rate[0] < rate[2] {
            broken.push(format!("STATIC sum rate highest at n_o={n}"));
        }
        parts.push(format!(
            "n_o={n} [STATIC, WAIT, QUEUE] admission {adm:.4?} variance {var:.4?} sum rate {rate:.4?}"
        ));
    }
    for p in ["GREEDY_STATIC", "WAIT_TIME", "QUEUE"] {
        if m("8", p, "mean_admission") >= m("4", p, "mean_admission") {
            broken.push(format!("{p} admission decreasing in n_o"));
        }
    }
    parts.push(format!("violated: {broken:?}"));
    outcome(broken.is_empty(), parts.join("; "))
}

fn criterion_8(sets: &[SampleSet]) -> Outcome {
    let w = samples(sets, "8", "WAIT_TIME", "max_wait");
    let q = samples(sets, "8", "QUEUE", "max_wait");
    let lb = welch_lower_bound(q, w);
    outcome(
        lb > 0.0,
        format!(
            "n_o=8 max_wait WAIT_TIME {:.2} vs QUEUE {:.2} ({} / {} episodes), 95% lower bound of gap {lb:.3}",
            mean(w),
            mean(q),
            w.len(),
            q.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut bad_counts = Vec::new();
    for n in 1..=64usize {
        let inst = gen_instance(&ModelConfig::square(n), &mut rng(900 + n as u64)).unwrap();
        let t = run_discovery(&inst, CollisionModel::None, &mut rng(n as u64)).unwrap();
        if t.total_messages as u64 != message_bound(n as u64) {
            bad_counts.push(n);
        }
    }
    let mut differ = 0;
    for seed in 0..100u64 {
        let n = 1 + (seed % 16) as usize;
        let inst = gen_instance(&ModelConfig { r_max: 0.3, ..ModelConfig::square(n) }, &mut rng(seed)).unwrap();
        let t = run_discovery(&inst, CollisionModel::None, &mut rng(seed)).unwrap();
        if t.final_schedule != solve_greedy(&inst).schedule {
            differ += 1;
        }
    }
    outcome(
        bad_counts.is_empty() && differ == 0,
        format!("count off 4n_o+1 for n_o in {bad_counts:?}; {differ} of 100 schedules differ from greedy"),
    )
}

fn criterion_10() -> Outcome {
    let mut r = rng(10);
    let mut violations = 0;
    for _ in 0..10_000 {
        let n_o = r.gen_range(1..=6);
        let n_i = r.gen_range(1..=6);
        let cfg = ModelConfig { n_o, n_i, r_max: r.gen_range(0.0..1.5), ..ModelConfig::default() };
        let inst = gen_instance(&cfg, &mut r).unwrap();
        let mut relays: Vec<usize> = (0..n_i).collect();
        let mut assign = vec![None; n_o];
        for slot in assign.iter_mut() {
            if !relays.is_empty() && r.gen_bool(0.7) {
                *slot = Some(relays.swap_remove(r.gen_range(0..relays.len())));
            }
        }
        let s = Schedule::from_assign(assign);
        let rep = evaluate(&inst, &s).unwrap();
        let mut used = vec![false; n_i];
        for i in 0..n_o {
            match s.assign[i] {
                None => violations += usize::from(rep.r1[i] != 0.0),
                Some(j) => {
                    violations += usize::from(std::mem::replace(&mut used[j], true));
                    violations += usize::from(rep.r1[i] < 0.0 || rep.r1[i] > rep.c1[i][j] + 1e-12);
                    let over = rep.r1[i] + inst.relay_traffic[j] > rep.c2[j] + 1e-12;
                    violations += usize::from(rep.r1[i] > 0.0 && over);
                }
            }
        }
    }

    let mut conservation = 0;
    let mut floors = 0;
    for seed in 0..50u64 {
        let n = 2 + (seed % 7) as usize;
        let inst = gen_instance(&ModelConfig::square(n), &mut rng(seed)).unwrap();
        let mut rows: Vec<TraceRow> = Vec::new();
        simulate(&inst, &FairPolicy::wait_time(), 500, &mut rng(seed), Some(&mut rows)).unwrap();
        floors += rows.iter().filter(|r| r.weight < 1.0).count();
        rows.clear();
        let rates = draw_arrival_rates(n, 0.5, &mut rng(seed + 1));
        let ep = simulate(&inst, &FairPolicy::queue(rates), 500, &mut rng(seed), Some(&mut rows)).unwrap();
        floors += rows.iter().filter(|r| r.weight < 0.0 || r.queue < 0.0).count();
        for i in 0..n {
            let arrived = ep.state.packet_log[i].arrivals.len() as f64;
            conservation += usize::from((arrived - ep.state.served(i) - ep.state.queues[i]).abs() > 1e-9);
        }
    }
    outcome(
        violations == 0 && conservation == 0 && floors == 0,
        format!(
            "10^4 pairs: {violations} constraint violations; 100 episodes: {conservation} conservation errors, {floors} floor breaches"
        ),
    )
}

fn criterion_11() -> String {
    let ns = [2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0];
    let spec = ExperimentSpec {
        sweep_variable: SweepVar::NOuter,
        values: ns.iter().map(|&n| SweepValue::Number(n)).collect(),
        trials: 100,
        slots: 500,
        solvers: Vec::new(),
        policies: vec!["QUEUE".into()],
        seed: 11,
        ..ExperimentSpec::default()
    };
    let sets = run_sweep_samples(&spec, Execution::default()).expect("delay sweep");
    let delays: Vec<f64> = ns
        .iter()
        .map(|n| mean(samples(&sets, &n.to_string(), "QUEUE", "avg_delay")))
        .collect();
    let argmin = (0..delays.len())
        .min_by(|&a, &b| delays[a].total_cmp(&delays[b]))
        .unwrap();
    let interior = argmin > 0 && argmin + 1 < delays.len();
    format!(
        "QUEUE delay over n_o {:?}: {delays:.3?}; minimum at n_o={} ({})",
        ns.iter().map(|&n| n as usize).collect::<Vec<_>>(),
        ns[argmin],
        if interior { "interior" } else { "at the boundary" }
    )
}

fn main() {
    // `cargo test` passes filter and flag arguments; the suite always runs whole.
    let start = Instant::now();
    let mut failures = 0;
    let mut report = |k: u32, o: Outcome| {
        println!("{} criterion {k}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.pass);
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    report(6, criterion_6());
    let fair = fairness_sets();
    report(7, criterion_7(&fair));
    report(8, criterion_8(&fair));
    report(9, criterion_9());
    report(10, criterion_10());
    println!("REPORT criterion 11: {}", criterion_11());
    println!("acceptance: {} failed, {:.1?}", failures, start.elapsed());
    if failures > 0 {
        std::process::exit(1);
    }
}
