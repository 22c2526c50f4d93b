use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sidelink::model::{gen_instance, ModelConfig};
use sidelink::protocol::{message_bound, run_discovery, verify_trace, CollisionModel, MessageKind};
use sidelink::solvers::solve_greedy;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn collision_free_exchange_hits_the_bound() {
    for n in 1..=64usize {
        let inst = gen_instance(&ModelConfig::square(n), &mut rng(n as u64)).unwrap();
        let t = run_discovery(&inst, CollisionModel::None, &mut rng(0)).unwrap();
        assert_eq!(t.total_messages as u64, message_bound(n as u64), "n_o={n}");
        assert!(verify_trace(&t, &inst));
    }
}

#[test]
fn outcome_matches_centralized_greedy() {
    for seed in 0..100 {
        let n = 1 + seed as usize % 12;
        let cfg = ModelConfig { r_max: 0.2, ..ModelConfig::square(n) };
        let inst = gen_instance(&cfg, &mut rng(seed)).unwrap();
        let central = solve_greedy(&inst).schedule;
        let quiet = run_discovery(&inst, CollisionModel::None, &mut rng(seed)).unwrap();
        assert_eq!(quiet.final_schedule, central);
        let busy = run_discovery(&inst, CollisionModel::SlottedBackoff { window: 2 }, &mut rng(seed)).unwrap();
        assert_eq!(busy.final_schedule, central);
        assert!(verify_trace(&busy, &inst));
    }
}

#[test]
fn backoff_terminates_quickly() {
    for n in 1..=32usize {
        for seed in 0..10 {
            let inst = gen_instance(&ModelConfig::square(n), &mut rng(seed)).unwrap();
            let t = run_discovery(&inst, CollisionModel::SlottedBackoff { window: 1 }, &mut rng(seed * 31 + n as u64)).unwrap();
            assert!(t.rounds <= 20, "n_o={n} seed={seed} rounds={}", t.rounds);
            assert_eq!(t.count(MessageKind::IHearYouAck), n);
            assert!(t.total_messages as u64 >= message_bound(n as u64));
        }
    }
}

#[test]
fn unequal_sizes() {
    let cfg = ModelConfig { n_o: 6, n_i: 3, ..ModelConfig::default() };
    let inst = gen_instance(&cfg, &mut rng(9)).unwrap();
    let t = run_discovery(&inst, CollisionModel::None, &mut rng(0)).unwrap();
    assert_eq!(t.total_messages, 3 * 6 + 3 + 1);
    assert!(t.final_schedule.active_count() <= 3);
    assert!(verify_trace(&t, &inst));

    let cfg = ModelConfig { n_o: 3, n_i: 0, ..ModelConfig::default() };
    let inst = gen_instance(&cfg, &mut rng(9)).unwrap();
    let t = run_discovery(&inst, CollisionModel::None, &mut rng(0)).unwrap();
    assert_eq!(t.total_messages, 3);
    assert!(verify_trace(&t, &inst));
}

#[test]
fn jsonl_golden() {
    let inst = gen_instance(&ModelConfig::square(2), &mut rng(1)).unwrap();
    let t = run_discovery(&inst, CollisionModel::None, &mut rng(0)).unwrap();
    let mut buf = Vec::new();
    t.write_jsonl(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let kinds: Vec<&str> = text
        .lines()
        .map(|l| l.split("\"kind\":\"").nth(1).unwrap().split('"').next().unwrap())
        .collect();
    assert_eq!(
        kinds,
        [
            "I_AM_HERE",
            "I_AM_HERE",
            "I_HEAR_YOU_ACK",
            "I_HEAR_YOU_ACK",
            "CSI_REPORT",
            "CSI_REPORT",
            "ASSIGNMENT_BROADCAST",
            "ACTIVATION_ACK",
            "ACTIVATION_ACK"
        ]
    );
    assert!(text.lines().nth(4).unwrap().contains(r#""src":"inner:0","dst":"gnb""#));
}
