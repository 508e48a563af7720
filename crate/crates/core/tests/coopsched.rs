mod common;

use common::three_node;
use mwnc::coopsched::*;
use mwnc::simulator::{build_topology, DiskSpec, TopologySpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_topology(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Topology {
    let mut prp = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let p = rng.gen_range(0.05..1.0);
            prp[i][j] = p;
            prp[j][i] = p;
        }
    }
    Topology::new(prp, k).unwrap()
}

fn greedy_ratio(k: usize) -> f64 {
    let m = (k - 1) as f64;
    1.0 - (1.0 - 1.0 / m).powf(m)
}

#[test]
fn greedy_is_within_ratio_of_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    for inst in 0..200 {
        let k = rng.gen_range(2..=4);
        let b = rng.gen_range(1..=8);
        let e = rng.gen_range(1..=6);
        let topo = random_topology(1 + b + e, k, &mut rng);
        let candidates: Vec<usize> = (1..=b).collect();
        let receivers: Vec<usize> = (b + 1..=b + e).collect();
        let greedy = greedy_cover(&candidates, &receivers, &topo);
        let opt = brute_force_cover(&candidates, &receivers, &topo).unwrap();
        assert!(greedy.capacity <= opt.capacity + 1e-9, "instance {inst}");
        assert!(greedy.relays.len() < k);
        if greedy.capacity < greedy_ratio(k) * opt.capacity - 1e-9 {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn greedy_example_picks_first_relay() {
    let topo = three_node();
    let g = greedy_cover(&[1, 2], &[3], &topo);
    assert_eq!(g.relays, vec![1]);
    assert_eq!(g.assignment, vec![(3, 1)]);
    let opt = brute_force_cover(&[1, 2], &[3], &topo).unwrap();
    assert_eq!(opt.relays, vec![1]);
    assert!((opt.capacity - 0.9).abs() < 1e-12);
}

#[test]
fn brute_force_guard() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let topo = random_topology(15, 3, &mut rng);
    let candidates: Vec<usize> = (1..=13).collect();
    assert!(brute_force_cover(&candidates, &[14], &topo).is_err());
}

#[test]
fn worked_example_plan() {
    let topo = three_node();
    let plan = allocate_relay_time(&[1, 2], &[3], 0.6, &topo).unwrap();
    assert_eq!(plan.rounds.len(), 2);
    assert_eq!(plan.rounds[0].relays, vec![1]);
    assert!((plan.rounds[0].phi - 1.0 / 7.0).abs() < 1e-9);
    assert_eq!(plan.rounds[1].relays, vec![2]);
    assert!((plan.rounds[1].phi - 1.0 / 3.0).abs() < 1e-9);

    let c = equivalent_capacity(&plan, &topo);
    assert!((c[1] - 0.6).abs() < 1e-9);
    assert!((c[2] - 0.6).abs() < 1e-9);
    let served = 0.9 / 7.0 + 0.8 / 3.0 + (1.0 - 1.0 / 7.0 - 1.0 / 3.0) * 0.4;
    assert!((c[3] - served).abs() < 1e-9 && served > 0.6);

    assert_eq!(pick_round(&plan, 0.10), Some(0));
    assert_eq!(pick_round(&plan, 0.30), Some(1));
    assert_eq!(pick_round(&plan, 0.90), None);

    let (cap, best) = select_relays(&topo, 1e-3).unwrap();
    assert!((0.59..=0.63).contains(&cap), "{cap}");
    assert!((best.rounds[0].phi - 1.0 / 7.0).abs() < 1e-2);
    assert!((best.rounds[1].phi - 1.0 / 3.0).abs() < 1e-2);
}

#[test]
fn feasibility_is_monotone_in_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for inst in 0..50 {
        let n = rng.gen_range(3..10);
        let k = rng.gen_range(1..=4);
        let topo = if inst % 2 == 0 {
            random_topology(n, k, &mut rng)
        } else {
            build_topology(&TopologySpec::Disk(DiskSpec::standard(n - 1, k, inst))).unwrap()
        };
        let mut seen_infeasible = false;
        for step in 1..100 {
            let c_t = step as f64 / 100.0;
            let (r, e) = partition(c_t, &topo);
            let ok = allocate_relay_time(&r, &e, c_t, &topo).is_some();
            assert!(!(ok && seen_infeasible), "instance {inst}: {c_t} feasible above an infeasible target");
            seen_infeasible |= !ok;
        }
    }
}

#[test]
fn schedule_shares_converge() {
    let topo = three_node();
    let (_, plan) = select_relays(&topo, 1e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let mut counts = vec![0u64; plan.rounds.len() + 1];
    for _ in 0..n {
        match draw_slot(&plan, &mut rng) {
            Some(l) => counts[l] += 1,
            None => counts[plan.rounds.len()] += 1,
        }
    }
    let mut shares: Vec<f64> = plan.rounds.iter().map(|r| r.phi).collect();
    shares.push(1.0 - plan.total_share());
    for (count, p) in counts.iter().zip(shares) {
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((*count as f64 - n as f64 * p).abs() <= 3.0 * sd, "{count} vs {p}");
    }
}

#[test]
fn empty_plan_is_source_only() {
    let topo = three_node();
    let plan = RelayPlan::broadcast(&topo, 0.4);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!((0..1000).all(|_| draw_slot(&plan, &mut rng).is_none()));
    let c = equivalent_capacity(&plan, &topo);
    for j in 1..4 {
        assert_eq!(c[j], topo.c(0, j));
    }
}

#[test]
fn simple_topologies() {
    let single = Topology::new(vec![vec![0.0, 0.37], vec![0.37, 0.0]], 2).unwrap();
    let (cap, plan) = select_relays(&single, 1e-3).unwrap();
    assert!((cap - 0.37).abs() <= 1e-3);
    assert!(plan.rounds.is_empty());

    let n = 6;
    let p = 0.65;
    let homo = Topology::new(
        (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { p }).collect()).collect(),
        3,
    )
    .unwrap();
    let (cap, _) = select_relays(&homo, 1e-3).unwrap();
    assert!(cap >= p - 1e-3);

    let dead = Topology::new(vec![vec![0.0, 0.5, 0.0], vec![0.5, 0.0, 0.0], vec![0.0, 0.0, 0.0]], 2).unwrap();
    assert!(allocate_relay_time(&[1], &[2], 0.1, &dead).is_none());
    assert!(allocate_relay_time(&[1, 2], &[], 0.3, &dead).unwrap().rounds.is_empty());
}

#[test]
fn topology_json_round_trip() {
    let topo = three_node();
    let text = topo.to_json();
    let back = Topology::from_json(&text).unwrap();
    assert_eq!(back, topo);
    assert_eq!(back.to_json(), text);
    assert!(Topology::from_json("{\"prp\": [[0, 2]], \"K\": 1}").is_err());
    assert!(Topology::from_json("not json").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plans_respect_structure(seed in any::<u64>(), n in 3usize..9, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_topology(n, k, &mut rng);
        let delta = 1e-3;
        let (cap, plan) = select_relays(&topo, delta).unwrap();
        prop_assert!(plan.total_share() <= 1.0 + 1e-12);
        let mut all: Vec<usize> = plan.relays.iter().chain(&plan.receivers).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (1..n).collect::<Vec<_>>());
        for r in &plan.rounds {
            prop_assert!(r.relays.len() < k.max(1));
            prop_assert!(r.phi > 0.0);
            prop_assert!(r.relays.iter().all(|i| plan.relays.contains(i)));
        }
        for i in &plan.relays {
            prop_assert!(plan.relay_share(*i) <= 1.0 - cap / topo.c(0, *i) + 1e-9);
        }
        let c = equivalent_capacity(&plan, &topo);
        let min = (1..n).map(|j| c[j]).fold(f64::MAX, f64::min);
        prop_assert!(min >= cap - 2.0 * delta, "min Ĉ {} below C* {}", min, cap);
    }

    #[test]
    fn greedy_never_beats_brute_force(seed in any::<u64>(), b in 1usize..7, e in 1usize..5, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_topology(1 + b + e, k, &mut rng);
        let cands: Vec<usize> = (1..=b).collect();
        let recv: Vec<usize> = (b + 1..=b + e).collect();
        let g = greedy_cover(&cands, &recv, &topo);
        let o = brute_force_cover(&cands, &recv, &topo).unwrap();
        prop_assert!(g.capacity <= o.capacity + 1e-9);
        let direct: f64 = recv.iter().map(|&j| topo.c(0, j)).sum();
        prop_assert!(g.capacity >= direct - 1e-12);
    }
}
