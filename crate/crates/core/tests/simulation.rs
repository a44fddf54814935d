use delaychain::delay::DelayDistribution;
use delaychain::leader::{JointLaw, LeaderConfig, LeaderModel, PartyId};
use delaychain::sim::checks::{Checker, QualityMode};
use delaychain::sim::{run_execution, Adversary, MaxDelayBalance, NullAdversary, PrivateChain, SimConfig};
use delaychain::tristring::Symbol;

fn config(f: f64, alpha: f64, model: LeaderModel, delay: DelayDistribution, horizon: i64) -> SimConfig {
    let law = JointLaw::from_f_alpha(f, alpha).unwrap();
    SimConfig::new(LeaderConfig::new(law, model).unwrap(), delay, horizon)
}

fn parties(n: u64) -> Vec<PartyId> {
    (0..n).map(PartyId).collect()
}

fn full_check(cfg: &SimConfig, adv: &mut dyn Adversary, seed: u64, s: i64, k: i64) -> (bool, bool) {
    let trace = run_execution(cfg, adv, seed).unwrap();
    let ps = trace.party_ids();
    let c = Checker::new(&trace, &ps);
    let inv = c.invariants(25, 40);
    assert!(inv.ok(), "seed {seed}: {:?}", inv.examples);
    let v = c.settlement(s, k);
    let (m, b) = c.settlement_lemmas(s, &v);
    assert!(m.ok(), "seed {seed}: {:?}", m.examples);
    assert!(b.ok(), "seed {seed}: {:?}", b.examples);
    let cq = c.chain_quality(s, k, 0.1, QualityMode::Special);
    let (l15, _) = c.chain_quality_lemma(s, k, 0.1, &cq);
    assert!(l15.ok(), "seed {seed}: {:?}", l15.examples);
    (v.any(), !cq.is_empty())
}

#[test]
fn zero_delay_no_adversary_agrees() {
    let cfg = config(0.2, 1.0, LeaderModel::Iid { population: 4 }, DelayDistribution::constant(0), 400);
    for seed in 0..5 {
        let trace = run_execution(&cfg, &mut NullAdversary, seed).unwrap();
        let c = Checker::new(&trace, &trace.party_ids());
        assert!(!c.settlement(10, 20).any());
        // With no delay all honest parties hold the same chain after every slot.
        for i in (1..=400).step_by(7) {
            let tips: Vec<_> = trace.party_ids().iter().map(|&p| trace.tip_at(p, i)).collect();
            assert!(tips.windows(2).all(|w| w[0] == w[1]));
        }
    }
}

#[test]
fn characteristic_string_matches_leader_string_outside_honest_slots() {
    let cfg = config(0.1, 0.8, LeaderModel::Iid { population: 5 }, DelayDistribution::geometric(0.4).unwrap(), 600);
    let trace = run_execution(&cfg, &mut NullAdversary, 3).unwrap();
    let (ls, cs) = (&trace.build.leader_string, trace.char_string());
    for (i, s) in ls.iter() {
        match s {
            Symbol::Honest => assert_ne!(cs.get(i), Symbol::Empty),
            other => assert_eq!(cs.get(i), other),
        }
    }
}

#[test]
fn private_chain_against_strong_adversary() {
    let cfg = config(0.3, 0.55, LeaderModel::Iid { population: 3 }, DelayDistribution::constant(1), 300);
    let mut violated = 0;
    for seed in 0..30 {
        let mut adv = PrivateChain::new(20, 15, parties(3));
        violated += usize::from(full_check(&cfg, &mut adv, seed, 20, 15).0);
    }
    assert!(violated > 0);
}

#[test]
fn balance_attack_keeps_lemmas() {
    let cfg = config(0.4, 0.55, LeaderModel::Iid { population: 4 }, DelayDistribution::geometric(0.3).unwrap(), 300);
    let mut violated = 0;
    for seed in 0..30 {
        let mut adv = MaxDelayBalance::new(20, 4);
        violated += usize::from(full_check(&cfg, &mut adv, seed, 20, 10).0);
    }
    assert!(violated > 0);
}

#[test]
fn one_time_model_with_infinite_delays() {
    let base = DelayDistribution::geometric(0.5).unwrap();
    let delay = DelayDistribution::mixture_inf(&base, 0.9).unwrap();
    let cfg = config(0.2, 0.7, LeaderModel::OneTime { observers: 3 }, delay, 400);
    for seed in 0..10 {
        let mut adv = PrivateChain::new(30, 20, parties(3));
        full_check(&cfg, &mut adv, seed, 30, 20);
        full_check(&cfg, &mut NullAdversary, seed, 30, 20);
    }
}

#[test]
fn runs_are_reproducible() {
    let cfg = config(0.2, 0.7, LeaderModel::Iid { population: 3 }, DelayDistribution::geometric(0.5).unwrap(), 500);
    let a = run_execution(&cfg, &mut PrivateChain::new(50, 30, parties(3)), 9).unwrap();
    let b = run_execution(&cfg, &mut PrivateChain::new(50, 30, parties(3)), 9).unwrap();
    assert_eq!(a.chain_log, b.chain_log);
    assert_eq!(a.deliveries, b.deliveries);
    assert_eq!(a.char_string(), b.char_string());
}
