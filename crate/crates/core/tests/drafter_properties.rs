//! Drafter and decode-loop properties across every method.

use std::sync::Arc;

use proptest::prelude::*;
use specbench_core::drafters::{
    HybridDrafter, Observation, PiaDrafter, PiaParams, SamDrafter, SpsDrafter,
};
use specbench_core::oracle::PerturbedOracle;
use specbench_core::token::apply_policy;
use specbench_core::{
    build_drafter, run_autoregressive, run_trajectory, Context, DecodePolicy, DecodeRng, Drafter,
    DrafterResources, EngineOptions, Method, MethodSpec, SharedOracle, StopCondition,
    SyntheticOracleSpec, Token,
};
use specbench_core::index::CorpusDatastore;

const V: usize = 12;

fn oracle_spec(kind: u8, seed: u64) -> SyntheticOracleSpec {
    match kind % 3 {
        0 => SyntheticOracleSpec::Cyclic {
            vocab_size: V,
            period: 5,
            cycle: None,
        },
        1 => SyntheticOracleSpec::HashedMarkov {
            vocab_size: V,
            order: 2,
            seed,
            sharpness: 1.0,
        },
        _ => SyntheticOracleSpec::CopyMix {
            vocab_size: V,
            order: 1,
            seed,
            sharpness: 1.0,
            copy_prob: 0.6,
            min_match: 1,
            segment: 3,
        },
    }
}

fn resources(oracle: &SharedOracle) -> DrafterResources {
    let corpus: Vec<Token> = (0..200u32).map(|i| Token((i * 7 + i / 3) % V as u32)).collect();
    DrafterResources {
        draft_oracle: Some(Arc::new(PerturbedOracle::new(oracle.clone(), 0.3, 1, 4).unwrap())),
        datastore: Some(Arc::new(CorpusDatastore::new(corpus))),
    }
}

fn all_specs() -> Vec<MethodSpec> {
    Method::ALL.iter().map(|&m| MethodSpec::default_for(m)).collect()
}

fn toks(v: &[u32]) -> Vec<Token> {
    v.iter().copied().map(Token).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn greedy_output_equals_autoregressive(
        kind in 0u8..3,
        seed in 0u64..1000,
        prompt in prop::collection::vec(0u32..V as u32, 1..40),
        max_tokens in 1usize..80,
    ) {
        let oracle = oracle_spec(kind, seed).build(1 << 12).unwrap();
        let res = resources(&oracle);
        let prompt = toks(&prompt);
        let stop = StopCondition::max_tokens(max_tokens);
        let opts = EngineOptions::default();
        let mut rng = DecodeRng::new(0);
        let ar = run_autoregressive(oracle.as_ref(), &DecodePolicy::greedy(), &prompt, &stop, &opts, &mut rng).unwrap();
        prop_assert_eq!(rng.draws(), 0);
        for spec in all_specs() {
            let mut d = build_drafter(&spec, &res).unwrap();
            let mut rng = DecodeRng::new(0);
            let out = run_trajectory(oracle.as_ref(), d.as_mut(), &DecodePolicy::greedy(), &prompt, &stop, &opts, &mut rng).unwrap();
            prop_assert_eq!(&out.tokens, &ar.tokens, "{}", spec.method());
            // Greedy verification never draws.
            prop_assert_eq!(rng.draws(), 0);
            // One target pass per step, each emitting at least one token.
            prop_assert_eq!(out.forward_passes, out.steps.len());
            prop_assert!(out.steps.iter().all(|s| s.accepted_count >= 1));
            prop_assert_eq!(out.accepted_total(), out.tokens.len());
        }
    }

    #[test]
    fn drafts_match_declared_shape_and_budget(
        kind in 0u8..3,
        seed in 0u64..1000,
        prompt in prop::collection::vec(0u32..V as u32, 2..60),
        budget in 1usize..30,
    ) {
        let oracle = oracle_spec(kind, seed).build(1 << 12).unwrap();
        let res = resources(&oracle);
        let prompt = toks(&prompt);
        let ctx = Context::from_prompt(&prompt);
        for spec in all_specs() {
            let mut d = build_drafter(&spec, &res).unwrap();
            d.begin_turn(&prompt);
            let draft = d.propose(&ctx, budget, &DecodePolicy::greedy(), &mut DecodeRng::new(1));
            prop_assert!(draft.validate(budget).is_ok(), "{}: {:?}", spec.method(), draft.validate(budget));
            if !draft.is_empty() && spec.method() != Method::Hybrid {
                prop_assert_eq!(draft.shape, spec.capabilities().speculation, "{}", spec.method());
            }
            prop_assert!(draft.nodes.iter().all(|n| (0.0..=1.0).contains(&n.q)));
        }
    }

    #[test]
    fn observe_leaves_reuse_off_drafters_unchanged(
        seed in 0u64..1000,
        prompt in prop::collection::vec(0u32..V as u32, 2..40),
        emitted in prop::collection::vec(0u32..V as u32, 1..6),
    ) {
        let oracle = oracle_spec(2, seed).build(1 << 12).unwrap();
        let res = resources(&oracle);
        let prompt = toks(&prompt);
        let emitted = toks(&emitted);
        let mut ctx = Context::from_prompt(&prompt);
        let mut dists = Vec::new();
        for &t in &emitted {
            dists.push(oracle.next_dist(&ctx).unwrap());
            ctx.push(t);
        }
        let obs = Observation {
            prev_token: *prompt.last().unwrap(),
            emitted: &emitted,
            target_dists: &dists,
        };
        for m in [Method::Sps, Method::Eagle, Method::Pld, Method::Rest] {
            prop_assert!(!m.capabilities().reuse);
            let mut d = build_drafter(&MethodSpec::default_for(m), &res).unwrap();
            d.begin_turn(&prompt);
            let before = format!("{d:?}");
            d.observe(&obs);
            prop_assert_eq!(before, format!("{d:?}"), "{}", m);
        }
    }

    #[test]
    fn sps_proposals_are_policy_transformed_small_model(
        seed in 0u64..1000,
        prompt in prop::collection::vec(0u32..V as u32, 1..20),
        temperature in prop_oneof![Just(0.0), 0.3f64..2.0],
    ) {
        let small = oracle_spec(1, seed).build(1 << 12).unwrap();
        let policy = if temperature == 0.0 { DecodePolicy::greedy() } else { DecodePolicy::sampling(temperature, seed) };
        let prompt = toks(&prompt);
        let mut d = SpsDrafter::new(small.clone(), 8);
        d.begin_turn(&prompt);
        let draft = d.propose(&Context::from_prompt(&prompt), 8, &policy, &mut DecodeRng::new(seed));
        let mut ctx = Context::from_prompt(&prompt);
        for node in &draft.nodes {
            let p = apply_policy(&small.next_dist(&ctx).unwrap(), &policy);
            prop_assert_eq!(node.q, p.prob(node.token));
            prop_assert_eq!(node.proposal.as_ref(), Some(&p));
            ctx.push(node.token);
        }
    }
}

#[test]
fn hybrid_switches_exactly_at_threshold() {
    let small = oracle_spec(1, 3).build(1 << 12).unwrap();
    // History whose suffix [4,5,6,7,8] recurs: SAM match length 5.
    let prompt = toks(&[4, 5, 6, 7, 8, 1, 2, 4, 5, 6, 7, 8]);
    let ctx = Context::from_prompt(&prompt);
    let mut sam = SamDrafter::new(40);
    sam.begin_turn(&prompt);
    let m = sam.match_len();
    assert_eq!(m, 5);
    for threshold in 1..=m + 3 {
        let mut h = HybridDrafter::new(SamDrafter::new(40), Box::new(SpsDrafter::new(small.clone(), 16)), threshold);
        h.begin_turn(&prompt);
        let draft = h.propose(&ctx, 40, &DecodePolicy::greedy(), &mut DecodeRng::new(0));
        let expect = if threshold <= m { Method::Sam } else { Method::Sps };
        assert_eq!(draft.origin, expect, "threshold {threshold}");
        assert_eq!(h.uses_primary(), threshold <= m);
    }
}

#[test]
fn reuse_state_never_shrinks_across_turns() {
    let oracle = oracle_spec(2, 9).build(1 << 14).unwrap();
    let mut sam = SamDrafter::new(40);
    let mut pia = PiaDrafter::new(PiaParams::default());
    let (mut last_states, mut last_nodes) = (0, 0);
    for turn in 0..6u32 {
        let prompt: Vec<Token> = (0..20).map(|i| Token((i * (turn + 2)) % V as u32)).collect();
        for d in [&mut sam as &mut dyn Drafter, &mut pia] {
            run_trajectory(
                oracle.as_ref(),
                d,
                &DecodePolicy::greedy(),
                &prompt,
                &StopCondition::max_tokens(60),
                &EngineOptions::default(),
                &mut DecodeRng::new(0),
            )
            .unwrap();
        }
        let states = sam.automaton().state_count();
        let nodes = pia.trie().node_count();
        assert!(states >= last_states && nodes >= last_nodes, "turn {turn}");
        assert!(nodes <= PiaParams::default().capacity);
        (last_states, last_nodes) = (states, nodes);
    }
    assert!(last_states > 0 && last_nodes > 0);
}
