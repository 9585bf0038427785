use holegen_core::corpus::*;
use holegen_core::lang::{self, Program, Type};
use proptest::prelude::*;
use std::path::PathBuf;

fn corpus(name: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name);
    lang::parse(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

const SOURCES: [&str; 6] = ["strbuilder.mj", "quaternion.mj", "ringbuffer.mj", "counter.mj", "matrix.mj", "hexcodec.mj"];

#[test]
fn sequences_replay_cleanly_and_bind_in_order() {
    for f in SOURCES {
        let p = corpus(f);
        let seqs = generate_sequences(&p, 30, 1);
        assert!(!seqs.is_empty(), "{f}");
        for s in &seqs {
            assert!(replays_cleanly(&p, s), "{f}: {s:?}");
            assert!(s.steps.len() <= MAX_STEPS);
            let mut bound: Vec<&str> = Vec::new();
            for st in &s.steps {
                for a in &st.args {
                    if let Arg::Var(v) = a {
                        assert!(bound.contains(&v.as_str()), "{f}: `{v}` used before binding");
                    }
                }
                if let Some(b) = &st.bind {
                    bound.push(b);
                }
            }
        }
    }
}

#[test]
fn pool_entries_have_their_key_type() {
    for f in SOURCES {
        let p = corpus(f);
        let pool = build_pool(&generate_sequences(&p, 30, 2));
        for (ty, seqs) in &pool.by_type {
            for s in seqs {
                assert_eq!(&s.result_ty.to_string(), ty);
                assert!(replays_cleanly(&p, s));
            }
        }
    }
}

#[test]
fn pool_is_a_superset_of_entry_prefixes() {
    for f in SOURCES {
        let p = corpus(f);
        let seqs = generate_sequences(&p, 30, 3);
        let pool = build_pool(&seqs);
        for e in to_entries(&seqs) {
            // Every reference-typed setup binding is available from the pool.
            for (k, st) in e.setup.iter().enumerate() {
                if st.ty.is_reference() && st.bind.is_some() {
                    let prefix = &e.setup[..=k];
                    assert!(pool.get(&st.ty).iter().any(|s| s.steps == prefix), "{f}: missing prefix for {}", st.ty);
                }
            }
        }
    }
}

#[test]
fn pool_round_trips_through_jsonl() {
    let p = corpus("quaternion.mj");
    let seqs = generate_sequences(&p, 20, 4);
    let pool = build_pool(&seqs);
    let mut buf = Vec::new();
    pool.write_jsonl(&mut buf).unwrap();
    assert_eq!(ObjectPool::read_jsonl(&buf[..]).unwrap(), pool);
    let mut buf = Vec::new();
    write_sequences(&seqs, &mut buf).unwrap();
    assert_eq!(read_sequences(&buf[..]).unwrap(), seqs);
}

#[test]
fn literal_pools_match_their_types() {
    for ty in [Type::Int, Type::Double, Type::Bool, Type::Char] {
        let lits = literal_pool(&ty);
        assert!(!lits.is_empty());
        assert!(lits.iter().all(|l| l.ty() == ty), "{ty}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn collection_is_deterministic(seed: u64, k in 0usize..6) {
        let p = corpus(SOURCES[k]);
        let a = generate_sequences(&p, 15, seed);
        let b = generate_sequences(&p, 15, seed);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(build_pool(&a), build_pool(&b));
    }
}
