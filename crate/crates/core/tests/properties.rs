mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqlcex::db::ConcreteDb;
use sqlcex::eval::ex_compare;
use sqlcex::pipeline::score::{score, QuestionOutcome};
use sqlcex::pipeline::{cross_check, CrossEntry, Prepared};
use sqlcex::schema::load_schema;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dumps_round_trip(seed in any::<u64>(), k in 0usize..4, null_p in 0.0f64..0.5) {
        let schema = load_schema(EXPR_SCHEMA).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let db = random_db(&mut rng, &schema, k, null_p);
        let json = ConcreteDb::from_dump_json(&db.to_dump_json(&schema), &schema).unwrap();
        prop_assert_eq!(&json, &db);
        let sql = ConcreteDb::from_insert_script(&db.insert_script(), &schema).unwrap();
        prop_assert_eq!(&sql, &db);
        prop_assert_eq!(json.content_hash(&schema), db.content_hash(&schema));
    }

    #[test]
    fn accuracies_are_ordered_and_ranks_permute(
        rows in prop::collection::vec((0usize..5, 0usize..6, prop::option::of(any::<bool>()), any::<bool>(), any::<bool>()), 0..40)
    ) {
        let outcomes: Vec<QuestionOutcome> = rows
            .iter()
            .map(|&(m, q, ex, own, cross)| QuestionOutcome {
                question_id: format!("q{q}"),
                method: format!("m{m}"),
                ex,
                own_counterexample: own,
                cross_counterexample: cross,
            })
            .collect();
        let scores = score(&outcomes);
        let n = scores.len();
        for s in &scores {
            prop_assert!(s.verify_cc_accuracy <= s.verify_accuracy);
            prop_assert!(s.verify_accuracy <= s.ex_accuracy);
            prop_assert!((0.0..=100.0).contains(&s.ex_accuracy));
        }
        for rank in [
            |s: &sqlcex::pipeline::score::MethodScore| s.ex_rank,
            |s: &sqlcex::pipeline::score::MethodScore| s.verify_rank,
            |s: &sqlcex::pipeline::score::MethodScore| s.verify_cc_rank,
        ] {
            let mut r: Vec<usize> = scores.iter().map(rank).collect();
            r.sort_unstable();
            prop_assert_eq!(r, (1..=n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn cross_check_adopts_only_refuting_databases(seed in any::<u64>()) {
        let schema = load_schema(PAIR_SCHEMA).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gold_sql, a_sql) = PairGen { rng: &mut rng }.pair();
        let (_, b_sql) = PairGen { rng: &mut rng }.pair();
        let gold = Prepared::parse(&gold_sql, &schema).unwrap();
        let preds = [Prepared::parse(&a_sql, &schema).unwrap(), Prepared::parse(&b_sql, &schema).unwrap()];
        let dbs: Vec<ConcreteDb> = (0..4).map(|_| random_db(&mut rng, &schema, 3, 0.2)).collect();
        let mut entries: Vec<CrossEntry> = preds
            .iter()
            .enumerate()
            .map(|(i, p)| CrossEntry {
                question_id: "q".into(),
                method: format!("m{i}"),
                schema: &schema,
                gold: &gold.query,
                gen: Some(&p.query),
                found: dbs[i * 2..i * 2 + 2].to_vec(),
                adopted: vec![],
            })
            .collect();
        cross_check(&mut entries);
        for e in &entries {
            for db in &e.adopted {
                prop_assert_eq!(ex_compare(e.gold, e.gen.unwrap(), db), Ok(false));
                prop_assert!(!e.found.contains(db));
            }
        }
    }
}
