use proptest::prelude::*;
use semscore::corpus::{
    load_records, validate_join, Dataset, EvalRecord, Grade, HumanRating, IssueKind, ModelResponse,
};

fn record() -> impl Strategy<Value = EvalRecord> {
    (
        "[a-z0-9]{1,8}",
        "[a-z_]{0,6}",
        "\\PC{1,30}",
        prop::option::of("\\PC{1,20}"),
        "\\PC{1,30}",
    )
        .prop_filter("instruction and target need content", |r| {
            !r.2.trim().is_empty() && !r.4.trim().is_empty()
        })
        .prop_map(|(id, group, instruction, input, target)| EvalRecord {
            record_id: id,
            task_group: group,
            instruction,
            instance_input: input,
            target_response: target,
        })
}

fn unique_records() -> impl Strategy<Value = Vec<EvalRecord>> {
    prop::collection::vec(record(), 1..12).prop_map(|mut v| {
        let mut seen = std::collections::BTreeSet::new();
        v.retain(|r| seen.insert(r.record_id.clone()));
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_load_round_trips(records in unique_records()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let ds = Dataset::new("records.jsonl", records);
        ds.write_jsonl(&path).unwrap();
        let back = load_records(&path).unwrap();
        prop_assert_eq!(back.records, ds.records);
    }

    #[test]
    fn each_removed_response_is_one_issue(
        n_models in 1usize..5,
        n_records in 1usize..8,
        picks in prop::collection::vec(any::<prop::sample::Index>(), 0..10),
        orphans in 0usize..4,
    ) {
        let records: Vec<EvalRecord> = (0..n_records)
            .map(|i| EvalRecord {
                record_id: format!("r{i}"),
                task_group: "g".into(),
                instruction: "x".into(),
                instance_input: None,
                target_response: "t".into(),
            })
            .collect();
        let ds = Dataset::new("t", records);
        // keep one response per model so every model stays visible
        let mut responses: Vec<ModelResponse> = (0..n_models)
            .flat_map(|m| (0..n_records).map(move |r| ModelResponse {
                model_id: format!("m{m}"),
                record_id: format!("r{r}"),
                response_text: "y".into(),
            }))
            .collect();
        let removable: Vec<usize> = (0..responses.len()).filter(|i| i % n_records != 0).collect();
        let mut removed = std::collections::BTreeSet::new();
        if !removable.is_empty() {
            for p in &picks {
                removed.insert(removable[p.index(removable.len())]);
            }
        }
        let gone: Vec<ModelResponse> = removed.iter().map(|&i| responses[i].clone()).collect();
        let mut i = 0;
        responses.retain(|_| { i += 1; !removed.contains(&(i - 1)) });

        let ratings: Vec<HumanRating> = (0..orphans)
            .map(|k| HumanRating {
                model_id: "ghost".into(),
                record_id: format!("r{k}"),
                annotator_id: "a".into(),
                grade: Grade::B,
            })
            .collect();
        let rep = validate_join(&ds, &responses, &ratings);
        prop_assert_eq!(rep.issues.len(), removed.len() + orphans);
        for g in &gone {
            prop_assert!(rep.contains(&g.model_id, &g.record_id, IssueKind::MissingResponse));
        }
        prop_assert_eq!(rep.is_empty(), removed.is_empty() && orphans == 0);
    }
}
