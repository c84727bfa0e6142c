mod common;

use common::oracle::{self, Table};
use common::running_example;
use hetanon::ingest::{AnnotationSet, Dataset};
use hetanon::metrics::{ncp_dataset, ncp_record, ncp_record_relational, ncp_record_textual, LossContext, NcpWeights};
use hetanon::model::{RecodedCell, TermKey};
use hetanon::partition::{
    gdf_partition, mondrian_partition, next_term, normalized_span, split_relational, textual_span, Extents,
    TermFrequencyIndex,
};
use hetanon::pipeline::{run, Prepared, RunConfig, Strategy, SweepGrid};
use hetanon::recode::Recoder;
use hetanon::schema::Schema;

const EPS: f64 = 1e-12;

/// Record index of person `pid` (records follow first appearance).
fn rec(p: &Prepared, pid: &str) -> usize {
    p.view.records.iter().position(|r| r.pid == pid).unwrap()
}

fn recs(p: &Prepared, pids: &[&str]) -> Vec<usize> {
    pids.iter().map(|pid| rec(p, pid)).collect()
}

fn gdf_k2(p: &Prepared) -> hetanon::pipeline::RunOutput {
    run(
        p,
        &RunConfig {
            k: 2,
            strategy: Strategy::Gdf,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn person_view_groups_rows_and_drops_redundant_terms() {
    let p = running_example();
    assert_eq!(p.view.len(), 6);
    let redundant: Vec<&str> = p
        .annotations
        .terms()
        .iter()
        .filter(|t| t.is_redundant())
        .map(|t| t.text.as_str())
        .collect();
    assert_eq!(redundant, vec!["36 years old", "2004", "science", "Pisces"]);

    let person1: Vec<&TermKey> = p.view.records[rec(&p, "1")]
        .terms
        .iter()
        .map(|t| p.view.term(*t))
        .collect();
    assert_eq!(
        person1,
        vec![
            &TermKey::new("engineer", "JOB"),
            &TermKey::new("Mexico", "LOCATION"),
            &TermKey::new("Pedro", "PERSON"),
        ]
    );
    assert_eq!(p.view.vocab.len(), 9);
    assert_eq!(p.view.records[rec(&p, "4")].tuple_ids, vec![4, 5, 6]);
}

#[test]
fn normalized_spans() {
    let p = running_example();
    let ext = Extents::of(&p.view);
    let all: Vec<usize> = (0..6).collect();
    let q = |name: &str| p.view.quasi.iter().position(|a| a.name == name).unwrap();
    assert!((normalized_span(&p.view, &ext, &all, q("age")) - 1.0).abs() < EPS);
    let topic = normalized_span(&p.view, &ext, &recs(&p, &["4", "6"]), q("topic"));
    assert!((topic - 0.2).abs() < EPS);
    assert!((textual_span(&p.view, &ext, &all) - 1.0).abs() < EPS);
    let ts = textual_span(&p.view, &ext, &recs(&p, &["3", "5"]));
    assert!((ts - 2.0 / 9.0).abs() < EPS);
}

#[test]
fn median_cuts() {
    let p = running_example();
    let all: Vec<usize> = (0..6).collect();
    let q = |name: &str| p.view.quasi.iter().position(|a| a.name == name).unwrap();
    let (l, r) = split_relational(&p.view, &all, q("age")).unwrap();
    assert_eq!(l, recs(&p, &["2", "4", "6"]));
    assert_eq!(r, recs(&p, &["1", "3", "5"]));
    let (l, r) = split_relational(&p.view, &all, q("gender")).unwrap();
    assert_eq!(l, recs(&p, &["4", "6"]));
    assert_eq!(r.len(), 4);
}

#[test]
fn mondrian_k3_makes_one_split() {
    let p = running_example();
    let out = mondrian_partition(&p.view, 3, 0.5).unwrap();
    let sizes: Vec<usize> = out.partitions.iter().map(|x| x.len()).collect();
    assert_eq!(sizes, vec![3, 3]);
    assert_eq!(out.stats.total(), 1);
    assert_eq!(out.tree.splits(), 1);
}

#[test]
fn gdf_term_choice_breaks_ties_lexicographically() {
    let p = running_example();
    let index = TermFrequencyIndex::build(&p.view, &recs(&p, &["3", "5"]));
    let (term, freq) = next_term(&index).unwrap();
    assert_eq!(p.view.term(term), &TermKey::new("Ben", "PERSON"));
    assert_eq!(freq, 1);

    let out = gdf_partition(&p.view, 2).unwrap();
    assert_eq!(out.stats.textual_splits, 2);
    assert_eq!(out.stats.relational_splits, 0);
    assert_eq!(out.stats.per_entity_type.get("JOB"), Some(&1));
    assert_eq!(out.stats.per_entity_type.get("LOCATION"), Some(&1));
}

#[test]
fn unique_terms_leave_one_partition() {
    let schema = Schema::from_json(
        r#"{"attributes": [
            {"name": "id", "kind": "direct-identifier"},
            {"name": "g", "kind": "quasi-categorical"},
            {"name": "text", "kind": "textual"}]}"#,
    )
    .unwrap();
    let csv = "id,g,text\na,x,alpha\nb,x,beta\nc,x,gamma\nd,x,delta\n";
    let ds = Dataset::from_reader(csv.as_bytes(), schema).unwrap();
    let jsonl: String = ["alpha", "beta", "gamma", "delta"]
        .iter()
        .enumerate()
        .map(|(i, w)| {
            format!(
                "{{\"row_id\": {i}, \"attribute\": \"text\", \"start\": 0, \"end\": {}, \"text\": \"{w}\", \"label\": \"X\"}}\n",
                w.len()
            )
        })
        .collect();
    let ann = AnnotationSet::from_reader(jsonl.as_bytes(), &ds).unwrap();
    let p = Prepared::new(ds, &ann, None);
    let out = gdf_partition(&p.view, 2).unwrap();
    assert_eq!(out.partitions.len(), 1);
    assert_eq!(out.partitions[0].len(), 4);
}

#[test]
fn recoded_cells_and_their_penalties() {
    let p = running_example();
    let ctx = LossContext::new(&p.view);
    let q = |name: &str| p.view.quasi.iter().position(|a| a.name == name).unwrap();
    let recoder = Recoder::new(&p.view);
    let class12 = recoder.recode_partition(&p.view, &recs(&p, &["1", "2"]));
    assert_eq!(class12.cells[q("age")].to_string(), "[24-36]");
    assert!((ctx.ncp_attribute(q("age"), &class12.cells[q("age")]) - 12.0 / 13.0).abs() < EPS);
    assert_eq!(class12.cells[q("topic")].to_string(), "(Student,Education)");
    assert!((ctx.ncp_attribute(q("topic"), &class12.cells[q("topic")]) - 0.4).abs() < EPS);
    assert_eq!(class12.cells[q("date")].to_string(), "[2004-2005]");
    assert!((ctx.ncp_attribute(q("date"), &class12.cells[q("date")]) - 1.0).abs() < EPS);
    assert_eq!(ctx.ncp_attribute(q("gender"), &RecodedCell::Scalar("male".into())), 0.0);

    // Person 4 shares a class with person 6: age [24-27], date 2004 which
    // holds 6 of the 7 dataset dates.
    let class46 = recoder.recode_partition(&p.view, &recs(&p, &["4", "6"]));
    let expected = (3.0 / 13.0 + 6.0 / 7.0) / 5.0;
    assert!((ncp_record_relational(&ctx, &class46) - expected).abs() < EPS);

    let person1 = rec(&p, "1");
    let x = ncp_record_textual(&p.view, person1, &class12);
    assert!((x - 2.0 / 3.0).abs() < EPS);
    let a = ncp_record_relational(&ctx, &class12);
    let total = ncp_record(NcpWeights::default(), a, x);
    assert!((total - (a + 2.0 / 3.0) / 2.0).abs() < EPS);
}

#[test]
fn dataset_loss_matches_the_oracle() {
    let p = running_example();
    let out = gdf_k2(&p);
    let csv = std::fs::read_to_string(common::fixture("example.csv")).unwrap();
    let jsonl = std::fs::read_to_string(common::fixture("example_annotations.jsonl")).unwrap();
    let mut flags = vec![false; 15];
    for i in [1, 10, 11, 13] {
        flags[i] = true;
    }
    let groups = vec![
        vec!["1".to_string(), "2".to_string()],
        vec!["4".to_string(), "6".to_string()],
        vec!["3".to_string(), "5".to_string()],
    ];
    for (wa, wx) in [(1.0, 1.0), (2.0, 0.5), (0.0, 1.0)] {
        let want = oracle::loss(
            &Table::parse(&csv),
            &oracle::RUNNING_EXAMPLE_COLUMNS,
            &oracle::mentions(&jsonl, &flags),
            &groups,
            wa,
            wx,
        );
        let got = ncp_dataset(
            &LossContext::new(&p.view),
            &p.view,
            &p.annotations,
            &out.classes,
            NcpWeights::new(wa, wx).unwrap(),
            None,
        );
        assert!((got.ncp_total - want.total).abs() < EPS, "{wa},{wx}");
        assert!((got.ncp_relational - want.relational).abs() < EPS);
        assert!((got.ncp_textual - want.textual).abs() < EPS);
    }
    let (a4, _) = oracle::loss(
        &Table::parse(&csv),
        &oracle::RUNNING_EXAMPLE_COLUMNS,
        &oracle::mentions(&jsonl, &flags),
        &groups,
        1.0,
        1.0,
    )
    .per_person["4"];
    assert!((a4 - (3.0 / 13.0 + 6.0 / 7.0) / 5.0).abs() < EPS);
}

#[test]
fn partition_statistics_and_suppression_rates() {
    let p = running_example();
    let out = gdf_k2(&p);
    let s = out.loss.partitions;
    assert_eq!((s.count, s.mean_size, s.std_size), (3, 2.0, 0.0));
    // Both names go. Of four location mentions, Mexico and Canada go and
    // the two mentions of the UK stay.
    assert_eq!(out.loss.per_entity_type["PERSON"], 1.0);
    assert_eq!(out.loss.per_entity_type["LOCATION"], 0.5);
    assert_eq!(out.loss.per_entity_type["DATE"], 1.0);
    assert!(!out.loss.per_entity_type.contains_key("AGE"));
}

#[test]
fn classes_report_retained_terms() {
    let p = running_example();
    let out = gdf_k2(&p);
    let report = out.class_report(&p);
    let retained: Vec<Vec<String>> = report
        .iter()
        .map(|c| c.retained_terms.iter().map(|t| t.text.clone()).collect())
        .collect();
    assert_eq!(retained, vec![vec!["engineer"], vec!["uk"], vec![]]);
    assert_eq!(report[0].cells["age"], "[24-36]");
    assert_eq!(report[2].cells["date"], "2004-05");
}

#[test]
fn default_sweep_grid_has_84_rows() {
    let grid = SweepGrid {
        ks: vec![2, 3, 4, 5, 10, 15, 20],
        lambdas: (0..=10).map(|i| i as f64 / 10.0).collect(),
        strategies: vec![Strategy::Mondrian, Strategy::Gdf],
        entity_types: None,
        weights: NcpWeights::default(),
    };
    let configs = grid.configs();
    assert_eq!(configs.len(), 84);
    assert_eq!(configs[11].strategy, Strategy::Gdf);
    assert_eq!(configs[12].k, 3);
}

#[test]
fn entity_filter_keeps_other_terms_verbatim() {
    let schema = Schema::load(common::fixture("example_schema.json")).unwrap();
    let ds = hetanon::ingest::load_dataset(common::fixture("example.csv"), &schema).unwrap();
    let ann = hetanon::ingest::load_annotations(common::fixture("example_annotations.jsonl"), &ds).unwrap();
    let only: std::collections::BTreeSet<String> = ["LOCATION".to_string()].into();
    let p = Prepared::new(ds, &ann, Some(&only));
    let out = gdf_k2(&p);
    let row0 = &out.release.rows[0][6];
    assert!(row0.contains("Pedro"), "{row0}");
    assert!(row0.contains("36 years old"), "{row0}");
    assert!(out.audit.passed);
}
