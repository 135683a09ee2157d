use prehoc::ddl::{parse_statements, print_statements, Schema};

fn fixtures() -> Vec<(String, String)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "ddl"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn every_fixture_round_trips() {
    let all = fixtures();
    assert!(all.len() >= 4);
    for (name, src) in &all {
        let parsed = parse_statements(src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let printed = print_statements(&parsed);
        let reparsed = parse_statements(&printed).unwrap_or_else(|e| panic!("{name} reprinted: {e}\n{printed}"));
        assert_eq!(parsed, reparsed, "{name}");
        assert_eq!(printed, print_statements(&reparsed), "{name}");
    }
}

#[test]
fn bindings_resolve_against_their_tables() {
    let all: std::collections::BTreeMap<_, _> = fixtures().into_iter().collect();
    let example = format!("{}\n{}", all["example_tables.ddl"], all["example_bindings.ddl"]);
    Schema::parse(&example).unwrap();
    assert!(Schema::parse(&all["example_bindings.ddl"]).is_err());
    let s = Schema::parse(&all["topic_tone.ddl"]).unwrap();
    assert_eq!(s.fef_bindings("review_feats").len(), 2);
    let s = Schema::parse(&all["syntax.ddl"]).unwrap();
    let names: Vec<String> =
        s.crowd_table("listings").unwrap().constraints().map(|c| c.name.clone()).collect();
    assert!(names.contains(&"short_note".to_string()), "{names:?}");
    assert!(names.contains(&"listings_seller_product_pkey".to_string()), "{names:?}");
}
