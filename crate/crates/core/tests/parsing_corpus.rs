use abstain_core::parsing::parse_answer;
use serde::Deserialize;

#[derive(Deserialize)]
struct Row {
    raw: String,
    options: Vec<String>,
    expected: String,
    marker: bool,
}

fn corpus() -> Vec<Row> {
    let text = include_str!("../fixtures/parsing_corpus.jsonl");
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn corpus_parses_to_expected_tokens() {
    let rows = corpus();
    assert!(rows.len() >= 200);
    let wrong: Vec<_> = rows
        .iter()
        .filter(|r| parse_answer(&r.raw, &r.options) != r.expected)
        .map(|r| (&r.raw, &r.expected, parse_answer(&r.raw, &r.options)))
        .collect();
    assert!(wrong.is_empty(), "{wrong:#?}");
}

#[test]
fn unparsed_rate_below_three_percent() {
    let rows = corpus();
    let z = rows
        .iter()
        .filter(|r| parse_answer(&r.raw, &r.options) == "Z")
        .count();
    assert!((z as f64) < 0.03 * rows.len() as f64, "{z} of {}", rows.len());
    assert!(rows.iter().filter(|r| r.marker).all(|r| r.expected != "Z"));
}
