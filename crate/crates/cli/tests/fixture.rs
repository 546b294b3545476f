//! The bundled income fixture is exactly what the seeded generator makes.

use std::path::PathBuf;

use xai_core::fixtures::{income_records, income_schema, IncomeRule};

pub const FIXTURE_ROWS: usize = 500;
pub const FIXTURE_SEED: u64 = 2024;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn render_csv() -> String {
    let (header, rows) = income_records(FIXTURE_ROWS, FIXTURE_SEED, IncomeRule::Mixed);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).unwrap();
    for r in rows {
        w.write_record(&r).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn render_schema() -> String {
    serde_json::to_string_pretty(&income_schema()).unwrap() + "\n"
}

#[test]
fn income_fixture_is_regenerable() {
    let csv_path = fixtures().join("income.csv");
    let schema_path = fixtures().join("income.schema.json");
    if std::env::var_os("XAI_UPDATE_FIXTURES").is_some() {
        std::fs::write(&csv_path, render_csv()).unwrap();
        std::fs::write(&schema_path, render_schema()).unwrap();
    }
    assert_eq!(std::fs::read_to_string(csv_path).unwrap(), render_csv());
    assert_eq!(std::fs::read_to_string(schema_path).unwrap(), render_schema());
}
