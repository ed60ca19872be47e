//! CSV and JSON rendering of result rows.

use serde::Serialize;

use crate::row::{Field, ResultRow, Uncertainty, COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn cell(f: &Option<Field>) -> String {
    f.map(|f| format!("{:e}", f.value)).unwrap_or_default()
}

pub fn to_csv(rows: &[ResultRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for row in rows {
        let mut record = vec![row.scenario_id.clone(), row.n.to_string()];
        record.extend(row.fields.iter().map(cell));
        w.write_record(&record)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct JsonField<'a> {
    name: &'a str,
    value: f64,
    error: Uncertainty,
}

#[derive(Serialize)]
struct JsonSweep<'a> {
    path: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    id: &'a str,
    n: usize,
    units: &'a str,
    sweep: Option<JsonSweep<'a>>,
    warnings: &'a [String],
    oracle_truncation_tail: Option<f64>,
    /// Absent columns are omitted.
    fields: Vec<JsonField<'a>>,
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    columns: &'a [&'a str],
    rows: Vec<JsonRow<'a>>,
}

pub fn to_json(rows: &[ResultRow]) -> Result<String, serde_json::Error> {
    let rows = rows
        .iter()
        .map(|r| JsonRow {
            id: &r.scenario_id,
            n: r.n,
            units: &r.units,
            sweep: r.sweep.as_ref().map(|(path, value)| JsonSweep { path, value: *value }),
            warnings: &r.warnings,
            oracle_truncation_tail: r.oracle_truncation_tail,
            fields: COLUMNS[2..]
                .iter()
                .zip(&r.fields)
                .filter_map(|(name, f)| {
                    f.map(|f| JsonField {
                        name,
                        value: f.value,
                        error: f.error,
                    })
                })
                .collect(),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&JsonDocument { columns: &COLUMNS, rows })?;
    s.push('\n');
    Ok(s)
}

pub fn render(rows: &[ResultRow], format: Format) -> Result<String, String> {
    match format {
        Format::Csv => to_csv(rows).map_err(|e| e.to_string()),
        Format::Json => to_json(rows).map_err(|e| e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultRow {
        let mut fields = vec![None; COLUMNS.len() - 2];
        fields[0] = Some(Field {
            value: 0.05066059182116889,
            error: Uncertainty::Estimate(1e-13),
        });
        fields[6] = Some(Field {
            value: 0.0,
            error: Uncertainty::Exact,
        });
        ResultRow {
            scenario_id: "s#0".into(),
            units: "natural".into(),
            n: 3,
            sweep: Some(("amplitude.peak".into(), 0.5)),
            fields,
            oracle_truncation_tail: None,
            warnings: vec![],
        }
    }

    #[test]
    fn csv_header_and_empty_cells() {
        let text = to_csv(&[row()]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
        let cells: Vec<_> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells.len(), COLUMNS.len());
        assert_eq!(cells[..4], ["s#0", "3", "5.066059182116889e-2", ""]);
        assert_eq!(cells[8], "0e0");
        assert!(cells[9..].iter().all(|c| c.is_empty()));
    }

    #[test]
    fn csv_float_cells_round_trip() {
        let text = to_csv(&[row()]).unwrap();
        let cell = text.lines().nth(1).unwrap().split(',').nth(2).unwrap().to_string();
        assert_eq!(cell.parse::<f64>().unwrap(), 0.05066059182116889);
    }

    #[test]
    fn json_marks_exact_fields() {
        let v: serde_json::Value = serde_json::from_str(&to_json(&[row()]).unwrap()).unwrap();
        let fields = v["rows"][0]["fields"].as_array().unwrap();
        assert_eq!(fields.len(), 2);
        assert_eq!(fields[0]["name"], "I_A");
        assert_eq!(fields[0]["error"], 1e-13);
        assert_eq!(fields[1]["name"], "C_A");
        assert_eq!(fields[1]["error"], "exact");
        assert_eq!(v["rows"][0]["sweep"]["path"], "amplitude.peak");
    }
}
