use std::collections::BTreeMap;

use super::{format_number, FactRow, FactTable, StarError};

const LEAF_COLUMN: &str = "leaf_id";

fn csv_err(e: impl std::fmt::Display) -> StarError {
    StarError::Csv(e.to_string())
}

/// `leaf_id` then the measure names, one line per row, LF endings.
pub fn export_fact_csv(table: &FactTable) -> String {
    let measures = table.measure_names();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header = std::iter::once(LEAF_COLUMN).chain(measures.iter().map(String::as_str));
    w.write_record(header).expect("in-memory write");
    for row in &table.rows {
        let mut record = vec![row.leaf_id.clone()];
        record.extend(measures.iter().map(|m| format_number(row.measures[m])));
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn import_fact_csv(name: &str, text: &str) -> Result<FactTable, StarError> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some(LEAF_COLUMN) {
        return Err(StarError::Csv(format!(
            "table `{name}`: first column must be `{LEAF_COLUMN}`"
        )));
    }
    let measures: Vec<&str> = header.iter().skip(1).collect();
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = i + 2;
        let leaf_id = record[0].to_string();
        let mut values = BTreeMap::new();
        for (m, field) in measures.iter().zip(record.iter().skip(1)) {
            let v: f64 = field.trim().parse().map_err(|_| {
                StarError::Csv(format!(
                    "table `{name}` line {line}: `{field}` is not a number for `{m}`"
                ))
            })?;
            values.insert(m.to_string(), v);
        }
        rows.push(FactRow {
            leaf_id,
            measures: values,
        });
    }
    Ok(FactTable {
        name: name.to_string(),
        rows,
    })
}
