use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{DynamicQueryDef, ReportError};
use crate::star::{format_number, Accumulator, DualStarSchema, StarError};

/// Cross-tabulation of one measure by two dimension levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PivotGrid {
    /// Top-left header cell: `<row level>/<column level>`.
    pub corner: String,
    pub row_members: Vec<String>,
    pub column_members: Vec<String>,
    /// `cells[r][c]`; `None` where no fact row falls in the cell.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl PivotGrid {
    pub fn cell(&self, row: &str, column: &str) -> Option<f64> {
        let r = self.row_members.iter().position(|m| m == row)?;
        let c = self.column_members.iter().position(|m| m == column)?;
        self.cells[r][c]
    }

    /// RFC 4180 quoting, LF line endings, empty fields for empty cells.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let header =
            std::iter::once(self.corner.as_str()).chain(self.column_members.iter().map(String::as_str));
        w.write_record(header).expect("in-memory write");
        for (member, cells) in self.row_members.iter().zip(&self.cells) {
            let mut record = vec![member.clone()];
            record.extend(cells.iter().map(|c| c.map(format_number).unwrap_or_default()));
            w.write_record(&record).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

fn query_err(def: &DynamicQueryDef) -> impl Fn(StarError) -> ReportError + '_ {
    move |source| ReportError::Query {
        report: def.id.clone(),
        source,
    }
}

/// Evaluates a dynamic pattern: cell (r, c) aggregates the cube rows whose
/// leaf maps to row member r and column member c.
pub fn pivot(def: &DynamicQueryDef, s: &DualStarSchema) -> Result<PivotGrid, ReportError> {
    if def.rows == def.columns {
        return Err(ReportError::DegeneratePivot {
            report: def.id.clone(),
            dim: def.rows.dim,
            level: def.rows.level.clone(),
        });
    }
    let err = query_err(def);
    let table = s.table(Some(&def.cube)).map_err(&err)?;
    let row_dim = s.dim(def.rows.dim);
    let col_dim = s.dim(def.columns.dim);
    let row_level = row_dim.level_index(&def.rows.level).map_err(&err)?;
    let col_level = col_dim.level_index(&def.columns.level).map_err(&err)?;
    let filter = match &def.filter {
        Some(f) => {
            let dim = s.dim(f.dim);
            Some((dim, dim.level_index(&f.level).map_err(&err)?, f.member.as_str()))
        }
        None => None,
    };
    if !table.rows.is_empty() && !table.measure_names().contains(&def.measure) {
        return Err(err(StarError::UnknownMeasure {
            table: table.name.clone(),
            measure: def.measure.clone(),
            available: table.measure_names(),
        }));
    }

    let mut cells: BTreeMap<(&str, &str), Accumulator> = BTreeMap::new();
    for row in &table.rows {
        if let Some((dim, level, member)) = filter {
            if dim.member(&row.leaf_id, level) != Some(member) {
                continue;
            }
        }
        let r = row_dim.member(&row.leaf_id, row_level).expect("checked leaf");
        let c = col_dim.member(&row.leaf_id, col_level).expect("checked leaf");
        cells.entry((r, c)).or_default().push(row.measures[&def.measure]);
    }
    let rows: BTreeSet<&str> = cells.keys().map(|(r, _)| *r).collect();
    let cols: BTreeSet<&str> = cells.keys().map(|(_, c)| *c).collect();
    Ok(PivotGrid {
        corner: format!("{}/{}", def.rows.level, def.columns.level),
        cells: rows
            .iter()
            .map(|r| {
                cols.iter()
                    .map(|c| cells.get(&(*r, *c)).map(|acc| acc.finish(def.agg)))
                    .collect()
            })
            .collect(),
        row_members: rows.into_iter().map(String::from).collect(),
        column_members: cols.into_iter().map(String::from).collect(),
    })
}

/// [`pivot`] serialized as CSV.
pub fn run_dynamic(def: &DynamicQueryDef, s: &DualStarSchema) -> Result<Vec<u8>, ReportError> {
    Ok(pivot(def, s)?.to_csv())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reporting::tests::{dynamic_def, schema};
    use crate::reporting::PivotFilter;
    use crate::star::DimensionId;

    #[test]
    fn grid_and_csv() {
        let d = dynamic_def("p", "c1");
        let csv = String::from_utf8(run_dynamic(&d, &schema()).unwrap()).unwrap();
        assert_eq!(csv, "goal/program,p,q\na,15,\nb,,7\n");
    }

    #[test]
    fn filter_excluding_everything() {
        let mut d = dynamic_def("p", "c1");
        d.filter = Some(PivotFilter {
            dim: DimensionId::Goals,
            level: "goal".into(),
            member: "zzz".into(),
        });
        let csv = String::from_utf8(run_dynamic(&d, &schema()).unwrap()).unwrap();
        assert_eq!(csv, "goal/program\n");
    }

    #[test]
    fn filter_keeps_member() {
        let mut d = dynamic_def("p", "c1");
        d.filter = Some(PivotFilter {
            dim: DimensionId::Decisions,
            level: "program".into(),
            member: "q".into(),
        });
        let g = pivot(&d, &schema()).unwrap();
        assert_eq!(g.row_members, vec!["b"]);
        assert_eq!(g.cell("b", "q"), Some(7.0));
    }

    #[test]
    fn degenerate_pivot_rejected() {
        let mut d = dynamic_def("p", "c1");
        d.columns = d.rows.clone();
        assert!(matches!(
            pivot(&d, &schema()),
            Err(ReportError::DegeneratePivot { .. })
        ));
    }

    #[test]
    fn same_dimension_different_levels() {
        let mut d = dynamic_def("p", "c1");
        d.columns = crate::reporting::Axis {
            dim: DimensionId::Goals,
            level: "leaf".into(),
        };
        let g = pivot(&d, &schema()).unwrap();
        assert_eq!(g.cell("a", "x"), Some(15.0));
        assert_eq!(g.cell("a", "y"), None);
    }
}
