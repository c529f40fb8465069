use super::{ReportError, StaticReportDef};
use crate::star::{format_number, DualStarSchema};

/// ASCII XML name: a letter or `_`, then letters, digits, `-`, `_` or `.`.
pub fn is_xml_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn escape_attr(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

fn write_attrs(out: &mut String, mut attrs: Vec<(&str, String)>) {
    attrs.sort_by(|a, b| a.0.cmp(b.0));
    for (name, value) in attrs {
        out.push(' ');
        out.push_str(name);
        out.push_str("=\"");
        out.push_str(&escape_attr(&value));
        out.push('"');
    }
}

/// Renders a static report as canonical XML: UTF-8, LF line endings,
/// attributes sorted by name, one `<row>` per roll-up group in roll-up
/// order.
pub fn render_static(def: &StaticReportDef, s: &DualStarSchema) -> Result<Vec<u8>, ReportError> {
    let xml_err = |name: &str| ReportError::XmlName {
        report: def.id.clone(),
        name: name.to_string(),
    };
    if !is_xml_name(&def.xml_root) {
        return Err(xml_err(&def.xml_root));
    }
    if let Some(m) = def
        .query
        .measures
        .iter()
        .find(|m| !is_xml_name(&m.name) || m.name == "member")
    {
        return Err(xml_err(&m.name));
    }
    let grid = s.rollup(&def.query).map_err(|source| ReportError::Query {
        report: def.id.clone(),
        source,
    })?;

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<");
    out.push_str(&def.xml_root);
    write_attrs(
        &mut out,
        vec![
            ("id", def.id.clone()),
            ("title", def.title.clone()),
            ("dim", grid.dim.to_string()),
            ("level", grid.level.clone()),
            ("table", grid.table.clone()),
        ],
    );
    out.push_str(">\n");
    for group in &grid.groups {
        out.push_str("  <row");
        let mut attrs = vec![("member", group.member.clone())];
        for (m, v) in grid.measures.iter().zip(&group.values) {
            attrs.push((m.name.as_str(), format_number(*v)));
        }
        write_attrs(&mut out, attrs);
        out.push_str("/>\n");
    }
    out.push_str("</");
    out.push_str(&def.xml_root);
    out.push_str(">\n");
    Ok(out.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reporting::tests::{schema, static_def};
    use crate::star::{DimensionHierarchy, DimensionId, FactTable};

    #[test]
    fn two_groups() {
        let xml = render_static(&static_def("costs"), &schema()).unwrap();
        let expected = concat!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
            "<report dim=\"goals\" id=\"costs\" level=\"goal\" table=\"c1\" title=\"Report costs\">\n",
            "  <row cost=\"15\" member=\"a\"/>\n",
            "  <row cost=\"7\" member=\"b\"/>\n",
            "</report>\n",
        );
        assert_eq!(String::from_utf8(xml).unwrap(), expected);
    }

    #[test]
    fn deterministic() {
        let s = schema();
        let d = static_def("costs");
        assert_eq!(render_static(&d, &s).unwrap(), render_static(&d, &s).unwrap());
    }

    #[test]
    fn empty_table_renders_no_rows() {
        let s = schema();
        let dims: Vec<DimensionHierarchy> = vec![
            s.dim(DimensionId::Goals).clone(),
            s.dim(DimensionId::Decisions).clone(),
        ];
        let empty = FactTable {
            name: "empty".into(),
            rows: vec![],
        };
        let s = DualStarSchema::new(dims, vec![empty], Some("empty".into())).unwrap();
        let xml = String::from_utf8(render_static(&static_def("e"), &s).unwrap()).unwrap();
        assert!(!xml.contains("<row"));
        assert!(xml.ends_with("</report>\n"));
    }

    #[test]
    fn escapes_attribute_values() {
        let mut d = static_def("q");
        d.title = "R&D <\"pilot\">".into();
        let xml = String::from_utf8(render_static(&d, &schema()).unwrap()).unwrap();
        assert!(
            xml.contains("title=\"R&amp;D &lt;&quot;pilot&quot;&gt;\""),
            "{xml}"
        );
    }

    #[test]
    fn query_errors_carry_report_id() {
        let mut d = static_def("broken");
        d.query.table = Some("nope".into());
        let err = render_static(&d, &schema()).unwrap_err();
        assert!(err.to_string().starts_with("report `broken`"), "{err}");
    }

    #[test]
    fn xml_names() {
        assert!(is_xml_name("report"));
        assert!(is_xml_name("_a.b-c1"));
        assert!(!is_xml_name("1a"));
        assert!(!is_xml_name(""));
        assert!(!is_xml_name("a b"));
    }
}
