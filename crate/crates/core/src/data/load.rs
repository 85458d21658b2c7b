use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use super::{DataError, Dataset, FeatureSchema, Role, SchemaFile};

/// Loads a headered CSV and its JSON schema.
///
/// Columns listed under `categorical` are binarized: two-level columns become a
/// single indicator for the lexicographically larger level, wider ones expand to
/// one indicator per level (named `column=level`). Columns the schema does not
/// mention are dropped. The delimiter is `,` unless the header line only
/// contains `;` (the layout of the UCI student files).
pub fn load_dataset(path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let schema_file = SchemaFile::read(schema_path)?;
    if !path.exists() {
        return Err(DataError::DataNotFound(path.display().to_string()));
    }
    let text = fs::read_to_string(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    parse_dataset(&text, &schema_file)
}

pub(crate) fn parse_dataset(text: &str, sf: &SchemaFile) -> Result<Dataset, DataError> {
    sf.check_shape()?;
    let header_line = text.lines().next().unwrap_or("");
    let delimiter = if !header_line.contains(',') && header_line.contains(';') { b';' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;
    if records.is_empty() {
        return Err(DataError::Empty);
    }

    for name in sf
        .control
        .iter()
        .chain(&sf.indirect)
        .chain(&sf.treatment)
        .chain(std::iter::once(&sf.label))
        .chain(&sf.categorical)
    {
        if !header.contains(name) {
            return Err(DataError::UnknownColumn(name.clone()));
        }
    }
    if sf.categorical.contains(&sf.label) {
        return Err(DataError::InvalidSchema("the label column cannot be categorical".into()));
    }
    let label_col = header.iter().position(|h| h == &sf.label).unwrap();

    // Expanded column plan, in file order.
    struct Source {
        name: String,
        col: usize,
        role: Role,
        /// `None` for numeric columns, else the indicator level(s) this output column encodes.
        level: Option<String>,
    }
    let mut plan: Vec<Source> = Vec::new();
    for (col, name) in header.iter().enumerate() {
        let Some(role) = sf.role_of(name) else { continue };
        if sf.categorical.contains(name) {
            let levels: BTreeSet<&str> = records.iter().map(|r| &r[col]).collect();
            let levels: Vec<&str> = levels.into_iter().collect();
            let kept: &[&str] = if levels.len() <= 2 { &levels[levels.len() - 1..] } else { &levels };
            for level in kept {
                plan.push(Source { name: format!("{name}={level}"), col, role, level: Some((*level).to_string()) });
            }
        } else {
            plan.push(Source { name: name.clone(), col, role, level: None });
        }
    }

    let mut x = Vec::with_capacity(records.len());
    let mut y = Vec::with_capacity(records.len());
    for (row, rec) in records.iter().enumerate() {
        let mut values = Vec::with_capacity(plan.len());
        for src in &plan {
            let cell = &rec[src.col];
            let v =
                match &src.level {
                    Some(level) => f64::from(u8::from(cell == level)),
                    None => cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        DataError::NonNumeric { row, column: header[src.col].clone(), value: cell.to_string() }
                    })?,
                };
            values.push(v);
        }
        x.push(values);
        y.push(map_label(&rec[label_col], sf.positive_label_values.as_deref(), row)?);
    }

    let index_of = |role: Role| -> Vec<usize> {
        plan.iter().enumerate().filter(|(_, s)| s.role == role).map(|(j, _)| j).collect()
    };
    let treatment_idx_expanded = index_of(Role::Treatment);
    // Costs and bounds follow each expanded treatment column back to its source entry.
    let mut cost_up = Vec::new();
    let mut cost_down = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for &j in &treatment_idx_expanded {
        let src_name = &header[plan[j].col];
        let t = sf.treatment.iter().position(|n| n == src_name).unwrap();
        cost_up.push(sf.cost_up[t]);
        cost_down.push(sf.cost_down[t]);
        lower.push(sf.lower[t]);
        upper.push(sf.upper[t]);
    }
    let schema = FeatureSchema::new(
        plan.iter().map(|s| s.name.clone()).collect(),
        index_of(Role::Control),
        index_of(Role::Indirect),
        treatment_idx_expanded,
        cost_up,
        cost_down,
        lower,
        upper,
        sf.categorical.clone(),
    )?;
    Dataset::new(x, y, schema)
}

fn map_label(cell: &str, positive: Option<&[serde_json::Value]>, row: usize) -> Result<u8, DataError> {
    match positive {
        Some(values) => {
            let numeric = cell.parse::<f64>().ok();
            let hit = values.iter().any(|v| match v {
                serde_json::Value::String(s) => s == cell,
                serde_json::Value::Number(n) => numeric.is_some() && n.as_f64() == numeric,
                serde_json::Value::Bool(b) => cell.eq_ignore_ascii_case(if *b { "true" } else { "false" }),
                _ => false,
            });
            Ok(u8::from(hit))
        }
        None => match cell.parse::<f64>() {
            Ok(v) if v == 0.0 => Ok(0),
            Ok(v) if v == 1.0 => Ok(1),
            _ => Err(DataError::LabelOutOfRange { row, value: cell.to_string() }),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_file(json: &str) -> SchemaFile {
        serde_json::from_str(json).unwrap()
    }

    const BASIC: &str = r#"{
        "label": "y", "control": ["a"], "indirect": [], "treatment": ["t"],
        "cost_up": [1], "cost_down": [2], "lower": [0], "upper": [1]
    }"#;

    #[test]
    fn single_row_values_unchanged() {
        let ds = parse_dataset("a,t,y\n3.5,0.25,1\n", &schema_file(BASIC)).unwrap();
        assert_eq!(ds.n(), 1);
        assert_eq!(ds.x[0], vec![3.5, 0.25]);
        assert_eq!(ds.y, vec![1]);
        assert!(ds.norm_params.is_none());
    }

    #[test]
    fn three_level_categorical_expands() {
        let sf = schema_file(
            r#"{
            "label": "y", "control": ["job", "a"], "indirect": [], "treatment": ["t"],
            "cost_up": [1], "cost_down": [1], "lower": [0], "upper": [1], "categorical": ["job"]
        }"#,
        );
        let text = "job,a,t,y\nteacher,1,0,0\nhealth,2,1,1\nother,3,0,1\nhealth,4,1,0\n";
        let ds = parse_dataset(text, &sf).unwrap();
        assert_eq!(ds.schema.feature_names, vec!["job=health", "job=other", "job=teacher", "a", "t"]);
        assert_eq!(ds.schema.control_idx, vec![0, 1, 2, 3]);
        assert_eq!(ds.schema.treatment_idx, vec![4]);
        for row in &ds.x {
            assert_eq!(row[0] + row[1] + row[2], 1.0);
        }
    }

    #[test]
    fn binary_categorical_becomes_one_column_with_replicated_costs() {
        let sf = schema_file(
            r#"{
            "label": "g", "positive_label_values": [0, 1, 2, "low"],
            "control": ["a"], "treatment": ["paid", "t"],
            "cost_up": [3, 1], "cost_down": [4, 1], "lower": [0, 0.1], "upper": [1, 0.9],
            "categorical": ["paid"]
        }"#,
        );
        let text = "a;paid;t;g\n1;\"yes\";0.5;2\n2;\"no\";0.2;15\n3;\"no\";0.2;low\n";
        let ds = parse_dataset(text, &sf).unwrap();
        assert_eq!(ds.schema.feature_names, vec!["a", "paid=yes", "t"]);
        assert_eq!(ds.column(1), vec![1.0, 0.0, 0.0]);
        assert_eq!(ds.schema.cost_up, vec![3.0, 1.0]);
        assert_eq!(ds.schema.upper, vec![1.0, 0.9]);
        assert_eq!(ds.y, vec![1, 0, 1]);
    }

    #[test]
    fn error_paths() {
        let sf = schema_file(BASIC);
        assert!(matches!(parse_dataset("a,t,y\nx,0,1\n", &sf), Err(DataError::NonNumeric { row: 0, .. })));
        assert!(matches!(parse_dataset("a,t,y\n1,0,2\n", &sf), Err(DataError::LabelOutOfRange { row: 0, .. })));
        assert!(matches!(parse_dataset("a,q,y\n1,0,1\n", &sf), Err(DataError::UnknownColumn(c)) if c == "t"));
        assert!(matches!(parse_dataset("a,t,y\n", &sf), Err(DataError::Empty)));
    }

    #[test]
    fn missing_files_reported() {
        let dir = tempfile::tempdir().unwrap();
        let schema = dir.path().join("schema.json");
        assert!(matches!(load_dataset(dir.path().join("d.csv"), &schema), Err(DataError::SchemaNotFound(_))));
        std::fs::write(&schema, BASIC).unwrap();
        assert!(matches!(load_dataset(dir.path().join("d.csv"), &schema), Err(DataError::DataNotFound(_))));
    }
}
