//! Record rendering for the three output formats.
//!
//! Every command produces a [`Report`]: header metadata plus rows of named
//! fields. CSV puts metadata on `#` lines before the header row; ndjson
//! emits one `{"meta": ...}` object first, then one object per row.

use std::fmt::Write as _;

use spdc_core::config::OutputFormat;

/// Bumped whenever a column is renamed, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Missing,
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}
impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Value::Missing, Value::Num)
    }
}
impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as u64)
    }
}
impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}
impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}
impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

pub type Row = Vec<(&'static str, Value)>;

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: &'static str,
    pub meta: Vec<(String, String)>,
    pub rows: Vec<Row>,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Report { command, ..Default::default() }
    }

    pub fn meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    /// Numeric metadata in exponent form.
    pub fn meta_num(self, key: impl Into<String>, value: f64) -> Self {
        self.meta(key, format!("{value:e}"))
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.csv(),
            OutputFormat::Ndjson => self.ndjson(),
            OutputFormat::Table => self.table(),
        }
    }

    fn header_meta(&self) -> Vec<(String, String)> {
        let mut m = vec![
            ("command".to_string(), self.command.to_string()),
            ("schema".to_string(), SCHEMA_VERSION.to_string()),
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ];
        m.extend(self.meta.iter().cloned());
        m
    }

    fn columns(&self) -> Vec<&'static str> {
        self.rows.first().map(|r| r.iter().map(|(k, _)| *k).collect()).unwrap_or_default()
    }

    fn csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.header_meta() {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out.push_str(&self.columns().join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|(_, v)| csv_cell(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn ndjson(&self) -> String {
        let mut out = String::new();
        let meta: Vec<String> =
            self.header_meta().iter().map(|(k, v)| format!("{}:{}", json_str(k), json_str(v))).collect();
        let _ = writeln!(out, "{{\"meta\":{{{}}}}}", meta.join(","));
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|(k, v)| format!("{}:{}", json_str(k), json_value(v))).collect();
            let _ = writeln!(out, "{{{}}}", fields.join(","));
        }
        out
    }

    fn table(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k} = {v}");
        }
        // A single record reads better as key/value lines.
        if self.rows.len() == 1 {
            let row = &self.rows[0];
            let w = row.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, v) in row {
                let _ = writeln!(out, "{k:<w$}  {}", table_cell(v));
            }
            return out;
        }
        let cols = self.columns();
        let cells: Vec<Vec<String>> =
            self.rows.iter().map(|r| r.iter().map(|(_, v)| table_cell(v)).collect()).collect();
        let widths: Vec<usize> = cols
            .iter()
            .enumerate()
            .map(|(j, c)| cells.iter().map(|r| r[j].len()).chain([c.len()]).max().unwrap_or(0))
            .collect();
        let line = |items: &[String]| {
            items.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect::<Vec<_>>().join("  ")
        };
        let head: Vec<String> = cols.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{}", line(&head));
        for r in &cells {
            let _ = writeln!(out, "{}", line(r));
        }
        out
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_value(v: &Value) -> String {
    match v {
        Value::Num(x) if x.is_finite() => format!("{x:?}"),
        Value::Num(_) | Value::Missing => "null".into(),
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Text(s) => json_str(s),
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        // Shortest representation that round-trips.
        Value::Num(x) => format!("{x:?}"),
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Missing => String::new(),
        Value::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::Text(s) => s.clone(),
    }
}

fn table_cell(v: &Value) -> String {
    match v {
        Value::Num(x) if *x == 0.0 || (1e-3..1e6).contains(&x.abs()) => format!("{x:.6}"),
        Value::Num(x) => format!("{x:.6e}"),
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Missing => "-".into(),
        Value::Text(s) => s.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report::new("demo").meta("config", "x").meta("note", "a b").tap_rows()
    }

    impl Report {
        fn tap_rows(mut self) -> Self {
            self.rows = vec![
                vec![("a", Value::Num(0.1)), ("b", Value::Text("p,q".into())), ("c", Value::Missing)],
                vec![("a", Value::Num(-2.5e-12)), ("b", Value::Text("r".into())), ("c", Value::Bool(true))],
            ];
            self
        }
    }

    #[test]
    fn csv_layout() {
        let s = sample().render(OutputFormat::Csv);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# command = demo");
        assert!(lines.iter().take_while(|l| l.starts_with('#')).any(|l| *l == "# config = x"));
        let body: Vec<&str> = lines.into_iter().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, ["a,b,c", "0.1,\"p,q\",", "-2.5e-12,r,true"]);
    }

    #[test]
    fn ndjson_lines_parse() {
        let s = sample().render(OutputFormat::Ndjson);
        let objs: Vec<serde_json::Value> = s.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(objs[0]["meta"]["command"], "demo");
        assert_eq!(objs[0]["meta"]["schema"], "1");
        assert_eq!(objs[1]["a"], 0.1);
        assert!(objs[1]["c"].is_null());
        assert_eq!(objs[2]["c"], true);
    }

    #[test]
    fn numbers_round_trip_through_csv() {
        for x in [1.0 / 3.0, 6.02214076e23, -1e-300, 0.0] {
            assert_eq!(csv_cell(&Value::Num(x)).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn single_record_table_is_key_value() {
        let mut r = Report::new("one");
        r.rows.push(vec![("alpha", Value::Num(2.0)), ("b", Value::Num(3e-9))]);
        let t = r.render(OutputFormat::Table);
        assert_eq!(t, "alpha  2.000000\nb      3.000000e-9\n");
    }
}
