//! Tabular output as CSV or JSON, plus the optional timestamp line.

use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Count(u64),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Count(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Twelve significant digits, fixed-point for ordinary magnitudes.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, x)
    } else {
        format!("{x:.11e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Count(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Count(n) => Value::from(*n),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, timestamp: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(ts) = timestamp {
            out.push_str(&format!("# generated_at={ts}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json_value(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| ((*c).to_owned(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

pub fn to_json_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_twelve_significant_digits() {
        assert_eq!(fmt_num(1540.0), "1540.00000000");
        assert_eq!(fmt_num(0.14), "0.140000000000");
        assert_eq!(fmt_num(-1.15390e-5), "-0.0000115390000000");
        assert_eq!(fmt_num(299_792_458.0), "299792458.000");
        assert_eq!(fmt_num(6.5e-9), "6.50000000000e-9");
        assert_eq!(fmt_num(0.0), "0");
        let x = 0.004_892_001_893_681_4;
        assert!((fmt_num(x).parse::<f64>().unwrap() - x).abs() < 1e-14);
    }

    #[test]
    fn csv_has_header_and_optional_timestamp() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![Cell::Int(-3), Cell::Bool(true), Cell::Empty]);
        assert_eq!(t.to_csv(None), "a,b,c\n-3,true,\n");
        assert!(t.to_csv(Some("T")).starts_with("# generated_at=T\na,b,c\n"));
    }

    #[test]
    fn json_rows_are_objects() {
        let mut t = Table::new(&["x", "q"]);
        t.push(vec![Cell::Num(1.5), Cell::Empty]);
        assert_eq!(t.to_json_value(), serde_json::json!([{"x": 1.5, "q": null}]));
    }
}
