//! Result emission: JSON with stable snake_case field names and CSV with a
//! fixed column order. Floats are serialised with 17 significant digits so
//! repeated runs diff byte-for-byte and re-parsing reproduces the exact bits.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;

/// serde_json formatter that renders every f64 as `{:.16e}`.
struct SigDigits17;

impl Formatter for SigDigits17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            // JSON has no inf/nan literals
            write!(writer, "null")
        }
    }
}

/// Serialise to JSON text (pretty-stable: two-space indent, sorted maps come
/// from BTreeMap on the caller side).
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits17);
    value.serialize(&mut ser).expect("in-memory serialisation");
    let mut s = String::from_utf8(out).expect("json is utf-8");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    std::fs::write(path, to_json(value))
}

/// Fixed-layout CSV: header row plus rows of 17-digit floats (or raw strings).
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, values: &[CsvValue]) {
        assert_eq!(values.len(), self.columns, "column count mismatch");
        let rendered: Vec<String> = values
            .iter()
            .map(|v| match v {
                CsvValue::Float(x) => format!("{x:.16e}"),
                CsvValue::Text(s) => s.clone(),
            })
            .collect();
        self.text.push_str(&rendered.join(","));
        self.text.push('\n');
    }

    pub fn float_row(&mut self, values: &[f64]) {
        let vals: Vec<CsvValue> = values.iter().map(|&v| CsvValue::Float(v)).collect();
        self.row(&vals);
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, &self.text)
    }

    #[cfg(test)]
    pub fn text(&self) -> &str {
        &self.text
    }
}

pub enum CsvValue {
    Float(f64),
    Text(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for &v in &[
            1.0,
            -0.1,
            std::f64::consts::PI,
            1.386_108_843_994_141e0,
            2.2e-308,
            7.0 / 3.0,
        ] {
            let s = format!("{v:.16e}");
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s} -> {back}");
        }
    }

    #[test]
    fn json_uses_sig17_floats() {
        #[derive(Serialize)]
        struct Probe {
            x: f64,
        }
        let s = to_json(&Probe { x: 0.1 });
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
    }

    #[test]
    fn csv_layout() {
        let mut csv = Csv::new(&["a", "b"]);
        csv.float_row(&[1.0, 2.0]);
        csv.row(&[CsvValue::Float(0.5), CsvValue::Text(String::new())]);
        let lines: Vec<&str> = csv.text().lines().collect();
        assert_eq!(lines[0], "a,b");
        assert!(lines[1].starts_with("1.0000000000000000e0,"));
        assert!(lines[2].ends_with(','));
    }
}
