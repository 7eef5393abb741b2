//! JSON report assembly. Numbers carry 17 significant digits.

use serde_json::{Map, Number, Value};

use crate::suites::SuiteOutcome;

/// A finite number as `d.dddddddddddddddde±x`; non-finite values become `null`.
pub fn number(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    let text = format!("{v:.16e}");
    Value::Number(text.parse::<Number>().expect("formatted float parses as a JSON number"))
}

pub fn suite_json(s: &SuiteOutcome) -> Value {
    let residuals: Map<String, Value> = s.residuals.entries().iter().map(|(l, v)| (l.clone(), number(*v))).collect();
    let mut m = Map::new();
    m.insert("name".into(), Value::String(s.name.clone()));
    m.insert("pass".into(), Value::Bool(s.pass));
    m.insert("residuals".into(), Value::Object(residuals));
    m.insert("details".into(), Value::Array(s.details.iter().cloned().map(Value::String).collect()));
    Value::Object(m)
}

pub fn report_json(scenario: &str, suites: &[SuiteOutcome]) -> Value {
    let mut m = Map::new();
    m.insert("scenario".into(), Value::String(scenario.into()));
    m.insert("suites".into(), Value::Array(suites.iter().map(suite_json).collect()));
    m.insert("pass".into(), Value::Bool(suites.iter().all(|s| s.pass)));
    Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(number(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(number(-0.5).to_string(), "-5.0000000000000000e-1");
        assert_eq!(number(-2.5e-13).to_string(), "-2.4999999999999999e-13");
        assert_eq!(number(f64::NAN), Value::Null);
        assert_eq!(number(f64::INFINITY), Value::Null);
    }
}
