//! Labeled residual reports shared by the check operations.

use std::fmt;

/// Ordered list of labeled residuals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResidualReport {
    entries: Vec<(String, f64)>,
}

impl ResidualReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `value` under `label`, keeping the maximum if the label exists.
    /// NaN is kept as NaN so that it never passes a threshold.
    pub fn record(&mut self, label: &str, value: f64) {
        if let Some(e) = self.entries.iter_mut().find(|(l, _)| l == label) {
            if value.is_nan() || value > e.1 {
                e.1 = value;
            }
        } else {
            self.entries.push((label.to_string(), value));
        }
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.entries.iter().find(|(l, _)| l == label).map(|e| e.1)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest residual, or 0 for an empty report.
    pub fn max(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.1)
            .fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
    }

    /// First label whose residual is not below `tol`.
    pub fn first_failing(&self, tol: f64) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, v)| !(*v < tol))
            .map(|(l, _)| l.as_str())
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.first_failing(tol).is_none()
    }

    /// Appends all entries of `other` with a label prefix.
    pub fn merge(&mut self, prefix: &str, other: &ResidualReport) {
        for (l, v) in &other.entries {
            self.record(&format!("{prefix}{l}"), *v);
        }
    }
}

impl fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (l, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}={v:.3e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_keeps_maximum_and_nan() {
        let mut r = ResidualReport::new();
        r.record("a", 1e-3);
        r.record("a", 1e-5);
        r.record("b", 2.0);
        assert_eq!(r.get("a"), Some(1e-3));
        assert_eq!(r.first_failing(0.1), Some("b"));
        r.record("c", f64::NAN);
        assert!(!r.passes(1e9));
    }
}
