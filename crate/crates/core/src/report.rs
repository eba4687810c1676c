//! Structured results of validation runs.

use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsReport {
    pub name: String,
    pub metrics: Vec<(String, f64)>,
    pub series: Vec<(String, Vec<f64>)>,
    pub checks: Vec<Check>,
}

impl DiagnosticsReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.metrics.push((name.into(), value));
        self
    }

    pub fn push_series(&mut self, name: impl Into<String>, values: Vec<f64>) -> &mut Self {
        self.series.push((name.into(), values));
        self
    }

    /// Record `measured ≤ threshold`.
    pub fn check_le(&mut self, name: impl Into<String>, measured: f64, threshold: f64) -> bool {
        let passed = measured <= threshold;
        self.checks.push(Check {
            name: name.into(),
            measured,
            threshold,
            passed,
        });
        passed
    }

    /// Record a boolean property (measured 1 = holds).
    pub fn check_true(&mut self, name: impl Into<String>, holds: bool) -> bool {
        self.checks.push(Check {
            name: name.into(),
            measured: if holds { 1.0 } else { 0.0 },
            threshold: 1.0,
            passed: holds,
        });
        holds
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn get_series(&self, name: &str) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn merge(&mut self, other: DiagnosticsReport) {
        let prefix = |n: String| format!("{}.{}", other.name, n);
        self.metrics
            .extend(other.metrics.into_iter().map(|(n, v)| (prefix(n), v)));
        self.series
            .extend(other.series.into_iter().map(|(n, v)| (prefix(n), v)));
        self.checks.extend(other.checks.into_iter().map(|mut c| {
            c.name = prefix(c.name);
            c
        }));
    }

    /// Tidy CSV: one row per metric, series entry and check.
    pub fn to_csv(&self, manifest: &str) -> String {
        let mut s = String::from("report,kind,name,index,value,threshold,passed,manifest\n");
        for (n, v) in &self.metrics {
            let _ = writeln!(s, "{},metric,{},,{:e},,,{}", self.name, n, v, manifest);
        }
        for (n, vs) in &self.series {
            for (i, v) in vs.iter().enumerate() {
                let _ = writeln!(s, "{},series,{},{},{:e},,,{}", self.name, n, i, v, manifest);
            }
        }
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{},check,{},,{:e},{:e},{},{}",
                self.name, c.name, c.measured, c.threshold, c.passed, manifest
            );
        }
        s
    }
}

impl std::fmt::Display for DiagnosticsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "[{}]", self.name)?;
        for (n, v) in &self.metrics {
            writeln!(f, "  {n} = {v:.6e}")?;
        }
        for (n, vs) in &self.series {
            let body: Vec<String> = vs.iter().map(|v| format!("{v:.4e}")).collect();
            writeln!(f, "  {n} = [{}]", body.join(", "))?;
        }
        for c in &self.checks {
            let tag = if c.passed { "ok  " } else { "FAIL" };
            writeln!(f, "  {tag} {}: {:.4e} (limit {:.4e})", c.name, c.measured, c.threshold)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let mut r = DiagnosticsReport::new("k");
        r.metric("mass", 1.0);
        r.push_series("d", vec![0.5, 0.25]);
        assert!(r.check_le("err", 1e-4, 1e-3));
        assert!(!r.check_le("bad", 2.0, 1.0));
        let csv = r.to_csv("abc");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("report,kind"));
        assert!(lines.iter().skip(1).all(|l| l.ends_with(",abc")));
        assert!(!r.passed());
        assert_eq!(r.failures().len(), 1);
    }
}
