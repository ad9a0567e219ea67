use std::io::{self, Write};

/// A set of named curves, one row per `(x, series)` point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurveTable {
    pub x_label: String,
    pub y_label: String,
    pub rows: Vec<CurveRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub series: String,
    pub y: f64,
}

impl CurveTable {
    pub fn new(x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            x_label: x_label.into(),
            y_label: y_label.into(),
            rows: Vec::new(),
        }
    }

    pub fn push_series(&mut self, label: &str, points: impl IntoIterator<Item = (f64, f64)>) {
        self.rows.extend(points.into_iter().map(|(x, y)| CurveRow {
            x,
            series: label.to_owned(),
            y,
        }));
    }

    /// Series labels in first-appearance order.
    pub fn labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.series.as_str()) {
                out.push(&r.series);
            }
        }
        out
    }

    pub fn series(&self, label: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.series == label)
            .map(|r| (r.x, r.y))
            .collect()
    }

    /// Writes `x,series,y` rows under a header naming the axes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{},series,{}", self.x_label, self.y_label)?;
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.x, r.series, r.y)?;
        }
        Ok(())
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
