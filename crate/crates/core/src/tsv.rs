//! Plot-ready TSV artifacts. Every file starts with `#`-prefixed metadata
//! lines followed by a tab-separated header row.

use std::fmt::Write as _;

use crate::action::BalanceResiduals;
use crate::anneal::{Aggregate, HistoryPoint};
use crate::grid::{BinGrid, Distribution, TransitionMatrix};

/// Ordered `key: value` metadata lines.
#[derive(Debug, Clone, Default)]
pub struct Metadata(Vec<(String, String)>);

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn extend(&mut self, other: &Metadata) {
        self.0.extend(other.0.iter().cloned());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out);
        out
    }

    fn write(&self, out: &mut String) {
        for (k, v) in &self.0 {
            let _ = writeln!(out, "# {k}: {v}");
        }
    }
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\t")
}

/// Square matrix: a header of source-bin centers, then one row per
/// destination bin led by its center.
fn square(meta: &Metadata, grid: &BinGrid, n: usize, row: impl Fn(usize) -> Vec<f64>) -> String {
    let mut out = String::new();
    meta.write(&mut out);
    let centers = grid.centers();
    let _ = writeln!(out, "dest\\source\t{}", join(centers.iter().copied()));
    for x in 0..n {
        let _ = writeln!(out, "{}\t{}", centers[x], join(row(x)));
    }
    out
}

pub fn transition_matrix(meta: &Metadata, grid: &BinGrid, w: &TransitionMatrix) -> String {
    let mut meta = meta.clone();
    meta.push("kind", w.kind().as_str());
    meta.push("layout", "rows = destination bin x, columns = source bin y");
    square(&meta, grid, w.size(), |x| w.row(x).to_vec())
}

pub fn residuals(meta: &Metadata, grid: &BinGrid, r: &BalanceResiduals) -> String {
    let mut meta = meta.clone();
    meta.push("entry", "(W(x,y)w(y) - W(y,x)w(x)) / (W(x,y)w(y) + W(y,x)w(x)), 0 where undefined");
    meta.push("contributing_pairs", r.contributing_pairs());
    square(&meta, grid, r.size(), |x| r.row(x).to_vec())
}

pub fn histogram(meta: &Metadata, grid: &BinGrid, d: &Distribution) -> String {
    let mut out = String::new();
    meta.write(&mut out);
    out.push_str("center\tweight\n");
    for (c, w) in grid.centers().into_iter().zip(d.weights()) {
        let _ = writeln!(out, "{c}\t{w}");
    }
    out
}

pub fn history(meta: &Metadata, points: &[HistoryPoint]) -> String {
    let mut out = String::new();
    meta.write(&mut out);
    out.push_str("j\tbeta\tS\n");
    for p in points {
        let _ = writeln!(out, "{}\t{}\t{}", p.step, p.beta, p.s);
    }
    out
}

pub fn aggregate(meta: &Metadata, grid: &BinGrid, agg: &Aggregate) -> String {
    let mut out = String::new();
    let mut meta = meta.clone();
    meta.push("error_estimator", "standard error of the mean across starts");
    meta.write(&mut out);
    out.push_str("center\tmean_w\tstderr\n");
    for ((c, m), e) in grid.centers().into_iter().zip(&agg.mean).zip(&agg.stderr) {
        let _ = writeln!(out, "{c}\t{m}\t{e}");
    }
    out
}
