//! Result table and its CSV form.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use tandem_core::scoring::Confusion;
use tandem_core::{AlignmentResult, FrontEnd};

use crate::Dataset;

pub const CSV_HEADER: &str = "front_end,mixtures,dataset,pcr,acc";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub front_end: FrontEnd,
    pub mixtures: usize,
    pub dataset: Dataset,
    pub pcr: f64,
    pub acc: f64,
    pub counts: AlignmentResult,
    pub confusion: Confusion,
}

/// What one CSV line carries.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub front_end: FrontEnd,
    pub mixtures: usize,
    pub dataset: Dataset,
    pub pcr: f64,
    pub acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Rounds through the two-decimal text form, exactly as the CSV stores it.
fn two_decimals(x: f64) -> f64 {
    format!("{x:.2}").parse().expect("formatted float parses")
}

impl ResultTable {
    /// Rows ordered by front-end (in the given order), dataset, then
    /// ascending mixture count.
    pub fn sort(&mut self, front_ends: &[FrontEnd]) {
        let rank = |fe: FrontEnd| front_ends.iter().position(|&f| f == fe).unwrap_or(usize::MAX);
        self.rows
            .sort_by_key(|r| (rank(r.front_end), r.dataset, r.mixtures));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(out, "{},{},{},{:.2},{:.2}", r.front_end, r.mixtures, r.dataset, r.pcr, r.acc)
                .expect("writing to a String");
        }
        out
    }

    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.rows
            .iter()
            .map(|r| CsvRow {
                front_end: r.front_end,
                mixtures: r.mixtures,
                dataset: r.dataset,
                pcr: two_decimals(r.pcr),
                acc: two_decimals(r.acc),
            })
            .collect()
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.split('\n');
    if lines.next() != Some(CSV_HEADER) {
        bail!("CSV header is not `{CSV_HEADER}`");
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let ctx = || format!("CSV line {}", i + 2);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            bail!("{}: expected 5 fields, found {}", ctx(), fields.len());
        }
        for f in &fields[3..] {
            let decimals = f.split_once('.').map(|(_, d)| d.len());
            if decimals != Some(2) {
                bail!("{}: `{f}` does not have two decimals", ctx());
            }
        }
        rows.push(CsvRow {
            front_end: fields[0].parse().with_context(ctx)?,
            mixtures: fields[1].parse().with_context(ctx)?,
            dataset: fields[2].parse().with_context(ctx)?,
            pcr: fields[3].parse().with_context(ctx)?,
            acc: fields[4].parse().with_context(ctx)?,
        });
    }
    Ok(rows)
}

/// Tab-separated confusion counts: one row per reference symbol plus
/// `<ins>`, one column per hypothesis symbol plus `<del>`.
pub fn confusion_tsv(confusion: &Confusion, symbols: &[String]) -> String {
    let names: Vec<&str> = symbols.iter().map(String::as_str).collect();
    let mut out = String::from("ref\\hyp");
    for s in &names {
        out.push('\t');
        out.push_str(s);
    }
    out.push_str("\t<del>\n");
    for r in 0..=confusion.size {
        out.push_str(names.get(r).copied().unwrap_or("<ins>"));
        for h in 0..=confusion.size {
            write!(out, "\t{}", confusion.get(r, h)).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}
