//! Text formats read and written by the command-line tool.
//!
//! Writers return the whole file as a string so a caller can validate
//! everything before touching the output path.

use std::path::Path;

use crate::analysis::Partition;
use crate::engine::{ContiguityGraph, MergeTree, Merger};
use crate::heights::HeightSequence;
use crate::proximity::{DissimilarityMatrix, KernelMatrix, PointSet, SimilarityMatrix};
use crate::{Error, Result};

/// Shortest `%g`-style rendering with 12 significant digits; integral values keep a `.0`.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return format!("{s}.0");
    }
    let t = s.trim_end_matches('0');
    if t.ends_with('.') {
        format!("{t}0")
    } else {
        t.to_string()
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn records(text: &str) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push(rec.iter().map(str::to_string).collect());
    }
    Ok(out)
}

fn parse_number(field: &str, line: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Input(format!("record {line}: {field:?} is not a finite number")))
}

fn numeric_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut recs = records(text)?;
    if let Some(first) = recs.first() {
        if first.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            recs.remove(0);
        }
    }
    recs.iter()
        .enumerate()
        .map(|(line, r)| r.iter().map(|f| parse_number(f, line + 1)).collect())
        .collect()
}

/// One object per row; a leading non-numeric row is taken as a header.
pub fn parse_points(text: &str) -> Result<PointSet> {
    let rows = numeric_rows(text)?;
    if rows.is_empty() {
        return Err(Error::Input("points file has no rows".into()));
    }
    PointSet::from_rows(&rows)
}

/// Matrix contents as found in a file.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixText {
    /// Row-major `n x n` values.
    Square { n: usize, values: Vec<f64> },
    /// Upper triangle without diagonal, after an `n=<count>` header line.
    Condensed { n: usize, values: Vec<f64> },
}

pub fn parse_matrix(text: &str) -> Result<MatrixText> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
    if let Some(count) = first.and_then(|l| l.strip_prefix("n=")) {
        let n: usize =
            count.trim().parse().map_err(|_| Error::Input(format!("bad condensed header {:?}", first.unwrap())))?;
        let body = text.split_once(first.unwrap()).map(|(_, rest)| rest).unwrap_or("");
        let values: Vec<f64> = numeric_rows(body)?.into_iter().flatten().collect();
        return Ok(MatrixText::Condensed { n, values });
    }
    let rows = numeric_rows(text)?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Input("matrix file has no rows".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Input(format!("row {} has {} values, expected {n}", i + 1, r.len())));
    }
    Ok(MatrixText::Square { n, values: rows.into_iter().flatten().collect() })
}

pub fn parse_dissimilarity(text: &str) -> Result<DissimilarityMatrix> {
    match parse_matrix(text)? {
        MatrixText::Square { n, values } => DissimilarityMatrix::from_square(n, &values),
        MatrixText::Condensed { n, values } => DissimilarityMatrix::from_condensed_unchecked(n, values),
    }
}

fn square_only(text: &str, what: &str) -> Result<(usize, Vec<f64>)> {
    match parse_matrix(text)? {
        MatrixText::Square { n, values } => Ok((n, values)),
        MatrixText::Condensed { .. } => Err(Error::Input(format!("a {what} matrix must be given in full square form"))),
    }
}

pub fn parse_kernel(text: &str) -> Result<KernelMatrix> {
    let (n, values) = square_only(text, "kernel")?;
    KernelMatrix::new(n, values)
}

pub fn parse_similarity(text: &str) -> Result<SimilarityMatrix> {
    let (n, values) = square_only(text, "similarity")?;
    SimilarityMatrix::new(n, values)
}

/// One `i j` pair per line, 0-based, whitespace or comma separated.
pub fn parse_edges(text: &str, n: usize) -> Result<ContiguityGraph> {
    let mut edges = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
        let parse = |f: &str| {
            f.parse::<usize>().map_err(|_| Error::Input(format!("edge line {}: {f:?} is not an index", line_no + 1)))
        };
        match fields.as_slice() {
            [a, b] => edges.push((parse(a)?, parse(b)?)),
            _ => return Err(Error::Input(format!("edge line {} must hold two indices", line_no + 1))),
        }
    }
    ContiguityGraph::new(n, edges)
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const TREE_HEADER: [&str; 5] = ["step", "left", "right", "linkage", "size"];

pub fn tree_to_csv(tree: &MergeTree) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TREE_HEADER)?;
    for m in tree.mergers() {
        w.write_record([
            m.step.to_string(),
            m.left.to_string(),
            m.right.to_string(),
            format_float(m.linkage),
            m.size.to_string(),
        ])?;
    }
    finish(w)
}

pub fn parse_tree(text: &str) -> Result<MergeTree> {
    let recs = records(text)?;
    let Some((header, rows)) = recs.split_first() else {
        return Err(Error::Input("tree file is empty".into()));
    };
    if header.iter().map(String::as_str).ne(TREE_HEADER) {
        return Err(Error::Input(format!("tree header must be {}", TREE_HEADER.join(","))));
    }
    let index = |f: &str, line: usize| {
        f.parse::<usize>().map_err(|_| Error::Input(format!("tree record {line}: {f:?} is not an index")))
    };
    let mut mergers = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let line = i + 1;
        if r.len() != TREE_HEADER.len() {
            return Err(Error::Input(format!("tree record {line} has {} fields", r.len())));
        }
        mergers.push(Merger {
            step: index(&r[0], line)?,
            left: index(&r[1], line)?,
            right: index(&r[2], line)?,
            linkage: r[3]
                .parse()
                .map_err(|_| Error::Input(format!("tree record {line}: {:?} is not a number", r[3])))?,
            size: index(&r[4], line)?,
        });
    }
    MergeTree::new(mergers.len() + 1, mergers)
}

/// One row per step with the four heights and their reversal flags (`1` or `0`).
pub fn heights_to_csv(seqs: &[HeightSequence]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["step".to_string()];
    header.extend(seqs.iter().map(|s| long_name(s.kind).to_string()));
    header.extend(seqs.iter().map(|s| format!("is_reversal_{}", s.kind.name())));
    w.write_record(&header)?;
    let steps = seqs.first().map_or(0, |s| s.values.len());
    for t in 0..steps {
        let mut row = vec![(t + 1).to_string()];
        row.extend(seqs.iter().map(|s| format_float(s.values[t])));
        row.extend(seqs.iter().map(|s| if s.reversal_steps.contains(&(t + 1)) { "1" } else { "0" }.to_string()));
        w.write_record(&row)?;
    }
    finish(w)
}

fn long_name(kind: crate::heights::HeightKind) -> &'static str {
    use crate::heights::HeightKind::*;
    match kind {
        Linkage => "m",
        Ess => "ess",
        MergerInertia => "merger_inertia",
        AvgMergerInertia => "avg_merger_inertia",
    }
}

pub fn partition_to_csv(p: &Partition) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["object", "label"])?;
    for (i, l) in p.labels().iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    finish(w)
}

/// Rows `object,label` under a header; objects must be `0..n` in any order.
pub fn parse_partition(text: &str) -> Result<Partition> {
    let recs = records(text)?;
    let Some((header, rows)) = recs.split_first() else {
        return Err(Error::Input("partition file is empty".into()));
    };
    if header.len() != 2 || header[0] != "object" || header[1] != "label" {
        return Err(Error::Input("partition header must be object,label".into()));
    }
    let mut labels: Vec<Option<String>> = vec![None; rows.len()];
    for (i, r) in rows.iter().enumerate() {
        let [obj, label] = r.as_slice() else {
            return Err(Error::Input(format!("partition record {} must have 2 fields", i + 1)));
        };
        let obj: usize = obj
            .parse()
            .ok()
            .filter(|&o| o < rows.len())
            .ok_or_else(|| Error::Input(format!("partition record {}: bad object index {obj:?}", i + 1)))?;
        if labels[obj].replace(label.clone()).is_some() {
            return Err(Error::Input(format!("object {obj} listed twice")));
        }
    }
    let labels: Vec<String> = labels.into_iter().map(|l| l.expect("every object seen once")).collect();
    Partition::from_labels(&labels)
}
