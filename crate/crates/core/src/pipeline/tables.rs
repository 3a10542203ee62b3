//! Tab-separated descriptive, correlation and regression tables, with parsers
//! that read back what the renderers print.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::analysis::{AnalysisRow, DurationCorrelation, BINARY_REGRESSORS, REGRESSORS};
use super::history::Occupation;
use super::PipelineError;
use crate::econometrics::{BinaryFit, CorrelationMatrix, EconError, MnlFit};

const DECIMALS: usize = 3;

/// Significance stars at the 1%, 5% and 10% levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

const LABELS: [(&str, &str); 12] = [
    ("aversion", "Ambiguity aversion"),
    ("sensitivity", "Ambiguity sensitivity"),
    ("risk_aversion", "Risk aversion"),
    ("optimism", "Optimism"),
    ("cognitive", "Cognitive skill"),
    ("upper_secondary", "Upper sec. educ."),
    ("tertiary", "Tertiary education"),
    ("age", "Age"),
    ("female", "Female"),
    ("married", "Married"),
    ("children", "No. of children"),
    ("duration", "Duration"),
];

fn label(name: &str) -> &str {
    LABELS.iter().find(|(n, _)| *n == name).map_or(name, |(_, l)| l)
}

fn unlabel(text: &str) -> String {
    LABELS.iter().find(|(_, l)| *l == text).map_or(text, |(n, _)| n).to_string()
}

fn num(v: f64) -> String {
    let s = format!("{v:.DECIMALS$}");
    // Avoid printing "-0.000".
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

/// Rounds to the printed precision.
fn printed(v: f64) -> f64 {
    num(v).parse().expect("formatted number")
}

fn parse_num(s: &str) -> Result<f64, PipelineError> {
    s.trim().parse().map_err(|_| PipelineError::MalformedTable(format!("expected a number, found `{s}`")))
}

fn parse_opt(s: &str) -> Result<Option<f64>, PipelineError> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_num(s).map(Some)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    pub variable: String,
    /// Mean and SD per group; the SD is `None` for binary variables.
    pub cells: Vec<(Option<f64>, Option<f64>)>,
}

/// Group means and SDs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveTable {
    pub groups: Vec<String>,
    pub rows: Vec<DescriptiveRow>,
    pub n: Vec<usize>,
}

impl DescriptiveTable {
    /// The same table rounded to printed precision.
    pub fn rounded(&self) -> Self {
        let mut t = self.clone();
        for r in &mut t.rows {
            for (m, s) in &mut r.cells {
                *m = m.map(printed);
                *s = s.map(printed);
            }
        }
        t
    }
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    (Some(m), Some(sd))
}

/// Means and SDs of every regressor by occupation, plus the pooled sample.
pub fn descriptive_table(rows: &[AnalysisRow]) -> DescriptiveTable {
    let mut groups: Vec<(String, Vec<&AnalysisRow>)> = Occupation::INCLUDED
        .iter()
        .map(|o| (o.label().to_string(), rows.iter().filter(|r| r.occupation == *o).collect()))
        .collect();
    groups.push(("All".into(), rows.iter().filter(|r| r.included()).collect()));
    let table_rows = REGRESSORS
        .iter()
        .map(|name| DescriptiveRow {
            variable: name.to_string(),
            cells: groups
                .iter()
                .map(|(_, g)| {
                    let vals: Vec<f64> = g.iter().filter_map(|r| r.variable(name)).collect();
                    let (m, s) = mean_sd(&vals);
                    (m, if BINARY_REGRESSORS.contains(name) { None } else { s })
                })
                .collect(),
        })
        .collect();
    DescriptiveTable {
        groups: groups.iter().map(|(n, _)| n.clone()).collect(),
        n: groups.iter().map(|(_, g)| g.len()).collect(),
        rows: table_rows,
    }
}

pub fn render_descriptive_table(t: &DescriptiveTable) -> String {
    let mut out = String::from("Variable");
    for g in &t.groups {
        let _ = write!(out, "\t{g}\t");
    }
    out.push('\n');
    for _ in &t.groups {
        out.push_str("\tMean\tSD");
    }
    out.push('\n');
    for r in &t.rows {
        out.push_str(label(&r.variable));
        for (m, s) in &r.cells {
            let _ = write!(out, "\t{}\t{}", m.map(num).unwrap_or_default(), s.map(num).unwrap_or_default());
        }
        out.push('\n');
    }
    out.push('N');
    for n in &t.n {
        let _ = write!(out, "\t{n}\t");
    }
    out.push('\n');
    out
}

pub fn parse_descriptive_table(text: &str) -> Result<DescriptiveTable, PipelineError> {
    let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    let bad = |m: &str| PipelineError::MalformedTable(m.to_string());
    let header = lines.first().ok_or_else(|| bad("empty descriptive table"))?;
    let groups: Vec<String> = header.iter().skip(1).step_by(2).map(|s| s.to_string()).collect();
    let width = 1 + 2 * groups.len();
    if lines.len() < 3 || lines.iter().any(|l| l.len() != width) {
        return Err(bad("ragged descriptive table"));
    }
    let mut rows = Vec::new();
    for l in &lines[2..lines.len() - 1] {
        let cells = (0..groups.len())
            .map(|g| Ok((parse_opt(l[1 + 2 * g])?, parse_opt(l[2 + 2 * g])?)))
            .collect::<Result<_, PipelineError>>()?;
        rows.push(DescriptiveRow { variable: unlabel(l[0]), cells });
    }
    let last = &lines[lines.len() - 1];
    if last[0] != "N" {
        return Err(bad("missing N row"));
    }
    let n = (0..groups.len())
        .map(|g| last[1 + 2 * g].trim().parse().map_err(|_| bad("bad N")))
        .collect::<Result<_, _>>()?;
    Ok(DescriptiveTable { groups, rows, n })
}

/// Lower triangle of r with p-values on the line beneath each row.
pub fn render_correlation_table(m: &CorrelationMatrix) -> String {
    let mut out = String::new();
    for (j, name) in m.names.iter().enumerate() {
        let _ = write!(out, "\t{} {}", j + 1, label(name));
    }
    out.push('\n');
    let k = m.names.len();
    for i in 0..k {
        let _ = write!(out, "{} {}", i + 1, label(&m.names[i]));
        for j in 0..k {
            out.push('\t');
            if j <= i {
                out.push_str(&num(m.cells[i][j].r));
            }
        }
        out.push('\n');
        for j in 0..k {
            out.push('\t');
            if j < i {
                out.push_str(&num(m.cells[i][j].p));
            }
        }
        out.push('\n');
    }
    out
}

/// Parsed correlation table: names with lower-triangle r and p (`p[i][i]` is NaN).
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCorrelations {
    pub names: Vec<String>,
    pub r: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

pub fn parse_correlation_table(text: &str) -> Result<ParsedCorrelations, PipelineError> {
    let bad = |m: &str| PipelineError::MalformedTable(m.to_string());
    let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    let header = lines.first().ok_or_else(|| bad("empty correlation table"))?;
    let names: Vec<String> = header
        .iter()
        .skip(1)
        .map(|h| h.split_once(' ').map(|(_, n)| unlabel(n)).ok_or_else(|| bad("unnumbered header")))
        .collect::<Result<_, _>>()?;
    let k = names.len();
    if lines.len() != 1 + 2 * k || lines.iter().any(|l| l.len() != k + 1) {
        return Err(bad("ragged correlation table"));
    }
    let mut r = Vec::with_capacity(k);
    let mut p = Vec::with_capacity(k);
    for i in 0..k {
        let rl = &lines[1 + 2 * i];
        let pl = &lines[2 + 2 * i];
        r.push((0..=i).map(|j| parse_num(rl[j + 1])).collect::<Result<Vec<_>, _>>()?);
        let mut prow = (0..i).map(|j| parse_num(pl[j + 1])).collect::<Result<Vec<_>, _>>()?;
        prow.push(f64::NAN);
        p.push(prow);
    }
    Ok(ParsedCorrelations { names, r, p })
}

/// Estimate, standard error and star count of one table cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub estimate: f64,
    pub se: f64,
    pub stars: u8,
}

impl Cell {
    pub fn new(estimate: f64, se: f64, p: f64) -> Self {
        Self { estimate, se, stars: stars(p).len() as u8 }
    }

    fn rounded(self) -> Self {
        Self { estimate: printed(self.estimate), se: printed(self.se), stars: self.stars }
    }
}

/// `est*** (se)`.
pub fn format_cell(c: &Cell) -> String {
    format!("{}{} ({})", num(c.estimate), "*".repeat(usize::from(c.stars)), num(c.se))
}

fn parse_cell(s: &str) -> Result<Cell, PipelineError> {
    let bad = || PipelineError::MalformedTable(format!("bad cell `{s}`"));
    let (head, tail) = s.trim().split_once(" (").ok_or_else(bad)?;
    let se = tail.strip_suffix(')').ok_or_else(bad)?;
    let est = head.trim_end_matches('*');
    Ok(Cell { estimate: parse_num(est)?, se: parse_num(se)?, stars: (head.len() - est.len()) as u8 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionColumn {
    pub title: String,
    /// One cell per table row; `None` when the regressor is absent from this fit.
    pub cells: Vec<Option<Cell>>,
    pub n: usize,
    pub loglik: f64,
    pub mean_dep: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTable {
    pub rows: Vec<String>,
    pub columns: Vec<RegressionColumn>,
}

impl RegressionTable {
    pub fn new<S: AsRef<str>>(rows: &[S]) -> Self {
        Self { rows: rows.iter().map(|s| s.as_ref().to_string()).collect(), columns: Vec::new() }
    }

    /// Adds a column of average marginal effects.
    pub fn push_ames(&mut self, title: &str, fit: &BinaryFit) {
        let cells = self.rows.iter().map(|r| fit.ame(r).map(|a| Cell::new(a.estimate, a.se, a.p_value()))).collect();
        self.columns.push(RegressionColumn {
            title: title.into(),
            cells,
            n: fit.n,
            loglik: fit.loglik,
            mean_dep: Some(fit.mean_outcome),
        });
    }

    /// Adds a column of index coefficients.
    pub fn push_coefficients(&mut self, title: &str, fit: &BinaryFit) {
        let cells = self
            .rows
            .iter()
            .map(|r| Some(Cell::new(fit.coefficient(r).ok()?, fit.se(r).ok()?, fit.p_value(r).ok()?)))
            .collect();
        self.columns.push(RegressionColumn {
            title: title.into(),
            cells,
            n: fit.n,
            loglik: fit.loglik,
            mean_dep: Some(fit.mean_outcome),
        });
    }

    /// Adds one column per non-base category of a multinomial fit.
    pub fn push_mnl(&mut self, titles: &[(f64, &str)], fit: &MnlFit) -> Result<(), EconError> {
        for &(cat, title) in titles {
            let cells = self
                .rows
                .iter()
                .map(|r| {
                    let b = fit.coefficient(cat, r).ok()?;
                    let se = fit.se(cat, r).ok()?;
                    Some(Cell::new(b, se, crate::econometrics::normal_p_value(b / se)))
                })
                .collect();
            if !fit.categories.contains(&cat) || cat == fit.base {
                return Err(EconError::MissingBaseCategory(cat));
            }
            self.columns.push(RegressionColumn { title: title.into(), cells, n: fit.n, loglik: fit.loglik, mean_dep: None });
        }
        Ok(())
    }

    pub fn rounded(&self) -> Self {
        let mut t = self.clone();
        for c in &mut t.columns {
            c.cells = c.cells.iter().map(|x| x.map(Cell::rounded)).collect();
            c.loglik = printed(c.loglik);
            c.mean_dep = c.mean_dep.map(printed);
        }
        t
    }
}

pub fn render_regression_table(t: &RegressionTable) -> String {
    let mut out = String::from("Dependent variable:");
    for (i, _) in t.columns.iter().enumerate() {
        let _ = write!(out, "\t({})", i + 1);
    }
    out.push('\n');
    for c in &t.columns {
        let _ = write!(out, "\t{}", c.title);
    }
    out.push('\n');
    for (i, r) in t.rows.iter().enumerate() {
        out.push_str(label(r));
        for c in &t.columns {
            let _ = write!(out, "\t{}", c.cells[i].as_ref().map(format_cell).unwrap_or_default());
        }
        out.push('\n');
    }
    out.push('N');
    for c in &t.columns {
        let _ = write!(out, "\t{}", c.n);
    }
    out.push_str("\nLog likelihood");
    for c in &t.columns {
        let _ = write!(out, "\t{}", num(c.loglik));
    }
    out.push_str("\nMean dep. variable");
    for c in &t.columns {
        let _ = write!(out, "\t{}", c.mean_dep.map(num).unwrap_or_default());
    }
    out.push('\n');
    out
}

pub fn parse_regression_table(text: &str) -> Result<RegressionTable, PipelineError> {
    let bad = |m: &str| PipelineError::MalformedTable(m.to_string());
    let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    if lines.len() < 5 {
        return Err(bad("regression table too short"));
    }
    let k = lines[0].len() - 1;
    if lines.iter().any(|l| l.len() != k + 1) {
        return Err(bad("ragged regression table"));
    }
    let footer = &lines[lines.len() - 3..];
    if footer[0][0] != "N" || footer[1][0] != "Log likelihood" || footer[2][0] != "Mean dep. variable" {
        return Err(bad("missing summary rows"));
    }
    let body = &lines[2..lines.len() - 3];
    let rows: Vec<String> = body.iter().map(|l| unlabel(l[0])).collect();
    let columns = (1..=k)
        .map(|j| {
            Ok(RegressionColumn {
                title: lines[1][j].to_string(),
                cells: body
                    .iter()
                    .map(|l| if l[j].is_empty() { Ok(None) } else { parse_cell(l[j]).map(Some) })
                    .collect::<Result<_, PipelineError>>()?,
                n: footer[0][j].parse().map_err(|_| bad("bad N"))?,
                loglik: parse_num(footer[1][j])?,
                mean_dep: parse_opt(footer[2][j])?,
            })
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok(RegressionTable { rows, columns })
}

/// Correlations of spell duration with the attitudes, one column per entrepreneur type.
pub fn render_duration_table(results: &[DurationCorrelation]) -> String {
    let mut out = String::new();
    for d in results {
        let _ = write!(out, "\t{}", d.kind.label());
    }
    out.push('\n');
    for (name, pick) in [
        ("aversion", (|d: &DurationCorrelation| d.aversion) as fn(&DurationCorrelation) -> _),
        ("sensitivity", |d: &DurationCorrelation| d.sensitivity),
    ] {
        out.push_str(label(name));
        for d in results {
            let _ = write!(out, "\t{}", num(pick(d).r));
        }
        out.push('\n');
        for d in results {
            let _ = write!(out, "\t{}", num(pick(d).p));
        }
        out.push('\n');
    }
    out.push('N');
    for d in results {
        let _ = write!(out, "\t{}", d.entrants);
    }
    out.push('\n');
    out
}
