//! Aggregate similarity tables and their additive normalization.
//!
//! The pipeline: average pairwise source-vs-party predictive similarity per
//! (media group, issue set) cell, optionally collapse parties into blocs,
//! then fit `value ≈ μ + media + issue + bloc` with sum-to-zero main effects
//! and report the residuals, which expose alignment beyond marginal
//! tendencies.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::conditioning::{weighted_covariance, ConditionedMetric, WeightSpec};
use crate::error::{Error, Result};
use crate::model::EmbeddingModel;
use crate::psim::{cosine, psim, to_f64};

/// A named set of source labels (e.g. the left-wing news outlets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceGroup {
    name: String,
    members: Vec<String>,
}

impl SourceGroup {
    /// Members are stored sorted and deduplicated, so group construction
    /// order can never influence downstream averages.
    pub fn new(name: impl Into<String>, members: Vec<String>) -> Result<Self> {
        let name = name.into();
        let mut members = members;
        members.sort();
        members.dedup();
        if members.is_empty() {
            return Err(Error::InvalidConfig(format!("group {name:?} has no members")));
        }
        Ok(SourceGroup { name, members })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }
}

/// A named keyword list standing in for a political issue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueSet {
    pub name: String,
    pub keywords: Vec<String>,
}

impl IssueSet {
    pub fn new(name: impl Into<String>, keywords: Vec<String>) -> Self {
        IssueSet {
            name: name.into(),
            keywords,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Psim,
    Cosine,
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psim" => Ok(MetricKind::Psim),
            "cosine" => Ok(MetricKind::Cosine),
            other => Err(Error::InvalidConfig(format!(
                "unknown metric {other:?}; expected \"psim\" or \"cosine\""
            ))),
        }
    }
}

/// A complete (media × issue × column) grid of similarity values. Columns
/// are parties before bloc averaging and blocs after.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    media: Vec<String>,
    issues: Vec<String>,
    columns: Vec<String>,
    values: Vec<f64>,
    pub metric_kind: MetricKind,
}

impl SimilarityTable {
    pub fn new(
        media: Vec<String>,
        issues: Vec<String>,
        columns: Vec<String>,
        values: Vec<f64>,
        metric_kind: MetricKind,
    ) -> Result<Self> {
        let expected = media.len() * issues.len() * columns.len();
        if values.len() != expected || expected == 0 {
            return Err(Error::InvalidConfig(format!(
                "table needs {expected} cells, got {}",
                values.len()
            )));
        }
        Ok(SimilarityTable {
            media,
            issues,
            columns,
            values,
            metric_kind,
        })
    }

    pub fn media(&self) -> &[String] {
        &self.media
    }

    pub fn issues(&self) -> &[String] {
        &self.issues
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    fn index(&self, m: usize, i: usize, c: usize) -> usize {
        (m * self.issues.len() + i) * self.columns.len() + c
    }

    pub fn cell(&self, m: usize, i: usize, c: usize) -> f64 {
        self.values[self.index(m, i, c)]
    }

    pub fn get(&self, media: &str, issue: &str, column: &str) -> Option<f64> {
        let m = self.media.iter().position(|x| x == media)?;
        let i = self.issues.iter().position(|x| x == issue)?;
        let c = self.columns.iter().position(|x| x == column)?;
        Some(self.cell(m, i, c))
    }

    /// Keeps only the given media and issue levels, in the given order.
    pub fn restrict(
        &self,
        media: Option<&[String]>,
        issues: Option<&[String]>,
    ) -> Result<SimilarityTable> {
        let pick = |requested: Option<&[String]>, available: &[String], what: &str| -> Result<Vec<usize>> {
            match requested {
                None => Ok((0..available.len()).collect()),
                Some(req) => req
                    .iter()
                    .map(|level| {
                        available.iter().position(|x| x == level).ok_or_else(|| {
                            Error::InvalidConfig(format!(
                                "{what} level {level:?} not present in table"
                            ))
                        })
                    })
                    .collect(),
            }
        };
        let m_idx = pick(media, &self.media, "media")?;
        let i_idx = pick(issues, &self.issues, "issues")?;
        let mut values = Vec::with_capacity(m_idx.len() * i_idx.len() * self.columns.len());
        for &m in &m_idx {
            for &i in &i_idx {
                for c in 0..self.columns.len() {
                    values.push(self.cell(m, i, c));
                }
            }
        }
        SimilarityTable::new(
            m_idx.iter().map(|&m| self.media[m].clone()).collect(),
            i_idx.iter().map(|&i| self.issues[i].clone()).collect(),
            self.columns.clone(),
            values,
            self.metric_kind,
        )
    }

    pub fn write_tsv(&self, w: &mut impl Write) -> std::io::Result<()> {
        write!(w, "media\tissues")?;
        for column in &self.columns {
            write!(w, "\t{column}")?;
        }
        writeln!(w)?;
        for (m, media) in self.media.iter().enumerate() {
            for (i, issue) in self.issues.iter().enumerate() {
                write!(w, "{media}\t{issue}")?;
                for c in 0..self.columns.len() {
                    write!(w, "\t{}", format_significant(self.cell(m, i, c), 4))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("TSV is UTF-8")
    }

    /// Parses a table written by [`SimilarityTable::write_tsv`]. Row order
    /// determines level order; the (media × issue) grid must be complete.
    pub fn read_tsv(path: impl AsRef<Path>, metric_kind: MetricKind) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(BufReader::new(file), path, metric_kind)
    }

    pub fn parse_tsv(
        reader: impl BufRead,
        path: &Path,
        metric_kind: MetricKind,
    ) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
            None => return Err(Error::malformed(path, 1, "empty table")),
        };
        let mut fields = header.split('\t');
        if fields.next() != Some("media") || fields.next() != Some("issues") {
            return Err(Error::malformed(
                path,
                1,
                "header must start with \"media\\tissues\"",
            ));
        }
        let columns: Vec<String> = fields.map(str::to_owned).collect();
        if columns.is_empty() {
            return Err(Error::malformed(path, 1, "no value columns"));
        }

        let mut media: Vec<String> = Vec::new();
        let mut issues: Vec<String> = Vec::new();
        let mut cells: HashMap<(String, String), Vec<f64>> = HashMap::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != columns.len() + 2 {
                return Err(Error::malformed(
                    path,
                    lineno,
                    format!("expected {} fields, got {}", columns.len() + 2, fields.len()),
                ));
            }
            let m = fields[0].to_owned();
            let i = fields[1].to_owned();
            let mut row = Vec::with_capacity(columns.len());
            for field in &fields[2..] {
                row.push(field.parse::<f64>().map_err(|_| {
                    Error::malformed(path, lineno, format!("bad value {field:?}"))
                })?);
            }
            if !media.contains(&m) {
                media.push(m.clone());
            }
            if !issues.contains(&i) {
                issues.push(i.clone());
            }
            if cells.insert((m.clone(), i.clone()), row).is_some() {
                return Err(Error::malformed(
                    path,
                    lineno,
                    format!("duplicate row for ({m}, {i})"),
                ));
            }
        }

        let mut values = Vec::with_capacity(media.len() * issues.len() * columns.len());
        for m in &media {
            for i in &issues {
                let row = cells.get(&(m.clone(), i.clone())).ok_or_else(|| {
                    Error::IncompleteGrid {
                        media: m.clone(),
                        issue: i.clone(),
                        column: "*".into(),
                    }
                })?;
                values.extend_from_slice(row);
            }
        }
        SimilarityTable::new(media, issues, columns, values, metric_kind)
    }
}

/// Formats with `digits` significant digits in plain decimal notation.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value:.*}", digits.saturating_sub(1));
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).clamp(0, 17) as usize;
    format!("{value:.decimals$}")
}

/// Averaged source-vs-party similarity per (group, issue, party) cell.
///
/// For `MetricKind::Psim` each issue set defines indicator weights over the
/// vocabulary and each cell is the mean predictive similarity between the
/// group's member source vectors and the party's source vector under that
/// conditioning. For `MetricKind::Cosine` the conditioning is ignored.
/// Group members absent from the model are skipped; a group with no member
/// present is an error, as is a missing party.
pub fn aggregate_similarity(
    model: &EmbeddingModel,
    groups: &[SourceGroup],
    parties: &[String],
    issues: &[IssueSet],
    kind: MetricKind,
) -> Result<SimilarityTable> {
    if groups.is_empty() || parties.is_empty() || issues.is_empty() {
        return Err(Error::InvalidConfig(
            "aggregate similarity needs at least one group, party, and issue set".into(),
        ));
    }
    let sources = model.sources().ok_or_else(|| {
        Error::InvalidConfig("model has no source vectors; train in source-augmented mode".into())
    })?;

    let party_vecs: Vec<Vec<f64>> = parties
        .iter()
        .map(|p| {
            sources
                .get(p)
                .map(to_f64)
                .ok_or_else(|| Error::UnknownSource(p.clone()))
        })
        .collect::<Result<_>>()?;

    let effective: Vec<Vec<Vec<f64>>> = groups
        .iter()
        .map(|g| {
            let members: Vec<Vec<f64>> = g
                .members()
                .iter()
                .filter_map(|m| sources.get(m).map(to_f64))
                .collect();
            if members.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "group {:?} has no members with source vectors in the model",
                    g.name()
                )));
            }
            Ok(members)
        })
        .collect::<Result<_>>()?;

    let metrics: Vec<Option<ConditionedMetric>> = match kind {
        MetricKind::Cosine => issues.iter().map(|_| None).collect(),
        MetricKind::Psim => issues
            .iter()
            .map(|issue| {
                let spec =
                    WeightSpec::indicator(&issue.keywords, model.vocab()).map_err(|e| {
                        Error::DegenerateConditioning(format!("issue set {:?}: {e}", issue.name))
                    })?;
                weighted_covariance(model.targets(), &spec).map(Some)
            })
            .collect::<Result<_>>()?,
    };

    let mut values =
        Vec::with_capacity(groups.len() * issues.len() * parties.len());
    for members in &effective {
        for metric in &metrics {
            for party in &party_vecs {
                let mut sum = 0.0;
                for member in members {
                    sum += match metric {
                        Some(metric) => psim(member, party, metric)?,
                        None => cosine(member, party)?,
                    };
                }
                values.push(sum / members.len() as f64);
            }
        }
    }

    SimilarityTable::new(
        groups.iter().map(|g| g.name().to_owned()).collect(),
        issues.iter().map(|i| i.name.clone()).collect(),
        parties.to_vec(),
        values,
        kind,
    )
}

/// Collapses party columns into bloc columns by averaging. Every column must
/// belong to exactly one bloc or be listed in `exclude`.
pub fn bloc_average(
    table: &SimilarityTable,
    blocs: &[SourceGroup],
    exclude: &[String],
) -> Result<SimilarityTable> {
    let excluded: HashSet<&str> = exclude.iter().map(|s| s.as_str()).collect();
    let mut assignment: HashMap<&str, usize> = HashMap::new();
    for (b, bloc) in blocs.iter().enumerate() {
        for member in bloc.members() {
            if assignment.insert(member.as_str(), b).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "party {member:?} appears in more than one bloc"
                )));
            }
        }
    }

    let mut bloc_columns: Vec<Vec<usize>> = vec![Vec::new(); blocs.len()];
    for (c, column) in table.columns().iter().enumerate() {
        if excluded.contains(column.as_str()) {
            continue;
        }
        match assignment.get(column.as_str()) {
            Some(&b) => bloc_columns[b].push(c),
            None => return Err(Error::UnassignedParty(column.clone())),
        }
    }
    for (b, cols) in bloc_columns.iter().enumerate() {
        if cols.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "bloc {:?} has no parties in the table",
                blocs[b].name()
            )));
        }
    }

    let mut values =
        Vec::with_capacity(table.media().len() * table.issues().len() * blocs.len());
    for m in 0..table.media().len() {
        for i in 0..table.issues().len() {
            for cols in &bloc_columns {
                let sum: f64 = cols.iter().map(|&c| table.cell(m, i, c)).sum();
                values.push(sum / cols.len() as f64);
            }
        }
    }
    SimilarityTable::new(
        table.media().to_vec(),
        table.issues().to_vec(),
        blocs.iter().map(|b| b.name().to_owned()).collect(),
        values,
        table.metric_kind,
    )
}

/// A fitted additive model `value ≈ μ + α_media + β_issue + γ_bloc` with
/// sum-to-zero effects, plus the residual table.
#[derive(Debug, Clone)]
pub struct AdditiveFit {
    pub grand_mean: f64,
    pub media_effects: Vec<(String, f64)>,
    pub issue_effects: Vec<(String, f64)>,
    pub bloc_effects: Vec<(String, f64)>,
    pub residuals: SimilarityTable,
}

fn effect_row(level: usize, n_levels: usize, out: &mut Vec<f64>) {
    for j in 0..n_levels.saturating_sub(1) {
        out.push(if level == j {
            1.0
        } else if level == n_levels - 1 {
            -1.0
        } else {
            0.0
        });
    }
}

/// Gaussian elimination with partial pivoting for the (small) normal
/// equations.
fn solve_linear(mut a: Vec<f64>, n: usize, mut b: Vec<f64>) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-12 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in (col + 1)..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in (col + 1)..n {
            acc -= a[col * n + k] * x[k];
        }
        x[col] = acc / a[col * n + col];
    }
    Some(x)
}

/// Least-squares fit of the additive main-effects model on a complete
/// bloc-level grid, using effect coding so the per-factor effects sum to
/// zero. Returns the recovered effects and the residual table.
pub fn additive_fit(table: &SimilarityTable) -> Result<AdditiveFit> {
    let n_media = table.media().len();
    let n_issues = table.issues().len();
    let n_blocs = table.columns().len();
    let n_params = 1 + (n_media - 1) + (n_issues - 1) + (n_blocs - 1);
    let n_cells = n_media * n_issues * n_blocs;

    let mut design: Vec<Vec<f64>> = Vec::with_capacity(n_cells);
    let mut response = Vec::with_capacity(n_cells);
    for m in 0..n_media {
        for i in 0..n_issues {
            for b in 0..n_blocs {
                let mut row = Vec::with_capacity(n_params);
                row.push(1.0);
                effect_row(m, n_media, &mut row);
                effect_row(i, n_issues, &mut row);
                effect_row(b, n_blocs, &mut row);
                design.push(row);
                response.push(table.cell(m, i, b));
            }
        }
    }

    let mut xtx = vec![0.0; n_params * n_params];
    let mut xty = vec![0.0; n_params];
    for (row, &y) in design.iter().zip(&response) {
        for a in 0..n_params {
            xty[a] += row[a] * y;
            for b in 0..n_params {
                xtx[a * n_params + b] += row[a] * row[b];
            }
        }
    }
    let beta = solve_linear(xtx, n_params, xty).ok_or_else(|| {
        Error::InvalidConfig("additive model design is singular".into())
    })?;

    let expand = |offset: usize, names: &[String]| -> Vec<(String, f64)> {
        let n = names.len();
        let mut effects: Vec<f64> = (0..n.saturating_sub(1))
            .map(|j| beta[offset + j])
            .collect();
        let last = -effects.iter().sum::<f64>();
        effects.push(last);
        names.iter().cloned().zip(effects).collect()
    };
    let media_effects = expand(1, table.media());
    let issue_effects = expand(1 + (n_media - 1), table.issues());
    let bloc_effects = expand(1 + (n_media - 1) + (n_issues - 1), table.columns());

    let mut residual_values = Vec::with_capacity(n_cells);
    for (row, &y) in design.iter().zip(&response) {
        let fit: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
        residual_values.push(y - fit);
    }
    let residuals = SimilarityTable::new(
        table.media().to_vec(),
        table.issues().to_vec(),
        table.columns().to_vec(),
        residual_values,
        table.metric_kind,
    )?;

    Ok(AdditiveFit {
        grand_mean: beta[0],
        media_effects,
        issue_effects,
        bloc_effects,
        residuals,
    })
}

/// Parses a group configuration file: `[name]` section headers, one member
/// per line, `#` comments, blank lines ignored. Used for both source groups
/// and bloc maps.
pub fn read_groups(path: impl AsRef<Path>) -> Result<Vec<SourceGroup>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let entry = line.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        if let Some(name) = entry.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::malformed(path, lineno, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(Error::malformed(path, lineno, "empty section name"));
            }
            if groups.iter().any(|(n, _)| n == name) {
                return Err(Error::malformed(
                    path,
                    lineno,
                    format!("duplicate section {name:?}"),
                ));
            }
            groups.push((name.to_owned(), Vec::new()));
        } else {
            match groups.last_mut() {
                Some((_, members)) => members.push(entry.to_owned()),
                None => {
                    return Err(Error::malformed(
                        path,
                        lineno,
                        "member listed before any [section] header",
                    ))
                }
            }
        }
    }
    if groups.is_empty() {
        return Err(Error::malformed(path, 1, "no sections in group file"));
    }
    groups
        .into_iter()
        .map(|(name, members)| SourceGroup::new(name, members))
        .collect()
}
