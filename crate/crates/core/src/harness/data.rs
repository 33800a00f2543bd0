//! Labeled collections and UCR-style text files.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::Series;

/// A train/test pair of labeled series of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Series>,
    pub test: Vec<Series>,
}

impl Dataset {
    pub fn series_len(&self) -> Option<usize> {
        self.train.iter().chain(&self.test).next().map(Series::len)
    }

    pub fn num_classes(&self) -> usize {
        self.train
            .iter()
            .chain(&self.test)
            .filter_map(|s| s.label)
            .max()
            .map_or(0, |m| m + 1)
    }
}

/// Splits indices so that each label keeps roughly `test_fraction` of its
/// members in the test part. Both parts are shuffled.
pub fn stratified_split(
    labels: &[usize],
    test_fraction: f64,
    rng: &mut impl Rng,
) -> (Vec<usize>, Vec<usize>) {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(rng);
        let n_test = ((members.len() as f64) * test_fraction).round() as usize;
        let n_test = if members.len() >= 2 {
            n_test.clamp(1, members.len() - 1)
        } else {
            0
        };
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.shuffle(rng);
    test.shuffle(rng);
    (train, test)
}

struct RawRow {
    line: usize,
    label: String,
    values: Vec<f64>,
}

fn parse_rows(path: &Path) -> Result<Vec<RawRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut expected = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line
            .split(['\t', ','])
            .map(str::trim)
            .filter(|f| !f.is_empty());
        let label = fields
            .next()
            .expect("non-empty line has a field")
            .to_string();
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::NonNumeric {
                        line: line_no,
                        value: f.to_string(),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        match expected {
            None => expected = Some(values.len()),
            Some(n) if n != values.len() => {
                return Err(Error::RaggedRows {
                    line: line_no,
                    expected: n,
                    found: values.len(),
                })
            }
            _ => {}
        }
        rows.push(RawRow {
            line: line_no,
            label,
            values,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(rows)
}

/// Orders labels numerically when they all parse as numbers, otherwise
/// lexicographically.
fn label_order(labels: &BTreeSet<String>) -> Vec<String> {
    let mut out: Vec<String> = labels.iter().cloned().collect();
    let numeric: Option<Vec<f64>> = out.iter().map(|l| l.parse::<f64>().ok()).collect();
    if numeric.is_some() {
        out.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.total_cmp(&y)
        });
    }
    out
}

/// Loads several UCR-format files with one shared label mapping, so a
/// train/test pair agrees on class indices. Each line holds the label
/// followed by the values, separated by tabs or commas. Labels are mapped
/// to `0..C` in sorted order.
pub fn load_ucr_files(paths: &[&Path]) -> Result<Vec<Vec<Series>>> {
    let parsed = paths
        .iter()
        .map(|p| parse_rows(p).map_err(|e| e.context(p.display().to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut len = None;
    for (rows, path) in parsed.iter().zip(paths) {
        let n = rows[0].values.len();
        match len {
            None => len = Some(n),
            Some(m) if m != n => {
                return Err(Error::RaggedRows {
                    line: rows[0].line,
                    expected: m,
                    found: n,
                }
                .context(path.display().to_string()))
            }
            _ => {}
        }
    }
    let labels: BTreeSet<String> = parsed.iter().flatten().map(|r| r.label.clone()).collect();
    let order = label_order(&labels);
    parsed
        .into_iter()
        .zip(paths)
        .map(|(rows, path)| {
            rows.into_iter()
                .map(|r| {
                    let label = order
                        .iter()
                        .position(|l| *l == r.label)
                        .expect("label collected");
                    Series::labeled(r.values, label)
                        .map_err(|e| e.context(format!("{} line {}", path.display(), r.line)))
                })
                .collect()
        })
        .collect()
}

/// Loads a single UCR-format file.
pub fn load_ucr_tsv(path: impl AsRef<Path>) -> Result<Vec<Series>> {
    Ok(load_ucr_files(&[path.as_ref()])?.remove(0))
}

/// Writes labeled series as tab-separated lines. Unlabeled series get label 0.
pub fn save_ucr_tsv(series: &[Series], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for s in series {
        write!(out, "{}", s.label.unwrap_or(0)).expect("write to vec");
        for v in s.values() {
            write!(out, "\t{v}").expect("write to vec");
        }
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
