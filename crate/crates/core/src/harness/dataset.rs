use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};

/// One stimulus: an identifier, its feature vector and, when labeled, its MOS.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub features: Vec<f64>,
    pub mos: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub dim: usize,
    pub samples: Vec<Sample>,
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.starts_with('#') || id.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!("invalid sample id `{id}`")));
    }
    Ok(())
}

impl Dataset {
    /// Checks uniform feature length, finite values, usable and unique ids.
    pub fn new(dim: usize, samples: Vec<Sample>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for s in &samples {
            check_id(&s.id)?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::invalid(format!("duplicate sample id `{}`", s.id)));
            }
            if s.features.len() != dim {
                return Err(Error::invalid(format!(
                    "sample `{}` has {} features, expected {dim}",
                    s.id,
                    s.features.len()
                )));
            }
            if s.features.iter().any(|v| !v.is_finite()) || s.mos.is_some_and(|m| !m.is_finite()) {
                return Err(Error::invalid(format!("sample `{}` has a non-finite value", s.id)));
            }
        }
        Ok(Dataset { dim, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// All MOS values, or `None` if any sample is unlabeled.
    pub fn moss(&self) -> Option<Vec<f64>> {
        self.samples.iter().map(|s| s.mos).collect()
    }

    /// The same samples with every MOS removed.
    pub fn label_blind(&self) -> Dataset {
        Dataset {
            dim: self.dim,
            samples: self
                .samples
                .iter()
                .map(|s| Sample { mos: None, ..s.clone() })
                .collect(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            dim: self.dim,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

/// `#dim=D` header, then `id<TAB>mos-or-dash<TAB>f1,...,fD` per sample.
/// Reals are written in shortest round-trip form.
pub fn format_dataset(ds: &Dataset) -> String {
    let mut out = format!("#dim={}\n", ds.dim);
    for s in &ds.samples {
        out.push_str(&s.id);
        out.push('\t');
        match s.mos {
            Some(m) => write!(out, "{m:?}").expect("write to string"),
            None => out.push('-'),
        }
        out.push('\t');
        for (i, f) in s.features.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{f:?}").expect("write to string");
        }
        out.push('\n');
    }
    out
}

fn parse_real(tok: &str, path: &Path, line: usize, what: &str) -> Result<f64> {
    match tok.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("bad {what} `{tok}`"),
        }),
    }
}

/// Parses dataset text. Lines after the header that start with `#` are
/// comments. An empty text is an empty dataset of dimension 0.
pub fn parse_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let Some((_, header)) = lines.next() else {
        return Ok(Dataset::default());
    };
    let dim: usize = header
        .trim()
        .strip_prefix("#dim=")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| perr(1, format!("expected `#dim=<D>` header, found `{header}`")))?;
    let mut samples = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (no, line) in lines {
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(perr(no, format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let id = fields[0];
        if check_id(id).is_err() {
            return Err(perr(no, format!("invalid sample id `{id}`")));
        }
        if !seen.insert(id.to_string()) {
            return Err(perr(no, format!("duplicate sample id `{id}`")));
        }
        let mos = match fields[1] {
            "-" => None,
            tok => Some(parse_real(tok, path, no, "MOS")?),
        };
        let features = if fields[2].is_empty() {
            Vec::new()
        } else {
            fields[2]
                .split(',')
                .map(|t| parse_real(t, path, no, "feature"))
                .collect::<Result<Vec<f64>>>()?
        };
        if features.len() != dim {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("line {no}: {} features, header declares {dim}", features.len()),
            });
        }
        samples.push(Sample {
            id: id.to_string(),
            features,
            mos,
        });
    }
    Ok(Dataset { dim, samples })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&read_to_string(path)?, path)
}

/// Loads a dataset and drops its MOS values, for labeled data used as an
/// unlabeled pool.
pub fn load_dataset_blind(path: &Path) -> Result<Dataset> {
    Ok(load_dataset(path)?.label_blind())
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, format_dataset(ds).as_bytes())
}
