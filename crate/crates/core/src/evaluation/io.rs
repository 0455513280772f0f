//! Tab-separated score, report, ranking and gMAD files.
//!
//! * score file: `id<TAB>score` per line
//! * report file: `name<TAB>value` per line
//! * gMAD file: `level<TAB>top_id<TAB>bottom_id<TAB>gap` per line

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};

use super::{DisagreementRanking, GmadLevel};

pub fn format_scores<'a>(scores: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    let mut out = String::new();
    for (id, s) in scores {
        let _ = writeln!(out, "{id}\t{s}");
    }
    out
}

pub fn parse_scores(text: &str, path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let (id, score) = line
            .split_once('\t')
            .ok_or_else(|| err("expected `id<TAB>score`".into()))?;
        let v: f64 = score
            .trim()
            .parse()
            .map_err(|_| err(format!("bad score `{score}`")))?;
        if !v.is_finite() {
            return Err(err(format!("non-finite score `{score}`")));
        }
        if out.insert(id.to_string(), v).is_some() {
            return Err(err(format!("duplicate id `{id}`")));
        }
    }
    Ok(out)
}

pub fn read_scores(path: &Path) -> Result<BTreeMap<String, f64>> {
    parse_scores(&read_to_string(path)?, path)
}

pub fn write_scores<'a>(path: &Path, scores: impl IntoIterator<Item = (&'a str, f64)>) -> Result<()> {
    write_atomic(path, format_scores(scores).as_bytes())
}

pub fn format_report(entries: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "{k}\t{v}");
    }
    out
}

pub fn parse_report(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            l.split_once('\t')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: "expected `name<TAB>value`".into(),
                })
        })
        .collect()
}

pub fn format_ranking(r: &DisagreementRanking) -> String {
    format_scores(r.entries.iter().map(|(id, v)| (id.as_str(), *v)))
}

/// Only levels with a pair are written.
pub fn format_gmad(levels: &[GmadLevel]) -> String {
    let mut out = String::new();
    for p in levels.iter().filter_map(|l| l.pair()) {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", p.level, p.top_id, p.bottom_id, p.attacker_gap);
    }
    out
}
