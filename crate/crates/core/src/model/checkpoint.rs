//! Plain-text checkpoint container.
//!
//! ```text
//! ssl-iqa-checkpoint 1
//! seed <u64>
//! input_dim <usize>
//! shared_widths <w>...
//! head_widths <w>...
//! num_heads <usize>
//! running_mean <f64 x M>
//! running_var <f64 x M>
//! tensor <name> <len>
//! <len space-separated f64, row-major>
//! ...                      (one tensor block per entry of Weights::tensors)
//! end
//! ```
//!
//! Reals use Rust's shortest round-trip formatting, so save followed by load
//! reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};

use super::{ArchitectureConfig, EnsembleParams, Weights};

const MAGIC: &str = "ssl-iqa-checkpoint";
const VERSION: u32 = 1;

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn line(out: &mut String, key: &str, rest: &str) {
    if rest.is_empty() {
        let _ = writeln!(out, "{key}");
    } else {
        let _ = writeln!(out, "{key} {rest}");
    }
}

/// Serialises the parameters to the checkpoint text format.
pub fn write_checkpoint(params: &EnsembleParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    line(&mut out, "seed", &params.seed.to_string());
    line(&mut out, "input_dim", &params.arch.input_dim.to_string());
    line(&mut out, "shared_widths", &join(&params.arch.shared_widths));
    line(&mut out, "head_widths", &join(&params.arch.head_widths));
    line(&mut out, "num_heads", &params.arch.num_heads.to_string());
    line(&mut out, "running_mean", &join(&params.running_mean));
    line(&mut out, "running_var", &join(&params.running_var));
    for (name, t) in params.weights.tensor_names().iter().zip(params.weights.tensors()) {
        let _ = writeln!(out, "tensor {name} {}", t.len());
        let _ = writeln!(out, "{}", join(t));
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => Ok((i + 1, l)),
            None => Err(Error::Format {
                path: self.path.to_path_buf(),
                msg: "unexpected end of checkpoint".into(),
            }),
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    /// Reads `key v1 v2 ...` and returns the values.
    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, l) = self.next_line()?;
        let mut parts = l.split_ascii_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(n, format!("expected `{key}`")));
        }
        Ok((n, parts.collect()))
    }

    fn parse_all<T: std::str::FromStr>(&self, n: usize, vals: &[&str]) -> Result<Vec<T>> {
        vals.iter()
            .map(|v| v.parse::<T>().map_err(|_| self.err(n, format!("bad number `{v}`"))))
            .collect()
    }

    fn single<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (n, vals) = self.keyed(key)?;
        if vals.len() != 1 {
            return Err(self.err(n, format!("`{key}` takes one value")));
        }
        Ok(self.parse_all::<T>(n, &vals)?.remove(0))
    }
}

/// Parses checkpoint text. `path` is only used in error messages.
pub fn read_checkpoint(text: &str, path: &Path) -> Result<EnsembleParams> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path,
    };
    let (n, header) = lines.next_line()?;
    match header.split_ascii_whitespace().collect::<Vec<_>>().as_slice() {
        [MAGIC, v] if *v == VERSION.to_string() => {}
        [MAGIC, v] => return Err(lines.err(n, format!("unsupported checkpoint version {v}"))),
        _ => return Err(lines.err(n, "not a checkpoint file")),
    }
    let seed: u64 = lines.single("seed")?;
    let input_dim: usize = lines.single("input_dim")?;
    let (n, v) = lines.keyed("shared_widths")?;
    let shared_widths = lines.parse_all(n, &v)?;
    let (n, v) = lines.keyed("head_widths")?;
    let head_widths = lines.parse_all(n, &v)?;
    let num_heads: usize = lines.single("num_heads")?;
    let arch = ArchitectureConfig {
        input_dim,
        shared_widths,
        head_widths,
        num_heads,
    };
    arch.validate()?;
    let (n, v) = lines.keyed("running_mean")?;
    let running_mean: Vec<f64> = lines.parse_all(n, &v)?;
    let (n2, v) = lines.keyed("running_var")?;
    let running_var: Vec<f64> = lines.parse_all(n2, &v)?;
    if running_mean.len() != num_heads || running_var.len() != num_heads {
        return Err(lines.err(n, "running statistics must have one entry per head"));
    }

    let mut weights = Weights::zeros(&arch);
    let names = weights.tensor_names();
    for (name, slot) in names.iter().zip(weights.tensors_mut()) {
        let (n, v) = lines.keyed("tensor")?;
        let expected_len = slot.len().to_string();
        if v.len() != 2 || v[0] != name || v[1] != expected_len {
            return Err(lines.err(n, format!("expected `tensor {name} {}`", slot.len())));
        }
        let (n, data) = lines.next_line()?;
        let values: Vec<f64> = lines.parse_all(n, &data.split_ascii_whitespace().collect::<Vec<_>>())?;
        if values.len() != slot.len() {
            return Err(lines.err(n, format!("tensor {name}: {} values, expected {}", values.len(), slot.len())));
        }
        slot.copy_from_slice(&values);
    }
    let (n, l) = lines.next_line()?;
    if l.trim() != "end" {
        return Err(lines.err(n, "expected `end`"));
    }
    let params = EnsembleParams {
        arch,
        seed,
        weights,
        running_mean,
        running_var,
    };
    if !params.is_finite() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "non-finite parameter".into(),
        });
    }
    Ok(params)
}

pub fn save_checkpoint(params: &EnsembleParams, path: &Path) -> Result<()> {
    write_atomic(path, write_checkpoint(params).as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<EnsembleParams> {
    read_checkpoint(&read_to_string(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init;

    fn arch() -> ArchitectureConfig {
        ArchitectureConfig {
            input_dim: 5,
            shared_widths: vec![4, 3],
            head_widths: vec![2, 1],
            num_heads: 3,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut p = init(&arch(), 77).unwrap();
        p.running_mean = vec![0.1, -1e-300, 3.3e10];
        p.running_var = vec![1.0 / 3.0, 2.0, 5e-324];
        p.weights.output_scale = std::f64::consts::PI;
        let text = write_checkpoint(&p);
        let back = read_checkpoint(&text, Path::new("mem")).unwrap();
        assert_eq!(p, back);
        assert_eq!(write_checkpoint(&back), text);
    }

    #[test]
    fn trunkless_model_round_trips() {
        let a = ArchitectureConfig {
            input_dim: 3,
            shared_widths: vec![],
            head_widths: vec![1],
            num_heads: 1,
        };
        let p = init(&a, 1).unwrap();
        let back = read_checkpoint(&write_checkpoint(&p), Path::new("mem")).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn rejects_damaged_files() {
        let p = init(&arch(), 1).unwrap();
        let text = write_checkpoint(&p);
        assert!(read_checkpoint("hello\n", Path::new("x")).is_err());
        assert!(read_checkpoint(&text.replace("checkpoint 1", "checkpoint 9"), Path::new("x")).is_err());
        let truncated: String = text.lines().take(12).collect::<Vec<_>>().join("\n");
        assert!(read_checkpoint(&truncated, Path::new("x")).is_err());
        let bad = text.replacen("tensor trunk.0.bias 4\n0 0 0 0", "tensor trunk.0.bias 4\n0 zero 0 0", 1);
        match read_checkpoint(&bad, Path::new("x")) {
            Err(Error::Parse { line, .. }) => assert!(line > 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
