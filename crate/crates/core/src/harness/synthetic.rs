use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::{save_dataset, Dataset, Sample};
use crate::error::{Error, Result};
use crate::evaluation::io::format_scores;
use crate::fsutil::write_atomic;

/// Monotone map applied to the linear projection `w . x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QualityRule {
    #[default]
    Identity,
    Cube,
    /// `tanh`, flat beyond a couple of units from the origin.
    Saturating,
}

impl QualityRule {
    pub fn as_str(self) -> &'static str {
        match self {
            QualityRule::Identity => "identity",
            QualityRule::Cube => "cube",
            QualityRule::Saturating => "saturating",
        }
    }

    pub fn apply(self, t: f64) -> f64 {
        match self {
            QualityRule::Identity => t,
            QualityRule::Cube => t * t * t,
            QualityRule::Saturating => t.tanh(),
        }
    }
}

impl FromStr for QualityRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(QualityRule::Identity),
            "cube" => Ok(QualityRule::Cube),
            "saturating" => Ok(QualityRule::Saturating),
            other => Err(Error::invalid(format!("unknown quality rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub dim: usize,
    pub rule: QualityRule,
    /// Standard deviation of the opinion noise, in units of the standard
    /// deviation of the latent quality.
    pub noise_std: f64,
    pub ood_fraction: f64,
    /// Mean shift of out-of-distribution samples on the shifted coordinates.
    pub ood_shift: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_labeled: 2000,
            n_unlabeled: 2000,
            dim: 16,
            rule: QualityRule::Identity,
            noise_std: 0.31,
            ood_fraction: 0.0,
            ood_shift: 3.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("synthetic dim must be positive"));
        }
        if self.n_labeled + self.n_unlabeled == 0 {
            return Err(Error::invalid("synthetic spec generates no samples"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if !(0.0..1.0).contains(&self.ood_fraction) {
            return Err(Error::invalid(format!("ood_fraction must lie in [0, 1), got {}", self.ood_fraction)));
        }
        if !self.ood_shift.is_finite() {
            return Err(Error::invalid("ood_shift must be finite"));
        }
        Ok(())
    }

    /// Number of shifted coordinates for out-of-distribution samples.
    pub fn ood_dims(&self) -> usize {
        (self.dim / 4).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    /// Unit-norm projection direction.
    pub weights: Vec<f64>,
    /// Coordinates shifted for out-of-distribution samples, ascending.
    pub ood_coords: Vec<usize>,
    pub labeled: Dataset,
    /// Same mixture, MOS withheld.
    pub unlabeled: Dataset,
    /// The withheld MOS of the unlabeled samples, for evaluation only.
    pub unlabeled_mos: BTreeMap<String, f64>,
    /// Latent quality `q*` of every sample.
    pub quality: BTreeMap<String, f64>,
    pub ood_ids: BTreeSet<String>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_set(
    prefix: &str,
    n: usize,
    spec: &SyntheticSpec,
    ood_coords: &[usize],
    rng: &mut ChaCha8Rng,
) -> (Vec<String>, Vec<Vec<f64>>, Vec<bool>) {
    let width = n.max(1).to_string().len().max(5);
    let n_ood = (spec.ood_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut is_ood = vec![false; n];
    for &i in &order[..n_ood] {
        is_ood[i] = true;
    }
    let mut ids = Vec::with_capacity(n);
    let mut feats = Vec::with_capacity(n);
    for (i, &ood) in is_ood.iter().enumerate() {
        let mut x: Vec<f64> = (0..spec.dim).map(|_| normal(rng)).collect();
        if ood {
            for &c in ood_coords {
                x[c] += spec.ood_shift;
            }
        }
        ids.push(format!("{prefix}{i:0width$}"));
        feats.push(x);
    }
    (ids, feats, is_ood)
}

/// Draws a labeled set and an unlabeled set from a Gaussian mixture.
///
/// Features are standard normal; a fraction `ood_fraction` of each set is
/// shifted by `ood_shift` on `max(1, dim / 4)` randomly chosen coordinates.
/// The latent quality is `q* = rule(w . x)` for a random unit vector `w`.
/// Opinion scores are `z + noise_std * e` where `z` is `q*` standardized over
/// both sets and `e` is standard normal, min-max rescaled to `[0, 100]`
/// jointly over both sets.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut w: Vec<f64> = (0..spec.dim).map(|_| normal(&mut rng)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= norm);
    let mut coords: Vec<usize> = (0..spec.dim).collect();
    coords.shuffle(&mut rng);
    let mut ood_coords = coords[..spec.ood_dims()].to_vec();
    ood_coords.sort_unstable();

    let (lid, lx, lood) = draw_set("L", spec.n_labeled, spec, &ood_coords, &mut rng);
    let (uid, ux, uood) = draw_set("U", spec.n_unlabeled, spec, &ood_coords, &mut rng);
    let ids: Vec<String> = lid.into_iter().chain(uid).collect();
    let feats: Vec<Vec<f64>> = lx.into_iter().chain(ux).collect();
    let oods: Vec<bool> = lood.into_iter().chain(uood).collect();

    let q: Vec<f64> = feats
        .iter()
        .map(|x| spec.rule.apply(x.iter().zip(&w).map(|(a, b)| a * b).sum()))
        .collect();
    let n = q.len() as f64;
    let mean = q.iter().sum::<f64>() / n;
    let sd = (q.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let raw: Vec<f64> = q
        .iter()
        .map(|v| {
            let z = if sd > 0.0 { (v - mean) / sd } else { 0.0 };
            z + spec.noise_std * normal(&mut rng)
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mos: Vec<f64> = raw
        .iter()
        .map(|v| if hi > lo { 100.0 * ((v - lo) / (hi - lo)) } else { 50.0 })
        .collect();

    let mut labeled = Vec::with_capacity(spec.n_labeled);
    let mut unlabeled = Vec::with_capacity(spec.n_unlabeled);
    let mut unlabeled_mos = BTreeMap::new();
    for (i, (id, x)) in ids.iter().zip(feats).enumerate() {
        if i < spec.n_labeled {
            labeled.push(Sample { id: id.clone(), features: x, mos: Some(mos[i]) });
        } else {
            unlabeled_mos.insert(id.clone(), mos[i]);
            unlabeled.push(Sample { id: id.clone(), features: x, mos: None });
        }
    }
    Ok(SyntheticData {
        spec: spec.clone(),
        weights: w,
        ood_coords,
        labeled: Dataset::new(spec.dim, labeled)?,
        unlabeled: Dataset::new(spec.dim, unlabeled)?,
        unlabeled_mos,
        quality: ids.iter().cloned().zip(q).collect(),
        ood_ids: ids.iter().zip(&oods).filter(|(_, &o)| o).map(|(id, _)| id.clone()).collect(),
    })
}

impl SyntheticData {
    /// The unlabeled set with its withheld MOS restored.
    pub fn unlabeled_with_mos(&self) -> Dataset {
        let mut ds = self.unlabeled.clone();
        for s in &mut ds.samples {
            s.mos = self.unlabeled_mos.get(&s.id).copied();
        }
        ds
    }

    /// Plain-text description of the generating process.
    pub fn describe(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        let list = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(",");
        writeln!(out, "n_labeled\t{}", s.n_labeled).unwrap();
        writeln!(out, "n_unlabeled\t{}", s.n_unlabeled).unwrap();
        writeln!(out, "dim\t{}", s.dim).unwrap();
        writeln!(out, "rule\t{}", s.rule.as_str()).unwrap();
        writeln!(out, "noise_std\t{:?}", s.noise_std).unwrap();
        writeln!(out, "ood_fraction\t{:?}", s.ood_fraction).unwrap();
        writeln!(out, "ood_shift\t{:?}", s.ood_shift).unwrap();
        writeln!(out, "ood_coords\t{}", list(&mut self.ood_coords.iter().map(|c| c.to_string()))).unwrap();
        writeln!(out, "seed\t{}", s.seed).unwrap();
        writeln!(out, "weights\t{}", list(&mut self.weights.iter().map(|v| format!("{v:?}")))).unwrap();
        writeln!(out, "mos_scale\t[0, 100]").unwrap();
        out
    }

    /// Writes `labeled.tsv`, `unlabeled.tsv` (MOS withheld),
    /// `unlabeled_mos.tsv`, `quality.tsv`, `ood.txt` and `spec.txt`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        save_dataset(&self.labeled, &dir.join("labeled.tsv"))?;
        save_dataset(&self.unlabeled, &dir.join("unlabeled.tsv"))?;
        let held = format_scores(self.unlabeled_mos.iter().map(|(k, v)| (k.as_str(), *v)));
        write_atomic(&dir.join("unlabeled_mos.tsv"), held.as_bytes())?;
        let q = format_scores(self.quality.iter().map(|(k, v)| (k.as_str(), *v)));
        write_atomic(&dir.join("quality.tsv"), q.as_bytes())?;
        let ood: String = self.ood_ids.iter().map(|id| format!("{id}\n")).collect();
        write_atomic(&dir.join("ood.txt"), ood.as_bytes())?;
        write_atomic(&dir.join("spec.txt"), self.describe().as_bytes())
    }
}
