//! Group maximum differentiation (gMAD) pair search over score tables.
//!
//! The pool is cut into equal-frequency levels by the defender's scores.
//! Inside each level the defender rates all members about the same, and the
//! pair the attacker separates most is reported: `top_id` is the attacker's
//! highest-scored member, `bottom_id` its lowest.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GmadPair {
    pub level: usize,
    pub top_id: String,
    pub bottom_id: String,
    pub attacker_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GmadLevel {
    Pair(GmadPair),
    /// The level had fewer than two members and was omitted.
    Skipped { level: usize, size: usize },
}

impl GmadLevel {
    pub fn pair(&self) -> Option<&GmadPair> {
        match self {
            GmadLevel::Pair(p) => Some(p),
            GmadLevel::Skipped { .. } => None,
        }
    }
}

/// Ids sorted by `(defender score, id)` and cut into `num_levels` contiguous
/// chunks; chunk `b` spans ranks `floor(b n / L) .. floor((b+1) n / L)`.
pub fn defender_levels(
    defender: &BTreeMap<String, f64>,
    num_levels: usize,
) -> Vec<Vec<&String>> {
    let mut ids: Vec<&String> = defender.keys().collect();
    ids.sort_by(|a, b| defender[*a].total_cmp(&defender[*b]).then_with(|| a.cmp(b)));
    let n = ids.len();
    (0..num_levels)
        .map(|b| ids[b * n / num_levels..(b + 1) * n / num_levels].to_vec())
        .collect()
}

pub fn gmad_pairs(
    defender: &BTreeMap<String, f64>,
    attacker: &BTreeMap<String, f64>,
    num_levels: usize,
) -> Result<Vec<GmadLevel>> {
    if num_levels == 0 {
        return Err(Error::invalid("num_levels must be positive"));
    }
    if defender.is_empty() {
        return Err(Error::invalid("empty score table"));
    }
    if defender.len() != attacker.len() || defender.keys().any(|k| !attacker.contains_key(k)) {
        return Err(Error::invalid("defender and attacker must cover the same ids"));
    }
    if defender.values().chain(attacker.values()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }

    let mut out = Vec::with_capacity(num_levels);
    for (level, members) in defender_levels(defender, num_levels).into_iter().enumerate() {
        if members.len() < 2 {
            out.push(GmadLevel::Skipped {
                level,
                size: members.len(),
            });
            continue;
        }
        let mut by_attacker = members.clone();
        by_attacker.sort_by(|a, b| attacker[*b].total_cmp(&attacker[*a]).then_with(|| a.cmp(b)));
        let top = by_attacker[0];
        let bottom = by_attacker[1..]
            .iter()
            .copied()
            .min_by(|a, b| attacker[*a].total_cmp(&attacker[*b]).then_with(|| a.cmp(b)))
            .expect("level has at least two members");
        out.push(GmadLevel::Pair(GmadPair {
            level,
            top_id: top.clone(),
            bottom_id: bottom.clone(),
            attacker_gap: attacker[top] - attacker[bottom],
        }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
        entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn planted_pair_in_first_level() {
        let def = table(&[("a", 0.0), ("b", 0.01), ("c", 5.0), ("d", 5.1)]);
        let att = table(&[("a", 0.9), ("b", 0.1), ("c", 0.5), ("d", 0.5)]);
        let levels = gmad_pairs(&def, &att, 2).unwrap();
        let p = levels[0].pair().unwrap();
        assert_eq!((p.top_id.as_str(), p.bottom_id.as_str()), ("a", "b"));
        assert!((p.attacker_gap - 0.8).abs() < 1e-12);
        // Ties: top is the smallest id, bottom the next.
        let q = levels[1].pair().unwrap();
        assert_eq!((q.top_id.as_str(), q.bottom_id.as_str(), q.attacker_gap), ("c", "d", 0.0));
    }

    #[test]
    fn single_level_is_global_extremes() {
        let def = table(&[("a", 3.0), ("b", 1.0), ("c", 2.0), ("d", 0.0)]);
        let att = table(&[("a", 0.2), ("b", -4.0), ("c", 7.0), ("d", 1.0)]);
        let p = gmad_pairs(&def, &att, 1).unwrap()[0].pair().cloned().unwrap();
        assert_eq!((p.top_id.as_str(), p.bottom_id.as_str(), p.attacker_gap), ("c", "b", 11.0));
    }

    #[test]
    fn self_attack_gap_within_level_width() {
        let def: BTreeMap<String, f64> =
            (0..37).map(|i| (format!("i{i:02}"), ((i * 13) % 37) as f64 * 0.3)).collect();
        for levels in [1, 3, 5, 8] {
            for (lv, members) in gmad_pairs(&def, &def, levels)
                .unwrap()
                .iter()
                .zip(defender_levels(&def, levels))
            {
                let p = lv.pair().unwrap();
                let vals: Vec<f64> = members.iter().map(|m| def[*m]).collect();
                let width = vals.iter().cloned().fold(f64::MIN, f64::max)
                    - vals.iter().cloned().fold(f64::MAX, f64::min);
                assert!(p.attacker_gap <= width + 1e-12);
            }
        }
    }

    #[test]
    fn small_levels_are_skipped() {
        let def = table(&[("a", 0.0), ("b", 1.0), ("c", 2.0)]);
        let levels = gmad_pairs(&def, &def, 3).unwrap();
        assert!(levels.iter().all(|l| matches!(l, GmadLevel::Skipped { size: 1, .. })));
        assert!(gmad_pairs(&def, &table(&[("a", 0.0)]), 1).is_err());
        assert!(gmad_pairs(&def, &def, 0).is_err());
    }
}
