//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use ssl_iqa::evaluation::{
    fit_logistic, gmad_pairs, logistic4, plcc_with_logistic, spot_failures, srcc, GmadLevel, GmadPair,
};
use ssl_iqa::harness::{
    generate_synthetic, run_config, split, ExperimentConfig, Sample, SplitSpec, SyntheticSpec,
};
use ssl_iqa::math::{
    ensemble_score, fidelity_loss, std_normal_cdf, thurstone_prob, Probability, QualityScore,
};
use ssl_iqa::model::{
    init, objective, ArchitectureConfig, EnsembleParams, LabeledBatch, Mode, UnlabeledBatch, BN_EPS,
};
use ssl_iqa::objectives::{
    accuracy_loss, diversity_pairwise, diversity_to_ensemble, diversity_variance, semi_loss,
    DiversityVariant, LabeledPair, ObjectiveConfig, PairScores, UnlabeledPair,
};
use ssl_iqa::trainer::{train, TrainConfig};

/// Initial learning rate for from-scratch training at desk scale.
const DESK_LR: f64 = 1e-2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

fn small_arch() -> ArchitectureConfig {
    ArchitectureConfig {
        input_dim: 8,
        shared_widths: vec![6],
        head_widths: vec![4, 1],
        num_heads: 3,
    }
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

fn random_point(seed: u64) -> EnsembleParams {
    let mut p = init(&small_arch(), seed).unwrap();
    // Away from init: every entry rescaled by U(0.5, 1.5) and shifted by
    // U(-0.05, 0.05), so biases are nonzero too.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA11CE);
    for t in p.weights.tensors_mut() {
        for v in t.iter_mut() {
            *v = *v * rng.random_range(0.5..1.5) + rng.random_range(-0.05..0.05);
        }
    }
    p.weights.output_scale = rng.random_range(0.5..2.0);
    p
}

fn patterns(p: &EnsembleParams, lab: &[Vec<f64>], unl: &[Vec<f64>]) -> Vec<bool> {
    let mut a = p.forward(lab, Mode::Training).unwrap().activation_pattern();
    a.extend(p.forward(unl, Mode::Training).unwrap().activation_pattern());
    a
}

/// Central differences at `h` are checked against the analytic gradient
/// with relative error `|a - n| / max(|a|, |n|, 1e-6)`.
///
/// Coordinates whose ReLU activation pattern changes within `10 h` are
/// skipped. Where the Richardson estimate of the central difference's own
/// truncation error, `4/3 |D(h) - D(h/2)|`, exceeds half the tolerance, the
/// difference at `h` is not an accurate oracle; those coordinates are checked
/// against the extrapolated `(4 D(h/2) - D(h)) / 3` instead.
fn gradient_check() -> Outcome {
    let h = 1e-4;
    let tol = 1e-4;
    let floor = 1e-6;
    let variants = [DiversityVariant::PairwiseFidelity, DiversityVariant::Variance, DiversityVariant::ToEnsemble];
    let (mut worst_stable, mut worst_richardson, mut worst_raw) = (0.0f64, 0.0f64, 0.0f64);
    let (mut stable, mut curved, mut kinked) = (0usize, 0usize, 0usize);
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(floor);
    for inst in 0..20u64 {
        let mut params = random_point(inst);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + inst);
        let lab = random_rows(&mut rng, 6, 8);
        let unl = random_rows(&mut rng, 6, 8);
        let lpairs: Vec<LabeledPair> = [(0, 1), (2, 3), (4, 5), (1, 4), (3, 0)]
            .iter()
            .map(|&(x, y)| LabeledPair { x, y, p: if rng.random_bool(0.5) { Probability::ONE } else { Probability::ZERO } })
            .collect();
        let upairs: Vec<UnlabeledPair> =
            [(0, 3), (1, 2), (5, 4), (2, 0)].iter().map(|&(x, y)| UnlabeledPair { x, y }).collect();
        let cfg = ObjectiveConfig {
            lambda: if inst % 2 == 0 { 1.0 } else { 0.5 },
            gamma: if inst % 4 < 2 { 0.06 } else { 0.5 },
            diversity: if inst < 14 { DiversityVariant::PairwiseFidelity } else { variants[(inst % 3) as usize] },
            include_labeled_in_diversity: inst % 3 != 2,
        };
        let lb = LabeledBatch { images: lab.iter().map(|v| v.as_slice()).collect(), pairs: lpairs.clone() };
        let ub = UnlabeledBatch { images: unl.iter().map(|v| v.as_slice()).collect(), pairs: upairs.clone() };
        let value = |p: &EnsembleParams| objective(p, &lb, &ub, &cfg).unwrap().total;
        let analytic: Vec<f64> = ssl_iqa::model::grad(&params, &lb, &ub, &cfg)
            .unwrap()
            .grads
            .tensors()
            .iter()
            .flat_map(|t| t.iter().copied())
            .collect();
        let base = patterns(&params, &lab, &unl);
        let sizes: Vec<usize> = params.weights.tensors().iter().map(|t| t.len()).collect();
        let mut k = 0;
        for (t, &len) in sizes.iter().enumerate() {
            for i in 0..len {
                let orig = params.weights.tensors()[t][i];
                let mut at = |d: f64| {
                    params.weights.tensors_mut()[t][i] = orig + d;
                    let out = (value(&params), patterns(&params, &lab, &unl));
                    params.weights.tensors_mut()[t][i] = orig;
                    out
                };
                let kink = [10.0 * h, -10.0 * h].iter().any(|&d| at(d).1 != base);
                let ((fp, pp), (fm, pm)) = (at(h), at(-h));
                let a = analytic[k];
                k += 1;
                if kink || pp != base || pm != base {
                    kinked += 1;
                    continue;
                }
                let d1 = (fp - fm) / (2.0 * h);
                let d2 = (at(h / 2.0).0 - at(-h / 2.0).0) / h;
                worst_raw = worst_raw.max(rel(a, d1));
                let trunc = 4.0 / 3.0 * (d1 - d2).abs() / d1.abs().max(floor);
                if trunc > 0.5 * tol {
                    curved += 1;
                    worst_richardson = worst_richardson.max(rel(a, (4.0 * d2 - d1) / 3.0));
                } else {
                    stable += 1;
                    worst_stable = worst_stable.max(rel(a, d1));
                }
            }
        }
    }
    let total = (stable + curved + kinked) as f64;
    let (kink_frac, curved_frac) = (kinked as f64 / total, curved as f64 / total);
    outcome(
        worst_stable <= tol && worst_richardson <= tol && kink_frac < 0.05 && curved_frac < 0.05,
        format!(
            "20 instances, {total} coordinates: max rel err {worst_stable:.2e} vs central FD h=1e-4 on {stable}, \
             {worst_richardson:.2e} vs Richardson on {curved} high-curvature ({:.2}%), {kinked} within 10h of a ReLU kink \
             ({:.2}%); raw h=1e-4 max over all smooth coordinates {worst_raw:.2e}",
            100.0 * curved_frac,
            100.0 * kink_frac
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Loss algebra

fn runner() -> TestRunner {
    TestRunner::new(PropConfig {
        cases: 10_000,
        failure_persistence: None,
        ..PropConfig::default()
    })
}

fn prob() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64]
}

fn p(v: f64) -> Probability {
    Probability::new(v).unwrap()
}

fn scores_matrix(m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-4.0..4.0f64, m), 2..12)
}

fn loss_algebra() -> Outcome {
    let mut failures = Vec::new();
    let mut note = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };
    let mut n_props = 0;

    n_props += 1;
    note("fidelity complement symmetry", runner().run(&(prob(), prob()), |(a, b)| {
        let l1 = fidelity_loss(p(a), p(b));
        let l2 = fidelity_loss(p(1.0 - a), p(1.0 - b));
        prop_assert!((l1 - l2).abs() <= 1e-12);
        Ok(())
    }).map_err(|e| e.to_string()));

    n_props += 1;
    note("fidelity bounds", runner().run(&(prob(), prob()), |(a, b)| {
        let l = fidelity_loss(p(a), p(b));
        prop_assert!((0.0..=1.0).contains(&l));
        prop_assert!(fidelity_loss(p(a), p(a)) == 0.0);
        Ok(())
    }).map_err(|e| e.to_string()));

    // Zero exactly on the diagonal of a 1e-3 grid, positive off it.
    n_props += 1;
    let mut grid_ok = true;
    for i in 0..=1000 {
        for j in 0..=1000 {
            let l = fidelity_loss(p(i as f64 / 1000.0), p(j as f64 / 1000.0));
            if (i == j) != (l == 0.0) || l < 0.0 {
                grid_ok = false;
            }
        }
    }
    if !grid_ok {
        note("fidelity zero iff equal on the 1e-3 grid", Err("violated".into()));
    }

    n_props += 1;
    note("thurstone antisymmetry", runner().run(&(-30.0..30.0f64, -30.0..30.0f64), |(x, y)| {
        let (qx, qy) = (QualityScore::new(x).unwrap(), QualityScore::new(y).unwrap());
        let s = thurstone_prob(qx, qy).value() + thurstone_prob(qy, qx).value();
        prop_assert!((s - 1.0).abs() <= 1e-12);
        Ok(())
    }).map_err(|e| e.to_string()));

    n_props += 1;
    note("thurstone monotone in fx", runner().run(&(-20.0..20.0f64, -20.0..20.0f64, 0.0..5.0f64), |(x, y, d)| {
        let q = |v| QualityScore::new(v).unwrap();
        prop_assert!(thurstone_prob(q(x + d), q(y)).value() >= thurstone_prob(q(x), q(y)).value());
        Ok(())
    }).map_err(|e| e.to_string()));

    n_props += 1;
    let oracle = Normal::new(0.0, 1.0).unwrap();
    let mut cdf_err: f64 = 0.0;
    for i in -800..=800 {
        let z = i as f64 * 0.01;
        cdf_err = cdf_err.max((std_normal_cdf(z).unwrap().value() - oracle.cdf(z)).abs());
    }
    if cdf_err > 1e-10 {
        note("Phi vs oracle on [-8, 8]", Err(format!("{cdf_err:e}")));
    }
    note("Phi vs oracle (random)", runner().run(&(-8.0..8.0f64), |z| {
        prop_assert!((std_normal_cdf(z).unwrap().value() - oracle.cdf(z)).abs() <= 1e-10);
        Ok(())
    }).map_err(|e| e.to_string()));

    n_props += 1;
    note("ensemble permutation invariance", runner().run(
        &(prop::collection::vec(-100.0..100.0f64, 1..16), any::<u64>()),
        |(v, seed)| {
            let mut w = v.clone();
            w.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let q = |s: &[f64]| s.iter().map(|x| QualityScore::new(*x).unwrap()).collect::<Vec<_>>();
            let a = ensemble_score(&q(&v)).unwrap().value();
            let b = ensemble_score(&q(&w)).unwrap().value();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            Ok(())
        },
    ).map_err(|e| e.to_string()));

    // Diversity is zero when every head is a copy of the first one.
    n_props += 1;
    note("diversity zero on identical heads", runner().run(
        &(any::<u64>(), 2usize..9, 2usize..10),
        |(seed, m, n)| {
            let arch = ArchitectureConfig { input_dim: 5, shared_widths: vec![7], head_widths: vec![4], num_heads: m };
            let mut params = init(&arch, seed).unwrap();
            params.clone_first_head();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            let x = random_rows(&mut rng, n, 5);
            let s = params.forward(&x, Mode::Training).unwrap().scores().to_vec();
            let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            let probs: Vec<Vec<Probability>> = pairs
                .iter()
                .map(|&(a, b)| (0..m).map(|h| thurstone_prob(QualityScore::new(s[a][h]).unwrap(), QualityScore::new(s[b][h]).unwrap())).collect())
                .collect();
            let ens: Vec<Probability> = pairs
                .iter()
                .map(|&(a, b)| {
                    let ea = s[a].iter().sum::<f64>() / m as f64;
                    let eb = s[b].iter().sum::<f64>() / m as f64;
                    thurstone_prob(QualityScore::new(ea).unwrap(), QualityScore::new(eb).unwrap())
                })
                .collect();
            prop_assert!(diversity_pairwise(&probs).unwrap() == 0.0);
            prop_assert!(diversity_variance(&s).unwrap() == 0.0);
            prop_assert!(diversity_to_ensemble(&probs, &ens).unwrap().abs() <= 1e-12);
            Ok(())
        },
    ).map_err(|e| e.to_string()));

    n_props += 1;
    note("diversity ranges", runner().run(
        &(prop::collection::vec(prop::collection::vec(prob(), 4), 1..10), prop::collection::vec(prob(), 10), scores_matrix(4)),
        |(probs, ens, scores)| {
            let probs: Vec<Vec<Probability>> = probs.iter().map(|r| r.iter().map(|v| p(*v)).collect()).collect();
            let ens: Vec<Probability> = ens[..probs.len()].iter().map(|v| p(*v)).collect();
            let d1 = diversity_pairwise(&probs).unwrap();
            let d2 = diversity_to_ensemble(&probs, &ens).unwrap();
            prop_assert!((-1.0..=0.0).contains(&d1));
            prop_assert!((-1.0..=0.0).contains(&d2));
            prop_assert!(diversity_variance(&scores).unwrap() <= 0.0);
            Ok(())
        },
    ).map_err(|e| e.to_string()));

    let pairs_and_labels = (scores_matrix(5), prop::collection::vec(any::<bool>(), 12), any::<u64>(), 0.0..3.0f64);

    n_props += 1;
    note("accuracy head relabeling", runner().run(&pairs_and_labels, |(s, labels, seed, lambda)| {
        let mut perm: Vec<usize> = (0..5).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let t: Vec<Vec<f64>> = s.iter().map(|r| perm.iter().map(|&h| r[h]).collect()).collect();
        let lab: Vec<Probability> = labels[..s.len() - 1].iter().map(|&b| if b { Probability::ONE } else { Probability::ZERO }).collect();
        let mk = |m: &Vec<Vec<f64>>| (0..m.len() - 1).map(|i| (m[i].clone(), m[i + 1].clone())).collect::<Vec<_>>();
        let (a, b) = (mk(&s), mk(&t));
        let pa: Vec<PairScores> = a.iter().map(|(x, y)| PairScores { x, y }).collect();
        let pb: Vec<PairScores> = b.iter().map(|(x, y)| PairScores { x, y }).collect();
        let la = accuracy_loss(&pa, &lab, lambda).unwrap();
        let lb = accuracy_loss(&pb, &lab, lambda).unwrap();
        prop_assert!((la - lb).abs() <= 1e-12);
        Ok(())
    }).map_err(|e| e.to_string()));

    n_props += 1;
    note("accuracy complement/swap symmetry", runner().run(&pairs_and_labels, |(s, labels, _, lambda)| {
        let lab: Vec<Probability> = labels[..s.len() - 1].iter().map(|&b| if b { Probability::ONE } else { Probability::ZERO }).collect();
        let fwd: Vec<PairScores> = (0..s.len() - 1).map(|i| PairScores { x: &s[i], y: &s[i + 1] }).collect();
        let rev: Vec<PairScores> = (0..s.len() - 1).map(|i| PairScores { x: &s[i + 1], y: &s[i] }).collect();
        let flipped: Vec<Probability> = lab.iter().map(|l| l.complement()).collect();
        let a = accuracy_loss(&fwd, &lab, lambda).unwrap();
        let b = accuracy_loss(&rev, &flipped, lambda).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        Ok(())
    }).map_err(|e| e.to_string()));

    n_props += 1;
    note("semi_loss affine in gamma", runner().run(&(0.0..2.0f64, -1.0..0.0f64, 0.0..1.0f64, 0.0..1.0f64), |(acc, div, g0, g1)| {
        let slope = (semi_loss(acc, div, g1) - semi_loss(acc, div, g0)) / (g1 - g0);
        if (g1 - g0).abs() > 1e-3 {
            prop_assert!((slope - div).abs() <= 1e-9);
        }
        prop_assert!(semi_loss(acc, div, 0.0) == acc);
        Ok(())
    }).map_err(|e| e.to_string()));

    let pass = failures.is_empty();
    let detail = if pass {
        format!("{n_props} properties x 1e4 cases (grid and sweep checks exhaustive), Phi max err {cdf_err:.1e}")
    } else {
        failures.join("; ")
    };
    outcome(pass, detail)
}

// ---------------------------------------------------------------------------
// 3. Calibration contract

fn calibration() -> Outcome {
    let mut worst_mean: f64 = 0.0;
    let mut worst_eps_std: f64 = 0.0;
    let mut worst_literal: f64 = 0.0;
    let mut forwards = 0;
    for m in [2usize, 8] {
        for seed in 0..40u64 {
            let arch = ArchitectureConfig { num_heads: m, ..ArchitectureConfig::desk_default(16) };
            let mut params = init(&arch, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 77);
            params.weights.output_scale = if seed % 2 == 0 { 1.0 } else { rng.random_range(0.2..4.0) };
            if seed % 3 == 0 {
                for t in params.weights.tensors_mut() {
                    for v in t.iter_mut() {
                        *v *= rng.random_range(0.5..1.5);
                    }
                }
            }
            let n = rng.random_range(2..64);
            let x = random_rows(&mut rng, n, 16);
            let trace = params.forward(&x, Mode::Training).unwrap();
            forwards += 1;
            let scale = params.weights.output_scale;
            for h in 0..m {
                let col: Vec<f64> = trace.scores().iter().map(|r| r[h]).collect();
                let mu = col.iter().sum::<f64>() / n as f64;
                let sd = (col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64).sqrt();
                let (_, var) = trace.head_stats(h);
                let expected = scale * (var / (var + BN_EPS)).sqrt();
                worst_mean = worst_mean.max(mu.abs());
                worst_eps_std = worst_eps_std.max((sd - expected).abs() / scale.max(1.0));
                worst_literal = worst_literal.max((sd - scale).abs());
            }
        }
    }
    outcome(
        worst_mean <= 1e-5 && worst_eps_std <= 1e-5,
        format!(
            "{forwards} training forwards, M in {{2, 8}}: max |mean| {worst_mean:.1e}, \
             max |std - scale*sqrt(var/(var+eps))| {worst_eps_std:.1e}; \
             literal max |std - scale| {worst_literal:.1e} (normalization eps = {BN_EPS:e})"
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Synthetic end-to-end

fn e2e_spec() -> SyntheticSpec {
    SyntheticSpec {
        n_labeled: 2000,
        n_unlabeled: 2000,
        dim: 16,
        noise_std: 0.31,
        seed: 1,
        ..SyntheticSpec::default()
    }
}

fn desk_config(dim: usize, gamma: f64, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(ArchitectureConfig::desk_default(dim));
    c.objective.gamma = gamma;
    c.initial_lr = DESK_LR;
    c.seed = seed;
    c
}

fn test_srcc(params: &EnsembleParams, test: &[Sample]) -> f64 {
    let feats: Vec<&[f64]> = test.iter().map(|s| s.features.as_slice()).collect();
    let moss: Vec<f64> = test.iter().map(|s| s.mos.unwrap()).collect();
    srcc(&params.predict(&feats).unwrap(), &moss).unwrap()
}

fn end_to_end() -> Outcome {
    let data = generate_synthetic(&e2e_spec()).unwrap();
    let q: Vec<f64> = data.labeled.samples.iter().map(|s| data.quality[&s.id]).collect();
    let ceiling = srcc(&q, &data.labeled.moss().unwrap()).unwrap();
    let (tr, val, test) = split(&data.labeled, &SplitSpec::default(), 0).unwrap();
    let mut res = Vec::new();
    for gamma in [0.06, 0.0] {
        let started = Instant::now();
        let (params, hist) = train(&desk_config(16, gamma, 7), &tr.samples, &data.unlabeled.samples, &val.samples).unwrap();
        res.push((test_srcc(&params, &test.samples), hist.best_epoch, started.elapsed().as_secs_f64()));
    }
    let (s06, s0) = (res[0].0, res[1].0);
    outcome(
        s06 >= 0.9 && (s06 - s0).abs() <= 0.02 && res[0].2 <= 300.0,
        format!(
            "noiseless-vs-MOS SRCC {ceiling:.4}; test SRCC gamma=0.06 {s06:.4} (>= 0.9, {:.1}s), gamma=0 {s0:.4}, \
             |diff| {:.4} (<= 0.02); initial lr {DESK_LR:e}",
            res[0].2,
            (s06 - s0).abs()
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Failure-spotting direction

fn failure_spotting() -> Outcome {
    let spec = SyntheticSpec { ood_fraction: 0.1, seed: 11, ..e2e_spec() };
    let data = generate_synthetic(&spec).unwrap();
    let pool = data.unlabeled_with_mos();
    let moss: BTreeMap<&str, f64> = pool.samples.iter().map(|s| (s.id.as_str(), s.mos.unwrap())).collect();
    let k = 500;
    let mut rows = Vec::new();
    for repeat in 0..3 {
        let (tr, val, _) = split(&data.labeled, &SplitSpec::default(), repeat).unwrap();
        let mut row = Vec::new();
        for gamma in [0.06, 0.0] {
            let (params, _) =
                train(&desk_config(16, gamma, 7 + repeat as u64), &tr.samples, &data.unlabeled.samples, &val.samples).unwrap();
            let feats: Vec<&[f64]> = pool.samples.iter().map(|s| s.features.as_slice()).collect();
            let preds: BTreeMap<&str, f64> =
                pool.samples.iter().map(|s| s.id.as_str()).zip(params.predict(&feats).unwrap()).collect();
            let sub_srcc = |ids: &[&str]| {
                let p: Vec<f64> = ids.iter().map(|i| preds[i]).collect();
                let m: Vec<f64> = ids.iter().map(|i| moss[i]).collect();
                srcc(&p, &m).unwrap()
            };
            let ranking = spot_failures(&params, &pool.samples, k).unwrap();
            let top: Vec<&str> = ranking.ids().collect();
            let mut ids: Vec<&str> = pool.samples.iter().map(|s| s.id.as_str()).collect();
            ids.shuffle(&mut ChaCha8Rng::seed_from_u64(500 + repeat as u64));
            row.push((sub_srcc(&top), sub_srcc(&ids[..k])));
        }
        rows.push(row);
    }
    let wins = rows.iter().filter(|r| r[0].0 < r[0].1).count();
    let mean = |g: usize| rows.iter().map(|r| r[g].0).sum::<f64>() / 3.0;
    let (top06, top0) = (mean(0), mean(1));
    let per: Vec<String> = rows
        .iter()
        .map(|r| format!("[top {:.3} / random {:.3} ; gamma=0 top {:.3}]", r[0].0, r[0].1, r[1].0))
        .collect();
    outcome(
        wins >= 2 && top06 <= top0,
        format!(
            "top-{k} below random-{k} in {wins}/3 repeats; mean top-{k} SRCC gamma=0.06 {top06:.4} vs gamma=0 {top0:.4}; {}",
            per.join(" ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Logistic-fit recovery

fn logistic_recovery() -> Outcome {
    let etas: [[f64; 4]; 5] = [
        [100.0, 0.0, 0.5, 0.2],
        [5.0, 1.0, -2.0, 1.5],
        [0.0, 80.0, 3.0, 0.7],
        [1.0, 0.0, 0.0, 0.05],
        [4.5, 1.2, 10.0, 3.0],
    ];
    let mut worst_res: f64 = 0.0;
    let mut worst_plcc: f64 = 1.0;
    let mut all_converged = true;
    for (i, eta) in etas.iter().enumerate() {
        for seed in 0..4u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + i as u64);
            let w = 3.0 * eta[3].abs();
            let x: Vec<f64> = (0..200).map(|_| rng.random_range(eta[2] - w..eta[2] + w)).collect();
            let y: Vec<f64> = x.iter().map(|&f| logistic4(eta, f)).collect();
            let fit = fit_logistic(&x, &y).unwrap();
            let (plcc, _) = plcc_with_logistic(&x, &y).unwrap();
            all_converged &= fit.converged;
            worst_res = worst_res.max(fit.residual);
            worst_plcc = worst_plcc.min(plcc);
        }
    }
    outcome(
        all_converged && worst_res <= 1e-6 && worst_plcc >= 0.9999,
        format!("{} fits: max residual {worst_res:.1e} (<= 1e-6), min PLCC {worst_plcc:.8} (>= 0.9999)", etas.len() * 4),
    )
}

// ---------------------------------------------------------------------------
// 7. gMAD oracle equivalence

fn brute_gmad(def: &BTreeMap<String, f64>, att: &BTreeMap<String, f64>, levels: usize) -> Vec<GmadLevel> {
    let mut ids: Vec<&String> = def.keys().collect();
    ids.sort_by(|a, b| def[*a].partial_cmp(&def[*b]).unwrap().then(a.cmp(b)));
    let n = ids.len();
    (0..levels)
        .map(|b| {
            let bucket = &ids[b * n / levels..(b + 1) * n / levels];
            if bucket.len() < 2 {
                return GmadLevel::Skipped { level: b, size: bucket.len() };
            }
            let mut best: Option<(f64, &String, &String)> = None;
            for &t in bucket {
                for &u in bucket {
                    if t == u {
                        continue;
                    }
                    let gap = att[t] - att[u];
                    let better = match best {
                        None => true,
                        Some((g, bt, bu)) => gap > g || (gap == g && (t, u) < (bt, bu)),
                    };
                    if better {
                        best = Some((gap, t, u));
                    }
                }
            }
            let (gap, t, u) = best.unwrap();
            GmadLevel::Pair(GmadPair { level: b, top_id: t.clone(), bottom_id: u.clone(), attacker_gap: gap })
        })
        .collect()
}

fn gmad_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases = 400;
    let mut mismatches = 0;
    let mut skipped_levels = 0;
    for c in 0..cases {
        let n = rng.random_range(1..=200);
        let coarse = c % 3 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            if coarse {
                rng.random_range(0..6) as f64 * 0.5
            } else {
                rng.random_range(-3.0..3.0)
            }
        };
        let mut def = BTreeMap::new();
        let mut att = BTreeMap::new();
        for i in 0..n {
            let id = format!("img{:04}", rng.random_range(0..10_000) * 1000 + i);
            def.insert(id.clone(), draw(&mut rng));
            att.insert(id, draw(&mut rng));
        }
        let levels = rng.random_range(1..=(n / 2 + 3).min(40));
        let got = gmad_pairs(&def, &att, levels).unwrap();
        let want = brute_gmad(&def, &att, levels);
        skipped_levels += want.iter().filter(|l| l.pair().is_none()).count();
        if got != want {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{cases} pools of 1..200 samples (a third with heavy ties, {skipped_levels} skipped levels): {mismatches} mismatches"),
    )
}

// ---------------------------------------------------------------------------
// 8. Determinism of `run`

const SMALL_RUN: &str = r#"
[synthetic]
n_labeled = 300
n_unlabeled = 200
dim = 8
ood_fraction = 0.1
seed = 5

[model]
shared_widths = [16]
head_widths = [8, 1]
num_heads = 4

[train]
epochs = 3
initial_lr = 0.01
seed = 3

[analysis]
spot_k = 40
gmad_levels = 5

[sweep]
param = "gamma"
values = [0.0, 0.06]

[output]
dir = "out"
"#;

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.toml");
        std::fs::write(&cfg_path, SMALL_RUN).unwrap();
        ssl_iqa::harness::run_experiment(&cfg_path).unwrap();
        let mut files = files_under(&dir.path().join("out"));
        files.retain(|p, _| p.file_name().unwrap() != "timing.tsv");
        trees.push(files);
    }
    let kinds = ["checkpoint.txt", "history.tsv", "report.tsv", "spot.tsv", "summary.tsv"];
    let present = kinds.iter().all(|k| trees[0].keys().any(|p| p.file_name().unwrap() == *k))
        && trees[0].keys().any(|p| p.to_string_lossy().contains("gmad_"));
    let same = trees[0] == trees[1];
    outcome(
        same && present,
        format!("two runs of a 2-point x 3-repeat config: {} files compared, identical = {same}", trees[0].len()),
    )
}

// ---------------------------------------------------------------------------
// 9. Ablation-grid shape

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn sweep_shape(name: &str, expected: &[&str]) -> (bool, String) {
    let mut cfg = ExperimentConfig::load(&configs_dir().join(name)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let started = Instant::now();
    let summary = run_config(&cfg).unwrap();
    let labels: Vec<&str> = summary.points.iter().map(|p| p.label.as_str()).collect();
    let complete = summary.points.iter().all(|p| p.is_complete());
    let files = expected.iter().all(|l| dir.path().join(l).join("summary.tsv").is_file());
    let table = std::fs::read_to_string(dir.path().join("summary.tsv")).unwrap();
    let rows = table.lines().filter(|l| !l.starts_with('#')).count();
    let srccs: Vec<String> = summary.points.iter().map(|p| format!("{}={:.3}", p.label, p.mean_srcc)).collect();
    (
        labels == expected && complete && files && rows == expected.len(),
        format!("{name}: {} points in {:.0}s ({})", labels.len(), started.elapsed().as_secs_f64(), srccs.join(", ")),
    )
}

fn ablation_shape() -> Outcome {
    let (a, da) = sweep_shape(
        "gamma_sweep.toml",
        &["gamma_0", "gamma_0.04", "gamma_0.06", "gamma_0.08", "gamma_0.1"],
    );
    let (b, db) = sweep_shape(
        "heads_sweep.toml",
        &["num_heads_2", "num_heads_4", "num_heads_6", "num_heads_8", "num_heads_12"],
    );
    outcome(a && b, format!("{da}; {db}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient correctness", gradient_check),
        ("loss algebra", loss_algebra),
        ("calibration contract", calibration),
        ("synthetic end-to-end", end_to_end),
        ("failure-spotting direction", failure_spotting),
        ("logistic-fit recovery", logistic_recovery),
        ("gMAD oracle equivalence", gmad_oracle),
        ("determinism", determinism),
        ("ablation-grid shape", ablation_shape),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {:<28} {} ({:.1}s) {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
}
