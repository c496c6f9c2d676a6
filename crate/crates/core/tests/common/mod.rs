//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the metrics sweep or the head's backward pass:
//! rates are recounted element by element and gradients come from central
//! finite differences of a separately written forward pass.
#![allow(dead_code)]

use std::collections::BTreeMap;

use padkit::manifest::{Label, PaiSpecies};
use padkit::{MlpHead, ScoreEntry, ScoreSet};
use rand::Rng;

pub const SPECIES_POOL: [PaiSpecies; 4] = [
    PaiSpecies::Printed,
    PaiSpecies::ContactLensTextured,
    PaiSpecies::Cadaver,
    PaiSpecies::Display,
];

/// A score set with up to `max_entries` entries and up to `max_species`
/// attack species. Roughly half the sets use coarse quantized scores so that
/// ties across classes are common.
pub fn random_score_set<R: Rng>(rng: &mut R, max_entries: usize, max_species: usize) -> ScoreSet {
    let n_species = rng.random_range(1..=max_species);
    let n = rng.random_range(2..=max_entries);
    let quantum = match rng.random_range(0..4) {
        0 => Some(4.0),
        1 => Some(20.0),
        2 => Some(1000.0),
        _ => None,
    };
    let overlap: f64 = rng.random_range(0.0..1.0);
    let draw = |rng: &mut R, attack: bool| {
        let u: f64 = rng.random();
        let shift = (1.0 - overlap) * 0.5;
        let s = if attack {
            shift + u * (1.0 - shift)
        } else {
            u * (1.0 - shift)
        };
        match quantum {
            Some(q) => (s * q).round() / q,
            None => s,
        }
    };
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        // The first two entries guarantee both classes are present.
        let attack = match i {
            0 => false,
            1 => true,
            _ => rng.random_bool(0.5),
        };
        let (label, species) = if attack {
            let k = if i == 1 {
                0
            } else {
                rng.random_range(0..n_species)
            };
            (Label::Attack, SPECIES_POOL[k].clone())
        } else {
            (Label::BonaFide, PaiSpecies::None)
        };
        entries.push(ScoreEntry {
            sample_id: format!("s{i}"),
            label,
            pai_species: species,
            score: draw(rng, attack),
        });
    }
    ScoreSet::new(entries).expect("scores in [0, 1]")
}

/// Scores split by class; attack scores keyed by species name.
pub struct Raw {
    pub bona_fide: Vec<f64>,
    pub attacks: BTreeMap<String, Vec<f64>>,
}

impl Raw {
    pub fn new(set: &ScoreSet) -> Self {
        let mut bona_fide = Vec::new();
        let mut attacks: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for e in set.entries() {
            match e.label {
                Label::BonaFide => bona_fide.push(e.score),
                Label::Attack => attacks
                    .entry(e.pai_species.name().to_string())
                    .or_default()
                    .push(e.score),
            }
        }
        Raw { bona_fide, attacks }
    }

    pub fn pooled(&self) -> Vec<f64> {
        self.attacks.values().flatten().copied().collect()
    }
}

/// Which attack scores define the APCER axis.
#[derive(Clone, Debug)]
pub enum Scope {
    Pooled,
    WorstCase,
    Species(String),
}

fn count_below(xs: &[f64], tau: f64) -> usize {
    xs.iter().filter(|&&s| s < tau).count()
}

fn count_at_or_above(xs: &[f64], tau: f64) -> usize {
    xs.iter().filter(|&&s| s >= tau).count()
}

pub fn apcer(xs: &[f64], tau: f64) -> f64 {
    count_below(xs, tau) as f64 / xs.len() as f64
}

pub fn bpcer(raw: &Raw, tau: f64) -> f64 {
    count_at_or_above(&raw.bona_fide, tau) as f64 / raw.bona_fide.len() as f64
}

/// Maximum per-species APCER; the alphabetically first species wins ties.
pub fn worst_case(raw: &Raw, tau: f64) -> (f64, String) {
    let mut best: Option<(f64, &String)> = None;
    for (name, xs) in &raw.attacks {
        let a = apcer(xs, tau);
        if best.is_none_or(|(b, _)| a > b) {
            best = Some((a, name));
        }
    }
    let (a, name) = best.expect("at least one species");
    (a, name.clone())
}

pub fn scoped_apcer(raw: &Raw, scope: &Scope, tau: f64) -> f64 {
    match scope {
        Scope::Pooled => apcer(&raw.pooled(), tau),
        Scope::WorstCase => worst_case(raw, tau).0,
        Scope::Species(name) => apcer(&raw.attacks[name], tau),
    }
}

/// `+inf`, every distinct in-scope score in decreasing order, `-inf`.
pub fn thresholds(raw: &Raw, scope: &Scope) -> Vec<f64> {
    let mut xs: Vec<f64> = raw.bona_fide.clone();
    match scope {
        Scope::Species(name) => xs.extend(&raw.attacks[name]),
        _ => xs.extend(raw.pooled()),
    }
    xs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    xs.dedup();
    let mut out = vec![f64::INFINITY];
    out.extend(xs);
    out.push(f64::NEG_INFINITY);
    out
}

/// `(tau, apcer, bpcer)` at every threshold, each rate recounted from scratch.
pub fn det(raw: &Raw, scope: &Scope) -> Vec<(f64, f64, f64)> {
    thresholds(raw, scope)
        .into_iter()
        .map(|t| (t, scoped_apcer(raw, scope, t), bpcer(raw, t)))
        .collect()
}

/// Equal error rate on a decreasing-threshold DET list: the first point where
/// BPCER catches up with APCER, linearly interpolated against its predecessor
/// unless the two rates are exactly equal there.
pub fn eer(points: &[(f64, f64, f64)]) -> (f64, f64) {
    for (i, &(tau, a, b)) in points.iter().enumerate() {
        if a == b {
            return (a, tau);
        }
        if a < b {
            let (tau0, a0, b0) = points[i - 1];
            let t = (a0 - b0) / ((a0 - b0) - (a - b));
            let tau_eer = match (tau0.is_finite(), tau.is_finite()) {
                (true, true) => tau0 + t * (tau - tau0),
                (false, _) => tau,
                (_, false) => tau0,
            };
            return (a0 + t * (a - a0), tau_eer);
        }
    }
    unreachable!("the -inf sentinel has APCER 0 and BPCER 1")
}

/// Threshold of the first sweep point with APCER <= BPCER.
pub fn eer_sweep_tau(points: &[(f64, f64, f64)]) -> f64 {
    points.iter().find(|p| p.1 <= p.2).expect("-inf sentinel").0
}

/// BPCER at the largest threshold with APCER <= target, with that threshold.
pub fn operating_point(points: &[(f64, f64, f64)], target: f64) -> Option<(f64, f64)> {
    points
        .iter()
        .find(|p| p.1 <= target)
        .map(|&(tau, _, b)| (b, tau))
}

/// Straight-line re-implementation of the head's forward pass.
pub fn forward(head: &MlpHead, x: &[f64]) -> f64 {
    let d = head.input_dim;
    let mut z = head.b2;
    for j in 0..head.hidden {
        let mut pre = head.b1[j];
        for (i, xi) in x.iter().enumerate() {
            pre += head.w1[j * d + i] * xi;
        }
        if pre > 0.0 {
            z += head.w2[j] * pre;
        }
    }
    1.0 / (1.0 + (-z).exp())
}

pub fn mean_bce(head: &MlpHead, batch: &[(Vec<f64>, f64)]) -> f64 {
    let eps = 1e-12;
    let total: f64 = batch
        .iter()
        .map(|(x, y)| {
            let p = forward(head, x).clamp(eps, 1.0 - eps);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / batch.len() as f64
}

/// Central finite-difference gradient of [`mean_bce`] in parameter order
/// w1, b1, w2, b2.
pub fn numeric_gradient(head: &MlpHead, batch: &[(Vec<f64>, f64)], step: f64) -> Vec<f64> {
    let mut probe = head.clone();
    (0..head.n_params())
        .map(|i| {
            let orig = *probe.param_mut(i);
            *probe.param_mut(i) = orig + step;
            let up = mean_bce(&probe, batch);
            *probe.param_mut(i) = orig - step;
            let down = mean_bce(&probe, batch);
            *probe.param_mut(i) = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Smallest distance of any hidden pre-activation from the ReLU kink.
pub fn kink_distance(head: &MlpHead, batch: &[(Vec<f64>, f64)]) -> f64 {
    let d = head.input_dim;
    let mut min = f64::INFINITY;
    for (x, _) in batch {
        for j in 0..head.hidden {
            let pre: f64 = head.b1[j] + (0..d).map(|i| head.w1[j * d + i] * x[i]).sum::<f64>();
            min = min.min(pre.abs());
        }
    }
    min
}

/// Relative error used by the gradient check; `None` when both values are
/// below `floor` in magnitude.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> Option<f64> {
    let scale = analytic.abs().max(numeric.abs());
    (scale >= floor).then(|| (analytic - numeric).abs() / scale)
}

/// Margin between the classes projected on the all-ones direction:
/// min attack projection minus max bona fide projection. Positive means the
/// rows are linearly separable.
pub fn projection_margin(rows: &[(Vec<f64>, f64)]) -> f64 {
    let proj = |x: &Vec<f64>| x.iter().sum::<f64>() / (x.len() as f64).sqrt();
    let max_bf = rows
        .iter()
        .filter(|(_, y)| *y == 0.0)
        .map(|(x, _)| proj(x))
        .fold(f64::NEG_INFINITY, f64::max);
    let min_at = rows
        .iter()
        .filter(|(_, y)| *y == 1.0)
        .map(|(x, _)| proj(x))
        .fold(f64::INFINITY, f64::min);
    min_at - max_bf
}

/// Fraction of (bona fide, attack) pairs ranked correctly, ties counting half.
pub fn auc(set: &ScoreSet) -> f64 {
    let raw = Raw::new(set);
    let attacks = raw.pooled();
    let mut good = 0.0;
    for b in &raw.bona_fide {
        for a in &attacks {
            good += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    good / (raw.bona_fide.len() * attacks.len()) as f64
}

/// Per-partition counts (train, val, test) of a manifest shaped like the
/// reference iris corpus summary. The printed/prosthetic/display row is the
/// remainder that makes the partition totals 11,810 / 4,384 / 11,770.
pub const CORPUS_ROWS: [(Label, PaiSpecies, [usize; 3]); 6] = [
    (Label::BonaFide, PaiSpecies::None, [6694, 1062, 5773]),
    (Label::Attack, PaiSpecies::Cadaver, [448, 531, 754]),
    (
        Label::Attack,
        PaiSpecies::ContactLensTextured,
        [3583, 900, 3244],
    ),
    (Label::Attack, PaiSpecies::Printed, [500, 1000, 1000]),
    (Label::Attack, PaiSpecies::Prosthetic, [300, 500, 500]),
    (Label::Attack, PaiSpecies::Display, [285, 391, 499]),
];

pub fn corpus_manifest() -> padkit::Manifest {
    use padkit::manifest::{Partition, SampleRecord};
    let mut records = Vec::new();
    for (label, species, counts) in CORPUS_ROWS {
        for (partition, n) in Partition::ALL.into_iter().zip(counts) {
            for i in 0..n {
                let id = format!("{}-{}-{i:05}", species.name(), partition.as_str());
                records.push(SampleRecord {
                    sample_id: id.clone(),
                    label,
                    pai_species: species.clone(),
                    partition,
                    sensor: "LG4000".into(),
                    source_path: format!("images/{id}.png"),
                });
            }
        }
    }
    padkit::Manifest::new(records).expect("valid manifest")
}
