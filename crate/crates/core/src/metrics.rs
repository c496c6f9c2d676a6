//! ISO/IEC 30107-3 presentation attack detection metrics.
//!
//! Decision rule: a presentation with `score >= tau` is classified as an
//! attack, anything below as bona fide. With that rule
//!
//! * APCER(tau) for a species is the fraction of its attack presentations with
//!   `score < tau` (accepted as bona fide),
//! * BPCER(tau) is the fraction of bona fide presentations with `score >= tau`.
//!
//! Thresholds are swept over the unique scores plus the sentinels `+inf` and
//! `-inf`, so ties always fall into one bucket.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::manifest::{Label, PaiSpecies};
use crate::scores::ScoreSet;

/// APCER targets for the BPCER10, BPCER20 and BPCER100 operating points.
pub const BPCER10_TARGET: f64 = 0.10;
pub const BPCER20_TARGET: f64 = 0.05;
pub const BPCER100_TARGET: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no attack presentations of species `{0}`")]
    NoSuchSpecies(String),
    #[error("score set has no attack presentations")]
    NoAttacks,
    #[error("score set has no bona fide presentations")]
    NoBonaFide,
    #[error("degenerate scores: {0}")]
    DegenerateScores(String),
    #[error("operating points out of order: {0}")]
    OrderViolation(String),
}

/// Which attack presentations the APCER axis covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PaiScope {
    /// All attack presentations counted together.
    Pooled,
    /// Maximum APCER over species at each threshold.
    WorstCase,
    Single(PaiSpecies),
}

impl fmt::Display for PaiScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PaiScope::Pooled => f.write_str("pooled"),
            PaiScope::WorstCase => f.write_str("worst-case"),
            PaiScope::Single(s) => write!(f, "species:{s}"),
        }
    }
}

impl FromStr for PaiScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "pooled" => Ok(PaiScope::Pooled),
            "worst-case" | "worstcase" | "worst" => Ok(PaiScope::WorstCase),
            other => match other.strip_prefix("species:") {
                Some(name) if !name.is_empty() => match PaiSpecies::parse(name) {
                    PaiSpecies::None => Err("`none` is not an attack species".into()),
                    species => Ok(PaiScope::Single(species)),
                },
                _ => Err(format!(
                    "unknown PAI scope `{s}` (expected pooled, worst-case or species:<name>)"
                )),
            },
        }
    }
}

impl Serialize for PaiScope {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn rate(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

fn attack_scores<'a>(
    scores: &'a ScoreSet,
    species: &'a PaiSpecies,
) -> impl Iterator<Item = f64> + 'a {
    scores
        .entries()
        .iter()
        .filter(move |e| e.label == Label::Attack && &e.pai_species == species)
        .map(|e| e.score)
}

/// Attack species present in the set, sorted by name.
pub fn species_present(scores: &ScoreSet) -> Vec<PaiSpecies> {
    let mut species: Vec<PaiSpecies> = scores
        .entries()
        .iter()
        .filter(|e| e.label == Label::Attack)
        .map(|e| e.pai_species.clone())
        .collect();
    species.sort_by(|a, b| a.name().cmp(b.name()).then_with(|| a.cmp(b)));
    species.dedup();
    species
}

/// APCER of one species at `tau`.
pub fn apcer(scores: &ScoreSet, tau: f64, species: &PaiSpecies) -> Result<f64, MetricsError> {
    let (mut n, mut accepted) = (0usize, 0usize);
    for s in attack_scores(scores, species) {
        n += 1;
        if s < tau {
            accepted += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::NoSuchSpecies(species.name().to_string()));
    }
    Ok(rate(accepted, n))
}

/// APCER over all attack presentations regardless of species.
pub fn pooled_apcer(scores: &ScoreSet, tau: f64) -> Result<f64, MetricsError> {
    let (mut n, mut accepted) = (0usize, 0usize);
    for e in scores.entries().iter().filter(|e| e.label == Label::Attack) {
        n += 1;
        if e.score < tau {
            accepted += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::NoAttacks);
    }
    Ok(rate(accepted, n))
}

/// Maximum per-species APCER at `tau`; ties go to the lexicographically first
/// species name.
pub fn worst_case_apcer(scores: &ScoreSet, tau: f64) -> Result<(f64, PaiSpecies), MetricsError> {
    let mut worst: Option<(f64, PaiSpecies)> = None;
    for species in species_present(scores) {
        let value = apcer(scores, tau, &species)?;
        if worst.as_ref().is_none_or(|(w, _)| value > *w) {
            worst = Some((value, species));
        }
    }
    worst.ok_or(MetricsError::NoAttacks)
}

pub fn bpcer(scores: &ScoreSet, tau: f64) -> Result<f64, MetricsError> {
    let (mut n, mut rejected) = (0usize, 0usize);
    for e in scores
        .entries()
        .iter()
        .filter(|e| e.label == Label::BonaFide)
    {
        n += 1;
        if e.score >= tau {
            rejected += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::NoBonaFide);
    }
    Ok(rate(rejected, n))
}

/// APCER under `scope` at a single threshold.
pub fn scoped_apcer(scores: &ScoreSet, tau: f64, scope: &PaiScope) -> Result<f64, MetricsError> {
    match scope {
        PaiScope::Pooled => pooled_apcer(scores, tau),
        PaiScope::WorstCase => worst_case_apcer(scores, tau).map(|(v, _)| v),
        PaiScope::Single(species) => apcer(scores, tau, species),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetPoint {
    #[serde(serialize_with = "serialize_tau")]
    pub tau: f64,
    pub apcer: f64,
    pub bpcer: f64,
}

/// DET points ordered by decreasing threshold, from `+inf` down to `-inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetCurve {
    pub pai_scope: PaiScope,
    pub points: Vec<DetPoint>,
}

/// Sorted score groups for a cumulative sweep.
struct Sweep {
    /// Bona fide scores, descending.
    bona_fide: Vec<f64>,
    /// Per-species attack scores, descending. One group when pooled.
    attacks: Vec<Vec<f64>>,
    /// Unique in-scope scores, descending.
    thresholds: Vec<f64>,
}

fn sort_desc(v: &mut [f64]) {
    v.sort_by(|a, b| b.total_cmp(a));
}

impl Sweep {
    fn new(scores: &ScoreSet, scope: &PaiScope) -> Result<Self, MetricsError> {
        let mut bona_fide: Vec<f64> = scores
            .entries()
            .iter()
            .filter(|e| e.label == Label::BonaFide)
            .map(|e| e.score)
            .collect();
        if bona_fide.is_empty() {
            return Err(MetricsError::DegenerateScores(
                "no bona fide presentations".into(),
            ));
        }
        let mut attacks: Vec<Vec<f64>> = match scope {
            PaiScope::Pooled => vec![scores
                .entries()
                .iter()
                .filter(|e| e.label == Label::Attack)
                .map(|e| e.score)
                .collect()],
            PaiScope::WorstCase => species_present(scores)
                .iter()
                .map(|s| attack_scores(scores, s).collect())
                .collect(),
            PaiScope::Single(species) => {
                let group: Vec<f64> = attack_scores(scores, species).collect();
                if group.is_empty() {
                    return Err(MetricsError::NoSuchSpecies(species.name().to_string()));
                }
                vec![group]
            }
        };
        if attacks.iter().all(|g| g.is_empty()) {
            return Err(MetricsError::DegenerateScores(
                "no attack presentations".into(),
            ));
        }
        sort_desc(&mut bona_fide);
        for g in &mut attacks {
            sort_desc(g);
        }
        let mut thresholds: Vec<f64> = bona_fide
            .iter()
            .chain(attacks.iter().flatten())
            .copied()
            .collect();
        sort_desc(&mut thresholds);
        thresholds.dedup();
        Ok(Sweep {
            bona_fide,
            attacks,
            thresholds,
        })
    }

    fn curve(&self) -> Vec<DetPoint> {
        let mut bf_at_or_above = 0usize;
        let mut att_at_or_above = vec![0usize; self.attacks.len()];
        let taus = std::iter::once(f64::INFINITY)
            .chain(self.thresholds.iter().copied())
            .chain(std::iter::once(f64::NEG_INFINITY));
        let mut points = Vec::with_capacity(self.thresholds.len() + 2);
        for tau in taus {
            while bf_at_or_above < self.bona_fide.len() && self.bona_fide[bf_at_or_above] >= tau {
                bf_at_or_above += 1;
            }
            let mut apcer = 0.0f64;
            for (group, above) in self.attacks.iter().zip(att_at_or_above.iter_mut()) {
                while *above < group.len() && group[*above] >= tau {
                    *above += 1;
                }
                apcer = apcer.max(rate(group.len() - *above, group.len()));
            }
            points.push(DetPoint {
                tau,
                apcer,
                bpcer: rate(bf_at_or_above, self.bona_fide.len()),
            });
        }
        points
    }
}

pub fn det_curve(scores: &ScoreSet, scope: &PaiScope) -> Result<DetCurve, MetricsError> {
    let sweep = Sweep::new(scores, scope)?;
    Ok(DetCurve {
        pai_scope: scope.clone(),
        points: sweep.curve(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eer {
    pub value: f64,
    /// Threshold at the crossing, interpolated like `value`.
    #[serde(serialize_with = "serialize_tau")]
    pub tau: f64,
    /// First sweep threshold with APCER <= BPCER. Unlike `tau` it is always
    /// one of the scores (or a sentinel), so rates evaluated there depend on
    /// the score ranking only.
    #[serde(serialize_with = "serialize_tau")]
    pub sweep_tau: f64,
}

/// Crossing of APCER and BPCER on a DET point list ordered by decreasing tau.
pub fn eer_from_curve(points: &[DetPoint]) -> Eer {
    let diff = |p: &DetPoint| p.apcer - p.bpcer;
    // The +inf sentinel has diff 1 and the -inf sentinel diff -1, and diff is
    // non-increasing along the list, so a crossing always exists.
    let k = points
        .iter()
        .position(|p| diff(p) <= 0.0)
        .expect("DET curve always ends at APCER 0, BPCER 1");
    let cur = points[k];
    if diff(&cur) == 0.0 || k == 0 {
        return Eer {
            value: cur.apcer,
            tau: cur.tau,
            sweep_tau: cur.tau,
        };
    }
    let prev = points[k - 1];
    let (d0, d1) = (diff(&prev), diff(&cur));
    let t = d0 / (d0 - d1);
    let value = prev.apcer + t * (cur.apcer - prev.apcer);
    let tau = if prev.tau.is_infinite() {
        cur.tau
    } else if cur.tau.is_infinite() {
        prev.tau
    } else {
        prev.tau + t * (cur.tau - prev.tau)
    };
    Eer {
        value,
        tau,
        sweep_tau: cur.tau,
    }
}

pub fn eer(scores: &ScoreSet, scope: &PaiScope) -> Result<Eer, MetricsError> {
    Ok(eer_from_curve(&det_curve(scores, scope)?.points))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub apcer_target: f64,
    pub bpcer: f64,
    /// APCER actually achieved at `tau`.
    pub apcer: f64,
    #[serde(serialize_with = "serialize_tau")]
    pub tau: f64,
    pub unattained: bool,
}

/// BPCER at the largest threshold whose APCER is at most `target`.
pub fn operating_point_from_curve(points: &[DetPoint], target: f64) -> OperatingPoint {
    if let Some(p) = points.iter().find(|p| p.apcer <= target) {
        return OperatingPoint {
            apcer_target: target,
            bpcer: p.bpcer,
            apcer: p.apcer,
            tau: p.tau,
            unattained: false,
        };
    }
    let best = points
        .iter()
        .copied()
        .reduce(|a, b| if b.apcer < a.apcer { b } else { a })
        .expect("non-empty curve");
    OperatingPoint {
        apcer_target: target,
        bpcer: best.bpcer,
        apcer: best.apcer,
        tau: best.tau,
        unattained: true,
    }
}

pub fn bpcer_at_apcer(
    scores: &ScoreSet,
    apcer_target: f64,
    scope: &PaiScope,
) -> Result<OperatingPoint, MetricsError> {
    Ok(operating_point_from_curve(
        &det_curve(scores, scope)?.points,
        apcer_target,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub pai_scope: PaiScope,
    pub eer: f64,
    #[serde(serialize_with = "serialize_tau")]
    pub eer_tau: f64,
    /// Sweep threshold at which the per-PAI APCER, worst-case APCER and
    /// `bpcer_at_eer_tau` are evaluated (see [`Eer::sweep_tau`]).
    #[serde(serialize_with = "serialize_tau")]
    pub eer_sweep_tau: f64,
    pub bpcer10: OperatingPoint,
    pub bpcer20: OperatingPoint,
    pub bpcer100: OperatingPoint,
    /// Per-species APCER at `eer_sweep_tau`.
    pub apcer_per_pai: BTreeMap<String, f64>,
    pub worst_case_apcer: f64,
    pub worst_case_species: String,
    pub bpcer_at_eer_tau: f64,
    pub n_bf: usize,
    pub n_pais: BTreeMap<String, usize>,
}

pub fn full_report(scores: &ScoreSet, scope: &PaiScope) -> Result<MetricsReport, MetricsError> {
    let curve = det_curve(scores, scope)?;
    let eer = eer_from_curve(&curve.points);
    let bpcer10 = operating_point_from_curve(&curve.points, BPCER10_TARGET);
    let bpcer20 = operating_point_from_curve(&curve.points, BPCER20_TARGET);
    let bpcer100 = operating_point_from_curve(&curve.points, BPCER100_TARGET);
    if !(bpcer10.bpcer <= bpcer20.bpcer && bpcer20.bpcer <= bpcer100.bpcer) {
        return Err(MetricsError::OrderViolation(format!(
            "{} / {} / {}",
            bpcer10.bpcer, bpcer20.bpcer, bpcer100.bpcer
        )));
    }

    let mut apcer_per_pai = BTreeMap::new();
    let mut n_pais = BTreeMap::new();
    for species in species_present(scores) {
        apcer_per_pai.insert(
            species.name().to_string(),
            apcer(scores, eer.sweep_tau, &species)?,
        );
        n_pais.insert(
            species.name().to_string(),
            attack_scores(scores, &species).count(),
        );
    }
    let (worst_case_apcer, worst_species) = worst_case_apcer(scores, eer.sweep_tau)?;
    Ok(MetricsReport {
        pai_scope: scope.clone(),
        eer: eer.value,
        eer_tau: eer.tau,
        eer_sweep_tau: eer.sweep_tau,
        bpcer10,
        bpcer20,
        bpcer100,
        apcer_per_pai,
        worst_case_apcer,
        worst_case_species: worst_species.name().to_string(),
        bpcer_at_eer_tau: bpcer(scores, eer.sweep_tau)?,
        n_bf: scores.n_bona_fide(),
        n_pais,
    })
}

impl MetricsReport {
    /// Error rates as percentages, in the column order EER, BPCER10, BPCER20,
    /// BPCER100.
    pub fn percentages(&self) -> [f64; 4] {
        [
            self.eer * 100.0,
            self.bpcer10.bpcer * 100.0,
            self.bpcer20.bpcer * 100.0,
            self.bpcer100.bpcer * 100.0,
        ]
    }

    pub fn to_text(&self) -> String {
        let [eer, b10, b20, b100] = self.percentages();
        let mut out = format!(
            "pai_scope: {}\n{:>10} {:>10} {:>10} {:>10}\n{:>10.3} {:>10.3} {:>10.3} {:>10.3}\n",
            self.pai_scope,
            "EER(%)",
            "BPCER10(%)",
            "BPCER20(%)",
            "BPCER100(%)",
            eer,
            b10,
            b20,
            b100
        );
        out.push_str(&format!("bona fide presentations: {}\n", self.n_bf));
        out.push_str("APCER at EER threshold (%):\n");
        for (species, v) in &self.apcer_per_pai {
            out.push_str(&format!(
                "  {:<24} {:>8.3}  (n={})\n",
                species,
                v * 100.0,
                self.n_pais.get(species).copied().unwrap_or(0)
            ));
        }
        out.push_str(&format!(
            "worst-case APCER (%): {:.3} ({})\n",
            self.worst_case_apcer * 100.0,
            self.worst_case_species
        ));
        out
    }

    /// `metric,value` rows with values as fractions.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let mut row = |k: &str, v: String| out.push_str(&format!("{k},{v}\n"));
        row("eer", self.eer.to_string());
        row("eer_tau", self.eer_tau.to_string());
        row("eer_sweep_tau", self.eer_sweep_tau.to_string());
        row("bpcer10", self.bpcer10.bpcer.to_string());
        row("bpcer20", self.bpcer20.bpcer.to_string());
        row("bpcer100", self.bpcer100.bpcer.to_string());
        row("worst_case_apcer", self.worst_case_apcer.to_string());
        row("n_bf", self.n_bf.to_string());
        for (species, v) in &self.apcer_per_pai {
            row(&format!("apcer:{species}"), v.to_string());
        }
        for (species, n) in &self.n_pais {
            row(&format!("n_pais:{species}"), n.to_string());
        }
        out
    }
}

/// JSON has no infinities; thresholds at the sweep sentinels are written as
/// the strings `"inf"` and `"-inf"`.
pub fn serialize_tau<S: Serializer>(tau: &f64, s: S) -> Result<S::Ok, S::Error> {
    if tau.is_finite() {
        s.serialize_f64(*tau)
    } else if *tau > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::ScoreEntry;

    fn set(bona_fide: &[f64], attacks: &[(&str, f64)]) -> ScoreSet {
        let mut entries = Vec::new();
        for (i, &s) in bona_fide.iter().enumerate() {
            entries.push(ScoreEntry {
                sample_id: format!("bf{i}"),
                label: Label::BonaFide,
                pai_species: PaiSpecies::None,
                score: s,
            });
        }
        for (i, &(species, s)) in attacks.iter().enumerate() {
            entries.push(ScoreEntry {
                sample_id: format!("at{i}"),
                label: Label::Attack,
                pai_species: PaiSpecies::parse(species),
                score: s,
            });
        }
        ScoreSet::new(entries).unwrap()
    }

    #[test]
    fn apcer_hand_count() {
        let s = set(
            &[0.1],
            &[
                ("printed", 0.9),
                ("printed", 0.8),
                ("printed", 0.2),
                ("printed", 0.6),
            ],
        );
        assert_eq!(apcer(&s, 0.5, &PaiSpecies::Printed).unwrap(), 0.25);
        assert_eq!(apcer(&s, 0.1, &PaiSpecies::Printed).unwrap(), 0.0);
        assert_eq!(apcer(&s, 0.95, &PaiSpecies::Printed).unwrap(), 1.0);
        assert_eq!(
            apcer(&s, 0.5, &PaiSpecies::Cadaver),
            Err(MetricsError::NoSuchSpecies("cadaver".into()))
        );
    }

    #[test]
    fn bpcer_hand_count() {
        let s = set(&[0.1, 0.2, 0.7], &[("printed", 0.9)]);
        assert_eq!(bpcer(&s, 0.5).unwrap(), 1.0 / 3.0);
        assert_eq!(bpcer(&s, 0.71).unwrap(), 0.0);
        assert_eq!(bpcer(&s, f64::NEG_INFINITY).unwrap(), 1.0);
        let only_attacks = set(&[], &[("printed", 0.9)]);
        assert_eq!(bpcer(&only_attacks, 0.5), Err(MetricsError::NoBonaFide));
    }

    #[test]
    fn worst_case_picks_max_and_breaks_ties_by_name() {
        let s = set(
            &[0.1],
            &[
                ("printed", 0.9),
                ("printed", 0.9),
                ("printed", 0.9),
                ("printed", 0.2),
                ("cadaver", 0.9),
                ("cadaver", 0.2),
            ],
        );
        let (v, sp) = worst_case_apcer(&s, 0.5).unwrap();
        assert_eq!((v, sp), (0.5, PaiSpecies::Cadaver));

        let tied = set(&[0.1], &[("printed", 0.2), ("cadaver", 0.2)]);
        assert_eq!(
            worst_case_apcer(&tied, 0.5).unwrap(),
            (1.0, PaiSpecies::Cadaver)
        );
        let none = set(&[0.1], &[]);
        assert_eq!(worst_case_apcer(&none, 0.5), Err(MetricsError::NoAttacks));
    }

    #[test]
    fn hand_derived_eer() {
        let s = set(
            &[0.1, 0.2, 0.7],
            &[("printed", 0.3), ("printed", 0.8), ("printed", 0.9)],
        );
        let e = eer(&s, &PaiScope::Pooled).unwrap();
        assert!((e.value - 1.0 / 3.0).abs() <= 1e-12);
        assert!(e.tau > 0.3 && e.tau <= 0.7);
        assert_eq!(pooled_apcer(&s, 0.5).unwrap(), 1.0 / 3.0);
        assert_eq!(bpcer(&s, 0.5).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn separated_and_inverted() {
        let sep = set(
            &[0.1, 0.2, 0.3],
            &[("printed", 0.7), ("cadaver", 0.8), ("printed", 0.9)],
        );
        assert_eq!(eer(&sep, &PaiScope::Pooled).unwrap().value, 0.0);
        let curve = det_curve(&sep, &PaiScope::Pooled).unwrap();
        assert!(curve
            .points
            .iter()
            .any(|p| p.apcer == 0.0 && p.bpcer == 0.0));
        for target in [BPCER10_TARGET, BPCER20_TARGET, BPCER100_TARGET] {
            let op = bpcer_at_apcer(&sep, target, &PaiScope::Pooled).unwrap();
            assert_eq!(op.bpcer, 0.0);
            assert!(!op.unattained);
        }
        let inv = set(
            &[0.7, 0.8, 0.9],
            &[("printed", 0.1), ("printed", 0.2), ("printed", 0.3)],
        );
        assert_eq!(eer(&inv, &PaiScope::Pooled).unwrap().value, 1.0);
    }

    #[test]
    fn all_equal_scores_give_only_corners() {
        let s = set(&[0.4, 0.4], &[("printed", 0.4), ("printed", 0.4)]);
        let curve = det_curve(&s, &PaiScope::Pooled).unwrap();
        let mut corners: Vec<(f64, f64)> =
            curve.points.iter().map(|p| (p.apcer, p.bpcer)).collect();
        corners.dedup();
        assert_eq!(corners, vec![(1.0, 0.0), (0.0, 1.0)]);
        assert_eq!(eer(&s, &PaiScope::Pooled).unwrap().value, 0.5);
    }

    #[test]
    fn degenerate_inputs() {
        let only_bf = set(&[0.1, 0.2], &[]);
        assert!(matches!(
            det_curve(&only_bf, &PaiScope::Pooled),
            Err(MetricsError::DegenerateScores(_))
        ));
        let only_attack = set(&[], &[("printed", 0.3)]);
        assert!(matches!(
            eer(&only_attack, &PaiScope::Pooled),
            Err(MetricsError::DegenerateScores(_))
        ));
        let s = set(&[0.1], &[("printed", 0.3)]);
        assert_eq!(
            eer(&s, &PaiScope::Single(PaiSpecies::Cadaver)),
            Err(MetricsError::NoSuchSpecies("cadaver".into()))
        );
    }

    #[test]
    fn single_species_report_matches_pooled() {
        let s = set(
            &[0.1, 0.5, 0.6],
            &[("display", 0.55), ("display", 0.9), ("display", 0.2)],
        );
        let r = full_report(&s, &PaiScope::Pooled).unwrap();
        assert_eq!(r.apcer_per_pai.len(), 1);
        assert_eq!(
            r.apcer_per_pai["display"],
            pooled_apcer(&s, r.eer_sweep_tau).unwrap()
        );
        assert_eq!(r.n_pais["display"], 3);
        assert_eq!(r.n_bf, 3);
    }

    #[test]
    fn scope_parsing() {
        assert_eq!("pooled".parse::<PaiScope>().unwrap(), PaiScope::Pooled);
        assert_eq!(
            "worst-case".parse::<PaiScope>().unwrap(),
            PaiScope::WorstCase
        );
        assert_eq!(
            "species:cadaver".parse::<PaiScope>().unwrap(),
            PaiScope::Single(PaiSpecies::Cadaver)
        );
        assert!("species:none".parse::<PaiScope>().is_err());
        assert!("median".parse::<PaiScope>().is_err());
    }

    #[test]
    fn infinite_thresholds_serialize_as_strings() {
        let p = DetPoint {
            tau: f64::INFINITY,
            apcer: 1.0,
            bpcer: 0.0,
        };
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"tau":"inf","apcer":1.0,"bpcer":0.0}"#);
    }
}
