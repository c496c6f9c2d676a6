//! Per-sample attack scores with ground truth, the unit exchanged between the
//! trainer and the metrics engine. CSV form: `sample_id,label,pai_species,score`.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::manifest::{Label, PaiSpecies};

pub const SCORES_HEADER: [&str; 4] = ["sample_id", "label", "pai_species", "score"];

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed score row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("malformed header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("score {score} for `{sample_id}` is not a finite value in [0, 1]")]
    OutOfRange { sample_id: String, score: f64 },
    #[error("inconsistent entry `{0}`: bona fide samples carry no PAI species and attacks must")]
    LabelSpecies(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub sample_id: String,
    pub label: Label,
    pub pai_species: PaiSpecies,
    /// Higher means more attack-like.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    entries: Vec<ScoreEntry>,
}

impl ScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self, ScoreError> {
        for e in &entries {
            check_entry(e)?;
        }
        Ok(ScoreSet { entries })
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: ScoreEntry) -> Result<(), ScoreError> {
        check_entry(&entry)?;
        self.entries.push(entry);
        Ok(())
    }

    pub fn n_bona_fide(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.label == Label::BonaFide)
            .count()
    }

    pub fn n_attack(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.label == Label::Attack)
            .count()
    }

    /// Applies `f` to every score. The result must stay inside [0, 1].
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> Result<Self, ScoreError> {
        ScoreSet::new(
            self.entries
                .iter()
                .map(|e| ScoreEntry {
                    score: f(e.score),
                    ..e.clone()
                })
                .collect(),
        )
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ScoreError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = rdr.records();
        let header = match rows.next() {
            Some(h) => h.map_err(|e| malformed(e, 1))?,
            None => {
                return Err(ScoreError::BadHeader {
                    expected: SCORES_HEADER.join(","),
                    found: String::new(),
                })
            }
        };
        let found: Vec<&str> = header.iter().collect();
        if found != SCORES_HEADER {
            return Err(ScoreError::BadHeader {
                expected: SCORES_HEADER.join(","),
                found: found.join(","),
            });
        }
        let mut entries = Vec::new();
        for row in rows {
            let row = row.map_err(|e| malformed(e, 0))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            if row.len() == 1 && row.get(0) == Some("") {
                continue;
            }
            if row.len() != 4 {
                return Err(ScoreError::MalformedRow {
                    line,
                    reason: format!("expected 4 fields, found {}", row.len()),
                });
            }
            let bad = |reason: String| ScoreError::MalformedRow { line, reason };
            let label: Label = row[1].parse().map_err(bad)?;
            let score: f64 = row[3].parse().map_err(|_| ScoreError::MalformedRow {
                line,
                reason: format!("invalid score `{}`", &row[3]),
            })?;
            let entry = ScoreEntry {
                sample_id: row[0].to_string(),
                label,
                pai_species: PaiSpecies::parse(&row[2]),
                score,
            };
            check_entry(&entry)?;
            entries.push(entry);
        }
        Ok(ScoreSet { entries })
    }

    /// Scores are written with shortest round-trip formatting, so equal sets
    /// always serialize to identical bytes.
    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), ScoreError> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| ScoreError::Io(std::io::Error::other(e.to_string()));
        w.write_record(SCORES_HEADER).map_err(io)?;
        for e in &self.entries {
            w.write_record([
                e.sample_id.as_str(),
                e.label.as_str(),
                e.pai_species.name(),
                &e.score.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ScoreError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ScoreError> {
        let file = std::fs::File::create(path)?;
        self.to_writer(std::io::BufWriter::new(file))
    }
}

fn check_entry(e: &ScoreEntry) -> Result<(), ScoreError> {
    if !e.score.is_finite() || !(0.0..=1.0).contains(&e.score) {
        return Err(ScoreError::OutOfRange {
            sample_id: e.sample_id.clone(),
            score: e.score,
        });
    }
    let consistent = match e.label {
        Label::BonaFide => e.pai_species == PaiSpecies::None,
        Label::Attack => e.pai_species != PaiSpecies::None,
    };
    if !consistent {
        return Err(ScoreError::LabelSpecies(e.sample_id.clone()));
    }
    Ok(())
}

fn malformed(e: csv::Error, fallback_line: u64) -> ScoreError {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    ScoreError::MalformedRow {
        line,
        reason: e.to_string(),
    }
}
