//! Dataset manifests: one CSV row per captured sample.
//!
//! The on-disk format is UTF-8 CSV with the exact header
//! `sample_id,label,pai_species,partition,sensor,source_path`.
//! Counts per (label, species, partition) are always recomputed from the
//! records, never read from disk.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_HEADER: [&str; 6] = [
    "sample_id",
    "label",
    "pai_species",
    "partition",
    "sensor",
    "source_path",
];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("manifest has no records")]
    EmptyManifest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    BonaFide,
    Attack,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::BonaFide => "bona_fide",
            Label::Attack => "attack",
        }
    }

    /// Binary training target: 0 for bona fide, 1 for attack.
    pub fn target(self) -> u8 {
        match self {
            Label::BonaFide => 0,
            Label::Attack => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize(s).as_str() {
            "bona_fide" | "bonafide" => Ok(Label::BonaFide),
            "attack" => Ok(Label::Attack),
            _ => Err(format!("unknown label `{s}`")),
        }
    }
}

/// Presentation attack instrument species. Unknown names are kept verbatim in
/// `Other` so new instruments ingest without a schema change.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PaiSpecies {
    None,
    Cadaver,
    ContactLensTextured,
    Printed,
    Prosthetic,
    Display,
    Other(String),
}

impl PaiSpecies {
    pub fn name(&self) -> &str {
        match self {
            PaiSpecies::None => "none",
            PaiSpecies::Cadaver => "cadaver",
            PaiSpecies::ContactLensTextured => "contact_lens_textured",
            PaiSpecies::Printed => "printed",
            PaiSpecies::Prosthetic => "prosthetic",
            PaiSpecies::Display => "display",
            PaiSpecies::Other(s) => s,
        }
    }

    /// Infallible parse: recognised names (case and separator insensitive)
    /// map to the fixed variants, anything else to `Other`.
    pub fn parse(s: &str) -> PaiSpecies {
        match normalize(s).as_str() {
            "none" | "" => PaiSpecies::None,
            "cadaver" => PaiSpecies::Cadaver,
            "contact_lens_textured" | "contact_lens" | "textured_contact_lens" => {
                PaiSpecies::ContactLensTextured
            }
            "printed" | "print" => PaiSpecies::Printed,
            "prosthetic" => PaiSpecies::Prosthetic,
            "display" => PaiSpecies::Display,
            _ => PaiSpecies::Other(s.trim().to_string()),
        }
    }
}

impl Serialize for PaiSpecies {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for PaiSpecies {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(|s| PaiSpecies::parse(&s))
    }
}

impl fmt::Display for PaiSpecies {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize(s).as_str() {
            "train" => Ok(Partition::Train),
            "val" | "validation" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            _ => Err(format!("unknown partition `{s}`")),
        }
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_ascii_lowercase().replace(['-', ' '], "_")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub label: Label,
    pub pai_species: PaiSpecies,
    pub partition: Partition,
    pub sensor: String,
    pub source_path: String,
}

impl SampleRecord {
    fn check(&self) -> Result<(), String> {
        if self.sample_id.is_empty() {
            return Err("empty sample_id".into());
        }
        match (self.label, &self.pai_species) {
            (Label::BonaFide, PaiSpecies::None) => Ok(()),
            (Label::Attack, PaiSpecies::None) => {
                Err("attack sample must name a PAI species".into())
            }
            (Label::BonaFide, species) => Err(format!(
                "bona fide sample cannot carry PAI species `{species}`"
            )),
            (Label::Attack, _) => Ok(()),
        }
    }
}

/// Key of one cell in the summary table.
pub type CountKey = (Label, PaiSpecies, Partition);

/// A validated, immutable list of sample records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    records: Vec<SampleRecord>,
}

impl Manifest {
    /// Validates records (non-empty, unique ids, label/species consistency).
    pub fn new(records: Vec<SampleRecord>) -> Result<Self, ManifestError> {
        if records.is_empty() {
            return Err(ManifestError::EmptyManifest);
        }
        let mut seen = HashSet::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            rec.check().map_err(|reason| ManifestError::MalformedRow {
                line: i as u64 + 2,
                reason,
            })?;
            if !seen.insert(rec.sample_id.as_str()) {
                return Err(ManifestError::DuplicateId(rec.sample_id.clone()));
            }
        }
        Ok(Manifest { records })
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn partition(&self, partition: Partition) -> impl Iterator<Item = &SampleRecord> {
        self.records
            .iter()
            .filter(move |r| r.partition == partition)
    }

    /// Per (label, species, partition) tally, recomputed on every call.
    pub fn counts(&self) -> BTreeMap<CountKey, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts
                .entry((r.label, r.pai_species.clone(), r.partition))
                .or_insert(0) += 1;
        }
        counts
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ManifestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = rdr.records();

        let header = match rows.next() {
            None => return Err(ManifestError::EmptyManifest),
            Some(h) => h.map_err(|e| csv_error(e, 1))?,
        };
        let found: Vec<&str> = header.iter().collect();
        if found != MANIFEST_HEADER {
            return Err(ManifestError::BadHeader {
                expected: MANIFEST_HEADER.join(","),
                found: found.join(","),
            });
        }

        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for row in rows {
            let row = row.map_err(|e| csv_error(e, 0))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            if row.len() == 1 && row.get(0) == Some("") {
                continue;
            }
            let rec =
                parse_row(&row).map_err(|reason| ManifestError::MalformedRow { line, reason })?;
            if !seen.insert(rec.sample_id.clone()) {
                return Err(ManifestError::DuplicateId(rec.sample_id));
            }
            records.push(rec);
        }
        Manifest::new(records)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), ManifestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(MANIFEST_HEADER).map_err(csv_io)?;
        for r in &self.records {
            w.write_record([
                r.sample_id.as_str(),
                r.label.as_str(),
                r.pai_species.name(),
                r.partition.as_str(),
                r.sensor.as_str(),
                r.source_path.as_str(),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ManifestError> {
        let file = std::fs::File::create(path)?;
        self.to_writer(std::io::BufWriter::new(file))
    }
}

/// Reads and validates a manifest file.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Manifest, ManifestError> {
    let file = std::fs::File::open(path)?;
    Manifest::from_reader(std::io::BufReader::new(file))
}

fn parse_row(row: &csv::StringRecord) -> Result<SampleRecord, String> {
    if row.len() != MANIFEST_HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            MANIFEST_HEADER.len(),
            row.len()
        ));
    }
    let field = |i: usize| row.get(i).unwrap_or_default();
    let sample_id = field(0);
    if sample_id.is_empty() {
        return Err("missing sample_id".into());
    }
    let label: Label = field(1).parse()?;
    let partition: Partition = field(3).parse()?;
    let rec = SampleRecord {
        sample_id: sample_id.to_string(),
        label,
        pai_species: PaiSpecies::parse(field(2)),
        partition,
        sensor: field(4).to_string(),
        source_path: field(5).to_string(),
    };
    rec.check()?;
    Ok(rec)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> ManifestError {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ManifestError::Io(io),
        kind => ManifestError::MalformedRow {
            line,
            reason: format!("{kind:?}"),
        },
    }
}

fn csv_io(e: csv::Error) -> ManifestError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ManifestError::Io(io),
        kind => ManifestError::Io(std::io::Error::other(format!("{kind:?}"))),
    }
}

/// Per-cell counts plus partition and grand totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub partition_totals: BTreeMap<Partition, usize>,
    pub total: usize,
}

/// One (label, species) row with its per-partition counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryRow {
    pub label: Label,
    pub pai_species: PaiSpecies,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SummaryRow {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    pub fn get(&self, partition: Partition) -> usize {
        match partition {
            Partition::Train => self.train,
            Partition::Val => self.val,
            Partition::Test => self.test,
        }
    }
}

pub fn summarize(manifest: &Manifest) -> Summary {
    let mut rows: BTreeMap<(Label, PaiSpecies), SummaryRow> = BTreeMap::new();
    let mut partition_totals: BTreeMap<Partition, usize> =
        Partition::ALL.iter().map(|p| (*p, 0)).collect();
    for ((label, species, partition), n) in manifest.counts() {
        let row = rows
            .entry((label, species.clone()))
            .or_insert_with(|| SummaryRow {
                label,
                pai_species: species,
                train: 0,
                val: 0,
                test: 0,
            });
        match partition {
            Partition::Train => row.train += n,
            Partition::Val => row.val += n,
            Partition::Test => row.test += n,
        }
        *partition_totals.entry(partition).or_insert(0) += n;
    }
    Summary {
        rows: rows.into_values().collect(),
        partition_totals,
        total: manifest.len(),
    }
}

impl Summary {
    pub fn row(&self, label: Label, species: &PaiSpecies) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.label == label && &r.pai_species == species)
    }

    pub fn partition_total(&self, partition: Partition) -> usize {
        self.partition_totals.get(&partition).copied().unwrap_or(0)
    }

    /// Plain-text table, one line per (label, species).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:<24} {:>8} {:>8} {:>8} {:>9}\n",
            "class", "pai_species", "train", "val", "test", "total"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<10} {:<24} {:>8} {:>8} {:>8} {:>9}\n",
                r.label.as_str(),
                r.pai_species.name(),
                r.train,
                r.val,
                r.test,
                r.total()
            ));
        }
        out.push_str(&format!(
            "{:<10} {:<24} {:>8} {:>8} {:>8} {:>9}\n",
            "total",
            "",
            self.partition_total(Partition::Train),
            self.partition_total(Partition::Val),
            self.partition_total(Partition::Test),
            self.total
        ));
        out
    }
}
