//! Trial records: the JSON-lines schema, validated loading, the date-based
//! split, and conversion to model inputs.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use hint_core::chem::parse_smiles;
use hint_core::graph::TrialInput;
use hint_core::ontology::Ontology;
use hint_core::protocol::{encode_sentences, CriteriaSet, SentenceEncoder};
use hint_core::rng::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{read_text, write_text};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "1")]
    I,
    #[serde(rename = "2")]
    II,
    #[serde(rename = "3")]
    III,
    #[serde(rename = "indication")]
    Indication,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::I, Phase::II, Phase::III, Phase::Indication];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::I => "1",
            Phase::II => "2",
            Phase::III => "3",
            Phase::Indication => "indication",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Input(format!("phase must be one of 1, 2, 3, indication; got `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub nct_id: String,
    pub phase: Phase,
    pub smiles: Vec<String>,
    pub icd_codes: Vec<String>,
    pub inclusion: Vec<String>,
    pub exclusion: Vec<String>,
    pub label: u8,
    pub registration_date: NaiveDate,
    pub molecule_missing: bool,
}

impl TrialRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.nct_id.trim().is_empty() {
            return Err("nct_id is empty".into());
        }
        if self.label > 1 {
            return Err(format!("label must be 0 or 1, got {}", self.label));
        }
        if self.icd_codes.is_empty() || self.icd_codes.iter().any(|c| c.trim().is_empty()) {
            return Err("icd_codes must hold at least one non-empty code".into());
        }
        if self.molecule_missing != self.smiles.is_empty() {
            return Err("molecule_missing must be true exactly when smiles is empty".into());
        }
        if self.smiles.iter().any(|s| s.trim().is_empty()) {
            return Err("empty SMILES string".into());
        }
        if self.inclusion.iter().chain(&self.exclusion).any(|s| s.trim().is_empty()) {
            return Err("criteria sentences must be non-empty".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trial records serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RejectedLine {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    pub records: Vec<TrialRecord>,
    pub rejected: Vec<RejectedLine>,
    pub lines: usize,
}

/// Parses JSONL text. Every line ends up either loaded or rejected.
pub fn parse_trials(text: &str) -> LoadReport {
    let mut report = LoadReport::default();
    for (i, line) in text.lines().enumerate() {
        report.lines += 1;
        let line = line.trim_end_matches('\r');
        let parsed = if line.trim().is_empty() {
            Err("empty line".to_string())
        } else {
            serde_json::from_str::<TrialRecord>(line)
                .map_err(|e| e.to_string())
                .and_then(|r| r.validate().map(|()| r))
        };
        match parsed {
            Ok(r) => report.records.push(r),
            Err(message) => report.rejected.push(RejectedLine { line: i + 1, message }),
        }
    }
    report
}

pub fn load_trials(path: &Path) -> Result<LoadReport> {
    Ok(parse_trials(&read_text(path)?))
}

/// Loads and fails on the first rejected line.
pub fn load_trials_strict(path: &Path) -> Result<Vec<TrialRecord>> {
    let report = load_trials(path)?;
    if let Some(r) = report.rejected.first() {
        return Err(Error::parse(path, r.line, r.message.clone()));
    }
    Ok(report.records)
}

pub fn format_trials(records: &[TrialRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.to_json());
        s.push('\n');
    }
    s
}

pub fn write_trials(path: &Path, records: &[TrialRecord]) -> Result<()> {
    write_text(path, &format_trials(records))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub split_date: NaiveDate,
    pub validation_fraction: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub train: Vec<TrialRecord>,
    pub valid: Vec<TrialRecord>,
    pub test: Vec<TrialRecord>,
}

/// Records dated before `split_date` are for learning, the rest for testing;
/// a seeded random `round(fraction · |learning|)` of the learning records is
/// held out for validation. Input order is preserved within each part.
pub fn date_split(records: &[TrialRecord], spec: &SplitSpec) -> Result<Split> {
    if !(0.0..1.0).contains(&spec.validation_fraction) {
        return Err(Error::Input(format!(
            "validation fraction must lie in [0, 1), got {}",
            spec.validation_fraction
        )));
    }
    let (learn, test): (Vec<_>, Vec<_>) = records.iter().cloned().partition(|r| r.registration_date < spec.split_date);
    if learn.is_empty() {
        return Err(Error::Input(format!("no training records dated before {}", spec.split_date)));
    }
    if test.is_empty() {
        return Err(Error::Input(format!("no test records dated on or after {}", spec.split_date)));
    }
    let n_valid = (spec.validation_fraction * learn.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..learn.len()).collect();
    Rng::seed(spec.seed).shuffle(&mut order);
    let held: BTreeSet<usize> = order[..n_valid].iter().copied().collect();
    let mut split = Split {
        test,
        ..Split::default()
    };
    for (i, r) in learn.into_iter().enumerate() {
        if held.contains(&i) {
            split.valid.push(r);
        } else {
            split.train.push(r);
        }
    }
    if split.train.is_empty() {
        return Err(Error::Input("validation hold-out leaves no training records".into()));
    }
    Ok(split)
}

/// Earliest date such that at least `fraction` of records fall before it.
pub fn quantile_date(records: &[TrialRecord], fraction: f64) -> Result<NaiveDate> {
    let mut dates: Vec<NaiveDate> = records.iter().map(|r| r.registration_date).collect();
    if dates.is_empty() {
        return Err(Error::Input("no records".into()));
    }
    dates.sort();
    let k = ((fraction * dates.len() as f64).round() as usize).min(dates.len() - 1);
    Ok(dates[k])
}

/// Converts a record for the model. Unknown disease codes map to UNK.
pub fn to_input(record: &TrialRecord, ontology: &Ontology, encoder: &dyn SentenceEncoder) -> Result<TrialInput> {
    let molecules = record
        .smiles
        .iter()
        .map(|s| parse_smiles(s).map_err(|e| Error::Input(format!("{}: SMILES `{s}`: {e}", record.nct_id))))
        .collect::<Result<Vec<_>>>()?;
    let codes = record.icd_codes.iter().map(|c| ontology.resolve(c)).collect();
    let criteria = CriteriaSet::new(record.inclusion.clone(), record.exclusion.clone())?;
    let (inclusion, exclusion) = encode_sentences(&criteria, encoder).map_err(|e| Error::Input(format!("{}: {e}", record.nct_id)))?;
    Ok(TrialInput {
        molecules,
        codes,
        inclusion,
        exclusion,
    })
}

pub fn to_labelled(records: &[TrialRecord], ontology: &Ontology, encoder: &dyn SentenceEncoder) -> Result<Vec<(TrialInput, f64)>> {
    records.iter().map(|r| Ok((to_input(r, ontology, encoder)?, f64::from(r.label)))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, date: &str, label: u8) -> TrialRecord {
        TrialRecord {
            nct_id: id.into(),
            phase: Phase::II,
            smiles: vec!["CCO".into()],
            icd_codes: vec!["C34.91".into()],
            inclusion: vec!["Age over 18".into()],
            exclusion: vec![],
            label,
            registration_date: date.parse().unwrap(),
            molecule_missing: false,
        }
    }

    #[test]
    fn loader_accounts_for_every_line() {
        let good = record("NCT01", "2010-01-02", 1).to_json();
        let bad_label = good.replace("\"label\":1", "\"label\":2");
        let bad_date = good.replace("2010-01-02", "2010-13-02");
        let text = format!("{good}\n{bad_label}\n\n{bad_date}\nnot json\n");
        let r = parse_trials(&text);
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.rejected.iter().map(|x| x.line).collect::<Vec<_>>(), [2, 3, 4, 5]);
        assert_eq!(r.records.len() + r.rejected.len(), r.lines);
        assert_eq!(parse_trials(""), LoadReport::default());
    }

    #[test]
    fn missing_flag_must_match_smiles() {
        let mut r = record("NCT01", "2010-01-02", 0);
        r.smiles.clear();
        assert!(r.validate().is_err());
        r.molecule_missing = true;
        assert!(r.validate().is_ok());
    }

    #[test]
    fn split_sizes_and_errors() {
        let recs: Vec<_> = (0..40).map(|i| record(&format!("N{i}"), &format!("20{:02}-01-01", i / 2), (i % 2) as u8)).collect();
        let spec = SplitSpec {
            split_date: "2016-01-01".parse().unwrap(),
            validation_fraction: 0.15,
            seed: 3,
        };
        let s = date_split(&recs, &spec).unwrap();
        assert_eq!(s.valid.len(), (0.15f64 * 32.0).round() as usize);
        assert_eq!(s.train.len() + s.valid.len(), 32);
        assert_eq!(s, date_split(&recs, &spec).unwrap());
        let late = SplitSpec {
            split_date: "2030-01-01".parse().unwrap(),
            ..spec
        };
        assert!(date_split(&recs, &late).is_err());
    }
}
