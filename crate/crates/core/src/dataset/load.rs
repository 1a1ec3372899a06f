use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_numeric, StudyRecord, NO_SOLVENT};
use crate::error::{Error, Result};

/// Canonical column order, also used when writing datasets.
pub(crate) const COLUMNS: [&str; 18] = [
    "doi",
    "polymer",
    "solvent1",
    "solvent2",
    "solvent3",
    "solvent1_ratio",
    "solvent2_ratio",
    "solvent3_ratio",
    "concentration",
    "needle_diameter",
    "collector_type",
    "rotation_speed",
    "voltage",
    "flow_rate",
    "distance",
    "temperature",
    "humidity",
    "fibre_diameter",
];

const REQUIRED: [&str; 9] = [
    "doi",
    "polymer",
    "concentration",
    "needle_diameter",
    "rotation_speed",
    "voltage",
    "flow_rate",
    "distance",
    "fibre_diameter",
];

const ALIASES: [(&str, &str); 6] = [
    ("fiber_diameter", "fibre_diameter"),
    ("type_of_collector", "collector_type"),
    ("collector", "collector_type"),
    ("tip_to_collector_distance", "distance"),
    ("needle_gauge", "needle_diameter"),
    ("solution_concentration", "concentration"),
];

const RATIO_SUM_TOLERANCE: f64 = 0.5;

/// Outcome of one ingestion: row counts and per-reason drop counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub records: usize,
    pub dropped_missing: usize,
    pub dropped_non_finite_target: usize,
    pub dropped_non_positive_target: usize,
    /// Missing-value counts per required column over the dropped rows.
    pub missing_by_column: BTreeMap<String, usize>,
    /// Rows whose three solvent ratios do not sum to 100 ± 0.5 (kept, warned).
    pub ratio_sum_warnings: usize,
}

impl IngestReport {
    pub fn dropped(&self) -> usize {
        self.dropped_missing + self.dropped_non_finite_target + self.dropped_non_positive_target
    }
}

fn normalize_header(h: &str) -> String {
    let key: String = h
        .trim()
        .trim_start_matches('\u{feff}')
        .to_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect();
    ALIASES.iter().find(|(a, _)| *a == key).map_or(key, |(_, canon)| canon.to_string())
}

fn sniff_delimiter(first_line: &str) -> u8 {
    let tabs = first_line.matches('\t').count();
    let semis = first_line.matches(';').count();
    let commas = first_line.matches(',').count();
    if tabs > 0 && tabs >= semis && tabs >= commas {
        b'\t'
    } else if semis > commas {
        b';'
    } else {
        b','
    }
}

fn solvent_name(cell: Option<&str>) -> Option<String> {
    let s = cell?.trim();
    if s.is_empty() || s.eq_ignore_ascii_case(NO_SOLVENT) || s == "-" || s.eq_ignore_ascii_case("na") {
        None
    } else {
        Some(s.to_string())
    }
}

/// Reads delimited text (comma, semicolon or tab) with the standard header
/// names, in any order and case. All cells are read as text and numeric
/// fields go through [`parse_numeric`]; incomplete rows are dropped, never
/// imputed.
pub fn load_dataset<R: Read>(source: R) -> Result<(Vec<StudyRecord>, IngestReport)> {
    let mut reader = BufReader::new(source);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim().is_empty() {
        return Err(Error::MissingColumns(REQUIRED.iter().map(|s| s.to_string()).collect()));
    }
    let delimiter = sniff_delimiter(&first);
    let chained = std::io::Cursor::new(first.into_bytes()).chain(reader);
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(chained);

    let headers: Vec<String> = csv.headers()?.iter().map(normalize_header).collect();
    let index: BTreeMap<&str, usize> = COLUMNS
        .iter()
        .filter_map(|&c| headers.iter().position(|h| h == c).map(|i| (c, i)))
        .collect();
    let missing: Vec<String> =
        REQUIRED.iter().filter(|c| !index.contains_key(*c)).map(|c| c.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }

    let mut report = IngestReport::default();
    let mut records = Vec::new();
    for row in csv.records() {
        let row = row?;
        report.rows_read += 1;
        let text = |name: &str| -> Option<&str> {
            index.get(name).and_then(|&i| row.get(i)).map(str::trim).filter(|s| !s.is_empty())
        };
        let num = |name: &str| text(name).and_then(parse_numeric);

        let target = num("fibre_diameter");
        let Some(fibre_diameter) = target else {
            report.dropped_non_finite_target += 1;
            continue;
        };
        if fibre_diameter <= 0.0 {
            report.dropped_non_positive_target += 1;
            continue;
        }

        let mut missing_here = Vec::new();
        for name in REQUIRED.iter().filter(|n| **n != "fibre_diameter") {
            let present = if matches!(*name, "doi" | "polymer") { text(name).is_some() } else { num(name).is_some() };
            if !present {
                missing_here.push(*name);
            }
        }
        if !missing_here.is_empty() {
            report.dropped_missing += 1;
            for name in missing_here {
                *report.missing_by_column.entry(name.to_string()).or_default() += 1;
            }
            continue;
        }

        let solvent_ratios = [num("solvent1_ratio"), num("solvent2_ratio"), num("solvent3_ratio")];
        if let [Some(a), Some(b), Some(c)] = solvent_ratios {
            if ((a + b + c) - 100.0).abs() > RATIO_SUM_TOLERANCE {
                report.ratio_sum_warnings += 1;
            }
        }
        // required fields were checked above
        let req = |name: &str| num(name).unwrap_or(f64::NAN);
        records.push(StudyRecord {
            doi: text("doi").unwrap_or_default().to_string(),
            polymer: text("polymer").unwrap_or_default().to_string(),
            solvents: [solvent_name(text("solvent1")), solvent_name(text("solvent2")), solvent_name(text("solvent3"))],
            solvent_ratios,
            concentration: req("concentration"),
            needle_diameter: req("needle_diameter"),
            collector_type: text("collector_type").unwrap_or("unspecified").to_string(),
            rotation_speed: req("rotation_speed"),
            voltage: req("voltage"),
            flow_rate: req("flow_rate"),
            distance: req("distance"),
            temperature: num("temperature"),
            humidity: num("humidity"),
            fibre_diameter,
        });
    }
    report.records = records.len();
    if report.ratio_sum_warnings > 0 {
        log::warn!("{} rows have solvent ratios not summing to 100%", report.ratio_sum_warnings);
    }
    Ok((records, report))
}

pub fn load_dataset_path(path: impl AsRef<Path>) -> Result<(Vec<StudyRecord>, IngestReport)> {
    let file = std::fs::File::open(path.as_ref())?;
    load_dataset(file)
}

/// Writes records as comma-separated text with the canonical header.
pub fn write_dataset<W: Write>(records: &[StudyRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let solvent = |i: usize| r.solvents[i].clone().unwrap_or_else(|| NO_SOLVENT.to_string());
        w.write_record([
            r.doi.clone(),
            r.polymer.clone(),
            solvent(0),
            solvent(1),
            solvent(2),
            opt(r.solvent_ratios[0]),
            opt(r.solvent_ratios[1]),
            opt(r.solvent_ratios[2]),
            r.concentration.to_string(),
            r.needle_diameter.to_string(),
            r.collector_type.clone(),
            r.rotation_speed.to_string(),
            r.voltage.to_string(),
            r.flow_rate.to_string(),
            r.distance.to_string(),
            opt(r.temperature),
            opt(r.humidity),
            r.fibre_diameter.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
