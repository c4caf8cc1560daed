use std::collections::HashSet;
use std::path::PathBuf;

use super::DataError;
use crate::types::Modality;

pub const MANIFEST_HEADER: &str = "xmodal-manifest v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub subject_id: String,
    pub modality: Modality,
    pub image_path: PathBuf,
    pub landmark_path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

fn check_field(line: usize, name: &str, value: &str) -> Result<(), DataError> {
    if value.is_empty() {
        return Err(DataError::parse(line, format!("empty {name}")));
    }
    if value.trim() != value {
        return Err(DataError::parse(
            line,
            format!("{name} has surrounding whitespace"),
        ));
    }
    if value.chars().any(|c| c.is_control()) {
        return Err(DataError::parse(
            line,
            format!("{name} contains control characters"),
        ));
    }
    Ok(())
}

/// Parse the tab-separated manifest format. The first non-comment line must
/// be the header; blank lines and lines starting with `#` are skipped.
pub fn parse_manifest(text: &str) -> Result<DatasetManifest, DataError> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            if line.trim() != MANIFEST_HEADER {
                return Err(DataError::parse(
                    line_no,
                    format!("expected header `{MANIFEST_HEADER}`"),
                ));
            }
            header = true;
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(DataError::parse(
                line_no,
                format!("expected 5 tab-separated fields, found {}", fields.len()),
            ));
        }
        for (name, value) in [
            "sample_id",
            "subject_id",
            "modality",
            "image_path",
            "landmark_path",
        ]
        .iter()
        .zip(&fields)
        {
            check_field(line_no, name, value)?;
        }
        let modality: Modality = fields[2]
            .parse()
            .map_err(|e: String| DataError::parse(line_no, e))?;
        if !seen.insert(fields[0].to_string()) {
            return Err(DataError::DuplicateId(fields[0].to_string()));
        }
        entries.push(ManifestEntry {
            sample_id: fields[0].to_string(),
            subject_id: fields[1].to_string(),
            modality,
            image_path: PathBuf::from(fields[3]),
            landmark_path: PathBuf::from(fields[4]),
        });
    }
    if !header {
        return Err(DataError::parse(
            1,
            format!("missing header `{MANIFEST_HEADER}`"),
        ));
    }
    Ok(DatasetManifest { entries })
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                e.sample_id,
                e.subject_id,
                e.modality,
                e.image_path.display(),
                e.landmark_path.display()
            ));
        }
        out
    }

    /// Distinct subject ids, sorted.
    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self.entries.iter().map(|e| e.subject_id.clone()).collect();
        s.sort();
        s.dedup();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_body() {
        let m = parse_manifest("xmodal-manifest v1\n").unwrap();
        assert!(m.entries.is_empty());
    }

    #[test]
    fn single_entry_round_trips() {
        let text = "# fixture\nxmodal-manifest v1\n\ns1_a\tsubj1\tA\timg/s1_a.pgm\tlm/s1_a.txt\n";
        let m = parse_manifest(text).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[0].modality, Modality::A);
        assert_eq!(parse_manifest(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = "xmodal-manifest v1\nx\ts1\tA\ta.pgm\ta.txt\nx\ts2\tB\tb.pgm\tb.txt\n";
        match parse_manifest(text) {
            Err(DataError::DuplicateId(id)) => assert_eq!(id, "x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let cases = [
            ("xmodal-manifest v1\nx\ts1\tC\ta\tb\n", 2),
            ("xmodal-manifest v1\n\nx\ts1\tA\ta\n", 3),
            ("xmodal-manifest v1\nx\t\tA\ta\tb\n", 2),
            ("manifest\n", 1),
        ];
        for (text, line) in cases {
            match parse_manifest(text) {
                Err(DataError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("unexpected {other:?} for {text:?}"),
            }
        }
        assert!(parse_manifest("").is_err());
    }
}
