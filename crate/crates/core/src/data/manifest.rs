use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::DiagnosisGrade;
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 2] = ["id_code", "diagnosis"];
pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub grade: DiagnosisGrade,
    /// Resolved image file, `None` when no `<id>.png|.jpg|.jpeg` exists.
    pub image: Option<PathBuf>,
}

/// An APTOS-style `id_code,diagnosis` listing resolved against an image directory.
#[derive(Clone, Debug)]
pub struct DatasetManifest {
    pub csv_path: PathBuf,
    pub image_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn histogram(&self) -> [usize; DiagnosisGrade::COUNT] {
        let mut h = [0; DiagnosisGrade::COUNT];
        for e in &self.entries {
            h[e.grade.index()] += 1;
        }
        h
    }

    /// Ids whose image file was not found.
    pub fn missing(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.image.is_none())
            .map(|e| e.id.as_str())
            .collect()
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn find_image(image_dir: &Path, id: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| image_dir.join(format!("{id}.{ext}")))
        .find(|p| p.is_file())
}

pub fn read_manifest(csv_path: &Path, image_dir: &Path) -> Result<DatasetManifest> {
    let file = std::fs::File::open(csv_path).map_err(|e| Error::Manifest {
        path: csv_path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    parse_manifest(file, csv_path, image_dir)
}

pub fn parse_manifest(reader: impl std::io::Read, csv_path: &Path, image_dir: &Path) -> Result<DatasetManifest> {
    let err = |line: u64, message: String| Error::Manifest {
        path: csv_path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let header: Vec<&str> = header.iter().map(|h| h.trim_start_matches('\u{feff}')).collect();
    if header != MANIFEST_HEADER {
        return Err(err(1, format!("expected header id_code,diagnosis, found {}", header.join(","))));
    }

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(err(line, format!("expected 2 fields, found {}", record.len())));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(err(line, "empty id_code".into()));
        }
        let grade: i64 = record[1]
            .parse()
            .map_err(|_| err(line, format!("diagnosis '{}' is not an integer", &record[1])))?;
        let grade = DiagnosisGrade::try_from(grade).map_err(|e| err(line, e.to_string()))?;
        if !seen.insert(id.clone()) {
            return Err(err(line, format!("duplicate id_code {id}")));
        }
        let image = find_image(image_dir, &id);
        entries.push(ManifestEntry { id, grade, image });
    }
    Ok(DatasetManifest {
        csv_path: csv_path.to_path_buf(),
        image_dir: image_dir.to_path_buf(),
        entries,
    })
}
