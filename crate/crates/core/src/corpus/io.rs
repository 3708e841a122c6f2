use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CorpusError, Discard, Document, ExtractionRecord};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const RECORDS_FILE: &str = "records.csv";
pub const COMPONENTS_FILE: &str = "components.csv";
pub const LIFECYCLE_FILE: &str = "lifecycle.csv";
pub const DISCARDS_FILE: &str = "discards.csv";

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    doc_id: String,
    company_profile: String,
    pages: u32,
    file: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads every document listed in `dir/manifest.csv`, sorted by doc_id.
pub fn load_corpus(dir: &Path) -> Result<Vec<Document>, CorpusError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(CorpusError::MissingManifest(manifest_path));
    }
    let mut reader = csv::Reader::from_path(&manifest_path)?;
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (row_idx, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let row = row?;
        if row.doc_id.trim().is_empty() {
            return Err(CorpusError::BadManifestRow {
                row: row_idx + 1,
                message: "empty doc_id".into(),
            });
        }
        if !seen.insert(row.doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId(row.doc_id));
        }
        let profile = row.company_profile.parse()?;
        let path: PathBuf = dir.join(&row.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let text =
            String::from_utf8(bytes).map_err(|_| CorpusError::NonUtf8 { path: path.clone() })?;
        docs.push(Document::new(row.doc_id, profile, text, row.pages));
    }
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(docs)
}

/// Writes documents as `<doc_id>.txt` files plus the manifest.
pub fn write_corpus(dir: &Path, docs: &[Document]) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut writer = csv::Writer::from_path(&manifest_path)?;
    for doc in docs {
        let file = format!("{}.txt", doc.doc_id);
        let path = dir.join(&file);
        fs::write(&path, &doc.raw_text).map_err(io_err(&path))?;
        writer.serialize(ManifestRow {
            doc_id: doc.doc_id.clone(),
            company_profile: doc.company_profile.to_string(),
            pages: doc.page_count,
            file,
        })?;
    }
    writer.flush().map_err(io_err(&manifest_path))?;
    Ok(())
}

/// Writes extraction output: `records.csv`, long-format `components.csv` and
/// `lifecycle.csv`, and `discards.csv`.
pub fn write_extraction(
    dir: &Path,
    records: &[ExtractionRecord],
    discards: &[Discard],
) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut out = csv::Writer::from_path(dir.join(RECORDS_FILE))?;
    out.write_record([
        "doc_id",
        "product_name",
        "product_type",
        "total_pcf",
        "schema",
    ])?;
    for r in records {
        out.write_record([
            r.doc_id.as_str(),
            &r.product_name,
            &r.product_type,
            &r.total_pcf.to_string(),
            r.schema.as_str(),
        ])?;
    }
    out.flush().map_err(io_err(dir))?;

    let mut out = csv::Writer::from_path(dir.join(COMPONENTS_FILE))?;
    out.write_record(["doc_id", "component", "percent", "rank"])?;
    for r in records {
        for (rank, (name, percent)) in r.component_percents.iter().enumerate() {
            out.write_record([
                r.doc_id.as_str(),
                name,
                &percent.to_string(),
                &(rank + 1).to_string(),
            ])?;
        }
    }
    out.flush().map_err(io_err(dir))?;

    let mut out = csv::Writer::from_path(dir.join(LIFECYCLE_FILE))?;
    out.write_record(["doc_id", "stage", "percent"])?;
    for r in records {
        for (stage, percent) in r.lifecycle_percents.iter().flatten() {
            out.write_record([r.doc_id.as_str(), stage, &percent.to_string()])?;
        }
    }
    out.flush().map_err(io_err(dir))?;

    let mut out = csv::Writer::from_path(dir.join(DISCARDS_FILE))?;
    out.write_record(["doc_id", "field", "reason"])?;
    for d in discards {
        out.write_record([d.doc_id.as_str(), &d.field, d.reason.as_str()])?;
    }
    out.flush().map_err(io_err(dir))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{CompanyProfile, SynthConfig, extract_document, synthesize_corpus};
    use super::*;

    fn write_manifest(dir: &Path, rows: &str) {
        fs::write(
            dir.join(MANIFEST_FILE),
            format!("doc_id,company_profile,pages,file\n{rows}"),
        )
        .unwrap();
    }

    #[test]
    fn loads_sorted_documents() {
        let tmp = tempfile::tempdir().unwrap();
        for (name, text) in [
            ("b.txt", "beta text"),
            ("a.txt", "alpha"),
            ("c.txt", "gamma x y"),
        ] {
            fs::write(tmp.path().join(name), text).unwrap();
        }
        write_manifest(tmp.path(), "c,hp,1,c.txt\na,direct,2,a.txt\nb,hp,1,b.txt\n");
        let docs = load_corpus(tmp.path()).unwrap();
        let ids: Vec<_> = docs.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(docs[2].word_count, 3);
        assert_eq!(docs[0].company_profile, CompanyProfile::Direct);
    }

    #[test]
    fn duplicate_doc_id_is_named() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("a.txt"), "x").unwrap();
        write_manifest(tmp.path(), "dup,hp,1,a.txt\ndup,hp,1,a.txt\n");
        let err = load_corpus(tmp.path()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateDocId(ref id) if id == "dup"));
        assert!(err.to_string().contains("dup"));
    }

    #[test]
    fn missing_manifest_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_corpus(tmp.path()),
            Err(CorpusError::MissingManifest(_))
        ));
    }

    #[test]
    fn non_utf8_file_reports_path() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("bad.txt"), [0xff, 0xfe, 0x41]).unwrap();
        write_manifest(tmp.path(), "bad,hp,1,bad.txt\n");
        match load_corpus(tmp.path()).unwrap_err() {
            CorpusError::NonUtf8 { path } => assert!(path.ends_with("bad.txt")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn written_corpus_loads_back_and_extracts() {
        let tmp = tempfile::tempdir().unwrap();
        let config = SynthConfig {
            documents: 12,
            ..SynthConfig::default()
        };
        let (docs, records) = synthesize_corpus(&config, 4).unwrap();
        write_corpus(tmp.path(), &docs).unwrap();
        let loaded = load_corpus(tmp.path()).unwrap();
        assert_eq!(loaded, docs);
        let extracted: Vec<_> = loaded
            .iter()
            .map(|d| extract_document(d).unwrap())
            .collect();
        assert_eq!(extracted, records);

        write_extraction(tmp.path(), &extracted, &[]).unwrap();
        let components = fs::read_to_string(tmp.path().join(COMPONENTS_FILE)).unwrap();
        assert!(components.starts_with("doc_id,component,percent,rank\n"));
        let rows = components.lines().count() - 1;
        let expected: usize = records.iter().map(|r| r.component_percents.len()).sum();
        assert_eq!(rows, expected);
        let discards = fs::read_to_string(tmp.path().join(DISCARDS_FILE)).unwrap();
        assert_eq!(discards, "doc_id,field,reason\n");
    }
}
