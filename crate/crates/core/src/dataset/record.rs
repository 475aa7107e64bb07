use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{DatasetError, FilterDecision};
use crate::geo::GeoCoordinate;

/// Annotated capacity of an image to be located from its content alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Localizability {
    MinimalContext,
    ContextuallyAmbiguous,
    HighlyMisleading,
    Localizable,
    #[default]
    Untagged,
}

impl Localizability {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "minimal_context" => Localizability::MinimalContext,
            "contextually_ambiguous" => Localizability::ContextuallyAmbiguous,
            "highly_misleading" => Localizability::HighlyMisleading,
            "localizable" => Localizability::Localizable,
            "untagged" => Localizability::Untagged,
            _ => return None,
        })
    }
}

/// One dataset item with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub image_uri: String,
    pub truth: GeoCoordinate,
    /// ISO-3166 alpha-2, upper case.
    pub country_code: String,
    pub localizability: Localizability,
    /// Front, back, left and right captures of the same spot.
    pub views: Option<[String; 4]>,
    /// Human-readable place, used by the description-generation prompt.
    pub address: Option<String>,
}

impl ImageRecord {
    pub fn new(
        id: impl Into<String>,
        image_uri: impl Into<String>,
        truth: GeoCoordinate,
        country: &str,
    ) -> Self {
        ImageRecord {
            id: id.into(),
            image_uri: image_uri.into(),
            truth,
            country_code: country.to_ascii_uppercase(),
            localizability: Localizability::Untagged,
            views: None,
            address: None,
        }
    }

    pub fn with_views(mut self, views: [String; 4]) -> Self {
        self.views = Some(views);
        self
    }
}

#[derive(Serialize)]
struct ManifestRow<'a> {
    id: &'a str,
    image_uri: &'a str,
    lat: f64,
    lon: f64,
    country: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    views: Option<&'a [String; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    localizability: Option<Localizability>,
    #[serde(skip_serializing_if = "Option::is_none")]
    address: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    filter_decision: Option<FilterDecision>,
}

/// Serializes one record as a manifest JSONL line (no trailing newline).
pub fn manifest_line(record: &ImageRecord, decision: Option<FilterDecision>) -> String {
    let row = ManifestRow {
        id: &record.id,
        image_uri: &record.image_uri,
        lat: record.truth.latitude(),
        lon: record.truth.longitude(),
        country: &record.country_code,
        views: record.views.as_ref(),
        localizability: match record.localizability {
            Localizability::Untagged => None,
            tag => Some(tag),
        },
        address: record.address.as_deref(),
        filter_decision: decision,
    };
    serde_json::to_string(&row).expect("manifest rows serialize")
}

pub fn write_manifest<'a, W, I>(mut out: W, rows: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a ImageRecord, Option<FilterDecision>)>,
{
    for (record, decision) in rows {
        writeln!(out, "{}", manifest_line(record, decision))?;
    }
    out.flush()
}

/// Reads a JSONL manifest file.
pub fn ingest_manifest(path: &Path) -> Result<Vec<ImageRecord>, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_manifest(BufReader::new(file))
}

/// Parses JSONL manifest rows; blank lines are skipped. Line numbers in
/// errors are 1-based.
pub fn read_manifest<R: BufRead>(reader: R) -> Result<Vec<ImageRecord>, DatasetError> {
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| DatasetError::Io {
            path: format!("line {line_no}"),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_row(&line, line_no)?;
        if let Some(&first_line) = seen.get(&record.id) {
            return Err(DatasetError::DuplicateId {
                id: record.id,
                line: line_no,
                first_line,
            });
        }
        seen.insert(record.id.clone(), line_no);
        records.push(record);
    }
    Ok(records)
}

fn malformed(line: usize, field: &str, message: impl Into<String>) -> DatasetError {
    DatasetError::Malformed {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn text_field<'a>(
    obj: &'a Map<String, Value>,
    line: usize,
    field: &str,
) -> Result<&'a str, DatasetError> {
    match obj.get(field) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s),
        Some(Value::String(_)) => Err(malformed(line, field, "must not be empty")),
        Some(_) => Err(malformed(line, field, "expected a string")),
        None => Err(malformed(line, field, "missing")),
    }
}

fn number_field(obj: &Map<String, Value>, line: usize, field: &str) -> Result<f64, DatasetError> {
    match obj.get(field) {
        Some(Value::Number(n)) => n
            .as_f64()
            .ok_or_else(|| malformed(line, field, "not representable as f64")),
        Some(_) => Err(malformed(line, field, "expected a number")),
        None => Err(malformed(line, field, "missing")),
    }
}

fn parse_row(line: &str, line_no: usize) -> Result<ImageRecord, DatasetError> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| malformed(line_no, "<row>", format!("invalid JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(malformed(line_no, "<row>", "expected a JSON object"));
    };

    let id = text_field(&obj, line_no, "id")?.to_string();
    let image_uri = text_field(&obj, line_no, "image_uri")?.to_string();
    let lat = number_field(&obj, line_no, "lat")?;
    let lon = number_field(&obj, line_no, "lon")?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err(malformed(
            line_no,
            "lat",
            format!("latitude out of range: {lat}"),
        ));
    }
    let truth =
        GeoCoordinate::new(lat, lon).map_err(|e| malformed(line_no, "lon", e.to_string()))?;

    let country = text_field(&obj, line_no, "country")?;
    if country.len() != 2 || !country.bytes().all(|b| b.is_ascii_alphabetic()) {
        return Err(malformed(
            line_no,
            "country",
            format!("expected an ISO-3166 alpha-2 code, got {country:?}"),
        ));
    }

    let views = match obj.get("views") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => {
            let uris: Option<Vec<String>> = items
                .iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect();
            let uris =
                uris.ok_or_else(|| malformed(line_no, "views", "entries must be strings"))?;
            let n = uris.len();
            Some(<[String; 4]>::try_from(uris).map_err(|_| {
                malformed(
                    line_no,
                    "views",
                    format!("expected exactly 4 entries, got {n}"),
                )
            })?)
        }
        Some(_) => return Err(malformed(line_no, "views", "expected an array")),
    };

    let localizability = match obj.get("localizability") {
        None | Some(Value::Null) => Localizability::Untagged,
        Some(Value::String(s)) => Localizability::parse(s)
            .ok_or_else(|| malformed(line_no, "localizability", format!("unknown tag {s:?}")))?,
        Some(_) => return Err(malformed(line_no, "localizability", "expected a string")),
    };

    let address = match obj.get("address") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(malformed(line_no, "address", "expected a string")),
    };

    Ok(ImageRecord {
        id,
        image_uri,
        truth,
        country_code: country.to_ascii_uppercase(),
        localizability,
        views,
        address,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const VALID: &str = r#"{"id":"a1","image_uri":"img/a1.jpg","lat":51.5007,"lon":-0.1246,"country":"gb"}
{"id":"a2","image_uri":"img/a2.jpg","lat":-38.6633,"lon":143.1051,"country":"AU","localizability":"localizable"}

{"id":"a3","image_uri":"img/a3.jpg","lat":10,"lon":20,"country":"FR","views":["f.jpg","b.jpg","l.jpg","r.jpg"]}
"#;

    #[test]
    fn reads_valid_manifest() {
        let records = read_manifest(VALID.as_bytes()).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].country_code, "GB");
        assert_eq!(records[1].localizability, Localizability::Localizable);
        assert_eq!(records[2].views.as_ref().unwrap()[3], "r.jpg");
    }

    #[test]
    fn rejects_latitude_out_of_range() {
        let text = "{\"id\":\"x\",\"image_uri\":\"u\",\"lat\":1,\"lon\":1,\"country\":\"FR\"}\n\
                    {\"id\":\"y\",\"image_uri\":\"u\",\"lat\":95,\"lon\":1,\"country\":\"FR\"}\n";
        let err = read_manifest(text.as_bytes()).unwrap_err();
        match &err {
            DatasetError::Malformed { line, field, .. } => {
                assert_eq!(*line, 2);
                assert_eq!(field, "lat");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("latitude out of range"));
    }

    #[test]
    fn rejects_duplicate_id() {
        let text = "{\"id\":\"a1\",\"image_uri\":\"u\",\"lat\":1,\"lon\":1,\"country\":\"FR\"}\n\
                    {\"id\":\"a1\",\"image_uri\":\"v\",\"lat\":2,\"lon\":2,\"country\":\"FR\"}\n";
        assert!(matches!(
            read_manifest(text.as_bytes()),
            Err(DatasetError::DuplicateId { ref id, line: 2, first_line: 1 }) if id == "a1"
        ));
    }

    #[test]
    fn rejects_bad_views_and_fields() {
        let three_views =
            r#"{"id":"a","image_uri":"u","lat":1,"lon":1,"country":"FR","views":["a","b","c"]}"#;
        let err = read_manifest(three_views.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("exactly 4"), "{err}");

        let missing = r#"{"id":"a","lat":1,"lon":1,"country":"FR"}"#;
        assert!(read_manifest(missing.as_bytes())
            .unwrap_err()
            .to_string()
            .contains("image_uri"));

        let country = r#"{"id":"a","image_uri":"u","lat":1,"lon":1,"country":"FRA"}"#;
        assert!(read_manifest(country.as_bytes()).is_err());

        assert!(read_manifest("not json".as_bytes()).is_err());
    }

    #[test]
    fn manifest_lines_round_trip() {
        let records = read_manifest(VALID.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_manifest(&mut buf, records.iter().map(|r| (r, None))).unwrap();
        let again = read_manifest(buf.as_slice()).unwrap();
        assert_eq!(records, again);
    }
}
