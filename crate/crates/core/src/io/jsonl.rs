//! JSONL schemas: ground-truth groups, paired detections, per-modality
//! detections and annotations, and the dataset manifest. One image per
//! line so multi-thousand-image sets stream without loading everything.
//!
//! Field names and value layouts are part of the toolkit's contract; the
//! writers emit keys in a fixed order so re-serialization of parsed files
//! is byte-identical.

use super::{DataError, ParseMode};
use crate::geometry::{BoundingBox, ScoredBox};
use crate::nms::DetectionPair;
use crate::pairing::PersonGroup;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

/// `{"image_id":…, "groups":[{"person_id":…, "rgb":[…]|null, "thermal":[…]|null}]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGroups {
    pub image_id: String,
    pub groups: Vec<PersonGroup>,
}

/// One line of the paired-detections schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePairs {
    pub image_id: String,
    pub pairs: Vec<PairRecord>,
}

/// `{"anchor_id":…, "rgb":{"box":[…],"score":…}|null, "thermal":…|null, "enclosing":[…]?}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub anchor_id: u64,
    pub rgb: Option<ScoredBox>,
    pub thermal: Option<ScoredBox>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub enclosing: Option<BoundingBox>,
}

impl PairRecord {
    pub fn from_pair(pair: &DetectionPair) -> Self {
        PairRecord {
            anchor_id: pair.anchor_id,
            rgb: pair.rgb,
            thermal: pair.thermal,
            enclosing: None,
        }
    }

    pub fn to_pair(&self) -> DetectionPair {
        DetectionPair::new(self.anchor_id, self.rgb, self.thermal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Rgb,
    Thermal,
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Modality::Rgb => write!(f, "rgb"),
            Modality::Thermal => write!(f, "thermal"),
        }
    }
}

/// `{"image_id":…, "modality":"rgb"|"thermal", "boxes":[{"box":[…],"score":…}]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalDetections {
    pub image_id: String,
    pub modality: Modality,
    pub boxes: Vec<ScoredBox>,
}

/// Raw single-modality annotations, the input to ground-truth pairing:
/// `{"image_id":…, "boxes":[[x1,y1,x2,y2],…]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalAnnotations {
    pub image_id: String,
    pub boxes: Vec<BoundingBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Day,
    Night,
    Unknown,
}

/// One dataset image: id, per-modality paths, day/night tag, dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub rgb_path: String,
    pub thermal_path: String,
    pub tag: Tag,
    pub width: u32,
    pub height: u32,
}

/// Detections parsed from either supported schema.
#[derive(Debug, Clone, PartialEq)]
pub enum Detections {
    PerModality(Vec<ModalDetections>),
    Paired(Vec<ImagePairs>),
}

fn validate_bbox(b: &BoundingBox, what: &str) -> Result<(), String> {
    if !b.is_valid() {
        return Err(format!(
            "{what} [{}, {}, {}, {}] violates box invariants (finite, x2 >= x1, y2 >= y1)",
            b.x1, b.y1, b.x2, b.y2
        ));
    }
    Ok(())
}

fn validate_scored(b: &ScoredBox, what: &str) -> Result<(), String> {
    validate_bbox(&b.bbox, what)?;
    if !(b.score.is_finite() && (0.0..=1.0).contains(&b.score)) {
        return Err(format!("{what} score {} outside [0, 1]", b.score));
    }
    Ok(())
}

fn validate_groups(rec: &ImageGroups) -> Result<(), String> {
    let mut seen = HashSet::new();
    for g in &rec.groups {
        if !seen.insert(g.person_id) {
            return Err(format!("duplicate person_id {} in image {}", g.person_id, rec.image_id));
        }
        if g.rgb.is_none() && g.thermal.is_none() {
            return Err(format!(
                "group {} in image {} has both sides null",
                g.person_id, rec.image_id
            ));
        }
        if let Some(b) = &g.rgb {
            validate_bbox(b, "rgb box")?;
        }
        if let Some(b) = &g.thermal {
            validate_bbox(b, "thermal box")?;
        }
    }
    Ok(())
}

fn validate_pairs(rec: &ImagePairs) -> Result<(), String> {
    let mut seen = HashSet::new();
    for p in &rec.pairs {
        if !seen.insert(p.anchor_id) {
            return Err(format!("duplicate anchor_id {} in image {}", p.anchor_id, rec.image_id));
        }
        if p.rgb.is_none() && p.thermal.is_none() {
            return Err(format!(
                "pair {} in image {} has both sides null",
                p.anchor_id, rec.image_id
            ));
        }
        if let Some(b) = &p.rgb {
            validate_scored(b, "rgb detection")?;
        }
        if let Some(b) = &p.thermal {
            validate_scored(b, "thermal detection")?;
        }
        if let Some(b) = &p.enclosing {
            validate_bbox(b, "enclosing box")?;
        }
    }
    Ok(())
}

fn validate_modal(rec: &ModalDetections) -> Result<(), String> {
    for b in &rec.boxes {
        validate_scored(b, "detection")?;
    }
    Ok(())
}

fn validate_annotations(rec: &ModalAnnotations) -> Result<(), String> {
    for b in &rec.boxes {
        validate_bbox(b, "annotation box")?;
    }
    Ok(())
}

fn validate_manifest(rec: &ManifestEntry) -> Result<(), String> {
    if rec.width == 0 || rec.height == 0 {
        return Err(format!(
            "image {} has non-positive dimensions {}x{}",
            rec.image_id, rec.width, rec.height
        ));
    }
    Ok(())
}

/// Collects dotted paths of unknown object keys per the field tree of each
/// schema. `spec` maps a field name to the checker for its value.
struct FieldSpec {
    context: &'static str,
    check: fn(&Value, &mut Vec<String>),
}

fn no_nested(_: &Value, _: &mut Vec<String>) {}

fn collect_unknown(value: &Value, allowed: &[(&str, fn(&Value, &mut Vec<String>))], out: &mut Vec<String>) {
    if let Value::Object(map) = value {
        for (key, sub) in map {
            match allowed.iter().find(|(name, _)| name == key) {
                Some((_, check)) => check(sub, out),
                None => out.push(key.clone()),
            }
        }
    }
}

fn check_scored_box(v: &Value, out: &mut Vec<String>) {
    collect_unknown(v, &[("box", no_nested), ("score", no_nested)], out);
}

fn unknown_fields_for(value: &Value, spec: &FieldSpec) -> Vec<String> {
    let mut out = Vec::new();
    (spec.check)(value, &mut out);
    out
}

fn groups_spec() -> FieldSpec {
    fn check(v: &Value, out: &mut Vec<String>) {
        collect_unknown(
            v,
            &[
                ("image_id", no_nested),
                ("groups", {
                    fn inner(v: &Value, out: &mut Vec<String>) {
                        if let Value::Array(items) = v {
                            for item in items {
                                collect_unknown(
                                    item,
                                    &[
                                        ("person_id", no_nested),
                                        ("rgb", no_nested),
                                        ("thermal", no_nested),
                                    ],
                                    out,
                                );
                            }
                        }
                    }
                    inner
                }),
            ],
            out,
        );
    }
    FieldSpec {
        context: "groups record",
        check,
    }
}

fn pairs_spec() -> FieldSpec {
    fn check(v: &Value, out: &mut Vec<String>) {
        collect_unknown(
            v,
            &[
                ("image_id", no_nested),
                ("pairs", {
                    fn inner(v: &Value, out: &mut Vec<String>) {
                        if let Value::Array(items) = v {
                            for item in items {
                                collect_unknown(
                                    item,
                                    &[
                                        ("anchor_id", no_nested),
                                        ("rgb", check_scored_box),
                                        ("thermal", check_scored_box),
                                        ("enclosing", no_nested),
                                    ],
                                    out,
                                );
                            }
                        }
                    }
                    inner
                }),
            ],
            out,
        );
    }
    FieldSpec {
        context: "paired detections record",
        check,
    }
}

fn modal_spec() -> FieldSpec {
    fn check(v: &Value, out: &mut Vec<String>) {
        collect_unknown(
            v,
            &[
                ("image_id", no_nested),
                ("modality", no_nested),
                ("boxes", {
                    fn inner(v: &Value, out: &mut Vec<String>) {
                        if let Value::Array(items) = v {
                            for item in items {
                                check_scored_box(item, out);
                            }
                        }
                    }
                    inner
                }),
            ],
            out,
        );
    }
    FieldSpec {
        context: "per-modality detections record",
        check,
    }
}

fn annotations_spec() -> FieldSpec {
    fn check(v: &Value, out: &mut Vec<String>) {
        collect_unknown(v, &[("image_id", no_nested), ("boxes", no_nested)], out);
    }
    FieldSpec {
        context: "annotation record",
        check,
    }
}

fn manifest_spec() -> FieldSpec {
    fn check(v: &Value, out: &mut Vec<String>) {
        collect_unknown(
            v,
            &[
                ("image_id", no_nested),
                ("rgb_path", no_nested),
                ("thermal_path", no_nested),
                ("tag", no_nested),
                ("width", no_nested),
                ("height", no_nested),
            ],
            out,
        );
    }
    FieldSpec {
        context: "manifest entry",
        check,
    }
}

fn read_records<T, V, K>(
    path: &Path,
    mode: ParseMode,
    spec: FieldSpec,
    validate: V,
    unique_key: K,
) -> Result<Vec<T>, DataError>
where
    T: DeserializeOwned,
    V: Fn(&T) -> Result<(), String>,
    K: Fn(&T) -> String,
{
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let display = path.display().to_string();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|source| DataError::Json {
            path: display.clone(),
            line: line_no,
            source,
        })?;
        for field in unknown_fields_for(&value, &spec) {
            match mode {
                ParseMode::Strict => {
                    return Err(DataError::UnknownField {
                        path: display.clone(),
                        line: line_no,
                        field,
                        context: spec.context,
                    })
                }
                ParseMode::Lenient => {
                    eprintln!(
                        "warning: {display}:{line_no}: ignoring unknown field `{field}` in {}",
                        spec.context
                    );
                }
            }
        }
        let record: T = serde_json::from_value(value).map_err(|source| DataError::Json {
            path: display.clone(),
            line: line_no,
            source,
        })?;
        validate(&record).map_err(|message| DataError::Invariant {
            path: display.clone(),
            line: line_no,
            message,
        })?;
        let key = unique_key(&record);
        if !seen.insert(key.clone()) {
            return Err(DataError::Invariant {
                path: display.clone(),
                line: line_no,
                message: format!("duplicate record key `{key}`"),
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_groups(path: &Path, mode: ParseMode) -> Result<Vec<ImageGroups>, DataError> {
    read_records(path, mode, groups_spec(), validate_groups, |r: &ImageGroups| {
        r.image_id.clone()
    })
}

pub fn read_paired_detections(path: &Path, mode: ParseMode) -> Result<Vec<ImagePairs>, DataError> {
    read_records(path, mode, pairs_spec(), validate_pairs, |r: &ImagePairs| {
        r.image_id.clone()
    })
}

pub fn read_modal_detections(
    path: &Path,
    mode: ParseMode,
) -> Result<Vec<ModalDetections>, DataError> {
    read_records(path, mode, modal_spec(), validate_modal, |r: &ModalDetections| {
        format!("{}/{}", r.image_id, r.modality)
    })
}

pub fn read_annotations(path: &Path, mode: ParseMode) -> Result<Vec<ModalAnnotations>, DataError> {
    read_records(
        path,
        mode,
        annotations_spec(),
        validate_annotations,
        |r: &ModalAnnotations| r.image_id.clone(),
    )
}

pub fn read_manifest(path: &Path, mode: ParseMode) -> Result<Vec<ManifestEntry>, DataError> {
    read_records(path, mode, manifest_spec(), validate_manifest, |r: &ManifestEntry| {
        r.image_id.clone()
    })
}

/// Reads a detections file in either schema, deciding by the first
/// non-empty line (`"pairs"` vs `"boxes"`).
pub fn read_detections(path: &Path, mode: ParseMode) -> Result<Detections, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let display = path.display().to_string();
    let probe = text.lines().enumerate().find(|(_, l)| !l.trim().is_empty());
    let Some((idx, line)) = probe else {
        return Ok(Detections::PerModality(Vec::new()));
    };
    let value: Value = serde_json::from_str(line).map_err(|source| DataError::Json {
        path: display.clone(),
        line: idx + 1,
        source,
    })?;
    let object = value.as_object();
    if object.is_some_and(|m| m.contains_key("pairs")) {
        Ok(Detections::Paired(read_paired_detections(path, mode)?))
    } else if object.is_some_and(|m| m.contains_key("boxes")) {
        Ok(Detections::PerModality(read_modal_detections(path, mode)?))
    } else {
        Err(DataError::Invariant {
            path: display,
            line: idx + 1,
            message: "record is neither paired (`pairs`) nor per-modality (`boxes`) detections"
                .into(),
        })
    }
}

/// Writes records one JSON object per line. Struct key order is fixed, so
/// output bytes are deterministic.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DataError> {
    let file = fs::File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(|source| DataError::Json {
            path: path.display().to_string(),
            line: 0,
            source,
        })?;
        out.write_all(b"\n").map_err(|e| DataError::io(path, e))?;
    }
    out.flush().map_err(|e| DataError::io(path, e))?;
    Ok(())
}
