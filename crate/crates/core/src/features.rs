//! Sparse one-hot + dense z-scored feature vectors.
//!
//! Every categorical field owns a contiguous index range whose first slot is
//! the reserved "unknown" bucket. Dense features follow the categorical
//! block and are normalized with statistics of the training rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Persona, RawDataset};
use crate::error::{Error, Result};

const SCHEMA_MAGIC: &str = "# edgecast-schema v1";

/// How the dense scale `sigma` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleRule {
    /// Population standard deviation (z-score).
    #[default]
    StdDev,
    /// Population variance.
    Variance,
}

/// Attribute values of one (user, item) pair before encoding. `None` marks a
/// missing dense value; it encodes to 0, the training mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub categorical: Vec<String>,
    pub dense: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// One global index per categorical field; value 1.
    pub sparse: Vec<u32>,
    /// Global index of `dense[0]`.
    pub dense_offset: u32,
    pub dense: Vec<f64>,
}

impl FeatureVector {
    /// A fully dense vector, used for small numeric models and tests.
    pub fn from_dense(values: Vec<f64>) -> Self {
        FeatureVector {
            sparse: Vec::new(),
            dense_offset: 0,
            dense: values,
        }
    }

    /// Non-zero candidates as `(global index, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let off = self.dense_offset as usize;
        self.sparse
            .iter()
            .map(|&i| (i as usize, 1.0))
            .chain(self.dense.iter().enumerate().map(move |(j, &v)| (off + j, v)))
    }

    /// Smallest dimension this vector fits in.
    pub fn min_dim(&self) -> usize {
        let sparse = self.sparse.iter().map(|&i| i as usize + 1).max().unwrap_or(0);
        sparse.max(self.dense_offset as usize + self.dense.len())
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for (i, v) in self.entries() {
            x[i] += v;
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalField {
    pub name: String,
    /// Value -> slot within the field; slot 0 is "unknown".
    pub vocab: BTreeMap<String, u32>,
    pub offset: u32,
}

impl CategoricalField {
    pub fn size(&self) -> u32 {
        self.vocab.len() as u32 + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseStat {
    pub name: String,
    /// Position of this feature in [`RawRow::dense`].
    pub source: usize,
    pub mean: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingSchema {
    pub fields: Vec<CategoricalField>,
    pub dense: Vec<DenseStat>,
    pub dropped: Vec<String>,
    pub rule: ScaleRule,
    /// Number of dense inputs a [`RawRow`] carries, including dropped ones.
    pub dense_inputs: usize,
}

/// Fits vocabularies and dense statistics on `rows`.
pub fn fit_schema(
    field_names: &[String],
    dense_names: &[String],
    rows: &[RawRow],
    rule: ScaleRule,
) -> Result<EncodingSchema> {
    if rows.is_empty() {
        return Err(Error::Domain("cannot fit a schema on zero rows".into()));
    }
    for r in rows {
        if r.categorical.len() != field_names.len() {
            return Err(Error::DimensionMismatch {
                expected: field_names.len(),
                got: r.categorical.len(),
            });
        }
        if r.dense.len() != dense_names.len() {
            return Err(Error::DimensionMismatch {
                expected: dense_names.len(),
                got: r.dense.len(),
            });
        }
    }
    let mut fields = Vec::with_capacity(field_names.len());
    let mut offset = 0u32;
    for (f, name) in field_names.iter().enumerate() {
        let mut values: Vec<&str> = rows.iter().map(|r| r.categorical[f].as_str()).collect();
        values.sort_unstable();
        values.dedup();
        let vocab: BTreeMap<String, u32> = values
            .into_iter()
            .enumerate()
            .map(|(k, v)| (v.to_string(), k as u32 + 1))
            .collect();
        let field = CategoricalField {
            name: name.clone(),
            vocab,
            offset,
        };
        offset += field.size();
        fields.push(field);
    }

    let mut dense = Vec::new();
    let mut dropped = Vec::new();
    for (j, name) in dense_names.iter().enumerate() {
        let present: Vec<f64> = rows.iter().filter_map(|r| r.dense[j]).collect();
        let n = present.len() as f64;
        let mean = present.iter().sum::<f64>() / n.max(1.0);
        let var = present.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n.max(1.0);
        let scale = match rule {
            ScaleRule::StdDev => var.sqrt(),
            ScaleRule::Variance => var,
        };
        if present.is_empty() || !(scale > 0.0) || !scale.is_finite() {
            log::warn!("dense feature '{name}' is constant on the training rows; dropping it");
            dropped.push(name.clone());
            continue;
        }
        dense.push(DenseStat {
            name: name.clone(),
            source: j,
            mean,
            scale,
        });
    }
    Ok(EncodingSchema {
        fields,
        dense,
        dropped,
        rule,
        dense_inputs: dense_names.len(),
    })
}

impl EncodingSchema {
    pub fn sparse_dim(&self) -> usize {
        self.fields.iter().map(|f| f.size() as usize).sum()
    }

    pub fn dim(&self) -> usize {
        self.sparse_dim() + self.dense.len()
    }

    pub fn encode(&self, row: &RawRow) -> Result<FeatureVector> {
        if row.categorical.len() != self.fields.len() {
            return Err(Error::DimensionMismatch {
                expected: self.fields.len(),
                got: row.categorical.len(),
            });
        }
        if row.dense.len() != self.dense_inputs {
            return Err(Error::DimensionMismatch {
                expected: self.dense_inputs,
                got: row.dense.len(),
            });
        }
        let sparse = self
            .fields
            .iter()
            .zip(&row.categorical)
            .map(|(f, v)| f.offset + f.vocab.get(v).copied().unwrap_or(0))
            .collect();
        let dense = self
            .dense
            .iter()
            .map(|d| row.dense[d.source].map_or(0.0, |v| (v - d.mean) / d.scale))
            .collect();
        Ok(FeatureVector {
            sparse,
            dense_offset: self.sparse_dim() as u32,
            dense,
        })
    }

    /// Line-oriented text form; see the crate README for the layout.
    pub fn to_text(&self) -> String {
        let body = self.body();
        format!("{SCHEMA_MAGIC} sha256={}\n{body}", sha256_hex(&body))
    }

    /// SHA-256 of the schema body, used to pair weights with their schema.
    pub fn hash(&self) -> String {
        sha256_hex(&self.body())
    }

    fn body(&self) -> String {
        let mut out = String::new();
        let rule = match self.rule {
            ScaleRule::StdDev => "std-dev",
            ScaleRule::Variance => "variance",
        };
        let _ = writeln!(out, "scale\t{rule}");
        let _ = writeln!(out, "dense-inputs\t{}", self.dense_inputs);
        for f in &self.fields {
            let _ = writeln!(out, "field\t{}\t{}", f.name, f.vocab.len());
            let mut by_slot: Vec<(&String, &u32)> = f.vocab.iter().collect();
            by_slot.sort_by_key(|(_, &s)| s);
            for (v, _) in by_slot {
                let _ = writeln!(out, "value\t{v}");
            }
        }
        for d in &self.dense {
            let _ = writeln!(out, "dense\t{}\t{}\t{:?}\t{:?}", d.name, d.source, d.mean, d.scale);
        }
        for name in &self.dropped {
            let _ = writeln!(out, "dropped\t{name}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let path = Path::new("<schema>");
        let (header, body) = text
            .split_once('\n')
            .ok_or_else(|| Error::Format("empty schema".into()))?;
        let expected = header
            .strip_prefix(SCHEMA_MAGIC)
            .and_then(|h| h.trim().strip_prefix("sha256="))
            .ok_or_else(|| Error::Format("missing schema header".into()))?;
        // Comment lines right after the header are provenance, not schema.
        let mut body = body;
        let mut skipped = 0;
        while body.starts_with('#') {
            body = body.split_once('\n').map_or("", |(_, rest)| rest);
            skipped += 1;
        }
        if sha256_hex(body) != expected {
            return Err(Error::Integrity("schema checksum mismatch".into()));
        }
        let mut schema = EncodingSchema {
            fields: Vec::new(),
            dense: Vec::new(),
            dropped: Vec::new(),
            rule: ScaleRule::StdDev,
            dense_inputs: 0,
        };
        let mut offset = 0u32;
        for (k, line) in body.lines().enumerate() {
            let ln = k + 2 + skipped;
            let cols: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::parse(path, ln, format!("bad number '{s}'")))
            };
            match cols.as_slice() {
                ["scale", "std-dev"] => schema.rule = ScaleRule::StdDev,
                ["scale", "variance"] => schema.rule = ScaleRule::Variance,
                ["dense-inputs", n] => schema.dense_inputs = num(n)? as usize,
                ["field", name, _] => {
                    if let Some(f) = schema.fields.last() {
                        offset += f.size();
                    }
                    schema.fields.push(CategoricalField {
                        name: name.to_string(),
                        vocab: BTreeMap::new(),
                        offset,
                    });
                }
                ["value", v] => {
                    let f = schema
                        .fields
                        .last_mut()
                        .ok_or_else(|| Error::parse(path, ln, "value before any field"))?;
                    let slot = f.vocab.len() as u32 + 1;
                    f.vocab.insert(v.to_string(), slot);
                }
                ["dense", name, source, mean, scale] => schema.dense.push(DenseStat {
                    name: name.to_string(),
                    source: num(source)? as usize,
                    mean: num(mean)?,
                    scale: num(scale)?,
                }),
                ["dropped", name] => schema.dropped.push(name.to_string()),
                _ => return Err(Error::parse(path, ln, format!("unrecognized line '{line}'"))),
            }
        }
        Ok(schema)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Saves with `comment` (one or more `#` lines) after the header line.
    pub fn save_with_comment(&self, path: &Path, comment: &str) -> Result<()> {
        let text = self.to_text();
        let (head, body) = text.split_once('\n').unwrap_or((&text, ""));
        std::fs::write(path, format!("{head}\n{comment}{body}")).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

pub(crate) fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Turns (user, item) ids of a MovieLens dataset into [`RawRow`]s.
///
/// Categorical fields: user id, item id, gender, occupation, zip region
/// (first zip character) and one 0/1 field per genre. Dense features: age,
/// release year, and the user's persona (rating count, mean rating, genre
/// fractions).
pub struct RowBuilder<'a> {
    pub ds: &'a RawDataset,
    pub personas: &'a BTreeMap<u32, Persona>,
}

impl<'a> RowBuilder<'a> {
    pub fn new(ds: &'a RawDataset, personas: &'a BTreeMap<u32, Persona>) -> Self {
        RowBuilder { ds, personas }
    }

    pub fn field_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ["user_id", "item_id", "gender", "occupation", "zip_region"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        names.extend(self.ds.genres.iter().map(|g| format!("genre:{g}")));
        names
    }

    pub fn dense_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ["age", "year", "persona_count", "persona_mean_rating"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        names.extend(self.ds.genres.iter().map(|g| format!("persona_genre:{g}")));
        names
    }

    pub fn row(&self, user: u32, item: u32) -> Result<RawRow> {
        let u = self
            .ds
            .user(user)
            .ok_or_else(|| Error::Integrity(format!("unknown user {user}")))?;
        let it = self
            .ds
            .item(item)
            .ok_or_else(|| Error::Integrity(format!("unknown item {item}")))?;
        let mut categorical = vec![
            u.id.to_string(),
            it.id.to_string(),
            u.gender.clone(),
            u.occupation.clone(),
            u.zip.chars().next().map(String::from).unwrap_or_default(),
        ];
        categorical.extend(it.genres.iter().map(|&g| if g { "1" } else { "0" }.to_string()));

        let empty = Persona {
            count: 0.0,
            mean_rating: 0.0,
            genre_fractions: vec![0.0; self.ds.genres.len()],
        };
        let p = self.personas.get(&user).unwrap_or(&empty);
        let mut dense = vec![
            Some(f64::from(u.age)),
            it.year.map(f64::from),
            Some(p.count),
            Some(p.mean_rating),
        ];
        dense.extend(p.genre_fractions.iter().map(|&f| Some(f)));
        Ok(RawRow { categorical, dense })
    }

    pub fn fit(&self, pairs: &[(u32, u32)], rule: ScaleRule) -> Result<EncodingSchema> {
        let rows = pairs
            .iter()
            .map(|&(u, m)| self.row(u, m))
            .collect::<Result<Vec<_>>>()?;
        fit_schema(&self.field_names(), &self.dense_names(), &rows, rule)
    }

    pub fn encode(&self, schema: &EncodingSchema, user: u32, item: u32) -> Result<FeatureVector> {
        schema.encode(&self.row(user, item)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(cat: &[&str], dense: &[f64]) -> RawRow {
        RawRow {
            categorical: cat.iter().map(|s| s.to_string()).collect(),
            dense: dense.iter().map(|&v| Some(v)).collect(),
        }
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn one_hot_codes() {
        let rows = [row(&["1"], &[1991.0]), row(&["2"], &[1992.0]), row(&["3"], &[1995.0])];
        let s = fit_schema(&names(&["label"]), &names(&["year"]), &rows, ScaleRule::StdDev).unwrap();
        let codes: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| s.encode(r).unwrap().to_dense(s.dim())[1..4].to_vec())
            .collect();
        assert_eq!(codes, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let mean = (1991.0 + 1992.0 + 1995.0) / 3.0;
        let sd = ((1991.0f64 - mean).powi(2) + (1992.0f64 - mean).powi(2) + (1995.0f64 - mean).powi(2)) / 3.0;
        let z = s.encode(&rows[2]).unwrap().dense[0];
        assert!((z - (1995.0 - mean) / sd.sqrt()).abs() < 1e-12);
        let at_mean = s.encode(&row(&["1"], &[mean])).unwrap();
        assert_eq!(at_mean.dense[0], 0.0);
    }

    #[test]
    fn unknown_bucket() {
        let rows = [row(&["a", "x"], &[]), row(&["b", "y"], &[])];
        let s = fit_schema(&names(&["f", "g"]), &[], &rows, ScaleRule::StdDev).unwrap();
        let v = s.encode(&row(&["zzz", "y"], &[])).unwrap();
        assert_eq!(v.sparse, vec![0, 3 + 2]);
        assert_eq!(s.dim(), 6);
    }

    #[test]
    fn single_row_drops_dense() {
        let rows = [row(&["a"], &[1.0, 2.0])];
        let s = fit_schema(&names(&["f"]), &names(&["p", "q"]), &rows, ScaleRule::StdDev).unwrap();
        assert!(s.dense.is_empty());
        assert_eq!(s.dropped, names(&["p", "q"]));
        assert_eq!(s.encode(&rows[0]).unwrap().dense, Vec::<f64>::new());
    }

    #[test]
    fn variance_rule() {
        let rows = [row(&["a"], &[0.0]), row(&["a"], &[4.0])];
        let s = fit_schema(&names(&["f"]), &names(&["p"]), &rows, ScaleRule::Variance).unwrap();
        assert_eq!(s.dense[0].scale, 4.0);
    }

    #[test]
    fn text_round_trip() {
        let rows = [row(&["a", "x"], &[1.0, 5.0]), row(&["b", "x"], &[3.0, 5.0])];
        let s = fit_schema(&names(&["f", "g"]), &names(&["p", "q"]), &rows, ScaleRule::StdDev).unwrap();
        let back = EncodingSchema::from_text(&s.to_text()).unwrap();
        assert_eq!(back, s);
        let tampered = s.to_text().replace("value\ta", "value\tc");
        assert!(EncodingSchema::from_text(&tampered).is_err());
        let text = s.to_text();
        let (head, body) = text.split_once('\n').unwrap();
        let commented = format!("{head}\n# run 1\n# more\n{body}");
        assert_eq!(EncodingSchema::from_text(&commented).unwrap(), s);
    }
}
