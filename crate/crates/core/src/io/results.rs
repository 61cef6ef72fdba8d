//! Result files: `indices.json`, `indices.csv`, `separations.csv` and the
//! sensitivity-map tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::bootstrap::Statistic;
use crate::error::{Error, Result};
use crate::estimators::{local_separations, IndexEstimate, SensitivityMap};

/// 17 significant digits, which always parses back to the same double.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return "null".into();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    format!("{v:.16e}")
}

fn ser_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    let raw = RawValue::from_string(format_number(*v)).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => ser_f64(v, s),
        None => s.serialize_none(),
    }
}

fn ser_rows<S: Serializer>(rows: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Row<'a>(#[serde(serialize_with = "ser_slice")] &'a [f64]);
    s.collect_seq(rows.iter().map(|r| Row(r)))
}

fn ser_slice<S: Serializer>(v: &&[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Num(#[serde(serialize_with = "ser_f64")] f64);
    s.collect_seq(v.iter().map(|&x| Num(x)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsDoc {
    #[serde(serialize_with = "ser_f64")]
    pub advective: f64,
    #[serde(serialize_with = "ser_f64")]
    pub diffusive: f64,
    #[serde(serialize_with = "ser_f64")]
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiDoc {
    #[serde(serialize_with = "ser_f64")]
    pub low: f64,
    #[serde(serialize_with = "ser_f64")]
    pub high: f64,
    #[serde(rename = "type")]
    pub ci_type: String,
    #[serde(serialize_with = "ser_f64")]
    pub conf: f64,
    #[serde(serialize_with = "ser_f64")]
    pub bias: f64,
    #[serde(serialize_with = "ser_f64")]
    pub std_error: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDoc {
    pub name: String,
    #[serde(serialize_with = "ser_f64")]
    pub index: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub components: Option<ComponentsDoc>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci: Option<CiDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationDoc {
    pub input: String,
    pub class: usize,
    #[serde(serialize_with = "ser_f64")]
    pub x: f64,
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
}

/// Bootstrap interval of a statistic other than the index itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCiDoc {
    pub input: String,
    pub statistic: String,
    #[serde(serialize_with = "ser_f64")]
    pub original: f64,
    #[serde(serialize_with = "ser_f64")]
    pub bias: f64,
    #[serde(serialize_with = "ser_f64")]
    pub low: f64,
    #[serde(serialize_with = "ser_f64")]
    pub high: f64,
}

/// Contents of `indices.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDoc {
    pub method: String,
    pub cost: String,
    #[serde(serialize_with = "ser_f64")]
    pub bound: f64,
    pub partitions: usize,
    #[serde(serialize_with = "ser_opt_f64", skip_serializing_if = "Option::is_none", default)]
    pub epsilon: Option<f64>,
    pub inputs: Vec<InputDoc>,
    pub separations: Vec<SeparationDoc>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub component_ci: Vec<ComponentCiDoc>,
    #[serde(serialize_with = "ser_opt_f64", skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl ResultsDoc {
    pub fn new(est: &IndexEstimate, threshold: Option<f64>) -> Self {
        let boot = est.bootstrap.as_ref();
        let inputs = est
            .inputs
            .iter()
            .map(|input| InputDoc {
                name: input.name.clone(),
                index: input.index,
                components: input.components.map(|c| ComponentsDoc {
                    advective: c.advective,
                    diffusive: c.diffusive,
                    residual: c.residual,
                }),
                ci: boot.and_then(|b| {
                    b.get(&input.name, Statistic::Index).map(|s| CiDoc {
                        low: s.ci_low,
                        high: s.ci_high,
                        ci_type: b.ci_type.name().to_string(),
                        conf: b.confidence,
                        bias: s.bias,
                        std_error: s.std_error,
                        replicates: b.replicates,
                    })
                }),
            })
            .collect();
        let component_ci = boot
            .map(|b| {
                b.stats
                    .iter()
                    .filter(|s| s.statistic != Statistic::Index)
                    .map(|s| ComponentCiDoc {
                        input: s.input.clone(),
                        statistic: s.statistic.name().to_string(),
                        original: s.original,
                        bias: s.bias,
                        low: s.ci_low,
                        high: s.ci_high,
                    })
                    .collect()
            })
            .unwrap_or_default();
        let separations = local_separations(est)
            .into_iter()
            .map(|r| SeparationDoc { input: r.input, class: r.class, x: r.x, value: r.value })
            .collect();
        ResultsDoc {
            method: est.method.name().to_string(),
            cost: est.cost.clone(),
            bound: est.bound,
            partitions: est.partitions,
            epsilon: est.epsilon,
            inputs,
            separations,
            component_ci,
            threshold,
            warnings: est.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn indices_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "input", "index", "advective", "diffusive", "residual", "bias", "std_error", "ci_low", "ci_high", "ci_type",
            "conf",
        ])?;
        let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
        for i in &self.inputs {
            let c = i.components.as_ref();
            let ci = i.ci.as_ref();
            w.write_record([
                i.name.clone(),
                format_number(i.index),
                opt(c.map(|c| c.advective)),
                opt(c.map(|c| c.diffusive)),
                opt(c.map(|c| c.residual)),
                opt(ci.map(|c| c.bias)),
                opt(ci.map(|c| c.std_error)),
                opt(ci.map(|c| c.low)),
                opt(ci.map(|c| c.high)),
                ci.map(|c| c.ci_type.clone()).unwrap_or_default(),
                opt(ci.map(|c| c.conf)),
            ])?;
        }
        csv_string(w)
    }

    pub fn separations_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["input", "class", "x", "value"])?;
        for r in &self.separations {
            w.write_record([r.input.clone(), r.class.to_string(), format_number(r.x), format_number(r.value)])?;
        }
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `indices.json`, `indices.csv` and `separations.csv` into `dir`.
pub fn write_results(est: &IndexEstimate, threshold: Option<f64>, dir: &Path) -> Result<Vec<PathBuf>> {
    write_results_doc(&ResultsDoc::new(est, threshold), dir)
}

pub fn write_results_doc(doc: &ResultsDoc, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        ("indices.json", doc.to_json()?),
        ("indices.csv", doc.indices_csv()?),
        ("separations.csv", doc.separations_csv()?),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_results_json(path: &Path) -> Result<ResultsDoc> {
    ResultsDoc::from_json(&fs::read_to_string(path)?)
}

/// Contents of `smap.json`; rows of `values` are outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmapDoc {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(serialize_with = "ser_rows")]
    pub values: Vec<Vec<f64>>,
}

impl SmapDoc {
    pub fn new(map: &SensitivityMap) -> Self {
        SmapDoc {
            inputs: map.inputs.clone(),
            outputs: map.outputs.clone(),
            values: map.values.rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("output").chain(self.inputs.iter().map(String::as_str)))?;
        for (name, row) in self.outputs.iter().zip(&self.values) {
            w.write_record(std::iter::once(name.clone()).chain(row.iter().map(|&v| format_number(v))))?;
        }
        csv_string(w)
    }
}

/// Writes `smap.json` and `smap.csv` into `dir`.
pub fn write_smap(map: &SensitivityMap, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let doc = SmapDoc::new(map);
    let json = dir.join("smap.json");
    let mut body = serde_json::to_string_pretty(&doc)?;
    body.push('\n');
    fs::write(&json, body)?;
    let csv = dir.join("smap.csv");
    fs::write(&csv, doc.to_csv()?)?;
    Ok(vec![json, csv])
}
