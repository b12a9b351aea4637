//! TOML model files.
//!
//! ```toml
//! name = "sphere-fibre"
//! # preset = "sgrw" | "ssst" | "minkowski"
//!
//! [[factors]]
//! name = "M1"
//! coords = ["x"]
//! diagonal = ["1"]          # or metric = [["1"]]
//! domain = [[-1.0, 1.0]]
//!
//! [warpings]
//! f = "1 + 0.2*x^2"
//! h = "2 + sin(x + y)"
//!
//! [params]
//! alpha = 1.0
//! beta = 0.5
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seqwarp::presets::{build_sgrw, build_ssst, minkowski, SgrwSpec, SsstSpec};
use seqwarp::{Chart, PseudoProjectiveParams, SequentialModel, Tolerance};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: Option<String>,
    preset: Option<String>,
    #[serde(default)]
    factors: Vec<RawFactor>,
    time: Option<RawTime>,
    warpings: Option<RawWarpings>,
    params: Option<RawParams>,
    sampling: Option<Sampling>,
    tolerances: Option<RawTolerances>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFactor {
    name: Option<String>,
    coords: Option<Vec<String>>,
    metric: Option<Vec<Vec<String>>>,
    diagonal: Option<Vec<String>>,
    domain: Option<Vec<[f64; 2]>>,
    signature: Option<Vec<i8>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    coord: Option<String>,
    domain: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWarpings {
    f: Option<String>,
    h: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    alpha: Option<f64>,
    beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_count() -> usize {
    20
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            count: default_count(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    rel: Option<f64>,
    abs: Option<f64>,
    flatness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub verify: Tolerance,
    pub flatness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            verify: Tolerance::VERIFY,
            flatness: seqwarp::pseudo_projective::FLATNESS_THRESHOLD,
        }
    }
}

/// A validated model together with the run settings declared in its file.
pub struct LoadedModel {
    pub name: String,
    pub preset: Option<String>,
    pub model: SequentialModel,
    pub sampling: Sampling,
    pub tolerances: Tolerances,
    /// SHA-256 of the file contents.
    pub hash: String,
}

fn need<T>(v: Option<T>, path: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("{path}: required field is missing"))
}

/// Parses a model file; every error names the offending field path.
pub fn parse_model(src: &str) -> Result<LoadedModel> {
    let de = toml::Deserializer::parse(src).map_err(|e| anyhow!("model file is not valid TOML: {e}"))?;
    let raw: RawModel = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("{}: {}", if path == "." { "model" } else { &path }, e.inner().message())
    })?;
    let name = raw.name.clone().unwrap_or_else(|| "model".into());
    let params = need(raw.params.clone(), "params")?;
    let alpha = need(params.alpha, "params.alpha")?;
    let beta = need(params.beta, "params.beta")?;
    let params = PseudoProjectiveParams::new(alpha, beta)
        .map_err(|e| anyhow!("params: {e}; alpha and beta must both be non-zero reals"))?;

    let preset = raw.preset.as_deref().map(str::to_ascii_lowercase);
    let model = match preset.as_deref() {
        None => {
            if raw.factors.len() != 3 {
                bail!("factors: expected 3 factors, found {}", raw.factors.len());
            }
            let charts = build_factors(&raw.factors)?;
            let (f, h) = warpings(&raw)?;
            SequentialModel::from_sources(charts.try_into().expect("three factors"), &f, &h, params)
                .context("model")?
        }
        Some("sgrw") | Some("ssst") => {
            if raw.factors.len() != 2 {
                bail!("factors: the {} preset takes 2 factors, found {}", preset.as_deref().unwrap(), raw.factors.len());
            }
            let [a, b]: [Chart; 2] = build_factors(&raw.factors)?.try_into().expect("two factors");
            let (f, h) = warpings(&raw)?;
            let time = need(raw.time.clone(), "time")?;
            let coord = time.coord.unwrap_or_else(|| "t".into());
            let domain = need(time.domain, "time.domain")?;
            if preset.as_deref() == Some("sgrw") {
                build_sgrw(SgrwSpec {
                    time_coord: coord,
                    time_domain: (domain[0], domain[1]),
                    f,
                    m2: a,
                    m3: b,
                    h,
                    params,
                })
            } else {
                build_ssst(SsstSpec {
                    m1: a,
                    m2: b,
                    f,
                    h,
                    time_coord: coord,
                    time_domain: (domain[0], domain[1]),
                    params,
                })
            }
            .context("model")?
        }
        Some("minkowski") => {
            if !raw.factors.is_empty() || raw.warpings.is_some() {
                bail!("preset: minkowski takes no factors or warpings");
            }
            minkowski(params).context("model")?
        }
        Some(other) => bail!("preset: unknown preset `{other}` (expected sgrw, ssst or minkowski)"),
    };

    let sampling = raw.sampling.unwrap_or_default();
    if sampling.count == 0 {
        bail!("sampling.count: must be positive");
    }
    let mut tolerances = Tolerances::default();
    if let Some(t) = raw.tolerances {
        if let Some(v) = t.rel {
            tolerances.verify.rel = positive(v, "tolerances.rel")?;
        }
        if let Some(v) = t.abs {
            tolerances.verify.abs = positive(v, "tolerances.abs")?;
        }
        if let Some(v) = t.flatness {
            tolerances.flatness = positive(v, "tolerances.flatness")?;
        }
    }
    // validates the warpings on the sampled points, not only the prescan
    model
        .sample_points(sampling.count, sampling.seed)
        .context("sampling")?;
    let hash = format!("{:x}", Sha256::digest(src.as_bytes()));
    Ok(LoadedModel {
        name,
        preset,
        model,
        sampling,
        tolerances,
        hash,
    })
}

fn positive(v: f64, path: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        bail!("{path}: must be a positive number, got {v}")
    }
}

fn warpings(raw: &RawModel) -> Result<(String, String)> {
    let w = need(raw.warpings.clone(), "warpings")?;
    Ok((need(w.f, "warpings.f")?, need(w.h, "warpings.h")?))
}

fn build_factors(raw: &[RawFactor]) -> Result<Vec<Chart>> {
    raw.iter()
        .enumerate()
        .map(|(i, f)| {
            let path = format!("factors[{i}]");
            let name = f.name.clone().unwrap_or_else(|| format!("M{}", i + 1));
            let coords = need(f.coords.clone(), &format!("{path}.coords"))?;
            let refs: Vec<&str> = coords.iter().map(String::as_str).collect();
            let domain: Vec<(f64, f64)> = need(f.domain.clone(), &format!("{path}.domain"))?
                .into_iter()
                .map(|[a, b]| (a, b))
                .collect();
            let chart = match (&f.metric, &f.diagonal) {
                (Some(m), None) => Chart::parse(&name, &refs, m, &domain),
                (None, Some(d)) => Chart::diagonal(&name, &refs, d, &domain),
                (Some(_), Some(_)) => bail!("{path}: give either metric or diagonal, not both"),
                (None, None) => bail!("{path}.metric: required field is missing"),
            }
            .with_context(|| path.clone())?;
            match &f.signature {
                Some(s) => chart.with_signature(s.clone()).with_context(|| format!("{path}.signature")),
                None => Ok(chart),
            }
        })
        .collect()
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_model(&src).with_context(|| format!("loading {}", path.display()))
}

/// Optional structure probe for `classify`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeFile {
    /// Potential over all product coordinates.
    pub phi: Option<String>,
    /// Fixed Catino coefficient; mutually exclusive with `m`.
    pub catino_coeff: Option<f64>,
    pub m: Option<u32>,
    /// Constant or expression.
    pub psi: Option<toml::Value>,
    /// `"fit"`, a number or an expression.
    pub lambda: Option<toml::Value>,
    /// Field tested for the conformal gradient soliton form.
    pub conformal: Option<String>,
}

pub fn parse_probe(src: &str) -> Result<ProbeFile> {
    let de = toml::Deserializer::parse(src).map_err(|e| anyhow!("probe file is not valid TOML: {e}"))?;
    serde_path_to_error::deserialize(de).map_err(|e| anyhow!("probe.{}: {}", e.path(), e.inner().message()))
}

/// Built-in preset names and descriptions.
pub fn preset_table() -> BTreeMap<&'static str, &'static str> {
    let mut m: BTreeMap<&str, &str> = seqwarp::presets::PRESETS.iter().copied().collect();
    m.insert("minkowski", "flat E^{1,3} as an sgrw model with f = h = 1");
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = r#"
name = "flat"
[[factors]]
coords = ["x"]
diagonal = ["1"]
domain = [[-1.0, 1.0]]
[[factors]]
coords = ["y"]
diagonal = ["1"]
domain = [[-1.0, 1.0]]
[[factors]]
coords = ["z"]
diagonal = ["1"]
domain = [[-1.0, 1.0]]
[warpings]
f = "1"
h = "1"
[params]
alpha = 1.0
beta = 0.5
"#;

    fn err(src: &str) -> String {
        format!("{:#}", parse_model(src).err().expect("should fail"))
    }

    #[test]
    fn minimal_flat_model_loads() {
        let m = parse_model(FLAT).unwrap();
        assert_eq!(m.model.n(), 3);
        assert_eq!(m.sampling, Sampling::default());
        assert_eq!(m.hash.len(), 64);
    }

    #[test]
    fn missing_h_names_its_path() {
        let e = err(&FLAT.replace("h = \"1\"\n", ""));
        assert!(e.contains("warpings.h"), "{e}");
    }

    #[test]
    fn zero_beta_is_rejected() {
        let e = err(&FLAT.replace("beta = 0.5", "beta = 0.0"));
        assert!(e.contains("non-zero"), "{e}");
    }

    #[test]
    fn type_errors_carry_paths() {
        let e = err(&FLAT.replace("alpha = 1.0", "alpha = \"one\""));
        assert!(e.contains("params.alpha"), "{e}");
        let e = err(&FLAT.replace("name = \"flat\"", "name = \"flat\"\nbogus = 1"));
        assert!(e.contains("bogus"), "{e}");
    }

    #[test]
    fn parse_errors_report_expression_and_offset() {
        let e = err(&FLAT.replace("f = \"1\"", "f = \"1 + *x\""));
        assert!(e.contains("1 + *x"), "{e}");
        assert!(e.contains("warping function f"), "{e}");
    }

    #[test]
    fn non_positive_warping_is_rejected() {
        let e = err(&FLAT.replace("f = \"1\"", "f = \"x\""));
        assert!(e.contains("not positive"), "{e}");
    }

    #[test]
    fn presets_expand() {
        let m = parse_model("preset = \"minkowski\"\n[params]\nalpha = 1.0\nbeta = 2.0\n").unwrap();
        assert_eq!(m.model.n(), 4);
        let sgrw = r#"
preset = "sgrw"
[time]
domain = [0.0, 1.0]
[[factors]]
coords = ["x", "y"]
diagonal = ["1", "1"]
domain = [[-1.0, 1.0], [-1.0, 1.0]]
[[factors]]
coords = ["z"]
diagonal = ["1"]
domain = [[-1.0, 1.0]]
[warpings]
f = "sqrt(2*t + 1)"
h = "1 + t*x^2"
[params]
alpha = 1.0
beta = 0.5
"#;
        let m = parse_model(sgrw).unwrap();
        assert_eq!(m.model.kind(), seqwarp::ModelKind::Sgrw);
        assert_eq!(m.model.dims(), [1, 2, 1]);
        assert!(err(&sgrw.replace("[time]\ndomain = [0.0, 1.0]\n", "")).contains("time"));
        assert!(err("preset = \"kerr\"\n[params]\nalpha = 1.0\nbeta = 2.0\n").contains("unknown preset"));
    }
}
