//! Report assembly and the JSON, text and CSV writers.

use std::fmt::Write as _;

use anyhow::Result;
use serde::Serialize;

use seqwarp::{ChartPoint, FormulaRecord, ModelKind, SequentialModel};

use crate::commands::{Classification, CSV_FIELDS};
use crate::model_file::{LoadedModel, Sampling, Tolerances};

pub const SCHEMA_VERSION: &str = "1.0";

/// JSON schema of `report.json`.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Clone, Serialize)]
pub struct ModelMeta {
    pub name: String,
    pub preset: Option<String>,
    pub hash: String,
    pub kind: &'static str,
    pub dims: [usize; 3],
    pub n: usize,
    pub coords: Vec<String>,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub all_passed: bool,
    pub failed_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub model: ModelMeta,
    pub sampling: Sampling,
    pub tolerances: Tolerances,
    pub records: Vec<FormulaRecord>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    /// Excluded from determinism comparisons.
    pub wall_time_ms: f64,
}

pub fn kind_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Generic => "generic",
        ModelKind::Sgrw => "sgrw",
        ModelKind::Ssst => "ssst",
    }
}

impl Report {
    pub fn new(
        command: &str,
        loaded: &LoadedModel,
        model: &SequentialModel,
        sampling: Sampling,
        tolerances: Tolerances,
        records: Vec<FormulaRecord>,
        classification: Option<Classification>,
    ) -> Self {
        let failed_ids: Vec<String> = records.iter().filter(|r| !r.verdict.passed()).map(|r| r.id.clone()).collect();
        let params = model.params();
        Report {
            schema_version: SCHEMA_VERSION,
            tool: "seqwarp",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            model: ModelMeta {
                name: loaded.name.clone(),
                preset: loaded.preset.clone(),
                hash: loaded.hash.clone(),
                kind: kind_name(model.kind()),
                dims: model.dims(),
                n: model.n(),
                coords: model.assembled().coords().to_vec(),
                alpha: params.alpha,
                beta: params.beta,
            },
            sampling,
            tolerances,
            summary: Summary {
                total: records.len(),
                passed: records.len() - failed_ids.len(),
                failed: failed_ids.len(),
                all_passed: failed_ids.is_empty(),
                failed_ids,
            },
            records,
            classification,
            wall_time_ms: 0.0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = &self.model;
        let _ = writeln!(s, "model {} ({}, dims {:?}, n = {})", m.name, m.kind, m.dims, m.n);
        let _ = writeln!(s, "alpha = {}, beta = {}, samples = {}, seed = {}", m.alpha, m.beta, self.sampling.count, self.sampling.seed);
        let _ = writeln!(s, "sha256 {}", m.hash);
        if !self.records.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "{:<36} {:<5} {:>10} {:>10} {:>6}  best reading", "formula", "", "max abs", "max rel", "obs");
            for r in &self.records {
                let best = r.variants.iter().find(|v| v.best_match).map(|v| v.name.as_str()).unwrap_or("");
                let _ = writeln!(
                    s,
                    "{:<36} {:<5} {:>10.2e} {:>10.2e} {:>6}  {}",
                    r.id,
                    if r.verdict.passed() { "PASS" } else { "FAIL" },
                    r.max_abs,
                    r.max_rel,
                    r.observations,
                    best
                );
            }
            let _ = writeln!(s);
            let _ = writeln!(s, "{} of {} records passed", self.summary.passed, self.summary.total);
            for id in &self.summary.failed_ids {
                let _ = writeln!(s, "failed: {id}");
            }
        }
        if let Some(c) = &self.classification {
            write_classification(&mut s, c);
        }
        s
    }
}

fn write_classification(s: &mut String, c: &Classification) {
    let f = &c.flatness;
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "pseudo-projective flatness: {} (max |P| = {:.3e}, relative {:.3e}, threshold {:.1e})",
        if f.flat { "FLAT" } else { "NOT FLAT" },
        f.max_norm,
        f.relative_max,
        f.threshold
    );
    if let (false, Some(w)) = (f.flat, &f.argmax_point) {
        let _ = writeln!(s, "witness point {w:?}");
        for (name, r) in &c.witness_violations {
            let _ = writeln!(s, "  necessary condition {name} violated: {r:.3e}");
        }
    }
    let d = &c.witness_diagnostics;
    let _ = writeln!(s, "branch {:?}; at witness: lambda1 = {:.6}, lambda2 = {:.6}, mu = {:?}", d.branch, d.lambda1, d.lambda2, d.mu);
    for (name, r) in d.necessary_residuals() {
        let _ = writeln!(s, "  {name:<18} {r:.3e}");
    }
    for fs in c.factors.iter().chain(std::iter::once(&c.einstein)) {
        let _ = writeln!(
            s,
            "einstein {:<10} dim {} residual {:.3e} -> {}",
            fs.name,
            fs.dim,
            fs.einstein_residual,
            if fs.einstein { "einstein" } else { "not einstein" }
        );
    }
    let k = &c.conservative;
    let _ = writeln!(
        s,
        "conservative check: max |div P| = {:.3e}, scalar variation {:.3e}, codazzi {:.3e}, hypotheses {}, codazzi holds {:?}",
        k.max_div, k.scalar_variation, k.max_codazzi, k.hypotheses_hold, k.codazzi_holds
    );
    if let Some(g) = &c.sgrw {
        let _ = writeln!(s, "sgrw necessary conditions ({})", g.nabla_h_f_convention);
        for (name, r) in &g.max_residuals {
            let _ = writeln!(s, "  {name:<18} {r:.3e}");
        }
        if let Some(line) = &g.corollary {
            let _ = writeln!(s, "{line}");
        }
    }
    if let Some(t) = &c.ssst {
        let _ = writeln!(s, "ssst necessary conditions");
        for (name, r) in &t.max_residuals {
            let _ = writeln!(s, "  {name:<18} {r:.3e}");
        }
    }
    if let Some(p) = &c.probe {
        let _ = writeln!(
            s,
            "probe: gqe {:?}, psi-soliton {:?}, m-QE transform gap {:?}, conformal {:?}",
            p.gqe, p.psi_soliton, p.mqe_transform_gap, p.conformal
        );
    }
}

/// Long-format CSV: one row per `(sample, field)`.
pub fn to_csv(points: &[ChartPoint], fields: &[[f64; 6]]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample", "point", "field", "value"])?;
    for (k, (p, row)) in points.iter().zip(fields).enumerate() {
        let point = p.values.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(";");
        for (name, v) in CSV_FIELDS.iter().zip(row) {
            w.write_record([k.to_string(), point.clone(), name.to_string(), format!("{v:.17e}")])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
