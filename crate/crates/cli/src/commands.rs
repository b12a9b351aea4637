//! `verify` and `classify` computations behind the command line.

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use seqwarp::identities::{verify_identities, IdentitySuite};
use seqwarp::presets::{grw_flatness_conditions, ssst_flatness_check, verify_sgrw, verify_ssst};
use seqwarp::pseudo_projective::{
    conservative_check, divergence_sample, flatness_diagnostics, flatness_scan, pp_norms, ConservativeCheck,
    FlatnessDiagnostics, FlatnessScan,
};
use seqwarp::structure::{
    conformal_soliton_field, einstein_residual, gqe_residual, mqe_transform_gap, psi_soliton_residual, LambdaSpec,
    ScalarSpec, StructureProbe,
};
use seqwarp::{
    verify_lemmas, verify_pp, ChartPoint, ClosedFormContext, FormulaRecord, ModelKind, PseudoProjectiveParams,
    SequentialModel, Tolerance, VerifyOptions,
};
use seqwarp_expr::{parse_expression, SymbolicField};

use crate::model_file::ProbeFile;

/// Divergence threshold of the conservative-tensor check.
pub const DIVERGENCE_TOL: f64 = 1e-8;
/// Codazzi threshold asserted when the conservative hypotheses hold.
pub const CODAZZI_TOL: f64 = 1e-7;
/// `|k2|` below which the affine-warp corollary line reports `M2` flat.
pub const K2_TOL: f64 = 1e-10;

/// Every record in scope for `model`, in a fixed order.
pub fn run_verify(model: &SequentialModel, points: &[ChartPoint], tol: Tolerance, fault: Option<&str>) -> Result<Vec<FormulaRecord>> {
    let opts = VerifyOptions {
        tol,
        fault: fault.map(str::to_string),
        probe: None,
    };
    let mut recs = verify_lemmas(model, points, &opts).context("lemma sweep")?;
    recs.extend(verify_pp(model, points, &opts).context("pseudo-projective sweep")?);
    recs.extend(verify_identities(&IdentitySuite::for_model(model), points, fault).context("identity sweep")?);
    match model.kind() {
        ModelKind::Sgrw => recs.extend(verify_sgrw(model, points, &opts).context("sgrw sweep")?),
        ModelKind::Ssst => recs.extend(verify_ssst(model, points, &opts).context("ssst sweep")?),
        ModelKind::Generic => {}
    }
    if let Some(id) = fault {
        if !recs.iter().any(|r| r.id == id) {
            bail!("--inject-fault: no record named `{id}`");
        }
    }
    Ok(recs)
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of<I: IntoIterator<Item = f64>>(values: I) -> Option<Range> {
        let mut it = values.into_iter().filter(|v| v.is_finite());
        let first = it.next()?;
        Some(it.fold(Range { min: first, max: first }, |r, v| Range {
            min: r.min.min(v),
            max: r.max.max(v),
        }))
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FactorStructure {
    pub name: String,
    pub dim: usize,
    pub einstein_residual: f64,
    pub lambda_fit: Option<Range>,
    /// Pointwise residual below the flatness threshold and `λ` constant across samples.
    pub einstein: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GrwSummary {
    /// Maximum of each necessary-condition residual over the samples.
    pub max_residuals: Vec<(String, f64)>,
    pub k2: Option<Range>,
    pub k2_displayed: Option<Range>,
    pub b_hessian_displayed: f64,
    pub c_conformal_displayed: f64,
    pub c_conformal_fit: f64,
    /// Present when `|k2| < K2_TOL` at every sample with the displayed `k2`.
    pub corollary: Option<String>,
    pub nabla_h_f_convention: &'static str,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SsstSummary {
    pub max_residuals: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ProbeSummary {
    pub gqe: Option<f64>,
    pub psi_soliton: Option<f64>,
    pub mqe_transform_gap: Option<f64>,
    pub conformal: Option<f64>,
    pub conformal_constant_field: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Classification {
    pub params: PseudoProjectiveParams,
    pub flatness: FlatnessScan,
    /// Diagnostics at the witness point, or at the first sample when flat.
    pub witness_diagnostics: FlatnessDiagnostics,
    pub witness_violations: Vec<(String, f64)>,
    pub lambda1: Option<Range>,
    pub lambda2: Option<Range>,
    pub mu: Option<Range>,
    pub factors: Vec<FactorStructure>,
    pub einstein: FactorStructure,
    pub conservative: ConservativeCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sgrw: Option<GrwSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssst: Option<SsstSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSummary>,
}

fn einstein_of(name: &str, chart: &seqwarp::Chart, points: &[ChartPoint], threshold: f64) -> Result<FactorStructure> {
    let mut worst: f64 = 0.0;
    let mut lambdas = Vec::with_capacity(points.len());
    for p in points {
        let fit = einstein_residual(&chart.curvature(p)?);
        worst = worst.max(fit.residual);
        lambdas.push(fit.lambda_fit);
    }
    let lambda_fit = Range::of(lambdas);
    let constant = lambda_fit.is_none_or(|r| r.max - r.min < threshold);
    Ok(FactorStructure {
        name: name.to_string(),
        dim: chart.dim(),
        einstein_residual: worst,
        lambda_fit,
        einstein: worst < threshold && constant,
    })
}

fn fold_max(acc: &mut Vec<(String, f64)>, items: Vec<(&'static str, f64)>) {
    if acc.is_empty() {
        acc.extend(items.iter().map(|(n, _)| (n.to_string(), 0.0)));
    }
    for ((_, a), (_, v)) in acc.iter_mut().zip(items) {
        *a = a.max(v);
    }
}

fn probe_field(model: &SequentialModel, src: &str, what: &str) -> Result<SymbolicField> {
    let coords: Vec<&str> = model.assembled().coords().iter().map(String::as_str).collect();
    let e = parse_expression(src, &coords).map_err(|e| anyhow!("probe.{what}: `{src}`: {e}"))?;
    Ok(SymbolicField::new(e, coords.len()))
}

fn scalar_spec(model: &SequentialModel, v: &toml::Value, what: &str) -> Result<ScalarSpec> {
    match v {
        toml::Value::Float(x) => Ok(ScalarSpec::Value(*x)),
        toml::Value::Integer(x) => Ok(ScalarSpec::Value(*x as f64)),
        toml::Value::String(s) => Ok(ScalarSpec::Field(probe_field(model, s, what)?)),
        _ => bail!("probe.{what}: expected a number or an expression"),
    }
}

fn structure_probe(model: &SequentialModel, file: &ProbeFile, phi: &str) -> Result<StructureProbe> {
    let mut probe = StructureProbe::new(probe_field(model, phi, "phi")?);
    match (file.m, file.catino_coeff) {
        (Some(_), Some(_)) => bail!("probe: give either m or catino_coeff, not both"),
        (Some(m), None) => probe = probe.with_m(m).map_err(|e| anyhow!("probe.m: {e}"))?,
        (None, Some(c)) => probe = probe.with_catino_coeff(c),
        (None, None) => {}
    }
    if let Some(psi) = &file.psi {
        probe = probe.with_psi(scalar_spec(model, psi, "psi")?);
    }
    if let Some(l) = &file.lambda {
        let spec = match l {
            toml::Value::String(s) if s == "fit" => LambdaSpec::Fit,
            other => match scalar_spec(model, other, "lambda")? {
                ScalarSpec::Value(v) => LambdaSpec::Value(v),
                ScalarSpec::Field(f) => LambdaSpec::Field(f),
            },
        };
        probe = probe.with_lambda(spec);
    }
    Ok(probe)
}

fn run_probe(model: &SequentialModel, points: &[ChartPoint], file: &ProbeFile) -> Result<ProbeSummary> {
    let chart = model.assembled();
    let mut out = ProbeSummary {
        gqe: None,
        psi_soliton: None,
        mqe_transform_gap: None,
        conformal: None,
        conformal_constant_field: false,
    };
    let structure = match &file.phi {
        Some(phi) => Some(structure_probe(model, file, phi)?),
        None => None,
    };
    let conformal = match &file.conformal {
        Some(src) => Some(probe_field(model, src, "conformal")?),
        None => None,
    };
    for p in points {
        let b = chart.curvature(p)?;
        if let Some(probe) = &structure {
            let g = gqe_residual(chart, &b, probe)?;
            out.gqe = Some(out.gqe.unwrap_or(0.0).max(g.residual));
            let s = psi_soliton_residual(chart, &b, probe)?;
            out.psi_soliton = Some(out.psi_soliton.unwrap_or(0.0).max(s.residual));
            if let Some(m) = probe.m_param {
                let (gap, _) = mqe_transform_gap(chart, &b, &probe.phi, m as f64, g.lambda)?;
                out.mqe_transform_gap = Some(out.mqe_transform_gap.unwrap_or(0.0).max(gap));
            }
        }
        if let Some(f) = &conformal {
            let c = conformal_soliton_field(chart, &b, f)?;
            out.conformal = Some(out.conformal.unwrap_or(0.0).max(c.fit.residual));
            out.conformal_constant_field |= c.constant_field;
        }
    }
    Ok(out)
}

pub fn run_classify(
    model: &SequentialModel,
    points: &[ChartPoint],
    threshold: f64,
    probe: Option<&ProbeFile>,
) -> Result<Classification> {
    let params = model.params();
    let flatness = flatness_scan(model, points, params, threshold)?;
    let witness = match &flatness.argmax_point {
        Some(w) if !flatness.flat => ChartPoint::new(w.clone()),
        _ => points[0].clone(),
    };
    let witness_diagnostics = flatness_diagnostics(&ClosedFormContext::new(model, &witness)?, params);
    let witness_violations = witness_diagnostics
        .necessary_residuals()
        .into_iter()
        .filter(|(_, r)| *r > threshold)
        .map(|(n, r)| (n.to_string(), r))
        .collect();

    let mut l1 = Vec::new();
    let mut l2 = Vec::new();
    let mut mu = Vec::new();
    let mut grw_acc = None::<(Vec<(String, f64)>, Vec<f64>, Vec<f64>, f64, f64, f64)>;
    let mut ssst_acc = Vec::new();
    for p in points {
        let ctx = ClosedFormContext::new(model, p)?;
        let d = flatness_diagnostics(&ctx, params);
        l1.push(d.lambda1);
        l2.push(d.lambda2);
        if let Some(m) = d.mu {
            mu.push(m);
        }
        match model.kind() {
            ModelKind::Sgrw => {
                let c = grw_flatness_conditions(model, &ctx)?;
                let acc = grw_acc.get_or_insert_with(Default::default);
                fold_max(&mut acc.0, c.necessary_residuals());
                acc.1.push(c.k2);
                acc.2.push(c.k2_displayed);
                acc.3 = acc.3.max(c.b_hessian_displayed);
                acc.4 = acc.4.max(c.c_conformal_displayed);
                acc.5 = acc.5.max(c.c_conformal_fit);
            }
            ModelKind::Ssst => fold_max(&mut ssst_acc, ssst_flatness_check(model, &ctx)?.necessary_residuals()),
            ModelKind::Generic => {}
        }
    }

    let sgrw = grw_acc.map(|(max_residuals, k2, k2d, b, c, cfit)| {
        let k2_displayed = Range::of(k2d.iter().copied());
        let corollary = k2_displayed
            .filter(|r| r.min.abs().max(r.max.abs()) < K2_TOL)
            .map(|r| {
                format!(
                    "k2 = -(f f'' + f'^2) ~ 0 (|k2| <= {:.1e}) at every sample: f^2 is affine in t, so M2 must be flat",
                    r.min.abs().max(r.max.abs())
                )
            });
        GrwSummary {
            max_residuals,
            k2: Range::of(k2),
            k2_displayed,
            b_hessian_displayed: b,
            c_conformal_displayed: c,
            c_conformal_fit: cfit,
            corollary,
            nabla_h_f_convention: "nabla h(f) = g1(grad_1 h, grad_1 f) = -f'(t) dh/dt",
        }
    });

    let factors = (0..3)
        .map(|i| {
            let chart = model.factor(i);
            let local: Vec<ChartPoint> = points.iter().map(|p| model.split(p)[i].clone()).collect();
            einstein_of(chart.name(), chart, &local, threshold)
        })
        .collect::<Result<Vec<_>>>()?;
    let einstein = einstein_of("assembled", model.assembled(), points, threshold)?;

    let samples = points
        .iter()
        .map(|p| divergence_sample(model, p, params))
        .collect::<seqwarp::Result<Vec<_>>>()?;
    let conservative = conservative_check(&samples, params, DIVERGENCE_TOL, CODAZZI_TOL);
    let probe = probe.map(|f| run_probe(model, points, f)).transpose()?;

    Ok(Classification {
        params,
        flatness,
        witness_diagnostics,
        witness_violations,
        lambda1: Range::of(l1),
        lambda2: Range::of(l2),
        mu: Range::of(mu),
        factors,
        einstein,
        conservative,
        sgrw,
        ssst: model.kind().eq(&ModelKind::Ssst).then_some(SsstSummary { max_residuals: ssst_acc }),
        probe,
    })
}

/// Per-sample fields written to the CSV report.
pub const CSV_FIELDS: [&str; 6] = ["pp_norm", "pp_relative", "div_pp", "codazzi", "scalar", "diagnostics_max"];

pub fn residual_fields(model: &SequentialModel, points: &[ChartPoint]) -> Result<Vec<[f64; 6]>> {
    let params = model.params();
    points
        .iter()
        .map(|p| {
            let (norm, rel) = pp_norms(&model.assembled().curvature(p)?, params)?;
            let d = divergence_sample(model, p, params)?;
            let diag = flatness_diagnostics(&ClosedFormContext::new(model, p)?, params);
            Ok([norm, rel, d.div_norm, d.codazzi, d.scalar, diag.max_residual()])
        })
        .collect()
}
