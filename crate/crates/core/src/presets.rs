//! Sequential generalized Robertson–Walker (`(I ×_f M2) ×_h M3`, time first)
//! and sequential standard static (`(M1 ×_f M2) ×_h I`, time last) spacetimes.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::chart::{Chart, ChartPoint};
use crate::compare::{FormulaRecord, Tolerance};
use crate::curvature::max_abs;
use crate::error::{GeometryError, Result};
use crate::pseudo_projective::{
    flatness_diagnostics, pp_closed_form, pp_closed_form_with, pp_tensor, PPBlocks, PseudoProjectiveParams,
};
use crate::structure::{conformal_soliton_residual, einstein_residual};
use crate::sweep::{run_sweep, SpecRegistry};
use crate::warped::{factor_riemann, tensor_wedge, triples, wedge, ClosedFormContext, ModelKind, SequentialModel, VerifyOptions};

/// Time interval with metric `−dt²`.
pub fn time_factor(coord: &str, domain: (f64, f64)) -> Result<Chart> {
    Chart::parse("I", &[coord], &[vec!["-1"]], &[domain])?.with_signature(vec![-1])
}

#[derive(Debug, Clone)]
pub struct SgrwSpec {
    pub time_coord: String,
    pub time_domain: (f64, f64),
    /// `f(t)`.
    pub f: String,
    pub m2: Chart,
    pub m3: Chart,
    /// `h(t, x2)`.
    pub h: String,
    pub params: PseudoProjectiveParams,
}

pub fn build_sgrw(spec: SgrwSpec) -> Result<SequentialModel> {
    let t = time_factor(&spec.time_coord, spec.time_domain)?;
    Ok(SequentialModel::from_sources([t, spec.m2, spec.m3], &spec.f, &spec.h, spec.params)?.with_kind(ModelKind::Sgrw))
}

#[derive(Debug, Clone)]
pub struct SsstSpec {
    pub m1: Chart,
    pub m2: Chart,
    pub f: String,
    pub h: String,
    pub time_coord: String,
    pub time_domain: (f64, f64),
    pub params: PseudoProjectiveParams,
}

pub fn build_ssst(spec: SsstSpec) -> Result<SequentialModel> {
    let t = time_factor(&spec.time_coord, spec.time_domain)?;
    Ok(SequentialModel::from_sources([spec.m1, spec.m2, t], &spec.f, &spec.h, spec.params)?.with_kind(ModelKind::Ssst))
}

/// Flat Minkowski space `E^{1,3}` as an SGRW model with `f = h = 1`.
pub fn minkowski(params: PseudoProjectiveParams) -> Result<SequentialModel> {
    build_sgrw(SgrwSpec {
        time_coord: "t".into(),
        time_domain: (-1.0, 1.0),
        f: "1".into(),
        m2: Chart::euclidean("E2", &["x", "y"], 1.0),
        m3: Chart::euclidean("E1", &["z"], 1.0),
        h: "1".into(),
        params,
    })
}

/// Names and one-line descriptions of the built-in presets.
pub const PRESETS: [(&str, &str); 2] = [
    ("sgrw", "(I x_f M2) x_h M3 with metric -dt^2 + f(t)^2 g2 + h(t,x2)^2 g3"),
    ("ssst", "(M1 x_f M2) x_h I with metric g1 + f^2 g2 - h(x1,x2)^2 dt^2"),
];

fn require(model: &SequentialModel, kind: ModelKind) -> Result<()> {
    if model.kind() != kind {
        return Err(GeometryError::Invalid(format!(
            "expected a {kind:?} model, got {:?}",
            model.kind()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// SGRW

/// Time derivatives and `M2` data of an SGRW model at one point, obtained
/// without the generic base machinery.
#[derive(Debug, Clone)]
pub struct SgrwJet {
    pub m: [usize; 2],
    pub f: f64,
    pub fdot: f64,
    pub fddot: f64,
    pub h: f64,
    /// `∂h/∂t`.
    pub ht: f64,
    /// `∂²h/∂t²`.
    pub htt: f64,
    /// `∂t ∂y h − (ḟ/f) ∂y h`, the mixed base Hessian.
    pub hess_ty: Array1<f64>,
    pub dh2: Array1<f64>,
    pub hess2_h: Array2<f64>,
    pub delta2_h: f64,
    /// `g1(grad h, grad f) = −ḟ ∂h/∂t`.
    pub nabla_h_f: f64,
    pub f_sharp: f64,
    /// `H^h` on `M2` directions: `f ∇h(f) g2 + H2^h`.
    pub hess_h22: Array2<f64>,
    pub delta_h: f64,
    pub gradh_norm_sq: f64,
    pub h_sharp: f64,
    pub ric22: Array2<f64>,
    /// `Ric(∂t, ∂y)`.
    pub ric12: Array1<f64>,
    pub ric33: Array2<f64>,
    pub scalar: f64,
}

impl SgrwJet {
    pub fn new(model: &SequentialModel, ctx: &ClosedFormContext) -> Result<Self> {
        require(model, ModelKind::Sgrw)?;
        let [_, m2, m3] = ctx.dims;
        let (m2f, m3f) = (m2 as f64, m3 as f64);
        let p = &ctx.point;
        let ft = model
            .f()
            .evaluate_with_derivatives(&p.values[..1], 2)
            .map_err(|e| GeometryError::field("warping function f", e))?;
        let ht = model
            .h()
            .evaluate_with_derivatives(&p.values[..1 + m2], 2)
            .map_err(|e| GeometryError::field("warping function h", e))?;
        let (f, fdot, fddot) = (ft.value(), ft.d1(0), ft.d2(0, 0));
        let h = ht.value();
        let b2 = &ctx.factor[1];
        let b3 = &ctx.factor[2];
        let dh2 = Array1::from_shape_fn(m2, |j| ht.d1(1 + j));
        let hess_ty = Array1::from_shape_fn(m2, |j| ht.d2(0, 1 + j) - fdot / f * dh2[j]);
        let hess2_h = Array2::from_shape_fn((m2, m2), |(i, j)| {
            ht.d2(1 + i, 1 + j) - (0..m2).map(|k| b2.christoffel[[k, i, j]] * dh2[k]).sum::<f64>()
        });
        let delta2_h = (&b2.inverse * &hess2_h).sum();
        let nabla_h_f = -fdot * ht.d1(0);
        let f_sharp = -f * fddot - (m2f - 1.0) * fdot * fdot;
        let hess_h22 = &(&b2.metric * (f * nabla_h_f)) + &hess2_h;
        let htt = ht.d2(0, 0);
        let delta_h = -htt + (m2f * f * nabla_h_f + delta2_h) / (f * f);
        let gradh_norm_sq = -ht.d1(0).powi(2) + b2.inverse.dot(&dh2).dot(&dh2) / (f * f);
        let h_sharp = h * delta_h + (m3f - 1.0) * gradh_norm_sq;
        let ric22 = &b2.ricci - &(&b2.metric * f_sharp) - &(&hess_h22 * (m3f / h));
        let ric12 = hess_ty.mapv(|v| -m3f / h * v);
        let ric33 = &b3.ricci - &(&b3.metric * h_sharp);
        let scalar = b2.scalar / (f * f) + b3.scalar / (h * h) + 2.0 * m2f * fddot / f
            - 2.0 * m3f / h * delta_h
            + m2f * (m2f - 1.0) * fdot * fdot / (f * f)
            - m3f * (m3f - 1.0) / (h * h) * gradh_norm_sq;
        Ok(SgrwJet {
            m: [m2, m3],
            f,
            fdot,
            fddot,
            h,
            ht: ht.d1(0),
            htt,
            hess_ty,
            dh2,
            hess2_h,
            delta2_h,
            nabla_h_f,
            f_sharp,
            hess_h22,
            delta_h,
            gradh_norm_sq,
            h_sharp,
            ric22,
            ric12,
            ric33,
            scalar,
        })
    }

    /// `∇̄_{∂a} grad h` for `a = 0` (time) or an `M2` coordinate.
    fn nabla_grad_h(&self, ctx: &ClosedFormContext, a: usize) -> Vec<f64> {
        let m2 = self.m[0];
        let ginv2 = &ctx.factor[1].inverse;
        let mut v = ctx.zeros();
        let column: Array1<f64> = if a == 0 {
            v[0] = -self.htt;
            self.hess_ty.clone()
        } else {
            v[0] = -self.hess_ty[a - 1];
            self.hess_h22.column(a - 1).to_owned()
        };
        let up = ginv2.dot(&column) / (self.f * self.f);
        for j in 0..m2 {
            v[1 + j] = up[j];
        }
        v
    }
}

/// Map from SGRW case number to the corresponding general block case.
pub const SGRW_TO_GENERAL: [usize; 8] = [2, 3, 4, 5, 8, 9, 10, 11];

pub const SGRW_CASES: [(&str, &[&str]); 8] = [
    (
        "P(X2,Y2)Z2 = alpha R2 + alpha fdot^2 [g2 wedge] + beta[Ric wedge] - kappa f^2 [g2(Y2,Z2)X2 - g1(X2,Z2)Y2]",
        &["g2(X2,Z2) in the kappa term", "g1(X2,Z2) read as zero"],
    ),
    (
        "P(dt,Y2)dt = -alpha (fddot/f) Y2 - beta[m2 fddot/f + (m3/h) h_tt] Y2 - kappa Y2",
        &["+alpha fddot/f + beta[...] - kappa, with beta Ric(dt,Y2) dt", "as printed"],
    ),
    (
        "P(dt,Y2)Z2 = -alpha f fddot g2(Y2,Z2) dt - kappa f^2 g2(Y2,Z2) dt + beta[Ric2 - f# g2 - (m3/h) H^h](Y2,Z2) dt",
        &["+alpha f fddot, with -beta Ric(dt,Z2) Y2", "as printed"],
    ),
    (
        "P(dt,Y3)dt = -(alpha/h) h_tt Y3 - beta[m2 fddot/f - (m3/h) h_tt] Y3 - kappa Y3",
        &[
            "+(alpha/h) h_tt + beta[m2 fddot/f + (m3/h) h_tt] - kappa",
            "+(alpha/h) h_tt + beta[m2 fddot/f - (m3/h) h_tt] - kappa",
            "as printed",
            "as printed with +(m3/h) h_tt",
        ],
    ),
    (
        "P(X2,Y3)Z2 = (alpha/h) H1^f(X2,Z2)Y3 + kappa f^2 g2(X2,Z2)Y3 - beta[Ric2 - f# g2 - (m3/h) H^h](X2,Z2)Y3",
        &["H^h(X2,Z2) on the base", "H2^h(X2,Z2)", "f |grad_1 f|^2 g2(X2,Z2)"],
    ),
    (
        "P(dt,Y3)Z3 = -alpha h g3(Y3,Z3) nabla_dt grad h - kappa h^2 g3(Y3,Z3) dt + beta[Ric3 - h# g3](Y3,Z3) dt",
        &[],
    ),
    (
        "P(X2,Y3)Z3 = -alpha h g3(Y3,Z3) nabla_{X2} grad h - kappa h^2 g3(Y3,Z3)X2 + beta[Ric3 - h# g3](Y3,Z3)X2",
        &[],
    ),
    (
        "P(X3,Y3)Z3 = alpha R3 - kappa h^2 [g3 wedge] + beta[(Ric3 - h# g3) wedge]",
        &["with -alpha |grad h|^2 [g3 wedge]", "as printed"],
    ),
];

/// Readings of the SGRW component formula `case` (1..=8) at `P(∂a, ∂b)∂c`.
pub fn sgrw_pp_components(
    ctx: &ClosedFormContext,
    jet: &SgrwJet,
    params: PseudoProjectiveParams,
    case: usize,
    a: usize,
    b: usize,
    c: usize,
) -> Result<Vec<Vec<f64>>> {
    let (al, be) = (params.alpha, params.beta);
    let kappa = params.kappa(jet.scalar, ctx.n);
    let [m2, m3] = jet.m;
    let (m2f, m3f) = (m2 as f64, m3 as f64);
    let (_, x) = ctx.block_of(a);
    let (_, y) = ctx.block_of(b);
    let (_, z) = ctx.block_of(c);
    let (f, h) = (jet.f, jet.h);
    let bracket = m2f * jet.fddot / f + m3f * jet.htt / h;
    let add = |v: &mut Vec<f64>, c: f64, w: &[f64]| v.iter_mut().zip(w).for_each(|(x, y)| *x += c * y);
    let out = match case {
        1 => {
            let mut base = factor_riemann(ctx, 1, x, y, z);
            base.iter_mut().for_each(|e| *e *= al);
            add(&mut base, al * jet.fdot * jet.fdot, &wedge(ctx, 1, x, y, z, 1.0));
            add(&mut base, be, &tensor_wedge(ctx, 1, &jet.ric22, x, y, z));
            let mut adopted = base.clone();
            add(&mut adopted, -kappa * f * f, &wedge(ctx, 1, x, y, z, 1.0));
            let mut literal = base;
            literal[a] -= kappa * f * f * ctx.g(1, y, z);
            vec![adopted, literal]
        }
        2 => {
            let mut adopted = ctx.unit(b, al * jet.fddot / f + be * bracket - kappa);
            adopted[0] += be * jet.ric12[y];
            let literal = ctx.unit(b, -al * jet.fddot / f - be * bracket - kappa);
            vec![adopted, literal]
        }
        3 => {
            let g = ctx.g(1, y, z);
            let common = be * jet.ric22[[y, z]] - kappa * f * f * g;
            let mut adopted = ctx.unit(0, al * f * jet.fddot * g + common);
            adopted[b] -= be * jet.ric12[z];
            let literal = ctx.unit(0, -al * f * jet.fddot * g + common);
            vec![adopted, literal]
        }
        4 => {
            let r = al / h * jet.htt;
            let plus = m2f * jet.fddot / f + m3f * jet.htt / h;
            let minus = m2f * jet.fddot / f - m3f * jet.htt / h;
            vec![
                ctx.unit(b, r + be * plus - kappa),
                ctx.unit(b, r + be * minus - kappa),
                ctx.unit(b, -r - be * minus - kappa),
                ctx.unit(b, -r - be * plus - kappa),
            ]
        }
        5 => {
            let rest = kappa * f * f * ctx.g(1, x, z) - be * jet.ric22[[x, z]];
            vec![
                ctx.unit(b, al / h * jet.hess_h22[[x, z]] + rest),
                ctx.unit(b, al / h * jet.hess2_h[[x, z]] + rest),
                ctx.unit(b, -al / h * f * jet.fdot * jet.fdot * ctx.g(1, x, z) + rest),
            ]
        }
        6 | 7 => {
            let g = ctx.g(2, y, z);
            let mut v = jet.nabla_grad_h(ctx, a);
            v.iter_mut().for_each(|e| *e *= -al * h * g);
            v[a] += -kappa * h * h * g + be * jet.ric33[[y, z]];
            vec![v]
        }
        8 => {
            let mut lit = factor_riemann(ctx, 2, x, y, z);
            lit.iter_mut().for_each(|e| *e *= al);
            add(&mut lit, -kappa * h * h, &wedge(ctx, 2, x, y, z, 1.0));
            add(&mut lit, be, &tensor_wedge(ctx, 2, &jet.ric33, x, y, z));
            let mut adopted = lit.clone();
            add(&mut adopted, -al * jet.gradh_norm_sq, &wedge(ctx, 2, x, y, z, 1.0));
            vec![adopted, lit]
        }
        _ => {
            return Err(GeometryError::InvalidCase {
                formula: "SGRW pseudo-projective component",
                case,
            })
        }
    };
    Ok(out)
}

/// Block patterns of the SGRW cases (time block first).
const SGRW_PATTERNS: [[usize; 3]; 8] = [[1, 1, 1], [0, 1, 0], [0, 1, 1], [0, 2, 0], [1, 2, 1], [0, 2, 2], [1, 2, 2], [2, 2, 2]];

/// SGRW component formulas against the oracle and against the general block
/// evaluator.
pub fn verify_sgrw(model: &SequentialModel, points: &[ChartPoint], opts: &VerifyOptions) -> Result<Vec<FormulaRecord>> {
    require(model, ModelKind::Sgrw)?;
    let params = model.params();
    let mut reg = SpecRegistry::new();
    let oracle_ids: Vec<usize> = SGRW_CASES
        .iter()
        .enumerate()
        .map(|(k, (anchor, variants))| reg.add(&format!("sgrw.case.{}", k + 1), anchor, variants, opts.tol))
        .collect();
    reg.note(oracle_ids[3], "oracle adjudicates the sign of the (m3/h) h_tt term in the beta bracket");
    reg.note(oracle_ids[1], "overall sign of the alpha and beta terms follows the curvature convention R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]");
    let spec_ids: Vec<usize> = (0..8)
        .map(|k| {
            reg.add(
                &format!("sgrw.specialization.{}", k + 1),
                &format!("time-first specialization equals general block case {}", SGRW_TO_GENERAL[k]),
                &[],
                Tolerance::CONSISTENCY,
            )
        })
        .collect();
    let d = model.dims();
    run_sweep(&reg, points, opts.fault.as_deref(), |p, sink| {
        let oracle = pp_tensor(&model.assembled().curvature(p)?, params)?;
        let ctx = ClosedFormContext::new(model, p)?;
        let jet = SgrwJet::new(model, &ctx)?;
        for (k, pattern) in SGRW_PATTERNS.iter().enumerate() {
            for [a, b, c] in triples(d, *pattern) {
                let readings = sgrw_pp_components(&ctx, &jet, params, k + 1, a, b, c)?;
                let general = pp_closed_form(&ctx, params, SGRW_TO_GENERAL[k], a, b, c)?;
                sink.compare(spec_ids[k], &general[0], vec![readings[0].clone()]);
                sink.compare(oracle_ids[k], &oracle.vector(a, b, c), readings);
            }
        }
        Ok(())
    })
}

/// Residuals of the necessary conditions for a pseudo-projectively flat SGRW model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrwConditions {
    /// `f̈/f − (1/h) ∂²h/∂t²`.
    pub a_time: f64,
    /// `‖(1/h) H^h + f f̈ g2‖` on `M2`.
    pub b_hessian: f64,
    /// `b` with `+ f f̈` replaced by `− f f̈`.
    pub b_hessian_displayed: f64,
    /// `‖H2^h − c g2‖` with `c = −f(h f̈ + ∇h(f))`.
    pub c_conformal: f64,
    /// `c` with `c = h f̈/f − ∇h(f)/f`.
    pub c_conformal_displayed: f64,
    /// `‖H2^h − (Δ2h/m2) g2‖`.
    pub c_conformal_fit: f64,
    /// `Δ2h − m2 c`.
    pub d_laplacian: f64,
    pub d_laplacian_displayed: f64,
    /// `k2 = f f̈ − ḟ²`.
    pub k2: f64,
    /// `k2 = −(f f̈ + ḟ²)`, which vanishes when `f²` is affine in `t`.
    pub k2_displayed: f64,
    /// `‖R2 − k2 [g2 wedge]‖`.
    pub e_m2_curvature: f64,
    pub e_m2_curvature_displayed: f64,
    pub m2_einstein: f64,
    pub m3_einstein: f64,
}

impl GrwConditions {
    pub fn necessary_residuals(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("a_time", self.a_time.abs()),
            ("b_hessian", self.b_hessian),
            ("c_conformal", self.c_conformal),
            ("d_laplacian", self.d_laplacian.abs()),
            ("e_m2_curvature", self.e_m2_curvature),
            ("m2_einstein", self.m2_einstein),
            ("m3_einstein", self.m3_einstein),
        ]
    }
}

pub fn grw_flatness_conditions(model: &SequentialModel, ctx: &ClosedFormContext) -> Result<GrwConditions> {
    let jet = SgrwJet::new(model, ctx)?;
    let [m2, _] = jet.m;
    let b2 = &ctx.factor[1];
    let (f, h) = (jet.f, jet.h);
    let g2 = &b2.metric;
    let hh = &jet.hess_h22 / h;
    let cf = f * jet.fddot;
    let c = -f * (h * jet.fddot + jet.nabla_h_f);
    let c_disp = h * jet.fddot / f - jet.nabla_h_f / f;
    let k2 = f * jet.fddot - jet.fdot * jet.fdot;
    let k2_disp = -(f * jet.fddot + jet.fdot * jet.fdot);
    let curvature_gap = |k: f64| {
        let mut worst: f64 = 0.0;
        for x in 0..m2 {
            for y in 0..m2 {
                for z in 0..m2 {
                    let r = factor_riemann(ctx, 1, x, y, z);
                    let w = wedge(ctx, 1, x, y, z, k);
                    worst = worst.max(r.iter().zip(&w).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())));
                }
            }
        }
        worst
    };
    Ok(GrwConditions {
        a_time: jet.fddot / f - jet.htt / h,
        b_hessian: max_abs((&hh + &(g2 * cf)).iter()),
        b_hessian_displayed: max_abs((&hh - &(g2 * cf)).iter()),
        c_conformal: max_abs((&jet.hess2_h - &(g2 * c)).iter()),
        c_conformal_displayed: max_abs((&jet.hess2_h - &(g2 * c_disp)).iter()),
        c_conformal_fit: conformal_soliton_residual(&jet.hess2_h, g2, &b2.inverse).residual,
        d_laplacian: jet.delta2_h - m2 as f64 * c,
        d_laplacian_displayed: jet.delta2_h - m2 as f64 * c_disp,
        k2,
        k2_displayed: k2_disp,
        e_m2_curvature: curvature_gap(k2),
        e_m2_curvature_displayed: curvature_gap(k2_disp),
        m2_einstein: einstein_residual(b2).residual,
        m3_einstein: einstein_residual(&ctx.factor[2]).residual,
    })
}

// ---------------------------------------------------------------------------
// SSST

/// Ricci blocks and scalar curvature of an SSST model with the time
/// factor substituted (`R3 = 0`, `g3 = −1`, `m3 = 1`).
#[derive(Debug, Clone)]
pub struct SsstBlocks {
    pub ric11: Array2<f64>,
    pub ric22: Array2<f64>,
    pub ric12: Array2<f64>,
    /// `Ric(∂t, ∂t) = h♯ = h Δh`.
    pub ric33: Array2<f64>,
    pub h_sharp: f64,
    pub scalar: f64,
}

impl SsstBlocks {
    pub fn new(model: &SequentialModel, ctx: &ClosedFormContext) -> Result<Self> {
        require(model, ModelKind::Ssst)?;
        let [m1, m2, m3] = ctx.dims;
        if m3 != 1 {
            return Err(GeometryError::Invalid("the static factor must be one-dimensional".into()));
        }
        let m2f = m2 as f64;
        let [b1, b2, _] = &ctx.factor;
        let (f, h) = (ctx.f, ctx.h);
        let ric11 = &b1.ricci - &(&ctx.hess1_f * (m2f / f)) - &(&ctx.hess1_h * (1.0 / h));
        let hh22 = ctx.hess_h.slice(s![m1.., m1..]).to_owned();
        let ric22 = &b2.ricci - &(&b2.metric * ctx.aux.f_sharp) - &(&hh22 / h);
        let ric12 = ctx.hess_h.slice(s![..m1, m1..]).mapv(|v| -v / h);
        let h_sharp = h * ctx.aux.delta_h;
        let scalar = b1.scalar + b2.scalar / (f * f)
            - 2.0 * m2f / f * ctx.aux.delta1_f
            - 2.0 / h * ctx.aux.delta_h
            - m2f * (m2f - 1.0) / (f * f) * ctx.aux.grad1f_norm_sq;
        Ok(SsstBlocks {
            ric11,
            ric22,
            ric12,
            ric33: Array2::from_elem((1, 1), h_sharp),
            h_sharp,
            scalar,
        })
    }
}

pub const SSST_CASES: [(&str, &[&str]); 10] = [
    ("P(X1,Y1)Z1 = alpha R1 + beta[Ric wedge] - kappa[g1 wedge]", &[]),
    (
        "P(X2,Y2)Z2 = alpha R2 - alpha |grad_1 f|^2 [g2 wedge] + beta[Ric wedge] - kappa f^2 [g2(Y2,Z2)X2 - g1(X2,Z2)Y2]",
        &["g2(X2,Z2) in the kappa term", "g1(X2,Z2) read as zero"],
    ),
    (
        "P(X1,Y2)Z1 = (alpha/f) H1^f(X1,Z1)Y2 + kappa g1(X1,Z1)Y2 - beta Ric(X1,Z1)Y2",
        &["with beta Ric(Y2,Z1)X1", "as printed"],
    ),
    (
        "P(X1,Y2)Z2 = -alpha f g2(Y2,Z2) nabla^1_{X1} grad_1 f - kappa f^2 g2(Y2,Z2)X1 + beta Ric(Y2,Z2)X1",
        &["with -beta Ric(X1,Z2)Y2", "as printed"],
    ),
    (
        "P(X1,dt)Z1 = (alpha/f) H1^f(X1,Z1) dt + kappa g1(X1,Z1) dt - beta Ric(X1,Z1) dt",
        &["(alpha/h) H^h(X1,Z1)", "(alpha/f) H1^f(X1,Z1)"],
    ),
    (
        "P(X1,dt)Z2 = (alpha/h) H^h(X1,Z2) dt",
        &[
            "full mixed Hessian and -beta Ric(X1,Z2) dt",
            "as printed, H^h(X1,Z2) = X1(ln f) Z2(h)",
            "full mixed Hessian, no Ricci term",
        ],
    ),
    (
        "P(X2,dt)Z1 = (alpha/h) H^h(X2,Z1) dt",
        &[
            "full mixed Hessian and -beta Ric(X2,Z1) dt",
            "as printed, H^h(X2,Z1) = Z1(ln f) X2(h)",
            "full mixed Hessian, no Ricci term",
        ],
    ),
    (
        "P(X2,dt)Z2 = (alpha/h) H1^f(X2,Z2) dt + kappa f^2 g2(X2,Z2) dt - beta Ric(X2,Z2) dt",
        &["H^h(X2,Z2) on the base", "H2^h(X2,Z2)", "f |grad_1 f|^2 g2(X2,Z2)"],
    ),
    ("P(X1,dt)dt = alpha h nabla_{X1} grad h + beta h# X1 + kappa h^2 X1", &[]),
    ("P(X2,dt)dt = alpha h nabla_{X2} grad h + beta h# X2 + kappa h^2 X2", &[]),
];

const SSST_PATTERNS: [[usize; 3]; 10] = [
    [0, 0, 0],
    [1, 1, 1],
    [0, 1, 0],
    [0, 1, 1],
    [0, 2, 0],
    [0, 2, 1],
    [1, 2, 0],
    [1, 2, 1],
    [0, 2, 2],
    [1, 2, 2],
];

/// Readings of the SSST component formula `case` (1..=10).
pub fn ssst_pp_components(
    ctx: &ClosedFormContext,
    blocks: &SsstBlocks,
    params: PseudoProjectiveParams,
    case: usize,
    a: usize,
    b: usize,
    c: usize,
) -> Result<Vec<Vec<f64>>> {
    let kappa = params.kappa(blocks.scalar, ctx.n);
    match case {
        1..=8 => {
            let blk = PPBlocks {
                ric11: &blocks.ric11,
                ric22: &blocks.ric22,
                ric12: &blocks.ric12,
                ric33: &blocks.ric33,
                kappa,
            };
            pp_closed_form_with(ctx, params, &blk, case, a, b, c)
        }
        9 | 10 => {
            let h = ctx.h;
            let mut v = ctx.nabla_grad_h_vec(a);
            v.iter_mut().for_each(|e| *e *= params.alpha * h);
            v[a] += params.beta * blocks.h_sharp + kappa * h * h;
            Ok(vec![v])
        }
        _ => Err(GeometryError::InvalidCase {
            formula: "SSST pseudo-projective component",
            case,
        }),
    }
}

/// SSST component formulas against the oracle and the general evaluator.
pub fn verify_ssst(model: &SequentialModel, points: &[ChartPoint], opts: &VerifyOptions) -> Result<Vec<FormulaRecord>> {
    require(model, ModelKind::Ssst)?;
    let params = model.params();
    let mut reg = SpecRegistry::new();
    let oracle_ids: Vec<usize> = SSST_CASES
        .iter()
        .enumerate()
        .map(|(k, (anchor, variants))| reg.add(&format!("ssst.case.{}", k + 1), anchor, variants, opts.tol))
        .collect();
    let spec_ids: Vec<usize> = (0..10)
        .map(|k| {
            reg.add(
                &format!("ssst.specialization.{}", k + 1),
                &format!("time-last specialization equals general block case {}", k + 1),
                &[],
                Tolerance::CONSISTENCY,
            )
        })
        .collect();
    let d = model.dims();
    run_sweep(&reg, points, opts.fault.as_deref(), |p, sink| {
        let oracle = pp_tensor(&model.assembled().curvature(p)?, params)?;
        let ctx = ClosedFormContext::new(model, p)?;
        let blocks = SsstBlocks::new(model, &ctx)?;
        for (k, pattern) in SSST_PATTERNS.iter().enumerate() {
            for [a, b, c] in triples(d, *pattern) {
                let readings = ssst_pp_components(&ctx, &blocks, params, k + 1, a, b, c)?;
                let general = pp_closed_form(&ctx, params, k + 1, a, b, c)?;
                sink.compare(spec_ids[k], &general[0], vec![readings[0].clone()]);
                sink.compare(oracle_ids[k], &oracle.vector(a, b, c), readings);
            }
        }
        Ok(())
    })
}

/// Necessary conditions for a flat SSST model: the two quasi-Einstein
/// residuals and the Hessian ratio on `M1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsstConditions {
    pub m1_gqe: f64,
    pub m2_gqe: f64,
    pub hessian_ratio: f64,
}

impl SsstConditions {
    pub fn necessary_residuals(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("m1_gqe", self.m1_gqe),
            ("m2_gqe", self.m2_gqe),
            ("hessian_ratio", self.hessian_ratio),
        ]
    }
}

pub fn ssst_flatness_check(model: &SequentialModel, ctx: &ClosedFormContext) -> Result<SsstConditions> {
    require(model, ModelKind::Ssst)?;
    let d = flatness_diagnostics(ctx, model.params());
    Ok(SsstConditions {
        m1_gqe: d.r1_m1_gqe,
        m2_gqe: d.r2_m2,
        hessian_ratio: d.r4_hessian_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp() -> PseudoProjectiveParams {
        PseudoProjectiveParams::new(1.0, 0.5).unwrap()
    }

    fn sgrw(f: &str, h: &str) -> SequentialModel {
        build_sgrw(SgrwSpec {
            time_coord: "t".into(),
            time_domain: (-0.4, 0.4),
            f: f.into(),
            m2: Chart::euclidean("E2", &["x", "y"], 1.0),
            m3: Chart::euclidean("E1", &["z"], 1.0),
            h: h.into(),
            params: pp(),
        })
        .unwrap()
    }

    #[test]
    fn minkowski_is_flat() {
        let m = minkowski(pp()).unwrap();
        let p = ChartPoint::new(vec![0.1, 0.2, 0.3, 0.4]);
        let b = m.assembled().curvature(&p).unwrap();
        assert_eq!(b.metric[[0, 0]], -1.0);
        assert!(max_abs(b.riemann.iter()) == 0.0);
        let ctx = ClosedFormContext::new(&m, &p).unwrap();
        let jet = SgrwJet::new(&m, &ctx).unwrap();
        for case in 1..=8 {
            for r in sgrw_pp_components(&ctx, &jet, pp(), case, 0, 1, 0).unwrap() {
                assert!(r.iter().all(|v| *v == 0.0));
            }
        }
        assert!(sgrw_pp_components(&ctx, &jet, pp(), 9, 0, 1, 0).is_err());
    }

    #[test]
    fn signed_gradient_norm_of_time_warp() {
        let m = sgrw("exp(t)", "exp(t)");
        let p = ChartPoint::new(vec![0.2, 0.0, 0.0, 0.0]);
        let ctx = ClosedFormContext::new(&m, &p).unwrap();
        assert!((ctx.aux.grad1f_norm_sq + (0.4_f64).exp()).abs() < 1e-13);
        let c = grw_flatness_conditions(&m, &ctx).unwrap();
        assert!(c.a_time.abs() < 1e-14);
    }

    #[test]
    fn time_condition_detects_mismatch() {
        let m = sgrw("exp(t)", "1 + t^2");
        let ctx = ClosedFormContext::new(&m, &ChartPoint::new(vec![0.0, 0.0, 0.0, 0.0])).unwrap();
        let c = grw_flatness_conditions(&m, &ctx).unwrap();
        assert!((c.a_time + 1.0).abs() < 1e-14);
    }

    #[test]
    fn affine_square_warp_gives_zero_k2() {
        let m = sgrw("sqrt(2*t + 1)", "1.2");
        for p in m.sample_points(10, 3).unwrap() {
            let ctx = ClosedFormContext::new(&m, &p).unwrap();
            let c = grw_flatness_conditions(&m, &ctx).unwrap();
            assert!(c.k2_displayed.abs() < 1e-10);
        }
    }

    #[test]
    fn ssst_time_block() {
        let m = build_ssst(SsstSpec {
            m1: Chart::euclidean("E1", &["x"], 1.0),
            m2: Chart::euclidean("E1b", &["y"], 1.0),
            f: "1".into(),
            h: "2 + 0.5*sin(x)".into(),
            time_coord: "t".into(),
            time_domain: (-1.0, 1.0),
            params: pp(),
        })
        .unwrap();
        let p = ChartPoint::new(vec![0.3, 0.1, 0.0]);
        let g = m.assembled().metric_at(&p).unwrap().g;
        let h = 2.0 + 0.5 * 0.3_f64.sin();
        assert!((g[[2, 2]] + h * h).abs() < 1e-14);
        let recs = verify_ssst(&m, &m.sample_points(6, 0).unwrap(), &VerifyOptions::default()).unwrap();
        for r in recs {
            assert!(r.verdict.passed(), "{}", r.id);
        }
    }
}
