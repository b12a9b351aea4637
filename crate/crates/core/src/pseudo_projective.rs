//! The pseudo-projective tensor
//! `P(X,Y)Z = αR(X,Y)Z + β[Ric(Y,Z)X − Ric(X,Z)Y] − κ[g(Y,Z)X − g(X,Z)Y]`,
//! `κ = (τ/n)(α/(n−1) + β)`, its block components on a sequential warped
//! product, and flatness diagnostics.

use ndarray::{s, Array2, Array3, Array4, Array5};
use serde::{Deserialize, Serialize};

use crate::chart::ChartPoint;
use crate::compare::{FormulaRecord, Tolerance};
use crate::curvature::{max_abs, tensor_divergence, CurvatureBundle, Divergence, TensorJet};
use crate::error::{GeometryError, Result};
use crate::structure::{conformal_soliton_residual, einstein_residual, gqe_residual_arrays};
use crate::sweep::{run_sweep, SpecRegistry};
use crate::warped::{
    all_block_triples, factor_riemann, tensor_wedge, triples, wedge, ClosedFormContext, SequentialModel,
    VerifyOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoProjectiveParams {
    pub alpha: f64,
    pub beta: f64,
}

impl PseudoProjectiveParams {
    /// Both parameters must be finite and non-zero.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha == 0.0 || beta == 0.0 || !alpha.is_finite() || !beta.is_finite() {
            return Err(GeometryError::ZeroParameter { alpha, beta });
        }
        Ok(PseudoProjectiveParams { alpha, beta })
    }

    /// `(1, −1/(n−1))`, giving the projective curvature tensor.
    pub fn projective(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(GeometryError::DimensionTooSmall(n));
        }
        PseudoProjectiveParams::new(1.0, -1.0 / (n as f64 - 1.0))
    }

    pub fn equal_case(&self) -> bool {
        self.alpha == self.beta
    }

    /// `κ = (τ/n)(α/(n−1) + β)`.
    pub fn kappa(&self, scalar: f64, n: usize) -> f64 {
        let n = n as f64;
        scalar / n * (self.alpha / (n - 1.0) + self.beta)
    }
}

/// A `(1,3)` tensor at a point: `components[[l, i, j, k]]` is the `l`-th
/// component of `P(∂i, ∂j)∂k`, `lowered[[i, j, k, l]]` lowers `l`.
#[derive(Debug, Clone)]
pub struct PPTensor {
    pub components: Array4<f64>,
    pub lowered: Array4<f64>,
}

impl PPTensor {
    fn from_components(components: Array4<f64>, g: &Array2<f64>) -> Self {
        let n = g.nrows();
        let lowered = Array4::from_shape_fn((n, n, n, n), |(i, j, k, l)| {
            (0..n).map(|m| components[[m, i, j, k]] * g[[m, l]]).sum()
        });
        PPTensor { components, lowered }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(self.components.iter())
    }

    /// `P(∂a, ∂b)∂c` as a vector.
    pub fn vector(&self, a: usize, b: usize, c: usize) -> Vec<f64> {
        self.components.slice(s![.., a, b, c]).to_vec()
    }

    /// `max |P(X,Y)Z + P(Y,X)Z|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.components.shape()[0];
        let mut worst: f64 = 0.0;
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        worst = worst.max((self.components[[l, i, j, k]] + self.components[[l, j, i, k]]).abs());
                    }
                }
            }
        }
        worst
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 3 {
        Err(GeometryError::DimensionTooSmall(n))
    } else {
        Ok(())
    }
}

/// `c_R R + c_Ric (Ric∧) − κ (g∧)` from oracle curvature.
fn combine(b: &CurvatureBundle, c_r: f64, c_ric: f64, kappa: f64) -> Array4<f64> {
    let n = b.dim();
    Array4::from_shape_fn((n, n, n, n), |(l, i, j, k)| {
        let mut v = c_r * b.riemann[[l, i, j, k]];
        if l == i {
            v += c_ric * b.ricci[[j, k]] - kappa * b.metric[[j, k]];
        }
        if l == j {
            v -= c_ric * b.ricci[[i, k]] - kappa * b.metric[[i, k]];
        }
        v
    })
}

pub fn pp_tensor(bundle: &CurvatureBundle, params: PseudoProjectiveParams) -> Result<PPTensor> {
    let n = bundle.dim();
    check_dim(n)?;
    let kappa = params.kappa(bundle.scalar, n);
    Ok(PPTensor::from_components(
        combine(bundle, params.alpha, params.beta, kappa),
        &bundle.metric,
    ))
}

/// `R(X,Y)Z − (1/(n−1))[Ric(Y,Z)X − Ric(X,Z)Y]`.
pub fn projective_tensor(bundle: &CurvatureBundle) -> Result<PPTensor> {
    let n = bundle.dim();
    check_dim(n)?;
    Ok(PPTensor::from_components(
        combine(bundle, 1.0, -1.0 / (n as f64 - 1.0), 0.0),
        &bundle.metric,
    ))
}

/// `(div P)[[i, j, k]] = ∇_l P^l_ijk`; needs curvature derivatives.
pub fn pp_divergence(bundle: &CurvatureBundle, params: PseudoProjectiveParams) -> Result<Array3<f64>> {
    let n = bundle.dim();
    check_dim(n)?;
    let d = bundle.derivatives.as_ref().ok_or_else(|| {
        GeometryError::Invalid("divergence needs curvature derivatives (third metric derivatives)".into())
    })?;
    let p = combine(bundle, params.alpha, params.beta, params.kappa(bundle.scalar, n));
    let c = params.alpha / (n as f64 - 1.0) + params.beta;
    let kappa = params.kappa(bundle.scalar, n);
    let dp = Array5::from_shape_fn((n, n, n, n, n), |(m, l, i, j, k)| {
        let dkappa = d.scalar[m] / n as f64 * c;
        let mut v = params.alpha * d.riemann[[m, l, i, j, k]];
        if l == i {
            v += params.beta * d.ricci[[m, j, k]]
                - dkappa * bundle.metric[[j, k]]
                - kappa * bundle.metric_partials[[m, j, k]];
        }
        if l == j {
            v -= params.beta * d.ricci[[m, i, k]]
                - dkappa * bundle.metric[[i, k]]
                - kappa * bundle.metric_partials[[m, i, k]];
        }
        v
    });
    match tensor_divergence(
        bundle,
        TensorJet::Mixed13 {
            value: &p,
            partials: &dp,
        },
    ) {
        Divergence::Covariant3(v) => Ok(v),
        Divergence::Covector(_) => unreachable!(),
    }
}

// ---------------------------------------------------------------------------
// Block components

#[derive(Debug, Clone, Copy)]
pub struct CaseSpec {
    pub id: &'static str,
    pub anchor: &'static str,
    /// Block triples `(X, Y, Z)` with `0 = M1`, `1 = M2`, `2 = M3`.
    pub patterns: &'static [[usize; 3]],
    /// Reading 0 is adopted.
    pub variants: &'static [&'static str],
    pub note: Option<&'static str>,
}

pub const PP_CASES: [CaseSpec; 11] = [
    CaseSpec {
        id: "pp.case.1",
        anchor: "P(X1,Y1)Z1 = alpha R1 + beta[Ric(Y1,Z1)X1 - Ric(X1,Z1)Y1] - kappa[g1(Y1,Z1)X1 - g1(X1,Z1)Y1]",
        patterns: &[[0, 0, 0]],
        variants: &[],
        note: None,
    },
    CaseSpec {
        id: "pp.case.2",
        anchor: "P(X2,Y2)Z2 = alpha R2 - alpha |grad_1 f|^2 [g2 wedge] + beta[Ric wedge] - kappa f^2 [g2(Y2,Z2)X2 - g1(X2,Z2)Y2]",
        patterns: &[[1, 1, 1]],
        variants: &["g2(X2,Z2) in the kappa term", "g1(X2,Z2) read as zero"],
        note: Some("the printed g1(X2,Z2) in the kappa term is read as g2(X2,Z2)"),
    },
    CaseSpec {
        id: "pp.case.3",
        anchor: "P(X1,Y2)Z1 = (alpha/f) H1^f(X1,Z1)Y2 + kappa g1(X1,Z1)Y2 - beta Ric(X1,Z1)Y2",
        patterns: &[[0, 1, 0]],
        variants: &["with beta Ric(Y2,Z1)X1", "as printed"],
        note: Some("the mixed Ricci block contributes beta Ric(Y2,Z1)X1"),
    },
    CaseSpec {
        id: "pp.case.4",
        anchor: "P(X1,Y2)Z2 = -alpha f g2(Y2,Z2) nabla^1_{X1} grad_1 f - kappa f^2 g2(Y2,Z2)X1 + beta Ric(Y2,Z2)X1",
        patterns: &[[0, 1, 1]],
        variants: &["with -beta Ric(X1,Z2)Y2", "as printed"],
        note: Some("the mixed Ricci block contributes -beta Ric(X1,Z2)Y2"),
    },
    CaseSpec {
        id: "pp.case.5",
        anchor: "P(X1,Y3)Z1 = (alpha/f) H1^f(X1,Z1)Y3 + kappa g1(X1,Z1)Y3 - beta Ric(X1,Z1)Y3",
        patterns: &[[0, 2, 0]],
        variants: &["(alpha/h) H^h(X1,Z1)", "(alpha/f) H1^f(X1,Z1)"],
        note: Some("the curvature term is (alpha/h) H^h(X1,Z1)Y3"),
    },
    CaseSpec {
        id: "pp.case.6",
        anchor: "P(X1,Y3)Z2 = (alpha/h) H^h(X1,Z2)Y3",
        patterns: &[[0, 2, 1]],
        variants: &[
            "full mixed Hessian and -beta Ric(X1,Z2)Y3",
            "as printed, H^h(X1,Z2) = X1(ln f) Z2(h)",
            "full mixed Hessian, no Ricci term",
        ],
        note: Some("the mixed Ricci block contributes -beta Ric(X1,Z2)Y3"),
    },
    CaseSpec {
        id: "pp.case.7",
        anchor: "P(X2,Y3)Z1 = (alpha/h) H^h(X2,Z1)Y3",
        patterns: &[[1, 2, 0]],
        variants: &[
            "full mixed Hessian and -beta Ric(X2,Z1)Y3",
            "as printed, H^h(X2,Z1) = Z1(ln f) X2(h)",
            "full mixed Hessian, no Ricci term",
        ],
        note: Some("the mixed Ricci block contributes -beta Ric(X2,Z1)Y3"),
    },
    CaseSpec {
        id: "pp.case.8",
        anchor: "P(X2,Y3)Z2 = (alpha/h) H1^f(X2,Z2)Y3 + kappa f^2 g2(X2,Z2)Y3 - beta Ric(X2,Z2)Y3",
        patterns: &[[1, 2, 1]],
        variants: &[
            "H^h(X2,Z2) on the base",
            "H2^h(X2,Z2)",
            "f |grad_1 f|^2 g2(X2,Z2)",
        ],
        note: Some("the printed H1^f(X2,Z2) is identified by the oracle with H^h(X2,Z2)"),
    },
    CaseSpec {
        id: "pp.case.9",
        anchor: "P(X1,Y3)Z3 = -alpha h g3(Y3,Z3) nabla_{X1} grad h - kappa h^2 g3(Y3,Z3)X1 + beta[Ric3 - h# g3](Y3,Z3)X1",
        patterns: &[[0, 2, 2]],
        variants: &[],
        note: None,
    },
    CaseSpec {
        id: "pp.case.10",
        anchor: "P(X2,Y3)Z3 = -alpha h g3(Y3,Z3) nabla_{X2} grad h - kappa h^2 g3(Y3,Z3)X2 + beta[Ric3 - h# g3](Y3,Z3)X2",
        patterns: &[[1, 2, 2]],
        variants: &[],
        note: None,
    },
    CaseSpec {
        id: "pp.case.11",
        anchor: "P(X3,Y3)Z3 = alpha R3 - kappa h^2 [g3 wedge] + beta[(Ric3 - h# g3) wedge]",
        patterns: &[[2, 2, 2]],
        variants: &["with -alpha |grad h|^2 [g3 wedge]", "as printed"],
        note: Some("the curvature of the fibre picks up -alpha |grad h|^2 [g3(Y3,Z3)X3 - g3(X3,Z3)Y3]"),
    },
];

/// Block triples outside the listed cases whose components are nonzero
/// through the mixed Ricci block.
pub const PP_SUPPLEMENTS: [CaseSpec; 2] = [
    CaseSpec {
        id: "pp.supplement.112",
        anchor: "P(X1,Y1)Z2 = beta[Ric(Y1,Z2)X1 - Ric(X1,Z2)Y1]",
        patterns: &[[0, 0, 1]],
        variants: &[],
        note: None,
    },
    CaseSpec {
        id: "pp.supplement.221",
        anchor: "P(X2,Y2)Z1 = beta[Ric(Y2,Z1)X2 - Ric(X2,Z1)Y2]",
        patterns: &[[1, 1, 0]],
        variants: &[],
        note: None,
    },
];

/// Block triples where every component vanishes.
pub const PP_ZERO_PATTERNS: [[usize; 3]; 6] = [[0, 0, 2], [1, 1, 2], [2, 2, 0], [2, 2, 1], [0, 1, 2], [1, 0, 2]];

/// Shared scalars for the block evaluators.
fn kappa_of(ctx: &ClosedFormContext, params: PseudoProjectiveParams) -> f64 {
    params.kappa(ctx.scalar, ctx.n)
}

fn axpy(v: &mut [f64], c: f64, w: &[f64]) {
    for (x, y) in v.iter_mut().zip(w) {
        *x += c * y;
    }
}

/// Ricci blocks and `κ` entering the block formulas.
#[derive(Debug, Clone, Copy)]
pub struct PPBlocks<'a> {
    pub ric11: &'a Array2<f64>,
    pub ric22: &'a Array2<f64>,
    /// `[[i, j]] = Ric(∂i, ∂j)` for `i` in `M1`, `j` in `M2`.
    pub ric12: &'a Array2<f64>,
    pub ric33: &'a Array2<f64>,
    pub kappa: f64,
}

impl<'a> PPBlocks<'a> {
    pub fn of(ctx: &'a ClosedFormContext, params: PseudoProjectiveParams) -> Self {
        PPBlocks {
            ric11: &ctx.ric11,
            ric22: &ctx.ric22,
            ric12: &ctx.ric12,
            ric33: &ctx.ric33,
            kappa: kappa_of(ctx, params),
        }
    }
}

/// Readings of `P(∂a, ∂b)∂c` for listed case `case` (1-based), or for the
/// supplements as cases 12 and 13.
pub fn pp_closed_form(
    ctx: &ClosedFormContext,
    params: PseudoProjectiveParams,
    case: usize,
    a: usize,
    b: usize,
    c: usize,
) -> Result<Vec<Vec<f64>>> {
    pp_closed_form_with(ctx, params, &PPBlocks::of(ctx, params), case, a, b, c)
}

/// As [`pp_closed_form`] with the Ricci blocks and `κ` supplied.
pub fn pp_closed_form_with(
    ctx: &ClosedFormContext,
    params: PseudoProjectiveParams,
    blk: &PPBlocks<'_>,
    case: usize,
    a: usize,
    b: usize,
    c: usize,
) -> Result<Vec<Vec<f64>>> {
    let (al, be) = (params.alpha, params.beta);
    let kappa = blk.kappa;
    let (_, x) = ctx.block_of(a);
    let (_, y) = ctx.block_of(b);
    let (_, z) = ctx.block_of(c);
    let [m1, _, _] = ctx.dims;
    let out = match case {
        1 => {
            let mut v = factor_riemann(ctx, 0, x, y, z);
            v.iter_mut().for_each(|e| *e *= al);
            axpy(&mut v, be, &tensor_wedge(ctx, 0, blk.ric11, x, y, z));
            axpy(&mut v, -kappa, &wedge(ctx, 0, x, y, z, 1.0));
            vec![v]
        }
        2 => {
            let mut base = factor_riemann(ctx, 1, x, y, z);
            base.iter_mut().for_each(|e| *e *= al);
            axpy(&mut base, -al * ctx.aux.grad1f_norm_sq, &wedge(ctx, 1, x, y, z, 1.0));
            axpy(&mut base, be, &tensor_wedge(ctx, 1, blk.ric22, x, y, z));
            let f2 = ctx.f * ctx.f;
            let mut adopted = base.clone();
            axpy(&mut adopted, -kappa * f2, &wedge(ctx, 1, x, y, z, 1.0));
            let mut literal = base;
            literal[a] -= kappa * f2 * ctx.g(1, y, z);
            vec![adopted, literal]
        }
        3 => {
            let lit = ctx.unit(b, al / ctx.f * ctx.hess1_f[[x, z]] + kappa * ctx.g(0, x, z) - be * blk.ric11[[x, z]]);
            let mut adopted = lit.clone();
            adopted[a] += be * blk.ric12[[z, y]];
            vec![adopted, lit]
        }
        4 => {
            let mut lit = ctx.zeros();
            let s = -al * ctx.f * ctx.g(1, y, z);
            for k in 0..m1 {
                lit[k] = s * ctx.nabla1_grad1f[[k, x]];
            }
            lit[a] += be * blk.ric22[[y, z]] - kappa * ctx.f * ctx.f * ctx.g(1, y, z);
            let mut adopted = lit.clone();
            adopted[b] -= be * blk.ric12[[x, z]];
            vec![adopted, lit]
        }
        5 => {
            let rest = kappa * ctx.g(0, x, z) - be * blk.ric11[[x, z]];
            vec![
                ctx.unit(b, al / ctx.h * ctx.hess_h[[a, c]] + rest),
                ctx.unit(b, al / ctx.f * ctx.hess1_f[[x, z]] + rest),
            ]
        }
        6 | 7 => {
            // a in M1 (case 6) or M2 (case 7), c in the other base factor
            let (i1, j2) = if case == 6 { (x, z) } else { (z, x) };
            let full = al / ctx.h * ctx.hess_h[[a, c]];
            let literal = al / ctx.h * ctx.hess_h12_literal[[i1, j2]];
            vec![
                ctx.unit(b, full - be * blk.ric12[[i1, j2]]),
                ctx.unit(b, literal),
                ctx.unit(b, full),
            ]
        }
        8 => {
            let rest = kappa * ctx.f * ctx.f * ctx.g(1, x, z) - be * blk.ric22[[x, z]];
            vec![
                ctx.unit(b, al / ctx.h * ctx.hess_h[[a, c]] + rest),
                ctx.unit(b, al / ctx.h * ctx.hess2_h[[x, z]] + rest),
                ctx.unit(
                    b,
                    al / ctx.h * ctx.f * ctx.aux.grad1f_norm_sq * ctx.g(1, x, z) + rest,
                ),
            ]
        }
        9 | 10 => {
            let mut v = ctx.nabla_grad_h_vec(a);
            let s = -al * ctx.h * ctx.g(2, y, z);
            v.iter_mut().for_each(|e| *e *= s);
            v[a] += -kappa * ctx.h * ctx.h * ctx.g(2, y, z) + be * blk.ric33[[y, z]];
            vec![v]
        }
        11 => {
            let mut lit = factor_riemann(ctx, 2, x, y, z);
            lit.iter_mut().for_each(|e| *e *= al);
            axpy(&mut lit, -kappa * ctx.h * ctx.h, &wedge(ctx, 2, x, y, z, 1.0));
            axpy(&mut lit, be, &tensor_wedge(ctx, 2, blk.ric33, x, y, z));
            let mut adopted = lit.clone();
            axpy(&mut adopted, -al * ctx.aux.gradh_norm_sq, &wedge(ctx, 2, x, y, z, 1.0));
            vec![adopted, lit]
        }
        12 => {
            let mut v = ctx.zeros();
            v[a] += be * blk.ric12[[y, z]];
            v[b] -= be * blk.ric12[[x, z]];
            vec![v]
        }
        13 => {
            let mut v = ctx.zeros();
            v[a] += be * blk.ric12[[z, y]];
            v[b] -= be * blk.ric12[[z, x]];
            vec![v]
        }
        _ => {
            return Err(GeometryError::InvalidCase {
                formula: "pseudo-projective component",
                case,
            })
        }
    };
    Ok(out)
}

/// Registers the listed cases, supplements and the zero check.
pub(crate) fn register_pp_cases(reg: &mut SpecRegistry, prefix: &str, tol: Tolerance) -> (Vec<usize>, Vec<usize>, usize) {
    let mut add = |spec: &CaseSpec| {
        let id = spec.id.replacen("pp.", prefix, 1);
        let k = reg.add(&id, spec.anchor, spec.variants, tol);
        if let Some(n) = spec.note {
            reg.note(k, n);
        }
        k
    };
    let cases = PP_CASES.iter().map(&mut add).collect();
    let sup = PP_SUPPLEMENTS.iter().map(&mut add).collect();
    let zero = reg.add(
        &format!("{prefix}unlisted"),
        "P vanishes on every block triple outside the listed cases",
        &[],
        tol,
    );
    (cases, sup, zero)
}

/// Compares every pseudo-projective block formula with `P` built from the
/// oracle curvature of the assembled metric.
pub fn verify_pp(model: &SequentialModel, points: &[ChartPoint], opts: &VerifyOptions) -> Result<Vec<FormulaRecord>> {
    model.check_warpings(points)?;
    check_dim(model.n())?;
    let params = model.params();
    let mut reg = SpecRegistry::new();
    let (cases, sup, zero) = register_pp_cases(&mut reg, "pp.", opts.tol);
    let d = model.dims();
    run_sweep(&reg, points, opts.fault.as_deref(), |p, sink| {
        let oracle = pp_tensor(&model.assembled().curvature(p)?, params)?;
        let ctx = ClosedFormContext::new(model, p)?;
        for blocks in all_block_triples() {
            let target = PP_CASES
                .iter()
                .position(|c| c.patterns.contains(&blocks))
                .map(|k| (cases[k], k + 1))
                .or_else(|| {
                    PP_SUPPLEMENTS
                        .iter()
                        .position(|c| c.patterns.contains(&blocks))
                        .map(|k| (sup[k], 12 + k))
                });
            for [a, b, c] in triples(d, blocks) {
                let o = oracle.vector(a, b, c);
                match target {
                    Some((rec, case)) => sink.compare(rec, &o, pp_closed_form(&ctx, params, case, a, b, c)?),
                    None if PP_ZERO_PATTERNS.contains(&blocks) => sink.residual(zero, &o),
                    None => {}
                }
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Flatness

/// Default threshold for declaring `P` numerically zero.
pub const FLATNESS_THRESHOLD: f64 = 1e-7;
const SCALE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessScan {
    pub max_norm: f64,
    /// `max ‖P‖ / ((|α| + |β|) max(‖R‖, ‖Γ‖², 1e−6))` over samples.
    pub relative_max: f64,
    pub argmax_point: Option<Vec<f64>>,
    pub threshold: f64,
    pub flat: bool,
}

/// Pointwise `(‖P‖_∞, relative norm)`.
pub fn pp_norms(bundle: &CurvatureBundle, params: PseudoProjectiveParams) -> Result<(f64, f64)> {
    let p = pp_tensor(bundle, params)?;
    let abs = p.max_abs();
    let gamma = max_abs(bundle.christoffel.iter());
    let scale = max_abs(bundle.riemann.iter()).max(gamma * gamma).max(SCALE_FLOOR);
    Ok((abs, abs / ((params.alpha.abs() + params.beta.abs()) * scale)))
}

pub fn flatness_scan(
    model: &SequentialModel,
    points: &[ChartPoint],
    params: PseudoProjectiveParams,
    threshold: f64,
) -> Result<FlatnessScan> {
    use rayon::prelude::*;
    let norms: Vec<(f64, f64)> = points
        .par_iter()
        .map(|p| pp_norms(&model.assembled().curvature(p)?, params))
        .collect::<Result<_>>()?;
    let mut scan = FlatnessScan {
        max_norm: 0.0,
        relative_max: 0.0,
        argmax_point: None,
        threshold,
        flat: true,
    };
    for (p, (abs, rel)) in points.iter().zip(norms) {
        if abs > scan.max_norm || scan.argmax_point.is_none() {
            scan.max_norm = scan.max_norm.max(abs);
            scan.argmax_point = Some(p.values.clone());
        }
        scan.relative_max = scan.relative_max.max(rel);
    }
    scan.flat = scan.max_norm < threshold && scan.relative_max < threshold;
    if scan.flat {
        scan.argmax_point = None;
    }
    Ok(scan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Generic,
    AlphaEqBeta,
}

/// Quantities and necessary-condition residuals attached to `P = 0` at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessDiagnostics {
    pub branch: Branch,
    pub lambda1: f64,
    /// `λ1` with `m1 − 1` in place of `m1`.
    pub lambda1_contracted: f64,
    pub lambda2: f64,
    /// `λ2` as displayed, with `f² Δh` and without the `(m2 − 1)` factors.
    pub lambda2_displayed: f64,
    /// `μ = β m3 / (α − β)`, the coefficient of `H2^h / h`; `None` when `α = β`.
    pub mu: Option<f64>,
    /// `μ` with `μ(α − β) = β m3 f²`; `None` when `α = β`.
    pub mu_displayed: Option<f64>,
    /// `‖Ric1 − (1/f) H1^f − (λ1/α) g1‖`.
    pub r1_m1_gqe: f64,
    /// GQE residual on `M2` with potential `μ ln h`, or the conformal soliton
    /// residual of `h` on `M2` when `α = β`.
    pub r2_m2: f64,
    /// `r2` with the displayed `λ2` and `μ` (or the conformal residual against
    /// `λ2 h/(β m3)` when `α = β`).
    pub r2_m2_displayed: f64,
    /// Einstein residual of `M3`; `None` when `α = β`.
    pub r3_m3_einstein: Option<f64>,
    /// `(α − β) τ3/m3` against the contracted constant `λ3`.
    pub r3_lambda: Option<f64>,
    pub r3_lambda_displayed: Option<f64>,
    /// `‖(1/f) H1^f − (1/h) H1^h‖`.
    pub r4_hessian_ratio: f64,
    /// `‖H^h(X1, Z2)‖`.
    pub mixed_hessian: f64,
}

impl FlatnessDiagnostics {
    /// The residuals that must vanish when `P = 0`.
    pub fn necessary_residuals(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![("r1_m1_gqe", self.r1_m1_gqe), ("r2_m2", self.r2_m2)];
        if let Some(r) = self.r3_m3_einstein {
            v.push(("r3_m3_einstein", r));
        }
        if let Some(r) = self.r3_lambda {
            v.push(("r3_lambda", r));
        }
        v.push(("r4_hessian_ratio", self.r4_hessian_ratio));
        v.push(("mixed_hessian", self.mixed_hessian));
        v
    }

    pub fn max_residual(&self) -> f64 {
        self.necessary_residuals().iter().fold(0.0_f64, |m, (_, r)| m.max(*r))
    }
}

pub fn flatness_diagnostics(ctx: &ClosedFormContext, params: PseudoProjectiveParams) -> FlatnessDiagnostics {
    let (al, be) = (params.alpha, params.beta);
    let [m1, m2, m3] = ctx.dims;
    let (m1f, m2f, m3f) = (m1 as f64, m2 as f64, m3 as f64);
    let kappa = kappa_of(ctx, params);
    let [b1, b2, b3] = &ctx.factor;
    let (f, h) = (ctx.f, ctx.h);
    let aux = ctx.aux;

    let lam_tail = -be * b1.scalar + be * m2f / f * aux.delta1_f + be * m3f / h * ctx.delta1_h;
    let lambda1 = kappa * m1f + lam_tail;
    let lambda1_contracted = kappa * (m1f - 1.0) + lam_tail;
    // φ = −ln f on M1: H^φ = −H1^f/f + df⊗df/f², dφ = −df/f
    let dphi1 = ctx.df.mapv(|v| -v / f);
    let hphi1 = Array2::from_shape_fn((m1, m1), |(i, j)| {
        -ctx.hess1_f[[i, j]] / f + ctx.df[i] * ctx.df[j] / (f * f)
    });
    let (_, r1) = gqe_residual_arrays(&b1.ricci, &hphi1, &dphi1, &b1.metric, 1.0, Some(lambda1 / al));

    let nhf = ctx.nabla_h_f;
    let lambda2 = al * (m2f - 1.0) * aux.grad1f_norm_sq + kappa * f * f * (m2f - 1.0) - be * b2.scalar
        + be * m2f * aux.f_sharp
        + be * m3f / h * (ctx.delta2_h + m2f * f * nhf)
        - be * aux.f_sharp
        - be * m3f / h * f * nhf;
    let lambda2_displayed = -be * b2.scalar + be * m2f * aux.f_sharp
        + be * m3f * (m2f * f * nhf + f * f * aux.delta_h) / h
        - be * aux.f_sharp
        - be * m3f * f / h * nhf
        + al * aux.grad1f_norm_sq
        + kappa * f * f;
    let dh2 = ctx.dh.slice(s![m1..]).to_owned();
    let gqe_m2 = |mu: f64, lambda: f64| {
        let dphi = dh2.mapv(|v| mu * v / h);
        let hphi = Array2::from_shape_fn((m2, m2), |(i, j)| {
            mu * (ctx.hess2_h[[i, j]] / h - dh2[i] * dh2[j] / (h * h))
        });
        gqe_residual_arrays(&b2.ricci, &hphi, &dphi, &b2.metric, -1.0 / mu, Some(lambda)).1
    };

    let (branch, mu, mu_displayed, r2, r2_displayed, r3, r3_lambda, r3_lambda_displayed) = if params.equal_case() {
        let fit = conformal_soliton_residual(&ctx.hess2_h, &b2.metric, &b2.inverse);
        let target = lambda2 * h / (be * m3f);
        let against = max_abs((&ctx.hess2_h - &(&b2.metric * target)).iter());
        (Branch::AlphaEqBeta, None, None, fit.residual, against, None, None, None)
    } else {
        let mu = be * m3f / (al - be);
        let mu_d = be * m3f * f * f / (al - be);
        let r2 = gqe_m2(mu, lambda2 / (al - be));
        let r2d = gqe_m2(mu_d, lambda2_displayed);
        let e3 = einstein_residual(b3);
        let l3_tail = -be * b3.scalar + be * (m3f - 1.0) * aux.h_sharp + kappa * h * h * (m3f - 1.0);
        let lambda3 = al * aux.gradh_norm_sq * (m3f - 1.0) + l3_tail;
        let lhs = (al - be) * b3.scalar / m3f;
        (
            Branch::Generic,
            Some(mu),
            Some(mu_d),
            r2,
            r2d,
            Some(e3.residual),
            Some((lhs - lambda3).abs()),
            Some((lhs - l3_tail).abs()),
        )
    };

    let hh11 = ctx.hess_h.slice(s![..m1, ..m1]).to_owned();
    let r4 = max_abs((&(&ctx.hess1_f / f) - &(&hh11 / h)).iter());
    let mixed = max_abs(ctx.hess_h.slice(s![..m1, m1..]).iter());
    FlatnessDiagnostics {
        branch,
        lambda1,
        lambda1_contracted,
        lambda2,
        lambda2_displayed,
        mu,
        mu_displayed,
        r1_m1_gqe: r1,
        r2_m2: r2,
        r2_m2_displayed: r2_displayed,
        r3_m3_einstein: r3,
        r3_lambda,
        r3_lambda_displayed,
        r4_hessian_ratio: r4,
        mixed_hessian: mixed,
    }
}

/// Codazzi and divergence data for the conservative-tensor check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSample {
    pub div_norm: f64,
    pub codazzi: f64,
    pub scalar: f64,
}

pub fn divergence_sample(model: &SequentialModel, p: &ChartPoint, params: PseudoProjectiveParams) -> Result<DivergenceSample> {
    let b = model.assembled().curvature_with_derivatives(p)?;
    let div = pp_divergence(&b, params)?;
    Ok(DivergenceSample {
        div_norm: max_abs(div.iter()),
        codazzi: b.codazzi_residual()?,
        scalar: b.scalar,
    })
}

/// Outcome of the check "divergence-free, `α + β ≠ 0` and constant scalar
/// curvature imply a Codazzi-type Ricci tensor".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservativeCheck {
    pub max_div: f64,
    pub max_codazzi: f64,
    pub scalar_variation: f64,
    pub hypotheses_hold: bool,
    /// `None` when the hypotheses fail, so nothing is asserted.
    pub codazzi_holds: Option<bool>,
}

pub fn conservative_check(
    samples: &[DivergenceSample],
    params: PseudoProjectiveParams,
    div_tol: f64,
    codazzi_tol: f64,
) -> ConservativeCheck {
    let max_div = samples.iter().fold(0.0_f64, |m, s| m.max(s.div_norm));
    let max_codazzi = samples.iter().fold(0.0_f64, |m, s| m.max(s.codazzi));
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.scalar), hi.max(s.scalar)));
    let scalar_variation = if samples.is_empty() { 0.0 } else { hi - lo };
    let hypotheses_hold = !samples.is_empty()
        && max_div < div_tol
        && params.alpha + params.beta != 0.0
        && scalar_variation < div_tol;
    ConservativeCheck {
        max_div,
        max_codazzi,
        scalar_variation,
        hypotheses_hold,
        codazzi_holds: hypotheses_hold.then_some(max_codazzi < codazzi_tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;

    fn bundle(c: &Chart, v: &[f64]) -> CurvatureBundle {
        c.curvature_with_derivatives(&ChartPoint::new(v.to_vec())).unwrap()
    }

    fn s3() -> Chart {
        Chart::diagonal(
            "S3",
            &["a", "b", "c"],
            &["1", "sin(a)^2", "sin(a)^2*sin(b)^2"],
            &[(0.4, 2.7), (0.4, 2.7), (-3.0, 3.0)],
        )
        .unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(PseudoProjectiveParams::new(0.0, 1.0).is_err());
        assert!(PseudoProjectiveParams::new(1.0, 0.0).is_err());
        assert!(PseudoProjectiveParams::projective(2).is_err());
        let p = PseudoProjectiveParams::projective(4).unwrap();
        assert_eq!(p.kappa(7.0, 4), 0.0);
        assert!(PseudoProjectiveParams::new(2.0, 2.0).unwrap().equal_case());
    }

    #[test]
    fn constant_curvature_vanishes() {
        let b = bundle(&s3(), &[1.0, 1.2, 0.3]);
        for (al, be) in [(1.0, 0.5), (-2.0, 3.0), (0.7, -0.1)] {
            let p = pp_tensor(&b, PseudoProjectiveParams::new(al, be).unwrap()).unwrap();
            assert!(p.max_abs() < 1e-12, "{}", p.max_abs());
            assert!(max_abs(pp_divergence(&b, PseudoProjectiveParams::new(al, be).unwrap()).unwrap().iter()) < 1e-10);
        }
        assert!(projective_tensor(&b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn sphere_times_line_is_not_flat() {
        let c = Chart::diagonal(
            "S2xE1",
            &["t", "p", "z"],
            &["1", "sin(t)^2", "1"],
            &[(0.4, 2.7), (-3.0, 3.0), (-1.0, 1.0)],
        )
        .unwrap();
        let b = bundle(&c, &[1.0, 0.2, 0.1]);
        let pp = PseudoProjectiveParams::new(1.0, 0.5).unwrap();
        let p = pp_tensor(&b, pp).unwrap();
        assert!(p.max_abs() > 1e-2);
        assert!(p.antisymmetry_defect() < 1e-12);
        let proj = projective_tensor(&b).unwrap();
        let gen = pp_tensor(&b, PseudoProjectiveParams::projective(3).unwrap()).unwrap();
        let d = (&proj.components - &gen.components).mapv(f64::abs).fold(0.0_f64, |m, v| m.max(*v));
        assert!(d < 1e-12);
    }

    #[test]
    fn two_dimensions_rejected() {
        let c = Chart::euclidean("E2", &["x", "y"], 1.0);
        let b = bundle(&c, &[0.0, 0.0]);
        assert!(matches!(
            pp_tensor(&b, PseudoProjectiveParams::new(1.0, 1.0).unwrap()),
            Err(GeometryError::DimensionTooSmall(2))
        ));
    }

    #[test]
    fn conservative_check_only_asserts_under_hypotheses() {
        let s = [DivergenceSample {
            div_norm: 0.0,
            codazzi: 0.0,
            scalar: 1.0,
        }];
        let pp = PseudoProjectiveParams::new(1.0, -1.0).unwrap();
        assert!(!conservative_check(&s, pp, 1e-8, 1e-7).hypotheses_hold);
        let pp = PseudoProjectiveParams::new(1.0, 1.0).unwrap();
        assert_eq!(conservative_check(&s, pp, 1e-8, 1e-7).codazzi_holds, Some(true));
    }
}
