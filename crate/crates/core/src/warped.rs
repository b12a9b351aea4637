//! Sequential warped products `(M1 ×_f M2) ×_h M3` with metric
//! `g1 ⊕ f² g2 ⊕ h² g3`, and closed-form component formulas for their
//! connection, curvature and Hessians.

use ndarray::{s, Array1, Array2};
use seqwarp_expr::{parse_expression, Expr, Func, SymbolicField};

use crate::chart::{Chart, ChartPoint};
use crate::compare::{FormulaRecord, Tolerance};
use crate::curvature::{diff_ops, CurvatureBundle};
use crate::error::{GeometryError, Result};
use crate::pseudo_projective::PseudoProjectiveParams;
use crate::sweep::{run_sweep, SpecRegistry};

/// Which family a model was built as; only affects which extra checks run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Generic,
    /// `M1` is a time interval with metric `−dt²`.
    Sgrw,
    /// `M3` is a time interval with metric `−dt²`.
    Ssst,
}

#[derive(Debug, Clone)]
pub struct SequentialModel {
    factors: [Chart; 3],
    f: SymbolicField,
    h: SymbolicField,
    params: PseudoProjectiveParams,
    base: Chart,
    assembled: Chart,
    kind: ModelKind,
}

/// Number of pre-scan points used to check `f > 0` and `h > 0` at construction.
pub const PRESCAN_POINTS: usize = 64;

impl SequentialModel {
    /// `f` must only use `M1` coordinates (slots `0..m1`); `h` only `M1` and
    /// `M2` coordinates (slots `0..m1+m2`), numbered as in the product.
    pub fn new(factors: [Chart; 3], f: Expr, h: Expr, params: PseudoProjectiveParams) -> Result<Self> {
        let dims = [factors[0].dim(), factors[1].dim(), factors[2].dim()];
        let n = dims.iter().sum::<usize>();
        if n < 3 {
            return Err(GeometryError::DimensionTooSmall(n));
        }
        let mut seen: Vec<&str> = Vec::new();
        for c in factors.iter().flat_map(|c| c.coords()) {
            if seen.contains(&c.as_str()) {
                return Err(GeometryError::CoordinateCollision(c.clone()));
            }
            seen.push(c);
        }
        if f.max_var_index().is_some_and(|v| v >= dims[0]) {
            return Err(GeometryError::Invalid(format!(
                "warping function f = `{f}` may only depend on coordinates of `{}`",
                factors[0].name()
            )));
        }
        if h.max_var_index().is_some_and(|v| v >= dims[0] + dims[1]) {
            return Err(GeometryError::Invalid(format!(
                "warping function h = `{h}` may only depend on coordinates of `{}` and `{}`",
                factors[0].name(),
                factors[1].name()
            )));
        }
        let floor = factors
            .iter()
            .map(Chart::degeneracy_floor)
            .fold(f64::INFINITY, f64::min);
        let base = assemble_blocks(
            "base",
            &[(&factors[0], Expr::one()), (&factors[1], Expr::pow(f.clone(), 2))],
        )?
        .with_degeneracy_floor(floor);
        let assembled = assemble_blocks(
            "product",
            &[
                (&factors[0], Expr::one()),
                (&factors[1], Expr::pow(f.clone(), 2)),
                (&factors[2], Expr::pow(h.clone(), 2)),
            ],
        )?
        .with_degeneracy_floor(floor);
        let model = SequentialModel {
            f: SymbolicField::new(f, dims[0]),
            h: SymbolicField::new(h, dims[0] + dims[1]),
            factors,
            params,
            base,
            assembled,
            kind: ModelKind::Generic,
        };
        let mut scan = vec![model.assembled.centre()];
        scan.extend(model.assembled.sample_points(PRESCAN_POINTS, 0));
        model.check_warpings(&scan)?;
        Ok(model)
    }

    /// Parses `f` against `M1` coordinates and `h` against `M1 ∪ M2` coordinates.
    pub fn from_sources(
        factors: [Chart; 3],
        f_src: &str,
        h_src: &str,
        params: PseudoProjectiveParams,
    ) -> Result<Self> {
        let c1: Vec<&str> = factors[0].coords().iter().map(String::as_str).collect();
        let c12: Vec<&str> = c1
            .iter()
            .copied()
            .chain(factors[1].coords().iter().map(String::as_str))
            .collect();
        let f = parse_expression(f_src, &c1).map_err(|source| GeometryError::Parse {
            context: "warping function f".into(),
            src: f_src.into(),
            source,
        })?;
        let h = parse_expression(h_src, &c12).map_err(|source| GeometryError::Parse {
            context: "warping function h".into(),
            src: h_src.into(),
            source,
        })?;
        SequentialModel::new(factors, f, h, params)
    }

    pub fn with_kind(mut self, kind: ModelKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_params(mut self, params: PseudoProjectiveParams) -> Self {
        self.params = params;
        self
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> PseudoProjectiveParams {
        self.params
    }

    pub fn factors(&self) -> &[Chart; 3] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &Chart {
        &self.factors[i]
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.factors[0].dim(), self.factors[1].dim(), self.factors[2].dim()]
    }

    pub fn n(&self) -> usize {
        self.assembled.dim()
    }

    pub fn f(&self) -> &SymbolicField {
        &self.f
    }

    pub fn h(&self) -> &SymbolicField {
        &self.h
    }

    /// The product chart `M1 × M2 × M3` with the block metric.
    pub fn assembled(&self) -> &Chart {
        &self.assembled
    }

    /// The base `M1 ×_f M2` with metric `g1 ⊕ f² g2`.
    pub fn base(&self) -> &Chart {
        &self.base
    }

    /// Offset of factor `i`'s first coordinate in the product chart.
    pub fn offset(&self, i: usize) -> usize {
        self.dims()[..i].iter().sum()
    }

    /// Factor index and local index of product coordinate `a`.
    pub fn block_of(&self, a: usize) -> (usize, usize) {
        let d = self.dims();
        if a < d[0] {
            (0, a)
        } else if a < d[0] + d[1] {
            (1, a - d[0])
        } else {
            (2, a - d[0] - d[1])
        }
    }

    pub fn split(&self, p: &ChartPoint) -> [ChartPoint; 3] {
        let d = self.dims();
        let v = &p.values;
        [
            ChartPoint::new(v[..d[0]].to_vec()),
            ChartPoint::new(v[d[0]..d[0] + d[1]].to_vec()),
            ChartPoint::new(v[d[0] + d[1]..].to_vec()),
        ]
    }

    pub fn base_point(&self, p: &ChartPoint) -> ChartPoint {
        let d = self.dims();
        ChartPoint::new(p.values[..d[0] + d[1]].to_vec())
    }

    /// Hard error if `f` or `h` is not strictly positive at some point.
    pub fn check_warpings(&self, points: &[ChartPoint]) -> Result<()> {
        let d = self.dims();
        for p in points {
            let fv = self
                .f
                .eval(&p.values[..d[0]])
                .map_err(|e| GeometryError::field("warping function f", e))?;
            if !(fv > 0.0) {
                return Err(GeometryError::NonPositiveWarping {
                    name: "f",
                    value: fv,
                    point: p.values.clone(),
                });
            }
            let hv = self
                .h
                .eval(&p.values[..d[0] + d[1]])
                .map_err(|e| GeometryError::field("warping function h", e))?;
            if !(hv > 0.0) {
                return Err(GeometryError::NonPositiveWarping {
                    name: "h",
                    value: hv,
                    point: p.values.clone(),
                });
            }
        }
        Ok(())
    }

    /// Sample points of the product chart; warpings are checked on them.
    pub fn sample_points(&self, count: usize, seed: u64) -> Result<Vec<ChartPoint>> {
        let pts = self.assembled.sample_points(count, seed);
        self.check_warpings(&pts)?;
        Ok(pts)
    }

    /// A generic smooth non-polynomial scalar over all product coordinates.
    pub fn default_probe(&self) -> SymbolicField {
        let names: Vec<&str> = self.assembled.coords().iter().map(String::as_str).collect();
        let n = names.len();
        let mut terms = vec!["1".to_string()];
        for (k, c) in names.iter().enumerate() {
            terms.push(format!("0.3*sin({:.2}*{c} + {:.1})", 0.7 * (k + 1) as f64, 0.1 * k as f64));
            let next = names[(k + 1) % n];
            terms.push(format!("0.2*{c}*{next}"));
        }
        terms.push(format!("0.1*{}^2*{}", names[0], names[n - 1]));
        let src = terms.join(" + ");
        SymbolicField::new(parse_expression(&src, &names).expect("probe parses"), n)
    }
}

/// Block-diagonal chart with block `i` equal to `scale_i · g_i`.
fn assemble_blocks(name: &str, blocks: &[(&Chart, Expr)]) -> Result<Chart> {
    let n: usize = blocks.iter().map(|(c, _)| c.dim()).sum();
    let mut coords = Vec::with_capacity(n);
    let mut domain = Vec::with_capacity(n);
    let mut metric = vec![vec![Expr::zero(); n]; n];
    let mut off = 0;
    for (chart, scale) in blocks {
        let m = chart.dim();
        let shift = move |v: usize| v + off;
        for (i, row) in chart.metric_exprs().into_iter().enumerate() {
            for (j, e) in row.into_iter().enumerate() {
                let e = e.reindex(&shift);
                metric[off + i][off + j] = if scale.as_constant() == Some(1.0) {
                    e
                } else {
                    Expr::mul(scale.clone(), e)
                };
            }
        }
        coords.extend(chart.coords().iter().cloned());
        domain.extend_from_slice(chart.domain());
        off += m;
    }
    Chart::new(name, coords, metric, domain)
}

/// Warping-function scalars shared by the Ricci and scalar formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormAux {
    pub f_sharp: f64,
    pub h_sharp: f64,
    pub grad1f_norm_sq: f64,
    pub gradh_norm_sq: f64,
    pub delta1_f: f64,
    /// Laplacian of `h` on the base `M1 ×_f M2`.
    pub delta_h: f64,
}

/// Factor curvature and warping-function derivatives at one product point.
#[derive(Debug, Clone)]
pub struct ClosedFormContext {
    pub dims: [usize; 3],
    pub n: usize,
    pub point: ChartPoint,
    pub factor: [CurvatureBundle; 3],
    pub f: f64,
    pub df: Array1<f64>,
    pub grad1f: Array1<f64>,
    /// `H1^f` on `M1`.
    pub hess1_f: Array2<f64>,
    /// `[[c, a]] = (∇¹_{∂a} grad₁ f)^c`.
    pub nabla1_grad1f: Array2<f64>,
    pub h: f64,
    /// `∂h` over base coordinates.
    pub dh: Array1<f64>,
    /// `H^h` on the base, assembled blockwise.
    pub hess_h: Array2<f64>,
    /// `X1(ln f) Y2(h)`, the mixed block read without the second derivative.
    pub hess_h12_literal: Array2<f64>,
    pub hess1_h: Array2<f64>,
    pub hess2_h: Array2<f64>,
    pub delta1_h: f64,
    pub delta2_h: f64,
    /// `g1(grad₁h, grad₁f)`.
    pub nabla_h_f: f64,
    pub base_inverse: Array2<f64>,
    pub grad_h: Array1<f64>,
    /// Laplacian of `h` taken on the whole product.
    pub delta_h_product: f64,
    /// `[[c, a]] = (∇̄_{∂a} grad h)^c` for base directions.
    pub nabla_grad_h: Array2<f64>,
    pub aux: ClosedFormAux,
    pub ric11: Array2<f64>,
    pub ric22: Array2<f64>,
    pub ric33: Array2<f64>,
    pub ric12: Array2<f64>,
    pub scalar: f64,
    pub scalar_product_laplacian: f64,
}

fn hessian_from(ddphi: &Array2<f64>, dphi: &Array1<f64>, gamma: &ndarray::Array3<f64>) -> Array2<f64> {
    let m = dphi.len();
    Array2::from_shape_fn((m, m), |(a, b)| {
        ddphi[[a, b]] - (0..m).map(|c| gamma[[c, a, b]] * dphi[c]).sum::<f64>()
    })
}

fn trace_with(inv: &Array2<f64>, t: &Array2<f64>) -> f64 {
    (inv * t).sum()
}

impl ClosedFormContext {
    pub fn new(model: &SequentialModel, p: &ChartPoint) -> Result<Self> {
        let dims = model.dims();
        let [m1, m2, m3] = dims;
        let b = m1 + m2;
        let n = b + m3;
        let parts = model.split(p);
        let factor = [
            model.factors[0].curvature(&parts[0])?,
            model.factors[1].curvature(&parts[1])?,
            model.factors[2].curvature(&parts[2])?,
        ];
        let ft = model
            .f
            .evaluate_with_derivatives(&parts[0].values, 2)
            .map_err(|e| GeometryError::field("warping function f", e))?;
        let bp = model.base_point(p);
        let ht = model
            .h
            .evaluate_with_derivatives(&bp.values, 2)
            .map_err(|e| GeometryError::field("warping function h", e))?;
        let fv = ft.value();
        let hv = ht.value();
        for (name, value) in [("f", fv), ("h", hv)] {
            if !(value > 0.0) {
                return Err(GeometryError::NonPositiveWarping {
                    name,
                    value,
                    point: p.values.clone(),
                });
            }
        }

        let [b1, b2, b3] = &factor;
        let df = Array1::from_shape_fn(m1, |a| ft.d1(a));
        let ddf = Array2::from_shape_fn((m1, m1), |(a, c)| ft.d2(a, c));
        let hess1_f = hessian_from(&ddf, &df, &b1.christoffel);
        let grad1f = b1.inverse.dot(&df);
        let grad1f_norm_sq = grad1f.dot(&df);
        let delta1_f = trace_with(&b1.inverse, &hess1_f);
        let nabla1_grad1f = b1.inverse.dot(&hess1_f);

        let dh = Array1::from_shape_fn(b, |a| ht.d1(a));
        let ddh = Array2::from_shape_fn((b, b), |(a, c)| ht.d2(a, c));
        let hess1_h = hessian_from(
            &ddh.slice(s![..m1, ..m1]).to_owned(),
            &dh.slice(s![..m1]).to_owned(),
            &b1.christoffel,
        );
        let hess2_h = hessian_from(
            &ddh.slice(s![m1.., m1..]).to_owned(),
            &dh.slice(s![m1..]).to_owned(),
            &b2.christoffel,
        );
        let nabla_h_f = dh.slice(s![..m1]).dot(&grad1f);
        let mut hess_h = Array2::<f64>::zeros((b, b));
        let mut hess_h12_literal = Array2::<f64>::zeros((m1, m2));
        for a in 0..m1 {
            for c in 0..m1 {
                hess_h[[a, c]] = hess1_h[[a, c]];
            }
            for c in 0..m2 {
                let v = ddh[[a, m1 + c]] - df[a] / fv * dh[m1 + c];
                hess_h[[a, m1 + c]] = v;
                hess_h[[m1 + c, a]] = v;
                hess_h12_literal[[a, c]] = df[a] / fv * dh[m1 + c];
            }
        }
        for a in 0..m2 {
            for c in 0..m2 {
                hess_h[[m1 + a, m1 + c]] = fv * nabla_h_f * b2.metric[[a, c]] + hess2_h[[a, c]];
            }
        }

        let mut base_inverse = Array2::<f64>::zeros((b, b));
        base_inverse.slice_mut(s![..m1, ..m1]).assign(&b1.inverse);
        base_inverse
            .slice_mut(s![m1.., m1..])
            .assign(&(&b2.inverse / (fv * fv)));
        let grad_h = base_inverse.dot(&dh);
        let gradh_norm_sq = grad_h.dot(&dh);
        let delta1_h = trace_with(&b1.inverse, &hess1_h);
        let delta2_h = trace_with(&b2.inverse, &hess2_h);
        let delta_h = trace_with(&base_inverse, &hess_h);
        let delta_h_product = delta_h + m3 as f64 * gradh_norm_sq / hv;
        let nabla_grad_h = base_inverse.dot(&hess_h);

        let (m2f, m3f) = (m2 as f64, m3 as f64);
        let f_sharp = fv * delta1_f + (m2f - 1.0) * grad1f_norm_sq;
        let h_sharp = hv * delta_h + (m3f - 1.0) * gradh_norm_sq;

        let ric11 = &b1.ricci - &(&hess1_f * (m2f / fv)) - &(&hess1_h * (m3f / hv));
        let hh22 = hess_h.slice(s![m1.., m1..]).to_owned();
        let ric22 = &b2.ricci - &(&b2.metric * f_sharp) - &(&hh22 * (m3f / hv));
        let ric33 = &b3.ricci - &(&b3.metric * h_sharp);
        let ric12 = hess_h.slice(s![..m1, m1..]).to_owned() * (-m3f / hv);

        let scalar_with = |lap_h: f64| {
            b1.scalar + b2.scalar / (fv * fv) + b3.scalar / (hv * hv)
                - 2.0 * m2f / fv * delta1_f
                - 2.0 * m3f / hv * lap_h
                - m2f * (m2f - 1.0) / (fv * fv) * grad1f_norm_sq
                - m3f * (m3f - 1.0) / (hv * hv) * gradh_norm_sq
        };
        let scalar = scalar_with(delta_h);
        let scalar_product_laplacian = scalar_with(delta_h_product);

        Ok(ClosedFormContext {
            dims,
            n,
            point: p.clone(),
            f: fv,
            df,
            grad1f,
            hess1_f,
            nabla1_grad1f,
            h: hv,
            dh,
            hess_h,
            hess_h12_literal,
            hess1_h,
            hess2_h,
            delta1_h,
            delta2_h,
            nabla_h_f,
            base_inverse,
            grad_h,
            delta_h_product,
            nabla_grad_h,
            aux: ClosedFormAux {
                f_sharp,
                h_sharp,
                grad1f_norm_sq,
                gradh_norm_sq,
                delta1_f,
                delta_h,
            },
            ric11,
            ric22,
            ric33,
            ric12,
            scalar,
            scalar_product_laplacian,
            factor,
        })
    }

    pub fn offset(&self, block: usize) -> usize {
        self.dims[..block].iter().sum()
    }

    pub fn block_of(&self, a: usize) -> (usize, usize) {
        let d = self.dims;
        if a < d[0] {
            (0, a)
        } else if a < d[0] + d[1] {
            (1, a - d[0])
        } else {
            (2, a - d[0] - d[1])
        }
    }

    /// Zero vector over product coordinates.
    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.n]
    }

    /// Unit vector `∂_a` scaled by `c`.
    pub fn unit(&self, a: usize, c: f64) -> Vec<f64> {
        let mut v = self.zeros();
        v[a] = c;
        v
    }

    /// Factor-metric block `g_i` entry at local indices.
    pub fn g(&self, block: usize, a: usize, b: usize) -> f64 {
        self.factor[block].metric[[a, b]]
    }

    /// `∇̄_{∂a} grad h` for a base coordinate `a`, as a product vector.
    pub fn nabla_grad_h_vec(&self, a: usize) -> Vec<f64> {
        let mut v = self.zeros();
        for c in 0..self.dims[0] + self.dims[1] {
            v[c] = self.nabla_grad_h[[c, a]];
        }
        v
    }

    /// Full product Ricci tensor from the closed-form blocks.
    pub fn ricci_matrix(&self) -> Array2<f64> {
        let [m1, m2, _] = self.dims;
        let b = m1 + m2;
        let mut r = Array2::<f64>::zeros((self.n, self.n));
        r.slice_mut(s![..m1, ..m1]).assign(&self.ric11);
        r.slice_mut(s![m1..b, m1..b]).assign(&self.ric22);
        r.slice_mut(s![b.., b..]).assign(&self.ric33);
        r.slice_mut(s![..m1, m1..b]).assign(&self.ric12);
        r.slice_mut(s![m1..b, ..m1]).assign(&self.ric12.t());
        r
    }
}

fn add_scaled(v: &mut [f64], w: &[f64], c: f64) {
    for (x, y) in v.iter_mut().zip(w) {
        *x += c * y;
    }
}

/// `[g(Y,Z)X − g(X,Z)Y]` for local indices in one factor block, embedded.
pub(crate) fn wedge(ctx: &ClosedFormContext, block: usize, x: usize, y: usize, z: usize, scale: f64) -> Vec<f64> {
    let off = ctx.offset(block);
    let mut v = ctx.zeros();
    v[off + x] += scale * ctx.g(block, y, z);
    v[off + y] -= scale * ctx.g(block, x, z);
    v
}

/// `R_i(∂x, ∂y)∂z` of factor `block`, embedded.
pub(crate) fn factor_riemann(ctx: &ClosedFormContext, block: usize, x: usize, y: usize, z: usize) -> Vec<f64> {
    let off = ctx.offset(block);
    let mut v = ctx.zeros();
    for l in 0..ctx.dims[block] {
        v[off + l] = ctx.factor[block].riemann[[l, x, y, z]];
    }
    v
}

/// `[T(Y,Z)X − T(X,Z)Y]` for a block-local symmetric tensor `t`.
pub(crate) fn tensor_wedge(ctx: &ClosedFormContext, block: usize, t: &Array2<f64>, x: usize, y: usize, z: usize) -> Vec<f64> {
    let off = ctx.offset(block);
    let mut v = ctx.zeros();
    v[off + x] += t[[y, z]];
    v[off + y] -= t[[x, z]];
    v
}

// ---------------------------------------------------------------------------
// Closed forms

/// Readings of `∇̄_{∂a}∂b`. Reading 1 for the `M3`-`M3` block takes the
/// gradient of `h` inside `M3`, where it vanishes.
pub fn connection_closed_form(ctx: &ClosedFormContext, a: usize, b: usize) -> (usize, Vec<Vec<f64>>) {
    let (ba, la) = ctx.block_of(a);
    let (bb, lb) = ctx.block_of(b);
    let mut v = ctx.zeros();
    let blocks = if ba <= bb { (ba, bb) } else { (bb, ba) };
    let case = match blocks {
        (0, 0) | (1, 1) | (2, 2) => {
            let off = ctx.offset(ba);
            for c in 0..ctx.dims[ba] {
                v[off + c] = ctx.factor[ba].christoffel[[c, la, lb]];
            }
            match ba {
                0 => 1,
                1 => {
                    let c = -ctx.f * ctx.g(1, la, lb);
                    for k in 0..ctx.dims[0] {
                        v[k] += c * ctx.grad1f[k];
                    }
                    3
                }
                _ => {
                    let only_fibre = v.clone();
                    let c = -ctx.h * ctx.g(2, la, lb);
                    for k in 0..ctx.dims[0] + ctx.dims[1] {
                        v[k] += c * ctx.grad_h[k];
                    }
                    return (6, vec![v, only_fibre]);
                }
            }
        }
        (0, 1) => {
            let (x1, y2) = if ba == 0 { (la, b) } else { (lb, a) };
            v[y2] = ctx.df[x1] / ctx.f;
            2
        }
        (0, 2) | (1, 2) => {
            let (xb, y3) = if ba < 2 { (a, b) } else { (b, a) };
            v[y3] = ctx.dh[xb] / ctx.h;
            if blocks.0 == 0 {
                4
            } else {
                5
            }
        }
        _ => unreachable!(),
    };
    (case, vec![v.clone(), v])
}

/// Block patterns `(X, Y, Z)` covered by each listed Riemann case.
pub const RIEMANN_PATTERNS: [&[[usize; 3]]; 7] = [
    &[[0, 0, 0]],
    &[[1, 1, 1]],
    &[[0, 1, 0]],
    &[[0, 1, 1]],
    &[[0, 2, 0], [0, 2, 1], [1, 2, 0], [1, 2, 1]],
    &[[0, 2, 2], [1, 2, 2]],
    &[[2, 2, 2]],
];

/// Readings of `R̄(∂a, ∂b)∂c` for Riemann case `case` (1-based).
/// Reading 1 uses `X(ln f) Z(h)` for the mixed base Hessian.
pub fn riemann_closed_form(ctx: &ClosedFormContext, case: usize, a: usize, b: usize, c: usize) -> Result<Vec<Vec<f64>>> {
    let (_, x) = ctx.block_of(a);
    let (_, y) = ctx.block_of(b);
    let (bc, z) = ctx.block_of(c);
    let v = match case {
        1 => factor_riemann(ctx, 0, x, y, z),
        2 => {
            let mut v = factor_riemann(ctx, 1, x, y, z);
            add_scaled(&mut v, &wedge(ctx, 1, x, y, z, 1.0), -ctx.aux.grad1f_norm_sq);
            v
        }
        3 => ctx.unit(b, ctx.hess1_f[[x, z]] / ctx.f),
        4 => {
            let mut v = ctx.zeros();
            let s = -ctx.f * ctx.g(1, y, z);
            for k in 0..ctx.dims[0] {
                v[k] = s * ctx.nabla1_grad1f[[k, x]];
            }
            v
        }
        5 => {
            let adopted = ctx.unit(b, ctx.hess_h[[a, c]] / ctx.h);
            let (ba, _) = ctx.block_of(a);
            let literal = if ba != bc {
                let (i1, j2) = if ba == 0 { (x, z) } else { (z, x) };
                ctx.unit(b, ctx.hess_h12_literal[[i1, j2]] / ctx.h)
            } else {
                adopted.clone()
            };
            return Ok(vec![adopted, literal]);
        }
        6 => {
            let mut v = ctx.nabla_grad_h_vec(a);
            let s = -ctx.h * ctx.g(2, y, z);
            v.iter_mut().for_each(|e| *e *= s);
            v
        }
        7 => {
            let mut v = factor_riemann(ctx, 2, x, y, z);
            add_scaled(&mut v, &wedge(ctx, 2, x, y, z, 1.0), -ctx.aux.gradh_norm_sq);
            v
        }
        _ => {
            return Err(GeometryError::InvalidCase {
                formula: "riemann",
                case,
            })
        }
    };
    Ok(vec![v.clone(), v])
}

/// Whether block triple `t` is listed (up to the `X,Y` antisymmetry) in `patterns`.
pub(crate) fn covered(patterns: &[&[[usize; 3]]], t: [usize; 3]) -> bool {
    patterns
        .iter()
        .flat_map(|p| p.iter())
        .any(|p| *p == t || *p == [t[1], t[0], t[2]])
}

/// Coordinate triples of the product matching a block pattern.
pub(crate) fn triples(dims: [usize; 3], pattern: [usize; 3]) -> Vec<[usize; 3]> {
    let off = [0, dims[0], dims[0] + dims[1]];
    let range = |blk: usize| off[blk]..off[blk] + dims[blk];
    let mut out = Vec::new();
    for a in range(pattern[0]) {
        for b in range(pattern[1]) {
            for c in range(pattern[2]) {
                out.push([a, b, c]);
            }
        }
    }
    out
}

pub(crate) fn all_block_triples() -> Vec<[usize; 3]> {
    let mut v = Vec::new();
    for x in 0..3 {
        for y in 0..3 {
            for z in 0..3 {
                v.push([x, y, z]);
            }
        }
    }
    v
}

/// Lemma-style Hessian blocks of an arbitrary product scalar `φ`.
///
/// `dphi`, `ddphi` are product partials. Returns the six block readings
/// (adopted, literal) as flattened row-major blocks.
pub fn hessian_closed_form(ctx: &ClosedFormContext, dphi: &Array1<f64>, ddphi: &Array2<f64>) -> Vec<[Vec<f64>; 2]> {
    let [m1, m2, m3] = ctx.dims;
    let off = [0, m1, m1 + m2];
    let local_hess = |blk: usize| {
        let o = off[blk];
        let d = dphi.slice(s![o..o + ctx.dims[blk]]).to_owned();
        let dd = ddphi.slice(s![o..o + ctx.dims[blk], o..o + ctx.dims[blk]]).to_owned();
        hessian_from(&dd, &d, &ctx.factor[blk].christoffel)
    };
    let mixed = |bx: usize, by: usize, log_d: &dyn Fn(usize) -> f64| {
        let mut adopted = Vec::new();
        let mut literal = Vec::new();
        for i in 0..ctx.dims[bx] {
            for j in 0..ctx.dims[by] {
                let (a, b) = (off[bx] + i, off[by] + j);
                let lit = log_d(a) * dphi[b];
                adopted.push(ddphi[[a, b]] - lit);
                literal.push(lit);
            }
        }
        [adopted, literal]
    };
    let dlnf = |a: usize| ctx.df[a] / ctx.f;
    let dlnh = |a: usize| ctx.dh[a] / ctx.h;

    let h1 = local_hess(0).into_iter().collect::<Vec<_>>();
    // ∇φ(f) = g1(grad₁φ, grad₁f)
    let phi_f = dphi.slice(s![..m1]).dot(&ctx.grad1f);
    let h2 = local_hess(1);
    let b4: Vec<f64> = (0..m2)
        .flat_map(|i| (0..m2).map(move |j| (i, j)))
        .map(|(i, j)| ctx.f * phi_f * ctx.g(1, i, j) + h2[[i, j]])
        .collect();
    // ∇φ(h) = ḡ(grad φ, grad h), both gradients living in the base
    let phi_h = dphi.slice(s![..m1 + m2]).dot(&ctx.grad_h);
    let h3 = local_hess(2);
    let b6: Vec<f64> = (0..m3)
        .flat_map(|i| (0..m3).map(move |j| (i, j)))
        .map(|(i, j)| ctx.h * phi_h * ctx.g(2, i, j) + h3[[i, j]])
        .collect();
    vec![
        [h1.clone(), h1],
        mixed(0, 1, &dlnf),
        mixed(0, 2, &dlnh),
        [b4.clone(), b4],
        mixed(1, 2, &dlnh),
        [b6.clone(), b6],
    ]
}

/// Block pairs for the six Hessian cases.
pub const HESSIAN_BLOCKS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn block_flat(m: &Array2<f64>, dims: [usize; 3], bx: usize, by: usize) -> Vec<f64> {
    let off = [0, dims[0], dims[0] + dims[1]];
    let mut v = Vec::new();
    for i in 0..dims[bx] {
        for j in 0..dims[by] {
            v.push(m[[off[bx] + i, off[by] + j]]);
        }
    }
    v
}

/// `‖(m/φ)H^φ − H^{m ln φ} − (1/m) d(m ln φ) ⊗ d(m ln φ)‖_∞`.
pub fn hessian_scaling_identity(chart: &Chart, bundle: &CurvatureBundle, phi: &SymbolicField, m: f64) -> Result<f64> {
    let (lhs, rhs) = hessian_scaling_sides(chart, bundle, phi, &scaled_log(phi, m), m)?;
    Ok(lhs
        .iter()
        .zip(&rhs)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs())))
}

/// The field `m ln φ`.
pub fn scaled_log(phi: &SymbolicField, m: f64) -> SymbolicField {
    SymbolicField::new(
        Expr::mul(Expr::constant(m), Expr::call(Func::Ln, phi.expr().clone())),
        phi.nvars(),
    )
}

/// Both sides of the scaling identity, flattened.
pub fn hessian_scaling_sides(
    chart: &Chart,
    bundle: &CurvatureBundle,
    phi: &SymbolicField,
    m_ln_phi: &SymbolicField,
    m: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if m == 0.0 {
        return Err(GeometryError::Invalid("scaling identity needs m != 0".into()));
    }
    let a = chart.diff_ops(phi, bundle)?;
    if !(a.value > 0.0) {
        return Err(GeometryError::NonPositiveWarping {
            name: "phi",
            value: a.value,
            point: bundle.point.values.clone(),
        });
    }
    let b = chart.diff_ops(m_ln_phi, bundle)?;
    let n = bundle.dim();
    let lhs = (&a.hessian * (m / a.value)).iter().copied().collect();
    let rhs = Array2::from_shape_fn((n, n), |(i, j)| {
        b.hessian[[i, j]] + b.differential[i] * b.differential[j] / m
    })
    .iter()
    .copied()
    .collect();
    Ok((lhs, rhs))
}

// ---------------------------------------------------------------------------
// Verification sweep

/// Options shared by verification sweeps.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub tol: Tolerance,
    pub fault: Option<String>,
    /// Product scalar used for the Hessian cases; defaults to [`SequentialModel::default_probe`].
    pub probe: Option<SymbolicField>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol: Tolerance::VERIFY,
            fault: None,
            probe: None,
        }
    }
}

const CONNECTION_ANCHORS: [&str; 6] = [
    "connection: nabla_{X1} Y1 = nabla^1_{X1} Y1",
    "connection: nabla_{X1} X2 = X1(ln f) X2",
    "connection: nabla_{X2} Y2 = nabla^2_{X2} Y2 - f g2(X2,Y2) grad_1 f",
    "connection: nabla_{X1} X3 = X1(ln h) X3",
    "connection: nabla_{X2} X3 = X2(ln h) X3",
    "connection: nabla_{X3} Y3 = nabla^3_{X3} Y3 - h g3(X3,Y3) grad h",
];

const RIEMANN_ANCHORS: [&str; 7] = [
    "riemann: R(X1,Y1)Z1 = R1(X1,Y1)Z1",
    "riemann: R(X2,Y2)Z2 = R2 - |grad_1 f|^2 [g2(Y2,Z2)X2 - g2(X2,Z2)Y2]",
    "riemann: R(X1,Y2)Z1 = (1/f) H1^f(X1,Z1) Y2",
    "riemann: R(X1,Y2)Z2 = -f g2(Y2,Z2) nabla^1_{X1} grad_1 f",
    "riemann: R(Xi,Y3)Zj = (1/h) H^h(Xi,Zj) Y3, i,j in {1,2}",
    "riemann: R(Xi,Y3)Z3 = -h g3(Y3,Z3) nabla_{Xi} grad h, i in {1,2}",
    "riemann: R(X3,Y3)Z3 = R3 - |grad h|^2 [g3(Y3,Z3)X3 - g3(X3,Z3)Y3]",
];

const HESSIAN_ANCHORS: [&str; 6] = [
    "hessian: H^phi(X1,Y1) = H1^phi(X1,Y1)",
    "hessian: H^phi(X1,Y2) = X1Y2(phi) - X1(ln f) Y2(phi)",
    "hessian: H^phi(X1,Y3) = X1Y3(phi) - X1(ln h) Y3(phi)",
    "hessian: H^phi(X2,Y2) = f (grad phi)(f) g2(X2,Y2) + H2^phi(X2,Y2)",
    "hessian: H^phi(X2,Y3) = X2Y3(phi) - X2(ln h) Y3(phi)",
    "hessian: H^phi(X3,Y3) = h (grad phi)(h) g3(X3,Y3) + H3^phi(X3,Y3)",
];

/// Compares every connection, curvature, Ricci, scalar and Hessian closed
/// form against the oracle of the assembled metric at `points`.
pub fn verify_lemmas(model: &SequentialModel, points: &[ChartPoint], opts: &VerifyOptions) -> Result<Vec<FormulaRecord>> {
    model.check_warpings(points)?;
    let tol = opts.tol;
    let mut reg = SpecRegistry::new();
    let conn: Vec<usize> = (0..6)
        .map(|k| {
            let variants: &[&str] = if k == 5 {
                &["gradient of h on the base", "gradient of h inside M3"]
            } else {
                &["adopted", "as printed"]
            };
            reg.add(&format!("lemma.connection.{}", k + 1), CONNECTION_ANCHORS[k], variants, tol)
        })
        .collect();
    reg.note(conn[5], "grad h is the base gradient, equal to the gradient on the product");
    let riem: Vec<usize> = (0..7)
        .map(|k| {
            let variants: &[&str] = if k == 4 {
                &["mixed base Hessian with second derivative", "mixed base Hessian X(ln f) Z(h)"]
            } else {
                &["adopted", "as printed"]
            };
            reg.add(&format!("lemma.riemann.{}", k + 1), RIEMANN_ANCHORS[k], variants, tol)
        })
        .collect();
    let riem_unlisted = reg.add(
        "lemma.riemann.unlisted",
        "riemann: every block triple outside the listed cases vanishes",
        &[],
        tol,
    );
    let ric11 = reg.add(
        "lemma.ricci.1",
        "ricci: Ric(X1,Y1) = Ric1 - (m2/f) H1^f - (m3/h) H^h",
        &[],
        tol,
    );
    let ric22 = reg.add(
        "lemma.ricci.2",
        "ricci: Ric(X2,Y2) = Ric2 - f# g2 - (m3/h) H^h(X2,Y2)",
        &["base Hessian of h", "factor Hessian H2^h"],
        tol,
    );
    let ric33 = reg.add(
        "lemma.ricci.3",
        "ricci: Ric(X3,Y3) = Ric3 - h# g3",
        &["Laplacian of h on the base", "Laplacian of h on the product"],
        tol,
    );
    let ric12 = reg.add(
        "lemma.ricci.mixed12",
        "ricci: Ric(X1,Y2) = -(m3/h) H^h(X1,Y2)",
        &["mixed block present", "mixed block omitted"],
        tol,
    );
    reg.note(
        ric12,
        "the (1,2) block is not listed among the non-zero components but is generally non-zero",
    );
    let ric_zero = reg.add(
        "lemma.ricci.mixed_zero",
        "ricci: Ric(X1,Y3) = Ric(X2,Y3) = 0",
        &[],
        tol,
    );
    let scalar = reg.add(
        "lemma.scalar",
        "scalar: tau = tau1 + tau2/f^2 + tau3/h^2 - (2 m2/f) Delta1 f - (2 m3/h) Delta h - m2(m2-1)/f^2 |grad_1 f|^2 - m3(m3-1)/h^2 |grad h|^2",
        &["Laplacian of h on the base", "Laplacian of h on the product"],
        tol,
    );
    reg.note(scalar, "r2, r3 read as the factor scalar curvatures tau2, tau3");
    let aux = reg.add(
        "lemma.ricci.aux",
        "f# = f Delta1 f + (m2-1)|grad_1 f|^2, h# = h Delta h + (m3-1)|grad h|^2",
        &[],
        Tolerance::CONSISTENCY,
    );
    let hess: Vec<usize> = (0..6)
        .map(|k| {
            reg.add(
                &format!("lemma.hessian.{}", k + 1),
                HESSIAN_ANCHORS[k],
                &["adopted", "as printed"],
                tol,
            )
        })
        .collect();
    for k in [1, 2, 4] {
        reg.note(hess[k], "printed form omits the second derivative and carries the opposite sign");
    }
    let hess_base = reg.add(
        "lemma.hessian.base",
        "hessian: blockwise H^h equals the Hessian of h on g1 + f^2 g2",
        &[],
        tol,
    );
    let scaling = reg.add(
        "identity.hessian_scaling",
        "(m/phi) H^phi = H^{m ln phi} + (1/m) d(m ln phi) (x) d(m ln phi)",
        &[],
        Tolerance::new(1e-10, 1e-10),
    );

    let probe = opts.probe.clone().unwrap_or_else(|| model.default_probe());
    let n = model.n();
    let d = model.dims();
    let h_prod = SymbolicField::new(model.h().expr().clone(), n);
    let f_prod = SymbolicField::new(model.f().expr().clone(), n);
    let scaling_probes: Vec<(SymbolicField, SymbolicField, f64)> = [(h_prod, d[2] as f64), (f_prod, -3.0)]
        .into_iter()
        .map(|(phi, m)| {
            let ml = scaled_log(&phi, m);
            (phi, ml, m)
        })
        .collect();

    run_sweep(&reg, points, opts.fault.as_deref(), |p, sink| {
        let oracle = model.assembled().curvature(p)?;
        let ctx = ClosedFormContext::new(model, p)?;

        for a in 0..n {
            for b in 0..n {
                let (case, readings) = connection_closed_form(&ctx, a, b);
                let o: Vec<f64> = (0..n).map(|k| oracle.christoffel[[k, a, b]]).collect();
                sink.compare(conn[case - 1], &o, readings);
            }
        }

        for blocks in all_block_triples() {
            let listed = RIEMANN_PATTERNS
                .iter()
                .position(|pats| pats.contains(&blocks));
            for [a, b, c] in triples(d, blocks) {
                let o: Vec<f64> = (0..n).map(|l| oracle.riemann[[l, a, b, c]]).collect();
                match listed {
                    Some(k) => sink.compare(riem[k], &o, riemann_closed_form(&ctx, k + 1, a, b, c)?),
                    None if !covered(&RIEMANN_PATTERNS, blocks) => sink.residual(riem_unlisted, &o),
                    None => {}
                }
            }
        }

        let ric = &oracle.ricci;
        let m1 = d[0];
        let b = d[0] + d[1];
        let flat = |m: ndarray::ArrayView2<f64>| m.iter().copied().collect::<Vec<f64>>();
        sink.compare(ric11, &flat(ric.slice(s![..m1, ..m1])), vec![flat(ctx.ric11.view())]);
        let ric22_factor = &ctx.factor[1].ricci
            - &(&ctx.factor[1].metric * ctx.aux.f_sharp)
            - &(&ctx.hess2_h * (d[2] as f64 / ctx.h));
        sink.compare(
            ric22,
            &flat(ric.slice(s![m1..b, m1..b])),
            vec![flat(ctx.ric22.view()), flat(ric22_factor.view())],
        );
        let h_sharp_prod = ctx.h * ctx.delta_h_product + (d[2] as f64 - 1.0) * ctx.aux.gradh_norm_sq;
        let ric33_prod = &ctx.factor[2].ricci - &(&ctx.factor[2].metric * h_sharp_prod);
        sink.compare(
            ric33,
            &flat(ric.slice(s![b.., b..])),
            vec![flat(ctx.ric33.view()), flat(ric33_prod.view())],
        );
        let o12 = flat(ric.slice(s![..m1, m1..b]));
        sink.compare(ric12, &o12, vec![flat(ctx.ric12.view()), vec![0.0; o12.len()]]);
        let mut z = flat(ric.slice(s![..b, b..]));
        z.extend(flat(ric.slice(s![b.., ..b])));
        sink.residual(ric_zero, &z);
        sink.compare(
            scalar,
            &[oracle.scalar],
            vec![vec![ctx.scalar], vec![ctx.scalar_product_laplacian]],
        );
        let (m2f, m3f) = (d[1] as f64, d[2] as f64);
        sink.compare(
            aux,
            &[
                ctx.f * ctx.aux.delta1_f + (m2f - 1.0) * ctx.aux.grad1f_norm_sq,
                ctx.h * ctx.aux.delta_h + (m3f - 1.0) * ctx.aux.gradh_norm_sq,
            ],
            vec![vec![ctx.aux.f_sharp, ctx.aux.h_sharp]],
        );

        let pt = probe
            .evaluate_with_derivatives(&p.values, 2)
            .map_err(|e| GeometryError::field("Hessian probe", e))?;
        let ops = diff_ops(&oracle, &pt);
        let ddphi = Array2::from_shape_fn((n, n), |(i, j)| pt.d2(i, j));
        let cf = hessian_closed_form(&ctx, &ops.differential, &ddphi);
        for (k, [adopted, literal]) in cf.into_iter().enumerate() {
            let (bx, by) = HESSIAN_BLOCKS[k];
            sink.compare(hess[k], &block_flat(&ops.hessian, d, bx, by), vec![adopted, literal]);
        }

        let bb = model.base().curvature(&model.base_point(p))?;
        let hb = model.base().diff_ops(model.h(), &bb)?;
        sink.compare(hess_base, &flat(hb.hessian.view()), vec![flat(ctx.hess_h.view())]);

        for (phi, ml, m) in &scaling_probes {
            let (lhs, rhs) = hessian_scaling_sides(model.assembled(), &oracle, phi, ml, *m)?;
            sink.compare(scaling, &rhs, vec![lhs]);
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compare::Verdict;

    fn line(name: &str, c: &str) -> Chart {
        Chart::euclidean(name, &[c], 1.0)
    }

    fn params() -> PseudoProjectiveParams {
        PseudoProjectiveParams::new(1.0, 0.5).unwrap()
    }

    #[test]
    fn flat_triple_assembles_to_identity() {
        let m = SequentialModel::from_sources([line("A", "x"), line("B", "y"), line("C", "z")], "1", "1", params())
            .unwrap();
        let g = m.assembled().metric_at(&m.assembled().centre()).unwrap().g;
        assert_eq!(g, Array2::eye(3));
        assert_eq!(m.n(), 3);
    }

    #[test]
    fn exponential_warp_blocks() {
        let m = SequentialModel::from_sources([line("A", "x"), line("B", "y"), line("C", "z")], "exp(x)", "1", params())
            .unwrap();
        let p = ChartPoint::new(vec![0.3, 0.1, -0.2]);
        let g = m.assembled().metric_at(&p).unwrap().g;
        assert!((g[[1, 1]] - (0.6_f64).exp()).abs() < 1e-14);
        assert_eq!(g[[0, 0]], 1.0);
        assert_eq!(g[[2, 2]], 1.0);
        assert_eq!(g[[0, 1]], 0.0);

        // Ric̄(∂x, ∂x) = −m2 f''/f = −1
        let ctx = ClosedFormContext::new(&m, &p).unwrap();
        assert!((ctx.ric11[[0, 0]] + 1.0).abs() < 1e-14);
        // Connection case 2 coefficient X1(ln f) = 1.
        let (case, r) = connection_closed_form(&ctx, 0, 1);
        assert_eq!(case, 2);
        assert!((r[0][1] - 1.0).abs() < 1e-15);
        // Hyperbolic plane times a line: scalar curvature −2.
        assert!((ctx.scalar + 2.0).abs() < 1e-13);
        // Riemann case 4: −f g2 ∇¹ grad f = −e^{2x} ∂x
        let v = &riemann_closed_form(&ctx, 4, 0, 1, 1).unwrap()[0];
        assert!((v[0] + (0.6_f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn collisions_and_bad_warpings_rejected() {
        let err = SequentialModel::from_sources([line("A", "x"), line("B", "x"), line("C", "z")], "1", "1", params())
            .unwrap_err();
        assert!(matches!(err, GeometryError::CoordinateCollision(_)));
        let err = SequentialModel::from_sources([line("A", "x"), line("B", "y"), line("C", "z")], "x", "1", params())
            .unwrap_err();
        assert!(matches!(err, GeometryError::NonPositiveWarping { name: "f", .. }));
        let err = SequentialModel::from_sources([line("A", "x"), line("B", "y"), line("C", "z")], "1", "2 + z", params())
            .unwrap_err();
        assert!(matches!(err, GeometryError::Parse { .. }));
    }

    #[test]
    fn scaling_identity_examples() {
        let e2 = Chart::euclidean("E2", &["x", "y"], 1.0);
        let p = ChartPoint::new(vec![0.3, -0.2]);
        let b = e2.curvature(&p).unwrap();
        let phi = SymbolicField::new(parse_expression("exp(x)", &["x", "y"]).unwrap(), 2);
        assert!(hessian_scaling_identity(&e2, &b, &phi, 2.0).unwrap() < 1e-10);
        let c = SymbolicField::new(parse_expression("3", &["x", "y"]).unwrap(), 2);
        assert_eq!(hessian_scaling_identity(&e2, &b, &c, 2.0).unwrap(), 0.0);
        let e1 = Chart::euclidean("E1", &["x"], 1.0);
        let p = ChartPoint::new(vec![0.7]);
        let b = e1.curvature(&p).unwrap();
        let phi = SymbolicField::new(parse_expression("1 + x^2", &["x"]).unwrap(), 1);
        assert!(hessian_scaling_identity(&e1, &b, &phi, -3.0).unwrap() < 1e-10);
        let neg = SymbolicField::new(parse_expression("-1 - x^2", &["x"]).unwrap(), 1);
        assert!(hessian_scaling_identity(&e1, &b, &neg, 2.0).is_err());
    }

    #[test]
    fn trivial_model_verifies_exactly() {
        let m = SequentialModel::from_sources([line("A", "x"), line("B", "y"), line("C", "z")], "1", "1", params())
            .unwrap();
        let pts = m.sample_points(5, 0).unwrap();
        let recs = verify_lemmas(&m, &pts, &VerifyOptions::default()).unwrap();
        for r in &recs {
            assert_eq!(r.verdict, Verdict::Pass, "{}", r.id);
            assert!(r.max_abs < 1e-12, "{} {}", r.id, r.max_abs);
        }
    }

    #[test]
    fn mixed_hessian_sign_example() {
        // φ = y on E¹ ×_{e^x} E¹ × E¹: H^φ(∂x, ∂y) = −X1(ln f) Y2(φ) = −1.
        let m = SequentialModel::from_sources([line("A", "x"), line("B", "y"), line("C", "z")], "exp(x)", "1", params())
            .unwrap();
        let p = ChartPoint::new(vec![0.2, 0.3, 0.4]);
        let b = m.assembled().curvature(&p).unwrap();
        let phi = SymbolicField::new(parse_expression("y", &["x", "y", "z"]).unwrap(), 3);
        let ops = m.assembled().diff_ops(&phi, &b).unwrap();
        assert!((ops.hessian[[0, 1]] + 1.0).abs() < 1e-14);
        let ctx = ClosedFormContext::new(&m, &p).unwrap();
        let t = phi.evaluate_with_derivatives(&p.values, 2).unwrap();
        let dd = Array2::from_shape_fn((3, 3), |(i, j)| t.d2(i, j));
        let cf = hessian_closed_form(&ctx, &ops.differential, &dd);
        assert!((cf[1][0][0] + 1.0).abs() < 1e-14);
        assert!((cf[1][1][0] - 1.0).abs() < 1e-14);
    }
}
