//! Residuals of Einstein-type structure equations for supplied potentials.

use ndarray::{Array1, Array2};
use seqwarp_expr::{Expr, Func, SymbolicField};
use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::curvature::{max_abs, CurvatureBundle};
use crate::error::{GeometryError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EinsteinFit {
    pub lambda_fit: f64,
    pub residual: f64,
}

/// `λ = τ/n`, residual `‖Ric − λ g‖_∞`.
pub fn einstein_residual(bundle: &CurvatureBundle) -> EinsteinFit {
    let lambda_fit = bundle.scalar / bundle.dim() as f64;
    EinsteinFit {
        lambda_fit,
        residual: max_abs((&bundle.ricci - &(&bundle.metric * lambda_fit)).iter()),
    }
}

/// Least-squares `λ` for `T ≈ λ g` using the diagonal entries.
pub fn diagonal_fit(t: &Array2<f64>, g: &Array2<f64>) -> f64 {
    let (num, den) = (0..g.nrows()).fold((0.0, 0.0), |(n, d), i| (n + t[[i, i]] * g[[i, i]], d + g[[i, i]] * g[[i, i]]));
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `‖Ric + H^φ − c dφ⊗dφ − λ g‖_∞`; `lambda = None` fits `λ` on the diagonal.
/// Returns the `λ` used and the residual.
pub fn gqe_residual_arrays(
    ricci: &Array2<f64>,
    hess: &Array2<f64>,
    dphi: &Array1<f64>,
    metric: &Array2<f64>,
    catino_coeff: f64,
    lambda: Option<f64>,
) -> (f64, f64) {
    let n = metric.nrows();
    let t = Array2::from_shape_fn((n, n), |(i, j)| {
        ricci[[i, j]] + hess[[i, j]] - catino_coeff * dphi[i] * dphi[j]
    });
    let lambda = lambda.unwrap_or_else(|| diagonal_fit(&t, metric));
    (lambda, max_abs((&t - &(metric * lambda)).iter()))
}

/// How `λ` is supplied to a structure residual.
#[derive(Debug, Clone)]
pub enum LambdaSpec {
    Value(f64),
    /// Pointwise least-squares fit on the diagonal.
    Fit,
    Field(SymbolicField),
}

/// A scalar given as a constant or a field.
#[derive(Debug, Clone)]
pub enum ScalarSpec {
    Value(f64),
    Field(SymbolicField),
}

impl ScalarSpec {
    fn at(&self, x: &[f64]) -> Result<f64> {
        match self {
            ScalarSpec::Value(v) => Ok(*v),
            ScalarSpec::Field(f) => f.eval(x).map_err(|e| GeometryError::field("probe scalar", e)),
        }
    }
}

/// Potential and coefficients for the structure residuals.
#[derive(Debug, Clone)]
pub struct StructureProbe {
    pub phi: SymbolicField,
    /// Coefficient of `dφ⊗dφ`; equals `1/m` when `m_param` is set.
    pub catino_coeff: f64,
    pub psi: ScalarSpec,
    pub lambda: LambdaSpec,
    pub m_param: Option<u32>,
}

impl StructureProbe {
    pub fn new(phi: SymbolicField) -> Self {
        StructureProbe {
            phi,
            catino_coeff: 0.0,
            psi: ScalarSpec::Value(1.0),
            lambda: LambdaSpec::Fit,
            m_param: None,
        }
    }

    /// Sets `m` and the matching coefficient `1/m`.
    pub fn with_m(mut self, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(GeometryError::Invalid("probe m must be a positive integer".into()));
        }
        self.m_param = Some(m);
        self.catino_coeff = 1.0 / m as f64;
        Ok(self)
    }

    pub fn with_catino_coeff(mut self, c: f64) -> Self {
        self.catino_coeff = c;
        self.m_param = None;
        self
    }

    pub fn with_psi(mut self, psi: ScalarSpec) -> Self {
        self.psi = psi;
        self
    }

    pub fn with_lambda(mut self, lambda: LambdaSpec) -> Self {
        self.lambda = lambda;
        self
    }

    fn lambda_at(&self, x: &[f64]) -> Result<Option<f64>> {
        match &self.lambda {
            LambdaSpec::Value(v) => Ok(Some(*v)),
            LambdaSpec::Fit => Ok(None),
            LambdaSpec::Field(f) => f
                .eval(x)
                .map(Some)
                .map_err(|e| GeometryError::field("probe lambda", e)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureResidual {
    pub lambda: f64,
    pub residual: f64,
}

/// `‖Ric + H^φ − c dφ⊗dφ − λ g‖_∞` at the bundle's point.
pub fn gqe_residual(chart: &Chart, bundle: &CurvatureBundle, probe: &StructureProbe) -> Result<StructureResidual> {
    let ops = chart.diff_ops(&probe.phi, bundle)?;
    let lambda = probe.lambda_at(&bundle.point.values)?;
    let (lambda, residual) = gqe_residual_arrays(
        &bundle.ricci,
        &ops.hessian,
        &ops.differential,
        &bundle.metric,
        probe.catino_coeff,
        lambda,
    );
    Ok(StructureResidual { lambda, residual })
}

/// `‖Ric + ψ H^φ − λ g‖_∞` at the bundle's point.
pub fn psi_soliton_residual(chart: &Chart, bundle: &CurvatureBundle, probe: &StructureProbe) -> Result<StructureResidual> {
    let ops = chart.diff_ops(&probe.phi, bundle)?;
    let psi = probe.psi.at(&bundle.point.values)?;
    let t = &bundle.ricci + &(&ops.hessian * psi);
    let lambda = probe
        .lambda_at(&bundle.point.values)?
        .unwrap_or_else(|| diagonal_fit(&t, &bundle.metric));
    Ok(StructureResidual {
        lambda,
        residual: max_abs((&t - &(&bundle.metric * lambda)).iter()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalFit {
    pub varphi_fit: f64,
    pub residual: f64,
}

/// `φ = Δf/n`, residual `‖H^f − φ g‖_∞`, from a Hessian and the metric.
pub fn conformal_soliton_residual(hess: &Array2<f64>, metric: &Array2<f64>, inverse: &Array2<f64>) -> ConformalFit {
    let varphi_fit = (inverse * hess).sum() / metric.nrows() as f64;
    ConformalFit {
        varphi_fit,
        residual: max_abs((hess - &(metric * varphi_fit)).iter()),
    }
}

/// Threshold below which a potential counts as numerically constant.
pub const CONSTANT_FIELD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalField {
    pub fit: ConformalFit,
    /// The gradient vanishes at the point, so the soliton is degenerate there.
    pub constant_field: bool,
}

pub fn conformal_soliton_field(chart: &Chart, bundle: &CurvatureBundle, f: &SymbolicField) -> Result<ConformalField> {
    let ops = chart.diff_ops(f, bundle)?;
    Ok(ConformalField {
        fit: conformal_soliton_residual(&ops.hessian, &bundle.metric, &bundle.inverse),
        constant_field: max_abs(ops.differential.iter()) < CONSTANT_FIELD_TOL,
    })
}

/// Residual tensors of the `m`-quasi-Einstein form
/// `Ric + H^φ − (1/m) dφ⊗dφ − λ g` and of the soliton form
/// `Ric − (m/φ̂) H^{φ̂} − λ g` with `φ̂ = exp(−φ/m)`; returns `‖difference‖_∞`
/// and the size of the first tensor.
pub fn mqe_transform_gap(chart: &Chart, bundle: &CurvatureBundle, phi: &SymbolicField, m: f64, lambda: f64) -> Result<(f64, f64)> {
    if m == 0.0 {
        return Err(GeometryError::Invalid("m must be non-zero".into()));
    }
    let hat = SymbolicField::new(
        Expr::call(Func::Exp, Expr::mul(Expr::constant(-1.0 / m), phi.expr().clone())),
        phi.nvars(),
    );
    let a = chart.diff_ops(phi, bundle)?;
    let b = chart.diff_ops(&hat, bundle)?;
    let n = bundle.dim();
    let g = &bundle.metric;
    let mqe = Array2::from_shape_fn((n, n), |(i, j)| {
        bundle.ricci[[i, j]] + a.hessian[[i, j]] - a.differential[i] * a.differential[j] / m - lambda * g[[i, j]]
    });
    let soliton = Array2::from_shape_fn((n, n), |(i, j)| {
        bundle.ricci[[i, j]] - m / b.value * b.hessian[[i, j]] - lambda * g[[i, j]]
    });
    Ok((max_abs((&mqe - &soliton).iter()), max_abs(mqe.iter())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::ChartPoint;
    use seqwarp_expr::parse_expression;

    fn field(src: &str, coords: &[&str]) -> SymbolicField {
        SymbolicField::new(parse_expression(src, coords).unwrap(), coords.len())
    }

    fn sphere() -> Chart {
        Chart::diagonal("S2", &["t", "p"], &["1", "sin(t)^2"], &[(0.3, 2.8), (-3.0, 3.0)]).unwrap()
    }

    #[test]
    fn einstein_examples() {
        let s = sphere();
        let b = s.curvature(&ChartPoint::new(vec![1.1, 0.4])).unwrap();
        let e = einstein_residual(&b);
        assert!((e.lambda_fit - 1.0).abs() < 1e-12 && e.residual < 1e-12);
        let e2 = Chart::euclidean("E2", &["x", "y"], 1.0);
        let b = e2.curvature(&ChartPoint::new(vec![0.1, 0.2])).unwrap();
        assert_eq!(einstein_residual(&b), EinsteinFit { lambda_fit: 0.0, residual: 0.0 });
        let c = Chart::diagonal("S2xE1", &["t", "p", "z"], &["1", "sin(t)^2", "1"], &[(0.3, 2.8), (-3.0, 3.0), (-1.0, 1.0)])
            .unwrap();
        let b = c.curvature(&ChartPoint::new(vec![1.1, 0.4, 0.0])).unwrap();
        assert!(einstein_residual(&b).residual > 0.1);
    }

    #[test]
    fn gaussian_soliton_probes() {
        let coords = ["x", "y", "z"];
        let e3 = Chart::euclidean("E3", &coords, 1.0);
        let b = e3.curvature(&ChartPoint::new(vec![0.2, -0.3, 0.5])).unwrap();
        let gauss = field("(x^2 + y^2 + z^2)/2", &coords);
        let probe = StructureProbe::new(gauss.clone())
            .with_catino_coeff(0.0)
            .with_lambda(LambdaSpec::Value(1.0));
        assert!(gqe_residual(&e3, &b, &probe).unwrap().residual < 1e-14);
        assert!(psi_soliton_residual(&e3, &b, &probe).unwrap().residual < 1e-14);
        let psi0 = StructureProbe::new(gauss).with_psi(ScalarSpec::Value(0.0));
        assert!(psi_soliton_residual(&e3, &b, &psi0).unwrap().residual < 1e-14);
        // constant φ with fitted λ is the Einstein residual
        let c = StructureProbe::new(field("2", &coords));
        let r = gqe_residual(&e3, &b, &c).unwrap();
        assert_eq!(r.residual, einstein_residual(&b).residual);
    }

    #[test]
    fn conformal_examples() {
        let s = sphere();
        let b = s.curvature(&ChartPoint::new(vec![0.9, 0.4])).unwrap();
        let r = conformal_soliton_field(&s, &b, &field("cos(t)", &["t", "p"])).unwrap();
        assert!((r.fit.varphi_fit + 0.9_f64.cos()).abs() < 1e-12);
        assert!(r.fit.residual < 1e-12 && !r.constant_field);
        let g = conformal_soliton_field(&s, &b, &field("t^2 + sin(p)", &["t", "p"])).unwrap();
        assert!(g.fit.residual > 1e-3);
        let e2 = Chart::euclidean("E2", &["x", "y"], 1.0);
        let b = e2.curvature(&ChartPoint::new(vec![0.3, 0.1])).unwrap();
        let r = conformal_soliton_field(&e2, &b, &field("(x^2+y^2)/2", &["x", "y"])).unwrap();
        assert!((r.fit.varphi_fit - 1.0).abs() < 1e-14 && r.fit.residual < 1e-14);
        let k = conformal_soliton_field(&e2, &b, &field("4", &["x", "y"])).unwrap();
        assert!(k.constant_field);
    }

    #[test]
    fn mqe_transform_matches() {
        let s = sphere();
        let b = s.curvature(&ChartPoint::new(vec![0.8, -0.5])).unwrap();
        let (gap, size) = mqe_transform_gap(&s, &b, &field("sin(t)*p + t^2", &["t", "p"]), 3.0, 0.7).unwrap();
        assert!(size > 1e-3);
        assert!(gap < 1e-9, "{gap}");
        assert!(StructureProbe::new(field("t", &["t", "p"])).with_m(0).is_err());
        let p = StructureProbe::new(field("t", &["t", "p"])).with_m(4).unwrap();
        assert_eq!(p.catino_coeff, 0.25);
    }
}
