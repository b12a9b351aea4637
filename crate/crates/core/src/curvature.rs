//! Brute-force curvature of a chart metric.
//!
//! Index conventions (all arrays are dense over chart coordinates):
//! `christoffel[[k, i, j]] = Γ^k_ij`, `riemann[[l, i, j, k]] = R^l_ijk` with
//! `R(∂_i, ∂_j)∂_k = R^l_ijk ∂_l` and `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`,
//! `riemann_lower[[i, j, k, l]] = R^m_ijk g_ml`, `ricci[[j, k]] = R^i_ijk`.
//!
//! First and second partials of Γ come from the exact metric jet through
//! the chain rule; no step sizes are involved.

use ndarray::{Array1, Array2, Array3, Array4, Array5};
use seqwarp_expr::{DerivativeTable, SymbolicField};

use crate::chart::{invert, Chart, ChartPoint, MetricJet};
use crate::error::{GeometryError, Result};

#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub point: ChartPoint,
    pub metric: Array2<f64>,
    pub inverse: Array2<f64>,
    /// `∂_k g_ij` stored as `[[k, i, j]]`.
    pub metric_partials: Array3<f64>,
    pub christoffel: Array3<f64>,
    pub riemann: Array4<f64>,
    pub riemann_lower: Array4<f64>,
    pub ricci: Array2<f64>,
    pub scalar: f64,
    pub derivatives: Option<CurvatureDerivatives>,
}

/// First partials of the curvature objects, `[[m, ...]] = ∂_m(...)`.
#[derive(Debug, Clone)]
pub struct CurvatureDerivatives {
    pub christoffel: Array4<f64>,
    pub riemann: Array5<f64>,
    pub ricci: Array3<f64>,
    pub scalar: Array1<f64>,
}

/// Gradient, Hessian and Laplacian of a scalar field at a point.
#[derive(Debug, Clone)]
pub struct DiffOps {
    pub value: f64,
    /// Covariant components `∂_i φ`.
    pub differential: Array1<f64>,
    pub grad: Array1<f64>,
    /// `g^ij ∂_iφ ∂_jφ`; negative values are meaningful in indefinite signature.
    pub grad_norm_sq: f64,
    pub hessian: Array2<f64>,
    pub laplacian: f64,
}

/// A tensor field at a point together with its coordinate partials.
#[derive(Debug, Clone, Copy)]
pub enum TensorJet<'a> {
    /// `T_ij` with `partials[[m, i, j]] = ∂_m T_ij`.
    Covariant2 {
        value: &'a Array2<f64>,
        partials: &'a Array3<f64>,
    },
    /// `T^l_ijk` with `partials[[m, l, i, j, k]] = ∂_m T^l_ijk`.
    Mixed13 {
        value: &'a Array4<f64>,
        partials: &'a Array5<f64>,
    },
}

/// Result of [`tensor_divergence`]. For `(0,2)` input the divergence is
/// `g^ij ∇_i T_jk`; for `(1,3)` input it is `∇_l T^l_ijk`.
#[derive(Debug, Clone)]
pub enum Divergence {
    Covector(Array1<f64>),
    Covariant3(Array3<f64>),
}

impl Chart {
    /// Curvature up to the scalar, using second derivatives of the metric.
    pub fn curvature(&self, p: &ChartPoint) -> Result<CurvatureBundle> {
        let jet = self.metric_jet(p, 2)?;
        let inverse = invert(&jet.g, self, p)?;
        Ok(CurvatureBundle::from_jet(p.clone(), &jet, inverse))
    }

    /// Curvature together with its first partials (needs third metric derivatives).
    pub fn curvature_with_derivatives(&self, p: &ChartPoint) -> Result<CurvatureBundle> {
        let jet = self.metric_jet(p, 3)?;
        let inverse = invert(&jet.g, self, p)?;
        Ok(CurvatureBundle::from_jet(p.clone(), &jet, inverse))
    }

    /// `Γ^k_ij` at `p`.
    pub fn christoffel(&self, p: &ChartPoint) -> Result<Array3<f64>> {
        let jet = self.metric_jet(p, 1)?;
        let inverse = invert(&jet.g, self, p)?;
        Ok(christoffel_from(&inverse, &first_kind(&jet.dg)))
    }

    /// `R^l_ijk` and `R_ijkl` at `p`.
    pub fn riemann(&self, p: &ChartPoint) -> Result<(Array4<f64>, Array4<f64>)> {
        let b = self.curvature(p)?;
        Ok((b.riemann, b.riemann_lower))
    }

    /// `Ric_ij` and `τ` at `p`.
    pub fn ricci_scalar(&self, p: &ChartPoint) -> Result<(Array2<f64>, f64)> {
        let b = self.curvature(p)?;
        Ok((b.ricci, b.scalar))
    }

    /// Differential operators of `field` (an expression over this chart's coordinates).
    pub fn diff_ops(&self, field: &SymbolicField, bundle: &CurvatureBundle) -> Result<DiffOps> {
        let table = field
            .evaluate_with_derivatives(&bundle.point.values, 2)
            .map_err(|e| GeometryError::field(format!("scalar field `{}`", field.expr()), e))?;
        Ok(diff_ops(bundle, &table))
    }
}

/// `Γ_lij = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)` stored as `[[l, i, j]]`.
fn first_kind(dg: &Array3<f64>) -> Array3<f64> {
    let n = dg.shape()[1];
    Array3::from_shape_fn((n, n, n), |(l, i, j)| {
        0.5 * (dg[[i, j, l]] + dg[[j, i, l]] - dg[[l, i, j]])
    })
}

fn christoffel_from(ginv: &Array2<f64>, gamma1: &Array3<f64>) -> Array3<f64> {
    let n = ginv.nrows();
    Array3::from_shape_fn((n, n, n), |(k, i, j)| {
        (0..n).map(|l| ginv[[k, l]] * gamma1[[l, i, j]]).sum()
    })
}

impl CurvatureBundle {
    /// Builds the bundle from a metric jet of order 2 or 3.
    pub fn from_jet(point: ChartPoint, jet: &MetricJet, ginv: Array2<f64>) -> Self {
        assert!(jet.order >= 2, "curvature needs a metric jet of order >= 2");
        let n = jet.g.nrows();
        let with_derivs = jet.order >= 3;

        // ∂_m g^ij = −g^ia ∂_m g_ab g^bj
        let mut dginv = Array3::<f64>::zeros((n, n, n));
        for m in 0..n {
            let t = ginv.dot(&jet.dg.index_axis(ndarray::Axis(0), m)).dot(&ginv);
            for i in 0..n {
                for j in 0..n {
                    dginv[[m, i, j]] = -t[[i, j]];
                }
            }
        }

        let g1 = first_kind(&jet.dg);
        let dg1 = Array4::from_shape_fn((n, n, n, n), |(m, l, i, j)| {
            0.5 * (jet.d2g[[m, i, j, l]] + jet.d2g[[m, j, i, l]] - jet.d2g[[m, l, i, j]])
        });

        let gamma = christoffel_from(&ginv, &g1);
        let mut dgamma = Array4::<f64>::zeros((n, n, n, n));
        for m in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            s += dginv[[m, k, l]] * g1[[l, i, j]] + ginv[[k, l]] * dg1[[m, l, i, j]];
                        }
                        dgamma[[m, k, i, j]] = s;
                        dgamma[[m, k, j, i]] = s;
                    }
                }
            }
        }

        let riemann = riemann_from(&gamma, &dgamma);
        let ricci = Array2::from_shape_fn((n, n), |(j, k)| (0..n).map(|i| riemann[[i, i, j, k]]).sum());
        let scalar = contract(&ginv, &ricci);
        let riemann_lower = Array4::from_shape_fn((n, n, n, n), |(i, j, k, l)| {
            (0..n).map(|m| riemann[[m, i, j, k]] * jet.g[[m, l]]).sum()
        });

        let derivatives = with_derivs.then(|| {
            // ∂_p∂_m g^ij
            let mut d2ginv = Array4::<f64>::zeros((n, n, n, n));
            for p in 0..n {
                let dp = dginv.index_axis(ndarray::Axis(0), p);
                for m in 0..n {
                    let dm = jet.dg.index_axis(ndarray::Axis(0), m);
                    let dpm = jet.d2g.slice(ndarray::s![p, m, .., ..]);
                    let t = dp.dot(&dm).dot(&ginv) + ginv.dot(&dpm).dot(&ginv) + ginv.dot(&dm).dot(&dp);
                    for i in 0..n {
                        for j in 0..n {
                            d2ginv[[p, m, i, j]] = -t[[i, j]];
                        }
                    }
                }
            }
            let d2g1 = Array5::from_shape_fn((n, n, n, n, n), |(p, m, l, i, j)| {
                0.5 * (jet.d3g[[p, m, i, j, l]] + jet.d3g[[p, m, j, i, l]] - jet.d3g[[p, m, l, i, j]])
            });
            let mut d2gamma = Array5::<f64>::zeros((n, n, n, n, n));
            for p in 0..n {
                for m in p..n {
                    for k in 0..n {
                        for i in 0..n {
                            for j in i..n {
                                let mut s = 0.0;
                                for l in 0..n {
                                    s += d2ginv[[p, m, k, l]] * g1[[l, i, j]]
                                        + dginv[[m, k, l]] * dg1[[p, l, i, j]]
                                        + dginv[[p, k, l]] * dg1[[m, l, i, j]]
                                        + ginv[[k, l]] * d2g1[[p, m, l, i, j]];
                                }
                                for (a, b) in [(p, m), (m, p)] {
                                    d2gamma[[a, b, k, i, j]] = s;
                                    d2gamma[[a, b, k, j, i]] = s;
                                }
                            }
                        }
                    }
                }
            }
            let mut driemann = Array5::<f64>::zeros((n, n, n, n, n));
            for m in 0..n {
                for l in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                let mut s = d2gamma[[m, i, l, j, k]] - d2gamma[[m, j, l, i, k]];
                                for a in 0..n {
                                    s += dgamma[[m, l, i, a]] * gamma[[a, j, k]]
                                        + gamma[[l, i, a]] * dgamma[[m, a, j, k]]
                                        - dgamma[[m, l, j, a]] * gamma[[a, i, k]]
                                        - gamma[[l, j, a]] * dgamma[[m, a, i, k]];
                                }
                                driemann[[m, l, i, j, k]] = s;
                            }
                        }
                    }
                }
            }
            let dricci = Array3::from_shape_fn((n, n, n), |(m, j, k)| {
                (0..n).map(|i| driemann[[m, i, i, j, k]]).sum()
            });
            let dscalar = Array1::from_shape_fn(n, |m| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += dginv[[m, i, j]] * ricci[[i, j]] + ginv[[i, j]] * dricci[[m, i, j]];
                    }
                }
                s
            });
            CurvatureDerivatives {
                christoffel: dgamma.clone(),
                riemann: driemann,
                ricci: dricci,
                scalar: dscalar,
            }
        });

        CurvatureBundle {
            point,
            metric: jet.g.clone(),
            inverse: ginv,
            metric_partials: jet.dg.clone(),
            christoffel: gamma,
            riemann,
            riemann_lower,
            ricci,
            scalar,
            derivatives,
        }
    }

    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    fn derivs(&self) -> Result<&CurvatureDerivatives> {
        self.derivatives.as_ref().ok_or_else(|| {
            GeometryError::Invalid(
                "curvature derivatives were not computed; use curvature_with_derivatives".into(),
            )
        })
    }

    /// `(∇Ric)[[m, i, j]] = ∇_m Ric_ij`.
    pub fn nabla_ricci(&self) -> Result<Array3<f64>> {
        Ok(covariant_derivative_02(self, &self.ricci, &self.derivs()?.ricci))
    }

    /// `(∇R)[[m, l, i, j, k]] = ∇_m R^l_ijk`.
    pub fn nabla_riemann(&self) -> Result<Array5<f64>> {
        Ok(covariant_derivative_13(self, &self.riemann, &self.derivs()?.riemann))
    }

    /// `max |∇_i Ric_jk − ∇_j Ric_ik|` over coordinate directions.
    pub fn codazzi_residual(&self) -> Result<f64> {
        let nr = self.nabla_ricci()?;
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((nr[[i, j, k]] - nr[[j, i, k]]).abs());
                }
            }
        }
        Ok(worst)
    }

    /// `g^ij ∇_i Ric_jk − ½ ∂_k τ`, the contracted Bianchi defect.
    pub fn contracted_bianchi_defect(&self) -> Result<Array1<f64>> {
        let d = self.derivs()?;
        let div = match tensor_divergence(
            self,
            TensorJet::Covariant2 {
                value: &self.ricci,
                partials: &d.ricci,
            },
        ) {
            Divergence::Covector(v) => v,
            Divergence::Covariant3(_) => unreachable!(),
        };
        Ok(&div - &(0.5 * &d.scalar))
    }
}

fn riemann_from(gamma: &Array3<f64>, dgamma: &Array4<f64>) -> Array4<f64> {
    let n = gamma.shape()[0];
    let mut r = Array4::<f64>::zeros((n, n, n, n));
    for l in 0..n {
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    let mut s = dgamma[[i, l, j, k]] - dgamma[[j, l, i, k]];
                    for a in 0..n {
                        s += gamma[[l, i, a]] * gamma[[a, j, k]] - gamma[[l, j, a]] * gamma[[a, i, k]];
                    }
                    r[[l, i, j, k]] = s;
                    r[[l, j, i, k]] = -s;
                }
            }
        }
    }
    r
}

fn contract(ginv: &Array2<f64>, t: &Array2<f64>) -> f64 {
    (ginv * t).sum()
}

/// Gradient, Hessian and Laplacian from a field's derivative table (order >= 2).
pub fn diff_ops(bundle: &CurvatureBundle, table: &DerivativeTable) -> DiffOps {
    let n = bundle.dim();
    let d = Array1::from_shape_fn(n, |i| table.d1(i));
    let grad = bundle.inverse.dot(&d);
    let grad_norm_sq = grad.dot(&d);
    let hessian = Array2::from_shape_fn((n, n), |(i, j)| {
        table.d2(i, j) - (0..n).map(|k| bundle.christoffel[[k, i, j]] * d[k]).sum::<f64>()
    });
    let laplacian = contract(&bundle.inverse, &hessian);
    DiffOps {
        value: table.value(),
        differential: d,
        grad,
        grad_norm_sq,
        hessian,
        laplacian,
    }
}

/// `∇_m T_ij = ∂_m T_ij − Γ^a_mi T_aj − Γ^a_mj T_ia`, as `[[m, i, j]]`.
pub fn covariant_derivative_02(b: &CurvatureBundle, t: &Array2<f64>, dt: &Array3<f64>) -> Array3<f64> {
    let n = b.dim();
    let g = &b.christoffel;
    Array3::from_shape_fn((n, n, n), |(m, i, j)| {
        let mut s = dt[[m, i, j]];
        for a in 0..n {
            s -= g[[a, m, i]] * t[[a, j]] + g[[a, m, j]] * t[[i, a]];
        }
        s
    })
}

/// `∇_m T^l_ijk`, as `[[m, l, i, j, k]]`.
pub fn covariant_derivative_13(b: &CurvatureBundle, t: &Array4<f64>, dt: &Array5<f64>) -> Array5<f64> {
    let n = b.dim();
    let g = &b.christoffel;
    Array5::from_shape_fn((n, n, n, n, n), |(m, l, i, j, k)| {
        let mut s = dt[[m, l, i, j, k]];
        for a in 0..n {
            s += g[[l, m, a]] * t[[a, i, j, k]]
                - g[[a, m, i]] * t[[l, a, j, k]]
                - g[[a, m, j]] * t[[l, i, a, k]]
                - g[[a, m, k]] * t[[l, i, j, a]];
        }
        s
    })
}

/// Divergence on the first slot: `g^ij ∇_i T_jk` or `∇_l T^l_ijk`.
pub fn tensor_divergence(b: &CurvatureBundle, t: TensorJet<'_>) -> Divergence {
    let n = b.dim();
    match t {
        TensorJet::Covariant2 { value, partials } => {
            let nt = covariant_derivative_02(b, value, partials);
            Divergence::Covector(Array1::from_shape_fn(n, |k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += b.inverse[[i, j]] * nt[[i, j, k]];
                    }
                }
                s
            }))
        }
        TensorJet::Mixed13 { value, partials } => {
            let nt = covariant_derivative_13(b, value, partials);
            Divergence::Covariant3(Array3::from_shape_fn((n, n, n), |(i, j, k)| {
                (0..n).map(|l| nt[[l, l, i, j, k]]).sum()
            }))
        }
    }
}

/// Largest absolute entry of any array view.
pub fn max_abs<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
