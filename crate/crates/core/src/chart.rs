//! Coordinate charts carrying a symbolic metric.

use ndarray::{Array2, Array3, Array4, Array5};
use seqwarp_expr::{parse_expression, Expr, SymbolicField};

use crate::error::{GeometryError, Result};
use crate::sampling::HaltonSampler;

/// Default lower bound on `|det g|` below which a metric counts as singular.
pub const DEGENERACY_FLOOR: f64 = 1e-12;

/// A coordinate chart with metric components given as expressions.
///
/// Factor manifolds of a sequential warped product, the assembled product
/// and its two-factor base are all charts of this kind.
#[derive(Debug, Clone)]
pub struct Chart {
    name: String,
    coords: Vec<String>,
    /// Upper triangle, row major: entry (i, j) with i <= j.
    metric: Vec<SymbolicField>,
    domain: Vec<(f64, f64)>,
    signature: Option<Vec<i8>>,
    degeneracy_floor: f64,
}

/// Factor manifolds are plain charts.
pub type FactorChart = Chart;

fn packed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl Chart {
    /// Builds a chart from a full `dim x dim` matrix of metric expressions.
    ///
    /// The matrix must be declared symmetric: mirrored entries are compared
    /// numerically at sample points.
    pub fn new(
        name: impl Into<String>,
        coords: Vec<String>,
        metric: Vec<Vec<Expr>>,
        domain: Vec<(f64, f64)>,
    ) -> Result<Chart> {
        let name = name.into();
        let n = coords.len();
        let invalid = |message: String| GeometryError::InvalidChart {
            chart: name.clone(),
            message,
        };
        if n == 0 {
            return Err(invalid("dimension must be at least 1".into()));
        }
        if metric.len() != n || metric.iter().any(|row| row.len() != n) {
            return Err(invalid(format!("metric must be a {n}x{n} matrix")));
        }
        if domain.len() != n {
            return Err(invalid(format!("domain needs one interval per coordinate ({n})")));
        }
        if let Some((lo, hi)) = domain.iter().find(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(invalid(format!("bad domain interval [{lo}, {hi}]")));
        }
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].contains(c) {
                return Err(invalid(format!("duplicate coordinate `{c}`")));
            }
        }
        if let Some(e) = metric.iter().flatten().find(|e| e.max_var_index().is_some_and(|v| v >= n)) {
            return Err(invalid(format!("metric entry `{e}` references an undeclared slot")));
        }
        let mut sampler = HaltonSampler::new(&domain, 0);
        let probes = std::iter::once(centre(&domain))
            .chain(sampler.take_points(8))
            .collect::<Vec<_>>();
        for i in 0..n {
            for j in (i + 1)..n {
                if metric[i][j] == metric[j][i] {
                    continue;
                }
                for p in &probes {
                    let a = metric[i][j].eval(p);
                    let b = metric[j][i].eval(p);
                    let same = match (&a, &b) {
                        (Ok(x), Ok(y)) => (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0),
                        _ => false,
                    };
                    if !same {
                        return Err(invalid(format!(
                            "metric is not symmetric: g[{i}][{j}] = `{}` but g[{j}][{i}] = `{}`",
                            metric[i][j], metric[j][i]
                        )));
                    }
                }
            }
        }
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for (i, row) in metric.into_iter().enumerate() {
            for e in row.into_iter().skip(i) {
                upper.push(SymbolicField::new(e, n));
            }
        }
        Ok(Chart {
            name,
            coords,
            metric: upper,
            domain,
            signature: None,
            degeneracy_floor: DEGENERACY_FLOOR,
        })
    }

    /// Parses metric entries written in the expression language.
    pub fn parse<S: AsRef<str>>(
        name: &str,
        coords: &[&str],
        metric: &[Vec<S>],
        domain: &[(f64, f64)],
    ) -> Result<Chart> {
        let rows = metric
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, src)| {
                        parse_expression(src.as_ref(), coords).map_err(|source| GeometryError::Parse {
                            context: format!("metric[{i}][{j}] of `{name}`"),
                            src: src.as_ref().to_string(),
                            source,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Chart::new(
            name,
            coords.iter().map(|c| c.to_string()).collect(),
            rows,
            domain.to_vec(),
        )
    }

    /// Diagonal metric shorthand.
    pub fn diagonal<S: AsRef<str>>(
        name: &str,
        coords: &[&str],
        diag: &[S],
        domain: &[(f64, f64)],
    ) -> Result<Chart> {
        let n = coords.len();
        let rows: Vec<Vec<&str>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { diag.get(i).map_or("0", |s| s.as_ref()) } else { "0" })
                    .collect()
            })
            .collect();
        Chart::parse(name, coords, &rows, domain)
    }

    /// Euclidean space with Cartesian coordinates on a symmetric box.
    pub fn euclidean(name: &str, coords: &[&str], half_width: f64) -> Chart {
        let ones = vec!["1"; coords.len()];
        Chart::diagonal(name, coords, &ones, &vec![(-half_width, half_width); coords.len()])
            .expect("euclidean chart is valid")
    }

    pub fn with_signature(mut self, signature: Vec<i8>) -> Result<Chart> {
        if signature.len() != self.dim() {
            return Err(GeometryError::InvalidChart {
                chart: self.name.clone(),
                message: format!("signature needs {} entries", self.dim()),
            });
        }
        let c = centre(&self.domain);
        for (i, s) in signature.iter().enumerate() {
            let v = self
                .component(i, i)
                .eval(&c)
                .map_err(|e| GeometryError::field(format!("metric[{i}][{i}] of `{}`", self.name), e))?;
            if v.signum() as i8 != *s {
                return Err(GeometryError::InvalidChart {
                    chart: self.name.clone(),
                    message: format!(
                        "diagonal entry {i} is {v} at the domain centre, declared sign {s}"
                    ),
                });
            }
        }
        self.signature = Some(signature);
        Ok(self)
    }

    pub fn with_degeneracy_floor(mut self, floor: f64) -> Chart {
        self.degeneracy_floor = floor;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn signature(&self) -> Option<&[i8]> {
        self.signature.as_deref()
    }

    pub fn degeneracy_floor(&self) -> f64 {
        self.degeneracy_floor
    }

    pub fn component(&self, i: usize, j: usize) -> &SymbolicField {
        &self.metric[packed(self.dim(), i, j)]
    }

    pub fn metric_exprs(&self) -> Vec<Vec<Expr>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.component(i, j).expr().clone()).collect())
            .collect()
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.dim()
            && values
                .iter()
                .zip(&self.domain)
                .all(|(x, (lo, hi))| x >= lo && x <= hi)
    }

    pub fn point(&self, values: Vec<f64>) -> Result<ChartPoint> {
        if self.contains(&values) {
            Ok(ChartPoint { values })
        } else {
            Err(GeometryError::OutOfDomain {
                chart: self.name.clone(),
                point: values,
            })
        }
    }

    pub fn centre(&self) -> ChartPoint {
        ChartPoint {
            values: centre(&self.domain),
        }
    }

    /// Halton points inside the domain box.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<ChartPoint> {
        HaltonSampler::new(&self.domain, seed)
            .take_points(count)
            .into_iter()
            .map(|values| ChartPoint { values })
            .collect()
    }

    /// Metric components and their partials up to `order` (at most 3).
    pub fn metric_jet(&self, p: &ChartPoint, order: usize) -> Result<MetricJet> {
        let n = self.dim();
        let mut jet = MetricJet::zeros(n, order);
        for i in 0..n {
            for j in i..n {
                let t = self
                    .component(i, j)
                    .evaluate_with_derivatives(&p.values, order)
                    .map_err(|e| GeometryError::field(format!("metric[{i}][{j}] of `{}`", self.name), e))?;
                let mut put = |i: usize, j: usize| {
                    jet.g[[i, j]] = t.value();
                    for k in 0..n.min(if order >= 1 { n } else { 0 }) {
                        jet.dg[[k, i, j]] = t.d1(k);
                    }
                    if order >= 2 {
                        for k in 0..n {
                            for l in 0..n {
                                jet.d2g[[k, l, i, j]] = t.d2(k, l);
                            }
                        }
                    }
                    if order >= 3 {
                        for k in 0..n {
                            for l in 0..n {
                                for m in 0..n {
                                    jet.d3g[[k, l, m, i, j]] = t.d3(k, l, m);
                                }
                            }
                        }
                    }
                };
                put(i, j);
                if i != j {
                    put(j, i);
                }
            }
        }
        Ok(jet)
    }

    /// `g_ij(p)` and `g^ij(p)`.
    pub fn metric_at(&self, p: &ChartPoint) -> Result<MetricAt> {
        let jet = self.metric_jet(p, 0)?;
        let inverse = invert(&jet.g, self, p)?;
        Ok(MetricAt { g: jet.g, inverse })
    }

    /// Checks that the metric is invertible at `count` sample points.
    pub fn validate_samples(&self, count: usize, seed: u64) -> Result<()> {
        for p in std::iter::once(self.centre()).chain(self.sample_points(count, seed)) {
            self.metric_at(&p)?;
        }
        Ok(())
    }
}

fn centre(domain: &[(f64, f64)]) -> Vec<f64> {
    domain.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
}

pub(crate) fn invert(g: &Array2<f64>, chart: &Chart, p: &ChartPoint) -> Result<Array2<f64>> {
    let n = g.nrows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| g[[i, j]]);
    let det = m.determinant();
    let singular = || GeometryError::SingularMetric {
        chart: chart.name.clone(),
        point: p.values.clone(),
        det,
        floor: chart.degeneracy_floor,
    };
    if !(det.abs() > chart.degeneracy_floor) {
        return Err(singular());
    }
    let inv = m.try_inverse().ok_or_else(singular)?;
    let mut out = Array2::from_shape_fn((n, n), |(i, j)| inv[(i, j)]);
    // Symmetrize away rounding.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (out[[i, j]] + out[[j, i]]);
            out[[i, j]] = s;
            out[[j, i]] = s;
        }
    }
    Ok(out)
}

/// A point of a chart, given by its coordinate values.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub values: Vec<f64>,
}

impl ChartPoint {
    pub fn new(values: Vec<f64>) -> Self {
        ChartPoint { values }
    }
}

#[derive(Debug, Clone)]
pub struct MetricAt {
    pub g: Array2<f64>,
    pub inverse: Array2<f64>,
}

impl MetricAt {
    /// `max |(g g^-1 - I)_ij|`.
    pub fn inverse_defect(&self) -> f64 {
        let prod = self.g.dot(&self.inverse);
        let n = prod.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[[i, j]] - target).abs());
            }
        }
        worst
    }
}

/// Metric components with partial derivatives: `dg[[k, i, j]] = ∂_k g_ij`,
/// `d2g[[k, l, i, j]] = ∂_k ∂_l g_ij`, `d3g[[k, l, m, i, j]]` likewise.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub order: usize,
    pub g: Array2<f64>,
    pub dg: Array3<f64>,
    pub d2g: Array4<f64>,
    pub d3g: Array5<f64>,
}

impl MetricJet {
    fn zeros(n: usize, order: usize) -> Self {
        let k = |o: usize| if order >= o { n } else { 0 };
        MetricJet {
            order,
            g: Array2::zeros((n, n)),
            dg: Array3::zeros((k(1), n, n)),
            d2g: Array4::zeros((k(2), k(2), n, n)),
            d3g: Array5::zeros((k(3), k(3), k(3), n, n)),
        }
    }
}
