//! Classical identities of the brute-force curvature, checked pointwise.

use ndarray::Array1;
use seqwarp_expr::SymbolicField;

use crate::chart::{Chart, ChartPoint};
use crate::compare::{FormulaRecord, Tolerance};
use crate::curvature::{covariant_derivative_02, tensor_divergence, Divergence, TensorJet};
use crate::error::Result;
use crate::pseudo_projective::{pp_tensor, projective_tensor, PseudoProjectiveParams};
use crate::sweep::{run_sweep, SpecRegistry};
use crate::warped::SequentialModel;

/// Curvature symmetries and the parallel metric.
pub const SYMMETRY_TOL: Tolerance = Tolerance { rel: 1e-10, abs: 1e-10 };
/// Hessian symmetry and trace.
pub const HESSIAN_TOL: Tolerance = Tolerance { rel: 1e-12, abs: 1e-12 };
/// Projective tensor against the pseudo-projective tensor at `(1, −1/(n−1))`.
pub const PROJECTIVE_TOL: Tolerance = Tolerance { rel: 1e-12, abs: 1e-12 };
/// `div Ric = ½ dτ`; derivative trees are deep, so only the verification tolerance.
pub const BIANCHI_TOL: Tolerance = Tolerance::VERIFY;

/// Input of [`verify_identities`].
pub struct IdentitySuite<'a> {
    pub chart: &'a Chart,
    /// Scalar fields over all chart coordinates used for the Hessian checks.
    pub probes: Vec<SymbolicField>,
    /// Pseudo-projective parameters used for the antisymmetry check; the
    /// projective check is skipped when `n < 3`.
    pub params: Option<PseudoProjectiveParams>,
}

impl<'a> IdentitySuite<'a> {
    /// The assembled metric of `model` with `f`, `h` and the default probe lifted to all coordinates.
    pub fn for_model(model: &'a SequentialModel) -> Self {
        let n = model.n();
        IdentitySuite {
            chart: model.assembled(),
            probes: vec![
                SymbolicField::new(model.f().expr().clone(), n),
                SymbolicField::new(model.h().expr().clone(), n),
                model.default_probe(),
            ],
            params: Some(model.params()),
        }
    }
}

pub fn verify_identities(suite: &IdentitySuite<'_>, points: &[ChartPoint], fault: Option<&str>) -> Result<Vec<FormulaRecord>> {
    let mut reg = SpecRegistry::new();
    let parallel = reg.add("identity.metric_parallel", "nabla g = 0", &[], SYMMETRY_TOL);
    let pairs = reg.add(
        "identity.riemann_symmetry",
        "R_ijkl = -R_jikl = -R_ijlk = R_klij",
        &[],
        SYMMETRY_TOL,
    );
    let bianchi1 = reg.add("identity.first_bianchi", "R_ijkl + R_jkil + R_kijl = 0", &[], SYMMETRY_TOL);
    let ric_sym = reg.add("identity.ricci_symmetry", "Ric_ij = Ric_ji", &[], HESSIAN_TOL);
    let bianchi2 = reg.add("identity.contracted_bianchi", "div Ric = (1/2) d tau", &[], BIANCHI_TOL);
    let hess_sym = reg.add("identity.hessian_symmetry", "H^phi_ij = H^phi_ji", &[], HESSIAN_TOL);
    let trace = reg.add("identity.laplacian_trace", "g^ij H^phi_ij = Laplacian phi", &[], HESSIAN_TOL);
    let n = suite.chart.dim();
    let pp_ids = match suite.params {
        Some(_) if n > 2 => Some((
            reg.add("identity.pp_antisymmetry", "P(X,Y)Z = -P(Y,X)Z", &[], SYMMETRY_TOL),
            reg.add(
                "identity.projective_specialization",
                "pseudo-projective tensor at (alpha, beta) = (1, -1/(n-1)) equals R - (1/(n-1))[Ric(Y,Z)X - Ric(X,Z)Y]",
                &[],
                PROJECTIVE_TOL,
            ),
        )),
        _ => None,
    };
    run_sweep(&reg, points, fault, |p, sink| {
        let b = suite.chart.curvature_with_derivatives(p)?;
        let d = b.derivatives.as_ref().expect("requested above");
        let ng = covariant_derivative_02(&b, &b.metric, &b.metric_partials);
        sink.residual(parallel, ng.as_slice().expect("standard layout"));

        let r = &b.riemann_lower;
        let mut sym = Vec::with_capacity(3 * n.pow(4));
        let mut cyc = Vec::with_capacity(n.pow(4));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        sym.push(r[[i, j, k, l]] + r[[j, i, k, l]]);
                        sym.push(r[[i, j, k, l]] + r[[i, j, l, k]]);
                        sym.push(r[[i, j, k, l]] - r[[k, l, i, j]]);
                        cyc.push(r[[i, j, k, l]] + r[[j, k, i, l]] + r[[k, i, j, l]]);
                    }
                }
            }
        }
        sink.residual(pairs, &sym);
        sink.residual(bianchi1, &cyc);
        let asym: Vec<f64> = (0..n * n).map(|q| b.ricci[[q / n, q % n]] - b.ricci[[q % n, q / n]]).collect();
        sink.residual(ric_sym, &asym);

        let div = match tensor_divergence(&b, TensorJet::Covariant2 { value: &b.ricci, partials: &d.ricci }) {
            Divergence::Covector(v) => v,
            Divergence::Covariant3(_) => unreachable!(),
        };
        let half: Array1<f64> = 0.5 * &d.scalar;
        sink.compare(bianchi2, half.as_slice().expect("contiguous"), vec![div.to_vec()]);

        for probe in &suite.probes {
            let ops = suite.chart.diff_ops(probe, &b)?;
            let h = &ops.hessian;
            let asym: Vec<f64> = (0..n * n).map(|q| h[[q / n, q % n]] - h[[q % n, q / n]]).collect();
            sink.residual(hess_sym, &asym);
            let tr = (&b.inverse * h).sum();
            sink.compare(trace, &[ops.laplacian], vec![vec![tr]]);
        }

        if let (Some((anti, proj)), Some(params)) = (pp_ids, suite.params) {
            let pp = pp_tensor(&b, params)?;
            sink.residual(anti, &[pp.antisymmetry_defect()]);
            let exact = projective_tensor(&b)?;
            let special = pp_tensor(&b, PseudoProjectiveParams::projective(n)?)?;
            sink.compare(
                proj,
                exact.components.as_slice().expect("standard layout"),
                vec![special.components.as_slice().expect("standard layout").to_vec()],
            );
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_model;

    #[test]
    fn identities_hold_on_a_random_model() {
        let m = random_model(4).unwrap();
        let suite = IdentitySuite::for_model(&m);
        let recs = verify_identities(&suite, &m.sample_points(4, 0).unwrap(), None).unwrap();
        assert_eq!(recs.len(), 9);
        for r in &recs {
            assert!(r.verdict.passed(), "{} {:e}", r.id, r.max_abs);
        }
    }

    #[test]
    fn fault_flips_a_single_record() {
        let m = random_model(1).unwrap();
        let suite = IdentitySuite::for_model(&m);
        let recs = verify_identities(&suite, &m.sample_points(2, 0).unwrap(), Some("identity.first_bianchi")).unwrap();
        for r in &recs {
            assert_eq!(r.verdict.passed(), r.id != "identity.first_bianchi", "{}", r.id);
        }
    }
}
