//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use seqwarp::identities::{verify_identities, IdentitySuite};
use seqwarp::presets::{grw_flatness_conditions, ssst_flatness_check};
use seqwarp::pseudo_projective::{conservative_check, divergence_sample, FLATNESS_THRESHOLD};
use seqwarp::random::{random_model, random_sgrw, random_ssst};
use seqwarp::structure::{
    conformal_soliton_field, gqe_residual, mqe_transform_gap, psi_soliton_residual, LambdaSpec, ScalarSpec,
    StructureProbe,
};
use seqwarp::warped::{hessian_scaling_sides, scaled_log};
use seqwarp::{
    flatness_diagnostics, flatness_scan, pp_tensor, projective_tensor, verify_lemmas, verify_pp, Chart, ChartPoint,
    ClosedFormContext, FormulaRecord, ModelKind, PseudoProjectiveParams, SequentialModel, Tolerance, VerifyOptions,
};
use seqwarp_expr::{parse_expression, SymbolicField};

const ORACLE_TOL: Tolerance = Tolerance::VERIFY;
const LEMMA_BUDGET: Duration = Duration::from_secs(60);
const SPECIALIZATION_TOL: f64 = 1e-10;
const VANISHING_TOL: f64 = 1e-8;
const PROJECTIVE_TOL: f64 = 1e-12;
const SCALING_TOL: Tolerance = Tolerance { rel: 1e-10, abs: 1e-10 };
const BIANCHI_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-10;
const K2_TOL: f64 = 1e-10;
const PROBE_TOL: f64 = 1e-9;
const DIV_TOL: f64 = 1e-8;
const CODAZZI_TOL: f64 = 1e-7;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const POINTS: usize = 20;

type Outcome = Result<String, String>;

fn suite() -> Vec<SequentialModel> {
    SEEDS.iter().map(|&s| random_model(s).unwrap()).collect()
}

fn field(src: &str, coords: &[&str]) -> SymbolicField {
    SymbolicField::new(parse_expression(src, coords).unwrap(), coords.len())
}

fn line(name: &str, c: &str, lo: f64, hi: f64) -> Chart {
    Chart::parse(name, &[c], &[vec!["1"]], &[(lo, hi)]).unwrap()
}

fn sphere3() -> Chart {
    Chart::diagonal("S3", &["a", "b", "c"], &["1", "sin(a)^2", "sin(a)^2*sin(b)^2"], &[(0.4, 2.7), (0.4, 2.7), (-3.0, 3.0)])
        .unwrap()
}

fn hyperbolic3() -> Chart {
    Chart::diagonal("H3", &["x", "y", "z"], &["1/z^2", "1/z^2", "1/z^2"], &[(-1.0, 1.0), (-1.0, 1.0), (0.5, 1.5)]).unwrap()
}

fn space_form_charts() -> Vec<Chart> {
    vec![
        Chart::euclidean("E3", &["x", "y", "z"], 1.0),
        Chart::euclidean("E4", &["x", "y", "z", "w"], 1.0),
        sphere3(),
        hyperbolic3(),
    ]
}

/// Flat, spherical and hyperbolic 3-space over three lines.
fn polar_space_forms(p: PseudoProjectiveParams) -> Vec<SequentialModel> {
    [("r", "r*sin(th)"), ("sin(r)", "sin(r)*sin(th)"), ("sinh(r)", "sinh(r)*sin(th)")]
        .iter()
        .map(|(f, h)| {
            SequentialModel::from_sources(
                [line("R", "r", 0.5, 1.4), line("T", "th", 0.6, 2.4), line("P", "ph", -1.0, 1.0)],
                f,
                h,
                p,
            )
            .unwrap()
        })
        .collect()
}

fn failures(recs: &[FormulaRecord]) -> Vec<String> {
    recs.iter().filter(|r| !r.verdict.passed()).map(|r| format!("{} ({:.2e})", r.id, r.max_rel)).collect()
}

fn worst_abs(recs: &[FormulaRecord]) -> f64 {
    recs.iter().fold(0.0, |m, r| m.max(r.max_abs))
}

fn opts() -> VerifyOptions {
    VerifyOptions {
        tol: ORACLE_TOL,
        ..VerifyOptions::default()
    }
}

fn gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut recs = Vec::new();
    for m in suite() {
        let pts = m.sample_points(POINTS, 17).unwrap();
        recs.extend(verify_lemmas(&m, &pts, &opts()).map_err(|e| e.to_string())?);
    }
    let elapsed = start.elapsed();
    let bad = failures(&recs);
    if !bad.is_empty() {
        return Err(format!("failed: {}", bad.join(", ")));
    }
    if elapsed > LEMMA_BUDGET {
        return Err(format!("took {:.1} s", elapsed.as_secs_f64()));
    }
    Ok(format!("{} records, worst abs {:.1e}, {:.1} s", recs.len(), worst_abs(&recs), elapsed.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let mut recs = Vec::new();
    for m in suite() {
        let pts = m.sample_points(POINTS, 17).unwrap();
        recs.extend(verify_pp(&m, &pts, &opts()).map_err(|e| e.to_string())?);
    }
    let bad = failures(&recs);
    if !bad.is_empty() {
        return Err(format!("failed: {}", bad.join(", ")));
    }
    for id in 1..=11 {
        let case = format!("pp.case.{id}");
        if !recs.iter().any(|r| r.id == case && r.observations > 0) {
            return Err(format!("{case} never observed"));
        }
    }
    for id in ["pp.case.2", "pp.case.8"] {
        if recs.iter().filter(|r| r.id == id).any(|r| r.note.is_none()) {
            return Err(format!("{id} carries no adjudication note"));
        }
    }
    Ok(format!("11 cases on 5 models, worst abs {:.1e}, adjudications noted", worst_abs(&recs)))
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for s in SEEDS {
        for m in [random_sgrw(s).unwrap(), random_ssst(s).unwrap()] {
            let pts = m.sample_points(POINTS, s).unwrap();
            let recs = match m.kind() {
                ModelKind::Sgrw => seqwarp::presets::verify_sgrw(&m, &pts, &opts()),
                _ => seqwarp::presets::verify_ssst(&m, &pts, &opts()),
            }
            .map_err(|e| e.to_string())?;
            let bad = failures(&recs);
            if !bad.is_empty() {
                return Err(format!("seed {s}: {}", bad.join(", ")));
            }
            for r in recs.iter().filter(|r| r.id.contains(".specialization.")) {
                worst = worst.max(r.max_abs);
                count += 1;
                if r.max_abs > SPECIALIZATION_TOL {
                    return Err(format!("{} differs by {:.2e}", r.id, r.max_abs));
                }
            }
            if m.kind() == ModelKind::Sgrw && recs.iter().any(|r| r.id == "sgrw.case.4" && r.note.is_none()) {
                return Err("sgrw.case.4 sign adjudication missing".into());
            }
        }
    }
    Ok(format!("{count} specialization records, max gap {worst:.1e}"))
}

fn pairs() -> [PseudoProjectiveParams; 5] {
    [(1.0, 0.5), (-0.7, 1.9), (2.3, -0.4), (0.3, 0.3), (-1.6, -2.2)].map(|(a, b)| PseudoProjectiveParams::new(a, b).unwrap())
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    for chart in space_form_charts() {
        for params in pairs() {
            for p in chart.sample_points(10, 3) {
                let b = chart.curvature(&p).map_err(|e| e.to_string())?;
                worst = worst.max(pp_tensor(&b, params).unwrap().max_abs());
            }
        }
    }
    if worst < VANISHING_TOL {
        Ok(format!("E3, E4, S3, H3 x 5 parameter pairs, max |P| {worst:.1e}"))
    } else {
        Err(format!("max |P| {worst:.2e}"))
    }
}

fn criterion_5() -> Outcome {
    let mut charts: Vec<Chart> = suite().iter().map(|m| m.assembled().clone()).collect();
    charts.extend(space_form_charts());
    let mut worst: f64 = 0.0;
    for chart in &charts {
        let params = PseudoProjectiveParams::projective(chart.dim()).unwrap();
        for p in chart.sample_points(10, 5) {
            let b = chart.curvature(&p).map_err(|e| e.to_string())?;
            let a = pp_tensor(&b, params).unwrap();
            let e = projective_tensor(&b).unwrap();
            worst = worst.max(gap(a.components.as_slice().unwrap(), e.components.as_slice().unwrap()));
        }
    }
    if worst <= PROJECTIVE_TOL {
        Ok(format!("{} metrics, max gap {worst:.1e}", charts.len()))
    } else {
        Err(format!("max gap {worst:.2e}"))
    }
}

fn criterion_6() -> Outcome {
    let mut probes = 0;
    let mut scaling: f64 = 0.0;
    for m in suite() {
        let n = m.n();
        let chart = m.assembled();
        let pts = m.sample_points(POINTS, 9).unwrap();
        let candidates = [
            (SymbolicField::new(m.h().expr().clone(), n), m.dims()[2] as f64),
            (SymbolicField::new(m.f().expr().clone(), n), -3.0),
        ];
        for (phi, mm) in &candidates {
            let ml = scaled_log(phi, *mm);
            for p in &pts {
                let b = chart.curvature(p).map_err(|e| e.to_string())?;
                let (l, r) = hessian_scaling_sides(chart, &b, phi, &ml, *mm).map_err(|e| e.to_string())?;
                let scale = l.iter().chain(&r).fold(0.0_f64, |s, v| s.max(v.abs()));
                let g = gap(&l, &r);
                if g > (SCALING_TOL.rel * scale).max(SCALING_TOL.abs) {
                    return Err(format!("scaling identity off by {g:.2e}"));
                }
                scaling = scaling.max(g);
            }
            probes += 1;
        }
        let recs = verify_identities(&IdentitySuite::for_model(&m), &pts, None).map_err(|e| e.to_string())?;
        for r in &recs {
            let limit = if r.id == "identity.contracted_bianchi" { BIANCHI_TOL } else { SYMMETRY_TOL };
            let applies = matches!(
                r.id.as_str(),
                "identity.contracted_bianchi"
                    | "identity.hessian_symmetry"
                    | "identity.riemann_symmetry"
                    | "identity.first_bianchi"
            );
            if !r.verdict.passed() || (applies && r.max_abs > limit) {
                return Err(format!("{} residual {:.2e}", r.id, r.max_abs));
            }
        }
    }
    Ok(format!("{probes} (phi, m) probes, max scaling gap {scaling:.1e}; symmetry and Bianchi identities hold"))
}

fn criterion_7() -> Outcome {
    let mut witnessed = 0;
    let mut models: Vec<SequentialModel> = (0..8).map(|s| random_model(s).unwrap()).collect();
    models.extend((0..4).map(|s| random_sgrw(s).unwrap()));
    models.extend((0..4).map(|s| random_ssst(s).unwrap()));
    for (k, m) in models.iter().enumerate() {
        let pts = m.sample_points(POINTS, 21).unwrap();
        let scan = flatness_scan(m, &pts, m.params(), FLATNESS_THRESHOLD).map_err(|e| e.to_string())?;
        if scan.flat || scan.relative_max <= 10.0 * FLATNESS_THRESHOLD {
            continue;
        }
        let w = ChartPoint::new(scan.argmax_point.clone().unwrap());
        let ctx = ClosedFormContext::new(m, &w).map_err(|e| e.to_string())?;
        let mut residual = flatness_diagnostics(&ctx, m.params()).max_residual();
        match m.kind() {
            ModelKind::Sgrw => {
                let c = grw_flatness_conditions(m, &ctx).map_err(|e| e.to_string())?;
                residual = residual.max(c.necessary_residuals().iter().fold(0.0, |a, (_, v)| a.max(*v)));
            }
            ModelKind::Ssst => {
                let c = ssst_flatness_check(m, &ctx).map_err(|e| e.to_string())?;
                residual = residual.max(c.necessary_residuals().iter().fold(0.0, |a, (_, v)| a.max(*v)));
            }
            ModelKind::Generic => {}
        }
        if residual <= FLATNESS_THRESHOLD {
            return Err(format!("model {k} is non-flat but every necessary condition holds at the witness"));
        }
        witnessed += 1;
    }
    if witnessed == 0 {
        return Err("no non-flat model in the suite".into());
    }
    let mut k2_worst: f64 = 0.0;
    for h in ["1 + 0.2*t + 0.1*x^2", "exp(0.3*t*y) + 0.5", "2 + sin(t + x*y)"] {
        let src = std::fs::read_to_string(models_dir().join("sgrw-affine.toml")).unwrap();
        let src = src.replace("h = \"1 + 0.2*t + 0.1*x^2\"", &format!("h = \"{h}\""));
        let loaded = seqwarp_cli::model_file::parse_model(&src).map_err(|e| e.to_string())?;
        let m = &loaded.model;
        for p in m.sample_points(POINTS, 4).unwrap() {
            let ctx = ClosedFormContext::new(m, &p).map_err(|e| e.to_string())?;
            let c = grw_flatness_conditions(m, &ctx).map_err(|e| e.to_string())?;
            k2_worst = k2_worst.max(c.k2_displayed.abs());
        }
    }
    if k2_worst >= K2_TOL {
        return Err(format!("k2 reaches {k2_worst:.2e} on f^2 = 2t + 1"));
    }
    Ok(format!("{witnessed} non-flat models each violate a condition; |k2| <= {k2_worst:.1e} for f^2 = 2t + 1"))
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    for coords in [&["x", "y", "z"][..], &["x", "y", "z", "w"][..]] {
        let chart = Chart::euclidean("E", coords, 1.0);
        let phi_src = coords.iter().map(|c| format!("{c}^2")).collect::<Vec<_>>().join(" + ");
        let phi = field(&format!("({phi_src})/2"), coords);
        let almost = StructureProbe::new(phi.clone()).with_catino_coeff(0.0).with_lambda(LambdaSpec::Value(1.0));
        let psi = StructureProbe::new(phi)
            .with_catino_coeff(0.0)
            .with_psi(ScalarSpec::Value(1.0))
            .with_lambda(LambdaSpec::Value(1.0));
        for p in chart.sample_points(10, 1) {
            let b = chart.curvature(&p).map_err(|e| e.to_string())?;
            worst = worst.max(gqe_residual(&chart, &b, &almost).map_err(|e| e.to_string())?.residual);
            worst = worst.max(psi_soliton_residual(&chart, &b, &psi).map_err(|e| e.to_string())?.residual);
        }
    }
    let s2 = Chart::diagonal("S2", &["th", "ph"], &["1", "sin(th)^2"], &[(0.3, 2.8), (-3.0, 3.0)]).unwrap();
    let height = field("cos(th)", &["th", "ph"]);
    for p in s2.sample_points(10, 2) {
        let b = s2.curvature(&p).map_err(|e| e.to_string())?;
        let c = conformal_soliton_field(&s2, &b, &height).map_err(|e| e.to_string())?;
        if c.constant_field {
            return Err("height function reported constant".into());
        }
        worst = worst.max(c.fit.residual);
    }
    let mut transform: f64 = 0.0;
    let cases: Vec<(Chart, &str, f64)> = vec![
        (s2.clone(), "0.3*cos(th) + 0.1*ph", 2.0),
        (sphere3(), "a^2 - 0.5*b*c", 3.0),
        (hyperbolic3(), "ln(z) + x*y", 1.0),
        (suite()[0].assembled().clone(), "", 4.0),
    ];
    for (chart, src, m) in cases {
        let coords: Vec<&str> = chart.coords().iter().map(String::as_str).collect();
        let phi = if src.is_empty() {
            field(&format!("0.2*{}^2 + {}", coords[0], coords[coords.len() - 1]), &coords)
        } else {
            field(src, &coords)
        };
        for p in chart.sample_points(6, 8) {
            let b = chart.curvature(&p).map_err(|e| e.to_string())?;
            let (g, _) = mqe_transform_gap(&chart, &b, &phi, m, 0.7).map_err(|e| e.to_string())?;
            transform = transform.max(g);
        }
    }
    if worst >= PROBE_TOL || transform >= PROBE_TOL {
        return Err(format!("soliton residual {worst:.2e}, transform gap {transform:.2e}"));
    }
    Ok(format!("Gaussian and height probes residual {worst:.1e}; m-QE transform gap {transform:.1e}"))
}

fn criterion_9() -> Outcome {
    let params = PseudoProjectiveParams::new(1.0, 0.5).unwrap();
    let mut models = polar_space_forms(params);
    models.extend(suite());
    models.extend((0..2).map(|s| random_sgrw(s).unwrap()));
    models.extend((0..2).map(|s| random_ssst(s).unwrap()));
    let mut held = 0;
    for m in &models {
        let p = m.params();
        if p.alpha + p.beta == 0.0 {
            continue;
        }
        let samples = m
            .sample_points(10, 6)
            .unwrap()
            .iter()
            .map(|x| divergence_sample(m, x, p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let c = conservative_check(&samples, p, DIV_TOL, CODAZZI_TOL);
        if c.hypotheses_hold {
            if c.max_codazzi >= CODAZZI_TOL {
                return Err(format!("conservative model with Codazzi residual {:.2e}", c.max_codazzi));
            }
            held += 1;
        }
    }
    if held == 0 {
        return Err("no model met the hypotheses".into());
    }
    Ok(format!("{held} of {} models meet the hypotheses, all Codazzi", models.len()))
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_seqwarp")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn strip_wall_time(json: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(json).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_ms");
    v
}

fn criterion_10() -> Outcome {
    let generic = models_dir().join("generic.toml");
    let g = generic.to_str().unwrap();
    let (c1, a) = cli(&["verify", g, "--samples", "8", "--seed", "3", "--json"]);
    let (c2, b) = cli(&["verify", g, "--samples", "8", "--seed", "3", "--json"]);
    if c1 != 0 || c2 != 0 {
        return Err(format!("clean runs exited {c1}, {c2}"));
    }
    if strip_wall_time(&a) != strip_wall_time(&b) {
        return Err("repeated runs differ".into());
    }
    let (cf, f) = cli(&["verify", g, "--samples", "8", "--inject-fault", "pp.case.5", "--json"]);
    let report = strip_wall_time(&f);
    let ids = &report["summary"]["failed_ids"];
    if cf != 1 || ids != &serde_json::json!(["pp.case.5"]) {
        return Err(format!("fault run exited {cf} with failures {ids}"));
    }
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let src = std::fs::read_to_string(&generic).unwrap().replace("beta = -0.7", "beta = 0.0");
    std::fs::write(&bad, src).unwrap();
    let (ci, _) = cli(&["verify", bad.to_str().unwrap()]);
    let (cm, _) = cli(&["verify", dir.path().join("absent.toml").to_str().unwrap()]);
    if ci != 2 || cm != 2 {
        return Err(format!("input errors exited {ci}, {cm}"));
    }
    Ok("identical reports, exit codes 0/1/2, fault confined to its record".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence, lemmas", criterion_1),
        ("oracle equivalence, pseudo-projective cases", criterion_2),
        ("spacetime specialization consistency", criterion_3),
        ("constant-curvature vanishing", criterion_4),
        ("projective specialization", criterion_5),
        ("identity suite", criterion_6),
        ("necessary-condition contrapositives", criterion_7),
        ("classifier fixtures", criterion_8),
        ("conservative tensor implies Codazzi Ricci", criterion_9),
        ("determinism and CLI contract", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
