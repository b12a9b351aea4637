use seqwarp::random::{random_model, random_sgrw, random_ssst};
use seqwarp::{verify_lemmas, verify_pp, FormulaRecord, SequentialModel, VerifyOptions};

fn report(model: &SequentialModel, recs: &[FormulaRecord]) -> Vec<String> {
    let mut bad = Vec::new();
    for r in recs {
        let variants: Vec<String> = r
            .variants
            .iter()
            .map(|v| format!("{}{}={:.1e}", if v.best_match { "*" } else { "" }, v.name, v.max_abs))
            .collect();
        println!("{:28} {:?} abs={:.2e} rel={:.2e} n={} {}", r.id, r.verdict, r.max_abs, r.max_rel, r.observations, variants.join(" | "));
        if !r.verdict.passed() {
            bad.push(format!("{} {:?}", r.id, model.dims()));
        }
    }
    bad
}

#[test]
fn lemmas_and_components_match_oracle() {
    let mut bad = Vec::new();
    let models: Vec<SequentialModel> = (0..3)
        .map(|s| random_model(s).unwrap())
        .chain((0..2).map(|s| random_sgrw(s).unwrap()))
        .chain((0..2).map(|s| random_ssst(s).unwrap()))
        .collect();
    for m in &models {
        let pts = m.sample_points(8, 1).unwrap();
        let opts = VerifyOptions::default();
        bad.extend(report(m, &verify_lemmas(m, &pts, &opts).unwrap()));
        bad.extend(report(m, &verify_pp(m, &pts, &opts).unwrap()));
    }
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn spacetime_components_match_oracle() {
    use seqwarp::presets::{verify_sgrw, verify_ssst};
    let mut bad = Vec::new();
    for s in 0..4 {
        let opts = VerifyOptions::default();
        let m = random_sgrw(s).unwrap();
        let pts = m.sample_points(8, 2).unwrap();
        bad.extend(report(&m, &verify_sgrw(&m, &pts, &opts).unwrap()));
        let m = random_ssst(s).unwrap();
        let pts = m.sample_points(8, 2).unwrap();
        bad.extend(report(&m, &verify_ssst(&m, &pts, &opts).unwrap()));
    }
    assert!(bad.is_empty(), "{bad:#?}");
}
