//! Seeded random sequential models for property tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::Chart;
use crate::error::Result;
use crate::pseudo_projective::PseudoProjectiveParams;
use crate::warped::{ModelKind, SequentialModel};

/// Factor dimensions drawn for generic models.
pub const DIMENSION_CHOICES: [[usize; 3]; 5] = [[2, 2, 2], [2, 1, 2], [1, 2, 1], [2, 2, 1], [1, 1, 2]];

/// Half-width of the coordinate box of every random factor.
pub const HALF_WIDTH: f64 = 0.8;

fn coef(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    // three decimals keep the generated sources readable
    (rng.random_range(lo..hi) * 1000.0).round() / 1000.0
}

/// Riemannian metric `δ + small trigonometric perturbation` on a box.
fn random_factor(rng: &mut ChaCha8Rng, name: &str, coords: &[String]) -> Result<Chart> {
    let m = coords.len();
    let mut rows = vec![vec![String::from("0"); m]; m];
    for i in 0..m {
        let c = &coords[(i + 1) % m];
        rows[i][i] = format!(
            "1 + {:.3}*sin({:.3}*{} + {:.3})",
            coef(rng, 0.05, 0.1),
            coef(rng, 0.5, 1.5),
            c,
            coef(rng, -1.0, 1.0)
        );
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let e = format!(
                "{:.3}*sin({:.3}*{} + {:.3}*{})",
                coef(rng, 0.02, 0.1),
                coef(rng, 0.5, 1.5),
                coords[i],
                coef(rng, 0.5, 1.5),
                coords[j]
            );
            rows[i][j] = e.clone();
            rows[j][i] = e;
        }
    }
    let names: Vec<&str> = coords.iter().map(String::as_str).collect();
    Chart::parse(name, &names, &rows, &vec![(-HALF_WIDTH, HALF_WIDTH); m])
}

fn lorentz_line(coord: &str) -> Result<Chart> {
    Chart::parse("I", &[coord], &[vec!["-1"]], &[(-HALF_WIDTH, HALF_WIDTH)])?.with_signature(vec![-1])
}

fn linear(rng: &mut ChaCha8Rng, coords: &[String]) -> String {
    coords
        .iter()
        .map(|c| format!("{:.3}*{c}", coef(rng, 0.4, 1.2)))
        .collect::<Vec<_>>()
        .join(" + ")
}

fn coords(prefix: &str, m: usize) -> Vec<String> {
    (1..=m).map(|k| format!("{prefix}{k}")).collect()
}

/// `f` on `M1`, `h` on `M1 × M2`, both bounded in `[0.9, 2.1]`.
fn warpings(rng: &mut ChaCha8Rng, c1: &[String], c2: &[String]) -> (String, String) {
    let f = format!("1.5 + 0.3*sin({} + {:.3})", linear(rng, c1), coef(rng, -1.0, 1.0));
    let h = format!(
        "1.5 + 0.3*sin({} + {:.3}) + 0.2*cos({} + {:.3}) + 0.05*{}*{}",
        linear(rng, c1),
        coef(rng, -1.0, 1.0),
        linear(rng, c2),
        coef(rng, -1.0, 1.0),
        c1[0],
        c2[0]
    );
    (f, h)
}

fn random_params(rng: &mut ChaCha8Rng) -> PseudoProjectiveParams {
    let pick = |rng: &mut ChaCha8Rng| {
        let v = coef(rng, 0.3, 2.0);
        if rng.random_bool(0.5) {
            -v
        } else {
            v
        }
    };
    let alpha = pick(rng);
    let mut beta = pick(rng);
    if beta == alpha {
        beta += 0.25;
    }
    PseudoProjectiveParams::new(alpha, beta).expect("non-zero by construction")
}

/// A generic Riemannian sequential model.
pub fn random_model(seed: u64) -> Result<SequentialModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = DIMENSION_CHOICES[rng.random_range(0..DIMENSION_CHOICES.len())];
    let (c1, c2, c3) = (coords("x", dims[0]), coords("y", dims[1]), coords("z", dims[2]));
    let factors = [
        random_factor(&mut rng, "M1", &c1)?,
        random_factor(&mut rng, "M2", &c2)?,
        random_factor(&mut rng, "M3", &c3)?,
    ];
    let (f, h) = warpings(&mut rng, &c1, &c2);
    let params = random_params(&mut rng);
    SequentialModel::from_sources(factors, &f, &h, params)
}

/// A sequential generalized Robertson–Walker model: `M1 = (I, −dt²)`.
pub fn random_sgrw(seed: u64) -> Result<SequentialModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5347_5257);
    let m2 = rng.random_range(1..=2);
    let m3 = rng.random_range(1..=2);
    let (c2, c3) = (coords("y", m2), coords("z", m3));
    let t = vec!["t".to_string()];
    let factors = [
        lorentz_line("t")?,
        random_factor(&mut rng, "M2", &c2)?,
        random_factor(&mut rng, "M3", &c3)?,
    ];
    let (f, h) = warpings(&mut rng, &t, &c2);
    let params = random_params(&mut rng);
    Ok(SequentialModel::from_sources(factors, &f, &h, params)?.with_kind(ModelKind::Sgrw))
}

/// A sequential standard static model: `M3 = (I, −dt²)`.
pub fn random_ssst(seed: u64) -> Result<SequentialModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5353_5354);
    let m1 = rng.random_range(1..=2);
    let m2 = rng.random_range(1..=2);
    let (c1, c2) = (coords("x", m1), coords("y", m2));
    let factors = [
        random_factor(&mut rng, "M1", &c1)?,
        random_factor(&mut rng, "M2", &c2)?,
        lorentz_line("t")?,
    ];
    let (f, h) = warpings(&mut rng, &c1, &c2);
    let params = random_params(&mut rng);
    Ok(SequentialModel::from_sources(factors, &f, &h, params)?.with_kind(ModelKind::Ssst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_models_are_deterministic() {
        let a = random_model(7).unwrap();
        let b = random_model(7).unwrap();
        assert_eq!(a.f().expr(), b.f().expr());
        assert_eq!(a.h().expr(), b.h().expr());
        assert_eq!(a.params(), b.params());
        for seed in 0..10 {
            random_model(seed).unwrap();
            random_sgrw(seed).unwrap();
            random_ssst(seed).unwrap();
        }
    }
}
