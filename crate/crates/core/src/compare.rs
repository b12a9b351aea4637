//! Tolerance-based comparison of closed forms against oracle values, and the
//! per-formula records that reports are built from.

use serde::{Deserialize, Serialize};

/// Relative tolerance with an absolute floor: an observation passes iff
/// `|a − b|_∞ <= max(rel · scale, abs)` where `scale = max(|a|_∞, |b|_∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    /// Closed form against oracle.
    pub const VERIFY: Tolerance = Tolerance { rel: 1e-8, abs: 1e-10 };
    /// Two closed-form evaluators of the same quantity.
    pub const CONSISTENCY: Tolerance = Tolerance { rel: 1e-10, abs: 1e-10 };

    pub fn new(rel: f64, abs: f64) -> Self {
        Tolerance { rel, abs }
    }

    pub fn allowance(&self, scale: f64) -> f64 {
        (self.rel * scale).max(self.abs)
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::VERIFY
    }
}

/// Difference between two equally sized vectors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Discrepancy {
    pub abs: f64,
    pub rel: f64,
    pub scale: f64,
}

impl Discrepancy {
    pub fn between(a: &[f64], b: &[f64]) -> Discrepancy {
        assert_eq!(a.len(), b.len(), "compared vectors differ in length");
        let mut abs: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (x, y) in a.iter().zip(b) {
            abs = abs.max((x - y).abs());
            scale = scale.max(x.abs()).max(y.abs());
        }
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            abs = f64::INFINITY;
        }
        let rel = if abs == 0.0 { 0.0 } else { abs / scale };
        Discrepancy { abs, rel, scale }
    }

    /// A scalar residual expected to vanish.
    pub fn residual(value: f64) -> Discrepancy {
        Discrepancy::between(&[value], &[0.0])
    }

    /// How far past the allowance this observation is (`<= 1` passes).
    pub fn excess(&self, tol: &Tolerance) -> f64 {
        if self.abs == 0.0 {
            0.0
        } else {
            self.abs / tol.allowance(self.scale)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub name: String,
    pub max_abs: f64,
    pub max_rel: f64,
    /// The reading used for the verdict.
    pub adopted: bool,
    /// The reading with the smallest worst-case excess against the oracle.
    pub best_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaRecord {
    pub id: String,
    pub anchor: String,
    pub max_abs: f64,
    pub max_rel: f64,
    /// Point of the worst observation of the adopted reading.
    pub witness: Option<Vec<f64>>,
    pub verdict: Verdict,
    pub observations: usize,
    pub variants: Vec<VariantRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Worst {
    max_abs: f64,
    max_rel: f64,
    excess: f64,
}

impl Worst {
    fn absorb(&mut self, d: &Discrepancy, tol: &Tolerance) -> bool {
        self.max_abs = self.max_abs.max(d.abs);
        self.max_rel = self.max_rel.max(d.rel);
        let e = d.excess(tol);
        if e > self.excess || (e.is_nan() && !self.excess.is_nan()) {
            self.excess = e;
            true
        } else {
            false
        }
    }
}

/// Accumulates observations of one formula (all readings) into a record.
#[derive(Debug, Clone)]
pub struct RecordBuilder {
    id: String,
    anchor: String,
    tol: Tolerance,
    variants: Vec<String>,
    worst: Vec<Worst>,
    witness: Option<Vec<f64>>,
    observations: usize,
    note: Option<String>,
}

impl RecordBuilder {
    /// `variants[0]` is the adopted reading.
    pub fn new(id: impl Into<String>, anchor: impl Into<String>, variants: &[&str], tol: Tolerance) -> Self {
        let variants: Vec<String> = if variants.is_empty() {
            vec!["adopted".to_string()]
        } else {
            variants.iter().map(|s| s.to_string()).collect()
        };
        RecordBuilder {
            id: id.into(),
            anchor: anchor.into(),
            tol,
            worst: vec![Worst::default(); variants.len()],
            variants,
            witness: None,
            observations: 0,
            note: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn variant_count(&self) -> usize {
        self.variants.len()
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn set_note(&mut self, note: impl Into<String>) {
        self.note = Some(note.into());
    }

    /// One observation: `readings[k]` is the value of reading `k`.
    pub fn observe(&mut self, point: &[f64], oracle: &[f64], readings: &[Vec<f64>]) {
        assert_eq!(readings.len(), self.variants.len(), "reading count for {}", self.id);
        let ds: Vec<Discrepancy> = readings.iter().map(|r| Discrepancy::between(r, oracle)).collect();
        self.observe_discrepancies(point, &ds);
    }

    pub fn observe_discrepancies(&mut self, point: &[f64], ds: &[Discrepancy]) {
        assert_eq!(ds.len(), self.variants.len(), "reading count for {}", self.id);
        self.observations += 1;
        for (k, d) in ds.iter().enumerate() {
            let worse = self.worst[k].absorb(d, &self.tol);
            if k == 0 && (worse || self.witness.is_none()) {
                self.witness = Some(point.to_vec());
            }
        }
    }

    pub fn finish(self) -> FormulaRecord {
        let best = self
            .worst
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.excess.total_cmp(&b.1.excess))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let adopted = self.worst[0];
        let multiple = self.variants.len() > 1;
        let verdict = if self.observations > 0 && adopted.excess <= 1.0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        FormulaRecord {
            id: self.id,
            anchor: self.anchor,
            max_abs: adopted.max_abs,
            max_rel: adopted.max_rel,
            witness: if adopted.max_abs > 0.0 { self.witness } else { None },
            verdict,
            observations: self.observations,
            variants: if multiple {
                self.variants
                    .into_iter()
                    .zip(&self.worst)
                    .enumerate()
                    .map(|(k, (name, w))| VariantRecord {
                        name,
                        max_abs: w.max_abs,
                        max_rel: w.max_rel,
                        adopted: k == 0,
                        best_match: k == best,
                    })
                    .collect()
            } else {
                Vec::new()
            },
            note: self.note,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrepancy_and_allowance() {
        let d = Discrepancy::between(&[1.0, 2.0], &[1.0, 2.0 + 1e-9]);
        assert!(d.excess(&Tolerance::VERIFY) <= 1.0);
        let d = Discrepancy::between(&[1.0, 2.0], &[1.0, 2.1]);
        assert!(d.excess(&Tolerance::VERIFY) > 1.0);
        // Near zero the floor applies.
        let d = Discrepancy::between(&[1e-12], &[-1e-12]);
        assert!(d.excess(&Tolerance::VERIFY) <= 1.0);
        assert!(Discrepancy::between(&[f64::NAN], &[0.0]).excess(&Tolerance::VERIFY) > 1.0);
    }

    #[test]
    fn builder_tracks_best_variant_and_witness() {
        let mut b = RecordBuilder::new("x", "a = b", &["adopted", "other"], Tolerance::VERIFY);
        b.observe(&[0.0], &[1.0], &[vec![1.0], vec![2.0]]);
        b.observe(&[1.0], &[3.0], &[vec![3.0 + 1e-12], vec![3.5]]);
        let r = b.finish();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.witness, Some(vec![1.0]));
        assert!(r.variants[0].best_match && !r.variants[1].best_match);
        assert_eq!(r.observations, 2);
    }

    #[test]
    fn empty_record_fails() {
        let r = RecordBuilder::new("x", "a", &[], Tolerance::VERIFY).finish();
        assert_eq!(r.verdict, Verdict::Fail);
    }
}
