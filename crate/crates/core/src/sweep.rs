//! Data-parallel verification sweeps with a deterministic reduction.

use rayon::prelude::*;

use crate::chart::ChartPoint;
use crate::compare::{Discrepancy, FormulaRecord, RecordBuilder, Tolerance};
use crate::error::{GeometryError, Result};

/// Size of the perturbation added by fault injection.
pub const FAULT_SIZE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct RecordSpec {
    pub id: String,
    pub anchor: String,
    pub variants: Vec<String>,
    pub tol: Tolerance,
    pub note: Option<String>,
}

/// Ordered list of formula records a sweep will fill.
#[derive(Debug, Clone, Default)]
pub struct SpecRegistry {
    specs: Vec<RecordSpec>,
}

impl SpecRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, id: &str, anchor: &str, variants: &[&str], tol: Tolerance) -> usize {
        debug_assert!(self.specs.iter().all(|s| s.id != id), "duplicate record id {id}");
        self.specs.push(RecordSpec {
            id: id.to_string(),
            anchor: anchor.to_string(),
            variants: if variants.is_empty() {
                vec!["adopted".into()]
            } else {
                variants.iter().map(|s| s.to_string()).collect()
            },
            tol,
            note: None,
        });
        self.specs.len() - 1
    }

    pub fn note(&mut self, index: usize, note: impl Into<String>) {
        self.specs[index].note = Some(note.into());
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[RecordSpec] {
        &self.specs
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.id == id)
    }
}

/// Per-point observation buffer handed to sweep closures.
pub struct PointSink {
    fault: Option<usize>,
    obs: Vec<Vec<Vec<Discrepancy>>>,
}

impl PointSink {
    fn new(len: usize, fault: Option<usize>) -> Self {
        PointSink {
            fault,
            obs: vec![Vec::new(); len],
        }
    }

    /// Compares every reading against the oracle; reading 0 is adopted.
    pub fn compare(&mut self, record: usize, oracle: &[f64], mut readings: Vec<Vec<f64>>) {
        if self.fault == Some(record) {
            if let Some(v) = readings.first_mut().and_then(|r| r.first_mut()) {
                *v += FAULT_SIZE;
            }
        }
        let ds = readings.iter().map(|r| Discrepancy::between(r, oracle)).collect();
        self.obs[record].push(ds);
    }

    /// A single quantity expected to vanish.
    pub fn residual(&mut self, record: usize, values: &[f64]) {
        let zeros = vec![0.0; values.len()];
        self.compare(record, &zeros, vec![values.to_vec()]);
    }
}

/// Runs `eval` at every point in parallel and folds observations in point order.
pub fn run_sweep<F>(
    registry: &SpecRegistry,
    points: &[ChartPoint],
    fault: Option<&str>,
    eval: F,
) -> Result<Vec<FormulaRecord>>
where
    F: Fn(&ChartPoint, &mut PointSink) -> Result<()> + Sync,
{
    let fault_index = fault.and_then(|id| registry.index_of(id));
    let per_point: Vec<Result<PointSink>> = points
        .par_iter()
        .map(|p| {
            let mut sink = PointSink::new(registry.len(), fault_index);
            eval(p, &mut sink).map_err(|e| GeometryError::AtPoint {
                point: p.values.clone(),
                source: Box::new(e),
            })?;
            Ok(sink)
        })
        .collect();
    let mut builders: Vec<RecordBuilder> = registry
        .specs
        .iter()
        .map(|s| {
            let names: Vec<&str> = s.variants.iter().map(String::as_str).collect();
            let b = RecordBuilder::new(&s.id, &s.anchor, &names, s.tol);
            match &s.note {
                Some(n) => b.with_note(n.clone()),
                None => b,
            }
        })
        .collect();
    for (p, sink) in points.iter().zip(per_point) {
        let sink = sink?;
        for (b, obs) in builders.iter_mut().zip(sink.obs) {
            for ds in obs {
                b.observe_discrepancies(&p.values, &ds);
            }
        }
    }
    Ok(builders.into_iter().map(RecordBuilder::finish).collect())
}

/// Whether `id` names a record of `registry`; used to validate fault targets.
pub fn has_record(registry: &SpecRegistry, id: &str) -> bool {
    registry.index_of(id).is_some()
}
