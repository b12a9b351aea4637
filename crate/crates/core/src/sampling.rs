//! Deterministic low-discrepancy sample points inside a coordinate box.

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Index stride between seeds; sequences for different seeds do not overlap
/// for runs shorter than this.
const SEED_STRIDE: u64 = 4096;

/// Radical inverse of `index` in `base`, in [0, 1).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

/// Halton sequence over a closed box, starting at an offset derived from `seed`.
#[derive(Debug, Clone)]
pub struct HaltonSampler {
    bounds: Vec<(f64, f64)>,
    next: u64,
}

impl HaltonSampler {
    pub fn new(bounds: &[(f64, f64)], seed: u64) -> Self {
        assert!(
            bounds.len() <= PRIMES.len(),
            "Halton sampler supports at most {} dimensions",
            PRIMES.len()
        );
        HaltonSampler {
            bounds: bounds.to_vec(),
            // Index 0 maps to the lower corner; skip it.
            next: 1 + seed * SEED_STRIDE,
        }
    }

    pub fn take_points(&mut self, count: usize) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.next_point()).collect()
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.next;
        self.next += 1;
        self.bounds
            .iter()
            .zip(PRIMES)
            .map(|(&(lo, hi), base)| lo + (hi - lo) * radical_inverse(i, base))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_der_corput_prefix() {
        let got: Vec<f64> = (1..8).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125, 0.625, 0.375, 0.875]);
        assert_eq!(radical_inverse(1, 3), 1.0 / 3.0);
    }

    #[test]
    fn points_stay_in_box_and_repeat_per_seed() {
        let bounds = [(-1.0, 2.0), (0.5, 0.75), (10.0, 11.0)];
        let a = HaltonSampler::new(&bounds, 3).take_points(200);
        let b = HaltonSampler::new(&bounds, 3).take_points(200);
        assert_eq!(a, b);
        for p in &a {
            for (x, (lo, hi)) in p.iter().zip(bounds) {
                assert!(*x >= lo && *x <= hi);
            }
        }
        let c = HaltonSampler::new(&bounds, 4).take_points(200);
        assert_ne!(a, c);
    }
}
