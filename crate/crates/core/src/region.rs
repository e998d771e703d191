//! Axis-aligned sampling and evaluation boxes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in map coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Region {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() || min.is_empty() {
            return Err(Error::invalid("region", "min/max lengths differ or empty"));
        }
        if min.iter().zip(&max).any(|(a, b)| !(a < b)) {
            return Err(Error::invalid("region", "requires min < max per axis"));
        }
        Ok(Region { min, max })
    }

    /// Flat `[min1, max1, min2, max2, ...]` form used by config files.
    pub fn from_flat(bounds: &[f64]) -> Result<Self> {
        if bounds.len() < 2 || bounds.len() % 2 != 0 {
            return Err(Error::invalid("region", "expected an even list of bounds"));
        }
        let min = bounds.iter().step_by(2).copied().collect();
        let max = bounds.iter().skip(1).step_by(2).copied().collect();
        Region::new(min, max)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.min
            .iter()
            .zip(&self.max)
            .flat_map(|(a, b)| [*a, *b])
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.min.iter().zip(&self.max))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Uniform draw; one RNG call per axis in axis order.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(lo, hi)| rng.gen_range(*lo..*hi))
            .collect()
    }

    /// Grow the box by `frac` of its half-width on every side.
    pub fn inflate(&self, frac: f64) -> Region {
        let min = self
            .min
            .iter()
            .zip(&self.max)
            .map(|(lo, hi)| lo - frac * 0.5 * (hi - lo))
            .collect();
        let max = self
            .min
            .iter()
            .zip(&self.max)
            .map(|(lo, hi)| hi + frac * 0.5 * (hi - lo))
            .collect();
        Region { min, max }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sample_lands_inside() {
        let r = Region::from_flat(&[-1.0, 2.0, 0.5, 0.75]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = r.sample(&mut rng);
            assert!(r.contains(&p), "{p:?}");
        }
    }

    #[test]
    fn inflate_grows_symmetrically() {
        let r = Region::from_flat(&[0.0, 1.0, -2.0, 2.0]).unwrap();
        let g = r.inflate(0.2);
        assert!((g.min[0] + 0.1).abs() < 1e-15 && (g.max[0] - 1.1).abs() < 1e-15);
        assert!((g.min[1] + 2.4).abs() < 1e-15 && (g.max[1] - 2.4).abs() < 1e-15);
    }

    #[test]
    fn degenerate_region_rejected() {
        assert!(Region::from_flat(&[0.0, 0.0]).is_err());
        assert!(Region::from_flat(&[1.0, 0.0]).is_err());
        assert!(Region::from_flat(&[1.0]).is_err());
    }
}
