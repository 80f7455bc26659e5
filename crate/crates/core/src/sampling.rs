//! Collocation point sets: Latin hypercube interior, both walls, initial line.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::{Domain, ProblemSpec};

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("invalid collocation counts: {0}")]
    InvalidCounts(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollocationCounts {
    pub n_interior: usize,
    pub n_boundary: usize,
    pub n_initial: usize,
}

impl Default for CollocationCounts {
    fn default() -> Self {
        CollocationCounts {
            n_interior: 5000,
            n_boundary: 500,
            n_initial: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    /// `(x, t)` with `t` in `(0, T]`.
    pub interior: Vec<(f64, f64)>,
    /// `(x, t)` with `x` on a wall; the first half sits on `x_lo`.
    pub boundary: Vec<(f64, f64)>,
    /// `x` positions at `t = 0`.
    pub initial: Vec<f64>,
    pub seed: u64,
}

/// Latin hypercube sample of the box `[x0, x1] x [y0, y1]`: each of the
/// `n` strata per axis holds exactly one point.
pub fn latin_hypercube(n: usize, bounds: [(f64, f64); 2], seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [(x0, x1), (y0, y1)] = bounds;
    lhs_unit(n, &mut rng)
        .into_iter()
        .map(|(a, b)| (x0 + (x1 - x0) * a, y0 + (y1 - y0) * b))
        .collect()
}

fn lhs_unit<R: Rng>(n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let a = lhs_1d(n, rng);
    let b = lhs_1d(n, rng);
    a.into_iter().zip(b).collect()
}

/// Stratified uniform sample of `[0, 1)` in shuffled order.
fn lhs_1d<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut strata: Vec<usize> = (0..n).collect();
    strata.shuffle(rng);
    strata
        .into_iter()
        .map(|k| (k as f64 + rng.gen::<f64>()) / n as f64)
        .collect()
}

pub fn build_collocation(
    spec: &ProblemSpec,
    counts: &CollocationCounts,
    seed: u64,
) -> Result<CollocationSet, SamplingError> {
    sample_domain(&spec.domain, counts, seed)
}

pub fn sample_domain(domain: &Domain, counts: &CollocationCounts, seed: u64) -> Result<CollocationSet, SamplingError> {
    if counts.n_interior == 0 || counts.n_boundary == 0 || counts.n_initial == 0 {
        return Err(SamplingError::InvalidCounts(format!("{counts:?}")));
    }
    if counts.n_boundary < 2 {
        return Err(SamplingError::InvalidCounts("need at least one point per wall".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x0, w, t_end) = (domain.x_lo, domain.width(), domain.t_end);

    // reflect t so the unit interval [0, 1) lands on (0, T]
    let interior = lhs_unit(counts.n_interior, &mut rng)
        .into_iter()
        .map(|(a, b)| (x0 + w * a, t_end - t_end * b))
        .collect();

    let n_left = counts.n_boundary / 2;
    let n_right = counts.n_boundary - n_left;
    let mut boundary = Vec::with_capacity(counts.n_boundary);
    for (n, x) in [(n_left, domain.x_lo), (n_right, domain.x_hi)] {
        boundary.extend(lhs_1d(n, &mut rng).into_iter().map(|b| (x, t_end - t_end * b)));
    }

    let initial = lhs_1d(counts.n_initial, &mut rng)
        .into_iter()
        .map(|a| x0 + w * a)
        .collect();

    Ok(CollocationSet {
        interior,
        boundary,
        initial,
        seed,
    })
}

impl CollocationSet {
    /// CSV with columns `x,t,kind`, kind one of interior, boundary, initial.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SamplingError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "t", "kind"])?;
        for &(x, t) in &self.interior {
            out.serialize((x, t, "interior"))?;
        }
        for &(x, t) in &self.boundary {
            out.serialize((x, t, "boundary"))?;
        }
        for &x in &self.initial {
            out.serialize((x, 0.0, "initial"))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burgers_domain() -> Domain {
        Domain {
            x_lo: -1.0,
            x_hi: 1.0,
            t_end: 1.0,
        }
    }

    #[test]
    fn counts_and_ranges() {
        let d = burgers_domain();
        let c = CollocationCounts::default();
        let s = sample_domain(&d, &c, 7).unwrap();
        assert_eq!(s.interior.len(), 5000);
        assert_eq!(s.boundary.len(), 500);
        assert_eq!(s.initial.len(), 500);
        for &(x, t) in &s.interior {
            assert!((-1.0..=1.0).contains(&x));
            assert!(t > 0.0 && t <= 1.0);
        }
        assert_eq!(s.boundary.iter().filter(|p| p.0 == -1.0).count(), 250);
        assert_eq!(s.boundary.iter().filter(|p| p.0 == 1.0).count(), 250);
    }

    fn strata_hit(v: &[f64], lo: f64, hi: f64) -> Vec<usize> {
        let n = v.len();
        let mut k: Vec<usize> = v
            .iter()
            .map(|&a| (((a - lo) / (hi - lo) * n as f64) as usize).min(n - 1))
            .collect();
        k.sort_unstable();
        k
    }

    #[test]
    fn four_point_strata() {
        let p = latin_hypercube(4, [(0.0, 1.0), (0.0, 1.0)], 11);
        let xs: Vec<f64> = p.iter().map(|q| q.0).collect();
        let ys: Vec<f64> = p.iter().map(|q| q.1).collect();
        assert_eq!(strata_hit(&xs, 0.0, 1.0), vec![0, 1, 2, 3]);
        assert_eq!(strata_hit(&ys, 0.0, 1.0), vec![0, 1, 2, 3]);
        assert_eq!(p, latin_hypercube(4, [(0.0, 1.0), (0.0, 1.0)], 11));
    }

    #[test]
    fn large_sample_is_centred() {
        let p = latin_hypercube(5000, [(0.0, 2.0), (-1.0, 1.0)], 5);
        let mx = p.iter().map(|q| q.0).sum::<f64>() / 5000.0;
        let my = p.iter().map(|q| q.1).sum::<f64>() / 5000.0;
        assert!((mx - 1.0).abs() < 0.02 && my.abs() < 0.02);
    }

    #[test]
    fn advection_set_shape() {
        let spec = ProblemSpec::advection(1.0);
        let s = build_collocation(&spec, &CollocationCounts::default(), 0).unwrap();
        assert!(s.interior.iter().all(|p| p.1 > 0.0));
        let t_left: Vec<f64> = s.boundary.iter().filter(|p| p.0 == 0.0).map(|p| p.1).collect();
        assert_eq!(t_left.len(), 250);
        let k = strata_hit(&t_left, 0.0, 4.0);
        assert_eq!(k, (0..250).collect::<Vec<_>>());
        let xs = strata_hit(&s.initial, 0.0, 2.0 * std::f64::consts::PI);
        assert_eq!(xs, (0..500).collect::<Vec<_>>());
    }

    #[test]
    fn seeded_determinism() {
        let d = burgers_domain();
        let c = CollocationCounts {
            n_interior: 50,
            n_boundary: 10,
            n_initial: 10,
        };
        assert_eq!(sample_domain(&d, &c, 3).unwrap(), sample_domain(&d, &c, 3).unwrap());
        assert_ne!(
            sample_domain(&d, &c, 3).unwrap().interior,
            sample_domain(&d, &c, 4).unwrap().interior
        );
    }

    #[test]
    fn rejects_empty_sets() {
        let c = CollocationCounts {
            n_interior: 0,
            ..Default::default()
        };
        assert!(sample_domain(&burgers_domain(), &c, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let c = CollocationCounts {
            n_interior: 3,
            n_boundary: 2,
            n_initial: 1,
        };
        let s = sample_domain(&burgers_domain(), &c, 0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,t,kind");
        assert_eq!(lines.len(), 7);
        assert!(lines[6].ends_with(",0.0,initial"));
    }
}
