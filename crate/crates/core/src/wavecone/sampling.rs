use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Parameters of the sphere search used by the cone routines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereSampling {
    pub count: usize,
    pub seed: u64,
    pub refine_steps: usize,
    pub refine_shrink: f64,
}

impl Default for SphereSampling {
    fn default() -> Self {
        SphereSampling {
            count: 4096,
            seed: 0,
            refine_steps: 60,
            refine_shrink: 0.7,
        }
    }
}

impl SphereSampling {
    pub fn with_count(count: usize) -> Self {
        SphereSampling {
            count,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn without_refinement(mut self) -> Self {
        self.refine_steps = 0;
        self
    }

    /// Unit vectors in `R^d`. The coordinate axes `+-e_i` come first, followed
    /// by equally spaced angles (`d = 2`), a Fibonacci lattice (`d = 3`) or
    /// seeded normalized Gaussians (`d > 3`). The result depends only on
    /// `(d, count, seed)`.
    pub fn points(&self, d: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.count);
        for i in 0..d {
            for sign in [1.0, -1.0] {
                if out.len() < self.count {
                    let mut e = vec![0.0; d];
                    e[i] = sign;
                    out.push(e);
                }
            }
        }
        let rest = self.count.saturating_sub(out.len());
        match d {
            0 | 1 => {}
            2 => {
                for i in 0..rest {
                    let theta = 2.0 * PI * (i as f64 + 0.5) / rest as f64;
                    out.push(vec![theta.cos(), theta.sin()]);
                }
            }
            3 => {
                let golden = PI * (3.0 - 5.0_f64.sqrt());
                for i in 0..rest {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / rest as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64;
                    out.push(vec![r * phi.cos(), r * phi.sin(), z]);
                }
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                while out.len() < self.count {
                    let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let norm = crate::linalg::norm2(&g);
                    if norm > 1e-12 {
                        out.push(g.iter().map(|x| x / norm).collect());
                    }
                }
            }
        }
        out
    }

    /// Initial step length of the local refinement, a few sample spacings.
    pub(crate) fn initial_step(&self, d: usize) -> f64 {
        if d < 2 {
            return 0.0;
        }
        (3.0 / (self.count.max(1) as f64).powf(1.0 / (d as f64 - 1.0))).min(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_are_unit_and_reproducible() {
        for d in 1..=5 {
            let s = SphereSampling::with_count(300).with_seed(9);
            let a = s.points(d);
            assert_eq!(a, s.points(d));
            assert_eq!(a.len(), if d == 1 { 2 } else { 300 });
            for p in &a {
                assert!((crate::linalg::norm2(p) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seeds_matter_only_above_three_dimensions() {
        let a = SphereSampling::with_count(100).with_seed(1);
        let b = SphereSampling::with_count(100).with_seed(2);
        assert_eq!(a.points(3), b.points(3));
        assert_ne!(a.points(4), b.points(4));
    }

    #[test]
    fn axes_are_included() {
        let pts = SphereSampling::with_count(50).points(3);
        assert!(pts.contains(&vec![0.0, 0.0, 1.0]));
        assert!(pts.contains(&vec![-1.0, 0.0, 0.0]));
    }
}
