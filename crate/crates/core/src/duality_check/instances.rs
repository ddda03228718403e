//! Seeded random inputs for certification sweeps: smooth coefficients
//! `μ = α + p²` with `p` a random trigonometric polynomial, plus smooth
//! sources and random initial data.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fields::{CadlagPath, FnField, TimeField};
use super::solver::EnvCoefficient;
use super::DualityError;

/// `p(x, t) = Σ_j c_j cos(2π k_j x + φ_j + ω_j t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub waves: Vec<u32>,
    pub amps: Vec<f64>,
    pub phases: Vec<f64>,
    pub omegas: Vec<f64>,
}

impl TrigPoly {
    pub fn random<R: Rng>(rng: &mut R, terms: usize, max_wave: u32, amp: f64, max_omega: f64) -> Self {
        let mut p = Self {
            waves: Vec::with_capacity(terms),
            amps: Vec::with_capacity(terms),
            phases: Vec::with_capacity(terms),
            omegas: Vec::with_capacity(terms),
        };
        for _ in 0..terms {
            p.waves.push(rng.random_range(0..=max_wave));
            p.amps.push(amp * rng.random_range(-1.0..1.0));
            p.phases.push(rng.random_range(0.0..2.0 * PI));
            p.omegas.push(rng.random_range(-max_omega..=max_omega));
        }
        p
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let mut s = 0.0;
        for j in 0..self.waves.len() {
            s += self.amps[j] * (2.0 * PI * self.waves[j] as f64 * x + self.phases[j] + self.omegas[j] * t).cos();
        }
        s
    }

    pub fn abs_sum(&self) -> f64 {
        self.amps.iter().map(|a| a.abs()).sum()
    }

    /// Samples at the nodes `(i+1)/m`.
    pub fn fill(&self, t: f64, out: &mut [f64]) {
        let m = out.len() as f64;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.eval((i + 1) as f64 / m, t);
        }
    }

    pub fn field(self, m: usize) -> FnField<impl Fn(f64, &mut [f64]) + Send + Sync> {
        FnField::new(m, move |t, out: &mut [f64]| self.fill(t, out))
    }
}

/// A regular Kolmogorov problem drawn from a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInstance {
    pub seed: u64,
    pub m: usize,
    pub alpha: f64,
    pub t_final: f64,
    pub mu: TrigPoly,
    pub f: TrigPoly,
    pub r: TrigPoly,
    pub z0: Vec<f64>,
}

impl RandomInstance {
    pub fn generate(seed: u64, m: usize, t_final: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha = rng.random_range(0.2..2.0);
        let max_wave = (m as u32 / 2).min(6);
        let mu = TrigPoly::random(&mut rng, 3, max_wave, 0.6, 20.0);
        let f = TrigPoly::random(&mut rng, 3, max_wave, 1.0, 20.0);
        let r = TrigPoly::random(&mut rng, 3, max_wave, 5.0, 20.0);
        let z0 = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self {
            seed,
            m,
            alpha,
            t_final,
            mu,
            f,
            r,
            z0,
        }
    }

    pub fn env(&self) -> Result<EnvCoefficient, DualityError> {
        let p = self.mu.clone();
        let alpha = self.alpha;
        let sup = alpha + p.abs_sum().powi(2);
        let field = FnField::new(self.m, move |t, out: &mut [f64]| {
            p.fill(t, out);
            for o in out.iter_mut() {
                *o = alpha + *o * *o;
            }
        });
        EnvCoefficient::new(Arc::new(field), alpha, sup)
    }

    pub fn f_field(&self) -> impl TimeField {
        self.f.clone().field(self.m)
    }

    pub fn r_field(&self) -> impl TimeField {
        self.r.clone().field(self.m)
    }
}

/// Random piecewise-constant forcing with `jumps` jumps of `O(scale)` size at
/// uniform times in `(0, t_final)`.
pub fn random_jump_path(seed: u64, m: usize, jumps: usize, t_final: f64, scale: f64) -> CadlagPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times: Vec<f64> = (0..jumps).map(|_| rng.random_range(0.0..t_final)).collect();
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    times.dedup();
    times.retain(|&t| t > 0.0);
    let x0 = (0..m).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    let incs: Vec<Vec<f64>> = times
        .iter()
        .map(|_| (0..m).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
        .collect();
    CadlagPath::from_jumps(x0, &times, &incs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        assert_eq!(RandomInstance::generate(5, 8, 0.1), RandomInstance::generate(5, 8, 0.1));
        assert_ne!(RandomInstance::generate(5, 8, 0.1), RandomInstance::generate(6, 8, 0.1));
    }

    #[test]
    fn coefficient_respects_bounds() {
        let inst = RandomInstance::generate(11, 16, 0.1);
        let env = inst.env().unwrap();
        for k in 0..20 {
            let mu = env.field().eval(k as f64 * 0.005, super::super::Side::Right);
            for x in mu {
                assert!(x >= env.alpha() && x <= env.sup());
            }
        }
    }

    #[test]
    fn jump_path_shape() {
        let x = random_jump_path(3, 4, 10, 0.1, 0.5);
        assert_eq!(x.knots().len(), 11);
        assert!(x.knots().iter().all(|&t| (0.0..0.1).contains(&t)));
    }
}
