//! Radial grids, sampled functions, composite Simpson quadrature and the
//! inward Numerov integration of decaying Coulomb solutions.

use std::ops::{Add, Mul};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MIN_POINTS: usize = 1000;
const RESCALE_AT: f64 = 1e250;

/// How the abscissas are distributed between `r_min` and `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMapping {
    /// Equal steps in r.
    UniformR,
    /// Equal steps in √r; equidistributes the local Coulomb wavelength.
    UniformSqrtR,
}

/// Radial grid with precomputed Simpson weights (including the Jacobian of the mapping).
#[derive(Debug, Clone)]
pub struct RadialGrid {
    r_min: f64,
    r_max: f64,
    mapping: GridMapping,
    step: f64,
    x: Vec<f64>,
    r: Vec<f64>,
    weights: Vec<f64>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.r_min == other.r_min
            && self.r_max == other.r_max
            && self.mapping == other.mapping
            && self.r.len() == other.r.len()
    }
}

impl RadialGrid {
    /// Builds a grid. An even point count is bumped by one so that composite
    /// Simpson applies on every interval.
    pub fn new(r_min: f64, r_max: f64, points: usize, mapping: GridMapping) -> Result<Self> {
        if !(r_min > 0.0) || !(r_max > r_min) || !r_max.is_finite() {
            return Err(Error::Argument(format!(
                "grid bounds must satisfy 0 < r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        if points < MIN_POINTS {
            return Err(Error::Argument(format!(
                "grid needs at least {MIN_POINTS} points, got {points}"
            )));
        }
        let n = if points.is_multiple_of(2) {
            points + 1
        } else {
            points
        };
        let (x0, x1) = match mapping {
            GridMapping::UniformR => (r_min, r_max),
            GridMapping::UniformSqrtR => (r_min.sqrt(), r_max.sqrt()),
        };
        let step = (x1 - x0) / (n - 1) as f64;
        let x: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { x1 } else { x0 + step * i as f64 })
            .collect();
        let mut r: Vec<f64> = match mapping {
            GridMapping::UniformR => x.clone(),
            GridMapping::UniformSqrtR => x.iter().map(|s| s * s).collect(),
        };
        r[0] = r_min;
        r[n - 1] = r_max;

        let weights = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let simpson = if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let jacobian = match mapping {
                    GridMapping::UniformR => 1.0,
                    GridMapping::UniformSqrtR => 2.0 * xi,
                };
                simpson * step / 3.0 * jacobian
            })
            .collect();

        Ok(Self {
            r_min,
            r_max,
            mapping,
            step,
            x,
            r,
            weights,
        })
    }

    /// Default grid for a set of channels whose largest effective quantum number is `nu_max`.
    pub fn for_nu_max(nu_max: f64, r_min: f64, points: usize) -> Result<Self> {
        Self::new(
            r_min,
            2.0 * nu_max * nu_max + 60.0 * nu_max,
            points,
            GridMapping::UniformSqrtR,
        )
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn mapping(&self) -> GridMapping {
        self.mapping
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Sample abscissas in r.
    pub fn points(&self) -> &[f64] {
        &self.r
    }

    /// Quadrature weights such that ∫ f dr ≈ Σ wᵢ f(rᵢ).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Returns a grid with every `stride`-th abscissa kept (stride must be even so
    /// that Simpson still applies).
    pub fn coarsened(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !stride.is_multiple_of(2) || !(self.len() - 1).is_multiple_of(stride) {
            return Err(Error::Argument(format!(
                "stride {stride} does not divide {} intervals evenly",
                self.len() - 1
            )));
        }
        let n = (self.len() - 1) / stride + 1;
        let mut g = Self::new(self.r_min, self.r_max, n.max(MIN_POINTS), self.mapping)?;
        if g.len() != n {
            return Err(Error::Argument(format!(
                "coarsened grid would have only {n} points"
            )));
        }
        // Reuse the exact abscissas so samples can be decimated directly.
        g.r = self.r.iter().step_by(stride).copied().collect();
        Ok(g)
    }
}

/// Scalar types that can be sampled on a grid and integrated.
pub trait Sample: Copy + Send + Sync + Add<Output = Self> + Mul<Output = Self> {
    fn zero() -> Self;
    fn conj(self) -> Self;
    fn scale(self, w: f64) -> Self;
    fn finite(self) -> bool;
}

impl Sample for f64 {
    fn zero() -> Self {
        0.0
    }
    fn conj(self) -> Self {
        self
    }
    fn scale(self, w: f64) -> Self {
        self * w
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Sample for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn scale(self, w: f64) -> Self {
        self * w
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

/// Function samples, one per grid abscissa.
#[derive(Debug, Clone)]
pub struct SampledFunction<T = f64> {
    grid: Arc<RadialGrid>,
    values: Vec<T>,
}

impl<T: Sample> SampledFunction<T> {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Argument(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(r)` on the grid.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> T) -> Result<Self> {
        let values = grid.points().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

impl SampledFunction<f64> {
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Flips the overall sign.
    pub fn negated(mut self) -> Self {
        self.values.iter_mut().for_each(|v| *v = -*v);
        self
    }
}

/// ∫ f*(r) g(r) dr by composite Simpson on the mapped coordinate.
pub fn inner_product<T: Sample>(f: &SampledFunction<T>, g: &SampledFunction<T>) -> Result<T> {
    if !(Arc::ptr_eq(&f.grid, &g.grid) || *f.grid == *g.grid) {
        return Err(Error::Argument("functions live on different grids".into()));
    }
    Ok(f.values
        .iter()
        .zip(&g.values)
        .zip(f.grid.weights())
        .fold(T::zero(), |acc, ((a, b), &w)| {
            acc + (a.conj() * *b).scale(w)
        }))
}

/// Exponentially decaying solution of u'' = [l(l+1)/r² − 2/r + 1/ν²] u, i.e. the bound
/// Coulomb radial function at ε = −1/(2ν²), integrated inward from `r_max` and
/// normalized to unit quadrature norm. The sign is positive at large r.
pub fn numerov_decaying_solution(
    nu: f64,
    l: u32,
    grid: &Arc<RadialGrid>,
) -> Result<SampledFunction<f64>> {
    let lf = l as f64;
    if !(nu > lf) {
        return Err(Error::Domain(format!(
            "effective quantum number {nu} must exceed l = {l}"
        )));
    }
    let needed = 2.0 * nu * nu + 10.0 * nu;
    if grid.r_max < needed {
        return Err(Error::Domain(format!(
            "grid ends at r = {} but nu = {nu} needs r_max >= {needed}",
            grid.r_max
        )));
    }

    let n = grid.len();
    let h2 = grid.step * grid.step / 12.0;
    let centrifugal = lf * (lf + 1.0);
    let inv_nu2 = 1.0 / (nu * nu);
    let sqrt_map = grid.mapping == GridMapping::UniformSqrtR;

    // w'' = F(x) w on the uniform mapped coordinate x.
    let coeff = |i: usize| -> f64 {
        let x = grid.x[i];
        if sqrt_map {
            let x2 = x * x;
            (4.0 * centrifugal + 0.75) / x2 - 8.0 + 4.0 * inv_nu2 * x2
        } else {
            centrifugal / (x * x) - 2.0 / x + inv_nu2
        }
    };
    // ln of the asymptotic form expressed in the mapped variable.
    let log_seed = |i: usize| -> f64 {
        let r = grid.r[i];
        let log_u = nu * r.ln() - r / nu;
        if sqrt_map {
            log_u - 0.5 * (2.0 * grid.x[i]).ln()
        } else {
            log_u
        }
    };

    let mut w = vec![0.0; n];
    w[n - 1] = 1.0;
    w[n - 2] = (log_seed(n - 2) - log_seed(n - 1)).exp();
    let mut g_next = 1.0 - h2 * coeff(n - 1);
    let mut g_here = 1.0 - h2 * coeff(n - 2);
    for i in (1..n - 1).rev() {
        let g_prev = 1.0 - h2 * coeff(i - 1);
        w[i - 1] = ((12.0 - 10.0 * g_here) * w[i] - g_next * w[i + 1]) / g_prev;
        if w[i - 1].abs() > RESCALE_AT {
            w[i - 1..].iter_mut().for_each(|v| *v /= RESCALE_AT);
        }
        if !w[i - 1].is_finite() {
            return Err(Error::Domain(format!(
                "Numerov integration diverged at r = {}",
                grid.r[i - 1]
            )));
        }
        g_next = g_here;
        g_here = g_prev;
    }

    let mut u: Vec<f64> = if sqrt_map {
        w.iter()
            .zip(&grid.x)
            .map(|(wi, x)| wi * (2.0 * x).sqrt())
            .collect()
    } else {
        w
    };
    let norm = u
        .iter()
        .zip(&grid.weights)
        .map(|(v, wt)| wt * v * v)
        .sum::<f64>()
        .sqrt();
    u.iter_mut().for_each(|v| *v /= norm);
    SampledFunction::new(Arc::clone(grid), u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Unit-normalized hydrogenic u_{nl}(r) = r R_{nl}(r) from the associated Laguerre polynomial.
    fn hydrogenic(n: u32, l: u32, r: f64) -> f64 {
        let rho = 2.0 * r / n as f64;
        let k = n - l - 1;
        let alpha = (2 * l + 1) as f64;
        // L_k^{(α)}(ρ) via the three-term recurrence
        let (mut prev, mut cur) = (1.0, 1.0 + alpha - rho);
        let lag = if k == 0 {
            1.0
        } else {
            for j in 1..k {
                let j = j as f64;
                let next = ((2.0 * j + 1.0 + alpha - rho) * cur - (j + alpha) * prev) / (j + 1.0);
                prev = cur;
                cur = next;
            }
            cur
        };
        let norm =
            ((2.0 / n as f64).powi(3) * factorial(k) / (2.0 * n as f64 * factorial(n + l))).sqrt();
        r * norm * (-rho / 2.0).exp() * rho.powi(l as i32) * lag
    }

    fn grid(r_max: f64, points: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::new(0.01, r_max, points, GridMapping::UniformSqrtR).unwrap())
    }

    #[test]
    fn grid_invariants() {
        let g = RadialGrid::new(0.05, 100.0, 1000, GridMapping::UniformSqrtR).unwrap();
        assert_eq!(g.len(), 1001);
        assert_eq!(g.points()[0], 0.05);
        assert_eq!(*g.points().last().unwrap(), 100.0);
        assert!(g.points().windows(2).all(|p| p[1] > p[0]));
        // ∫ r dr over [a, b]
        let integral: f64 = g.points().iter().zip(g.weights()).map(|(r, w)| r * w).sum();
        assert!((integral - (100.0f64.powi(2) - 0.05f64.powi(2)) / 2.0).abs() < 1e-9);
        assert!(RadialGrid::new(0.0, 1.0, 2000, GridMapping::UniformR).is_err());
        assert!(RadialGrid::new(1.0, 2.0, 10, GridMapping::UniformR).is_err());
    }

    #[test]
    fn reproduces_hydrogenic_3d() {
        let g = grid(2.0 * 9.0 + 40.0, 4001);
        let u = numerov_decaying_solution(3.0, 2, &g).unwrap();
        let oracle = SampledFunction::from_fn(Arc::clone(&g), |r| hydrogenic(3, 2, r)).unwrap();
        assert!((oracle.norm() - 1.0).abs() < 1e-9);
        for (r, (a, b)) in g
            .points()
            .iter()
            .zip(u.values().iter().zip(oracle.values()))
        {
            if (3.0..=18.0).contains(r) {
                assert!(((a - b) / b).abs() < 1e-6, "r = {r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn unit_norm_and_decaying_boundary() {
        let g = grid(2.0 * 100.0 + 200.0, 20001);
        let u = numerov_decaying_solution(10.0, 2, &g).unwrap();
        assert!((inner_product(&u, &u).unwrap() - 1.0).abs() < 1e-10);

        let nu = 45.5;
        let g = grid(2.0 * nu * nu + 60.0 * nu, 200_001);
        let u = numerov_decaying_solution(nu, 2, &g).unwrap();
        let max = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(u.values().last().unwrap().abs() < 1e-10 * max);
        assert!(*u.values().last().unwrap() >= 0.0);
    }

    #[test]
    fn rejects_short_grid_and_low_nu() {
        let g = grid(50.0, 2001);
        assert!(matches!(
            numerov_decaying_solution(10.0, 2, &g),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            numerov_decaying_solution(1.5, 2, &g),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn hydrogenic_states_are_orthogonal() {
        let g = grid(2.0 * 16.0 + 80.0, 8001);
        let a = numerov_decaying_solution(3.0, 2, &g).unwrap();
        let b = numerov_decaying_solution(4.0, 2, &g).unwrap();
        assert!(inner_product(&a, &b).unwrap().abs() < 1e-6);
    }

    #[test]
    fn overlap_converges_under_refinement() {
        let r_max = 2.0 * 9.7f64.powi(2) + 20.0 * 9.7;
        let coarse =
            Arc::new(RadialGrid::new(1.0, r_max, 20_001, GridMapping::UniformSqrtR).unwrap());
        let fine =
            Arc::new(RadialGrid::new(1.0, r_max, 80_001, GridMapping::UniformSqrtR).unwrap());
        let ov = |g: &Arc<RadialGrid>| {
            let a = numerov_decaying_solution(9.3, 2, g).unwrap();
            let b = numerov_decaying_solution(9.7, 2, g).unwrap();
            inner_product(&a, &b).unwrap()
        };
        let (c, f) = (ov(&coarse), ov(&fine));
        assert!(c.abs() > 1e-3);
        assert!((c - f).abs() < 1e-6, "{c} vs {f}");
    }

    #[test]
    fn inner_product_is_conjugate_symmetric() {
        let g = grid(100.0, 2001);
        let f = SampledFunction::from_fn(Arc::clone(&g), |r| {
            Complex64::new((-r / 7.0).exp(), r.sin() / (1.0 + r))
        })
        .unwrap();
        let h = SampledFunction::from_fn(Arc::clone(&g), |r| {
            Complex64::new(r.cos(), (-r / 3.0).exp())
        })
        .unwrap();
        let fh = inner_product(&f, &h).unwrap();
        let hf = inner_product(&h, &f).unwrap();
        assert!((fh - hf.conj()).norm() < 1e-14);
        let ff = inner_product(&f, &f).unwrap();
        assert!(ff.re > 0.0 && ff.im.abs() < 1e-15);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = SampledFunction::from_fn(grid(100.0, 2001), |r| r).unwrap();
        let b = SampledFunction::from_fn(grid(100.0, 4001), |r| r).unwrap();
        assert!(inner_product(&a, &b).is_err());
    }
}
