//! Linear entropy of the reduced electron state.
//!
//! A state Σ_N |N⟩⊗φ_N has reduced electron density ρ_e = Σ_N |φ_N⟩⟨φ_N|, so
//! Tr ρ_e² = Σ_{NN′} |⟨φ_N|φ_{N′}⟩|². With φ_N = Σ_n a_N^n χ_N^n the inner products
//! reduce to a_N† O^{(N,N′)} a_{N′} over the precomputed overlap tables.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelSet;
use crate::mqdt::{
    build_overlap_tables, channel_amplitudes, find_eigenstates, find_levels, window_for_nu,
    Eigenstate, OverlapTables,
};
use crate::numerics::{inner_product, RadialGrid, SampledFunction};
use crate::{Error, Result};

const MIN_CAPTURED_NORM: f64 = 0.999;

/// Generic or resonant tuning of the rotational constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Generic,
    Resonant,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Generic => "generic",
            Case::Resonant => "resonant",
        })
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(Case::Generic),
            "resonant" => Ok(Case::Resonant),
            other => Err(Error::Argument(format!("unknown case {other:?}"))),
        }
    }
}

/// S₂ of eigenstate `n` on its own.
pub fn stationary_linear_entropy(tables: &OverlapTables, n: usize) -> f64 {
    let nc = tables.n_channels();
    let mut purity = 0.0;
    for a in 0..nc {
        for b in 0..nc {
            let o = tables.overlap(a, n, b, n);
            purity += (tables.z[(n, a)] * tables.z[(n, b)] * o).powi(2);
        }
    }
    1.0 - purity
}

/// Unweighted mean and population rms of S₂ over every state in the tables.
pub fn entropy_statistics(tables: &OverlapTables) -> Result<(f64, f64)> {
    let n = tables.n_states();
    if n == 0 {
        return Err(Error::Range("no eigenstates".into()));
    }
    let values: Vec<f64> = (0..n)
        .map(|i| stationary_linear_entropy(tables, i))
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Ok((mean, var.sqrt()))
}

/// Mean and rms of the stationary S₂ over all eigenstates in `window`.
pub fn average_stationary_entropy(
    ch: &ChannelSet,
    window: (f64, f64),
    grid: &Arc<RadialGrid>,
) -> Result<(f64, f64)> {
    let states = find_eigenstates(ch, window, grid)?;
    if states.len() < 10 {
        return Err(Error::Range(format!(
            "window holds {} eigenstates, need at least 10",
            states.len()
        )));
    }
    entropy_statistics(&build_overlap_tables(&states)?)
}

/// Initial product state F_loc(r)⊗|N0⟩ with F_loc a Gaussian at the outer turning point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    pub n0: u32,
    pub nu_center: f64,
    /// Energy width of the Gaussian envelope (hartree).
    pub sigma_e: f64,
}

impl WavepacketSpec {
    /// Outer turning point 2ν².
    pub fn turning_point(&self) -> f64 {
        2.0 * self.nu_center * self.nu_center
    }

    /// Kepler period 2πν³ at the packet centre.
    pub fn kepler_period(&self) -> f64 {
        2.0 * PI * self.nu_center.powi(3)
    }

    /// Radial width giving the energy width σ_E through dr_tp/dε = 4ν⁴.
    pub fn radial_width(&self) -> f64 {
        self.sigma_e * 4.0 * self.nu_center.powi(4)
    }
}

/// Normalized F_loc on `grid`, amplitude ∝ exp(−(r − r_tp)²/(4w²)).
pub fn localized_packet(
    spec: &WavepacketSpec,
    grid: &Arc<RadialGrid>,
) -> Result<SampledFunction<f64>> {
    let (r_tp, w) = (spec.turning_point(), spec.radial_width());
    if !(w > 0.0) {
        return Err(Error::Argument("sigma_E must be positive".into()));
    }
    if r_tp + 6.0 * w > grid.r_max() || r_tp - 6.0 * w < grid.r_min() {
        return Err(Error::Domain(format!(
            "packet at r = {r_tp:.1} ± {:.1} does not fit in [{}, {}]",
            6.0 * w,
            grid.r_min(),
            grid.r_max()
        )));
    }
    let raw = SampledFunction::from_fn(Arc::clone(grid), |r| {
        (-(r - r_tp).powi(2) / (4.0 * w * w)).exp()
    })?;
    let norm = raw.norm();
    SampledFunction::from_fn(Arc::clone(grid), |r| {
        (-(r - r_tp).powi(2) / (4.0 * w * w)).exp() / norm
    })
}

/// Eigenstate expansion of the initial packet.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavepacket {
    pub spec: WavepacketSpec,
    /// c_n, renormalized to Σ c² = 1.
    pub coefficients: Vec<f64>,
    /// Σ c² before renormalization.
    pub captured_norm: f64,
}

/// c_n = Z^{(n)}_{N0}·⟨χ^{(n)}_{N0}|F_loc⟩.
pub fn build_wavepacket(spec: &WavepacketSpec, states: &[Eigenstate]) -> Result<Wavepacket> {
    let first = states
        .first()
        .ok_or_else(|| Error::Argument("no eigenstates".into()))?;
    let c0 = first
        .channels
        .iter()
        .position(|&n| n == spec.n0)
        .ok_or_else(|| Error::Argument(format!("N0 = {} is not a channel", spec.n0)))?;
    let e_center = {
        // energy of the packet centre measured in the N0 channel of the first state
        let threshold = first.energy + 0.5 / first.nu[c0].powi(2);
        threshold - 0.5 / spec.nu_center.powi(2)
    };
    let (e_lo, e_hi) = (first.energy, states[states.len() - 1].energy);
    if e_center - 3.0 * spec.sigma_e < e_lo || e_center + 3.0 * spec.sigma_e > e_hi {
        return Err(Error::Argument(format!(
            "packet centre {e_center:e} ± 3σ_E leaves the eigenstate window [{e_lo:e}, {e_hi:e}]"
        )));
    }
    let packet = localized_packet(spec, first.channel_functions[c0].grid())?;
    let raw: Vec<f64> = states
        .par_iter()
        .map(|s| inner_product(&s.channel_functions[c0], &packet).map(|o| s.z[c0] * o))
        .collect::<Result<_>>()?;
    let captured_norm: f64 = raw.iter().map(|c| c * c).sum();
    if captured_norm < MIN_CAPTURED_NORM {
        return Err(Error::WindowTooNarrow(captured_norm));
    }
    let scale = captured_norm.sqrt();
    Ok(Wavepacket {
        spec: *spec,
        coefficients: raw.iter().map(|c| c / scale).collect(),
        captured_norm,
    })
}

/// Time evolution of a packet expanded over the states of `tables`.
pub struct Dynamics<'a> {
    tables: &'a OverlapTables,
    coefficients: Vec<f64>,
    e_ref: f64,
    blocks: Vec<DMatrix<f64>>,
}

impl<'a> Dynamics<'a> {
    pub fn new(coefficients: &[f64], tables: &'a OverlapTables) -> Result<Self> {
        if coefficients.len() != tables.n_states() {
            return Err(Error::Argument(format!(
                "{} coefficients for {} states",
                coefficients.len(),
                tables.n_states()
            )));
        }
        let nc = tables.n_channels();
        let blocks = (0..nc * nc)
            .map(|i| tables.block(i / nc, i % nc).into_owned())
            .collect();
        let e_ref = tables.energies.iter().sum::<f64>() / tables.energies.len().max(1) as f64;
        Ok(Self {
            tables,
            coefficients: coefficients.to_vec(),
            e_ref,
            blocks,
        })
    }

    /// a_N^n(t) = c_n Z_N^n e^{−iE_n t}, one vector per channel.
    fn amplitudes(&self, t: f64) -> Vec<DVector<Complex64>> {
        let ns = self.tables.n_states();
        let phases: Vec<Complex64> = self
            .tables
            .energies
            .iter()
            .zip(&self.coefficients)
            .map(|(e, c)| Complex64::from_polar(*c, -(e - self.e_ref) * t))
            .collect();
        (0..self.tables.n_channels())
            .map(|a| DVector::from_fn(ns, |n, _| phases[n] * self.tables.z[(n, a)]))
            .collect()
    }

    /// C_{NN′}(t) = ⟨φ_N|φ_{N′}⟩ / Σ_M ⟨φ_M|φ_M⟩ for every channel pair.
    pub fn correlation_matrix(&self, t: f64) -> DMatrix<Complex64> {
        let c = self.raw_correlations(t);
        let tr: f64 = (0..c.nrows()).map(|i| c[(i, i)].re).sum();
        c / Complex64::new(tr, 0.0)
    }

    fn raw_correlations(&self, t: f64) -> DMatrix<Complex64> {
        let nc = self.tables.n_channels();
        let amps = self.amplitudes(t);
        let re: Vec<DVector<f64>> = amps.iter().map(|v| v.map(|z| z.re)).collect();
        let im: Vec<DVector<f64>> = amps.iter().map(|v| v.map(|z| z.im)).collect();
        DMatrix::from_fn(nc, nc, |a, b| {
            let o = &self.blocks[a * nc + b];
            let (ore, oim) = (o * &re[b], o * &im[b]);
            // (x − iy)ᵀ O (u + iv)
            Complex64::new(
                re[a].dot(&ore) + im[a].dot(&oim),
                re[a].dot(&oim) - im[a].dot(&ore),
            )
        })
    }

    /// Single element of [`Self::correlation_matrix`], summed term by term.
    pub fn cross_correlation(&self, t: f64, a: usize, b: usize) -> Complex64 {
        let amps = self.amplitudes(t);
        let nc = self.tables.n_channels();
        let tr: f64 = (0..nc).map(|c| self.pair(&amps, c, c).re).sum();
        self.pair(&amps, a, b) / tr
    }

    fn pair(&self, amps: &[DVector<Complex64>], a: usize, b: usize) -> Complex64 {
        let o = &self.blocks[a * self.tables.n_channels() + b];
        amps[a]
            .iter()
            .enumerate()
            .map(|(n, x)| {
                x.conj()
                    * amps[b]
                        .iter()
                        .enumerate()
                        .map(|(m, y)| y * o[(n, m)])
                        .sum::<Complex64>()
            })
            .sum()
    }

    pub fn purity(&self, t: f64) -> f64 {
        self.correlation_matrix(t)
            .iter()
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// Σ_N ⟨φ_N|φ_N⟩ before normalization, i.e. ⟨ψ(t)|ψ(t)⟩ on the grid.
    pub fn trace(&self, t: f64) -> Complex64 {
        let c = self.raw_correlations(t);
        (0..c.nrows()).map(|i| c[(i, i)]).sum()
    }
}

/// Tr ρ_e²(t).
pub fn purity_at_time(coefficients: &[f64], tables: &OverlapTables, t: f64) -> Result<f64> {
    Ok(Dynamics::new(coefficients, tables)?.purity(t))
}

/// C_{NN′}(t) for channel values `n` and `n_prime`.
pub fn channel_cross_correlations(
    coefficients: &[f64],
    tables: &OverlapTables,
    t: f64,
    n: u32,
    n_prime: u32,
) -> Result<Complex64> {
    let find = |v: u32| {
        tables
            .n_list
            .iter()
            .position(|&x| x == v)
            .ok_or_else(|| Error::Argument(format!("N = {v} is not a channel")))
    };
    let (a, b) = (find(n)?, find(n_prime)?);
    Ok(Dynamics::new(coefficients, tables)?.cross_correlation(t, a, b))
}

/// S₂(t) sampled on times given in units of T_e.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrace {
    pub times: Vec<f64>,
    pub s2: Vec<f64>,
    pub k: f64,
    pub case: Case,
    pub t_e: f64,
}

impl EntropyTrace {
    /// Mean S₂ over samples with lo ≤ t/T_e ≤ hi.
    pub fn mean_between(&self, lo: f64, hi: f64) -> Result<f64> {
        let picked: Vec<f64> = self
            .times
            .iter()
            .zip(&self.s2)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(_, s)| *s)
            .collect();
        if picked.is_empty() {
            return Err(Error::Range(format!("no samples in [{lo}, {hi}]")));
        }
        Ok(picked.iter().sum::<f64>() / picked.len() as f64)
    }

    /// Linear interpolation at t/T_e = `x`.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        let i = self.times.partition_point(|&t| t < x);
        if i == self.times.len() || (i == 0 && self.times[0] > x) {
            return Err(Error::Range(format!("t/T_e = {x} outside the trace")));
        }
        if self.times[i] == x || i == 0 {
            return Ok(self.s2[i]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let f = (x - t0) / (t1 - t0);
        Ok(self.s2[i - 1] * (1.0 - f) + self.s2[i] * f)
    }
}

/// Evaluates S₂ at every time in `times_over_te` (ascending, starting at 0).
pub fn entropy_trace(
    coefficients: &[f64],
    tables: &OverlapTables,
    times_over_te: &[f64],
    t_e: f64,
    k: f64,
    case: Case,
) -> Result<EntropyTrace> {
    if times_over_te.first() != Some(&0.0) || times_over_te.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("trace times must ascend from 0".into()));
    }
    let dynamics = Dynamics::new(coefficients, tables)?;
    let s2 = times_over_te
        .par_iter()
        .map(|x| 1.0 - dynamics.purity(x * t_e))
        .collect();
    Ok(EntropyTrace {
        times: times_over_te.to_vec(),
        s2,
        k,
        case,
        t_e,
    })
}

/// (2m + 1)·T_e/2 for m = 0..=m_max.
pub fn collision_times(t_e: f64, m_max: usize) -> Vec<f64> {
    (0..=m_max)
        .map(|m| (2 * m + 1) as f64 * t_e / 2.0)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// dS₂/dt per unit time (atomic units).
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares slope through the origin of S₂(t_C) against t_C, using the
/// collision times (absolute units) inside the trace before S₂ first reaches 0.3.
pub fn short_time_slope(trace: &EntropyTrace, collision_times: &[f64]) -> Result<SlopeFit> {
    let last = *trace.times.last().unwrap_or(&0.0);
    let mut samples = Vec::new();
    for &tc in collision_times {
        let x = tc / trace.t_e;
        if x > last {
            break;
        }
        let s = trace.value_at(x)?;
        if s >= 0.3 {
            break;
        }
        samples.push((tc, s));
    }
    if samples.len() < 4 {
        return Err(Error::Range(format!(
            "{} pre-saturation collision times in the trace, need 4",
            samples.len()
        )));
    }
    let stt: f64 = samples.iter().map(|(t, _)| t * t).sum();
    let sts: f64 = samples.iter().map(|(t, s)| t * s).sum();
    let slope = sts / stt;
    let mean = samples.iter().map(|(_, s)| s).sum::<f64>() / samples.len() as f64;
    let ss_res: f64 = samples.iter().map(|(t, s)| (s - slope * t).powi(2)).sum();
    let ss_tot: f64 = samples.iter().map(|(_, s)| (s - mean).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        r_squared,
        points: samples.len(),
    })
}

/// Plateau between two collisions and the rise leading into it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    /// max − min of S₂ on the plateau.
    pub range: f64,
    /// Mean on this plateau minus mean on the previous one.
    pub rise: f64,
}

/// Plateaus [(m − 1/2) + guard, (m + 1/2) − guard]·T_e for m = 1..=steps, with
/// plateau 0 being [0, 1/2 − guard].
pub fn plateaus(trace: &EntropyTrace, guard: f64, steps: usize) -> Result<Vec<Plateau>> {
    let window = |lo: f64, hi: f64| -> Result<(f64, f64, f64)> {
        let v: Vec<f64> = trace
            .times
            .iter()
            .zip(&trace.s2)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(_, s)| *s)
            .collect();
        if v.len() < 2 {
            return Err(Error::Range(format!(
                "too few samples on plateau [{lo}, {hi}]"
            )));
        }
        let (min, max) = v
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        Ok((v.iter().sum::<f64>() / v.len() as f64, min, max))
    };
    let mut prev = window(0.0, 0.5 - guard)?.0;
    (1..=steps)
        .map(|m| {
            let (mean, min, max) = window(m as f64 - 0.5 + guard, m as f64 + 0.5 - guard)?;
            let out = Plateau {
                range: max - min,
                rise: mean - prev,
            };
            prev = mean;
            Ok(out)
        })
        .collect()
}

/// (T_e^rev, T_0^rev) = (4π/|d²ε/dν²|, 4π/|d²E⁺/dN²|).
pub fn revival_times(ch: &ChannelSet, nu_center: f64) -> (f64, f64) {
    let t_e_rev = 4.0 * PI * nu_center.powi(4) / 3.0;
    let t_0_rev = 4.0 * PI / ch.params.rotor.second_derivative(ch.params.b).abs();
    (t_e_rev, t_0_rev)
}

/// T_e^rev measured from the spectrum: five-point second difference of the
/// five levels of the `n0` series nearest `nu_center`. Meant for k = 0, where
/// those levels are pure.
pub fn spectral_electron_revival(ch: &ChannelSet, n0: u32, nu_center: f64) -> Result<f64> {
    let c0 = ch
        .index_of(n0)
        .ok_or_else(|| Error::Argument(format!("N0 = {n0} is not a channel")))?;
    let (lo, hi) = window_for_nu(ch, n0, nu_center - 2.5, nu_center + 2.5)?;
    let mut levels = Vec::new();
    for e in find_levels(ch, lo, hi)? {
        let (_, z) = channel_amplitudes(e, ch)?;
        if z[c0].abs() > 0.5 {
            levels.push(e);
        }
    }
    if levels.len() != 5 {
        return Err(Error::Range(format!(
            "{} levels of the N = {n0} series near ν = {nu_center}, need 5",
            levels.len()
        )));
    }
    let d2 =
        (-levels[0] + 16.0 * levels[1] - 30.0 * levels[2] + 16.0 * levels[3] - levels[4]) / 12.0;
    Ok(4.0 * PI / d2.abs())
}
