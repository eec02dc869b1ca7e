//! Bound states of the coupled channels and the overlap tables used by the
//! entanglement calculations.
//!
//! Levels are zeros of det M(E), M = diag(sin πν_N) + diag(cos πν_N)·K. Writing
//! M = (2i)⁻¹·D*·(D²S − 1)·(1 − iK) with D = diag(e^{iπν_N}) and S the Cayley
//! transform of K shows that levels are where the unitary D²S has eigenvalue 1.
//! Its eigenphases increase monotonically with E, which gives an exact level count
//! on any interval; the scan subdivides until every interval holds at most one level.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelSet;
use crate::numerics::{bisect, numerov_decaying_solution, RadialGrid, SampledFunction};
use crate::{Error, Result};

/// Roots closer than this fraction of the local spacing are reported as degenerate.
const DEGENERATE_SPACING: f64 = 1e-3;
/// Initial scan step as a fraction of the local spacing.
const SCAN_FRACTION: f64 = 0.1;
const ASYMMETRY_TOL: f64 = 1e-6;

/// ν = (−2(E − threshold))^(−1/2).
pub fn nu_of_energy(energy: f64, threshold: f64) -> Result<f64> {
    let eps = energy - threshold;
    if !(eps < 0.0) {
        return Err(Error::OpenChannel {
            n: -1,
            energy,
            threshold,
        });
    }
    Ok((-2.0 * eps).powf(-0.5))
}

pub fn energy_of_nu(nu: f64, threshold: f64) -> f64 {
    threshold - 0.5 / (nu * nu)
}

/// Effective quantum numbers in every channel.
pub fn channel_nus(energy: f64, ch: &ChannelSet) -> Result<Vec<f64>> {
    ch.n_list
        .iter()
        .zip(&ch.thresholds)
        .map(|(&n, &t)| {
            nu_of_energy(energy, t).map_err(|_| Error::OpenChannel {
                n: n as i64,
                energy,
                threshold: t,
            })
        })
        .collect()
}

/// Density of states Σ ν_N³ (inverse mean level spacing).
pub fn density_of_states(energy: f64, ch: &ChannelSet) -> Result<f64> {
    Ok(channel_nus(energy, ch)?.iter().map(|nu| nu.powi(3)).sum())
}

/// diag(sin πν) + diag(cos πν)·K.
pub fn quantization_matrix(energy: f64, ch: &ChannelSet) -> Result<DMatrix<f64>> {
    let nus = channel_nus(energy, ch)?;
    let mut m = ch.k.clone();
    for (i, nu) in nus.iter().enumerate() {
        let (s, c) = (PI * nu).sin_cos();
        m.row_mut(i).scale_mut(c);
        m[(i, i)] += s;
    }
    Ok(m)
}

pub fn bound_determinant(energy: f64, ch: &ChannelSet) -> Result<f64> {
    Ok(quantization_matrix(energy, ch)?.determinant())
}

/// (Σ ν_N, Σ φ_j) with φ_j ∈ [0, 2π) the eigenphases of D²S.
fn phase_data(energy: f64, ch: &ChannelSet) -> Result<(f64, f64)> {
    let nus = channel_nus(energy, ch)?;
    let n = nus.len();
    let ik = ch.k.map(|v| Complex64::new(0.0, v));
    let id = DMatrix::<Complex64>::identity(n, n);
    let minus = (&id - &ik)
        .try_inverse()
        .ok_or_else(|| Error::Domain("1 - iK is singular".into()))?;
    let cayley = (&id + &ik) * minus;
    // D·S·D is similar to D²S and keeps the matrix symmetric
    let d: Vec<Complex64> = nus
        .iter()
        .map(|nu| Complex64::from_polar(1.0, PI * nu))
        .collect();
    let w = DMatrix::from_fn(n, n, |i, j| d[i] * cayley[(i, j)] * d[j]);
    let eig = w
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Domain("eigenphase decomposition failed".into()))?;
    let phase_sum = eig.iter().map(|z| z.arg().rem_euclid(2.0 * PI)).sum();
    Ok((nus.iter().sum(), phase_sum))
}

/// Exact number of levels in (e_lo, e_hi].
pub fn level_count(ch: &ChannelSet, e_lo: f64, e_hi: f64) -> Result<usize> {
    let a = phase_data(e_lo, ch)?;
    let b = phase_data(e_hi, ch)?;
    count_between(a, b)
}

fn count_between(a: (f64, f64), b: (f64, f64)) -> Result<usize> {
    let raw = (b.0 - a.0) - (b.1 - a.1) / (2.0 * PI);
    let rounded = raw.round();
    if (raw - rounded).abs() > 1e-6 || rounded < 0.0 {
        return Err(Error::Domain(format!(
            "eigenphase level count {raw} is not a whole number"
        )));
    }
    Ok(rounded as usize)
}

#[derive(Clone, Copy)]
struct ScanPoint {
    e: f64,
    det: f64,
    phases: (f64, f64),
}

impl ScanPoint {
    fn at(e: f64, ch: &ChannelSet) -> Result<Self> {
        Ok(Self {
            e,
            det: bound_determinant(e, ch)?,
            phases: phase_data(e, ch)?,
        })
    }
}

fn resolve_interval(
    a: ScanPoint,
    b: ScanPoint,
    ch: &ChannelSet,
    min_width: f64,
    roots: &mut Vec<f64>,
) -> Result<()> {
    let count = count_between(a.phases, b.phases)?;
    if count == 0 {
        return Ok(());
    }
    let sign_change = (a.det < 0.0) != (b.det < 0.0) || b.det == 0.0;
    if count == 1 && sign_change {
        if b.det == 0.0 {
            roots.push(b.e);
        } else {
            roots.push(bisect(
                |e| bound_determinant(e, ch).unwrap_or(f64::NAN),
                a.e,
                b.e,
                a.det,
                0.0,
            ));
        }
        return Ok(());
    }
    if b.e - a.e < min_width {
        if count == 1 {
            // the level sits on an endpoint to within round-off
            roots.push(if a.det.abs() < b.det.abs() { a.e } else { b.e });
            return Ok(());
        }
        let (smallest, next) = smallest_singular_pair(&quantization_matrix(0.5 * (a.e + b.e), ch)?);
        return Err(Error::DegenerateRoot {
            energy: 0.5 * (a.e + b.e),
            smallest,
            next,
        });
    }
    let mut prev = a;
    for i in 1..=4 {
        let next = if i == 4 {
            b
        } else {
            ScanPoint::at(a.e + (b.e - a.e) * i as f64 / 4.0, ch)?
        };
        resolve_interval(prev, next, ch, min_width, roots)?;
        prev = next;
    }
    Ok(())
}

fn smallest_singular_pair(m: &DMatrix<f64>) -> (f64, f64) {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(f64::total_cmp);
    (s[0], s.get(1).copied().unwrap_or(f64::INFINITY))
}

/// All level energies in [e_lo, e_hi), ascending.
pub fn find_levels(ch: &ChannelSet, e_lo: f64, e_hi: f64) -> Result<Vec<f64>> {
    if !(e_hi > e_lo) {
        return Err(Error::Argument(format!(
            "empty energy window [{e_lo}, {e_hi}]"
        )));
    }
    let rho = density_of_states(e_hi, ch)?;
    let steps = (((e_hi - e_lo) * rho / SCAN_FRACTION).ceil() as usize).max(4);
    let mesh: Vec<f64> = (0..=steps)
        .map(|i| {
            if i == steps {
                e_hi
            } else {
                e_lo + (e_hi - e_lo) * i as f64 / steps as f64
            }
        })
        .collect();
    let points: Vec<ScanPoint> = mesh
        .par_iter()
        .map(|&e| ScanPoint::at(e, ch))
        .collect::<Result<_>>()?;
    let min_width = DEGENERATE_SPACING / rho;
    let found: Vec<Vec<f64>> = points
        .par_windows(2)
        .map(|w| {
            let mut roots = Vec::new();
            resolve_interval(w[0], w[1], ch, min_width, &mut roots).map(|_| roots)
        })
        .collect::<Result<_>>()?;
    let mut roots: Vec<f64> = found.into_iter().flatten().filter(|&e| e < e_hi).collect();
    if points[0].det == 0.0 {
        roots.insert(0, e_lo);
    }
    for pair in roots.windows(2) {
        if pair[1] - pair[0] < min_width {
            let (smallest, next) = smallest_singular_pair(&quantization_matrix(pair[0], ch)?);
            return Err(Error::DegenerateRoot {
                energy: pair[0],
                smallest,
                next,
            });
        }
    }
    Ok(roots)
}

/// Bound eigenstate with unit-norm channel functions.
#[derive(Debug, Clone)]
pub struct Eigenstate {
    pub index: usize,
    pub energy: f64,
    /// Core angular momentum of each channel.
    pub channels: Vec<u32>,
    pub nu: Vec<f64>,
    /// Channel amplitudes, Σ Z² = 1, largest |Z| positive.
    pub z: Vec<f64>,
    pub channel_functions: Vec<SampledFunction<f64>>,
}

/// Plain-data view of an eigenstate without its sampled functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenstateRecord {
    pub index: usize,
    pub energy: f64,
    pub channels: Vec<u32>,
    pub nu: Vec<f64>,
    pub z: Vec<f64>,
}

impl Eigenstate {
    pub fn record(&self) -> EigenstateRecord {
        EigenstateRecord {
            index: self.index,
            energy: self.energy,
            channels: self.channels.clone(),
            nu: self.nu.clone(),
            z: self.z.clone(),
        }
    }
}

/// Channel amplitudes at a level: Z_N ∝ ν_N^{3/2}·y_N with y the left null vector of M.
pub fn channel_amplitudes(energy: f64, ch: &ChannelSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let nus = channel_nus(energy, ch)?;
    let m = quantization_matrix(energy, ch)?;
    let eig = (&m * m.transpose()).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let scale = eig.eigenvalues.max().max(1.0).sqrt();
    if let Some(&second) = order.get(1) {
        let smallest = eig.eigenvalues[order[0]].max(0.0).sqrt();
        let next = eig.eigenvalues[second].max(0.0).sqrt();
        if next < 1e-8 * scale {
            return Err(Error::DegenerateRoot {
                energy,
                smallest,
                next,
            });
        }
    }
    let mut y = eig.eigenvectors.column(order[0]).into_owned();
    // one inverse-iteration step on Mᵀ sharpens the null direction
    if let Some(polished) = m.transpose().lu().solve(&y) {
        if polished.iter().all(|v| v.is_finite()) && polished.norm() > 0.0 {
            y = polished.normalize();
        }
    }
    let mut z: Vec<f64> = y
        .iter()
        .zip(&nus)
        .map(|(yi, nu)| yi * nu.powf(1.5))
        .collect();
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lead = z
        .iter()
        .copied()
        .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
    let sign = if lead < 0.0 { -1.0 } else { 1.0 };
    z.iter_mut().for_each(|v| *v *= sign / norm);
    Ok((nus, z))
}

/// Builds the eigenstate at a known level energy.
pub fn eigenstate_at(
    ch: &ChannelSet,
    energy: f64,
    index: usize,
    grid: &Arc<RadialGrid>,
) -> Result<Eigenstate> {
    let (nu, z) = channel_amplitudes(energy, ch)?;
    let channel_functions = nu
        .iter()
        .map(|&v| numerov_decaying_solution(v, ch.params.l, grid))
        .collect::<Result<_>>()?;
    Ok(Eigenstate {
        index,
        energy,
        channels: ch.n_list.clone(),
        nu,
        z,
        channel_functions,
    })
}

/// Every eigenstate with energy in [e_lo, e_hi), sorted by energy.
pub fn find_eigenstates(
    ch: &ChannelSet,
    window: (f64, f64),
    grid: &Arc<RadialGrid>,
) -> Result<Vec<Eigenstate>> {
    let levels = find_levels(ch, window.0, window.1)?;
    if levels.is_empty() {
        return Err(Error::Range(format!(
            "no levels in [{:e}, {:e}]",
            window.0, window.1
        )));
    }
    let nu_max = channel_nus(window.1, ch)?.into_iter().fold(0.0, f64::max);
    let needed = 2.0 * nu_max * nu_max + 10.0 * nu_max;
    if grid.r_max() < needed {
        return Err(Error::Domain(format!(
            "grid ends at {} but nu = {nu_max} needs {needed}",
            grid.r_max()
        )));
    }
    levels
        .par_iter()
        .enumerate()
        .map(|(i, &e)| eigenstate_at(ch, e, i, grid))
        .collect()
}

/// Energy window whose edges sit at ν_{N0} = nu_lo and nu_hi.
pub fn window_for_nu(ch: &ChannelSet, n0: u32, nu_lo: f64, nu_hi: f64) -> Result<(f64, f64)> {
    let i = ch.index_of(n0).ok_or_else(|| {
        Error::Argument(format!(
            "N0 = {n0} is not one of the channels {:?}",
            ch.n_list
        ))
    })?;
    let t = ch.thresholds[i];
    let window = (energy_of_nu(nu_lo, t), energy_of_nu(nu_hi, t));
    // every channel must stay closed
    channel_nus(window.1, ch)?;
    Ok(window)
}

/// All channel-function overlaps between a list of eigenstates.
///
/// Row/column p = c·n_states + n of `gram` is the channel function of state n in channel c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapTables {
    pub n_list: Vec<u32>,
    pub energies: Vec<f64>,
    /// n_states × n_channels.
    pub z: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    pub max_asymmetry: f64,
}

impl OverlapTables {
    pub fn n_states(&self) -> usize {
        self.energies.len()
    }

    pub fn n_channels(&self) -> usize {
        self.n_list.len()
    }

    /// O^{(a,b)}: n_states × n_states block between channel indices a and b.
    pub fn block(&self, a: usize, b: usize) -> DMatrixView<'_, f64> {
        let ns = self.n_states();
        self.gram.view((a * ns, b * ns), (ns, ns))
    }

    pub fn overlap(&self, a: usize, n: usize, b: usize, m: usize) -> f64 {
        let ns = self.n_states();
        self.gram[(a * ns + n, b * ns + m)]
    }

    /// ⟨ψ_n|ψ_m⟩ = Σ_N Z_N^n Z_N^m O^{(N,N)}_{nm}.
    pub fn state_gram(&self) -> DMatrix<f64> {
        let ns = self.n_states();
        DMatrix::from_fn(ns, ns, |n, m| {
            (0..self.n_channels())
                .map(|c| self.z[(n, c)] * self.z[(m, c)] * self.overlap(c, n, c, m))
                .sum()
        })
    }
}

/// Quadrature of every pairwise overlap, symmetrized.
pub fn build_overlap_tables(states: &[Eigenstate]) -> Result<OverlapTables> {
    let first = states
        .first()
        .ok_or_else(|| Error::Argument("no eigenstates".into()))?;
    let grid = Arc::clone(first.channel_functions[0].grid());
    let nc = first.nu.len();
    let ns = states.len();
    for s in states {
        if s.channels != first.channels || s.channel_functions.iter().any(|f| **f.grid() != *grid) {
            return Err(Error::Argument(
                "eigenstates do not share one grid and channel list".into(),
            ));
        }
    }
    let sqrt_w: Vec<f64> = grid.weights().iter().map(|w| w.max(0.0).sqrt()).collect();
    let mut samples = DMatrix::<f64>::zeros(grid.len(), nc * ns);
    for c in 0..nc {
        for (n, s) in states.iter().enumerate() {
            let col = samples.column_mut(c * ns + n);
            for ((dst, v), w) in col
                .into_iter()
                .zip(s.channel_functions[c].values())
                .zip(&sqrt_w)
            {
                *dst = v * w;
            }
        }
    }
    let raw = samples.tr_mul(&samples);
    let max_asymmetry = (&raw - raw.transpose()).amax();
    if max_asymmetry > ASYMMETRY_TOL {
        return Err(Error::QuadratureQuality(max_asymmetry));
    }
    let gram = (&raw + raw.transpose()) * 0.5;
    let z = DMatrix::from_fn(ns, nc, |n, c| states[n].z[c]);
    Ok(OverlapTables {
        n_list: first.channels.clone(),
        energies: states.iter().map(|s| s.energy).collect(),
        z,
        gram,
        max_asymmetry,
    })
}
