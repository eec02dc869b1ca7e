//! Core rotational channels, molecular-frame phase shifts and the reaction (K) matrix.
//!
//! Lab-frame channels are labelled by the core rotational quantum number N;
//! body-frame channels by |Λ|, the projection of the electron orbital angular
//! momentum on the internuclear axis. The reaction matrix is diagonal in the
//! body frame, with entries tan δ_Λ, and is carried to the lab frame by the
//! rotational frame transformation.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::numerics::clebsch_gordan;
use crate::{Error, Result};

const ORTHOGONALITY_TOL: f64 = 1e-8;
const POLE_TOL: f64 = 1e-6;

/// Rotational energy of the core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RotorConvention {
    /// Rigid rotor, E = B·N(N+1).
    #[default]
    #[serde(rename = "NN1")]
    NN1,
    /// E = B·N².
    #[serde(rename = "N2")]
    N2,
}

impl RotorConvention {
    pub fn energy(self, b: f64, n: u32) -> f64 {
        let n = n as f64;
        match self {
            RotorConvention::NN1 => b * n * (n + 1.0),
            RotorConvention::N2 => b * n * n,
        }
    }

    /// d²E/dN², which is 2B for both conventions.
    pub fn second_derivative(self, b: f64) -> f64 {
        2.0 * b
    }
}

impl std::str::FromStr for RotorConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NN1" => Ok(Self::NN1),
            "N2" => Ok(Self::N2),
            other => Err(Error::Argument(format!(
                "unknown rotor convention {other:?}"
            ))),
        }
    }
}

/// Core rotational quantum numbers in [J−L, J+L] sharing the parity of `parity_anchor`.
pub fn allowed_n(l: u32, j: u32, parity_anchor: u32) -> Result<Vec<u32>> {
    if j < l {
        return Err(Error::Argument(format!(
            "need J >= L, got J = {j}, L = {l}"
        )));
    }
    if parity_anchor < j - l || parity_anchor > j + l {
        return Err(Error::Argument(format!(
            "parity anchor {parity_anchor} outside [{}, {}]",
            j - l,
            j + l
        )));
    }
    Ok((j - l..=j + l)
        .filter(|n| n % 2 == parity_anchor % 2)
        .collect())
}

/// Body-frame phase shifts δ_Λ = k Λ²/(4L) + δ₀ for |Λ| = 0..=L.
///
/// The quadratic form is the one whose derivative gives the classical deflection
/// Δφ = 2 ∂δ/∂Λ = kΛ/L; `delta0` is a common quantum defect.
pub fn phase_shifts(k: f64, l: u32, delta0: f64) -> Vec<f64> {
    (0..=l)
        .map(|lambda| {
            if lambda == 0 {
                delta0
            } else {
                k * f64::from(lambda * lambda) / (4.0 * f64::from(l)) + delta0
            }
        })
        .collect()
}

/// Body-frame |Λ| values coupled to the parity block containing `n`.
fn block_lambdas(l: u32, j: u32, n: u32) -> Vec<u32> {
    // Λ = 0 only appears in the block with N + L + J even.
    let first = if (n + l + j).is_multiple_of(2) { 0 } else { 1 };
    (first..=l).collect()
}

/// Frame transformation between lab channels `n_list` (rows) and symmetrized
/// body channels (columns, returned alongside as |Λ| values).
///
/// Elements are ⟨N 0; L Λ | J Λ⟩, times √2 for Λ > 0, with each row scaled to
/// unit norm. The resulting block must be orthogonal.
pub fn frame_transformation(l: u32, j: u32, n_list: &[u32]) -> Result<(DMatrix<f64>, Vec<u32>)> {
    let Some(&first) = n_list.first() else {
        return Err(Error::Argument("empty channel list".into()));
    };
    let lambdas = block_lambdas(l, j, first);
    if lambdas.len() != n_list.len() {
        return Err(Error::Argument(format!(
            "{} channels but {} body-frame states in this parity block",
            n_list.len(),
            lambdas.len()
        )));
    }
    let dim = n_list.len();
    let mut u = DMatrix::zeros(dim, dim);
    for (row, &n) in n_list.iter().enumerate() {
        for (col, &lambda) in lambdas.iter().enumerate() {
            let cg = clebsch_gordan(
                n as f64,
                0.0,
                l as f64,
                lambda as f64,
                j as f64,
                lambda as f64,
            )?;
            u[(row, col)] = if lambda > 0 { 2f64.sqrt() * cg } else { cg };
        }
        let norm = u.row(row).norm();
        if norm == 0.0 {
            return Err(Error::FrameConstruction(1.0));
        }
        u.row_mut(row).unscale_mut(norm);
    }
    let deviation = (&u * u.transpose() - DMatrix::identity(dim, dim)).amax();
    if deviation > ORTHOGONALITY_TOL {
        return Err(Error::FrameConstruction(deviation));
    }
    Ok((u, lambdas))
}

/// Distance from δ to the nearest pole of tan, π/2 + nπ.
fn pole_distance(delta: f64) -> f64 {
    let shifted = (delta - FRAC_PI_2).rem_euclid(PI);
    shifted.min(PI - shifted)
}

/// K = U · diag(tan δ) · Uᵀ.
pub fn k_matrix(u: &DMatrix<f64>, deltas: &[f64]) -> Result<DMatrix<f64>> {
    if u.ncols() != deltas.len() {
        return Err(Error::Argument(format!(
            "{} phase shifts for {} body-frame channels",
            deltas.len(),
            u.ncols()
        )));
    }
    for &delta in deltas {
        let distance = pole_distance(delta);
        if distance < POLE_TOL {
            return Err(Error::NearPole { delta, distance });
        }
    }
    let tans = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        deltas.len(),
        deltas.iter().map(|d| d.tan()),
    ));
    let k = u * tans * u.transpose();
    Ok((&k + k.transpose()) * 0.5)
}

/// Inputs that fix a channel set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub l: u32,
    pub j: u32,
    pub parity_anchor: u32,
    /// Rotational constant (hartree).
    pub b: f64,
    pub rotor: RotorConvention,
    pub k: f64,
    pub delta0: f64,
}

/// Immutable description of the coupled channels.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub params: ChannelParams,
    pub n_list: Vec<u32>,
    pub thresholds: Vec<f64>,
    pub lambdas: Vec<u32>,
    pub u: DMatrix<f64>,
    pub delta_lambda: Vec<f64>,
    pub k: DMatrix<f64>,
}

/// Plain-data view of a [`ChannelSet`] for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSetRecord {
    pub l: u32,
    pub j: u32,
    pub b: f64,
    pub k_strength: f64,
    pub rotor_convention: RotorConvention,
    pub n_list: Vec<u32>,
    pub thresholds: Vec<f64>,
    pub lambda: Vec<u32>,
    pub u: Vec<Vec<f64>>,
    pub delta_lambda: Vec<f64>,
    pub k: Vec<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ChannelSet {
    pub fn new(params: ChannelParams) -> Result<Self> {
        let n_list = allowed_n(params.l, params.j, params.parity_anchor)?;
        let (u, lambdas) = frame_transformation(params.l, params.j, &n_list)?;
        let all = phase_shifts(params.k, params.l, params.delta0);
        let delta_lambda: Vec<f64> = lambdas.iter().map(|&lam| all[lam as usize]).collect();
        Self::from_parts(params, n_list, u, lambdas, delta_lambda)
    }

    /// Assembles a channel set from an explicit frame transformation (e.g. with
    /// some columns sign-flipped).
    pub fn from_parts(
        params: ChannelParams,
        n_list: Vec<u32>,
        u: DMatrix<f64>,
        lambdas: Vec<u32>,
        delta_lambda: Vec<f64>,
    ) -> Result<Self> {
        let k = k_matrix(&u, &delta_lambda)?;
        let thresholds = n_list
            .iter()
            .map(|&n| params.rotor.energy(params.b, n))
            .collect();
        Ok(Self {
            params,
            n_list,
            thresholds,
            lambdas,
            u,
            delta_lambda,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.n_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_list.is_empty()
    }

    pub fn index_of(&self, n: u32) -> Option<usize> {
        self.n_list.iter().position(|&m| m == n)
    }

    pub fn record(&self) -> ChannelSetRecord {
        ChannelSetRecord {
            l: self.params.l,
            j: self.params.j,
            b: self.params.b,
            k_strength: self.params.k,
            rotor_convention: self.params.rotor,
            n_list: self.n_list.clone(),
            thresholds: self.thresholds.clone(),
            lambda: self.lambdas.clone(),
            u: rows(&self.u),
            delta_lambda: self.delta_lambda.clone(),
            k: rows(&self.k),
        }
    }
}
