//! Classical kicked angular-momentum map.
//!
//! Between collisions the electron angular momentum L is fixed in the lab frame
//! while the core axis precesses about N = J − L. At each return to the core the
//! electron is deflected: L rotates about the core axis by Δφ = k cos θ, where
//! cos θ is the projection of L̂ on the axis. Surfaces of section record the
//! direction of L in the molecular frame (OZ along the axis, OX along N) after
//! every kick.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::rotate_about_axis;
use crate::{Error, Result};

const FRAME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalParams {
    /// |L| in units of ħ.
    pub l_mag: f64,
    /// Conserved total angular momentum.
    pub j_vec: Vector3<f64>,
    /// Rotational constant (hartree); core energy B·N².
    pub b: f64,
    /// Kick strength.
    pub k: f64,
    /// Total energy (hartree).
    pub e_total: f64,
}

impl ClassicalParams {
    /// Parameters with J along z, B tuned so that T_e/T_rot = `ratio` at N = `n_ref`,
    /// and the total energy placing the electron at ν = `nu_ref` there.
    pub fn tuned(
        l_mag: f64,
        j_mag: f64,
        nu_ref: f64,
        n_ref: f64,
        ratio: f64,
        k: f64,
    ) -> Result<Self> {
        let b = tune_rotational_constant(nu_ref, n_ref, ratio)?;
        let p = Self {
            l_mag,
            j_vec: Vector3::new(0.0, 0.0, j_mag),
            b,
            k,
            e_total: b * n_ref * n_ref - 0.5 / (nu_ref * nu_ref),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.j_vec.norm();
        if !(self.l_mag > 0.0) || !(j > self.l_mag) {
            return Err(Error::Argument(format!(
                "need 0 < |L| < |J|, got |L| = {}, |J| = {j}",
                self.l_mag
            )));
        }
        let n_max = j + self.l_mag;
        let n_min = j - self.l_mag;
        let eps_max = self.e_total - self.b * n_min * n_min;
        if self.b < 0.0 || eps_max >= 0.0 {
            return Err(Error::Argument(format!(
                "electron energy {eps_max:e} at N = {n_min} is not bound (N range up to {n_max})"
            )));
        }
        Ok(())
    }

    /// Electron energy when the core has angular momentum `n`.
    pub fn electron_energy(&self, n: f64) -> f64 {
        self.e_total - self.b * n * n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalState {
    pub l_vec: Vector3<f64>,
    /// Unit vector along the internuclear axis.
    pub axis: Vector3<f64>,
    pub kick_count: usize,
}

impl ClassicalState {
    /// Checks |L| = L and axis ⊥ (J − L).
    pub fn new(l_vec: Vector3<f64>, axis: Vector3<f64>, p: &ClassicalParams) -> Result<Self> {
        if (l_vec.norm() - p.l_mag).abs() > FRAME_TOL {
            return Err(Error::Argument(format!(
                "|L| = {} differs from {}",
                l_vec.norm(),
                p.l_mag
            )));
        }
        if (axis.norm() - 1.0).abs() > FRAME_TOL {
            return Err(Error::Argument("core axis must be a unit vector".into()));
        }
        let n = p.j_vec - l_vec;
        if axis.dot(&n).abs() > FRAME_TOL * n.norm().max(1.0) {
            return Err(Error::Argument(
                "core axis must be perpendicular to N = J - L".into(),
            ));
        }
        Ok(Self {
            l_vec,
            axis,
            kick_count: 0,
        })
    }

    /// State whose L points along (θ, φ) in the molecular frame. The lab
    /// orientation is fixed by rotating the molecular-frame J onto `p.j_vec`.
    pub fn from_molecular_angles(cos_theta: f64, phi: f64, p: &ClassicalParams) -> Result<Self> {
        let (l, j) = (p.l_mag, p.j_vec.norm());
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        let l_mol = Vector3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta) * l;
        // |L + N x̂| = |J| fixes N > 0
        let lx = l_mol.x;
        let n = -lx + (j * j - l * l + lx * lx).sqrt();
        let j_mol = l_mol + Vector3::x() * n;
        let rot = Rotation3::rotation_between(&j_mol, &p.j_vec).unwrap_or_else(|| {
            let perp = Unit::new_normalize(j_mol.cross(&Vector3::x()) + j_mol.cross(&Vector3::y()));
            Rotation3::from_axis_angle(&perp, PI)
        });
        let axis = (rot * Vector3::z()).normalize();
        let l_lab = (rot * l_mol).normalize() * l;
        Self::new(l_lab, axis, p)
    }

    pub fn n_vec(&self, p: &ClassicalParams) -> Vector3<f64> {
        p.j_vec - self.l_vec
    }

    /// Λ = L · axis.
    pub fn lambda(&self) -> f64 {
        self.l_vec.dot(&self.axis)
    }
}

/// One point of a surface of section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SosPoint {
    pub trajectory_id: usize,
    pub kick_index: usize,
    /// Azimuth of L in the molecular frame, in [−π, π).
    pub phi: f64,
    pub cos_theta: f64,
    pub escaped: bool,
}

/// Kepler period 2πν³ of an electron with energy `eps` < 0.
pub fn electron_period(eps: f64) -> Result<f64> {
    if !(eps < 0.0) {
        return Err(Error::Domain(format!(
            "electron energy {eps:e} is not bound"
        )));
    }
    let nu = (-2.0 * eps).powf(-0.5);
    Ok(2.0 * PI * nu.powi(3))
}

/// Free precession of the core axis about N for one electron period.
pub fn free_flight(state: &ClassicalState, p: &ClassicalParams) -> Result<ClassicalState> {
    let n_vec = state.n_vec(p);
    let n = n_vec.norm();
    let eps = p.electron_energy(n);
    if eps >= 0.0 {
        return Err(Error::Escape {
            kicks: state.kick_count,
            eps,
        });
    }
    let period = electron_period(eps)?;
    let omega = 2.0 * p.b * n;
    let axis = rotate_about_axis(&state.axis, &(n_vec / n), omega * period)?;
    Ok(ClassicalState {
        axis: axis.normalize(),
        ..*state
    })
}

/// Impulsive rotation of L about the core axis by k·cos θ.
pub fn kick(state: &ClassicalState, p: &ClassicalParams) -> ClassicalState {
    let cos_theta = state.lambda() / p.l_mag;
    let l_vec = rotate_about_axis(&state.l_vec, &state.axis, p.k * cos_theta)
        .expect("state invariant: unit axis");
    ClassicalState {
        l_vec,
        axis: state.axis,
        kick_count: state.kick_count + 1,
    }
}

/// Molecular-frame orthonormal basis (OX along N, OY = OZ × OX, OZ along the axis).
pub fn molecular_frame(state: &ClassicalState, p: &ClassicalParams) -> Result<[Vector3<f64>; 3]> {
    let n_vec = state.n_vec(p);
    let n = n_vec.norm();
    if n < FRAME_TOL {
        return Err(Error::DegenerateFrame(n));
    }
    let oz = state.axis;
    let ox = n_vec / n;
    Ok([ox, oz.cross(&ox), oz])
}

/// Direction of L in the molecular frame.
pub fn sos_point(
    state: &ClassicalState,
    p: &ClassicalParams,
    trajectory_id: usize,
) -> Result<SosPoint> {
    let [ox, oy, oz] = molecular_frame(state, p)?;
    let (x, y, z) = (
        state.l_vec.dot(&ox),
        state.l_vec.dot(&oy),
        state.l_vec.dot(&oz),
    );
    let mut phi = if x.hypot(y) < FRAME_TOL * p.l_mag {
        0.0
    } else {
        y.atan2(x)
    };
    if phi >= PI {
        phi -= 2.0 * PI;
    }
    Ok(SosPoint {
        trajectory_id,
        kick_index: state.kick_count,
        phi,
        cos_theta: (z / p.l_mag).clamp(-1.0, 1.0),
        escaped: false,
    })
}

/// Points of one trajectory; `escaped` is set when the electron ionized before
/// the requested number of kicks.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    pub points: Vec<SosPoint>,
    pub final_state: ClassicalState,
    pub escaped: bool,
}

impl Trajectory {
    /// Converts an escaped trajectory into the escape error.
    pub fn into_result(self, p: &ClassicalParams) -> Result<Self> {
        if self.escaped {
            let eps = p.electron_energy(self.final_state.n_vec(p).norm());
            return Err(Error::Escape {
                kicks: self.final_state.kick_count,
                eps,
            });
        }
        Ok(self)
    }
}

/// Alternates free flight and kick `n_kicks` times, recording a section point after each kick.
pub fn run_trajectory(
    init: &ClassicalState,
    p: &ClassicalParams,
    n_kicks: usize,
    id: usize,
) -> Result<Trajectory> {
    if n_kicks == 0 {
        return Err(Error::Argument("n_kicks must be at least 1".into()));
    }
    let mut state = *init;
    let mut points = Vec::with_capacity(n_kicks);
    for _ in 0..n_kicks {
        state = match free_flight(&state, p) {
            Ok(s) => s,
            Err(Error::Escape { .. }) => {
                points
                    .iter_mut()
                    .for_each(|pt: &mut SosPoint| pt.escaped = true);
                return Ok(Trajectory {
                    id,
                    points,
                    final_state: state,
                    escaped: true,
                });
            }
            Err(e) => return Err(e),
        };
        state = kick(&state, p);
        points.push(sos_point(&state, p, id)?);
    }
    Ok(Trajectory {
        id,
        points,
        final_state: state,
        escaped: false,
    })
}

/// Independent random stream for one trajectory.
fn trajectory_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

/// Random initial condition: L uniform on the sphere, axis at a uniform azimuth about N.
pub fn random_initial_state(p: &ClassicalParams, seed: u64, id: usize) -> Result<ClassicalState> {
    let mut rng = trajectory_rng(seed, id);
    loop {
        let cos_t: f64 = rng.gen_range(-1.0..1.0);
        let az: f64 = rng.gen_range(-PI..PI);
        let sin_t = (1.0 - cos_t * cos_t).sqrt();
        let l_vec = Vector3::new(sin_t * az.cos(), sin_t * az.sin(), cos_t) * p.l_mag;
        let n_hat = (p.j_vec - l_vec).normalize();
        // any vector not parallel to N̂ seeds the perpendicular basis
        let seed_vec = if n_hat.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let e1 = (seed_vec - n_hat * n_hat.dot(&seed_vec)).normalize();
        let e2 = n_hat.cross(&e1);
        let alpha: f64 = rng.gen_range(-PI..PI);
        let axis = (e1 * alpha.cos() + e2 * alpha.sin()).normalize();
        let state = ClassicalState::new(l_vec, axis, p)?;
        if p.electron_energy(state.n_vec(p).norm()) < 0.0 {
            return Ok(state);
        }
    }
}

/// Surface-of-section point cloud for an ensemble of trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct SosDataset {
    /// Sorted by (trajectory_id, kick_index).
    pub points: Vec<SosPoint>,
    pub escaped: Vec<usize>,
}

/// Runs `ensemble` seeded trajectories (in parallel) of `n_kicks` kicks each.
pub fn generate_sos(
    p: &ClassicalParams,
    ensemble: usize,
    n_kicks: usize,
    seed: u64,
) -> Result<SosDataset> {
    if ensemble == 0 {
        return Err(Error::Argument(
            "ensemble must contain at least one trajectory".into(),
        ));
    }
    p.validate()?;
    let trajectories: Vec<Trajectory> = (0..ensemble)
        .into_par_iter()
        .map(|id| {
            let init = random_initial_state(p, seed, id)?;
            run_trajectory(&init, p, n_kicks, id)
        })
        .collect::<Result<_>>()?;
    let escaped = trajectories
        .iter()
        .filter(|t| t.escaped)
        .map(|t| t.id)
        .collect();
    let points = trajectories.into_iter().flat_map(|t| t.points).collect();
    Ok(SosDataset { points, escaped })
}

/// T_e(ε)/T_rot with T_rot = 2π/(2BN) at the state's current N.
pub fn resonance_ratio(state: &ClassicalState, p: &ClassicalParams) -> Result<f64> {
    let n = state.n_vec(p).norm();
    let eps = p.electron_energy(n);
    if eps >= 0.0 {
        return Err(Error::Escape {
            kicks: state.kick_count,
            eps,
        });
    }
    let t_rot = 2.0 * PI / (2.0 * p.b * n);
    Ok(electron_period(eps)? / t_rot)
}

/// B such that T_e(ν_ref)/T_rot(N_ref) equals `ratio`.
pub fn tune_rotational_constant(nu_ref: f64, n_ref: f64, ratio: f64) -> Result<f64> {
    if !(nu_ref > 0.0 && n_ref > 0.0 && ratio > 0.0) {
        return Err(Error::Argument(
            "nu_ref, N_ref and ratio must be positive".into(),
        ));
    }
    Ok(ratio / (2.0 * n_ref * nu_ref.powi(3)))
}

/// Occupancy of a `bins`×`bins` histogram over φ ∈ [−π, π), cos θ ∈ [−1, 1].
pub fn occupied_cells<'a>(
    points: impl IntoIterator<Item = &'a SosPoint>,
    bins: usize,
) -> Vec<bool> {
    let mut cells = vec![false; bins * bins];
    for pt in points {
        let i = (((pt.phi + PI) / (2.0 * PI)) * bins as f64).floor() as usize;
        let j = (((pt.cos_theta + 1.0) / 2.0) * bins as f64).floor() as usize;
        cells[i.min(bins - 1) * bins + j.min(bins - 1)] = true;
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, UnitQuaternion};

    fn generic(k: f64) -> ClassicalParams {
        ClassicalParams::tuned(2.0, 10.0, 25.0, 10.0, 2.75, k).unwrap()
    }

    fn resonant(k: f64) -> ClassicalParams {
        ClassicalParams::tuned(2.0, 10.0, 25.0, 10.0, 1.0, k).unwrap()
    }

    fn some_state(p: &ClassicalParams) -> ClassicalState {
        ClassicalState::from_molecular_angles(0.37, 1.1, p).unwrap()
    }

    /// Inverse of kick ∘ free_flight.
    fn step_back(state: &ClassicalState, p: &ClassicalParams) -> ClassicalState {
        let cos_theta = state.lambda() / p.l_mag;
        let l_vec = rotate_about_axis(&state.l_vec, &state.axis, -p.k * cos_theta).unwrap();
        let n_vec = p.j_vec - l_vec;
        let n = n_vec.norm();
        let t = electron_period(p.electron_energy(n)).unwrap();
        let axis = rotate_about_axis(&state.axis, &(n_vec / n), -2.0 * p.b * n * t).unwrap();
        ClassicalState {
            l_vec,
            axis,
            kick_count: state.kick_count - 1,
        }
    }

    #[test]
    fn kepler_periods() {
        assert!((electron_period(-0.5).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!((electron_period(-1.0 / 200.0).unwrap() - 2000.0 * PI).abs() < 1e-9);
        assert!(electron_period(0.0).is_err());
    }

    /// Period of an eccentric planar Kepler orbit with the same energy,
    /// integrated with RK4 and timed by its return to the starting azimuth.
    #[test]
    fn kepler_period_matches_orbit_integration() {
        let eps = -0.000247;
        let a = -0.5 / eps;
        let e: f64 = 0.5;
        let r_p = a * (1.0 - e);
        let v_p = ((1.0 + e) / r_p).sqrt();
        let rhs = |y: [f64; 4]| -> [f64; 4] {
            let r3 = (y[0] * y[0] + y[1] * y[1]).powf(1.5);
            [y[2], y[3], -y[0] / r3, -y[1] / r3]
        };
        let mut y = [r_p, 0.0, 0.0, v_p];
        let dt = 5.0;
        let mut t = 0.0;
        let mut left_axis = false;
        let period = loop {
            let add = |a: [f64; 4], b: [f64; 4], s: f64| {
                std::array::from_fn::<f64, 4, _>(|i| a[i] + s * b[i])
            };
            let k1 = rhs(y);
            let k2 = rhs(add(y, k1, dt / 2.0));
            let k3 = rhs(add(y, k2, dt / 2.0));
            let k4 = rhs(add(y, k3, dt));
            let next: [f64; 4] = std::array::from_fn(|i| {
                y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            });
            if next[1] < 0.0 {
                left_axis = true;
            }
            if left_axis && y[1] < 0.0 && next[1] >= 0.0 && next[0] > 0.0 {
                break t + dt * (-y[1]) / (next[1] - y[1]);
            }
            y = next;
            t += dt;
        };
        let want = electron_period(eps).unwrap();
        assert!(((period - want) / want).abs() < 1e-6, "{period} vs {want}");
    }

    #[test]
    fn full_turn_returns_axis() {
        let p = generic(0.0);
        let s = some_state(&p);
        let n = s.n_vec(&p).norm();
        // choose B so that ω T_e = 2π exactly at this N, keeping ε fixed
        let eps = p.electron_energy(n);
        let t = electron_period(eps).unwrap();
        let b = 2.0 * PI / (2.0 * n * t);
        let q = ClassicalParams {
            b,
            e_total: eps + b * n * n,
            ..p
        };
        let out = free_flight(&s, &q).unwrap();
        assert!((out.axis - s.axis).norm() < 1e-9);
    }

    #[test]
    fn free_flight_keeps_axis_perpendicular() {
        let p = generic(0.5);
        let s = some_state(&p);
        let out = free_flight(&s, &p).unwrap();
        assert!((out.axis.norm() - 1.0).abs() < 1e-12);
        assert!(out.axis.dot(&out.n_vec(&p)).abs() < 1e-12);
        assert_eq!(out.l_vec, s.l_vec);
    }

    #[test]
    fn free_flight_matches_quaternion_oracle() {
        let p = generic(0.5);
        let s = some_state(&p);
        let n_vec = s.n_vec(&p);
        let n = n_vec.norm();
        let angle = 2.0 * p.b * n * electron_period(p.electron_energy(n)).unwrap();
        let q = UnitQuaternion::from_axis_angle(&Unit::new_normalize(n_vec), angle);
        let out = free_flight(&s, &p).unwrap();
        assert!((out.axis - q * s.axis).norm() < 1e-10);
    }

    #[test]
    fn kick_special_cases() {
        let p = generic(0.5);
        let along = ClassicalState::from_molecular_angles(1.0, 0.0, &p).unwrap();
        let kicked = kick(&along, &p);
        assert!((kicked.l_vec - along.l_vec).norm() < 1e-12);
        assert_eq!(kicked.kick_count, 1);

        let perp = ClassicalState::from_molecular_angles(0.0, 0.4, &p).unwrap();
        let kicked = kick(&perp, &p);
        assert!((kicked.l_vec - perp.l_vec).norm() < 1e-12);
    }

    #[test]
    fn kick_matches_matrix_oracle() {
        let p = generic(0.5);
        let s = some_state(&p);
        let a = s.axis;
        let angle = 0.5 * s.lambda() / p.l_mag;
        let k = Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0);
        let r = Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos());
        let out = kick(&s, &p);
        assert!((out.l_vec - r * s.l_vec).norm() < 1e-12);
        assert!((out.lambda() - s.lambda()).abs() < 1e-12);
    }

    #[test]
    fn section_point_cases() {
        let p = generic(0.5);
        let s = ClassicalState::from_molecular_angles(1.0, 0.0, &p).unwrap();
        let pt = sos_point(&s, &p, 0).unwrap();
        assert!((pt.cos_theta - 1.0).abs() < 1e-12);
        assert_eq!(pt.phi, 0.0);

        let s = ClassicalState::from_molecular_angles(0.0, 0.0, &p).unwrap();
        let pt = sos_point(&s, &p, 0).unwrap();
        assert!(pt.cos_theta.abs() < 1e-12 && pt.phi.abs() < 1e-12);

        // explicit change of basis: rows of the frame matrix are OX, OY, OZ
        let s = some_state(&p);
        let n_hat = s.n_vec(&p).normalize();
        let frame = Matrix3::from_rows(&[
            n_hat.transpose(),
            s.axis.cross(&n_hat).transpose(),
            s.axis.transpose(),
        ]);
        let mol = frame * s.l_vec / p.l_mag;
        let pt = sos_point(&s, &p, 3).unwrap();
        assert!((pt.cos_theta - mol.z).abs() < 1e-12);
        assert!((pt.phi - mol.y.atan2(mol.x)).abs() < 1e-12);
        assert!((pt.cos_theta - 0.37).abs() < 1e-12 && (pt.phi - 1.1).abs() < 1e-12);
        assert_eq!(pt.trajectory_id, 3);
    }

    #[test]
    fn degenerate_frame_rejected() {
        let p = ClassicalParams {
            l_mag: 2.0,
            j_vec: Vector3::new(0.0, 0.0, 2.0 + 1e-12),
            ..generic(0.0)
        };
        let s = ClassicalState {
            l_vec: Vector3::new(0.0, 0.0, 2.0),
            axis: Vector3::x(),
            kick_count: 0,
        };
        assert!(matches!(
            sos_point(&s, &p, 0),
            Err(Error::DegenerateFrame(_))
        ));
    }

    #[test]
    fn zero_coupling_draws_circles() {
        let p = generic(0.0);
        for id in 0..10 {
            let s = random_initial_state(&p, 11, id).unwrap();
            let n0 = s.n_vec(&p);
            let t = run_trajectory(&s, &p, 500, id).unwrap();
            let cx: Vec<f64> = t
                .points
                .iter()
                .map(|pt| {
                    let st = pt.cos_theta;
                    (1.0 - st * st).max(0.0).sqrt() * pt.phi.cos()
                })
                .collect();
            let (lo, hi) = cx
                .iter()
                .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            assert!(hi - lo < 1e-9, "spread {}", hi - lo);
            assert!((t.final_state.n_vec(&p).norm() - n0.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_kicks_rejected() {
        let p = generic(0.5);
        assert!(run_trajectory(&some_state(&p), &p, 0, 0).is_err());
    }

    #[test]
    fn conservation_over_many_iterations() {
        for p in [generic(0.5), resonant(10.0)] {
            let mut s = some_state(&p);
            for _ in 0..10_000 {
                s = free_flight(&s, &p).unwrap();
                let before = s.lambda();
                s = kick(&s, &p);
                assert!((s.lambda() - before).abs() < 1e-12);
            }
            assert!((s.l_vec.norm() - p.l_mag).abs() < 1e-9);
            assert!((s.axis.norm() - 1.0).abs() < 1e-9);
            assert!(s.axis.dot(&s.n_vec(&p)).abs() < 1e-9);
        }
    }

    #[test]
    fn map_is_time_reversible() {
        let p = generic(0.5);
        let start = some_state(&p);
        let mut s = start;
        for _ in 0..10 {
            s = kick(&free_flight(&s, &p).unwrap(), &p);
        }
        for _ in 0..10 {
            s = step_back(&s, &p);
        }
        let err = (s.l_vec - start.l_vec).norm() + (s.axis - start.axis).norm();
        assert!(err < 1e-10, "{err:e}");
    }

    #[test]
    fn resonance_island_confines_polar_orbits() {
        let p = resonant(0.25);
        for phi in [0.0, 1.0, 2.5, -2.0] {
            let s = ClassicalState::from_molecular_angles(0.2f64.cos(), phi, &p).unwrap();
            let t = run_trajectory(&s, &p, 5000, 0).unwrap();
            let worst = t
                .points
                .iter()
                .map(|pt| pt.cos_theta.acos())
                .fold(0.0, f64::max);
            assert!(worst < 0.5, "max polar angle {worst}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let p = generic(0.5);
        let a = generate_sos(&p, 8, 50, 42).unwrap();
        let b = generate_sos(&p, 8, 50, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_sos(&p, 8, 50, 43).unwrap();
        assert_ne!(a, c);
        assert!(
            a.points
                .windows(2)
                .all(|w| (w[0].trajectory_id, w[0].kick_index)
                    < (w[1].trajectory_id, w[1].kick_index))
        );
        assert!(a
            .points
            .iter()
            .all(|pt| (-PI..PI).contains(&pt.phi) && pt.cos_theta.abs() <= 1.0));
    }

    #[test]
    fn strong_kicks_fill_the_sphere() {
        let p = generic(10.0);
        let init = random_initial_state(&p, 5, 0).unwrap();
        let t = run_trajectory(&init, &p, 20_000, 0).unwrap();
        let cells = occupied_cells(&t.points, 50);
        let fraction = cells.iter().filter(|&&c| c).count() as f64 / cells.len() as f64;
        assert!(fraction > 0.9, "coverage {fraction}");
    }

    /// Length of the shortest arc of the circle containing every angle.
    fn covering_arc(angles: &[f64]) -> f64 {
        let mut v = angles.to_vec();
        v.sort_by(f64::total_cmp);
        let wrap = v[0] + 2.0 * PI - v[v.len() - 1];
        let gap = v.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max);
        2.0 * PI - gap
    }

    /// Trajectories whose mean ratio sits at 2 or 4 lie on island chains and
    /// stay inside a φ-band narrower than half the circle.
    #[test]
    fn low_order_resonances_form_islands() {
        let p = generic(0.25);
        let mut tally = [(0usize, 0usize); 2];
        for id in 0..400 {
            let mut s = random_initial_state(&p, 3, id).unwrap();
            let mut ratio_sum = 0.0;
            let mut phis = Vec::new();
            for _ in 0..400 {
                s = kick(&free_flight(&s, &p).unwrap(), &p);
                ratio_sum += resonance_ratio(&s, &p).unwrap();
                phis.push(sos_point(&s, &p, id).unwrap().phi);
            }
            let mean = ratio_sum / 400.0;
            for (slot, target) in [2.0, 4.0].iter().enumerate() {
                if (mean - target).abs() < 0.05 {
                    tally[slot].0 += 1;
                    if covering_arc(&phis) < PI {
                        tally[slot].1 += 1;
                    }
                }
            }
        }
        for (total, banded) in tally {
            assert!(total >= 5, "{tally:?}");
            assert!(banded as f64 >= 0.7 * total as f64, "{tally:?}");
        }
    }

    #[test]
    fn ratio_properties() {
        let b = tune_rotational_constant(45.0, 10.0, 1.0).unwrap();
        assert!((b - 1.0 / (2.0 * 10.0 * 45f64.powi(3))).abs() < 1e-20);
        assert!((b - 5.4870e-7).abs() < 1e-11);

        let p = resonant(0.0);
        // state with N = N_ref exactly: L ⟂ J
        let s = ClassicalState::from_molecular_angles(
            0.0,
            PI / 2.0,
            &ClassicalParams {
                j_vec: Vector3::new(0.0, 0.0, (100.0f64 + 4.0).sqrt()),
                ..p
            },
        )
        .unwrap();
        let q = ClassicalParams {
            j_vec: Vector3::new(0.0, 0.0, 104f64.sqrt()),
            ..p
        };
        assert!((s.n_vec(&q).norm() - 10.0).abs() < 1e-12);
        assert!((resonance_ratio(&s, &q).unwrap() - 1.0).abs() < 1e-12);

        let doubled = ClassicalParams {
            b: 2.0 * q.b,
            e_total: q.e_total + q.b * 100.0,
            ..q
        };
        assert!((resonance_ratio(&s, &doubled).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn generic_ratio_spans_two_and_four() {
        let p = generic(0.0);
        let ratio_at = |n: f64| {
            let eps = p.electron_energy(n);
            let nu = (-2.0 * eps).powf(-0.5);
            2.0 * p.b * n * nu.powi(3)
        };
        let profile: Vec<f64> = (0..=40).map(|i| ratio_at(8.0 + 0.1 * i as f64)).collect();
        assert!(
            profile.windows(2).all(|w| w[1] < w[0]),
            "monotone decreasing"
        );
        let (lo, hi) = (profile[40], profile[0]);
        assert!(lo < 2.0 && hi > 4.0, "span [{lo}, {hi}]");
    }
}
