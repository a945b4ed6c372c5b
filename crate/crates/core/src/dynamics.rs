//! Closed contractible orbits and their omega-energy, the PSL(2,R) orbit
//! classification, Lyapunov exponents, the entropy threshold and
//! displacement probes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{variational_step, Trajectory};
use crate::lie::{euler_field_of, Family};
use crate::par;
use crate::systems::{closed_form_flow, MagneticSystem, OneForm, OneFormId, PhaseState, SystemForm};

use std::f64::consts::PI;

/// Default cap on the multiplicity of reported orbits.
pub const DEFAULT_L_MAX: u32 = 5;

/// A family of closed contractible orbits at energy `k`, one record per
/// multiplicity `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedOrbitRecord {
    pub system: Family,
    pub k: f64,
    /// Conserved momentum (`p_gamma` or `C`; zero for tori).
    #[serde(rename = "C")]
    pub c: f64,
    /// Radius of the momentum circle.
    #[serde(rename = "A")]
    pub a: f64,
    /// Angular frequency of the momentum rotation.
    pub mu: f64,
    /// Period of this member (`l` times the primitive period).
    #[serde(rename = "T")]
    pub period: f64,
    pub l: u32,
    pub omega: f64,
    /// Omega-energy by quadrature of `psi` along the sampled orbit.
    pub omega_quadrature: f64,
    /// Distance between the start point and the flowed endpoint in the chart.
    pub return_error: f64,
    pub contractible: bool,
    /// `[m, l]` with the loop in the class `m[d] - l[R]` (PSL(2,R) only).
    pub homotopy: Option<[i64; 2]>,
    #[serde(skip)]
    pub start: Option<PhaseState>,
}

/// Closed contractible orbits at energy `k` with multiplicity up to
/// [`DEFAULT_L_MAX`].
pub fn contractible_orbits(system: &MagneticSystem, k: f64) -> Result<Vec<ClosedOrbitRecord>> {
    contractible_orbits_up_to(system, k, DEFAULT_L_MAX)
}

pub fn contractible_orbits_up_to(system: &MagneticSystem, k: f64, l_max: u32) -> Result<Vec<ClosedOrbitRecord>> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::PreconditionFailed(format!("energy must be positive, got {k}")));
    }
    let family = system.family();
    let primitive: Vec<(PhaseState, f64, f64, f64, f64, Option<[i64; 2]>)> = match family {
        Family::Heisenberg if system.has_identity_metric() => {
            // closing condition p_c^2 + 2 p_c + 2k = 0; p_c = -1 is the
            // degenerate straight-line case
            if k >= 0.5 {
                vec![]
            } else {
                let c = (1.0 - 2.0 * k).sqrt() - 1.0;
                let a = (2.0 * k - c * c).max(0.0).sqrt();
                let mu = 1.0 + c;
                let start = PhaseState::from_slices(&[0.0; 3], &[a, 0.0, c]);
                vec![(start, c, a, mu, 2.0 * PI / mu, None)]
            }
        }
        Family::Psl2 if system.has_identity_metric() => {
            if k >= 0.25 {
                vec![]
            } else {
                let root = (1.0 - 4.0 * k).sqrt();
                let c = 0.5 * (root - 1.0);
                let a = (2.0 * k - c * c).max(0.0).sqrt();
                let mu = -root;
                let start = PhaseState::from_slices(&[0.0, 1.0, 0.0], &[a, 0.0, c]);
                vec![(start, c, a, mu, 2.0 * PI / root, Some([1, 1]))]
            }
        }
        Family::Torus if system.has_identity_metric() => torus_frequencies(system.sigma())
            .into_iter()
            .map(|(omega, u)| {
                let speed = (2.0 * k).sqrt();
                let n = system.dim();
                let start = PhaseState::new(DVector::zeros(n), u * speed);
                (start, 0.0, speed, omega, 2.0 * PI / omega, None)
            })
            .collect(),
        f => return Err(Error::Unsupported { op: "contractible_orbits", family: f.name() }),
    };

    let mut out = Vec::new();
    for (start, c, a, mu, t1, hom) in primitive {
        for l in 1..=l_max {
            let period = t1 * l as f64;
            let omega = match family {
                Family::Torus => k * period,
                _ => period * (2.0 * k + c),
            };
            let end = closed_form_flow(&start, period, system)?;
            let return_error = (end.to_vec() - start.to_vec()).amax();
            if return_error > 1e-8 {
                return Err(Error::VerificationFailed(format!(
                    "{} orbit at k = {k}, l = {l} does not return (error {return_error:.3e})",
                    system.name()
                )));
            }
            let samples = sample_orbit(&start, period, 1024 * l as usize, system)?;
            let omega_quadrature = omega_energy(&samples, system)?;
            out.push(ClosedOrbitRecord {
                system: family,
                k,
                c,
                a,
                mu,
                period,
                l,
                omega,
                omega_quadrature,
                return_error,
                contractible: true,
                homotopy: hom.map(|[m, l0]| [m * l as i64, l0 * l as i64]),
                start: Some(start.clone()),
            });
        }
    }
    Ok(out)
}

/// Distinct rotation frequencies of `J` with a unit vector in each plane.
fn torus_frequencies(j: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let n = j.nrows();
    let norm = j.norm();
    if norm == 0.0 {
        return vec![];
    }
    let eig = (j.transpose() * j).symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out: Vec<(f64, DVector<f64>)> = Vec::new();
    for i in idx {
        let w2 = eig.eigenvalues[i];
        if w2 <= 1e-20 * norm * norm {
            continue;
        }
        let w = w2.sqrt();
        if out.iter().any(|(v, _)| (v - w).abs() < 1e-9 * norm) {
            continue;
        }
        out.push((w, eig.eigenvectors.column(i).into_owned()));
    }
    out
}

/// Samples the exact flow at `segments + 1` uniform times on `[0, period]`.
pub fn sample_orbit(start: &PhaseState, period: f64, segments: usize, system: &MagneticSystem) -> Result<Trajectory> {
    let dt = period / segments as f64;
    let mut states = vec![start.clone()];
    let mut cur = start.clone();
    for _ in 0..segments {
        cur = closed_form_flow(&cur, dt, system)?;
        states.push(cur.clone());
    }
    let times = (0..=segments).map(|i| i as f64 * dt).collect();
    Ok(Trajectory { times, states, method: "exact", dt, local_error: 0.0 })
}

/// Line integral of a phase-space one-form over a closed polygon, using the
/// chord midpoint rule.
pub fn loop_integral(form: &dyn OneForm, points: &[DVector<f64>]) -> f64 {
    points
        .windows(2)
        .map(|w| {
            let mid = (&w[0] + &w[1]) * 0.5;
            form.coeffs(&mid).dot(&(&w[1] - &w[0]))
        })
        .sum()
}

/// Omega-energy of a closed orbit: the integral of the primitive
/// `psi = nu + tau^* theta` of `omega` over the loop lifted to the cover.
pub fn omega_energy(orbit: &Trajectory, system: &MagneticSystem) -> Result<f64> {
    let first = orbit.states.first().ok_or_else(|| Error::Degenerate("empty orbit".into()))?;
    let last = orbit.last();
    let gap = (first.to_vec() - last.to_vec()).amax();
    if gap > 1e-6 {
        return Err(Error::LoopNotClosed { gap });
    }
    let psi = SystemForm::new(OneFormId::Psi, system)?;
    let pts: Vec<DVector<f64>> = orbit.states.iter().map(|s| s.to_vec()).collect();
    Ok(loop_integral(&psi, &pts))
}

/// Type of the constant matrix `d = A X - (1 + C) V` of the PSL(2,R) flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Psl2Class {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

pub fn classify_psl2(c: f64, a: f64) -> Psl2Class {
    let disc = (1.0 + c) * (1.0 + c) - a * a;
    if disc.abs() < 1e-12 {
        Psl2Class::Parabolic
    } else if disc > 0.0 {
        Psl2Class::Elliptic
    } else {
        Psl2Class::Hyperbolic
    }
}

/// Top Lyapunov exponent estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub exponent: f64,
    pub std_error: f64,
    /// Coefficient of `ln t` absorbed by the fit (polynomial growth).
    pub log_coefficient: f64,
    pub converged: bool,
}

/// Slope standard error above which the estimate is flagged unconverged.
pub const LYAPUNOV_STDERR_LIMIT: f64 = 1e-3;

/// Top Lyapunov exponent of `X_H` at `s` from the growth of the operator
/// norm of the tangent flow, measured in the left-invariant metric
/// `|E(q) dq|^2 + |dp|^2` and rescaled every unit of time. The log-growth is
/// fitted by `lambda t + beta ln t + c + d/t` so polynomial growth gives
/// `lambda = 0`.
pub fn lyapunov_exponent(system: &MagneticSystem, s: &PhaseState, t_max: f64, dt: f64) -> Result<LyapunovEstimate> {
    s.check(system)?;
    if !(t_max >= 8.0) || !(dt > 0.0) {
        return Err(Error::PreconditionFailed("need t_max >= 8 and dt > 0".into()));
    }
    let n = system.dim();
    let steps = (t_max / dt).round() as usize;
    let h = t_max / steps as f64;
    let renorm = ((1.0 / h).round() as usize).max(1);
    let lift = |q: &DVector<f64>| {
        let mut l = DMatrix::identity(2 * n, 2 * n);
        l.view_mut((0, 0), (n, n)).copy_from(&system.coframe(q));
        l
    };
    let l0_inv = lift(&s.q).try_inverse().ok_or_else(|| Error::Degenerate("singular coframe".into()))?;
    let mut x = s.to_vec();
    let mut xi = DMatrix::identity(2 * n, 2 * n);
    let mut log_growth = 0.0;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for i in 1..=steps {
        let (nx, nxi) = variational_step(&x, &xi, h, system);
        x = nx;
        xi = nxi;
        if !x.iter().chain(xi.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: i as f64 * h, detail: "tangent flow".into() });
        }
        if i % renorm == 0 || i == steps {
            let q = x.rows(0, n).into_owned();
            let op = lift(&q) * &xi * &l0_inv;
            let nrm = op.singular_values().max();
            log_growth += nrm.ln();
            xi /= nrm;
            samples.push((i as f64 * h, log_growth));
        }
    }
    let tail: Vec<(f64, f64)> = samples.iter().copied().filter(|(t, _)| *t >= 1.0).collect();
    let (coef, se) = least_squares_fit(&tail);
    Ok(LyapunovEstimate {
        exponent: coef[0],
        std_error: se,
        log_coefficient: coef[1],
        converged: se < LYAPUNOV_STDERR_LIMIT,
    })
}

/// Fits `y = a t + b ln t + c + d / t`; returns `[a, b, c]` and the
/// standard error of `a`.
fn least_squares_fit(data: &[(f64, f64)]) -> ([f64; 3], f64) {
    let n = data.len();
    let design = DMatrix::from_fn(n, 4, |i, j| match j {
        0 => data[i].0,
        1 => data[i].0.ln(),
        2 => 1.0,
        _ => 1.0 / data[i].0,
    });
    let y = DVector::from_fn(n, |i, _| data[i].1);
    let normal = design.transpose() * &design;
    let Some(inv) = normal.clone().try_inverse() else {
        return ([f64::NAN; 3], f64::INFINITY);
    };
    let coef = &inv * design.transpose() * &y;
    let resid = &y - &design * &coef;
    let dof = n.saturating_sub(4).max(1) as f64;
    let s2 = resid.norm_squared() / dof;
    ([coef[0], coef[1], coef[2]], (s2 * inv[(0, 0)]).sqrt())
}

/// Result of the zero-entropy test on the PSL(2,R) shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyVerdict {
    pub k: f64,
    /// No hyperbolic `d` on the shell.
    pub holds: bool,
    /// `min 2C^2 + 2C + 1` over `C in [-sqrt(2k), sqrt(2k)]`.
    pub min_value: f64,
    pub argmin: f64,
    /// Same minimum on a uniform grid (cross-check).
    pub grid_min: f64,
}

/// `2C^2 + 2C + 1 >= 2k` for every admissible `C`, decided analytically and
/// cross-checked on a grid.
pub fn entropy_threshold(k: f64) -> Result<EntropyVerdict> {
    if !(k > 0.0) {
        return Err(Error::PreconditionFailed(format!("energy must be positive, got {k}")));
    }
    let r = (2.0 * k).sqrt();
    let q = |c: f64| 2.0 * c * c + 2.0 * c + 1.0;
    let argmin = (-0.5f64).max(-r);
    let min_value = q(argmin);
    let n = 4000;
    let grid_min = (0..=n).map(|i| q(-r + 2.0 * r * i as f64 / n as f64)).fold(f64::INFINITY, f64::min);
    Ok(EntropyVerdict { k, holds: min_value >= 2.0 * k, min_value, argmin, grid_min })
}

/// Certificate that the probe Hamiltonian displaces the energy shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementCertificate {
    pub system: Family,
    pub k: f64,
    pub probe: String,
    /// Analytic upper bound on the time for every shell point to leave.
    pub exit_time_bound: f64,
    /// Largest exit time observed over the simulated shell sample.
    pub simulated_exit_time: f64,
    pub samples: usize,
    pub certified: bool,
}

/// Flows a probe Hamiltonian from a sample of shell points and checks that
/// every point leaves the shell before the analytic exit time.
///
/// Heisenberg uses `f = p_alpha` (`k < 1/2`), PSL(2,R) `f = p_beta`
/// (`k < 1/4`), tori `h = <a, p>` with `a` the top singular vector of `J`.
pub fn displacement_probe(system: &MagneticSystem, k: f64) -> Result<DisplacementCertificate> {
    let r = (2.0 * k).sqrt();
    let n = system.dim();
    let (probe, df, bound) = match system.family() {
        Family::Heisenberg => {
            if !(k > 0.0 && k < 0.5) {
                return Err(Error::PreconditionFailed(format!("Heisenberg probe needs 0 < k < 1/2, got {k}")));
            }
            let mut df = DVector::zeros(3);
            df[0] = 1.0;
            ("p_alpha".to_string(), df, 2.0 * r / (1.0 - r))
        }
        Family::Psl2 => {
            if !(k > 0.0 && k < 0.25) {
                return Err(Error::PreconditionFailed(format!("PSL(2,R) probe needs 0 < k < 1/4, got {k}")));
            }
            let mut df = DVector::zeros(3);
            df[1] = 1.0;
            let bound = ((r + (1.0 - 2.0 * k).sqrt()) / (1.0 - 2.0 * k.sqrt())).ln();
            ("p_beta".to_string(), df, bound)
        }
        Family::Torus => {
            let j = system.sigma();
            if j.amax() == 0.0 || !(k > 0.0) {
                return Err(Error::PreconditionFailed("torus probe needs sigma != 0 and k > 0".into()));
            }
            let svd = j.clone().svd(false, true);
            let (imax, smax) = svd.singular_values.argmax();
            let a = svd.v_t.as_ref().expect("v_t").row(imax).transpose();
            ("<a,p>".to_string(), a, 2.0 * r / smax)
        }
        f => return Err(Error::Unsupported { op: "displacement_probe", family: f.name() }),
    };
    let shell = shell_sample(n, r, 400);
    let dt = 1e-3;
    let t_cap = 2.0 * bound + 1.0;
    let exits = par::map(&shell, |p0| {
        // the probe is left-invariant, so momenta evolve on their own
        let mut p = p0.clone();
        let mut t = 0.0;
        let rhs = |p: &DVector<f64>| euler_field_of(&df, p, system);
        while p.norm() <= r && t < t_cap {
            let k1 = rhs(&p);
            let k2 = rhs(&(&p + &k1 * (0.5 * dt)));
            let k3 = rhs(&(&p + &k2 * (0.5 * dt)));
            let k4 = rhs(&(&p + &k3 * dt));
            p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            t += dt;
        }
        t
    });
    let simulated = exits.iter().copied().fold(0.0, f64::max);
    Ok(DisplacementCertificate {
        system: system.family(),
        k,
        probe,
        exit_time_bound: bound,
        simulated_exit_time: simulated,
        samples: shell.len(),
        certified: simulated <= bound + dt,
    })
}

/// Quasi-uniform points on the sphere of radius `r` in `R^n` (Fibonacci
/// lattice in three dimensions, a deterministic pseudo-random sample otherwise).
fn shell_sample(n: usize, r: f64, count: usize) -> Vec<DVector<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let v = if n == 3 {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                let rho = (1.0 - z * z).sqrt();
                let th = golden * i as f64;
                DVector::from_vec(vec![rho * th.cos(), rho * th.sin(), z])
            } else if n == 2 {
                let th = 2.0 * PI * i as f64 / count as f64;
                DVector::from_vec(vec![th.cos(), th.sin()])
            } else {
                DVector::from_fn(n, |j, _| ((i * 7919 + j * 104_729) as f64 * 0.618_033_988_75).fract() - 0.5)
            };
            let nrm = v.norm();
            v * (r / nrm)
        })
        .collect()
}
