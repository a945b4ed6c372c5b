//! Discretized Rabinowitz action functional.
//!
//! A loop is `N` equispaced nodes `x_i = (q_i, p_i)` on `t in [0, 1)` plus a
//! multiplier `eta`. With the Fourier differentiation matrix `D` and the
//! primitive `psi` of `omega`,
//!
//! `A(x, eta) = (1/N) sum_i [psi(x_i) . (D x)_i - eta Hbar(x_i)]`,
//!
//! `Hbar = H - k`. Critical points solve `D x = eta X_H(x)` with mean
//! `Hbar = 0`: periodic orbits on the shell with period `eta`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{contractible_orbits_up_to, ClosedOrbitRecord};
use crate::error::{Error, Result};
use crate::lie::Family;
use crate::linalg::spectral_derivative;
use crate::par;
use crate::systems::{
    closed_form_flow, hamiltonian, vector_field_jacobian, vector_field_vec, MagneticSystem, OneForm, OneFormId, PhaseState, SystemForm,
};

pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLoop {
    /// Stacked phase coordinates of the nodes.
    pub nodes: Vec<DVector<f64>>,
    pub eta: f64,
    pub k: f64,
}

impl DiscreteLoop {
    pub fn new(nodes: Vec<DVector<f64>>, eta: f64, k: f64) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::PreconditionFailed(format!("a loop needs at least {MIN_NODES} nodes, got {}", nodes.len())));
        }
        let d = nodes[0].len();
        if let Some(bad) = nodes.iter().find(|x| x.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        Ok(Self { nodes, eta, k })
    }

    /// Samples `f` at `t = i/N`.
    pub fn from_fn(n: usize, eta: f64, k: f64, mut f: impl FnMut(f64) -> DVector<f64>) -> Result<Self> {
        Self::new((0..n).map(|i| f(i as f64 / n as f64)).collect(), eta, k)
    }

    /// Loop traced by the exact flow from `start` over one period `period`.
    pub fn from_orbit(start: &PhaseState, period: f64, n: usize, k: f64, system: &MagneticSystem) -> Result<Self> {
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            nodes.push(closed_form_flow(start, period * i as f64 / n as f64, system)?.to_vec());
        }
        Self::new(nodes, period, k)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Flattened unknowns `(x_0, ..., x_{N-1}, eta)`.
    pub fn to_vec(&self) -> DVector<f64> {
        let d = self.nodes[0].len();
        let mut z = DVector::zeros(d * self.len() + 1);
        for (i, x) in self.nodes.iter().enumerate() {
            z.rows_mut(i * d, d).copy_from(x);
        }
        z[d * self.len()] = self.eta;
        z
    }

    pub fn from_flat(z: &DVector<f64>, d: usize, k: f64) -> Self {
        let n = (z.len() - 1) / d;
        let nodes = (0..n).map(|i| z.rows(i * d, d).into_owned()).collect();
        Self { nodes, eta: z[n * d], k }
    }

    /// Adds relative uniform noise of size `level` to every
    /// node coordinate and to `eta`.
    pub fn perturbed(&self, level: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for x in out.nodes.iter_mut() {
            for v in x.iter_mut() {
                *v += level * v.abs().max(0.1) * (2.0 * rng.gen::<f64>() - 1.0);
            }
        }
        out.eta *= 1.0 + level * (2.0 * rng.gen::<f64>() - 1.0);
        out
    }

    /// `D x`, node by node.
    fn derivative(&self, dm: &DMatrix<f64>) -> Vec<DVector<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = DVector::zeros(self.nodes[0].len());
                for j in 0..n {
                    let w = dm[(i, j)];
                    if w != 0.0 {
                        acc.axpy(w, &self.nodes[j], 1.0);
                    }
                }
                acc
            })
            .collect()
    }
}

fn check_system(lp: &DiscreteLoop, system: &MagneticSystem) -> Result<()> {
    let d = 2 * system.dim();
    if lp.nodes[0].len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: lp.nodes[0].len() });
    }
    if system.family() == Family::Nil4 {
        return Err(Error::Unsupported { op: "rabinowitz action", family: system.name() });
    }
    Ok(())
}

fn hbar(x: &DVector<f64>, k: f64, system: &MagneticSystem) -> f64 {
    let n = system.dim();
    hamiltonian(&x.rows(n, n).into_owned(), system) - k
}

fn grad_h(x: &DVector<f64>, system: &MagneticSystem) -> DVector<f64> {
    let n = system.dim();
    let mut g = DVector::zeros(2 * n);
    g.rows_mut(n, n).copy_from(&(system.metric() * x.rows(n, n)));
    g
}

/// Discrete Rabinowitz action.
pub fn action(lp: &DiscreteLoop, system: &MagneticSystem) -> Result<f64> {
    check_system(lp, system)?;
    let psi = SystemForm::new(OneFormId::Psi, system)?;
    let dm = spectral_derivative(lp.len());
    let dx = lp.derivative(&dm);
    let n = lp.len() as f64;
    Ok(lp
        .nodes
        .iter()
        .zip(&dx)
        .map(|(x, v)| psi.coeffs(x).dot(v) - lp.eta * hbar(x, lp.k, system))
        .sum::<f64>()
        / n)
}

/// Exact gradient of [`action`] under the plain `l2` metric on nodes:
/// `(1/N) [Dpsi_i^T (Dx)_i - (D psi)_i - eta grad Hbar_i]`, and
/// `-mean Hbar` for `eta`.
pub fn gradient(lp: &DiscreteLoop, system: &MagneticSystem) -> Result<(Vec<DVector<f64>>, f64)> {
    check_system(lp, system)?;
    let psi = SystemForm::new(OneFormId::Psi, system)?;
    let dm = spectral_derivative(lp.len());
    let dx = lp.derivative(&dm);
    let coeffs = DiscreteLoop { nodes: lp.nodes.iter().map(|x| psi.coeffs(x)).collect(), eta: 0.0, k: lp.k };
    let dpsi = coeffs.derivative(&dm);
    let n = lp.len() as f64;
    let loop_part = lp
        .nodes
        .iter()
        .zip(dx.iter().zip(&dpsi))
        .map(|(x, (v, da))| (psi.jacobian(x).transpose() * v - da - grad_h(x, system) * lp.eta) / n)
        .collect();
    let eta_part = -lp.nodes.iter().map(|x| hbar(x, lp.k, system)).sum::<f64>() / n;
    Ok((loop_part, eta_part))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointResult {
    #[serde(skip)]
    pub path: Option<DiscreteLoop>,
    pub system: Family,
    pub k: f64,
    pub points: usize,
    pub eta: f64,
    pub action: f64,
    /// `max_i |(D x)_i - eta X_H(x_i)|`.
    pub loop_residual: f64,
    /// `|mean Hbar|`.
    pub mean_residual: f64,
    pub max_energy_deviation: f64,
    pub iterations: usize,
    /// Loop collapsed to a point with `eta = 0`.
    pub constant: bool,
    /// Index into `dynamics::contractible_orbits` of the matched orbit.
    pub matched: Option<usize>,
    pub matched_orbit: Option<ClosedOrbitRecord>,
}

const MAX_ITER: usize = 60;

fn residual(lp: &DiscreteLoop, dm: &DMatrix<f64>, system: &MagneticSystem) -> DVector<f64> {
    let d = lp.nodes[0].len();
    let n = lp.len();
    let dx = lp.derivative(dm);
    let mut r = DVector::zeros(d * n + 1);
    let mut mean = 0.0;
    for (i, (x, v)) in lp.nodes.iter().zip(&dx).enumerate() {
        r.rows_mut(i * d, d).copy_from(&(v - vector_field_vec(x, system) * lp.eta));
        mean += hbar(x, lp.k, system);
    }
    r[d * n] = mean / n as f64;
    r
}

fn residual_jacobian(lp: &DiscreteLoop, dm: &DMatrix<f64>, system: &MagneticSystem) -> DMatrix<f64> {
    let d = lp.nodes[0].len();
    let n = lp.len();
    let mut jac = DMatrix::zeros(d * n + 1, d * n + 1);
    let blocks = par::map(&lp.nodes, |x| (vector_field_jacobian(x, system), vector_field_vec(x, system), grad_h(x, system)));
    for i in 0..n {
        for j in 0..n {
            let w = dm[(i, j)];
            if w != 0.0 {
                for c in 0..d {
                    jac[(i * d + c, j * d + c)] = w;
                }
            }
        }
        let (dv, v, g) = &blocks[i];
        let mut blk = jac.view_mut((i * d, i * d), (d, d));
        blk -= dv * lp.eta;
        jac.view_mut((i * d, d * n), (d, 1)).copy_from(&(-v));
        jac.view_mut((d * n, i * d), (1, d)).copy_from(&(g.transpose() / n as f64));
    }
    jac
}

fn escaped(lp: &DiscreteLoop, system: &MagneticSystem) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for x in &lp.nodes {
        if !x.iter().all(|v| v.is_finite()) || (system.family() == Family::Psl2 && x[1] <= 0.0) {
            return Some(f64::INFINITY);
        }
        worst = worst.max(hbar(x, lp.k, system).abs());
    }
    if worst > 10.0 * (lp.k + 1.0) {
        Some(worst)
    } else {
        None
    }
}

/// Damped Newton (Levenberg-Marquardt) on the critical-point equations.
///
/// The equations are degenerate along time shifts and along orbit
/// families; the damping term picks a small step transverse to them.
pub fn find_critical(seed: &DiscreteLoop, system: &MagneticSystem, tol: f64) -> Result<CriticalPointResult> {
    check_system(seed, system)?;
    if seed.nodes.iter().any(|x| !x.iter().all(|v| v.is_finite())) || !seed.eta.is_finite() {
        return Err(Error::PreconditionFailed("seed loop is not finite".into()));
    }
    let d = seed.nodes[0].len();
    let dm = spectral_derivative(seed.len());
    let mut lp = seed.clone();
    let mut r = residual(&lp, &dm, system);
    let mut lambda = 1e-6;
    let mut iterations = 0;
    while r.amax() > tol {
        if iterations >= MAX_ITER {
            return Err(Error::NoConvergence { iterations, residual: r.amax() });
        }
        iterations += 1;
        let jac = residual_jacobian(&lp, &dm, system);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let jtr = &jt * &r;
        let scale = jtj.diagonal().amax().max(1.0);
        let z = lp.to_vec();
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * scale;
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&jtr);
            let trial = DiscreteLoop::from_flat(&(&z - step), d, lp.k);
            if let Some(dev) = escaped(&trial, system) {
                if lambda > 1e6 {
                    return Err(Error::EscapedShell { deviation: dev });
                }
                lambda *= 10.0;
                continue;
            }
            let rt = residual(&trial, &dm, system);
            if rt.norm() < r.norm() {
                lp = trial;
                r = rt;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations, residual: r.amax() });
        }
    }
    let a = action(&lp, system)?;
    let dev = lp.nodes.iter().map(|x| hbar(x, lp.k, system).abs()).fold(0.0, f64::max);
    let spread = lp.nodes.iter().map(|x| (x - &lp.nodes[0]).amax()).fold(0.0, f64::max);
    let constant = lp.eta.abs() < 1e-8 || spread < 1e-10;
    let n = lp.len();
    let loop_residual = (0..n).map(|i| r.rows(i * d, d).amax()).fold(0.0, f64::max);
    let mut out = CriticalPointResult {
        path: None,
        system: system.family(),
        k: lp.k,
        points: n,
        eta: lp.eta,
        action: a,
        loop_residual,
        mean_residual: r[d * n].abs(),
        max_energy_deviation: dev,
        iterations,
        constant,
        matched: None,
        matched_orbit: None,
    };
    if !constant {
        if let Ok(orbits) = contractible_orbits_up_to(system, lp.k, 5) {
            let nsys = system.dim();
            let casimir = system.casimir(&lp.nodes[0].rows(nsys, nsys).into_owned());
            out.matched = orbits.iter().position(|o| {
                let same_period = (o.period.abs() - lp.eta.abs()).abs() < 1e-4 * o.period.abs();
                let same_casimir = match (system.family(), casimir) {
                    (Family::Heisenberg | Family::Psl2, Some(c)) => (c - o.c).abs() < 1e-6,
                    _ => true,
                };
                same_period && same_casimir
            });
            out.matched_orbit = out.matched.map(|i| orbits[i].clone());
        }
    }
    out.path = Some(lp);
    Ok(out)
}

/// Solves from several seeds in parallel. Seeds that fail are reported as
/// errors in place; the search never claims that no orbit exists.
pub fn find_critical_many(seeds: &[DiscreteLoop], system: &MagneticSystem, tol: f64) -> Vec<Result<CriticalPointResult>> {
    par::map(seeds, |s| find_critical(s, system, tol))
}

/// Seeds for a multi-start search: the analytic orbit (when one exists)
/// with increasing noise, or random loops on the shell otherwise.
pub fn default_seeds(system: &MagneticSystem, k: f64, points: usize, count: usize) -> Result<Vec<DiscreteLoop>> {
    let orbits = contractible_orbits_up_to(system, k, 1).unwrap_or_default();
    let mut out = Vec::with_capacity(count);
    if let Some(o) = orbits.first() {
        let start = o.start.clone().ok_or_else(|| Error::Degenerate("orbit record without start point".into()))?;
        let base = DiscreteLoop::from_orbit(&start, o.period, points, k, system)?;
        for s in 0..count {
            out.push(base.perturbed(0.01, s as u64));
        }
    } else {
        let n = system.dim();
        let r = (2.0 * k).sqrt();
        for s in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(s as u64);
            let mut p0 = DVector::from_fn(n, |_, _| 2.0 * rng.gen::<f64>() - 1.0);
            p0 *= r / p0.norm();
            let mut q0 = DVector::zeros(n);
            if system.family() == Family::Psl2 {
                q0[1] = 1.0;
            }
            let eta = 1.0 + 10.0 * rng.gen::<f64>();
            let start = PhaseState::new(q0, p0);
            match DiscreteLoop::from_orbit(&start, eta, points, k, system) {
                Ok(lp) => out.push(lp.perturbed(0.05, s as u64)),
                Err(_) => out.push(DiscreteLoop::from_fn(points, eta, k, |_| start.to_vec())?.perturbed(0.05, s as u64)),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodActionReport {
    pub omega: f64,
    pub eta: f64,
    pub lambda_period: Option<f64>,
    pub tame_ratio: Option<f64>,
}

/// `Omega` (the loop integral of `psi`), `eta`, and for a supplied form
/// `lambda` the period `oint v^* lambda` with `tame_ratio = lambda-period / |Omega|`.
pub fn period_action_check(result: &CriticalPointResult, system: &MagneticSystem, lambda: Option<&dyn OneForm>) -> Result<PeriodActionReport> {
    let Some(lp) = &result.path else {
        return Err(Error::PreconditionFailed("result carries no loop".into()));
    };
    let dm = spectral_derivative(lp.len());
    let dx = lp.derivative(&dm);
    let n = lp.len() as f64;
    let integral = |f: &dyn OneForm| lp.nodes.iter().zip(&dx).map(|(x, v)| f.coeffs(x).dot(v)).sum::<f64>() / n;
    let omega = integral(&SystemForm::new(OneFormId::Psi, system)?);
    if result.constant {
        return Ok(PeriodActionReport { omega: 0.0, eta: 0.0, lambda_period: lambda.map(|_| 0.0), tame_ratio: lambda.map(|_| 0.0) });
    }
    let lambda_period = lambda.map(integral);
    Ok(PeriodActionReport {
        omega,
        eta: lp.eta,
        lambda_period,
        tame_ratio: lambda_period.map(|l| l / omega.abs()),
    })
}

/// Schlenk-type spot check on a torus: the minimal `Omega` against the
/// Hofer norm of a cutoff of `h = <a, p>` that displaces `Sigma_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchlenkCheck {
    pub k: f64,
    pub omega_min: f64,
    pub direction: Vec<f64>,
    /// Time for the translation `p -> p + t J a` to clear the momentum ball.
    pub displacement_time: f64,
    /// `sup - inf` of the cutoff Hamiltonian over the phase space.
    pub oscillation: f64,
    pub hofer_norm: f64,
    pub displaces: bool,
    pub holds: bool,
}

fn smooth_cutoff(x: f64) -> f64 {
    // 1 for x <= 0, 0 for x >= 1, C^1 in between
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        1.0 - x * x * (3.0 - 2.0 * x)
    }
}

/// Builds the cutoff Hamiltonian `rho(p) <a, p>` with `rho = 1` on the
/// stadium swept by the momentum ball of radius `sqrt(2k)` under
/// `p -> p + s J a`, `s in [0, t]`, decaying over width `margin`. Its flow
/// on the stadium is exactly the translation. The Hofer norm is
/// `t (max - min)`, evaluated on a momentum grid.
pub fn schlenk_check(system: &MagneticSystem, k: f64, margin: f64) -> Result<SchlenkCheck> {
    if system.family() != Family::Torus || system.dim() != 2 {
        return Err(Error::Unsupported { op: "schlenk_check", family: system.name() });
    }
    let j = system.sigma();
    let svd = j.clone().svd(true, true);
    let v_t = svd.v_t.as_ref().expect("svd with v");
    let (imax, smax) = svd.singular_values.iter().enumerate().fold((0, 0.0), |b, (i, &s)| if s > b.1 { (i, s) } else { b });
    if smax == 0.0 {
        return Err(Error::PreconditionFailed("J = 0: translations do not move the momenta".into()));
    }
    let a = v_t.row(imax).transpose();
    let ja = j * &a;
    let r = (2.0 * k).sqrt();
    let t = (2.0 * r + margin) / ja.norm();
    let shift = &ja * t;
    let omega_min = contractible_orbits_up_to(system, k, 1)?
        .iter()
        .map(|o| o.omega.abs())
        .fold(f64::INFINITY, f64::min);
    // distance to the segment [0, shift] in the momentum plane, minus r
    let dist = |p: &DVector<f64>| {
        let s = (p.dot(&shift) / shift.norm_squared()).clamp(0.0, 1.0);
        (p - &shift * s).norm() - r
    };
    let h = |p: &DVector<f64>| smooth_cutoff(dist(p) / margin) * a.dot(p);
    let extent = 2.0 * r + shift.norm() + 2.0 * margin;
    let m = 801;
    let (mut hmax, mut hmin) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..m {
        for l in 0..m {
            let p = DVector::from_vec(vec![
                -extent + 2.0 * extent * i as f64 / (m - 1) as f64,
                -extent + 2.0 * extent * l as f64 / (m - 1) as f64,
            ]);
            let v = h(&p);
            hmax = hmax.max(v);
            hmin = hmin.min(v);
        }
    }
    let oscillation = hmax - hmin;
    let hofer_norm = t * oscillation;
    Ok(SchlenkCheck {
        k,
        omega_min,
        direction: a.iter().copied().collect(),
        displacement_time: t,
        oscillation,
        hofer_norm,
        displaces: shift.norm() > 2.0 * r,
        holds: omega_min <= hofer_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn heis_orbit_loop(n: usize) -> DiscreteLoop {
        let h = MagneticSystem::heisenberg();
        let o = &contractible_orbits_up_to(&h, 0.375, 1).unwrap()[0];
        DiscreteLoop::from_orbit(o.start.as_ref().unwrap(), o.period, n, 0.375, &h).unwrap()
    }

    #[test]
    fn trivial_actions() {
        let h = MagneticSystem::heisenberg();
        let on = PhaseState::from_slices(&[0.1, 0.2, 0.3], &[0.5, 0.5, 0.5]);
        let lp = DiscreteLoop::from_fn(32, 3.0, 0.375, |_| on.to_vec()).unwrap();
        assert!(action(&lp, &h).unwrap().abs() < 1e-12);
        let lp = DiscreteLoop::from_fn(32, 2.0, 0.3, |_| on.to_vec()).unwrap();
        assert!((action(&lp, &h).unwrap() + 2.0 * 0.075).abs() < 1e-12);
        let lp = DiscreteLoop::from_fn(32, 0.0, 0.375, |_| on.to_vec()).unwrap();
        let (g, ge) = gradient(&lp, &h).unwrap();
        assert!(g.iter().all(|v| v.amax() < 1e-12) && ge.abs() < 1e-15);
        assert!(DiscreteLoop::from_fn(8, 1.0, 0.3, |_| on.to_vec()).is_err());
    }

    #[test]
    fn torus_circle_action() {
        let t = MagneticSystem::torus2();
        let o = &contractible_orbits_up_to(&t, 0.5, 1).unwrap()[0];
        let lp = DiscreteLoop::from_orbit(o.start.as_ref().unwrap(), 2.0 * PI, 256, 0.5, &t).unwrap();
        assert!((action(&lp, &t).unwrap() - PI).abs() < 1e-4);
    }

    #[test]
    fn gradient_small_on_orbit() {
        let h = MagneticSystem::heisenberg();
        let (g, ge) = gradient(&heis_orbit_loop(512), &h).unwrap();
        let norm: f64 = g.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        assert!(norm < 1e-8 && ge.abs() < 1e-12, "{norm}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for sys in [MagneticSystem::heisenberg(), MagneticSystem::psl2(), MagneticSystem::torus2(), MagneticSystem::sol()] {
            let n = sys.dim();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let lp = DiscreteLoop::from_fn(16, 1.7, 0.4, |t| {
                let mut x = DVector::from_fn(2 * n, |i, _| (std::f64::consts::TAU * t * (1 + i % 2) as f64).sin() * 0.3 + rng.gen::<f64>() * 0.2);
                if sys.family() == Family::Psl2 {
                    x[1] += 1.0;
                }
                x
            })
            .unwrap();
            let (g, ge) = gradient(&lp, &sys).unwrap();
            let h = 1e-6;
            let mut z = lp.to_vec();
            let mut worst: f64 = 0.0;
            let gmax = g.iter().map(|v| v.amax()).fold(ge.abs(), f64::max);
            for c in 0..z.len() {
                let orig = z[c];
                z[c] = orig + h;
                let up = action(&DiscreteLoop::from_flat(&z, 2 * n, lp.k), &sys).unwrap();
                z[c] = orig - h;
                let dn = action(&DiscreteLoop::from_flat(&z, 2 * n, lp.k), &sys).unwrap();
                z[c] = orig;
                let fd = (up - dn) / (2.0 * h);
                let an = if c == z.len() - 1 { ge } else { g[c / (2 * n)][c % (2 * n)] };
                worst = worst.max((fd - an).abs() / gmax);
            }
            assert!(worst < 1e-6, "{}: {worst}", sys.name());
        }
    }

    #[test]
    fn torus_solve() {
        let t = MagneticSystem::torus2();
        let seeds = default_seeds(&t, 0.5, 64, 4).unwrap();
        for r in find_critical_many(&seeds, &t, 1e-10) {
            let r = r.unwrap();
            assert!((r.eta - 2.0 * PI).abs() < 1e-4, "{}", r.eta);
            assert!((r.action - PI).abs() < 1e-4);
            assert!(r.matched.is_some());
        }
    }

    #[test]
    fn heisenberg_solve() {
        let h = MagneticSystem::heisenberg();
        let seed = heis_orbit_loop(64).perturbed(0.01, 1);
        let r = find_critical(&seed, &h, 1e-10).unwrap();
        assert!((r.eta.abs() - 4.0 * PI).abs() < 1e-4, "{}", r.eta);
        assert!((r.action.abs() - PI).abs() < 1e-4);
        let o = r.matched_orbit.as_ref().unwrap();
        assert!((r.action - o.omega).abs() < 1e-4);
        let rep = period_action_check(&r, &h, None).unwrap();
        assert!((rep.omega - r.action).abs() < 1e-8);
    }

    #[test]
    fn schlenk_torus() {
        let c = schlenk_check(&MagneticSystem::torus2(), 0.5, 0.05).unwrap();
        assert!((c.omega_min - PI).abs() < 1e-9);
        assert!(c.displaces && c.holds);
        assert!(c.hofer_norm > 4.0 && c.hofer_norm < 4.5, "{}", c.hofer_norm);
    }
}
