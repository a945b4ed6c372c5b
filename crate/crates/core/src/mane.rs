//! Bounds on the Mañé critical values `c` (universal cover) and `c0`
//! (abelian cover).
//!
//! Upper bounds come from bounded primitives, `c <= sup_q H(q, theta_q)`.
//! Lower bounds come from closed curves of negative action, or for `c0`
//! from the contact obstruction: a level `k > c0` on these systems is of
//! contact type, so a non-contact level satisfies `k <= c0`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::Family;
use crate::par;
use crate::stability::{contact_diagnostic, Verdict};
use crate::systems::{hamiltonian, lagrangian_action, CurveSamples, MagneticSystem, OneFormId, SystemForm};

/// `sup_q H(q, theta_q)` for a configuration primitive `theta` of `sigma`.
///
/// Evaluated on two nested random chart boxes; growth between them is
/// reported as `f64::INFINITY`.
pub fn primitive_upper_bound(system: &MagneticSystem, form: OneFormId) -> Result<f64> {
    let f = SystemForm::new(form, system)?;
    if !form.is_configuration() {
        return Err(Error::InvalidForm { form: form.name().into(), family: system.name() });
    }
    if form == OneFormId::Zero && system.sigma().amax() != 0.0 {
        return Err(Error::InvalidForm { form: "zero (sigma is not zero)".into(), family: system.name() });
    }
    let n = system.dim();
    let sup_on = |scale: f64| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        (0..512)
            .map(|_| {
                let mut q = DVector::from_fn(n, |_, _| scale * (2.0 * rng.gen::<f64>() - 1.0));
                if system.family() == Family::Psl2 {
                    q[1] = q[1].exp();
                }
                let (th, _) = f.configuration(&q);
                hamiltonian(&(system.frame(&q).transpose() * th), system)
            })
            .fold(0.0, f64::max)
    };
    let small = sup_on(1.0);
    let large = sup_on(10.0);
    if large > small * (1.0 + 1e-9) + 1e-12 {
        Ok(f64::INFINITY)
    } else {
        Ok(large)
    }
}

/// Closed-form action of the clockwise hyperbolic circle `B_r` of radius `r`
/// at speed `sqrt(2k)`, measured with `L + k` and the primitive `delta`.
pub fn circle_family_action(k: f64, r: f64) -> f64 {
    std::f64::consts::TAU * ((2.0 * k).sqrt() * r.sinh() - (r.cosh() - 1.0) / std::f64::consts::SQRT_2)
}

/// Period of `B_r` at speed `sqrt(2k)`.
pub fn circle_family_period(k: f64, r: f64) -> f64 {
    std::f64::consts::TAU * r.sinh() / (2.0 * k).sqrt()
}

/// `B_r` sampled in the PSL(2,R) chart: a hyperbolic circle centred at `i`
/// in the plane with coordinates `(sqrt(2) x, y)`, constant fibre angle.
pub fn circle_family_curve(k: f64, r: f64, segments: usize) -> Result<CurveSamples> {
    let period = circle_family_period(k, r);
    let rho = (0.5 * r).tanh();
    CurveSamples::from_fn(period, segments, |t| {
        let s = std::f64::consts::TAU * t / period;
        // z = rho e^{-is}, w = i (1 + z) / (1 - z)
        let (zr, zi) = (rho * s.cos(), -rho * s.sin());
        let (nr, ni) = (1.0 + zr, zi);
        let (dr, di) = (1.0 - zr, -zi);
        let den = dr * dr + di * di;
        let (qr, qi) = ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den);
        let (u, y) = (-qi, qr);
        DVector::from_vec(vec![u / std::f64::consts::SQRT_2, y, 0.0])
    })
}

/// Action of the round circle of radius `radius` at speed `speed` in the
/// torus plane of largest `|J_ij|`, oriented so the magnetic term is
/// `-|J_ij| pi R^2`.
pub fn torus_circle_action(system: &MagneticSystem, k: f64, radius: f64, speed: f64) -> f64 {
    let (_, _, jij) = torus_plane(system);
    (0.5 * speed * speed + k) * std::f64::consts::TAU * radius / speed - jij.abs() * std::f64::consts::PI * radius * radius
}

fn torus_plane(system: &MagneticSystem) -> (usize, usize, f64) {
    let j = system.sigma();
    let n = system.dim();
    let mut best = (0, 1.min(n - 1), 0.0f64);
    for a in 0..n {
        for b in a + 1..n {
            if j[(a, b)].abs() > best.2.abs() {
                best = (a, b, j[(a, b)]);
            }
        }
    }
    best
}

/// The torus circle as chart samples.
pub fn torus_circle_curve(system: &MagneticSystem, radius: f64, speed: f64, segments: usize) -> Result<CurveSamples> {
    let (a, b, jij) = torus_plane(system);
    let n = system.dim();
    let period = std::f64::consts::TAU * radius / speed;
    let orient = if jij > 0.0 { -1.0 } else { 1.0 };
    CurveSamples::from_fn(period, segments, |t| {
        let s = std::f64::consts::TAU * t / period;
        let mut q = DVector::zeros(n);
        q[a] = radius * s.cos();
        q[b] = orient * radius * s.sin();
        q
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManeMethod {
    /// Negative-action circles (PSL(2,R), tori).
    CircleFamily,
    /// Non-contact levels bound `c0` from below (Heisenberg, PSL(2,R)).
    ContactObstruction,
}

impl std::str::FromStr for ManeMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::PreconditionFailed(format!("unknown method `{s}`")))
    }
}

/// A closed curve of negative action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub k: f64,
    /// Hyperbolic radius on PSL(2,R), Euclidean radius on tori.
    pub radius: f64,
    pub speed: f64,
    pub period: f64,
    pub action: f64,
    pub action_quadrature: f64,
    pub quadrature_error: f64,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeEstimate {
    pub system: Family,
    pub method: ManeMethod,
    pub c_lower: f64,
    pub c_upper: f64,
    pub c0_lower: Option<f64>,
    pub c0_upper: f64,
    pub upper_form: OneFormId,
    pub c0_upper_form: OneFormId,
    pub witness: Option<Witness>,
    /// Energies on either side of the last sign change of the family
    /// infimum.
    pub family_bracket: Option<[f64; 2]>,
    /// The family stays negative up to the largest energy tried.
    pub unbounded: bool,
    /// `c = c0` because the fundamental group of the compact quotient is
    /// amenable (abelian or nilpotent).
    pub c_equals_c0: bool,
}

const R_STEP: f64 = 0.05;
const R_MAX: f64 = 16.0;
const TORUS_RADII: [f64; 12] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1e3, 1e4, 1e5];

fn r_grid() -> Vec<f64> {
    (1..=(R_MAX / R_STEP) as usize).map(|i| i as f64 * R_STEP).collect()
}

/// Family infimum over the radius grid and its first radius with action
/// at most `-1` (or the argmin when none is that negative).
fn family_min(system: &MagneticSystem, k: f64, grid: &[f64]) -> (f64, f64) {
    let action = |r: f64| match system.family() {
        Family::Psl2 => circle_family_action(k, r),
        _ => torus_circle_action(system, k, r, (2.0 * k).sqrt()),
    };
    let values = par::map(grid, |&r| action(r));
    let (mut min, mut arg) = (f64::INFINITY, grid[0]);
    for (&r, &a) in grid.iter().zip(&values) {
        if a < min {
            min = a;
            arg = r;
        }
    }
    let comfortable = grid.iter().zip(&values).find(|(_, &a)| a <= -1.0).map(|(&r, _)| r);
    (min, comfortable.unwrap_or(arg))
}

/// Quadrature segments: hyperbolic (or Euclidean) step about `0.02`.
fn witness_segments(length: f64) -> usize {
    let n = (length / 0.02).ceil() as usize;
    (n.max(512) + 1) & !1
}

fn make_witness(system: &MagneticSystem, k: f64, radius: f64) -> Result<Witness> {
    let speed = (2.0 * k).sqrt();
    let (curve, action, length, form) = match system.family() {
        Family::Psl2 => {
            let length = std::f64::consts::TAU * radius.sinh();
            let n = witness_segments(length);
            (circle_family_curve(k, radius, n)?, circle_family_action(k, radius), length, OneFormId::DeltaPsl2)
        }
        _ => {
            let length = std::f64::consts::TAU * radius;
            let n = witness_segments(length);
            (torus_circle_curve(system, radius, speed, n)?, torus_circle_action(system, k, radius, speed), length, OneFormId::BetaTorus)
        }
    };
    let q = lagrangian_action(&curve, k, form, system)?;
    Ok(Witness {
        k,
        radius,
        speed,
        period: length / speed,
        action,
        action_quadrature: q.extrapolated,
        quadrature_error: q.error,
        segments: curve.segments(),
    })
}

/// Brackets the critical values of `system`.
///
/// `CircleFamily` bisects on the sign of the circle-family infimum over
/// `(0, k_max]` down to `tol`; `ContactObstruction` bisects on the contact
/// verdict. Upper bounds always come from the bounded primitives.
pub fn critical_value_bisection(system: &MagneticSystem, method: ManeMethod, k_max: f64, tol: f64) -> Result<ManeEstimate> {
    if !(tol > 0.0) || !(k_max > tol) {
        return Err(Error::PreconditionFailed(format!("need 0 < tol < k_max, got tol = {tol}, k_max = {k_max}")));
    }
    let family = system.family();
    let (upper_form, c0_form) = match family {
        Family::Psl2 => (OneFormId::DeltaPsl2, OneFormId::Gamma),
        Family::Heisenberg => (OneFormId::Gamma, OneFormId::Gamma),
        Family::Torus if system.sigma().amax() == 0.0 => (OneFormId::Zero, OneFormId::Zero),
        Family::Torus => (OneFormId::BetaTorus, OneFormId::BetaTorus),
        _ => return Err(Error::Unsupported { op: "critical_value_bisection", family: family.name() }),
    };
    if !system.has_identity_metric() && family != Family::Torus {
        return Err(Error::Unsupported { op: "critical_value_bisection", family: family.name() });
    }
    let c_upper = primitive_upper_bound(system, upper_form)?;
    let c0_upper = primitive_upper_bound(system, c0_form)?;
    let c_equals_c0 = family != Family::Psl2;
    let mut est = ManeEstimate {
        system: family,
        method,
        c_lower: 0.0,
        c_upper,
        c0_lower: None,
        c0_upper,
        upper_form,
        c0_upper_form: c0_form,
        witness: None,
        family_bracket: None,
        unbounded: false,
        c_equals_c0,
    };
    match method {
        ManeMethod::CircleFamily => {
            let grid: Vec<f64> = match family {
                Family::Psl2 => r_grid(),
                Family::Torus if c_upper.is_infinite() => TORUS_RADII.to_vec(),
                _ => return Err(Error::Unsupported { op: "circle family", family: family.name() }),
            };
            let negative = |k: f64| family_min(system, k, &grid).0 < 0.0;
            let (mut lo, mut hi) = (tol, k_max);
            if !negative(lo) {
                return Err(Error::VerificationFailed(format!("circle family is non-negative already at k = {lo}")));
            }
            if negative(hi) {
                est.unbounded = true;
                lo = hi;
            } else {
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if negative(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                est.family_bracket = Some([lo, hi]);
            }
            let (_, radius) = family_min(system, lo, &grid);
            let w = make_witness(system, lo, radius)?;
            if !(w.action_quadrature < 0.0) {
                return Err(Error::VerificationFailed(format!(
                    "witness r = {radius} at k = {lo}: quadrature action {} is not negative",
                    w.action_quadrature
                )));
            }
            est.c_lower = lo;
            est.witness = Some(w);
            if c_equals_c0 {
                est.c0_lower = Some(lo);
            }
        }
        ManeMethod::ContactObstruction => {
            let not_contact = |k: f64| contact_diagnostic(system, k).map(|d| d.verdict != Verdict::Contact);
            let top = c0_upper.min(k_max);
            let c0_lower = if not_contact(top)? {
                top
            } else {
                let (mut lo, mut hi) = (tol, top);
                if !not_contact(lo)? {
                    return Err(Error::VerificationFailed(format!("level k = {lo} is already of contact type")));
                }
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if not_contact(mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                est.family_bracket = Some([lo, hi]);
                lo
            };
            est.c0_lower = Some(c0_lower);
            if c_equals_c0 {
                est.c_lower = c0_lower;
            }
        }
    }
    Ok(est)
}
