//! Exact flows for the torus, Heisenberg and PSL(2,R) systems.

use nalgebra::{DMatrix, DVector};

use super::{MagneticSystem, PhaseState};
use crate::error::{Error, Result};
use crate::lie::{exp_map, nearest_lift, Family, GroupElement};
use crate::linalg::{expm, sinc, x_minus_sin_over_x2};

/// Exact flow of `X_H` for time `t`.
///
/// Sol and Nil4 have no closed form and return `Unsupported`. Heisenberg
/// and PSL(2,R) require the standard metric.
pub fn closed_form_flow(s: &PhaseState, t: f64, system: &MagneticSystem) -> Result<PhaseState> {
    s.check(system)?;
    if t == 0.0 {
        return Ok(s.clone());
    }
    match system.family() {
        Family::Torus => Ok(torus_flow(s, t, system)),
        Family::Heisenberg if system.has_identity_metric() => Ok(heisenberg_flow(s, t)),
        Family::Psl2 if system.has_identity_metric() => Ok(psl2_flow(s, t)),
        f => Err(Error::Unsupported { op: "closed_form_flow", family: f.name() }),
    }
}

fn torus_flow(s: &PhaseState, t: f64, system: &MagneticSystem) -> PhaseState {
    let n = system.dim();
    let m = system.metric();
    let mut k = DMatrix::zeros(2 * n, 2 * n);
    k.view_mut((0, n), (n, n)).copy_from(m);
    k.view_mut((n, n), (n, n)).copy_from(&(system.sigma() * m));
    PhaseState::from_vec(&(expm(&(k * t)) * s.to_vec()))
}

fn heisenberg_flow(s: &PhaseState, t: f64) -> PhaseState {
    let (x0, y0, z0) = (s.q[0], s.q[1], s.q[2]);
    let (pa, pb, pc) = (s.p[0], s.p[1], s.p[2]);
    let a = pa.hypot(pb);
    let phi = pb.atan2(pa);
    let mu = 1.0 + pc;
    let h = 0.5 * mu * t;
    let m = h + phi;
    let dx = a * t * m.cos() * sinc(h);
    let dy = a * t * m.sin() * sinc(h);
    // int (x - x0) p_b ds
    let sh = sinc(h);
    let area = a * a * t * t * (0.5 * x_minus_sin_over_x2(mu * t) + 0.25 * (2.0 * m).sin() * sh * sh);
    let z = z0 + x0 * dy + area + pc * t;
    let ang = mu * t + phi;
    PhaseState::from_slices(&[x0 + dx, y0 + dy, z], &[a * ang.cos(), a * ang.sin(), pc])
}

fn psl2_flow(s: &PhaseState, t: f64) -> PhaseState {
    let (pa, pb, c) = (s.p[0], s.p[1], s.p[2]);
    let a = pa.hypot(pb);
    let phi0 = pb.atan2(pa);
    let mu = -1.0 - 2.0 * c;
    let d = DVector::from_vec(vec![a, 0.0, -(1.0 + c)]);
    let v = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let g0 = GroupElement::from_chart(Family::Psl2, &s.q);
    let q0 = exp_map(Family::Psl2, &v, phi0);
    let q0inv = q0.inverse();
    let at = |tau: f64| -> GroupElement {
        let e = exp_map(Family::Psl2, &d, tau);
        let qt = exp_map(Family::Psl2, &v, -mu * tau);
        g0.mul(&q0).and_then(|g| g.mul(&e)).and_then(|g| g.mul(&qt)).and_then(|g| g.mul(&q0inv)).expect("same family")
    };
    // theta is tracked continuously by sub-stepping: |theta'| <= |p| + |C| per unit time
    let speed = a + c.abs() + 1.0;
    let steps = ((t.abs() * speed).ceil() as usize).max(1) * 2;
    let mut theta = s.q[2];
    let mut q = s.q.clone();
    for i in 1..=steps {
        q = at(t * i as f64 / steps as f64).to_chart(theta);
        theta = nearest_lift(q[2], theta);
        q[2] = theta;
    }
    let ang = mu * t + phi0;
    PhaseState::new(q, DVector::from_vec(vec![a * ang.cos(), a * ang.sin(), c]))
}
