//! Fixed-step RK4 integration of `X_H`, the variational flow, and
//! invariant-drift reporting.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::Family;
use crate::systems::{hamiltonian, vector_field_jacobian, vector_field_vec, MagneticSystem, OneForm, PhaseState};

/// Local errors are estimated by step doubling every this many steps.
const ERROR_CHECK_EVERY: usize = 64;

/// Time-stamped states along a numerical or exact flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub method: &'static str,
    pub dt: f64,
    /// Largest step-doubling estimate of the local error seen.
    pub local_error: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("trajectories are nonempty")
    }

    /// CSV with columns `t, q1..qd, p1..pd, H, casimir`. The Casimir column
    /// is empty for systems without one.
    pub fn write_csv<W: Write>(&self, system: &MagneticSystem, mut out: W) -> std::io::Result<()> {
        let d = system.dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("q{i}")));
        header.extend((1..=d).map(|i| format!("p{i}")));
        header.push("H".into());
        header.push("casimir".into());
        writeln!(out, "{}", header.join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![fmt_num(*t)];
            row.extend(s.q.iter().map(|v| fmt_num(*v)));
            row.extend(s.p.iter().map(|v| fmt_num(*v)));
            row.push(fmt_num(hamiltonian(&s.p, system)));
            row.push(system.casimir(&s.p).map(fmt_num).unwrap_or_default());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.17e}")
}

fn rk4_step(x: &DVector<f64>, dt: f64, system: &MagneticSystem) -> DVector<f64> {
    let k1 = vector_field_vec(x, system);
    let k2 = vector_field_vec(&(x + &k1 * (0.5 * dt)), system);
    let k3 = vector_field_vec(&(x + &k2 * (0.5 * dt)), system);
    let k4 = vector_field_vec(&(x + &k3 * dt), system);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn admissible(x: &DVector<f64>, system: &MagneticSystem) -> bool {
    x.iter().all(|v| v.is_finite()) && (system.family() != Family::Psl2 || x[1] > 0.0)
}

/// One guarded RK4 step. Steps that leave the chart (`y <= 0` on PSL(2,R))
/// or produce non-finite values are retried with halved sub-steps.
fn guarded_step(x: &DVector<f64>, dt: f64, t: f64, system: &MagneticSystem) -> Result<DVector<f64>> {
    let mut pieces = 1usize;
    loop {
        let h = dt / pieces as f64;
        let mut y = x.clone();
        let mut ok = true;
        for _ in 0..pieces {
            y = rk4_step(&y, h, system);
            if !admissible(&y, system) {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(y);
        }
        if pieces >= 1 << 10 {
            return Err(Error::NonFinite { t, detail: format!("step rejected after {pieces} subdivisions") });
        }
        pieces *= 2;
    }
}

/// Integrates `X_H` from `s` up to `t_max` with step `dt`, recording every step.
pub fn integrate(s: &PhaseState, t_max: f64, dt: f64, system: &MagneticSystem) -> Result<Trajectory> {
    integrate_every(s, t_max, dt, 1, system)
}

/// As [`integrate`] but records only every `stride`-th step (and the endpoint).
pub fn integrate_every(s: &PhaseState, t_max: f64, dt: f64, stride: usize, system: &MagneticSystem) -> Result<Trajectory> {
    s.check(system)?;
    if t_max == 0.0 {
        return Ok(Trajectory { times: vec![0.0], states: vec![s.clone()], method: "rk4", dt, local_error: 0.0 });
    }
    if !(dt > 0.0) || !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::PreconditionFailed("need dt > 0 and finite t_max >= 0".into()));
    }
    let stride = stride.max(1);
    let steps = (t_max / dt).round().max(1.0) as usize;
    let h = t_max / steps as f64;
    let mut x = s.to_vec();
    let mut times = vec![0.0];
    let mut states = vec![s.clone()];
    let mut local_error: f64 = 0.0;
    for i in 1..=steps {
        let t = (i - 1) as f64 * h;
        let next = guarded_step(&x, h, t, system)?;
        if i % ERROR_CHECK_EVERY == 1 {
            let half = guarded_step(&x, 0.5 * h, t, system).and_then(|m| guarded_step(&m, 0.5 * h, t, system))?;
            local_error = local_error.max((&next - half).amax() / 15.0);
        }
        x = next;
        if i % stride == 0 || i == steps {
            times.push(i as f64 * h);
            states.push(PhaseState::from_vec(&x));
        }
    }
    Ok(Trajectory { times, states, method: "rk4", dt: h, local_error })
}

/// Endpoint of the numerical flow without storing the path.
pub fn flow_to(s: &PhaseState, t: f64, dt: f64, system: &MagneticSystem) -> Result<PhaseState> {
    let tr = integrate_every(s, t, dt, usize::MAX, system)?;
    Ok(tr.last().clone())
}

/// Solution of the variational equation `Phi' = DX_H(x(t)) Phi`, `Phi(0) = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub t: f64,
    pub base: PhaseState,
    pub frame: DMatrix<f64>,
}

/// One RK4 step of the coupled state and tangent system. `xi` may hold any
/// number of tangent columns.
pub fn variational_step(x: &DVector<f64>, xi: &DMatrix<f64>, dt: f64, system: &MagneticSystem) -> (DVector<f64>, DMatrix<f64>) {
    let f = |x: &DVector<f64>, xi: &DMatrix<f64>| (vector_field_vec(x, system), vector_field_jacobian(x, system) * xi);
    let (a1, b1) = f(x, xi);
    let (a2, b2) = f(&(x + &a1 * (0.5 * dt)), &(xi + &b1 * (0.5 * dt)));
    let (a3, b3) = f(&(x + &a2 * (0.5 * dt)), &(xi + &b2 * (0.5 * dt)));
    let (a4, b4) = f(&(x + &a3 * dt), &(xi + &b3 * dt));
    (
        x + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0),
        xi + (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (dt / 6.0),
    )
}

pub fn tangent_flow(s: &PhaseState, t_max: f64, dt: f64, system: &MagneticSystem) -> Result<TangentFrame> {
    s.check(system)?;
    let m = 2 * system.dim();
    let mut x = s.to_vec();
    let mut xi = DMatrix::identity(m, m);
    if t_max == 0.0 {
        return Ok(TangentFrame { t: 0.0, base: s.clone(), frame: xi });
    }
    if !(dt > 0.0) || !(t_max > 0.0) {
        return Err(Error::PreconditionFailed("need dt > 0 and t_max >= 0".into()));
    }
    let steps = (t_max / dt).round().max(1.0) as usize;
    let h = t_max / steps as f64;
    for i in 0..steps {
        let (nx, nxi) = variational_step(&x, &xi, h, system);
        if !admissible(&nx, system) || !nxi.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: i as f64 * h, detail: "variational flow".into() });
        }
        x = nx;
        xi = nxi;
    }
    Ok(TangentFrame { t: t_max, base: PhaseState::from_vec(&x), frame: xi })
}

/// Conservation diagnostics for a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub energy_drift: f64,
    pub relative_energy_drift: f64,
    pub casimir_drift: Option<f64>,
    pub min_form_pairings: Vec<(String, f64)>,
}

/// Max `|H - H0|`, max `|Casimir - Casimir0|`, and the minimum over samples
/// of each supplied form evaluated on `X_H`.
pub fn invariant_report(traj: &Trajectory, system: &MagneticSystem, forms: &[(&str, &dyn OneForm)]) -> Result<InvariantReport> {
    let first = traj.states.first().ok_or_else(|| Error::Degenerate("empty trajectory".into()))?;
    let h0 = hamiltonian(&first.p, system);
    let c0 = system.casimir(&first.p);
    let mut energy_drift: f64 = 0.0;
    let mut casimir_drift = c0.map(|_| 0.0f64);
    let mut mins = vec![f64::INFINITY; forms.len()];
    for s in &traj.states {
        energy_drift = energy_drift.max((hamiltonian(&s.p, system) - h0).abs());
        if let (Some(d), Some(c0), Some(c)) = (casimir_drift.as_mut(), c0, system.casimir(&s.p)) {
            *d = d.max((c - c0).abs());
        }
        if !forms.is_empty() {
            let x = s.to_vec();
            let xh = vector_field_vec(&x, system);
            for (m, (_, f)) in mins.iter_mut().zip(forms) {
                *m = m.min(f.coeffs(&x).dot(&xh));
            }
        }
    }
    Ok(InvariantReport {
        energy_drift,
        relative_energy_drift: if h0 > 0.0 { energy_drift / h0 } else { energy_drift },
        casimir_drift,
        min_form_pairings: forms.iter().zip(mins).map(|((n, _), m)| (n.to_string(), m)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::closed_form_flow;

    #[test]
    fn zero_time_trajectory() {
        let h = MagneticSystem::heisenberg();
        let s = PhaseState::from_slices(&[0.0; 3], &[0.5, 0.0, -0.5]);
        let tr = integrate(&s, 0.0, 1e-3, &h).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.states[0], s);
    }

    #[test]
    fn rejects_bad_step() {
        let h = MagneticSystem::heisenberg();
        let s = PhaseState::from_slices(&[0.0; 3], &[0.5, 0.0, -0.5]);
        assert!(integrate(&s, 1.0, 0.0, &h).is_err());
    }

    #[test]
    fn equilibrium_has_no_drift() {
        let h = MagneticSystem::heisenberg();
        let s = PhaseState::from_slices(&[0.0; 3], &[0.0, 0.0, 0.7]);
        let tr = integrate(&s, 1.0, 1e-2, &h).unwrap();
        let r = invariant_report(&tr, &h, &[]).unwrap();
        assert_eq!(r.energy_drift, 0.0);
        assert_eq!(r.casimir_drift, Some(0.0));
    }

    #[test]
    fn matches_heisenberg_closed_form() {
        let h = MagneticSystem::heisenberg();
        let s = PhaseState::from_slices(&[0.1, 0.2, 0.3], &[0.4, -0.2, -0.3]);
        let tr = integrate_every(&s, 5.0, 1e-3, 100, &h).unwrap();
        for (t, st) in tr.times.iter().zip(&tr.states) {
            let exact = closed_form_flow(&s, *t, &h).unwrap();
            assert!((exact.to_vec() - st.to_vec()).amax() < 1e-9);
        }
    }

    #[test]
    fn energy_drift_is_fourth_order() {
        let p = MagneticSystem::psl2();
        let s = PhaseState::from_slices(&[0.0, 1.0, 0.0], &[0.6, 0.3, -0.4]);
        let drift = |dt: f64| {
            let tr = integrate(&s, 10.0, dt, &p).unwrap();
            invariant_report(&tr, &p, &[]).unwrap().energy_drift
        };
        let (a, b) = (drift(0.1), drift(0.05));
        let order = (a / b).log2();
        assert!(order > 3.5, "observed order {order}");
    }

    #[test]
    fn torus_tangent_frame_is_exact() {
        let t = MagneticSystem::torus2();
        let s = PhaseState::from_slices(&[0.1, 0.2], &[0.5, -0.3]);
        let tf = tangent_flow(&s, 2.0, 1e-3, &t).unwrap();
        let j = t.j().unwrap();
        let mut k = DMatrix::zeros(4, 4);
        k.view_mut((0, 2), (2, 2)).copy_from(&DMatrix::<f64>::identity(2, 2));
        k.view_mut((2, 2), (2, 2)).copy_from(j);
        let exact = crate::linalg::expm(&(k * 2.0));
        assert!((tf.frame - exact).amax() < 1e-8);
    }

    #[test]
    fn tangent_flow_matches_finite_differences() {
        let sol = MagneticSystem::sol();
        let s = PhaseState::from_slices(&[0.1, 0.2, -0.1], &[0.5, -0.3, 0.2]);
        let tf = tangent_flow(&s, 1.5, 1e-3, &sol).unwrap();
        let x = s.to_vec();
        for c in 0..6 {
            let eps = 1e-6;
            let mut up = x.clone();
            let mut dn = x.clone();
            up[c] += eps;
            dn[c] -= eps;
            let fu = flow_to(&PhaseState::from_vec(&up), 1.5, 1e-3, &sol).unwrap().to_vec();
            let fd = flow_to(&PhaseState::from_vec(&dn), 1.5, 1e-3, &sol).unwrap().to_vec();
            let col = (fu - fd) / (2.0 * eps);
            assert!((col - tf.frame.column(c)).amax() < 1e-5);
        }
    }

    #[test]
    fn csv_layout() {
        let h = MagneticSystem::heisenberg();
        let s = PhaseState::from_slices(&[0.0; 3], &[0.5, 0.0, -0.5]);
        let tr = integrate(&s, 0.01, 1e-3, &h).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&h, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,q1,q2,q3,p1,p2,p3,H,casimir");
        assert_eq!(lines.count(), tr.len());
    }
}
