//! Distinguished one-forms on the phase space, their pairing with `X_H`,
//! and the Lagrangian action of closed curves.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{psl2_primitive, pseudo_inverse, torus_projections, vector_field_vec, MagneticSystem, PhaseState};
use crate::error::{Error, Result};
use crate::lie::Family;

/// Named one-forms.
///
/// Phase-space forms: `psi = nu + tau^* theta` with the family's standard
/// primitive `theta`, `psi_delta = nu + tau^* delta` on PSL(2,R), the angular
/// forms `phi_heis` and `phi_psl2` in the momentum plane, and the torus and
/// Sol stabilizing forms. Configuration forms (`gamma`, `delta_psl2`,
/// `beta_torus`, `zero`) are pulled back to the phase space when paired
/// with `X_H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneFormId {
    Psi,
    PsiDelta,
    PhiHeis,
    PhiPsl2,
    LambdaTorus,
    LambdaSol,
    Gamma,
    DeltaPsl2,
    BetaTorus,
    Zero,
}

impl OneFormId {
    pub fn name(self) -> &'static str {
        match self {
            OneFormId::Psi => "psi",
            OneFormId::PsiDelta => "psi_delta",
            OneFormId::PhiHeis => "phi_heis",
            OneFormId::PhiPsl2 => "phi_psl2",
            OneFormId::LambdaTorus => "lambda_torus",
            OneFormId::LambdaSol => "lambda_sol",
            OneFormId::Gamma => "gamma",
            OneFormId::DeltaPsl2 => "delta_psl2",
            OneFormId::BetaTorus => "beta_torus",
            OneFormId::Zero => "zero",
        }
    }

    pub fn is_valid_for(self, family: Family) -> bool {
        use Family::*;
        match self {
            OneFormId::Psi | OneFormId::Zero => true,
            OneFormId::PsiDelta | OneFormId::PhiPsl2 | OneFormId::DeltaPsl2 => family == Psl2,
            OneFormId::PhiHeis => family == Heisenberg,
            OneFormId::LambdaTorus | OneFormId::BetaTorus => family == Torus,
            OneFormId::LambdaSol => family == Sol,
            OneFormId::Gamma => matches!(family, Heisenberg | Psl2),
        }
    }

    /// Whether the form lives on the configuration space.
    pub fn is_configuration(self) -> bool {
        matches!(self, OneFormId::Gamma | OneFormId::DeltaPsl2 | OneFormId::BetaTorus | OneFormId::Zero)
    }
}

impl std::fmt::Display for OneFormId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OneFormId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidForm { form: s.to_string(), family: "any" })
    }
}

/// A one-form on the stacked phase coordinates `x = (q, p)`.
pub trait OneForm {
    /// Components `a_j(x)`, length `2n`.
    fn coeffs(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `Da[j][c] = d a_j / d x_c`.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Antisymmetric matrix `W` with `d lambda(X, Y) = X^T W Y`.
pub fn exterior_derivative(form: &dyn OneForm, x: &DVector<f64>) -> DMatrix<f64> {
    let da = form.jacobian(x);
    da.transpose() - da
}

/// A named form bound to a system.
#[derive(Debug, Clone, Copy)]
pub struct SystemForm<'a> {
    pub id: OneFormId,
    pub system: &'a MagneticSystem,
}

impl<'a> SystemForm<'a> {
    pub fn new(id: OneFormId, system: &'a MagneticSystem) -> Result<Self> {
        if !id.is_valid_for(system.family()) {
            return Err(Error::InvalidForm { form: id.name().to_string(), family: system.name() });
        }
        Ok(Self { id, system })
    }

    /// Chart components and Jacobian of a configuration form.
    pub fn configuration(&self, q: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.system.dim();
        match self.id {
            OneFormId::Gamma => self.system.primitive(q),
            OneFormId::DeltaPsl2 => psl2_primitive(q, 0.5),
            OneFormId::BetaTorus => self.system.primitive(q),
            _ => (DVector::zeros(n), DMatrix::zeros(n, n)),
        }
    }

    /// `nu` part: `E(q)^T p`, and its Jacobian blocks in `q` and `p`.
    fn liouville(&self, q: &DVector<f64>, p: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
        let sys = self.system;
        let n = sys.dim();
        let e = sys.coframe(q);
        let val = e.transpose() * p;
        let mut dq = DMatrix::zeros(n, n);
        for (c, df) in sys.frame_derivative(q).iter().enumerate() {
            let de = -(&e * df * &e);
            dq.set_column(c, &(de.transpose() * p));
        }
        (val, dq, e.transpose())
    }
}

impl OneForm for SystemForm<'_> {
    fn coeffs(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.system.dim();
        let s = PhaseState::from_vec(x);
        let mut a = DVector::zeros(2 * n);
        match self.id {
            OneFormId::Psi | OneFormId::PsiDelta => {
                let (nu, _, _) = self.liouville(&s.q, &s.p);
                let (th, _) = if self.id == OneFormId::Psi { self.system.primitive(&s.q) } else { psl2_primitive(&s.q, 0.5) };
                a.rows_mut(0, n).copy_from(&(nu + th));
            }
            OneFormId::PhiHeis | OneFormId::PhiPsl2 => {
                let sign = if self.id == OneFormId::PhiHeis { 1.0 } else { -1.0 };
                let (pa, pb) = (s.p[0], s.p[1]);
                let r2 = pa * pa + pb * pb;
                a[n] = -sign * pb / r2;
                a[n + 1] = sign * pa / r2;
            }
            OneFormId::LambdaTorus => {
                let j = self.system.sigma();
                let (_, p1) = torus_projections(j);
                a.rows_mut(0, n).copy_from(&(p1 * &s.p));
                a.rows_mut(n, n).copy_from(&(pseudo_inverse(j) * &s.p * -0.5));
            }
            OneFormId::LambdaSol => {
                let (a0, a1, nu) = (s.p[0], s.p[1], s.p[2]);
                a[2] = nu + a0 * a1;
                a[n] = -0.5 * a1;
                a[n + 1] = 0.5 * a0;
            }
            _ => {
                let (th, _) = self.configuration(&s.q);
                a.rows_mut(0, n).copy_from(&th);
            }
        }
        a
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.system.dim();
        let s = PhaseState::from_vec(x);
        let mut da = DMatrix::zeros(2 * n, 2 * n);
        match self.id {
            OneFormId::Psi | OneFormId::PsiDelta => {
                let (_, dq, dp) = self.liouville(&s.q, &s.p);
                let (_, jth) = if self.id == OneFormId::Psi { self.system.primitive(&s.q) } else { psl2_primitive(&s.q, 0.5) };
                da.view_mut((0, 0), (n, n)).copy_from(&(dq + jth));
                da.view_mut((0, n), (n, n)).copy_from(&dp);
            }
            OneFormId::PhiHeis | OneFormId::PhiPsl2 => {
                let sign = if self.id == OneFormId::PhiHeis { 1.0 } else { -1.0 };
                let (pa, pb) = (s.p[0], s.p[1]);
                let r2 = pa * pa + pb * pb;
                let r4 = r2 * r2;
                // a_pa = -pb/r2, a_pb = pa/r2
                da[(n, n)] = sign * 2.0 * pa * pb / r4;
                da[(n, n + 1)] = -sign * (r2 - 2.0 * pb * pb) / r4;
                da[(n + 1, n)] = sign * (r2 - 2.0 * pa * pa) / r4;
                da[(n + 1, n + 1)] = -sign * 2.0 * pa * pb / r4;
            }
            OneFormId::LambdaTorus => {
                let j = self.system.sigma();
                let (_, p1) = torus_projections(j);
                da.view_mut((0, n), (n, n)).copy_from(&p1);
                da.view_mut((n, n), (n, n)).copy_from(&(pseudo_inverse(j) * -0.5));
            }
            OneFormId::LambdaSol => {
                let (a0, a1) = (s.p[0], s.p[1]);
                da[(2, n)] = a1;
                da[(2, n + 1)] = a0;
                da[(2, n + 2)] = 1.0;
                da[(n, n + 1)] = -0.5;
                da[(n + 1, n)] = 0.5;
            }
            _ => {
                let (_, jth) = self.configuration(&s.q);
                da.view_mut((0, 0), (n, n)).copy_from(&jth);
            }
        }
        da
    }
}

/// Value of the form on `X_H` at `s`.
///
/// On Heisenberg and PSL(2,R), `psi(X_H) = 2H + p_gamma`.
pub fn form_pairing(form: OneFormId, s: &PhaseState, system: &MagneticSystem) -> Result<f64> {
    let f = SystemForm::new(form, system)?;
    s.check(system)?;
    let x = s.to_vec();
    Ok(f.coeffs(&x).dot(&vector_field_vec(&x, system)))
}

/// A closed curve in the universal-cover chart, sampled at `N + 1` nodes
/// with the last node equal to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSamples {
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
}

impl CurveSamples {
    pub fn new(times: Vec<f64>, points: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: points.len() });
        }
        if times.len() < 9 {
            return Err(Error::Degenerate(format!("curve needs at least 8 segments, got {}", times.len().saturating_sub(1))));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Degenerate("curve times must be strictly increasing".into()));
        }
        let gap = (&points[0] - &points[points.len() - 1]).amax();
        let scale = points.iter().map(|p| p.amax()).fold(1.0, f64::max);
        if gap > 1e-9 * scale {
            return Err(Error::LoopNotClosed { gap });
        }
        Ok(Self { times, points })
    }

    /// Samples `f` on `N` uniform segments of `[0, period]`.
    pub fn from_fn(period: f64, segments: usize, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Degenerate("zero-length time interval".into()));
        }
        let times: Vec<f64> = (0..=segments).map(|i| period * i as f64 / segments as f64).collect();
        let mut points: Vec<DVector<f64>> = times.iter().map(|&t| f(t)).collect();
        points[segments] = points[0].clone();
        Self::new(times, points)
    }

    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn period(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    fn every_other(&self) -> Option<Self> {
        if self.segments() % 2 != 0 || self.segments() < 16 {
            return None;
        }
        let times = self.times.iter().step_by(2).copied().collect();
        let points = self.points.iter().step_by(2).cloned().collect();
        Some(Self { times, points })
    }
}

/// A quadrature value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    /// Richardson-extrapolated value (equal to `value` when the curve has
    /// too few nodes to halve).
    pub extrapolated: f64,
}

/// `A_{L+k}(gamma) = int (1/2 |gamma'|^2 + theta(gamma') + k) dt` with `U = 0`.
///
/// Midpoint rule on chords, second order. The error estimate compares with
/// the value on every other node (Richardson, divided by 3).
pub fn lagrangian_action(curve: &CurveSamples, k: f64, theta: OneFormId, system: &MagneticSystem) -> Result<QuadratureResult> {
    if !theta.is_configuration() {
        return Err(Error::InvalidForm { form: theta.name().to_string(), family: system.name() });
    }
    let form = SystemForm::new(theta, system)?;
    let n = system.dim();
    if curve.points[0].len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: curve.points[0].len() });
    }
    if !(curve.period() > 0.0) {
        return Err(Error::Degenerate("zero-length time interval".into()));
    }
    let minv = system
        .metric()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidSystem("singular metric".into()))?;
    let eval = |c: &CurveSamples| -> f64 {
        let mut total = 0.0;
        for i in 0..c.segments() {
            let dt = c.times[i + 1] - c.times[i];
            let qdot = (&c.points[i + 1] - &c.points[i]) / dt;
            let qm = (&c.points[i + 1] + &c.points[i]) * 0.5;
            let v = system.coframe(&qm) * &qdot;
            let kinetic = 0.5 * v.dot(&(&minv * &v));
            let (th, _) = form.configuration(&qm);
            total += (kinetic + th.dot(&qdot) + k) * dt;
        }
        total
    };
    let value = eval(curve);
    let diff = curve.every_other().map(|c| (value - eval(&c)) / 3.0);
    Ok(QuadratureResult {
        value,
        error: diff.map_or(f64::NAN, f64::abs),
        extrapolated: value + diff.unwrap_or(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::omega_matrix;

    fn state(sys: &MagneticSystem) -> PhaseState {
        match sys.family() {
            Family::Psl2 => PhaseState::from_slices(&[0.3, 1.4, 0.8], &[0.4, -0.3, 0.2]),
            Family::Nil4 => PhaseState::from_slices(&[0.3, -0.4, 0.8, 0.1], &[0.4, -0.3, 0.2, 0.5]),
            Family::Torus => PhaseState::from_slices(&vec![0.2; sys.dim()], &[0.4, -0.3, 0.2][..sys.dim()]),
            _ => PhaseState::from_slices(&[0.3, -0.4, 0.8], &[0.4, -0.3, 0.2]),
        }
    }

    #[test]
    fn heisenberg_psi_example() {
        let h = MagneticSystem::heisenberg();
        let k = 0.6f64;
        let pc = -(2.0 * k).sqrt();
        let s = PhaseState::from_slices(&[0.1, 0.2, 0.3], &[0.0, 0.0, pc]);
        let v = form_pairing(OneFormId::Psi, &s, &h).unwrap();
        assert!((v - 0.104_554_884_989_667_5).abs() < 1e-12);
    }

    #[test]
    fn psi_pairing_is_2h_plus_pgamma() {
        for sys in [MagneticSystem::heisenberg(), MagneticSystem::psl2()] {
            let s = state(&sys);
            let v = form_pairing(OneFormId::Psi, &s, &sys).unwrap();
            assert!((v - (2.0 * crate::systems::hamiltonian(&s.p, &sys) + s.p[2])).abs() < 1e-14);
        }
    }

    #[test]
    fn phi_pairings() {
        let h = MagneticSystem::heisenberg();
        let s = state(&h);
        assert!((form_pairing(OneFormId::PhiHeis, &s, &h).unwrap() - (1.0 + s.p[2])).abs() < 1e-14);
        let p = MagneticSystem::psl2();
        let s = state(&p);
        assert!((form_pairing(OneFormId::PhiPsl2, &s, &p).unwrap() - (1.0 + 2.0 * s.p[2])).abs() < 1e-14);
    }

    #[test]
    fn sol_and_torus_lambda() {
        let sol = MagneticSystem::sol();
        let s = PhaseState::from_slices(&[0.3, -0.2, 0.7], &[0.6, 0.8, 0.0]);
        assert!((form_pairing(OneFormId::LambdaSol, &s, &sol).unwrap() - 0.5).abs() < 1e-15);
        let t = MagneticSystem::torus2();
        let s = PhaseState::from_slices(&[0.3, -0.2], &[0.6, 0.8]);
        assert!((form_pairing(OneFormId::LambdaTorus, &s, &t).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_pairs_are_rejected() {
        let t = MagneticSystem::torus2();
        let s = PhaseState::from_slices(&[0.0, 0.0], &[1.0, 0.0]);
        assert!(matches!(form_pairing(OneFormId::PhiHeis, &s, &t), Err(Error::InvalidForm { .. })));
        assert!("lambda_sol".parse::<OneFormId>().is_ok());
        assert!("nonsense".parse::<OneFormId>().is_err());
    }

    #[test]
    fn psi_differential_is_omega() {
        let j3 = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let systems = [
            MagneticSystem::heisenberg(),
            MagneticSystem::psl2(),
            MagneticSystem::sol(),
            MagneticSystem::nil4(),
            MagneticSystem::torus(j3).unwrap(),
        ];
        for sys in systems.iter() {
            let x = state(sys).to_vec();
            let f = SystemForm::new(OneFormId::Psi, sys).unwrap();
            let d = exterior_derivative(&f, &x);
            assert!((d - omega_matrix(&x, sys)).amax() < 1e-13, "{}", sys.name());
        }
        let p = MagneticSystem::psl2();
        let x = state(&p).to_vec();
        let f = SystemForm::new(OneFormId::PsiDelta, &p).unwrap();
        assert!((exterior_derivative(&f, &x) - omega_matrix(&x, &p)).amax() < 1e-13);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let cases = [
            (MagneticSystem::heisenberg(), OneFormId::Psi),
            (MagneticSystem::heisenberg(), OneFormId::PhiHeis),
            (MagneticSystem::psl2(), OneFormId::Psi),
            (MagneticSystem::psl2(), OneFormId::PhiPsl2),
            (MagneticSystem::psl2(), OneFormId::DeltaPsl2),
            (MagneticSystem::sol(), OneFormId::LambdaSol),
            (MagneticSystem::torus2(), OneFormId::LambdaTorus),
            (MagneticSystem::nil4(), OneFormId::Psi),
        ];
        for (sys, id) in cases.iter() {
            let f = SystemForm::new(*id, sys).unwrap();
            let x = state(sys).to_vec();
            let jac = f.jacobian(&x);
            for c in 0..x.len() {
                let h = 1e-6;
                let mut up = x.clone();
                let mut dn = x.clone();
                up[c] += h;
                dn[c] -= h;
                let fd = (f.coeffs(&up) - f.coeffs(&dn)) / (2.0 * h);
                assert!((fd - jac.column(c)).amax() < 1e-8, "{id} on {}", sys.name());
            }
        }
    }

    #[test]
    fn constant_curve_action_is_kt() {
        let h = MagneticSystem::heisenberg();
        let c = CurveSamples::from_fn(3.0, 16, |_| DVector::from_vec(vec![0.2, 0.1, 0.0])).unwrap();
        let a = lagrangian_action(&c, 0.4, OneFormId::Gamma, &h).unwrap();
        assert!((a.value - 1.2).abs() < 1e-14);
    }

    #[test]
    fn curve_validation() {
        assert!(CurveSamples::from_fn(0.0, 16, |_| DVector::zeros(2)).is_err());
        let open = CurveSamples::new(
            (0..=16).map(|i| i as f64).collect(),
            (0..=16).map(|i| DVector::from_vec(vec![i as f64, 0.0])).collect(),
        );
        assert!(matches!(open, Err(Error::LoopNotClosed { .. })));
    }

    #[test]
    fn torus_circle_action() {
        let t = MagneticSystem::torus2();
        let (k, r) = (1.0f64, 20.0f64);
        let v = (2.0 * k).sqrt();
        let period = 2.0 * std::f64::consts::PI * r / v;
        // clockwise so that the magnetic term is -pi R^2
        let c = CurveSamples::from_fn(period, 4096, |t| {
            let s = v * t / r;
            DVector::from_vec(vec![r * s.cos(), -r * s.sin()])
        })
        .unwrap();
        let a = lagrangian_action(&c, k, OneFormId::BetaTorus, &t).unwrap();
        let exact = 2.0 * std::f64::consts::PI * r * v - std::f64::consts::PI * r * r;
        assert!(exact < 0.0);
        assert!((a.value - exact).abs() < 1e-3 * exact.abs(), "{} vs {}", a.value, exact);
        assert!(a.error < 1e-2 * exact.abs());
    }
}
