//! Trivial examples run by `--selftest`.

use nalgebra::{DMatrix, DVector};

use super::Failure;
use crate::dynamics::{classify_psl2, loop_integral, Psl2Class};
use crate::integrate::{integrate_every, invariant_report, tangent_flow};
use crate::lie::{bracket, exp_map, Family, GroupElement, StructureConstants};
use crate::mane::{circle_family_action, primitive_upper_bound};
use crate::rabinowitz::{action, gradient, period_action_check, CriticalPointResult, DiscreteLoop};
use crate::stability::{contact_diagnostic, Verdict};
use crate::systems::{closed_form_flow, hamiltonian, lagrangian_action, CurveSamples, MagneticSystem, OneFormId, PhaseState, SystemForm};

type Checks = Vec<(&'static str, bool)>;

pub(super) fn report(module: &str, checks: Checks) -> Result<(), Failure> {
    let mut failed = 0;
    for (name, ok) in &checks {
        println!("{} {module}::{name}", if *ok { "ok" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Verification(format!("{failed} selftest check(s) failed in {module}")))
    }
}

fn heis_state() -> PhaseState {
    PhaseState::from_slices(&[0.1, 0.2, 0.3], &[0.4, 0.2, -0.3])
}

pub(super) fn flow() -> Checks {
    let h = MagneticSystem::heisenberg();
    let s = heis_state();
    let sc = StructureConstants::for_family(Family::Torus, 2);
    let e1 = DVector::from_vec(vec![1.0, 0.0]);
    let e2 = DVector::from_vec(vec![0.0, 1.0]);
    let zero_t = integrate_every(&s, 0.0, 1e-3, 1, &h).map(|t| t.len() == 1 && t.states[0] == s).unwrap_or(false);
    let identity = GroupElement::identity(Family::Psl2, 3);
    vec![
        ("torus_bracket_vanishes", bracket(&e1, &e2, &sc).map(|b| b.amax() == 0.0).unwrap_or(false)),
        ("exp_of_zero_is_identity", exp_map(Family::Psl2, &DVector::zeros(3), 2.0).distance(&identity) == 0.0),
        ("zero_time_flow_is_identity", closed_form_flow(&s, 0.0, &h).map(|r| r == s).unwrap_or(false)),
        ("zero_time_trajectory_is_one_sample", zero_t),
        ("zero_momentum_has_zero_energy", hamiltonian(&DVector::zeros(3), &h) == 0.0),
    ]
}

pub(super) fn orbits() -> Checks {
    let h = MagneticSystem::heisenberg();
    let psi = SystemForm { id: OneFormId::Psi, system: &h };
    let x = heis_state().to_vec();
    vec![
        ("constant_loop_integral_vanishes", loop_integral(&psi, &[x.clone(), x.clone(), x]) == 0.0),
        ("parabolic_boundary", classify_psl2(-0.25, 0.75) == Psl2Class::Parabolic),
    ]
}

pub(super) fn mane() -> Checks {
    let flat = MagneticSystem::torus(DMatrix::zeros(2, 2));
    let zero_bound = flat.as_ref().map(|f| primitive_upper_bound(f, OneFormId::Zero).map(|v| v == 0.0).unwrap_or(false)).unwrap_or(false);
    let h = MagneticSystem::heisenberg();
    let q = DVector::from_vec(vec![0.1, 0.2, 0.3]);
    let constant = CurveSamples::from_fn(2.0, 16, |_| q.clone())
        .and_then(|c| lagrangian_action(&c, 0.3, OneFormId::Gamma, &h))
        .map(|a| (a.value - 0.6).abs() < 1e-15)
        .unwrap_or(false);
    vec![
        ("zero_form_bound_is_zero", zero_bound),
        ("degenerate_circle_has_zero_action", circle_family_action(0.2, 0.0) == 0.0),
        ("constant_curve_action_is_kt", constant),
    ]
}

pub(super) fn stability() -> Checks {
    let h = MagneticSystem::heisenberg();
    let eq = PhaseState::from_slices(&[0.1, 0.2, 0.3], &[0.0, 0.0, 0.0]);
    let drift = integrate_every(&eq, 1.0, 1e-2, 1, &h)
        .and_then(|t| invariant_report(&t, &h, &[]))
        .map(|r| r.energy_drift == 0.0 && r.casimir_drift == Some(0.0))
        .unwrap_or(false);
    vec![
        ("zero_momentum_has_zero_energy", hamiltonian(&DVector::zeros(3), &h) == 0.0),
        ("equilibrium_has_no_drift", drift),
    ]
}

pub(super) fn contact() -> Checks {
    let at_half = |s: MagneticSystem| contact_diagnostic(&s, 0.5).map(|d| d.verdict == Verdict::Boundary).unwrap_or(false);
    vec![
        ("heisenberg_half_is_boundary", at_half(MagneticSystem::heisenberg())),
        ("psl2_half_is_boundary", at_half(MagneticSystem::psl2())),
    ]
}

pub(super) fn lyapunov() -> Checks {
    let p = MagneticSystem::psl2();
    let s = PhaseState::from_slices(&[0.0, 1.0, 0.0], &[0.5, 0.0, -0.5]);
    let ok = tangent_flow(&s, 0.0, 1e-2, &p).map(|f| f.frame == DMatrix::identity(6, 6)).unwrap_or(false);
    vec![("zero_time_tangent_frame_is_identity", ok)]
}

pub(super) fn displace() -> Checks {
    let t = MagneticSystem::torus2();
    vec![("zero_momentum_has_zero_energy", hamiltonian(&DVector::zeros(2), &t) == 0.0)]
}

pub(super) fn rabinowitz() -> Checks {
    let h = MagneticSystem::heisenberg();
    let on = PhaseState::from_slices(&[0.1, 0.2, 0.3], &[0.5, 0.5, 0.5]);
    let k_on = 0.375;
    let on_shell = |eta: f64, k: f64| DiscreteLoop::from_fn(32, eta, k, |_| on.to_vec()).expect("32 nodes");
    let zero_grad = gradient(&on_shell(0.0, k_on), &h).map(|(g, e)| g.iter().all(|v| v.amax() < 1e-12) && e.abs() < 1e-15).unwrap_or(false);
    let constant = CriticalPointResult {
        path: Some(on_shell(0.0, k_on)),
        system: Family::Heisenberg,
        k: k_on,
        points: 32,
        eta: 0.0,
        action: 0.0,
        loop_residual: 0.0,
        mean_residual: 0.0,
        max_energy_deviation: 0.0,
        iterations: 0,
        constant: true,
        matched: None,
        matched_orbit: None,
    };
    let zeros = period_action_check(&constant, &h, None).map(|r| r.omega == 0.0 && r.eta == 0.0).unwrap_or(false);
    vec![
        ("constant_on_shell_loop_has_zero_action", action(&on_shell(2.5, k_on), &h).map(|a| a.abs() < 1e-14).unwrap_or(false)),
        ("constant_off_shell_loop", action(&on_shell(2.0, 0.3), &h).map(|a| (a + 0.15).abs() < 1e-14).unwrap_or(false)),
        ("zero_gradient_at_eta_zero", zero_grad),
        ("constant_loop_report_is_zero", zeros),
    ]
}
