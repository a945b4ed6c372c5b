//! Stabilizing one-forms, their numerical verification, contact diagnostics
//! and the virtual-contact bound on PSL(2,R).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{euler_field, Family};
use crate::par;
use crate::systems::{
    closed_form_flow, exterior_derivative, form_pairing, vector_field_vec, MagneticSystem, OneForm, OneFormId, PhaseState, SystemForm,
};

/// How the stabilizing form is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecipeKind {
    /// `lambda = f(p_gamma) psi + g(p_gamma) phi` with polynomial bump profiles.
    Profiles {
        /// 1 on Heisenberg, 2 on PSL(2,R).
        coef: f64,
        /// Sign of `1 - 2 k coef`.
        eps: f64,
        /// Bump half-width in the variable `s = 2k + p_gamma`.
        width: f64,
    },
    /// `psi` itself (contact energies).
    Contact,
    TorusLambda,
    SolLambda,
}

/// A stabilizing one-form at energy `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizingFormRecipe {
    pub system: MagneticSystem,
    pub k: f64,
    pub kind: RecipeKind,
}

/// `(1 - (s/w)^2)^3` on `|s| < w`.
fn bump(s: f64, w: f64) -> f64 {
    let u = 1.0 - (s / w).powi(2);
    if u > 0.0 {
        u.powi(3)
    } else {
        0.0
    }
}

/// `int_0^s bump`.
fn q0(s: f64, w: f64) -> f64 {
    let s = s.clamp(-w, w);
    let (w2, w4, w6) = (w * w, w.powi(4), w.powi(6));
    s - s.powi(3) / w2 + 3.0 * s.powi(5) / (5.0 * w4) - s.powi(7) / (7.0 * w6)
}

/// `int_0^s u bump(u) du`.
fn q1(s: f64, w: f64) -> f64 {
    let s = s.clamp(-w, w);
    w * w / 8.0 * (1.0 - (1.0 - s * s / (w * w)).powi(4))
}

impl StabilizingFormRecipe {
    /// `(f, f', g, g')` at `p_gamma`. Only meaningful for profile recipes.
    pub fn profiles(&self, pc: f64) -> (f64, f64, f64, f64) {
        match self.kind {
            RecipeKind::Profiles { coef, eps, width } => {
                let s = 2.0 * self.k + pc;
                let b = bump(s, width);
                let f = eps * ((1.0 - 2.0 * self.k * coef) * q0(s, width) + coef * q1(s, width));
                let df = eps * (1.0 + coef * pc) * b;
                let u = 1.0 - s * s / (width * width);
                let g = if u > 0.0 { eps * width * width / 8.0 * u.powi(4) } else { 0.0 };
                let dg = -eps * s * b;
                (f, df, g, dg)
            }
            RecipeKind::Contact => (1.0, 0.0, 0.0, 0.0),
            _ => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        }
    }

    /// Profile samples `(p_gamma, f, f', g, g')` on `[-sqrt(2k), sqrt(2k)]`.
    pub fn profile_samples(&self, n: usize) -> Vec<[f64; 5]> {
        let r = (2.0 * self.k).sqrt();
        (0..n)
            .map(|i| {
                let pc = -r + 2.0 * r * i as f64 / (n - 1).max(1) as f64;
                let (f, df, g, dg) = self.profiles(pc);
                [pc, f, df, g, dg]
            })
            .collect()
    }

    /// Residual of the defining relation `f' psi(X_H) + g' phi(X_H) = 0`,
    /// maximised over a grid in `p_gamma`.
    pub fn ode_residual(&self, n: usize) -> f64 {
        let RecipeKind::Profiles { coef, .. } = self.kind else { return 0.0 };
        self.profile_samples(n)
            .iter()
            .map(|[pc, _, df, _, dg]| (df * (2.0 * self.k + pc) + dg * (1.0 + coef * pc)).abs())
            .fold(0.0, f64::max)
    }

    fn angular(&self) -> OneFormId {
        if self.system.family() == Family::Heisenberg {
            OneFormId::PhiHeis
        } else {
            OneFormId::PhiPsl2
        }
    }
}

impl OneForm for StabilizingFormRecipe {
    fn coeffs(&self, x: &DVector<f64>) -> DVector<f64> {
        let sys = &self.system;
        match self.kind {
            RecipeKind::TorusLambda => SystemForm { id: OneFormId::LambdaTorus, system: sys }.coeffs(x),
            RecipeKind::SolLambda => SystemForm { id: OneFormId::LambdaSol, system: sys }.coeffs(x),
            RecipeKind::Contact => SystemForm { id: OneFormId::Psi, system: sys }.coeffs(x),
            RecipeKind::Profiles { .. } => {
                let n = sys.dim();
                let (f, _, g, _) = self.profiles(x[n + 2]);
                let mut a = SystemForm { id: OneFormId::Psi, system: sys }.coeffs(x) * f;
                if g != 0.0 {
                    a += SystemForm { id: self.angular(), system: sys }.coeffs(x) * g;
                }
                a
            }
        }
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let sys = &self.system;
        match self.kind {
            RecipeKind::TorusLambda => SystemForm { id: OneFormId::LambdaTorus, system: sys }.jacobian(x),
            RecipeKind::SolLambda => SystemForm { id: OneFormId::LambdaSol, system: sys }.jacobian(x),
            RecipeKind::Contact => SystemForm { id: OneFormId::Psi, system: sys }.jacobian(x),
            RecipeKind::Profiles { .. } => {
                let n = sys.dim();
                let c = n + 2;
                let (f, df, g, dg) = self.profiles(x[c]);
                let psi = SystemForm { id: OneFormId::Psi, system: sys };
                let mut da = psi.jacobian(x) * f;
                let mut col = da.column(c).into_owned();
                col += psi.coeffs(x) * df;
                if g != 0.0 || dg != 0.0 {
                    let phi = SystemForm { id: self.angular(), system: sys };
                    da += phi.jacobian(x) * g;
                    col += phi.jacobian(x).column(c) * g + phi.coeffs(x) * dg;
                }
                da.set_column(c, &col);
                da
            }
        }
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

/// Builds a stabilizing form for `Sigma_k`.
///
/// Heisenberg: profiles for `k < 1/2`, `psi` for `k > 1/2`. PSL(2,R):
/// profiles for `k in (0, 1/4) U (1/4, 1/2)`, `psi` for `k > 1/2`. Tori and
/// Sol: closed-form forms for every `k > 0`.
pub fn build_profiles(system: &MagneticSystem, k: f64) -> Result<StabilizingFormRecipe> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::PreconditionFailed(format!("energy must be positive, got {k}")));
    }
    let family = system.family();
    let recipe = |kind| Ok(StabilizingFormRecipe { system: system.clone(), k, kind });
    match family {
        Family::Torus => recipe(RecipeKind::TorusLambda),
        Family::Sol => recipe(RecipeKind::SolLambda),
        Family::Heisenberg | Family::Psl2 => {
            if !system.has_identity_metric() {
                return Err(Error::Unsupported { op: "build_profiles", family: family.name() });
            }
            let coef = if family == Family::Heisenberg { 1.0 } else { 2.0 };
            if near(k, 0.5) || near(k, 1.0 / (2.0 * coef)) {
                return Err(Error::NotStable { k, family: family.name() });
            }
            if k > 0.5 {
                return recipe(RecipeKind::Contact);
            }
            let r = (2.0 * k).sqrt();
            let excluded = -1.0 / coef;
            let width = (0.1 * r)
                .min(0.5 * (excluded + 2.0 * k).abs())
                .min(0.5 * (r - 2.0 * k))
                .min(0.5 * (r + 2.0 * k));
            let eps = (1.0 - 2.0 * k * coef).signum();
            recipe(RecipeKind::Profiles { coef, eps, width })
        }
        Family::Nil4 => Err(Error::Unsupported { op: "build_profiles", family: family.name() }),
    }
}

/// Outcome of a stabilizing-form check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub k: f64,
    pub samples: usize,
    pub min_pairing: f64,
    /// Largest `|d lambda(X_H, w)|` over unit tangent vectors `w` to the shell.
    pub max_residual: f64,
    pub worst_pairing_point: Vec<f64>,
    pub worst_residual_point: Vec<f64>,
    pub passed: bool,
}

/// Residual tolerance for `i_{X_H} d lambda` on the shell.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Samples shell points and checks `lambda(X_H) > 0` and `d lambda(X_H, .) = 0`
/// on the tangent space of the shell.
pub fn verify_stabilizing(recipe: &StabilizingFormRecipe, samples: usize) -> StabilityReport {
    verify_form(&recipe.system, recipe.k, recipe, samples, focus_of(recipe), 7)
}

fn focus_of(recipe: &StabilizingFormRecipe) -> Option<(f64, f64)> {
    match recipe.kind {
        RecipeKind::Profiles { width, .. } => Some((-2.0 * recipe.k, width)),
        _ => None,
    }
}

/// Shell points: momenta on the sphere `|p|^2 = 2k` (half of them with the
/// third momentum inside `focus`, when given), random chart positions.
pub fn shell_points(system: &MagneticSystem, k: f64, samples: usize, focus: Option<(f64, f64)>, seed: u64) -> Vec<PhaseState> {
    let n = system.dim();
    let r = (2.0 * k).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|i| {
            let mut p: DVector<f64> = DVector::from_fn(n, |_, _| gaussian(&mut rng));
            p *= r / p.norm();
            if let (Some((center, half)), true) = (focus, i % 2 == 0) {
                if n >= 3 {
                    let pc = (center + half * (2.0 * rng.gen::<f64>() - 1.0)).clamp(-r, r);
                    let rho = (r * r - pc * pc).max(0.0).sqrt();
                    let ang = rng.gen::<f64>() * std::f64::consts::TAU;
                    p[0] = rho * ang.cos();
                    p[1] = rho * ang.sin();
                    p[2] = pc;
                }
            }
            let mut q = DVector::from_fn(n, |_, _| 4.0 * rng.gen::<f64>() - 2.0);
            if system.family() == Family::Psl2 {
                q[1] = (2.0 * rng.gen::<f64>() - 1.0).exp();
            }
            PhaseState::new(q, p)
        })
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generic check of `form` on `Sigma_k` used for recipes and their positive
/// combinations.
pub fn verify_form(
    system: &MagneticSystem,
    k: f64,
    form: &(dyn OneForm + Sync),
    samples: usize,
    focus: Option<(f64, f64)>,
    seed: u64,
) -> StabilityReport {
    let pts = shell_points(system, k, samples, focus, seed);
    let n = system.dim();
    let results = par::map(&pts, |s| {
        let x = s.to_vec();
        let xh = vector_field_vec(&x, system);
        let pairing = form.coeffs(&x).dot(&xh);
        let w = exterior_derivative(form, &x);
        // d lambda(X_H, .) restricted to ker dH
        let mut contraction = w.transpose() * &xh;
        let mut grad = DVector::zeros(2 * n);
        grad.rows_mut(n, n).copy_from(&(system.metric() * &s.p));
        let g2 = grad.norm_squared();
        if g2 > 0.0 {
            let along = contraction.dot(&grad) / g2;
            contraction -= grad * along;
        }
        (pairing, contraction.amax())
    });
    let mut report = StabilityReport {
        k,
        samples,
        min_pairing: f64::INFINITY,
        max_residual: 0.0,
        worst_pairing_point: vec![],
        worst_residual_point: vec![],
        passed: false,
    };
    for (s, (pairing, residual)) in pts.iter().zip(results) {
        if !(pairing >= report.min_pairing) {
            report.min_pairing = pairing;
            report.worst_pairing_point = s.to_vec().iter().copied().collect();
        }
        if !(residual <= report.max_residual) {
            report.max_residual = residual;
            report.worst_residual_point = s.to_vec().iter().copied().collect();
        }
    }
    report.passed = report.min_pairing > 0.0 && report.max_residual < RESIDUAL_TOL;
    report
}

/// Positive combination `sum a_i lambda_i` of forms.
pub struct Combination<'a> {
    pub terms: Vec<(f64, &'a (dyn OneForm + Sync))>,
}

impl OneForm for Combination<'_> {
    fn coeffs(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        for (a, f) in &self.terms {
            out += f.coeffs(x) * *a;
        }
        out
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.len(), x.len());
        for (a, f) in &self.terms {
            out += f.jacobian(x) * *a;
        }
        out
    }
}

/// Contact-type verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Contact,
    NotContact,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactDiagnosis {
    pub system: Family,
    pub k: f64,
    pub verdict: Verdict,
    /// `2k - sqrt(2k)`: the minimum of `psi(X_H)` on the shell.
    pub margin: f64,
    /// Sampled minimum of `psi(X_H)` on the shell.
    pub sampled_min: f64,
    /// Integrals of `psi` per unit period along the two distinguished
    /// orbits `p_alpha = p_beta = 0`, `p_gamma = -sqrt(2k)` and `+sqrt(2k)`.
    pub orbit_integrals: [f64; 2],
    /// Average of `psi(X_H)` over the shell (the Liouville pairing, `2k`).
    pub liouville_pairing: f64,
}

/// Contact diagnosis on Heisenberg and PSL(2,R).
pub fn contact_diagnostic(system: &MagneticSystem, k: f64) -> Result<ContactDiagnosis> {
    let family = system.family();
    if !matches!(family, Family::Heisenberg | Family::Psl2) || !system.has_identity_metric() {
        return Err(Error::Unsupported { op: "contact_diagnostic", family: family.name() });
    }
    if !(k > 0.0) {
        return Err(Error::PreconditionFailed(format!("energy must be positive, got {k}")));
    }
    let r = (2.0 * k).sqrt();
    let margin = 2.0 * k - r;
    let origin = PhaseState::origin(system, DVector::zeros(3));
    let orbit_integral = |pc: f64| -> Result<f64> {
        // psi along the orbit over one unit of time, by the trapezoid rule
        let mut s = PhaseState::new(origin.q.clone(), DVector::from_vec(vec![0.0, 0.0, pc]));
        let steps = 64;
        let mut total = 0.0;
        let mut prev = form_pairing(OneFormId::Psi, &s, system)?;
        for _ in 0..steps {
            s = closed_form_flow(&s, 1.0 / steps as f64, system)?;
            let cur = form_pairing(OneFormId::Psi, &s, system)?;
            total += 0.5 * (prev + cur) / steps as f64;
            prev = cur;
        }
        Ok(total)
    };
    let orbit_integrals = [orbit_integral(-r)?, orbit_integral(r)?];
    // Fibonacci sphere: symmetric in p_gamma, so the mean of p_gamma vanishes
    let m = 2000;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut sum = 0.0;
    let mut sampled_min = f64::INFINITY;
    for i in 0..m {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
        let rho = (1.0 - z * z).sqrt();
        let th = golden * i as f64;
        let p = DVector::from_vec(vec![r * rho * th.cos(), r * rho * th.sin(), r * z]);
        let v = form_pairing(OneFormId::Psi, &PhaseState::new(origin.q.clone(), p), system)?;
        sum += v;
        sampled_min = sampled_min.min(v);
    }
    let verdict = if margin.abs() < 1e-12 {
        Verdict::Boundary
    } else if margin > 0.0 {
        Verdict::Contact
    } else {
        Verdict::NotContact
    };
    Ok(ContactDiagnosis {
        system: family,
        k,
        verdict,
        margin,
        sampled_min: sampled_min.min(orbit_integrals[0]),
        orbit_integrals,
        liouville_pairing: sum / m as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualContactReport {
    pub k: f64,
    pub epsilon: f64,
    pub epsilon_sq: f64,
    pub min_pairing: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Samples `(nu + tau^* delta)(X_H)` along trajectories on the universal
/// cover of PSL(2,R) and compares with `eps^2`, `eps = sqrt(2k) - sqrt(1/2)`.
pub fn virtual_contact_bound(system: &MagneticSystem, k: f64, trajectories: usize) -> Result<VirtualContactReport> {
    if system.family() != Family::Psl2 || !system.has_identity_metric() {
        return Err(Error::Unsupported { op: "virtual_contact_bound", family: system.name() });
    }
    if !(k > 0.25) {
        return Err(Error::PreconditionFailed(format!("virtual contact bound needs k > 1/4, got {k}")));
    }
    let epsilon = (2.0 * k).sqrt() - 0.5f64.sqrt();
    let starts = shell_points(system, k, trajectories, None, 11);
    let steps = 400;
    let dt = 0.05;
    let mins = par::map(&starts, |s0| -> Result<f64> {
        let mut s = s0.clone();
        let mut m = form_pairing(OneFormId::PsiDelta, &s, system)?;
        for _ in 0..steps {
            s = closed_form_flow(&s, dt, system)?;
            m = m.min(form_pairing(OneFormId::PsiDelta, &s, system)?);
        }
        Ok(m)
    });
    let mut min_pairing = f64::INFINITY;
    for m in mins {
        min_pairing = min_pairing.min(m?);
    }
    let epsilon_sq = epsilon * epsilon;
    Ok(VirtualContactReport {
        k,
        epsilon,
        epsilon_sq,
        min_pairing,
        samples: trajectories * (steps + 1),
        passed: min_pairing >= epsilon_sq - 1e-9,
    })
}

/// `phi(E_H)` on the dual of the four-dimensional nilpotent algebra, where
/// `phi = theta + d(x2 x4)/2` is a primitive of the reduced form. Returns
/// the sampled minimum and the largest deviation from
/// `(x1^2 + 2 x2^2 + x3^2)/2`.
pub fn nil4_phi_check(k: f64, samples: usize) -> Result<(f64, f64)> {
    let sys = MagneticSystem::nil4();
    let pts = shell_points(&sys, k, samples, None, 5);
    let mut min = f64::INFINITY;
    let mut dev: f64 = 0.0;
    for s in pts {
        let x = &s.p;
        let e = euler_field(x, &sys);
        let phi = [-0.5 * x[2], 0.0, 0.5 * x[0], x[1] - 0.5 * x[2] * x[2]];
        let v: f64 = (0..4).map(|i| phi[i] * e[i]).sum();
        let closed = 0.5 * (x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2]);
        min = min.min(v);
        dev = dev.max((v - closed).abs());
    }
    Ok((min, dev))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_recipe_shape() {
        let h = MagneticSystem::heisenberg();
        let r = build_profiles(&h, 0.3).unwrap();
        let (f, df, g, _) = r.profiles(-0.6);
        assert_eq!(f, 0.0);
        assert!(df > 0.0);
        assert!(g > 0.0);
        assert!(r.ode_residual(2048) < 1e-12);
        let rep = verify_stabilizing(&r, 2000);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn psl2_recipes() {
        let p = MagneticSystem::psl2();
        let r = build_profiles(&p, 0.3).unwrap();
        let RecipeKind::Profiles { width, .. } = r.kind else { panic!() };
        assert!(r.profiles(-0.6).2 < 0.0);
        assert!((-0.6 - width..-0.6 + width).contains(&-0.5) == false);
        for k in [0.2, 0.3] {
            let rep = verify_stabilizing(&build_profiles(&p, k).unwrap(), 2000);
            assert!(rep.passed, "{k} {rep:?}");
        }
    }

    #[test]
    fn not_stable_levels() {
        let h = MagneticSystem::heisenberg();
        let p = MagneticSystem::psl2();
        assert!(matches!(build_profiles(&h, 0.5), Err(Error::NotStable { .. })));
        assert!(matches!(build_profiles(&p, 0.5), Err(Error::NotStable { .. })));
        assert!(matches!(build_profiles(&p, 0.25), Err(Error::NotStable { .. })));
        assert!(build_profiles(&h, 0.25).is_ok());
        assert_eq!(build_profiles(&h, 0.7).unwrap().kind, RecipeKind::Contact);
    }

    #[test]
    fn recipe_jacobian_matches_finite_differences() {
        let p = MagneticSystem::psl2();
        let r = build_profiles(&p, 0.3).unwrap();
        let RecipeKind::Profiles { width, .. } = r.kind else { panic!() };
        let pc = -0.6 + 0.3 * width;
        let rho = (0.6 - pc * pc).sqrt();
        let x = PhaseState::from_slices(&[0.2, 1.3, 0.4], &[rho * 0.6, rho * 0.8, pc]).to_vec();
        let jac = r.jacobian(&x);
        for c in 0..6 {
            let h = 1e-7;
            let mut up = x.clone();
            let mut dn = x.clone();
            up[c] += h;
            dn[c] -= h;
            let fd = (r.coeffs(&up) - r.coeffs(&dn)) / (2.0 * h);
            assert!((fd - jac.column(c)).amax() < 1e-6, "column {c}");
        }
    }

    #[test]
    fn sol_and_torus() {
        let sol = build_profiles(&MagneticSystem::sol(), 0.7).unwrap();
        let rep = verify_stabilizing(&sol, 500);
        assert!(rep.passed && rep.max_residual < 1e-10, "{rep:?}");
        let j = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let t = build_profiles(&MagneticSystem::torus(j).unwrap(), 0.5).unwrap();
        let rep = verify_stabilizing(&t, 500);
        assert!(rep.passed && rep.max_residual < 1e-12, "{rep:?}");
    }

    #[test]
    fn contact_examples() {
        let h = MagneticSystem::heisenberg();
        let d = contact_diagnostic(&h, 0.6).unwrap();
        assert_eq!(d.verdict, Verdict::Contact);
        assert!((d.margin - (1.2 - 1.2f64.sqrt())).abs() < 1e-15);
        let p = MagneticSystem::psl2();
        let d = contact_diagnostic(&p, 0.32).unwrap();
        assert_eq!(d.verdict, Verdict::NotContact);
        assert!((d.orbit_integrals[0] + 0.16).abs() < 1e-12);
        assert!((d.orbit_integrals[1] - 1.44).abs() < 1e-12);
        assert!((d.liouville_pairing - 0.64).abs() < 1e-12);
        assert_eq!(contact_diagnostic(&h, 0.5).unwrap().verdict, Verdict::Boundary);
        assert!(contact_diagnostic(&MagneticSystem::sol(), 0.5).is_err());
    }

    #[test]
    fn virtual_contact() {
        let p = MagneticSystem::psl2();
        let r = virtual_contact_bound(&p, 0.3, 16).unwrap();
        assert!((r.epsilon - (0.6f64.sqrt() - 0.5f64.sqrt())).abs() < 1e-15);
        assert!(r.passed);
        let r = virtual_contact_bound(&p, 0.5, 4).unwrap();
        assert!((r.epsilon_sq - 0.085_786_437_626_904_94).abs() < 1e-12);
        assert!(matches!(virtual_contact_bound(&p, 0.2, 4), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn nil4_phi() {
        let (min, dev) = nil4_phi_check(0.7, 500).unwrap();
        assert!(min >= 0.0);
        assert!(dev < 1e-14);
    }
}
