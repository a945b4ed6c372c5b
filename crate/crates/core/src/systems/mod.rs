//! The magnetic systems: metric, magnetic form, charts on the universal
//! cover, the phase-space vector field and its exact derivative.

mod flows;
mod forms;

pub use flows::closed_form_flow;
pub use forms::{exterior_derivative, form_pairing, lagrangian_action, CurveSamples, OneForm, OneFormId, QuadratureResult, SystemForm};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{euler_field, euler_field_jacobian, Family, GroupElement, StructureConstants};

/// A left-invariant magnetic system on one of the model groups.
///
/// `metric` acts on momenta: `H(p) = 1/2 p^T metric p`. `sigma` holds
/// `sigma_e(X_i, X_j)` in the left-invariant frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MagneticSystem {
    family: Family,
    metric: DMatrix<f64>,
    sigma: DMatrix<f64>,
    sc: StructureConstants,
}

impl MagneticSystem {
    /// Heisenberg group with `sigma = -dx ^ dy` and the standard metric.
    pub fn heisenberg() -> Self {
        let mut sigma = DMatrix::zeros(3, 3);
        sigma[(0, 1)] = -1.0;
        sigma[(1, 0)] = 1.0;
        Self::builtin(Family::Heisenberg, sigma)
    }

    /// Universal cover of PSL(2,R) as the unit tangent bundle of the upper
    /// half plane, with `sigma = dx ^ dy / y^2`.
    pub fn psl2() -> Self {
        let mut sigma = DMatrix::zeros(3, 3);
        sigma[(0, 1)] = 1.0;
        sigma[(1, 0)] = -1.0;
        Self::builtin(Family::Psl2, sigma)
    }

    /// Sol with `sigma = -dy0 ^ dy1`.
    pub fn sol() -> Self {
        let mut sigma = DMatrix::zeros(3, 3);
        sigma[(0, 1)] = -1.0;
        sigma[(1, 0)] = 1.0;
        Self::builtin(Family::Sol, sigma)
    }

    /// The four-dimensional nilpotent group with `[X1, X2] = X3` and
    /// `sigma = -e1 ^ e3 - e2 ^ e4`.
    pub fn nil4() -> Self {
        let mut sigma = DMatrix::zeros(4, 4);
        sigma[(0, 2)] = -1.0;
        sigma[(2, 0)] = 1.0;
        sigma[(1, 3)] = -1.0;
        sigma[(3, 1)] = 1.0;
        Self::builtin(Family::Nil4, sigma)
    }

    /// Flat torus `T^n` with constant magnetic form `sigma_ij = J_ij`.
    pub fn torus(j: DMatrix<f64>) -> Result<Self> {
        let n = j.nrows();
        Self::new(Family::Torus, DMatrix::identity(n, n), j)
    }

    /// The planar torus with `J = [[0, 1], [-1, 0]]`.
    pub fn torus2() -> Self {
        Self::torus(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).expect("valid")
    }

    fn builtin(family: Family, sigma: DMatrix<f64>) -> Self {
        let n = sigma.nrows();
        Self::new(family, DMatrix::identity(n, n), sigma).expect("built-in systems are valid")
    }

    /// General constructor. Checks that the metric is symmetric positive
    /// definite and that `sigma` is antisymmetric and closed.
    pub fn new(family: Family, metric: DMatrix<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let n = sigma.nrows();
        let expected = match family {
            Family::Torus => n,
            Family::Nil4 => 4,
            _ => 3,
        };
        if n == 0 || n != expected {
            return Err(Error::DimensionMismatch { expected, got: n });
        }
        if sigma.ncols() != n || metric.nrows() != n || metric.ncols() != n {
            return Err(Error::InvalidSystem("metric and sigma must be square of the group dimension".into()));
        }
        if !metric.iter().chain(sigma.iter()).all(|x| x.is_finite()) {
            return Err(Error::InvalidSystem("non-finite entries".into()));
        }
        if (&metric - metric.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidSystem("metric is not symmetric".into()));
        }
        if metric.clone().cholesky().is_none() {
            return Err(Error::InvalidSystem("metric is not positive definite".into()));
        }
        if (&sigma + sigma.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidSystem("sigma is not antisymmetric".into()));
        }
        let sc = StructureConstants::for_family(family, n);
        let sys = Self { family, metric, sigma, sc };
        let d = sys.closedness_defect();
        if d > 1e-12 {
            return Err(Error::InvalidSystem(format!("sigma is not closed (defect {d:.3e})")));
        }
        Ok(sys)
    }

    /// Same system with a different (SPD) metric on momenta.
    pub fn with_metric(&self, metric: DMatrix<f64>) -> Result<Self> {
        Self::new(self.family, metric, self.sigma.clone())
    }

    /// Largest value of `sigma([Xi,Xj],Xk) + cyclic` over basis triples.
    pub fn closedness_defect(&self) -> f64 {
        let n = self.dim();
        let sc = &self.sc;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        s += sc.get(i, j, m) * self.sigma[(m, k)]
                            + sc.get(j, k, m) * self.sigma[(m, i)]
                            + sc.get(k, i, m) * self.sigma[(m, j)];
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn name(&self) -> &'static str {
        self.family.name()
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// The map `J` with `<u, J v> = sigma(u, v)` (tori only).
    pub fn j(&self) -> Option<&DMatrix<f64>> {
        (self.family == Family::Torus).then_some(&self.sigma)
    }

    pub fn structure_constants(&self) -> &StructureConstants {
        &self.sc
    }

    pub fn has_identity_metric(&self) -> bool {
        let n = self.dim();
        (&self.metric - DMatrix::<f64>::identity(n, n)).amax() == 0.0
    }

    /// Chart-component matrix of the left-invariant frame: column `i` holds `X_i(q)`.
    pub fn frame(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut f = DMatrix::identity(n, n);
        match self.family {
            Family::Torus => {}
            Family::Heisenberg => f[(2, 1)] = q[0],
            Family::Psl2 => {
                let (y, th) = (q[1], q[2]);
                let (s, c) = th.sin_cos();
                f = DMatrix::from_row_slice(3, 3, &[y * c, -y * s, 0.0, y * s, y * c, 0.0, -c, s, 1.0]);
            }
            Family::Sol => {
                f[(0, 0)] = q[2].exp();
                f[(1, 1)] = (-q[2]).exp();
            }
            Family::Nil4 => f[(2, 1)] = q[0],
        }
        f
    }

    /// Inverse of [`Self::frame`]: row `i` is the dual coframe element `e^i`.
    pub fn coframe(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut e = DMatrix::identity(n, n);
        match self.family {
            Family::Torus => {}
            Family::Heisenberg | Family::Nil4 => e[(2, 1)] = -q[0],
            Family::Psl2 => {
                let (y, th) = (q[1], q[2]);
                let (s, c) = th.sin_cos();
                e = DMatrix::from_row_slice(3, 3, &[c / y, s / y, 0.0, -s / y, c / y, 0.0, 1.0 / y, 0.0, 1.0]);
            }
            Family::Sol => {
                e[(0, 0)] = (-q[2]).exp();
                e[(1, 1)] = q[2].exp();
            }
        }
        e
    }

    /// `d frame / d q_c` for each chart coordinate `c`.
    pub fn frame_derivative(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let n = self.dim();
        let mut out = vec![DMatrix::zeros(n, n); n];
        match self.family {
            Family::Torus => {}
            Family::Heisenberg | Family::Nil4 => out[0][(2, 1)] = 1.0,
            Family::Psl2 => {
                let (y, th) = (q[1], q[2]);
                let (s, c) = th.sin_cos();
                out[1] = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 0.0]);
                out[2] = DMatrix::from_row_slice(3, 3, &[-y * s, -y * c, 0.0, y * c, -y * s, 0.0, s, c, 0.0]);
            }
            Family::Sol => {
                out[2][(0, 0)] = q[2].exp();
                out[2][(1, 1)] = -(-q[2]).exp();
            }
        }
        out
    }

    /// Chart components of the standard primitive of `sigma` on the cover,
    /// together with its Jacobian `d theta_j / d q_c`.
    ///
    /// Heisenberg: `dz - x dy`; PSL(2,R): `dx/y + dtheta`; Sol: `-y0 dy1`;
    /// torus: `-1/2 J q`; Nil4: `c da + a^2/2 db - b dd`.
    pub fn primitive(&self, q: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let mut th = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, n);
        match self.family {
            Family::Torus => {
                th = &self.sigma * q * -0.5;
                jac = &self.sigma * -0.5;
            }
            Family::Heisenberg => {
                th[1] = -q[0];
                th[2] = 1.0;
                jac[(1, 0)] = -1.0;
            }
            Family::Psl2 => return psl2_primitive(q, 1.0),
            Family::Sol => {
                th[1] = -q[0];
                jac[(1, 0)] = -1.0;
            }
            Family::Nil4 => {
                th[0] = q[2];
                th[1] = 0.5 * q[0] * q[0];
                th[3] = -q[1];
                jac[(0, 2)] = 1.0;
                jac[(1, 0)] = q[0];
                jac[(3, 1)] = -1.0;
            }
        }
        (th, jac)
    }

    /// Casimir of the twisted bracket, where one exists: `p_gamma` for
    /// Heisenberg and PSL(2,R), `nu + alpha0 alpha1` for Sol. Tori have the
    /// kernel component of `J^T p` instead (see [`Self::conserved_momenta`]);
    /// Nil4 has a non-degenerate bracket and no Casimir.
    pub fn casimir(&self, p: &DVector<f64>) -> Option<f64> {
        match self.family {
            Family::Heisenberg | Family::Psl2 => Some(p[2]),
            Family::Sol => Some(p[2] + p[0] * p[1]),
            Family::Torus => {
                let (_, kernel) = torus_projections(&self.sigma);
                let v = kernel * p;
                Some(v.norm())
            }
            Family::Nil4 => None,
        }
    }
}

/// `(P2, P1)`: orthogonal projections onto `Im J` and `ker J`.
pub(crate) fn torus_projections(j: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = j.nrows();
    let p2 = &pseudo_inverse(j) * j;
    let p1 = DMatrix::identity(n, n) - &p2;
    (p2, p1)
}

/// SVD pseudo-inverse with rank threshold `1e-10 * |J|`.
pub(crate) fn pseudo_inverse(j: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = j.norm();
    if norm == 0.0 {
        return DMatrix::zeros(j.ncols(), j.nrows());
    }
    j.clone().svd(true, true).pseudo_inverse(1e-10 * norm).expect("svd with u and v")
}

pub(crate) fn psl2_primitive(q: &DVector<f64>, vertical: f64) -> (DVector<f64>, DMatrix<f64>) {
    let y = q[1];
    let th = DVector::from_vec(vec![1.0 / y, 0.0, vertical]);
    let mut jac = DMatrix::zeros(3, 3);
    jac[(0, 1)] = -1.0 / (y * y);
    (th, jac)
}

/// A point of the phase space in the left trivialization: chart
/// coordinates `q` on the universal cover and momentum `p` in the dual frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    #[serde(with = "plain_vector")]
    pub q: DVector<f64>,
    #[serde(with = "plain_vector")]
    pub p: DVector<f64>,
}

/// Vectors as flat JSON arrays rather than nalgebra's storage layout.
pub(crate) mod plain_vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Vec::<f64>::deserialize(d).map(DVector::from_vec)
    }
}

impl PhaseState {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Self {
        Self { q, p }
    }

    pub fn from_slices(q: &[f64], p: &[f64]) -> Self {
        Self { q: DVector::from_row_slice(q), p: DVector::from_row_slice(p) }
    }

    /// The base point of the system's standard chart (`y = 1` on PSL(2,R)).
    pub fn origin(system: &MagneticSystem, p: DVector<f64>) -> Self {
        let mut q = DVector::zeros(system.dim());
        if system.family() == Family::Psl2 {
            q[1] = 1.0;
        }
        Self { q, p }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// `(q, p)` stacked.
    pub fn to_vec(&self) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(2 * n, |i, _| if i < n { self.q[i] } else { self.p[i - n] })
    }

    pub fn from_vec(x: &DVector<f64>) -> Self {
        let n = x.len() / 2;
        Self { q: x.rows(0, n).into_owned(), p: x.rows(n, n).into_owned() }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }

    pub fn is_on_shell(&self, system: &MagneticSystem, k: f64, tol: f64) -> bool {
        (hamiltonian(&self.p, system) - k).abs() < tol
    }

    pub fn group_element(&self, family: Family) -> GroupElement {
        GroupElement::from_chart(family, &self.q)
    }

    pub fn check(&self, system: &MagneticSystem) -> Result<()> {
        let n = system.dim();
        if self.q.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.q.len() });
        }
        if self.p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.p.len() });
        }
        if !self.is_finite() {
            return Err(Error::NonFinite { t: 0.0, detail: "initial state".into() });
        }
        if system.family() == Family::Psl2 && self.q[1] <= 0.0 {
            return Err(Error::PreconditionFailed("PSL(2,R) chart requires y > 0".into()));
        }
        Ok(())
    }
}

/// Tangent vector to the phase space at a [`PhaseState`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTangent {
    pub dq: DVector<f64>,
    pub dp: DVector<f64>,
}

impl PhaseTangent {
    pub fn to_vec(&self) -> DVector<f64> {
        let n = self.dq.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.dq[i] } else { self.dp[i - n] })
    }
}

/// `H = 1/2 p^T M p`.
pub fn hamiltonian(p: &DVector<f64>, system: &MagneticSystem) -> f64 {
    0.5 * p.dot(&(system.metric() * p))
}

/// The Hamiltonian vector field: `q' = F(q) M p`, `p' = E_H(p)`.
pub fn vector_field(s: &PhaseState, system: &MagneticSystem) -> PhaseTangent {
    let v = system.metric() * &s.p;
    PhaseTangent { dq: system.frame(&s.q) * v, dp: euler_field(&s.p, system) }
}

/// Stacked form of [`vector_field`] on `(q, p)`.
pub fn vector_field_vec(x: &DVector<f64>, system: &MagneticSystem) -> DVector<f64> {
    vector_field(&PhaseState::from_vec(x), system).to_vec()
}

/// Exact Jacobian of the stacked vector field.
pub fn vector_field_jacobian(x: &DVector<f64>, system: &MagneticSystem) -> DMatrix<f64> {
    let n = system.dim();
    let s = PhaseState::from_vec(x);
    let v = system.metric() * &s.p;
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for (c, df) in system.frame_derivative(&s.q).iter().enumerate() {
        jac.view_mut((0, c), (n, 1)).copy_from(&(df * &v));
    }
    jac.view_mut((0, n), (n, n)).copy_from(&(system.frame(&s.q) * system.metric()));
    jac.view_mut((n, n), (n, n)).copy_from(&euler_field_jacobian(&s.p, system));
    jac
}

/// Squared left-invariant length of a phase tangent vector at `q`:
/// `|E(q) dq|^2 + |dp|^2`.
pub fn invariant_norm_sq(q: &DVector<f64>, v: &DVector<f64>, system: &MagneticSystem) -> f64 {
    let n = system.dim();
    let dq = v.rows(0, n).into_owned();
    let w = system.coframe(q) * dq;
    w.norm_squared() + v.rows(n, n).norm_squared()
}

/// The symplectic form `omega = d nu + tau^* sigma` in the chart, as a
/// `2n x 2n` antisymmetric matrix at `x`.
pub fn omega_matrix(x: &DVector<f64>, system: &MagneticSystem) -> DMatrix<f64> {
    let n = system.dim();
    let s = PhaseState::from_vec(x);
    let e = system.coframe(&s.q);
    let sc = system.structure_constants();
    // algebra part sigma(v,w) - mu([v,w]) in the left frame
    let b = DMatrix::from_fn(n, n, |i, j| {
        let mut v = system.sigma()[(i, j)];
        for k in 0..n {
            v -= sc.get(i, j, k) * s.p[k];
        }
        v
    });
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    w.view_mut((0, 0), (n, n)).copy_from(&(e.transpose() * b * &e));
    // xi(w) - eta(v) with v = E dq
    w.view_mut((n, 0), (n, n)).copy_from(&e);
    w.view_mut((0, n), (n, n)).copy_from(&(-e.transpose()));
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::euler_field;

    fn all_systems() -> Vec<MagneticSystem> {
        let j3 = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        vec![
            MagneticSystem::heisenberg(),
            MagneticSystem::psl2(),
            MagneticSystem::sol(),
            MagneticSystem::nil4(),
            MagneticSystem::torus2(),
            MagneticSystem::torus(j3).unwrap(),
        ]
    }

    fn sample_state(sys: &MagneticSystem, seed: f64) -> PhaseState {
        let n = sys.dim();
        let mut q = DVector::from_fn(n, |i, _| (seed * (i as f64 + 1.3)).sin());
        if sys.family() == Family::Psl2 {
            q[1] = 1.0 + 0.5 * q[1].abs();
        }
        let p = DVector::from_fn(n, |i, _| (seed * 0.7 + i as f64).cos() * 0.6);
        PhaseState::new(q, p)
    }

    #[test]
    fn hamiltonian_examples() {
        let h = MagneticSystem::heisenberg();
        assert_eq!(hamiltonian(&DVector::from_vec(vec![0.0, 0.0, 1.0]), &h), 0.5);
        assert_eq!(hamiltonian(&DVector::zeros(3), &h), 0.0);
        // delta = dx/y + dtheta/2 in the left coframe at (x, y, theta)
        let p = MagneticSystem::psl2();
        let q = DVector::from_vec(vec![0.3, 2.0, 1.1]);
        let (delta, _) = psl2_primitive(&q, 0.5);
        let mom = p.frame(&q).transpose() * delta;
        assert!((hamiltonian(&mom, &p) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_systems() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(MagneticSystem::torus(bad).is_err());
        let h = MagneticSystem::heisenberg();
        let neg = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0]));
        assert!(h.with_metric(neg).is_err());
        // e3 ^ e4 is not closed on Nil4
        let mut s = DMatrix::zeros(4, 4);
        s[(2, 3)] = 1.0;
        s[(3, 2)] = -1.0;
        assert!(MagneticSystem::new(Family::Nil4, DMatrix::identity(4, 4), s).is_err());
    }

    #[test]
    fn builtins_are_closed() {
        for sys in all_systems() {
            assert_eq!(sys.closedness_defect(), 0.0, "{}", sys.name());
        }
    }

    #[test]
    fn vector_field_examples() {
        let h = MagneticSystem::heisenberg();
        let s = PhaseState::from_slices(&[0.0, 0.0, 0.0], &[0.5, 0.0, -0.5]);
        let v = vector_field(&s, &h);
        assert_eq!(v.dq, DVector::from_vec(vec![0.5, 0.0, -0.5]));
        assert_eq!(v.dp, DVector::from_vec(vec![0.0, 0.25, 0.0]));

        let t = MagneticSystem::torus2();
        let s = PhaseState::from_slices(&[0.2, 0.1], &[0.3, -0.7]);
        let v = vector_field(&s, &t);
        assert_eq!(v.dq, s.p);
        assert_eq!(v.dp, t.j().unwrap() * &s.p);

        let p = MagneticSystem::psl2();
        let s = PhaseState::from_slices(&[0.4, 1.0, 0.0], &[0.3, -0.2, 0.9]);
        let v = vector_field(&s, &p);
        assert!((v.dq[0] - 0.3).abs() < 1e-15);
        assert!((v.dq[1] + 0.2).abs() < 1e-15);
        assert!((v.dq[2] - (0.9 - 0.3)).abs() < 1e-15);
    }

    #[test]
    fn momentum_block_is_euler_field() {
        for sys in all_systems() {
            let s = sample_state(&sys, 0.37);
            assert_eq!(vector_field(&s, &sys).dp, euler_field(&s.p, &sys));
        }
    }

    #[test]
    fn coframe_inverts_frame() {
        for sys in all_systems() {
            let s = sample_state(&sys, 1.9);
            let prod = sys.frame(&s.q) * sys.coframe(&s.q);
            assert!((prod - DMatrix::identity(sys.dim(), sys.dim())).amax() < 1e-14);
        }
    }

    #[test]
    fn frame_derivative_matches_finite_differences() {
        for sys in all_systems() {
            let s = sample_state(&sys, 0.61);
            let d = sys.frame_derivative(&s.q);
            for c in 0..sys.dim() {
                let h = 1e-6;
                let mut up = s.q.clone();
                let mut dn = s.q.clone();
                up[c] += h;
                dn[c] -= h;
                let fd = (sys.frame(&up) - sys.frame(&dn)) / (2.0 * h);
                assert!((fd - &d[c]).amax() < 1e-8, "{} coordinate {c}", sys.name());
            }
        }
    }

    #[test]
    fn frame_realises_structure_constants() {
        // [X_i, X_j] as vector fields equals sum_k c_ij^k X_k
        for sys in all_systems() {
            let s = sample_state(&sys, 2.3);
            let f = sys.frame(&s.q);
            let d = sys.frame_derivative(&s.q);
            let n = sys.dim();
            let sc = sys.structure_constants();
            for i in 0..n {
                for j in 0..n {
                    let mut lie = DVector::zeros(n);
                    for c in 0..n {
                        lie += d[c].column(j) * f[(c, i)] - d[c].column(i) * f[(c, j)];
                    }
                    let mut expected = DVector::zeros(n);
                    for k in 0..n {
                        expected += f.column(k) * sc.get(i, j, k);
                    }
                    assert!((lie - expected).amax() < 1e-13, "{} [{i},{j}]", sys.name());
                }
            }
        }
    }

    #[test]
    fn primitive_differential_is_sigma() {
        for sys in all_systems() {
            let s = sample_state(&sys, 0.9);
            let (_, jac) = sys.primitive(&s.q);
            // d theta(u, v) = v^T Jac u - u^T Jac v on chart vectors
            let dth = jac.transpose() - &jac;
            let f = sys.frame(&s.q);
            let sigma = f.transpose() * dth * &f;
            assert!((sigma - sys.sigma()).amax() < 1e-13, "{}", sys.name());
        }
    }

    #[test]
    fn primitive_jacobian_matches_finite_differences() {
        for sys in all_systems() {
            let s = sample_state(&sys, 1.4);
            let (_, jac) = sys.primitive(&s.q);
            for c in 0..sys.dim() {
                let h = 1e-6;
                let mut up = s.q.clone();
                let mut dn = s.q.clone();
                up[c] += h;
                dn[c] -= h;
                let fd = (sys.primitive(&up).0 - sys.primitive(&dn).0) / (2.0 * h);
                assert!((fd - jac.column(c)).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn hamiltonian_vector_field_contracts_omega_to_minus_dh() {
        for sys in all_systems() {
            let s = sample_state(&sys, 0.77);
            let x = s.to_vec();
            let w = omega_matrix(&x, &sys);
            assert!((&w + w.transpose()).amax() < 1e-14);
            let xh = vector_field_vec(&x, &sys);
            let n = sys.dim();
            let mut dh = DVector::zeros(2 * n);
            dh.rows_mut(n, n).copy_from(&(sys.metric() * &s.p));
            // omega(X_H, W) = X_H^T w W = -dH(W)
            let lhs = w.transpose() * xh;
            assert!((lhs + dh).amax() < 1e-13, "{}", sys.name());
        }
    }

    #[test]
    fn vector_field_jacobian_matches_finite_differences() {
        for sys in all_systems() {
            let x = sample_state(&sys, 0.55).to_vec();
            let jac = vector_field_jacobian(&x, &sys);
            for c in 0..x.len() {
                let h = 1e-6;
                let mut up = x.clone();
                let mut dn = x.clone();
                up[c] += h;
                dn[c] -= h;
                let fd = (vector_field_vec(&up, &sys) - vector_field_vec(&dn, &sys)) / (2.0 * h);
                assert!((fd - jac.column(c)).amax() < 1e-8, "{}", sys.name());
            }
        }
    }

    #[test]
    fn casimirs_are_annihilated() {
        for sys in [MagneticSystem::heisenberg(), MagneticSystem::psl2(), MagneticSystem::sol()] {
            let s = sample_state(&sys, 0.21);
            let e = euler_field(&s.p, &sys);
            let h = 1e-6;
            let up = &s.p + &e * h;
            let dn = &s.p - &e * h;
            let rate = (sys.casimir(&up).unwrap() - sys.casimir(&dn).unwrap()) / (2.0 * h);
            assert!(rate.abs() < 1e-9, "{}", sys.name());
        }
        assert!(MagneticSystem::nil4().casimir(&DVector::zeros(4)).is_none());
    }
}
