//! Lie-algebraic kernel: structure constants, brackets, the twisted
//! Lie–Poisson bracket on the dual algebra, its Euler vector field, and
//! exponentials in the matrix models of the built-in groups.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::expm;
use crate::systems::MagneticSystem;

/// Coordinates of a covector in the left-invariant dual coframe.
pub type MomentumVector = DVector<f64>;
/// Coordinates of a Lie algebra element in the left-invariant frame.
pub type AlgebraVector = DVector<f64>;

/// The homogeneous model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Torus,
    Heisenberg,
    Psl2,
    Sol,
    Nil4,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Torus => "torus",
            Family::Heisenberg => "heisenberg",
            Family::Psl2 => "psl2",
            Family::Sol => "sol",
            Family::Nil4 => "nil4",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Coefficients `c[i][j][k]` of `[X_i, X_j] = sum_k c[i][j][k] X_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    c: Vec<f64>,
}

impl StructureConstants {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, c: vec![0.0; dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }

    /// Sets `[X_i, X_j]_k = value` and the antisymmetric partner.
    pub fn set_bracket(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let d = self.dim;
        self.c[(i * d + j) * d + k] = value;
        self.c[(j * d + i) * d + k] = -value;
    }

    /// Structure constants of the built-in families in their standard frames.
    ///
    /// * Heisenberg `(X, Y, Z)`: `[X, Y] = Z`.
    /// * PSL(2,R) `(X, Y, V)`: `[X, Y] = -V`, `[V, X] = Y`, `[V, Y] = -X`.
    /// * Sol `(X0, X1, U)` with `X0 = e^u d/dy0`, `X1 = e^-u d/dy1`, `U = d/du`:
    ///   `[U, X0] = X0`, `[U, X1] = -X1`.
    /// * Nil4 `(X1..X4)`: `[X1, X2] = X3`.
    /// * Torus: abelian.
    pub fn for_family(family: Family, dim: usize) -> Self {
        let mut sc = Self::zeros(dim);
        match family {
            Family::Torus => {}
            Family::Heisenberg => sc.set_bracket(0, 1, 2, 1.0),
            Family::Psl2 => {
                sc.set_bracket(0, 1, 2, -1.0);
                sc.set_bracket(2, 0, 1, 1.0);
                sc.set_bracket(2, 1, 0, -1.0);
            }
            Family::Sol => {
                sc.set_bracket(2, 0, 0, 1.0);
                sc.set_bracket(2, 1, 1, -1.0);
            }
            Family::Nil4 => sc.set_bracket(0, 1, 2, 1.0),
        }
        sc
    }

    pub fn is_antisymmetric(&self) -> bool {
        let d = self.dim;
        (0..d).all(|i| (0..d).all(|j| (0..d).all(|k| self.get(i, j, k) == -self.get(j, i, k))))
    }

    /// Largest coefficient of the Jacobiator over all basis triples.
    pub fn jacobi_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    for m in 0..d {
                        // [[Xi,Xj],Xl] + [[Xj,Xl],Xi] + [[Xl,Xi],Xj]
                        let mut s = 0.0;
                        for k in 0..d {
                            s += self.get(i, j, k) * self.get(k, l, m)
                                + self.get(j, l, k) * self.get(k, i, m)
                                + self.get(l, i, k) * self.get(k, j, m);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

/// `[x, y]` in the frame of `sc`.
pub fn bracket(x: &AlgebraVector, y: &AlgebraVector, sc: &StructureConstants) -> Result<AlgebraVector> {
    let d = sc.dim();
    for v in [x, y] {
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
    }
    let mut out = DVector::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let xy = x[i] * y[j];
            if xy == 0.0 {
                continue;
            }
            for k in 0..d {
                out[k] += xy * sc.get(i, j, k);
            }
        }
    }
    Ok(out)
}

/// Twisted bracket of two coordinate functions on the dual algebra:
/// `{p_i, p_j}(mu) = mu([X_i, X_j]) - sigma_e(X_i, X_j)`.
pub fn poisson_bracket(i: usize, j: usize, mu: &MomentumVector, system: &MagneticSystem) -> Result<f64> {
    let d = system.dim();
    for idx in [i, j] {
        if idx >= d {
            return Err(Error::IndexOutOfRange { index: idx, dim: d });
        }
    }
    if mu.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: mu.len() });
    }
    Ok(coordinate_bracket(i, j, mu, system))
}

#[inline]
pub(crate) fn coordinate_bracket(i: usize, j: usize, mu: &MomentumVector, system: &MagneticSystem) -> f64 {
    let sc = system.structure_constants();
    let mut s = -system.sigma()[(i, j)];
    for k in 0..sc.dim() {
        s += sc.get(i, j, k) * mu[k];
    }
    s
}

/// Euler vector field of a function with differential `df` (an algebra element):
/// `E_f(mu)(w) = mu([df, w]) - sigma_e(df, w)`.
pub fn euler_field_of(df: &AlgebraVector, mu: &MomentumVector, system: &MagneticSystem) -> MomentumVector {
    let d = system.dim();
    DVector::from_fn(d, |i, _| (0..d).map(|j| df[j] * coordinate_bracket(j, i, mu, system)).sum())
}

/// Euler vector field of the system Hamiltonian `H = 1/2 mu^T M mu`.
pub fn euler_field(mu: &MomentumVector, system: &MagneticSystem) -> MomentumVector {
    let dh = system.metric() * mu;
    euler_field_of(&dh, mu, system)
}

/// Derivative of the Euler field of `H` at `mu` (exact, quadratic field).
pub fn euler_field_jacobian(mu: &MomentumVector, system: &MagneticSystem) -> DMatrix<f64> {
    let d = system.dim();
    let m = system.metric();
    let dh = m * mu;
    let sc = system.structure_constants();
    DMatrix::from_fn(d, d, |i, l| {
        let mut s = 0.0;
        for j in 0..d {
            s += m[(j, l)] * coordinate_bracket(j, i, mu, system) + dh[j] * sc.get(j, i, l);
        }
        s
    })
}

/// Matrix model of an algebra element (see [`GroupElement`]).
pub fn algebra_matrix(family: Family, x: &AlgebraVector) -> DMatrix<f64> {
    match family {
        Family::Torus => DMatrix::from_diagonal(x),
        Family::Heisenberg => {
            let mut m = DMatrix::zeros(3, 3);
            m[(0, 1)] = x[0];
            m[(1, 2)] = x[1];
            m[(0, 2)] = x[2];
            m
        }
        Family::Psl2 => {
            let (a, b, v) = (x[0], x[1], x[2]);
            DMatrix::from_row_slice(2, 2, &[0.5 * a, -0.5 * b + 0.5 * v, -0.5 * b - 0.5 * v, -0.5 * a])
        }
        Family::Sol => {
            let mut m = DMatrix::zeros(3, 3);
            m[(0, 2)] = x[0];
            m[(1, 2)] = x[1];
            m[(0, 0)] = x[2];
            m[(1, 1)] = -x[2];
            m
        }
        Family::Nil4 => {
            let mut m = DMatrix::zeros(5, 5);
            m[(0, 1)] = x[0];
            m[(1, 2)] = x[1];
            m[(0, 2)] = x[2];
            m[(3, 4)] = x[3];
            m
        }
    }
}

/// Closed-form exponential of a traceless 2x2 matrix.
///
/// Uses `cosh`/`cos` branches by the sign of `-det`, with a power series in
/// `-det` near the parabolic boundary.
pub fn sl2_exp(m: &Matrix2<f64>) -> Matrix2<f64> {
    let s2 = -m.determinant();
    let (c, s) = if s2.abs() < 1e-3 {
        // cosh(s) and sinh(s)/s as series in s^2, valid for either sign
        let c = 1.0 + s2 / 2.0 + s2 * s2 / 24.0 + s2.powi(3) / 720.0 + s2.powi(4) / 40_320.0;
        let s = 1.0 + s2 / 6.0 + s2 * s2 / 120.0 + s2.powi(3) / 5040.0 + s2.powi(4) / 362_880.0;
        (c, s)
    } else if s2 > 0.0 {
        let r = s2.sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        let w = (-s2).sqrt();
        (w.cos(), w.sin() / w)
    };
    Matrix2::identity() * c + m * s
}

/// A point of one of the model groups.
///
/// Tori are stored as points of the universal cover `R^n`. The other
/// families use their matrix models: unipotent 3x3 (Heisenberg), 2x2 with
/// unit determinant (PSL(2,R), compared up to sign), the 3x3 Sol matrix,
/// and a 5x5 block model of Heisenberg x R for Nil4.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    Point(DVector<f64>),
    Matrix { family: Family, m: DMatrix<f64> },
}

impl GroupElement {
    pub fn identity(family: Family, dim: usize) -> Self {
        match family {
            Family::Torus => GroupElement::Point(DVector::zeros(dim)),
            f => {
                let size = matrix_size(f);
                GroupElement::Matrix { family: f, m: DMatrix::identity(size, size) }
            }
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            GroupElement::Point(_) => Some(Family::Torus),
            GroupElement::Matrix { family, .. } => Some(*family),
        }
    }

    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement> {
        match (self, other) {
            (GroupElement::Point(a), GroupElement::Point(b)) => {
                if a.len() != b.len() {
                    return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
                }
                Ok(GroupElement::Point(a + b))
            }
            (GroupElement::Matrix { family: f, m: a }, GroupElement::Matrix { family: g, m: b }) if f == g => {
                Ok(GroupElement::Matrix { family: *f, m: a * b })
            }
            _ => Err(Error::Degenerate("group elements from different families".into())),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Point(a) => GroupElement::Point(-a),
            GroupElement::Matrix { family, m } => GroupElement::Matrix {
                family: *family,
                m: m.clone().try_inverse().expect("group matrices are invertible"),
            },
        }
    }

    /// Membership check for the stated group, to `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        match self {
            GroupElement::Point(p) => p.iter().all(|x| x.is_finite()),
            GroupElement::Matrix { family, m } => {
                if !m.iter().all(|x| x.is_finite()) {
                    return false;
                }
                match family {
                    Family::Psl2 => m.nrows() == 2 && (m.determinant() - 1.0).abs() < tol,
                    Family::Heisenberg => {
                        m.nrows() == 3
                            && (0..3).all(|i| (m[(i, i)] - 1.0).abs() < tol)
                            && (0..3).all(|i| (0..i).all(|j| m[(i, j)].abs() < tol))
                    }
                    Family::Sol => {
                        m.nrows() == 3
                            && (m[(0, 0)] * m[(1, 1)] - 1.0).abs() < tol * m[(0, 0)].abs().max(1.0)
                            && m[(0, 1)].abs() < tol
                            && m[(1, 0)].abs() < tol
                            && m[(2, 0)].abs() < tol
                            && m[(2, 1)].abs() < tol
                            && (m[(2, 2)] - 1.0).abs() < tol
                    }
                    Family::Nil4 => m.nrows() == 5 && (m.determinant() - 1.0).abs() < tol,
                    Family::Torus => false,
                }
            }
        }
    }

    /// Distance-like comparison; PSL(2,R) elements compare up to global sign.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        match (self, other) {
            (GroupElement::Point(a), GroupElement::Point(b)) => (a - b).amax(),
            (GroupElement::Matrix { family, m: a }, GroupElement::Matrix { m: b, .. }) => {
                let plus = (a - b).amax();
                if *family == Family::Psl2 {
                    plus.min((a + b).amax())
                } else {
                    plus
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// The group element at chart coordinates `q`.
    ///
    /// PSL(2,R) uses the unit-tangent-bundle chart `(x, y, theta)` of the upper
    /// half plane, realised as `N(x) A(y) K((theta - pi/2)/2)`.
    pub fn from_chart(family: Family, q: &DVector<f64>) -> GroupElement {
        match family {
            Family::Torus => GroupElement::Point(q.clone()),
            Family::Heisenberg => {
                let m = DMatrix::from_row_slice(3, 3, &[1.0, q[0], q[2], 0.0, 1.0, q[1], 0.0, 0.0, 1.0]);
                GroupElement::Matrix { family, m }
            }
            Family::Psl2 => {
                let (x, y, th) = (q[0], q[1], q[2]);
                let sy = y.sqrt();
                let na = Matrix2::new(sy, x / sy, 0.0, 1.0 / sy);
                let phi = 0.5 * (th - std::f64::consts::FRAC_PI_2);
                let k = Matrix2::new(phi.cos(), phi.sin(), -phi.sin(), phi.cos());
                let g = na * k;
                GroupElement::Matrix { family, m: DMatrix::from_row_slice(2, 2, &[g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]]) }
            }
            Family::Sol => {
                let (y0, y1, u) = (q[0], q[1], q[2]);
                let m = DMatrix::from_row_slice(3, 3, &[u.exp(), 0.0, y0, 0.0, (-u).exp(), y1, 0.0, 0.0, 1.0]);
                GroupElement::Matrix { family, m }
            }
            Family::Nil4 => {
                let mut m = DMatrix::identity(5, 5);
                m[(0, 1)] = q[0];
                m[(1, 2)] = q[1];
                m[(0, 2)] = q[2];
                m[(3, 4)] = q[3];
                GroupElement::Matrix { family, m }
            }
        }
    }

    /// Chart coordinates of this element. For PSL(2,R) the angle is the lift
    /// closest to `theta_ref`.
    pub fn to_chart(&self, theta_ref: f64) -> DVector<f64> {
        match self {
            GroupElement::Point(p) => p.clone(),
            GroupElement::Matrix { family, m } => match family {
                Family::Heisenberg => DVector::from_vec(vec![m[(0, 1)], m[(1, 2)], m[(0, 2)]]),
                Family::Psl2 => {
                    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
                    let r2 = c * c + d * d;
                    let y = 1.0 / r2;
                    let x = (a * c + b * d) / r2;
                    let phi = (-c).atan2(d);
                    let th = std::f64::consts::FRAC_PI_2 + 2.0 * phi;
                    DVector::from_vec(vec![x, y, nearest_lift(th, theta_ref)])
                }
                Family::Sol => DVector::from_vec(vec![m[(0, 2)], m[(1, 2)], m[(0, 0)].ln()]),
                Family::Nil4 => DVector::from_vec(vec![m[(0, 1)], m[(1, 2)], m[(0, 2)], m[(3, 4)]]),
                Family::Torus => unreachable!("tori use points"),
            },
        }
    }
}

/// The representative of `theta (mod 2 pi)` nearest to `reference`.
pub fn nearest_lift(theta: f64, reference: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    theta + tau * ((reference - theta) / tau).round()
}

fn matrix_size(family: Family) -> usize {
    match family {
        Family::Psl2 => 2,
        Family::Heisenberg | Family::Sol => 3,
        Family::Nil4 => 5,
        Family::Torus => 0,
    }
}

/// One-parameter subgroup `exp(t x)`.
pub fn exp_map(family: Family, x: &AlgebraVector, t: f64) -> GroupElement {
    match family {
        Family::Torus => GroupElement::Point(x * t),
        Family::Psl2 => {
            let a = algebra_matrix(family, x) * t;
            let e = sl2_exp(&Matrix2::new(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]));
            GroupElement::Matrix { family, m: DMatrix::from_row_slice(2, 2, &[e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]]) }
        }
        Family::Heisenberg | Family::Nil4 => {
            // nilpotent of order 3
            let a = algebra_matrix(family, x) * t;
            let n = a.nrows();
            let m = DMatrix::identity(n, n) + &a + &a * &a * 0.5;
            GroupElement::Matrix { family, m }
        }
        Family::Sol => GroupElement::Matrix { family, m: expm(&(algebra_matrix(family, x) * t)) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::MagneticSystem;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn psl2_bracket_x_y_is_minus_v() {
        let sc = StructureConstants::for_family(Family::Psl2, 3);
        let r = bracket(&v(&[1.0, 0.0, 0.0]), &v(&[0.0, 1.0, 0.0]), &sc).unwrap();
        assert_eq!(r, v(&[0.0, 0.0, -1.0]));
    }

    #[test]
    fn torus_is_abelian() {
        let sc = StructureConstants::for_family(Family::Torus, 2);
        let r = bracket(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]), &sc).unwrap();
        assert_eq!(r, v(&[0.0, 0.0]));
    }

    #[test]
    fn nil4_only_bracket() {
        let sc = StructureConstants::for_family(Family::Nil4, 4);
        let r = bracket(&v(&[1.0, 0.0, 0.0, 0.0]), &v(&[0.0, 1.0, 0.0, 0.0]), &sc).unwrap();
        assert_eq!(r, v(&[0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn bracket_rejects_dimension_mismatch() {
        let sc = StructureConstants::for_family(Family::Heisenberg, 3);
        assert!(matches!(
            bracket(&v(&[1.0, 0.0]), &v(&[0.0, 1.0, 0.0]), &sc),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn structure_constants_are_lie() {
        for (f, d) in [(Family::Heisenberg, 3), (Family::Psl2, 3), (Family::Sol, 3), (Family::Nil4, 4), (Family::Torus, 3)] {
            let sc = StructureConstants::for_family(f, d);
            assert!(sc.is_antisymmetric());
            assert_eq!(sc.jacobi_residual(), 0.0, "{f}");
        }
    }

    #[test]
    fn structure_constants_match_matrix_commutators() {
        for (f, d) in [(Family::Heisenberg, 3), (Family::Psl2, 3), (Family::Sol, 3), (Family::Nil4, 4)] {
            let sc = StructureConstants::for_family(f, d);
            for i in 0..d {
                for j in 0..d {
                    let ei = DVector::from_fn(d, |k, _| if k == i { 1.0 } else { 0.0 });
                    let ej = DVector::from_fn(d, |k, _| if k == j { 1.0 } else { 0.0 });
                    let a = algebra_matrix(f, &ei);
                    let b = algebra_matrix(f, &ej);
                    let comm = &a * &b - &b * &a;
                    let expected = algebra_matrix(f, &bracket(&ei, &ej, &sc).unwrap());
                    assert!((comm - expected).amax() < 1e-15, "{f} [{i},{j}]");
                }
            }
        }
    }

    #[test]
    fn heisenberg_and_psl2_bracket_tables() {
        let h = MagneticSystem::heisenberg();
        let mu = v(&[0.3, -0.2, 0.7]);
        assert!((poisson_bracket(0, 1, &mu, &h).unwrap() - (1.0 + 0.7)).abs() < 1e-15);
        assert_eq!(poisson_bracket(0, 2, &mu, &h).unwrap(), 0.0);
        let p = MagneticSystem::psl2();
        assert!((poisson_bracket(0, 1, &mu, &p).unwrap() - (-0.7 - 1.0)).abs() < 1e-15);
        assert!((poisson_bracket(0, 2, &mu, &p).unwrap() - 0.2).abs() < 1e-15);
        assert!((poisson_bracket(1, 2, &mu, &p).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(poisson_bracket(0, 3, &mu, &p), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn torus_bracket_is_minus_sigma() {
        let j = DMatrix::from_row_slice(3, 3, &[0.0, 1.5, -0.5, -1.5, 0.0, 2.0, 0.5, -2.0, 0.0]);
        let t = MagneticSystem::torus(j.clone()).unwrap();
        let mu = v(&[0.1, 0.2, 0.3]);
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(poisson_bracket(i, k, &mu, &t).unwrap(), -j[(i, k)]);
            }
        }
    }

    #[test]
    fn euler_field_examples() {
        let e = euler_field(&v(&[0.5, 0.0, -0.5]), &MagneticSystem::heisenberg());
        assert!((e - v(&[0.0, 0.25, 0.0])).amax() < 1e-15);
        let e = euler_field(&v(&[0.5, 0.0, -0.25]), &MagneticSystem::psl2());
        assert!((e - v(&[0.0, -0.25, 0.0])).amax() < 1e-15);
        let e = euler_field(&v(&[1.0, 0.0, 0.0]), &MagneticSystem::sol());
        assert!((e - v(&[0.0, 1.0, -1.0])).amax() < 1e-15);
    }

    #[test]
    fn nil4_euler_field_matches_closed_form() {
        let sys = MagneticSystem::nil4();
        let x = v(&[0.3, -0.7, 1.1, 0.4]);
        let e = euler_field(&x, &sys);
        let expected = v(&[-x[1] * x[2] - x[2], x[0] * x[2] - x[3], x[0], x[1]]);
        assert!((e - expected).amax() < 1e-15);
    }

    #[test]
    fn euler_jacobian_matches_finite_differences() {
        for sys in [MagneticSystem::heisenberg(), MagneticSystem::psl2(), MagneticSystem::sol(), MagneticSystem::nil4()] {
            let d = sys.dim();
            let mu = DVector::from_fn(d, |i, _| 0.3 - 0.17 * i as f64);
            let jac = euler_field_jacobian(&mu, &sys);
            let h = 1e-6;
            for l in 0..d {
                let mut up = mu.clone();
                let mut dn = mu.clone();
                up[l] += h;
                dn[l] -= h;
                let col = (euler_field(&up, &sys) - euler_field(&dn, &sys)) / (2.0 * h);
                for i in 0..d {
                    assert!((col[i] - jac[(i, l)]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn exp_identity_and_rotation() {
        let id = exp_map(Family::Psl2, &v(&[0.0, 0.0, 0.0]), 3.0);
        assert!(id.distance(&GroupElement::identity(Family::Psl2, 3)) < 1e-15);
        let mu = 0.5;
        for t in [0.3, 2.0, 7.5] {
            let g = exp_map(Family::Psl2, &v(&[0.0, 0.0, mu]), t);
            let a = mu * t / 2.0;
            let q = GroupElement::Matrix {
                family: Family::Psl2,
                m: DMatrix::from_row_slice(2, 2, &[a.cos(), a.sin(), -a.sin(), a.cos()]),
            };
            assert!(g.distance(&q) < 1e-14);
        }
    }

    #[test]
    fn hyperbolic_d_trace() {
        // d = A X - (1 + C) V at k = 0.5, C = -0.5
        let (k, c) = (0.5f64, -0.5f64);
        let a = (2.0 * k - c * c).sqrt();
        let g = exp_map(Family::Psl2, &v(&[a, 0.0, -(1.0 + c)]), 1.0);
        let GroupElement::Matrix { m, .. } = g else { unreachable!() };
        // eigenvalues of d are +-1/2 sqrt(A^2 - (1+C)^2) = +-0.353553...
        let nu = 0.5 * (a * a - (1.0 + c) * (1.0 + c)).sqrt();
        assert!((nu - 0.353_553_390_593_273_8).abs() < 1e-15);
        assert!((m.trace() - 2.0 * nu.cosh()).abs() < 1e-13);
        assert!((m.trace() - 2.126_307_520_807_541).abs() < 1e-12);
    }

    #[test]
    fn sl2_closed_form_matches_series_across_boundary() {
        for (a, b, c) in [(0.3, 1.0, -0.2), (0.0, 1.0, -1.0), (0.5, 0.25, -1.0), (1e-7, 1.0, 3e-7), (2.0, 0.1, 0.3), (0.0, 1.0, 0.0)] {
            let m = Matrix2::new(a, b, c, -a);
            let closed = sl2_exp(&m);
            let series = expm(&DMatrix::from_row_slice(2, 2, &[a, b, c, -a]));
            for i in 0..2 {
                for j in 0..2 {
                    assert!((closed[(i, j)] - series[(i, j)]).abs() < 1e-12, "{a} {b} {c}");
                }
            }
        }
    }

    #[test]
    fn chart_round_trip_psl2() {
        let q = v(&[0.4, 1.7, 5.9]);
        let g = GroupElement::from_chart(Family::Psl2, &q);
        assert!(g.is_valid(1e-12));
        let back = g.to_chart(5.5);
        assert!((back - q).amax() < 1e-12);
        // theta + 2 pi is the same PSL element, opposite SL sign
        let q2 = v(&[0.4, 1.7, 5.9 + 2.0 * std::f64::consts::PI]);
        assert!(GroupElement::from_chart(Family::Psl2, &q2).distance(&g) < 1e-12);
    }
}
