//! Small dense complex helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Dim, Matrix, Matrix3, RawStorage};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type CMat3 = Matrix3<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn complexify(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Solves `a x = b` by partial-pivoting LU. `None` if `a` is numerically
/// singular (smallest pivot below `1e-13` of the largest).
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    let lu = a.clone().lu();
    let u = lu.u();
    let pivots = u.diagonal().map(|z| z.norm());
    let max = pivots.max();
    if max == 0.0 || pivots.min() <= 1e-13 * max {
        return None;
    }
    lu.solve(b)
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    solve(a, &CMat::identity(a.nrows(), a.ncols()))
}

pub fn eigenvalues(a: &CMat) -> Vec<C64> {
    let ev = a.clone().schur().eigenvalues().expect("complex Schur form is triangular");
    ev.iter().copied().collect()
}

/// Eigenvalues sorted by real part, then imaginary part.
pub fn sorted_eigenvalues(a: &CMat) -> Vec<C64> {
    let mut ev = eigenvalues(a);
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    ev
}

pub fn expm(a: &CMat) -> CMat {
    a.exp()
}

/// Largest entry modulus.
pub fn max_abs<R: Dim, Cc: Dim, S: RawStorage<C64, R, Cc>>(a: &Matrix<C64, R, Cc, S>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn to_dyn3(m: &CMat3) -> CMat {
    CMat::from_fn(3, 3, |r, c| m[(r, c)])
}

pub fn from_dyn3(m: &CMat) -> CMat3 {
    CMat3::from_fn(|r, c| m[(r, c)])
}

/// Column-major Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_triangular() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(3.0, 0.0), C64::default(), c(-1.0, 0.5)]);
        let ev = sorted_eigenvalues(&a);
        assert!((ev[0] - c(-1.0, 0.5)).norm() < 1e-12);
        assert!((ev[1] - c(1.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn expm_of_diagonal() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(-1.0, 2.0), c(0.0, -1.0)]));
        let e = expm(&a);
        assert!((e[(0, 0)] - c(-1.0, 2.0).exp()).norm() < 1e-13);
        assert!((e[(1, 1)] - c(0.0, -1.0).exp()).norm() < 1e-13);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn singular_solve_is_none() {
        let a = CMat::from_element(2, 2, c(1.0, 0.0));
        assert!(inverse(&a).is_none());
        let b = CMat::identity(2, 2) * c(0.0, 2.0);
        let inv = inverse(&b).unwrap();
        assert!((inv[(0, 0)] - c(0.0, -0.5)).norm() < 1e-15);
    }
}
