//! Small dense linear algebra on [`Scalar`] entries.

use crate::error::{Error, Result};
use crate::jets::Scalar;

/// Solves `a x = b` by Gaussian elimination with partial pivoting on the
/// constant terms. Intended for symmetric positive-definite `a`.
pub fn solve<S: Scalar>(a: &[Vec<S>], b: &[S]) -> Result<Vec<S>> {
    let n = b.len();
    let mut m: Vec<Vec<S>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].value().abs().total_cmp(&m[j][col].value().abs()))
            .expect("non-empty pivot range");
        if m[piv][col].value().abs() < 1e-300 {
            return Err(Error::NumericalIntegrity("singular matrix in jet solve".into()));
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let inv = m[col][col].constant_like(1.0).try_div(&m[col][col])?;
        for r in col + 1..n {
            let f = m[r][col].clone() * inv.clone();
            for c in col + 1..n {
                m[r][c] = m[r][c].clone() - f.clone() * m[col][c].clone();
            }
            rhs[r] = rhs[r].clone() - f * rhs[col].clone();
        }
    }
    let mut x: Vec<S> = rhs.clone();
    for r in (0..n).rev() {
        let mut acc = rhs[r].clone();
        for c in r + 1..n {
            acc = acc - m[r][c].clone() * x[c].clone();
        }
        x[r] = acc.try_div(&m[r][r])?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{lift, JetSpec};

    #[test]
    fn solves_f64_system() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let x = solve(&a, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jet_solve_differentiates_inverse() {
        // a(t) = [[2+t, 0],[0, 1]], x = a^{-1} e1 = 1/(2+t), dx/dt = -1/4 at t=0
        let spec = JetSpec::new(2, 0, 2).unwrap();
        let v = lift(&[0.0, 0.0, 0.0, 0.0], spec).unwrap();
        let t = v[2].clone();
        let one = t.constant_like(1.0);
        let zero = t.constant_like(0.0);
        let a = vec![vec![t.clone() + 2.0, zero.clone()], vec![zero.clone(), one.clone()]];
        let x = solve(&a, &[one.clone(), zero]).unwrap();
        assert!((x[0].value() - 0.5).abs() < 1e-15);
        assert!((x[0].dy(&[0]).unwrap() + 0.25).abs() < 1e-14);
        assert!((x[0].dy(&[0, 0]).unwrap() - 0.25).abs() < 1e-14);
    }
}
