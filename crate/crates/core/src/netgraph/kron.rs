//! Kron reduction of weighted Laplacians.

use crate::error::{Error, Result};
use crate::linalg::*;

/// Checks symmetry, zero row sums and non-positive off-diagonals.
pub fn check_laplacian(l: &Mat) -> Result<()> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(Error::Dimension("Laplacian must be square".into()));
    }
    let tol = 1e-12 * (1.0 + max_abs(l));
    let asym = max_abs(&(l - l.transpose()));
    if asym > tol {
        return Err(Error::Structure(format!("Laplacian not symmetric (residual {asym:.3e})")));
    }
    for i in 0..n {
        let s: f64 = l.row(i).iter().sum();
        if s.abs() > tol {
            return Err(Error::Structure(format!("Laplacian row {i} sums to {s:.3e}")));
        }
        for j in 0..n {
            if i != j && l[(i, j)] > tol {
                return Err(Error::Structure(format!("positive off-diagonal entry at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Schur complement onto `boundary`, in the order given.
pub fn kron_reduce(l: &Mat, boundary: &[usize]) -> Result<Mat> {
    check_laplacian(l)?;
    let n = l.nrows();
    let mut seen = vec![false; n];
    for &b in boundary {
        if b >= n || seen[b] {
            return Err(Error::Dimension(format!("bad boundary node {b}")));
        }
        seen[b] = true;
    }
    let interior: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
    let pick = |rows: &[usize], cols: &[usize]| Mat::from_fn(rows.len(), cols.len(), |i, j| l[(rows[i], cols[j])]);
    let l11 = pick(boundary, boundary);
    if interior.is_empty() {
        return Ok(l11);
    }
    let l12 = pick(boundary, &interior);
    let l22 = pick(&interior, &interior);
    let x = solve(&l22, &l12.transpose())
        .map_err(|_| Error::Structure("interior block singular: an interior node is cut off from the boundary".into()))?;
    Ok(sym(&(l11 - &l12 * x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Mat {
        from_rows(&[&[1.0, -1.0, 0.0], &[-1.0, 3.0, -2.0], &[0.0, -2.0, 2.0]])
    }

    #[test]
    fn series_conductances_combine() {
        let y = kron_reduce(&path3(), &[0, 2]).unwrap();
        // 1 and 2 in series: 2/3
        let g = 2.0 / 3.0;
        assert!(max_abs(&(y - from_rows(&[&[g, -g], &[-g, g]]))) < 1e-14);
    }

    #[test]
    fn rejects_non_laplacian() {
        assert!(kron_reduce(&eye(2), &[0]).is_err());
    }
}
