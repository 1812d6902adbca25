//! Small dense-matrix helpers shared by the filter and chain code.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative eigenvalue slack accepted before a matrix counts as indefinite.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-8;

pub fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

fn psd_slack(x: &DMatrix<f64>) -> f64 {
    PSD_TOLERANCE * (1.0 + x.norm())
}

pub fn min_eigenvalue(x: &DMatrix<f64>) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    symmetrize(x)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_psd(x: &DMatrix<f64>) -> bool {
    min_eigenvalue(x) >= -psd_slack(x)
}

/// Symmetrize `x`, reject it if an eigenvalue falls below the slack, and clip
/// small negative eigenvalues to zero.
pub fn clean_psd(x: DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let sym = symmetrize(&x);
    let slack = psd_slack(&sym);
    let eig = sym.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= 0.0 || sym.is_empty() {
        return Ok(sym);
    }
    if min < -slack {
        return Err(Error::NotPsd {
            name,
            min_eigenvalue: min,
        });
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    Ok(symmetrize(&rebuilt))
}

/// Symmetric square root of a PSD matrix.
pub fn psd_sqrt(x: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(x).symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

pub fn numerical_rank(x: &DMatrix<f64>) -> usize {
    if x.is_empty() {
        return 0;
    }
    let sv = x.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}

/// `true` when `big - small` is PSD up to the standard slack.
pub fn psd_leq(small: &DMatrix<f64>, big: &DMatrix<f64>) -> bool {
    let diff = big - small;
    min_eigenvalue(&diff) >= -PSD_TOLERANCE * (1.0 + big.norm().max(small.norm()))
}

pub(crate) fn check_square(x: &DMatrix<f64>, n: usize, context: &'static str) -> Result<()> {
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: (n, n),
            actual: x.shape(),
        });
    }
    Ok(())
}
