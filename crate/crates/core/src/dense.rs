//! Dense assembly of linear operators by column probing, for the small-size
//! oracles that cross-check the frequency-domain solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::signal::{Shape, Signal};

/// Assembles the matrix of a linear map by probing it with unit vectors.
pub fn matrix_of(
    op: impl Fn(&Signal) -> Result<Signal>,
    domain: Shape,
) -> Result<DMatrix<f64>> {
    let n = domain.len();
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = op(&Signal::from_shape(domain, e)?)?;
        columns.push(DVector::from_vec(col.values().to_vec()));
    }
    let rows = columns[0].len();
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::Shape("operator output length varies across probes".into()));
    }
    Ok(DMatrix::from_columns(&columns))
}

/// Direct LU solve of `a x = b`.
pub fn solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let lu = a.clone().lu();
    let rhs = DVector::from_vec(b.to_vec());
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("dense system is singular".into()))?;
    Ok(x.iter().cloned().collect())
}
