use crate::error::{ApetError, Result};
use crate::matrix::{GramSolver, TokenMatrix};

/// Relative Frobenius error of reconstructing every token from the retained
/// rows: `|x - x'|_F / |x|_F`.
pub fn reconstruction_quality(x: &TokenMatrix, retained: &[usize], ridge_rel: f64) -> Result<f64> {
    if retained.is_empty() {
        return Err(ApetError::InvalidBudget("retained set must not be empty".into()));
    }
    let total = x.frobenius_norm();
    if total == 0.0 {
        return Err(ApetError::ZeroMatrix);
    }
    let basis = x.select_rows(retained)?;
    let solver = GramSolver::new(&basis, ridge_rel)?;
    let mut coef = vec![0.0; retained.len()];
    let mut resid = vec![0.0; x.d()];
    let mut err2 = 0.0;
    for v in x.rows() {
        solver.solve_into(v, &mut coef);
        solver.residual_into(v, &coef, &mut resid);
        err2 += crate::matrix::dot(&resid, &resid);
    }
    Ok(err2.sqrt() / total)
}

/// Fraction of `truth` found in `retained`.
pub fn outlier_recall(retained: &[usize], truth: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(ApetError::InvalidArgument("outlier truth set is empty".into()));
    }
    let hits = truth.iter().filter(|t| retained.contains(t)).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recall_counts() {
        assert_eq!(outlier_recall(&[1, 2, 3, 9], &[2, 9]).unwrap(), 1.0);
        assert_eq!(outlier_recall(&[0, 1], &[2, 3]).unwrap(), 0.0);
        let truth: Vec<usize> = (0..20).collect();
        let retained: Vec<usize> = (10..40).collect();
        assert_eq!(outlier_recall(&retained, &truth).unwrap(), 0.5);
        assert!(outlier_recall(&[1], &[]).is_err());
    }

    #[test]
    fn self_representation() {
        let x = TokenMatrix::from_rows(&[[1.0, 2.0, 0.0], [0.0, 1.0, 1.0], [3.0, -1.0, 2.0]]).unwrap();
        assert!(reconstruction_quality(&x, &[0, 1, 2], 0.0).unwrap() <= 1e-8);
    }

    #[test]
    fn degenerate_inputs() {
        let x = TokenMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(
            reconstruction_quality(&x, &[0], 0.0),
            Err(ApetError::SingularGram { .. })
        ));
        let z = TokenMatrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!(matches!(reconstruction_quality(&z, &[0], 0.0), Err(ApetError::ZeroMatrix)));
        assert!(reconstruction_quality(&x, &[], 0.0).is_err());
    }
}
