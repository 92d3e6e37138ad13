use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Optimal square assignment by the shortest-augmenting-path Hungarian method.
///
/// Returns the minimal total cost and `matching[row] = col`. Ties resolve to the
/// lowest column index scanned, so the matching is reproducible.
pub fn solve_assignment<T: Real>(cost: &Matrix<T>) -> Result<(T, Vec<usize>)> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(Error::Dimension(format!("assignment needs a square cost matrix, got {}x{}", n, cost.cols())));
    }
    if cost.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("assignment costs must be finite".into()));
    }
    if n == 0 {
        return Ok((T::zero(), Vec::new()));
    }
    // 1-based potentials; p[j] = row matched to column j (0 = free).
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut matching = vec![0usize; n];
    for j in 1..=n {
        matching[p[j] - 1] = j - 1;
    }
    let total = matching.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
    Ok((total, matching))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(cost: &Matrix<f64>) -> f64 {
        fn go(cost: &Matrix<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.rows() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost.cols() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[(row, j)] + go(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost.cols()])
    }

    #[test]
    fn small_known_case() {
        let c = Matrix::from_rows(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]]).unwrap();
        let (cost, m) = solve_assignment(&c).unwrap();
        assert_eq!(cost, 5.0);
        assert_eq!(m, vec![1, 0, 2]);
    }

    #[test]
    fn empty_and_errors() {
        assert_eq!(solve_assignment(&Matrix::<f64>::zeros(0, 0)).unwrap().0, 0.0);
        assert!(solve_assignment(&Matrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn ties_pick_identity() {
        let c = Matrix::<f64>::zeros(3, 3);
        assert_eq!(solve_assignment(&c).unwrap().1, vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..6, vals in proptest::collection::vec(-5.0f64..5.0, 36)) {
            let rows: Vec<Vec<f64>> = (0..n).map(|i| vals[i * 6..i * 6 + n].to_vec()).collect();
            let c = Matrix::from_rows(&rows).unwrap();
            let (cost, m) = solve_assignment(&c).unwrap();
            prop_assert!((cost - brute_force(&c)).abs() < 1e-10);
            let mut seen = m.clone();
            seen.sort();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
    }
}
