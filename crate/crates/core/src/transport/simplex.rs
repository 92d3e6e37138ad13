//! Transportation problems by the network simplex method on the bipartite
//! supply/demand graph.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Optimal flow of a balanced transportation problem.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportSolution<T> {
    pub cost: T,
    /// `(source, sink, amount)` for every basic cell with positive amount, sorted.
    pub flows: Vec<(usize, usize, T)>,
    pub pivots: usize,
}

struct Tree<T> {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<T>,
    in_basis: Vec<bool>,
}

impl<T: Real> Tree<T> {
    /// North-west corner start; always `m + n - 1` cells forming a spanning tree.
    fn north_west(supply: &[T], demand: &[T]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut a = supply.to_vec();
        let mut b = demand.to_vec();
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        let mut in_basis = vec![false; m * n];
        let (mut i, mut j) = (0, 0);
        loop {
            let x = a[i].min(b[j]).max(T::zero());
            cells.push((i, j));
            flow.push(x);
            in_basis[i * n + j] = true;
            a[i] -= x;
            b[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self {
            m,
            n,
            cells,
            flow,
            in_basis,
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (e, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push(e);
            adj[self.m + j].push(e);
        }
        adj
    }

    fn other(&self, e: usize, node: usize) -> usize {
        let (i, j) = self.cells[e];
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    /// Row potentials `u` and column potentials `v` with `u_i + v_j = c_ij` on basic cells.
    fn potentials(&self, adj: &[Vec<usize>], cost: &Matrix<T>) -> (Vec<T>, Vec<T>) {
        let mut pot = vec![T::zero(); self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(node) = queue.pop_front() {
            for &e in &adj[node] {
                let next = self.other(e, node);
                if seen[next] {
                    continue;
                }
                let (i, j) = self.cells[e];
                pot[next] = cost[(i, j)] - pot[node];
                seen[next] = true;
                queue.push_back(next);
            }
        }
        let v = pot.split_off(self.m);
        (pot, v)
    }

    /// Basis edges on the tree path from `from` to `to`, ordered from `to` back to `from`.
    fn path(&self, adj: &[Vec<usize>], from: usize, to: usize) -> Vec<usize> {
        let mut parent_edge = vec![usize::MAX; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &e in &adj[node] {
                let next = self.other(e, node);
                if !seen[next] {
                    seen[next] = true;
                    parent_edge[next] = e;
                    queue.push_back(next);
                }
            }
        }
        let mut out = Vec::new();
        let mut node = to;
        while node != from {
            let e = parent_edge[node];
            out.push(e);
            node = self.other(e, node);
        }
        out
    }
}

/// Solves `min Σ c_ij x_ij` over `x >= 0` with row sums `supply` and column
/// sums `demand`. Both sides must be strictly positive and balanced; the
/// caller removes zero-mass rows and columns.
pub fn solve_transport<T: Real>(supply: &[T], demand: &[T], cost: &Matrix<T>) -> Result<TransportSolution<T>> {
    let (m, n) = (supply.len(), demand.len());
    if cost.rows() != m || cost.cols() != n {
        return Err(Error::Dimension(format!("cost is {}x{}, marginals {m} and {n}", cost.rows(), cost.cols())));
    }
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("transport problem with an empty side".into()));
    }
    if supply.iter().chain(demand).any(|&w| !(w > T::zero()) || !w.is_finite()) {
        return Err(Error::InvalidArgument("transport marginals must be positive and finite".into()));
    }
    if cost.as_slice().iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("transport costs must be finite".into()));
    }
    let total_a: T = supply.iter().copied().sum();
    let total_b: T = demand.iter().copied().sum();
    if (total_a - total_b).abs() > T::tol(1e-10) * total_a.max(T::one()) {
        return Err(Error::InvalidArgument(format!("unbalanced transport: {total_a} vs {total_b}")));
    }

    let mut tree = Tree::north_west(supply, demand);
    let scale = cost.max_abs().max(T::one());
    let eps = T::tol(1e-12) * scale;
    let cells = m * n;
    let block = ((cells as f64).sqrt() as usize).max(16).min(cells);
    let max_pivots = 20 * cells + 1000;
    let mut cursor = 0usize;
    let mut pivots = 0usize;
    let mut degenerate_run = 0usize;
    let bland_after = 10 * (m + n);

    loop {
        let adj = tree.adjacency();
        let (u, v) = tree.potentials(&adj, cost);
        let reduced = |c: usize| {
            let (i, j) = (c / n, c % n);
            cost[(i, j)] - u[i] - v[j]
        };
        let entering = if degenerate_run >= bland_after {
            (0..cells).find(|&c| !tree.in_basis[c] && reduced(c) < -eps)
        } else {
            let mut found = None;
            let mut scanned = 0;
            while scanned < cells && found.is_none() {
                let mut best = -eps;
                for _ in 0..block.min(cells - scanned) {
                    let c = cursor;
                    cursor = (cursor + 1) % cells;
                    scanned += 1;
                    if tree.in_basis[c] {
                        continue;
                    }
                    let r = reduced(c);
                    if r < best {
                        best = r;
                        found = Some(c);
                    }
                }
            }
            found
        };
        let Some(c) = entering else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numerical(format!("network simplex exceeded {max_pivots} pivots")));
        }
        let (ei, ej) = (c / n, c % n);
        // Cycle: entering cell (+), then the tree path from its column back to its row, alternating - / +.
        let path = tree.path(&adj, ei, m + ej);
        let mut theta = T::infinity();
        let mut leave = usize::MAX;
        for (k, &e) in path.iter().enumerate() {
            if k % 2 == 0 && (tree.flow[e] < theta || (tree.flow[e] == theta && e < leave)) {
                theta = tree.flow[e];
                leave = e;
            }
        }
        for (k, &e) in path.iter().enumerate() {
            if k % 2 == 0 {
                tree.flow[e] -= theta;
            } else {
                tree.flow[e] += theta;
            }
        }
        tree.flow[leave] = T::zero();
        let (li, lj) = tree.cells[leave];
        tree.in_basis[li * n + lj] = false;
        tree.in_basis[c] = true;
        tree.cells[leave] = (ei, ej);
        tree.flow[leave] = theta;
        degenerate_run = if theta > T::zero() { 0 } else { degenerate_run + 1 };
    }

    let mut flows: Vec<(usize, usize, T)> = tree
        .cells
        .iter()
        .zip(&tree.flow)
        .filter(|(_, &x)| x > T::zero())
        .map(|(&(i, j), &x)| (i, j, x))
        .collect();
    flows.sort_by_key(|f| (f.0, f.1));
    let total = flows.iter().map(|&(i, j, x)| x * cost[(i, j)]).sum();
    Ok(TransportSolution {
        cost: total,
        flows,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::assignment::solve_assignment;
    use proptest::prelude::*;

    #[test]
    fn textbook_instance() {
        // Classic 3x4 instance with optimum 743.
        let cost = Matrix::from_rows(&[
            vec![19.0_f64, 30.0, 50.0, 10.0],
            vec![70.0, 30.0, 40.0, 60.0],
            vec![40.0, 8.0, 70.0, 20.0],
        ])
        .unwrap();
        let sol = solve_transport(&[7.0, 9.0, 18.0], &[5.0, 8.0, 7.0, 14.0], &cost).unwrap();
        assert!((sol.cost - 743.0).abs() < 1e-9, "{}", sol.cost);
    }

    #[test]
    fn single_cell() {
        let cost = Matrix::from_rows(&[vec![2.5]]).unwrap();
        let sol = solve_transport(&[1.0], &[1.0], &cost).unwrap();
        assert_eq!(sol.cost, 2.5);
        assert_eq!(sol.flows, vec![(0, 0, 1.0)]);
    }

    #[test]
    fn rejects_bad_input() {
        let cost = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(solve_transport(&[1.0], &[0.5, 0.4], &cost).is_err());
        assert!(solve_transport(&[1.0], &[1.0, 0.0], &cost).is_err());
        assert!(solve_transport(&[1.0], &[1.0], &cost).is_err());
    }

    proptest! {
        // Uniform marginals of equal size: Birkhoff says an optimal plan is a
        // permutation, so the optimum is the assignment optimum divided by k.
        #[test]
        fn uniform_marginals_match_assignment(k in 1usize..7, vals in proptest::collection::vec(0.0f64..10.0, 49)) {
            let rows: Vec<Vec<f64>> = (0..k).map(|i| vals[i * 7..i * 7 + k].to_vec()).collect();
            let cost = Matrix::from_rows(&rows).unwrap();
            let w = vec![1.0 / k as f64; k];
            let sol = solve_transport(&w, &w, &cost).unwrap();
            let (a, _) = solve_assignment(&cost).unwrap();
            prop_assert!((sol.cost - a / k as f64).abs() < 1e-10);
        }

        #[test]
        fn marginals_are_respected(
            m in 1usize..6,
            n in 1usize..6,
            a in proptest::collection::vec(0.1f64..1.0, 6),
            b in proptest::collection::vec(0.1f64..1.0, 6),
            c in proptest::collection::vec(0.0f64..5.0, 36),
        ) {
            let sa: f64 = a[..m].iter().sum();
            let sb: f64 = b[..n].iter().sum();
            let supply: Vec<f64> = a[..m].iter().map(|x| x / sa).collect();
            let demand: Vec<f64> = b[..n].iter().map(|x| x / sb).collect();
            let rows: Vec<Vec<f64>> = (0..m).map(|i| c[i * 6..i * 6 + n].to_vec()).collect();
            let cost = Matrix::from_rows(&rows).unwrap();
            let sol = solve_transport(&supply, &demand, &cost).unwrap();
            let mut rs = vec![0.0; m];
            let mut cs = vec![0.0; n];
            for &(i, j, x) in &sol.flows {
                prop_assert!(x >= 0.0);
                rs[i] += x;
                cs[j] += x;
            }
            for i in 0..m { prop_assert!((rs[i] - supply[i]).abs() < 1e-12); }
            for j in 0..n { prop_assert!((cs[j] - demand[j]).abs() < 1e-12); }
            // no cheaper plan among the "all to cheapest" bound
            let lower: f64 = (0..m).map(|i| supply[i] * (0..n).map(|j| cost[(i, j)]).fold(f64::INFINITY, f64::min)).sum();
            prop_assert!(sol.cost >= lower - 1e-12);
        }
    }
}
