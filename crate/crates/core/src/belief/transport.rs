//! Exact transportation problem between two small discrete measures.
//!
//! Transportation simplex: north-west corner start, potentials `u_i + v_j =
//! c_ij` on the basic spanning tree, entering cell by most negative reduced
//! cost, then the pivot along the unique tree cycle. After a fixed number of
//! pivots the entering and leaving choices switch to lowest-index rules so
//! degenerate cycling cannot persist.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const REDUCED_COST_TOLERANCE: f64 = 1e-13;

/// Optimal transport plan and its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    /// `(row, column, mass)` for every basic cell.
    pub flows: Vec<(usize, usize, f64)>,
}

/// Minimizes `sum x_ij c_ij` subject to row sums `supply` and column sums
/// `demand`. `cost` is row-major, `supply.len() x demand.len()`. Both marginals
/// must be nonnegative with (numerically) equal totals.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || cost.len() != m * n {
        return Err(Error::param("cost", "shape must be supply.len() x demand.len()"));
    }
    if supply.iter().chain(demand).any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::param("marginals", "must be finite and nonnegative"));
    }
    let mut tableau = Tableau::north_west(supply, demand, cost);
    let dantzig_pivots = 20 * (m + n) * (m + n);
    let max_pivots = dantzig_pivots + 200 * m * n * (m + n);
    for pivot in 0.. {
        if pivot >= max_pivots {
            return Err(Error::TransportFailed);
        }
        let bland = pivot >= dantzig_pivots;
        let (u, v) = tableau.potentials();
        let Some(entering) = tableau.entering(&u, &v, bland) else { break };
        tableau.pivot(entering, bland);
    }
    let cost_total = tableau.basis.iter().map(|&(i, j, x)| x * cost[i * n + j]).sum();
    Ok(TransportPlan { cost: cost_total, flows: tableau.basis })
}

struct Tableau<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    basis: Vec<(usize, usize, f64)>,
}

impl<'a> Tableau<'a> {
    fn north_west(supply: &[f64], demand: &[f64], cost: &'a [f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut basis = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = s[i].min(d[j]);
            s[i] -= x;
            d[j] -= x;
            basis.push((i, j, x));
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        // absorb rounding residue of unequal totals into the last cell
        if let Some(last) = basis.last_mut() {
            last.2 += s[m - 1].min(d[n - 1]).max(0.0);
        }
        Tableau { m, n, cost, basis }
    }

    /// Adjacency of the basic tree: rows are nodes `0..m`, columns `m..m+n`.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (cell, &(i, j, _)) in self.basis.iter().enumerate() {
            adj[i].push((self.m + j, cell));
            adj[self.m + j].push((i, cell));
        }
        adj
    }

    fn potentials(&self) -> (Vec<f64>, Vec<f64>) {
        let adj = self.adjacency();
        let mut pot = vec![f64::NAN; self.m + self.n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &(next, cell) in &adj[node] {
                if pot[next].is_nan() {
                    let (i, j, _) = self.basis[cell];
                    pot[next] = self.cost[i * self.n + j] - pot[node];
                    queue.push_back(next);
                }
            }
        }
        let v = pot.split_off(self.m);
        (pot, v)
    }

    fn entering(&self, u: &[f64], v: &[f64], bland: bool) -> Option<(usize, usize)> {
        let scale = self.cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let threshold = -REDUCED_COST_TOLERANCE * scale;
        let mut best: Option<((usize, usize), f64)> = None;
        for (i, &ui) in u.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                let reduced = self.cost[i * self.n + j] - ui - vj;
                if reduced < threshold {
                    if bland {
                        return Some((i, j));
                    }
                    if best.map_or(true, |(_, r)| reduced < r) {
                        best = Some(((i, j), reduced));
                    }
                }
            }
        }
        best.map(|(cell, _)| cell)
    }

    /// Basic cells on the tree path from row `r` to column `c`, in order.
    fn tree_path(&self, r: usize, c: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let target = self.m + c;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        seen[r] = true;
        let mut queue = VecDeque::from([r]);
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, cell) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, cell));
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while let Some((prev, cell)) = parent[node] {
            path.push(cell);
            node = prev;
        }
        path.reverse();
        path
    }

    fn pivot(&mut self, (r, c): (usize, usize), bland: bool) {
        let path = self.tree_path(r, c);
        // cells at even positions of the path lose mass, odd positions gain
        let mut leave = path[0];
        for &cell in path.iter().step_by(2) {
            let x = self.basis[cell].2;
            let cur = self.basis[leave].2;
            let better = if bland {
                x < cur || (x == cur && (self.basis[cell].0, self.basis[cell].1) < (self.basis[leave].0, self.basis[leave].1))
            } else {
                x < cur
            };
            if better {
                leave = cell;
            }
        }
        let theta = self.basis[leave].2;
        for (pos, &cell) in path.iter().enumerate() {
            if pos % 2 == 0 {
                self.basis[cell].2 = (self.basis[cell].2 - theta).max(0.0);
            } else {
                self.basis[cell].2 += theta;
            }
        }
        self.basis[leave] = (r, c, theta);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute force over every basic solution: choose `m + n - 1` cells, keep
    /// those forming a spanning tree, solve for the flows by peeling leaves,
    /// keep feasible ones.
    fn enumerate_vertices(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
        let (m, n) = (supply.len(), demand.len());
        let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let k = m + n - 1;
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << cells.len()) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let chosen: Vec<(usize, usize)> = (0..cells.len()).filter(|b| mask >> b & 1 == 1).map(|b| cells[b]).collect();
            let mut rem_s = supply.to_vec();
            let mut rem_d = demand.to_vec();
            let mut open = chosen.clone();
            let mut flows = Vec::new();
            let mut progress = true;
            while !open.is_empty() && progress {
                progress = false;
                for idx in 0..open.len() {
                    let (i, j) = open[idx];
                    let row_deg = open.iter().filter(|c| c.0 == i).count();
                    let col_deg = open.iter().filter(|c| c.1 == j).count();
                    if row_deg == 1 || col_deg == 1 {
                        let x = if row_deg == 1 { rem_s[i] } else { rem_d[j] };
                        rem_s[i] -= x;
                        rem_d[j] -= x;
                        flows.push((i, j, x));
                        open.remove(idx);
                        progress = true;
                        break;
                    }
                }
            }
            if !open.is_empty() {
                continue;
            }
            let balanced = rem_s.iter().chain(&rem_d).all(|r| r.abs() < 1e-12);
            if balanced && flows.iter().all(|f| f.2 >= -1e-12) {
                let c: f64 = flows.iter().map(|&(i, j, x)| x * cost[i * n + j]).sum();
                best = best.min(c);
            }
        }
        best
    }

    fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect()
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let m = rng.random_range(1..=3);
            let n = rng.random_range(1..=3);
            let supply = random_simplex(&mut rng, m);
            let demand = random_simplex(&mut rng, n);
            let cost: Vec<f64> = (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect();
            let plan = solve_transport(&supply, &demand, &cost).unwrap();
            let oracle = enumerate_vertices(&supply, &demand, &cost);
            assert!((plan.cost - oracle).abs() < 1e-12, "{} vs {oracle}", plan.cost);
        }
    }

    #[test]
    fn degenerate_marginals() {
        // equal splits make the north-west start degenerate
        let supply = [0.5, 0.5];
        let demand = [0.5, 0.5];
        let cost = [1.0, 0.0, 0.0, 1.0];
        let plan = solve_transport(&supply, &demand, &cost).unwrap();
        assert!(plan.cost.abs() < 1e-15);
        let supply = [0.25; 4];
        let demand = [0.25; 4];
        let cost: Vec<f64> = (0..16).map(|k| if k % 5 == 0 { 1.0 } else { ((k * 7) % 3) as f64 * 0.1 }).collect();
        let plan = solve_transport(&supply, &demand, &cost).unwrap();
        let mass: f64 = plan.flows.iter().map(|f| f.2).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_instance_marginals_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (m, n) = (64, 64);
        let supply = random_simplex(&mut rng, m);
        let demand = random_simplex(&mut rng, n);
        let cost: Vec<f64> = (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect();
        let plan = solve_transport(&supply, &demand, &cost).unwrap();
        let mut rows = vec![0.0; m];
        let mut cols = vec![0.0; n];
        for &(i, j, x) in &plan.flows {
            assert!(x >= 0.0);
            rows[i] += x;
            cols[j] += x;
        }
        for i in 0..m {
            assert!((rows[i] - supply[i]).abs() < 1e-12);
        }
        for j in 0..n {
            assert!((cols[j] - demand[j]).abs() < 1e-12);
        }
    }
}
