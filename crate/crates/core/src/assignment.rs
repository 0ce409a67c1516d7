//! Linear assignment: an exact Hungarian solver and the score-weighted cost
//! that turns it into a surrogate for the repro least-squares objective.
//!
//! A cost `Ω` is minimised over permutation matrices, `min_Π Σ Ω_ij Π_ij`.
//! Row `i` assigned to column `j` means `Π_ij = 1`, i.e. `π⁻¹(i) = j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::{check_len, Matrix, Qr};
use crate::permutation::SparsePermutation;

#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    n: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    /// Row-major `n × n` costs.
    pub fn new(n: usize, costs: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("cost matrix needs n >= 1".into()));
        }
        check_len(n * n, costs.len())?;
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("cost matrix"));
        }
        Ok(Self { n, costs })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let costs = (0..n * n).map(|idx| f(idx / n, idx % n)).collect();
        Self::new(n, costs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.n + j]
    }

    /// `Σ_i Ω[i, columns[i]]`, compensated.
    pub fn assignment_cost(&self, columns: &[usize]) -> f64 {
        neumaier(columns.iter().enumerate().map(|(i, &j)| self.get(i, j)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LapSolution {
    /// `columns[i]` is the column assigned to row `i`.
    pub columns: Vec<usize>,
    /// The permutation `Π` with `Π[i, columns[i]] = 1`.
    pub assignment: SparsePermutation,
    pub objective: f64,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
}

/// Exact minimiser of `Σ_i Ω[i, σ(i)]` in O(n³).
///
/// Shortest augmenting paths with slack arrays, rows added in increasing
/// order; potentials start from row minima. Among columns with equal slack the
/// smaller index wins, so the output is deterministic.
pub fn hungarian_solve(c: &CostMatrix) -> LapSolution {
    let n = c.n;
    // 1-based workspace; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        u[i] = (0..n)
            .map(|j| c.get(i - 1, j))
            .fold(f64::INFINITY, f64::min);
    }

    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c.get(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut columns = vec![0usize; n];
    for j in 1..=n {
        columns[owner[j] - 1] = j - 1;
    }
    let objective = c.assignment_cost(&columns);
    let assignment = SparsePermutation::from_sources(&columns).expect("assignment is a bijection");
    LapSolution {
        columns,
        assignment,
        objective,
        row_duals: u[1..].to_vec(),
        col_duals: v[1..].to_vec(),
    }
}

/// `Ω_ij = (Y_i − m_j)² + λ₁·1{j≠i}`, with diagonal `(1 − λ₂)(Y_i − m_i)²`.
pub fn build_cost_matrix(y: &[f64], m: &[f64], lam1: f64, lam2: f64) -> Result<CostMatrix> {
    check_len(y.len(), m.len())?;
    if !(lam1 >= 0.0 && lam2 >= 0.0) {
        return Err(Error::NegativePenalty { lam1, lam2 });
    }
    CostMatrix::from_fn(y.len(), |i, j| {
        let r = y[i] - m[j];
        if i == j {
            (1.0 - lam2) * r * r
        } else {
            r * r + lam1
        }
    })
}

/// `F(Π) = ‖(I − M_{(ΠX, u*)}) Y‖²`.
pub fn repro_objective(y: &[f64], x: &Matrix, ustar: &[f64], p: &SparsePermutation) -> Result<f64> {
    check_len(x.rows(), y.len())?;
    let design = p.apply_rows(x)?.with_column(ustar)?;
    Ok(Qr::factor(&design)?.residual_norm_sq(y))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSolution {
    pub permutation: SparsePermutation,
    /// Optimal LAP objective.
    pub lap_objective: f64,
    /// `‖Y − m‖²`, the identity's residual under the fitted `m`.
    pub residual_sq: f64,
    /// The minimiser moves more than `k` indices.
    pub sparsity_violation: bool,
}

/// Score-weighted LAP against a precomputed fit `m`.
pub fn surrogate_from_fit(
    y: &[f64],
    m: &[f64],
    lam1: f64,
    lam2: f64,
    k: usize,
) -> Result<SurrogateSolution> {
    let cost = build_cost_matrix(y, m, lam1, lam2)?;
    let sol = hungarian_solve(&cost);
    let residual_sq = neumaier(y.iter().zip(m).map(|(a, b)| (a - b) * (a - b)));
    Ok(SurrogateSolution {
        sparsity_violation: sol.assignment.hamming_distance() > k,
        permutation: sol.assignment,
        lap_objective: sol.objective,
        residual_sq,
    })
}

/// `Π̃ = argmin_Π ⟨Ω(u*), Π⟩` with `m = M_{(X, u*)} Y`.
pub fn surrogate_argmin(
    y: &[f64],
    x: &Matrix,
    ustar: &[f64],
    lam1: f64,
    lam2: f64,
    k: usize,
) -> Result<SurrogateSolution> {
    check_len(x.rows(), y.len())?;
    let m = Qr::factor(&x.with_column(ustar)?)?.project(y);
    surrogate_from_fit(y, &m, lam1, lam2, k)
}

/// Neumaier-compensated sum.
pub(crate) fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
