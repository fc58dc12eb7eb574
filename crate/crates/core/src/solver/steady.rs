use std::sync::Once;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::DensityMatrix;
use super::liouvillian::Liouvillian;
use crate::error::SolverError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Accept when ‖Mρ‖∞ ≤ residual_tol · ‖M‖∞.
    pub residual_tol: f64,
    /// Reduced systems up to this size use dense LU.
    pub dense_threshold: usize,
    pub refinement_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-9,
            dense_threshold: 128,
            refinement_steps: 2,
        }
    }
}

fn sequential_faer() {
    static INIT: Once = Once::new();
    INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Steady-state solver bound to one Liouvillian sparsity pattern.
///
/// The unknowns split into blocks that never couple to each other; only the
/// blocks containing populations carry the (inhomogeneous) trace condition,
/// the rest are identically zero at steady state. Construction finds that
/// reduction and, for large blocks, the symbolic sparse LU, so that solving
/// many Liouvillians with the same pattern (a detuning scan) only pays for
/// the numeric factorization.
#[derive(Clone, Debug)]
pub struct SteadyStateSolver {
    options: SolveOptions,
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    kept: Vec<usize>,
    local: Vec<usize>,
    trace_row: usize,
    symbolic: Option<SymbolicLu<usize>>,
}

const NOT_KEPT: usize = usize::MAX;

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl SteadyStateSolver {
    pub fn new(template: &Liouvillian, options: SolveOptions) -> Result<Self, SolverError> {
        sequential_faer();
        let size = template.size();
        let mut parent: Vec<usize> = (0..size).collect();
        for k in 0..size {
            for &j in template.row(k).0 {
                let (a, b) = (find(&mut parent, k), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let mut population_roots: Vec<usize> = template.population_indices().map(|k| find(&mut parent, k)).collect();
        population_roots.sort_unstable();
        population_roots.dedup();
        let kept: Vec<usize> = (0..size)
            .filter(|&k| population_roots.binary_search(&find(&mut parent, k)).is_ok())
            .collect();
        let mut local = vec![NOT_KEPT; size];
        for (i, &k) in kept.iter().enumerate() {
            local[k] = i;
        }
        // dρ_00/dt is redundant given the others; its row carries the trace.
        let trace_row = local[0];

        let (row_ptr, cols) = Self::pattern(template);
        let mut solver = Self {
            options,
            dim: template.dim(),
            row_ptr,
            cols,
            kept,
            local,
            trace_row,
            symbolic: None,
        };
        if solver.kept.len() > options.dense_threshold {
            let matrix = solver.reduced_sparse(template)?;
            let symbolic = SymbolicLu::try_new(matrix.symbolic())
                .map_err(|e| SolverError::InvalidInput(format!("symbolic factorization failed: {e:?}")))?;
            solver.symbolic = Some(symbolic);
        }
        Ok(solver)
    }

    fn pattern(m: &Liouvillian) -> (Vec<usize>, Vec<usize>) {
        let mut row_ptr = vec![0];
        let mut cols = Vec::with_capacity(m.nnz());
        for k in 0..m.size() {
            cols.extend_from_slice(m.row(k).0);
            row_ptr.push(cols.len());
        }
        (row_ptr, cols)
    }

    /// Size of the reduced linear system.
    pub fn reduced_size(&self) -> usize {
        self.kept.len()
    }

    pub fn uses_sparse(&self) -> bool {
        self.symbolic.is_some()
    }

    fn check_pattern(&self, m: &Liouvillian) -> Result<(), SolverError> {
        let same = m.dim() == self.dim
            && m.nnz() == self.cols.len()
            && (0..m.size()).all(|k| m.row(k).0 == &self.cols[self.row_ptr[k]..self.row_ptr[k + 1]]);
        if same {
            Ok(())
        } else {
            Err(SolverError::DimensionMismatch(
                "Liouvillian sparsity pattern differs from the one the solver was built for".into(),
            ))
        }
    }

    /// Entries of the reduced system as (row, col, value), trace row included.
    fn reduced_entries(&self, m: &Liouvillian) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::with_capacity(m.nnz());
        for (i, &k) in self.kept.iter().enumerate() {
            if i == self.trace_row {
                continue;
            }
            let (c, v) = m.row(k);
            for (&j, &a) in c.iter().zip(v) {
                out.push((i, self.local[j], a));
            }
        }
        for p in m.population_indices() {
            out.push((self.trace_row, self.local[p], Complex64::new(1.0, 0.0)));
        }
        out
    }

    fn reduced_sparse(&self, m: &Liouvillian) -> Result<SparseColMat<usize, c64>, SolverError> {
        let n = self.kept.len();
        let triplets: Vec<Triplet<usize, usize, c64>> = self
            .reduced_entries(m)
            .into_iter()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        SparseColMat::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| SolverError::InvalidInput(format!("sparse assembly failed: {e:?}")))
    }

    pub fn solve(&self, m: &Liouvillian) -> Result<DensityMatrix, SolverError> {
        self.check_pattern(m)?;
        let n = self.kept.len();
        let entries = self.reduced_entries(m);
        let mut rhs = Mat::<c64>::zeros(n, 1);
        rhs[(self.trace_row, 0)] = c64::new(1.0, 0.0);

        let residual_of = |x: &Mat<c64>| {
            let mut r = rhs.clone();
            for &(i, j, a) in &entries {
                r[(i, 0)] -= a * x[(j, 0)];
            }
            r
        };

        let x = if let Some(symbolic) = &self.symbolic {
            let a = self.reduced_sparse(m)?;
            let lu = Lu::try_new_with_symbolic(symbolic.clone(), a.as_ref()).map_err(|_| SolverError::Singular {
                condition_estimate: f64::INFINITY,
            })?;
            let mut x = lu.solve(&rhs);
            for _ in 0..self.options.refinement_steps {
                let dx = lu.solve(&residual_of(&x));
                x += dx;
            }
            x
        } else {
            let mut a = Mat::<c64>::zeros(n, n);
            for &(i, j, v) in &entries {
                a[(i, j)] += v;
            }
            let lu: PartialPivLu<c64> = a.partial_piv_lu();
            let mut x = lu.solve(&rhs);
            for _ in 0..self.options.refinement_steps {
                let dx = lu.solve(&residual_of(&x));
                x += dx;
            }
            x
        };

        let condition_estimate = || {
            let mut row_sums = vec![0.0; n];
            for &(i, _, a) in &entries {
                row_sums[i] += a.norm();
            }
            let a_norm = row_sums.iter().fold(0.0f64, |acc, &v| acc.max(v));
            let x_norm = (0..n).fold(0.0f64, |acc, i| acc.max(x[(i, 0)].norm()));
            a_norm * x_norm
        };
        if (0..n).any(|i| !(x[(i, 0)].re.is_finite() && x[(i, 0)].im.is_finite())) {
            return Err(SolverError::Singular {
                condition_estimate: f64::INFINITY,
            });
        }

        let mut full = vec![Complex64::new(0.0, 0.0); m.size()];
        for (i, &k) in self.kept.iter().enumerate() {
            full[k] = x[(i, 0)];
        }
        let residual = m.matvec_scaled(&full).iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
        let bound = self.options.residual_tol * m.norm_inf();
        if !(residual <= bound) {
            return Err(SolverError::ResidualTooLarge {
                residual,
                bound,
                condition_estimate: condition_estimate(),
            });
        }
        Ok(DensityMatrix::from_vec(self.dim, full))
    }
}

/// Steady state with ∑ρ_mm = 1, default options.
pub fn steady_state(m: &Liouvillian) -> Result<DensityMatrix, SolverError> {
    steady_state_with(m, SolveOptions::default())
}

pub fn steady_state_with(m: &Liouvillian, options: SolveOptions) -> Result<DensityMatrix, SolverError> {
    SteadyStateSolver::new(m, options)?.solve(m)
}
