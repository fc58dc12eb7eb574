use num_complex::Complex64;

use super::density::DensityMatrix;
use crate::atomic_model::{GROUND_COUNT, LEVEL_COUNT};
use crate::coupling::CouplingMatrix;
use crate::error::SolverError;
use crate::relaxation::{decay_vector, BranchingTable, RelaxationConfig};

/// Ingredients of the Liouville equation for an n-level system:
///
/// dρ_lm/dt = −[(Γ_l+Γ_m)/2 + i(δ_l−δ_m)] ρ_lm
///            + (i/2) Σ_u (Ω_lu ρ_um − ρ_lu Ω_um) + Λ_l δ_lm,
///
/// with Λ_l = Σ_k R_{k→l} ρ_kk.
#[derive(Clone, Debug, PartialEq)]
pub struct LiouvillianParts {
    pub dim: usize,
    pub detunings: Vec<f64>,
    /// Hermitian dim×dim coupling, row-major.
    pub rabi: Vec<Complex64>,
    pub decay: Vec<f64>,
    /// Repopulation rate R_{from→to} at `from * dim + to`.
    pub repopulation: Vec<f64>,
}

impl LiouvillianParts {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            detunings: vec![0.0; dim],
            rabi: vec![Complex64::new(0.0, 0.0); dim * dim],
            decay: vec![0.0; dim],
            repopulation: vec![0.0; dim * dim],
        }
    }

    /// The 32-level Cs D1 system.
    pub fn cesium(
        detunings: &[f64; LEVEL_COUNT],
        coupling: &CouplingMatrix,
        relaxation: &RelaxationConfig,
        branching: &BranchingTable,
    ) -> Self {
        let dim = LEVEL_COUNT;
        let mut parts = Self::new(dim);
        parts.detunings.copy_from_slice(detunings);
        parts.rabi = coupling.to_full();
        parts.decay.copy_from_slice(&decay_vector(relaxation));
        let mixing = branching.mixing_weights(relaxation.r);
        for m in 0..GROUND_COUNT {
            for l in 0..GROUND_COUNT {
                parts.repopulation[m * dim + l] = mixing[m][l] * relaxation.gamma_p;
            }
        }
        for n in 0..LEVEL_COUNT - GROUND_COUNT {
            for l in 0..GROUND_COUNT {
                parts.repopulation[(GROUND_COUNT + n) * dim + l] = branching.branching[n][l] * relaxation.gamma;
            }
        }
        parts
    }

    pub fn set_coupling(&mut self, l: usize, u: usize, omega: Complex64) {
        self.rabi[l * self.dim + u] = omega;
        self.rabi[u * self.dim + l] = omega.conj();
    }

    pub fn rabi(&self, l: usize, u: usize) -> Complex64 {
        self.rabi[l * self.dim + u]
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.dim;
        if n == 0 {
            return Err(SolverError::DimensionMismatch("empty system".into()));
        }
        let check = |name: &str, len: usize, want: usize| {
            if len == want {
                Ok(())
            } else {
                Err(SolverError::DimensionMismatch(format!("{name} has length {len}, expected {want}")))
            }
        };
        check("detunings", self.detunings.len(), n)?;
        check("decay", self.decay.len(), n)?;
        check("rabi", self.rabi.len(), n * n)?;
        check("repopulation", self.repopulation.len(), n * n)?;
        let finite = self.detunings.iter().chain(&self.decay).chain(&self.repopulation).all(|v| v.is_finite())
            && self.rabi.iter().all(|v| v.re.is_finite() && v.im.is_finite());
        if !finite {
            return Err(SolverError::InvalidInput("non-finite Liouvillian input".into()));
        }
        if self.decay.iter().chain(&self.repopulation).any(|&v| v < 0.0) {
            return Err(SolverError::InvalidInput("negative decay or repopulation rate".into()));
        }
        for l in 0..n {
            for u in 0..n {
                if self.rabi(l, u) != self.rabi(u, l).conj() {
                    return Err(SolverError::InvalidInput(format!("coupling not Hermitian at ({l}, {u})")));
                }
            }
        }
        Ok(())
    }

    /// Largest decay rate, used as the unit of time in assembly.
    pub fn rate_scale(&self) -> f64 {
        let max = self.decay.iter().fold(0.0f64, |a, &b| a.max(b));
        if max > 0.0 {
            max
        } else {
            1.0
        }
    }
}

/// Vectorized Liouvillian in compressed-row form. Values are stored in
/// units of `scale` (rad/s); index `l * dim + m` addresses ρ_lm.
#[derive(Clone, Debug, PartialEq)]
pub struct Liouvillian {
    dim: usize,
    scale: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

/// Builds the Liouvillian from `parts`, nondimensionalized by the largest
/// decay rate.
pub fn assemble(parts: &LiouvillianParts) -> Result<Liouvillian, SolverError> {
    parts.validate()?;
    let n = parts.dim;
    let scale = parts.rate_scale();
    let inv = 1.0 / scale;
    let half_i = Complex64::new(0.0, 0.5 * inv);

    let mut by_row: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
    let mut by_col: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
    for l in 0..n {
        for u in 0..n {
            let w = parts.rabi(l, u);
            if w != Complex64::new(0.0, 0.0) {
                by_row[l].push((u, w));
                by_col[u].push((l, w));
            }
        }
    }
    let sources: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|to| {
            (0..n)
                .filter_map(|from| {
                    let r = parts.repopulation[from * n + to];
                    (r != 0.0).then_some((from, r))
                })
                .collect()
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(n * n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    let mut entries: Vec<(usize, Complex64)> = Vec::new();
    for l in 0..n {
        for m in 0..n {
            entries.clear();
            let diag = Complex64::new(
                -0.5 * (parts.decay[l] + parts.decay[m]),
                -(parts.detunings[l] - parts.detunings[m]),
            ) * inv;
            entries.push((l * n + m, diag));
            for &(u, w) in &by_row[l] {
                entries.push((u * n + m, half_i * w));
            }
            for &(u, w) in &by_col[m] {
                entries.push((l * n + u, -half_i * w));
            }
            if l == m {
                for &(from, r) in &sources[l] {
                    entries.push((from * n + from, Complex64::new(r * inv, 0.0)));
                }
            }
            entries.sort_by_key(|e| e.0);
            let start = cols.len();
            for &(c, v) in entries.iter() {
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
    }
    Ok(Liouvillian {
        dim: n,
        scale,
        row_ptr,
        cols,
        vals,
    })
}

impl Liouvillian {
    /// Number of levels (the matrix is dim² × dim²).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.dim * self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Same operator with time measured in a unit `factor` times longer:
    /// every stored entry is multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= factor);
        out.scale /= factor;
        out
    }

    pub fn row(&self, k: usize) -> (&[usize], &[Complex64]) {
        let r = self.row_ptr[k]..self.row_ptr[k + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn same_pattern(&self, other: &Liouvillian) -> bool {
        self.dim == other.dim && self.row_ptr == other.row_ptr && self.cols == other.cols
    }

    /// M·x in scaled units.
    pub fn matvec_scaled(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.size());
        (0..self.size())
            .map(|k| {
                let (c, v) = self.row(k);
                c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect()
    }

    /// dρ/dt in rad/s.
    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        assert_eq!(rho.dim(), self.dim);
        let mut out = self.matvec_scaled(rho.as_slice());
        out.iter_mut().for_each(|v| *v *= self.scale);
        DensityMatrix::from_vec(self.dim, out)
    }

    /// Infinity norm in scaled units.
    pub fn norm_inf(&self) -> f64 {
        (0..self.size())
            .map(|k| self.row(k).1.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// max_j |Σ_l M_{(l,l), j}|: how far the trace row is from annihilating M.
    pub fn trace_defect(&self) -> f64 {
        let mut col_sums = vec![Complex64::new(0.0, 0.0); self.size()];
        for l in 0..self.dim {
            let (c, v) = self.row(l * self.dim + l);
            for (&j, &a) in c.iter().zip(v) {
                col_sums[j] += a;
            }
        }
        col_sums.iter().fold(0.0, |acc, v| acc.max(v.norm()))
    }

    /// Population indices `l * dim + l`.
    pub fn population_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim).map(move |l| l * self.dim + l)
    }
}
