use num_complex::Complex64;

/// Square complex density matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    /// Panics unless `data.len() == dim²`.
    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), dim * dim, "density matrix storage has wrong length");
        Self { dim, data }
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(populations: &[f64]) -> Self {
        let dim = populations.len();
        let mut out = Self::zeros(dim);
        for (l, &p) in populations.iter().enumerate() {
            out.data[l * dim + l] = Complex64::new(p, 0.0);
        }
        out
    }

    /// Equal populations over the first `count` levels.
    pub fn uniform_over(dim: usize, count: usize) -> Self {
        let mut pops = vec![0.0; dim];
        pops[..count].fill(1.0 / count as f64);
        Self::diagonal(&pops)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        self.data[l * self.dim + m]
    }

    pub fn set(&mut self, l: usize, m: usize, value: Complex64) {
        self.data[l * self.dim + m] = value;
    }

    /// Vectorized form, index `l * dim + m`.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn population(&self, l: usize) -> f64 {
        self.get(l, l).re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim).map(|l| self.population(l)).collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|l| self.get(l, l)).sum()
    }

    /// max |ρ_lm − conj(ρ_ml)| / max |ρ|.
    pub fn hermiticity_error(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for l in 0..self.dim {
            for m in l..self.dim {
                worst = worst.max((self.get(l, m) - self.get(m, l).conj()).norm());
            }
        }
        worst / scale
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.norm()))
    }

    /// max |self − other| element-wise.
    pub fn max_diff(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    /// Violations of the physical density-matrix invariants, empty when all
    /// hold: Hermitian to `hermitian_tol` (relative), unit trace to
    /// `trace_tol`, populations in [−trace_tol, 1 + trace_tol].
    pub fn invariant_violations(&self, hermitian_tol: f64, trace_tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let herm = self.hermiticity_error();
        if herm > hermitian_tol {
            out.push(format!("hermiticity error {herm:.3e} > {hermitian_tol:.1e}"));
        }
        let trace = self.trace();
        if (trace - 1.0).norm() > trace_tol {
            out.push(format!("trace {trace} differs from 1 by more than {trace_tol:.1e}"));
        }
        for l in 0..self.dim {
            let p = self.population(l);
            if !(-trace_tol..=1.0 + trace_tol).contains(&p) {
                out.push(format!("population {l} = {p:.3e} outside [0, 1]"));
            }
        }
        out
    }
}
