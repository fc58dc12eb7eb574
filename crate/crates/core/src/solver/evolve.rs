use faer::{c64, Mat, Scale};
use num_complex::Complex64;

use super::density::DensityMatrix;
use super::liouvillian::Liouvillian;
use crate::error::SolverError;

/// Largest number of squarings accepted when building the step propagator.
const MAX_SQUARINGS: u32 = 60;

/// Result of a time evolution, with the worst trace drift seen at the
/// checkpoints of the binary-powering schedule.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub rho: DensityMatrix,
    pub max_trace_drift: f64,
}

fn norm_one(a: &Mat<c64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(A) by Taylor series with scaling and squaring.
fn expm(a: &Mat<c64>) -> Result<Mat<c64>, SolverError> {
    let n = a.nrows();
    let norm = norm_one(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    if squarings > MAX_SQUARINGS {
        return Err(SolverError::Unstable(format!(
            "step too large for the stiffness scale (‖M dt‖₁ = {norm:.3e})"
        )));
    }
    let x = a * Scale(c64::new(0.5f64.powi(squarings as i32), 0.0));
    let mut result = Mat::<c64>::identity(n, n);
    let mut term = Mat::<c64>::identity(n, n);
    for k in 1..=40 {
        term = &term * &x * Scale(c64::new(1.0 / k as f64, 0.0));
        result += &term;
        if norm_one(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

fn trace_of(v: &Mat<c64>, populations: &[usize]) -> Complex64 {
    populations.iter().map(|&i| v[(i, 0)]).sum()
}

/// Propagates dρ/dt = Mρ from `rho0` for `duration` seconds in steps of
/// `dt`. Each step uses the exact propagator exp(M dt); steps are combined
/// by binary powering. Only the unknowns reachable from the support of
/// `rho0` are evolved, the rest stay zero.
pub fn time_evolve(
    rho0: &DensityMatrix,
    m: &Liouvillian,
    duration: f64,
    dt: f64,
) -> Result<DensityMatrix, SolverError> {
    time_evolve_traced(rho0, m, duration, dt).map(|e| e.rho)
}

pub fn time_evolve_traced(
    rho0: &DensityMatrix,
    m: &Liouvillian,
    duration: f64,
    dt: f64,
) -> Result<Evolution, SolverError> {
    if rho0.dim() != m.dim() {
        return Err(SolverError::DimensionMismatch(format!(
            "state has dimension {}, Liouvillian {}",
            rho0.dim(),
            m.dim()
        )));
    }
    if !(dt > 0.0 && dt.is_finite() && duration >= 0.0 && duration.is_finite()) {
        return Err(SolverError::InvalidInput(format!(
            "need dt > 0 and duration >= 0, got dt = {dt}, duration = {duration}"
        )));
    }
    let size = m.size();

    // Unknowns reachable from the initial support through M's columns.
    let mut column_targets: Vec<Vec<usize>> = vec![Vec::new(); size];
    for k in 0..size {
        for &j in m.row(k).0 {
            column_targets[j].push(k);
        }
    }
    let mut reached = vec![false; size];
    let mut stack: Vec<usize> = (0..size).filter(|&k| rho0.as_slice()[k] != Complex64::new(0.0, 0.0)).collect();
    for &k in &stack {
        reached[k] = true;
    }
    while let Some(j) = stack.pop() {
        for &k in &column_targets[j] {
            if !reached[k] {
                reached[k] = true;
                stack.push(k);
            }
        }
    }
    let kept: Vec<usize> = (0..size).filter(|&k| reached[k]).collect();
    let mut local = vec![usize::MAX; size];
    for (i, &k) in kept.iter().enumerate() {
        local[k] = i;
    }
    let n = kept.len();
    let populations: Vec<usize> = m.population_indices().filter(|&p| reached[p]).map(|p| local[p]).collect();

    let h = dt * m.scale();
    let mut a = Mat::<c64>::zeros(n, n);
    for (i, &k) in kept.iter().enumerate() {
        let (c, v) = m.row(k);
        // Unreached columns stay zero for all time and drop out.
        for (&j, &val) in c.iter().zip(v).filter(|(&j, _)| reached[j]) {
            a[(i, local[j])] = val * h;
        }
    }
    let mut step = expm(&a)?;

    let steps = (duration / dt).floor() as u64;
    let remainder = duration - steps as f64 * dt;
    let mut v = Mat::<c64>::from_fn(n, 1, |i, _| rho0.as_slice()[kept[i]]);
    let trace0 = trace_of(&v, &populations);
    let mut max_drift: f64 = 0.0;
    let mut check = |v: &Mat<c64>| -> Result<(), SolverError> {
        if (0..n).any(|i| !(v[(i, 0)].re.is_finite() && v[(i, 0)].im.is_finite())) {
            return Err(SolverError::Unstable("non-finite state".into()));
        }
        max_drift = max_drift.max((trace_of(v, &populations) - trace0).norm());
        Ok(())
    };

    let mut remaining = steps;
    while remaining > 0 {
        if remaining & 1 == 1 {
            v = &step * &v;
            check(&v)?;
        }
        remaining >>= 1;
        if remaining > 0 {
            step = &step * &step;
        }
    }
    if remainder > 1e-12 * dt {
        let mut tail = a.clone();
        tail *= Scale(c64::new(remainder / dt, 0.0));
        v = &expm(&tail)? * &v;
        check(&v)?;
    }
    if max_drift > 1e-6 {
        return Err(SolverError::Unstable(format!("trace drifted by {max_drift:.3e}")));
    }

    let mut full = vec![Complex64::new(0.0, 0.0); size];
    for (i, &k) in kept.iter().enumerate() {
        full[k] = v[(i, 0)];
    }
    Ok(Evolution {
        rho: DensityMatrix::from_vec(m.dim(), full),
        max_trace_drift: max_drift,
    })
}
