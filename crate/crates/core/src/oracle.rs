//! Independent reference implementations used only for cross-checks.
//!
//! Nothing here shares code with the production path: Clebsch–Gordan
//! coefficients come from explicit lowering-operator construction instead
//! of the Racah sum, dipole factors from a 6j symbol instead of the data
//! file, dρ/dt from a direct element-wise sum instead of the vectorized
//! Liouvillian, and the three-level Λ steady state from nine hand-written
//! equations and a small Gaussian elimination.

use num_complex::Complex64;

use crate::solver::{DensityMatrix, LiouvillianParts};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `<j1 m1 j2 m2 | j m>` for integer momenta, by lowering |j1+j2, j1+j2⟩
/// with J₋ = J₁₋ + J₂₋ and Gram–Schmidt against higher j at the top of
/// each lower multiplet (Condon–Shortley: ⟨j1 j1; j2 j−j1 | j j⟩ > 0).
pub fn clebsch_gordan_ladder(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> f64 {
    if j1 < 0 || j2 < 0 || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j || m1 + m2 != m {
        return 0.0;
    }
    if j < (j1 - j2).abs() || j > j1 + j2 {
        return 0.0;
    }
    let n1 = (2 * j1 + 1) as usize;
    let n2 = (2 * j2 + 1) as usize;
    let idx = |a: i32, b: i32| (a + j1) as usize * n2 + (b + j2) as usize;
    let lower = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n1 * n2];
        for a in -j1..=j1 {
            for b in -j2..=j2 {
                let c = v[idx(a, b)];
                if c == 0.0 {
                    continue;
                }
                if a > -j1 {
                    out[idx(a - 1, b)] += c * (((j1 + a) * (j1 - a + 1)) as f64).sqrt();
                }
                if b > -j2 {
                    out[idx(a, b - 1)] += c * (((j2 + b) * (j2 - b + 1)) as f64).sqrt();
                }
            }
        }
        out
    };
    let normalize = |v: &mut Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    };

    // states[J][M + J] for J from j1+j2 down to the requested j.
    let mut multiplets: Vec<(i32, Vec<Vec<f64>>)> = Vec::new();
    for big_j in (j..=j1 + j2).rev() {
        // |j1, J − j1⟩ overlaps every multiplet's top state, so it survives
        // projection out of the higher ones.
        let mut top = vec![0.0; n1 * n2];
        top[idx(j1, big_j - j1)] = 1.0;
        for (_, states) in &multiplets {
            let k = states.len() as i32;
            let jj = (k - 1) / 2;
            let other = &states[(big_j + jj) as usize];
            let overlap: f64 = other.iter().zip(&top).map(|(x, y)| x * y).sum();
            top.iter_mut().zip(other).for_each(|(t, o)| *t -= overlap * o);
        }
        normalize(&mut top);
        let first = top[idx(j1, big_j - j1)];
        if first < 0.0 {
            top.iter_mut().for_each(|x| *x = -*x);
        }
        let mut states = vec![top];
        for _ in 0..2 * big_j {
            let mut next = lower(states.last().unwrap());
            normalize(&mut next);
            states.push(next);
        }
        states.reverse();
        multiplets.push((big_j, states));
    }
    let (_, states) = multiplets.last().unwrap();
    states[(m + j) as usize][idx(m1, m2)]
}

fn factorial(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn half(twice: i32) -> Option<i32> {
    (twice >= 0 && twice % 2 == 0).then_some(twice / 2)
}

fn triangle(a: i32, b: i32, c: i32) -> Option<f64> {
    let x = half(a + b - c)?;
    let y = half(a - b + c)?;
    let z = half(-a + b + c)?;
    let s = half(a + b + c)?;
    Some((factorial(x) * factorial(y) * factorial(z) / factorial(s + 1)).sqrt())
}

/// Wigner 6j symbol {a b c; d e f} with all arguments given doubled.
pub fn wigner_6j_doubled(a: i32, b: i32, c: i32, d: i32, e: i32, f: i32) -> f64 {
    let deltas = [triangle(a, b, c), triangle(a, e, f), triangle(d, b, f), triangle(d, e, c)];
    let Some(pre) = deltas.iter().try_fold(1.0, |acc, t| t.map(|v| acc * v)) else {
        return 0.0;
    };
    let lows = [a + b + c, a + e + f, d + b + f, d + e + c].map(|v| v / 2);
    let highs = [a + b + d + e, b + c + e + f, c + a + f + d].map(|v| v / 2);
    let t_min = *lows.iter().max().unwrap();
    let t_max = *highs.iter().min().unwrap();
    let mut sum = 0.0;
    for t in t_min..=t_max {
        let mut denom = 1.0;
        for low in lows {
            denom *= factorial(t - low);
        }
        for high in highs {
            denom *= factorial(high - t);
        }
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * factorial(t + 1) / denom;
    }
    pre * sum
}

/// Relative hyperfine dipole factor d_FF' for a J = 1/2 → J' = 1/2 line:
/// (−1)^{F+J'+1+I} √((2F+1)(2J'+1)) {J' J 1; F F' I}.
pub fn dipole_factor_6j(f: i32, f_prime: i32, two_i: i32) -> f64 {
    let (two_j, two_jp) = (1, 1);
    let phase_twice = 2 * f + two_jp + 2 + two_i;
    debug_assert!(phase_twice % 2 == 0);
    let sign = if (phase_twice / 2) % 2 == 0 { 1.0 } else { -1.0 };
    sign * (((2 * f + 1) * (two_jp + 1)) as f64).sqrt()
        * wigner_6j_doubled(two_jp, two_j, 2, 2 * f, 2 * f_prime, two_i)
}

/// dρ/dt evaluated element by element from the Liouville equation, without
/// the vectorized operator.
pub fn liouville_rhs(parts: &LiouvillianParts, rho: &DensityMatrix) -> DensityMatrix {
    let n = parts.dim;
    let omega = |l: usize, u: usize| parts.rabi[l * n + u];
    let mut out = DensityMatrix::zeros(n);
    for l in 0..n {
        for m in 0..n {
            let damping = Complex64::new(
                0.5 * (parts.decay[l] + parts.decay[m]),
                parts.detunings[l] - parts.detunings[m],
            );
            let mut commutator = ZERO;
            for u in 0..n {
                commutator += omega(l, u) * rho.get(u, m) - rho.get(l, u) * omega(u, m);
            }
            let mut value = -damping * rho.get(l, m) + Complex64::new(0.0, 0.5) * commutator;
            if l == m {
                for k in 0..n {
                    value += parts.repopulation[k * n + l] * rho.get(k, k);
                }
            }
            out.set(l, m, value);
        }
    }
    out
}

/// Three-level Λ system: ground pair g (0), e (1), excited i (2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaParams {
    pub detunings: [f64; 3],
    pub omega_gi: Complex64,
    pub omega_ei: Complex64,
    pub decay: [f64; 3],
    /// Ground repopulation g → e and e → g.
    pub rate_g_to_e: f64,
    pub rate_e_to_g: f64,
    /// Fractions of the excited decay landing in g and in e.
    pub branch_g: f64,
    pub branch_e: f64,
}

impl LambdaParams {
    /// The same system in the generic form the production solver consumes.
    pub fn to_parts(&self) -> LiouvillianParts {
        let mut p = LiouvillianParts::new(3);
        p.detunings = self.detunings.to_vec();
        p.decay = self.decay.to_vec();
        p.set_coupling(0, 2, self.omega_gi);
        p.set_coupling(1, 2, self.omega_ei);
        p.repopulation[1] = self.rate_g_to_e;
        p.repopulation[3] = self.rate_e_to_g;
        p.repopulation[2 * 3] = self.branch_g * self.decay[2];
        p.repopulation[2 * 3 + 1] = self.branch_e * self.decay[2];
        p
    }
}

/// Steady state of the Λ system from its nine equations written out by
/// hand, with the ρ_gg equation replaced by the trace condition.
pub fn lambda_steady_state(p: &LambdaParams) -> Option<[[Complex64; 3]; 3]> {
    // Unknown order: gg ge gi eg ee ei ig ie ii.
    const GG: usize = 0;
    const GE: usize = 1;
    const GI: usize = 2;
    const EG: usize = 3;
    const EE: usize = 4;
    const EI: usize = 5;
    const IG: usize = 6;
    const IE: usize = 7;
    const II: usize = 8;
    let a = p.omega_gi;
    let b = p.omega_ei;
    let [dg, de, di] = p.detunings;
    let [gg, ge, gi] = p.decay;
    let h = Complex64::new(0.0, 0.5);
    let c = |re: f64| Complex64::new(re, 0.0);
    let damp = |x: f64, y: f64, dx: f64, dy: f64| -Complex64::new(0.5 * (x + y), dx - dy);

    let mut m = [[ZERO; 9]; 9];
    let mut rhs = [ZERO; 9];

    // Trace row.
    m[GG][GG] = c(1.0);
    m[GG][EE] = c(1.0);
    m[GG][II] = c(1.0);
    rhs[GG] = c(1.0);

    // ρ_ge: damping, (i/2)(Ω_gi ρ_ie − ρ_gi Ω_ie).
    m[GE][GE] = damp(gg, ge, dg, de);
    m[GE][IE] = h * a;
    m[GE][GI] = -h * b.conj();

    // ρ_gi: (i/2)(Ω_gi ρ_ii − ρ_gg Ω_gi − ρ_ge Ω_ei).
    m[GI][GI] = damp(gg, gi, dg, di);
    m[GI][II] = h * a;
    m[GI][GG] = -h * a;
    m[GI][GE] = -h * b;

    // ρ_eg: (i/2)(Ω_ei ρ_ig − ρ_ei Ω_ig).
    m[EG][EG] = damp(ge, gg, de, dg);
    m[EG][IG] = h * b;
    m[EG][EI] = -h * a.conj();

    // ρ_ee: −Γ_e ρ_ee + (i/2)(Ω_ei ρ_ie − ρ_ei Ω_ie) + R_{g→e} ρ_gg + b_e Γ_i ρ_ii.
    m[EE][EE] = c(-ge);
    m[EE][IE] = h * b;
    m[EE][EI] = -h * b.conj();
    m[EE][GG] = c(p.rate_g_to_e);
    m[EE][II] = c(p.branch_e * gi);

    // ρ_ei: (i/2)(Ω_ei ρ_ii − ρ_eg Ω_gi − ρ_ee Ω_ei).
    m[EI][EI] = damp(ge, gi, de, di);
    m[EI][II] = h * b;
    m[EI][EG] = -h * a;
    m[EI][EE] = -h * b;

    // ρ_ig: (i/2)(Ω_ig ρ_gg + Ω_ie ρ_eg − ρ_ii Ω_ig).
    m[IG][IG] = damp(gi, gg, di, dg);
    m[IG][GG] = h * a.conj();
    m[IG][EG] = h * b.conj();
    m[IG][II] = -h * a.conj();

    // ρ_ie: (i/2)(Ω_ig ρ_ge + Ω_ie ρ_ee − ρ_ii Ω_ie).
    m[IE][IE] = damp(gi, ge, di, de);
    m[IE][GE] = h * a.conj();
    m[IE][EE] = h * b.conj();
    m[IE][II] = -h * b.conj();

    // ρ_ii: −Γ_i ρ_ii + (i/2)(Ω_ig ρ_gi + Ω_ie ρ_ei − ρ_ig Ω_gi − ρ_ie Ω_ei).
    m[II][II] = c(-gi);
    m[II][GI] = h * a.conj();
    m[II][EI] = h * b.conj();
    m[II][IG] = -h * a;
    m[II][IE] = -h * b;

    let x = gauss_solve(m, rhs)?;
    Some([[x[GG], x[GE], x[GI]], [x[EG], x[EE], x[EI]], [x[IG], x[IE], x[II]]])
}

/// Gaussian elimination with partial pivoting.
fn gauss_solve<const N: usize>(mut a: [[Complex64; N]; N], mut b: [Complex64; N]) -> Option<[Complex64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[pivot][col].norm() == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let factor = a[row][col] / a[col][col];
            for k in col..N {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    let mut x = [ZERO; N];
    for row in (0..N).rev() {
        let mut acc = b[row];
        for k in row + 1..N {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_reproduces_textbook_values() {
        // ⟨1 1; 1 −1 | 0 0⟩ = 1/√3, ⟨1 0; 1 0 | 2 0⟩ = √(2/3).
        assert!((clebsch_gordan_ladder(1, 1, 1, -1, 0, 0) - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((clebsch_gordan_ladder(1, 0, 1, 0, 2, 0) - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!((clebsch_gordan_ladder(1, 0, 1, 0, 1, 0)).abs() < 1e-14);
    }

    #[test]
    fn six_j_known_value() {
        // {a b c; b a 0} = (−1)^{a+b+c} / √((2a+1)(2b+1)).
        assert!((wigner_6j_doubled(1, 1, 2, 1, 1, 0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dipole_factors_are_normalized() {
        for fp in 3..=4 {
            let s: f64 = (3..=4).map(|f| dipole_factor_6j(f, fp, 7).powi(2)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_solves_small_system() {
        let a = [
            [Complex64::new(2.0, 0.0), Complex64::new(1.0, 1.0)],
            [Complex64::new(0.0, 1.0), Complex64::new(3.0, 0.0)],
        ];
        let x_true = [Complex64::new(1.0, -1.0), Complex64::new(0.5, 2.0)];
        let b = [a[0][0] * x_true[0] + a[0][1] * x_true[1], a[1][0] * x_true[0] + a[1][1] * x_true[1]];
        let x = gauss_solve(a, b).unwrap();
        assert!((x[0] - x_true[0]).norm() < 1e-14 && (x[1] - x_true[1]).norm() < 1e-14);
    }
}
