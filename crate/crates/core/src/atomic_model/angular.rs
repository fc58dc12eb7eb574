//! Clebsch–Gordan coefficients for integer angular momenta.

use std::sync::OnceLock;

const MAX_FACTORIAL: usize = 32;

fn factorials() -> &'static [f64; MAX_FACTORIAL + 1] {
    static TABLE: OnceLock<[f64; MAX_FACTORIAL + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0; MAX_FACTORIAL + 1];
        for n in 1..=MAX_FACTORIAL {
            t[n] = t[n - 1] * n as f64;
        }
        t
    })
}

fn fact(n: i32) -> f64 {
    debug_assert!(n >= 0 && (n as usize) <= MAX_FACTORIAL);
    factorials()[n as usize]
}

/// `<j1 m1 j2 m2 | j m>` from the Racah closed form.
///
/// Returns 0 for any combination violating the triangle rule, projection
/// bounds or `m = m1 + m2`.
pub fn clebsch_gordan_racah(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> f64 {
    if j1 < 0 || j2 < 0 || j < 0 {
        return 0.0;
    }
    if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    if j < (j1 - j2).abs() || j > j1 + j2 {
        return 0.0;
    }

    let triangle = (2 * j + 1) as f64 * fact(j + j1 - j2) * fact(j - j1 + j2) * fact(j1 + j2 - j)
        / fact(j1 + j2 + j + 1);
    let projections = fact(j + m)
        * fact(j - m)
        * fact(j1 - m1)
        * fact(j1 + m1)
        * fact(j2 - m2)
        * fact(j2 + m2);

    let k_min = 0.max(j2 - j - m1).max(j1 - j + m2);
    let k_max = (j1 + j2 - j).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let denom = fact(k)
            * fact(j1 + j2 - j - k)
            * fact(j1 - m1 - k)
            * fact(j2 + m2 - k)
            * fact(j - j2 + m1 + k)
            * fact(j - j1 - m2 + k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
    }
    (triangle * projections).sqrt() * sum
}

/// Dense cache of `<F' m' | F 1 m q>` for F, F' in {3, 4}.
struct CgTable {
    // [F - 3][F' - 3][m + 4][q + 1]
    values: [[[[f64; 3]; 9]; 2]; 2],
}

impl CgTable {
    fn build() -> Self {
        let mut values = [[[[0.0; 3]; 9]; 2]; 2];
        for (fi, f) in (3..=4).enumerate() {
            for (fpi, fp) in (3..=4).enumerate() {
                for m in -f..=f {
                    for q in -1..=1 {
                        values[fi][fpi][(m + 4) as usize][(q + 1) as usize] =
                            clebsch_gordan_racah(f, m, 1, q, fp, m + q);
                    }
                }
            }
        }
        Self { values }
    }
}

fn table() -> &'static CgTable {
    static TABLE: OnceLock<CgTable> = OnceLock::new();
    TABLE.get_or_init(CgTable::build)
}

/// `<F' m' | F 1 m q>`: the coupling coefficient entering the Rabi
/// frequencies and the relaxation tables. Zero unless `m' = m + q`.
///
/// F and F' in {3, 4} come from the cached table; other values fall back to
/// the Racah formula.
pub fn clebsch_gordan(f_prime: i32, m_prime: i32, f: i32, m: i32, q: i32) -> f64 {
    if !(-1..=1).contains(&q) || m_prime != m + q {
        return 0.0;
    }
    if (3..=4).contains(&f) && (3..=4).contains(&f_prime) {
        if m.abs() > f || m_prime.abs() > f_prime {
            return 0.0;
        }
        let t = table();
        return t.values[(f - 3) as usize][(f_prime - 3) as usize][(m + 4) as usize]
            [(q + 1) as usize];
    }
    clebsch_gordan_racah(f, m, 1, q, f_prime, m_prime)
}

/// Flattened view of the cached table, in the order
/// `(F, F', m, q)` with F, F' ascending from 3, m from -4, q from -1.
pub fn cached_table() -> Vec<((i32, i32, i32, i32), f64)> {
    let t = table();
    let mut out = Vec::with_capacity(2 * 2 * 9 * 3);
    for (fi, f) in (3..=4).enumerate() {
        for (fpi, fp) in (3..=4).enumerate() {
            for m in -4..=4 {
                for q in -1..=1 {
                    let v = t.values[fi][fpi][(m + 4) as usize][(q + 1) as usize];
                    out.push(((f, fp, m, q), v));
                }
            }
        }
    }
    out
}

fn flat_slot(fi: usize, fpi: usize, m: i32, q: i32) -> usize {
    ((fi * 2 + fpi) * 9 + (m + 4) as usize) * 3 + (q + 1) as usize
}

/// Table snapshot with one entry shifted by `delta`, for fault injection in
/// the validation suite. The shared cache is left untouched.
pub fn perturbed_table(f: i32, f_prime: i32, m: i32, q: i32, delta: f64) -> Vec<((i32, i32, i32, i32), f64)> {
    let mut snapshot = cached_table();
    let slot = flat_slot((f - 3) as usize, (f_prime - 3) as usize, m, q);
    snapshot[slot].1 += delta;
    snapshot
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stretched_coupling_is_unity() {
        assert!((clebsch_gordan(4, 4, 3, 3, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetry_forced_zero() {
        assert_eq!(clebsch_gordan(3, 0, 3, 0, 0), 0.0);
        assert_eq!(clebsch_gordan(4, 0, 4, 0, 0), 0.0);
    }

    #[test]
    fn selection_rules() {
        assert_eq!(clebsch_gordan(4, 2, 3, 0, 1), 0.0);
        assert_eq!(clebsch_gordan(3, 1, 4, 0, 2), 0.0);
        assert_eq!(clebsch_gordan(3, -4, 4, -4, 0), 0.0);
    }

    #[test]
    fn known_closed_forms() {
        // <j m+1 | j 1 m 1> = -sqrt((j-m)(j+m+1) / (2j(j+1)))
        for m in -3..3 {
            let expect = -(((3 - m) * (3 + m + 1)) as f64 / 24.0).sqrt();
            assert!((clebsch_gordan(3, m + 1, 3, m, 1) - expect).abs() < 1e-14);
        }
        // <j m | j 1 m 0> = m / sqrt(j(j+1))
        for m in -4..=4 {
            let expect = m as f64 / 20f64.sqrt();
            assert!((clebsch_gordan(4, m, 4, m, 0) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn columns_are_normalized_over_complete_f_prime_set() {
        for f in 3..=4 {
            for m in -f..=f {
                for q in -1..=1 {
                    let total: f64 = (f - 1..=f + 1)
                        .map(|fp| clebsch_gordan_racah(f, m, 1, q, fp, m + q).powi(2))
                        .sum();
                    assert!((total - 1.0).abs() < 1e-13, "F={f} m={m} q={q}: {total}");
                }
            }
        }
    }

    #[test]
    fn perturbation_leaves_shared_table_intact() {
        let before = cached_table();
        let bumped = perturbed_table(3, 4, 0, 1, 1e-3);
        let after = cached_table();
        assert_eq!(before, after);
        let diffs = before.iter().zip(&bumped).filter(|(a, b)| a.1 != b.1).count();
        assert_eq!(diffs, 1);
    }
}
