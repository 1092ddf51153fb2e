//! All-to-all random-coupling protocols.
//!
//! When each step applies the gate to a uniformly random pair of qubits, the
//! averaged step is the mean of the two-site matrices over all pairs. The
//! matrix is symmetric, its gap closes as 3h/n for large n, and the
//! corresponding purity rate is 3h per unit of time (n gates).

use ndarray::Array2;

use crate::bits;
use crate::error::{Error, Result};
use crate::gate::{canonical_coeffs, two_site_matrix, Basis, GateParams};
use crate::protocol::Bond;
use crate::purity::{apply_two_site_kernel, steady_vector};

/// Apply the averaged step (2/(n(n-1))) sum_{i<j} M_ij to a full 2^n vector.
pub fn mbar_apply(v: &[f64], n: usize, m: &[[f64; 4]; 4]) -> Vec<f64> {
    let mut acc = vec![0.0f64; v.len()];
    let mut tmp = vec![0.0f64; v.len()];
    let pairs = (n * (n - 1) / 2) as f64;
    for i in 1..=n {
        for j in i + 1..=n {
            tmp.copy_from_slice(v);
            apply_two_site_kernel(&mut tmp, m, n, Bond::new(i, j));
            for (a, t) in acc.iter_mut().zip(&tmp) {
                *a += t / pairs;
            }
        }
    }
    acc
}

/// Dense averaged-step matrix in the rotated basis.
pub fn mbar_matrix(n: usize, g: &GateParams) -> Result<Array2<f64>> {
    if !(2..=14).contains(&n) {
        return Err(Error::BudgetExceeded(format!("averaged-step matrix at n={n} (cap 14)")));
    }
    let m = two_site_matrix(g, Basis::Rotated);
    let dim = 1usize << n;
    let mut out = Array2::zeros((dim, dim));
    let mut col = vec![0.0f64; dim];
    for k in 0..dim {
        col.fill(0.0);
        col[k] = 1.0;
        let res = mbar_apply(&col, n, &m.m);
        for r in 0..dim {
            out[(r, k)] = res[r];
        }
    }
    Ok(out)
}

/// Spectral gap of the averaged step against its large-n closed form.
#[derive(Clone, Copy, Debug)]
pub struct MeanFieldGap {
    pub n: usize,
    pub gate: GateParams,
    /// 1 - lambda_2 with lambda_2 the largest even-sector eigenvalue below
    /// the steady state.
    pub numeric_gap: f64,
    /// 3h/n.
    pub formula_gap: f64,
    pub residual: f64,
}

/// Numeric gap from a shift-and-deflate power iteration on the symmetric
/// averaged step in the even-parity sector.
///
/// The iteration runs on (1 + Mbar)/2, whose eigenvalues keep the ordering
/// by value, so the second-largest eigenvalue (not the second-largest
/// modulus) is reached; the steady state is projected out each step. The
/// matrix is symmetric, so the Rayleigh quotient converges quadratically.
pub fn mean_field_gap(n: usize, g: &GateParams) -> Result<MeanFieldGap> {
    if !(2..=14).contains(&n) {
        return Err(Error::BudgetExceeded(format!("mean-field gap at n={n} (cap 14)")));
    }
    let m = two_site_matrix(g, Basis::Rotated);
    let steady = steady_vector(n, Basis::Rotated).coeffs;
    let snorm = steady.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s: Vec<f64> = steady.iter().map(|x| x / snorm).collect();
    let dim = 1usize << n;
    // deterministic even-parity start
    let mut w: Vec<f64> = (0..dim)
        .map(|k| {
            if bits::even_parity(k) {
                ((k as f64) * 0.7548776662466927).fract() - 0.5
            } else {
                0.0
            }
        })
        .collect();
    let project = |w: &mut Vec<f64>| {
        let c: f64 = w.iter().zip(&s).map(|(a, b)| a * b).sum();
        w.iter_mut().zip(&s).for_each(|(a, b)| *a -= c * b);
    };
    project(&mut w);
    normalize(&mut w);
    let mut lambda = f64::NAN;
    for iter in 0..20_000 {
        let mut u = mbar_apply(&w, n, &m.m);
        for (x, y) in u.iter_mut().zip(&w) {
            *x = 0.5 * (*x + y);
        }
        project(&mut u);
        let mu: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
        let new_lambda = 2.0 * mu - 1.0;
        normalize(&mut u);
        let drift = (new_lambda - lambda).abs();
        w = u;
        lambda = new_lambda;
        if iter > 10 && drift < 1e-13 {
            break;
        }
    }
    let numeric_gap = 1.0 - lambda;
    let c = canonical_coeffs(g);
    let formula_gap = 3.0 * c.h / n as f64;
    Ok(MeanFieldGap { n, gate: *g, numeric_gap, formula_gap, residual: numeric_gap - formula_gap })
}

fn normalize(v: &mut [f64]) {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
}

/// Asymptotic purity rate 3h of the random-pair protocol, in natural-log
/// units per n applied gates.
pub fn all_to_all_rate(g: &GateParams) -> f64 {
    3.0 * canonical_coeffs(g).h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate::gate_eigensystem;
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;
    use ndarray_linalg::{Eigh, UPLO};

    #[test]
    fn two_qubits_reduce_to_single_matrix() {
        let g = GateParams::unchecked(0.8, 0.4, 0.1);
        let mbar = mbar_matrix(2, &g).unwrap();
        let m = two_site_matrix(&g, Basis::Rotated);
        for r in 0..4 {
            for c in 0..4 {
                assert_abs_diff_eq!(mbar[(r, c)], m.m[r][c], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn steady_vector_is_fixed_point() {
        for n in [3usize, 5, 6] {
            let g = GateParams::xy();
            let m = two_site_matrix(&g, Basis::Rotated);
            let steady = steady_vector(n, Basis::Rotated).coeffs;
            let out = mbar_apply(&steady, n, &m.m);
            for (a, b) in out.iter().zip(&steady) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mbar_commutes_with_parity() {
        let n = 4;
        let g = GateParams::unchecked(0.9, 0.6, 0.2);
        let mbar = mbar_matrix(n, &g).unwrap();
        for r in 0..1 << n {
            for c in 0..1 << n {
                if bits::even_parity(r) != bits::even_parity(c) {
                    assert_eq!(mbar[(r, c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn spectrum_in_unit_disk_and_symmetric() {
        let n = 6;
        let g = GateParams::cnot();
        let mbar = mbar_matrix(n, &g).unwrap();
        for r in 0..1 << n {
            for c in 0..r {
                assert_abs_diff_eq!(mbar[(r, c)], mbar[(c, r)], epsilon = 1e-14);
            }
        }
        let (vals, _) = mbar.eigh(UPLO::Lower).unwrap();
        for v in vals.iter() {
            assert!(v.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn numeric_gap_matches_dense_diagonalization() {
        for (n, g) in [(8usize, GateParams::xy()), (10, GateParams::cnot())] {
            // dense even-sector reference
            let mbar = mbar_matrix(n, &g).unwrap();
            let even = bits::even_sector_indices(n);
            let dim = even.len();
            let mut sub = Array2::zeros((dim, dim));
            for (a, &r) in even.iter().enumerate() {
                for (b, &c) in even.iter().enumerate() {
                    sub[(a, b)] = mbar[(r, c)];
                }
            }
            let (vals, _): (Array1<f64>, _) = sub.eigh(UPLO::Lower).unwrap();
            let mut sorted: Vec<f64> = vals.to_vec();
            sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
            assert!(sorted[0] > 1.0 - 1e-10, "steady state missing");
            assert!(sorted[1] < 1.0 - 1e-10, "unexpected extra unit eigenvalue");
            let reference = 1.0 - sorted[1];
            let gap = mean_field_gap(n, &g).unwrap();
            assert_abs_diff_eq!(gap.numeric_gap, reference, epsilon = 1e-9);
        }
    }

    #[test]
    fn formula_gaps_for_named_gates() {
        let xy = mean_field_gap(8, &GateParams::xy()).unwrap();
        assert_abs_diff_eq!(xy.formula_gap, 4.0 / (3.0 * 8.0), epsilon = 1e-15);
        let cnot = mean_field_gap(8, &GateParams::cnot()).unwrap();
        assert_abs_diff_eq!(cnot.formula_gap, 4.0 / (3.0 * 8.0), epsilon = 1e-15);
        let swap = canonical_coeffs(&GateParams::swap());
        assert_eq!(3.0 * swap.h, 0.0);
    }

    #[test]
    fn numeric_gap_approaches_formula() {
        let gap = mean_field_gap(12, &GateParams::xy()).unwrap();
        let rel = (gap.numeric_gap - gap.formula_gap).abs() / gap.formula_gap;
        assert!(rel < 0.25, "relative residual {rel}");
    }

    #[test]
    fn rates() {
        assert_abs_diff_eq!(all_to_all_rate(&GateParams::xy()), 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(all_to_all_rate(&GateParams::cnot()), 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(all_to_all_rate(&GateParams::haar_u4()), 6.0 / 5.0, epsilon = 1e-15);
        assert_eq!(all_to_all_rate(&GateParams::swap()), 0.0);
        // the SWAP family keeps every two-site eigenvalue on the unit circle
        for (_, lam) in gate_eigensystem(&GateParams::swap()) {
            assert_abs_diff_eq!(lam.abs(), 1.0, epsilon = 1e-15);
        }
    }
}
