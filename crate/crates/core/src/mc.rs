//! Monte-Carlo validation of the averaged gate action.
//!
//! The analytic route builds the 4x4 primed-basis matrix from closed-form
//! coefficients. This module takes the independent route: sample actual
//! Haar-random 1-qubit unitaries, conjugate a spanning set of two-qubit
//! product densities through the dressed gate, average the resulting
//! subsystem purities, and solve for the empirical 4x4 map by least squares.
//! The maximum entrywise deviation from the analytic matrix is returned; it
//! shrinks as 1/sqrt(samples).

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gate::{two_site_matrix, Basis, GateParams};

/// Result of one Monte-Carlo validation run.
#[derive(Clone, Debug)]
pub struct McReport {
    pub samples: usize,
    /// Empirical 4x4 purity map in the primed basis.
    pub empirical: [[f64; 4]; 4],
    /// Max |empirical - analytic| over all entries.
    pub deviation: f64,
    /// Per-row deviation, (uu, ud, du, dd) ordering.
    pub row_deviation: [f64; 4],
}

/// Haar-random U(2) via Gram-Schmidt on a complex Ginibre matrix with the
/// positive-diagonal R convention.
pub fn haar_u2<R: Rng>(rng: &mut R) -> [[C64; 2]; 2] {
    let mut g = [[C64::new(0.0, 0.0); 2]; 2];
    for row in g.iter_mut() {
        for e in row.iter_mut() {
            *e = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    // columns of g
    let c0 = [g[0][0], g[1][0]];
    let n0 = (c0[0].norm_sqr() + c0[1].norm_sqr()).sqrt();
    let q0 = [c0[0] / n0, c0[1] / n0];
    let c1 = [g[0][1], g[1][1]];
    let overlap = q0[0].conj() * c1[0] + q0[1].conj() * c1[1];
    let mut q1 = [c1[0] - overlap * q0[0], c1[1] - overlap * q0[1]];
    let n1 = (q1[0].norm_sqr() + q1[1].norm_sqr()).sqrt();
    q1 = [q1[0] / n1, q1[1] / n1];
    [[q0[0], q1[0]], [q0[1], q1[1]]]
}

/// The canonical 2-qubit gate as a 4x4 unitary, built in the Bell eigenbasis
/// where the three two-site Pauli strings are simultaneously diagonal.
pub fn canonical_unitary(g: &GateParams) -> Array2<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // columns: |phi+>, |phi->, |psi+>, |psi-> in the (00, 01, 10, 11) basis
    let bell = [
        [s, 0.0, 0.0, s],
        [s, 0.0, 0.0, -s],
        [0.0, s, s, 0.0],
        [0.0, s, -s, 0.0],
    ];
    // (xx, yy, zz) eigenvalues per Bell state
    let signs = [
        (1.0, -1.0, 1.0),
        (-1.0, 1.0, 1.0),
        (1.0, 1.0, -1.0),
        (-1.0, -1.0, -1.0),
    ];
    let mut w = Array2::zeros((4, 4));
    for (b, &(sx, sy, sz)) in signs.iter().enumerate() {
        let theta =
            std::f64::consts::FRAC_PI_4 * (g.a_x * sx + g.a_y * sy + g.a_z * sz);
        let phase = C64::new(0.0, theta).exp();
        for r in 0..4 {
            for c in 0..4 {
                w[(r, c)] += phase * bell[b][r] * bell[b][c];
            }
        }
    }
    w
}

fn kron2(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> Array2<C64> {
    let mut k = Array2::zeros((4, 4));
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    k[(2 * i + p, 2 * j + q)] = a[i][j] * b[p][q];
                }
            }
        }
    }
    k
}

/// Purities (I_uu, I_ud, I_du, I_dd) of a two-qubit density matrix, qubit 1
/// in the most significant bit.
fn purity_labels(rho: &Array2<C64>) -> [f64; 4] {
    let tr2 = |m: &Array2<C64>| -> f64 {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                s += m[(i, j)] * m[(j, i)];
            }
        }
        s.re
    };
    let mut rho1 = Array2::zeros((2, 2));
    let mut rho2 = Array2::zeros((2, 2));
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                rho1[(a, b)] += rho[(2 * a + c, 2 * b + c)];
                rho2[(a, b)] += rho[(2 * c + a, 2 * c + b)];
            }
        }
    }
    [tr2(rho), tr2(&rho1), tr2(&rho2), 1.0]
}

/// The fixed spanning set of single-qubit densities (1 + r sigma)/2, chosen
/// with distinct purities so the 16 product inputs span all four label
/// coordinates.
fn input_qubit_densities() -> [Array2<C64>; 4] {
    let mk = |rx: f64, ry: f64, rz: f64| {
        let mut m = Array2::zeros((2, 2));
        m[(0, 0)] = C64::new(0.5 * (1.0 + rz), 0.0);
        m[(1, 1)] = C64::new(0.5 * (1.0 - rz), 0.0);
        m[(0, 1)] = C64::new(0.5 * rx, -0.5 * ry);
        m[(1, 0)] = C64::new(0.5 * rx, 0.5 * ry);
        m
    };
    [mk(0.0, 0.0, 0.0), mk(0.0, 0.0, 1.0), mk(0.5, 0.0, 0.0), mk(0.0, 0.75, 0.0)]
}

fn single_purity(rho: &Array2<C64>) -> f64 {
    (rho[(0, 0)] * rho[(0, 0)] + rho[(0, 1)] * rho[(1, 0)] * 2.0 + rho[(1, 1)] * rho[(1, 1)]).re
}

/// Sample `samples` dressed gates and average the output purity labels of
/// the 16 product inputs. Deterministic for a given seed; work is chunked so
/// independent chunks can run on worker threads with per-chunk substreams.
fn averaged_outputs(g: &GateParams, samples: usize, seed: u64) -> Array2<f64> {
    let w = canonical_unitary(g);
    let singles = input_qubit_densities();
    let chunk = 8192usize;
    let chunks = samples.div_ceil(chunk);
    let partials: Vec<Array2<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed.wrapping_add((c as u64).wrapping_mul(0x9E3779B97F4A7C15)));
            let lo = c * chunk;
            let hi = (lo + chunk).min(samples);
            let mut acc = Array2::<f64>::zeros((4, 16));
            for _ in lo..hi {
                let v1 = haar_u2(&mut rng);
                let v2 = haar_u2(&mut rng);
                let u = w.dot(&kron2(&v1, &v2));
                let u_dag = u.t().mapv(|z| z.conj());
                for (k1, r1) in singles.iter().enumerate() {
                    for (k2, r2) in singles.iter().enumerate() {
                        let mut rho = Array2::zeros((4, 4));
                        for a in 0..2 {
                            for b in 0..2 {
                                for p in 0..2 {
                                    for q in 0..2 {
                                        rho[(2 * a + p, 2 * b + q)] =
                                            r1[(a, b)] * r2[(p, q)];
                                    }
                                }
                            }
                        }
                        let out = u.dot(&rho).dot(&u_dag);
                        let labels = purity_labels(&out);
                        for r in 0..4 {
                            acc[(r, 4 * k1 + k2)] += labels[r];
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = Array2::<f64>::zeros((4, 16));
    for p in partials {
        total += &p;
    }
    total / samples as f64
}

/// Validate a gate's analytic primed-basis matrix against Haar sampling.
///
/// Rejects the Haar-U(4) pseudo-gate (there is no fixed unitary to sample)
/// and fewer than 1000 samples.
pub fn validate_gate(g: &GateParams, samples: usize, seed: u64) -> Result<McReport> {
    if g.haar_u4 {
        return Err(Error::MonteCarlo(
            "the Haar-U(4) pseudo-gate has no fixed unitary to sample".into(),
        ));
    }
    if samples < 1000 {
        return Err(Error::MonteCarlo(format!("need at least 1000 samples, got {samples}")));
    }
    let y = averaged_outputs(g, samples, seed);
    // Analytic input coordinates: for a product density the labels are
    // (p1 p2, p1, p2, 1).
    let singles = input_qubit_densities();
    let p: Vec<f64> = singles.iter().map(single_purity).collect();
    let mut x = Array2::<f64>::zeros((4, 16));
    for k1 in 0..4 {
        for k2 in 0..4 {
            let col = 4 * k1 + k2;
            x[(0, col)] = p[k1] * p[k2];
            x[(1, col)] = p[k1];
            x[(2, col)] = p[k2];
            x[(3, col)] = 1.0;
        }
    }
    // Least squares M X = Y: solve (X X^T) row^T = X y_row^T per row.
    let gram = x.dot(&x.t());
    let mut empirical = [[0.0f64; 4]; 4];
    for r in 0..4 {
        let rhs: Array1<f64> = x.dot(&y.row(r).to_owned());
        let sol = gram.solve(&rhs).map_err(|e| Error::Backend(e.to_string()))?;
        for s in 0..4 {
            empirical[r][s] = sol[s];
        }
    }
    let analytic = two_site_matrix(g, Basis::Primed);
    let mut deviation = 0.0f64;
    let mut row_deviation = [0.0f64; 4];
    for r in 0..4 {
        for s in 0..4 {
            let d = (empirical[r][s] - analytic.m[r][s]).abs();
            deviation = deviation.max(d);
            row_deviation[r] = row_deviation[r].max(d);
        }
    }
    Ok(McReport { samples, empirical, deviation, row_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn haar_samples_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let v = haar_u2(&mut rng);
            for i in 0..2 {
                for j in 0..2 {
                    let dot: C64 =
                        (0..2).map(|k| v[k][i].conj() * v[k][j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(dot.re, want, epsilon = 1e-12);
                    assert_abs_diff_eq!(dot.im, 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn canonical_unitary_is_unitary_and_xy_is_iswap() {
        for g in [GateParams::xy(), GateParams::cnot(), GateParams::unchecked(0.31, 0.2, 0.17)] {
            let w = canonical_unitary(&g);
            let prod = w.t().mapv(|z| z.conj()).dot(&w);
            for r in 0..4 {
                for c in 0..4 {
                    let want = if r == c { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(prod[(r, c)].re, want, epsilon = 1e-12);
                    assert_abs_diff_eq!(prod[(r, c)].im, 0.0, epsilon = 1e-12);
                }
            }
        }
        let w = canonical_unitary(&GateParams::xy());
        // |01> -> i|10>, |10> -> i|01>, diagonal states untouched
        assert_abs_diff_eq!((w[(2, 1)] - C64::new(0.0, 1.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((w[(1, 2)] - C64::new(0.0, 1.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((w[(0, 0)] - C64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.row(1).iter().map(|z| z.norm_sqr()).sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn swap_rows_are_deterministic() {
        let rep = validate_gate(&GateParams::swap(), 1000, 7).unwrap();
        assert!(rep.row_deviation[0] < 1e-12, "uu row dev {}", rep.row_deviation[0]);
        assert!(rep.row_deviation[3] < 1e-12, "dd row dev {}", rep.row_deviation[3]);
    }

    #[test]
    fn xy_matches_analytic_at_moderate_samples() {
        let rep = validate_gate(&GateParams::xy(), 20_000, 3).unwrap();
        assert!(rep.deviation < 0.05, "deviation {}", rep.deviation);
    }

    #[test]
    fn deviation_shrinks_with_samples() {
        let small = validate_gate(&GateParams::cnot(), 2_000, 11).unwrap();
        let large = validate_gate(&GateParams::cnot(), 50_000, 11).unwrap();
        // 25x samples -> 5x expected shrink; allow a loose factor of 1.5
        assert!(
            large.deviation < small.deviation * 1.5,
            "no shrink: {} -> {}",
            small.deviation,
            large.deviation
        );
    }

    #[test]
    fn rejections() {
        assert!(validate_gate(&GateParams::haar_u4(), 10_000, 1).is_err());
        assert!(validate_gate(&GateParams::xy(), 10, 1).is_err());
    }
}
