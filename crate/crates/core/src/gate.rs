//! Single-gate transfer matrices.
//!
//! A 2-qubit gate in canonical form is parameterized by three reals
//! (a_x, a_y, a_z). Averaging over the Haar-random 1-qubit unitaries that
//! dress it yields a 4x4 matrix acting on the four bipartition labels
//! (uu, ud, du, dd) of the gate's two sites. The matrix exists in two bases:
//! the "primed" basis, where vector components are literally purities, and a
//! "rotated" basis reached by a per-site similarity transform in which the
//! matrix is symmetric and block diagonal in parity.

use crate::error::{Error, Result};

/// Canonical 2-qubit gate parameters.
///
/// The `haar_u4` flag selects the fully random U(4) gate instead; it is a
/// pseudo-gate whose averaged action corresponds to effective coefficients
/// u = 0, v = -3/5, with the canonical parameters ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateParams {
    pub a_x: f64,
    pub a_y: f64,
    pub a_z: f64,
    pub haar_u4: bool,
}

impl GateParams {
    /// Canonical constructor, requiring 0 <= a_z <= a_y <= a_x <= 1.
    pub fn canonical(a_x: f64, a_y: f64, a_z: f64) -> Result<Self> {
        if !(0.0 <= a_z && a_z <= a_y && a_y <= a_x && a_x <= 1.0) {
            return Err(Error::InvalidGate(format!(
                "canonical parameters must satisfy 0 <= a_z <= a_y <= a_x <= 1, got ({a_x}, {a_y}, {a_z})"
            )));
        }
        Ok(Self { a_x, a_y, a_z, haar_u4: false })
    }

    /// Unchecked constructor for parameter scans outside the canonical cell.
    pub fn unchecked(a_x: f64, a_y: f64, a_z: f64) -> Self {
        Self { a_x, a_y, a_z, haar_u4: false }
    }

    /// The Haar-random U(4) pseudo-gate.
    pub fn haar_u4() -> Self {
        Self { a_x: 0.0, a_y: 0.0, a_z: 0.0, haar_u4: true }
    }

    /// XY gate (iSWAP), parameters (1, 1, 0).
    pub fn xy() -> Self {
        Self::unchecked(1.0, 1.0, 0.0)
    }

    /// XXZ gate (1, 1, a_z).
    pub fn xxz(a_z: f64) -> Self {
        Self::unchecked(1.0, 1.0, a_z)
    }

    /// CNOT gate, parameters (1, 0, 0).
    pub fn cnot() -> Self {
        Self::unchecked(1.0, 0.0, 0.0)
    }

    /// SWAP gate, parameters (1, 1, 1); generates no entanglement.
    pub fn swap() -> Self {
        Self::unchecked(1.0, 1.0, 1.0)
    }

    /// The Sycamore gate, parameters (1, 1, 1/6).
    pub fn sycamore() -> Self {
        Self::unchecked(1.0, 1.0, 1.0 / 6.0)
    }
}

/// Derived coefficients of the averaged gate action.
///
/// All fields are exact algebraic functions of (u, v):
/// h = (3-v)/9, b_pm = (3 +- 6u + 5v)/36, d = (39 + 6u + 5v)/72,
/// J_x = (9 - 2u - v)/24, J_y = (3 - 2u + v)/24, J_z = (3 - 6u + 5v)/72,
/// and the entangling power of the gate equals h/2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateCoefficients {
    pub u: f64,
    pub v: f64,
    pub h: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    pub d: f64,
    pub j_x: f64,
    pub j_y: f64,
    pub j_z: f64,
    pub entangling_power: f64,
}

/// Coefficients (u, v) and everything derived from them.
///
/// u is the sum of cos(pi a) over the three parameters, v the sum of their
/// pairwise products; the Haar-U(4) pseudo-gate uses (0, -3/5) exactly.
pub fn canonical_coeffs(g: &GateParams) -> GateCoefficients {
    let (u, v) = if g.haar_u4 {
        (0.0, -0.6)
    } else {
        let cx = (std::f64::consts::PI * g.a_x).cos();
        let cy = (std::f64::consts::PI * g.a_y).cos();
        let cz = (std::f64::consts::PI * g.a_z).cos();
        (cx + cy + cz, cx * cy + cx * cz + cy * cz)
    };
    let h = (3.0 - v) / 9.0;
    GateCoefficients {
        u,
        v,
        h,
        b_plus: (3.0 + 6.0 * u + 5.0 * v) / 36.0,
        b_minus: (3.0 - 6.0 * u + 5.0 * v) / 36.0,
        d: (39.0 + 6.0 * u + 5.0 * v) / 72.0,
        j_x: (9.0 - 2.0 * u - v) / 24.0,
        j_y: (3.0 - 2.0 * u + v) / 24.0,
        j_z: (3.0 - 6.0 * u + 5.0 * v) / 72.0,
        entangling_power: h / 2.0,
    }
}

/// Basis in which a two-site matrix or purity vector is expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// Components are purities per bipartition.
    Primed,
    /// Image under the per-site similarity transform; gate matrices are
    /// symmetric and parity block diagonal here.
    Rotated,
}

/// A 4x4 two-site transfer matrix with its basis tag. Rows and columns are
/// ordered (uu, ud, du, dd).
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSiteMatrix {
    pub m: [[f64; 4]; 4],
    pub basis: Basis,
}

/// Build the averaged two-site matrix for a gate in the requested basis.
pub fn two_site_matrix(g: &GateParams, basis: Basis) -> TwoSiteMatrix {
    let c = canonical_coeffs(g);
    let m = match basis {
        Basis::Primed => [
            [1.0, 0.0, 0.0, 0.0],
            [c.h, c.b_plus, c.b_minus, c.h],
            [c.h, c.b_minus, c.b_plus, c.h],
            [0.0, 0.0, 0.0, 1.0],
        ],
        Basis::Rotated => {
            let u_plus = (3.0 + c.u) / 6.0;
            let u_minus = (3.0 - c.u) / 6.0;
            [
                [(33.0 + c.v) / 36.0, 0.0, 0.0, (3.0 - c.v) / 12.0],
                [0.0, u_plus, u_minus, 0.0],
                [0.0, u_minus, u_plus, 0.0],
                [(3.0 - c.v) / 12.0, 0.0, 0.0, (1.0 + c.v) / 4.0],
            ]
        }
    };
    TwoSiteMatrix { m, basis }
}

/// The rotated matrix assembled from its Pauli-string form,
/// d 1 + J_x XX + J_y YY + J_z ZZ + (h/2)(Z1 + Z2).
///
/// Cross-checks the direct entry formula; the two routes must agree to
/// machine precision.
pub fn two_site_from_pauli(g: &GateParams) -> TwoSiteMatrix {
    let c = canonical_coeffs(g);
    // Real 4x4 representations in the (uu, ud, du, dd) ordering.
    let xx = [[0., 0., 0., 1.], [0., 0., 1., 0.], [0., 1., 0., 0.], [1., 0., 0., 0.]];
    let yy = [[0., 0., 0., -1.], [0., 0., 1., 0.], [0., 1., 0., 0.], [-1., 0., 0., 0.]];
    let zz = [[1., 0., 0., 0.], [0., -1., 0., 0.], [0., 0., -1., 0.], [0., 0., 0., 1.]];
    let zsum = [[2., 0., 0., 0.], [0., 0., 0., 0.], [0., 0., 0., 0.], [0., 0., 0., -2.]];
    let mut m = [[0.0f64; 4]; 4];
    for r in 0..4 {
        for s in 0..4 {
            m[r][s] = c.j_x * xx[r][s] + c.j_y * yy[r][s] + c.j_z * zz[r][s]
                + 0.5 * c.h * zsum[r][s];
            if r == s {
                m[r][s] += c.d;
            }
        }
    }
    TwoSiteMatrix { m, basis: Basis::Rotated }
}

/// The constant per-site basis change A and its inverse. Conjugating the
/// primed matrix by A (x) A yields the rotated matrix.
#[derive(Clone, Copy, Debug)]
pub struct BasisTransform {
    pub a: [[f64; 2]; 2],
    pub a_inv: [[f64; 2]; 2],
}

impl BasisTransform {
    pub fn new() -> Self {
        let s = 1.0 / 3.0f64.sqrt();
        BasisTransform {
            a: [[1.0, -s], [1.0, s]],
            a_inv: [[0.5, 0.5], [-0.5 / s, 0.5 / s]],
        }
    }
}

impl Default for BasisTransform {
    fn default() -> Self {
        Self::new()
    }
}

/// Eigensystem of the rotated two-site matrix. The four eigenvectors are
/// independent of the gate; only the last two eigenvalues depend on (u, v):
///
/// (3,0,0,1) -> 1,  (0,1,1,0) -> 1,  (0,-1,1,0) -> u/3,  (-1,0,0,3) -> (3+5v)/18.
pub fn gate_eigensystem(g: &GateParams) -> [([f64; 4], f64); 4] {
    let c = canonical_coeffs(g);
    [
        ([3.0, 0.0, 0.0, 1.0], 1.0),
        ([0.0, 1.0, 1.0, 0.0], 1.0),
        ([0.0, -1.0, 1.0, 0.0], c.u / 3.0),
        ([-1.0, 0.0, 0.0, 3.0], (3.0 + 5.0 * c.v) / 18.0),
    ]
}

/// Two-site SWAP on the bipartition space: the exact permutation exchanging
/// ud and du. It has the same matrix in both bases.
pub fn swap_permutation(basis: Basis) -> TwoSiteMatrix {
    TwoSiteMatrix {
        m: [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ],
        basis,
    }
}

/// Conjugate a two-site matrix by T (x) T for a 2x2 T, returning T2^-1 M T2
/// with T2 = T (x) T supplied via `t` and `t_inv`.
pub fn conjugate_two_site(
    m: &[[f64; 4]; 4],
    t: &[[f64; 2]; 2],
    t_inv: &[[f64; 2]; 2],
) -> [[f64; 4]; 4] {
    let kron = |a: &[[f64; 2]; 2]| -> [[f64; 4]; 4] {
        let mut k = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        k[2 * i + p][2 * j + q] = a[i][j] * a[p][q];
                    }
                }
            }
        }
        k
    };
    let t2 = kron(t);
    let t2i = kron(t_inv);
    let mut tmp = [[0.0; 4]; 4];
    for r in 0..4 {
        for s in 0..4 {
            tmp[r][s] = (0..4).map(|k| m[r][k] * t2[k][s]).sum();
        }
    }
    let mut out = [[0.0; 4]; 4];
    for r in 0..4 {
        for s in 0..4 {
            out[r][s] = (0..4).map(|k| t2i[r][k] * tmp[k][s]).sum();
        }
    }
    out
}
