//! Rank-bounded tensor-train representation of purity vectors.
//!
//! Beyond the dense cap the 2^n purity vector is stored as a chain of
//! three-leg tensors (left bond, physical label, right bond) in the primed
//! basis, where amplitudes are the purities themselves. Gates on adjacent
//! sites contract into the two-site block and split back by SVD under a
//! truncation policy; the wrap bond of a ring is handled by an explicit
//! swap network that drags the first site next to the last, applies the
//! gate, and drags it back.
//!
//! The steady state has Schmidt rank 2 for every cut and is built here in
//! closed form.

use ndarray::{Array1, Array2, Array3};
use ndarray_linalg::SVDInto;

use crate::error::{Error, Result};
use crate::gate::{swap_permutation, two_site_matrix, Basis, GateParams, TwoSiteMatrix};
use crate::protocol::{Bond, Boundary, Protocol};
use crate::purity::{
    finish_trace, steady_purity_sizes, BipartitionMask, RateTrace, TraceMeta, TraceRecord,
    NOISE_FLOOR,
};

/// Truncation policy for the two-site splits.
#[derive(Clone, Copy, Debug)]
pub struct TruncationPolicy {
    pub chi_max: usize,
    /// Relative singular-value cutoff (fraction of the largest value).
    pub svd_cutoff: f64,
    /// |I - I_inf| below this is double-precision noise.
    pub noise_floor: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { chi_max: 256, svd_cutoff: 1e-12, noise_floor: NOISE_FLOOR }
    }
}

/// Per-gate application statistics.
#[derive(Clone, Copy, Debug, Default)]
pub struct GateStats {
    pub chi: usize,
    pub discarded_weight: f64,
    /// Set when the bond cap forced a truncation with weight above 1e-8.
    pub truncation_warning: bool,
}

/// Tensor-train purity state in the primed basis.
#[derive(Clone, Debug)]
pub struct MpsPurityState {
    pub n: usize,
    /// Site tensors, shape (left bond, 2, right bond); boundary bonds are 1.
    pub tensors: Vec<Array3<f64>>,
    pub max_bond_seen: usize,
}

impl MpsPurityState {
    /// Current bond dimensions (n-1 interior bonds).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().take(self.n - 1).map(|t| t.shape()[2]).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Contract the train for one bit string; bit 1 is the down label,
    /// supplied per qubit in chain order.
    pub fn contract_bits<F: Fn(usize) -> usize>(&self, bit_of_site: F) -> f64 {
        let mut v = Array1::<f64>::ones(1);
        for (k, t) in self.tensors.iter().enumerate() {
            let b = bit_of_site(k + 1);
            let slice = t.index_axis(ndarray::Axis(1), b);
            v = slice.t().dot(&v);
        }
        debug_assert_eq!(v.len(), 1);
        v[0]
    }

    /// Purity amplitude for a bipartition mask (a qubit in A is the up
    /// label).
    pub fn contract_mask(&self, mask: &BipartitionMask) -> f64 {
        assert_eq!(mask.n(), self.n);
        self.contract_bits(|q| if mask.contains(q) { 0 } else { 1 })
    }

    /// Contract against a primed state index (qubit 1 = most significant
    /// bit).
    pub fn contract_index(&self, idx: usize) -> f64 {
        let n = self.n;
        self.contract_bits(|q| (idx >> crate::bits::bit_pos(n, q)) & 1)
    }
}

/// Product initial state: every purity one; bond dimension 1.
pub fn mps_initial(n: usize) -> Result<MpsPurityState> {
    if n < 2 {
        return Err(Error::InvalidProtocol("need at least 2 qubits".into()));
    }
    let tensors = (0..n)
        .map(|_| Array3::from_shape_fn((1, 2, 1), |_| 1.0))
        .collect();
    Ok(MpsPurityState { n, tensors, max_bond_seen: 1 })
}

/// Norms of the two orthogonal component vectors entering the rank-2
/// Schmidt structure of the steady state on p qubits:
/// |x_pm|^2 = 2 (5^p +- 4^p) / (2^p +- 1)^2.
pub fn steady_component_norm(p: usize, plus: bool) -> f64 {
    let five = 5.0f64.powi(p as i32);
    let four = 4.0f64.powi(p as i32);
    let two = 2.0f64.powi(p as i32);
    if plus {
        (2.0 * (five + four)).sqrt() / (two + 1.0)
    } else {
        (2.0 * (five - four)).sqrt() / (two - 1.0)
    }
}

/// Schmidt coefficients of the steady state across the cut after site r
/// (mu for the symmetric component, nu for the antisymmetric one).
pub fn steady_schmidt(n: usize, r: usize) -> (f64, f64, f64, f64) {
    let five_r = 5.0f64.powi(r as i32);
    let four_r = 4.0f64.powi(r as i32);
    let five_n = 5.0f64.powi(n as i32);
    let four_n = 4.0f64.powi(n as i32);
    let two_r = 2.0f64.powi(r as i32);
    let two_n = 2.0f64.powi(n as i32);
    let mu = |sign: f64| {
        (((five_r + sign * four_r) * (five_n * four_r + sign * five_r * four_n)) / five_r)
            .sqrt()
            / (two_r * (two_n + 1.0))
    };
    let nu = |sign: f64| {
        (((five_r + sign * four_r) * (five_n * four_r - sign * five_r * four_n)) / five_r)
            .sqrt()
            / (two_r * (two_n - 1.0))
    };
    (mu(1.0), mu(-1.0), nu(1.0), nu(-1.0))
}

/// Exact rank-2 tensor train of the steady state: contracting any bit
/// string yields the random-state purity of that bipartition.
pub fn steady_mps(n: usize) -> Result<MpsPurityState> {
    if n < 2 {
        return Err(Error::InvalidProtocol("need at least 2 qubits".into()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut tensors: Vec<Array3<f64>> = Vec::with_capacity(n);
    let (mu_p1, mu_m1, _, _) = steady_schmidt(n, 1);
    // first site: row vector (1, 2) boundary absorbed
    let mut t1 = Array3::zeros((1, 2, 2));
    t1[(0, 0, 0)] = s * mu_p1;
    t1[(0, 0, 1)] = -s * mu_m1;
    t1[(0, 1, 0)] = s * mu_p1;
    t1[(0, 1, 1)] = s * mu_m1;
    tensors.push(t1);
    for r in 2..n {
        // The remainder from site r onward holds n-r+1 qubits; its split
        // across the first of them supplies this site's matrix.
        let p = n - r + 1;
        let (mu_p, mu_m, nu_p, nu_m) = steady_schmidt(p, 1);
        let xp = steady_component_norm(p, true);
        let xm = steady_component_norm(p, false);
        let mut t = Array3::zeros((2, 2, 2));
        // up label
        t[(0, 0, 0)] = s * mu_p / xp;
        t[(0, 0, 1)] = -s * mu_m / xp;
        t[(1, 0, 0)] = -s * nu_m / xm;
        t[(1, 0, 1)] = s * nu_p / xm;
        // down label
        t[(0, 1, 0)] = s * mu_p / xp;
        t[(0, 1, 1)] = s * mu_m / xp;
        t[(1, 1, 0)] = s * nu_m / xm;
        t[(1, 1, 1)] = s * nu_p / xm;
        tensors.push(t);
    }
    let mut tn = Array3::zeros((2, 2, 1));
    tn[(0, 0, 0)] = s;
    tn[(1, 0, 0)] = -s;
    tn[(0, 1, 0)] = s;
    tn[(1, 1, 0)] = s;
    tensors.push(tn);
    Ok(MpsPurityState { n, tensors, max_bond_seen: 2 })
}

/// Apply a two-site matrix to adjacent chain positions (1-based site of the
/// left tensor), splitting back by SVD in the square-root-of-singular-values
/// gauge.
fn apply_adjacent(
    state: &mut MpsPurityState,
    m: &[[f64; 4]; 4],
    left_site: usize,
    policy: &TruncationPolicy,
) -> Result<GateStats> {
    let a = left_site - 1;
    let (dl, _, dm) = {
        let s = state.tensors[a].shape();
        (s[0], s[1], s[2])
    };
    let dr = state.tensors[a + 1].shape()[2];
    // two-site block theta[(l, s1), (s2, r)]
    let mut theta = Array2::<f64>::zeros((dl * 2, 2 * dr));
    for l in 0..dl {
        for s1 in 0..2 {
            for s2 in 0..2 {
                for r in 0..dr {
                    let mut acc = 0.0;
                    for k in 0..dm {
                        acc += state.tensors[a][(l, s1, k)] * state.tensors[a + 1][(k, s2, r)];
                    }
                    theta[(l * 2 + s1, s2 * dr + r)] = acc;
                }
            }
        }
    }
    // gate contraction on the physical labels
    let mut out = Array2::<f64>::zeros((dl * 2, 2 * dr));
    for l in 0..dl {
        for r in 0..dr {
            for s1 in 0..2 {
                for s2 in 0..2 {
                    let row = 2 * s1 + s2;
                    let mut acc = 0.0;
                    for t1 in 0..2 {
                        for t2 in 0..2 {
                            acc += m[row][2 * t1 + t2] * theta[(l * 2 + t1, t2 * dr + r)];
                        }
                    }
                    out[(l * 2 + s1, s2 * dr + r)] = acc;
                }
            }
        }
    }
    let (u, sv, vt) = out.svd_into(true, true)?;
    let u = u.unwrap();
    let vt = vt.unwrap();
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let total: f64 = sv.iter().map(|x| x * x).sum();
    let mut keep = sv.iter().filter(|&&x| x > policy.svd_cutoff * smax).count().max(1);
    let capped = keep > policy.chi_max;
    keep = keep.min(policy.chi_max);
    let discarded: f64 = sv.iter().skip(keep).map(|x| x * x).sum::<f64>() / total.max(1e-300);
    let mut tl = Array3::zeros((dl, 2, keep));
    let mut tr = Array3::zeros((keep, 2, dr));
    for k in 0..keep {
        let w = sv[k].sqrt();
        for l in 0..dl {
            for s1 in 0..2 {
                tl[(l, s1, k)] = u[(l * 2 + s1, k)] * w;
            }
        }
        for r in 0..dr {
            for s2 in 0..2 {
                tr[(k, s2, r)] = vt[(k, s2 * dr + r)] * w;
            }
        }
    }
    state.tensors[a] = tl;
    state.tensors[a + 1] = tr;
    state.max_bond_seen = state.max_bond_seen.max(keep);
    Ok(GateStats {
        chi: keep,
        discarded_weight: discarded,
        truncation_warning: capped && discarded > 1e-8,
    })
}

/// Apply a gate on a bond: adjacent bonds directly, the ring's wrap bond
/// (n,1) through a swap network. Other long-range bonds are unsupported.
pub fn mps_apply_gate(
    state: &mut MpsPurityState,
    m: &TwoSiteMatrix,
    bond: Bond,
    policy: &TruncationPolicy,
) -> Result<GateStats> {
    if m.basis != Basis::Primed {
        return Err(Error::BasisMismatch { state: Basis::Primed, matrix: m.basis });
    }
    let n = state.n;
    let (lo, hi) = if bond.i < bond.j { (bond.i, bond.j) } else { (bond.j, bond.i) };
    if hi == lo + 1 {
        return apply_adjacent(state, &m.m, lo, policy);
    }
    if lo == 1 && hi == n {
        // drag site 1 rightward until it neighbors site n, apply, drag back
        let swap = swap_permutation(Basis::Primed);
        let mut agg = GateStats::default();
        let fold = |s: GateStats, agg: &mut GateStats| {
            agg.chi = agg.chi.max(s.chi);
            agg.discarded_weight += s.discarded_weight;
            agg.truncation_warning |= s.truncation_warning;
        };
        for k in 1..n - 1 {
            fold(apply_adjacent(state, &swap.m, k, policy)?, &mut agg);
        }
        fold(apply_adjacent(state, &m.m, n - 1, policy)?, &mut agg);
        for k in (1..n - 1).rev() {
            fold(apply_adjacent(state, &swap.m, k, policy)?, &mut agg);
        }
        return Ok(agg);
    }
    Err(Error::InvalidProtocol(format!(
        "MPS engine handles nearest-neighbor bonds and the wrap bond only, got ({}, {})",
        bond.i, bond.j
    )))
}

/// MPS purity trace with the dense trace's record schema plus bond and
/// truncation columns.
pub fn mps_purity_series(
    n: usize,
    prot: &Protocol,
    g: &GateParams,
    mask: &BipartitionMask,
    t_max: usize,
    policy: &TruncationPolicy,
) -> Result<RateTrace> {
    if n != prot.n || n != mask.n() {
        return Err(Error::InvalidProtocol("protocol/mask qubit count mismatch".into()));
    }
    let m = two_site_matrix(g, Basis::Primed);
    let mut state = mps_initial(n)?;
    let i_inf = steady_purity_sizes(n, mask.n_a());
    let mut warnings = Vec::new();
    let mut records = Vec::with_capacity(t_max + 1);
    let push = |state: &MpsPurityState, t: usize, chi: usize, dw: f64,
                    records: &mut Vec<TraceRecord>| {
        let purity = state.contract_mask(mask);
        let delta = purity - i_inf;
        records.push(TraceRecord {
            t,
            purity,
            delta,
            ds2_bits: 0.0,
            rate_bits: None,
            sign_flip: false,
            reliable: delta.abs() >= policy.noise_floor,
            chi_max: Some(chi),
            discarded_weight: Some(dw),
        });
    };
    push(&state, 0, 1, 0.0, &mut records);
    for t in 1..=t_max {
        let mut chi = 0usize;
        let mut dw = 0.0f64;
        let mut warned = false;
        for &b in &prot.bonds {
            let stats = mps_apply_gate(&mut state, &m, b, policy)?;
            chi = chi.max(stats.chi);
            dw = dw.max(stats.discarded_weight);
            warned |= stats.truncation_warning;
        }
        if warned {
            warnings.push(format!("period {t}: bond cap reached with discarded weight > 1e-8"));
        }
        push(&state, t, chi, dw, &mut records);
    }
    finish_trace(&mut records);
    // points below the noise floor are flagged unreliable
    for r in records.iter_mut() {
        if r.delta.abs() < policy.noise_floor {
            r.reliable = false;
            r.rate_bits = None;
        }
    }
    let area = match prot.boundary {
        Boundary::Open => 1.0,
        Boundary::Periodic => 2.0,
    };
    Ok(RateTrace {
        records,
        meta: TraceMeta { n, mask: *mask, steady: i_inf, area, engine: "mps", warnings },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::build_staircase;
    use crate::purity::{purity_series, steady_vector, DenseOpts};
    use approx::assert_abs_diff_eq;

    #[test]
    fn initial_state_contracts_to_one() {
        let st = mps_initial(3).unwrap();
        assert_eq!(st.tensors.len(), 3);
        for t in &st.tensors {
            assert_eq!(t.shape(), &[1, 2, 1]);
        }
        for idx in 0..8usize {
            assert_abs_diff_eq!(st.contract_index(idx), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn steady_mps_matches_closed_form() {
        for n in [2usize, 4, 7, 10] {
            let st = steady_mps(n).unwrap();
            assert!(st.max_bond() <= 2);
            for idx in 0..(1usize << n) {
                let w = idx.count_ones() as usize;
                let expect = steady_purity_sizes(n, n - w);
                assert_abs_diff_eq!(st.contract_index(idx), expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn steady_mps_matches_dense_steady_vector() {
        for n in [6usize, 12] {
            let st = steady_mps(n).unwrap();
            let dense = steady_vector(n, Basis::Primed);
            for idx in 0..(1usize << n) {
                assert_abs_diff_eq!(st.contract_index(idx), dense.coeffs[idx], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn steady_mps_special_masks() {
        let st = steady_mps(4).unwrap();
        assert_abs_diff_eq!(
            st.contract_mask(&BipartitionMask::empty(4).unwrap()),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            st.contract_mask(&BipartitionMask::half(4).unwrap()),
            8.0 / 17.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn steady_mps_is_gate_fixed_point() {
        let n = 8;
        let policy = TruncationPolicy::default();
        let g = two_site_matrix(&GateParams::xy(), Basis::Primed);
        let mut st = steady_mps(n).unwrap();
        let reference: Vec<f64> = (0..1usize << n).map(|i| st.contract_index(i)).collect();
        for bond in [Bond::new(3, 4), Bond::new(1, 2), Bond::new(8, 1)] {
            mps_apply_gate(&mut st, &g, bond, &policy).unwrap();
        }
        for (idx, want) in reference.iter().enumerate() {
            assert_abs_diff_eq!(st.contract_index(idx), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_brick_layer_keeps_bond_small() {
        let n = 8;
        let policy = TruncationPolicy::default();
        let g = two_site_matrix(&GateParams::xy(), Basis::Primed);
        let mut st = mps_initial(n).unwrap();
        for k in (1..n).step_by(2) {
            mps_apply_gate(&mut st, &g, Bond::new(k, k + 1), &policy).unwrap();
        }
        assert!(st.max_bond() <= 4);
    }

    #[test]
    fn mps_trace_agrees_with_dense_engine() {
        let n = 10;
        let prot = build_staircase(n, Boundary::Open).unwrap();
        let g = GateParams::xy();
        let mask = BipartitionMask::half(n).unwrap();
        let policy = TruncationPolicy { chi_max: 64, ..Default::default() };
        let dense = purity_series(n, &prot, &g, &mask, 8, DenseOpts::default()).unwrap();
        let mps = mps_purity_series(n, &prot, &g, &mask, 8, &policy).unwrap();
        for (a, b) in dense.records.iter().zip(&mps.records) {
            assert_abs_diff_eq!(a.purity, b.purity, epsilon = 1e-9);
        }
    }

    #[test]
    fn wrap_bond_agrees_with_dense_engine() {
        let n = 8;
        let prot = build_staircase(n, Boundary::Periodic).unwrap();
        let g = GateParams::unchecked(0.9, 0.7, 0.3);
        let mask = BipartitionMask::half(n).unwrap();
        let policy = TruncationPolicy { chi_max: 64, ..Default::default() };
        let dense = purity_series(n, &prot, &g, &mask, 5, DenseOpts::default()).unwrap();
        let mps = mps_purity_series(n, &prot, &g, &mask, 5, &policy).unwrap();
        for (a, b) in dense.records.iter().zip(&mps.records) {
            assert_abs_diff_eq!(a.purity, b.purity, epsilon = 1e-9);
        }
    }

    #[test]
    fn complement_symmetry_of_contractions() {
        let n = 9;
        let prot = build_staircase(n, Boundary::Open).unwrap();
        let g = GateParams::xy();
        let policy = TruncationPolicy::default();
        let m = two_site_matrix(&g, Basis::Primed);
        let mut st = mps_initial(n).unwrap();
        for _ in 0..3 {
            for &b in &prot.bonds {
                mps_apply_gate(&mut st, &m, b, &policy).unwrap();
            }
        }
        let mask = BipartitionMask::from_bits("110010011").unwrap();
        let a = st.contract_mask(&mask);
        let b = st.contract_mask(&mask.complement());
        assert_abs_diff_eq!(a, b, epsilon = 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn tightening_cutoff_does_not_hurt() {
        // The bond cap must stay unbinding here so the cutoff is the only
        // source of truncation.
        let n = 14;
        let prot = build_staircase(n, Boundary::Open).unwrap();
        let g = GateParams::xy();
        let mask = BipartitionMask::half(n).unwrap();
        let dense = purity_series(n, &prot, &g, &mask, 5, DenseOpts::default()).unwrap();
        let dev = |cutoff: f64| -> f64 {
            let policy =
                TruncationPolicy { chi_max: 4096, svd_cutoff: cutoff, ..Default::default() };
            let mps = mps_purity_series(n, &prot, &g, &mask, 5, &policy).unwrap();
            dense
                .records
                .iter()
                .zip(&mps.records)
                .map(|(a, b)| (a.purity - b.purity).abs())
                .fold(0.0, f64::max)
        };
        let loose = dev(1e-4);
        let mid = dev(1e-8);
        let tight = dev(1e-12);
        assert!(mid <= loose + 1e-12, "mid {mid} vs loose {loose}");
        assert!(tight <= mid + 1e-12, "tight {tight} vs mid {mid}");
        assert!(tight < 1e-9, "tight cutoff deviation {tight}");
    }

    #[test]
    fn rejects_distant_bonds() {
        let mut st = mps_initial(6).unwrap();
        let g = two_site_matrix(&GateParams::xy(), Basis::Primed);
        let policy = TruncationPolicy::default();
        assert!(mps_apply_gate(&mut st, &g, Bond::new(2, 5), &policy).is_err());
    }
}
