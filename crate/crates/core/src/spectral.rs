//! Non-Hermitian spectral analysis of the one-period transfer matrix.
//!
//! The one-period matrix is a product of symmetric two-site matrices but is
//! itself non-symmetric, so its eigenvalues are complex and its left and
//! right eigenvectors differ. Expansion coefficients over the non-orthogonal
//! right eigenbasis can grow exponentially with system size; the routines
//! here expose them directly, together with the diagnostics that reveal
//! rates faster or slower than the eigenvalue gap suggests.

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::{Eig, EigVals, LeastSquaresSvd};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits;
use crate::error::{Error, Result};
use crate::gate::{two_site_matrix, Basis, GateParams};
use crate::protocol::Protocol;
use crate::purity::{apply_two_site_kernel, steady_vector, BipartitionMask};

/// Modulus tolerance used when counting eigenvalues near a circle radius.
pub const COUNT_TOL: f64 = 1e-6;

/// Complex distance below which eigenvalues are treated as one degenerate
/// cluster during biorthonormalization.
pub const CLUSTER_TOL: f64 = 1e-7;

/// One-period transfer matrix on the full 2^n space, built by applying the
/// protocol to every basis vector. Intended for small n.
pub fn period_matrix(n: usize, prot: &Protocol, g: &GateParams, basis: Basis) -> Result<Array2<f64>> {
    if n != prot.n {
        return Err(Error::InvalidProtocol("protocol qubit count mismatch".into()));
    }
    if n > 13 {
        return Err(Error::BudgetExceeded(format!("full period matrix at n={n} (cap 13)")));
    }
    let m = two_site_matrix(g, basis);
    let dim = 1usize << n;
    let mut out = Array2::zeros((dim, dim));
    let mut col = vec![0.0f64; dim];
    for k in 0..dim {
        col.fill(0.0);
        col[k] = 1.0;
        for &b in &prot.bonds {
            apply_two_site_kernel(&mut col, &m.m, n, b);
        }
        for r in 0..dim {
            out[(r, k)] = col[r];
        }
    }
    Ok(out)
}

/// The even-parity sector of the rotated one-period matrix (dimension
/// 2^(n-1)); this is the sector that carries physical purity evolution.
pub fn even_sector_matrix(n: usize, prot: &Protocol, g: &GateParams) -> Result<Array2<f64>> {
    if n != prot.n {
        return Err(Error::InvalidProtocol("protocol qubit count mismatch".into()));
    }
    if n > 14 {
        return Err(Error::BudgetExceeded(format!("even-sector matrix at n={n} (cap 14)")));
    }
    let m = two_site_matrix(g, Basis::Rotated);
    let even = bits::even_sector_indices(n);
    let dim = even.len();
    let full = 1usize << n;
    let mut out = Array2::zeros((dim, dim));
    let mut col = vec![0.0f64; full];
    for (kc, &idx) in even.iter().enumerate() {
        col.fill(0.0);
        col[idx] = 1.0;
        for &b in &prot.bonds {
            apply_two_site_kernel(&mut col, &m.m, n, b);
        }
        for (kr, &r) in even.iter().enumerate() {
            out[(kr, kc)] = col[r];
        }
    }
    Ok(out)
}

/// Eigenvalues only, sorted by modulus descending.
pub fn spectrum(m: &Array2<f64>) -> Result<Vec<C64>> {
    let mut vals: Vec<C64> = m.eigvals()?.to_vec();
    vals.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    Ok(vals)
}

/// Greatest matched distance between two eigenvalue multisets (infinite when
/// the lengths differ). Greedy nearest matching.
pub fn spectrum_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let mut best = f64::INFINITY;
        let mut best_k = usize::MAX;
        for (k, y) in b.iter().enumerate() {
            if !used[k] {
                let d = (x - y).norm();
                if d < best {
                    best = d;
                    best_k = k;
                }
            }
        }
        used[best_k] = true;
        worst = worst.max(best);
    }
    worst
}

/// An eigenvalue with its biorthonormalized right and left vectors.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: C64,
    pub right: Array1<C64>,
    pub left: Array1<C64>,
    /// +1 / -1 parity of the right vector support, when the matrix lives on
    /// the full 2^n space and the vector has a sharp parity.
    pub parity: Option<i8>,
    /// Set when the pair could not be biorthonormalized within tolerance.
    pub defective: bool,
}

/// Full eigendecomposition with left and right vectors.
///
/// Right vectors come from the matrix itself, left vectors from its
/// transpose; the two spectra are matched greedily, eigenvalues closer than
/// [`CLUSTER_TOL`] are biorthonormalized as a block, and blocks whose overlap
/// matrix is numerically singular are flagged defective rather than forced.
pub fn full_spectrum(m: &Array2<f64>) -> Result<Vec<EigenPair>> {
    let dim = m.nrows();
    if dim > 1 << 13 {
        return Err(Error::BudgetExceeded(format!("dense eigendecomposition at dim {dim}")));
    }
    let (vals_r, vecs_r) = m.eig()?;
    let (vals_l, vecs_l) = m.t().to_owned().eig()?;

    // Sort right eigenpairs by modulus descending.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| vals_r[b].norm().partial_cmp(&vals_r[a].norm()).unwrap());

    // Match each right eigenvalue with the nearest unused left eigenvalue.
    let mut used = vec![false; dim];
    let mut left_of = vec![usize::MAX; dim];
    for &k in &order {
        let mut best = f64::INFINITY;
        let mut best_j = usize::MAX;
        for j in 0..dim {
            if !used[j] {
                let d = (vals_r[k] - vals_l[j]).norm();
                if d < best {
                    best = d;
                    best_j = j;
                }
            }
        }
        used[best_j] = true;
        left_of[k] = best_j;
    }

    let mut pairs: Vec<EigenPair> = order
        .iter()
        .map(|&k| {
            let mut right = vecs_r.column(k).to_owned();
            // Gauge: unit norm, largest component rotated to the positive
            // real axis, so coefficients are reproducible.
            let nrm = right.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            right.mapv_inplace(|z| z / nrm);
            let lead = right
                .iter()
                .cloned()
                .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
                .unwrap();
            let phase = lead / lead.norm();
            right.mapv_inplace(|z| z / phase);
            EigenPair {
                value: vals_r[k],
                right,
                left: vecs_l.column(left_of[k]).to_owned(),
                parity: None,
                defective: false,
            }
        })
        .collect();

    // Biorthonormalize cluster by cluster.
    let mut lo = 0;
    while lo < dim {
        let mut hi = lo + 1;
        while hi < dim && (pairs[hi].value - pairs[hi - 1].value).norm() <= CLUSTER_TOL {
            hi += 1;
        }
        let k = hi - lo;
        if k == 1 {
            let p = &mut pairs[lo];
            let ovl: C64 = p.left.iter().zip(p.right.iter()).map(|(l, r)| l * r).sum();
            if ovl.norm() < 1e-12 {
                p.defective = true;
            } else {
                let inv = C64::new(1.0, 0.0) / ovl;
                p.left.mapv_inplace(|z| z * inv);
            }
        } else {
            // overlap G[a][b] = <L_a | R_b> (bilinear)
            let mut gmat = Array2::<C64>::zeros((k, k));
            for a in 0..k {
                for b in 0..k {
                    gmat[(a, b)] = pairs[lo + a]
                        .left
                        .iter()
                        .zip(pairs[lo + b].right.iter())
                        .map(|(l, r)| l * r)
                        .sum();
                }
            }
            match invert_complex(&gmat) {
                Some(ginv) => {
                    let old: Vec<Array1<C64>> =
                        (0..k).map(|a| pairs[lo + a].left.clone()).collect();
                    for b in 0..k {
                        let mut newl = Array1::<C64>::zeros(old[0].len());
                        for a in 0..k {
                            // left_b' = sum_a (G^-1)[b][a] left_a
                            let w = ginv[(b, a)];
                            newl.zip_mut_with(&old[a], |x, y| *x += w * y);
                        }
                        pairs[lo + b].left = newl;
                    }
                }
                None => {
                    for p in &mut pairs[lo..hi] {
                        p.defective = true;
                    }
                }
            }
        }
        lo = hi;
    }
    Ok(pairs)
}

/// Gauss-Jordan inverse of a small complex matrix; None when singular.
fn invert_complex(m: &Array2<C64>) -> Option<Array2<C64>> {
    let k = m.nrows();
    let mut a = m.clone();
    let mut inv = Array2::<C64>::eye(k);
    for col in 0..k {
        let (piv, mag) = (col..k)
            .map(|r| (r, a[(r, col)].norm()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if mag < 1e-13 {
            return None;
        }
        if piv != col {
            for c in 0..k {
                a.swap((piv, c), (col, c));
                inv.swap((piv, c), (col, c));
            }
        }
        let d = a[(col, col)];
        for c in 0..k {
            a[(col, c)] /= d;
            inv[(col, c)] /= d;
        }
        for r in 0..k {
            if r != col {
                let f = a[(r, col)];
                if f.norm() > 0.0 {
                    for c in 0..k {
                        let acc = a[(col, c)];
                        let icc = inv[(col, c)];
                        a[(r, c)] -= f * acc;
                        inv[(r, c)] -= f * icc;
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Label each pair's parity from the support of its right vector; only
/// meaningful when the matrix acts on the full 2^n space.
pub fn label_parities(pairs: &mut [EigenPair], n: usize) {
    for p in pairs.iter_mut() {
        p.parity = vector_parity(&p.right.view(), n);
    }
}

pub fn vector_parity(v: &ArrayView1<C64>, n: usize) -> Option<i8> {
    assert_eq!(v.len(), 1 << n);
    let mut we = 0.0;
    let mut wo = 0.0;
    for (idx, z) in v.iter().enumerate() {
        if bits::even_parity(idx) {
            we += z.norm_sqr();
        } else {
            wo += z.norm_sqr();
        }
    }
    let tot = we + wo;
    if we / tot > 1.0 - 1e-9 {
        Some(1)
    } else if wo / tot > 1.0 - 1e-9 {
        Some(-1)
    } else {
        None
    }
}

/// Rotated-basis projection vector for a bipartition: the image of the
/// primed unit vector under the transposed basis change. Entry k is the
/// product over qubits of A[mask bit, k bit].
pub fn rotated_projection(n: usize, mask: &BipartitionMask) -> Vec<f64> {
    let bt = crate::gate::BasisTransform::new();
    let h = mask.primed_index();
    let dim = 1usize << n;
    let mut v = vec![0.0f64; dim];
    for (k, out) in v.iter_mut().enumerate() {
        let mut w = 1.0;
        for q in 1..=n {
            let pos = bits::bit_pos(n, q);
            w *= bt.a[(h >> pos) & 1][(k >> pos) & 1];
        }
        *out = w;
    }
    v
}

/// Restrict a full-space vector to the even-parity sector.
pub fn even_restrict(v: &[f64]) -> Vec<f64> {
    v.iter()
        .enumerate()
        .filter(|(k, _)| bits::even_parity(*k))
        .map(|(_, &x)| x)
        .collect()
}

/// Even-sector initial vector (unit weight on the all-up state).
pub fn even_phi0(n: usize) -> Vec<f64> {
    let mut v = vec![0.0f64; 1 << (n - 1)];
    v[0] = 1.0;
    v
}

/// Even-sector projection vector for a mask.
pub fn even_phi_mask(n: usize, mask: &BipartitionMask) -> Vec<f64> {
    even_restrict(&rotated_projection(n, mask))
}

/// Spectral expansion of the purity evolution: c_j are the overlaps of the
/// initial vector with the left eigenvectors, d_j additionally weight by the
/// projection vector, so that I(t) = sum_j d_j lambda_j^t.
#[derive(Clone, Debug)]
pub struct SpectralReport {
    pub pairs: Vec<EigenPair>,
    pub c: Vec<C64>,
    pub d: Vec<C64>,
    /// Number of modulus clusters within [`COUNT_TOL`].
    pub cluster_count: usize,
    pub defective_count: usize,
    /// Sum of all d_j (equals I(0) when the decomposition is complete).
    pub reconstruction_t0: C64,
}

impl SpectralReport {
    /// Reconstruct I(t) - I_inf by summing every non-steady mode.
    pub fn reconstruct_delta(&self, t: u32) -> C64 {
        self.pairs
            .iter()
            .zip(&self.d)
            .filter(|(p, _)| !p.defective && (p.value - C64::new(1.0, 0.0)).norm() > 1e-9)
            .map(|(p, d)| d * p.value.powu(t))
            .sum()
    }

    /// Mode indices whose eigenvalue modulus falls within [lo, hi].
    pub fn modes_in_band(&self, lo: f64, hi: f64) -> Vec<usize> {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let m = p.value.norm();
                m >= lo && m <= hi
            })
            .map(|(k, _)| k)
            .collect()
    }
}

pub fn expansion_report(pairs: Vec<EigenPair>, phi0: &[f64], phi_half: &[f64]) -> SpectralReport {
    let to_c = |v: &[f64]| -> Array1<C64> {
        Array1::from_iter(v.iter().map(|&x| C64::new(x, 0.0)))
    };
    let phi0 = to_c(phi0);
    let phi_half = to_c(phi_half);
    let mut c = Vec::with_capacity(pairs.len());
    let mut d = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let cj: C64 = p.left.iter().zip(phi0.iter()).map(|(l, x)| l * x).sum();
        let overlap: C64 = phi_half.iter().zip(p.right.iter()).map(|(h, r)| h * r).sum();
        c.push(cj);
        d.push(overlap * cj);
    }
    let reconstruction_t0 = pairs
        .iter()
        .zip(&d)
        .filter(|(p, _)| !p.defective)
        .map(|(_, dj)| dj)
        .sum();
    // modulus clusters
    let mut mods: Vec<f64> = pairs.iter().map(|p| p.value.norm()).collect();
    mods.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cluster_count = 0;
    let mut k = 0;
    while k < mods.len() {
        let mut h = k + 1;
        while h < mods.len() && (mods[h] - mods[k]).abs() <= COUNT_TOL {
            h += 1;
        }
        cluster_count += 1;
        k = h;
    }
    let defective_count = pairs.iter().filter(|p| p.defective).count();
    SpectralReport { pairs, c, d, cluster_count, defective_count, reconstruction_t0 }
}

/// Normalized partial sum of selected modes: C(t) = |ref|^-t |sum d_k l_k^t|.
#[derive(Clone, Debug)]
pub struct PhantomAnalysis {
    pub selection: Vec<usize>,
    pub lambda_ref: f64,
    pub series: Vec<f64>,
    /// log2 C(t+1) - log2 C(t); None below the numeric floor.
    pub slopes: Vec<Option<f64>>,
}

pub fn phantom_sum(
    report: &SpectralReport,
    selection: &[usize],
    lambda_ref: f64,
    t_max: usize,
) -> Result<PhantomAnalysis> {
    if selection.is_empty() {
        return Err(Error::Numerics("empty mode selection".into()));
    }
    let mut series = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        let s: C64 = selection
            .iter()
            .map(|&k| report.d[k] * report.pairs[k].value.powu(t as u32))
            .sum();
        series.push(s.norm() / lambda_ref.powi(t as i32));
    }
    let floor = 1e-14;
    let slopes = (0..t_max)
        .map(|t| {
            if series[t] > floor && series[t + 1] > floor {
                Some(series[t + 1].log2() - series[t].log2())
            } else {
                None
            }
        })
        .collect();
    Ok(PhantomAnalysis {
        selection: selection.to_vec(),
        lambda_ref,
        series,
        slopes,
    })
}

/// Options for the deflated power iteration.
#[derive(Clone, Copy, Debug)]
pub struct PowerOpts {
    pub max_iters: usize,
    /// Geometric-mean window; None scans a ladder of widths and keeps the
    /// widest one whose estimates have stabilized.
    pub window: Option<usize>,
    pub tol: f64,
    pub seed: u64,
    /// Iteration separation between the estimates compared for convergence.
    /// Larger separations detect slower residual drift (nearly degenerate
    /// moduli) at the price of more iterations.
    pub min_separation: usize,
}

impl Default for PowerOpts {
    fn default() -> Self {
        PowerOpts { max_iters: 4000, window: None, tol: 1e-7, seed: 0x5eed, min_separation: 96 }
    }
}

#[derive(Clone, Debug)]
pub struct PowerResult {
    pub lambda2_abs: f64,
    pub converged: bool,
    pub window: usize,
    pub iters: usize,
    /// ln of the per-period norm growth, one entry per iteration.
    pub ratio_log: Vec<f64>,
    /// Largest |<steady, w>| / |w| observed after deflation.
    pub max_steady_overlap: f64,
}

const POWER_BURN_IN: usize = 48;
const POWER_CHECK_EVERY: usize = 64;
/// Candidate geometric-mean windows: every width up to 24 to catch rational
/// oscillation periods, then a sparse ladder of long windows that average
/// over irrational phases and nearly degenerate moduli.
const POWER_WINDOWS: [usize; 34] = [
    2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 32, 48,
    64, 96, 128, 192, 256, 384, 512, 1024, 1536,
];

/// Deflated power iteration with geometric-mean modulus estimation.
///
/// Each step applies the period, subtracts the steady-state component, and
/// records the norm ratio. Complex subdominant pairs make the ratio
/// oscillate; |lambda_2|^2 equals the geometric mean of the squared-norm
/// ratios over one phase period, so windowed means are compared at three
/// well-separated points of the iteration and the run converges when some
/// window's estimates agree to tolerance. Among the stable windows the
/// widest wins: wider means average away more of the residual interference.
pub fn deflated_power<F: FnMut(&mut [f64])>(
    mut apply_period: F,
    steady: &[f64],
    start: Vec<f64>,
    opts: PowerOpts,
) -> PowerResult {
    let dim = steady.len();
    assert_eq!(start.len(), dim);
    let snorm = norm(steady);
    let s: Vec<f64> = steady.iter().map(|x| x / snorm).collect();
    let mut w = start;
    project_out(&mut w, &s);
    let wn = norm(&w);
    w.iter_mut().for_each(|x| *x /= wn);

    let mut ratio_log: Vec<f64> = Vec::with_capacity(opts.max_iters.min(1 << 20));
    let mut max_overlap = 0.0f64;
    let est_for = |log: &[f64], m: usize, end: usize| -> f64 {
        let s: f64 = log[end - m..end].iter().sum();
        (s / m as f64).exp()
    };

    let mut fallback: Option<(f64, f64, usize)> = None; // (spread, est, m)
    let mut iters = 0;
    while iters < opts.max_iters {
        apply_period(&mut w);
        project_out(&mut w, &s);
        let overlap: f64 = dot(&w, &s).abs();
        let eta = norm(&w);
        max_overlap = max_overlap.max(overlap / eta);
        ratio_log.push(eta.ln());
        w.iter_mut().for_each(|x| *x /= eta);
        iters += 1;

        if iters % POWER_CHECK_EVERY == 0 || iters == opts.max_iters {
            let windows: Vec<usize> = match opts.window {
                Some(m) => vec![m],
                None => POWER_WINDOWS.to_vec(),
            };
            let end = ratio_log.len();
            let mut stable: Option<(f64, f64, usize)> = None;
            for m in windows {
                let sep = opts.min_separation.max(m);
                if end < POWER_BURN_IN + m + 2 * sep {
                    continue;
                }
                let e0 = est_for(&ratio_log, m, end);
                let e1 = est_for(&ratio_log, m, end - sep);
                let e2 = est_for(&ratio_log, m, end - 2 * sep);
                let spread = (e0 - e1).abs().max((e0 - e2).abs()).max((e1 - e2).abs());
                if fallback.is_none() || spread < fallback.unwrap().0 {
                    fallback = Some((spread, e0, m));
                }
                if spread < opts.tol {
                    stable = Some((spread, e0, m)); // keep widest stable window
                }
            }
            if let Some((_, est, m)) = stable {
                return PowerResult {
                    lambda2_abs: est,
                    converged: true,
                    window: m,
                    iters,
                    ratio_log,
                    max_steady_overlap: max_overlap,
                };
            }
        }
    }
    let (_, est, m) = fallback.unwrap_or((f64::INFINITY, f64::NAN, 0));
    PowerResult {
        lambda2_abs: est,
        converged: false,
        window: m,
        iters,
        ratio_log,
        max_steady_overlap: max_overlap,
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_out(v: &mut [f64], unit: &[f64]) {
    let c = dot(v, unit);
    v.iter_mut().zip(unit).for_each(|(x, u)| *x -= c * u);
}

/// |lambda_2| of a protocol's one-period matrix by matrix-free deflated
/// power iteration in the even-parity sector of the rotated basis.
pub fn power_lambda2(
    n: usize,
    prot: &Protocol,
    g: &GateParams,
    opts: PowerOpts,
) -> Result<PowerResult> {
    if n != prot.n {
        return Err(Error::InvalidProtocol("protocol qubit count mismatch".into()));
    }
    let m = two_site_matrix(g, Basis::Rotated);
    let steady = steady_vector(n, Basis::Rotated).coeffs;
    // Even-parity random start; parity is conserved exactly by the kernel,
    // so the odd steady state never contaminates the iteration.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dim = 1usize << n;
    let mut start = vec![0.0f64; dim];
    for (k, x) in start.iter_mut().enumerate() {
        if bits::even_parity(k) {
            *x = rng.random::<f64>() - 0.5;
        }
    }
    let bonds = prot.bonds.clone();
    Ok(deflated_power(
        move |w: &mut [f64]| {
            for &b in &bonds {
                apply_two_site_kernel(w, &m.m, n, b);
            }
        },
        &steady,
        start,
        opts,
    ))
}

/// Least-squares polynomial fit in 1/n and its extrapolated value at
/// 1/n -> 0.
#[derive(Clone, Debug)]
pub struct TdlFit {
    pub value: f64,
    pub coeffs: Vec<f64>,
    pub ill_conditioned: bool,
}

pub fn extrapolate_tdl(points: &[(usize, f64)], degree: usize) -> Result<TdlFit> {
    if points.len() < degree + 2 {
        return Err(Error::WindowTooShort { need: degree + 2, got: points.len() });
    }
    let rows = points.len();
    let mut a = Array2::<f64>::zeros((rows, degree + 1));
    let mut b = Array1::<f64>::zeros(rows);
    for (r, &(n, y)) in points.iter().enumerate() {
        let x = 1.0 / n as f64;
        for c in 0..=degree {
            a[(r, c)] = x.powi(c as i32);
        }
        b[r] = y;
    }
    let sol = a.least_squares(&b)?;
    let coeffs = sol.solution.to_vec();
    let ill_conditioned = sol.rank < (degree + 1) as i32;
    Ok(TdlFit { value: coeffs[0], coeffs, ill_conditioned })
}

/// The exact eigenvector construction for the brick-wall chain with the XY
/// gate on a ring: a sum over two-site translations of a pattern built from
/// the gate's parameter-free eigenvectors, with mixing weight sqrt(3). Its
/// eigenvalue under the full period is 1/9.
#[derive(Clone, Debug)]
pub struct NinthEigenvector {
    pub vector: Vec<f64>,
    pub residual: f64,
    pub even: Vec<f64>,
    pub odd: Vec<f64>,
    pub even_residual: f64,
    pub odd_residual: f64,
}

pub fn ninth_eigenvector(n: usize) -> Result<NinthEigenvector> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidProtocol("construction needs even n >= 4".into()));
    }
    if n > 26 {
        return Err(Error::BudgetExceeded(format!("dense vector at n={n}")));
    }
    let vector = ninth_ansatz(n, 3.0f64.sqrt());
    let prot = crate::protocol::build_brickwall(n, crate::protocol::Boundary::Periodic)?;
    let apply = |v: &[f64]| -> Vec<f64> {
        let m = two_site_matrix(&GateParams::xy(), Basis::Rotated);
        let mut out = v.to_vec();
        for &b in &prot.bonds {
            apply_two_site_kernel(&mut out, &m.m, n, b);
        }
        out
    };
    let resid = |v: &[f64]| -> f64 {
        let mv = apply(v);
        let nrm = norm(v);
        if nrm == 0.0 {
            return 0.0;
        }
        let diff: f64 = mv
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b / 9.0).powi(2))
            .sum::<f64>()
            .sqrt();
        diff / nrm
    };
    let residual = resid(&vector);
    let mut even = vector.clone();
    let mut odd = vector.clone();
    for (k, (e, o)) in even.iter_mut().zip(odd.iter_mut()).enumerate() {
        if bits::even_parity(k) {
            *o = 0.0;
        } else {
            *e = 0.0;
        }
    }
    let even_residual = resid(&even);
    let odd_residual = resid(&odd);
    Ok(NinthEigenvector { vector, residual, even, odd, even_residual, odd_residual })
}

/// Sum over two-site translations of (v_alpha, ..., v_alpha, v_minus) with
/// v_alpha = (3, alpha, alpha, 1) and v_minus = (0, -1, 1, 0) on the pairs.
pub fn ninth_ansatz(n: usize, alpha: f64) -> Vec<f64> {
    let pairs = n / 2;
    let v_alpha = [3.0, alpha, alpha, 1.0];
    let v_minus = [0.0, -1.0, 1.0, 0.0];
    let dim = 1usize << n;
    let mut out = vec![0.0f64; dim];
    for shift in 0..pairs {
        // pattern after translating by 2*shift sites: the v_minus block sits
        // on the pair starting at site 2*shift+1 (1-based), counting the
        // un-shifted pattern as v_minus on the last pair.
        for (idx, o) in out.iter_mut().enumerate() {
            let mut w = 1.0;
            for p in 0..pairs {
                let site = 2 * p + 1;
                let b1 = (idx >> bits::bit_pos(n, site)) & 1;
                let b2 = (idx >> bits::bit_pos(n, site + 1)) & 1;
                let lbl = 2 * b1 + b2;
                // block index relative to the translated pattern
                let rel = (p + pairs - shift) % pairs;
                w *= if rel == pairs - 1 { v_minus[lbl] } else { v_alpha[lbl] };
                if w == 0.0 {
                    break;
                }
            }
            *o += w;
        }
    }
    out
}

/// Eigen-expansion of y = (a, 1) over the right eigenvectors of the 2x2
/// matrix [[1, 1-eps], [0, 1-eps]]. The coefficients blow up as 1/eps even
/// though the spectrum stays simple: the standard exceptional-point toy.
pub fn toy_exceptional(eps: f64, a: f64) -> Result<([f64; 2], [f64; 2])> {
    if eps <= 0.0 || eps >= 1.0 {
        return Err(Error::Defective(format!(
            "eps={eps} outside (0,1); eps=0 is a non-diagonalizable Jordan block"
        )));
    }
    let eigvals = [1.0, 1.0 - eps];
    let coeffs = [a - 1.0 + 1.0 / eps, 1.0 / eps];
    Ok((eigvals, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{build_brickwall, build_staircase, Bond, Boundary, Protocol};
    use approx::assert_abs_diff_eq;
    use rand::seq::SliceRandom;

    #[test]
    fn toy_exceptional_examples() {
        let (vals, coeffs) = toy_exceptional(0.1, 0.0).unwrap();
        assert_eq!(vals, [1.0, 0.9]);
        assert_abs_diff_eq!(coeffs[0], 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(coeffs[1], 10.0, epsilon = 1e-12);
        let (_, coeffs) = toy_exceptional(0.5, 1.0).unwrap();
        assert_abs_diff_eq!(coeffs[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(coeffs[1], 2.0, epsilon = 1e-12);
        assert!(toy_exceptional(0.0, 0.0).is_err());
        // coefficient magnitude scales as 1/eps
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let (_, c) = toy_exceptional(eps, 0.3).unwrap();
            assert_abs_diff_eq!(c[1] * eps, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn toy_matrix_expansion_is_consistent() {
        // check that the returned coefficients really expand y over the
        // right eigenvectors x1 = (1,0), x2 = (eps-1, eps)
        let eps = 0.07;
        let a = 0.4;
        let (_, c) = toy_exceptional(eps, a).unwrap();
        let y0 = c[0] * 1.0 + c[1] * (eps - 1.0);
        let y1 = c[1] * eps;
        assert_abs_diff_eq!(y0, a, epsilon = 1e-10);
        assert_abs_diff_eq!(y1, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn even_sector_is_sub_multiset_of_full_spectrum() {
        let n = 4;
        let prot = build_staircase(n, Boundary::Open).unwrap();
        let g = GateParams::xy();
        let full = period_matrix(n, &prot, &g, Basis::Rotated).unwrap();
        let even = even_sector_matrix(n, &prot, &g).unwrap();
        assert_eq!(even.nrows(), 8);
        let sf = spectrum(&full).unwrap();
        let se = spectrum(&even).unwrap();
        // every even eigenvalue appears in the full spectrum
        for e in &se {
            assert!(sf.iter().any(|f| (f - e).norm() < 1e-9), "missing {e}");
        }
    }

    #[test]
    fn steady_vector_is_even_sector_eigenvector() {
        let n = 6;
        let prot = build_brickwall(n, Boundary::Periodic).unwrap();
        let g = GateParams::unchecked(0.8, 0.5, 0.3);
        let even = even_sector_matrix(n, &prot, &g).unwrap();
        let steady = even_restrict(&steady_vector(n, Basis::Rotated).coeffs);
        let out = even.dot(&Array1::from_vec(steady.clone()));
        for (a, b) in out.iter().zip(&steady) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-11 * b.abs().max(1.0));
        }
    }

    #[test]
    fn full_spectrum_biorthonormality() {
        let n = 6;
        let prot = build_staircase(n, Boundary::Periodic).unwrap();
        let g = GateParams::xy();
        let m = even_sector_matrix(n, &prot, &g).unwrap();
        let pairs = full_spectrum(&m).unwrap();
        let dim = m.nrows();
        assert_eq!(pairs.len(), dim);
        // residuals and pairwise biorthogonality on a sample
        for p in pairs.iter().take(8) {
            if p.defective {
                continue;
            }
            let mv = m.mapv(|x| C64::new(x, 0.0)).dot(&p.right);
            let res: f64 =
                mv.iter().zip(p.right.iter()).map(|(a, b)| (a - p.value * b).norm_sqr()).sum::<f64>().sqrt();
            assert!(res < 1e-10, "right residual {res}");
            let lm = p.left.dot(&m.mapv(|x| C64::new(x, 0.0)));
            let resl: f64 = lm
                .iter()
                .zip(p.left.iter())
                .map(|(a, b)| (a - p.value * b).norm_sqr())
                .sum::<f64>()
                .sqrt()
                / p.left.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(resl < 1e-10, "left residual {resl}");
        }
        for a in 0..8 {
            for b in 0..8 {
                if pairs[a].defective || pairs[b].defective {
                    continue;
                }
                let ovl: C64 =
                    pairs[a].left.iter().zip(pairs[b].right.iter()).map(|(l, r)| l * r).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (ovl - C64::new(want, 0.0)).norm() < 1e-9,
                    "biorthonormality failure at ({a},{b}): {ovl}"
                );
            }
        }
    }

    #[test]
    fn at_least_two_unit_eigenvalues() {
        for g in [GateParams::xy(), GateParams::cnot(), GateParams::unchecked(0.77, 0.51, 0.13)] {
            let prot = build_staircase(5, Boundary::Open).unwrap();
            let m = period_matrix(5, &prot, &g, Basis::Rotated).unwrap();
            let vals = spectrum(&m).unwrap();
            let ones = vals.iter().filter(|v| (*v - C64::new(1.0, 0.0)).norm() < 1e-9).count();
            assert!(ones >= 2, "only {ones} unit eigenvalues");
        }
    }

    #[test]
    fn reconstruction_matches_dense_trace() {
        let n = 8;
        let prot = build_staircase(n, Boundary::Open).unwrap();
        let g = GateParams::xy();
        let m = even_sector_matrix(n, &prot, &g).unwrap();
        let pairs = full_spectrum(&m).unwrap();
        let mask = BipartitionMask::half(n).unwrap();
        let report = expansion_report(pairs, &even_phi0(n), &even_phi_mask(n, &mask));
        assert!((report.reconstruction_t0 - C64::new(1.0, 0.0)).norm() < 1e-8);
        let trace = crate::purity::purity_series(
            n,
            &prot,
            &g,
            &mask,
            8,
            crate::purity::DenseOpts::default(),
        )
        .unwrap();
        for t in 0..=8usize {
            let rec = report.reconstruct_delta(t as u32);
            assert!(rec.im.abs() < 1e-9);
            assert_abs_diff_eq!(rec.re, trace.records[t].delta, epsilon = 1e-8);
        }
    }

    #[test]
    fn conjugate_modes_carry_conjugate_weights() {
        let n = 6;
        let prot = build_staircase(n, Boundary::Open).unwrap();
        let g = GateParams::xy();
        let m = even_sector_matrix(n, &prot, &g).unwrap();
        let pairs = full_spectrum(&m).unwrap();
        let mask = BipartitionMask::half(n).unwrap();
        let report = expansion_report(pairs, &even_phi0(n), &even_phi_mask(n, &mask));
        for (k, p) in report.pairs.iter().enumerate() {
            if p.value.im.abs() > 1e-9 && !p.defective {
                let conj = report
                    .pairs
                    .iter()
                    .position(|q| (q.value - p.value.conj()).norm() < 1e-9)
                    .expect("conjugate eigenvalue present");
                assert!(
                    (report.d[conj] - report.d[k].conj()).norm() < 1e-7,
                    "d not conjugate: {} vs {}",
                    report.d[conj],
                    report.d[k]
                );
            }
        }
    }

    #[test]
    fn deflated_power_on_diagonal_matrix() {
        // diag(1, 0.5, 0.3) with steady e1
        let m = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.0], vec![0.0, 0.0, 0.3]];
        let apply = |w: &mut [f64]| {
            for (r, row) in m.iter().enumerate() {
                let mut s = 0.0;
                for (c, x) in row.iter().enumerate() {
                    s += x * if r == c { 0.0 } else { 0.0 };
                    let _ = (c, x, s);
                }
            }
            let x = w.to_vec();
            w[0] = x[0];
            w[1] = 0.5 * x[1];
            w[2] = 0.3 * x[2];
        };
        let steady = vec![1.0, 0.0, 0.0];
        let start = vec![0.9, 0.7, 0.4];
        let res = deflated_power(apply, &steady, start, PowerOpts::default());
        assert!(res.converged);
        assert_abs_diff_eq!(res.lambda2_abs, 0.5, epsilon = 1e-8);
        assert!(res.max_steady_overlap < 1e-10);
    }

    #[test]
    fn deflated_power_with_complex_pair() {
        // real 3x3: block rotation scaled by 0.25 at angle pi/3, plus steady
        let th = std::f64::consts::PI / 3.0;
        let (c, s) = (th.cos() * 0.25, th.sin() * 0.25);
        let apply = move |w: &mut [f64]| {
            let x = w.to_vec();
            w[0] = x[0];
            w[1] = c * x[1] - s * x[2];
            w[2] = s * x[1] + c * x[2];
        };
        let steady = vec![1.0, 0.0, 0.0];
        let start = vec![0.3, 0.8, -0.2];
        let res = deflated_power(
            apply,
            &steady,
            start,
            PowerOpts { window: Some(6), ..Default::default() },
        );
        assert!(res.converged);
        assert_abs_diff_eq!(res.lambda2_abs, 0.25, epsilon = 1e-8);
    }

    #[test]
    fn power_matches_exact_diagonalization() {
        // The open staircase with the XY gate is the adversarial case: the
        // dominant modes share a modulus to ~1e-4, so the run needs wide
        // windows and a long drift-detection separation to isolate the top.
        let n = 10;
        let prot = build_staircase(n, Boundary::Open).unwrap();
        let g = GateParams::xy();
        let m = even_sector_matrix(n, &prot, &g).unwrap();
        let vals = spectrum(&m).unwrap();
        let exact = vals
            .iter()
            .map(|v| v.norm())
            .filter(|&x| x < 1.0 - 1e-9)
            .fold(0.0f64, f64::max);
        let opts = PowerOpts {
            max_iters: 160_000,
            tol: 1e-7,
            min_separation: 2048,
            ..Default::default()
        };
        let res = power_lambda2(n, &prot, &g, opts).unwrap();
        assert!(res.converged, "power method did not converge");
        assert_abs_diff_eq!(res.lambda2_abs, exact, epsilon = 1e-6);
    }

    #[test]
    fn extrapolation_recovers_polynomial() {
        let pts: Vec<(usize, f64)> =
            [8usize, 10, 12, 14, 16].iter().map(|&n| {
                let x = 1.0 / n as f64;
                (n, 0.25 + 0.01 * x - 0.4 * x * x)
            }).collect();
        let fit = extrapolate_tdl(&pts, 2).unwrap();
        assert_abs_diff_eq!(fit.value, 0.25, epsilon = 1e-10);
        assert!(!fit.ill_conditioned);
        // constant series
        let pts: Vec<(usize, f64)> = [8usize, 10, 12, 14].iter().map(|&n| (n, 0.3)).collect();
        let fit = extrapolate_tdl(&pts, 1).unwrap();
        assert_abs_diff_eq!(fit.value, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coeffs[1], 0.0, epsilon = 1e-9);
        assert!(extrapolate_tdl(&pts[..2], 2).is_err());
    }

    #[test]
    fn ninth_eigenvector_small_sizes() {
        for n in [4usize, 6, 8] {
            let nv = ninth_eigenvector(n).unwrap();
            assert!(nv.residual <= 1e-10, "n={n} residual {}", nv.residual);
            assert!(nv.even_residual <= 1e-10, "n={n} even residual");
            assert!(nv.odd_residual <= 1e-10, "n={n} odd residual");
        }
        assert!(ninth_eigenvector(5).is_err());
    }

    #[test]
    fn ninth_ansatz_is_odd_layer_eigenvector_for_any_alpha() {
        let n = 6;
        let m = two_site_matrix(&GateParams::xy(), Basis::Rotated);
        for alpha in [0.5f64, 1.0, 2.2] {
            let v = ninth_ansatz(n, alpha);
            let mut out = v.clone();
            for k in (1..n).step_by(2) {
                apply_two_site_kernel(&mut out, &m.m, n, Bond::new(k, k + 1));
            }
            let nrm = norm(&v);
            let res: f64 = out
                .iter()
                .zip(&v)
                .map(|(a, b)| (a + b / 3.0).powi(2))
                .sum::<f64>()
                .sqrt()
                / nrm;
            assert!(res < 1e-12, "alpha={alpha} residual {res}");
        }
    }

    #[test]
    fn rewrites_preserve_spectrum_move_by_move() {
        let n = 6;
        let g = GateParams::unchecked(0.9, 0.6, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut bonds = build_staircase(n, Boundary::Open).unwrap().bonds;
        bonds.shuffle(&mut rng);
        let prot = Protocol::new(n, Boundary::Open, bonds.clone()).unwrap();
        let (_, transcript) = crate::protocol::canonicalize_obc(&prot).unwrap();
        let mut current = bonds;
        let mut reference = spectrum(
            &period_matrix(n, &Protocol::new(n, Boundary::Open, current.clone()).unwrap(), &g, Basis::Rotated)
                .unwrap(),
        )
        .unwrap();
        for &mv in &transcript {
            crate::protocol::apply_move(&mut current, mv).unwrap();
            let vals = spectrum(
                &period_matrix(
                    n,
                    &Protocol::new(n, Boundary::Open, current.clone()).unwrap(),
                    &g,
                    Basis::Rotated,
                )
                .unwrap(),
            )
            .unwrap();
            assert!(spectrum_distance(&reference, &vals) < 1e-9);
            reference = vals;
        }
    }

    #[test]
    fn parity_labels_are_stable_across_equivalent_configs() {
        let n = 6;
        let g = GateParams::xy();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut bonds = build_staircase(n, Boundary::Open).unwrap().bonds;
        bonds.shuffle(&mut rng);
        let a = period_matrix(
            n,
            &Protocol::new(n, Boundary::Open, bonds).unwrap(),
            &g,
            Basis::Rotated,
        )
        .unwrap();
        let b = period_matrix(n, &build_staircase(n, Boundary::Open).unwrap(), &g, Basis::Rotated)
            .unwrap();
        let mut pa = full_spectrum(&a).unwrap();
        let mut pb = full_spectrum(&b).unwrap();
        label_parities(&mut pa, n);
        label_parities(&mut pb, n);
        for x in &pa {
            // skip near-degenerate or mixed modes
            let close: Vec<&EigenPair> = pa
                .iter()
                .filter(|y| (y.value - x.value).norm() < 1e-6)
                .collect();
            if close.len() != 1 || x.parity.is_none() {
                continue;
            }
            let matched: Vec<&EigenPair> = pb
                .iter()
                .filter(|y| (y.value - x.value).norm() < 1e-8)
                .collect();
            if matched.len() == 1 && matched[0].parity.is_some() {
                assert_eq!(matched[0].parity, x.parity, "parity flip at {}", x.value);
            }
        }
    }
}
