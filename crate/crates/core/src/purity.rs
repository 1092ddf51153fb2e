//! Dense evolution of the purity vector and extraction of entanglement rates.
//!
//! The state is a real vector with one entry per bipartition of the n qubits.
//! In the primed basis the entries are literally the purities; one gate
//! contracts a 4x4 matrix against the two bit positions of its bond. To avoid
//! catastrophic cancellation as the purity approaches its random-state value,
//! the series evolves the difference to the steady vector and reconstructs
//! I(t) from it.

use rayon::prelude::*;

use crate::bits;
use crate::error::{Error, Result};
use crate::gate::{two_site_matrix, Basis, GateParams, TwoSiteMatrix};
use crate::protocol::{Bond, Boundary, Protocol};

/// Assignment of each qubit to subsystem A (bit set) or B.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BipartitionMask {
    n: usize,
    in_a: u64,
}

impl BipartitionMask {
    pub fn new(n: usize, in_a: u64) -> Result<Self> {
        if n == 0 || n > 63 {
            return Err(Error::InvalidMask(format!("unsupported qubit count {n}")));
        }
        if in_a >> n != 0 {
            return Err(Error::InvalidMask("mask has bits beyond qubit count".into()));
        }
        Ok(BipartitionMask { n, in_a })
    }

    /// Parse a bit string like "110100", qubit 1 first, '1' meaning the
    /// qubit belongs to subsystem A.
    pub fn from_bits(s: &str) -> Result<Self> {
        let n = s.len();
        let mut in_a = 0u64;
        for (k, ch) in s.chars().enumerate() {
            match ch {
                '1' => in_a |= 1 << k,
                '0' => {}
                _ => return Err(Error::InvalidMask(format!("bad character '{ch}'"))),
            }
        }
        BipartitionMask::new(n, in_a)
    }

    /// Symmetric half-half mask: the first n/2 qubits form subsystem A.
    pub fn half(n: usize) -> Result<Self> {
        BipartitionMask::new(n, (1u64 << (n / 2)) - 1)
    }

    /// All qubits in B (empty subsystem A).
    pub fn empty(n: usize) -> Result<Self> {
        BipartitionMask::new(n, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, qubit: usize) -> bool {
        self.in_a >> (qubit - 1) & 1 == 1
    }

    pub fn n_a(&self) -> usize {
        self.in_a.count_ones() as usize
    }

    pub fn n_b(&self) -> usize {
        self.n - self.n_a()
    }

    pub fn complement(&self) -> Self {
        BipartitionMask { n: self.n, in_a: !self.in_a & ((1 << self.n) - 1) }
    }

    /// Index of this bipartition in the primed-basis vector: a qubit in A is
    /// the "up" label (bit 0), qubit 1 is the most significant bit.
    pub fn primed_index(&self) -> usize {
        let mut idx = 0usize;
        for q in 1..=self.n {
            if !self.contains(q) {
                idx |= 1 << bits::bit_pos(self.n, q);
            }
        }
        idx
    }

    pub fn to_bit_string(&self) -> String {
        (1..=self.n).map(|q| if self.contains(q) { '1' } else { '0' }).collect()
    }
}

/// Purity of random states for a bipartition with the given subsystem sizes.
pub fn steady_purity_sizes(n: usize, n_a: usize) -> f64 {
    let n_b = n - n_a;
    ((n_a as f64).exp2() + (n_b as f64).exp2()) / (1.0 + (n as f64).exp2())
}

pub fn steady_purity(mask: &BipartitionMask) -> f64 {
    steady_purity_sizes(mask.n(), mask.n_a())
}

/// Dense vector of 2^n bipartition amplitudes.
#[derive(Clone, Debug)]
pub struct PurityVector {
    pub n: usize,
    pub basis: Basis,
    pub coeffs: Vec<f64>,
}

impl PurityVector {
    pub fn zeros(n: usize, basis: Basis) -> Self {
        PurityVector { n, basis, coeffs: vec![0.0; 1 << n] }
    }

    pub fn entry(&self, mask: &BipartitionMask) -> f64 {
        assert_eq!(self.basis, Basis::Primed, "entries are purities only in the primed basis");
        self.coeffs[mask.primed_index()]
    }
}

/// Fully separable initial state: all purities one. In the rotated basis
/// this is the unit vector on the all-up component.
pub fn initial_vector(n: usize, basis: Basis) -> PurityVector {
    let mut v = PurityVector::zeros(n, basis);
    match basis {
        Basis::Primed => v.coeffs.fill(1.0),
        Basis::Rotated => v.coeffs[0] = 1.0,
    }
    v
}

/// Steady state of any protocol.
///
/// Primed basis: entries are the random-state purities, normalized so the
/// empty-subsystem entry is exactly one. Rotated basis: the even-parity
/// projection of the per-site product (sqrt(3), 1), i.e. coefficient
/// 3^((n-w)/2) on every even-parity state with w down labels (an
/// unnormalized convention; any scale is an eigenvector).
pub fn steady_vector(n: usize, basis: Basis) -> PurityVector {
    let mut v = PurityVector::zeros(n, basis);
    match basis {
        Basis::Primed => {
            for idx in 0..v.coeffs.len() {
                let w = bits::weight(idx) as usize; // qubits in B
                v.coeffs[idx] = steady_purity_sizes(n, n - w);
            }
        }
        Basis::Rotated => {
            let s3 = 3.0f64.sqrt();
            for idx in 0..v.coeffs.len() {
                if bits::even_parity(idx) {
                    let w = bits::weight(idx) as usize;
                    v.coeffs[idx] = s3.powi((n - w) as i32);
                }
            }
        }
    }
    v
}

/// Contract the 4x4 gate matrix against the two bit positions of `bond`.
///
/// Row dot products are grouped as (m0*x0 + m3*x3) + (m1*x1 + m2*x2); since
/// the gate matrices are invariant under simultaneous label reflection, this
/// grouping makes the A<->B complement symmetry of the evolved vector exact
/// in floating point, not just up to rounding.
pub fn apply_gate(state: &mut PurityVector, m: &TwoSiteMatrix, bond: Bond) -> Result<()> {
    if state.basis != m.basis {
        return Err(Error::BasisMismatch { state: state.basis, matrix: m.basis });
    }
    let n = state.n;
    if bond.i == bond.j || bond.i < 1 || bond.i > n || bond.j < 1 || bond.j > n {
        return Err(Error::InvalidProtocol(format!(
            "bond ({}, {}) invalid for n={n}",
            bond.i, bond.j
        )));
    }
    apply_two_site_kernel(&mut state.coeffs, &m.m, n, bond);
    Ok(())
}

/// Minimum size at which the kernel fans out over worker threads.
const PAR_KERNEL_MIN_N: usize = 18;

pub fn apply_two_site_kernel(coeffs: &mut [f64], m: &[[f64; 4]; 4], n: usize, bond: Bond) {
    let pi = bits::bit_pos(n, bond.i);
    let pj = bits::bit_pos(n, bond.j);
    let groups = 1usize << (n - 2);
    if n >= PAR_KERNEL_MIN_N && rayon::current_num_threads() > 1 {
        // Groups touch pairwise disjoint index quadruples, so parallel
        // mutation through a shared pointer is race free.
        struct Shared(*mut f64);
        unsafe impl Sync for Shared {}
        let ptr = Shared(coeffs.as_mut_ptr());
        let chunk = (groups / (rayon::current_num_threads() * 8)).max(1 << 12);
        (0..groups.div_ceil(chunk)).into_par_iter().for_each(|c| {
            let ptr = &ptr;
            let lo = c * chunk;
            let hi = (lo + chunk).min(groups);
            unsafe {
                kernel_range(ptr.0, m, pi, pj, lo, hi);
            }
        });
    } else {
        unsafe {
            kernel_range(coeffs.as_mut_ptr(), m, pi, pj, 0, groups);
        }
    }
}

/// Process groups in [lo, hi). Caller guarantees exclusive access to the
/// four indices of each group.
unsafe fn kernel_range(v: *mut f64, m: &[[f64; 4]; 4], pi: usize, pj: usize, lo: usize, hi: usize) {
    let bi = 1usize << pi;
    let bj = 1usize << pj;
    for g in lo..hi {
        let base = bits::expand_two(g, pi, pj);
        let i00 = base;
        let i01 = base | bj;
        let i10 = base | bi;
        let i11 = base | bi | bj;
        unsafe {
            let x0 = *v.add(i00);
            let x1 = *v.add(i01);
            let x2 = *v.add(i10);
            let x3 = *v.add(i11);
            *v.add(i00) = (m[0][0] * x0 + m[0][3] * x3) + (m[0][1] * x1 + m[0][2] * x2);
            *v.add(i01) = (m[1][0] * x0 + m[1][3] * x3) + (m[1][1] * x1 + m[1][2] * x2);
            *v.add(i10) = (m[2][0] * x0 + m[2][3] * x3) + (m[2][1] * x1 + m[2][2] * x2);
            *v.add(i11) = (m[3][0] * x0 + m[3][3] * x3) + (m[3][1] * x1 + m[3][2] * x2);
        }
    }
}

/// Apply one full period of a protocol with the same gate on every bond.
pub fn apply_period(state: &mut PurityVector, prot: &Protocol, m: &TwoSiteMatrix) -> Result<()> {
    for &b in &prot.bonds {
        apply_gate(state, m, b)?;
    }
    Ok(())
}

/// One record of a purity trace; `rate_bits` is the local rate between t and
/// t+1 (absent for the last point or when the denominator hits the noise
/// floor).
#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub t: usize,
    pub purity: f64,
    /// I(t) - I_inf, evolved directly.
    pub delta: f64,
    /// -log2 |I(t) - I_inf|.
    pub ds2_bits: f64,
    pub rate_bits: Option<f64>,
    pub sign_flip: bool,
    /// False when cancellation or truncation makes the point untrustworthy.
    pub reliable: bool,
    /// MPS engine only.
    pub chi_max: Option<usize>,
    pub discarded_weight: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TraceMeta {
    pub n: usize,
    pub mask: BipartitionMask,
    pub steady: f64,
    /// Boundary area: bonds cut per period divided by gates... cut count for
    /// 1D chains (1 open, 2 periodic).
    pub area: f64,
    pub engine: &'static str,
    pub warnings: Vec<String>,
}

/// Purity trace over whole periods plus derived local rates.
#[derive(Clone, Debug)]
pub struct RateTrace {
    pub records: Vec<TraceRecord>,
    pub meta: TraceMeta,
}

impl RateTrace {
    pub fn purities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.purity).collect()
    }

    pub fn rates_bits(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.rate_bits).collect()
    }
}

/// Noise floor below which |I - I_inf| is double-precision garbage.
pub const NOISE_FLOOR: f64 = 1e-15;

/// Fill ds2/rate/sign-flip fields from the raw (t, purity, delta) triples.
pub fn finish_trace(records: &mut [TraceRecord]) {
    for k in 0..records.len() {
        let d = records[k].delta;
        records[k].ds2_bits = -d.abs().log2();
        if k + 1 < records.len() {
            let d_next = records[k + 1].delta;
            records[k].sign_flip = d != 0.0 && d_next != 0.0 && d.signum() != d_next.signum();
            if d_next.abs() < NOISE_FLOOR || d.abs() < NOISE_FLOOR {
                records[k].rate_bits = None;
                records[k].reliable = false;
            } else {
                records[k].rate_bits = Some((d / d_next).abs().log2());
            }
        }
    }
}

/// Options for the dense engine.
#[derive(Clone, Copy, Debug)]
pub struct DenseOpts {
    /// Hard cap on n; one vector costs 2^n * 8 bytes.
    pub cap_n: usize,
}

impl Default for DenseOpts {
    fn default() -> Self {
        DenseOpts { cap_n: 26 }
    }
}

/// Evolve the purity difference vector for `t_max` periods and record the
/// trace for one bipartition.
pub fn purity_series(
    n: usize,
    prot: &Protocol,
    g: &GateParams,
    mask: &BipartitionMask,
    t_max: usize,
    opts: DenseOpts,
) -> Result<RateTrace> {
    if n != prot.n || n != mask.n() {
        return Err(Error::InvalidProtocol("protocol/mask qubit count mismatch".into()));
    }
    if n > opts.cap_n {
        return Err(Error::DenseCapExceeded { n, cap: opts.cap_n });
    }
    let m = two_site_matrix(g, Basis::Primed);
    let steady = steady_vector(n, Basis::Primed);
    // Evolve I(t) - I_inf directly: Delta(0) = Phi_0 - Phi_inf.
    let mut delta = initial_vector(n, Basis::Primed);
    for (d, s) in delta.coeffs.iter_mut().zip(&steady.coeffs) {
        *d -= s;
    }
    let idx = mask.primed_index();
    let i_inf = steady.coeffs[idx];
    let mut records = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 {
            apply_period(&mut delta, prot, &m)?;
        }
        let d = delta.coeffs[idx];
        records.push(TraceRecord {
            t,
            purity: i_inf + d,
            delta: d,
            ds2_bits: 0.0,
            rate_bits: None,
            sign_flip: false,
            reliable: true,
            chi_max: None,
            discarded_weight: None,
        });
    }
    finish_trace(&mut records);
    let area = match prot.boundary {
        Boundary::Open => 1.0,
        Boundary::Periodic => 2.0,
    };
    Ok(RateTrace {
        records,
        meta: TraceMeta {
            n,
            mask: *mask,
            steady: i_inf,
            area,
            engine: "dense",
            warnings: Vec::new(),
        },
    })
}

/// Local rates in bits/step with their sign-flip flags.
pub fn local_rate(trace: &RateTrace) -> Result<Vec<(usize, Option<f64>, bool)>> {
    if trace.records.len() < 2 {
        return Err(Error::WindowTooShort { need: 2, got: trace.records.len() });
    }
    Ok(trace
        .records
        .iter()
        .map(|r| (r.t, r.rate_bits, r.sign_flip))
        .collect())
}

/// Fitted rate summary over a window of periods.
#[derive(Clone, Copy, Debug)]
pub struct RateSummary {
    /// Asymptotic rate in natural log units per period.
    pub r_e: f64,
    pub r_e_bits: f64,
    /// Entanglement speed r_E / (area * ln 2).
    pub v_e: f64,
    /// Saturation time n_A ln2 / r_E.
    pub t_inf: f64,
    /// Largest jump of the windowed local rate, if above threshold.
    pub t_c: Option<usize>,
}

/// Rate-change threshold (bits/step) for flagging a transition time.
pub const T_C_THRESHOLD: f64 = 0.3;

/// Least-squares fit of the slope of -log2|I - I_inf| over `window`
/// (inclusive period indices), skipping unreliable points.
pub fn rate_summary(
    trace: &RateTrace,
    window: std::ops::RangeInclusive<usize>,
) -> Result<RateSummary> {
    let pts: Vec<(f64, f64)> = trace
        .records
        .iter()
        .filter(|r| window.contains(&r.t) && r.reliable && r.delta.abs() > NOISE_FLOOR)
        .map(|r| (r.t as f64, r.ds2_bits))
        .collect();
    if pts.len() < 3 {
        return Err(Error::WindowTooShort { need: 3, got: pts.len() });
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope_bits = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let r_e = slope_bits * std::f64::consts::LN_2;
    let n_a = trace.meta.mask.n_a() as f64;
    // Transition detector: largest jump between adjacent width-3 windows of
    // the local rate.
    let rates: Vec<Option<f64>> = trace.records.iter().map(|r| r.rate_bits).collect();
    let smooth: Vec<Option<f64>> = (0..rates.len()).map(|k| {
        if k + 3 <= rates.len() {
            let w = &rates[k..k + 3];
            if w.iter().all(|r| r.is_some()) {
                return Some(w.iter().map(|r| r.unwrap()).sum::<f64>() / 3.0);
            }
        }
        None
    }).collect();
    let mut t_c = None;
    let mut best = T_C_THRESHOLD;
    for k in 0..smooth.len().saturating_sub(1) {
        if let (Some(a), Some(b)) = (smooth[k], smooth[k + 1]) {
            let jump = (b - a).abs();
            if jump > best {
                best = jump;
                t_c = Some(trace.records[k + 1].t);
            }
        }
    }
    Ok(RateSummary {
        r_e,
        r_e_bits: slope_bits,
        v_e: r_e / (trace.meta.area * std::f64::consts::LN_2),
        t_inf: n_a * std::f64::consts::LN_2 / r_e,
        t_c,
    })
}
