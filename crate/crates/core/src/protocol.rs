//! Gate-application protocols and their spectrum-preserving canonicalization.
//!
//! A protocol is an ordered list of bonds applied within one period, the
//! first-applied bond first. For 1D chains the one-period transfer matrix is
//! a product of the per-bond matrices; three elementary rewrites leave its
//! spectrum unchanged:
//!
//! - a cyclic rotation of the whole list (AB and BA share a spectrum),
//! - swapping two adjacent commuting gates (equal products),
//! - reversing the list (transposition; elementary matrices are symmetric).
//!
//! Every open-chain permutation protocol rewrites to the staircase, and every
//! periodic-chain permutation rewrites to one of floor(n/2) canonical
//! configurations: a brick-wall prefix of 2p-1 gates followed by a staircase
//! over the remaining bonds. The rewrites below follow that construction as a
//! deterministic greedy loop, recording each move so the transformation can
//! be replayed and audited.

use crate::error::{Error, Result};

/// An unordered pair of 1-based sites coupled by one gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
}

impl Bond {
    pub fn new(i: usize, j: usize) -> Self {
        Bond { i, j }
    }

    /// Equality as an unordered pair.
    pub fn same(&self, other: &Bond) -> bool {
        (self.i == other.i && self.j == other.j) || (self.i == other.j && self.j == other.i)
    }

    pub fn disjoint(&self, other: &Bond) -> bool {
        self.i != other.i && self.i != other.j && self.j != other.i && self.j != other.j
    }

    fn wrap(n: usize, a: usize) -> usize {
        (a - 1) % n + 1
    }

    /// Nearest-neighbor bond (a, a+1) on a ring, sites wrapped into 1..=n.
    fn ring(n: usize, a: usize) -> Bond {
        Bond::new(Self::wrap(n, a), Self::wrap(n, a + 1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

/// Ordered sequence of bonds applied in one period (first-applied first).
#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    pub n: usize,
    pub boundary: Boundary,
    pub bonds: Vec<Bond>,
}

impl Protocol {
    pub fn new(n: usize, boundary: Boundary, bonds: Vec<Bond>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidProtocol("need at least 2 qubits".into()));
        }
        for b in &bonds {
            if b.i == b.j || b.i < 1 || b.i > n || b.j < 1 || b.j > n {
                return Err(Error::InvalidProtocol(format!(
                    "bond ({}, {}) invalid for n={}",
                    b.i, b.j, n
                )));
            }
        }
        Ok(Protocol { n, boundary, bonds })
    }

    /// Gates per period.
    pub fn period_gates(&self) -> usize {
        self.bonds.len()
    }

    /// Checks that the bonds are a permutation of all nearest-neighbor bonds
    /// of the chain (plus the wrap bond for periodic boundaries).
    pub fn is_permutation_protocol(&self) -> bool {
        let want = match self.boundary {
            Boundary::Open => self.n - 1,
            Boundary::Periodic => self.n,
        };
        if self.bonds.len() != want {
            return false;
        }
        let mut seen = vec![false; want];
        for b in &self.bonds {
            let k = match nn_index(self.n, b) {
                Some(k) if k < want => k,
                _ => return false,
            };
            if seen[k] {
                return false;
            }
            seen[k] = true;
        }
        true
    }
}

/// Index of a nearest-neighbor bond: (k, k+1) -> k-1, and (n, 1) -> n-1.
fn nn_index(n: usize, b: &Bond) -> Option<usize> {
    let (lo, hi) = if b.i < b.j { (b.i, b.j) } else { (b.j, b.i) };
    if hi == lo + 1 {
        Some(lo - 1)
    } else if lo == 1 && hi == n {
        Some(n - 1)
    } else {
        None
    }
}

/// The staircase configuration: (1,2), (2,3), ...; periodic chains append
/// the wrap bond (n,1).
pub fn build_staircase(n: usize, boundary: Boundary) -> Result<Protocol> {
    if n < 3 {
        return Err(Error::InvalidProtocol("staircase needs n >= 3".into()));
    }
    let mut bonds: Vec<Bond> = (1..n).map(|k| Bond::new(k, k + 1)).collect();
    if boundary == Boundary::Periodic {
        bonds.push(Bond::new(n, 1));
    }
    Protocol::new(n, boundary, bonds)
}

/// The brick-wall configuration: all odd bonds (1,2), (3,4), ... first, then
/// all even bonds; the wrap bond joins the end of the even layer for
/// periodic chains.
pub fn build_brickwall(n: usize, boundary: Boundary) -> Result<Protocol> {
    if n < 3 {
        return Err(Error::InvalidProtocol("brick wall needs n >= 3".into()));
    }
    let mut bonds = Vec::with_capacity(n);
    let mut k = 1;
    while k + 1 <= n {
        bonds.push(Bond::new(k, k + 1));
        k += 2;
    }
    let mut k = 2;
    while k + 1 <= n {
        bonds.push(Bond::new(k, k + 1));
        k += 2;
    }
    if boundary == Boundary::Periodic {
        bonds.push(Bond::new(n, 1));
    }
    Protocol::new(n, boundary, bonds)
}

/// The canonical periodic-chain representative of class p: a brick wall of
/// 2p-1 gates followed by the staircase over the remaining bonds, ending in
/// the wrap bond.
pub fn canonical_pbc(n: usize, p: usize) -> Result<Protocol> {
    if n < 3 || p < 1 || p > n / 2 {
        return Err(Error::InvalidProtocol(format!(
            "class index p={p} out of range 1..=floor(n/2) for n={n}"
        )));
    }
    let mut bonds = Vec::with_capacity(n);
    for k in 0..p {
        bonds.push(Bond::new(2 * k + 1, 2 * k + 2));
    }
    for k in 0..p.saturating_sub(1) {
        bonds.push(Bond::new(2 * k + 2, 2 * k + 3));
    }
    for a in 2 * p..=n {
        bonds.push(Bond::ring(n, a));
    }
    Protocol::new(n, Boundary::Periodic, bonds)
}

/// One spectrum-preserving rewrite step, recorded by type and position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewriteMove {
    /// Move the first k gates to the end of the list (cyclic rotation).
    Rotate(usize),
    /// Swap positions i and i+1; the two bonds must be disjoint, so the
    /// product itself is unchanged.
    Swap(usize),
    /// Reverse the whole list (transpose of the product).
    Transpose,
}

/// Apply a single move to a bond list, validating swap commutation.
pub fn apply_move(bonds: &mut Vec<Bond>, mv: RewriteMove) -> Result<()> {
    match mv {
        RewriteMove::Rotate(k) => {
            if k > bonds.len() {
                return Err(Error::InvalidProtocol(format!("rotate {k} beyond length")));
            }
            bonds.rotate_left(k);
        }
        RewriteMove::Swap(i) => {
            if i + 1 >= bonds.len() {
                return Err(Error::InvalidProtocol(format!("swap {i} beyond length")));
            }
            if !bonds[i].disjoint(&bonds[i + 1]) {
                return Err(Error::InvalidProtocol(format!(
                    "swap of non-commuting gates at {i}: ({},{}) vs ({},{})",
                    bonds[i].i, bonds[i].j, bonds[i + 1].i, bonds[i + 1].j
                )));
            }
            bonds.swap(i, i + 1);
        }
        RewriteMove::Transpose => bonds.reverse(),
    }
    Ok(())
}

/// Replay a transcript against a starting bond list.
pub fn replay(bonds: &[Bond], transcript: &[RewriteMove]) -> Result<Vec<Bond>> {
    let mut out = bonds.to_vec();
    for &mv in transcript {
        apply_move(&mut out, mv)?;
    }
    Ok(out)
}

/// Working state for the greedy rewrites.
struct Rewriter {
    bonds: Vec<Bond>,
    transcript: Vec<RewriteMove>,
}

impl Rewriter {
    fn new(bonds: Vec<Bond>) -> Self {
        Rewriter { bonds, transcript: Vec::new() }
    }

    fn push(&mut self, mv: RewriteMove) {
        apply_move(&mut self.bonds, mv).expect("rewrite move must be legal");
        self.transcript.push(mv);
    }

    fn rotate(&mut self, k: usize) {
        if k % self.bonds.len() != 0 {
            self.push(RewriteMove::Rotate(k % self.bonds.len()));
        }
    }

    fn transpose(&mut self) {
        self.push(RewriteMove::Transpose);
    }

    fn position(&self, b: &Bond) -> Option<usize> {
        self.bonds.iter().position(|x| x.same(b))
    }

    /// Move the element at `from` to `to < from` by adjacent commuting swaps.
    fn move_left(&mut self, from: usize, to: usize) {
        for k in (to..from).rev() {
            self.push(RewriteMove::Swap(k));
        }
    }

    /// Move the element at `from` to `to > from` by adjacent commuting swaps.
    fn move_right(&mut self, from: usize, to: usize) {
        for k in from..to {
            self.push(RewriteMove::Swap(k));
        }
    }
}

/// Rewrite an open-chain permutation protocol into the staircase, returning
/// the canonical protocol and the move transcript.
pub fn canonicalize_obc(prot: &Protocol) -> Result<(Protocol, Vec<RewriteMove>)> {
    if prot.boundary != Boundary::Open || !prot.is_permutation_protocol() {
        return Err(Error::InvalidProtocol(
            "canonicalize_obc needs a 1D open-boundary permutation protocol".into(),
        ));
    }
    let n = prot.n;
    let mut rw = Rewriter::new(prot.bonds.clone());
    // Bring (1,2) to the front.
    let q = rw.position(&Bond::new(1, 2)).unwrap();
    rw.rotate(q);
    // Extend the staircase prefix one gate at a time. Everything strictly
    // between the prefix and the next staircase gate acts on sites >= i+2
    // and commutes with the whole prefix, so it can slide over it and rotate
    // to the back.
    for i in 1..n - 1 {
        let target = Bond::new(i + 1, i + 2);
        let q = rw.position(&target).unwrap();
        debug_assert!(q >= i);
        let block = q - i;
        // k elements already sit in front of the prefix, so the next one
        // starts at i+k and stops right behind them.
        for k in 0..block {
            rw.move_left(i + k, k);
        }
        rw.rotate(block);
    }
    let canonical = build_staircase(n, Boundary::Open)?;
    debug_assert!(rw.bonds.iter().zip(&canonical.bonds).all(|(a, b)| a.same(b)));
    Ok((canonical, rw.transcript))
}

/// Spectral equivalence class of a periodic-chain protocol.
#[derive(Clone, Debug)]
pub struct EquivalenceClass {
    /// Brick-wall prefix length parameter, 1..=floor(n/2).
    pub p: usize,
    pub canonical: Protocol,
}

/// Classify a periodic-chain permutation protocol, rewriting it into its
/// canonical representative and returning the class index together with the
/// transcript of moves.
pub fn classify_pbc(prot: &Protocol) -> Result<(EquivalenceClass, Vec<RewriteMove>)> {
    if prot.boundary != Boundary::Periodic || !prot.is_permutation_protocol() {
        return Err(Error::InvalidProtocol(
            "classify_pbc needs a 1D periodic-boundary permutation protocol".into(),
        ));
    }
    let n = prot.n;
    let t_total = prot.bonds.len();
    let mut rw = Rewriter::new(prot.bonds.clone());

    let q = rw.position(&Bond::new(1, 2)).unwrap();
    rw.rotate(q);

    // Invariant: positions 0..2j-2 hold the brick wall B(2j-1) and the next
    // s positions hold the staircase (2j,2j+1)..(2j+s-1,2j+s).
    let mut j = 1usize;
    let mut s = 0usize;
    loop {
        let placed = 2 * j - 1 + s;
        if placed == t_total {
            break;
        }
        let target = Bond::ring(n, 2 * j + s);
        let beyond = Bond::ring(n, 2 * j + s + 1);
        let q = rw.position(&target).unwrap();
        debug_assert!(q >= placed);
        let beyond_in_between = rw.bonds[placed..q].iter().any(|b| b.same(&beyond));

        if !beyond_in_between {
            // The gates between the prefix and the target all commute with
            // the target, which slides directly into place.
            rw.move_left(q, placed);
            s += 1;
        } else if s == 0 {
            // Attach the even-layer gate (2j,2j+1) when the next odd gate
            // sits in between: wrap the target behind the block, transpose,
            // and restore the block's layer order.
            rw.move_right(q, t_total - 1);
            rw.rotate(2 * j - 1);
            rw.transpose();
            // List is now [reversed block, target, ...]; the reversed block
            // is (even layer reversed, odd layer reversed).
            if j > 1 {
                rw.rotate(j - 1); // reversed even layer to the back
                // Inner even gates commute with everything outside the
                // block; walk them back in front of the target.
                for _ in 0..j - 1 {
                    rw.move_left(t_total - 1, j);
                }
            }
            sort_disjoint_run(&mut rw, 0, j);
            sort_disjoint_run(&mut rw, j, 2 * j - 1);
            s = 1;
        } else {
            // Generic brick-wall growth: wrap the target to the front,
            // rotate the staircase top down after it, slide the block back
            // over the run, and fold the two new gates into the layers.
            rw.move_right(q, t_total - 1);
            rw.rotate(t_total - 1);
            // Rotate staircase gates (2j+s-1,2j+s) .. (2j+1,2j+2) to the front.
            for k in 0..s - 1 {
                let pos = 1 + k + (2 * j - 1) + (s - 1 - k);
                rw.move_right(pos, t_total - 1);
                rw.rotate(t_total - 1);
            }
            // Front now holds the ascending run (2j+1,2j+2)..(2j+s,2j+s+1)
            // followed by the block and the lone even gate (2j,2j+1).
            for b in 0..2 * j - 1 {
                rw.move_left(s + b, b);
            }
            // Fold (2j,2j+1) behind the first run gate and that run gate
            // into the odd layer, completing B(2j+1).
            rw.move_left(2 * j - 1 + s, 2 * j);
            rw.move_left(2 * j - 1, j);
            j += 1;
            s -= 1;
        }
    }
    let p = j;
    let canonical = canonical_pbc(n, p)?;
    debug_assert!(rw.bonds.iter().zip(&canonical.bonds).all(|(a, b)| a.same(b)));
    Ok((EquivalenceClass { p, canonical }, rw.transcript))
}

/// Sort a run of pairwise disjoint bonds ascending by first site using
/// recorded swaps.
fn sort_disjoint_run(rw: &mut Rewriter, lo: usize, hi: usize) {
    let key = |b: &Bond| b.i.min(b.j);
    for i in lo..hi {
        for k in (lo..i).rev() {
            if key(&rw.bonds[k]) > key(&rw.bonds[k + 1]) {
                rw.push(RewriteMove::Swap(k));
            } else {
                break;
            }
        }
    }
}
