//! Effective-eigenvalue and purity-rate analysis for layered 2D protocols.
//!
//! Protocols with different gate counts per period are compared through the
//! effective eigenvalue |lambda_2|^(n/T), which renormalizes the per-period
//! decay to a step of n gates.

use crate::error::{Error, Result};
use crate::gate::GateParams;
use crate::geometry::{expand_layer_protocol, Geometry};
use crate::protocol::Protocol;
use crate::purity::{purity_series, rate_summary, BipartitionMask, DenseOpts, RateTrace};
use crate::spectral::{even_sector_matrix, power_lambda2, spectrum, PowerOpts};

#[derive(Clone, Debug)]
pub struct EffectiveEigenvalue {
    pub n: usize,
    pub word: String,
    pub gate: GateParams,
    /// Gates per period.
    pub t_gates: usize,
    pub lambda2_abs: f64,
    /// |lambda_2|^(n/T).
    pub lambda_eff: f64,
    pub converged: bool,
}

/// Method selection for the subdominant eigenvalue.
#[derive(Clone, Copy, Debug)]
pub enum LambdaMethod {
    /// Dense even-sector eigenvalues (n <= 14).
    Dense,
    Power(PowerOpts),
    /// Dense when it fits, power iteration otherwise.
    Auto,
}

/// |lambda_2| of one period of `word` on the geometry, renormalized to the
/// effective per-n-gates eigenvalue.
pub fn sycamore_lambda(
    geom: &Geometry,
    word: &str,
    g: &GateParams,
    method: LambdaMethod,
) -> Result<EffectiveEigenvalue> {
    let prot = expand_layer_protocol(geom, word)?;
    let n = geom.n;
    let t = prot.period_gates();
    if t == 0 {
        return Err(Error::InvalidProtocol("empty protocol word".into()));
    }
    let (lambda2_abs, converged) = lambda2_of(n, &prot, g, method)?;
    let lambda_eff = lambda2_abs.powf(n as f64 / t as f64);
    Ok(EffectiveEigenvalue {
        n,
        word: word.to_string(),
        gate: *g,
        t_gates: t,
        lambda2_abs,
        lambda_eff,
        converged,
    })
}

pub(crate) fn lambda2_of(
    n: usize,
    prot: &Protocol,
    g: &GateParams,
    method: LambdaMethod,
) -> Result<(f64, bool)> {
    let dense = |n: usize, prot: &Protocol, g: &GateParams| -> Result<(f64, bool)> {
        let m = even_sector_matrix(n, prot, g)?;
        let vals = spectrum(&m)?;
        let lam = vals
            .iter()
            .map(|v| v.norm())
            .filter(|&x| x < 1.0 - 1e-9)
            .fold(0.0f64, f64::max);
        Ok((lam, true))
    };
    match method {
        LambdaMethod::Dense => dense(n, prot, g),
        LambdaMethod::Power(opts) => {
            let res = power_lambda2(n, prot, g, opts)?;
            Ok((res.lambda2_abs, res.converged))
        }
        LambdaMethod::Auto => {
            if n <= 12 {
                dense(n, prot, g)
            } else {
                let res = power_lambda2(n, prot, g, PowerOpts::default())?;
                Ok((res.lambda2_abs, res.converged))
            }
        }
    }
}

/// Purity trace for a layered protocol together with the spectral
/// prediction for its per-period decay.
#[derive(Clone, Debug)]
pub struct SycamorePurity {
    pub trace: RateTrace,
    /// Fitted decay of -log2|I - I_inf| per period.
    pub fitted_bits_per_period: f64,
    /// -log2 |lambda_2| per period.
    pub gap_bits_per_period: f64,
}

pub fn sycamore_purity(
    geom: &Geometry,
    word: &str,
    g: &GateParams,
    mask: Option<BipartitionMask>,
    t_max: usize,
    fit_window: std::ops::RangeInclusive<usize>,
) -> Result<SycamorePurity> {
    let prot = expand_layer_protocol(geom, word)?;
    let mask = match mask.or(geom.default_mask) {
        Some(m) => m,
        None => BipartitionMask::half(geom.n)?,
    };
    let trace = purity_series(geom.n, &prot, g, &mask, t_max, DenseOpts::default())?;
    let summary = rate_summary(&trace, fit_window)?;
    let (lambda2_abs, _) = lambda2_of(geom.n, &prot, g, LambdaMethod::Auto)?;
    Ok(SycamorePurity {
        trace,
        fitted_bits_per_period: summary.r_e_bits,
        gap_bits_per_period: -lambda2_abs.log2(),
    })
}
