//! Exact combinatorics of the maximum number of novel states visited by a
//! width-w search: recursion, closed form, the classical (nd)^w bound, and
//! the binary Gray-code worst-case expansion order.

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::novelty::FeatureVector;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WidthMathError {
    #[error("invalid width parameters: {0}")]
    InvalidParams(String),
    #[error("enumeration limit exceeded: {0}")]
    EnumerationLimit(String),
}

/// Parameters of the novel-state count N(n,d,w) and the visited-state bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WidthParams {
    /// Number of features.
    pub n: u32,
    /// Domain size per feature.
    pub d: u32,
    /// Width of the novelty test.
    pub w: u32,
    /// Maximum applicable actions per state; only the visited-states bound
    /// multiplies by it.
    pub b: u32,
}

impl WidthParams {
    pub fn new(n: u32, d: u32, w: u32, b: u32) -> Result<Self, WidthMathError> {
        if n < 1 {
            return Err(WidthMathError::InvalidParams("n must be >= 1".into()));
        }
        if d < 2 {
            return Err(WidthMathError::InvalidParams("d must be >= 2".into()));
        }
        if w > n {
            return Err(WidthMathError::InvalidParams(format!(
                "w={w} exceeds n={n}"
            )));
        }
        if b < 1 {
            return Err(WidthMathError::InvalidParams("b must be >= 1".into()));
        }
        Ok(Self { n, d, w, b })
    }
}

/// N(n,d,w) by the recursion
/// N(n,d,0)=1, N(n,d,n)=d^n, N(n,d,w)=(d−1)·N(n−1,d,w−1)+N(n−1,d,w).
pub fn max_novel_recursive(p: WidthParams) -> Result<BigUint, WidthMathError> {
    fn rec(n: u32, d: u32, w: u32) -> BigUint {
        if w == 0 {
            return BigUint::one();
        }
        if w == n {
            return BigUint::from(d).pow(n);
        }
        let d_minus_1 = BigUint::from(d - 1);
        d_minus_1 * rec(n - 1, d, w - 1) + rec(n - 1, d, w)
    }
    WidthParams::new(p.n, p.d, p.w, p.b)?;
    Ok(rec(p.n, p.d, p.w))
}

/// N(n,d,w) by the closed form Σ_{k=0}^{w} C(n−1−k, w−k)·d^k·(d−1)^{w−k}
/// for w < n, with the w = n case handled as d^n.
pub fn max_novel_closed(p: WidthParams) -> Result<BigUint, WidthMathError> {
    WidthParams::new(p.n, p.d, p.w, p.b)?;
    let (n, d, w) = (p.n, p.d, p.w);
    if w == n {
        return Ok(BigUint::from(d).pow(n));
    }
    let mut total = BigUint::zero();
    for k in 0..=w {
        let choose = binomial(BigUint::from(n - 1 - k), BigUint::from(w - k));
        let term = choose * BigUint::from(d).pow(k) * BigUint::from(d - 1).pow(w - k);
        total += term;
    }
    Ok(total)
}

/// The visited-states bound N(n,d,w)·b.
pub fn visited_states_bound(p: WidthParams) -> Result<BigUint, WidthMathError> {
    Ok(max_novel_closed(p)? * BigUint::from(p.b))
}

/// The coarse classical bound (nd)^w.
pub fn coarse_bound(p: WidthParams) -> BigUint {
    BigUint::from(p.n as u64 * p.d as u64).pow(p.w)
}

/// Companion predicate: N(n,d,w) ≤ (nd)^w.
pub fn bound_holds(p: WidthParams) -> Result<bool, WidthMathError> {
    Ok(max_novel_closed(p)? <= coarse_bound(p))
}

/// All 2^n binary feature vectors in reflected Gray-code order (adjacent
/// vectors differ in exactly one bit), the expansion order that achieves the
/// closed-form worst case for binary domains.
pub fn gray_code_worst_case(n: u32) -> Result<Vec<FeatureVector>, WidthMathError> {
    if n == 0 {
        return Err(WidthMathError::InvalidParams("n must be >= 1".into()));
    }
    if n > 20 {
        return Err(WidthMathError::EnumerationLimit(format!(
            "n={n} exceeds the enumeration guard of 20"
        )));
    }
    let count: u32 = 1 << n;
    let mut out = Vec::with_capacity(count as usize);
    for i in 0..count {
        let g = i ^ (i >> 1);
        let values = (0..n).map(|bit| (g >> (n - 1 - bit)) & 1).collect();
        out.push(FeatureVector(values));
    }
    Ok(out)
}
