//! Probability mass functions induced on the PAM grid by Gaussian densities.
//!
//! Quantizing a Gaussian observation to the nearest PAM point turns the
//! density into a PMF whose cell masses are Gaussian integrals over the
//! quantizer's decision regions: interior cells span one minimum distance
//! around their point, and the two edge cells absorb the tails. These PMFs
//! are the workhorse behind broadcast-decoding error predictions and
//! likelihood-ratio generation, so the integrals are computed with `erfc` in
//! whichever tail keeps the subtraction stable rather than by sampling.

use num_complex::Complex64;

use crate::constellation::{Constellation, RingElement};
use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal upper-tail probability.
#[inline]
fn tail_upper(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Mass a `N(mu, sigma^2)` variable puts on `[lo, hi]`, with infinite bounds
/// allowed. Evaluated as a difference of same-side tails so that cells far
/// from the mean do not cancel catastrophically.
pub(crate) fn gaussian_cell_mass(lo: f64, hi: f64, mu: f64, sigma: f64) -> f64 {
    debug_assert!(lo < hi);
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    let mass = if a + b >= 0.0 {
        // Cell sits at or right of the mean: upper tails are both small.
        tail_upper(a) - tail_upper(b)
    } else {
        tail_upper(-b) - tail_upper(-a)
    };
    mass.max(0.0)
}

/// A PMF over an ordered finite support of PAM points.
///
/// The support order is the PAM (equivalently, per-component ring) order, so
/// index arithmetic modulo the support size realizes the ring shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    support: Vec<f64>,
    mass: Vec<f64>,
}

impl Pmf {
    /// Builds a PMF from explicit masses, validating non-negativity and unit
    /// total (within 1e-12).
    pub fn new(support: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if support.len() != mass.len() {
            return Err(Error::LengthMismatch {
                context: "pmf mass vector",
                got: mass.len(),
                expected: support.len(),
            });
        }
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        let sum: f64 = mass.iter().sum();
        if mass.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPmf(sum));
        }
        Ok(Self { support, mass })
    }

    /// PMF of the nearest-point quantization of `N(mu, var)` onto the PAM
    /// alphabet of `c`. Interior decision regions are `point +/- 1`; the edge
    /// regions extend to infinity.
    pub fn induce(mu: f64, var: f64, c: &Constellation) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::NonFinite("pmf mean"));
        }
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::NonPositiveVariance(var));
        }
        let sigma = var.sqrt();
        let pts = c.pam_points();
        let n = pts.len();
        let mass: Vec<f64> = (0..n)
            .map(|t| {
                let lo = if t == 0 {
                    f64::NEG_INFINITY
                } else {
                    pts[t] - 1.0
                };
                let hi = if t == n - 1 {
                    f64::INFINITY
                } else {
                    pts[t] + 1.0
                };
                gaussian_cell_mass(lo, hi, mu, sigma)
            })
            .collect();
        debug_assert!((mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        Ok(Self {
            support: pts.to_vec(),
            mass,
        })
    }

    /// Uniform mass over the PAM alphabet of `c`.
    pub fn uniform(c: &Constellation) -> Self {
        let n = c.side() as usize;
        Self {
            support: c.pam_points().to_vec(),
            mass: vec![1.0 / n as f64; n],
        }
    }

    /// Unit mass on the `t`-th support point.
    pub fn indicator(c: &Constellation, t: u32) -> Self {
        let mut mass = vec![0.0; c.side() as usize];
        mass[t as usize] = 1.0;
        Self {
            support: c.pam_points().to_vec(),
            mass,
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Mass at support index `t`.
    pub fn mass_at(&self, t: u32) -> f64 {
        self.mass[t as usize]
    }

    /// Cyclic left shift by `s`: the new mass at index `t` is the old mass at
    /// `(t + s) mod n`. This is exactly how ring subtraction of a known
    /// element acts on a quantized variable's PMF.
    pub fn circular_shift(&self, s: u32) -> Self {
        let n = self.mass.len();
        let s = s as usize % n;
        let mut mass = Vec::with_capacity(n);
        for t in 0..n {
            mass.push(self.mass[(t + s) % n]);
        }
        Self {
            support: self.support.clone(),
            mass,
        }
    }

    /// Cyclic convolution with `other` over the same index ring: the
    /// distribution of the ring sum of two independent variables with these
    /// index PMFs.
    pub fn cyclic_convolve(&self, other: &Self) -> Result<Self> {
        if self.mass.len() != other.mass.len() {
            return Err(Error::LengthMismatch {
                context: "cyclic convolution",
                got: other.mass.len(),
                expected: self.mass.len(),
            });
        }
        let n = self.mass.len();
        let mut mass = vec![0.0; n];
        for (i, &a) in self.mass.iter().enumerate() {
            for (j, &b) in other.mass.iter().enumerate() {
                mass[(i + j) % n] += a * b;
            }
        }
        Ok(Self {
            support: self.support.clone(),
            mass,
        })
    }

    /// Total mass over support indices selected by `keep`.
    pub fn sum_where(&self, mut keep: impl FnMut(u32, f64) -> bool) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .filter(|&(t, _)| keep(t as u32, self.support[t]))
            .map(|(_, &p)| p)
            .sum()
    }

    /// Conditions the PMF on the event selected by `keep`, renormalizing.
    /// Fails if the kept mass is zero.
    pub fn restrict(&self, mut keep: impl FnMut(u32, f64) -> bool) -> Result<Self> {
        let mut mass = self.mass.clone();
        for (t, m) in mass.iter_mut().enumerate() {
            if !keep(t as u32, self.support[t]) {
                *m = 0.0;
            }
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptySupport);
        }
        for m in &mut mass {
            *m /= total;
        }
        Ok(Self {
            support: self.support.clone(),
            mass,
        })
    }
}

/// Product-form PMF over the full complex constellation.
///
/// Complex observations with independent per-dimension noise factor into a
/// product of two PAM PMFs, and every ring operation used by the protocol
/// acts per component. Keeping the factors separate makes the
/// "compute on the complex grid, then marginalize to the PAM part in
/// question" convention exact: the marginal of the product is just the
/// corresponding factor, which the tests verify against a flattened joint.
#[derive(Debug, Clone, PartialEq)]
pub struct QamPmf {
    re: Pmf,
    im: Pmf,
}

impl QamPmf {
    /// PMF of the component-wise quantization of a complex Gaussian with the
    /// given per-dimension variance, centered at `mu`.
    pub fn induce(mu: Complex64, var_per_dim: f64, c: &Constellation) -> Result<Self> {
        Ok(Self {
            re: Pmf::induce(mu.re, var_per_dim, c)?,
            im: Pmf::induce(mu.im, var_per_dim, c)?,
        })
    }

    pub fn from_parts(re: Pmf, im: Pmf) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::LengthMismatch {
                context: "qam pmf components",
                got: im.len(),
                expected: re.len(),
            });
        }
        Ok(Self { re, im })
    }

    /// Joint mass at the grid point with ring coordinates `(re, im)`.
    pub fn mass_at(&self, re: u32, im: u32) -> f64 {
        self.re.mass_at(re) * self.im.mass_at(im)
    }

    /// Cyclic shift by a ring element, acting independently per component.
    pub fn circular_shift(&self, s: RingElement) -> Self {
        Self {
            re: self.re.circular_shift(s.re()),
            im: self.im.circular_shift(s.im()),
        }
    }

    /// Marginal over the other component; exact because the joint is a
    /// product.
    pub fn marginal_re(&self) -> &Pmf {
        &self.re
    }

    pub fn marginal_im(&self) -> &Pmf {
        &self.im
    }

    /// Flattened joint in lexicographic `(re index, im index)` order. Used by
    /// tests and the leakage enumerator.
    pub fn flatten(&self) -> Vec<f64> {
        let n = self.re.len();
        let mut out = Vec::with_capacity(n * n);
        for t in 0..n as u32 {
            for u in 0..n as u32 {
                out.push(self.mass_at(t, u));
            }
        }
        out
    }
}
