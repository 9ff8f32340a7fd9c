//! Square-QAM constellation and its companion Gaussian-integer ring.
//!
//! For an even modulation order `m`, the per-dimension (PAM) alphabet is the
//! odd-integer grid `{-(2^{m/2}-1), ..., -1, 1, ..., 2^{m/2}-1}` and the full
//! constellation is its complex square. The grid is deliberately left
//! unnormalized, so the minimum distance is always 2 and the average symbol
//! energy is `(2/3)(2^m - 1)`; transmit normalization happens at broadcast
//! time, not here.
//!
//! Every constellation point maps bijectively onto `Z_{2^{m/2}}[i]` by
//! shifting the grid to the origin and halving. Because the map acts on the
//! real and imaginary components independently, each component's ring
//! coordinate is exactly its index in the sorted PAM alphabet, which is why
//! most of this crate can work per real dimension and re-assemble complex
//! results at the end.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spacing between adjacent PAM points. Fixed by the unnormalized grid.
pub const D_MIN: f64 = 2.0;

/// A `2^m`-ary square QAM constellation, `m` even.
#[derive(Debug, Clone)]
pub struct Constellation {
    m: u32,
    side: u32,
    pam: Vec<f64>,
    e_avg: f64,
}

impl Constellation {
    /// Builds the constellation for modulation order `m`.
    ///
    /// `m` must be even and within `2..=16`; the upper bound keeps exhaustive
    /// ring enumerations (used by the leakage oracles) tractable.
    pub fn new(m: u32) -> Result<Self> {
        if !(2..=16).contains(&m) || !m.is_multiple_of(2) {
            return Err(Error::InvalidModulationOrder(m));
        }
        let side = 1u32 << (m / 2);
        let pam: Vec<f64> = (0..side)
            .map(|t| (2 * t as i64 - (side as i64 - 1)) as f64)
            .collect();
        let e_avg = 2.0 / 3.0 * ((1u64 << m) - 1) as f64;
        Ok(Self {
            m,
            side,
            pam,
            e_avg,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Number of PAM points per dimension, `2^{m/2}`. Also the ring modulus.
    pub fn side(&self) -> u32 {
        self.side
    }

    /// Average energy over the full complex constellation, `(2/3)(2^m - 1)`.
    pub fn e_avg(&self) -> f64 {
        self.e_avg
    }

    /// The PAM alphabet in increasing order.
    pub fn pam_points(&self) -> &[f64] {
        &self.pam
    }

    /// Value of the `t`-th PAM point, `2t - (2^{m/2} - 1)`.
    pub fn pam_value(&self, t: u32) -> f64 {
        self.pam[t as usize]
    }

    /// Index of the PAM point nearest to `x`, saturating at the grid edges.
    ///
    /// Decision boundaries sit halfway between adjacent points (the even
    /// integers); exact boundary hits resolve toward the upper cell, a
    /// measure-zero convention.
    #[inline]
    pub fn quantize_pam_index(&self, x: f64) -> u32 {
        debug_assert!(x.is_finite());
        let t = ((x + self.side as f64) * 0.5).floor();
        // `as` casts saturate, so +/-inf products of overflow still clamp.
        (t as i64).clamp(0, self.side as i64 - 1) as u32
    }

    /// Nearest PAM point to `x`, saturating at the grid edges.
    #[inline]
    pub fn quantize_pam(&self, x: f64) -> f64 {
        self.pam[self.quantize_pam_index(x) as usize]
    }

    /// Component-wise nearest constellation point to `z`.
    pub fn quantize(&self, z: Complex64) -> Result<Complex64> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NonFinite("quantizer input"));
        }
        Ok(Complex64::new(
            self.quantize_pam(z.re),
            self.quantize_pam(z.im),
        ))
    }

    /// Whether `z` lies exactly on the constellation grid.
    pub fn contains(&self, z: Complex64) -> bool {
        self.pam_index_of(z.re).is_some() && self.pam_index_of(z.im).is_some()
    }

    /// All constellation points, imaginary coordinate varying fastest.
    pub fn grid_points(&self) -> impl Iterator<Item = Complex64> + '_ {
        let side = self.side as usize;
        (0..side * side).map(move |k| Complex64::new(self.pam[k / side], self.pam[k % side]))
    }

    /// Index of an exact PAM value, if `x` is one.
    pub fn pam_index_of(&self, x: f64) -> Option<u32> {
        if !x.is_finite() {
            return None;
        }
        let t = (x + (self.side as f64 - 1.0)) / 2.0;
        if t >= 0.0 && t < self.side as f64 && t.fract() == 0.0 {
            Some(t as u32)
        } else {
            None
        }
    }

    /// Maps a constellation point onto the ring: `(z + (2^{m/2}-1)(1+i)) / 2`.
    ///
    /// Per component this is just the PAM index of the coordinate.
    pub fn phi(&self, z: Complex64) -> Result<RingElement> {
        let (re, im) = match (self.pam_index_of(z.re), self.pam_index_of(z.im)) {
            (Some(re), Some(im)) => (re, im),
            _ => return Err(Error::NotAConstellationPoint(z)),
        };
        Ok(RingElement {
            re,
            im,
            modulus: self.side,
        })
    }

    /// Inverse of [`phi`](Self::phi): `2r - (2^{m/2}-1)(1+i)`.
    pub fn phi_inv(&self, r: RingElement) -> Result<Complex64> {
        if r.modulus != self.side {
            return Err(Error::RingModulusMismatch(r.modulus, self.side));
        }
        Ok(Complex64::new(self.pam_value(r.re), self.pam_value(r.im)))
    }

    /// Per-component ring coordinate of an exact PAM value.
    pub fn pam_ring_index(&self, x: f64) -> Result<u32> {
        self.pam_index_of(x)
            .ok_or_else(|| Error::NotAConstellationPoint(Complex64::new(x, 0.0)))
    }
}

/// Element of `Z_{2^{m/2}}[i]`, both components reduced modulo `2^{m/2}`.
///
/// Elements carry their modulus so that arithmetic between rings of different
/// constellations is rejected instead of silently wrapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingElement {
    re: u32,
    im: u32,
    modulus: u32,
}

impl RingElement {
    pub fn new(re: u32, im: u32, modulus: u32) -> Self {
        assert!(modulus > 0, "ring modulus must be positive");
        Self {
            re: re % modulus,
            im: im % modulus,
            modulus,
        }
    }

    pub fn re(&self) -> u32 {
        self.re
    }

    pub fn im(&self) -> u32 {
        self.im
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    /// Component-wise addition modulo the ring modulus.
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, rhs: RingElement) -> Result<RingElement> {
        self.check(rhs)?;
        Ok(RingElement {
            re: (self.re + rhs.re) % self.modulus,
            im: (self.im + rhs.im) % self.modulus,
            modulus: self.modulus,
        })
    }

    /// Component-wise subtraction modulo the ring modulus.
    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, rhs: RingElement) -> Result<RingElement> {
        self.check(rhs)?;
        Ok(RingElement {
            re: (self.re + self.modulus - rhs.re) % self.modulus,
            im: (self.im + self.modulus - rhs.im) % self.modulus,
            modulus: self.modulus,
        })
    }

    pub fn zero(modulus: u32) -> Self {
        RingElement {
            re: 0,
            im: 0,
            modulus,
        }
    }

    fn check(self, rhs: RingElement) -> Result<()> {
        if self.modulus != rhs.modulus {
            return Err(Error::RingModulusMismatch(self.modulus, rhs.modulus));
        }
        Ok(())
    }
}
