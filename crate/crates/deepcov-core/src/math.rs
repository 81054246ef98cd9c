//! Scalar math shim: `std` float methods when available, `libm` otherwise.

#[cfg(feature = "std")]
mod imp {
    #[inline(always)]
    pub fn tanh(x: f64) -> f64 {
        x.tanh()
    }
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline(always)]
    pub fn ln_1p(x: f64) -> f64 {
        x.ln_1p()
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline(always)]
    pub fn asin(x: f64) -> f64 {
        x.asin()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline(always)]
    pub fn tanh(x: f64) -> f64 {
        libm::tanh(x)
    }
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline(always)]
    pub fn ln_1p(x: f64) -> f64 {
        libm::log1p(x)
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline(always)]
    pub fn asin(x: f64) -> f64 {
        libm::asin(x)
    }
}

pub(crate) use imp::*;

/// `ln(2 cosh x)`, overflow-safe for large `|x|`.
#[inline]
pub(crate) fn ln_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + ln_1p(exp(-2.0 * a))
}

/// `1 - tanh^2(x)`, the derivative of `tanh`.
#[inline]
pub(crate) fn sech2(x: f64) -> f64 {
    let t = tanh(x);
    1.0 - t * t
}
