//! Binary fixed-point reals on top of `BigInt` (256 fractional bits), enough
//! for an independent high-precision evaluation of the GRPO quantities.

use num_bigint::{BigInt, Sign};
use num_traits::{Signed, ToPrimitive, Zero};
use std::ops::{Add, Div, Mul, Neg, Sub};

const FRAC: u32 = 256;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fx(BigInt);

impl Fx {
    pub fn zero() -> Self {
        Fx(BigInt::zero())
    }

    pub fn int(v: i64) -> Self {
        Fx(BigInt::from(v) << FRAC)
    }

    /// Exact conversion of a finite double (values below 2^-256 truncate).
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite());
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
        let m = BigInt::from(mant) * sign;
        let shift = e + FRAC as i64;
        Fx(if shift >= 0 { m << shift as u32 } else { m >> (-shift) as u32 })
    }

    pub fn to_f64(&self) -> f64 {
        // Keep 80 significant bits then scale; the final rounding dominates.
        let bits = self.0.bits() as i64;
        let drop = (bits - 80).max(0);
        let top = (&self.0 >> drop as u32).to_f64().unwrap();
        top * 2f64.powi((drop - FRAC as i64) as i32)
    }

    pub fn abs(&self) -> Self {
        Fx(self.0.abs())
    }

    pub fn is_negative(&self) -> bool {
        self.0.sign() == Sign::Minus
    }

    pub fn sqrt(&self) -> Self {
        assert!(!self.is_negative());
        Fx((&self.0 << FRAC).sqrt())
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// `2·atanh(z) = Σ 2 z^(2k+1)/(2k+1)` for |z| ≤ 1/3.
    fn two_atanh(z: &Fx) -> Fx {
        let z2 = z.clone() * z.clone();
        let mut term = z.clone();
        let mut sum = Fx::zero();
        let mut k = 0i64;
        while !term.0.is_zero() {
            sum = sum + Fx(term.0.clone() / BigInt::from(2 * k + 1));
            term = term * z2.clone();
            k += 1;
        }
        sum.clone() + sum
    }

    pub fn ln2() -> Fx {
        Self::two_atanh(&(Fx::int(1) / Fx::int(3)))
    }

    /// Natural log of a positive value: reduce to [1, 2) by powers of two.
    pub fn ln(&self) -> Fx {
        assert!(self.0.sign() == Sign::Plus, "ln of non-positive value");
        let k = self.0.bits() as i64 - 1 - FRAC as i64;
        let y = if k >= 0 { Fx(&self.0 >> k as u32) } else { Fx(&self.0 << (-k) as u32) };
        let one = Fx::int(1);
        let z = (y.clone() - one.clone()) / (y + one);
        Self::two_atanh(&z) + Fx::int(k) * Self::ln2()
    }
}

impl Add for Fx {
    type Output = Fx;
    fn add(self, o: Fx) -> Fx {
        Fx(self.0 + o.0)
    }
}

impl Sub for Fx {
    type Output = Fx;
    fn sub(self, o: Fx) -> Fx {
        Fx(self.0 - o.0)
    }
}

impl Mul for Fx {
    type Output = Fx;
    fn mul(self, o: Fx) -> Fx {
        Fx((self.0 * o.0) >> FRAC)
    }
}

impl Div for Fx {
    type Output = Fx;
    fn div(self, o: Fx) -> Fx {
        assert!(!o.0.is_zero());
        Fx((self.0 << FRAC) / o.0)
    }
}

impl Neg for Fx {
    type Output = Fx;
    fn neg(self) -> Fx {
        Fx(-self.0)
    }
}

/// GRPO objective for one group, evaluated entirely in fixed point:
/// population-std advantages, ratios, clip/min, exact KL(new ‖ ref).
pub fn objective(
    responses: &[usize],
    rewards: &[f64],
    new: &[f64],
    old: &[f64],
    reference: &[f64],
    epsilon: f64,
    beta: f64,
) -> f64 {
    let g = Fx::int(rewards.len() as i64);
    let r: Vec<Fx> = rewards.iter().map(|&x| Fx::from_f64(x)).collect();
    let mean = r.iter().cloned().fold(Fx::zero(), Add::add) / g.clone();
    let var = r.iter().map(|x| (x.clone() - mean.clone()) * (x.clone() - mean.clone())).fold(Fx::zero(), Add::add)
        / g.clone();
    let std = var.sqrt();
    let eps = Fx::from_f64(epsilon);
    let lo = Fx::int(1) - eps.clone();
    let hi = Fx::int(1) + eps;
    let mut total = Fx::zero();
    for (&y, ri) in responses.iter().zip(&r) {
        let a = if std.0.is_zero() { Fx::zero() } else { (ri.clone() - mean.clone()) / std.clone() };
        let ratio = Fx::from_f64(new[y]) / Fx::from_f64(old[y]);
        let clipped = ratio.clone().max(lo.clone()).min(hi.clone());
        total = total + (ratio * a.clone()).min(clipped * a);
    }
    let mut kl = Fx::zero();
    for (&p, &q) in new.iter().zip(reference) {
        if p > 0.0 {
            let (p, q) = (Fx::from_f64(p), Fx::from_f64(q));
            kl = kl + p.clone() * (p.ln() - q.ln());
        }
    }
    (total / g - Fx::from_f64(beta) * kl).to_f64()
}

/// `min(r·A, clip(r, 1−ε, 1+ε)·A)` in fixed point.
pub fn clipped(r: f64, a: f64, eps: f64) -> f64 {
    let (r, a, e) = (Fx::from_f64(r), Fx::from_f64(a), Fx::from_f64(eps));
    let c = r.clone().max(Fx::int(1) - e.clone()).min(Fx::int(1) + e);
    (r * a.clone()).min(c * a).to_f64()
}
