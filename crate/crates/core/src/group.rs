//! Arithmetic and characters of the cyclic translation group `Z_N`.
//!
//! Positions, translations and charge labels are integers mod `N`. The
//! physical momentum of label `k` is `2πk/N`, so every continuum phase
//! `e^{-iPx}` becomes a root of unity `ω^{-Px}` with `ω = exp(2πi/N)`.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_MODULUS: usize = 2;
pub const MAX_MODULUS: usize = 64;

/// Default modulus grid used by property suites.
pub const DEFAULT_GRID: [usize; 5] = [2, 3, 4, 5, 8];

pub fn check_modulus(n: usize) -> Result<()> {
    if (MIN_MODULUS..=MAX_MODULUS).contains(&n) {
        Ok(())
    } else {
        Err(Error::Configuration(format!(
            "modulus {n} outside supported range {MIN_MODULUS}..={MAX_MODULUS}"
        )))
    }
}

#[inline]
pub fn reduce(value: i64, n: usize) -> usize {
    value.rem_euclid(n as i64) as usize
}

/// `ω^k` for `ω = exp(2πi/N)`. The exponent is reduced first so large
/// products of labels stay exact to rounding.
#[inline]
pub fn omega_pow(n: usize, k: i64) -> Complex64 {
    let r = reduce(k, n);
    match (4 * r).checked_rem(n) {
        // quarter turns are returned exactly
        Some(0) => match 4 * r / n {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        },
        _ => Complex64::from_polar(1.0, TAU * r as f64 / n as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement {
    value: usize,
    modulus: usize,
}

impl GroupElement {
    pub fn new(value: i64, modulus: usize) -> Self {
        assert!(modulus >= 1, "modulus must be positive");
        Self { value: reduce(value, modulus), modulus }
    }

    pub fn zero(modulus: usize) -> Self {
        Self::new(0, modulus)
    }

    pub fn value(self) -> usize {
        self.value
    }

    pub fn modulus(self) -> usize {
        self.modulus
    }

    pub fn checked_add(self, other: Self) -> Result<Self> {
        same_modulus(self.modulus, other.modulus)?;
        Ok(Self::new((self.value + other.value) as i64, self.modulus))
    }

    pub fn checked_sub(self, other: Self) -> Result<Self> {
        same_modulus(self.modulus, other.modulus)?;
        Ok(Self::new(self.value as i64 - other.value as i64, self.modulus))
    }
}

/// Sum of two group elements; fails when the moduli differ.
pub fn add(a: GroupElement, b: GroupElement) -> Result<GroupElement> {
    a.checked_add(b)
}

impl Add for GroupElement {
    type Output = GroupElement;

    /// Panics on modulus mismatch; use [`add`] for the checked form.
    fn add(self, rhs: Self) -> Self {
        self.checked_add(rhs).expect("modulus mismatch")
    }
}

impl Sub for GroupElement {
    type Output = GroupElement;

    fn sub(self, rhs: Self) -> Self {
        self.checked_sub(rhs).expect("modulus mismatch")
    }
}

impl Neg for GroupElement {
    type Output = GroupElement;

    fn neg(self) -> Self {
        Self::new(-(self.value as i64), self.modulus)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.value, self.modulus)
    }
}

/// Label of a charge (total-momentum) sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChargeLabel {
    value: usize,
    modulus: usize,
}

impl ChargeLabel {
    pub fn new(value: i64, modulus: usize) -> Self {
        assert!(modulus >= 1, "modulus must be positive");
        Self { value: reduce(value, modulus), modulus }
    }

    pub fn value(self) -> usize {
        self.value
    }

    pub fn modulus(self) -> usize {
        self.modulus
    }

    /// Momentum in lattice units, `2π·value/N`.
    pub fn momentum(self) -> f64 {
        TAU * self.value as f64 / self.modulus as f64
    }

    pub fn all(modulus: usize) -> impl Iterator<Item = ChargeLabel> {
        (0..modulus).map(move |p| ChargeLabel::new(p as i64, modulus))
    }
}

impl Neg for ChargeLabel {
    type Output = ChargeLabel;

    fn neg(self) -> Self {
        Self::new(-(self.value as i64), self.modulus)
    }
}

impl fmt::Display for ChargeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P={} mod {}", self.value, self.modulus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Character {
    pub charge: ChargeLabel,
}

impl Character {
    pub fn new(charge: ChargeLabel) -> Self {
        Self { charge }
    }

    pub fn eval(&self, x: GroupElement) -> Result<Complex64> {
        character_eval(*self, x)
    }
}

/// `exp(2πi·charge·x/N)`.
pub fn character_eval(c: Character, x: GroupElement) -> Result<Complex64> {
    same_modulus(c.charge.modulus, x.modulus)?;
    Ok(omega_pow(x.modulus, (c.charge.value * x.value) as i64))
}

fn same_modulus(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::ModulusMismatch { left: a, right: b })
    }
}

/// Unitary DFT taking position amplitudes to momentum amplitudes,
/// `ψ̃(k) = N^{-1/2} Σ_y ω^{-ky} ψ(y)`.
pub fn dft(amplitudes: &[Complex64]) -> Vec<Complex64> {
    transform(amplitudes, false)
}

/// Inverse of [`dft`].
pub fn idft(amplitudes: &[Complex64]) -> Vec<Complex64> {
    transform(amplitudes, true)
}

fn transform(amplitudes: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = amplitudes.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let mut buf = amplitudes.to_vec();
    fft.process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|a| *a *= scale);
    buf
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// All `x ∈ Z_N` with `a·x ≡ b (mod N)`, ascending. Empty when no solution
/// exists; `gcd(a, N)` solutions otherwise.
pub fn solve_congruence(a: i64, b: i64, n: usize) -> Vec<usize> {
    let a = reduce(a, n);
    let b = reduce(b, n);
    (0..n).filter(|&x| (a * x) % n == b).collect()
}

/// Nearest multiple of `2π/N` to `phase`, as a label mod `N`, together with
/// the angular distance to it.
pub fn phase_to_steps(phase: f64, n: usize) -> (usize, f64) {
    let steps = phase * n as f64 / TAU;
    let k = steps.round();
    let residual = (steps - k).abs() * TAU / n as f64;
    (reduce(k as i64, n), residual)
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let mut p = phase.rem_euclid(TAU);
    if p > std::f64::consts::PI {
        p -= TAU;
    }
    p
}
