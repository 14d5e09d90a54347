use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::group::{check_modulus, omega_pow, reduce, ChargeLabel};
use crate::hilbert::{Context, StateVector, SystemId};
use crate::neutral::{sector_project, KinematicalState, PhysicalState};

/// Alice's frame, the shared particle, and Charlie's frame, in registry order.
pub fn players() -> [SystemId; 3] {
    [SystemId::from("A"), SystemId::from("B"), SystemId::from("C")]
}

/// Two frame configurations in superposition with `B` riding along:
/// `(|x1⟩_A|z1⟩_C + e^{iφ}|x2⟩_A|z2⟩_C) ⊗ |φ_B⟩ / √2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBranch {
    pub x1: i64,
    pub x2: i64,
    pub z1: i64,
    pub z2: i64,
    pub phi: f64,
    /// Amplitudes of `B`; `|0⟩` when absent.
    pub phi_b: Option<Vec<Complex64>>,
}

impl TwoBranch {
    pub fn new(x1: i64, x2: i64, z1: i64, z2: i64, phi: f64) -> Self {
        Self { x1, x2, z1, z2, phi, phi_b: None }
    }

    pub fn with_phi_b(mut self, amplitudes: Vec<Complex64>) -> Self {
        self.phi_b = Some(amplitudes);
        self
    }

    /// Positions of `C` relative to `A` in the two branches.
    pub fn alice_markers(&self, n: usize) -> (usize, usize) {
        (reduce(self.z1 - self.x1, n), reduce(self.z2 - self.x2, n))
    }

    /// Positions of `A` relative to `C` in the two branches.
    pub fn charlie_markers(&self, n: usize) -> (usize, usize) {
        (reduce(self.x1 - self.z1, n), reduce(self.x2 - self.z2, n))
    }

    pub fn kinematical(&self, n: usize) -> Result<KinematicalState> {
        check_modulus(n)?;
        let b = match &self.phi_b {
            Some(a) if a.len() != n => {
                return Err(Error::Configuration(format!("phi_b has {} amplitudes, expected {n}", a.len())))
            }
            Some(a) => a.clone(),
            None => (0..n).map(|i| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)).collect(),
        };
        let (x1, x2, z1, z2) = (reduce(self.x1, n), reduce(self.x2, n), reduce(self.z1, n), reduce(self.z2, n));
        let second = Complex64::from_polar(1.0, self.phi);
        let state = StateVector::from_fn(players().to_vec(), n, |d| {
            let mut amp = Complex64::new(0.0, 0.0);
            if d[0] == x1 && d[2] == z1 {
                amp += 1.0;
            }
            if d[0] == x2 && d[2] == z2 {
                amp += second;
            }
            amp * b[d[1]]
        })?;
        KinematicalState::new(state)
    }
}

/// How Eve prepares the kinematical state on `A, B, C`.
#[derive(Debug, Clone, PartialEq)]
pub enum Preparation {
    TwoBranch(TwoBranch),
    /// Amplitudes in `A, B, C` index order.
    Table(Vec<Complex64>),
    Random { seed: u64 },
    /// Random state in which each relative position of `C` with respect
    /// to `A` occurs for a single position of `A`.
    CTagged { seed: u64 },
}

impl Preparation {
    /// The state for `round`; random preparations advance their seed per round.
    pub fn kinematical(&self, n: usize, round: usize) -> Result<KinematicalState> {
        check_modulus(n)?;
        match self {
            Preparation::TwoBranch(t) => t.kinematical(n),
            Preparation::Table(a) => {
                if a.len() != n.pow(3) {
                    return Err(Error::Configuration(format!("table has {} amplitudes, expected {}", a.len(), n.pow(3))));
                }
                KinematicalState::new(StateVector::new(players().to_vec(), n, a.clone(), Context::External)?)
            }
            Preparation::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(round as u64));
                KinematicalState::new(StateVector::random(players().to_vec(), n, &mut rng)?)
            }
            Preparation::CTagged { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(round as u64));
                random_c_tagged(n, &mut rng)
            }
        }
    }

    pub fn two_branch(&self) -> Option<&TwoBranch> {
        match self {
            Preparation::TwoBranch(t) => Some(t),
            _ => None,
        }
    }
}

/// `ψ(x, y, z) = χ_v(y)` when `x = g(v)` and `z = g(v) + v`, zero otherwise,
/// with random `g` and random `χ_v`.
pub fn random_c_tagged(n: usize, rng: &mut impl Rng) -> Result<KinematicalState> {
    let g: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let chi: Vec<Complex64> = (0..n * n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let state = StateVector::from_fn(players().to_vec(), n, |d| {
        let v = reduce(d[2] as i64 - d[0] as i64, n);
        if d[0] == g[v] {
            chi[v * n + d[1]]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })?;
    KinematicalState::new(state.normalized()?)
}

/// `ψ'(x, y, z) = ω^{(P'−P)·x_frame} ψ(x, y, z)`: projected onto `P'` and
/// reduced to `frame`, it reproduces what `ψ` gives in sector `P`.
pub fn confusion_partner(kin: &KinematicalState, frame: &SystemId, from: ChargeLabel, to: ChargeLabel) -> Result<KinematicalState> {
    let n = kin.modulus();
    let slot = kin
        .state()
        .systems()
        .iter()
        .position(|s| s == frame)
        .ok_or_else(|| Error::Composition(format!("{frame} is not part of the state")))?;
    let k = kin.state().systems().len();
    let dp = to.value() as i64 - from.value() as i64;
    let stride = n.pow((k - 1 - slot) as u32);
    let amps = kin
        .state()
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| a * omega_pow(n, dp * ((i / stride) % n) as i64))
        .collect();
    KinematicalState::new(StateVector::new(kin.state().systems().to_vec(), n, amps, Context::External)?)
}

/// The preparation phase that makes sector `to` look like sector `from`
/// from `A`: `φ' = φ + (x1 − x2)(P − P')·2π/N`.
pub fn compensating_phase(t: &TwoBranch, n: usize, from: ChargeLabel, to: ChargeLabel) -> f64 {
    let dp = from.value() as f64 - to.value() as f64;
    t.phi + (t.x1 - t.x2) as f64 * dp * std::f64::consts::TAU / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PhaseDifference,
    Ratio,
    Process,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Framed observables only.
    One,
    /// Full relational tomography, no communication.
    Two,
    /// Tomography plus classical communication between Alice and Charlie.
    Three(Method),
    /// No projection by Eve; the sector becomes a measurable property.
    ExtraParticle,
    /// Alice holds a perspectival state and Charlie's view follows by a frame change.
    Perspectival(Method),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub n: usize,
    pub sector: ChargeLabel,
    pub preparation: Preparation,
    pub level: Level,
    pub rounds: usize,
    pub tolerance: f64,
    /// Finite-shot sampling of framed statistics.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl GameConfig {
    pub fn new(n: usize, sector: i64, preparation: Preparation, level: Level) -> Self {
        Self { n, sector: ChargeLabel::new(sector, n), preparation, level, rounds: 1, tolerance: 1e-9, shots: None, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_modulus(self.n)?;
        if self.sector.modulus() != self.n {
            return Err(Error::Configuration("sector label lives in a different group".into()));
        }
        if self.rounds == 0 {
            return Err(Error::Configuration("rounds must be positive".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Configuration("tolerance must be positive".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::Configuration("shots must be positive".into()));
        }
        Ok(())
    }
}

/// Eve's projected state for `round`. An empty sector is a configuration error.
pub fn prepare(config: &GameConfig, round: usize) -> Result<PhysicalState> {
    config.validate()?;
    let kin = config.preparation.kinematical(config.n, round)?;
    match sector_project(&kin, config.sector) {
        Ok((phys, _)) => Ok(phys),
        Err(Error::EmptySector { sector, weight }) => Err(Error::Configuration(format!(
            "preparation has no support in sector {sector} (weight {weight:.1e})"
        ))),
        Err(e) => Err(e),
    }
}
