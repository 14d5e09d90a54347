//! Scenario files (input) and result records (output), both TOML.
//!
//! Complex numbers are `[re, im]` pairs. Amplitude arrays carry their
//! system order next to them, with the first system most significant.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use qrf_core::game::{GameConfig, Level, Method, Preparation, TwoBranch};
use qrf_core::group::{check_modulus, DEFAULT_GRID};
use qrf_core::transform::Fault;

use crate::CliError;

pub const SCHEMA_VERSION: &str = "1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Pair = [f64; 2];

pub fn to_complex(pairs: &[Pair]) -> Vec<Complex64> {
    pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: String,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelName {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "extra-particle")]
    ExtraParticle,
    #[serde(rename = "perspectival")]
    Perspectival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    PhaseDifference,
    Ratio,
    Process,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::PhaseDifference => Method::PhaseDifference,
            MethodName::Ratio => Method::Ratio,
            MethodName::Process => Method::Process,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub sector: i64,
    pub level: LevelName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[serde(default = "one")]
    pub rounds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    pub preparation: PreparationSection,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PreparationSection {
    TwoBranch {
        x1: i64,
        x2: i64,
        z1: i64,
        z2: i64,
        phi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phi_b: Option<Vec<Pair>>,
    },
    /// Amplitudes over `A, B, C`.
    Table { amplitudes: Vec<Pair> },
    /// Seeded from the scenario seed.
    Random,
    CTagged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suite {
    #[serde(rename = "transforms")]
    Transforms,
    #[serde(rename = "pipeline")]
    Pipeline,
    #[serde(rename = "observables")]
    Observables,
    #[serde(rename = "appendixE")]
    AppendixE,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Transforms => "transforms",
            Suite::Pipeline => "pipeline",
            Suite::Observables => "observables",
            Suite::AppendixE => "appendixE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub suite: Suite,
    /// Group orders to check; the scenario's `n` alone when absent and
    /// `use_default_grid` is false.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    #[serde(default)]
    pub use_default_grid: bool,
    /// Random samples per grid point.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "is_no_fault")]
    pub inject_fault: Fault,
}

fn default_samples() -> usize {
    8
}

fn is_no_fault(f: &Fault) -> bool {
    *f == Fault::None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    P,
    N,
    #[serde(rename = "phi")]
    Phi,
    #[serde(rename = "geometry")]
    Geometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepCommand {
    Game,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    pub command: SweepCommand,
    /// Grid for `P`, `N` and `phi`. For `P`, all of `Z_N` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Grid for `geometry`: `[x1, x2, z1, z2]` per point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometries: Option<Vec<[i64; 4]>>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |path: &str, msg: String| Err(CliError::Config(format!("{path}: {msg}")));
        if self.version != SCHEMA_VERSION {
            return bad("version", format!("unsupported version {:?}, expected {SCHEMA_VERSION:?}", self.version));
        }
        if let Err(e) = check_modulus(self.n) {
            return bad("n", e.to_string());
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return bad("tolerance", "must be positive".into());
            }
        }
        if self.workers == Some(0) {
            return bad("workers", "must be positive".into());
        }
        if let Some(g) = &self.game {
            if g.rounds == 0 {
                return bad("game.rounds", "must be positive".into());
            }
            if g.shots == Some(0) {
                return bad("game.shots", "must be positive".into());
            }
            let needs_method = matches!(g.level, LevelName::Three | LevelName::Perspectival);
            if needs_method && g.method.is_none() {
                return bad("game.method", "required for levels 3 and perspectival".into());
            }
            if !needs_method && g.method.is_some() {
                return bad("game.method", "only meaningful for levels 3 and perspectival".into());
            }
            match &g.preparation {
                PreparationSection::TwoBranch { phi_b: Some(b), .. } if b.len() != self.n => {
                    return bad("game.preparation.phi_b", format!("expected {} amplitudes, got {}", self.n, b.len()));
                }
                PreparationSection::Table { amplitudes } if amplitudes.len() != self.n.pow(3) => {
                    return bad("game.preparation.amplitudes", format!("expected {} amplitudes, got {}", self.n.pow(3), amplitudes.len()));
                }
                PreparationSection::TwoBranch { phi, .. } if !phi.is_finite() => {
                    return bad("game.preparation.phi", "must be finite".into());
                }
                _ => {}
            }
        }
        if let Some(v) = &self.verify {
            for &n in v.grid.iter().flatten() {
                if let Err(e) = check_modulus(n) {
                    return bad("verify.grid", e.to_string());
                }
            }
            if v.samples == 0 {
                return bad("verify.samples", "must be positive".into());
            }
        }
        if let Some(s) = &self.sweep {
            match (s.param, s.command) {
                (SweepParam::N, _) => {}
                (_, SweepCommand::Verify) => return bad("sweep.param", "verify sweeps only support N".into()),
                _ => {}
            }
            match s.command {
                SweepCommand::Game if self.game.is_none() => return bad("game", "sweep over games needs a [game] table".into()),
                SweepCommand::Verify if self.verify.is_none() => return bad("verify", "sweep over verify needs a [verify] table".into()),
                _ => {}
            }
            if s.param == SweepParam::Geometry {
                if s.geometries.as_ref().is_none_or(|g| g.is_empty()) {
                    return bad("sweep.geometries", "required for geometry sweeps".into());
                }
                if !matches!(self.game.as_ref().map(|g| &g.preparation), Some(PreparationSection::TwoBranch { .. })) {
                    return bad("game.preparation", "geometry sweeps need a two-branch preparation".into());
                }
            } else if s.param != SweepParam::P && s.values.as_ref().is_none_or(|v| v.is_empty()) {
                return bad("sweep.values", "required for this parameter".into());
            }
            if s.param == SweepParam::Phi
                && !matches!(self.game.as_ref().map(|g| &g.preparation), Some(PreparationSection::TwoBranch { .. }))
            {
                return bad("game.preparation", "phi sweeps need a two-branch preparation".into());
            }
            for &v in s.values.iter().flatten() {
                let integral = matches!(s.param, SweepParam::P | SweepParam::N);
                if integral && (v.fract() != 0.0 || v < 0.0) {
                    return bad("sweep.values", format!("{v} is not a non-negative integer"));
                }
                if s.param == SweepParam::N {
                    if let Err(e) = check_modulus(v as usize) {
                        return bad("sweep.values", e.to_string());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(1e-9)
    }

    pub fn grid(&self) -> Vec<usize> {
        match &self.verify {
            Some(VerifySection { grid: Some(g), .. }) => g.clone(),
            Some(v) if v.use_default_grid => DEFAULT_GRID.to_vec(),
            _ => vec![self.n],
        }
    }

    pub fn game_config(&self) -> Result<GameConfig, CliError> {
        let g = self.game.as_ref().ok_or_else(|| CliError::Config("game: missing [game] table".into()))?;
        let preparation = match &g.preparation {
            PreparationSection::TwoBranch { x1, x2, z1, z2, phi, phi_b } => {
                let mut t = TwoBranch::new(*x1, *x2, *z1, *z2, *phi);
                if let Some(b) = phi_b {
                    t = t.with_phi_b(to_complex(b));
                }
                Preparation::TwoBranch(t)
            }
            PreparationSection::Table { amplitudes } => Preparation::Table(to_complex(amplitudes)),
            PreparationSection::Random => Preparation::Random { seed: self.seed },
            PreparationSection::CTagged => Preparation::CTagged { seed: self.seed },
        };
        let method = g.method.map(Method::from);
        let level = match g.level {
            LevelName::One => Level::One,
            LevelName::Two => Level::Two,
            LevelName::Three => Level::Three(method.expect("validated")),
            LevelName::ExtraParticle => Level::ExtraParticle,
            LevelName::Perspectival => Level::Perspectival(method.expect("validated")),
        };
        let mut cfg = GameConfig::new(self.n, g.sector, preparation, level);
        cfg.rounds = g.rounds;
        cfg.tolerance = self.tolerance();
        cfg.shots = g.shots;
        cfg.seed = self.seed;
        Ok(cfg)
    }
}

/// Everything a command emits. `timing` is the only field that varies
/// between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub version: String,
    pub tool_version: String,
    pub command: String,
    pub status: String,
    pub inputs: Scenario,
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub wall_time_ms: f64,
}

impl ResultRecord {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("result records serialize")
    }

    /// The record without its timing, as emitted.
    pub fn payload(&self) -> String {
        let mut copy = self.clone();
        copy.timing = None;
        copy.to_toml()
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Outputs {
    Game(GameOutput),
    Verify(VerifyOutput),
    Sweep(SweepOutput),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameOutput {
    pub verdict: VerdictRecord,
    #[serde(default)]
    pub records: Vec<RoundOutput>,
    #[serde(default)]
    pub messages: Vec<MessageOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictRecord {
    /// `recovered`, `candidates`, `indistinguishable`, `insufficient` or `sector-profile`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub separations: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phi_candidates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundOutput {
    pub round: usize,
    pub observer: String,
    /// `framed-deviation`, `tomography`, `branch-phase`, `confusion-fidelity` or `process-scores`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub systems: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub amplitudes: Vec<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageOutput {
    pub from: String,
    pub to: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOutput {
    pub suite: String,
    pub grid: Vec<usize>,
    pub passed: bool,
    pub max_residual: f64,
    pub identities: Vec<IdentityOutput>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    /// Admissible character exponents per group order (appendixE suite).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub admissible: Vec<AdmissibleOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityOutput {
    pub name: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<usize>,
    pub checks: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibleOutput {
    pub n: usize,
    pub tables_checked: usize,
    pub exponents: Vec<usize>,
    pub only_characters: bool,
    pub agrees_with_transitivity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOutput {
    pub param: String,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRow {
    pub index: usize,
    pub param: String,
    pub value: String,
    pub command: String,
    pub status: String,
    pub recovered_sector: String,
    pub phase_a: String,
    pub phase_c: String,
    pub max_residual: String,
}
