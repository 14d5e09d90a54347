use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::group::ChargeLabel;
use crate::hilbert::{StateVector, SystemId};
use crate::neutral::{reduce_to_frame, sector_project, RelativeState};

use super::config::{confusion_partner, players, prepare, GameConfig, Level, Method};
use super::levels::{extract_branch_phase, level1_max_deviation, level2_tomography, origin, Tomography};
use super::recovery::{
    extra_particle_mode, level3_recover_p_process, level3_recover_p_ratio, perspectival_variant_round,
    recover_from_phase_difference, Recovery, RelativeWaveTables, PHASE_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Recovered(ChargeLabel),
    /// The data pins the sector down to one of several labels.
    Candidates(Vec<ChargeLabel>),
    Indistinguishable,
    Insufficient(String),
    /// Extra-particle mode: the sector distribution and what follows from it.
    SectorProfile { weights: Vec<f64>, separations: Vec<usize>, phi_candidates: Vec<f64> },
}

impl From<Recovery> for Verdict {
    fn from(r: Recovery) -> Self {
        match r {
            Recovery::Unique(p) => Verdict::Recovered(p),
            Recovery::Candidates(c) => Verdict::Candidates(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// Largest deviation of framed statistics between sectors.
    FramedDeviation { max_total_variation: f64, sectors_compared: usize },
    Tomography { state: StateVector, purity: f64, mixed: bool },
    BranchPhase(f64),
    /// Overlap with the same observer's state from a different sector.
    ConfusionFidelity { other_sector: ChargeLabel, fidelity: f64 },
    ProcessScores(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub observer: String,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub from: String,
    pub to: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTranscript {
    pub records: Vec<RoundRecord>,
    pub messages: Vec<Message>,
    pub verdict: Verdict,
}

/// What an observer at a given level may do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub framed: bool,
    pub relational: bool,
    pub communication: bool,
}

impl Capabilities {
    pub fn for_level(level: Level) -> Self {
        match level {
            Level::One => Self { framed: true, relational: false, communication: false },
            Level::Two => Self { framed: true, relational: true, communication: false },
            Level::Three(_) | Level::ExtraParticle | Level::Perspectival(_) => {
                Self { framed: true, relational: true, communication: true }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observer {
    pub name: String,
    pub frame: SystemId,
    pub capabilities: Capabilities,
}

impl Observer {
    pub fn alice(level: Level) -> Self {
        Self { name: "alice".into(), frame: SystemId::from("A"), capabilities: Capabilities::for_level(level) }
    }

    pub fn charlie(level: Level) -> Self {
        Self { name: "charlie".into(), frame: SystemId::from("C"), capabilities: Capabilities::for_level(level) }
    }

    pub fn tomography(&self, rel: &RelativeState) -> Result<Tomography> {
        if !self.capabilities.relational {
            return Err(Error::Contract(format!("{} cannot measure relational observables", self.name)));
        }
        if rel.frame() != &self.frame {
            return Err(Error::Contract(format!("{} only sees states relative to {}", self.name, self.frame)));
        }
        level2_tomography(rel)
    }

    pub fn send(&self, to: &Observer, content: String, log: &mut Vec<Message>) -> Result<()> {
        if !self.capabilities.communication {
            return Err(Error::Contract(format!("{} cannot communicate", self.name)));
        }
        log.push(Message { from: self.name.clone(), to: to.name.clone(), content });
        Ok(())
    }
}

/// Errors that end a round with "insufficient" rather than a failure.
fn inconclusive(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateGeometry(_) | Error::Localization(_) | Error::Indeterminate(_) | Error::Extraction(_)
    )
}

fn settle(result: Result<Recovery>) -> Result<Verdict> {
    match result {
        Ok(r) => Ok(r.into()),
        Err(e) if inconclusive(&e) => Ok(Verdict::Insufficient(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Plays the configured level and records every measurement and message.
pub fn run_game(config: &GameConfig) -> Result<GameTranscript> {
    config.validate()?;
    let n = config.n;
    let (alice, charlie) = (Observer::alice(config.level), Observer::charlie(config.level));
    let mut records = Vec::new();
    let mut messages = Vec::new();

    let verdict = match config.level {
        Level::One => {
            let kin = config.preparation.kinematical(n, 0)?;
            let _ = prepare(config, 0)?;
            let target = SystemId::from("B");
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let slack = config.shots.map_or(0.0, |s| 5.0 / (s as f64).sqrt());
            let mut worst_all: f64 = 0.0;
            for obs in [&alice, &charlie] {
                let reference = reduce_to_frame(&sector_project(&kin, config.sector)?.0, &obs.frame, origin(n))?;
                let rho_ref = reference.state().density();
                let mut worst: f64 = 0.0;
                let mut compared = 0;
                for p in ChargeLabel::all(n).filter(|&p| p != config.sector) {
                    let Ok((phys, _)) = sector_project(&kin, p) else { continue };
                    let rho = reduce_to_frame(&phys, &obs.frame, origin(n))?.state().density();
                    let shots = config.shots.map(|s| (s, &mut rng as &mut dyn rand::RngCore));
                    worst = worst.max(level1_max_deviation(&rho_ref, &rho, &target, shots)?);
                    compared += 1;
                }
                worst_all = worst_all.max(worst);
                records.push(RoundRecord {
                    round: 0,
                    observer: obs.name.clone(),
                    outcome: Outcome::FramedDeviation { max_total_variation: worst, sectors_compared: compared },
                });
            }
            if worst_all <= config.tolerance + slack {
                Verdict::Indistinguishable
            } else {
                Verdict::Insufficient("framed statistics vary with the sector, but framed data alone cannot attribute the variation to it".into())
            }
        }
        Level::Two => {
            let kin = config.preparation.kinematical(n, 0)?;
            let phys = prepare(config, 0)?;
            let other = ChargeLabel::new(config.sector.value() as i64 + 1, n);
            for obs in [&alice, &charlie] {
                let rel = reduce_to_frame(&phys, &obs.frame, origin(n))?;
                let tomo = obs.tomography(&rel)?;
                if let Some(t) = config.preparation.two_branch() {
                    let (marker, positions) = branch_marker(obs, t, n);
                    if let Ok(phase) = extract_branch_phase(&tomo.state, &marker, positions) {
                        records.push(RoundRecord { round: 0, observer: obs.name.clone(), outcome: Outcome::BranchPhase(phase) });
                    }
                }
                let partner = confusion_partner(&kin, &obs.frame, config.sector, other)?;
                let twin = reduce_to_frame(&sector_project(&partner, other)?.0, &obs.frame, origin(n))?;
                let fidelity = twin.state().inner(&tomo.state)?.norm();
                records.push(RoundRecord {
                    round: 0,
                    observer: obs.name.clone(),
                    outcome: Outcome::Tomography { state: tomo.state, purity: tomo.purity, mixed: tomo.mixed },
                });
                records.push(RoundRecord {
                    round: 0,
                    observer: obs.name.clone(),
                    outcome: Outcome::ConfusionFidelity { other_sector: other, fidelity },
                });
            }
            Verdict::Indistinguishable
        }
        Level::Three(method) => {
            let rounds = if method == Method::Process { config.rounds } else { 1 };
            let mut views = Vec::with_capacity(rounds);
            for round in 0..rounds {
                let phys = prepare(config, round)?;
                let a_view = alice.tomography(&reduce_to_frame(&phys, &alice.frame, origin(n))?)?;
                let c_view = charlie.tomography(&reduce_to_frame(&phys, &charlie.frame, origin(n))?)?;
                for (obs, t) in [(&alice, &a_view), (&charlie, &c_view)] {
                    records.push(RoundRecord {
                        round,
                        observer: obs.name.clone(),
                        outcome: Outcome::Tomography { state: t.state.clone(), purity: t.purity, mixed: t.mixed },
                    });
                }
                views.push((a_view.state, c_view.state));
            }
            let result = match method {
                Method::PhaseDifference => {
                    let t = config
                        .preparation
                        .two_branch()
                        .ok_or_else(|| Error::Configuration("phase-difference method needs a two-branch preparation".into()))?;
                    let (ma, pa) = branch_marker(&alice, t, n);
                    let (mc, pc) = branch_marker(&charlie, t, n);
                    let phases = extract_branch_phase(&views[0].0, &ma, pa)
                        .and_then(|fa| extract_branch_phase(&views[0].1, &mc, pc).map(|fc| (fa, fc)));
                    match phases {
                        Ok((fa, fc)) => {
                            records.push(RoundRecord { round: 0, observer: alice.name.clone(), outcome: Outcome::BranchPhase(fa) });
                            records.push(RoundRecord { round: 0, observer: charlie.name.clone(), outcome: Outcome::BranchPhase(fc) });
                            alice.send(&charlie, format!("branch phase {fa:.12}"), &mut messages)?;
                            charlie.send(&alice, format!("branch phase {fc:.12}"), &mut messages)?;
                            recover_from_phase_difference(fa, fc, pa.1 as i64 - pa.0 as i64, n)
                        }
                        Err(e) => Err(e),
                    }
                }
                Method::Ratio => {
                    alice.send(&charlie, "relative wave function".into(), &mut messages)?;
                    RelativeWaveTables::from_states(&views[0].0, &views[0].1)
                        .and_then(|t| level3_recover_p_ratio(&t, PHASE_TOLERANCE))
                }
                Method::Process => {
                    alice.send(&charlie, format!("{} input states", views.len()), &mut messages)?;
                    level3_recover_p_process(&views).map(|fit| {
                        records.push(RoundRecord { round: 0, observer: charlie.name.clone(), outcome: Outcome::ProcessScores(fit.scores.clone()) });
                        Recovery::Unique(fit.best)
                    })
                }
            };
            settle(result)?
        }
        Level::ExtraParticle => {
            let t = config
                .preparation
                .two_branch()
                .ok_or_else(|| Error::Configuration("extra-particle mode needs a two-branch preparation".into()))?;
            let kin = config.preparation.kinematical(n, 0)?;
            match extra_particle_mode(&kin, t.alice_markers(n)) {
                Ok(report) => {
                    for phase in report.branch_phases.iter().flatten() {
                        records.push(RoundRecord { round: 0, observer: alice.name.clone(), outcome: Outcome::BranchPhase(*phase) });
                    }
                    Verdict::SectorProfile { weights: report.weights, separations: report.separations, phi_candidates: report.phi_candidates }
                }
                Err(e) if inconclusive(&e) => Verdict::Insufficient(e.to_string()),
                Err(e) => return Err(e),
            }
        }
        Level::Perspectival(method) => {
            let rounds = if method == Method::Process { config.rounds } else { 1 };
            let a = players()[0].clone();
            let states: Vec<RelativeState> = (0..rounds)
                .map(|r| {
                    let rel = reduce_to_frame(&prepare(config, r)?, &a, origin(n))?;
                    RelativeState::perspectival(rel.state().clone(), a.clone(), origin(n), config.sector)
                })
                .collect::<Result<_>>()?;
            let markers = config.preparation.two_branch().map(|t| t.alice_markers(n));
            settle(perspectival_variant_round(&states, method, markers))?
        }
    };
    Ok(GameTranscript { records, messages, verdict })
}

/// The other frame and its two branch positions, as seen by `obs`.
fn branch_marker(obs: &Observer, t: &super::config::TwoBranch, n: usize) -> (SystemId, (usize, usize)) {
    if obs.frame.label() == "A" {
        (SystemId::from("C"), t.alice_markers(n))
    } else {
        (SystemId::from("A"), t.charlie_markers(n))
    }
}
