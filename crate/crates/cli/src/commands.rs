use std::f64::consts::TAU;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qrf_core::game::{run_game, GameTranscript, Outcome, Preparation, Verdict};
use qrf_core::group::{omega_pow, reduce, ChargeLabel, GroupElement};
use qrf_core::hilbert::{DenseOperator, StateVector, SystemId};
use qrf_core::neutral::{
    d_embedding_pipeline, frame_jump, reduce_to_frame, relational_expectation, sector_project, sector_weights,
    KinematicalState,
};
use qrf_core::observables::{
    hamiltonian_covariance_demo, parity, parity_invariant_sectors, random_hermitian, random_s0_invariant,
    relative_distance_demo, theorem1_classify, HamiltonianSetup,
};
use qrf_core::par::{with_workers, Execution};
use qrf_core::transform::{
    build_s_f, build_s_p, build_s_p_with_fault, build_s_p_xz, canonical_transport_with_fault, check_transitivity,
    check_transitivity_with_fault, check_unitarity_inverse, classify_admissible_phase, d_embedding_residual,
    FrameFamily, PhaseClass, PhaseFunction,
};

use crate::scenario::*;
use crate::CliError;

/// Flag values that take precedence over the scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) -> Result<(), CliError> {
        if self.tolerance.is_some() {
            scenario.tolerance = self.tolerance;
        }
        if let Some(s) = self.seed {
            scenario.seed = s;
        }
        if self.workers.is_some() {
            scenario.workers = self.workers;
        }
        scenario.validate()
    }
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    PropertyFailure = 1,
    Configuration = 2,
    Ambiguous = 3,
}

impl ExitStatus {
    pub fn of(record: &ResultRecord) -> Self {
        match record.status.as_str() {
            "ok" => ExitStatus::Ok,
            "ambiguous" => ExitStatus::Ambiguous,
            _ => ExitStatus::PropertyFailure,
        }
    }
}

fn finish(command: &str, status: &str, inputs: &Scenario, outputs: Outputs, start: Instant) -> ResultRecord {
    ResultRecord {
        version: SCHEMA_VERSION.into(),
        tool_version: TOOL_VERSION.into(),
        command: command.into(),
        status: status.into(),
        inputs: inputs.clone(),
        outputs,
        timing: Some(Timing { wall_time_ms: start.elapsed().as_secs_f64() * 1e3 }),
    }
}

// ---------------------------------------------------------------- verify

struct Check {
    name: &'static str,
    n: usize,
    sector: Option<usize>,
    residuals: Vec<f64>,
    tolerance: f64,
}

impl Check {
    fn new(name: &'static str, n: usize, sector: Option<usize>, tolerance: f64) -> Self {
        Self { name, n, sector, residuals: Vec::new(), tolerance }
    }

    fn push(&mut self, r: f64) {
        self.residuals.push(r);
    }

    fn output(self) -> IdentityOutput {
        // NaN counts as a failure
        let max = self.residuals.iter().copied().fold(0.0, |m: f64, r| if r.is_nan() { f64::INFINITY } else { m.max(r) });
        IdentityOutput {
            name: self.name.into(),
            n: self.n,
            sector: self.sector,
            checks: self.residuals.len(),
            max_residual: max,
            tolerance: self.tolerance,
            passed: max < self.tolerance,
        }
    }
}

/// Counting checks pass with zero mismatches, whatever the tolerance flag.
const COUNT_TOLERANCE: f64 = 0.5;

fn sample_rng(seed: u64, n: usize, p: usize, salt: u64) -> ChaCha8Rng {
    let mixed = seed ^ ((n as u64) << 40) ^ ((p as u64) << 20) ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ChaCha8Rng::seed_from_u64(mixed)
}

fn ids<const K: usize>(labels: [&str; K]) -> [SystemId; K] {
    labels.map(SystemId::from)
}

/// Runs one verification suite over the scenario's grid.
pub fn cmd_verify(scenario: &Scenario) -> Result<ResultRecord, CliError> {
    let start = Instant::now();
    let v = scenario.verify.as_ref().ok_or_else(|| CliError::Config("verify: missing [verify] table".into()))?;
    let grid = scenario.grid();
    let out = with_workers(scenario.workers, || run_suite(scenario, v, &grid))?;
    let status = if out.passed { "ok" } else { "failed" };
    Ok(finish("verify", status, scenario, Outputs::Verify(out), start))
}

fn run_suite(scenario: &Scenario, v: &VerifySection, grid: &[usize]) -> Result<VerifyOutput, CliError> {
    let tol = |default: f64| scenario.tolerance.unwrap_or(default);
    let mut identities = Vec::new();
    let mut admissible = Vec::new();
    match v.suite {
        Suite::Transforms => {
            let points: Vec<(usize, usize)> = grid.iter().flat_map(|&n| (0..n).map(move |p| (n, p))).collect();
            let results = Execution::Parallel.map(&points, |&(n, p)| transforms_point(n, p, v, scenario.seed, tol(1e-10)));
            for r in results {
                identities.extend(r?);
            }
        }
        Suite::Pipeline => {
            let points: Vec<(usize, usize)> = grid.iter().flat_map(|&n| (0..n).map(move |p| (n, p))).collect();
            let results = Execution::Parallel.map(&points, |&(n, p)| pipeline_point(n, p, v.samples, scenario.seed, tol(1e-10)));
            for r in results {
                identities.extend(r?);
            }
        }
        Suite::Observables => {
            let results = Execution::Parallel.map(grid, |&n| observables_point(n, v.samples, scenario.seed, tol(1e-9)));
            for r in results {
                identities.extend(r?);
            }
        }
        Suite::AppendixE => {
            let results = Execution::Parallel.map(grid, |&n| appendix_e_point(n, v.samples.max(100), scenario.seed));
            for r in results {
                let (ids, adm) = r?;
                identities.extend(ids);
                admissible.push(adm);
            }
        }
    }
    let failures: Vec<String> = identities
        .iter()
        .filter(|i| !i.passed)
        .map(|i| match i.sector {
            Some(p) => format!("{} (N={}, P={p}): residual {:.3e}", i.name, i.n, i.max_residual),
            None => format!("{} (N={}): residual {:.3e}", i.name, i.n, i.max_residual),
        })
        .collect();
    let max_residual = identities.iter().map(|i| i.max_residual).fold(0.0, f64::max);
    Ok(VerifyOutput {
        suite: v.suite.name().into(),
        grid: grid.to_vec(),
        passed: failures.is_empty(),
        max_residual,
        identities,
        failures,
        admissible,
    })
}

fn transforms_point(n: usize, p: usize, v: &VerifySection, seed: u64, tol: f64) -> Result<Vec<IdentityOutput>, CliError> {
    let fault = v.inject_fault;
    let sector = ChargeLabel::new(p as i64, n);
    let [a, b, c, d] = ids(["A", "B", "C", "D"]);
    let mut out = Vec::new();

    let mut inverse = Check::new("unitarity-inverse", n, Some(p), tol);
    inverse.push(check_unitarity_inverse(&build_s_p_with_fault(&a, &c, std::slice::from_ref(&b), sector, fault)?)?.residual);
    inverse.push(check_unitarity_inverse(&build_s_p_with_fault(&a, &c, &[b.clone(), d.clone()], sector, fault)?)?.residual);
    out.push(inverse.output());

    let mut trans = Check::new("transitivity", n, Some(p), tol);
    trans.push(check_transitivity_with_fault(&FrameFamily::Sector(sector), fault)?.residual);
    out.push(trans.output());

    // |y⟩_B|z⟩_C ↦ ω^{−zP}|−z⟩_A|y−z⟩_B
    let fc = build_s_p_with_fault(&a, &c, std::slice::from_ref(&b), sector, fault)?;
    let closed = DenseOperator::from_monomial(vec![b.clone(), c.clone()], vec![a.clone(), b.clone()], n, |dg| {
        let (y, z) = (dg[0] as i64, dg[1] as i64);
        (vec![reduce(-z, n), reduce(y - z, n)], omega_pow(n, -z * p as i64))
    })?;
    let mut cf = Check::new("closed-form", n, Some(p), tol);
    cf.push(fc.unitary.reordered(&[b.clone(), c.clone()], &[a.clone(), b.clone()])?.max_abs_diff(&closed)?);
    out.push(cf.output());

    let mut transport = Check::new("canonical-transport", n, Some(p), tol.max(1e-9));
    transport.push(canonical_transport_with_fault(sector, fault)?.max());
    out.push(transport.output());

    let mut xz = Check::new("perspective-neutral-form-at-origin", n, Some(p), tol);
    let zero = GroupElement::zero(n);
    xz.push(build_s_p_xz(&a, &c, std::slice::from_ref(&b), sector, zero, zero)?.unitary.max_abs_diff(&build_s_p(&a, &c, std::slice::from_ref(&b), sector)?.unitary)?);
    out.push(xz.output());

    let mut emb = Check::new("d-embedding", n, Some(p), tol);
    let mut rng = sample_rng(seed, n, p, 1);
    for _ in 0..v.samples {
        let psi = StateVector::random(vec![b.clone(), c.clone()], n, &mut rng)?;
        emb.push(d_embedding_residual(&psi, sector)?);
    }
    out.push(emb.output());
    Ok(out)
}

fn random_kin(n: usize, rng: &mut ChaCha8Rng) -> Result<KinematicalState, CliError> {
    Ok(KinematicalState::new(StateVector::random(ids(["A", "B", "C"]).to_vec(), n, rng)?)?)
}

fn pipeline_point(n: usize, p: usize, samples: usize, seed: u64, tol: f64) -> Result<Vec<IdentityOutput>, CliError> {
    let sector = ChargeLabel::new(p as i64, n);
    let [a, b, c] = ids(["A", "B", "C"]);
    let mut rng = sample_rng(seed, n, p, 2);
    let mut complete = Check::new("sector-completeness", n, Some(p), tol);
    let mut covariance = Check::new("physical-covariance", n, Some(p), tol);
    let mut norms = Check::new("equal-conditional-norms", n, Some(p), tol);
    let mut square = Check::new("commuting-square", n, Some(p), tol);
    let mut lift = Check::new("lift-round-trip", n, Some(p), tol);
    let mut relational = Check::new("relational-expectation", n, Some(p), tol);
    let mut embedding = Check::new("d-embedding-pipeline", n, Some(p), tol);
    for _ in 0..samples {
        let kin = random_kin(n, &mut rng)?;
        complete.push((sector_weights(&kin).iter().sum::<f64>() - 1.0).abs());
        let (phys, _) = sector_project(&kin, sector)?;
        covariance.push(phys.covariance_defect());
        for frame in [&a, &b, &c] {
            for x in 0..n {
                norms.push((phys.state().condition_on(frame, x)?.norm() - (n as f64).sqrt().recip()).abs());
            }
        }
        let x = GroupElement::new(rng.random_range(0..n as i64), n);
        let z = GroupElement::new(rng.random_range(0..n as i64), n);
        let rel_a = reduce_to_frame(&phys, &a, x)?;
        let jumped = frame_jump(&rel_a, &c, z)?;
        square.push(jumped.state().max_abs_diff(reduce_to_frame(&phys, &c, z)?.state())?);
        lift.push(rel_a.lift()?.state().max_abs_diff(phys.state())?);
        let h = random_hermitian(vec![b.clone(), c.clone()], n, &mut rng)?;
        relational.push((relational_expectation(&phys, &a, x, &h)? - h.expectation(rel_a.state())?).norm());
        let report = d_embedding_pipeline(&kin, sector, &a, x)?;
        embedding.push((1.0 - report.fidelity).abs().max((1.0 - report.d_purity).abs()));
    }
    Ok([complete, covariance, norms, square, lift, relational, embedding].into_iter().map(Check::output).collect())
}

fn observables_point(n: usize, samples: usize, seed: u64, tol: f64) -> Result<Vec<IdentityOutput>, CliError> {
    let [a, b, c] = ids(["A", "B", "C"]);
    let mut rng = sample_rng(seed, n, 0, 3);
    let mut out = Vec::new();

    let mut disagreements = Check::new("theorem1-biconditional-disagreements", n, None, COUNT_TOLERANCE);
    let mut count = 0.0;
    for i in 0..samples {
        let extra = (i % 2 == 1).then(|| ChargeLabel::new(rng.random_range(0..n as i64), n));
        let op = random_s0_invariant(&b, &c, n, extra, &mut rng)?;
        let report = theorem1_classify(&op, &a, &c, std::slice::from_ref(&b))?;
        if !report.s0_invariant || !report.biconditional_agrees() {
            count += 1.0;
        }
    }
    disagreements.push(count);
    out.push(disagreements.output());

    let mut par = Check::new("parity-invariant-sectors", n, None, COUNT_TOLERANCE);
    let op = parity(&b, n).tensor(&parity(&c, n))?;
    let report = theorem1_classify(&op, &a, &c, std::slice::from_ref(&b))?;
    let found: Vec<usize> = report.brute_force_sectors.iter().map(|p| p.value()).collect();
    let predicted: Vec<usize> = report.invariant_sectors.iter().map(|p| p.value()).collect();
    let expected = parity_invariant_sectors(n);
    par.push(if found == expected && predicted == expected { 0.0 } else { 1.0 });
    out.push(par.output());

    let rd = relative_distance_demo(n)?;
    let mut spect = Check::new("relative-distance-spectators-invariant", n, None, tol);
    rd.spectator_pair.iter().for_each(|&r| spect.push(r));
    out.push(spect.output());
    let mut clockmap = Check::new("relative-distance-frame-pair-to-spectator", n, None, tol);
    rd.frame_pair_to_spectator_clock.iter().for_each(|&r| clockmap.push(r));
    out.push(clockmap.output());

    let potential: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut setup = HamiltonianSetup { n, potential, mass_s: 1.3, mass_r: 0.7, include_frame_kinetic: false };
    let spectator = hamiltonian_covariance_demo(&setup)?;
    let mut cov = Check::new("hamiltonian-spectator-covariance", n, None, tol);
    spectator.covariance_residuals.iter().chain(&spectator.sector_dependence).for_each(|&r| cov.push(r));
    out.push(cov.output());
    setup.include_frame_kinetic = true;
    let framed = hamiltonian_covariance_demo(&setup)?;
    let mut broken = Check::new("hamiltonian-frame-kinetic-covariant-sectors", n, None, COUNT_TOLERANCE);
    broken.push(framed.covariant_sectors().len() as f64);
    out.push(broken.output());
    Ok(out)
}

fn appendix_e_point(n: usize, samples: usize, seed: u64) -> Result<(Vec<IdentityOutput>, AdmissibleOutput), CliError> {
    let [a, b, c] = ids(["A", "B", "C"]);
    let step = TAU / n as f64;
    let mut tables: Vec<Vec<f64>> = Vec::new();
    if n <= 4 {
        // every table with values in (2π/N)·Z_N
        for code in 0..n.pow(n as u32) {
            tables.push((0..n).map(|x| ((code / n.pow(x as u32)) % n) as f64 * step).collect());
        }
    } else {
        let mut rng = sample_rng(seed, n, 0, 4);
        tables.extend((0..n).map(|k| (0..n).map(|x| ((k * x) % n) as f64 * step).collect()));
        for i in 0..samples {
            let t = if i % 2 == 0 {
                (0..n).map(|_| rng.random_range(0.0..TAU)).collect()
            } else {
                (0..n).map(|_| rng.random_range(0..n) as f64 * step).collect()
            };
            tables.push(t);
        }
    }
    let mut exponents = Vec::new();
    let mut disagreements = 0.0;
    let mut unitarity_mismatch = 0.0;
    for t in &tables {
        let f = PhaseFunction::new(t.clone())?;
        let class = classify_admissible_phase(&f);
        let transitive = check_transitivity(&FrameFamily::Phase(f.clone()))?.holds;
        let inverse_law = check_unitarity_inverse(&build_s_f(&a, &c, std::slice::from_ref(&b), &f)?)?.holds;
        match class {
            PhaseClass::Admissible { exponent, .. } => {
                exponents.push(exponent.value());
                if !transitive {
                    disagreements += 1.0;
                }
                if !inverse_law {
                    unitarity_mismatch += 1.0;
                }
            }
            PhaseClass::Inadmissible { fails_transitivity, fails_unitarity } => {
                if transitive || fails_transitivity == transitive {
                    disagreements += 1.0;
                }
                if fails_unitarity == inverse_law {
                    unitarity_mismatch += 1.0;
                }
            }
        }
    }
    let mut sorted = exponents.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let only_characters = exponents.len() == n && sorted == (0..n).collect::<Vec<_>>();
    let mut count = Check::new("admissible-are-characters", n, None, COUNT_TOLERANCE);
    count.push(if only_characters { 0.0 } else { 1.0 });
    let mut agree = Check::new("transitivity-agrees-with-classifier", n, None, COUNT_TOLERANCE);
    agree.push(disagreements);
    let mut inv = Check::new("inverse-law-agrees-with-classifier", n, None, COUNT_TOLERANCE);
    inv.push(unitarity_mismatch);
    let adm = AdmissibleOutput {
        n,
        tables_checked: tables.len(),
        exponents: sorted,
        only_characters,
        agrees_with_transitivity: disagreements == 0.0,
    };
    Ok((vec![count.output(), agree.output(), inv.output()], adm))
}

// ---------------------------------------------------------------- game

fn verdict_record(v: &Verdict) -> VerdictRecord {
    let mut r = VerdictRecord {
        kind: String::new(),
        sector: None,
        candidates: Vec::new(),
        reason: None,
        weights: Vec::new(),
        separations: Vec::new(),
        phi_candidates: Vec::new(),
    };
    match v {
        Verdict::Recovered(p) => {
            r.kind = "recovered".into();
            r.sector = Some(p.value());
        }
        Verdict::Candidates(c) => {
            r.kind = "candidates".into();
            r.candidates = c.iter().map(|p| p.value()).collect();
        }
        Verdict::Indistinguishable => r.kind = "indistinguishable".into(),
        Verdict::Insufficient(reason) => {
            r.kind = "insufficient".into();
            r.reason = Some(reason.clone());
        }
        Verdict::SectorProfile { weights, separations, phi_candidates } => {
            r.kind = "sector-profile".into();
            r.weights = weights.clone();
            r.separations = separations.clone();
            r.phi_candidates = phi_candidates.clone();
        }
    }
    r
}

fn game_output(t: &GameTranscript) -> GameOutput {
    let records = t
        .records
        .iter()
        .map(|rec| {
            let mut o = RoundOutput {
                round: rec.round,
                observer: rec.observer.clone(),
                kind: String::new(),
                value: None,
                values: Vec::new(),
                sector: None,
                systems: Vec::new(),
                amplitudes: Vec::new(),
                mixed: None,
            };
            match &rec.outcome {
                Outcome::FramedDeviation { max_total_variation, sectors_compared } => {
                    o.kind = "framed-deviation".into();
                    o.value = Some(*max_total_variation);
                    o.values = vec![*sectors_compared as f64];
                }
                Outcome::Tomography { state, purity, mixed } => {
                    o.kind = "tomography".into();
                    o.value = Some(*purity);
                    o.systems = state.systems().iter().map(|s| s.label().to_string()).collect();
                    o.amplitudes = state.to_pairs();
                    o.mixed = Some(*mixed);
                }
                Outcome::BranchPhase(phi) => {
                    o.kind = "branch-phase".into();
                    o.value = Some(*phi);
                }
                Outcome::ConfusionFidelity { other_sector, fidelity } => {
                    o.kind = "confusion-fidelity".into();
                    o.value = Some(*fidelity);
                    o.sector = Some(other_sector.value());
                }
                Outcome::ProcessScores(s) => {
                    o.kind = "process-scores".into();
                    o.values = s.clone();
                }
            }
            o
        })
        .collect();
    let messages = t
        .messages
        .iter()
        .map(|m| MessageOutput { from: m.from.clone(), to: m.to.clone(), content: m.content.clone() })
        .collect();
    GameOutput { verdict: verdict_record(&t.verdict), records, messages }
}

fn core_game(scenario: &Scenario) -> Result<GameOutput, CliError> {
    let cfg = scenario.game_config()?;
    let transcript = run_game(&cfg).map_err(CliError::from_core)?;
    Ok(game_output(&transcript))
}

/// Prepares Eve's state and plays the configured level.
pub fn cmd_game(scenario: &Scenario) -> Result<ResultRecord, CliError> {
    let start = Instant::now();
    let out = with_workers(scenario.workers, || core_game(scenario))?;
    let status = if out.verdict.kind == "candidates" { "ambiguous" } else { "ok" };
    Ok(finish("game", status, scenario, Outputs::Game(out), start))
}

// ---------------------------------------------------------------- sweep

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn sweep_point(base: &Scenario, s: &SweepSection, index: usize) -> SweepRow {
    let mut scenario = base.clone();
    scenario.sweep = None;
    let (value, param) = match s.param {
        SweepParam::P => {
            let p = sweep_values(base, s)[index] as i64;
            if let Some(g) = scenario.game.as_mut() {
                g.sector = p;
            }
            (p.to_string(), "P")
        }
        SweepParam::N => {
            let n = sweep_values(base, s)[index] as usize;
            scenario.n = n;
            if let Some(v) = scenario.verify.as_mut() {
                v.grid = Some(vec![n]);
                v.use_default_grid = false;
            }
            (n.to_string(), "N")
        }
        SweepParam::Phi => {
            let phi = sweep_values(base, s)[index];
            if let Some(PreparationSection::TwoBranch { phi: target, .. }) = scenario.game.as_mut().map(|g| &mut g.preparation) {
                *target = phi;
            }
            (fmt_f64(phi), "phi")
        }
        SweepParam::Geometry => {
            let g = s.geometries.as_ref().expect("validated")[index];
            if let Some(PreparationSection::TwoBranch { x1, x2, z1, z2, .. }) = scenario.game.as_mut().map(|g| &mut g.preparation) {
                (*x1, *x2, *z1, *z2) = (g[0], g[1], g[2], g[3]);
            }
            (format!("{};{};{};{}", g[0], g[1], g[2], g[3]), "geometry")
        }
    };
    let mut row = SweepRow {
        index,
        param: param.into(),
        value,
        command: match s.command {
            SweepCommand::Game => "game".into(),
            SweepCommand::Verify => "verify".into(),
        },
        status: String::new(),
        recovered_sector: String::new(),
        phase_a: String::new(),
        phase_c: String::new(),
        max_residual: String::new(),
    };
    let result = scenario.validate().and_then(|_| match s.command {
        SweepCommand::Game => core_game(&scenario).map(Ok),
        SweepCommand::Verify => {
            let v = scenario.verify.clone().expect("validated");
            run_suite(&scenario, &v, &scenario.grid()).map(Err)
        }
    });
    match result {
        Ok(Ok(game)) => {
            row.status = game.verdict.kind.clone();
            row.recovered_sector = match (&game.verdict.sector, game.verdict.candidates.is_empty()) {
                (Some(p), _) => p.to_string(),
                (None, false) => game.verdict.candidates.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("|"),
                _ => String::new(),
            };
            let phase = |who: &str| {
                game.records
                    .iter()
                    .find(|r| r.kind == "branch-phase" && r.observer == who)
                    .and_then(|r| r.value)
                    .map(fmt_f64)
                    .unwrap_or_default()
            };
            row.phase_a = phase("alice");
            row.phase_c = phase("charlie");
        }
        Ok(Err(verify)) => {
            row.status = if verify.passed { "passed".into() } else { "failed".into() };
            row.max_residual = format!("{:e}", verify.max_residual);
        }
        Err(CliError::Config(msg)) => row.status = format!("config-error: {msg}"),
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

fn sweep_values(base: &Scenario, s: &SweepSection) -> Vec<f64> {
    match (&s.values, s.param) {
        (Some(v), _) => v.clone(),
        (None, SweepParam::P) => (0..base.n).map(|p| p as f64).collect(),
        _ => Vec::new(),
    }
}

/// One row per grid point, in grid order.
pub fn cmd_sweep(scenario: &Scenario) -> Result<ResultRecord, CliError> {
    let start = Instant::now();
    let s = scenario.sweep.as_ref().ok_or_else(|| CliError::Config("sweep: missing [sweep] table".into()))?;
    let len = match s.param {
        SweepParam::Geometry => s.geometries.as_ref().map_or(0, Vec::len),
        _ => sweep_values(scenario, s).len(),
    };
    let rows = with_workers(scenario.workers, || Execution::Parallel.map_range(len, |i| sweep_point(scenario, s, i)));
    let failed = rows.iter().any(|r| r.status == "failed" || r.status.starts_with("error") || r.status.starts_with("config-error"));
    let ambiguous = rows.iter().any(|r| r.status == "candidates");
    let status = if failed {
        "failed"
    } else if ambiguous {
        "ambiguous"
    } else {
        "ok"
    };
    let param = match s.param {
        SweepParam::P => "P",
        SweepParam::N => "N",
        SweepParam::Phi => "phi",
        SweepParam::Geometry => "geometry",
    };
    Ok(finish("sweep", status, scenario, Outputs::Sweep(SweepOutput { param: param.into(), rows }), start))
}

/// The sweep rows as CSV with a header line.
pub fn sweep_csv(record: &ResultRecord) -> Result<String, CliError> {
    let Outputs::Sweep(s) = &record.outputs else {
        return Err(CliError::Config("not a sweep record".into()));
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &s.rows {
        w.serialize(row).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// The preparation a scenario describes, as a kinematical state, for tests
/// and tooling that want to inspect it.
pub fn scenario_state(scenario: &Scenario) -> Result<KinematicalState, CliError> {
    let cfg = scenario.game_config()?;
    let prep: &Preparation = &cfg.preparation;
    prep.kinematical(cfg.n, 0).map_err(CliError::from_core)
}
