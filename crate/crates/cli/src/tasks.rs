//! The four batch tasks.

use std::collections::BTreeMap;
use std::path::PathBuf;

use entrodecay::bochner::{
    admissible_r, bochner_identities, check_admissibility, four_term_check, gamma_decomposition, key_inequality,
    AdmissibilityReport, GammaMeasure, ResidualReport,
};
use entrodecay::generator::check_reversibility;
use entrodecay::models::{continuum_epsilon_beta, glauber_kappa_bound, theoretical_bounds, QuadratureOptions};
use entrodecay::montecarlo::{
    chi_square_test, continuum_number_dist_oracle, count_histogram, empirical_distribution, simulate_continuum_many,
    simulate_finite_many, stream_rng, ChiSquare, OracleOptions,
};
use entrodecay::spectral::{
    best_constant_search, decay_curves, spectral_gap, uniform_grid, Constant, DecayChecks, DecayReport,
    SearchOptions, Witnesses,
};
use entrodecay::{functionals, BoundReport, ContinuumSpec, Error, FiniteChain, Model};
use rand::Rng;
use serde::Serialize;

use crate::config::{Built, ConfigError, ExperimentConfig, Task};
use crate::output::{all_pass, Check, Envelope, OutDir, VERSION};
use crate::CliError;

/// Residual tolerances of the verification suite.
const EXACT: f64 = 1e-12;
const IDENTITY: f64 = 1e-10;

/// What a task produced.
#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
}

pub fn run(config: &ExperimentConfig, out: &OutDir) -> Result<Outcome, CliError> {
    let built = config.model.build()?;
    match (config.task.expect("resolved"), built) {
        (Task::Verify, Built::Finite(m)) => verify(config, &finite_chain(config, &m)?, out),
        (Task::Report, built) => report(config, built, out),
        (Task::Decay, Built::Finite(m)) => decay(config, &m, out),
        (Task::Simulate, Built::Finite(m)) => simulate_finite(config, &finite_chain(config, &m)?, out),
        (Task::Simulate, Built::Continuum(spec)) => simulate_continuum(config, &spec, out),
        (task, Built::Continuum(_)) => Err(ConfigError::new("model.family", format!("{} needs a finite model", task.as_str())).into()),
    }
}

fn finite_chain(config: &ExperimentConfig, model: &Model) -> Result<FiniteChain, CliError> {
    FiniteChain::new(model, config.state_cap).map_err(|e| match e {
        Error::StateSpaceTooLarge { .. } => ConfigError::new("state_cap", e).into(),
        e => e.into(),
    })
}

fn envelope<'a, T: Serialize>(
    config: &'a ExperimentConfig,
    pass: bool,
    sources: &[(&'static str, &'static str)],
    result: &'a T,
) -> Envelope<'a, T> {
    Envelope {
        version: VERSION,
        task: config.task.expect("resolved").as_str(),
        config,
        sources: sources.iter().copied().collect::<BTreeMap<_, _>>(),
        pass,
        result,
    }
}

fn random_positive<R: Rng>(rng: &mut R, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-amp..amp).exp()).collect()
}

// ---------------------------------------------------------------------------
// verify

#[derive(Debug, Serialize)]
struct KeySweep {
    samples: usize,
    min_relative_slack: f64,
    equality_at_one: bool,
}

#[derive(Debug, Serialize)]
struct VerifyResult {
    states: usize,
    residuals: ResidualReport,
    admissibility: AdmissibilityReport,
    reversibility: f64,
    max_reconstruction_error: f64,
    min_r_side: f64,
    min_four_term_integrand: f64,
    key_inequality: KeySweep,
    checks: Vec<Check>,
}

fn verify(config: &ExperimentConfig, chain: &FiniteChain, out: &OutDir) -> Result<Outcome, CliError> {
    let opts = &config.verify;
    let r = admissible_r(chain)?;
    let admissibility = check_admissibility(chain, &r);
    let measure = GammaMeasure::new(chain, &r);
    let mut rng = stream_rng(config.seed(), 0);
    let (mut boch1, mut boch2, mut reconstruction) = (0.0f64, 0.0f64, 0.0f64);
    let (mut min_r, mut min_integrand) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..opts.samples {
        let f = random_positive(&mut rng, chain.len(), opts.amplitude);
        let g: Vec<f64> = (0..chain.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (r1, r2) = bochner_identities(&measure, &f, &g)?.relative();
        boch1 = boch1.max(r1);
        boch2 = boch2.max(r2);
        let d = gamma_decomposition(&measure, &f)?;
        let scale = d.gamma_side.abs() + d.r_side.abs() + d.mlsi_rhs.abs();
        reconstruction = reconstruction.max(d.reconstruction_error / scale.max(f64::MIN_POSITIVE));
        min_r = min_r.min(d.r_side / scale.max(f64::MIN_POSITIVE));
        min_integrand = min_integrand.min(four_term_check(&measure, &f)?.min_integrand);
    }

    let span = 1e6f64.ln();
    let mut key_rng = stream_rng(config.seed(), 1);
    let mut worst = f64::INFINITY;
    for _ in 0..opts.key_samples {
        let a = key_rng.random_range(-span..span).exp();
        let b = key_rng.random_range(-span..span).exp();
        let k = key_inequality(a, b)?;
        worst = worst.min(k.slack() / k.scale);
    }
    let one = key_inequality(1.0, 1.0)?;
    let key = KeySweep {
        samples: opts.key_samples,
        min_relative_slack: worst,
        equality_at_one: one.lhs == 0.0 && one.rhs == 0.0,
    };

    let reversibility = check_reversibility(&chain.kernel, &chain.pi);
    let mut checks = vec![
        Check::at_most("condition_a", admissibility.condition_a, EXACT),
        Check::at_most("condition_b", admissibility.condition_b, EXACT),
        Check::at_most("condition_c", admissibility.condition_c, EXACT),
        Check::at_most("boch1_relative", boch1, IDENTITY),
        Check::at_most("boch2_relative", boch2, IDENTITY),
        Check::at_most("reconstruction_relative", reconstruction, IDENTITY),
        Check::at_least("r_side_relative", min_r, -EXACT),
        Check::at_least("four_term_integrand", min_integrand, -IDENTITY),
        Check::at_most("reversibility", reversibility, EXACT),
        Check::at_most("stationarity", chain.pi.stationarity_residual(&chain.q), IDENTITY),
        Check::at_most("row_sums", chain.q.max_row_sum(), EXACT),
        Check::at_least("key_inequality_relative_slack", worst, -EXACT),
    ];
    checks.push(Check::at_least("key_equality_at_one", f64::from(u8::from(key.equality_at_one)), 1.0));
    let result = VerifyResult {
        states: chain.len(),
        residuals: ResidualReport {
            condition_a: admissibility.condition_a,
            condition_b: admissibility.condition_b,
            condition_c: admissibility.condition_c,
            boch1,
            boch2,
            truncation: admissibility.truncation,
        },
        admissibility,
        reversibility,
        max_reconstruction_error: reconstruction,
        min_r_side: min_r,
        min_four_term_integrand: min_integrand,
        key_inequality: key,
        checks,
    };
    let pass = all_pass(&result.checks);
    let sources = [
        ("residuals.condition_a", "bochner::check_admissibility"),
        ("residuals.condition_b", "bochner::check_admissibility"),
        ("residuals.condition_c", "bochner::check_admissibility"),
        ("residuals.truncation", "bochner::check_admissibility"),
        ("residuals.boch1", "bochner::bochner_identities (max relative)"),
        ("residuals.boch2", "bochner::bochner_identities (max relative)"),
        ("reversibility", "generator::check_reversibility"),
        ("max_reconstruction_error", "bochner::gamma_decomposition"),
        ("min_r_side", "bochner::gamma_decomposition"),
        ("min_four_term_integrand", "bochner::four_term_check"),
        ("key_inequality", "bochner::key_inequality"),
    ];
    let file = out.json("verify.json", &envelope(config, pass, &sources, &result))?;
    Ok(Outcome { pass, files: vec![file] })
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Serialize)]
struct ReportResult {
    bounds: BoundReport,
    decay: Option<DecayReport>,
    /// Why the constants were not estimated, if they were not.
    skipped: Option<String>,
    checks: Vec<Check>,
}

fn continuum_bounds(spec: &ContinuumSpec) -> Result<BoundReport, CliError> {
    let eps = continuum_epsilon_beta(spec, QuadratureOptions::default())?;
    let mut bounds = glauber_kappa_bound(spec.z, eps);
    bounds.method = "radial quadrature".into();
    Ok(bounds)
}

fn report(config: &ExperimentConfig, built: Built, out: &OutDir) -> Result<Outcome, CliError> {
    let (bounds, model) = match built {
        Built::Continuum(spec) => (continuum_bounds(&spec)?, None),
        Built::Finite(m) => (theoretical_bounds(&m, config.state_cap)?, Some(m)),
    };
    let mut skipped = None;
    let mut decay_report = None;
    if let Some(m) = model {
        match FiniteChain::new(&m, config.state_cap) {
            Ok(chain) => decay_report = Some(constants(config, &chain, bounds.kappa_bound)?),
            Err(Error::StateSpaceTooLarge { cap }) => {
                skipped = Some(format!("more than {cap} states: constants not estimated (raise state_cap)"));
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        skipped = Some("continuum model: only the theoretical bound is available".into());
    }
    let mut checks = Vec::new();
    if let Some(d) = &decay_report {
        checks.push(Check::at_most("alpha_hat_minus_twice_gap", d.alpha_hat - 2.0 * d.gap, 1e-8));
        if bounds.applicable {
            checks.push(Check::at_least("kappa_hat_minus_bound", d.kappa_hat - bounds.kappa_bound, -1e-7));
            checks.push(Check::at_least("alpha_hat_minus_bound", d.alpha_hat - bounds.kappa_bound, -1e-7));
        }
    }
    let result = ReportResult {
        bounds,
        decay: decay_report,
        skipped,
        checks,
    };
    let pass = all_pass(&result.checks);
    let sources = [
        ("bounds", "models::theoretical_bounds (continuum: models::continuum_epsilon_beta)"),
        ("decay.gap", "spectral::spectral_gap"),
        ("decay.alpha_hat", "spectral::best_constant_search (alpha)"),
        ("decay.kappa_hat", "spectral::best_constant_search (kappa)"),
        ("decay.curves", "spectral::decay_curves"),
        ("decay.witnesses", "spectral::best_constant_search (log f of the minimizers)"),
    ];
    let file = out.json("report.json", &envelope(config, pass, &sources, &result))?;
    Ok(Outcome { pass, files: vec![file] })
}

fn constants(config: &ExperimentConfig, chain: &FiniteChain, kappa_bound: f64) -> Result<DecayReport, CliError> {
    let r = &config.report;
    let gap = spectral_gap(&chain.q, &chain.pi)?;
    let options = SearchOptions {
        probes: r.probes,
        restarts: r.restarts,
        iterations: r.iterations,
        seed: config.seed(),
        log_cap: r.log_cap,
    };
    let v = Some(gap.eigenvector.as_slice());
    let alpha = best_constant_search(chain, Constant::Alpha, &options, v)?;
    let kappa = best_constant_search(chain, Constant::Kappa, &options, v)?;
    let f = random_positive(&mut stream_rng(config.seed(), 2), chain.len(), r.amplitude);
    let curves = decay_curves(chain, &f, &uniform_grid(r.t_max, r.points), kappa_bound, 1e-3)?;
    Ok(DecayReport {
        gap: gap.gap,
        alpha_hat: alpha.value,
        kappa_hat: kappa.value,
        kappa_bound,
        curves: curves.points,
        witnesses: Witnesses {
            alpha: alpha.witness,
            kappa: kappa.witness,
        },
    })
}

// ---------------------------------------------------------------------------
// decay

#[derive(Debug, Serialize)]
struct DecayEntry {
    file: String,
    initial_entropy: f64,
    checks: DecayChecks,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct DecayResult {
    kappa: f64,
    kappa_source: &'static str,
    functions: Vec<DecayEntry>,
}

fn decay(config: &ExperimentConfig, model: &Model, out: &OutDir) -> Result<Outcome, CliError> {
    let d = &config.decay;
    let (kappa, kappa_source) = match d.kappa {
        Some(k) => (k, "config"),
        None => {
            let b = theoretical_bounds(model, config.state_cap)?;
            if !b.applicable {
                return Err(ConfigError::new("decay.kappa", format!("model bound not applicable ({}); set decay.kappa", b.message)).into());
            }
            (b.kappa_bound, "theoretical bound")
        }
    };
    let chain = finite_chain(config, model)?;
    let grid = uniform_grid(d.t_max, d.points);
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for i in 0..d.functions {
        let f = random_positive(&mut stream_rng(config.seed(), i as u64), chain.len(), d.amplitude);
        let curves = decay_curves(&chain, &f, &grid, kappa, d.step)?;
        let name = format!("decay_{i:03}.csv");
        files.push(out.csv(&name, |w| curves.write_csv(w))?);
        let c = &curves.checks;
        let pass = curves.envelopes_hold(EXACT)
            && c.min_second_difference >= -1e-8
            && c.max_derivative_error <= 1e-6;
        entries.push(DecayEntry {
            file: name,
            initial_entropy: functionals::entropy(&f, &chain.pi)?,
            checks: curves.checks,
            pass,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    let result = DecayResult {
        kappa,
        kappa_source,
        functions: entries,
    };
    let sources = [
        ("kappa", "config or models::theoretical_bounds"),
        ("functions", "spectral::decay_curves"),
    ];
    files.push(out.json("decay.json", &envelope(config, pass, &sources, &result))?);
    Ok(Outcome { pass, files })
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Serialize)]
struct FiniteSimulation {
    trajectories: usize,
    t_end: f64,
    absorbed: usize,
    jumps: usize,
    relative_entropy: f64,
    tv_distance: f64,
    chi_square: ChiSquare,
}

fn simulate_finite(config: &ExperimentConfig, chain: &FiniteChain, out: &OutDir) -> Result<Outcome, CliError> {
    let s = &config.simulate;
    if s.start >= chain.len() {
        return Err(ConfigError::new("simulate.start", format!("state {} outside 0..{}", s.start, chain.len())).into());
    }
    let trajectories = simulate_finite_many(chain, s.start, s.t_end, config.seed(), s.trajectories)?;
    let hist = empirical_distribution(&trajectories, s.t_end, chain.len())?;
    let mut files = vec![out.csv("histogram.csv", |w| hist.write_csv(w))?];
    for (i, t) in trajectories.iter().take(s.paths).enumerate() {
        files.push(out.csv(&format!("path_{i:03}.csv"), |w| t.write_csv(w))?);
    }
    let pi = chain.pi.probs();
    let result = FiniteSimulation {
        trajectories: s.trajectories,
        t_end: s.t_end,
        absorbed: trajectories.iter().filter(|t| t.absorbed).count(),
        jumps: trajectories.iter().map(|t| t.moves.len()).sum(),
        relative_entropy: functionals::relative_entropy(&hist.probs, pi)?,
        tv_distance: functionals::tv_distance(&hist.probs, pi)?,
        chi_square: chi_square_test(&hist.counts, pi)?,
    };
    let sources = [
        ("histogram.csv", "montecarlo::empirical_distribution"),
        ("relative_entropy", "functionals::relative_entropy"),
        ("tv_distance", "functionals::tv_distance"),
        ("chi_square", "montecarlo::chi_square_test against the stationary law"),
    ];
    files.push(out.json("simulate.json", &envelope(config, true, &sources, &result))?);
    Ok(Outcome { pass: true, files })
}

#[derive(Debug, Serialize)]
struct ContinuumSimulation {
    trajectories: usize,
    t_end: f64,
    proposals: u64,
    accepted: u64,
    mean_count: f64,
    oracle: Option<OracleComparison>,
}

#[derive(Debug, Serialize)]
struct OracleComparison {
    probs: Vec<f64>,
    tail_bound: f64,
    chi_square: ChiSquare,
}

fn simulate_continuum(config: &ExperimentConfig, spec: &ContinuumSpec, out: &OutDir) -> Result<Outcome, CliError> {
    let s = &config.simulate;
    let trajectories = simulate_continuum_many(spec, s.t_end, config.seed(), s.trajectories)?;
    let hist = count_histogram(&trajectories, s.t_end, s.n_max)?;
    let mut files = vec![out.csv("counts.csv", |w| hist.write_csv(w))?];
    for (i, t) in trajectories.iter().take(s.paths).enumerate() {
        files.push(out.csv(&format!("path_{i:03}.csv"), |w| t.write_csv(w))?);
    }
    let oracle = if s.oracle {
        let opts = OracleOptions {
            seed: config.seed(),
            ..OracleOptions::default()
        };
        let law = continuum_number_dist_oracle(spec, s.n_max, opts)?;
        Some(OracleComparison {
            chi_square: chi_square_test(&hist.counts, &law.probs)?,
            tail_bound: law.tail_bound,
            probs: law.probs,
        })
    } else {
        None
    };
    let counts: Vec<usize> = trajectories.iter().map(|t| t.count_at(s.t_end)).collect::<Result<_, _>>()?;
    let result = ContinuumSimulation {
        trajectories: s.trajectories,
        t_end: s.t_end,
        proposals: trajectories.iter().map(|t| t.proposals).sum(),
        accepted: trajectories.iter().map(|t| t.accepted).sum(),
        mean_count: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
        oracle,
    };
    let sources = [
        ("counts.csv", "montecarlo::count_histogram"),
        ("oracle", "montecarlo::continuum_number_dist_oracle, montecarlo::chi_square_test"),
    ];
    files.push(out.json("simulate.json", &envelope(config, true, &sources, &result))?);
    Ok(Outcome { pass: true, files })
}
