//! Command implementations behind the binary's subcommands. Each returns its
//! result rows so integration tests can call them without touching the
//! filesystem; the binary serializes them to CSV.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{
    cdf_delay_rr, cdf_delay_rs, delay_outage, solve_meta_distribution, AnalyticError,
};
use crate::cli::config::{ConfigError, ScenarioConfig};
use crate::geometry::{sample_realization, GeometryError};
use crate::markov::MarkovError;
use crate::queuesim::{run_network_with_rr_mode, PolicyKind, SimError};

/// Process exit codes: 0 ok, 1 verification failure, 2 solver failure,
/// 3 data failure (config, IO, empty samples).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("solver failed: {0}")]
    Solver(#[from] AnalyticError),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Markov(#[from] MarkovError),
    #[error("{0}")]
    Data(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Config(_) | CliError::Geometry(_) | CliError::Sim(_)
            | CliError::Markov(_) | CliError::Data(_) | CliError::Io { .. } => 3,
        }
    }
}

/// One CSV record. Optional fields serialize as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub policy: PolicyKind,
    pub abscissa: f64,
    pub analytic: Option<f64>,
    pub simulated: Option<f64>,
    pub ci_half: Option<f64>,
    pub realizations: Option<usize>,
}

pub const CSV_HEADER: &str = "policy,abscissa,analytic,simulated,ci_half,realizations";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => String::new(),
    }
}

/// Render rows to CSV text, header included. Floats use a fixed six-decimal
/// format so identical runs are byte-identical.
pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let n = match r.realizations {
            Some(n) => n.to_string(),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.policy,
            r.abscissa,
            fmt_opt(r.analytic),
            fmt_opt(r.simulated),
            fmt_opt(r.ci_half),
            n
        ));
    }
    out
}

pub fn write_csv(path: &str, rows: &[ResultRow]) -> Result<(), CliError> {
    std::fs::write(path, rows_to_csv(rows))
        .map_err(|source| CliError::Io { path: path.to_string(), source })
}

/// Analytic mean-delay CDFs for both policies over the configured T grid.
pub fn cmd_analyze(cfg: &ScenarioConfig) -> Result<Vec<ResultRow>, CliError> {
    cfg.validate()?;
    let channel = cfg.channel_params()?;
    log::info!(
        "analyze: xi={}, k_s={}, theta={} (p_st {} dBm cancels in the SIR)",
        cfg.xi,
        cfg.k_s,
        channel.theta,
        cfg.p_st_dbm
    );
    let f = solve_meta_distribution(&cfg.solver, &channel, cfg.xi, cfg.k_s)?;
    let t_values = cfg.t_grid.values();
    let mut rows = Vec::with_capacity(2 * t_values.len());
    for policy in [PolicyKind::Rs, PolicyKind::Rr] {
        for &t in &t_values {
            let p = match policy {
                PolicyKind::Rs => cdf_delay_rs(&f, t, cfg.xi, cfg.k_s),
                PolicyKind::Rr => cdf_delay_rr(&f, t, cfg.xi, cfg.k_s),
            };
            rows.push(ResultRow {
                policy,
                abscissa: t,
                analytic: Some(p),
                simulated: None,
                ci_half: None,
                realizations: None,
            });
        }
    }
    Ok(rows)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable per-purpose seed derivation, so that adding streams never disturbs
/// existing ones.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let base = splitmix64(master ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Per-realization delay sample: sorted resolved means plus the full
/// population size (unresolved UEs stay in the denominator).
pub struct RealizationSample {
    pub sorted: Vec<f64>,
    pub population: usize,
}

/// Run all configured realizations under one policy. Realizations whose
/// inner region happens to be empty are skipped with a warning; the call
/// fails only when nothing at all is measurable.
pub fn collect_network_samples(
    cfg: &ScenarioConfig,
    policy: PolicyKind,
) -> Result<Vec<RealizationSample>, CliError> {
    let channel = cfg.channel_params()?;
    let window = cfg.window()?;

    let runs: Vec<Result<RealizationSample, CliError>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|i| {
            let net_seed = derive_seed(cfg.master_seed, 1, i as u64);
            let sim_seed = derive_seed(cfg.master_seed, 2, i as u64);
            let net = sample_realization(cfg.lambda_s, cfg.k_s, &window, net_seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(sim_seed);
            let stats = run_network_with_rr_mode(
                &net,
                policy,
                &channel,
                cfg.xi,
                cfg.warmup_slots,
                cfg.measure_slots,
                cfg.rr_advance_when_muted,
                &mut rng,
            )?;
            let mut sorted: Vec<f64> = stats.resolved().collect();
            sorted.sort_by(|a, b| a.total_cmp(b));
            Ok(RealizationSample { sorted, population: stats.per_ue.len() })
        })
        .collect();

    let mut samples = Vec::with_capacity(cfg.realizations);
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok(s) => samples.push(s),
            Err(CliError::Sim(SimError::NoMeasurableUes)) => {
                log::warn!("realization {i} has no UEs in the inner region; skipping it");
            }
            Err(e) => return Err(e),
        }
    }

    let population: usize = samples.iter().map(|s| s.population).sum();
    let measured: usize = samples.iter().map(|s| s.sorted.len()).sum();
    if population == 0 || measured == 0 {
        return Err(CliError::Data(
            "no measurable UEs in any realization; enlarge the window or inner region".into(),
        ));
    }
    if measured < 30 {
        log::warn!(
            "only {measured} measured UEs pooled across {} realizations; \
             confidence intervals will be wide",
            samples.len()
        );
    }
    let unresolved = population - measured;
    if unresolved > 0 {
        log::info!(
            "{unresolved} of {population} UEs left undelivered backlog; \
             they count as delay > any T"
        );
    }
    Ok(samples)
}

fn ecdf_at(samples: &[&RealizationSample], t: f64) -> f64 {
    let mut hits = 0usize;
    let mut pop = 0usize;
    for s in samples {
        hits += s.sorted.partition_point(|&d| d <= t);
        pop += s.population;
    }
    if pop == 0 {
        f64::NAN
    } else {
        hits as f64 / pop as f64
    }
}

const BOOTSTRAP_RESAMPLES: usize = 200;

/// Simulate `cfg.realizations` networks under one policy and report the
/// pooled empirical delay CDF with bootstrap confidence intervals.
pub fn cmd_simulate(cfg: &ScenarioConfig, policy: PolicyKind) -> Result<Vec<ResultRow>, CliError> {
    cfg.validate()?;
    let samples = collect_network_samples(cfg, policy)?;

    let t_values = cfg.t_grid.values();
    let all: Vec<&RealizationSample> = samples.iter().collect();

    // Cluster bootstrap over whole realizations: geometry, not packet noise,
    // dominates the spread, so resampling UEs would understate it.
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, 3, 0));
    let n = samples.len();
    let mut boot: Vec<Vec<f64>> = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); t_values.len()];
    use rand::Rng;
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let pick: Vec<&RealizationSample> =
            (0..n).map(|_| &samples[rng.gen_range(0..n)]).collect();
        for (j, &t) in t_values.iter().enumerate() {
            boot[j].push(ecdf_at(&pick, t));
        }
    }

    let mut rows = Vec::with_capacity(t_values.len());
    for (j, &t) in t_values.iter().enumerate() {
        let point = ecdf_at(&all, t);
        let mut b = boot[j].clone();
        b.sort_by(|a, x| a.total_cmp(x));
        let lo = b[(0.025 * (b.len() - 1) as f64).round() as usize];
        let hi = b[(0.975 * (b.len() - 1) as f64).round() as usize];
        rows.push(ResultRow {
            policy,
            abscissa: t,
            analytic: None,
            simulated: Some(point),
            ci_half: Some(0.5 * (hi - lo)),
            realizations: Some(n),
        });
    }
    Ok(rows)
}

/// Analytic delay outage at `cfg.t0` for each (K_s, ξ) pair. Returns one row
/// group per ξ so each CSV keeps a single-valued abscissa (K_s).
pub fn cmd_outage_sweep(
    cfg: &ScenarioConfig,
    k_s_list: &[usize],
    xi_list: &[f64],
) -> Result<Vec<(f64, Vec<ResultRow>)>, CliError> {
    cfg.validate()?;
    if k_s_list.is_empty() || xi_list.is_empty() {
        return Err(CliError::Data("outage sweep needs nonempty k_s and xi lists".into()));
    }
    let channel = cfg.channel_params()?;

    let mut groups = Vec::with_capacity(xi_list.len());
    for &xi in xi_list {
        // parallel over K_s, assembled in list order
        let solved: Vec<Result<(f64, f64), AnalyticError>> = k_s_list
            .par_iter()
            .map(|&k_s| {
                let f = solve_meta_distribution(&cfg.solver, &channel, xi, k_s)?;
                Ok((
                    delay_outage(&f, cfg.t0, xi, k_s, PolicyKind::Rs),
                    delay_outage(&f, cfg.t0, xi, k_s, PolicyKind::Rr),
                ))
            })
            .collect();

        let mut per_policy: [Vec<ResultRow>; 2] = [Vec::new(), Vec::new()];
        for (&k_s, point) in k_s_list.iter().zip(solved) {
            let (rs, rr) = match point {
                Ok(p) => p,
                Err(e) => {
                    log::warn!("solver failed at xi={xi}, k_s={k_s}: {e}; recording NaN");
                    (f64::NAN, f64::NAN)
                }
            };
            for (slot, (policy, v)) in
                [(PolicyKind::Rs, rs), (PolicyKind::Rr, rr)].into_iter().enumerate()
            {
                per_policy[slot].push(ResultRow {
                    policy,
                    abscissa: k_s as f64,
                    analytic: Some(v),
                    simulated: None,
                    ci_half: None,
                    realizations: None,
                });
            }
        }
        for rows in per_policy.iter_mut() {
            rows.sort_by(|a, b| a.abscissa.total_cmp(&b.abscissa));
        }
        let [rs_rows, rr_rows] = per_policy;
        let mut rows = rs_rows;
        rows.extend(rr_rows);
        groups.push((xi, rows));
    }
    Ok(groups)
}

/// File name for one ξ group: `sweep.csv` stays `sweep.csv` for a single ξ,
/// otherwise becomes `sweep_xi0.02.csv` etc.
pub fn sweep_out_path(base: &str, xi: f64, n_groups: usize) -> String {
    if n_groups == 1 {
        return base.to_string();
    }
    match base.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}_xi{xi}.{ext}"),
        None => format!("{base}_xi{xi}"),
    }
}
