use capdelay::capacity::{
    max_capacity_fixed_system, max_capacity_fixed_system_direct, min_delay_over_rate, optimal_rate_fixed_band,
    scaling_approximation, BandwidthMode, HomogeneousSetup,
};
use capdelay::equilibrium::{delay_stats, single_band_explicit, solve_equilibrium, Scenario};
use capdelay::geometry::sinr_ccdf_lim;
use capdelay::numerics::{ecdf, ks_distance, linspace};
use capdelay::queueing::{delay_cdf, DelayCdf, InversionMethod, TwoClassQueue};
use capdelay::simulate::{
    run_priority_queue, sample_voronoi_cells, simulate_queue, spatial_coverage, user_count_study,
    QueueSimConfig, SpatialSimConfig,
};
use capdelay::Error;
use rayon::prelude::*;

use crate::config::{RunConfig, SweepParameter};
use crate::error::CliError;
use crate::output::{fmt_num, Cell, Table};

/// KS tolerance shared by every distributional check.
pub const KS_TOL: f64 = 0.02;
pub const PMF_TV_TOL: f64 = 0.05;
pub const MEAN_DELAY_REL_TOL: f64 = 0.03;
/// The last CDF row should reach this value.
pub const CDF_TAIL: f64 = 0.999;

pub struct Context {
    pub command: &'static str,
    pub cfg: RunConfig,
    pub validate: bool,
}

/// A table to write plus the error that decides the exit status, if any.
pub struct Outcome {
    pub table: Table,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Self { table, failure: None }
    }
}

fn echo(ctx: &Context, table: &mut Table) {
    table.comment(format!("capdelay {} {}", ctx.command, env!("CARGO_PKG_VERSION")));
    table.comment(format!("seed = {}", ctx.cfg.seed));
    table.comment(format!("--validate = {}", ctx.validate));
    table.comment("resolved configuration:");
    table.comment(ctx.cfg.to_toml());
    table.comment("");
    table.comment("results:");
}

fn is_infeasible(e: &Error) -> bool {
    matches!(e, Error::Infeasible { .. } | Error::Unstable { .. })
}

struct TradeoffRow {
    capacity: f64,
    rate: f64,
    eps: f64,
    delay: f64,
    feasible: bool,
}

fn tradeoff_point(scenario: &Scenario, optimize: bool) -> Result<TradeoffRow, CliError> {
    let capacity = scenario.traffic.capacity();
    let infeasible = |rate| TradeoffRow {
        capacity,
        rate,
        eps: f64::NAN,
        delay: f64::INFINITY,
        feasible: false,
    };
    let rate = if optimize {
        match min_delay_over_rate(scenario) {
            Ok(o) => o.rate,
            Err(e) if is_infeasible(&e) => return Ok(infeasible(f64::NAN)),
            Err(e) => return Err(e.into()),
        }
    } else {
        scenario.target_rate
    };
    match delay_stats(&scenario.with_target_rate(rate)?, None, Default::default()) {
        Ok(s) => Ok(TradeoffRow {
            capacity,
            rate,
            eps: s.equilibrium.service_prob,
            delay: s.mean_delay,
            feasible: true,
        }),
        Err(e) if is_infeasible(&e) => Ok(infeasible(rate)),
        Err(e) => Err(e.into()),
    }
}

pub fn tradeoff(ctx: &Context) -> Result<Outcome, CliError> {
    let sweep = ctx.cfg.sweep.clone().unwrap_or_default();
    sweep.validate()?;
    let optimize = ctx.cfg.tradeoff.optimize_rate && sweep.parameter != SweepParameter::TargetRate;
    let configs: Vec<RunConfig> = sweep
        .values()
        .into_iter()
        .map(|v| ctx.cfg.with_parameter(sweep.parameter, v))
        .collect();
    let scenarios = configs.iter().map(RunConfig::scenario).collect::<Result<Vec<_>, _>>()?;
    let rows = scenarios
        .par_iter()
        .map(|s| tradeoff_point(s, optimize))
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(&["sweep_value", "capacity", "target_rate", "service_prob", "mean_delay", "feasible"]);
    echo(ctx, &mut table);
    table.comment(format!(
        "sweep over {:?}; target rate {}",
        sweep.parameter,
        if optimize { "minimizes the mean delay" } else { "fixed" }
    ));
    if sweep.parameter == SweepParameter::Capacity {
        let delays: Vec<f64> = rows.iter().filter(|r| r.feasible).map(|r| r.delay).collect();
        let monotone = delays.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
        table.comment(format!("check: mean delay nondecreasing in capacity = {monotone}"));
    }
    for (v, r) in sweep.values().into_iter().zip(&rows) {
        table.push(vec![
            v.into(),
            r.capacity.into(),
            r.rate.into(),
            r.eps.into(),
            r.delay.into(),
            r.feasible.into(),
        ]);
    }
    let failure = (!rows.iter().any(|r| r.feasible))
        .then(|| CliError::Infeasible("no feasible point in the sweep".into()));
    Ok(Outcome { table, failure })
}

struct LimitsRow {
    ratio: f64,
    bands: usize,
    mode_one: (f64, f64),
    mode_two: (f64, f64),
    identity_gap: f64,
    fallback: bool,
}

fn limits_point(cfg: &RunConfig, ratio: f64, bands: usize) -> Result<LimitsRow, CliError> {
    let lim = &cfg.limits;
    let mut setup = HomogeneousSetup::new(
        bands,
        ratio * 1e-6,
        1e-6,
        lim.vacancy,
        lim.bandwidth,
        BandwidthMode::FixedPerBand,
    )?;
    setup.thinning = cfg.thinning;
    let one = optimal_rate_fixed_band(&setup)?;
    let two_setup = setup.with_mode(BandwidthMode::FixedSystem);
    let two = max_capacity_fixed_system(&two_setup)?;
    let direct = max_capacity_fixed_system_direct(&two_setup)?;
    Ok(LimitsRow {
        ratio,
        bands,
        mode_one: (one.rate, one.capacity),
        mode_two: (two.rate, two.capacity),
        identity_gap: (bands as f64 * direct.capacity - one.capacity).abs() / one.capacity,
        fallback: one.fallback || direct.fallback,
    })
}

pub fn capacity(ctx: &Context) -> Result<Outcome, CliError> {
    let lim = &ctx.cfg.limits;
    let jobs: Vec<(f64, usize)> = lim
        .density_ratios
        .iter()
        .flat_map(|&r| (1..=lim.max_bands).map(move |n| (r, n)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(r, n)| limits_point(&ctx.cfg, r, n))
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(&[
        "density_ratio",
        "bands",
        "rate_fixed_band",
        "capacity_fixed_band",
        "rate_fixed_system",
        "capacity_fixed_system",
        "identity_gap",
        "scaling_line",
        "optimal_bands",
        "fallback",
    ]);
    echo(ctx, &mut table);
    table.comment("identity_gap = |N * C_II^max (direct) - C_I^max| / C_I^max");
    table.comment("scaling_line = 0.6359 - 0.052 log2(density_ratio)");
    for chunk in rows.chunks(lim.max_bands) {
        let best = chunk
            .iter()
            .max_by(|a, b| a.mode_two.1.total_cmp(&b.mode_two.1))
            .map(|r| r.bands);
        let line = scaling_approximation(chunk[0].ratio)?;
        for r in chunk {
            table.push(vec![
                r.ratio.into(),
                r.bands.into(),
                r.mode_one.0.into(),
                r.mode_one.1.into(),
                r.mode_two.0.into(),
                r.mode_two.1.into(),
                r.identity_gap.into(),
                line.into(),
                (Some(r.bands) == best).into(),
                r.fallback.into(),
            ]);
        }
    }
    Ok(Outcome::ok(table))
}

fn time_grid(t_max: f64, points: usize) -> Vec<f64> {
    linspace(0.0, t_max, points + 1)[1..].to_vec()
}

/// Dense inverted CDF for KS checks, independent of the output grid.
fn reference_cdf(queue: &TwoClassQueue, method: InversionMethod) -> Result<DelayCdf, CliError> {
    let grid = time_grid(40.0 * queue.mean_delay(), 4000);
    Ok(delay_cdf(&queue.transform(), &grid, method)?)
}

pub fn delay_cdf_cmd(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let scenario = cfg.scenario()?;
    let eps = match cfg.delay_cdf.service_prob {
        Some(e) => e,
        None => solve_equilibrium(&scenario)?.service_prob,
    };
    let queue = TwoClassQueue::new(&scenario.traffic, &scenario.outage, eps, scenario.target_rate)?;
    let mean = queue.mean_delay();
    let t_max = cfg.delay_cdf.t_max.unwrap_or(20.0 * mean);
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(CliError::Config(format!("t_max must be positive, got {t_max}")));
    }
    let grid = time_grid(t_max, cfg.delay_cdf.points);
    let cdf = delay_cdf(&queue.transform(), &grid, cfg.delay_cdf.inversion)?;

    let mut columns = vec!["t", "cdf"];
    let mut des = None;
    if ctx.validate {
        columns.push("des_cdf");
        let sim = QueueSimConfig::from_model(
            &scenario.traffic,
            &scenario.outage,
            eps,
            scenario.target_rate,
            cfg.delay_cdf.sessions,
            cfg.seed,
        )?;
        let mut delays = simulate_queue(&sim)?.delays;
        delays.sort_by(f64::total_cmp);
        des = Some(delays);
    }
    let mut table = Table::new(&columns);
    echo(ctx, &mut table);
    table.comment(format!("service_prob = {}", fmt_num(eps)));
    table.comment(format!("rho_s = {}, rho_o = {}", fmt_num(queue.rho_s()), fmt_num(queue.rho_o())));
    table.comment(format!("mean_delay = {}", fmt_num(mean)));
    table.comment(format!("inversion = {:?}", cfg.delay_cdf.inversion));
    let last = *cdf.cdf.last().expect("nonempty grid");
    if last < CDF_TAIL {
        table.comment(format!("warning: CDF reaches only {} at t_max; raise t_max", fmt_num(last)));
    }
    let mut failure = None;
    if let Some(d) = &des {
        let reference = reference_cdf(&queue, cfg.delay_cdf.inversion)?;
        let ks = ks_distance(d, |t| reference.at(t));
        let des_mean = d.iter().sum::<f64>() / d.len() as f64;
        table.comment(format!("des_sessions = {}, des_mean_delay = {}", d.len(), fmt_num(des_mean)));
        table.comment(format!("ks = {}, tolerance = {}", fmt_num(ks), fmt_num(KS_TOL)));
        if ks > KS_TOL {
            failure = Some(CliError::Validation(format!("delay CDF KS {ks} exceeds {KS_TOL}")));
        }
    }
    for (i, &t) in grid.iter().enumerate() {
        let mut row = vec![Cell::from(t), cdf.cdf[i].into()];
        if let Some(d) = &des {
            row.push(ecdf(d, t).into());
        }
        table.push(row);
    }
    Ok(Outcome { table, failure })
}

pub fn equilibrium(ctx: &Context) -> Result<Outcome, CliError> {
    let scenario = ctx.cfg.scenario()?;
    let sol = solve_equilibrium(&scenario)?;
    let mut table = Table::new(&[
        "band",
        "bandwidth",
        "vacancy",
        "bs_density",
        "coverage_prob",
        "access_prob",
        "band_service_prob",
        "normalized_load",
        "active_density",
    ]);
    echo(ctx, &mut table);
    table.comment(format!("service_prob = {}", fmt_num(sol.service_prob)));
    table.comment(format!(
        "rho_o = {}, rho_s = {}, p_active = {}",
        fmt_num(sol.rho_o),
        fmt_num(sol.rho_s),
        fmt_num(sol.p_active)
    ));
    table.comment(format!(
        "residual = {}, iterations = {}, sign_changes = {}, bisection = {}",
        fmt_num(sol.residual),
        sol.iterations,
        sol.sign_changes,
        sol.used_bisection
    ));
    if scenario.bands.len() == 1 {
        let cmp = single_band_explicit(&scenario)?;
        let explicit = cmp.explicit.map_or_else(|| "inapplicable".to_string(), fmt_num);
        table.comment(format!("explicit single-band expression (comparison only) = {explicit}"));
    }
    for (i, (b, s)) in scenario.bands.iter().zip(&sol.bands).enumerate() {
        table.push(vec![
            i.into(),
            b.bandwidth.into(),
            b.vacancy.into(),
            b.bs_density.into(),
            s.coverage_prob.into(),
            s.access_prob.into(),
            s.service_prob.into(),
            s.normalized_load.into(),
            s.active_density.into(),
        ]);
    }
    Ok(Outcome::ok(table))
}

struct Check {
    name: String,
    statistic: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, statistic: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

fn coverage_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let b = &cfg.bands[0];
    let sim = SpatialSimConfig::new(b.bs_density, cfg.user_density, cfg.validate.coverage_users, cfg.seed)?;
    let xs = [1.0, 3.0];
    let report = spatial_coverage(&sim, &xs)?;
    xs.iter()
        .map(|&x| {
            let e = report.estimate(&format!("coverage@{x}")).expect("estimate present");
            let gap = (e.value - sinr_ccdf_lim(x)?).abs();
            Ok(Check::at_most(format!("coverage x={x}"), "abs error vs 99% CI", gap, e.ci_half_width))
        })
        .collect()
}

fn pmf_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let b = &cfg.bands[0];
    let thinning = cfg.validate.thinning.unwrap_or(cfg.thinning);
    let sim = SpatialSimConfig::new(b.bs_density, cfg.user_density, cfg.validate.pmf_cells, cfg.seed)?;
    let study = user_count_study(&sim, 1.0)?;
    let tv = study.total_variation(&study.user_pmf, thinning);
    Ok(vec![Check::at_most(
        format!("count pmf thinning={}", fmt_num(thinning)),
        "total variation",
        tv,
        PMF_TV_TOL,
    )])
}

fn voronoi_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let b = &cfg.bands[0];
    let sim = SpatialSimConfig::new(b.bs_density, 0.0, cfg.validate.voronoi_cells, cfg.seed)?;
    let r = sample_voronoi_cells(&sim)?;
    Ok(vec![
        Check::at_most("typical cell area", "KS", r.estimate("ks_typical").expect("ks").value, KS_TOL),
        Check::at_most("user-weighted cell area", "KS", r.estimate("ks_user").expect("ks").value, KS_TOL),
    ])
}

fn queue_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let scenario = cfg.scenario()?;
    let eps = solve_equilibrium(&scenario)?.service_prob;
    let queue = TwoClassQueue::new(&scenario.traffic, &scenario.outage, eps, scenario.target_rate)?;
    let mean = queue.mean_delay();
    let cdf = reference_cdf(&queue, Default::default())?;
    let sim = QueueSimConfig::from_model(
        &scenario.traffic,
        &scenario.outage,
        eps,
        scenario.target_rate,
        cfg.validate.sessions,
        cfg.seed,
    )?;
    let report = run_priority_queue(&sim, &[])?;
    let des_mean = report.estimate("mean_delay").expect("mean").value;
    let mut delays = simulate_queue(&sim)?.delays;
    delays.sort_by(f64::total_cmp);
    Ok(vec![
        Check::at_most("mean delay", "relative error", (des_mean - mean).abs() / mean, MEAN_DELAY_REL_TOL),
        Check::at_most("delay cdf", "KS", ks_distance(&delays, |t| cdf.at(t)), KS_TOL),
    ])
}

type Suite = fn(&RunConfig) -> Result<Vec<Check>, CliError>;

pub fn validate(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let suites: [Suite; 4] =
        [coverage_checks, pmf_checks, voronoi_checks, queue_checks];
    let checks: Vec<Check> = suites
        .par_iter()
        .map(|f| f(cfg))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut table = Table::new(&["check", "statistic", "value", "tolerance", "pass"]);
    echo(ctx, &mut table);
    table.comment("count pmf uses SINR threshold 1 on band 0");
    for c in &checks {
        table.push(vec![c.name.as_str().into(), c.statistic.into(), c.value.into(), c.tolerance.into(), c.pass.into()]);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let failure = (!failed.is_empty()).then(|| CliError::Validation(failed.join(", ")));
    Ok(Outcome { table, failure })
}
