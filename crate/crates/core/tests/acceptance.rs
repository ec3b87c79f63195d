//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

mod common;

use capdelay::capacity::{
    best_band_count, capacity_at_delay, capacity_limit, capacity_limit_derivative, max_capacity_fixed_system,
    max_capacity_fixed_system_direct, optimal_rate_fixed_band, scaling_approximation, BandwidthMode,
    HomogeneousSetup, MAX_BAND_COUNT,
};
use capdelay::equilibrium::{equilibrium_mean_delay, fixed_point_residual, solve_equilibrium, BandConfig, Scenario};
use capdelay::geometry::{access_probability, rate_to_sinr, sinr_ccdf_lim, CellLoad, DEFAULT_THINNING};
use capdelay::numerics::logspace;
use capdelay::queueing::{
    invert_cdf, mean_delay, InversionMethod, OutageModel, SizeDistribution, TrafficModel, TransformHandle,
};
use capdelay::simulate::{
    band_service_mc, run_priority_queue, spatial_coverage, user_count_study, SpatialSimConfig,
};
use capdelay::Error;
use common::{ks_against, mean, tail_grid, verdict, QueueCase};
use num_complex::Complex64;

const RATIOS: [f64; 5] = [2.0, 10.0, 50.0, 100.0, 500.0];

fn normalized_scenario(bands: usize, capacity: f64) -> Scenario {
    let traffic = TrafficModel::from_capacity(capacity, SizeDistribution::exponential(10.0).unwrap()).unwrap();
    let outage = OutageModel::exponential(10.0).unwrap();
    HomogeneousSetup::normalized(bands, 50.0, BandwidthMode::FixedPerBand)
        .unwrap()
        .scenario(1.0, traffic, outage)
        .unwrap()
}

/// Finite values must fall then rise once, with the minimum strictly inside.
fn is_u_shaped(values: &[f64]) -> bool {
    let finite: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    let Some((&first, &last)) = finite.first().zip(finite.last()) else {
        return false;
    };
    if finite.len() != last - first + 1 {
        return false;
    }
    let v = &values[first..=last];
    let best = (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    best > 0
        && best + 1 < v.len()
        && v[..=best].windows(2).all(|w| w[1] < w[0])
        && v[best..].windows(2).all(|w| w[1] > w[0])
}

fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

#[test]
fn criterion_1_scaling_law() {
    let mut pass = true;
    let mut detail = Vec::new();
    for ratio in RATIOS {
        let setup = HomogeneousSetup::normalized(1, ratio, BandwidthMode::FixedSystem).unwrap();
        let (best, _) = best_band_count(&setup, MAX_BAND_COUNT).unwrap();
        assert!(best.bands < MAX_BAND_COUNT, "optimum on the search edge");
        let approx = scaling_approximation(ratio).unwrap();
        let dev = best.capacity - approx;
        pass &= dev.abs() <= 0.01;
        detail.push(format!("ratio {ratio}: N*={} C={:.4} line={:.4} dev={:+.4}", best.bands, best.capacity, approx, dev));
    }
    verdict(1, "scaling law within 0.01", pass, &detail.join("; "));
    assert!(pass, "{}", detail.join("\n"));
}

#[test]
fn criterion_2_mode_identity() {
    let mut worst: f64 = 0.0;
    for ratio in [10.0, 50.0] {
        for n in 1..=20 {
            let one = HomogeneousSetup::normalized(n, ratio, BandwidthMode::FixedPerBand).unwrap();
            let two = one.with_mode(BandwidthMode::FixedSystem);
            let c1 = optimal_rate_fixed_band(&one).unwrap().capacity;
            let c2 = max_capacity_fixed_system_direct(&two).unwrap().capacity;
            let via = max_capacity_fixed_system(&two).unwrap().capacity;
            worst = worst.max((n as f64 * c2 - c1).abs() / c1).max((via - c2).abs() / c2);
        }
    }
    let pass = worst <= 1e-8;
    verdict(2, "N * C_II^max = C_I^max", pass, &format!("worst relative gap {worst:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_3_user_count_pmf() {
    let mut detail = Vec::new();
    let mut pass = true;
    for (i, ratio) in [5.0, 50.0].into_iter().enumerate() {
        let cfg = SpatialSimConfig::new(1e-6, ratio * 1e-6, 100_000, 300 + i as u64).unwrap();
        let study = user_count_study(&cfg, 1.0).unwrap();
        let tv = study.total_variation(&study.user_pmf, DEFAULT_THINNING);
        let tv_cell = study.total_variation(&study.cell_pmf, DEFAULT_THINNING);
        let fit = study.refit_thinning(&study.user_pmf);
        pass &= tv <= 0.05 && (0.55..=0.80).contains(&fit);
        detail.push(format!(
            "ratio {ratio}: TV={tv:.4} (per-cell view {tv_cell:.4}), refit={fit:.3} (per-cell view {:.3})",
            study.refit_thinning(&study.cell_pmf)
        ));
    }

    // E[1/(K+1)] at contention c = Λ p λ = 1.2
    let p = sinr_ccdf_lim(1.0).unwrap();
    let ratio = 1.2 / (DEFAULT_THINNING * p);
    let cfg = SpatialSimConfig::new(1e-6, ratio * 1e-6, 100_000, 310).unwrap();
    let study = user_count_study(&cfg, 1.0).unwrap();
    let model = access_probability(&CellLoad::from_contention(1.2).unwrap());
    pass &= study.access_mc.contains(model);
    detail.push(format!(
        "access at c=1.2: MC {:.4}±{:.4} vs {model:.4}",
        study.access_mc.value, study.access_mc.ci_half_width
    ));

    // per-band service probability of a heterogeneous 3-band scenario
    let bands = vec![
        BandConfig::new(1.0, 0.8, 1e-6).unwrap(),
        BandConfig::new(2.0, 0.5, 2e-6).unwrap(),
        BandConfig::new(0.5, 1.0, 5e-7).unwrap(),
    ];
    let traffic = TrafficModel::from_capacity(0.2, SizeDistribution::exponential(10.0).unwrap()).unwrap();
    let scenario = Scenario::new(2e-5, bands.clone(), 1.0, traffic, OutageModel::exponential(10.0).unwrap()).unwrap();
    let sol = solve_equilibrium(&scenario).unwrap();
    for (n, (band, state)) in bands.iter().zip(&sol.bands).enumerate() {
        let cfg = SpatialSimConfig::new(band.bs_density, state.active_density, 100_000, 320 + n as u64).unwrap();
        let x = rate_to_sinr(scenario.target_rate / band.bandwidth);
        let r = band_service_mc(&cfg, x, band.vacancy).unwrap();
        let mc = r.estimate("service_prob").unwrap();
        pass &= mc.contains(state.service_prob);
        detail.push(format!(
            "band {n}: eps_n MC {:.4}±{:.4} vs {:.4}",
            mc.value, mc.ci_half_width, state.service_prob
        ));
    }
    verdict(3, "count PMF at thinning 2/3", pass, &detail.join("; "));
    assert!(pass, "{}", detail.join("\n"));
}

#[test]
fn criterion_4_transmission_time_exponential() {
    let mut detail = Vec::new();
    let mut pass = true;
    for (i, rho_s) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        let case = QueueCase::new(rho_s, 0.3, 0.1, 1.0, 1.0, 1.0);
        let trace = case.simulate(1_000_000, 400 + i as u64);
        let t_mean = rho_s / 0.7;
        let ks = ks_against(&trace.transmissions, |t| 1.0 - (-t / t_mean).exp());
        // exact law of T from its transform, as a check on the simulator itself
        let tr = case.queue().transform();
        let handle = |s: Complex64| tr.transmission(s);
        let exact = invert_cdf(&handle, &tail_grid(t_mean), InversionMethod::default()).unwrap();
        let ks_exact = ks_against(&trace.transmissions, |t| exact.at(t));
        pass &= ks <= 0.02;
        detail.push(format!("rho_s {rho_s}: KS vs exponential {ks:.4}, KS vs exact {ks_exact:.4}"));
    }
    verdict(4, "transmission time vs exponential", pass, &detail.join("; "));
    assert!(pass, "{}", detail.join("\n"));
}

#[test]
fn criterion_5_delay_formulas() {
    // (ρ_s, ρ_o, ᾱ_o, ᾱ_s, k_L, k_o)
    let cases = [
        (0.2, 0.1, 10.0, 12.5, 1.0, 1.0),
        (0.2, 0.3, 0.1, 1.0, 1.0, 1.0),
        (0.25, 0.4, 10.0, 10.0, 1.0, 1.0),
        (0.55, 0.2, 1.0, 1.0, 2.0, 3.0),
        (0.6, 0.3, 1.0, 1.0, 1.0, 1.0),
    ];
    let mut detail = Vec::new();
    let mut pass = true;
    for (i, &(rs, ro, ao, a_s, kl, ko)) in cases.iter().enumerate() {
        let case = QueueCase::new(rs, ro, ao, a_s, kl, ko);
        let analytic = case.queue().mean_delay();
        let cdf = case.delay_cdf();
        let r = run_priority_queue(&case.sim_config(1_000_000, 500 + i as u64), &[]).unwrap();
        let des = r.estimate("mean_delay").unwrap().value;
        let trace = case.simulate(1_000_000, 500 + i as u64);
        let ks = ks_against(&trace.delays, |t| cdf.at(t));
        let rel = (des - analytic).abs() / analytic;
        pass &= rel <= 0.03 && ks <= 0.02;
        detail.push(format!("load {:.2}: mean rel err {rel:.4}, KS {ks:.4}", rs + ro));
    }
    verdict(5, "mean delay and delay CDF vs simulation", pass, &detail.join("; "));
    assert!(pass, "{}", detail.join("\n"));
}

#[test]
fn criterion_6_coverage() {
    let xs = [0.5, 1.0, 3.0];
    let cfg = SpatialSimConfig::new(1e-6, 5e-6, 100_000, 600).unwrap();
    let r = spatial_coverage(&cfg, &xs).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for x in xs {
        let e = r.estimate(&format!("coverage@{x}")).unwrap();
        let exact = sinr_ccdf_lim(x).unwrap();
        pass &= e.contains(exact);
        detail.push(format!("x {x}: {:.4}±{:.4} vs {exact:.4}", e.value, e.ci_half_width));
    }
    verdict(6, "coverage within 99% CI", pass, &detail.join("; "));
    assert!(pass, "{}", detail.join("\n"));
}

#[test]
fn criterion_7_shape_properties() {
    let mut detail = Vec::new();

    // capacity limit against R: one interior maximum, located by the derivative root
    let setup = HomogeneousSetup::normalized(5, 50.0, BandwidthMode::FixedPerBand).unwrap();
    let grid = logspace(1e-3, 20.0, 2000);
    let neg: Vec<f64> = grid.iter().map(|&r| -capacity_limit(&setup, r).unwrap()).collect();
    let opt = optimal_rate_fixed_band(&setup).unwrap();
    let grid_max = -neg.iter().copied().fold(f64::INFINITY, f64::min);
    let capacity_peak = is_u_shaped(&neg) && opt.capacity >= grid_max * (1.0 - 1e-9);
    detail.push(format!("capacity peak unimodal={capacity_peak} R*={:.4}", opt.rate));

    // mean delay against R at C = 1
    let rates = logspace(0.05, 20.0, 120);
    let mut delay_u_shape = true;
    let mut shown = 0;
    for n in [2, 3, 5, 8, 10] {
        let s = normalized_scenario(n, 1.0);
        let d: Vec<f64> = rates
            .iter()
            .map(|&r| match equilibrium_mean_delay(&s.with_target_rate(r).unwrap()) {
                Ok(v) => v,
                Err(Error::Infeasible { .. } | Error::Unstable { .. }) => f64::INFINITY,
                Err(e) => panic!("{e}"),
            })
            .collect();
        if d.iter().any(|v| v.is_finite()) {
            shown += 1;
            delay_u_shape &= is_u_shaped(&d);
        }
    }
    delay_u_shape &= shown >= 3;
    detail.push(format!("delay U-shaped for {shown} band counts={delay_u_shape}"));

    // capacity at a fixed medium delay against N
    let ns: Vec<f64> = (1..=10).map(|n| n as f64).collect();
    let caps: Vec<f64> = (1..=10)
        .map(|n| capacity_at_delay(&normalized_scenario(n, 0.1), 100.0).unwrap().unwrap())
        .collect();
    let r2 = r_squared(&ns, &caps);
    let linear_at_delay = r2 >= 0.98;
    detail.push(format!("linear at fixed delay R^2={r2:.4}"));

    // C_I^max against N: increasing, increments shrinking past their peak (from N = 1 at low ratios)
    let mut diminishing_returns = true;
    for ratio in RATIOS {
        let c: Vec<f64> = (1..=20)
            .map(|n| {
                let s = HomogeneousSetup::normalized(n, ratio, BandwidthMode::FixedPerBand).unwrap();
                optimal_rate_fixed_band(&s).unwrap().capacity
            })
            .collect();
        let inc: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
        let peak = (0..inc.len()).max_by(|&a, &b| inc[a].total_cmp(&inc[b])).unwrap();
        diminishing_returns &= inc.iter().all(|&d| d > 0.0);
        diminishing_returns &= inc[peak..].windows(2).all(|w| w[1] < w[0]);
        if ratio <= 10.0 {
            diminishing_returns &= peak == 0;
        }
    }
    detail.push(format!("increasing with diminishing returns={diminishing_returns}"));

    // C_II^max against N: interior optimum
    let mut interior_bands = true;
    for ratio in [10.0, 50.0, 100.0, 500.0] {
        let setup = HomogeneousSetup::normalized(1, ratio, BandwidthMode::FixedSystem).unwrap();
        let (best, table) = best_band_count(&setup, MAX_BAND_COUNT).unwrap();
        interior_bands &= best.bands > 1 && best.bands < MAX_BAND_COUNT;
        interior_bands &= table.last().unwrap().capacity < best.capacity;
        detail.push(format!("interior optimal N, ratio {ratio}: N*={}", best.bands));
    }

    let pass = capacity_peak && delay_u_shape && linear_at_delay && diminishing_returns && interior_bands;
    verdict(7, "qualitative shapes", pass, &detail.join("; "));
    assert!(pass, "{}", detail.join("\n"));
}

#[test]
fn criterion_8_properties() {
    let mut detail = Vec::new();

    let queues = [
        QueueCase::new(0.2, 0.1, 10.0, 12.5, 1.0, 1.0),
        QueueCase::new(0.3, 0.3, 0.1, 1.0, 1.0, 1.0),
        QueueCase::new(0.4, 0.2, 1.0, 2.0, 2.0, 3.0),
        QueueCase::new(0.1, 0.6, 5.0, 1.0, 0.5, 2.0),
    ];
    let mut norm: f64 = 0.0;
    let mut slope: f64 = 0.0;
    for q in &queues {
        let queue = q.queue();
        let tr = queue.transform();
        let d = queue.mean_delay();
        norm = norm.max((tr.eval(Complex64::new(0.0, 0.0)).unwrap().re - 1.0).abs());
        let s = 1e-7;
        norm = norm.max((tr.eval(Complex64::new(s, 0.0)).unwrap().re - (1.0 - s * d)).abs());
        let h = 1e-5;
        let fd = -(tr.eval(Complex64::new(h, 0.0)).unwrap().re - tr.eval(Complex64::new(-h, 0.0)).unwrap().re) / (2.0 * h);
        slope = slope.max((fd - d).abs() / d);
    }
    detail.push(format!("normalization {norm:.1e}, mean from transform {slope:.1e}"));

    let mut deriv: f64 = 0.0;
    for mode in [BandwidthMode::FixedPerBand, BandwidthMode::FixedSystem] {
        let setup = HomogeneousSetup::normalized(4, 30.0, mode).unwrap();
        for (k, &r) in logspace(0.02, 8.0, 20).iter().enumerate() {
            let r = r * (1.0 + 0.01 * k as f64);
            let h = 1e-5 * r;
            let fd = (capacity_limit(&setup, r + h).unwrap() - capacity_limit(&setup, r - h).unwrap()) / (2.0 * h);
            let an = capacity_limit_derivative(&setup, r).unwrap();
            let scale = an.abs().max(capacity_limit(&setup, r).unwrap() / r);
            deriv = deriv.max((fd - an).abs() / scale);
        }
    }
    detail.push(format!("derivative vs FD {deriv:.1e}"));

    let mut residual: f64 = 0.0;
    for (n, c) in [(1, 0.05), (3, 0.5), (5, 1.0), (10, 2.0)] {
        let s = normalized_scenario(n, c).with_target_rate(4.0).unwrap();
        let sol = solve_equilibrium(&s).unwrap();
        residual = residual.max(fixed_point_residual(&s, sol.service_prob).unwrap().abs());
    }
    detail.push(format!("fixed-point residual {residual:.1e}"));

    let exp_t = TrafficModel::from_capacity(1.0, SizeDistribution::exponential(10.0).unwrap()).unwrap();
    let gam_t = TrafficModel::from_capacity(1.0, SizeDistribution::gamma(10.0, 1.0).unwrap()).unwrap();
    let exp_o = OutageModel::exponential(10.0).unwrap();
    let gam_o = OutageModel::new(10.0, 1.0).unwrap();
    let a = mean_delay(&exp_t, &exp_o, 0.6, 4.0).unwrap();
    let b = mean_delay(&gam_t, &gam_o, 0.6, 4.0).unwrap();
    let reduction = (a - b).abs() / a;
    detail.push(format!("gamma(1) reduction {reduction:.1e}"));

    let cfg = SpatialSimConfig::new(1e-6, 5e-6, 5_000, 800).unwrap();
    let qc = QueueCase::new(0.3, 0.2, 1.0, 1.0, 2.0, 0.5).sim_config(100_000, 801);
    let same = spatial_coverage(&cfg, &[1.0]).unwrap().to_json() == spatial_coverage(&cfg, &[1.0]).unwrap().to_json()
        && run_priority_queue(&qc, &[1.0]).unwrap().to_json() == run_priority_queue(&qc, &[1.0]).unwrap().to_json();
    detail.push(format!("deterministic reruns {same}"));

    let pass = norm <= 1e-8 && slope <= 1e-4 && deriv <= 1e-5 && residual < 1e-10 && reduction <= 1e-12 && same;
    verdict(8, "property suites", pass, &detail.join("; "));
    assert!(pass, "{}", detail.join("\n"));
}
