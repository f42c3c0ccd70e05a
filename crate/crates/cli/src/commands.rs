use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::Serialize;

use pnqkd::measurements::{check_state_statistics, sender_configurations, SenderState};
use pnqkd::noisy::realistic_key_rate;
use pnqkd::optimize::{optimize_coefficients, optimize_gamma, OptimizationResult};
use pnqkd::protocol::{conditional_state, holevo_eve, key_rate, BoundCurvePoint};
use pnqkd::sweep::run_sweep;
use pnqkd::tomography::{eve_bound_from_tomography, exact_record, nearest_psd, reconstruct_state, sample_statistics};
use pnqkd::{ChannelParams, CoefficientSource, CoefficientVector, KeyRateBreakdown, OptimizerConfig, Outcome, SweepConfig};

use crate::config::{Coeffs, Gamma, RunConfig};
use crate::plot::{self, Series};
use crate::table::{emit, fmt_float, Cell, Table};

/// Check-state cells must match their exact values within this bound.
const CHECK_STATE_TOL: f64 = 1e-12;

fn optimizer_config(cfg: &RunConfig) -> OptimizerConfig {
    OptimizerConfig {
        seed: cfg.seed,
        ..OptimizerConfig::default()
    }
}

fn sweep_source(cfg: &RunConfig) -> CoefficientSource {
    match (cfg.gamma, &cfg.coeffs) {
        (Some(Gamma::Fixed(gamma)), _) => CoefficientSource::Gamma { gamma, n_max: cfg.n_max },
        (Some(Gamma::Optimize), _) => CoefficientSource::OptimizeGamma {
            n_max: cfg.n_max,
            kind: cfg.objective,
        },
        (None, Coeffs::Table { table, .. }) => CoefficientSource::Table(table.clone()),
        (None, Coeffs::Fixed(c)) => CoefficientSource::Fixed(c.clone()),
        (None, Coeffs::Optimize) => CoefficientSource::Optimize {
            n_max: cfg.n_max,
            kind: cfg.objective,
            config: optimizer_config(cfg),
        },
    }
}

fn outcome_label(o: Outcome) -> String {
    match o {
        Outcome::Total(c) => format!("c{c}"),
        Outcome::Clicks(a, b) => format!("d{a}{b}"),
    }
}

fn run_in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(match workers {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f),
        None => f(),
    })
}

fn write_plot(cfg: &RunConfig, title: &str, table: &Table, columns: &[&str]) -> Result<()> {
    let Some(path) = &cfg.plot else { return Ok(()) };
    let xs = table.column("distance_km").expect("distance column");
    let mut series: Vec<Series> = columns
        .iter()
        .filter_map(|c| table.column(c).map(|ys| Series::new(*c, &xs, &ys)))
        .collect();
    for overlay in &cfg.overlay {
        series.push(plot::load_overlay(overlay)?);
    }
    plot::render(path, title, &series)
}

fn finish(cfg: &RunConfig, table: &Table) -> Result<()> {
    emit(&table.render(cfg.json)?, cfg.out.as_deref())
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let source = sweep_source(cfg);
    let optimizing = matches!(source, CoefficientSource::Optimize { .. } | CoefficientSource::OptimizeGamma { .. });
    let rows = run_sweep(
        &SweepConfig {
            grid: cfg.grid.points()?,
            loss_db_per_km: cfg.loss_db_km,
            detector: cfg.detector,
            attribution: cfg.attribution,
            source,
        },
        cfg.workers,
    )?;
    let outcomes: Vec<Outcome> = rows[0].breakdown.rows.iter().map(|r| r.outcome).collect();
    let mut header: Vec<String> = ["distance_km", "tau_total", "key_rate", "rci", "plob", "single_repeater"]
        .map(String::from)
        .to_vec();
    let with_gamma = cfg.gamma.is_some();
    if with_gamma {
        header.push("gamma".into());
    }
    if optimizing {
        header.push("converged".into());
    }
    for o in &outcomes {
        let l = outcome_label(*o);
        header.extend([format!("P_{l}"), format!("I_ab_{l}"), format!("I_e_{l}")]);
    }
    let mut table = Table::new("sweep", cfg.echo(), cfg.seed, header);
    for r in &rows {
        let mut cells: Vec<Cell> = vec![
            r.distance_km.into(),
            r.bounds.tau_total.into(),
            r.key_rate().into(),
            r.rci().into(),
            r.bounds.plob.into(),
            r.bounds.single_repeater.into(),
        ];
        if with_gamma {
            cells.push(r.gamma.unwrap_or(f64::NAN).into());
        }
        if optimizing {
            cells.push(Cell::Int(i64::from(!r.unconverged)));
        }
        for o in &outcomes {
            match r.breakdown.row(*o) {
                Some(k) => cells.extend([k.probability.into(), k.i_ab.into(), k.i_e.into()]),
                None => cells.extend([Cell::Num(0.0), Cell::Num(0.0), Cell::Num(0.0)]),
            }
        }
        table.push(cells);
    }
    write_plot(cfg, "key rate", &table, &["key_rate", "rci", "plob", "single_repeater"])?;
    finish(cfg, &table)
}

/// Ideal relay unless non-ideal detectors are configured.
fn evaluate(cfg: &RunConfig, c: &CoefficientVector, ch: &ChannelParams) -> pnqkd::Result<KeyRateBreakdown> {
    match cfg.detector {
        Some(det) if !det.is_ideal() => realistic_key_rate(c, c, ch, &det, cfg.attribution),
        _ => key_rate(c, c, ch),
    }
}

pub fn optimize(cfg: &RunConfig) -> Result<()> {
    let gamma_mode = match cfg.gamma {
        None => false,
        Some(Gamma::Optimize) => true,
        Some(Gamma::Fixed(_)) => bail!("optimize takes --gamma optimize, not a fixed value"),
    };
    let grid = cfg.grid.points()?;
    let opt_cfg = optimizer_config(cfg);
    let point = |d: f64| -> pnqkd::Result<(f64, OptimizationResult, f64)> {
        let ch = ChannelParams::from_distance_with_loss(d, cfg.loss_db_km)?;
        let r = if gamma_mode {
            optimize_gamma(cfg.n_max, &ch, cfg.objective)?
        } else {
            optimize_coefficients(cfg.n_max, &ch, cfg.detector, cfg.objective, &opt_cfg)?
        };
        let k = evaluate(cfg, &r.coefficients, &ch)?.total_key_rate;
        Ok((d, r, k))
    };
    let results = run_in_pool(cfg.workers, || grid.par_iter().map(|&d| point(d)).collect::<pnqkd::Result<Vec<_>>>())??;

    let mut header = vec!["distance_km".to_string()];
    if gamma_mode {
        header.push("gamma".into());
    } else {
        header.extend((0..=cfg.n_max).map(|n| format!("a{n}")));
    }
    header.extend(["objective", "key_rate", "converged"].map(String::from));
    let echo = cfg.echo().into_iter().filter(|(k, _)| k != "coeffs").collect();
    let mut table = Table::new("optimize", echo, cfg.seed, header);
    for (d, r, k) in results {
        let mut cells = vec![Cell::Num(d)];
        if gamma_mode {
            cells.push(r.gamma.unwrap_or(f64::NAN).into());
        } else {
            cells.extend(r.coefficients.as_slice().iter().map(|x| Cell::Num(*x)));
        }
        cells.extend([r.objective.into(), k.into(), Cell::Int(i64::from(r.converged))]);
        table.push(cells);
    }
    finish(cfg, &table)
}

pub fn bounds(cfg: &RunConfig) -> Result<()> {
    let header = ["distance_km", "tau_total", "plob", "single_repeater"].map(String::from).to_vec();
    let echo = cfg.echo().into_iter().filter(|(k, _)| k == "grid" || k == "loss_db_km").collect();
    let mut table = Table::new("bounds", echo, cfg.seed, header);
    for d in cfg.grid.points()? {
        let b = BoundCurvePoint::at_distance(d, cfg.loss_db_km)?;
        table.push(vec![d.into(), b.tau_total.into(), b.plob.into(), b.single_repeater.into()]);
    }
    write_plot(cfg, "repeaterless and single-repeater bounds", &table, &["plob", "single_repeater"])?;
    finish(cfg, &table)
}

#[derive(Serialize)]
struct CheckCell {
    senders: String,
    measurement: &'static str,
    outcome: String,
    probability: f64,
    expected: Option<f64>,
}

#[derive(Serialize)]
struct CheckReport {
    n_max: usize,
    c: usize,
    cells: Vec<CheckCell>,
    max_deviation: Option<f64>,
    pass: Option<bool>,
}

/// Exact probabilities of the two-photon sector at `n_max = 2`.
fn expected_cell(alice: SenderState, bob: SenderState, non_separable: bool, j: usize) -> f64 {
    let both_check = alice == SenderState::Check && bob == SenderState::Check;
    match (non_separable, both_check, j) {
        (true, true, 0) => 1.0 / 3.0,
        (true, true, _) => 0.0,
        _ => 1.0 / 9.0,
    }
}

fn fraction(x: f64) -> &'static str {
    if (x - 1.0 / 9.0).abs() < 1e-15 {
        "1/9"
    } else if (x - 1.0 / 3.0).abs() < 1e-15 {
        "1/3"
    } else {
        "0"
    }
}

/// Returns whether the report passed; `None` when there is no reference.
pub fn check_states(cfg: &RunConfig) -> Result<Option<bool>> {
    let c = 2;
    let reference = cfg.n_max == 2;
    let mut cells = Vec::new();
    for (alice, bob) in sender_configurations() {
        let s = check_state_statistics(cfg.n_max, alice, bob, c)?;
        let senders = format!("{}{}", alice.symbol(), bob.symbol());
        for (j, p) in s.non_separable.iter().enumerate() {
            cells.push(CheckCell {
                senders: senders.clone(),
                measurement: "non-separable",
                outcome: format!("j={j}"),
                probability: *p,
                expected: reference.then(|| expected_cell(alice, bob, true, j)),
            });
        }
        for ((na, nb), p) in &s.separable {
            cells.push(CheckCell {
                senders: senders.clone(),
                measurement: "separable",
                outcome: format!("({na},{nb})"),
                probability: *p,
                expected: reference.then(|| expected_cell(alice, bob, false, 0)),
            });
        }
    }
    let max_deviation = reference.then(|| {
        cells
            .iter()
            .map(|x| (x.probability - x.expected.unwrap_or(0.0)).abs())
            .fold(0.0, f64::max)
    });
    let pass = max_deviation.map(|d| d < CHECK_STATE_TOL);
    let report = CheckReport {
        n_max: cfg.n_max,
        c,
        cells,
        max_deviation,
        pass,
    };
    let text = if cfg.json {
        serde_json::to_string_pretty(&report)? + "\n"
    } else {
        let mut s = format!("check states, n_max = {}, Charlie total c = {c}\n", cfg.n_max);
        s += &format!("{:<8}{:<15}{:<8}{:>18}  {}\n", "senders", "measurement", "outcome", "probability", "exact");
        for x in &report.cells {
            s += &format!(
                "{:<8}{:<15}{:<8}{:>18}  {}\n",
                x.senders,
                x.measurement,
                x.outcome,
                fmt_float(x.probability),
                x.expected.map_or("-", fraction)
            );
        }
        match (report.max_deviation, report.pass) {
            (Some(d), Some(p)) => {
                s += &format!("max deviation {}: {}\n", fmt_float(d), if p { "PASS" } else { "FAIL" })
            }
            _ => s += "no reference table for this n_max\n",
        }
        s
    };
    emit(&text, cfg.out.as_deref())?;
    Ok(pass)
}

#[derive(Serialize)]
struct ExactTomography {
    trace_distance: f64,
    min_eigenvalue: f64,
    holevo_direct: f64,
    holevo_tomographic: f64,
}

#[derive(Serialize)]
struct SampledTomography {
    shots: u64,
    seed: u64,
    min_eigenvalue: f64,
    /// After projection onto the nearest positive operator.
    trace_distance: f64,
    holevo_tomographic: f64,
}

#[derive(Serialize)]
struct TomographyReport {
    distance_km: f64,
    coefficients: Vec<f64>,
    heralding_probability: f64,
    exact: ExactTomography,
    sampled: Option<SampledTomography>,
}

pub fn tomography(cfg: &RunConfig) -> Result<()> {
    if cfg.n_max != 1 {
        bail!("tomography needs n_max = 1");
    }
    let d = cfg.distance;
    let ch = ChannelParams::from_distance_with_loss(d, cfg.loss_db_km)?;
    let coeffs = match &cfg.coeffs {
        Coeffs::Table { table, .. } => table.coefficients(d)?,
        Coeffs::Fixed(c) => c.clone(),
        Coeffs::Optimize => optimize_coefficients(1, &ch, None, cfg.objective, &optimizer_config(cfg))?.coefficients,
    };
    let heralded = conditional_state(&coeffs, &coeffs, &ch, 1)?;
    let Some(rho) = heralded.state else {
        bail!("heralding outcome has vanishing probability at {d} km");
    };
    let direct = holevo_eve(&rho)?;
    let record = exact_record(&rho)?;
    let rec = reconstruct_state(&record)?;
    let exact = ExactTomography {
        trace_distance: rec.state.trace_distance(&rho)?,
        min_eigenvalue: rec.min_eigenvalue,
        holevo_direct: direct,
        holevo_tomographic: eve_bound_from_tomography(&record)?,
    };
    let sampled = match cfg.shots {
        None => None,
        Some(shots) => {
            let record = sample_statistics(&rho, shots, cfg.seed)?;
            let rec = reconstruct_state(&record)?;
            Some(SampledTomography {
                shots,
                seed: cfg.seed,
                min_eigenvalue: rec.min_eigenvalue,
                trace_distance: nearest_psd(&rec.state)?.trace_distance(&rho)?,
                holevo_tomographic: eve_bound_from_tomography(&record)?,
            })
        }
    };
    let report = TomographyReport {
        distance_km: d,
        coefficients: coeffs.as_slice().to_vec(),
        heralding_probability: heralded.probability,
        exact,
        sampled,
    };
    let text = if cfg.json {
        serde_json::to_string_pretty(&report)? + "\n"
    } else {
        let f = fmt_float;
        let mut s = format!("distance_km: {}\n", f(report.distance_km));
        let c: Vec<String> = report.coefficients.iter().map(|x| f(*x)).collect();
        s += &format!("coefficients: {}\n", c.join(","));
        s += &format!("heralding_probability: {}\n", f(report.heralding_probability));
        let e = &report.exact;
        s += &format!("exact.trace_distance: {}\n", f(e.trace_distance));
        s += &format!("exact.min_eigenvalue: {}\n", f(e.min_eigenvalue));
        s += &format!("exact.holevo_direct: {}\n", f(e.holevo_direct));
        s += &format!("exact.holevo_tomographic: {}\n", f(e.holevo_tomographic));
        if let Some(x) = &report.sampled {
            s += &format!("sampled.shots: {}\nsampled.seed: {}\n", x.shots, x.seed);
            s += &format!("sampled.min_eigenvalue: {}\n", f(x.min_eigenvalue));
            s += &format!("sampled.trace_distance: {}\n", f(x.trace_distance));
            s += &format!("sampled.holevo_tomographic: {}\n", f(x.holevo_tomographic));
        }
        s
    };
    emit(&text, cfg.out.as_deref())
}
