use lsp_core::classification::{cone_report, portrait};
use lsp_core::io::{
    backward_rows, curve_rows, orbit_rows, plan_rows, portrait_rows, sweep_rows, write_beck_csv, write_csv,
    write_csv_with_header, write_json,
};
use lsp_core::optimizer::{cost_sweep, optimal_plan, OptimizeOptions};
use lsp_core::plan_cost::{cost_terms, expected_cost, monte_carlo_cost, DEFAULT_MAX_TERMS};
use lsp_core::recursion::{beck_orbit, trace_orbit};
use lsp_core::separatrix::{
    backward_parameters, compute_separatrix, extend_backward, SeparatrixConfig, SeparatrixKind,
};
use lsp_core::validate::run_all;
use lsp_core::{DistSelector, Error, TailDistribution};
use serde::Serialize;

use crate::config::{Command, Format, RunConfig};

pub enum Failure {
    Config(String),
    Module(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Module(e)
    }
}

pub struct Output {
    pub bytes: Vec<u8>,
    /// False when the command ran but reports a failed check.
    pub ok: bool,
}

type Run = Result<Output, Failure>;

fn selector(cfg: &RunConfig) -> Result<DistSelector, Failure> {
    cfg.dist.parse().map_err(|e: Error| Failure::Config(e.to_string()))
}

fn tail(cfg: &RunConfig) -> Result<TailDistribution, Failure> {
    match selector(cfg)? {
        DistSelector::Tail(d) => Ok(d),
        DistSelector::Beck => Err(Failure::Config(format!(
            "distribution beck is only available to beck-iterate, not {:?}",
            cfg.command
        ))),
    }
}

fn emit_rows<T: Serialize>(rows: &[T], format: Format) -> Run {
    let mut bytes = Vec::new();
    match format {
        Format::Csv => write_csv(&mut bytes, rows)?,
        Format::Json => write_json(&mut bytes, rows)?,
    }
    Ok(Output { bytes, ok: true })
}

fn emit_json<T: Serialize>(value: &T) -> Run {
    let mut bytes = Vec::new();
    write_json(&mut bytes, value)?;
    Ok(Output { bytes, ok: true })
}

pub fn run(cfg: &RunConfig) -> Run {
    match cfg.command {
        Command::Separatrix => separatrix(cfg),
        Command::Portrait => portrait_cmd(cfg),
        Command::Sweep => sweep(cfg),
        Command::Optimize => optimize(cfg),
        Command::Simulate => simulate(cfg),
        Command::BeckIterate => beck(cfg),
        Command::Validate => validate(cfg),
    }
}

fn separatrix(cfg: &RunConfig) -> Run {
    let kind = SeparatrixKind::for_distribution(&tail(cfg)?)?;
    let sc = SeparatrixConfig {
        nodes: cfg.grid,
        tol: cfg.tol,
        ..SeparatrixConfig::default_for(kind)
    };
    let curve = compute_separatrix(kind, &sc)?;
    let format = cfg.format_or(Format::Csv);
    match cfg.steps {
        Some(steps) => {
            let lines = extend_backward(&curve, steps, &backward_parameters(&curve, cfg.grid));
            emit_rows(&backward_rows(&lines), format)
        }
        None => emit_rows(&curve_rows(&curve), format),
    }
}

fn portrait_cmd(cfg: &RunConfig) -> Run {
    let format = cfg.format_or(Format::Csv);
    if cfg.cone {
        let (lo, hi) = cfg.range_or((0.0, 3.0));
        let n = cfg.points.max(1);
        let pts: Vec<(f64, f64)> = (0..n)
            .flat_map(|i| {
                let z = if n == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                };
                (0..5).map(move |j| (j as f64, z))
            })
            .collect();
        return emit_rows(&cone_report(&pts), format);
    }
    let d = tail(cfg)?;
    if let Some(x1) = cfg.x1 {
        let orbit = trace_orbit(&d, 0.0, x1, cfg.horizon);
        return emit_rows(&orbit_rows(&orbit), format);
    }
    let (lo, hi) = cfg.range_or((0.01, 1.5));
    let rows = portrait(&d, lo, hi, cfg.points, cfg.horizon)?;
    emit_rows(&portrait_rows(&rows), format)
}

fn sweep(cfg: &RunConfig) -> Run {
    let d = tail(cfg)?;
    let (lo, hi) = cfg.range_or((0.01, 1.5));
    let rows = cost_sweep(&d, lo, hi, cfg.points, cfg.terms, cfg.horizon)?;
    emit_rows(&sweep_rows(&rows), cfg.format_or(Format::Csv))
}

fn optimize_opts(cfg: &RunConfig) -> OptimizeOptions {
    OptimizeOptions {
        horizon: cfg.horizon,
        bracket: cfg.range,
        ..Default::default()
    }
}

fn optimize(cfg: &RunConfig) -> Run {
    let d = tail(cfg)?;
    let report = optimal_plan(&d, &optimize_opts(cfg))?;
    match cfg.format_or(Format::Json) {
        Format::Json => emit_json(&report),
        Format::Csv => {
            let (_, terms) = cost_terms(&report.plan(&d)?, &d, DEFAULT_MAX_TERMS)?;
            let mut bytes = Vec::new();
            write_csv_with_header(&mut bytes, &["k", "x_k", "f(x_{k-1})", "term"], &plan_rows(&terms))?;
            Ok(Output { bytes, ok: true })
        }
    }
}

#[derive(Serialize)]
struct SimulationRow {
    dist: String,
    x1: f64,
    expected: f64,
    mean: f64,
    stderr: f64,
    samples: usize,
    seed: u64,
}

fn simulate(cfg: &RunConfig) -> Run {
    let d = tail(cfg)?;
    let report = optimal_plan(
        &d,
        &OptimizeOptions {
            cross_check: false,
            ..optimize_opts(cfg)
        },
    )?;
    let plan = report.plan(&d)?;
    let mc = monte_carlo_cost(&plan, &d, cfg.samples, cfg.seed)?;
    let row = SimulationRow {
        dist: d.to_string(),
        x1: report.best().x1,
        expected: expected_cost(&plan, &d, DEFAULT_MAX_TERMS)?.value,
        mean: mc.mean,
        stderr: mc.stderr,
        samples: mc.samples,
        seed: cfg.seed,
    };
    match cfg.format_or(Format::Json) {
        Format::Json => emit_json(&row),
        Format::Csv => emit_rows(&[row], Format::Csv),
    }
}

fn beck(cfg: &RunConfig) -> Run {
    match selector(cfg)? {
        DistSelector::Beck => {}
        other => return Err(Failure::Config(format!("beck-iterate needs --dist beck, got {other}"))),
    }
    let (lo, hi) = cfg.range_or((0.1, 1.5));
    let n = cfg.points.max(1);
    let steps = cfg.steps.unwrap_or(6);
    let rows: Vec<_> = (0..n)
        .map(|i| {
            let t = if n == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            };
            (t, beck_orbit(t, steps))
        })
        .collect();
    let mut bytes = Vec::new();
    match cfg.format_or(Format::Csv) {
        Format::Csv => write_beck_csv(&mut bytes, &rows)?,
        Format::Json => write_json(&mut bytes, &rows)?,
    }
    Ok(Output { bytes, ok: true })
}

fn validate(cfg: &RunConfig) -> Run {
    let outcomes = run_all();
    let ok = outcomes.iter().all(|o| o.passed());
    let mut bytes = Vec::new();
    match cfg.format {
        Some(Format::Json) => write_json(&mut bytes, &outcomes)?,
        _ => {
            for o in &outcomes {
                bytes.extend_from_slice(format!("{o}\n").as_bytes());
            }
            let passed = outcomes.iter().filter(|o| o.passed()).count();
            bytes.extend_from_slice(format!("{passed}/{} criteria passed\n", outcomes.len()).as_bytes());
        }
    }
    Ok(Output { bytes, ok })
}
