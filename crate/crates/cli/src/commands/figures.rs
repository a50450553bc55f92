use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use rom8t::analysis::{mc_cell, num, samples_csv, CellKind};
use rom8t::dynamics::{simulate_read_event, BitCell, CaseCode, ControlWaveforms, VoltageTrace};
use rom8t::protocol::Mode;

use super::{csv_finish, csv_writer, Context};
use crate::error::CliError;

const GRID_POINTS: usize = 301;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2a,
    Fig2b,
    Fig2c,
    Fig2d,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl Figure {
    pub const ALL: [Figure; 8] = [
        Figure::Fig2a,
        Figure::Fig2b,
        Figure::Fig2c,
        Figure::Fig2d,
        Figure::Fig5,
        Figure::Fig6,
        Figure::Fig7,
        Figure::Fig8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig2c => "fig2c",
            Figure::Fig2d => "fig2d",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
        }
    }

    /// SL level and cases of the discharge panels.
    fn panel(self) -> Option<(f64, &'static [CaseCode])> {
        match self {
            Figure::Fig2a | Figure::Fig2b => Some((-0.10, &CaseCode::ALL)),
            Figure::Fig2c => Some((0.20, &[CaseCode::C10, CaseCode::C11])),
            Figure::Fig2d => Some((-0.45, &[CaseCode::C00, CaseCode::C01])),
            _ => None,
        }
    }

    fn mode(self) -> Option<Mode> {
        match self {
            Figure::Fig5 => Some(Mode::RomOnly),
            Figure::Fig6 => Some(Mode::RamOnlyReliability),
            Figure::Fig7 => Some(Mode::RamOnlyDelay),
            Figure::Fig8 => Some(Mode::DualContext),
            _ => None,
        }
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown figure {s:?}"))
    }
}

fn grid(duration: f64) -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|k| duration * k as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

fn on_grid(trace: &VoltageTrace, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|&t| trace.voltage_at(t).unwrap_or_else(|| trace.final_voltage()))
        .collect()
}

fn nominal_traces(ctx: &Context, vsl: f64, cases: &[CaseCode]) -> Result<String, CliError> {
    let sim = ctx.cfg.sim_config();
    let duration = ctx.cfg.calibration.window.0;
    let wave = ControlWaveforms::read_pulse(sim.vdd, duration, vsl, duration)?;
    let times = grid(duration);
    let columns = cases
        .iter()
        .map(|&c| {
            simulate_read_event(&BitCell::from_case(c), &wave, &sim, &ctx.model)
                .map(|t| on_grid(&t, &times))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = csv_writer();
    let mut header = vec!["time_s".to_string()];
    header.extend(cases.iter().map(|c| format!("v_case{c}_V")));
    w.write_record(&header)?;
    for (k, t) in times.iter().enumerate() {
        let mut rec = vec![num(*t)];
        rec.extend(columns.iter().map(|col| num(col[k])));
        w.write_record(&rec)?;
    }
    csv_finish(w)
}

/// Per-case minimum, mean and maximum of the sampled discharge curves.
fn envelopes(ctx: &Context, vsl: f64, cases: &[CaseCode]) -> Result<String, CliError> {
    let sim = ctx.cfg.sim_config();
    let params = ctx.cfg.device_params();
    let variation = ctx.cfg.variation();
    let duration = ctx.cfg.calibration.window.0;
    let wave = ControlWaveforms::read_pulse(sim.vdd, duration, vsl, duration)?;
    let times = grid(duration);
    let n = ctx.cfg.mc.samples_per_case;
    let mut w = csv_writer();
    w.write_record(["time_s", "case", "v_min_V", "v_mean_V", "v_max_V"])?;
    for &case in cases {
        let curves = (0..n as u64)
            .into_par_iter()
            .map(|s| {
                let cell = mc_cell(CellKind::Proposed, case, s, &variation, &params);
                simulate_read_event(&cell, &wave, &sim, &ctx.model).map(|t| on_grid(&t, &times))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (k, t) in times.iter().enumerate() {
            let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for c in &curves {
                lo = lo.min(c[k]);
                hi = hi.max(c[k]);
                sum += c[k];
            }
            w.write_record([
                num(*t),
                case.to_string(),
                num(lo),
                num(sum / n as f64),
                num(hi),
            ])?;
        }
    }
    csv_finish(w)
}

pub fn figures(ctx: &Context, which: &[Figure]) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for &f in which {
        let body = match (f.panel(), f.mode()) {
            (Some((vsl, cases)), _) if f == Figure::Fig2a => nominal_traces(ctx, vsl, cases)?,
            (Some((vsl, cases)), _) => envelopes(ctx, vsl, cases)?,
            (None, Some(mode)) => {
                let resolved = ctx.resolve_mode(mode)?;
                samples_csv(&ctx.monte_carlo(&resolved.config)?)?
            }
            (None, None) => unreachable!("every figure is a panel or a mode"),
        };
        let path = ctx.write(&format!("{}.csv", f.name()), &body)?;
        println!("{}", path.display());
        paths.push(path);
    }
    Ok(paths)
}
