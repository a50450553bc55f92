//! Subcommand bodies. Each one is a pure function of the loaded config and
//! its flags; every file goes through [`write_atomic`].

mod figures;
mod sweep;

use std::fmt::Write as _;
use std::path::PathBuf;

use rom8t::analysis::{
    calibrate, calibrate_baseline, measure_baseline_self, measure_metrics, metrics_csv,
    metrics_summary, num, run_monte_carlo, samples_csv, table1_csv, write_atomic, yield_csv,
    yield_summary, CalibratedMode, McConfig, PlanCalibration, YieldReport,
};
use rom8t::array::{build_array, Word};
use rom8t::device::CompactModel;
use rom8t::dynamics::{simulate_read_event, BitCell, CaseCode, ControlWaveforms, VoltageTrace};
use rom8t::protocol::{Mode, ModeConfig, PhasePlan};

use crate::config::RunConfig;
use crate::error::CliError;

pub use figures::{figures, Figure};
pub use sweep::{parse_range, sweep, SweepParam, SWEEP_HEADER};

pub const CALIBRATION_HEADER: [&str; 9] = [
    "mode",
    "plan",
    "vsl_V",
    "v_ref_V",
    "t_strobe_s",
    "rwl_pulse_s",
    "margin_V",
    "best_margin_V",
    "best_time_s",
];

/// Loaded configuration plus the model built from it.
pub struct Context {
    pub cfg: RunConfig,
    pub model: CompactModel,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(cfg: RunConfig, out_dir: Option<PathBuf>) -> Result<Self, CliError> {
        let model = CompactModel::new(cfg.device_params())?;
        let out_dir = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
        Ok(Self {
            cfg,
            model,
            out_dir,
        })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        Ok(path)
    }

    /// The mode ready for sensing: written-out plans are taken as they
    /// are, anything else is calibrated first.
    pub fn resolve_mode(&self, mode: Mode) -> Result<CalibratedMode, CliError> {
        let template = self.cfg.mode_template(mode);
        if self.cfg.mode_is_fixed(mode) {
            return Ok(CalibratedMode {
                config: template,
                plans: Vec::new(),
            });
        }
        calibrate(
            &template,
            &self.cfg.targets(),
            &self.cfg.variation(),
            &self.cfg.sim_config(),
            &self.model,
        )
        .map_err(|e| infeasible(mode.name(), e))
    }

    pub fn resolve_baseline(&self) -> Result<(PhasePlan, Option<PlanCalibration>), CliError> {
        let vdd = self.cfg.sim.vdd.0;
        let plan = self.cfg.baseline.plan(vdd);
        if self.cfg.baseline.is_fixed() {
            return Ok((plan, None));
        }
        let (p, c) = calibrate_baseline(
            &plan,
            &self.cfg.targets(),
            &self.cfg.variation(),
            &self.cfg.sim_config(),
            &self.model,
        )
        .map_err(|e| infeasible("baseline", e))?;
        Ok((p, Some(c)))
    }

    pub fn mc_config(&self, mode: Mode) -> McConfig {
        McConfig::for_mode(mode, self.cfg.mc.samples_per_case, self.cfg.variation())
    }

    pub fn monte_carlo(&self, mode: &ModeConfig) -> Result<YieldReport, CliError> {
        let mc = self.mc_config(mode.mode);
        Ok(run_monte_carlo(
            mode,
            &mc,
            &self.cfg.sim_config(),
            &self.model,
        )?)
    }
}

fn infeasible(what: &str, e: rom8t::Error) -> CliError {
    match e {
        rom8t::Error::CalibrationInfeasible {
            best_margin,
            required,
        } => CliError::Infeasible {
            what: what.to_string(),
            best_margin,
            required,
        },
        other => CliError::Core(other),
    }
}

/// Failing cases of a yield report, one line each; empty when it passes.
pub fn yield_failures(report: &YieldReport, threshold: f64) -> Vec<String> {
    let check_q = report.mode == Mode::DualContext;
    report
        .cases
        .iter()
        .filter(|c| c.correct_fraction() < threshold || (check_q && c.q_preserved < c.samples))
        .map(|c| {
            format!(
                "case {}: {}/{} correct ({:.4} < {threshold}), errors {}, q preserved {}/{}, worst margin {:.3} mV",
                c.case,
                c.correct,
                c.samples,
                c.correct_fraction(),
                c.errors,
                c.q_preserved,
                c.samples,
                c.worst_margin() * 1e3
            )
        })
        .collect()
}

pub struct SimulateArgs {
    pub case: CaseCode,
    pub mode: Mode,
    pub phase: String,
    pub vsl: Option<f64>,
    pub rwl_pulse: Option<f64>,
    pub duration: Option<f64>,
    pub output: Option<PathBuf>,
}

/// One nominal read event; RWL stays high for the whole event unless a
/// pulse width is given.
pub fn simulate_trace(ctx: &Context, args: &SimulateArgs) -> Result<VoltageTrace, CliError> {
    let vsl = match args.vsl {
        Some(v) => v,
        None => {
            let sections = ctx.cfg.plan_sections(args.mode);
            let (_, plan) = sections
                .iter()
                .find(|(name, _)| *name == args.phase)
                .ok_or_else(|| {
                    CliError::Usage(format!("mode {} has no plan {}", args.mode, args.phase))
                })?;
            plan.vsl.0
        }
    };
    let duration = args.duration.unwrap_or(ctx.cfg.calibration.window.0);
    let pulse = args.rwl_pulse.unwrap_or(duration);
    let sim = ctx.cfg.sim_config();
    let wave = ControlWaveforms::read_pulse(sim.vdd, pulse, vsl, duration)?;
    Ok(simulate_read_event(
        &BitCell::from_case(args.case),
        &wave,
        &sim,
        &ctx.model,
    )?)
}

pub fn simulate(ctx: &Context, args: &SimulateArgs) -> Result<PathBuf, CliError> {
    let trace = simulate_trace(ctx, args)?;
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| ctx.out_dir.join(format!("trace_case{}.csv", args.case)));
    write_atomic(&path, &buf)?;
    if trace.reliability_warning {
        eprintln!(
            "warning: terminal voltage reached {:.3} V, above the reliability limit",
            trace.max_terminal_voltage
        );
    }
    Ok(path)
}

pub fn mc(ctx: &Context, mode: Mode) -> Result<Vec<PathBuf>, CliError> {
    let resolved = ctx.resolve_mode(mode)?;
    let report = ctx.monte_carlo(&resolved.config)?;
    let name = mode.name();
    let summary = yield_summary(&report);
    let paths = vec![
        ctx.write(&format!("{name}_yield.csv"), &yield_csv(&report)?)?,
        ctx.write(&format!("{name}_samples.csv"), &samples_csv(&report)?)?,
        ctx.write(&format!("{name}_summary.txt"), &summary)?,
    ];
    print!("{summary}");
    let failures = yield_failures(&report, ctx.cfg.mc.yield_threshold);
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("{name}: {f}");
        }
        return Err(CliError::Threshold(format!(
            "{name}: {} case(s) below the yield threshold",
            failures.len()
        )));
    }
    Ok(paths)
}

fn calibration_rows(
    w: &mut csv::Writer<Vec<u8>>,
    label: &str,
    plans: &[(&'static str, &PhasePlan)],
    cal: &[(&'static str, PlanCalibration)],
) -> Result<(), CliError> {
    for (name, plan) in plans {
        let c = cal.iter().find(|(n, _)| n == name).map(|(_, c)| c);
        let opt = |f: fn(&PlanCalibration) -> f64| c.map(|c| num(f(c))).unwrap_or_default();
        w.write_record([
            label.to_string(),
            name.to_string(),
            num(plan.vsl),
            num(plan.sense.v_ref),
            num(plan.sense.t_strobe),
            num(plan.rwl_pulse),
            opt(|c| c.margin),
            opt(|c| c.best_margin),
            opt(|c| c.best_time),
        ])?;
    }
    Ok(())
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn csv_finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

/// Calibrates the given modes (all when `None`) and the reference read.
pub fn calibrate_cmd(ctx: &Context, mode: Option<Mode>) -> Result<PathBuf, CliError> {
    let modes: Vec<Mode> = mode.map_or(Mode::ALL.to_vec(), |m| vec![m]);
    let mut w = csv_writer();
    w.write_record(CALIBRATION_HEADER)?;
    for m in modes {
        let r = ctx.resolve_mode(m)?;
        calibration_rows(&mut w, m.name(), &r.config.plans(), &r.plans)?;
        let state = if r.plans.is_empty() {
            "fixed"
        } else {
            "calibrated"
        };
        println!("{m}: {state}, read delay {:.4} ns", r.read_delay() * 1e9);
    }
    if mode.is_none() {
        let (plan, cal) = ctx.resolve_baseline()?;
        let cal: Vec<_> = cal.into_iter().map(|c| ("phase1", c)).collect();
        calibration_rows(&mut w, "baseline", &[("phase1", &plan)], &cal)?;
    }
    ctx.write("calibration.csv", &csv_finish(w)?)
}

pub fn table1(ctx: &Context, baseline_only: bool) -> Result<Vec<PathBuf>, CliError> {
    let sim = ctx.cfg.sim_config();
    let (baseline, _) = ctx.resolve_baseline()?;
    let report = if baseline_only {
        measure_baseline_self(&baseline, &sim, &ctx.model)?
    } else {
        let modes = Mode::ALL
            .iter()
            .map(|&m| ctx.resolve_mode(m))
            .collect::<Result<Vec<_>, _>>()?;
        measure_metrics(&modes, &baseline, &sim, &ctx.model)?
    };
    let summary = metrics_summary(&report);
    print!("{summary}");
    Ok(vec![
        ctx.write("table1.csv", &table1_csv(&report)?)?,
        ctx.write("metrics.csv", &metrics_csv(&report)?)?,
        ctx.write("table1_summary.txt", &summary)?,
    ])
}

fn word_text(w: &Option<Word>) -> String {
    w.as_ref().map(|w| w.to_string()).unwrap_or_default()
}

/// Reads every row of the configured array in `mode`.
pub fn array(ctx: &Context, mode: Mode) -> Result<PathBuf, CliError> {
    let resolved = ctx.resolve_mode(mode)?;
    let params = ctx.cfg.device_params();
    let mut arr = build_array(
        ctx.cfg.array_config()?,
        ctx.cfg.rom_image()?,
        &ctx.cfg.variation(),
        &params,
    )?;
    if let Some(ram) = ctx.cfg.ram_image()? {
        arr.ram_restore(&ram)?;
    }
    if mode == Mode::RomOnly {
        arr.enter_rom_only_mode();
    }
    let sim = ctx.cfg.sim_config();
    let mut w = csv_writer();
    w.write_record(["row", "ram", "rom"])?;
    let mut mismatches = 0;
    for r in 0..arr.config().rows {
        let read = arr.read_word(&resolved.config, r, &sim, &ctx.model)?;
        if let Some(rom) = &read.rom {
            mismatches += (rom.0.as_slice() != arr.rom_image().row(r).unwrap_or_default()) as usize;
        }
        w.write_record([r.to_string(), word_text(&read.ram), word_text(&read.rom)])?;
    }
    let path = ctx.write(&format!("array_{}.csv", mode.name()), &csv_finish(w)?)?;
    let mut s = String::new();
    let _ = write!(s, "{} rows read in {mode}", arr.config().rows);
    if mismatches > 0 {
        let _ = write!(s, ", {mismatches} ROM row(s) differ from the image");
    }
    println!("{s}");
    Ok(path)
}
