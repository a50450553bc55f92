//! Reference-voltage and strobe-time calibration.
//!
//! For a strobe time `t` the worst-case margin over `v_ref` is maximized at
//! the midpoint of the gap between the lowest non-discharging sample and the
//! highest discharging sample:
//!
//! ```text
//! m*(t)   = (min_{expect 0} v(t) - max_{expect 1} v(t)) / 2
//! v_ref*  = (min_{expect 0} v(t) + max_{expect 1} v(t)) / 2
//! ```
//!
//! The strobe is placed at the earliest time where `m*(t)` reaches
//! `strobe_margin` (coarse grid, then bisection). If the window never gets
//! there the global grid maximum of `m*` is used instead. A plan whose best
//! `m*` stays below `required_margin` is infeasible.

use rayon::prelude::*;

use super::{mc_cell, CellKind};
use crate::device::{CompactModel, VariationSpec};
use crate::dynamics::{simulate_read_event, BaselineCell, CaseCode, SimConfig};
use crate::error::{Error, Result};
use crate::protocol::{Mode, ModeConfig, PhasePlan, SenseConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    /// Below this best worst-case margin the plan is declared infeasible (V).
    pub required_margin: f64,
    /// Margin at which the strobe fires as early as possible (V).
    pub strobe_margin: f64,
    /// Longest evaluate window searched (s).
    pub window: f64,
    /// Earliest strobe considered (s).
    pub t_min: f64,
    pub grid_points: usize,
    pub samples_per_case: usize,
    /// Bisection stops once the strobe bracket is this narrow (s).
    pub time_resolution: f64,
    /// XOR-ed into the variation seed so calibration and verification draw
    /// different populations.
    pub seed_salt: u64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            required_margin: 0.010,
            strobe_margin: 0.030,
            window: 3e-9,
            t_min: 5e-12,
            grid_points: 120,
            samples_per_case: 500,
            time_resolution: 0.25e-12,
            seed_salt: 0x0C41_1B4A_7E00_0001,
        }
    }
}

impl CalibrationTargets {
    pub fn validate(&self) -> Result<()> {
        let ok = self.required_margin > 0.0
            && self.strobe_margin >= self.required_margin
            && self.window > self.t_min
            && self.t_min > 0.0
            && self.grid_points >= 2
            && self.samples_per_case >= 1
            && self.time_resolution > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "inconsistent calibration targets: {self:?}"
            )))
        }
    }

    pub fn calibration_variation(&self, variation: &VariationSpec) -> VariationSpec {
        variation.with_seed(variation.seed ^ self.seed_salt)
    }
}

/// Chosen sense settings for one plan, with the margins behind them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanCalibration {
    pub sense: SenseConfig,
    /// Worst-case margin at the chosen strobe (V).
    pub margin: f64,
    /// Largest worst-case margin seen on the grid and where (V, s).
    pub best_margin: f64,
    pub best_time: f64,
}

/// Bit-line voltages of a calibration population on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Ensemble {
    step: f64,
    len: usize,
    /// Samples expected to read 0 (stay high).
    high: Vec<Vec<f64>>,
    /// Samples expected to read 1 (discharge).
    low: Vec<Vec<f64>>,
}

impl Ensemble {
    /// Simulates every `(case, sample)` over `window` with the RWL held high.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        plan: &PhasePlan,
        cases: &[(CaseCode, bool)],
        kind: CellKind,
        variation: &VariationSpec,
        samples: usize,
        window: f64,
        cfg: &SimConfig,
        model: &CompactModel,
    ) -> Result<Self> {
        let wave = PhasePlan {
            rwl_pulse: window,
            sense: SenseConfig {
                t_strobe: window,
                ..plan.sense
            },
            ..*plan
        }
        .waveforms(cfg)?;
        let len = (window / cfg.dt_max).ceil() as usize * 2 + 1;
        let step = window / (len - 1) as f64;
        let jobs: Vec<(CaseCode, bool, u64)> = cases
            .iter()
            .flat_map(|&(c, e)| (0..samples as u64).map(move |s| (c, e, s)))
            .collect();
        let rows: Vec<Result<(bool, Vec<f64>)>> = jobs
            .par_iter()
            .map(|&(case, expect, s)| {
                let cell = mc_cell(kind, case, s, variation, model.params());
                let tr = simulate_read_event(&cell, &wave, cfg, model)?;
                let v = (0..len)
                    .map(|i| tr.voltage_at((i as f64 * step).min(window)).unwrap())
                    .collect();
                Ok((expect, v))
            })
            .collect();
        let mut high = Vec::new();
        let mut low = Vec::new();
        for r in rows {
            let (expect, v) = r?;
            if expect {
                low.push(v)
            } else {
                high.push(v)
            }
        }
        if high.is_empty() || low.is_empty() {
            return Err(Error::InvalidConfig(
                "calibration needs cases on both sides of the reference".into(),
            ));
        }
        Ok(Self {
            step,
            len,
            high,
            low,
        })
    }

    pub fn window(&self) -> f64 {
        self.step * (self.len - 1) as f64
    }

    fn interp(&self, t: f64) -> (usize, f64) {
        let x = (t / self.step).clamp(0.0, (self.len - 1) as f64);
        let i = (x.floor() as usize).min(self.len - 2);
        (i, x - i as f64)
    }

    /// Per-sample voltages at `t`: `(expected-0 group, expected-1 group)`.
    pub fn values_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (i, f) = self.interp(t);
        let at = |v: &Vec<f64>| v[i] + f * (v[i + 1] - v[i]);
        (
            self.high.iter().map(at).collect(),
            self.low.iter().map(at).collect(),
        )
    }

    /// Best worst-case margin at `t` and the reference that achieves it.
    pub fn margin_at(&self, t: f64) -> (f64, f64) {
        let (i, f) = self.interp(t);
        let at = |v: &Vec<f64>| v[i] + f * (v[i + 1] - v[i]);
        let min_high = self.high.iter().map(at).fold(f64::INFINITY, f64::min);
        let max_low = self.low.iter().map(at).fold(f64::NEG_INFINITY, f64::max);
        (0.5 * (min_high - max_low), 0.5 * (min_high + max_low))
    }

    /// Runs the grid-plus-bisection strobe search.
    pub fn calibrate(&self, targets: &CalibrationTargets) -> Result<PlanCalibration> {
        let n = targets.grid_points;
        let t_max = self.window();
        let grid: Vec<f64> = (0..n)
            .map(|k| targets.t_min + (t_max - targets.t_min) * k as f64 / (n - 1) as f64)
            .collect();
        let margins: Vec<f64> = grid.iter().map(|&t| self.margin_at(t).0).collect();
        let (best_k, &best_margin) =
            margins
                .iter()
                .enumerate()
                .fold((0, &f64::NEG_INFINITY), |acc, (k, m)| {
                    if *m > *acc.1 {
                        (k, m)
                    } else {
                        acc
                    }
                });
        if !(best_margin >= targets.required_margin) {
            return Err(Error::CalibrationInfeasible {
                best_margin,
                required: targets.required_margin,
            });
        }
        let t_strobe = match margins.iter().position(|&m| m >= targets.strobe_margin) {
            Some(0) => grid[0],
            Some(k) => {
                let (mut lo, mut hi) = (grid[k - 1], grid[k]);
                while hi - lo > targets.time_resolution {
                    let mid = 0.5 * (lo + hi);
                    if self.margin_at(mid).0 >= targets.strobe_margin {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
            None => grid[best_k],
        };
        let (margin, v_ref) = self.margin_at(t_strobe);
        Ok(PlanCalibration {
            sense: SenseConfig { v_ref, t_strobe },
            margin,
            best_margin,
            best_time: grid[best_k],
        })
    }
}

/// Cases and expected comparator outputs for a plan of `mode`.
///
/// `plan` is one of `phase1`, `phase2_if_ram0`, `phase2_if_ram1`.
pub fn plan_cases(mode: Mode, plan: &str) -> Vec<(CaseCode, bool)> {
    use CaseCode as C;
    match (mode, plan) {
        (Mode::RomOnly, _) => vec![(C::C00, false), (C::C01, true)],
        (Mode::DualContext, "phase2_if_ram0") => vec![(C::C00, false), (C::C01, true)],
        (Mode::DualContext, "phase2_if_ram1") => vec![(C::C10, false), (C::C11, true)],
        _ => vec![
            (C::C00, false),
            (C::C01, false),
            (C::C10, true),
            (C::C11, true),
        ],
    }
}

/// Calibrates one plan; the returned plan drops RWL at the strobe instant.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_plan(
    template: &PhasePlan,
    cases: &[(CaseCode, bool)],
    kind: CellKind,
    targets: &CalibrationTargets,
    variation: &VariationSpec,
    cfg: &SimConfig,
    model: &CompactModel,
) -> Result<(PhasePlan, PlanCalibration)> {
    targets.validate()?;
    let var = targets.calibration_variation(variation);
    let ens = Ensemble::build(
        template,
        cases,
        kind,
        &var,
        targets.samples_per_case,
        targets.window,
        cfg,
        model,
    )?;
    let cal = ens.calibrate(targets)?;
    let plan = PhasePlan {
        rwl_pulse: cal.sense.t_strobe,
        sense: cal.sense,
        ..*template
    };
    Ok((plan, cal))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedMode {
    pub config: ModeConfig,
    pub plans: Vec<(&'static str, PlanCalibration)>,
}

impl CalibratedMode {
    /// Worst-case time from RWL rise to the comparator decision, summed
    /// over phases; phase II counts its slower branch.
    pub fn read_delay(&self) -> f64 {
        let c = &self.config;
        let p2 = match (&c.phase2_if_ram0, &c.phase2_if_ram1) {
            (Some(a), Some(b)) => a.sense.t_strobe.max(b.sense.t_strobe),
            _ => 0.0,
        };
        c.phase1.sense.t_strobe + p2
    }
}

/// Calibrates every plan of `mode`, keeping each template's SL level.
pub fn calibrate(
    mode: &ModeConfig,
    targets: &CalibrationTargets,
    variation: &VariationSpec,
    cfg: &SimConfig,
    model: &CompactModel,
) -> Result<CalibratedMode> {
    let run = |label: &'static str, plan: &PhasePlan| {
        calibrate_plan(
            plan,
            &plan_cases(mode.mode, label),
            CellKind::Proposed,
            targets,
            variation,
            cfg,
            model,
        )
    };
    let mut config = mode.clone();
    let mut plans = Vec::new();
    let (p1, c1) = run("phase1", &mode.phase1)?;
    config.phase1 = p1;
    plans.push(("phase1", c1));
    if let Some(t) = &mode.phase2_if_ram0 {
        let (p, c) = run("phase2_if_ram0", t)?;
        config.phase2_if_ram0 = Some(p);
        plans.push(("phase2_if_ram0", c));
    }
    if let Some(t) = &mode.phase2_if_ram1 {
        let (p, c) = run("phase2_if_ram1", t)?;
        config.phase2_if_ram1 = Some(p);
        plans.push(("phase2_if_ram1", c));
    }
    Ok(CalibratedMode { config, plans })
}

/// Calibrates the regular-V_T reference cell's grounded-SL read.
pub fn calibrate_baseline(
    template: &PhasePlan,
    targets: &CalibrationTargets,
    variation: &VariationSpec,
    cfg: &SimConfig,
    model: &CompactModel,
) -> Result<(PhasePlan, PlanCalibration)> {
    let plan = PhasePlan {
        vsl: 0.0,
        ..*template
    };
    calibrate_plan(
        &plan,
        &[(CaseCode::C00, false), (CaseCode::C10, true)],
        CellKind::Baseline(BaselineCell::new(model.params())),
        targets,
        variation,
        cfg,
        model,
    )
}
