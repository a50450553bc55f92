use super::{calibrate::CalibratedMode, mc_cell, CellKind};
use crate::device::{CompactModel, VariationSpec};
use crate::dynamics::{leakage_power, BaselineCell, BitCell, CaseCode, SimConfig};
use crate::error::{Error, Result};
use crate::protocol::{read_cell, run_phase, Mode, PhasePlan};

/// Raw and baseline-normalized figures for one row of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub label: String,
    /// Seconds.
    pub delay: f64,
    /// Joules per read.
    pub energy: f64,
    /// Watts.
    pub leakage: f64,
    pub norm_delay: f64,
    pub norm_energy: f64,
    pub norm_leakage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub baseline_delay: f64,
    pub baseline_energy: f64,
    pub baseline_leakage: f64,
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    pub fn row(&self, label: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn validate(&self) -> Result<()> {
        let raw = [
            self.baseline_delay,
            self.baseline_energy,
            self.baseline_leakage,
        ]
        .into_iter()
        .chain(
            self.rows
                .iter()
                .flat_map(|r| [r.delay, r.energy, r.leakage]),
        );
        for v in raw {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "raw metric must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn nominal_cell(kind: CellKind, case: CaseCode, model: &CompactModel) -> BitCell {
    mc_cell(kind, case, 0, &VariationSpec::nominal(), model.params())
}

fn mode_cases(mode: Mode) -> &'static [CaseCode] {
    match mode {
        Mode::RomOnly => &[CaseCode::C00, CaseCode::C01],
        _ => &CaseCode::ALL,
    }
}

/// Mean energy of one full read over the mode's nominal cases.
fn mode_energy(m: &CalibratedMode, cfg: &SimConfig, model: &CompactModel) -> Result<f64> {
    let cases = mode_cases(m.config.mode);
    let mut total = 0.0;
    for &case in cases {
        let cell = nominal_cell(CellKind::Proposed, case, model);
        let out = read_cell(&cell, &m.config, cfg, model)?;
        total += out.phases.iter().map(|p| p.trace.energy_drawn).sum::<f64>();
    }
    Ok(total / cases.len() as f64)
}

/// Mean standby power of a balanced ROM image (both flavors, both Q values).
pub fn proposed_leakage(cfg: &SimConfig, model: &CompactModel) -> Result<f64> {
    let mut total = 0.0;
    for case in CaseCode::ALL {
        total += leakage_power(&nominal_cell(CellKind::Proposed, case, model), cfg, model)?;
    }
    Ok(total / 4.0)
}

fn baseline_figures(plan: &PhasePlan, cfg: &SimConfig, model: &CompactModel) -> Result<[f64; 3]> {
    let kind = CellKind::Baseline(BaselineCell::new(model.params()));
    let (mut energy, mut leak) = (0.0, 0.0);
    for case in [CaseCode::C00, CaseCode::C10] {
        let cell = nominal_cell(kind, case, model);
        energy += run_phase(&cell, plan, cfg, model)?.trace.energy_drawn;
        leak += leakage_power(&cell, cfg, model)?;
    }
    Ok([plan.sense.t_strobe, energy / 2.0, leak / 2.0])
}

fn row(label: String, raw: [f64; 3], base: [f64; 3]) -> MetricsRow {
    MetricsRow {
        label,
        delay: raw[0],
        energy: raw[1],
        leakage: raw[2],
        norm_delay: raw[0] / base[0],
        norm_energy: raw[1] / base[1],
        norm_leakage: raw[2] / base[2],
    }
}

/// Delay, energy and leakage of each calibrated mode against the
/// reference cell read with `baseline` (grounded SL).
///
/// Energy per read is the pre-charge restore `vdd * c_bl * (vdd - v_end)`
/// plus the SL rail work `|vsl| * c_bl * dV`, summed over phases.
pub fn measure_metrics(
    modes: &[CalibratedMode],
    baseline: &PhasePlan,
    cfg: &SimConfig,
    model: &CompactModel,
) -> Result<MetricsReport> {
    let base = baseline_figures(baseline, cfg, model)?;
    let leak = proposed_leakage(cfg, model)?;
    let mut rows = Vec::with_capacity(modes.len());
    for m in modes {
        let raw = [m.read_delay(), mode_energy(m, cfg, model)?, leak];
        rows.push(row(m.config.mode.name().to_string(), raw, base));
    }
    let report = MetricsReport {
        baseline_delay: base[0],
        baseline_energy: base[1],
        baseline_leakage: base[2],
        rows,
    };
    report.validate()?;
    Ok(report)
}

/// The reference cell normalized against itself.
pub fn measure_baseline_self(
    baseline: &PhasePlan,
    cfg: &SimConfig,
    model: &CompactModel,
) -> Result<MetricsReport> {
    let base = baseline_figures(baseline, cfg, model)?;
    let report = MetricsReport {
        baseline_delay: base[0],
        baseline_energy: base[1],
        baseline_leakage: base[2],
        rows: vec![row("baseline".into(), base, base)],
    };
    report.validate()?;
    Ok(report)
}
