//! Monte-Carlo verification, calibration and normalized metrics.

mod calibrate;
mod metrics;
mod montecarlo;
mod report;

pub use calibrate::{
    calibrate, calibrate_baseline, calibrate_plan, plan_cases, CalibratedMode, CalibrationTargets,
    Ensemble, PlanCalibration,
};
pub use metrics::{
    measure_baseline_self, measure_metrics, proposed_leakage, MetricsReport, MetricsRow,
};
pub use montecarlo::{
    run_monte_carlo, CaseYield, McConfig, PhaseSample, PhaseSummary, SampleRecord, YieldReport,
};
pub use report::{
    metrics_csv, metrics_summary, num, parse_metrics_csv, parse_table1_csv, parse_yield_csv,
    samples_csv, table1_csv, write_atomic, yield_csv, yield_summary, YieldCsvRow,
};

use crate::device::{sample_delta_vt, DeviceInstance, DeviceParams, VariationSpec};
use crate::dynamics::{BaselineCell, BitCell, CaseCode};

/// Which read port a Monte-Carlo population is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellKind {
    /// The two-flavor cell; the case's ROM bit selects the flavor.
    Proposed,
    /// Single regular-V_T reference cell; only the case's RAM bit matters.
    Baseline(BaselineCell),
}

/// Draw index of one device of one Monte-Carlo sample.
pub fn mc_draw_index(case: CaseCode, sample: u64, position: u64) -> u64 {
    (((case.code() as u64) << 40) | sample) * 2 + position
}

/// Cell for `(case, sample)`; depends on nothing else.
pub fn mc_cell(
    kind: CellKind,
    case: CaseCode,
    sample: u64,
    variation: &VariationSpec,
    params: &DeviceParams,
) -> BitCell {
    match kind {
        CellKind::Proposed => {
            let flavor = case.flavor();
            let vt = params.vt_nominal(flavor);
            let dev = |pos| DeviceInstance {
                flavor,
                delta_vt: sample_delta_vt(variation, mc_draw_index(case, sample, pos), vt),
            };
            BitCell::with_devices(case.ram(), dev(0), dev(1)).expect("flavors match")
        }
        CellKind::Baseline(b) => {
            let vt = b.threshold(params);
            let d = |pos| sample_delta_vt(variation, mc_draw_index(case, sample, pos), vt);
            b.cell(case.ram(), d(0), d(1))
        }
    }
}

pub(crate) fn summary(values: &[f64]) -> (f64, f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (min, max, mean, var.sqrt())
}
