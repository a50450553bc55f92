use rayon::prelude::*;

use super::{mc_cell, summary, CellKind};
use crate::device::{CompactModel, VariationSpec};
use crate::dynamics::{CaseCode, SimConfig};
use crate::error::{Error, Result};
use crate::protocol::{read_cell, Mode, ModeConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub samples_per_case: usize,
    pub variation: VariationSpec,
    pub cases: Vec<CaseCode>,
}

impl McConfig {
    /// Every case the mode can read: ROM-only mode only has Q = 0 cells.
    pub fn for_mode(mode: Mode, samples_per_case: usize, variation: VariationSpec) -> Self {
        let cases = match mode {
            Mode::RomOnly => vec![CaseCode::C00, CaseCode::C01],
            _ => CaseCode::ALL.to_vec(),
        };
        Self {
            samples_per_case,
            variation,
            cases,
        }
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        if self.samples_per_case < 1 {
            return Err(Error::InvalidConfig("samples_per_case must be >= 1".into()));
        }
        self.variation.validate()?;
        if mode == Mode::RomOnly && self.cases.iter().any(|c| c.ram()) {
            return Err(Error::InvalidConfig(
                "ROM-only mode is only defined for Q = 0 cases".into(),
            ));
        }
        Ok(())
    }
}

/// One sensed phase of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSample {
    pub expected: bool,
    pub bit: bool,
    pub v_strobe: f64,
    pub v_ref: f64,
    /// Distance from the reference, positive on the correct side (V).
    pub margin: f64,
}

impl PhaseSample {
    fn new(expected: bool, bit: bool, v_strobe: f64, v_ref: f64) -> Self {
        let margin = if expected {
            v_ref - v_strobe
        } else {
            v_strobe - v_ref
        };
        Self {
            expected,
            bit,
            v_strobe,
            v_ref,
            margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub case: CaseCode,
    pub sample: u64,
    pub phases: Vec<PhaseSample>,
    pub q_before: bool,
    pub q_after: bool,
    pub error: Option<String>,
}

impl SampleRecord {
    /// Correct iff every phase has a strictly positive margin.
    pub fn correct(&self) -> bool {
        self.error.is_none()
            && !self.phases.is_empty()
            && self.phases.iter().all(|p| p.margin > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSummary {
    pub phase: usize,
    pub correct: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub v_mean: f64,
    pub v_std: f64,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseYield {
    pub case: CaseCode,
    pub samples: usize,
    pub correct: usize,
    pub errors: usize,
    /// Samples whose Q matched before and after the read.
    pub q_preserved: usize,
    pub phases: Vec<PhaseSummary>,
}

impl CaseYield {
    pub fn correct_fraction(&self) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        self.correct as f64 / self.samples as f64
    }

    pub fn worst_margin(&self) -> f64 {
        self.phases
            .iter()
            .map(|p| p.worst_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YieldReport {
    pub mode: Mode,
    pub cases: Vec<CaseYield>,
    pub records: Vec<SampleRecord>,
}

impl YieldReport {
    pub fn min_correct_fraction(&self) -> f64 {
        self.cases
            .iter()
            .map(CaseYield::correct_fraction)
            .fold(1.0, f64::min)
    }

    pub fn worst_margin(&self) -> f64 {
        self.cases
            .iter()
            .map(CaseYield::worst_margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn case(&self, case: CaseCode) -> Option<&CaseYield> {
        self.cases.iter().find(|c| c.case == case)
    }
}

fn expected_bits(mode: Mode, case: CaseCode) -> Vec<bool> {
    match mode {
        Mode::RomOnly => vec![case.rom()],
        Mode::RamOnlyReliability | Mode::RamOnlyDelay => vec![case.ram()],
        Mode::DualContext => vec![case.ram(), case.rom()],
    }
}

fn run_sample(
    mode: &ModeConfig,
    case: CaseCode,
    sample: u64,
    variation: &VariationSpec,
    cfg: &SimConfig,
    model: &CompactModel,
) -> SampleRecord {
    let cell = mc_cell(CellKind::Proposed, case, sample, variation, model.params());
    let q_before = cell.q();
    let outcome = read_cell(&cell, mode, cfg, model);
    let q_after = cell.q();
    let (phases, error) = match outcome {
        Ok(out) => (
            expected_bits(mode.mode, case)
                .into_iter()
                .zip(&out.phases)
                .map(|(e, p)| PhaseSample::new(e, p.bit, p.v_strobe, p.plan.sense.v_ref))
                .collect(),
            None,
        ),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    SampleRecord {
        case,
        sample,
        phases,
        q_before,
        q_after,
        error,
    }
}

/// Reads `samples_per_case` fresh cells per case with `mode`.
///
/// Sample `s` of case `c` always gets the same devices, so the report is
/// identical for any thread count. Simulation failures are recorded on the
/// sample and counted as incorrect.
pub fn run_monte_carlo(
    mode: &ModeConfig,
    mc: &McConfig,
    cfg: &SimConfig,
    model: &CompactModel,
) -> Result<YieldReport> {
    mc.validate(mode.mode)?;
    mode.validate(model.params(), cfg)?;
    let jobs: Vec<(CaseCode, u64)> = mc
        .cases
        .iter()
        .flat_map(|&c| (0..mc.samples_per_case as u64).map(move |s| (c, s)))
        .collect();
    let records: Vec<SampleRecord> = jobs
        .par_iter()
        .map(|&(c, s)| run_sample(mode, c, s, &mc.variation, cfg, model))
        .collect();

    let n_phases = if mode.mode == Mode::DualContext { 2 } else { 1 };
    let cases = mc
        .cases
        .iter()
        .map(|&case| {
            let recs: Vec<&SampleRecord> = records.iter().filter(|r| r.case == case).collect();
            let phases = (0..n_phases)
                .map(|k| {
                    let ph: Vec<&PhaseSample> =
                        recs.iter().filter_map(|r| r.phases.get(k)).collect();
                    let v: Vec<f64> = ph.iter().map(|p| p.v_strobe).collect();
                    let (v_min, v_max, v_mean, v_std) = summary(&v);
                    PhaseSummary {
                        phase: k + 1,
                        correct: ph.iter().filter(|p| p.margin > 0.0).count(),
                        v_min,
                        v_max,
                        v_mean,
                        v_std,
                        worst_margin: ph.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min),
                    }
                })
                .collect();
            CaseYield {
                case,
                samples: recs.len(),
                correct: recs.iter().filter(|r| r.correct()).count(),
                errors: recs.iter().filter(|r| r.error.is_some()).count(),
                q_preserved: recs.iter().filter(|r| r.q_before == r.q_after).count(),
                phases,
            }
        })
        .collect();
    Ok(YieldReport {
        mode: mode.mode,
        cases,
        records,
    })
}
