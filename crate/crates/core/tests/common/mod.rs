#![allow(dead_code)]

use std::sync::OnceLock;

use rom8t::analysis::{calibrate, calibrate_baseline, CalibratedMode, CalibrationTargets};
use rom8t::device::{CompactModel, DeviceParams, VariationSpec};
use rom8t::dynamics::SimConfig;
use rom8t::protocol::{Mode, ModeConfig, PhasePlan};

pub fn model() -> CompactModel {
    CompactModel::new(DeviceParams::default()).unwrap()
}

pub fn targets() -> CalibrationTargets {
    CalibrationTargets {
        samples_per_case: 100,
        ..CalibrationTargets::default()
    }
}

pub struct Calibrated {
    pub modes: Vec<CalibratedMode>,
    pub baseline: PhasePlan,
}

impl Calibrated {
    pub fn mode(&self, m: Mode) -> &ModeConfig {
        &self
            .modes
            .iter()
            .find(|c| c.config.mode == m)
            .unwrap()
            .config
    }
}

/// Every mode calibrated once per test binary.
pub fn calibrated() -> &'static Calibrated {
    static CELL: OnceLock<Calibrated> = OnceLock::new();
    CELL.get_or_init(|| {
        let (model, cfg, var, t) = (
            model(),
            SimConfig::default(),
            VariationSpec::default(),
            targets(),
        );
        let modes = Mode::ALL
            .iter()
            .map(|&m| calibrate(&ModeConfig::template(m, cfg.vdd), &t, &var, &cfg, &model).unwrap())
            .collect();
        let tpl = ModeConfig::template(Mode::RamOnlyReliability, cfg.vdd).phase1;
        let (baseline, _) = calibrate_baseline(&tpl, &t, &var, &cfg, &model).unwrap();
        Calibrated { modes, baseline }
    })
}
