//! Read protocols: ROM-only, the two RAM-only variants and the two-phase
//! dual-context read, all sensed by one strobed comparator.

use std::fmt;
use std::str::FromStr;

use crate::device::{DeviceParams, TransistorModel};
use crate::dynamics::{simulate_read_event, BitCell, ControlWaveforms, SimConfig, VoltageTrace};
use crate::error::{Error, Result};

/// Comparator reference and strobe instant (measured from RWL rise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenseConfig {
    pub v_ref: f64,
    pub t_strobe: f64,
}

/// Only polarity the comparator supports: a discharged bit-line reads as 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    #[default]
    DischargeMeansOne,
}

/// Control settings for one evaluate phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePlan {
    pub vsl: f64,
    /// RWL high time (s).
    pub rwl_pulse: f64,
    pub sense: SenseConfig,
    pub polarity: Polarity,
    /// Bit-line re-pre-charge interval ahead of this phase (s).
    pub precharge: f64,
}

impl PhasePlan {
    pub fn new(vsl: f64, rwl_pulse: f64, v_ref: f64, t_strobe: f64) -> Self {
        Self {
            vsl,
            rwl_pulse,
            sense: SenseConfig { v_ref, t_strobe },
            polarity: Polarity::DischargeMeansOne,
            precharge: 200e-12,
        }
    }

    /// Observation window: long enough to reach both RWL fall and the strobe.
    pub fn duration(&self) -> f64 {
        self.rwl_pulse.max(self.sense.t_strobe)
    }

    pub fn waveforms(&self, cfg: &SimConfig) -> Result<ControlWaveforms> {
        ControlWaveforms::read_pulse(cfg.vdd, self.rwl_pulse, self.vsl, self.duration())
    }

    pub fn validate(&self, cfg: &SimConfig) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMode(m));
        if self.vsl.abs() > cfg.reliability_limit {
            return bad(format!(
                "|vsl| = {} V exceeds reliability limit {} V",
                self.vsl.abs(),
                cfg.reliability_limit
            ));
        }
        if !(self.sense.v_ref > 0.0 && self.sense.v_ref < cfg.vdd) {
            return bad(format!("v_ref {} V must lie in (0, vdd)", self.sense.v_ref));
        }
        if !(self.sense.t_strobe > 0.0) || !self.sense.t_strobe.is_finite() {
            return bad(format!("t_strobe {} s must be > 0", self.sense.t_strobe));
        }
        if !(self.rwl_pulse >= 0.0) || !(self.precharge >= 0.0) {
            return bad("rwl_pulse and precharge must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    RomOnly,
    RamOnlyReliability,
    RamOnlyDelay,
    DualContext,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::RomOnly,
        Mode::RamOnlyReliability,
        Mode::RamOnlyDelay,
        Mode::DualContext,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::RomOnly => "rom-only",
            Mode::RamOnlyReliability => "ram-only-reliability",
            Mode::RamOnlyDelay => "ram-only-delay",
            Mode::DualContext => "dual-context",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::InvalidMode(format!("unknown mode '{s}'")))
    }
}

/// SL level that separates the flavors when Q = 0 (V).
pub const DEFAULT_VSL_ROM: f64 = -0.45;
/// SL level that separates the flavors when Q = 1 (V).
pub const DEFAULT_VSL_DC_RAM1: f64 = 0.20;
/// Overdriven SL level of the delay-friendly RAM read (V).
pub const DEFAULT_VSL_RAM_DELAY: f64 = -0.20;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeConfig {
    pub mode: Mode,
    pub phase1: PhasePlan,
    pub phase2_if_ram0: Option<PhasePlan>,
    pub phase2_if_ram1: Option<PhasePlan>,
}

impl ModeConfig {
    pub fn single(mode: Mode, phase1: PhasePlan) -> Self {
        Self {
            mode,
            phase1,
            phase2_if_ram0: None,
            phase2_if_ram1: None,
        }
    }

    pub fn dual(phase1: PhasePlan, if_ram0: PhasePlan, if_ram1: PhasePlan) -> Self {
        Self {
            mode: Mode::DualContext,
            phase1,
            phase2_if_ram0: Some(if_ram0),
            phase2_if_ram1: Some(if_ram1),
        }
    }

    /// Uncalibrated plans with the default SL levels. The reference and
    /// strobe are placeholders until calibration replaces them.
    pub fn template(mode: Mode, vdd: f64) -> Self {
        let plan = |vsl| PhasePlan::new(vsl, 1e-9, 0.5 * vdd, 1e-9);
        match mode {
            Mode::RomOnly => Self::single(mode, plan(DEFAULT_VSL_ROM)),
            Mode::RamOnlyReliability => Self::single(mode, plan(0.0)),
            Mode::RamOnlyDelay => Self::single(mode, plan(DEFAULT_VSL_RAM_DELAY)),
            Mode::DualContext => {
                Self::dual(plan(0.0), plan(DEFAULT_VSL_ROM), plan(DEFAULT_VSL_DC_RAM1))
            }
        }
    }

    /// Every plan with a short label, in protocol order.
    pub fn plans(&self) -> Vec<(&'static str, &PhasePlan)> {
        let mut v = vec![("phase1", &self.phase1)];
        if let Some(p) = &self.phase2_if_ram0 {
            v.push(("phase2_if_ram0", p));
        }
        if let Some(p) = &self.phase2_if_ram1 {
            v.push(("phase2_if_ram1", p));
        }
        v
    }

    pub fn validate(&self, params: &DeviceParams, cfg: &SimConfig) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMode(format!("{}: {m}", self.mode)));
        for (_, p) in self.plans() {
            p.validate(cfg)?;
        }
        let dual = self.mode == Mode::DualContext;
        if dual != (self.phase2_if_ram0.is_some() && self.phase2_if_ram1.is_some()) {
            return bad("phase-II plans are required in dual-context mode and only there".into());
        }
        let vsl = self.phase1.vsl;
        match self.mode {
            Mode::RomOnly | Mode::RamOnlyDelay if vsl >= 0.0 => {
                bad(format!("phase1 vsl must be negative, got {vsl}"))
            }
            Mode::RamOnlyReliability if vsl != 0.0 => {
                bad(format!("phase1 vsl must be 0, got {vsl}"))
            }
            Mode::DualContext => {
                let (r0, r1) = (self.phase2_if_ram0.unwrap(), self.phase2_if_ram1.unwrap());
                if vsl != 0.0 {
                    return bad(format!("phase1 vsl must be 0, got {vsl}"));
                }
                if r0.vsl >= 0.0 {
                    return bad(format!(
                        "phase2_if_ram0 vsl must be negative, got {}",
                        r0.vsl
                    ));
                }
                if r1.vsl <= 0.0 {
                    return bad(format!(
                        "phase2_if_ram1 vsl must be positive, got {}",
                        r1.vsl
                    ));
                }
                if r0.vsl.abs() <= params.vt_low {
                    return bad(format!(
                        "|phase2_if_ram0 vsl| = {} V must exceed vt_low = {} V",
                        r0.vsl.abs(),
                        params.vt_low
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Comparator decision: 1 iff `v_rbl(t_strobe) < v_ref`. Equality reads 0.
pub fn sense(trace: &VoltageTrace, sc: &SenseConfig) -> Result<bool> {
    let v = strobe_voltage(trace, sc)?;
    Ok(v < sc.v_ref)
}

pub fn strobe_voltage(trace: &VoltageTrace, sc: &SenseConfig) -> Result<f64> {
    trace
        .voltage_at(sc.t_strobe)
        .ok_or(Error::StrobeOutOfRange {
            t_strobe: sc.t_strobe,
            end: trace.end_time(),
        })
}

/// Result of one evaluate phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub bit: bool,
    pub v_strobe: f64,
    pub plan: PhasePlan,
    pub trace: VoltageTrace,
}

/// Pre-charge, evaluate with `plan`, strobe.
pub fn run_phase<M: TransistorModel + ?Sized>(
    cell: &BitCell,
    plan: &PhasePlan,
    cfg: &SimConfig,
    model: &M,
) -> Result<PhaseOutcome> {
    let trace = simulate_read_event(cell, &plan.waveforms(cfg)?, cfg, model)?;
    let v_strobe = strobe_voltage(&trace, &plan.sense)?;
    Ok(PhaseOutcome {
        bit: v_strobe < plan.sense.v_ref,
        v_strobe,
        plan: *plan,
        trace,
    })
}

fn require_mode(mc: &ModeConfig, allowed: &[Mode]) -> Result<()> {
    if allowed.contains(&mc.mode) {
        Ok(())
    } else {
        Err(Error::ModeMismatch(format!(
            "operation not available in {} mode",
            mc.mode
        )))
    }
}

pub fn read_rom_only_phase<M: TransistorModel + ?Sized>(
    cell: &BitCell,
    mc: &ModeConfig,
    cfg: &SimConfig,
    model: &M,
) -> Result<PhaseOutcome> {
    require_mode(mc, &[Mode::RomOnly])?;
    if cell.q() {
        return Err(Error::Precondition(
            "ROM-only read requires Q = 0 in every cell".into(),
        ));
    }
    run_phase(cell, &mc.phase1, cfg, model)
}

pub fn read_rom_only<M: TransistorModel + ?Sized>(
    cell: &BitCell,
    mc: &ModeConfig,
    cfg: &SimConfig,
    model: &M,
) -> Result<bool> {
    read_rom_only_phase(cell, mc, cfg, model).map(|o| o.bit)
}

pub fn read_ram_only_phase<M: TransistorModel + ?Sized>(
    cell: &BitCell,
    mc: &ModeConfig,
    cfg: &SimConfig,
    model: &M,
) -> Result<PhaseOutcome> {
    require_mode(mc, &[Mode::RamOnlyReliability, Mode::RamOnlyDelay])?;
    run_phase(cell, &mc.phase1, cfg, model)
}

pub fn read_ram_only<M: TransistorModel + ?Sized>(
    cell: &BitCell,
    mc: &ModeConfig,
    cfg: &SimConfig,
    model: &M,
) -> Result<bool> {
    read_ram_only_phase(cell, mc, cfg, model).map(|o| o.bit)
}

/// Phase-II plan picked by the SL controller from the phase-I RAM bit.
pub fn sl_select(ram_bit: bool, mc: &ModeConfig) -> Result<PhasePlan> {
    require_mode(mc, &[Mode::DualContext])?;
    let plan = if ram_bit {
        mc.phase2_if_ram1
    } else {
        mc.phase2_if_ram0
    };
    plan.ok_or_else(|| Error::InvalidMode("dual-context mode without phase-II plans".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualContextOutcome {
    pub ram: bool,
    pub rom: bool,
    pub phase1: PhaseOutcome,
    pub phase2: PhaseOutcome,
}

impl DualContextOutcome {
    /// Comparator output level in phase I and phase II.
    pub fn comparator_sequence(&self) -> [bool; 2] {
        [self.phase1.bit, self.phase2.bit]
    }
}

pub fn read_dual_context_full<M: TransistorModel + ?Sized>(
    cell: &BitCell,
    mc: &ModeConfig,
    cfg: &SimConfig,
    model: &M,
) -> Result<DualContextOutcome> {
    require_mode(mc, &[Mode::DualContext])?;
    let phase1 = run_phase(cell, &mc.phase1, cfg, model)?;
    let plan2 = sl_select(phase1.bit, mc)?;
    let phase2 = run_phase(cell, &plan2, cfg, model)?;
    Ok(DualContextOutcome {
        ram: phase1.bit,
        rom: phase2.bit,
        phase1,
        phase2,
    })
}

/// Returns `(ram, rom)`.
pub fn read_dual_context<M: TransistorModel + ?Sized>(
    cell: &BitCell,
    mc: &ModeConfig,
    cfg: &SimConfig,
    model: &M,
) -> Result<(bool, bool)> {
    read_dual_context_full(cell, mc, cfg, model).map(|o| (o.ram, o.rom))
}

/// Outcome of any mode's read; `rom` is `None` for RAM-only modes and `ram`
/// is `None` for ROM-only mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadOutcome {
    pub ram: Option<bool>,
    pub rom: Option<bool>,
    pub phases: Vec<PhaseOutcome>,
}

pub fn read_cell<M: TransistorModel + ?Sized>(
    cell: &BitCell,
    mc: &ModeConfig,
    cfg: &SimConfig,
    model: &M,
) -> Result<ReadOutcome> {
    Ok(match mc.mode {
        Mode::RomOnly => {
            let o = read_rom_only_phase(cell, mc, cfg, model)?;
            ReadOutcome {
                ram: None,
                rom: Some(o.bit),
                phases: vec![o],
            }
        }
        Mode::RamOnlyReliability | Mode::RamOnlyDelay => {
            let o = read_ram_only_phase(cell, mc, cfg, model)?;
            ReadOutcome {
                ram: Some(o.bit),
                rom: None,
                phases: vec![o],
            }
        }
        Mode::DualContext => {
            let o = read_dual_context_full(cell, mc, cfg, model)?;
            ReadOutcome {
                ram: Some(o.ram),
                rom: Some(o.rom),
                phases: vec![o.phase1, o.phase2],
            }
        }
    })
}
