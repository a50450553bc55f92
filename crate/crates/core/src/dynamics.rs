//! Transient read-event simulation for a single bit-cell.
//!
//! The pre-charged read bit-line (capacitance `c_bl`) discharges through the
//! two-device read stack:
//!
//! ```text
//!   RBL ──┤upper├── x ──┤lower├── SL
//!          gate=RWL        gate=Q·VDD
//! ```
//!
//! The internal node `x` carries no capacitance; at every right-hand-side
//! evaluation it is placed by a bracketed root search so that both devices
//! conduct the same current.

use std::fmt;

use crate::device::{DeviceInstance, DeviceParams, TransistorModel, VtFlavor};
use crate::error::{Error, Result};

/// Two-bit case label: MSB is the RAM bit at Q, LSB is the ROM bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CaseCode(u8);

impl CaseCode {
    pub const C00: CaseCode = CaseCode(0);
    pub const C01: CaseCode = CaseCode(1);
    pub const C10: CaseCode = CaseCode(2);
    pub const C11: CaseCode = CaseCode(3);
    pub const ALL: [CaseCode; 4] = [Self::C00, Self::C01, Self::C10, Self::C11];

    pub fn new(ram: bool, rom: bool) -> Self {
        CaseCode(((ram as u8) << 1) | rom as u8)
    }

    pub fn from_code(code: u8) -> Option<Self> {
        (code < 4).then_some(CaseCode(code))
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn ram(self) -> bool {
        self.0 & 2 != 0
    }

    pub fn rom(self) -> bool {
        self.0 & 1 != 0
    }

    pub fn flavor(self) -> VtFlavor {
        VtFlavor::from_rom_bit(self.rom())
    }
}

impl fmt::Display for CaseCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.ram() as u8, self.rom() as u8)
    }
}

impl std::str::FromStr for CaseCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches("case-");
        match s {
            "00" => Ok(Self::C00),
            "01" => Ok(Self::C01),
            "10" => Ok(Self::C10),
            "11" => Ok(Self::C11),
            _ => Err(Error::Parse {
                line: 0,
                msg: format!("unknown case code '{s}' (expected 00, 01, 10 or 11)"),
            }),
        }
    }
}

/// One bit-cell: RAM bit at Q plus the shared flavor of its read port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitCell {
    q: bool,
    rom_flavor: VtFlavor,
    upper: DeviceInstance,
    lower: DeviceInstance,
}

impl BitCell {
    pub fn nominal(q: bool, rom_flavor: VtFlavor) -> Self {
        Self {
            q,
            rom_flavor,
            upper: DeviceInstance::nominal(rom_flavor),
            lower: DeviceInstance::nominal(rom_flavor),
        }
    }

    pub fn from_case(case: CaseCode) -> Self {
        Self::nominal(case.ram(), case.flavor())
    }

    pub fn with_devices(q: bool, upper: DeviceInstance, lower: DeviceInstance) -> Result<Self> {
        if upper.flavor != lower.flavor {
            return Err(Error::Precondition(
                "both read-port devices must share one V_T flavor".into(),
            ));
        }
        Ok(Self {
            q,
            rom_flavor: upper.flavor,
            upper,
            lower,
        })
    }

    pub fn q(&self) -> bool {
        self.q
    }

    pub fn rom_flavor(&self) -> VtFlavor {
        self.rom_flavor
    }

    pub fn rom_bit(&self) -> bool {
        self.rom_flavor.rom_bit()
    }

    pub fn upper(&self) -> &DeviceInstance {
        &self.upper
    }

    pub fn lower(&self) -> &DeviceInstance {
        &self.lower
    }

    pub fn case(&self) -> CaseCode {
        CaseCode::new(self.q, self.rom_bit())
    }

    /// Write-port update. The write path is not simulated.
    pub fn set_q(&mut self, q: bool) {
        self.q = q;
    }
}

/// Piecewise-constant signal: `levels[i]` holds on `[starts[i], starts[i+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    starts: Vec<f64>,
    levels: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn constant(level: f64) -> Self {
        Self {
            starts: vec![0.0],
            levels: vec![level],
        }
    }

    pub fn new(segments: Vec<(f64, f64)>) -> Result<Self> {
        let (starts, levels): (Vec<f64>, Vec<f64>) = segments.into_iter().unzip();
        let pwc = Self { starts, levels };
        pwc.check()?;
        Ok(pwc)
    }

    fn check(&self) -> Result<()> {
        if self.starts.first() != Some(&0.0) {
            return Err(Error::InvalidWaveform(
                "first segment must start at t = 0".into(),
            ));
        }
        if self.starts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidWaveform(
                "segment start times must be strictly increasing".into(),
            ));
        }
        if self.levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidWaveform("non-finite level".into()));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> f64 {
        let idx = self.starts.partition_point(|&s| s <= t);
        self.levels[idx.saturating_sub(1)]
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

/// Control inputs for one read event.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlWaveforms {
    pub rwl: PiecewiseConstant,
    pub vsl: PiecewiseConstant,
    pub duration: f64,
}

impl ControlWaveforms {
    /// RWL high and SL driven to `vsl` on `[0, rwl_pulse)`, both back at
    /// 0 V afterwards; observed until `duration`.
    pub fn read_pulse(vdd: f64, rwl_pulse: f64, vsl: f64, duration: f64) -> Result<Self> {
        let pulse = |level: f64| {
            if rwl_pulse <= 0.0 {
                Ok(PiecewiseConstant::constant(0.0))
            } else if rwl_pulse >= duration {
                Ok(PiecewiseConstant::constant(level))
            } else {
                PiecewiseConstant::new(vec![(0.0, level), (rwl_pulse, 0.0)])
            }
        };
        Ok(Self {
            rwl: pulse(vdd)?,
            vsl: pulse(vsl)?,
            duration,
        })
    }

    pub fn validate(&self, cfg: &SimConfig) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidWaveform(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        self.rwl.check()?;
        self.vsl.check()?;
        for &l in self.rwl.levels() {
            if l != 0.0 && l != cfg.vdd {
                return Err(Error::InvalidWaveform(format!(
                    "RWL level {l} V is neither 0 nor VDD"
                )));
            }
        }
        for &l in self.vsl.levels() {
            if l.abs() > cfg.reliability_limit {
                return Err(Error::InvalidWaveform(format!(
                    "|V_SL| = {} V exceeds reliability limit {} V",
                    l.abs(),
                    cfg.reliability_limit
                )));
            }
        }
        Ok(())
    }

    /// Segment boundaries inside `(0, duration)`, merged over both signals.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .rwl
            .starts()
            .iter()
            .chain(self.vsl.starts())
            .copied()
            .filter(|&t| t > 0.0 && t < self.duration)
            .collect();
        pts.push(self.duration);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// Electrical and numerical settings of the transient engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub vdd: f64,
    /// Read bit-line capacitance (F).
    pub c_bl: f64,
    /// Largest accepted time step (s).
    pub dt_max: f64,
    /// Global voltage error budget of the integrator (V).
    pub voltage_tolerance: f64,
    /// Largest |V| allowed across any device terminal pair (V).
    pub reliability_limit: f64,
    /// Leakage of the 6T storage core, identical for every cell (W).
    pub core_leakage: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            vdd: 0.8,
            c_bl: 20e-15,
            dt_max: 10e-12,
            voltage_tolerance: 1e-4,
            reliability_limit: 1.3,
            core_leakage: 10e-9,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("vdd", self.vdd),
            ("c_bl", self.c_bl),
            ("dt_max", self.dt_max),
            ("voltage_tolerance", self.voltage_tolerance),
            ("reliability_limit", self.reliability_limit),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.core_leakage >= 0.0) {
            return Err(Error::InvalidConfig("core_leakage must be >= 0".into()));
        }
        Ok(())
    }

    /// Bisection width for the internal stack node.
    fn node_tolerance(&self) -> f64 {
        (self.voltage_tolerance * 1e-5).min(1e-9)
    }
}

/// Bit-line voltage over one read event plus its energy bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTrace {
    pub times: Vec<f64>,
    pub v_rbl: Vec<f64>,
    /// Pre-charge restore energy plus work done by the SL rail (J).
    pub energy_drawn: f64,
    /// Charge pulled from VDD to restore the pre-charge (C).
    pub supply_charge: f64,
    /// Charge delivered into the SL rail (C).
    pub sl_charge: f64,
    /// Largest terminal-pair voltage seen by either device (V).
    pub max_terminal_voltage: f64,
    pub reliability_warning: bool,
    /// Largest relative upper/lower current mismatch at accepted steps.
    pub max_stack_mismatch: f64,
}

impl VoltageTrace {
    pub fn final_voltage(&self) -> f64 {
        *self.v_rbl.last().expect("trace is never empty")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trace is never empty")
    }

    /// Linear interpolation; `None` outside `[0, end_time]`.
    pub fn voltage_at(&self, t: f64) -> Option<f64> {
        if !(t >= 0.0) || t > self.end_time() {
            return None;
        }
        let idx = self.times.partition_point(|&s| s <= t);
        if idx >= self.times.len() {
            return Some(self.final_voltage());
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let (v0, v1) = (self.v_rbl[idx - 1], self.v_rbl[idx]);
        Some(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }

    /// First time the trace falls below `level`, by linear interpolation.
    pub fn crossing_time(&self, level: f64) -> Option<f64> {
        self.times
            .windows(2)
            .zip(self.v_rbl.windows(2))
            .find(|(_, v)| v[0] >= level && v[1] < level)
            .map(|(t, v)| t[0] + (t[1] - t[0]) * (v[0] - level) / (v[0] - v[1]))
    }

    /// CSV with columns `time_s,v_rbl_V`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time_s", "v_rbl_V"])?;
        for (t, v) in self.times.iter().zip(&self.v_rbl) {
            wr.write_record([t.to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Bias of the read stack at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackBias {
    pub v_rbl: f64,
    pub rwl: f64,
    pub vsl: f64,
    /// Gate of the lower device (Q·VDD).
    pub q_gate: f64,
}

/// Solved operating point of the read stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackPoint {
    pub node: f64,
    pub current: f64,
    pub upper_current: f64,
    pub lower_current: f64,
}

impl StackPoint {
    pub fn mismatch(&self) -> f64 {
        let scale = self.upper_current.max(self.lower_current);
        if scale > 0.0 {
            (self.upper_current - self.lower_current).abs() / scale
        } else {
            0.0
        }
    }

    /// Largest terminal-pair voltage across either device.
    fn max_terminal_voltage(&self, b: &StackBias) -> f64 {
        let x = self.node;
        [
            b.rwl - x,
            b.v_rbl - x,
            b.rwl - b.v_rbl,
            b.q_gate - b.vsl,
            x - b.vsl,
            b.q_gate - x,
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

const MAX_ITERATIONS: usize = 200;

/// Places the internal node so both devices carry equal current.
///
/// `hint` is a starting guess, typically the node of a nearby bias point.
pub fn solve_stack<M: TransistorModel + ?Sized>(
    model: &M,
    cell: &BitCell,
    bias: &StackBias,
    tol: f64,
    hint: Option<f64>,
) -> Result<StackPoint> {
    solve_stack_warm(model, cell, bias, tol, hint.map(|h| (h, f64::NAN))).map(|(p, _)| p)
}

/// Safeguarded secant iteration on `ln(I_upper) - ln(I_lower)`, which is
/// monotone in the node voltage and close to linear. Returns the point and
/// the last slope estimate for warm-starting the next solve.
fn solve_stack_warm<M: TransistorModel + ?Sized>(
    model: &M,
    cell: &BitCell,
    bias: &StackBias,
    tol: f64,
    warm: Option<(f64, f64)>,
) -> Result<(StackPoint, f64)> {
    let (lo_bound, hi_bound) = (bias.vsl, bias.v_rbl);
    if hi_bound - lo_bound <= 0.0 {
        let p = StackPoint {
            node: hi_bound,
            current: 0.0,
            upper_current: 0.0,
            lower_current: 0.0,
        };
        return Ok((p, f64::NAN));
    }
    let eval = |x: f64| {
        let iu = model.drain_current(bias.rwl - x, bias.v_rbl - x, &cell.upper);
        let il = model.drain_current(bias.q_gate - bias.vsl, x - bias.vsl, &cell.lower);
        (iu, il, iu.ln() - il.ln())
    };
    let done = |x: f64, iu: f64, il: f64, slope: f64| {
        let p = StackPoint {
            node: x,
            current: 0.5 * (iu + il),
            upper_current: iu,
            lower_current: il,
        };
        Ok((p, slope))
    };
    let fail = || Err(Error::NonConvergence { time: f64::NAN });

    // g > 0 below the root, g < 0 above it.
    let (mut lo, mut hi) = (lo_bound, hi_bound);
    let guard = 0.25 * tol;
    let width = hi_bound - lo_bound;
    let (mut x0, mut slope) = match warm {
        Some((h, s)) => {
            let edge = guard.min(0.25 * width);
            (h.clamp(lo_bound + edge, hi_bound - edge), s)
        }
        None => (0.5 * (lo_bound + hi_bound), f64::NAN),
    };
    let (mut iu0, mut il0, mut g0) = eval(x0);
    let mut x_prev = f64::NAN;
    let mut g_prev = f64::NAN;
    for _ in 0..MAX_ITERATIONS {
        if g0.is_nan() {
            return fail();
        }
        if g0 == 0.0 {
            return done(x0, iu0, il0, slope);
        }
        if g0 > 0.0 {
            lo = x0;
        } else {
            hi = x0;
        }
        if x_prev.is_finite() && g_prev.is_finite() && g0.is_finite() && g0 != g_prev {
            slope = (g0 - g_prev) / (x0 - x_prev);
        }
        let mut x1 = if g0.is_finite() && slope.is_finite() && slope < 0.0 {
            x0 - g0 / slope
        } else if g0.is_finite() {
            x0 + if g0 > 0.0 { 1e-4 } else { -1e-4 }
        } else {
            f64::NAN
        };
        // Fall back to bisection whenever the step leaves the bracket.
        if !(x1 > lo && x1 < hi) {
            x1 = 0.5 * (lo + hi);
        }
        let converged = (x1 - x0).abs() < guard || hi - lo <= tol;
        let (iu, il, g1) = eval(x1);
        if converged || g1 == 0.0 {
            if !(iu.is_finite() && il.is_finite()) {
                return fail();
            }
            return done(x1, iu, il, slope);
        }
        (x_prev, g_prev) = (x0, g0);
        (x0, iu0, il0, g0) = (x1, iu, il, g1);
    }
    fail()
}

struct Rhs<'a, M: TransistorModel + ?Sized> {
    model: &'a M,
    cell: &'a BitCell,
    cfg: &'a SimConfig,
    rwl: f64,
    vsl: f64,
    q_gate: f64,
    tol: f64,
    hint: Option<(f64, f64)>,
    time: f64,
}

impl<M: TransistorModel + ?Sized> Rhs<'_, M> {
    fn bias(&self, v: f64) -> StackBias {
        StackBias {
            v_rbl: v,
            rwl: self.rwl,
            vsl: self.vsl,
            q_gate: self.q_gate,
        }
    }

    fn point(&mut self, v: f64) -> Result<StackPoint> {
        let (p, slope) =
            solve_stack_warm(self.model, self.cell, &self.bias(v), self.tol, self.hint)
                .map_err(|_| Error::NonConvergence { time: self.time })?;
        self.hint = Some((p.node, slope));
        Ok(p)
    }

    fn eval(&mut self, v: f64) -> Result<f64> {
        Ok(-self.point(v)?.current / self.cfg.c_bl)
    }
}

/// Integrates `c_bl·dV/dt = -I_stack(V, t)` from a pre-charged bit-line.
///
/// Third-order Bogacki-Shampine steps with the embedded second-order
/// estimate for error control. Steps never straddle a
/// control-waveform edge.
pub fn simulate_read_event<M: TransistorModel + ?Sized>(
    cell: &BitCell,
    wave: &ControlWaveforms,
    cfg: &SimConfig,
    model: &M,
) -> Result<VoltageTrace> {
    cfg.validate()?;
    wave.validate(cfg)?;

    let q_gate = if cell.q { cfg.vdd } else { 0.0 };
    let mut times = vec![0.0];
    let mut v_rbl = vec![cfg.vdd];
    let mut t = 0.0;
    let mut v = cfg.vdd;
    let mut h = cfg.dt_max;
    let mut sl_energy = 0.0;
    let mut sl_charge = 0.0;
    let mut max_terminal = 0.0f64;
    let mut max_mismatch = 0.0f64;
    let mut hint = None;
    let h_min = cfg.dt_max * 1e-9;
    let snap = cfg.dt_max * 1e-6;

    let mut seg_start = 0.0;
    for seg_end in wave.breakpoints() {
        let mut rhs = Rhs {
            model,
            cell,
            cfg,
            rwl: wave.rwl.at(seg_start),
            vsl: wave.vsl.at(seg_start),
            q_gate,
            tol: cfg.node_tolerance(),
            hint,
            time: t,
        };
        let floor = rhs.vsl.min(v);
        let p0 = rhs.point(v)?;
        max_terminal = max_terminal.max(p0.max_terminal_voltage(&rhs.bias(v)));
        max_mismatch = max_mismatch.max(p0.mismatch());
        let mut f0 = -p0.current / cfg.c_bl;

        while seg_end - t > snap {
            h = h.min(cfg.dt_max).min(seg_end - t);
            rhs.time = t;
            // Bogacki-Shampine 3(2); the last stage is the next step's first.
            let k2 = rhs.eval(v + 0.5 * h * f0)?;
            let k3 = rhs.eval(v + 0.75 * h * k2)?;
            let y = v + h * (2.0 / 9.0 * f0 + 1.0 / 3.0 * k2 + 4.0 / 9.0 * k3);
            let p = rhs.point(y)?;
            let k4 = -p.current / cfg.c_bl;
            let err =
                (h * (-5.0 / 72.0 * f0 + 1.0 / 12.0 * k2 + 1.0 / 9.0 * k3 - 0.125 * k4)).abs();
            let budget = 0.25 * cfg.voltage_tolerance * h / wave.duration;
            if err <= budget || h <= h_min {
                if h <= h_min && err > budget {
                    return Err(Error::NonConvergence { time: t });
                }
                let v_new = y.max(floor).min(v);
                let dv = v - v_new;
                sl_charge += cfg.c_bl * dv;
                sl_energy += rhs.vsl.abs() * cfg.c_bl * dv;
                t = if seg_end - (t + h) <= snap {
                    seg_end
                } else {
                    t + h
                };
                v = v_new;
                times.push(t);
                v_rbl.push(v);

                let p = if v_new == y { p } else { rhs.point(v)? };
                max_terminal = max_terminal.max(p.max_terminal_voltage(&rhs.bias(v)));
                max_mismatch = max_mismatch.max(p.mismatch());
                f0 = -p.current / cfg.c_bl;

                let grow = if err > 0.0 {
                    (0.9 * (budget / err).sqrt()).clamp(0.2, 2.0)
                } else {
                    2.0
                };
                h *= grow;
            } else {
                h *= (0.9 * (budget / err).sqrt()).clamp(0.1, 0.9);
                h = h.max(h_min);
            }
        }
        hint = rhs.hint;
        seg_start = seg_end;
    }

    let supply_charge = cfg.c_bl * (cfg.vdd - v);
    Ok(VoltageTrace {
        times,
        v_rbl,
        energy_drawn: cfg.vdd * supply_charge + sl_energy,
        supply_charge,
        sl_charge,
        reliability_warning: max_terminal > cfg.reliability_limit,
        max_terminal_voltage: max_terminal,
        max_stack_mismatch: max_mismatch,
    })
}

/// Standby power of one cell: read-stack leakage times VDD plus the 6T core
/// constant. Standby bias is RWL = 0, SL = 0, RBL = VDD.
pub fn leakage_power<M: TransistorModel + ?Sized>(
    cell: &BitCell,
    cfg: &SimConfig,
    model: &M,
) -> Result<f64> {
    let bias = StackBias {
        v_rbl: cfg.vdd,
        rwl: 0.0,
        vsl: 0.0,
        q_gate: if cell.q { cfg.vdd } else { 0.0 },
    };
    let p = solve_stack(model, cell, &bias, cfg.node_tolerance(), None)?;
    Ok(p.current * cfg.vdd + cfg.core_leakage)
}

/// Regular-V_T cell used as the normalization reference.
///
/// Its devices carry the high-V_T flavor tag shifted by
/// `vt_regular - vt_high`, so the nominal threshold equals `vt_regular`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineCell {
    vt_shift: f64,
}

impl BaselineCell {
    pub fn new(params: &DeviceParams) -> Self {
        Self {
            vt_shift: params.vt_regular - params.vt_high,
        }
    }

    pub fn threshold(&self, params: &DeviceParams) -> f64 {
        params.vt_high + self.vt_shift
    }

    /// Baseline cell with extra per-device ΔV_T on top of the regular V_T.
    pub fn cell(&self, q: bool, delta_upper: f64, delta_lower: f64) -> BitCell {
        let dev = |d: f64| DeviceInstance {
            flavor: VtFlavor::HighVt,
            delta_vt: self.vt_shift + d,
        };
        BitCell {
            q,
            rom_flavor: VtFlavor::HighVt,
            upper: dev(delta_upper),
            lower: dev(delta_lower),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{CompactModel, DeviceParams};

    fn model() -> CompactModel {
        CompactModel::new(DeviceParams::default()).unwrap()
    }

    struct ConstantCurrent(f64);

    impl TransistorModel for ConstantCurrent {
        fn drain_current(&self, _vgs: f64, _vds: f64, _d: &DeviceInstance) -> f64 {
            self.0
        }
    }

    fn wave(cfg: &SimConfig, vsl: f64, duration: f64) -> ControlWaveforms {
        ControlWaveforms::read_pulse(cfg.vdd, duration, vsl, duration).unwrap()
    }

    #[test]
    fn case_code_bits() {
        assert_eq!(CaseCode::new(true, false), CaseCode::C10);
        assert_eq!(CaseCode::C01.flavor(), VtFlavor::LowVt);
        assert_eq!(CaseCode::C10.to_string(), "10");
        assert_eq!("case-11".parse::<CaseCode>().unwrap(), CaseCode::C11);
        assert!("12".parse::<CaseCode>().is_err());
        for c in CaseCode::ALL {
            assert_eq!(BitCell::from_case(c).case(), c);
        }
    }

    #[test]
    fn mixed_flavors_rejected() {
        let r = BitCell::with_devices(
            true,
            DeviceInstance::nominal(VtFlavor::LowVt),
            DeviceInstance::nominal(VtFlavor::HighVt),
        );
        assert!(r.is_err());
    }

    #[test]
    fn pwc_lookup() {
        let p = PiecewiseConstant::new(vec![(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert_eq!(p.at(0.0), 1.0);
        assert_eq!(p.at(1.999), 1.0);
        assert_eq!(p.at(2.0), 3.0);
        assert!(PiecewiseConstant::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(PiecewiseConstant::new(vec![(1.0, 1.0)]).is_err());
    }

    #[test]
    fn gated_off_port_holds_charge() {
        let cfg = SimConfig::default();
        let m = model();
        for case in CaseCode::ALL {
            let w = ControlWaveforms::read_pulse(cfg.vdd, 0.0, 0.0, 5e-9).unwrap();
            let tr = simulate_read_event(&BitCell::from_case(case), &w, &cfg, &m).unwrap();
            assert_eq!(tr.v_rbl[0], cfg.vdd);
            assert!(cfg.vdd - tr.final_voltage() <= 1e-3, "{case}");
        }
    }

    #[test]
    fn constant_current_is_linear_ramp() {
        let cfg = SimConfig::default();
        let i0 = 2e-6;
        let dur = 4e-9;
        let tr = simulate_read_event(
            &BitCell::from_case(CaseCode::C11),
            &wave(&cfg, 0.0, dur),
            &cfg,
            &ConstantCurrent(i0),
        )
        .unwrap();
        for (t, v) in tr.times.iter().zip(&tr.v_rbl) {
            let want = cfg.vdd - i0 * t / cfg.c_bl;
            assert!((v - want).abs() < 1e-3, "t={t}");
        }
        assert!((tr.end_time() - dur).abs() < 1e-18);
    }

    #[test]
    fn four_case_ordering_at_small_negative_sl() {
        let cfg = SimConfig::default();
        let m = model();
        let dur = 2e-9;
        let traces: Vec<_> = CaseCode::ALL
            .iter()
            .map(|&c| {
                simulate_read_event(&BitCell::from_case(c), &wave(&cfg, -0.10, dur), &cfg, &m)
                    .unwrap()
            })
            .collect();
        for k in 1..=200 {
            let t = dur * k as f64 / 200.0;
            let v: Vec<f64> = traces.iter().map(|tr| tr.voltage_at(t).unwrap()).collect();
            assert!(v[0] > v[1] && v[1] > v[2] && v[2] > v[3], "t={t} {v:?}");
        }
    }

    #[test]
    fn energy_matches_restore_at_grounded_sl() {
        let cfg = SimConfig::default();
        let m = model();
        let tr = simulate_read_event(
            &BitCell::from_case(CaseCode::C11),
            &wave(&cfg, 0.0, 1e-9),
            &cfg,
            &m,
        )
        .unwrap();
        let restore = cfg.c_bl * cfg.vdd * (cfg.vdd - tr.final_voltage());
        assert!((tr.energy_drawn - restore).abs() <= 1e-3 * restore);

        let tr = simulate_read_event(
            &BitCell::from_case(CaseCode::C01),
            &wave(&cfg, -0.45, 1e-9),
            &cfg,
            &m,
        )
        .unwrap();
        let restore = cfg.c_bl * cfg.vdd * (cfg.vdd - tr.final_voltage());
        assert!(tr.energy_drawn >= restore);
        assert!((tr.sl_charge - tr.supply_charge).abs() <= 1e-9 * tr.supply_charge);
    }

    #[test]
    fn halving_dt_max_converges() {
        let m = model();
        let cfg = SimConfig::default();
        let fine = SimConfig {
            dt_max: cfg.dt_max / 2.0,
            ..cfg
        };
        for case in CaseCode::ALL {
            for vsl in [0.0, -0.45, 0.2] {
                let c = BitCell::from_case(case);
                let a = simulate_read_event(&c, &wave(&cfg, vsl, 2e-9), &cfg, &m).unwrap();
                let b = simulate_read_event(&c, &wave(&cfg, vsl, 2e-9), &fine, &m).unwrap();
                assert!(
                    (a.final_voltage() - b.final_voltage()).abs() < cfg.voltage_tolerance,
                    "{case} {vsl}"
                );
            }
        }
    }

    #[test]
    fn stack_currents_agree() {
        let m = model();
        let cfg = SimConfig::default();
        for case in CaseCode::ALL {
            for vsl in [-0.45, -0.1, 0.0, 0.2] {
                let tr = simulate_read_event(
                    &BitCell::from_case(case),
                    &wave(&cfg, vsl, 1e-9),
                    &cfg,
                    &m,
                )
                .unwrap();
                assert!(
                    tr.max_stack_mismatch < 1e-4,
                    "{case} {vsl} {}",
                    tr.max_stack_mismatch
                );
                let floor = vsl.min(0.0);
                assert!(tr.v_rbl.iter().all(|&v| v >= floor));
                assert!(tr.v_rbl.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }

    #[test]
    fn reliability_limit_flags_without_failing() {
        let m = model();
        let cfg = SimConfig {
            reliability_limit: 1.0,
            ..SimConfig::default()
        };
        let tr = simulate_read_event(
            &BitCell::from_case(CaseCode::C10),
            &wave(&cfg, -0.45, 0.5e-9),
            &cfg,
            &m,
        )
        .unwrap();
        assert!(tr.reliability_warning);
        assert!(tr.max_terminal_voltage > 1.0);
    }

    #[test]
    fn invalid_waveform_rejected() {
        let m = model();
        let cfg = SimConfig::default();
        let w = ControlWaveforms {
            rwl: PiecewiseConstant::constant(0.5),
            vsl: PiecewiseConstant::constant(0.0),
            duration: 1e-9,
        };
        let c = BitCell::from_case(CaseCode::C00);
        assert!(simulate_read_event(&c, &w, &cfg, &m).is_err());
        let w = ControlWaveforms::read_pulse(cfg.vdd, 1e-9, -2.0, 1e-9).unwrap();
        assert!(simulate_read_event(&c, &w, &cfg, &m).is_err());
    }

    #[test]
    fn sl_is_driven_only_while_rwl_is_high() {
        let w = ControlWaveforms::read_pulse(0.8, 1e-9, -0.3, 2e-9).unwrap();
        assert_eq!((w.rwl.at(0.5e-9), w.vsl.at(0.5e-9)), (0.8, -0.3));
        assert_eq!((w.rwl.at(1.5e-9), w.vsl.at(1.5e-9)), (0.0, 0.0));
        let w = ControlWaveforms::read_pulse(0.8, 0.0, -0.3, 2e-9).unwrap();
        assert_eq!((w.rwl.at(0.0), w.vsl.at(0.0)), (0.0, 0.0));
    }

    #[test]
    fn low_vt_leaks_more() {
        let m = model();
        let cfg = SimConfig::default();
        for q in [false, true] {
            let lo = leakage_power(&BitCell::nominal(q, VtFlavor::LowVt), &cfg, &m).unwrap();
            let hi = leakage_power(&BitCell::nominal(q, VtFlavor::HighVt), &cfg, &m).unwrap();
            assert!(lo > hi);
        }
    }

    #[test]
    fn trace_interpolation() {
        let tr = VoltageTrace {
            times: vec![0.0, 1.0, 2.0],
            v_rbl: vec![1.0, 0.5, 0.0],
            energy_drawn: 0.0,
            supply_charge: 0.0,
            sl_charge: 0.0,
            max_terminal_voltage: 0.0,
            reliability_warning: false,
            max_stack_mismatch: 0.0,
        };
        assert_eq!(tr.voltage_at(0.5), Some(0.75));
        assert_eq!(tr.voltage_at(2.0), Some(0.0));
        assert_eq!(tr.voltage_at(2.1), None);
        assert_eq!(tr.crossing_time(0.25), Some(1.5));
        let mut out = Vec::new();
        tr.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out)
            .unwrap()
            .starts_with("time_s,v_rbl_V\n0,1\n"));
    }
}
