//! Read-port transistor model.
//!
//! The drain current is a single EKV-style expression that interpolates
//! between exponential subthreshold conduction and square-law strong
//! inversion:
//!
//! ```text
//! F(x)   = ln²(1 + exp(x / 2))
//! a      = (vgs - vt_eff) / (n·φt)
//! b      = a - vds / φt
//! I      = k·(2·n·φt)²·(F(a) - F(b)) + I_floor·(1 - exp(-vds / φt))
//! vt_eff = vt_nominal(flavor) + ΔV_T - η·vds
//! ```
//!
//! `n` follows from the subthreshold swing (`S = n·φt·ln 10`) and `k` is the
//! strong-inversion saturation coefficient, so that `I → k·(vgs - vt)²` well
//! above threshold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const BOLTZMANN_OVER_Q: f64 = 8.617_333_262e-5;

/// Threshold flavor of a read-port device. The flavor is the ROM bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VtFlavor {
    /// ROM bit 0.
    HighVt,
    /// ROM bit 1.
    LowVt,
}

impl VtFlavor {
    pub fn from_rom_bit(bit: bool) -> Self {
        if bit {
            VtFlavor::LowVt
        } else {
            VtFlavor::HighVt
        }
    }

    pub fn rom_bit(self) -> bool {
        matches!(self, VtFlavor::LowVt)
    }
}

/// Compact-model parameters shared by every read-port device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    /// Nominal threshold of the low-V_T flavor (V).
    pub vt_low: f64,
    /// Nominal threshold of the high-V_T flavor (V).
    pub vt_high: f64,
    /// Threshold of the single-flavor reference cell used for normalization (V).
    pub vt_regular: f64,
    /// Subthreshold swing (V/decade).
    pub subthreshold_swing: f64,
    /// Strong-inversion saturation coefficient (A/V²).
    pub transconductance_k: f64,
    /// Drain-induced barrier lowering (V/V).
    pub dibl_factor: f64,
    /// Off-state floor current reached at large vds (A).
    pub off_floor_current: f64,
    /// Device temperature (K).
    pub temperature: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            vt_low: 0.25,
            vt_high: 0.60,
            vt_regular: 0.425,
            subthreshold_swing: 0.080,
            transconductance_k: 100e-6,
            dibl_factor: 0.02,
            off_floor_current: 1e-12,
            temperature: 300.0,
        }
    }
}

impl DeviceParams {
    pub fn thermal_voltage(&self) -> f64 {
        BOLTZMANN_OVER_Q * self.temperature
    }

    pub fn vt_nominal(&self, flavor: VtFlavor) -> f64 {
        match flavor {
            VtFlavor::HighVt => self.vt_high,
            VtFlavor::LowVt => self.vt_low,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        let finite = [
            self.vt_low,
            self.vt_high,
            self.vt_regular,
            self.subthreshold_swing,
            self.transconductance_k,
            self.dibl_factor,
            self.off_floor_current,
            self.temperature,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter".into());
        }
        if !(self.vt_low > 0.0) {
            return bad(format!("vt_low must be > 0, got {}", self.vt_low));
        }
        if !(self.vt_high > self.vt_low) {
            return bad(format!(
                "vt_high ({}) must exceed vt_low ({})",
                self.vt_high, self.vt_low
            ));
        }
        if !(self.vt_regular > 0.0) {
            return bad(format!("vt_regular must be > 0, got {}", self.vt_regular));
        }
        if !(self.temperature > 0.0) {
            return bad(format!("temperature must be > 0, got {}", self.temperature));
        }
        // Thermal limit: φt·ln10, i.e. ~59.6 mV/dec at 300 K; 1% slack.
        let limit = self.thermal_voltage() * std::f64::consts::LN_10 * 0.99;
        if self.subthreshold_swing < limit {
            return bad(format!(
                "subthreshold swing {} V/dec below thermal limit {:.4} V/dec",
                self.subthreshold_swing, limit
            ));
        }
        if !(self.transconductance_k > 0.0) {
            return bad("transconductance_k must be > 0".into());
        }
        if !(self.off_floor_current > 0.0) {
            return bad("off_floor_current must be > 0".into());
        }
        if self.dibl_factor < 0.0 {
            return bad("dibl_factor must be >= 0".into());
        }
        let n = self.subthreshold_swing / (self.thermal_voltage() * std::f64::consts::LN_10);
        if self.dibl_factor >= n {
            // vds monotonicity needs η < n.
            return bad(format!(
                "dibl_factor {} must stay below slope factor {n:.3}",
                self.dibl_factor
            ));
        }
        Ok(())
    }
}

/// One read-port transistor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceInstance {
    pub flavor: VtFlavor,
    /// Threshold offset from the flavor's nominal value (V).
    pub delta_vt: f64,
}

impl DeviceInstance {
    pub fn nominal(flavor: VtFlavor) -> Self {
        Self {
            flavor,
            delta_vt: 0.0,
        }
    }

    pub fn effective_vt(&self, params: &DeviceParams) -> f64 {
        params.vt_nominal(self.flavor) + self.delta_vt
    }
}

/// Anything that can supply a drain current for a read-port device.
///
/// The transient engine only talks to this trait, so the compact model can be
/// swapped for analytic stubs in tests.
pub trait TransistorModel: Sync {
    /// Drain current (A) for `vds >= 0`.
    fn drain_current(&self, vgs: f64, vds: f64, device: &DeviceInstance) -> f64;
}

/// Validated compact model with precomputed constants.
#[derive(Debug, Clone, Copy)]
pub struct CompactModel {
    params: DeviceParams,
    phi_t: f64,
    n_phi_t: f64,
    prefactor: f64,
}

impl CompactModel {
    pub fn new(params: DeviceParams) -> Result<Self> {
        params.validate()?;
        let phi_t = params.thermal_voltage();
        let n = params.subthreshold_swing / (phi_t * std::f64::consts::LN_10);
        let n_phi_t = n * phi_t;
        Ok(Self {
            params,
            phi_t,
            n_phi_t,
            prefactor: params.transconductance_k * (2.0 * n_phi_t).powi(2),
        })
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    /// Subthreshold slope factor `n`.
    pub fn slope_factor(&self) -> f64 {
        self.n_phi_t / self.phi_t
    }

    pub fn thermal_voltage(&self) -> f64 {
        self.phi_t
    }

    pub fn current(&self, vgs: f64, vds: f64, device: &DeviceInstance) -> f64 {
        let vds = vds.max(0.0);
        let vt = device.effective_vt(&self.params) - self.params.dibl_factor * vds;
        let a = (vgs - vt) / self.n_phi_t;
        let b = a - vds / self.phi_t;
        let channel = self.prefactor * (interp(a) - interp(b));
        let floor = self.params.off_floor_current * -(-vds / self.phi_t).exp_m1();
        channel.max(0.0) + floor
    }
}

impl TransistorModel for CompactModel {
    #[inline]
    fn drain_current(&self, vgs: f64, vds: f64, device: &DeviceInstance) -> f64 {
        self.current(vgs, vds, device)
    }
}

/// `ln²(1 + e^{x/2})`, evaluated without overflow.
#[inline]
fn interp(x: f64) -> f64 {
    let y = 0.5 * x;
    let sp = y.max(0.0) + (-y.abs()).exp().ln_1p();
    sp * sp
}

/// Validates `params` and evaluates the compact model once.
pub fn drain_current(
    vgs: f64,
    vds: f64,
    device: &DeviceInstance,
    params: &DeviceParams,
) -> Result<f64> {
    if vds < 0.0 {
        return Err(Error::Precondition(format!("vds must be >= 0, got {vds}")));
    }
    Ok(CompactModel::new(*params)?.current(vgs, vds, device))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VariationDistribution {
    #[default]
    Gaussian,
}

/// Local threshold-voltage mismatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationSpec {
    /// Standard deviation of ΔV_T (V).
    pub sigma_vt: f64,
    pub seed: u64,
    pub distribution: VariationDistribution,
}

impl Default for VariationSpec {
    fn default() -> Self {
        Self {
            sigma_vt: 0.025,
            seed: 1,
            distribution: VariationDistribution::Gaussian,
        }
    }
}

impl VariationSpec {
    pub fn nominal() -> Self {
        Self {
            sigma_vt: 0.0,
            ..Self::default()
        }
    }

    pub fn with_sigma(self, sigma_vt: f64) -> Self {
        Self { sigma_vt, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_vt >= 0.0) || !self.sigma_vt.is_finite() {
            return Err(Error::InvalidParams(format!(
                "sigma_vt must be finite and >= 0, got {}",
                self.sigma_vt
            )));
        }
        Ok(())
    }
}

/// Draws ΔV_T for a device whose nominal threshold is `vt_nominal`.
///
/// Each `draw_index` selects its own ChaCha stream under `var.seed`, so the
/// value depends only on `(seed, draw_index)`. Draws that would leave the
/// effective threshold non-positive are redrawn from the same stream.
pub fn sample_delta_vt(var: &VariationSpec, draw_index: u64, vt_nominal: f64) -> f64 {
    if var.sigma_vt == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(var.seed);
    rng.set_stream(draw_index);
    loop {
        let z: f64 = match var.distribution {
            VariationDistribution::Gaussian => StandardNormal.sample(&mut rng),
        };
        let delta = var.sigma_vt * z;
        if vt_nominal + delta > 0.0 {
            return delta;
        }
    }
}

pub fn sample_device(
    flavor: VtFlavor,
    var: &VariationSpec,
    draw_index: u64,
    params: &DeviceParams,
) -> DeviceInstance {
    DeviceInstance {
        flavor,
        delta_vt: sample_delta_vt(var, draw_index, params.vt_nominal(flavor)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> CompactModel {
        CompactModel::new(DeviceParams::default()).unwrap()
    }

    #[test]
    fn zero_overdrive_is_off() {
        let p = DeviceParams::default();
        let i = drain_current(0.0, 0.8, &DeviceInstance::nominal(VtFlavor::HighVt), &p).unwrap();
        assert!(i <= 10.0 * p.off_floor_current, "{i}");
    }

    #[test]
    fn low_vt_beats_high_vt_everywhere() {
        let m = model();
        let lo = DeviceInstance::nominal(VtFlavor::LowVt);
        let hi = DeviceInstance::nominal(VtFlavor::HighVt);
        for i in 0..=260 {
            let vgs = -0.5 + i as f64 * 0.005;
            assert!(
                m.current(vgs, 0.8, &lo) > m.current(vgs, 0.8, &hi),
                "vgs={vgs}"
            );
        }
    }

    /// Independent re-evaluation of the closed form with the textbook
    /// `ln(1 + e^u)` (no overflow guard needed in this range).
    fn oracle(vgs: f64, vds: f64, vt: f64, p: &DeviceParams) -> f64 {
        let phi_t = 8.617_333_262e-5 * p.temperature;
        let n = p.subthreshold_swing / (phi_t * 10f64.ln());
        let vt = vt - p.dibl_factor * vds;
        let f = |u: f64| (1.0 + (u / 2.0).exp()).ln().powi(2);
        let a = (vgs - vt) / (n * phi_t);
        let b = (vgs - vt - n * vds) / (n * phi_t);
        p.transconductance_k * (2.0 * n * phi_t).powi(2) * (f(a) - f(b))
            + p.off_floor_current * (1.0 - (-vds / phi_t).exp())
    }

    #[test]
    fn flavor_separation_at_045() {
        let p = DeviceParams::default();
        let m = model();
        let lo = m.current(0.45, 0.8, &DeviceInstance::nominal(VtFlavor::LowVt));
        let hi = m.current(0.45, 0.8, &DeviceInstance::nominal(VtFlavor::HighVt));
        let lo_ref = oracle(0.45, 0.8, p.vt_low, &p);
        let hi_ref = oracle(0.45, 0.8, p.vt_high, &p);
        assert!((lo - lo_ref).abs() <= 1e-12 * lo_ref);
        assert!((hi - hi_ref).abs() <= 1e-12 * hi_ref);
        assert!(lo >= 10.0 * hi, "lo {lo} hi {hi}");
    }

    #[test]
    fn matches_closed_form_on_grid() {
        let p = DeviceParams::default();
        let m = model();
        for flavor in [VtFlavor::LowVt, VtFlavor::HighVt] {
            for i in 0..=30 {
                for j in 0..=13 {
                    let vgs = -0.5 + 0.06 * i as f64;
                    let vds = 0.1 * j as f64;
                    let got = m.current(vgs, vds, &DeviceInstance::nominal(flavor));
                    let want = oracle(vgs, vds, p.vt_nominal(flavor), &p);
                    assert!((got - want).abs() <= 1e-9 * want.max(1e-18), "{vgs} {vds}");
                }
            }
        }
    }

    #[test]
    fn strong_inversion_limit_is_square_law() {
        let p = DeviceParams::default();
        let m = model();
        let d = DeviceInstance::nominal(VtFlavor::LowVt);
        // Deep saturation; DIBL shifts vt by η·vds.
        let vds = 1.2;
        let vgs = 1.25;
        let ov = vgs - (p.vt_low - p.dibl_factor * vds);
        let i = m.current(vgs, vds, &d);
        let sq = p.transconductance_k * ov * ov;
        assert!((i - sq).abs() / sq < 0.02, "{i} vs {sq}");
    }

    #[test]
    fn subthreshold_slope_matches_swing() {
        let p = DeviceParams::default();
        let m = model();
        let d = DeviceInstance::nominal(VtFlavor::HighVt);
        let i1 = m.current(0.10, 0.8, &d) - p.off_floor_current;
        let i2 = m.current(0.10 + p.subthreshold_swing, 0.8, &d) - p.off_floor_current;
        assert!(((i2 / i1).log10() - 1.0).abs() < 0.01);
    }

    #[test]
    fn monotone_on_dense_grid() {
        let m = model();
        for flavor in [VtFlavor::LowVt, VtFlavor::HighVt] {
            let d = DeviceInstance::nominal(flavor);
            for j in 0..=65 {
                let vds = 0.02 * j as f64;
                let mut prev = m.current(-0.6, vds, &d);
                for i in 1..=1900 {
                    let vgs = -0.6 + 0.001 * i as f64;
                    let cur = m.current(vgs, vds, &d);
                    assert!(cur >= prev, "vgs {vgs} vds {vds}");
                    prev = cur;
                }
            }
            for i in 0..=95 {
                let vgs = -0.6 + 0.02 * i as f64;
                let mut prev = m.current(vgs, 0.0, &d);
                for j in 1..=1300 {
                    let vds = 0.001 * j as f64;
                    let cur = m.current(vgs, vds, &d);
                    assert!(cur >= prev, "vgs {vgs} vds {vds}");
                    prev = cur;
                }
            }
        }
    }

    #[test]
    fn continuity_on_one_millivolt_grid() {
        let m = model();
        let p = m.params();
        // Steepest legal log-slope is the subthreshold one: ln10 / S per volt.
        let max_log_step = std::f64::consts::LN_10 / p.subthreshold_swing * 1e-3;
        for flavor in [VtFlavor::LowVt, VtFlavor::HighVt] {
            let d = DeviceInstance::nominal(flavor);
            let grid: Vec<f64> = (0..=1800).map(|i| -0.5 + 0.001 * i as f64).collect();
            let cur: Vec<f64> = grid.iter().map(|&v| m.current(v, 0.8, &d)).collect();
            let full_scale = cur.iter().cloned().fold(0.0, f64::max);
            for w in cur.windows(2) {
                assert!((w[1] - w[0]).abs() / full_scale < 0.01);
                assert!((w[1] / w[0]).ln() <= max_log_step * 1.0001);
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        let d = DeviceParams::default();
        let p = DeviceParams {
            vt_high: d.vt_low,
            ..d
        };
        assert!(matches!(p.validate(), Err(Error::InvalidParams(_))));
        let p = DeviceParams {
            subthreshold_swing: 0.050,
            ..d
        };
        assert!(CompactModel::new(p).is_err());
        let p = DeviceParams {
            off_floor_current: 0.0,
            ..d
        };
        assert!(drain_current(0.5, 0.5, &DeviceInstance::nominal(VtFlavor::LowVt), &p).is_err());
        let p = DeviceParams {
            transconductance_k: -1.0,
            ..d
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn sixty_mv_per_decade_accepted_at_300k() {
        let p = DeviceParams {
            subthreshold_swing: 0.0596,
            ..DeviceParams::default()
        };
        assert!(p.validate().is_ok());
    }

    #[test]
    fn zero_sigma_is_nominal() {
        let var = VariationSpec::nominal().with_seed(99);
        let p = DeviceParams::default();
        for idx in 0..100 {
            assert_eq!(sample_device(VtFlavor::LowVt, &var, idx, &p).delta_vt, 0.0);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let var = VariationSpec::default().with_seed(7);
        let p = DeviceParams::default();
        let a = sample_device(VtFlavor::HighVt, &var, 42, &p);
        let _ = sample_device(VtFlavor::HighVt, &var, 41, &p);
        let b = sample_device(VtFlavor::HighVt, &var, 42, &p);
        assert_eq!(a, b);
        assert_ne!(a, sample_device(VtFlavor::HighVt, &var, 43, &p));
    }

    #[test]
    fn sample_std_matches_sigma() {
        let var = VariationSpec::default().with_seed(2024);
        let p = DeviceParams::default();
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|i| sample_device(VtFlavor::LowVt, &var, i, &p).delta_vt)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let std = var.sqrt();
        assert!((std - 0.025).abs() <= 0.02 * 0.025, "std {std}");
        assert!(mean.abs() < 5.0 * 0.025 / (n as f64).sqrt());
    }

    #[test]
    fn rejection_keeps_threshold_positive() {
        let var = VariationSpec::default().with_sigma(0.3);
        let p = DeviceParams::default();
        for i in 0..5000 {
            let d = sample_device(VtFlavor::LowVt, &var, i, &p);
            assert!(d.effective_vt(&p) > 0.0);
        }
    }
}
