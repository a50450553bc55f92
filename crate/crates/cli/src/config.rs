//! The run configuration document.
//!
//! Every physical quantity is a string with an explicit unit. Sections and
//! keys that are left out take the built-in defaults; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use rom8t::analysis::CalibrationTargets;
use rom8t::array::{ArrayConfig, BitMatrix, RomImage, SlGranularity};
use rom8t::device::{DeviceParams, VariationSpec};
use rom8t::dynamics::SimConfig;
use rom8t::protocol::{
    Mode, ModeConfig, PhasePlan, DEFAULT_VSL_DC_RAM1, DEFAULT_VSL_RAM_DELAY, DEFAULT_VSL_ROM,
};

use crate::error::CliError;
use crate::units::{
    Capacitance, Current, Power, Swing, Temperature, Time, Transconductance, Voltage,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const CONFIG_ENV: &str = "ROM8T_CONFIG";
pub const DEFAULT_CONFIG: &str = include_str!("../../../config/default.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub device: DeviceSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub variation: VariationSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub modes: ModesSection,
    #[serde(default)]
    pub baseline: PlanSection,
    #[serde(default)]
    pub array: ArraySection,
    /// Directory relative paths inside the document resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSection {
    pub vt_low: Voltage,
    pub vt_high: Voltage,
    pub vt_regular: Voltage,
    pub subthreshold_swing: Swing,
    pub transconductance: Transconductance,
    pub dibl: f64,
    pub off_floor_current: Current,
    pub temperature: Temperature,
}

impl Default for DeviceSection {
    fn default() -> Self {
        let p = DeviceParams::default();
        Self {
            vt_low: Voltage(p.vt_low),
            vt_high: Voltage(p.vt_high),
            vt_regular: Voltage(p.vt_regular),
            subthreshold_swing: Swing(p.subthreshold_swing),
            transconductance: Transconductance(p.transconductance_k),
            dibl: p.dibl_factor,
            off_floor_current: Current(p.off_floor_current),
            temperature: Temperature(p.temperature),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub vdd: Voltage,
    pub c_bl: Capacitance,
    pub dt_max: Time,
    pub voltage_tolerance: Voltage,
    pub reliability_limit: Voltage,
    pub core_leakage: Power,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            vdd: Voltage(s.vdd),
            c_bl: Capacitance(s.c_bl),
            dt_max: Time(s.dt_max),
            voltage_tolerance: Voltage(s.voltage_tolerance),
            reliability_limit: Voltage(s.reliability_limit),
            core_leakage: Power(s.core_leakage),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationSection {
    pub sigma_vt: Voltage,
    pub seed: u64,
}

impl Default for VariationSection {
    fn default() -> Self {
        let v = VariationSpec::default();
        Self {
            sigma_vt: Voltage(v.sigma_vt),
            seed: v.seed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub required_margin: Voltage,
    pub strobe_margin: Voltage,
    pub window: Time,
    pub t_min: Time,
    pub grid_points: usize,
    pub samples_per_case: usize,
    pub time_resolution: Time,
    pub seed_salt: u64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        let t = CalibrationTargets::default();
        Self {
            required_margin: Voltage(t.required_margin),
            strobe_margin: Voltage(t.strobe_margin),
            window: Time(t.window),
            t_min: Time(t.t_min),
            grid_points: t.grid_points,
            samples_per_case: t.samples_per_case,
            time_resolution: Time(t.time_resolution),
            seed_salt: t.seed_salt,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub samples_per_case: usize,
    /// Lowest acceptable correct-read fraction of any case.
    pub yield_threshold: f64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            samples_per_case: 5000,
            yield_threshold: 1.0,
        }
    }
}

/// One evaluate phase. Leaving out `v_ref` or `t_strobe` asks for calibration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub vsl: Voltage,
    pub v_ref: Option<Voltage>,
    pub t_strobe: Option<Time>,
    /// Defaults to the strobe time.
    pub rwl_pulse: Option<Time>,
    pub precharge: Option<Time>,
}

impl PlanSection {
    fn with_vsl(vsl: f64) -> Self {
        Self {
            vsl: Voltage(vsl),
            v_ref: None,
            t_strobe: None,
            rwl_pulse: None,
            precharge: None,
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.v_ref.is_some() && self.t_strobe.is_some()
    }

    pub fn plan(&self, vdd: f64) -> PhasePlan {
        let t_strobe = self.t_strobe.map_or(1e-9, |t| t.0);
        let mut p = PhasePlan::new(
            self.vsl.0,
            self.rwl_pulse.map_or(t_strobe, |t| t.0),
            self.v_ref.map_or(0.5 * vdd, |v| v.0),
            t_strobe,
        );
        if let Some(pc) = self.precharge {
            p.precharge = pc.0;
        }
        p
    }
}

impl Default for PlanSection {
    fn default() -> Self {
        Self::with_vsl(0.0)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualSection {
    pub phase1: PlanSection,
    pub phase2_if_ram0: PlanSection,
    pub phase2_if_ram1: PlanSection,
}

impl Default for DualSection {
    fn default() -> Self {
        Self {
            phase1: PlanSection::with_vsl(0.0),
            phase2_if_ram0: PlanSection::with_vsl(DEFAULT_VSL_ROM),
            phase2_if_ram1: PlanSection::with_vsl(DEFAULT_VSL_DC_RAM1),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesSection {
    pub rom_only: PlanSection,
    pub ram_only_reliability: PlanSection,
    pub ram_only_delay: PlanSection,
    pub dual_context: DualSection,
}

impl Default for ModesSection {
    fn default() -> Self {
        Self {
            rom_only: PlanSection::with_vsl(DEFAULT_VSL_ROM),
            ram_only_reliability: PlanSection::with_vsl(0.0),
            ram_only_delay: PlanSection::with_vsl(DEFAULT_VSL_RAM_DELAY),
            dual_context: DualSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ImageFormat {
    #[default]
    Text,
    Hex,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub rows: usize,
    pub cols: usize,
    /// ROM image file; a checkerboard when absent.
    pub rom_image: Option<PathBuf>,
    /// Initial RAM contents; all zero when absent.
    pub ram_image: Option<PathBuf>,
    pub format: ImageFormat,
    pub dc_sl: String,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            rom_image: None,
            ram_image: None,
            format: ImageFormat::Text,
            dc_sl: "per-column".into(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Sets `path` (dot separated) in `table` to `raw`, read as a TOML value when
/// it parses as one and as a plain string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("--set expects key=value, got {assignment:?}")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("bad --set path {path:?}")));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("--set {path}: {k} is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses a document; errors carry the offending line.
    pub fn parse(text: &str, origin: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| config_err(format!("{origin}: {e}")))?;
        if !overrides.is_empty() {
            let mut table: toml::Table =
                toml::from_str(text).map_err(|e| config_err(format!("{origin}: {e}")))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            cfg = toml::Value::Table(table)
                .try_into()
                .map_err(|e| config_err(format!("{origin} with --set overrides: {e}")))?;
        }
        if cfg.version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "{origin}: unsupported version {}, expected {SCHEMA_VERSION}",
                cfg.version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or the built-in defaults when `path` is `None`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                let mut cfg = Self::parse(&text, &p.display().to_string(), overrides)?;
                cfg.base_dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                Ok(cfg)
            }
            None => Self::parse(DEFAULT_CONFIG, "built-in defaults", overrides),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let wrap = |e: rom8t::Error| config_err(e.to_string());
        self.device_params().validate().map_err(wrap)?;
        self.sim_config().validate().map_err(wrap)?;
        self.variation().validate().map_err(wrap)?;
        self.targets().validate().map_err(wrap)?;
        if self.mc.samples_per_case < 1 {
            return Err(config_err("mc.samples_per_case must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.mc.yield_threshold) {
            return Err(config_err("mc.yield_threshold must be within [0, 1]"));
        }
        self.array_config()?;
        let (params, sim) = (self.device_params(), self.sim_config());
        for m in Mode::ALL {
            self.mode_template(m)
                .validate(&params, &sim)
                .map_err(wrap)?;
        }
        if self.baseline.vsl.0 != 0.0 {
            return Err(config_err("baseline.vsl must be 0 V (grounded SL read)"));
        }
        Ok(())
    }

    pub fn device_params(&self) -> DeviceParams {
        let d = &self.device;
        DeviceParams {
            vt_low: d.vt_low.0,
            vt_high: d.vt_high.0,
            vt_regular: d.vt_regular.0,
            subthreshold_swing: d.subthreshold_swing.0,
            transconductance_k: d.transconductance.0,
            dibl_factor: d.dibl,
            off_floor_current: d.off_floor_current.0,
            temperature: d.temperature.0,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            vdd: s.vdd.0,
            c_bl: s.c_bl.0,
            dt_max: s.dt_max.0,
            voltage_tolerance: s.voltage_tolerance.0,
            reliability_limit: s.reliability_limit.0,
            core_leakage: s.core_leakage.0,
        }
    }

    pub fn variation(&self) -> VariationSpec {
        VariationSpec::default()
            .with_sigma(self.variation.sigma_vt.0)
            .with_seed(self.variation.seed)
    }

    pub fn targets(&self) -> CalibrationTargets {
        let c = &self.calibration;
        CalibrationTargets {
            required_margin: c.required_margin.0,
            strobe_margin: c.strobe_margin.0,
            window: c.window.0,
            t_min: c.t_min.0,
            grid_points: c.grid_points,
            samples_per_case: c.samples_per_case,
            time_resolution: c.time_resolution.0,
            seed_salt: c.seed_salt,
        }
    }

    pub fn plan_sections(&self, mode: Mode) -> Vec<(&'static str, &PlanSection)> {
        let m = &self.modes;
        match mode {
            Mode::RomOnly => vec![("phase1", &m.rom_only)],
            Mode::RamOnlyReliability => vec![("phase1", &m.ram_only_reliability)],
            Mode::RamOnlyDelay => vec![("phase1", &m.ram_only_delay)],
            Mode::DualContext => vec![
                ("phase1", &m.dual_context.phase1),
                ("phase2_if_ram0", &m.dual_context.phase2_if_ram0),
                ("phase2_if_ram1", &m.dual_context.phase2_if_ram1),
            ],
        }
    }

    pub fn plan_section_mut(&mut self, mode: Mode, plan: &str) -> Option<&mut PlanSection> {
        let m = &mut self.modes;
        match (mode, plan) {
            (Mode::RomOnly, "phase1") => Some(&mut m.rom_only),
            (Mode::RamOnlyReliability, "phase1") => Some(&mut m.ram_only_reliability),
            (Mode::RamOnlyDelay, "phase1") => Some(&mut m.ram_only_delay),
            (Mode::DualContext, "phase1") => Some(&mut m.dual_context.phase1),
            (Mode::DualContext, "phase2_if_ram0") => Some(&mut m.dual_context.phase2_if_ram0),
            (Mode::DualContext, "phase2_if_ram1") => Some(&mut m.dual_context.phase2_if_ram1),
            _ => None,
        }
    }

    /// The mode as written; sense settings may still be placeholders.
    pub fn mode_template(&self, mode: Mode) -> ModeConfig {
        let vdd = self.sim.vdd.0;
        let plans: Vec<PhasePlan> = self
            .plan_sections(mode)
            .iter()
            .map(|(_, p)| p.plan(vdd))
            .collect();
        match mode {
            Mode::DualContext => ModeConfig::dual(plans[0], plans[1], plans[2]),
            _ => ModeConfig::single(mode, plans[0]),
        }
    }

    /// True when every plan of `mode` has its sense settings written out.
    pub fn mode_is_fixed(&self, mode: Mode) -> bool {
        self.plan_sections(mode).iter().all(|(_, p)| p.is_fixed())
    }

    pub fn array_config(&self) -> Result<ArrayConfig, CliError> {
        let dc_sl: SlGranularity = self
            .array
            .dc_sl
            .parse()
            .map_err(|e: rom8t::Error| config_err(format!("array.dc_sl: {e}")))?;
        let mut c = ArrayConfig::new(self.array.rows, self.array.cols)
            .map_err(|e| config_err(e.to_string()))?;
        c.dc_sl = dc_sl;
        Ok(c)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn read_image(&self, p: &Path) -> Result<BitMatrix, CliError> {
        let path = self.resolve(p);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let m = match self.array.format {
            ImageFormat::Text => BitMatrix::parse_text(&text),
            ImageFormat::Hex => BitMatrix::parse_hex(&text, self.array.cols),
        };
        m.map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn rom_image(&self) -> Result<RomImage, CliError> {
        match &self.array.rom_image {
            Some(p) => self.read_image(p),
            None => RomImage::checkerboard(self.array.rows, self.array.cols)
                .map_err(|e| config_err(e.to_string())),
        }
    }

    pub fn ram_image(&self) -> Result<Option<BitMatrix>, CliError> {
        self.array
            .ram_image
            .as_deref()
            .map(|p| self.read_image(p))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_defaults_match_library_defaults() {
        let cfg = RunConfig::load(None, &[]).unwrap();
        assert_eq!(cfg.device_params(), DeviceParams::default());
        assert_eq!(cfg.sim_config(), SimConfig::default());
        assert_eq!(cfg.variation(), VariationSpec::default());
        assert_eq!(cfg.targets(), CalibrationTargets::default());
        for m in Mode::ALL {
            assert_eq!(cfg.mode_template(m), ModeConfig::template(m, cfg.sim.vdd.0));
        }
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let cfg = RunConfig::parse("version = 1\n", "t", &[]).unwrap();
        assert_eq!(cfg.sim_config(), SimConfig::default());
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn errors_name_the_line() {
        let e = RunConfig::parse("version = 1\n[sim]\nvdd = \"0.8\"\n", "t", &[]).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e =
            RunConfig::parse("version = 1\n\n[sim]\nvdd_typo = \"0.8 V\"\n", "t", &[]).unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
        assert!(RunConfig::parse("version = 2\n", "t", &[]).is_err());
        assert!(RunConfig::parse("", "t", &[]).is_err());
    }

    #[test]
    fn overrides_replace_scalar_leaves() {
        let sets = vec![
            "sim.vdd=0.9 V".to_string(),
            "variation.seed=7".to_string(),
            "modes.rom_only.vsl=\"-0.5 V\"".to_string(),
        ];
        let cfg = RunConfig::parse("version = 1\n", "t", &sets).unwrap();
        assert_eq!(cfg.sim.vdd.0, 0.9);
        assert_eq!(cfg.variation.seed, 7);
        assert_eq!(cfg.modes.rom_only.vsl.0, -0.5);
        assert!(RunConfig::parse("version = 1\n", "t", &["sim.nope=1".into()]).is_err());
        assert!(RunConfig::parse("version = 1\n", "t", &["novalue".into()]).is_err());
    }

    #[test]
    fn invalid_modes_rejected() {
        let e = RunConfig::parse("version = 1\n", "t", &["modes.rom_only.vsl=0.1 V".into()]);
        assert!(e.is_err());
    }
}
