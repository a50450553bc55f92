use std::path::PathBuf;
use std::str::FromStr;

use rom8t::analysis::num;
use rom8t::protocol::Mode;

use super::{csv_finish, csv_writer, Context};
use crate::error::CliError;
use crate::units::{Capacitance, Voltage};

pub const SWEEP_HEADER: [&str; 8] = [
    "param",
    "value",
    "status",
    "calibration_margin_V",
    "v_ref_V",
    "t_strobe_s",
    "min_correct_fraction",
    "worst_margin_V",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Vsl,
    VRef,
    SigmaVt,
    CBl,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Vsl => "vsl",
            SweepParam::VRef => "v-ref",
            SweepParam::SigmaVt => "sigma-vt",
            SweepParam::CBl => "c-bl",
        }
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('_', "-").as_str() {
            "vsl" => Ok(SweepParam::Vsl),
            "v-ref" => Ok(SweepParam::VRef),
            "sigma-vt" => Ok(SweepParam::SigmaVt),
            "c-bl" => Ok(SweepParam::CBl),
            _ => Err(format!(
                "unknown sweep parameter {s:?} (vsl, v-ref, sigma-vt, c-bl)"
            )),
        }
    }
}

/// `start:stop:count` in SI base units; `count` points evenly spaced,
/// both ends included.
pub fn parse_range(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(format!("range {text:?} must be start:stop:count"));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("{s:?} is not a finite number"))
    };
    let (start, stop) = (num(a)?, num(b)?);
    let count: usize = n
        .trim()
        .parse()
        .map_err(|_| format!("{n:?} is not a point count"))?;
    Ok(match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
            .collect(),
    })
}

fn point(
    base: &Context,
    param: SweepParam,
    value: f64,
    mode: Mode,
    plan: &str,
) -> Result<[String; 6], CliError> {
    let mut cfg = base.cfg.clone();
    match param {
        SweepParam::Vsl => {
            cfg.plan_section_mut(mode, plan)
                .expect("plan checked by caller")
                .vsl = Voltage(value)
        }
        SweepParam::SigmaVt => cfg.variation.sigma_vt = Voltage(value),
        SweepParam::CBl => cfg.sim.c_bl = Capacitance(value),
        SweepParam::VRef => {}
    }
    let ctx = Context::new(cfg, Some(base.out_dir.clone()))?;
    let mut resolved = match ctx.resolve_mode(mode) {
        Ok(r) => r,
        Err(CliError::Infeasible { best_margin, .. }) => {
            return Ok([
                "infeasible".into(),
                num(best_margin),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])
        }
        Err(e) => return Err(e),
    };
    let cal_margin = resolved
        .plans
        .iter()
        .find(|(n, _)| *n == plan)
        .map(|(_, c)| num(c.margin))
        .unwrap_or_default();
    let target = match plan {
        "phase2_if_ram0" => resolved.config.phase2_if_ram0.as_mut(),
        "phase2_if_ram1" => resolved.config.phase2_if_ram1.as_mut(),
        _ => Some(&mut resolved.config.phase1),
    }
    .expect("plan checked by caller");
    if param == SweepParam::VRef {
        target.sense.v_ref = value;
    }
    let (v_ref, t_strobe) = (num(target.sense.v_ref), num(target.sense.t_strobe));
    if let Err(e) = resolved
        .config
        .validate(&ctx.cfg.device_params(), &ctx.cfg.sim_config())
    {
        eprintln!("{} = {value}: {e}", param.name());
        return Ok([
            "rejected".into(),
            cal_margin,
            v_ref,
            t_strobe,
            String::new(),
            String::new(),
        ]);
    }
    let report = ctx.monte_carlo(&resolved.config)?;
    Ok([
        "ok".into(),
        cal_margin,
        v_ref,
        t_strobe,
        num(report.min_correct_fraction()),
        num(report.worst_margin()),
    ])
}

/// One calibration plus Monte-Carlo run per point, each exactly what `mc`
/// would do with the parameter set in the config.
pub fn sweep(
    ctx: &Context,
    param: SweepParam,
    mode: Mode,
    plan: &str,
    values: &[f64],
) -> Result<PathBuf, CliError> {
    if !ctx.cfg.plan_sections(mode).iter().any(|(n, _)| *n == plan) {
        return Err(CliError::Usage(format!("mode {mode} has no plan {plan}")));
    }
    let mut w = csv_writer();
    w.write_record(SWEEP_HEADER)?;
    for &v in values {
        let cells = point(ctx, param, v, mode, plan)?;
        println!("{} = {}: {}", param.name(), v, cells[0]);
        let mut rec = vec![param.name().to_string(), num(v)];
        rec.extend(cells);
        w.write_record(&rec)?;
    }
    let name = format!("sweep_{}_{}.csv", param.name(), mode.name());
    ctx.write(&name, &csv_finish(w)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert!(parse_range("0:1:0").unwrap().is_empty());
        assert_eq!(parse_range("-0.1:0.5:1").unwrap(), vec![-0.1]);
        assert_eq!(parse_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_range("-0.05:-0.5:10").unwrap().len(), 10);
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("a:1:2").is_err());
        assert!(parse_range("0:1:-2").is_err());
    }

    #[test]
    fn params_parse() {
        assert_eq!(
            "sigma_vt".parse::<SweepParam>().unwrap(),
            SweepParam::SigmaVt
        );
        assert_eq!("v-ref".parse::<SweepParam>().unwrap(), SweepParam::VRef);
        assert!("vdd".parse::<SweepParam>().is_err());
    }
}
