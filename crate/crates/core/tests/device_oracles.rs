use proptest::prelude::*;
use rom8t::device::{CompactModel, DeviceInstance, DeviceParams, VtFlavor};
use rom8t::dynamics::{leakage_power, solve_stack, BitCell, CaseCode, SimConfig, StackBias};

const K_B: f64 = 1.380_649e-23;
const Q_E: f64 = 1.602_176_634e-19;

/// Direct transcription of the interpolation formula.
fn reference_current(p: &DeviceParams, vt0: f64, vgs: f64, vds: f64) -> f64 {
    let phi = K_B * p.temperature / Q_E;
    let n = p.subthreshold_swing / (phi * 10f64.ln());
    let vt = vt0 - p.dibl_factor * vds;
    let f = |x: f64| (1.0 + (x / 2.0).exp()).ln().powi(2);
    let a = (vgs - vt) / (n * phi);
    let b = a - vds / phi;
    p.transconductance_k * (2.0 * n * phi).powi(2) * (f(a) - f(b))
        + p.off_floor_current * (1.0 - (-vds / phi).exp())
}

fn device(flavor: VtFlavor) -> DeviceInstance {
    DeviceInstance::nominal(flavor)
}

#[test]
fn matches_reference_formula() {
    let p = DeviceParams::default();
    let m = CompactModel::new(p).unwrap();
    for flavor in [VtFlavor::HighVt, VtFlavor::LowVt] {
        for i in 0..=40 {
            for j in 1..=40 {
                let (vgs, vds) = (-0.2 + 0.03 * i as f64, 0.025 * j as f64);
                let got = m.current(vgs, vds, &device(flavor));
                let want = reference_current(&p, p.vt_nominal(flavor), vgs, vds);
                assert!(
                    (got - want).abs() <= 1e-9 * want.abs() + 1e-22,
                    "{vgs} {vds}: {got} vs {want}"
                );
            }
        }
    }
}

/// Stack node by plain bisection on the current difference.
fn reference_stack_current(
    p: &DeviceParams,
    vt: f64,
    rwl: f64,
    v_rbl: f64,
    q_gate: f64,
    vsl: f64,
) -> f64 {
    let up = |x: f64| reference_current(p, vt, rwl - x, v_rbl - x);
    let dn = |x: f64| reference_current(p, vt, q_gate - vsl, x - vsl);
    let (mut lo, mut hi) = (vsl, v_rbl);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if up(mid) > dn(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    up(0.5 * (lo + hi))
}

#[test]
fn stack_solution_matches_bisection_oracle() {
    let p = DeviceParams::default();
    let m = CompactModel::new(p).unwrap();
    for case in CaseCode::ALL {
        let cell = BitCell::from_case(case);
        let vt = p.vt_nominal(case.flavor());
        for (rwl, v, vsl) in [
            (0.8, 0.8, 0.0),
            (0.8, 0.5, -0.45),
            (0.8, 0.7, 0.2),
            (0.0, 0.8, 0.0),
        ] {
            let q_gate = if case.ram() { 0.8 } else { 0.0 };
            let bias = StackBias {
                v_rbl: v,
                rwl,
                vsl,
                q_gate,
            };
            let got = solve_stack(&m, &cell, &bias, 1e-12, None).unwrap().current;
            let want = reference_stack_current(&p, vt, rwl, v, q_gate, vsl);
            assert!(
                (got - want).abs() <= 1e-6 * want,
                "{case} {rwl} {v} {vsl}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn leakage_ratio_against_reference_oracle() {
    let p = DeviceParams::default();
    let m = CompactModel::new(p).unwrap();
    let cfg = SimConfig::default();
    let standby = |vt: f64, q: bool| {
        reference_stack_current(&p, vt, 0.0, cfg.vdd, if q { cfg.vdd } else { 0.0 }, 0.0) * cfg.vdd
            + cfg.core_leakage
    };
    let proposed: f64 = CaseCode::ALL
        .iter()
        .map(|&c| standby(p.vt_nominal(c.flavor()), c.ram()))
        .sum::<f64>()
        / 4.0;
    let baseline = 0.5 * (standby(p.vt_regular, false) + standby(p.vt_regular, true));
    let ratio = proposed / baseline;
    assert!((0.95..=1.05).contains(&ratio), "{ratio}");
    let measured: f64 = CaseCode::ALL
        .iter()
        .map(|&c| leakage_power(&BitCell::from_case(c), &cfg, &m).unwrap())
        .sum::<f64>()
        / 4.0;
    assert!((measured - proposed).abs() <= 1e-6 * proposed);
}

proptest! {
    #[test]
    fn current_is_monotone_in_both_terminals(vgs in -0.3f64..1.3, vds in 0.0f64..1.2, d in 1e-4f64..0.05, low in any::<bool>()) {
        let m = CompactModel::new(DeviceParams::default()).unwrap();
        let dev = device(if low { VtFlavor::LowVt } else { VtFlavor::HighVt });
        let i = m.current(vgs, vds, &dev);
        prop_assert!(i >= 0.0);
        prop_assert!(m.current(vgs + d, vds, &dev) >= i);
        prop_assert!(m.current(vgs, vds + d, &dev) >= i);
    }

    #[test]
    fn low_vt_always_conducts_more(vgs in -0.3f64..1.3, vds in 0.001f64..1.2) {
        let m = CompactModel::new(DeviceParams::default()).unwrap();
        prop_assert!(m.current(vgs, vds, &device(VtFlavor::LowVt)) > m.current(vgs, vds, &device(VtFlavor::HighVt)));
    }
}
