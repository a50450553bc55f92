mod common;

use proptest::prelude::*;
use rom8t::analysis::{mc_cell, CellKind};
use rom8t::device::VariationSpec;
use rom8t::dynamics::{simulate_read_event, BitCell, CaseCode, ControlWaveforms, SimConfig};
use rom8t::protocol::{
    read_cell, read_dual_context_full, read_ram_only, read_rom_only, sl_select, Mode, ModeConfig,
    PhasePlan,
};

#[test]
fn dual_context_truth_table_and_comparator_sequences() {
    let cal = common::calibrated();
    let (model, cfg) = (common::model(), SimConfig::default());
    let dc = cal.mode(Mode::DualContext);
    for (case, seq) in [
        (CaseCode::C00, [false, false]),
        (CaseCode::C01, [false, true]),
        (CaseCode::C10, [true, false]),
        (CaseCode::C11, [true, true]),
    ] {
        let cell = BitCell::from_case(case);
        let out = read_dual_context_full(&cell, dc, &cfg, &model).unwrap();
        assert_eq!((out.ram, out.rom), (case.ram(), case.rom()), "case {case}");
        assert_eq!(out.comparator_sequence(), seq, "case {case}");
    }
}

#[test]
fn ram_only_ignores_rom_flavor_at_nominal() {
    let cal = common::calibrated();
    let (model, cfg) = (common::model(), SimConfig::default());
    for m in [Mode::RamOnlyReliability, Mode::RamOnlyDelay] {
        for q in [false, true] {
            let hi = read_ram_only(
                &BitCell::from_case(CaseCode::new(q, false)),
                cal.mode(m),
                &cfg,
                &model,
            );
            let lo = read_ram_only(
                &BitCell::from_case(CaseCode::new(q, true)),
                cal.mode(m),
                &cfg,
                &model,
            );
            assert_eq!(hi.unwrap(), q);
            assert_eq!(lo.unwrap(), q);
        }
    }
}

#[test]
fn rom_only_reads_flavor() {
    let cal = common::calibrated();
    let (model, cfg) = (common::model(), SimConfig::default());
    let m = cal.mode(Mode::RomOnly);
    assert!(!read_rom_only(&BitCell::from_case(CaseCode::C00), m, &cfg, &model).unwrap());
    assert!(read_rom_only(&BitCell::from_case(CaseCode::C01), m, &cfg, &model).unwrap());
}

#[test]
fn delay_friendly_discharges_high_vt_faster() {
    let (model, cfg) = (common::model(), SimConfig::default());
    let cell = BitCell::from_case(CaseCode::C10);
    let cross = |vsl| {
        let w = ControlWaveforms::read_pulse(cfg.vdd, 3e-9, vsl, 3e-9).unwrap();
        simulate_read_event(&cell, &w, &cfg, &model)
            .unwrap()
            .crossing_time(cfg.vdd - 0.1)
            .unwrap()
    };
    let rel = ModeConfig::template(Mode::RamOnlyReliability, cfg.vdd)
        .phase1
        .vsl;
    let fast = ModeConfig::template(Mode::RamOnlyDelay, cfg.vdd).phase1.vsl;
    assert!(cross(fast) < cross(rel));
}

fn vsl_neg() -> impl Strategy<Value = f64> {
    -0.6f64..-0.26
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sl_select_picks_branch_by_ram_bit(ram in any::<bool>(), v0 in vsl_neg(), v1 in 0.01f64..0.5, swap in any::<bool>()) {
        let p = |v| PhasePlan::new(v, 1e-9, 0.5, 1e-9);
        let (a, b) = if swap { (p(v1), p(v0)) } else { (p(v0), p(v1)) };
        let mc = ModeConfig::dual(p(0.0), a, b);
        let got = sl_select(ram, &mc).unwrap();
        prop_assert_eq!(got, if ram { b } else { a });
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reads_never_change_q(code in 0u8..4, sample in 0u64..1_000_000, mode_idx in 0usize..4) {
        let cal = common::calibrated();
        let (model, cfg) = (common::model(), SimConfig::default());
        let mode = Mode::ALL[mode_idx];
        let case = CaseCode::from_code(code).unwrap();
        prop_assume!(!(mode == Mode::RomOnly && case.ram()));
        let cell = mc_cell(CellKind::Proposed, case, sample, &VariationSpec::default(), model.params());
        let before = cell;
        read_cell(&cell, cal.mode(mode), &cfg, &model).unwrap();
        prop_assert_eq!(cell, before);
        prop_assert_eq!(cell.q(), case.ram());
    }
}
