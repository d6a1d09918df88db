use std::f64::consts::PI;
use std::sync::Arc;

use ecodamp::{
    integrate_1d, ChebGrid, Kinetics, ModelVariant, ParameterSet, RefugeProfile, StateField1D,
    StepControllerCfg, VariantKind,
};
use proptest::prelude::*;

fn grid() -> Arc<ChebGrid> {
    Arc::new(ChebGrid::new(32, 0.0, PI).unwrap())
}

fn run(kind: VariantKind, refuge: RefugeProfile, p: &ParameterSet) -> ecodamp::BlowupReport {
    let variant = ModelVariant::with_refuge(kind, refuge).unwrap();
    let ic = StateField1D::from_fn(grid(), |x| (10.0, 2000.0, 10.0 + x.cos()));
    integrate_1d(&variant, p, &ic, 8.0, &StepControllerCfg::new(1e-3)).unwrap().report
}

#[test]
fn full_refuge_prevents_blowup() {
    let mut p = ParameterSet::refuge_1d();
    p.d4 = p.overcrowding_from_factor(0.5);
    for kind in [VariantKind::RefugeOnly, VariantKind::RefugeOvercrowd, VariantKind::RefugeRoleReversalOvercrowd] {
        let report = run(kind, RefugeProfile::One, &p);
        assert!(!report.verdict.blew_up(), "{kind:?}: {:?}", report.verdict);
    }
}

#[test]
fn overcrowding_alone_does_not_prevent_blowup() {
    let mut p = ParameterSet::refuge_1d();
    p.d4 = p.overcrowding_from_factor(0.5);
    let report = run(VariantKind::RefugeOvercrowd, RefugeProfile::Zero, &p);
    assert!(report.verdict.blew_up(), "{:?}", report.verdict);
}

#[test]
fn no_refuge_blows_up() {
    let report = run(VariantKind::RefugeOnly, RefugeProfile::Zero, &ParameterSet::refuge_1d());
    assert!(report.verdict.blew_up());
}

fn kinds() -> [VariantKind; 4] {
    [
        VariantKind::Classical,
        VariantKind::RefugeOnly,
        VariantKind::RefugeOvercrowd,
        VariantKind::RefugeRoleReversalOvercrowd,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn reactions_are_quasi_positive(which in 0usize..5, b1 in 0.0f64..=1.0,
                                    u in 0.0f64..1e4, v in 0.0f64..1e4, r in 0.0f64..1e4) {
        let p = [
            ParameterSet::refuge_1d(),
            ParameterSet::turing(),
            ParameterSet::chaos(),
            ParameterSet::avoided_2d(),
            ParameterSet::critical_area_2d(),
        ][which];
        for kind in kinds() {
            let k = Kinetics::new(kind, &p);
            prop_assert!(k.rates(b1, 0.0, v, r).f >= 0.0);
            prop_assert!(k.rates(b1, u, 0.0, r).g >= 0.0);
            prop_assert_eq!(k.rates(b1, u, v, 0.0).h, 0.0);
        }
    }
}
