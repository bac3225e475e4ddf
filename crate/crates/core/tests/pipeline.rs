use slinlab_core::agreement::{explore_agreement, profile_for, AgreementSetup, OrderingObject};
use slinlab_core::catalog::{build, catalog, BuildOptions, Composition};
use slinlab_core::explore::Explorer;
use slinlab_core::sched::{random_schedule, replay, run, Bounds, Sim, Trace, Workload};
use slinlab_core::strong::{check_strong, revalidate_witness, StrongVerdict};
use slinlab_core::suite::{check_workload, run_suite, SuiteConfig};

fn small(program: &str) -> SuiteConfig {
    SuiteConfig { n: 2, ops: 1, crash_budget: 1, ..SuiteConfig::new(program) }
}

#[test]
fn every_construction_passes_a_small_family() {
    for e in catalog() {
        let mut cfg = small(e.name);
        if e.name == "simpleTypeFromSnapshot" {
            cfg.spec = Some("register".into());
        }
        let r = run_suite(&cfg).unwrap();
        assert!(r.workloads > 0, "{}", e.name);
        assert!(r.passed(), "{}: {:?}", e.name, r.failures);
    }
}

#[test]
fn nested_and_atomic_compositions_agree() {
    for program in ["readableTAS", "fetchIncFromTAS"] {
        let atomic = run_suite(&small(program)).unwrap();
        let nested = run_suite(&SuiteConfig { composition: Composition::Nested, ..small(program) }).unwrap();
        assert_eq!(atomic.workloads, nested.workloads);
        assert_eq!(atomic.passed(), nested.passed(), "{program}");
    }
}

#[test]
fn set_from_tas_is_caught_with_a_revalidated_witness() {
    let w = Workload::parse("put(1);put(2);take").unwrap();
    let p = build("setFromTAS", &BuildOptions::new(3)).unwrap();
    let spec = p.spec.clone();
    let mut ex = Explorer::new(Sim::new(p, w).unwrap(), Bounds { max_steps: 200, crash_budget: 0 }, 8_000_000).unwrap();
    let r = check_strong(&mut ex, spec.as_ref()).unwrap();
    match &r.verdict {
        StrongVerdict::No { witness: Some(w) } => assert!(revalidate_witness(&ex, spec.as_ref(), w).unwrap()),
        v => panic!("expected a witness, got {v:?}"),
    }
}

#[test]
fn duplicate_puts_are_rejected() {
    let cfg = SuiteConfig::new("setFromTAS");
    let w = Workload::parse("put(1);put(1)").unwrap();
    assert!(check_workload(&cfg, &w).is_err());
}

#[test]
fn random_traces_survive_serialization() {
    let cfg = SuiteConfig { crash_budget: 1, ..SuiteConfig::new("snapshotFA") };
    let w = Workload::parse("update(1),scan;update(2);scan").unwrap();
    let sim = cfg.sim(&w).unwrap();
    for seed in 0..20 {
        let s = random_schedule(&sim, seed, &[], cfg.max_steps).unwrap();
        let t = run(&sim, &s).unwrap();
        let back: Trace = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert!(replay(&back).unwrap().is_empty(), "seed {seed}");
    }
}

#[test]
fn atomic_stack_agreement_is_exhaustively_safe() {
    let setup = AgreementSetup::atomic(profile_for(OrderingObject::Stack, 2).unwrap(), &[7, 9]).unwrap();
    let r = explore_agreement(&setup, 400, 5_000_000).unwrap();
    assert!(r.passed(), "{r:?}");
    assert_eq!(r.most_distinct, 1);
}
