use segsched::scenarios::{figure, FIGURES};
use segsched::{
    anomaly_search, build_nominal, check_anomaly_free, run_online, Mode, Profile, SegmentId,
};

#[test]
fn suspension_anomaly_is_found_by_search() {
    let sc = figure(1).unwrap();
    let w = anomaly_search(&sc.taskset, &sc.policy, 1000, 3, Profile::default())
        .unwrap()
        .expect("witness");
    assert!(!w.report.anomaly_free);
    // the witness replays
    let plan = build_nominal(&sc.taskset, &sc.policy, None).unwrap();
    let online = run_online(&plan, &w.behavior, Mode::Untreated).unwrap();
    assert_eq!(check_anomaly_free(&plan, &online), w.report);
}

#[test]
fn jitter_anomaly_is_found_by_search() {
    let sc = figure(2).unwrap();
    let w = anomaly_search(&sc.taskset, &sc.policy, 1000, 11, Profile::default())
        .unwrap()
        .expect("witness");
    let tau1_jitter = w.behavior.draw(&SegmentId::new(1, 0, 0)).unwrap().susp;
    assert!(tau1_jitter < 20, "witness keeps the maximum jitter of tau1");
}

#[test]
fn search_is_deterministic() {
    let sc = figure(1).unwrap();
    let a = anomaly_search(&sc.taskset, &sc.policy, 200, 9, Profile::default()).unwrap();
    let b = anomaly_search(&sc.taskset, &sc.policy, 200, 9, Profile::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn treatments_fix_every_example() {
    for n in FIGURES {
        let sc = figure(n).unwrap();
        let plan = build_nominal(&sc.taskset, &sc.policy, None).unwrap();
        assert!(plan.feasible, "example {n}");
        let b = sc.behavior().unwrap();
        for mode in [Mode::Enforce, Mode::Preference] {
            let online = run_online(&plan, &b, mode).unwrap();
            assert!(
                check_anomaly_free(&plan, &online).anomaly_free,
                "example {n} {mode:?}"
            );
        }
    }
}

#[test]
fn nominal_rm_accepts_the_two_task_example() {
    let ts = figure(3).unwrap().taskset;
    assert!(segsched::exper::accepts(segsched::Algorithm::NomRm, &ts).unwrap());
    assert!(!segsched::exper::accepts(segsched::Algorithm::NomEdf, &ts).unwrap());
    assert!(segsched::exper::accepts(segsched::Algorithm::Comb, &ts).unwrap());
}
