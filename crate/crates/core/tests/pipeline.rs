//! End-to-end flow over the public file formats: generate a fleet, enroll
//! it, persist everything, reload, and authenticate — the same surfaces an
//! external consumer would drive.

use qupuf_core::{
    execute_challenge, generate_device, generate_registry, inter_hd, run_detection_experiment,
    select_optimum, sweep, t_shape_edges, AuthOutcome, CRPDatabase, ChallengeKey, DeviceRegistry,
    PufChallenge, PufVariant, ResponseTrace, SchedulerPolicy, SweepConfig,
};

fn small_challenge() -> PufChallenge {
    let mut c = PufChallenge::new(PufVariant::Hadamard, 3.0, 0);
    c.shots = 512;
    c.n_experiments = 8;
    c
}

#[test]
fn registry_trace_db_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let registry_path = dir.path().join("devices.json");
    let db_path = dir.path().join("crp.json");
    let trace_path = dir.path().join("trace.json");

    // Fleet on disk and back.
    let registry = generate_registry(3, 5, &t_shape_edges(), 100.0, 42).unwrap();
    registry.save(&registry_path).unwrap();
    let registry = DeviceRegistry::load(&registry_path).unwrap();
    assert_eq!(registry.ids(), vec!["qpu_00", "qpu_01", "qpu_02"]);

    // A response trace on disk and back.
    let challenge = small_challenge();
    let device = registry.get("qpu_00").unwrap();
    let trace = execute_challenge(device, &challenge, 7).unwrap();
    std::fs::write(&trace_path, trace.to_json()).unwrap();
    let reread: ResponseTrace =
        serde_json::from_str(&std::fs::read_to_string(&trace_path).unwrap()).unwrap();
    assert_eq!(reread, trace);
    assert_eq!(reread.sessions.len(), 8);

    // Enrollment, persistence, and decisions after reload.
    let mut db = CRPDatabase::new();
    for id in ["qpu_00", "qpu_01"] {
        db.register(registry.get(id).unwrap(), &challenge, 5, 100, false)
            .unwrap();
    }
    db.save(&db_path).unwrap();
    let db = CRPDatabase::load(&db_path).unwrap();
    let key = ChallengeKey::of(&challenge, 5);

    // Template-generated devices sit close together, so a single probe is
    // not guaranteed to identify correctly; assert the decision surface.
    let probe = execute_challenge(registry.get("qpu_00").unwrap(), &challenge, 555).unwrap();
    let response = qupuf_core::digitize(&probe.sessions.last().unwrap().prob_one, 5).unwrap();
    let identified = db.identify(&response, &key).unwrap();
    let best = identified.best_match_id.as_deref().unwrap();
    assert!(best == "qpu_00" || best == "qpu_01");
    assert!((0.0..=100.0).contains(&identified.hd_to_best));
    let verified = db.verify("qpu_00", &response, &key).unwrap();
    assert!(matches!(
        verified.outcome,
        AuthOutcome::Accepted | AuthOutcome::Rejected
    ));
}

#[test]
fn sweep_csv_has_machine_readable_layout() {
    let registry = generate_registry(2, 5, &t_shape_edges(), 100.0, 11).unwrap();
    let devices: Vec<_> = registry.iter().cloned().collect();
    let config = SweepConfig {
        variant: PufVariant::Hadamard,
        theta_values: vec![1.0, 3.0, 5.0],
        precisions: vec![4, 5],
        idle_values: vec![0],
        shots: 256,
        n_experiments: 5,
        seed: 3,
        intra_device: None,
        inter_pair: None,
    };
    let result = sweep(&devices, &config).unwrap();
    let csv = result.to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "theta_deg,precision_bits,idle_count,intra_qpu_00,intra_qpu_01,inter_qpu_00_qpu_01,combined_pct"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        assert_eq!(row.split(',').count(), 7);
        for field in row.split(',') {
            field.parse::<f64>().unwrap();
        }
    }
    select_optimum(&result).unwrap();
}

#[test]
fn detection_flow_against_a_tiled_host() {
    let mut registry = generate_registry(2, 5, &t_shape_edges(), 100.0, 21).unwrap();
    let mut edges = Vec::new();
    for tile in 0..3usize {
        for (u, v) in t_shape_edges() {
            edges.push((u + 5 * tile, v + 5 * tile));
        }
    }
    registry
        .insert(generate_device("bighost", 15, edges, 100.0, 77).unwrap())
        .unwrap();

    let challenge = small_challenge();
    let mut db = CRPDatabase::new();
    db.register(registry.get("qpu_00").unwrap(), &challenge, 5, 6, false)
        .unwrap();
    db.register(registry.get("qpu_01").unwrap(), &challenge, 5, 7, false)
        .unwrap();
    let key = ChallengeKey::of(&challenge, 5);

    let report = run_detection_experiment(
        &registry,
        &db,
        "qpu_00",
        &SchedulerPolicy::RerouteSubgraph {
            host_id: "bighost".into(),
            crosstalk_factor: 1.5,
        },
        &key,
        20,
        9,
    )
    .unwrap();
    assert_eq!(report.trials, 20);
    assert_eq!(report.decisions.len(), 20);
    let json = report.to_json();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed["decisions"].as_array().unwrap().len(), 20);
    assert!(report.summary().starts_with("honest_accept="));

    // Generated same-template devices stay mutually distinguishable enough
    // for inter stats to be well-defined.
    let a = execute_challenge(registry.get("qpu_00").unwrap(), &challenge, 1).unwrap();
    let b = execute_challenge(registry.get("qpu_01").unwrap(), &challenge, 2).unwrap();
    let stats = inter_hd(&a, &b, 5).unwrap();
    assert_eq!(stats.count, 64);
}
