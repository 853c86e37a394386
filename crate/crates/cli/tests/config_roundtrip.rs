use dra_core::scenario::{preset, set_key, ScenarioConfig, PRESET_NAMES};
use dra_sim::{parse_config, parse_config_str, serialize};
use proptest::prelude::*;

fn reparse(cfg: &ScenarioConfig) -> ScenarioConfig {
    let text = serialize(cfg);
    parse_config_str(&text, None).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

#[test]
fn every_preset_and_variant_round_trips() {
    for name in PRESET_NAMES {
        let p = preset(name).unwrap();
        assert_eq!(reparse(&p.config), p.config, "{name}");
        for cfg in p.variant_configs().unwrap() {
            assert_eq!(reparse(&cfg), cfg, "{name} variant");
        }
    }
}

#[test]
fn minimal_file_uses_defaults_elsewhere() {
    let cfg = parse_config_str(
        "n = 12\nb = 30\neta = 0.05\ntopology.kind = er\ntopology.p = 0.4\ncosts.kind = quadratic\n",
        None,
    )
    .unwrap();
    let expect = ScenarioConfig::default();
    assert_eq!((cfg.n, cfg.b, cfg.eta), (12, 30.0, 0.05));
    assert_eq!((cfg.horizon, cfg.seed, cfg.p_fail, cfg.tau_bar), (expect.horizon, expect.seed, 0.0, 0));
}

#[test]
fn file_paths_resolve_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ring.txt"), "n=4\n0 1 1\n1 2 1\n2 3 0.5\n0 3 1\n").unwrap();
    std::fs::write(
        dir.path().join("costs.csv"),
        "i,kind,p1,p2,p3,lo,hi\n0,quadratic,0.1,1,0,,\n1,quadratic,0.2,2,0,,\n2,quartic,0.01,1,,,\n3,quadratic,0.3,0,0,,\n",
    )
    .unwrap();
    let path = dir.path().join("scenario.conf");
    std::fs::write(
        &path,
        "n = 4\nb = 10\ntopology.kind = edgelist\ntopology.file = ring.txt\ncosts.kind = table\ncosts.file = costs.csv\n",
    )
    .unwrap();
    let cfg = parse_config(&path).unwrap();
    assert_eq!(reparse(&cfg), cfg);
    let out = dra_core::scenario::run(&cfg).unwrap();
    assert!(!out.summary.diverged());
}

#[test]
fn errors_name_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    std::fs::write(&path, "n = 10\n# comment\nadversity.p_fail = 1.5\n").unwrap();
    let err = parse_config(&path).unwrap_err();
    assert_eq!(err.line, Some(3));
    let shown = err.to_string();
    assert!(shown.contains("adversity.p_fail") && shown.contains(":3:"), "{shown}");

    std::fs::write(&path, "n = 10\ntopolgy.p = 0.2\n").unwrap();
    let err = parse_config(&path).unwrap_err();
    assert_eq!(err.line, Some(2));
    assert!(err.message.contains("unknown key `topolgy.p`"), "{err}");

    let err = parse_config(&dir.path().join("missing.conf")).unwrap_err();
    assert!(err.to_string().contains("missing.conf"), "{err}");

    std::fs::write(&path, "topology.kind = edgelist\n").unwrap();
    assert_eq!(parse_config(&path).unwrap_err().line, Some(1));
}

fn map_entries(prefix: &'static str) -> impl Strategy<Value = Vec<(String, String)>> {
    let k = move |s: &str| format!("{prefix}.{s}");
    prop_oneof![
        Just(vec![(k("kind"), "identity".to_string())]),
        (0.01f64..1.0).prop_map(move |r| vec![(k("kind"), "logq".into()), (k("rho"), r.to_string())]),
        (0.5f64..5.0, 10.0f64..100.0).prop_map(move |(l, d)| vec![
            (k("kind"), "saturation".into()),
            (k("level"), l.to_string()),
            (k("domain_max"), (l * d).to_string())
        ]),
        (0.2f64..1.0).prop_map(move |e| vec![(k("kind"), "sign_power".into()), (k("exponent"), e.to_string())]),
    ]
}

fn topology_entries() -> impl Strategy<Value = Vec<(String, String)>> {
    prop_oneof![
        (0.05f64..1.0).prop_map(|p| vec![("topology.kind".into(), "er".into()), ("topology.p".into(), p.to_string())]),
        (prop::collection::vec(0.05f64..1.0, 1..5), 1u64..50).prop_map(|(ps, period)| {
            let list = ps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
            vec![
                ("topology.kind".into(), "cycle".into()),
                ("topology.ps".into(), list),
                ("topology.period".into(), period.to_string()),
            ]
        }),
    ]
}

fn penalty_entries() -> impl Strategy<Value = Vec<(String, String)>> {
    prop_oneof![
        Just(vec![("penalty.kind".to_string(), "none".to_string())]),
        (1.0f64..50.0, 0.0f64..5.0).prop_map(|(s, lo)| vec![
            ("penalty.kind".into(), "box".into()),
            ("penalty.sigma".into(), s.to_string()),
            ("penalty.lo".into(), lo.to_string()),
            ("penalty.hi".into(), (lo + 20.0).to_string()),
        ]),
        (0.5f64..10.0)
            .prop_map(|mu| vec![("penalty.kind".into(), "smooth_log".into()), ("penalty.mu".into(), mu.to_string())]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn serialize_then_parse_is_identity(
        n in 2usize..200,
        b in -1e4f64..1e4,
        eta in 1e-4f64..2.0,
        seed in any::<u64>(),
        p_fail in 0.0f64..=1.0,
        tau_bar in 0u32..8,
        mode in prop::sample::select(vec!["uniform", "fixed", "per_link"]),
        asymmetric in any::<bool>(),
        early in prop::option::of(1e-12f64..1e-2),
        topo in topology_entries(),
        node in map_entries("maps.node"),
        link in map_entries("maps.link"),
        penalty in penalty_entries(),
        quadratic in any::<bool>(),
    ) {
        let mut entries: Vec<(String, String)> = vec![
            ("n".into(), n.to_string()),
            ("b".into(), b.to_string()),
            ("eta".into(), eta.to_string()),
            ("seed".into(), seed.to_string()),
            ("adversity.p_fail".into(), p_fail.to_string()),
            ("adversity.tau_bar".into(), tau_bar.to_string()),
            ("adversity.delay_mode".into(), mode.to_string()),
            ("adversity.asymmetric".into(), asymmetric.to_string()),
            ("early_stop".into(), early.map_or("none".into(), |e| e.to_string())),
            ("costs.kind".into(), if quadratic { "quadratic" } else { "quartic" }.to_string()),
        ];
        entries.extend(topo);
        entries.extend(node);
        entries.extend(link);
        entries.extend(penalty);
        let text: String = entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let cfg = parse_config_str(&text, None).unwrap();
        let mut direct = ScenarioConfig::default();
        for (k, v) in entries.iter().filter(|(k, _)| k.ends_with(".kind")).chain(entries.iter().filter(|(k, _)| !k.ends_with(".kind"))) {
            set_key(&mut direct, k, v).unwrap();
        }
        prop_assert_eq!(&cfg, &direct);
        prop_assert_eq!(reparse(&cfg), cfg);
    }
}
