use wishart_libor::affine::{AffineModel, JumpOuParams, WishartParams};
use wishart_libor::config::{ConfigError, ModelConfig, ProcessKind};
use wishart_libor::libor::{FitOptions, LiborModel, TenorCurve};

const BENCHMARK: &str = include_str!("../../../configs/benchmark.json");
const JUMP: &str = include_str!("../../../configs/jump_ou.json");

#[test]
fn shipped_benchmark_matches_builtin() {
    let cfg = ModelConfig::from_json_str(BENCHMARK).unwrap();
    assert_eq!(cfg, ModelConfig::benchmark());
    assert_eq!(cfg.to_json(), BENCHMARK);
}

#[test]
fn round_trip_is_identity() {
    for text in [BENCHMARK, JUMP] {
        let a = ModelConfig::from_json_str(text).unwrap();
        let b = ModelConfig::from_json_str(&a.to_json()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }
}

#[test]
fn benchmark_config_fits_the_benchmark_model() {
    let lm = ModelConfig::benchmark().fit().unwrap();
    let curve = TenorCurve::flat(1.0 / 3.0, 12, 0.05).unwrap();
    let direct = LiborModel::fit(
        AffineModel::Wishart(WishartParams::benchmark()),
        curve,
        None,
        &FitOptions::default(),
    )
    .unwrap();
    assert_eq!(lm.family(), direct.family());
    assert_eq!(lm.curve(), direct.curve());
}

#[test]
fn jump_config_builds_reference_process() {
    let cfg = ModelConfig::from_json_str(JUMP).unwrap();
    assert_eq!(cfg.process, ProcessKind::JumpOu);
    assert_eq!(cfg.affine_model(), AffineModel::JumpOu(JumpOuParams::reference()));
    let lm = cfg.fit().unwrap();
    assert_eq!(lm.n_tenors(), 6);
}

fn replace(text: &str, from: &str, to: &str) -> String {
    assert!(text.contains(from), "{from}");
    text.replacen(from, to, 1)
}

fn invalid(text: &str) -> (String, Option<usize>, String) {
    match ModelConfig::from_json_str(text) {
        Err(ConfigError::Invalid { path, line, msg }) => (path, line, msg),
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_matrix_reports_field_and_line() {
    let text = replace(BENCHMARK, "        3.75,\n        0.0,\n", "        3.75,\n");
    let (path, line, _) = invalid(&text);
    assert_eq!(path, "wishart.sigma0");
    assert_eq!(line, Some(5));

    let text = replace(BENCHMARK, "3.45", "-3.45");
    let (path, _, msg) = invalid(&text);
    assert_eq!(path, "wishart");
    assert!(msg.contains("positive definite"), "{msg}");
}

#[test]
fn syntax_errors_carry_path_and_position() {
    let text = replace(BENCHMARK, "\"kappa\": 3.0", "\"kappa\": \"three\"");
    match ModelConfig::from_json_str(&text) {
        Err(ConfigError::Syntax { line, path, .. }) => {
            assert_eq!(path, "wishart.kappa");
            assert_eq!(line, 32);
        }
        other => panic!("{other:?}"),
    }
    let text = replace(BENCHMARK, "\"kappa\": 3.0", "\"kappa\": 3.0, \"beta\": 2.7");
    match ModelConfig::from_json_str(&text) {
        Err(ConfigError::Syntax { msg, .. }) => assert!(msg.contains("beta"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let text = replace(BENCHMARK, "\"exact_squared_ou\"", "\"milstein\"");
    assert!(matches!(ModelConfig::from_json_str(&text), Err(ConfigError::Syntax { .. })));
}

#[test]
fn module_invariants_rechecked() {
    let cases = [
        ("\"kappa\": 3.0", "\"kappa\": 2.7", "wishart"),
        ("\"schema_version\": 1", "\"schema_version\": 2", "schema_version"),
        ("\"process\": \"wishart\"", "\"process\": \"jump_ou\"", "process"),
        ("\"edgeworth_order\": 7", "\"edgeworth_order\": 9", "pricing.edgeworth_order"),
        ("\"n_paths\": 100000", "\"n_paths\": 10", "pricing.mc"),
        ("\"dt\": 0.041666666666666664", "\"dt\": 0.1", "pricing.mc"),
        ("\"n_nodes\": 4096", "\"n_nodes\": 3", "pricing.fourier"),
        ("\"n_tenors\": 12", "\"n_tenors\": 11", "curve.libors"),
        ("\"delta_t\": 0.3333333333333333", "\"delta_t\": -1.0", "curve.libors"),
    ];
    for (from, to, want) in cases {
        let (path, line, _) = invalid(&replace(BENCHMARK, from, to));
        assert_eq!(path, want, "{to}");
        assert!(line.is_some(), "{to}");
    }
}

#[test]
fn ratio_curves_accepted() {
    let text = replace(
        JUMP,
        "\"libors\": [0.04, 0.041, 0.042, 0.043, 0.044, 0.045]",
        "\"ratios\": [1.1, 1.08, 1.06, 1.04, 1.02, 1.0], \"terminal_bond\": 0.85",
    );
    let cfg = ModelConfig::from_json_str(&text).unwrap();
    assert_eq!(cfg.curve().terminal_bond(), 0.85);
    let text = replace(JUMP, "\"n_tenors\": 6,", "\"n_tenors\": 6, \"terminal_bond\": 0.9,");
    let (path, _, _) = invalid(&text);
    assert_eq!(path, "curve");
}

#[test]
fn seed_override() {
    let cfg = ModelConfig::benchmark().with_seed(99);
    assert_eq!(cfg.pricing.mc.seed, 99);
}

#[test]
fn missing_file_is_io_error() {
    let e = ModelConfig::load(std::path::Path::new("/nonexistent/model.json")).unwrap_err();
    assert!(matches!(e, ConfigError::Io { .. }));
}
