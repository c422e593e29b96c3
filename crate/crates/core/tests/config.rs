use lsvd_core::experiment::{preset, DataSource, ExperimentConfig, ExperimentError, Method, PRESETS};
use serde_json::{json, Value};

fn exp1_value() -> Value {
    serde_json::from_str(&preset("exp1").unwrap().to_json()).unwrap()
}

fn parse(v: &Value) -> Result<ExperimentConfig, ExperimentError> {
    ExperimentConfig::from_json(&serde_json::to_string_pretty(v).unwrap())
}

fn invalid_field(v: &Value) -> String {
    match parse(v) {
        Err(ExperimentError::Invalid { field, .. }) => field,
        other => panic!("expected a field error, got {other:?}"),
    }
}

#[test]
fn every_preset_loads_and_validates() {
    for (name, _) in PRESETS {
        let cfg = preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate().unwrap();
    }
    assert!(matches!(preset("nope"), Err(ExperimentError::UnknownPreset(_))));
}

#[test]
fn config_round_trips_through_json() {
    for (name, _) in PRESETS {
        let cfg = preset(name).unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg, "{name}");
    }
}

#[test]
fn paper_presets_carry_the_published_hyperparameters() {
    for (name, angles, latent, denoising) in [("paper-exp1", 64, None, false), ("paper-exp2", 8, Some(64), true)] {
        let cfg = preset(name).unwrap();
        assert_eq!(cfg.geometry.image_side, 64);
        assert_eq!(cfg.geometry.num_angles, angles);
        assert_eq!(cfg.latent_dim, latent);
        assert_eq!(cfg.training.epochs, 250);
        assert_eq!(cfg.training.batch_size, 100);
        assert_eq!(cfg.training.start_lr, 1e-3);
        assert_eq!(cfg.training.final_lr, 2e-4);
        assert_eq!(cfg.training.denoising, denoising);
        assert_eq!(cfg.network.init_std, 0.01);
        assert!(!cfg.network.bias);
        assert_eq!(cfg.network.sigma_layers, 5);
        assert_eq!((cfg.network.c_min, cfg.network.c_max), (0.01, 10.0));
        assert_eq!((cfg.loss.alpha_y, cfg.loss.alpha_x), (2.0, 1.0));
        assert_eq!(cfg.dataset.count, 60000);
        assert!(matches!(cfg.dataset.source, DataSource::Idx { test_count: 1000, .. }));
    }
    assert_eq!(preset("paper-exp2").unwrap().network.x_layers, 4);
}

#[test]
fn syntax_errors_report_line_and_column() {
    let text = "{\n  \"experiment\": \"exp1\",\n  \"seed\": 12,,\n}";
    match ExperimentConfig::from_json(text) {
        Err(ExperimentError::Parse { line, column, .. }) => {
            assert_eq!(line, 3);
            assert!(column > 0);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unknown_fields_are_rejected_by_name() {
    let mut v = exp1_value();
    v["training"]["epochz"] = json!(3);
    match parse(&v) {
        Err(ExperimentError::Parse { message, line, .. }) => {
            assert!(message.contains("epochz"), "{message}");
            assert!(line > 1);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn invalid_values_name_the_field() {
    let cases: Vec<(&str, Box<dyn Fn(&mut Value)>)> = vec![
        ("methods", Box::new(|v| v["methods"] = json!([]))),
        ("methods", Box::new(|v| v["methods"] = json!(["tsvd", "tsvd"]))),
        ("latent_dim", Box::new(|v| v["latent_dim"] = json!(5000))),
        ("network.init_std", Box::new(|v| v["network"]["init_std"] = json!(-1.0))),
        ("dataset.count", Box::new(|v| v["dataset"]["count"] = json!(1))),
        ("geometry", Box::new(|v| v["geometry"]["num_angles"] = json!(0))),
        ("training", Box::new(|v| v["training"]["epochs"] = json!(0))),
        ("geometry.image_side", Box::new(|v| v["geometry"]["image_side"] = json!(4))),
    ];
    for (field, mutate) in cases {
        let mut v = exp1_value();
        mutate(&mut v);
        assert_eq!(invalid_field(&v), field);
    }
}

#[test]
fn invalid_field_message_names_the_field() {
    let mut v = exp1_value();
    v["network"]["init_std"] = json!(0.0);
    let msg = parse(&v).unwrap_err().to_string();
    assert!(msg.contains("`network.init_std`"), "{msg}");
}

#[test]
fn unknown_method_names_are_rejected() {
    let mut v = exp1_value();
    v["methods"] = json!(["tsvd", "magic"]);
    assert!(matches!(parse(&v), Err(ExperimentError::Parse { .. })));
    assert_eq!(Method::from_name("lsvd_diag"), Some(Method::LsvdDiag));
    for m in Method::ALL {
        assert_eq!(Method::from_name(m.name()), Some(m));
    }
}

#[test]
fn seeds_derive_deterministically_from_the_master_seed() {
    let a = preset("exp1").unwrap();
    let mut b = a.clone();
    assert_eq!(a.seeds(), b.seeds());
    b.seed += 1;
    assert_ne!(a.seeds(), b.seeds());
    let s = a.seeds();
    assert!(s.images != s.noise && s.noise != s.split && s.images != s.split);
}
