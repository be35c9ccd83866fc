use dqd::config::{MethodChoice, REQUIRED_KEYS};
use dqd::{CliError, RawConfig};

const FIG1: &str = include_str!("../../../configs/fig1a.conf");

fn fig1() -> RawConfig {
    RawConfig::parse(FIG1).unwrap()
}

fn config_error(r: Result<impl std::fmt::Debug, CliError>) -> String {
    match r {
        Err(e @ CliError::Config(_)) => {
            assert_eq!(e.exit_code(), 1);
            e.to_string()
        }
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

#[test]
fn reference_block_parses() {
    let cfg = fig1().into_config().unwrap();
    let p = cfg.params;
    assert_eq!((p.coupling, p.tunneling, p.cutoff, p.temperature, p.delay, p.drive_amplitude), (0.09, 0.15, 2.0, 0.12, 16.0, 0.034));
    assert_eq!(cfg.method, MethodChoice::Polaron);
    let grid = cfg.eps_grid();
    assert_eq!(grid.len(), 101);
    assert_eq!(grid[0], 0.6);
    assert_eq!(grid[100], 1.6);
    assert!((grid[39] - 0.99).abs() < 1e-12);
    assert_eq!(cfg.fit_settings().fit_tol_kernel, 1e-4);
    assert_eq!(cfg.steady_options().samples_per_period, 128);
}

#[test]
fn empty_file_lists_every_missing_key() {
    let msg = config_error(RawConfig::parse("# nothing\n\n").unwrap().into_config());
    for key in REQUIRED_KEYS {
        assert!(msg.contains(key), "{key} missing from `{msg}`");
    }
}

#[test]
fn reversed_range_is_rejected() {
    let mut raw = fig1();
    raw.set("eps_min", "1.6").unwrap();
    raw.set("eps_max", "0.6").unwrap();
    assert!(config_error(raw.into_config()).contains("eps_min"));
}

#[test]
fn malformed_input_names_its_key() {
    assert!(config_error(RawConfig::parse("temperature = 1")).contains("temperature"));
    assert!(config_error(RawConfig::parse("P = 1\nP = 2")).contains("`P`"));
    assert!(config_error(RawConfig::parse("P 0.09")).contains("line 1"));
    let cases = [("P", "-1", "P"), ("rtol", "0", "rtol"), ("eps_steps", "0", "eps_steps"), ("kT", "warm", "kT"), ("method", "exact", "method")];
    for (key, value, named) in cases {
        let mut raw = fig1();
        raw.set(key, value).unwrap();
        assert!(config_error(raw.into_config()).contains(named), "{key} = {value}");
    }
    let mut raw = fig1();
    raw.set("shoulder_inner", "0.5").unwrap();
    assert!(config_error(raw.into_config()).contains("shoulder_inner"));
    assert!(fig1().set("bogus", "1").is_err());
}

#[test]
fn overrides_replace_file_values() {
    let mut raw = fig1();
    raw.set("P", "0.008").unwrap();
    raw.set("eps_steps", "1").unwrap();
    raw.set("method", "both").unwrap();
    let cfg = raw.into_config().unwrap();
    assert_eq!(cfg.params.coupling, 0.008);
    assert_eq!(cfg.eps_grid(), vec![0.6]);
    assert_eq!(cfg.method.methods().len(), 2);
}
