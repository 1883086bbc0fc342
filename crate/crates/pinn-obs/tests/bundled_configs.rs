//! Every config file shipped in `configs/` must parse and resolve, and the
//! flagship config must keep its documented settings (other tests and the
//! README depend on them).

use pinn_obs::config::RunConfig;
use pinn_obs::network::Activation;
use std::path::Path;

fn configs_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn every_bundled_config_parses_and_resolves() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "cfg") {
            continue;
        }
        let cfg = RunConfig::from_file(&path)
            .unwrap_or_else(|e| panic!("{} does not parse: {e}", path.display()));
        cfg.resolve()
            .unwrap_or_else(|e| panic!("{} does not resolve: {e}", path.display()));
        seen += 1;
    }
    assert!(
        seen >= 9,
        "expected the full set of bundled configs, found {seen}"
    );
}

#[test]
fn flagship_config_keeps_its_documented_settings() {
    let cfg = RunConfig::from_file(&configs_dir().join("reverse_duffing.cfg")).unwrap();
    assert_eq!(cfg.system, "reverse_duffing");
    assert_eq!(cfg.seed, 42);
    assert_eq!((cfg.depth, cfg.width), (9, 20));
    assert_eq!(cfg.activation, Activation::Tanh);
    assert_eq!(cfg.lr, 1e-3);
    assert_eq!(cfg.max_iters, 200_000);
    assert_eq!(cfg.patience, 20_000);
    let resolved = cfg.resolve().unwrap();
    assert_eq!(resolved.sys.t_max, 20.0);
    assert_eq!(resolved.sys.dt, 2e-3);
}
