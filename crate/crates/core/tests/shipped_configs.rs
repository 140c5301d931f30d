use std::path::PathBuf;

use vibresc::benchmarks::{scenario_defaults, ScenarioName};
use vibresc::config::{emit_scenario, parse_scenario};

fn shipped(name: ScenarioName) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{}.cfg", name.as_str()));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn shipped_configs_equal_defaults() {
    for name in ScenarioName::ALL {
        let parsed = parse_scenario(&shipped(name), true).unwrap();
        assert_eq!(parsed, scenario_defaults(name), "{name}");
    }
}

#[test]
fn shipped_configs_are_canonical() {
    for name in ScenarioName::ALL {
        assert_eq!(
            shipped(name),
            emit_scenario(&scenario_defaults(name)),
            "{name}"
        );
    }
}

#[test]
fn emit_parse_round_trip() {
    for name in ScenarioName::ALL {
        let s = scenario_defaults(name);
        assert_eq!(parse_scenario(&emit_scenario(&s), true).unwrap(), s);
    }
}
