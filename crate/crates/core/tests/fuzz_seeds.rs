//! Replays the checked-in fuzz corpus through the same round trips the fuzz
//! targets check, so the seeds stay meaningful on a stable toolchain.

use std::fs;
use std::path::PathBuf;

use hetero2st::datagen::{MixtureSpec, ScenarioSpec};
use hetero2st::harness::ExperimentPlan;
use hetero2st::hetero::TestReport;
use hetero2st::io::{matrix_to_csv, parse_matrix_csv};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn csv_seeds() {
    let mut parsed = 0;
    for (name, text) in seeds("csv_matrix") {
        let Ok(m) = parse_matrix_csv(&text) else { continue };
        let back = parse_matrix_csv(&matrix_to_csv(&m.cloud, m.header.as_deref()).unwrap()).unwrap();
        assert_eq!(back.cloud, m.cloud, "{name}");
        parsed += 1;
    }
    assert!(parsed >= 3);
}

#[test]
fn mixture_and_scenario_seeds() {
    for (name, text) in seeds("mixture_toml") {
        let spec = MixtureSpec::from_toml_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(
            MixtureSpec::from_toml_str(&spec.to_toml_string().unwrap()).unwrap(),
            spec,
            "{name}"
        );
    }
    for (name, text) in seeds("scenario_toml") {
        let spec = ScenarioSpec::from_toml_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(
            ScenarioSpec::from_toml_str(&spec.to_toml_string().unwrap()).unwrap(),
            spec,
            "{name}"
        );
    }
}

#[test]
fn plan_seeds() {
    for (name, text) in seeds("plan_toml") {
        let plan = ExperimentPlan::from_toml_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(
            ExperimentPlan::from_toml_str(&plan.to_toml_string().unwrap()).unwrap(),
            plan,
            "{name}"
        );
    }
}

#[test]
fn report_seeds() {
    let mut parsed = 0;
    for (name, text) in seeds("report_json") {
        let Ok(reports) = serde_json::from_str::<Vec<TestReport>>(&text) else {
            continue;
        };
        let back: Vec<TestReport> = serde_json::from_str(&serde_json::to_string(&reports).unwrap()).unwrap();
        assert_eq!(back, reports, "{name}");
        parsed += 1;
    }
    assert_eq!(parsed, 1);
}
