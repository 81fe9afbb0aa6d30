use std::fs;

use riskplan::config::Config;
use riskplan::harness::{
    export, load_scenarios, measure_overhead, read_heatmap, run_episode, run_grid, ExportFormat, GridSpec, Heatmap,
    Noise, Outcome,
};
use riskplan::{Scenario, SelectionPolicy};

fn merge2() -> Scenario {
    load_scenarios("merge2").unwrap().remove(0)
}

fn empty_road() -> Scenario {
    Scenario::from_json(
        r#"{
            "id": "empty",
            "lane_count": 2,
            "lane_width": 3.5,
            "road_length": 400.0,
            "agents": [{
                "initial": {"x": 5, "y": 1.75, "vx": 10, "vy": 0, "heading": 0, "length": 4.5, "width": 1.8},
                "desired_velocity": 10,
                "desired_lane": 0
            }],
            "episode_horizon": 8,
            "dt": 0.5
        }"#,
        "empty",
    )
    .unwrap()
}

fn small_grid(scenarios: Vec<Scenario>, levels: Vec<u64>) -> GridSpec {
    GridSpec {
        scenarios,
        policies: SelectionPolicy::ALL.to_vec(),
        iteration_levels: levels,
        seeds: 3,
        noise: vec![Noise::Off, Noise::On],
    }
}

#[test]
fn empty_road_always_succeeds() {
    let config = Config::default();
    for policy in SelectionPolicy::ALL {
        for noise in [Noise::Off, Noise::On] {
            let r = run_episode(&empty_road(), policy, 200, 7, noise, &config).unwrap();
            assert_eq!(r.outcome, Outcome::Success, "{policy} {noise}");
            assert_eq!(r.steps, 8);
            assert_eq!(r.step_ms.len(), 8);
        }
    }
}

#[test]
fn initial_collision_is_rejected_at_load() {
    let mut text = serde_json::to_value(merge2()).unwrap();
    text["agents"][1]["initial"]["y"] = 1.75.into();
    let err = Scenario::from_json(&text.to_string(), "clash").unwrap_err();
    assert!(err.to_string().contains("collision"), "{err}");
}

#[test]
fn malformed_scenario_reports_position() {
    let err = Scenario::from_json("{\n  \"id\": \"x\",\n  \"lane_count\": \"two\"\n}", "bad.json").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("bad.json") && msg.contains("line 3"), "{msg}");
}

#[test]
fn episodes_repeat_without_timing() {
    let config = Config::default();
    let a = run_episode(&merge2(), SelectionPolicy::Cvar, 300, 42, Noise::On, &config).unwrap();
    let b = run_episode(&merge2(), SelectionPolicy::Cvar, 300, 42, Noise::On, &config).unwrap();
    assert_eq!(a.without_timing(), b.without_timing());
}

#[test]
fn grid_is_independent_of_parallelism() {
    let spec = small_grid(vec![merge2(), empty_road()], vec![100, 200]);
    let config = Config::default();
    let one = run_grid(&spec, &config, 1).unwrap();
    let eight = run_grid(&spec, &config, 8).unwrap();
    assert_eq!(one.cells, eight.cells);
    let strip = |r: &riskplan::harness::GridResults| r.episodes.iter().map(|e| e.without_timing()).collect::<Vec<_>>();
    assert_eq!(strip(&one), strip(&eight));
}

#[test]
fn export_shapes_and_round_trip() {
    let spec = small_grid(vec![merge2(), empty_road()], vec![100, 50, 150]);
    let results = run_grid(&spec, &Config::default(), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let heatmaps = export(&results, ExportFormat::Csv, dir.path()).unwrap();
    assert_eq!(heatmaps.len(), 6);
    for path in &heatmaps {
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scenario,50,100,150");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("empty,") && lines[2].starts_with("merge2,"));
        let parsed = read_heatmap(path).unwrap();
        assert_eq!(parsed.to_csv(), text);
    }
    let name = dir.path().join("heatmap_krlcb_on.csv");
    let expected = Heatmap::from_results(&results, SelectionPolicy::Krlcb, Noise::On).unwrap();
    assert_eq!(read_heatmap(&name).unwrap(), expected);

    export(&results, ExportFormat::Jsonl, dir.path()).unwrap();
    let log = fs::read_to_string(dir.path().join("episodes.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2 * 3 * 3 * 3 * 2);
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["outcome"].is_string() && v["seed"].is_u64());
    }
}

#[test]
fn all_success_cell_has_rate_one() {
    let spec = GridSpec {
        scenarios: vec![empty_road()],
        policies: vec![SelectionPolicy::Baseline],
        iteration_levels: vec![50],
        seeds: 5,
        noise: vec![Noise::Off],
    };
    let results = run_grid(&spec, &Config::default(), 1).unwrap();
    assert_eq!(results.success_rate("empty", SelectionPolicy::Baseline, 50, Noise::Off), Some(1.0));
    let csv = Heatmap::from_results(&results, SelectionPolicy::Baseline, Noise::Off).unwrap().to_csv();
    assert_eq!(csv, "scenario,50\nempty,1.000\n");
}

#[test]
fn overhead_self_ratio_is_one() {
    let mut config = Config::default();
    config.planner.iterations = 100;
    let table = measure_overhead(&merge2(), &[SelectionPolicy::Baseline], &[100, 200], 3, &config).unwrap();
    assert_eq!(table.rows.len(), 2);
    for row in &table.rows {
        assert_eq!(row.ratio, 1.0);
        assert!(row.mean_step_ms > 0.0);
    }
    let all = measure_overhead(&merge2(), &SelectionPolicy::ALL, &[100], 3, &config).unwrap();
    assert_eq!(all.rows.len(), 3);
    assert!(all.to_csv().starts_with("scenario,policy,iterations,mean_step_ms,ratio\n"));
}
