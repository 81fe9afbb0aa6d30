use std::path::Path;

use crate::harness::HarnessError;
use crate::world::Scenario;

/// The shipped scenario documents as `(file name, contents)`.
pub const BUNDLED: [(&str, &str); 6] = [
    ("merge2.json", include_str!("../../scenarios/merge2.json")),
    ("merge3.json", include_str!("../../scenarios/merge3.json")),
    ("overtake2.json", include_str!("../../scenarios/overtake2.json")),
    ("bottleneck2.json", include_str!("../../scenarios/bottleneck2.json")),
    ("bottleneck3.json", include_str!("../../scenarios/bottleneck3.json")),
    ("highway4.json", include_str!("../../scenarios/highway4.json")),
];

pub fn bundled_scenarios() -> Vec<Scenario> {
    BUNDLED
        .iter()
        .map(|(name, text)| Scenario::from_json(text, name).expect("bundled scenario is valid"))
        .collect()
}

/// Resolves a `--scenario` argument: `all` for the bundled set, the id or file
/// name of a bundled scenario, a JSON file, or a directory of JSON files.
pub fn load_scenarios(arg: &str) -> Result<Vec<Scenario>, HarnessError> {
    if arg == "all" {
        return Ok(bundled_scenarios());
    }
    let path = Path::new(arg);
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| HarnessError::io(arg, e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(HarnessError::Invalid(format!("no scenario files in {arg}")));
        }
        return files.iter().map(|f| Ok(Scenario::load(f)?)).collect();
    }
    if path.is_file() {
        return Ok(vec![Scenario::load(path)?]);
    }
    bundled_scenarios()
        .into_iter()
        .find(|s| s.id == arg || format!("{}.json", s.id) == arg)
        .map(|s| vec![s])
        .ok_or_else(|| HarnessError::Invalid(format!("no scenario file or bundled scenario named `{arg}`")))
}
