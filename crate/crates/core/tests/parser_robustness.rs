//! Replays the fuzz corpus and checks the parser invariants the fuzz
//! targets assert, plus random inputs.

use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use sis_perturb::config::{Ini, Scenario};
use sis_perturb::scenario::FigureId;

fn corpus(name: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(name);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus {}", dir.display());
    out
}

fn ini_round_trip(s: &str) {
    if let Ok(ini) = Ini::parse(s) {
        assert_eq!(Ini::parse(&ini.to_string()).unwrap(), ini);
    }
}

fn scenario_round_trip(s: &str) {
    if let Ok(scn) = Scenario::parse(s) {
        assert_eq!(Scenario::parse(&scn.to_ini().to_string()).unwrap(), scn);
    }
}

#[test]
fn ini_corpus() {
    for (_, text) in corpus("ini") {
        ini_round_trip(&text);
    }
}

#[test]
fn scenario_corpus_parses() {
    for (path, text) in corpus("scenario") {
        let scn = Scenario::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        scenario_round_trip(&text);
        assert!(scn.paths > 0);
    }
}

#[test]
fn figure_id_corpus() {
    let mut known = 0;
    for (_, text) in corpus("figure_id") {
        if let Ok(id) = text.parse::<FigureId>() {
            assert_eq!(id.as_str(), text);
            known += 1;
        }
    }
    assert_eq!(known, FigureId::ALL.len());
}

const LINES: &[&str] = &[
    "[scenario]",
    "[sis]",
    "[cir]",
    "[grid]",
    "[ensemble]",
    "[corrections]",
    "[meta]",
    "model = cir",
    "model = gray",
    "gamma = 0.1",
    "x0 = 0.3",
    "beta = 0.2",
    "a = 0.02",
    "b = 0.2",
    "sigma = 0.032",
    "y0 = 0.2",
    "t_end = 10",
    "dt = 0.01",
    "paths = 3",
    "seed = 1",
    "c = 0.5",
    "scope = total",
    "# note",
    "",
    "[",
    "=",
    "x = ",
    "sigma = nan",
    "dt = 1e400",
    "  [cir]  ",
    "drift = 1, 2,",
    "output_nodes = 0",
];

proptest! {
    #[test]
    fn arbitrary_text_never_panics(s in "\\PC{0,200}") {
        ini_round_trip(&s);
        scenario_round_trip(&s);
        let _ = s.parse::<FigureId>();
    }

    #[test]
    fn line_soup_round_trips(idx in proptest::collection::vec(0..LINES.len(), 0..40)) {
        let text: Vec<&str> = idx.iter().map(|&i| LINES[i]).collect();
        let text = text.join("\n");
        ini_round_trip(&text);
        scenario_round_trip(&text);
    }
}
