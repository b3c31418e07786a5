//! The fuzz properties, run over the fuzz corpus seeds and random mutations
//! of them.

use std::path::PathBuf;

use microgrip::config::parse_config;
use microgrip::export::parse_vtk;
use microgrip::fem::parse_triplets;
use proptest::prelude::*;

fn seeds(target: &str) -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.iter().map(|p| std::fs::read_to_string(p).unwrap()).collect()
}

fn check_config(text: &str) {
    if let Ok(cfg) = parse_config(text) {
        let again = parse_config(&cfg.to_toml()).expect("echoed config parses");
        assert_eq!(cfg, again);
    }
}

fn check_vtk(text: &str) {
    if let Ok(file) = parse_vtk(text) {
        assert_eq!(file.cells.len(), file.cell_types.len());
        for cell in &file.cells {
            assert!(cell.iter().all(|&i| i < file.points.len()));
        }
    }
}

fn check_triplets(text: &str) {
    if let Ok(m) = parse_triplets(text) {
        assert_eq!(m, parse_triplets(&m.to_triplet_text()).expect("written triplets parse"));
    }
}

/// Replaces, deletes or duplicates a few characters.
fn mutate(text: &str, edits: &[(usize, u8, char)]) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    for &(pos, kind, c) in edits {
        if chars.is_empty() {
            chars.push(c);
            continue;
        }
        let i = pos % chars.len();
        match kind % 3 {
            0 => chars[i] = c,
            1 => {
                chars.remove(i);
            }
            _ => {
                let dup = chars[i];
                chars.insert(i, dup);
            }
        }
    }
    chars.into_iter().collect()
}

fn edit() -> impl Strategy<Value = Vec<(usize, u8, char)>> {
    let ch = prop_oneof![
        Just('0'),
        Just('9'),
        Just('-'),
        Just('.'),
        Just('e'),
        Just(' '),
        Just('\n'),
        Just('='),
        Just('['),
        Just('"'),
        any::<char>()
    ];
    prop::collection::vec((any::<usize>(), any::<u8>(), ch), 1..6)
}

#[test]
fn config_seeds_parse_as_expected() {
    let all = seeds("parse_config");
    assert!(all.len() >= 5);
    let accepted = all.iter().filter(|t| parse_config(t).is_ok()).count();
    assert_eq!(accepted, all.len() - 1, "only the unknown-key seed is rejected");
    all.iter().for_each(|t| check_config(t));
}

#[test]
fn vtk_seeds_parse() {
    for t in seeds("parse_vtk") {
        let f = parse_vtk(&t).unwrap();
        check_vtk(&t);
        if f.points.len() == 8 {
            assert_eq!(f.cell_scalars["joule_density"], vec![123456.789]);
        }
    }
}

#[test]
fn triplet_seeds_parse() {
    for t in seeds("parse_triplets") {
        parse_triplets(&t).unwrap();
        check_triplets(&t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn mutated_configs_never_panic(seed in 0usize..16, edits in edit()) {
        let all = seeds("parse_config");
        check_config(&mutate(&all[seed % all.len()], &edits));
    }

    #[test]
    fn mutated_vtk_never_panics(seed in 0usize..16, edits in edit()) {
        let all = seeds("parse_vtk");
        check_vtk(&mutate(&all[seed % all.len()], &edits));
    }

    #[test]
    fn mutated_triplets_never_panic(seed in 0usize..16, edits in edit()) {
        let all = seeds("parse_triplets");
        check_triplets(&mutate(&all[seed % all.len()], &edits));
    }

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,200}") {
        check_config(&text);
        check_vtk(&text);
        check_triplets(&text);
    }
}
