//! Replays the checked-in fuzz corpus through the same entry points and
//! round-trip checks as the fuzz targets, on stable Rust.

use std::fs;
use std::path::PathBuf;

use star_transform::experiment::ExperimentConfig;
use star_transform::geometry::validate_coefficients;
use star_transform::io;

/// Runs one input; returns whether it parsed.
fn replay(target: &str, text: &str) -> bool {
    match target {
        "config_toml" => ExperimentConfig::from_toml(text)
            .map(|cfg| assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg))
            .is_ok(),
        "phantom_toml" => io::read_phantom(text)
            .map(|p| assert_eq!(io::read_phantom(&io::write_phantom(&p).unwrap()).unwrap(), p))
            .is_ok(),
        "field_csv" => io::read_field(text)
            .map(|(f, pair)| assert_eq!(io::read_field(&io::write_field(&f, pair)).unwrap(), (f, pair)))
            .is_ok(),
        "image_csv" => io::read_image(text).map(|img| assert_eq!(io::read_image(&io::write_image(&img)).unwrap(), img)).is_ok(),
        "ballistic_csv" => io::read_ballistic(text)
            .map(|(g, p)| assert_eq!(io::read_ballistic(&io::write_ballistic(g, &p).unwrap()).unwrap(), (g, p)))
            .is_ok(),
        "coefficients_csv" => io::read_coefficients(text)
            .map(|t| assert_eq!(io::read_coefficients(&io::write_coefficients(&t)).unwrap().to_rows(), t.to_rows()))
            .is_ok(),
        "scheme_text" => io::read_scheme(text)
            .map(|c| {
                let _ = validate_coefficients(&c);
                assert_eq!(io::read_scheme(&io::write_scheme(&c)).unwrap(), c);
            })
            .is_ok(),
        other => panic!("no replay rule for fuzz target {other}"),
    }
}

#[test]
fn corpus_seeds_replay() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus");
    let mut targets: Vec<_> = fs::read_dir(&root).unwrap().map(|e| e.unwrap().path()).collect();
    targets.sort();
    assert_eq!(targets.len(), 7);
    for dir in targets {
        let target = dir.file_name().unwrap().to_str().unwrap().to_string();
        let (mut ok, mut total) = (0, 0);
        for entry in fs::read_dir(&dir).unwrap() {
            let bytes = fs::read(entry.unwrap().path()).unwrap();
            total += 1;
            if let Ok(text) = std::str::from_utf8(&bytes) {
                ok += usize::from(replay(&target, text));
            }
        }
        assert!(ok >= 1 && ok < total, "{target}: {ok} of {total} seeds parse; want both valid and invalid seeds");
    }
}

#[test]
fn mangled_inputs_do_not_panic() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus");
    for dir in fs::read_dir(&root).unwrap() {
        let dir = dir.unwrap().path();
        let target = dir.file_name().unwrap().to_str().unwrap().to_string();
        for entry in fs::read_dir(&dir).unwrap() {
            let text = fs::read_to_string(entry.unwrap().path()).unwrap();
            // Every prefix, plus a few single-character substitutions.
            for cut in (0..text.len()).filter(|&i| text.is_char_boundary(i)).step_by(7) {
                replay(&target, &text[..cut]);
            }
            for (i, _) in text.char_indices().step_by(11) {
                for sub in ["9", "-", ",", "\n", "e", "#", "nan"] {
                    let mut t = text.clone();
                    let end = i + t[i..].chars().next().map_or(0, char::len_utf8);
                    t.replace_range(i..end, sub);
                    replay(&target, &t);
                }
            }
        }
    }
}
