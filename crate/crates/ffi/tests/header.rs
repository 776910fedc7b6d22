use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

fn read(rel: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)).unwrap()
}

fn functions(text: &str) -> BTreeSet<String> {
    text.match_indices("nf_")
        .filter(|(i, _)| *i == 0 || !text.as_bytes()[i - 1].is_ascii_alphanumeric())
        .filter_map(|(i, _)| {
            let name: String = text[i..].chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
            text[i + name.len()..].starts_with('(').then_some(name)
        })
        .collect()
}

#[test]
fn header_declares_every_export() {
    let src = read("src/lib.rs");
    let header = read("include/neckflow.h");
    let exported: BTreeSet<String> = src
        .lines()
        .filter(|l| l.contains("extern \"C\" fn "))
        .flat_map(functions)
        .collect();
    let declared = functions(&header);
    assert!(exported.len() >= 15, "{exported:?}");
    assert_eq!(exported, declared);
}

#[test]
fn header_status_codes_match() {
    use neckflow_ffi::NfStatus::*;
    let header = read("include/neckflow.h");
    for (name, v) in [
        ("OK", Ok),
        ("NULL_POINTER", NullPointer),
        ("INVALID_ARGUMENT", InvalidArgument),
        ("NUMERIC", Numeric),
        ("CAPACITY", Capacity),
        ("IO", Io),
        ("BUFFER_TOO_SMALL", BufferTooSmall),
        ("PANIC", Panic),
    ] {
        let line = format!("NF_STATUS_{name} = {},", v as i32);
        assert!(header.contains(&line), "missing `{line}`");
    }
}

#[test]
fn header_summary_layout_matches() {
    let header = read("include/neckflow.h");
    let start = header.find("typedef struct NfSolutionSummary {").unwrap();
    let body = &header[start..header[start..].find('}').unwrap() + start];
    let fields: Vec<&str> = body
        .lines()
        .skip(1)
        .filter_map(|l| l.trim().strip_suffix(';'))
        .map(|l| l.rsplit(' ').next().unwrap())
        .collect();
    assert_eq!(
        fields,
        [
            "p",
            "eta_final",
            "u1",
            "u2",
            "energy",
            "kkt_residual",
            "flux1",
            "flux2",
            "newton_iterations",
            "n_vertices"
        ]
    );
    assert_eq!(std::mem::size_of::<neckflow_ffi::NfSolutionSummary>(), 8 * 8 + 2 * std::mem::size_of::<usize>());
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let inc = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(&inc)
            .arg("-")
            .stdin(std::process::Stdio::piped())
            .spawn()
            .and_then(|mut child| {
                use std::io::Write;
                child.stdin.take().unwrap().write_all(b"#include \"neckflow.h\"\n")?;
                child.wait()
            });
        match status {
            Ok(s) => assert!(s.success(), "{cc} rejected the header"),
            Err(e) => eprintln!("skipping {cc}: {e}"),
        }
    }
}
