use std::path::Path;

use opfactor::cli::{run, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_MISMATCH, EXIT_OBSTRUCTION, EXIT_OK};
use opfactor::family::{generate, FamilyDescriptor, FamilyKind};
use opfactor::linalg::{identity, max_abs, zeros};
use opfactor::mtx;

fn opfactor(args: &[&str]) -> i32 {
    run(std::iter::once("opfactor").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn flip_payload_byte(bundle: &Path) {
    let dir = bundle.join("payloads");
    let file = std::fs::read_dir(&dir).unwrap().next().unwrap().unwrap().path();
    let mut bytes = std::fs::read(&file).unwrap();
    let k = bytes.len() / 2;
    bytes[k] ^= 0x01;
    std::fs::write(&file, bytes).unwrap();
}

#[test]
fn nilpotent_bundle_verifies_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("zero.mtx");
    mtx::write(&input, &zeros(6, 6)).unwrap();
    let out = tmp.path().join("b");
    assert_eq!(opfactor(&["factor-nilpotent", s(&input), "--out", s(&out)]), EXIT_OK);
    assert_eq!(opfactor(&["verify", s(&out)]), EXIT_OK);

    let certs = out.join("certificates.json");
    let text = std::fs::read_to_string(&certs).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["checks"][0]["value"] = serde_json::json!(0.5);
    std::fs::write(&certs, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    assert_eq!(opfactor(&["verify", s(&out)]), EXIT_MISMATCH);
    std::fs::write(&certs, text).unwrap();
    assert_eq!(opfactor(&["verify", s(&out)]), EXIT_OK);

    flip_payload_byte(&out);
    assert_eq!(opfactor(&["verify", s(&out)]), EXIT_MISMATCH);
}

#[test]
fn identity_without_padding_is_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("id.mtx");
    mtx::write(&input, &identity(4)).unwrap();
    let out = tmp.path().join("b");
    assert_eq!(opfactor(&["factor-nilpotent", s(&input), "--no-pad", "--out", s(&out)]), EXIT_INFEASIBLE);
    assert_eq!(opfactor(&["factor-nilpotent", s(&input), "--budget", "3", "--out", s(&out)]), EXIT_INFEASIBLE);
    assert_eq!(opfactor(&["factor-nilpotent", s(&input), "--out", s(&out)]), EXIT_OK);
}

#[test]
fn unitary_input_is_an_obstruction() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("u.mtx");
    mtx::write(&input, &identity(24)).unwrap();
    assert_eq!(opfactor(&["factor-qn", s(&input), "--out", s(&tmp.path().join("b"))]), EXIT_OBSTRUCTION);
}

#[test]
fn bad_arguments_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(opfactor(&["factor-nilpotent", s(&tmp.path().join("missing.mtx"))]), EXIT_CONFIG);
    assert_eq!(opfactor(&["generate", "--kind", "diagonal", "--n", "4", "--out", s(&tmp.path().join("d.mtx"))]), EXIT_CONFIG);
    assert_eq!(opfactor(&["no-such-command"]), EXIT_CONFIG);
    let bad = tmp.path().join("bad.mtx");
    std::fs::write(&bad, "not a matrix").unwrap();
    assert_eq!(opfactor(&["factor-nilpotent", s(&bad)]), EXIT_CONFIG);
}

#[test]
fn generate_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("v.mtx");
    assert_eq!(opfactor(&["generate", "--kind", "volterra", "--n", "5", "--out", s(&file)]), EXIT_OK);
    let want = generate(&FamilyDescriptor::new(FamilyKind::Volterra, 5)).unwrap();
    assert_eq!(mtx::read(&file).unwrap(), want.matrices[0]);

    let dir = tmp.path().join("fam");
    let args = ["generate", "--kind", "random-compact", "--n", "6", "--decay", "0.5", "--seed", "9", "--count", "2"];
    assert_eq!(opfactor(&[&args[..], &["--out", s(&dir)]].concat()), EXIT_OK);
    let want = generate(&FamilyDescriptor::new(FamilyKind::RandomCompact, 6).decay(0.5).seed(9).count(2)).unwrap();
    for (i, m) in want.matrices.iter().enumerate() {
        let got = mtx::read(dir.join(format!("member_{i}.mtx"))).unwrap();
        assert!(max_abs(&(got - m)) <= 1e-15 * (1.0 + max_abs(m)));
    }
    assert!(dir.join("descriptor.json").exists());
}

#[test]
fn common_factor_modes_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let fam = generate(&FamilyDescriptor::new(FamilyKind::RandomSingular, 12).kernel_dim(4).seed(2).count(2).structured())
        .unwrap();
    let compact = generate(&FamilyDescriptor::new(FamilyKind::RandomCompact, 12).decay(0.5).seed(2).count(2)).unwrap();
    let write = |name: &str, ms: &[opfactor::Matrix]| -> Vec<String> {
        ms.iter()
            .enumerate()
            .map(|(i, m)| {
                let p = tmp.path().join(format!("{name}{i}.mtx"));
                mtx::write(&p, m).unwrap();
                p.to_str().unwrap().to_string()
            })
            .collect()
    };
    let nil_inputs = write("s", &fam.matrices);
    let compact_inputs = write("k", &compact.matrices);
    for (mode, inputs) in [
        ("nilpotent-sandwich", &nil_inputs),
        ("nilpotent-two-sided", &nil_inputs),
        ("compact-right", &compact_inputs),
        ("compact-left", &compact_inputs),
        ("compact-two-sided", &compact_inputs),
    ] {
        let out = tmp.path().join(mode);
        let mut args = vec!["common-factor", "--mode", mode, "--out", s(&out)];
        args.extend(inputs.iter().map(String::as_str));
        assert_eq!(opfactor(&args), EXIT_OK, "{mode}");
        assert_eq!(opfactor(&["verify", s(&out)]), EXIT_OK, "{mode}");
    }
}
