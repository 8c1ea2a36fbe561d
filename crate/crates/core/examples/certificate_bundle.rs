//! Runs the command line to write a certificate bundle, verifies it, and
//! shows that a changed payload byte is caught.

use opfactor::cli::run;
use opfactor::family::{generate, FamilyDescriptor, FamilyKind};
use opfactor::mtx;

fn main() -> opfactor::Result<()> {
    let dir = std::env::temp_dir().join(format!("opfactor-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let desc = FamilyDescriptor::new(FamilyKind::RandomSingular, 9).kernel_dim(2).seed(1);
    let input = dir.join("t.mtx");
    mtx::write(&input, &generate(&desc)?.matrices[0])?;
    let bundle = dir.join("bundle");
    let (input, bundle_str) = (input.to_string_lossy().into_owned(), bundle.to_string_lossy().into_owned());

    let code = run(["opfactor", "factor-nilpotent", &input, "--out", &bundle_str]);
    println!("factor-nilpotent exit {code}");
    println!("verify exit {}", run(["opfactor", "verify", &bundle_str]));

    let payload = bundle.join("payloads/m.mtx");
    let mut bytes = std::fs::read(&payload)?;
    let k = bytes.len() - 3;
    bytes[k] ^= 1;
    std::fs::write(&payload, bytes)?;
    println!("verify after one flipped byte exit {}", run(["opfactor", "verify", &bundle_str]));

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
