//! A canonical form written as `Q1·Q2` with both factors block triangular
//! and quasi-nilpotent on the truncation window.

use opfactor::family::{generate, FamilyDescriptor, FamilyKind};
use opfactor::qn::{factor_quasinilpotent, QnOptions};

fn main() -> opfactor::Result<()> {
    let desc = FamilyDescriptor::new(FamilyKind::CanonicalFormSynthetic, 8).decay(0.5).seed(11);
    let fam = generate(&desc)?;
    let cf = &fam.canonical.as_ref().expect("canonical blocks")[0];

    let opts = QnOptions::default();
    let f = factor_quasinilpotent(cf, &opts)?;
    if let Some([dom, ran]) = &f.splits {
        println!("piece dimensions: K {:?}, L {:?}", dom.piece_dims(), ran.piece_dims());
    }
    println!("blockwise product residual {:.2e}", f.product_residual);
    for (name, cert) in [("Q1", &f.cert_q1), ("Q2", &f.cert_q2)] {
        println!(
            "{name}: corner Gelfand estimates {:.2e} {:.2e}, valid {}",
            cert.corner_estimates[0], cert.corner_estimates[1], cert.valid
        );
    }
    for e in f.l_bound.entries.iter().take(5) {
        println!("‖R^{}‖ = {:.3e} ≤ {:.3e}", e.n, e.computed, e.bound);
    }
    Ok(())
}
