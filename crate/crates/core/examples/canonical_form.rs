//! Canonical form of a matrix that is far from semi-Fredholm, and the
//! obstruction reported for a unitary one.

use opfactor::decompose::{canonical_form, CanonicalOptions};
use opfactor::family::volterra;
use opfactor::linalg::norm2;
use opfactor::{Error, Matrix};

fn main() -> opfactor::Result<()> {
    let t = volterra(24);
    let cf = canonical_form(&t, &CanonicalOptions::default())?;
    let [p, d, q] = cf.blocks.part_dims();
    println!("Volterra 24: parts {p}, {d}, {q} with padding {}", cf.padding);
    println!("similarity residual {:.2e}", cf.residual);
    println!("‖K‖ = {:.3e}, ‖L‖ = {:.3e}", norm2(&cf.blocks.k), norm2(&cf.blocks.l));
    println!("corner singular values within their bounds: {}", cf.compactness.within_bounds);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ");
    println!("‖T f_n‖: {}", fmt(&cf.sequence.f_residuals));
    println!("‖T* g_n‖: {}", fmt(&cf.sequence.g_residuals));

    match canonical_form(&Matrix::identity(24, 24), &CanonicalOptions::default()) {
        Err(Error::SemiFredholmObstruction { step, value, eps }) => {
            println!("identity: obstruction at step {step}, σ_min {value} not below {eps}")
        }
        other => println!("identity: unexpected {:?}", other.map(|_| ())),
    }
    Ok(())
}
