//! Lazy block operators over ℤ: composition, truncation, power norms and
//! the triangular quasi-nilpotency certificate.

use opfactor::blockop::{
    compose, gelfand_estimate, power_norms, triangular_qn_certificate, weighted_diag_qn_bound, weighted_shift,
    BlockOperator, BlockShape, CertificateOptions, IndexRange, Region,
};
use opfactor::linalg::{c, Matrix};

fn main() -> opfactor::Result<()> {
    // bilateral shift with weights 2^-|j|, one-dimensional summands
    let shape = BlockShape::uniform(1);
    let x = BlockOperator::new(
        shape.clone(),
        shape,
        vec![Region::diagonal(1, IndexRange::between(i64::MIN / 4, i64::MAX / 4))],
        |_, j| Some(Matrix::from_element(1, 1, c(0.5f64.powi(j.unsigned_abs() as i32), 0.0))),
    );
    let seq = power_norms(&x, 12, 8)?;
    println!("‖Xⁿ‖ for n ≤ 12: {:?}", seq.values.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>());
    println!("Gelfand estimate {:.3e}, submultiplicative {}", gelfand_estimate(&seq), seq.is_submultiplicative());

    let x2 = compose(&x, &x)?;
    println!("X² band {:?}", x2.bandwidth());

    let blocks: Vec<Matrix> = (1..=5).map(|j| Matrix::identity(2, 2) * c(4f64.powi(-j), 0.0)).collect();
    let report = weighted_diag_qn_bound(&blocks, 2.0, 6)?;
    println!("weighted shift bound holds: {}", report.pass);

    let r = weighted_shift(&blocks, 2.0)?;
    let cert = triangular_qn_certificate(&r, 3, CertificateOptions::default())?;
    println!("certificate corners {:?}, valid {}", cert.corner_estimates, cert.valid);
    Ok(())
}
