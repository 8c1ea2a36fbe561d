//! `V·(T_i ⊕ 0)·V⁻¹ = Q′₁·S′_i·Q′₂` with cyclic quasi-nilpotent outer
//! factors shared by the family.

use opfactor::family::compact_family;
use opfactor::qn::{common_factor_general, GeneralOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> opfactor::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ts = compact_family(24, 0.7, 3, &mut rng)?;
    let f = common_factor_general(&ts, &GeneralOptions::default())?;

    println!("space {} after padding {}", f.v.nrows(), f.padding);
    println!("residuals {:?}", f.residuals);
    println!("pulled back {:?}", f.pullback_residuals);
    println!("cube errors {:?}", f.cube_errors);
    println!("Gelfand estimates of R and Q {:?}", f.gelfand);
    println!("smallest stacked singular values {:?}", f.stacked_smallest);
    Ok(())
}
