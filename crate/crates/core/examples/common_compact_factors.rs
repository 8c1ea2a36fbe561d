//! A weighted shift `Q` with `K_i = L_i·Q` for a family of compact
//! matrices, and the closed form of its even powers.

use opfactor::family::compact_family;
use opfactor::qn::common_right_factor_compact;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> opfactor::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ks = compact_family(60, 0.5, 3, &mut rng)?;
    let f = common_right_factor_compact(&ks)?;

    println!("first weights {:?}", &f.weights[..4]);
    println!("residuals {:?}", f.residuals(&ks));
    println!("cofactor growth {:.3} (at most 1)", f.cofactor_growth());

    let report = f.power_identity(6)?;
    for e in &report.entries {
        println!("m = {}: ‖Q^2m‖ = {:.3e}, closed form {:.3e}, bound {:.3e}", e.m, e.shift, e.closed_form, e.bound);
    }
    println!("Gelfand estimate over 20 powers {:.3e}", f.gelfand(20)?);
    Ok(())
}
