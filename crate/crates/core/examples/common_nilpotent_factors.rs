//! One nilpotent `N` shared by a whole family, `T_i = N·N_i·N`, and the
//! two-sided variant `T_i = N1·S_i·N2`.

use opfactor::family::{generate, FamilyDescriptor, FamilyKind};
use opfactor::nil::{common_nilpotent_sandwich, common_nilpotent_two_sided, NilOptions};

fn main() -> opfactor::Result<()> {
    let desc = FamilyDescriptor::new(FamilyKind::RandomSingular, 12).kernel_dim(4).seed(5).count(3).structured();
    let ts = generate(&desc)?.matrices;

    let s = common_nilpotent_sandwich(&ts, &NilOptions::default())?;
    println!("sandwich: index of N {:?}, inner indices {:?}", s.index, s.inner_indices);
    for (i, r) in s.residuals.iter().enumerate() {
        println!("  ‖N·N_{i}·N − T_{i}‖_F / ‖T_{i}‖_F = {r:.2e}");
    }

    let t = common_nilpotent_two_sided(&ts, &NilOptions::default())?;
    println!("two-sided: indices {:?}", t.indices);
    for (i, (r, c)) in t.residuals.iter().zip(&t.product_cube_ratios).enumerate() {
        println!("  residual {r:.2e}, cubes of N1·S_{i} and S_{i}·N2: {:.1e} {:.1e}", c[0], c[1]);
    }
    Ok(())
}
