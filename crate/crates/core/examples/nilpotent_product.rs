//! Writes a singular matrix as a product of two nilpotent matrices of index
//! at most three, padding with zero coordinates only when the kernel is too
//! small.

use opfactor::linalg::{c, Matrix};
use opfactor::nil::{factor_two_nilpotents, NilOptions};

fn main() -> opfactor::Result<()> {
    // rank 4 on a 7-dimensional space
    let a = Matrix::from_fn(7, 4, |i, j| c((i + 2 * j) as f64 % 5.0 - 2.0, (i * j) as f64 % 3.0 - 1.0));
    let b = Matrix::from_fn(4, 7, |i, j| c(((3 * i + j) % 4) as f64 - 1.5, ((i + j) % 2) as f64));
    let t = a * b;

    let f = factor_two_nilpotents(&t, &NilOptions::default())?;
    let [d1, d2, d3] = f.decomposition.decomposition.dims();
    println!("parts {d1} + {d2} + {d3}, padding {}", f.decomposition.padding.total);
    println!("nilpotency indices {:?}", f.indices);
    println!("cube ratios {:.2e} {:.2e}", f.cube_ratios[0], f.cube_ratios[1]);
    println!("‖MN − T ⊕ 0‖_F / ‖T‖_F = {:.2e}", f.residual);

    // an invertible matrix needs padding; refusing it is an error
    let id = Matrix::identity(3, 3);
    match factor_two_nilpotents(&id, &NilOptions::no_padding()) {
        Err(e) => println!("identity without padding: {e}"),
        Ok(_) => unreachable!(),
    }
    let f = factor_two_nilpotents(&id, &NilOptions::default())?;
    println!("identity with padding {}: residual {:.2e}", f.decomposition.padding.total, f.residual);
    Ok(())
}
