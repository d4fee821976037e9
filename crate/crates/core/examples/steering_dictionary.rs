//! Builds the steering dictionary of a half-wavelength-violating array and
//! lists the grid angles whose columns are (nearly) indistinguishable.

use pavbem::model::{build_dictionary, default_angle_grid};

fn main() -> pavbem::error::Result<()> {
    let n = 256;
    let dict = build_dictionary(n, 4.0, &default_angle_grid(50)?)?;
    println!(
        "{} sensors x {} atoms, d_i^H d_i = {}",
        dict.n_sensors(),
        dict.n_atoms(),
        dict.column_norm_sq(0)
    );

    let deg = |i: usize| dict.angles()[i].to_degrees();
    println!("pairs with coherence > 0.9:");
    for i in 0..dict.n_atoms() {
        for j in i + 1..dict.n_atoms() {
            let c = dict.column_dot(i, dict.column(j)).norm() / n as f64;
            if c > 0.9 {
                println!(
                    "  atoms {i:2} ({:7.2} deg) and {j:2} ({:7.2} deg): {c:.4}",
                    deg(i),
                    deg(j)
                );
            }
        }
    }
    Ok(())
}
