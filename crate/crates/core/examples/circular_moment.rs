//! Evaluates I1(x)/I0(x) over a wide range and compares the resulting circular
//! moment with the exact Gaussian value exp(-v/2).

use pavbem::phase::{bessel_ratio, circular_moment};

fn main() -> pavbem::error::Result<()> {
    println!("x           I1(x)/I0(x)");
    for x in [0.0, 1e-3, 0.5, 1.0, 4.0, 10.0, 29.9, 30.0, 100.0, 1e4, 1e8] {
        println!("{x:<11} {:.15}", bessel_ratio(x)?);
    }
    println!("\nvariance  |moment|  exp(-v/2)  abs error");
    for v in [1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 4.0] {
        let m = circular_moment(0.3, v)?;
        let exact = (-v / 2.0_f64).exp();
        println!(
            "{v:<9} {:.6}  {exact:.6}   {:.2e}",
            m.norm(),
            (m.norm() - exact).abs()
        );
    }
    Ok(())
}
