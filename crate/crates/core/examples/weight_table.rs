//! Operator-string weights of the diabatic and adiabatic expansions up to
//! third order, the quadrature check, and the truncated-series gap on a
//! random two-level pair.

use diabatic_cvqe::series::{compare_truncated_series, enumerate_order, verify_weights_numeric};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn main() -> diabatic_cvqe::error::Result<()> {
    for order in 1..=3 {
        for row in enumerate_order(order)? {
            println!("{:<8} w = {:<6} wbar = {:<6} tau^{}", row.pattern.to_string(), row.diabatic.to_string(), row.adiabatic.to_string(), row.tau_power);
        }
    }
    println!("quadrature deviation through order 4: {:.2e}", verify_weights_numeric(4, 12)?);

    let c = |re: f64, im: f64| Complex64::new(re, im);
    let h0 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    let h1 = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.4, -0.2), c(0.4, 0.2), c(0.3, 0.0)]);
    for order in 1..=4 {
        let gap = compare_truncated_series(&h0, &h1, 0.3, order)?;
        println!("order {order}: diabatic gap {:.3e}, adiabatic gap {:.3e}", gap.diabatic, gap.adiabatic);
    }
    Ok(())
}
