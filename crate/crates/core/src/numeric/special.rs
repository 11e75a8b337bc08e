use std::f64::consts::TAU;

/// Bessel function of the first kind, integer order.
///
/// Evaluated from Bessel's integral
/// `J_n(x) = (1/2π) ∫ cos(nτ − x sin τ) dτ` with the trapezoid rule, which is
/// spectrally accurate for this periodic integrand once the node count exceeds
/// `|x| + |n|` by a comfortable margin.
pub fn bessel_j(order: i32, x: f64) -> f64 {
    let nodes = 64 + 4 * (x.abs().ceil() as usize + order.unsigned_abs() as usize);
    let n = order as f64;
    let sum: f64 = (0..nodes)
        .map(|k| {
            let tau = TAU * k as f64 / nodes as f64;
            (n * tau - x * tau.sin()).cos()
        })
        .sum();
    sum / nodes as f64
}

pub fn bessel_j1(x: f64) -> f64 {
    bessel_j(1, x)
}
