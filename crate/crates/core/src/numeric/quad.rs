/// Mean of a 2π-periodic function over one period.
///
/// Uses the trapezoid rule with successive node doubling. For smooth periodic
/// integrands the rule converges geometrically, so doubling until two
/// consecutive estimates agree to `rel_tol` is an adaptive scheme in the node
/// count. `f` receives the phase θ ∈ [0, 2π).
pub fn periodic_mean<F: Fn(f64) -> f64>(f: F, rel_tol: f64) -> f64 {
    let mut n = 32usize;
    let mut sum: f64 = (0..n).map(|k| f(std::f64::consts::TAU * k as f64 / n as f64)).sum();
    let mut mean = sum / n as f64;
    loop {
        // Odd nodes of the refined grid.
        let fresh: f64 = (0..n)
            .map(|k| f(std::f64::consts::TAU * (2 * k + 1) as f64 / (2 * n) as f64))
            .sum();
        sum += fresh;
        n *= 2;
        let next = sum / n as f64;
        let scale = next.abs().max(1e-300);
        if (next - mean).abs() <= rel_tol * scale || n >= 1 << 20 {
            return next;
        }
        mean = next;
    }
}

/// Fixed-node trapezoid mean, used where the same node set is reused for
/// several quantities (Fourier coefficients of one sampled period).
pub fn periodic_nodes(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| std::f64::consts::TAU * k as f64 / n as f64)
}
