//! Gauss–Hermite quadrature for expectations under a Gaussian.

/// Nodes and weights for `∫ e^{−x²} f(x) dx ≈ Σ w_i f(x_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Roots by Newton iteration on the orthonormal Hermite recurrence, using
    /// the usual asymptotic initial guesses for the largest roots.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "quadrature needs at least one node");
        const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (PIM4, 0.0);
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    /// `E[f(X)]` for `X ~ N(mean, std²)`.
    pub fn expect_normal(&self, mean: f64, std: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let scale = std::f64::consts::SQRT_2 * std;
        let s: f64 = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(mean + scale * x)).sum();
        s / std::f64::consts::PI.sqrt()
    }

    /// Points `mean + √2·std·x_i` with probability weights summing to one.
    pub fn normal_points(&self, mean: f64, std: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let scale = std::f64::consts::SQRT_2 * std;
        let norm = std::f64::consts::PI.sqrt();
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mean + scale * x, w / norm))
    }
}
