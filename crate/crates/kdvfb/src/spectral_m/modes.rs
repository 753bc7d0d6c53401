use super::pairs::CriticalPair;

/// Closed-form complex eigenfunction attached to a critical pair:
/// `phi(x) = sum_j c_j exp(i mu_j x)` with `mu_j - mu_j^3 = omega` for all j.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticMode {
    pub pair: CriticalPair,
    mu: [f64; 3],
    coef: [f64; 3],
}

impl AnalyticMode {
    pub fn new(pair: CriticalPair) -> Self {
        let (l, k) = (pair.l as f64, pair.k as f64);
        let nu = 2.0 * std::f64::consts::PI / pair.length();
        Self {
            pair,
            mu: [
                -(2.0 * l + k) * nu / 3.0,
                (l - k) * nu / 3.0,
                (l + 2.0 * k) * nu / 3.0,
            ],
            coef: [k, -(l + k), l],
        }
    }

    pub fn wavenumbers(&self) -> [f64; 3] {
        self.mu
    }

    /// Common value of `mu - mu^3` over the three wavenumbers.
    pub fn omega(&self) -> f64 {
        let m = self.mu[0];
        m - m * m * m
    }

    /// (Re, Im) of the `order`-th derivative at `x`.
    pub fn eval(&self, x: f64, order: u32) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..3 {
            let mu = self.mu[j];
            let amp = self.coef[j] * mu.powi(order as i32);
            let (s, c) = (mu * x).sin_cos();
            // multiply (c + i s) by i^order
            let (r, i) = match order % 4 {
                0 => (c, s),
                1 => (-s, c),
                2 => (-c, -s),
                _ => (s, -c),
            };
            re += amp * r;
            im += amp * i;
        }
        (re, im)
    }

    /// Real basis component: 0 for the real part, 1 for the imaginary part.
    pub fn component(&self, x: f64, order: u32, part: usize) -> f64 {
        let (re, im) = self.eval(x, order);
        if part == 0 {
            re
        } else {
            im
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispersion_relation_shared_by_roots() {
        for (l, k) in [(2, 1), (9, 1), (6, 5), (11, 2), (4, 4)] {
            let m = AnalyticMode::new(CriticalPair::new(l, k));
            let w = m.omega();
            for mu in m.wavenumbers() {
                assert!((mu - mu.powi(3) - w).abs() < 1e-13);
            }
            assert!((w - m.pair.omega()).abs() < 1e-13);
        }
    }

    #[test]
    fn boundary_values_vanish() {
        for (l, k) in [(2, 1), (9, 1), (6, 5), (3, 3)] {
            let m = AnalyticMode::new(CriticalPair::new(l, k));
            let len = m.pair.length();
            for x in [0.0, len] {
                for order in 0..2 {
                    let (re, im) = m.eval(x, order);
                    assert!(
                        re.abs() < 1e-12 && im.abs() < 1e-12,
                        "{l},{k} x={x} d={order}"
                    );
                }
            }
        }
    }

    #[test]
    fn ode_residual() {
        let m = AnalyticMode::new(CriticalPair::new(2, 1));
        let w = m.omega();
        for i in 0..50 {
            let x = i as f64 * 0.19;
            let (r1, i1) = m.eval(x, 1);
            let (r3, i3) = m.eval(x, 3);
            let (r0, i0) = m.eval(x, 0);
            // phi' + phi''' = i omega phi
            assert!((r1 + r3 + w * i0).abs() < 1e-12);
            assert!((i1 + i3 - w * r0).abs() < 1e-12);
        }
    }
}
