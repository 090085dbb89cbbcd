//! Element quadrature: Gauss-Legendre on intervals and symmetric rules on
//! triangles. Weights are normalised to sum to one, so callers multiply by the
//! element measure.

/// Rule on the reference interval [0, 1].
#[derive(Debug, Clone)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    /// `n`-point Gauss-Legendre rule, exact for degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> LineRule {
        assert!(n >= 1);
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Chebyshev initial guess, then Newton on P_n.
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            points[i] = 0.5 * (1.0 - z);
            points[n - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        LineRule { points, weights }
    }

    /// Smallest Gauss-Legendre rule exact for polynomials of `degree`.
    pub fn for_degree(degree: usize) -> LineRule {
        LineRule::gauss_legendre((degree + 2).div_ceil(2).max(1))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Rule on a triangle in barycentric coordinates.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Lowest-order tabulated symmetric rule exact for `degree`, or a collapsed
    /// Gauss product rule beyond degree 8.
    pub fn for_degree(degree: usize) -> TriangleRule {
        let mut r = TriangleRule { points: Vec::new(), weights: Vec::new(), degree: 0 };
        match degree {
            0 | 1 => {
                r.centroid(1.0);
                r.degree = 1;
            }
            2 => {
                r.orbit3(1.0 / 6.0, 1.0 / 3.0);
                r.degree = 2;
            }
            3 | 4 => {
                r.orbit3(0.445948490915965, 0.223381589678011);
                r.orbit3(0.091576213509771, 0.109951743655322);
                r.degree = 4;
            }
            5 => {
                r.centroid(0.225);
                r.orbit3(0.470142064105115, 0.132394152788506);
                r.orbit3(0.101286507323456, 0.125939180544827);
                r.degree = 5;
            }
            6 => {
                r.orbit3(0.249286745170910, 0.116786275726379);
                r.orbit3(0.063089014491502, 0.050844906370207);
                r.orbit6(0.053145049844817, 0.310352451033784, 0.082851075618374);
                r.degree = 6;
            }
            7 | 8 => {
                r.centroid(0.144315607677787);
                r.orbit3(0.459292588292723, 0.095091634267285);
                r.orbit3(0.170569307751760, 0.103217370534718);
                r.orbit3(0.050547228317031, 0.032458497623198);
                r.orbit6(0.008394777409958, 0.263112829634638, 0.027230314174435);
                r.degree = 8;
            }
            d => return TriangleRule::collapsed(d),
        }
        r
    }

    /// Duffy-collapsed tensor Gauss rule, exact for `degree`.
    pub fn collapsed(degree: usize) -> TriangleRule {
        let n = (degree + 3).div_ceil(2);
        let g = LineRule::gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (s, ws) in g.points.iter().zip(&g.weights) {
            for (t, wt) in g.points.iter().zip(&g.weights) {
                let xi = *s;
                let eta = t * (1.0 - s);
                points.push([1.0 - xi - eta, xi, eta]);
                // Reference area 1/2, jacobian (1 - s).
                weights.push(2.0 * ws * wt * (1.0 - s));
            }
        }
        TriangleRule { points, weights, degree }
    }

    fn centroid(&mut self, w: f64) {
        self.points.push([1.0 / 3.0; 3]);
        self.weights.push(w);
    }

    fn orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[a, a, b], [a, b, a], [b, a, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    fn orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..=8 {
            let r = LineRule::gauss_legendre(n);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..(2 * n) {
                let q: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!((q - exact).abs() < 1e-14, "n={n} k={k}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn triangle_rules_integrate_monomials() {
        // Average of x^a y^b over the reference triangle is 2 a! b! / (a+b+2)!.
        for degree in [1, 2, 4, 5, 6, 8, 10, 13] {
            let r = TriangleRule::for_degree(degree);
            assert!(r.degree >= degree);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    let exact = 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!((q - exact).abs() < 1e-13, "degree {degree}: x^{a} y^{b}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn symmetric_rules_are_permutation_invariant() {
        for degree in [2, 4, 5, 6, 8] {
            let r = TriangleRule::for_degree(degree);
            for p in &r.points {
                let swapped = [p[1], p[0], p[2]];
                assert!(r.points.iter().any(|q| (0..3).all(|i| (q[i] - swapped[i]).abs() < 1e-15)));
            }
        }
    }
}
