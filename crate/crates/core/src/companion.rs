//! Local univariate polynomials and their roots via companion matrices.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::DiscreteSystem;

/// Which roots of a local polynomial become candidate nodal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootMode {
    /// Real roots only (imaginary part within tolerance).
    #[default]
    RealOnly,
    /// Real parts of all roots.
    RealParts,
}

impl std::str::FromStr for RootMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<RootMode> {
        match s {
            "real_only" => Ok(RootMode::RealOnly),
            "real_parts" => Ok(RootMode::RealParts),
            other => Err(Error::Config(format!("unknown root mode '{other}' (expected real_only or real_parts)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    pub imag_tol: f64,
    pub dedup_tol: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions { imag_tol: 1e-9, dedup_tol: 1e-8 }
    }
}

/// Dense real polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct UniPoly {
    coeffs: Vec<f64>,
}

impl UniPoly {
    /// Drops exactly-zero trailing coefficients.
    pub fn new(mut coeffs: Vec<f64>) -> UniPoly {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        UniPoly { coeffs }
    }

    /// Monic polynomial with the given real roots.
    pub fn from_roots(roots: &[f64]) -> UniPoly {
        let mut c = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; c.len() + 1];
            for (k, ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= r * ck;
            }
            c = next;
        }
        UniPoly::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    fn eval_complex_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        self.coeffs.iter().rev().fold((zero, zero), |(p, dp), &c| (p * z + c, dp * z + p))
    }

    pub fn scaled(&self, s: f64) -> UniPoly {
        UniPoly::new(self.coeffs.iter().map(|c| c * s).collect())
    }
}

/// All roots of a polynomial plus the filtered real ones.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    pub real_roots: Vec<f64>,
}

impl RootSet {
    pub fn from_roots(roots: Vec<Complex64>, opts: &RootOptions) -> RootSet {
        let mut rs = RootSet { roots, real_roots: Vec::new() };
        rs.real_roots = real_roots(&rs, RootMode::RealOnly, opts);
        rs
    }
}

/// Fits the polynomial `y -> component(y)` of known maximal `degree` from
/// samples at Chebyshev points on `[-R, R]`, `R = max(1, 2 |center|)`.
/// Coefficients below `1e-12` of the largest (in the scaled variable) are
/// set to zero.
pub fn fit_polynomial(mut component: impl FnMut(f64) -> f64, degree: usize, center: f64) -> UniPoly {
    let n = degree + 1;
    let r = (2.0 * center.abs()).max(1.0);
    let ts: Vec<f64> = (0..n)
        .map(|k| (std::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64).cos())
        .collect();
    let v = DMatrix::from_fn(n, n, |i, j| ts[i].powi(j as i32));
    let rhs = DVector::from_iterator(n, ts.iter().map(|&t| component(r * t)));
    let a = v.lu().solve(&rhs).expect("Chebyshev Vandermonde matrix is nonsingular");
    let amax = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let coeffs = a
        .iter()
        .enumerate()
        .map(|(k, &ak)| if ak.abs() <= 1e-12 * amax { 0.0 } else { ak / r.powi(k as i32) })
        .collect();
    UniPoly::new(coeffs)
}

/// The residual component at free node `node` as a polynomial in that node's
/// value, with every other value frozen.
pub fn local_polynomial<S: DiscreteSystem + ?Sized>(sys: &S, frozen: &[f64], node: usize) -> Result<UniPoly> {
    if !sys.is_free(node) {
        return Err(Error::InvalidInput(format!("node {node} is constrained")));
    }
    let mut u = frozen.to_vec();
    let p = fit_polynomial(
        |y| {
            u[node] = y;
            sys.residual_component(&u, node)
        },
        sys.local_degree(),
        frozen[node],
    );
    if p.is_zero() {
        return Err(Error::DegeneratePolynomial { node });
    }
    Ok(p)
}

/// Companion matrix: ones on the subdiagonal, last column `-c_j / c_m`.
pub fn companion_matrix(p: &UniPoly) -> Result<DMatrix<f64>> {
    let m = p.degree();
    let c = p.coeffs();
    if m == 0 || c[m] == 0.0 {
        return Err(Error::ZeroLeadingCoefficient);
    }
    let mut mat = DMatrix::zeros(m, m);
    for j in 0..m.saturating_sub(1) {
        mat[(j + 1, j)] = 1.0;
    }
    for j in 0..m {
        mat[(j, m - 1)] = -c[j] / c[m];
    }
    Ok(mat)
}

/// All complex roots as eigenvalues of the balanced companion matrix of the
/// normalised polynomial, each refined by a few Newton steps.
pub fn poly_roots(p: &UniPoly) -> Result<RootSet> {
    poly_roots_with(p, &RootOptions::default())
}

pub fn poly_roots_with(p: &UniPoly, opts: &RootOptions) -> Result<RootSet> {
    if p.degree() == 0 {
        return Err(Error::ZeroLeadingCoefficient);
    }
    let normalised = p.scaled(1.0 / p.norm_inf());
    let mut c = companion_matrix(&normalised)?;
    nalgebra::linalg::balancing::balance_parlett_reinsch(&mut c);
    let schur = Schur::try_new(c, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenNonConvergence { coeffs: p.coeffs().to_vec() })?;
    let roots: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|&z| polish(&normalised, z))
        .collect();
    Ok(RootSet::from_roots(roots, opts))
}

fn polish(p: &UniPoly, mut z: Complex64) -> Complex64 {
    let mut best = p.eval_complex(z).norm();
    for _ in 0..4 {
        let (v, dv) = p.eval_complex_with_derivative(z);
        if dv.norm() == 0.0 || !v.is_finite() {
            break;
        }
        let next = z - v / dv;
        let val = p.eval_complex(next).norm();
        if !(val < best) {
            break;
        }
        z = next;
        best = val;
    }
    z
}

/// Real candidates from a root set, sorted and deduplicated.
pub fn real_roots(rs: &RootSet, mode: RootMode, opts: &RootOptions) -> Vec<f64> {
    let mut vals: Vec<f64> = rs
        .roots
        .iter()
        .filter(|z| mode == RootMode::RealParts || z.im.abs() <= opts.imag_tol * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect();
    vals.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(vals.len());
    for v in vals {
        match out.last() {
            Some(&last) if (v - last).abs() <= opts.dedup_tol * last.abs().max(1.0) => {}
            _ => out.push(v),
        }
    }
    out
}
