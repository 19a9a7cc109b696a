//! Small fixed-size linear algebra, polynomials and root finding.
//!
//! Everything here is sized for the 4-state plant: 2×2 and 4×4 real
//! matrices, and real polynomials of low degree.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Pivots at or below this magnitude (after row scaling) are treated as zero.
pub const PIVOT_TOL: f64 = 1e-10;

/// Default relative tolerance used by [`rank`].
pub const RANK_TOL: f64 = 1e-9;

const ROOT_MAX_ITER: usize = 500;

/// 4-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec4(pub [f64; 4]);

/// Row-major 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat4(pub [[f64; 4]; 4]);

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Vec4 {
    pub const ZERO: Vec4 = Vec4([0.0; 4]);

    pub fn dot(&self, other: &Vec4) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, k: f64) -> Vec4 {
        Vec4(self.0.map(|v| v * k))
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Row vector times matrix.
    pub fn mul_mat(&self, m: &Mat4) -> Vec4 {
        let mut out = [0.0; 4];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|i| self.0[i] * m.0[i][j]).sum();
        }
        Vec4(out)
    }
}

impl Index<usize> for Vec4 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec4 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Vec4 {
    type Output = Vec4;
    fn add(self, rhs: Vec4) -> Vec4 {
        Vec4(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl Sub for Vec4 {
    type Output = Vec4;
    fn sub(self, rhs: Vec4) -> Vec4 {
        Vec4(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl Mat4 {
    pub const ZERO: Mat4 = Mat4([[0.0; 4]; 4]);

    pub fn identity() -> Mat4 {
        Mat4::diag([1.0; 4])
    }

    pub fn diag(d: [f64; 4]) -> Mat4 {
        let mut m = Mat4::ZERO;
        for i in 0..4 {
            m.0[i][i] = d[i];
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: [Vec4; 4]) -> Mat4 {
        Mat4(std::array::from_fn(|i| std::array::from_fn(|j| cols[j].0[i])))
    }

    pub fn column(&self, j: usize) -> Vec4 {
        Vec4(std::array::from_fn(|i| self.0[i][j]))
    }

    pub fn row(&self, i: usize) -> Vec4 {
        Vec4(self.0[i])
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn transpose(&self) -> Mat4 {
        Mat4(std::array::from_fn(|i| std::array::from_fn(|j| self.0[j][i])))
    }

    pub fn scale(&self, k: f64) -> Mat4 {
        Mat4(self.0.map(|r| r.map(|v| v * k)))
    }

    pub fn mul_vec(&self, v: &Vec4) -> Vec4 {
        Vec4(std::array::from_fn(|i| self.row(i).dot(v)))
    }

    /// Outer product `u·vᵀ`.
    pub fn outer(u: &Vec4, v: &Vec4) -> Mat4 {
        Mat4(std::array::from_fn(|i| std::array::from_fn(|j| u.0[i] * v.0[j])))
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flat_map(|r| r.iter()).all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Mat4 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat4 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Add for Mat4 {
    type Output = Mat4;
    fn add(self, rhs: Mat4) -> Mat4 {
        Mat4(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][j] + rhs.0[i][j])
        }))
    }
}

impl Sub for Mat4 {
    type Output = Mat4;
    fn sub(self, rhs: Mat4) -> Mat4 {
        Mat4(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][j] - rhs.0[i][j])
        }))
    }
}

impl Mul for Mat4 {
    type Output = Mat4;
    fn mul(self, rhs: Mat4) -> Mat4 {
        Mat4(std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..4).map(|k| self.0[i][k] * rhs.0[k][j]).sum())
        }))
    }
}

impl fmt::Display for Mat4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.0 {
            writeln!(
                f,
                "  [{:>12.6} {:>12.6} {:>12.6} {:>12.6}]",
                row[0], row[1], row[2], row[3]
            )?;
        }
        Ok(())
    }
}

impl Mat2 {
    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }
}

/// Solves `m·u = rhs` by Cramer's rule.
pub fn solve_linear_2x2(m: &Mat2, rhs: [f64; 2]) -> Result<[f64; 2]> {
    let det = m.det();
    if det.abs() <= 1e-12 {
        return Err(Error::SingularMatrix);
    }
    let [[a, b], [c, d]] = m.0;
    Ok([(rhs[0] * d - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det])
}

/// Gauss–Jordan inverse with partial pivoting on row-scaled magnitudes.
pub fn invert_4x4(m: &Mat4) -> Result<Mat4> {
    let mut a = m.0;
    let mut inv = Mat4::identity().0;
    // Row scale factors, so the pivot test is relative to each row's size.
    let mut scale = [0.0; 4];
    for (i, s) in scale.iter_mut().enumerate() {
        *s = a[i].iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if *s == 0.0 {
            return Err(Error::SingularMatrix);
        }
    }
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&p, &q| {
                (a[p][col].abs() / scale[p]).total_cmp(&(a[q][col].abs() / scale[q]))
            })
            .expect("non-empty range");
        if a[piv][col].abs() / scale[piv] <= PIVOT_TOL {
            return Err(Error::SingularMatrix);
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        scale.swap(col, piv);
        let p = a[col][col];
        for j in 0..4 {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..4 {
            if r == col {
                continue;
            }
            let f = a[r][col];
            if f == 0.0 {
                continue;
            }
            for j in 0..4 {
                a[r][j] -= f * a[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    let out = Mat4(inv);
    if !out.is_finite() {
        return Err(Error::SingularMatrix);
    }
    Ok(out)
}

/// Numerical rank by Gaussian elimination with partial pivoting.
///
/// Rows are first scaled by their largest entry, so the result does not
/// depend on row scaling; a pivot counts when it exceeds `tol`.
pub fn rank(m: &Mat4, tol: f64) -> usize {
    let mut a = m.0;
    for row in a.iter_mut() {
        let s = row.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    let mut r = 0;
    for col in 0..4 {
        if r == 4 {
            break;
        }
        let piv = (r..4)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .expect("non-empty range");
        if a[piv][col].abs() <= tol {
            continue;
        }
        a.swap(r, piv);
        for i in r + 1..4 {
            let f = a[i][col] / a[r][col];
            for j in col..4 {
                a[i][j] -= f * a[r][j];
            }
        }
        r += 1;
    }
    r
}

/// Real polynomial, coefficients in ascending degree.
///
/// Highest-degree zero coefficients are trimmed on construction, so the
/// leading coefficient is nonzero unless the polynomial is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl RealPolynomial {
    pub fn new(mut coeffs: Vec<f64>) -> RealPolynomial {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        RealPolynomial { coeffs }
    }

    /// Builds from coefficients ordered highest degree first, e.g. `[1, 110, 54.2575, 15, 0]`.
    pub fn from_descending(coeffs: &[f64]) -> RealPolynomial {
        RealPolynomial::new(coeffs.iter().rev().copied().collect())
    }

    /// Monic polynomial with the given roots. Complex roots must come in
    /// conjugate pairs for the imaginary parts to cancel; they are dropped.
    pub fn from_roots(roots: &[Complex64]) -> RealPolynomial {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (i, ci) in c.iter().enumerate() {
                next[i + 1] += ci;
                next[i] -= ci * r;
            }
            c = next;
        }
        RealPolynomial::new(c.into_iter().map(|z| z.re).collect())
    }

    pub fn zero() -> RealPolynomial {
        RealPolynomial::new(vec![0.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `s^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn monic(&self) -> RealPolynomial {
        let lead = self.leading();
        RealPolynomial::new(self.coeffs.iter().map(|c| c / lead).collect())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Multiplies by `s^k`.
    pub fn shift(&self, k: usize) -> RealPolynomial {
        if self.is_zero() {
            return self.clone();
        }
        let mut c = vec![0.0; k];
        c.extend_from_slice(&self.coeffs);
        RealPolynomial::new(c)
    }

    pub fn scale(&self, k: f64) -> RealPolynomial {
        RealPolynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn derivative(&self) -> RealPolynomial {
        if self.degree() == 0 {
            return RealPolynomial::zero();
        }
        RealPolynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| i as f64 * c)
                .collect(),
        )
    }
}

impl fmt::Display for RealPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = c.abs();
            let show_coeff = k == 0 || (a - 1.0).abs() > 1e-12;
            if show_coeff {
                write!(f, "{}", trim_float(a))?;
            }
            match k {
                0 => {}
                1 => write!(f, "s")?,
                _ => write!(f, "s^{k}")?,
            }
        }
        Ok(())
    }
}

fn trim_float(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Characteristic polynomial and adjugate terms from the Faddeev–LeVerrier
/// recursion.
///
/// Returns the monic `det(sI − m)` and the matrices `N₀..N₃` with
/// `adj(sI − m) = Σ_k s^(3−k)·N_k`.
pub fn faddeev_leverrier(m: &Mat4) -> (RealPolynomial, [Mat4; 4]) {
    let mut n = [Mat4::ZERO; 4];
    // desc[k] is the coefficient of s^(4-k).
    let mut desc = [0.0; 5];
    desc[0] = 1.0;
    n[0] = Mat4::identity();
    for k in 1..=4 {
        let am = *m * n[k - 1];
        desc[k] = -am.trace() / k as f64;
        if k < 4 {
            n[k] = am + Mat4::identity().scale(desc[k]);
        }
    }
    (RealPolynomial::from_descending(&desc), n)
}

/// Monic characteristic polynomial `det(sI − m)`.
pub fn characteristic_polynomial(m: &Mat4) -> RealPolynomial {
    faddeev_leverrier(m).0
}

/// All complex roots by Durand–Kerner iteration.
///
/// Exact zero low-order coefficients are deflated first so roots at the
/// origin come out exactly. Roots are sorted by (real, imaginary) and
/// conjugate pairs are symmetrized.
pub fn poly_roots(p: &RealPolynomial) -> Result<Vec<Complex64>> {
    if p.is_zero() || p.degree() == 0 {
        return Err(Error::InvalidArgument(
            "root finding needs a polynomial of degree >= 1".into(),
        ));
    }
    let coeffs = p.coeffs();
    let zeros_at_origin = coeffs.iter().take_while(|c| **c == 0.0).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    let rest = RealPolynomial::new(coeffs[zeros_at_origin..].to_vec()).monic();
    if rest.degree() > 0 {
        roots.extend(durand_kerner(&rest)?);
    }
    let roots = merge_multiple_roots(&rest, roots);
    Ok(finish_roots(roots))
}

/// Replaces clusters that behave like a single multiple root.
///
/// Iterates converge to a `k`-fold root only to about `eps^(1/k)`. A cluster
/// of `k` iterates is polished by Newton's method on `p^(k−1)`, for which the
/// multiple root is simple, and merged only if `p` and its first `k − 1`
/// derivatives all vanish there; distinct close roots fail that test.
fn merge_multiple_roots(p: &RealPolynomial, mut roots: Vec<Complex64>) -> Vec<Complex64> {
    let n = roots.len();
    let mut cluster_of: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            let radius = 1e-2 * (1.0 + roots[i].norm().max(roots[j].norm()));
            if (roots[i] - roots[j]).norm() <= radius {
                let (a, b) = (cluster_of[i], cluster_of[j]);
                cluster_of.iter_mut().filter(|c| **c == b).for_each(|c| *c = a);
            }
        }
    }
    for id in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| cluster_of[i] == id).collect();
        let k = members.len();
        if k < 2 {
            continue;
        }
        let mut z = members.iter().map(|&i| roots[i]).sum::<Complex64>() / k as f64;
        let mut q = p.clone();
        for _ in 1..k {
            q = q.derivative();
        }
        let dq = q.derivative();
        for _ in 0..50 {
            let d = dq.eval_complex(z);
            if d.norm() == 0.0 {
                break;
            }
            let step = q.eval_complex(z) / d;
            z -= step;
            if step.norm() <= 1e-16 * (1.0 + z.norm()) {
                break;
            }
        }
        let mut d = p.clone();
        let mut multiple = true;
        for _ in 0..k {
            // Rounding error bound for evaluating d at z.
            let bound: f64 = d
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| c.abs() * z.norm().powi(i as i32))
                .sum();
            if d.eval_complex(z).norm() > 64.0 * f64::EPSILON * bound {
                multiple = false;
                break;
            }
            d = d.derivative();
        }
        if multiple {
            for &i in &members {
                roots[i] = z;
            }
        }
    }
    roots
}

fn durand_kerner(p: &RealPolynomial) -> Result<Vec<Complex64>> {
    let n = p.degree();
    let c = p.coeffs();
    if n == 1 {
        return Ok(vec![Complex64::new(-c[0], 0.0)]);
    }
    let radius = 1.0 + c[..n].iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    // Offset angle keeps the start points off the real axis and off any
    // symmetric configuration.
    const OFFSET: f64 = 0.4;
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            Complex64::from_polar(
                radius,
                OFFSET + 2.0 * std::f64::consts::PI * k as f64 / n as f64,
            )
        })
        .collect();
    let tol = 1e-10 * p.max_abs_coeff();
    let mut polish = 0;
    for _ in 0..ROOT_MAX_ITER {
        let mut max_step = 0.0_f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                // Coincident iterates; nudge apart.
                let nudge = Complex64::new(1e-8, 1e-8) * (1.0 + z[i].norm());
                z[i] += nudge;
                max_step = f64::INFINITY;
                continue;
            }
            let step = p.eval_complex(z[i]) / denom;
            z[i] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
        }
        let residual = z
            .iter()
            .map(|&r| p.eval_complex(r).norm())
            .fold(0.0_f64, f64::max);
        if residual <= tol {
            // A few extra sweeps tighten simple roots to full precision.
            polish += 1;
            if max_step <= 1e-15 || polish > 4 {
                return Ok(z);
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: ROOT_MAX_ITER,
    })
}

fn finish_roots(mut roots: Vec<Complex64>) -> Vec<Complex64> {
    let n = roots.len();
    let mut paired = vec![false; n];
    for i in 0..n {
        let zi = roots[i];
        let tiny = 1e-9 * (1.0 + zi.norm());
        if paired[i] || zi.im.abs() <= tiny {
            continue;
        }
        let target = zi.conj();
        let partner = (0..n)
            .filter(|&j| j != i && !paired[j] && roots[j].im.signum() != zi.im.signum())
            .min_by(|&a, &b| {
                (roots[a] - target)
                    .norm()
                    .total_cmp(&(roots[b] - target).norm())
            });
        if let Some(j) = partner {
            let zj = roots[j];
            let re = 0.5 * (zi.re + zj.re);
            let im = 0.5 * (zi.im - zj.im);
            roots[i] = Complex64::new(re, im);
            roots[j] = Complex64::new(re, -im);
            paired[i] = true;
            paired[j] = true;
        }
    }
    for (i, r) in roots.iter_mut().enumerate() {
        if !paired[i] {
            r.im = 0.0;
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Eigenvalues of a 4×4 matrix as the roots of its characteristic polynomial.
pub fn eigenvalues_4x4(m: &Mat4) -> Result<Vec<Complex64>> {
    poly_roots(&characteristic_polynomial(m))
}

/// Damping ratio `−Re(p)/|p|` of a pole.
pub fn damping_ratio(p: Complex64) -> f64 {
    -p.re / p.norm()
}
