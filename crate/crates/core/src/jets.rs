//! Truncated multivariate Taylor series.
//!
//! A [`Jet`] of order `k` in `dim` variables stores the Taylor coefficients
//! `c_α = ∂^α f(p) / α!` for every multi-index `|α| ≤ k`, in graded
//! lexicographic order. Because the order is graded, the coefficients of a
//! lower-order truncation are a prefix of the full table.
//!
//! Differentiating a jet lowers its order by one. Code that needs `r`
//! derivatives of a quantity therefore seeds its inputs at order `r` higher
//! than the order it wants to keep.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 3;

/// Default relative pivot threshold for [`solve`].
pub const DEFAULT_PIVOT_THRESHOLD: f64 = 1e-12;

struct Layout {
    dim: usize,
    order: usize,
    monos: Vec<Vec<u8>>,
    /// (i, j, k) with mono_i + mono_j = mono_k.
    mul: Vec<(u32, u32, u32)>,
    /// Per variable: (source index, target index in the order-1 layout, factor).
    deriv: Vec<Vec<(u32, u32, f64)>>,
    /// α! for every multi-index.
    factorial: Vec<f64>,
}

fn monomials(dim: usize, order: usize) -> Vec<Vec<u8>> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == dim - 1 {
            cur.push(left as u8);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e as u8);
            rec(dim, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 0..=order {
        let mut cur = Vec::with_capacity(dim);
        rec(dim, deg, &mut cur, &mut out);
    }
    out
}

impl Layout {
    fn build(dim: usize, order: usize) -> Layout {
        assert!(dim >= 1, "jets need at least one variable");
        let monos = monomials(dim, order);
        let index: HashMap<&[u8], usize> =
            monos.iter().enumerate().map(|(i, m)| (m.as_slice(), i)).collect();
        let degree = |m: &[u8]| m.iter().map(|&e| e as usize).sum::<usize>();

        let mut mul = Vec::new();
        let mut sum = vec![0u8; dim];
        for (i, a) in monos.iter().enumerate() {
            let da = degree(a);
            for (j, b) in monos.iter().enumerate() {
                if da + degree(b) > order {
                    continue;
                }
                for v in 0..dim {
                    sum[v] = a[v] + b[v];
                }
                mul.push((i as u32, j as u32, index[sum.as_slice()] as u32));
            }
        }

        let mut deriv = vec![Vec::new(); dim];
        if order > 0 {
            let lower = monomials(dim, order - 1);
            let lower_index: HashMap<&[u8], usize> =
                lower.iter().enumerate().map(|(i, m)| (m.as_slice(), i)).collect();
            for (v, table) in deriv.iter_mut().enumerate() {
                for (i, m) in monos.iter().enumerate() {
                    if m[v] == 0 {
                        continue;
                    }
                    let mut t = m.clone();
                    t[v] -= 1;
                    table.push((i as u32, lower_index[t.as_slice()] as u32, m[v] as f64));
                }
            }
        }

        let factorial = monos
            .iter()
            .map(|m| m.iter().map(|&e| (1..=e as u32).product::<u32>() as f64).product())
            .collect();

        Layout { dim, order, monos, mul, deriv, factorial }
    }

    fn len(&self) -> usize {
        self.monos.len()
    }
}

fn layout(dim: usize, order: usize) -> Arc<Layout> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("layout cache poisoned");
    guard
        .entry((dim, order))
        .or_insert_with(|| Arc::new(Layout::build(dim, order)))
        .clone()
}

/// Number of coefficients of a jet: C(dim + order, order).
pub fn coeff_count(dim: usize, order: usize) -> usize {
    let mut c = 1usize;
    for i in 1..=order {
        c = c * (dim + i) / i;
    }
    c
}

/// Truncated Taylor expansion of a smooth function at a point.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.dim())
            .field("order", &self.order())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.order() == other.order() && self.coeffs == other.coeffs
    }
}

impl Jet {
    fn check_order(order: usize) {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
    }

    pub fn constant(dim: usize, order: usize, value: f64) -> Jet {
        Self::check_order(order);
        let layout = layout(dim, order);
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet { layout, coeffs }
    }

    pub fn zero(dim: usize, order: usize) -> Jet {
        Self::constant(dim, order, 0.0)
    }

    /// The coordinate function `x_var` expanded at a point where it equals `at`.
    pub fn variable(dim: usize, order: usize, var: usize, at: f64) -> Jet {
        assert!(var < dim);
        let mut j = Self::constant(dim, order, at);
        if order > 0 {
            // degree-1 block starts at 1, ordered x_0, x_1, ...
            j.coeffs[1 + var] = 1.0;
        }
        j
    }

    /// Builds a jet from raw Taylor coefficients in graded lexicographic order.
    pub fn from_coeffs(dim: usize, order: usize, coeffs: Vec<f64>) -> Jet {
        Self::check_order(order);
        let layout = layout(dim, order);
        assert_eq!(coeffs.len(), layout.len(), "coefficient table has the wrong length");
        Jet { layout, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Multi-indices matching [`Jet::coeffs`].
    pub fn multi_indices(&self) -> &[Vec<u8>] {
        &self.layout.monos
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient of a multi-index, or 0 beyond the truncation order.
    pub fn coeff(&self, alpha: &[u8]) -> f64 {
        self.layout
            .monos
            .iter()
            .position(|m| m.as_slice() == alpha)
            .map_or(0.0, |i| self.coeffs[i])
    }

    /// The partial derivative `∂^α f` at the expansion point.
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        match self.layout.monos.iter().position(|m| m.as_slice() == alpha) {
            Some(i) => self.coeffs[i] * self.layout.factorial[i],
            None => 0.0,
        }
    }

    /// First partial derivative with respect to `var` at the expansion point.
    pub fn grad(&self, var: usize) -> f64 {
        if self.order() == 0 {
            0.0
        } else {
            self.coeffs[1 + var]
        }
    }

    pub fn same_shape(&self, other: &Jet) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout)
            || (self.dim() == other.dim() && self.order() == other.order())
    }

    fn assert_shape(&self, other: &Jet) {
        assert!(
            self.same_shape(other),
            "jet shape mismatch: ({}, {}) vs ({}, {})",
            self.dim(),
            self.order(),
            other.dim(),
            other.order()
        );
    }

    /// Jet of `∂f/∂x_var`, one order lower.
    pub fn deriv(&self, var: usize) -> Result<Jet> {
        if self.order() == 0 {
            return Err(Error::OrderTooLow { have: 0, need: 1 });
        }
        let lower = layout(self.dim(), self.order() - 1);
        let mut coeffs = vec![0.0; lower.len()];
        for &(src, dst, f) in &self.layout.deriv[var] {
            coeffs[dst as usize] += f * self.coeffs[src as usize];
        }
        Ok(Jet { layout: lower, coeffs })
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let lower = layout(self.dim(), order);
        let coeffs = self.coeffs[..lower.len()].to_vec();
        Jet { layout: lower, coeffs }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet { layout: self.layout.clone(), coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Largest absolute Taylor coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `Σ_m d[m]/m! · h^m` with `h = self - self(p)`, where `d[m]` is the
    /// m-th derivative of the outer function at the constant term.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let k = self.order();
        assert!(derivs.len() > k, "need {} derivatives of the outer function", k + 1);
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut fact = 1.0;
        for m in 1..=k {
            fact *= m as f64;
        }
        let mut acc = Jet::constant(self.dim(), k, derivs[k] / fact);
        for m in (0..k).rev() {
            fact /= (m + 1) as f64;
            acc = &acc * &h;
            acc.coeffs[0] += derivs[m] / fact;
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&[e; MAX_ORDER + 1])
    }

    pub fn ln(&self) -> Result<Jet> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(Error::DomainError { func: "log", value: a });
        }
        Ok(self.compose(&[a.ln(), 1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a)]))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a = self.value();
        if a < 0.0 || (a == 0.0 && self.order() > 0) {
            return Err(Error::DomainError { func: "sqrt", value: a });
        }
        let s = a.sqrt();
        Ok(self.compose(&[
            s,
            0.5 / s,
            -0.25 / (s * a),
            0.375 / (s * a * a),
        ]))
    }

    /// `self^p` for real `p`; the constant term must be positive.
    pub fn powf(&self, p: f64) -> Result<Jet> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(Error::DomainError { func: "powf", value: a });
        }
        let d1 = p * a.powf(p - 1.0);
        let d2 = p * (p - 1.0) * a.powf(p - 2.0);
        let d3 = p * (p - 1.0) * (p - 2.0) * a.powf(p - 3.0);
        Ok(self.compose(&[a.powf(p), d1, d2, d3]))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose(&[s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose(&[c, -s, -c, s])
    }

    pub fn recip(&self) -> Result<Jet> {
        let a = self.value();
        if a == 0.0 {
            return Err(Error::DivisionByZeroConstantTerm);
        }
        let r = 1.0 / a;
        Ok(self.compose(&[r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]))
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        self.assert_shape(other);
        Ok(self * &other.recip()?)
    }

    pub fn square(&self) -> Jet {
        self * self
    }

    /// Angle of the point `(x, y)`, i.e. `atan2(y, x)` with `self = y`.
    pub fn atan2(&self, x: &Jet) -> Result<Jet> {
        self.assert_shape(x);
        let (y0, x0) = (self.value(), x.value());
        if x0 == 0.0 && y0 == 0.0 {
            return Err(Error::DomainError { func: "atan2", value: 0.0 });
        }
        // rotate by the base angle so the remaining angle has constant term 0
        let num = self.scale(x0) - x.scale(y0);
        let den = x.scale(x0) + self.scale(y0);
        let u = num.try_div(&den)?;
        let mut theta = u.compose(&[0.0, 1.0, 0.0, -2.0]);
        theta.coeffs[0] += y0.atan2(x0);
        Ok(theta)
    }
}

/// Seeds the coordinate jets of `point` at `order`.
pub fn seed(point: &[f64], order: usize) -> Vec<Jet> {
    let dim = point.len();
    point.iter().enumerate().map(|(i, &x)| Jet::variable(dim, order, i, x)).collect()
}

/// Tests whether `jets` are exactly the coordinate jets of their constant terms.
pub fn is_identity_seed(jets: &[Jet]) -> bool {
    let dim = jets.len();
    jets.iter().enumerate().all(|(i, j)| {
        if j.dim() != dim {
            return false;
        }
        let reference = Jet::variable(dim, j.order(), i, j.value());
        reference.coeffs == j.coeffs
    })
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl<'a, 'b> $tr<&'b Jet> for &'a Jet {
            type Output = Jet;
            fn $m(self, rhs: &'b Jet) -> Jet {
                self.assert_shape(rhs);
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl<'b> $tr<&'b Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &'b Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Jet> for &'a Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Jet {
    layout: a.layout.clone(),
    coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
});
binop!(Sub, sub, |a, b| Jet {
    layout: a.layout.clone(),
    coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
});
binop!(Mul, mul, |a, b| {
    let mut coeffs = vec![0.0; a.coeffs.len()];
    for &(i, j, k) in &a.layout.mul {
        coeffs[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
    }
    Jet { layout: a.layout.clone(), coeffs }
});

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] += c;
        j
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.coeffs[0] += c;
        self
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        self + (-c)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        self + (-c)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: &Jet) -> Jet {
        j.scale(self)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.assert_shape(rhs);
        for (x, y) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *x += y;
        }
    }
}

impl AddAssign<Jet> for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self += &rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.assert_shape(rhs);
        for (x, y) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *x -= y;
        }
    }
}

impl SubAssign<Jet> for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self -= &rhs;
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, c: f64) {
        for x in &mut self.coeffs {
            *x *= c;
        }
    }
}

/// Binary operations of [`jet_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arith {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn jet_arith(a: &Jet, b: &Jet, op: Arith) -> Result<Jet> {
    if !a.same_shape(b) {
        return Err(Error::ValenceMismatch(format!(
            "jets ({}, {}) and ({}, {})",
            a.dim(),
            a.order(),
            b.dim(),
            b.order()
        )));
    }
    Ok(match op {
        Arith::Add => a + b,
        Arith::Sub => a - b,
        Arith::Mul => a * b,
        Arith::Div => a.try_div(b)?,
    })
}

/// Elementary functions of [`jet_elem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elem {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

pub fn jet_elem(a: &Jet, f: Elem) -> Result<Jet> {
    match f {
        Elem::Exp => Ok(a.exp()),
        Elem::Log => a.ln(),
        Elem::Sqrt => a.sqrt(),
        Elem::Sin => Ok(a.sin()),
        Elem::Cos => Ok(a.cos()),
    }
}

/// Solves `A x = b` over jets by Gaussian elimination, pivoting on constant terms.
///
/// A pivot is rejected when its magnitude is below `threshold` times the
/// largest constant term of `A`.
pub fn solve_with_threshold(a: &[Vec<Jet>], b: &[Jet], threshold: f64) -> Result<Vec<Jet>> {
    let n = b.len();
    assert_eq!(a.len(), n, "matrix and right-hand side disagree");
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut m: Vec<Vec<Jet>> = a.to_vec();
    let mut rhs: Vec<Jet> = b.to_vec();
    let scale = m
        .iter()
        .flat_map(|row| row.iter().map(|j| j.value().abs()))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);

    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, m[r][col].value().abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= threshold * scale {
            return Err(Error::SingularSystem { pivot: best });
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let inv = m[col][col].recip()?;
        for r in col + 1..n {
            if m[r][col].max_abs() == 0.0 {
                continue;
            }
            let factor = &m[r][col] * &inv;
            for c in col..n {
                let t = &factor * &m[col][c];
                m[r][c] -= t;
            }
            let t = &factor * &rhs[col];
            rhs[r] -= t;
        }
    }

    let mut x: Vec<Jet> = vec![Jet::zero(rhs[0].dim(), rhs[0].order()); n];
    for r in (0..n).rev() {
        let mut acc = rhs[r].clone();
        for c in r + 1..n {
            acc -= &m[r][c] * &x[c];
        }
        x[r] = acc.try_div(&m[r][r])?;
    }
    Ok(x)
}

pub fn solve(a: &[Vec<Jet>], b: &[Jet]) -> Result<Vec<Jet>> {
    solve_with_threshold(a, b, DEFAULT_PIVOT_THRESHOLD)
}

/// Least-squares solution of an overdetermined `A x ≈ b` via the normal equations.
pub fn solve_least_squares(a: &[Vec<Jet>], b: &[Jet]) -> Result<Vec<Jet>> {
    let rows = a.len();
    assert_eq!(rows, b.len());
    if rows == 0 {
        return Ok(Vec::new());
    }
    let cols = a[0].len();
    let proto = &a[0][0];
    let mut normal = vec![vec![Jet::zero(proto.dim(), proto.order()); cols]; cols];
    let mut rhs = vec![Jet::zero(proto.dim(), proto.order()); cols];
    for i in 0..cols {
        for j in i..cols {
            let mut acc = Jet::zero(proto.dim(), proto.order());
            for r in 0..rows {
                acc += &a[r][i] * &a[r][j];
            }
            normal[j][i] = acc.clone();
            normal[i][j] = acc;
        }
        for r in 0..rows {
            rhs[i] += &a[r][i] * &b[r];
        }
    }
    solve(&normal, &rhs)
}

/// Jet-valued linear solve in exact or least-squares mode.
pub fn jet_linear_solve(a: &[Vec<Jet>], b: &[Jet], least_squares: bool) -> Result<Vec<Jet>> {
    if least_squares {
        solve_least_squares(a, b)
    } else {
        solve(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_count_matches_binomial() {
        for dim in 1..=9 {
            for order in 0..=MAX_ORDER {
                assert_eq!(layout(dim, order).len(), coeff_count(dim, order));
            }
        }
        assert_eq!(coeff_count(9, 3), 220);
    }

    #[test]
    fn lower_order_is_prefix() {
        let hi = layout(3, 3);
        let lo = layout(3, 2);
        assert_eq!(&hi.monos[..lo.len()], lo.monos.as_slice());
    }

    #[test]
    fn product_rule() {
        let x = Jet::variable(2, 1, 0, 2.0);
        let y = Jet::variable(2, 1, 1, 3.0);
        let p = &x * &y;
        assert_eq!(p.value(), 6.0);
        assert_eq!(p.grad(0), 3.0);
        assert_eq!(p.grad(1), 2.0);
    }

    #[test]
    fn adding_zero() {
        let v = seed(&[0.3, -1.2], 3);
        let a = (&v[0] * &v[1]).exp();
        assert_eq!(&a + &Jet::zero(2, 3), a);
    }

    #[test]
    fn reciprocal_of_radius() {
        let v = seed(&[1.0, 0.0], 1);
        let r2 = &v[0] * &v[0] + &v[1] * &v[1];
        let q = Jet::constant(2, 1, 1.0).try_div(&r2).unwrap();
        assert_eq!(q.value(), 1.0);
        assert!((q.grad(0) + 2.0).abs() < 1e-15);
        assert_eq!(q.grad(1), 0.0);
    }

    #[test]
    fn division_by_zero_constant_term() {
        let x = Jet::variable(1, 2, 0, 0.0);
        assert_eq!(Jet::constant(1, 2, 1.0).try_div(&x), Err(Error::DivisionByZeroConstantTerm));
    }

    #[test]
    fn exp_and_log_series() {
        let x = Jet::variable(1, 2, 0, 0.0);
        assert_eq!(x.exp().coeffs(), &[1.0, 1.0, 0.5]);
        let one_plus_x = Jet::variable(1, 3, 0, 0.0) + 1.0;
        let l = one_plus_x.ln().unwrap();
        let expect = [0.0, 1.0, -0.5, 1.0 / 3.0];
        for (c, e) in l.coeffs().iter().zip(expect) {
            assert!((c - e).abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_of_constant() {
        let s = Jet::constant(3, 2, 4.0).sqrt().unwrap();
        assert_eq!(s.value(), 2.0);
        assert!(s.coeffs()[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(Jet::constant(1, 1, -1.0).ln(), Err(Error::DomainError { .. })));
        assert!(matches!(Jet::variable(1, 1, 0, 0.0).sqrt(), Err(Error::DomainError { .. })));
        let z = Jet::zero(2, 1);
        assert!(matches!(z.atan2(&z), Err(Error::DomainError { .. })));
    }

    #[test]
    fn atan2_gradient() {
        let v = seed(&[0.6, -0.8], 2);
        let th = v[1].atan2(&v[0]).unwrap();
        assert!((th.value() - (-0.8f64).atan2(0.6)).abs() < 1e-15);
        // dθ = (x dy - y dx) / r²
        assert!((th.grad(0) - 0.8).abs() < 1e-14);
        assert!((th.grad(1) - 0.6).abs() < 1e-14);
    }

    #[test]
    fn derivative_lowers_order() {
        let v = seed(&[1.0, 2.0], 3);
        let f = &v[0] * &v[0] * &v[1];
        let fx = f.deriv(0).unwrap();
        assert_eq!(fx.order(), 2);
        assert_eq!(fx.value(), 4.0);
        let fxy = fx.deriv(1).unwrap();
        assert_eq!(fxy.value(), 2.0);
        assert_eq!(f.partial(&[2, 1]), 2.0);
        assert!(matches!(Jet::zero(2, 0).deriv(0), Err(Error::OrderTooLow { .. })));
    }

    #[test]
    fn identity_and_diagonal_solves() {
        let b = seed(&[0.5, -0.25], 2);
        let id = vec![
            vec![Jet::constant(2, 2, 1.0), Jet::zero(2, 2)],
            vec![Jet::zero(2, 2), Jet::constant(2, 2, 1.0)],
        ];
        assert_eq!(solve(&id, &b).unwrap(), b);

        let a = vec![
            vec![Jet::constant(2, 1, 2.0), Jet::zero(2, 1)],
            vec![Jet::zero(2, 1), Jet::constant(2, 1, 4.0)],
        ];
        let rhs = vec![Jet::constant(2, 1, 2.0), Jet::constant(2, 1, 8.0)];
        let x = solve(&a, &rhs).unwrap();
        assert_eq!(x[0], Jet::constant(2, 1, 1.0));
        assert_eq!(x[1], Jet::constant(2, 1, 2.0));
    }

    #[test]
    fn one_by_one_solve_matches_reciprocal() {
        let v = seed(&[1.0, 0.0], 3);
        let r2 = &v[0] * &v[0] + &v[1] * &v[1];
        let x = solve(&[vec![r2.clone()]], &[Jet::constant(2, 3, 1.0)]).unwrap();
        let r = r2.recip().unwrap();
        for (a, b) in x[0].coeffs().iter().zip(r.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_system_detected() {
        let a = vec![
            vec![Jet::constant(1, 1, 1.0), Jet::constant(1, 1, 2.0)],
            vec![Jet::constant(1, 1, 2.0), Jet::constant(1, 1, 4.0)],
        ];
        let b = vec![Jet::zero(1, 1), Jet::zero(1, 1)];
        assert!(matches!(solve(&a, &b), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn least_squares_consistent_system() {
        let v = seed(&[0.3], 2);
        let a = vec![vec![v[0].clone()], vec![v[0].scale(2.0)], vec![Jet::constant(1, 2, 1.0)]];
        let truth = v[0].exp();
        let b: Vec<Jet> = a.iter().map(|row| &row[0] * &truth).collect();
        let x = solve_least_squares(&a, &b).unwrap();
        for (p, q) in x[0].coeffs().iter().zip(truth.coeffs()) {
            assert!((p - q).abs() < 1e-13);
        }
    }
}
