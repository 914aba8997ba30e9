//! Charts, jet-valued tensors and the exterior calculus built on them.
//!
//! Everything here works on coefficient tables of [`Jet`]s. A field is a
//! closure from coordinate jets to such a table, so derivatives of any
//! composite (including solver outputs) stay exact to round-off. Finite
//! differences appear only in test oracles.
//!
//! Conventions: real coordinates `(x₁, y₁, …, x_n, y_n)` on `ℂⁿ` charts with
//! `J ∂x_k = ∂y_k`; interior product `ι_V(α∧β) = α(V)β − β(V)α`; a `(1,1)`
//! tensor is stored as `m[i][j] = T^i_j`, the `i`-th component of `T ∂_j`.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::jets::{self, Jet};

/// Square or rectangular matrix of jets, row-major.
pub type Mat = Vec<Vec<Jet>>;

/// How a chart draws sample points.
#[derive(Debug, Clone)]
pub enum Sampler {
    /// Uniform in an axis-aligned box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Uniform in the shell `r_min ≤ |p| ≤ r_max`.
    Shell { r_min: f64, r_max: f64 },
}

type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A coordinate domain with a predicate excluding singular loci.
#[derive(Clone)]
pub struct Chart {
    pub name: String,
    pub dim: usize,
    pub sampler: Sampler,
    domain: Predicate,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl Chart {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        sampler: Sampler,
        domain: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
    ) -> Chart {
        assert!(dim >= 2, "charts have dimension at least 2");
        Chart { name: name.into(), dim, sampler, domain: Arc::new(domain) }
    }

    /// All of `ℝ^dim`, sampled in `[-1, 1]^dim`.
    pub fn euclidean(dim: usize) -> Chart {
        Chart::new(
            format!("R{dim}"),
            dim,
            Sampler::Box { lo: vec![-1.0; dim], hi: vec![1.0; dim] },
            |_| true,
        )
    }

    /// `ℝ^dim \ {0}`, sampled in the shell `0.5 ≤ |p| ≤ 2`.
    pub fn punctured(dim: usize) -> Chart {
        Chart::new(
            format!("R{dim}-0"),
            dim,
            Sampler::Shell { r_min: 0.5, r_max: 2.0 },
            |p| p.iter().map(|x| x * x).sum::<f64>() > 1e-12,
        )
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Chart {
        self.sampler = sampler;
        self
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim && (self.domain)(p)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.sampler {
            Sampler::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect()
            }
            Sampler::Shell { r_min, r_max } => loop {
                let p: Vec<f64> =
                    (0..self.dim).map(|_| r_max * (2.0 * rng.random::<f64>() - 1.0)).collect();
                let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                if r >= *r_min && r <= *r_max {
                    break p;
                }
            },
        }
    }

    /// Draws `count` points satisfying the domain predicate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count {
            attempts += 1;
            assert!(attempts < 1_000_000 + 1000 * count, "sampler for {} rejects everything", self.name);
            let p = self.draw(rng);
            if self.contains(&p) {
                out.push(Point(p));
            }
        }
        out
    }
}

/// Coordinates of a chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<f64>);

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Point {
        Point(v)
    }
}

/// What a [`FieldExpr`] table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valence {
    Scalar,
    Vector,
    /// Antisymmetric covariant tensor of the given degree.
    Form(usize),
    /// `(contra, co)` tensor stored row-major over all index slots.
    Tensor(usize, usize),
}

impl Valence {
    pub fn len(self, dim: usize) -> usize {
        match self {
            Valence::Scalar => 1,
            Valence::Vector => dim,
            Valence::Form(p) => binomial(dim, p),
            Valence::Tensor(r, s) => dim.pow((r + s) as u32),
        }
    }
}

pub type EvalFn = Arc<dyn Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync>;

/// A field on a chart, evaluable on coordinate jets of any order.
#[derive(Clone)]
pub struct FieldExpr {
    pub chart: Arc<Chart>,
    pub valence: Valence,
    eval: EvalFn,
}

impl fmt::Debug for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldExpr")
            .field("chart", &self.chart.name)
            .field("valence", &self.valence)
            .finish()
    }
}

impl FieldExpr {
    pub fn new(
        chart: Arc<Chart>,
        valence: Valence,
        eval: impl Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    ) -> FieldExpr {
        FieldExpr { chart, valence, eval: Arc::new(eval) }
    }

    pub fn scalar(
        chart: Arc<Chart>,
        f: impl Fn(&[Jet]) -> Result<Jet> + Send + Sync + 'static,
    ) -> FieldExpr {
        FieldExpr::new(chart, Valence::Scalar, move |x| Ok(vec![f(x)?]))
    }

    pub fn vector(
        chart: Arc<Chart>,
        f: impl Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    ) -> FieldExpr {
        FieldExpr::new(chart, Valence::Vector, f)
    }

    pub fn form(
        chart: Arc<Chart>,
        degree: usize,
        f: impl Fn(&[Jet]) -> Result<Form> + Send + Sync + 'static,
    ) -> FieldExpr {
        FieldExpr::new(chart, Valence::Form(degree), move |x| Ok(f(x)?.coeffs))
    }

    /// A `(1,1)` or `(0,2)` tensor field given as a matrix.
    pub fn matrix(
        chart: Arc<Chart>,
        valence: Valence,
        f: impl Fn(&[Jet]) -> Result<Mat> + Send + Sync + 'static,
    ) -> FieldExpr {
        FieldExpr::new(chart, valence, move |x| Ok(f(x)?.into_iter().flatten().collect()))
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    /// Evaluates on arbitrary coordinate jets.
    pub fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        if x.len() != self.dim() {
            return Err(Error::ValenceMismatch(format!(
                "field on {} expects {} coordinates, got {}",
                self.chart.name,
                self.dim(),
                x.len()
            )));
        }
        let out = (self.eval)(x)?;
        debug_assert_eq!(out.len(), self.valence.len(self.dim()));
        Ok(out)
    }

    /// Evaluates at a point with jets of the given order.
    pub fn at(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.eval(&jets::seed(p, order))
    }

    pub fn eval_scalar(&self, x: &[Jet]) -> Result<Jet> {
        self.expect(Valence::Scalar)?;
        Ok(self.eval(x)?.remove(0))
    }

    pub fn eval_form(&self, x: &[Jet]) -> Result<Form> {
        let p = match self.valence {
            Valence::Form(p) => p,
            Valence::Scalar => 0,
            v => return Err(Error::ValenceMismatch(format!("{v:?} is not a form"))),
        };
        let coeffs = self.eval(x)?;
        Ok(Form::from_coeffs(self.dim(), p, coeffs, &x[0]))
    }

    pub fn eval_matrix(&self, x: &[Jet]) -> Result<Mat> {
        match self.valence {
            Valence::Tensor(r, s) if r + s == 2 => {}
            v => return Err(Error::ValenceMismatch(format!("{v:?} is not a matrix"))),
        }
        let n = self.dim();
        let flat = self.eval(x)?;
        Ok(flat.chunks(n).map(|c| c.to_vec()).collect())
    }

    fn expect(&self, v: Valence) -> Result<()> {
        if self.valence == v {
            Ok(())
        } else {
            Err(Error::ValenceMismatch(format!("expected {v:?}, found {:?}", self.valence)))
        }
    }
}

/// Wraps a closure that is only correct on identity-seeded jets so that it
/// accepts any coordinate jets, by Taylor substitution.
pub fn seeded_only(
    f: impl Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
) -> impl Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static {
    move |x: &[Jet]| {
        if jets::is_identity_seed(x) {
            return f(x);
        }
        let p: Vec<f64> = x.iter().map(Jet::value).collect();
        let order = x[0].order();
        let local = f(&jets::seed(&p, order))?;
        Ok(local.iter().map(|j| substitute(j, x)).collect())
    }
}

/// Evaluates the Taylor polynomial of `f` with its variables replaced by the
/// deviations of `inner` from their constant terms.
pub fn substitute(f: &Jet, inner: &[Jet]) -> Jet {
    let k = f.order().min(inner[0].order());
    let (dim, order) = (inner[0].dim(), inner[0].order());
    let h: Vec<Jet> = inner.iter().map(|j| j - j.value()).collect();
    let mut powers: Vec<Vec<Jet>> = h
        .iter()
        .map(|hi| {
            let mut v = vec![Jet::constant(dim, order, 1.0)];
            for e in 1..=k {
                let next = &v[e - 1] * hi;
                v.push(next);
            }
            v
        })
        .collect();
    let mut acc = Jet::zero(dim, order);
    for (c, alpha) in f.coeffs().iter().zip(f.multi_indices()) {
        if *c == 0.0 {
            continue;
        }
        let mut term = Jet::constant(dim, order, *c);
        for (i, &e) in alpha.iter().enumerate() {
            if e > 0 {
                term = &term * &powers[i][e as usize];
            }
        }
        acc += term;
    }
    powers.clear();
    acc
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut c = 1usize;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

struct Combos {
    list: Vec<Vec<usize>>,
    rank: Vec<u32>,
}

fn combos(dim: usize, deg: usize) -> Arc<Combos> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Combos>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("combination cache poisoned");
    guard
        .entry((dim, deg))
        .or_insert_with(|| {
            assert!(dim <= 16, "form dimension too large");
            let mut list = Vec::new();
            let mut rank = vec![u32::MAX; 1 << dim];
            for mask in 0u32..(1 << dim) {
                if mask.count_ones() as usize == deg {
                    list.push((0..dim).filter(|i| mask >> i & 1 == 1).collect::<Vec<_>>());
                }
            }
            // lexicographic order of sorted index lists
            list.sort();
            for (r, c) in list.iter().enumerate() {
                let m = c.iter().fold(0usize, |m, &i| m | 1 << i);
                rank[m] = r as u32;
            }
            Arc::new(Combos { list, rank })
        })
        .clone()
}

/// Sign of the permutation sorting `idx`, or `None` on a repeated index.
fn sort_sign(idx: &[usize]) -> Option<(f64, usize)> {
    let mut mask = 0usize;
    let mut inversions = 0usize;
    for (a, &i) in idx.iter().enumerate() {
        if mask >> i & 1 == 1 {
            return None;
        }
        mask |= 1 << i;
        inversions += idx[a + 1..].iter().filter(|&&j| j < i).count();
    }
    Some((if inversions.is_multiple_of(2) { 1.0 } else { -1.0 }, mask))
}

/// A differential form with jet coefficients on sorted index sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    pub dim: usize,
    pub deg: usize,
    jet_dim: usize,
    order: usize,
    pub coeffs: Vec<Jet>,
}

impl Form {
    pub fn zero(dim: usize, deg: usize, jet_dim: usize, order: usize) -> Form {
        Form {
            dim,
            deg,
            jet_dim,
            order,
            coeffs: vec![Jet::zero(jet_dim, order); binomial(dim, deg)],
        }
    }

    pub fn from_coeffs(dim: usize, deg: usize, coeffs: Vec<Jet>, proto: &Jet) -> Form {
        assert_eq!(coeffs.len(), binomial(dim, deg));
        let (jet_dim, order) = coeffs
            .first()
            .map_or((proto.dim(), proto.order()), |c| (c.dim(), c.order()));
        Form { dim, deg, jet_dim, order, coeffs }
    }

    /// The 1-form with the given components.
    pub fn one_form(components: Vec<Jet>) -> Form {
        let dim = components.len();
        let (jd, o) = (components[0].dim(), components[0].order());
        Form { dim, deg: 1, jet_dim: jd, order: o, coeffs: components }
    }

    /// `dx^i` as a constant form.
    pub fn basis(dim: usize, idx: &[usize], jet_dim: usize, order: usize) -> Form {
        let mut f = Form::zero(dim, idx.len(), jet_dim, order);
        f.add_component(idx, &Jet::constant(jet_dim, order, 1.0));
        f
    }

    /// A constant-coefficient form, e.g. for test fixtures.
    pub fn constant(dim: usize, deg: usize, values: &[f64], jet_dim: usize, order: usize) -> Form {
        let coeffs = values.iter().map(|&v| Jet::constant(jet_dim, order, v)).collect();
        Form { dim, deg, jet_dim, order, coeffs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn jet_dim(&self) -> usize {
        self.jet_dim
    }

    /// Sorted index sets, aligned with `coeffs`.
    pub fn index_sets(&self) -> Vec<Vec<usize>> {
        combos(self.dim, self.deg).list.clone()
    }

    /// Coefficient on an arbitrary (possibly unsorted) index list.
    pub fn component(&self, idx: &[usize]) -> Jet {
        assert_eq!(idx.len(), self.deg);
        match sort_sign(idx) {
            None => Jet::zero(self.jet_dim, self.order),
            Some((sign, mask)) => {
                let r = combos(self.dim, self.deg).rank[mask] as usize;
                if sign > 0.0 {
                    self.coeffs[r].clone()
                } else {
                    -&self.coeffs[r]
                }
            }
        }
    }

    /// Adds `value` to the coefficient of `dx^{idx[0]} ∧ …` (any order of indices).
    pub fn add_component(&mut self, idx: &[usize], value: &Jet) {
        if let Some((sign, mask)) = sort_sign(idx) {
            let r = combos(self.dim, self.deg).rank[mask] as usize;
            if sign > 0.0 {
                self.coeffs[r] += value;
            } else {
                self.coeffs[r] -= value;
            }
        }
    }

    fn check(&self, other: &Form) {
        assert_eq!((self.dim, self.deg), (other.dim, other.deg), "form shape mismatch");
    }

    pub fn add(&self, other: &Form) -> Form {
        self.check(other);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Form { coeffs, ..self.clone() }
    }

    pub fn sub(&self, other: &Form) -> Form {
        self.check(other);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Form { coeffs, ..self.clone() }
    }

    pub fn scale(&self, c: f64) -> Form {
        Form { coeffs: self.coeffs.iter().map(|a| a.scale(c)).collect(), ..self.clone() }
    }

    pub fn mul_scalar(&self, f: &Jet) -> Form {
        let f = f.truncate(self.order);
        let me = self.truncate(f.order());
        Form { coeffs: me.coeffs.iter().map(|a| a * &f).collect(), ..me }
    }

    pub fn truncate(&self, order: usize) -> Form {
        if order >= self.order {
            return self.clone();
        }
        Form {
            coeffs: self.coeffs.iter().map(|c| c.truncate(order)).collect(),
            order,
            ..self.clone()
        }
    }

    /// Constant terms of the coefficients.
    pub fn values(&self) -> Vec<f64> {
        self.coeffs.iter().map(Jet::value).collect()
    }

    /// Largest absolute constant term.
    pub fn sup(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.value().abs()))
    }

    pub fn wedge(&self, other: &Form) -> Form {
        assert_eq!(self.dim, other.dim);
        let order = self.order.min(other.order);
        let (a, b) = (self.truncate(order), other.truncate(order));
        let mut out = Form::zero(self.dim, self.deg + other.deg, self.jet_dim, order);
        let (ia, ib) = (combos(self.dim, self.deg), combos(self.dim, other.deg));
        for (i, ci) in ia.list.iter().enumerate() {
            if a.coeffs[i].max_abs() == 0.0 {
                continue;
            }
            for (j, cj) in ib.list.iter().enumerate() {
                if b.coeffs[j].max_abs() == 0.0 {
                    continue;
                }
                let idx: Vec<usize> = ci.iter().chain(cj).copied().collect();
                if sort_sign(&idx).is_some() {
                    out.add_component(&idx, &(&a.coeffs[i] * &b.coeffs[j]));
                }
            }
        }
        out
    }

    /// `ι_v` of the form, with `ι_V(α∧β) = α(V)β − β(V)α`.
    pub fn interior(&self, v: &[Jet]) -> Form {
        assert!(self.deg >= 1, "interior product of a function");
        assert_eq!(v.len(), self.dim);
        let order = self.order.min(v[0].order());
        let me = self.truncate(order);
        let mut out = Form::zero(self.dim, self.deg - 1, self.jet_dim, order);
        let list = combos(self.dim, self.deg).list.clone();
        for (r, idx) in list.iter().enumerate() {
            for (pos, &i) in idx.iter().enumerate() {
                let rest: Vec<usize> =
                    idx.iter().enumerate().filter(|(q, _)| *q != pos).map(|(_, &k)| k).collect();
                let term = &me.coeffs[r] * &v[i].truncate(order);
                if pos % 2 == 0 {
                    out.add_component(&rest, &term);
                } else {
                    out.add_component(&rest, &(-term));
                }
            }
        }
        out
    }

    /// Exterior derivative; the result is one jet order lower.
    pub fn d(&self) -> Result<Form> {
        if self.order == 0 {
            return Err(Error::OrderTooLow { have: 0, need: 1 });
        }
        if self.jet_dim != self.dim {
            return Err(Error::ValenceMismatch(
                "exterior derivative needs jets in the chart coordinates".into(),
            ));
        }
        let mut out = Form::zero(self.dim, self.deg + 1, self.jet_dim, self.order - 1);
        let list = combos(self.dim, self.deg).list.clone();
        for (r, idx) in list.iter().enumerate() {
            if self.coeffs[r].max_abs() == 0.0 {
                continue;
            }
            for j in 0..self.dim {
                let mut full = vec![j];
                full.extend_from_slice(idx);
                out.add_component(&full, &self.coeffs[r].deriv(j)?);
            }
        }
        Ok(out)
    }

    /// `ψ(v₁, …, v_p)`.
    pub fn eval_on(&self, vs: &[&[Jet]]) -> Jet {
        assert_eq!(vs.len(), self.deg);
        let order = vs.iter().fold(self.order, |o, v| o.min(v[0].order()));
        let me = self.truncate(order);
        let mut acc = Jet::zero(self.jet_dim, order);
        for (r, idx) in combos(self.dim, self.deg).list.iter().enumerate() {
            let m: Mat = (0..self.deg)
                .map(|row| vs.iter().map(|v| v[idx[row]].truncate(order)).collect())
                .collect();
            acc += &me.coeffs[r] * &det(&m);
        }
        acc
    }

    /// Pulls back a form evaluated at `F(x)` along the Jacobian
    /// `jac[i][a] = ∂F^i/∂x^a`.
    pub fn pullback(&self, jac: &Mat) -> Form {
        assert_eq!(jac.len(), self.dim);
        let src_dim = jac[0].len();
        let order = self.order.min(jac[0][0].order());
        let me = self.truncate(order);
        let jet_dim = jac[0][0].dim();
        let mut out = Form::zero(src_dim, self.deg, jet_dim, order);
        let target_sets = combos(self.dim, self.deg).list.clone();
        let source_sets = combos(src_dim, self.deg).list.clone();
        for (k, kk) in source_sets.iter().enumerate() {
            let mut acc = Jet::zero(jet_dim, order);
            for (i, ii) in target_sets.iter().enumerate() {
                if me.coeffs[i].max_abs() == 0.0 {
                    continue;
                }
                let m: Mat = ii
                    .iter()
                    .map(|&row| kk.iter().map(|&col| jac[row][col].truncate(order)).collect())
                    .collect();
                acc += &me.coeffs[i] * &det(&m);
            }
            out.coeffs[k] = acc;
        }
        out
    }

    /// The components of a 2-form as an antisymmetric matrix `m[i][j] = ψ(∂_i, ∂_j)`.
    pub fn to_matrix(&self) -> Mat {
        assert_eq!(self.deg, 2);
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.component(&[i, j])).collect()).collect()
    }

    pub fn from_matrix(m: &Mat) -> Form {
        let n = m.len();
        let proto = &m[0][0];
        let mut f = Form::zero(n, 2, proto.dim(), proto.order());
        for (r, idx) in combos(n, 2).list.iter().enumerate() {
            f.coeffs[r] = m[idx[0]][idx[1]].clone();
        }
        f
    }
}

/// Determinant by cofactor expansion (small matrices only).
pub fn det(m: &Mat) -> Jet {
    let n = m.len();
    match n {
        0 => panic!("determinant of an empty matrix"),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        _ => {
            let mut acc = Jet::zero(m[0][0].dim(), m[0][0].order());
            for c in 0..n {
                if m[0][c].max_abs() == 0.0 {
                    continue;
                }
                let minor: Mat = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, x)| x.clone()).collect())
                    .collect();
                let t = &m[0][c] * &det(&minor);
                if c % 2 == 0 {
                    acc += t;
                } else {
                    acc -= t;
                }
            }
            acc
        }
    }
}

pub fn mat_vec(m: &Mat, v: &[Jet]) -> Vec<Jet> {
    m.iter()
        .map(|row| {
            let mut acc = Jet::zero(v[0].dim(), row[0].order().min(v[0].order()));
            let o = acc.order();
            for (a, b) in row.iter().zip(v) {
                acc += a.truncate(o) * b.truncate(o);
            }
            acc
        })
        .collect()
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let o = a[0][0].order().min(b[0][0].order());
    let d = a[0][0].dim();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = Jet::zero(d, o);
                    for l in 0..k {
                        acc += a[i][l].truncate(o) * b[l][j].truncate(o);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn transpose(m: &Mat) -> Mat {
    (0..m[0].len()).map(|j| m.iter().map(|row| row[j].clone()).collect()).collect()
}

pub fn truncate_mat(m: &Mat, order: usize) -> Mat {
    m.iter().map(|row| row.iter().map(|x| x.truncate(order)).collect()).collect()
}

pub fn truncate_vec(v: &[Jet], order: usize) -> Vec<Jet> {
    v.iter().map(|x| x.truncate(order)).collect()
}

pub fn identity(n: usize, jet_dim: usize, order: usize) -> Mat {
    (0..n)
        .map(|i| {
            (0..n).map(|j| Jet::constant(jet_dim, order, if i == j { 1.0 } else { 0.0 })).collect()
        })
        .collect()
}

/// Constant terms of a jet matrix.
pub fn values(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j].value())
}

/// Inverse of a jet matrix, one column solve at a time.
pub fn inverse(m: &Mat) -> Result<Mat> {
    let n = m.len();
    let (d, o) = (m[0][0].dim(), m[0][0].order());
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let e: Vec<Jet> = (0..n).map(|i| Jet::constant(d, o, if i == j { 1.0 } else { 0.0 })).collect();
        cols.push(jets::solve(m, &e)?);
    }
    Ok(transpose(&cols))
}

/// Vector of constant jets.
pub fn constant_vector(v: &[f64], jet_dim: usize, order: usize) -> Vec<Jet> {
    v.iter().map(|&x| Jet::constant(jet_dim, order, x)).collect()
}

/// Standard coordinate vector `∂_i` as constant jets.
pub fn coordinate_vector(dim: usize, i: usize, jet_dim: usize, order: usize) -> Vec<Jet> {
    (0..dim).map(|k| Jet::constant(jet_dim, order, if k == i { 1.0 } else { 0.0 })).collect()
}

pub fn sup_vec(v: &[Jet]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.value().abs()))
}

pub fn sup_mat(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, row| acc.max(sup_vec(row)))
}

/// Jacobian `∂F^i/∂x^a` of component jets (one order lower than `f`).
pub fn jacobian(f: &[Jet]) -> Result<Mat> {
    let dim = f[0].dim();
    f.iter().map(|fi| (0..dim).map(|a| fi.deriv(a)).collect()).collect()
}

/// A map between charts with jet-evaluable components.
#[derive(Clone)]
pub struct SmoothMap {
    pub source: Arc<Chart>,
    pub target: Arc<Chart>,
    f: EvalFn,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothMap({} -> {})", self.source.name, self.target.name)
    }
}

impl SmoothMap {
    pub fn new(
        source: Arc<Chart>,
        target: Arc<Chart>,
        f: impl Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    ) -> SmoothMap {
        SmoothMap { source, target, f: Arc::new(f) }
    }

    pub fn apply(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        let y = (self.f)(x)?;
        if y.len() != self.target.dim {
            return Err(Error::ValenceMismatch(format!(
                "map into {} returned {} components",
                self.target.name,
                y.len()
            )));
        }
        Ok(y)
    }

    pub fn apply_point(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply(&jets::seed(p, 0))?.iter().map(Jet::value).collect())
    }

    /// Values (at `order`) and Jacobian (at `order`) from seeding at `order + 1`.
    pub fn jet_and_jacobian(&self, p: &[f64], order: usize) -> Result<(Vec<Jet>, Mat)> {
        let y = self.apply(&jets::seed(p, order + 1))?;
        let jac = jacobian(&y)?;
        Ok((truncate_vec(&y, order), jac))
    }

    /// `F ∘ G` for `G: other.source → other.target = self.source`.
    pub fn compose(&self, inner: &SmoothMap) -> SmoothMap {
        let (outer, g) = (self.clone(), inner.clone());
        SmoothMap::new(inner.source.clone(), self.target.clone(), move |x| outer.apply(&g.apply(x)?))
    }

    /// Pushforward `DF·v` of a vector at `p`.
    pub fn push_vector(&self, p: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let (_, jac) = self.jet_and_jacobian(p, 0)?;
        Ok(jac.iter().map(|row| row.iter().zip(v).map(|(a, b)| a.value() * b).sum()).collect())
    }
}

/// `d ψ` at `p`; the field is sampled one order above the requested `order`.
pub fn exterior_derivative(psi: &FieldExpr, p: &[f64], order: usize) -> Result<Form> {
    psi.eval_form(&jets::seed(p, order + 1))?.d()
}

/// The pullback `F*ψ` as a field on the source chart.
pub fn pullback_field(map: &SmoothMap, psi: &FieldExpr) -> Result<FieldExpr> {
    let Valence::Form(deg) = psi.valence else {
        return Err(Error::ValenceMismatch("pullback needs a form".into()));
    };
    if psi.chart.dim != map.target.dim {
        return Err(Error::ValenceMismatch("form lives on a different chart".into()));
    }
    let (m, f) = (map.clone(), psi.clone());
    let src_dim = map.source.dim;
    Ok(FieldExpr::new(
        map.source.clone(),
        Valence::Form(deg),
        seeded_only(move |x| {
            let order = x[0].order();
            let p: Vec<f64> = x.iter().map(Jet::value).collect();
            let (y, jac) = m.jet_and_jacobian(&p, order)?;
            let form = f.eval_form(&y)?;
            let pulled = form.pullback(&jac);
            debug_assert_eq!(pulled.dim, src_dim);
            Ok(pulled.coeffs)
        }),
    ))
}

/// `F_*V` on the target chart, given the inverse map `inv = F⁻¹`.
/// Uses `DF(x) = (D inv(F x))⁻¹`, so only `inv` is evaluated.
pub fn pushforward_field(inv: &SmoothMap, v: &FieldExpr) -> Result<FieldExpr> {
    v.expect(Valence::Vector)?;
    let (m, f) = (inv.clone(), v.clone());
    Ok(FieldExpr::new(
        inv.source.clone(),
        Valence::Vector,
        seeded_only(move |y| {
            let order = y[0].order();
            let p: Vec<f64> = y.iter().map(Jet::value).collect();
            let (x, dinv) = m.jet_and_jacobian(&p, order)?;
            let forward = inverse(&dinv)?;
            Ok(mat_vec(&forward, &f.eval(&x)?))
        }),
    ))
}

/// `[V, W]^k = V^m ∂_m W^k − W^m ∂_m V^k`; one order lower than the inputs.
pub fn lie_bracket(v: &[Jet], w: &[Jet]) -> Result<Vec<Jet>> {
    let n = v.len();
    let order = v[0].order().min(w[0].order());
    if order == 0 {
        return Err(Error::OrderTooLow { have: 0, need: 1 });
    }
    let (v, w) = (truncate_vec(v, order), truncate_vec(w, order));
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = Jet::zero(v[0].dim(), order - 1);
        for m in 0..n {
            acc += v[m].truncate(order - 1) * w[k].deriv(m)?;
            acc -= w[m].truncate(order - 1) * v[k].deriv(m)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Levi-Civita symbols `gamma[k][i][j] = Γ^k_ij`, one order below `g`.
pub fn christoffels(g: &Mat) -> Result<Vec<Mat>> {
    let n = g.len();
    let order = g[0][0].order();
    if order == 0 {
        return Err(Error::OrderTooLow { have: 0, need: 1 });
    }
    check_positive_definite(g)?;
    let dg: Vec<Mat> = (0..n)
        .map(|l| g.iter().map(|row| row.iter().map(|x| x.deriv(l)).collect()).collect())
        .collect::<Result<_>>()?;
    let ginv = inverse(&truncate_mat(g, order - 1))?;
    let d = g[0][0].dim();
    let mut gamma = vec![vec![vec![Jet::zero(d, order - 1); n]; n]; n];
    for i in 0..n {
        for j in i..n {
            // lowered symbol Γ_{l,ij}
            let low: Vec<Jet> =
                (0..n).map(|l| (&dg[i][j][l] + &dg[j][i][l] - &dg[l][i][j]).scale(0.5)).collect();
            for k in 0..n {
                let mut acc = Jet::zero(d, order - 1);
                for l in 0..n {
                    acc += &ginv[k][l] * &low[l];
                }
                gamma[k][j][i] = acc.clone();
                gamma[k][i][j] = acc;
            }
        }
    }
    Ok(gamma)
}

pub fn check_positive_definite(g: &Mat) -> Result<()> {
    let m = values(g);
    let sym = (&m + m.transpose()) * 0.5;
    if (&m - &sym).amax() > 1e-12 * (1.0 + m.amax()) {
        return Err(Error::NotPositiveDefinite);
    }
    match nalgebra::Cholesky::new(sym) {
        Some(_) => Ok(()),
        None => Err(Error::NotPositiveDefinite),
    }
}

/// `(∇α)_ij = ∂_i α_j − Γ^k_ij α_k` for the Levi-Civita connection of `g`.
pub fn covariant_derivative_oneform_jets(g: &Mat, alpha: &Form) -> Result<Mat> {
    assert_eq!(alpha.deg, 1);
    let order = g[0][0].order().min(alpha.order());
    let gamma = christoffels(&truncate_mat(g, order))?;
    let a = alpha.truncate(order);
    let n = g.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let mut acc = a.coeffs[j].deriv(i)?;
            for k in 0..n {
                acc -= &gamma[k][i][j] * &a.coeffs[k].truncate(order - 1);
            }
            row.push(acc);
        }
        out.push(row);
    }
    Ok(out)
}

/// Field-level form of [`covariant_derivative_oneform_jets`] at a point.
pub fn covariant_derivative_oneform(
    g: &FieldExpr,
    alpha: &FieldExpr,
    p: &[f64],
    order: usize,
) -> Result<Mat> {
    let x = jets::seed(p, order + 1);
    covariant_derivative_oneform_jets(&g.eval_matrix(&x)?, &alpha.eval_form(&x)?)
}

/// Nijenhuis tensor `n[k][a][b] = N(∂_a, ∂_b)^k` with
/// `N(X,Y) = [JX,JY] − J[JX,Y] − J[X,JY] − [X,Y]`.
pub fn nijenhuis(j: &Mat, tol: f64) -> Result<Vec<Mat>> {
    let n = j.len();
    let order = j[0][0].order();
    if order == 0 {
        return Err(Error::OrderTooLow { have: 0, need: 1 });
    }
    let jv = values(j);
    let residual = (&jv * &jv + DMatrix::identity(n, n)).amax();
    if residual > tol {
        return Err(Error::NotAlmostComplex { residual });
    }
    let dj: Vec<Mat> = (0..n)
        .map(|m| j.iter().map(|row| row.iter().map(|x| x.deriv(m)).collect()).collect())
        .collect::<Result<_>>()?;
    let jl = truncate_mat(j, order - 1);
    let d = j[0][0].dim();
    let mut out = vec![vec![vec![Jet::zero(d, order - 1); n]; n]; n];
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut acc = Jet::zero(d, order - 1);
                for m in 0..n {
                    acc += &jl[m][a] * &dj[m][k][b];
                    acc -= &jl[m][b] * &dj[m][k][a];
                    acc += &jl[k][m] * &dj[b][m][a];
                    acc -= &jl[k][m] * &dj[a][m][b];
                }
                out[k][a][b] = acc;
            }
        }
    }
    Ok(out)
}

/// The unique `X` with `ι_X Ω = α`.
pub fn sharp_omega(omega: &Form, alpha: &Form) -> Result<Vec<Jet>> {
    assert_eq!((omega.deg, alpha.deg), (2, 1));
    let order = omega.order().min(alpha.order());
    let om = omega.truncate(order);
    let n = omega.dim;
    // (ι_X Ω)_j = Σ_i X^i Ω_ij
    let m: Mat = (0..n).map(|j| (0..n).map(|i| om.component(&[i, j])).collect()).collect();
    let rhs = alpha.truncate(order).coeffs;
    jets::solve(&m, &rhs).map_err(|e| match e {
        Error::SingularSystem { .. } => Error::DegenerateForm,
        other => other,
    })
}

/// Lie derivative of a form along `X`, from the coordinate formula.
pub fn lie_derivative_form(x: &[Jet], psi: &Form) -> Result<Form> {
    let order = x[0].order().min(psi.order());
    if order == 0 {
        return Err(Error::OrderTooLow { have: 0, need: 1 });
    }
    let (psi, n) = (psi.truncate(order), psi.dim);
    let x: Vec<Jet> = truncate_vec(x, order);
    let xl: Vec<Jet> = truncate_vec(&x, order - 1);
    let psil = psi.truncate(order - 1);
    let mut out = Form::zero(n, psi.deg, psi.jet_dim(), order - 1);
    for (r, idx) in psi.index_sets().iter().enumerate() {
        let mut acc = Jet::zero(psi.jet_dim(), order - 1);
        for m in 0..n {
            acc += &xl[m] * &psi.coeffs[r].deriv(m)?;
        }
        for pos in 0..idx.len() {
            for m in 0..n {
                let dxm = x[m].deriv(idx[pos])?;
                if dxm.max_abs() == 0.0 {
                    continue;
                }
                let mut swapped = idx.clone();
                swapped[pos] = m;
                acc += &dxm * &psil.component(&swapped);
            }
        }
        out.coeffs[r] = acc;
    }
    Ok(out)
}

/// `(ℒ_X g)_ij = X^m ∂_m g_ij + g_mj ∂_i X^m + g_im ∂_j X^m`.
pub fn lie_derivative_metric(x: &[Jet], g: &Mat) -> Result<Mat> {
    let n = g.len();
    let order = x[0].order().min(g[0][0].order());
    if order == 0 {
        return Err(Error::OrderTooLow { have: 0, need: 1 });
    }
    let (x, g) = (truncate_vec(x, order), truncate_mat(g, order));
    let (xl, gl) = (truncate_vec(&x, order - 1), truncate_mat(&g, order - 1));
    let dx: Mat = x.iter().map(|xm| (0..n).map(|i| xm.deriv(i)).collect()).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let mut acc = Jet::zero(x[0].dim(), order - 1);
            for m in 0..n {
                acc += &xl[m] * &g[i][j].deriv(m)?;
                acc += &gl[m][j] * &dx[m][i];
                acc += &gl[i][m] * &dx[m][j];
            }
            row.push(acc);
        }
        out.push(row);
    }
    Ok(out)
}

/// Riemannian divergence `∂_m X^m + ½ X^m ∂_m log det g`.
pub fn divergence(x: &[Jet], g: &Mat) -> Result<Jet> {
    let n = g.len();
    let order = x[0].order().min(g[0][0].order());
    if order == 0 {
        return Err(Error::OrderTooLow { have: 0, need: 1 });
    }
    let g = truncate_mat(g, order);
    let ginv = inverse(&truncate_mat(&g, order - 1))?;
    let mut acc = Jet::zero(x[0].dim(), order - 1);
    for m in 0..n {
        acc += x[m].truncate(order).deriv(m)?;
        let mut dlog = Jet::zero(x[0].dim(), order - 1);
        for i in 0..n {
            for j in 0..n {
                dlog += &ginv[i][j] * &g[j][i].deriv(m)?;
            }
        }
        acc += (&x[m].truncate(order - 1) * &dlog).scale(0.5);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::seed;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn d_of_x_dy() {
        let chart = Arc::new(Chart::euclidean(2));
        let psi = FieldExpr::form(chart, 1, |x| {
            Ok(Form::one_form(vec![Jet::zero(2, x[0].order()), x[0].clone()]))
        });
        let d = exterior_derivative(&psi, &[0.3, 0.7], 0).unwrap();
        assert_eq!(d.values(), vec![1.0]);
    }

    #[test]
    fn d_of_minus_log_radius() {
        let x = seed(&[1.0, 0.0, 0.0, 0.0], 1);
        let r2 = x.iter().fold(Jet::zero(4, 1), |a, c| a + c * c);
        let f = -r2.ln().unwrap();
        let df: Vec<f64> = (0..4).map(|i| f.grad(i)).collect();
        assert_eq!(df, vec![-2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn interior_product_convention() {
        let om = Form::basis(2, &[0, 1], 2, 0);
        let v = coordinate_vector(2, 1, 2, 0);
        assert_eq!(om.interior(&v).values(), vec![-1.0, 0.0]);
    }

    #[test]
    fn wedge_is_alternating() {
        let dx = Form::basis(3, &[0], 3, 0);
        assert_eq!(dx.wedge(&dx).sup(), 0.0);
        let dy = Form::basis(3, &[1], 3, 0);
        assert_eq!(dy.wedge(&dx).component(&[0, 1]).value(), -1.0);
    }

    #[test]
    fn pullback_of_square_map() {
        let chart = Arc::new(Chart::euclidean(2));
        let f = SmoothMap::new(chart.clone(), chart.clone(), |x| Ok(vec![x[0].square(), x[1].clone()]));
        let area = FieldExpr::form(chart, 2, |x| Ok(Form::basis(2, &[0, 1], x[0].dim(), x[0].order())));
        let pulled = pullback_field(&f, &area).unwrap();
        let v = pulled.eval_form(&seed(&[1.0, 1.0], 0)).unwrap();
        assert_eq!(v.values(), vec![2.0]);
    }

    #[test]
    fn coordinate_brackets() {
        let x = seed(&[1.0, 1.0], 1);
        let ex = coordinate_vector(2, 0, 2, 1);
        let ey = coordinate_vector(2, 1, 2, 1);
        assert_eq!(sup_vec(&lie_bracket(&ex, &ey).unwrap()), 0.0);
        let v = vec![Jet::zero(2, 1), x[0].clone()];
        let w = vec![x[1].clone(), Jet::zero(2, 1)];
        let b = lie_bracket(&v, &w).unwrap();
        assert_eq!((b[0].value(), b[1].value()), (1.0, -1.0));
    }

    #[test]
    fn conformally_flat_symbols() {
        let x = seed(&[0.4, -0.2], 1);
        let e = (x[0].scale(2.0)).exp();
        let g = vec![vec![e.clone(), Jet::zero(2, 1)], vec![Jet::zero(2, 1), e]];
        let gam = christoffels(&g).unwrap();
        let v = |k: usize, i: usize, j: usize| gam[k][i][j].value();
        assert!(close(v(0, 0, 0), 1.0, 1e-14));
        assert!(close(v(0, 1, 1), -1.0, 1e-14));
        assert!(close(v(1, 0, 1), 1.0, 1e-14));
        assert!(close(v(1, 1, 0), 1.0, 1e-14));
        assert!(close(v(1, 0, 0), 0.0, 1e-14));
        assert!(close(v(1, 1, 1), 0.0, 1e-14));
    }

    #[test]
    fn product_metric_has_no_t_symbols() {
        // 2dt² + 2h with h depending only on u
        let x = seed(&[0.1, 0.3, -0.4], 1);
        let z = || Jet::zero(3, 1);
        let h00 = (&x[0] * &x[0] + 1.0).scale(2.0);
        let h11 = (&x[0] * &x[1]).exp().scale(2.0);
        let h01 = (&x[0] * 0.1).scale(2.0);
        let g = vec![
            vec![h00, h01.clone(), z()],
            vec![h01, h11, z()],
            vec![z(), z(), Jet::constant(3, 1, 2.0)],
        ];
        let gam = christoffels(&g).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    if k == 2 || i == 2 || j == 2 {
                        assert!(gam[k][i][j].value().abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn not_positive_definite() {
        let g = vec![
            vec![Jet::constant(2, 1, 1.0), Jet::zero(2, 1)],
            vec![Jet::zero(2, 1), Jet::constant(2, 1, -1.0)],
        ];
        assert_eq!(christoffels(&g).unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn sharp_of_dx1() {
        let mut om = Form::zero(4, 2, 4, 0);
        om.add_component(&[0, 1], &Jet::constant(4, 0, 1.0));
        om.add_component(&[2, 3], &Jet::constant(4, 0, 1.0));
        let x = sharp_omega(&om, &Form::basis(4, &[0], 4, 0)).unwrap();
        assert_eq!(x.iter().map(Jet::value).collect::<Vec<_>>(), vec![0.0, -1.0, 0.0, 0.0]);
        let zero = sharp_omega(&om, &Form::zero(4, 1, 4, 0)).unwrap();
        assert_eq!(sup_vec(&zero), 0.0);
        let degenerate = Form::basis(4, &[0, 1], 4, 0);
        assert_eq!(sharp_omega(&degenerate, &Form::basis(4, &[0], 4, 0)), Err(Error::DegenerateForm));
    }

    #[test]
    fn sharp_scales_inversely() {
        let c: f64 = 0.7;
        let mut om = Form::zero(4, 2, 4, 0);
        om.add_component(&[0, 1], &Jet::constant(4, 0, 1.0));
        om.add_component(&[2, 3], &Jet::constant(4, 0, 1.0));
        om.add_component(&[0, 3], &Jet::constant(4, 0, 0.3));
        let alpha = Form::constant(4, 1, &[0.2, -1.0, 0.5, 0.1], 4, 0);
        let a = sharp_omega(&om, &alpha).unwrap();
        let b = sharp_omega(&om.scale(c.exp()), &alpha).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!(close(p.value() * (-c).exp(), q.value(), 1e-14));
        }
    }

    #[test]
    fn substitution_matches_direct_composition() {
        let y = seed(&[0.5, -0.3], 3);
        let f = (&y[0] * &y[1]).exp() + y[0].sin();
        let u = seed(&[0.2], 3);
        let inner = vec![&u[0] * &u[0] + 0.46, u[0].cos() + (-0.3 - 0.2f64.cos())];
        let direct = (&inner[0] * &inner[1]).exp() + inner[0].sin();
        let via = substitute(&f, &inner);
        for (a, b) in direct.coeffs().iter().zip(via.coeffs()) {
            assert!(close(*a, *b, 1e-13), "{a} vs {b}");
        }
    }
}
