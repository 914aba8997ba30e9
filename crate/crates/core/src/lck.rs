//! Hermitian structures, Lee forms, LCK certification and twisted calculus.
//!
//! Sign conventions, fixed here and used everywhere else:
//! `Ω(X,Y) = g(JX,Y)`, so the Euclidean metric with the standard `J` gives
//! `Ω = Σ dx_k∧dy_k`; the Lee form solves `dΩ = ω∧Ω + (dΩ)₀` by least
//! squares in the metric induced by `g` on 3-forms; `d^ω ψ = dψ − ω∧ψ`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    self, binomial, det, mat_mul, sharp_omega, sup_mat, transpose, truncate_mat, Chart, FieldExpr,
    Form, Mat, Point, Valence,
};
use crate::jets::{self, Jet, MAX_ORDER};

pub type StructureFn = Arc<dyn Fn(&[Jet]) -> Result<(Mat, Mat)> + Send + Sync>;

/// A metric and an almost complex structure on a chart.
#[derive(Clone)]
pub struct HermitianStructure {
    pub chart: Arc<Chart>,
    pub label: String,
    eval: StructureFn,
}

impl fmt::Debug for HermitianStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianStructure({} on {})", self.label, self.chart.name)
    }
}

impl HermitianStructure {
    /// `f` returns `(g, J)` on coordinate jets, `g[i][j]` and `J[i][j] = J^i_j`.
    pub fn new(
        chart: Arc<Chart>,
        label: impl Into<String>,
        f: impl Fn(&[Jet]) -> Result<(Mat, Mat)> + Send + Sync + 'static,
    ) -> HermitianStructure {
        HermitianStructure { chart, label: label.into(), eval: Arc::new(f) }
    }

    pub fn from_fields(label: impl Into<String>, g: FieldExpr, j: FieldExpr) -> Result<HermitianStructure> {
        if g.valence != Valence::Tensor(0, 2) || j.valence != Valence::Tensor(1, 1) {
            return Err(Error::ValenceMismatch("need a (0,2) metric and a (1,1) J".into()));
        }
        let chart = g.chart.clone();
        Ok(HermitianStructure::new(chart, label, move |x| Ok((g.eval_matrix(x)?, j.eval_matrix(x)?))))
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    pub fn eval(&self, x: &[Jet]) -> Result<(Mat, Mat)> {
        if x.len() != self.dim() {
            return Err(Error::ValenceMismatch(format!(
                "{} expects {} coordinates",
                self.label,
                self.dim()
            )));
        }
        (self.eval)(x)
    }

    pub fn at(&self, p: &[f64], order: usize) -> Result<(Mat, Mat)> {
        if order > MAX_ORDER {
            return Err(Error::OrderTooLow { have: MAX_ORDER, need: order });
        }
        self.eval(&jets::seed(p, order))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> HermitianStructure {
        self.label = label.into();
        self
    }

    pub fn metric_field(&self) -> FieldExpr {
        let h = self.clone();
        FieldExpr::matrix(self.chart.clone(), Valence::Tensor(0, 2), move |x| Ok(h.eval(x)?.0))
    }

    pub fn complex_structure_field(&self) -> FieldExpr {
        let h = self.clone();
        FieldExpr::matrix(self.chart.clone(), Valence::Tensor(1, 1), move |x| Ok(h.eval(x)?.1))
    }

    /// `Ω` as a field, at the order of its inputs.
    pub fn fundamental_field(&self) -> FieldExpr {
        let h = self.clone();
        FieldExpr::form(self.chart.clone(), 2, move |x| {
            let (g, j) = h.eval(x)?;
            Ok(fundamental_from(&g, &j))
        })
    }

    /// The Lee form as a field. Inputs of order `k` need the structure at order `k + 1`.
    pub fn lee_field(&self) -> FieldExpr {
        let h = self.clone();
        FieldExpr::new(
            self.chart.clone(),
            Valence::Form(1),
            fields::seeded_only(move |x| {
                let p: Vec<f64> = x.iter().map(Jet::value).collect();
                Ok(lee_form(&h, &p, x[0].order())?.omega.coeffs)
            }),
        )
    }
}

/// `Ω_ij = g(J∂_i, ∂_j) = Σ_k J^k_i g_kj`.
pub fn fundamental_from(g: &Mat, j: &Mat) -> Form {
    Form::from_matrix(&mat_mul(&transpose(j), g))
}

pub fn fundamental_form(h: &HermitianStructure, p: &[f64], order: usize) -> Result<Form> {
    let (g, j) = h.at(p, order)?;
    Ok(fundamental_from(&g, &j))
}

/// `max(|JᵀgJ − g|, |J² + 1|)` at the constant term, relative to `|g|`.
pub fn compatibility_residual(g: &Mat, j: &Mat) -> f64 {
    let g0 = truncate_mat(g, 0);
    let j0 = truncate_mat(j, 0);
    let jtgj = mat_mul(&mat_mul(&transpose(&j0), &g0), &j0);
    let n = g.len();
    let mut herm = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            herm = herm.max((jtgj[a][b].value() - g0[a][b].value()).abs());
        }
    }
    let jj = fields::values(&j0);
    let square = (&jj * &jj + nalgebra::DMatrix::identity(n, n)).amax();
    (herm / (1.0 + sup_mat(&g0))).max(square)
}

/// Lee form with the norm of the primitive remainder `(dΩ)₀`.
#[derive(Debug, Clone)]
pub struct LeeForm {
    /// One jet order below the `Ω` it was extracted from.
    pub omega: Form,
    /// `|(dΩ)₀|_g` at the point.
    pub residual: f64,
    /// `|dΩ|_g` at the point.
    pub scale: f64,
}

/// Gram matrix of the metric induced by `g` on `p`-forms.
fn form_gram(ginv: &Mat, p: usize) -> Mat {
    let n = ginv.len();
    let sets = Form::zero(n, p, ginv[0][0].dim(), 0).index_sets();
    sets.iter()
        .map(|a| {
            sets.iter()
                .map(|b| {
                    let m: Mat = a.iter().map(|&i| b.iter().map(|&k| ginv[i][k].clone()).collect()).collect();
                    det(&m)
                })
                .collect()
        })
        .collect()
}

fn quad(gram: &Mat, a: &[Jet], b: &[Jet]) -> Jet {
    let mut acc = Jet::zero(a[0].dim(), a[0].order());
    for (i, ai) in a.iter().enumerate() {
        if ai.max_abs() == 0.0 {
            continue;
        }
        for (k, bk) in b.iter().enumerate() {
            if bk.max_abs() == 0.0 {
                continue;
            }
            acc += &(&gram[i][k] * ai) * bk;
        }
    }
    acc
}

/// Extracts `ω` from `dΩ = ω∧Ω + (dΩ)₀`; `Ω` of order `k` gives `ω` of order `k − 1`.
pub fn lee_from(g: &Mat, big_omega: &Form) -> Result<LeeForm> {
    let n = big_omega.dim;
    if n < 4 {
        return Err(Error::ValenceMismatch(
            "the Lee form needs complex dimension at least 2".into(),
        ));
    }
    let d_omega = big_omega.d()?;
    let order = d_omega.order();
    let om = big_omega.truncate(order);
    let ginv = fields::inverse(&truncate_mat(g, order))?;
    let gram = form_gram(&ginv, 3);
    let columns: Vec<Vec<Jet>> = (0..n)
        .map(|i| Form::basis(n, &[i], om.jet_dim(), order).wedge(&om).coeffs)
        .collect();
    let normal: Mat = (0..n).map(|i| (0..n).map(|k| quad(&gram, &columns[i], &columns[k])).collect()).collect();
    let rhs: Vec<Jet> = (0..n).map(|i| quad(&gram, &columns[i], &d_omega.coeffs)).collect();
    let w = jets::solve(&normal, &rhs)?;
    let omega = Form::one_form(w);
    let rem = d_omega.sub(&omega.wedge(&om));
    let r0: Vec<Jet> = rem.coeffs.iter().map(|c| c.truncate(0)).collect();
    let d0: Vec<Jet> = d_omega.coeffs.iter().map(|c| c.truncate(0)).collect();
    let g0 = truncate_mat(&gram, 0);
    let residual = if r0.is_empty() { 0.0 } else { quad(&g0, &r0, &r0).value().max(0.0).sqrt() };
    let scale = if d0.is_empty() { 0.0 } else { quad(&g0, &d0, &d0).value().max(0.0).sqrt() };
    debug_assert_eq!(rem.coeffs.len(), binomial(n, 3));
    Ok(LeeForm { omega, residual, scale })
}

/// The Lee form at `p` with jets of the given order.
pub fn lee_form(h: &HermitianStructure, p: &[f64], order: usize) -> Result<LeeForm> {
    let (g, j) = h.at(p, order + 1)?;
    lee_from(&g, &fundamental_from(&g, &j))
}

/// `g' = e^α g` with the same `J`.
pub fn conformal_rescale(h: &HermitianStructure, alpha: &FieldExpr) -> HermitianStructure {
    let (base, a) = (h.clone(), alpha.clone());
    let label = format!("{}*e^alpha", h.label);
    HermitianStructure::new(h.chart.clone(), label, move |x| {
        let (g, j) = base.eval(x)?;
        let f = a.eval_scalar(x)?.exp();
        let g = g.iter().map(|row| row.iter().map(|c| c * &f).collect()).collect();
        Ok((g, j))
    })
}

/// `d^ω ψ = dψ − ω∧ψ`, one order below the inputs.
pub fn twisted_differential(psi: &Form, omega: &Form) -> Result<Form> {
    if omega.deg != 1 || psi.dim != omega.dim {
        return Err(Error::ValenceMismatch("d^omega needs a 1-form on the same chart".into()));
    }
    let d = psi.d()?;
    let o = d.order();
    Ok(d.sub(&omega.truncate(o).wedge(&psi.truncate(o))))
}

pub fn twisted_differential_at(psi: &FieldExpr, omega: &FieldExpr, p: &[f64], order: usize) -> Result<Form> {
    let x = jets::seed(p, order + 1);
    twisted_differential(&psi.eval_form(&x)?, &omega.eval_form(&x)?)
}

/// `d^ω f` for a scalar jet.
pub fn twisted_differential_scalar(f: &Jet, omega: &Form) -> Result<Form> {
    let n = omega.dim;
    let psi = Form::from_coeffs(n, 0, vec![f.clone()], f);
    twisted_differential(&psi, omega)
}

/// `Ω` and a closed 1-form `ω` at a point, both at one jet order.
#[derive(Debug, Clone)]
pub struct Twisted {
    pub big_omega: Form,
    pub omega: Form,
}

impl Twisted {
    pub fn new(big_omega: Form, omega: Form) -> Twisted {
        let o = big_omega.order().min(omega.order());
        Twisted { big_omega: big_omega.truncate(o), omega: omega.truncate(o) }
    }

    /// `Ω` and the extracted Lee form of `h` at `p`, both at `order`.
    pub fn of(h: &HermitianStructure, p: &[f64], order: usize) -> Result<Twisted> {
        let (g, j) = h.at(p, order + 1)?;
        let big = fundamental_from(&g, &j);
        let lee = lee_from(&g, &big)?;
        Ok(Twisted::new(big, lee.omega))
    }

    pub fn order(&self) -> usize {
        self.big_omega.order()
    }

    pub fn truncate(&self, order: usize) -> Twisted {
        Twisted::new(self.big_omega.truncate(order), self.omega.truncate(order))
    }

    /// `♯_Ω d^ω f`; `f` must be one order above the context.
    pub fn hamiltonian(&self, f: &Jet) -> Result<Vec<Jet>> {
        let f = f.truncate(self.order() + 1);
        let df = twisted_differential_scalar(&f, &self.omega_up(f.order()))?;
        sharp_omega(&self.big_omega, &df)
    }

    fn omega_up(&self, order: usize) -> Form {
        // d^ω f only uses ω at the order of df; pad with zero jets above.
        let mut coeffs = Vec::with_capacity(self.omega.dim);
        for c in &self.omega.coeffs {
            let mut full = vec![0.0; jets::coeff_count(c.dim(), order)];
            full[..c.coeffs().len()].copy_from_slice(c.coeffs());
            coeffs.push(Jet::from_coeffs(c.dim(), order, full));
        }
        Form::one_form(coeffs)
    }

    /// `{f₁, f₂} = Ω(♯d^ωf₁, ♯d^ωf₂)` at the context order.
    pub fn bracket(&self, f1: &Jet, f2: &Jet) -> Result<Jet> {
        let x1 = self.hamiltonian(f1)?;
        let x2 = self.hamiltonian(f2)?;
        Ok(self.big_omega.eval_on(&[&x1, &x2]))
    }
}

/// `♯_Ω d^ω f` at `p`.
pub fn twisted_hamiltonian_field(h: &HermitianStructure, f: &FieldExpr, p: &[f64], order: usize) -> Result<Vec<Jet>> {
    let ctx = Twisted::of(h, p, order)?;
    ctx.hamiltonian(&f.eval_scalar(&jets::seed(p, order + 1))?)
}

/// `{f₁, f₂}` at `p`.
pub fn twisted_poisson(h: &HermitianStructure, f1: &FieldExpr, f2: &FieldExpr, p: &[f64], order: usize) -> Result<Jet> {
    let ctx = Twisted::of(h, p, order)?;
    let x = jets::seed(p, order + 1);
    ctx.bracket(&f1.eval_scalar(&x)?, &f2.eval_scalar(&x)?)
}

/// Per-check residuals of an LCK certification, each relative to its natural scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LckResiduals {
    pub fundamental_compat: f64,
    pub lee_residual: f64,
    pub d_omega_minus_omega_wedge: f64,
    pub d_omega: f64,
    pub nijenhuis: f64,
}

impl LckResiduals {
    fn max(self, o: LckResiduals) -> LckResiduals {
        LckResiduals {
            fundamental_compat: self.fundamental_compat.max(o.fundamental_compat),
            lee_residual: self.lee_residual.max(o.lee_residual),
            d_omega_minus_omega_wedge: self.d_omega_minus_omega_wedge.max(o.d_omega_minus_omega_wedge),
            d_omega: self.d_omega.max(o.d_omega),
            nijenhuis: self.nijenhuis.max(o.nijenhuis),
        }
    }

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("fundamental_compat", self.fundamental_compat),
            ("lee_residual", self.lee_residual),
            ("dOmega_minus_omega_wedge_Omega", self.d_omega_minus_omega_wedge),
            ("d_omega", self.d_omega),
            ("nijenhuis", self.nijenhuis),
        ]
    }
}

/// Certification outcome over a sample set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LckCertificate {
    pub label: String,
    pub samples: usize,
    pub seed: Option<u64>,
    pub residuals: LckResiduals,
    pub tolerance: f64,
    pub verdicts: Vec<(String, bool)>,
    /// Real dimension 2: 3-forms vanish and no Lee form is extracted.
    pub top_degree: bool,
}

impl LckCertificate {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|(_, ok)| *ok)
    }

    pub fn verdict(&self, check: &str) -> Option<bool> {
        self.verdicts.iter().find(|(n, _)| n == check).map(|(_, v)| *v)
    }
}

/// Residuals of the two LCK conditions (plus compatibility and integrability) at one point.
pub fn lck_residuals_at(h: &HermitianStructure, p: &[f64]) -> Result<LckResiduals> {
    let (g, j) = h.at(p, 2)?;
    let compat = compatibility_residual(&g, &j);
    let nij = fields::nijenhuis(&j, 1e-6)?;
    let dj_scale = j
        .iter()
        .flatten()
        .map(|c| (0..c.dim()).map(|i| c.grad(i).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let nij_sup = nij.iter().map(sup_mat).fold(0.0, f64::max);
    let nijenhuis = nij_sup / (1.0 + dj_scale);
    let big = fundamental_from(&g, &j);
    if h.dim() == 2 {
        return Ok(LckResiduals { fundamental_compat: compat, nijenhuis, ..Default::default() });
    }
    let lee = lee_from(&g, &big)?;
    let d_big = big.d()?;
    let o1 = d_big.order();
    let rem = d_big.sub(&lee.omega.truncate(o1).wedge(&big.truncate(o1)));
    let d_lee = lee.omega.d()?;
    let lee_grad = lee
        .omega
        .coeffs
        .iter()
        .map(|c| (0..c.dim()).map(|i| c.grad(i).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    Ok(LckResiduals {
        fundamental_compat: compat,
        lee_residual: lee.residual / (1.0 + lee.scale),
        d_omega_minus_omega_wedge: rem.sup() / (1.0 + d_big.sup()),
        d_omega: d_lee.sup() / (1.0 + lee_grad),
        nijenhuis,
    })
}

/// Certifies the LCK conditions on the given sample points.
pub fn certify_lck(h: &HermitianStructure, points: &[Point], tolerance: f64) -> Result<LckCertificate> {
    if points.is_empty() {
        return Err(Error::Config("certification needs at least one sample".into()));
    }
    let per: Vec<LckResiduals> =
        points.par_iter().map(|p| lck_residuals_at(h, p)).collect::<Result<_>>()?;
    let residuals = per.into_iter().fold(LckResiduals::default(), LckResiduals::max);
    let verdicts = residuals.named().iter().map(|(n, r)| (n.to_string(), *r <= tolerance)).collect();
    Ok(LckCertificate {
        label: h.label.clone(),
        samples: points.len(),
        seed: None,
        residuals,
        tolerance,
        verdicts,
        top_degree: h.dim() == 2,
    })
}

/// [`certify_lck`] on points drawn from the structure's chart with a seeded generator.
pub fn certify_lck_seeded(h: &HermitianStructure, samples: usize, seed: u64, tolerance: f64) -> Result<LckCertificate> {
    let points = crate::sample_points(&h.chart, samples, seed);
    let mut cert = certify_lck(h, &points, tolerance)?;
    cert.seed = Some(seed);
    Ok(cert)
}
