//! Densities in an explicit gauge and the canonical Weyl connection.
//!
//! A density of weight `t` is stored as a form `ψ_g` together with the gauge
//! `g` it is written in; `ψ = ψ_g ⊗ l_g^t`. Changing to `e^α g` multiplies the
//! base by `e^{tα/2}`. Intrinsic statements are checked as two-path agreement.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fields::{self, christoffels, lie_bracket, mat_vec, truncate_mat, truncate_vec, FieldExpr, Form, Mat, SmoothMap, Valence};
use crate::jets::{self, Jet};
use crate::lck::{conformal_rescale, fundamental_from, lee_from, twisted_differential, twisted_differential_scalar, HermitianStructure};

pub const SUPPORTED_WEIGHTS: [i32; 3] = [1, 2, -2];

/// Named metrics of one conformal class on a shared chart.
#[derive(Debug, Clone, Default)]
pub struct Gauges {
    map: BTreeMap<String, HermitianStructure>,
}

impl Gauges {
    pub fn new() -> Gauges {
        Gauges::default()
    }

    pub fn register(&mut self, h: HermitianStructure) {
        self.map.insert(h.label.clone(), h);
    }

    pub fn get(&self, label: &str) -> Result<&HermitianStructure> {
        self.map.get(label).ok_or_else(|| Error::UnknownGauge(label.to_string()))
    }

    /// Registers `e^α g` under `new_label` and returns it.
    pub fn rescale(&mut self, label: &str, alpha: &FieldExpr, new_label: &str) -> Result<HermitianStructure> {
        let h = conformal_rescale(self.get(label)?, alpha).with_label(new_label);
        self.register(h.clone());
        Ok(h)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct DensityForm {
    pub base: FieldExpr,
    pub weight: i32,
    pub gauge: String,
}

impl DensityForm {
    pub fn new(base: FieldExpr, weight: i32, gauge: impl Into<String>) -> Result<DensityForm> {
        if !SUPPORTED_WEIGHTS.contains(&weight) {
            return Err(Error::UnsupportedWeight(weight));
        }
        if !matches!(base.valence, Valence::Form(_) | Valence::Scalar) {
            return Err(Error::ValenceMismatch("density base must be a form".into()));
        }
        Ok(DensityForm { base, weight, gauge: gauge.into() })
    }

    pub fn degree(&self) -> usize {
        match self.base.valence {
            Valence::Form(p) => p,
            _ => 0,
        }
    }

    pub fn eval(&self, p: &[f64], order: usize) -> Result<Form> {
        self.base.eval_form(&jets::seed(p, order))
    }
}

/// Rewrites `ψ` in the gauge `e^α g`, which must be registered as `target`.
pub fn gauge_change(gauges: &Gauges, psi: &DensityForm, alpha: &FieldExpr, target: &str) -> Result<DensityForm> {
    gauges.get(&psi.gauge)?;
    gauges.get(target)?;
    let (base, a, t) = (psi.base.clone(), alpha.clone(), psi.weight as f64);
    let chart = psi.base.chart.clone();
    let valence = psi.base.valence;
    let scaled = FieldExpr::new(chart, valence, move |x| {
        let f = a.eval_scalar(x)?.scale(0.5 * t).exp();
        Ok(base.eval(x)?.iter().map(|c| c * &f).collect())
    });
    DensityForm::new(scaled, psi.weight, target)
}

/// The Weyl connection written in one gauge, at one jet order.
#[derive(Debug, Clone)]
pub struct WeylGaugeRep {
    pub gauge: String,
    /// `gamma[k][i][j] = Γ^k_ij`.
    pub gamma: Vec<Mat>,
    pub lee: Form,
    pub g: Mat,
}

impl WeylGaugeRep {
    pub fn order(&self) -> usize {
        self.lee.order()
    }

    /// Connection coefficient `(−t/2)ω` on weight-`t` densities.
    pub fn density_coefficient(&self, weight: i32) -> Result<Form> {
        if !SUPPORTED_WEIGHTS.contains(&weight) {
            return Err(Error::UnsupportedWeight(weight));
        }
        Ok(self.lee.scale(-0.5 * weight as f64))
    }

    /// `(∇_X Y)^k = X^i ∂_i Y^k + Γ^k_ij X^i Y^j`; `y` one order above the result.
    pub fn nabla(&self, x: &[Jet], y: &[Jet]) -> Result<Vec<Jet>> {
        let n = self.g.len();
        let order = self.order().min(y[0].order().saturating_sub(1)).min(x[0].order());
        if y[0].order() == 0 {
            return Err(Error::OrderTooLow { have: 0, need: 1 });
        }
        let x = truncate_vec(x, order);
        let y1 = truncate_vec(y, order + 1);
        let y0 = truncate_vec(y, order);
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = Jet::zero(x[0].dim(), order);
            for i in 0..n {
                acc += &x[i] * &y1[k].deriv(i)?;
                for j in 0..n {
                    let c = &self.gamma[k][i][j];
                    if c.max_abs() != 0.0 {
                        acc += &(&c.truncate(order) * &x[i]) * &y0[j];
                    }
                }
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// `Γ_W = Γ_LC − ½(ω_i δ^k_j + ω_j δ^k_i − g_ij ω^k)` in the gauge of `h`.
pub fn weyl_connection(h: &HermitianStructure, p: &[f64], order: usize) -> Result<WeylGaugeRep> {
    let (g, j) = h.at(p, order + 1)?;
    let lc = christoffels(&g)?;
    let lee = lee_from(&g, &fundamental_from(&g, &j))?.omega;
    let gk = truncate_mat(&g, order);
    let ginv = fields::inverse(&gk)?;
    let n = h.dim();
    let up: Vec<Jet> = (0..n)
        .map(|k| (0..n).fold(Jet::zero(n, order), |acc, l| acc + &ginv[k][l] * &lee.coeffs[l]))
        .collect();
    let mut gamma = lc;
    for (k, gk_row) in gamma.iter_mut().enumerate() {
        for i in 0..n {
            for jj in 0..n {
                let mut corr = &gk[i][jj] * &up[k];
                if k == jj {
                    corr -= &lee.coeffs[i];
                }
                if k == i {
                    corr -= &lee.coeffs[jj];
                }
                gk_row[i][jj] += corr.scale(0.5);
            }
        }
    }
    Ok(WeylGaugeRep { gauge: h.label.clone(), gamma, lee, g: gk })
}

fn pair(g: &Mat, a: &[Jet], b: &[Jet]) -> Jet {
    let ga = mat_vec(g, b);
    a.iter().zip(&ga).fold(Jet::zero(a[0].dim(), a[0].order()), |acc, (x, y)| acc + x * y)
}

fn directional(x: &[Jet], f: &Jet) -> Result<Jet> {
    let o = f.order() - 1;
    let mut acc = Jet::zero(f.dim(), o);
    for (i, xi) in x.iter().enumerate() {
        acc += xi.truncate(o) * f.deriv(i)?;
    }
    Ok(acc)
}

/// `|2g(∇_X Y, Z) − RHS|` with the conformal six-terms right-hand side, at `p`.
pub fn six_terms_residual(h: &HermitianStructure, p: &[f64], x: &FieldExpr, y: &FieldExpr, z: &FieldExpr) -> Result<f64> {
    let rep = weyl_connection(h, p, 0)?;
    let s = jets::seed(p, 1);
    let (x1, y1, z1) = (x.eval(&s)?, y.eval(&s)?, z.eval(&s)?);
    let (g1, _) = h.at(p, 1)?;
    let (x0, y0, z0) = (truncate_vec(&x1, 0), truncate_vec(&y1, 0), truncate_vec(&z1, 0));
    let g0 = truncate_mat(&g1, 0);
    let lhs = pair(&g0, &rep.nabla(&x0, &y1)?, &z0).scale(2.0);
    let w = |v: &[Jet]| -> Jet { rep.lee.eval_on(&[v]) };
    let rhs = directional(&x1, &pair(&g1, &y1, &z1))? + directional(&y1, &pair(&g1, &x1, &z1))?
        - directional(&z1, &pair(&g1, &x1, &y1))?
        + pair(&g0, &lie_bracket(&x1, &y1)?, &z0)
        - pair(&g0, &lie_bracket(&x1, &z1)?, &y0)
        - pair(&g0, &lie_bracket(&y1, &z1)?, &x0)
        - w(&x0) * pair(&g0, &y0, &z0)
        - w(&y0) * pair(&g0, &x0, &z0)
        + w(&z0) * pair(&g0, &x0, &y0);
    Ok((lhs - rhs).value().abs())
}

/// `|∇_X Y − ∇_Y X − [X, Y]|` at `p`.
pub fn torsion_residual(h: &HermitianStructure, p: &[f64], x: &FieldExpr, y: &FieldExpr) -> Result<f64> {
    let rep = weyl_connection(h, p, 0)?;
    let s = jets::seed(p, 1);
    let (x1, y1) = (x.eval(&s)?, y.eval(&s)?);
    let a = rep.nabla(&x1, &y1)?;
    let b = rep.nabla(&y1, &x1)?;
    let br = lie_bracket(&x1, &y1)?;
    Ok((0..a.len()).map(|k| (&a[k] - &b[k] - &br[k]).value().abs()).fold(0.0, f64::max))
}

/// `max |(∇_i g)_jk − ω_i g_jk|`.
pub fn nabla_metric_residual(h: &HermitianStructure, p: &[f64]) -> Result<f64> {
    let rep = weyl_connection(h, p, 0)?;
    let (g1, _) = h.at(p, 1)?;
    let n = h.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = g1[j][k].deriv(i)?.value() - rep.lee.coeffs[i].value() * rep.g[j][k].value();
                for m in 0..n {
                    v -= rep.gamma[m][i][j].value() * rep.g[m][k].value();
                    v -= rep.gamma[m][i][k].value() * rep.g[j][m].value();
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// `max |(∇_i J)^k_j|` over coordinate fields.
pub fn check_nabla_j(h: &HermitianStructure, p: &[f64]) -> Result<f64> {
    let rep = weyl_connection(h, p, 0)?;
    let (_, j1) = h.at(p, 1)?;
    let n = h.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            for jj in 0..n {
                let mut v = j1[k][jj].deriv(i)?.value();
                for m in 0..n {
                    v += rep.gamma[k][i][m].value() * j1[m][jj].value();
                    v -= rep.gamma[m][i][jj].value() * j1[k][m].value();
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// `d^∇ψ` for a weight-2 density: `d^{ω_g} ψ_g` in ψ's gauge.
pub fn d_nabla(gauges: &Gauges, psi: &DensityForm, p: &[f64], order: usize) -> Result<Form> {
    if psi.weight != 2 {
        return Err(Error::UnsupportedWeight(psi.weight));
    }
    let h = gauges.get(&psi.gauge)?;
    let x = jets::seed(p, order + 1);
    let base = psi.base.eval_form(&x)?;
    let (g, j) = h.at(p, order + 2)?;
    let lee = lee_from(&g, &fundamental_from(&g, &j))?.omega;
    twisted_differential(&base, &lee)
}

/// The 2-form by which `R^∇` acts on `l_g²`: `−d^ω(d^ω 1)`, at order 0.
pub fn density_curvature(h: &HermitianStructure, p: &[f64]) -> Result<Form> {
    let (g, j) = h.at(p, 3)?;
    let n = h.dim();
    let lee = lee_from(&g, &fundamental_from(&g, &j))?.omega;
    let one = Jet::constant(n, 2, 1.0);
    // ∇ l_g² = −ω ⊗ l_g², i.e. d^ω applied to the constant base 1
    let nabla_l = twisted_differential_scalar(&one, &lee)?;
    Ok(twisted_differential(&nabla_l, &lee)?.scale(-1.0))
}

/// `|h_*(∇_V W) − ∇_{h_*V} h_*W|` at `h(p)`; `inv` is `h⁻¹`.
pub fn aut_invariance_residual(
    hs: &HermitianStructure,
    map: &SmoothMap,
    inv: &SmoothMap,
    v: &FieldExpr,
    w: &FieldExpr,
    p: &[f64],
) -> Result<f64> {
    let rep = weyl_connection(hs, p, 0)?;
    let s = jets::seed(p, 1);
    let nab: Vec<f64> = rep.nabla(&v.eval(&s)?, &w.eval(&s)?)?.iter().map(Jet::value).collect();
    let lhs = map.push_vector(p, &nab)?;
    let q = map.apply_point(p)?;
    let (pv, pw) = (fields::pushforward_field(inv, v)?, fields::pushforward_field(inv, w)?);
    let rep_q = weyl_connection(hs, &q, 0)?;
    let sq = jets::seed(&q, 1);
    let rhs = rep_q.nabla(&pv.eval(&sq)?, &pw.eval(&sq)?)?;
    Ok(lhs.iter().zip(&rhs).map(|(a, b)| (a - b.value()).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Chart;
    use std::sync::Arc;

    fn std_j(d: usize, o: usize) -> Mat {
        let mut j = vec![vec![Jet::zero(d, o); 4]; 4];
        for k in 0..2 {
            j[2 * k + 1][2 * k] = Jet::constant(d, o, 1.0);
            j[2 * k][2 * k + 1] = Jet::constant(d, o, -1.0);
        }
        j
    }

    fn witness() -> HermitianStructure {
        HermitianStructure::new(Arc::new(Chart::euclidean(4)), "witness", |x| {
            let (d, o) = (x[0].dim(), x[0].order());
            let e = (&x[0] * &x[2]).scale(2.0).exp();
            let mut g = fields::identity(4, d, o);
            g[2][2] = e.clone();
            g[3][3] = e;
            Ok((g, std_j(d, o)))
        })
    }

    #[test]
    fn witness_density_curvature() {
        let c = density_curvature(&witness(), &[0.4, -0.3, 0.2, 0.7]).unwrap();
        assert!((c.component(&[2, 0]).value() - 2.0).abs() < 1e-12);
        assert!(c.component(&[0, 1]).value().abs() < 1e-12);
    }

    #[test]
    fn witness_metric_and_j_parallel() {
        let p = [0.4, -0.3, 0.2, 0.7];
        assert!(nabla_metric_residual(&witness(), &p).unwrap() < 1e-12);
        assert!(check_nabla_j(&witness(), &p).unwrap() < 1e-12);
    }

    #[test]
    fn weights_are_restricted() {
        let chart = Arc::new(Chart::euclidean(4));
        let f = FieldExpr::scalar(chart, |x| Ok(x[0].clone()));
        assert_eq!(DensityForm::new(f.clone(), 3, "g").unwrap_err(), Error::UnsupportedWeight(3));
        assert!(DensityForm::new(f, -2, "g").is_ok());
    }
}
