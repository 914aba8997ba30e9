//! Reduction on a quotient chart through a local section of the zero set.
//!
//! For `s: U → μ⁻¹(0)` the reduced form is `Ω̄ = s*Ω`. The complex structure
//! comes from horizontal lifts: `h_a` is the projection of `ds(∂_a)` onto
//! `E = (𝔤 ⊕ J𝔤)^⊥`, and `J̄∂_a` is the unique vector with
//! `ds(J̄∂_a) ≡ J h_a` modulo `𝔤`. Then `ḡ(X, Y) = Ω̄(X, J̄Y)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, covariant_derivative_oneform, jacobian, mat_vec, substitute, truncate_vec, Chart, FieldExpr, Form, Mat, Point, Sampler, SmoothMap};
use crate::gallery::{self, SasakiStructure};
use crate::jets::{self, Jet, MAX_ORDER};
use crate::lck::{certify_lck, conformal_rescale, fundamental_from, lck_residuals_at, HermitianStructure};
use crate::moment::{MomentumData, REGULARITY_MARGIN};

/// Tolerance on `|μ(s(w))|` below which a section is accepted.
pub const SECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct QuotientChartData {
    pub label: String,
    pub ambient: HermitianStructure,
    pub momentum: MomentumData,
    pub chart: Arc<Chart>,
    pub section: SmoothMap,
}

impl QuotientChartData {
    pub fn new(
        label: impl Into<String>,
        ambient: HermitianStructure,
        momentum: MomentumData,
        chart: Arc<Chart>,
        section: SmoothMap,
    ) -> Result<QuotientChartData> {
        if ambient.label != momentum.gauge {
            return Err(Error::GaugeMismatch { structure: ambient.label.clone(), momentum: momentum.gauge.clone() });
        }
        if section.target.dim != ambient.dim() || section.source.dim != chart.dim {
            return Err(Error::ValenceMismatch("section does not map the quotient chart into the ambient chart".into()));
        }
        Ok(QuotientChartData { label: label.into(), ambient, momentum, chart, section })
    }

    /// `max |μ(s(w))|` at the given quotient points.
    pub fn section_residual(&self, points: &[Point]) -> Result<f64> {
        let mut worst = 0.0f64;
        for p in points {
            let z = self.section.apply_point(p)?;
            for v in self.momentum.values(&z)? {
                worst = worst.max(v.abs());
            }
        }
        Ok(worst)
    }
}

/// Reduced data at one quotient point, all at one jet order.
#[derive(Debug, Clone)]
pub struct ReducedLocal {
    pub g: Mat,
    pub j: Mat,
    pub omega: Form,
    /// Horizontal lifts of the coordinate fields, ambient components.
    pub lifts: Vec<Vec<Jet>>,
    /// Ambient metric along the section.
    pub ambient_g: Mat,
}

fn gram(g: &Mat, a: &[Jet], b: &[Jet]) -> Jet {
    let gb = mat_vec(g, b);
    a.iter().zip(&gb).fold(Jet::zero(a[0].dim(), a[0].order()), |acc, (x, y)| acc + x * y)
}

/// Reduced `(ḡ, J̄, Ω̄)` at `w` with jets of the given order.
pub fn reduced_local(q: &QuotientChartData, w: &[f64], order: usize) -> Result<ReducedLocal> {
    if order + 1 > MAX_ORDER {
        return Err(Error::OrderTooLow { have: MAX_ORDER, need: order + 1 });
    }
    let s_hi = q.section.apply(&jets::seed(w, order + 1))?;
    let ds = jacobian(&s_hi)?;
    let s = truncate_vec(&s_hi, order);
    let z: Vec<f64> = s.iter().map(Jet::value).collect();
    let off = q.momentum.values(&z)?.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if off > SECTION_TOL {
        return Err(Error::SectionOffZeroSet { residual: off });
    }

    let big_n = q.ambient.dim();
    let m = q.chart.dim;
    let (g, j) = q.ambient.eval(&s)?;
    let omega = fundamental_from(&g, &j).pullback(&ds);
    let xs: Vec<Vec<Jet>> = q.momentum.action.generators.iter().map(|x| x.eval(&s)).collect::<Result<_>>()?;
    let r = xs.len();

    // regularity of dμ along the section
    let sz = jets::seed(&z, 1);
    let mut dmu = DMatrix::zeros(r, big_n);
    for (i, c) in q.momentum.components.iter().enumerate() {
        let v = c.eval_scalar(&sz)?;
        for k in 0..big_n {
            dmu[(i, k)] = v.grad(k);
        }
    }
    let sigma_min = dmu.svd(false, false).singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(sigma_min > REGULARITY_MARGIN) {
        return Err(Error::RankDeficiency { sigma_min });
    }

    // P_E v = v − B c with (BᵀgB) c = Bᵀg v, B = [X_i, J X_i]
    let mut basis = xs.clone();
    basis.extend(xs.iter().map(|x| mat_vec(&j, x)));
    let normal: Mat = basis.iter().map(|a| basis.iter().map(|b| gram(&g, a, b)).collect()).collect();
    let columns: Vec<Vec<Jet>> = (0..m).map(|a| (0..big_n).map(|i| ds[i][a].clone()).collect()).collect();
    let lifts: Vec<Vec<Jet>> = columns
        .iter()
        .map(|v| {
            let rhs: Vec<Jet> = basis.iter().map(|b| gram(&g, b, v)).collect();
            let c = jets::solve(&normal, &rhs)?;
            let mut h = v.clone();
            for (ci, bi) in c.iter().zip(&basis) {
                for (hk, bk) in h.iter_mut().zip(bi) {
                    *hk -= ci * bk;
                }
            }
            Ok(h)
        })
        .collect::<Result<_>>()?;

    // J h_a = Σ_b c_ba ds(∂_b) + Σ_i d_ia X_i
    let rows: Mat = (0..big_n)
        .map(|i| columns.iter().map(|col| col[i].clone()).chain(xs.iter().map(|x| x[i].clone())).collect())
        .collect();
    let mut jbar = vec![vec![Jet::zero(m, order); m]; m];
    for (a, h) in lifts.iter().enumerate() {
        let jh = mat_vec(&j, h);
        let sol = jets::solve_least_squares(&rows, &jh)?;
        for b in 0..m {
            jbar[b][a] = sol[b].clone();
        }
    }
    // ḡ_ab = Σ_c Ω̄_ac J̄^c_b
    let om = omega.to_matrix();
    let gbar = fields::mat_mul(&om, &jbar);
    Ok(ReducedLocal { g: gbar, j: jbar, omega, lifts, ambient_g: g })
}

/// The reduced structure as a field on the quotient chart.
pub fn reduced_structure(q: &QuotientChartData) -> Result<HermitianStructure> {
    let probe = q.chart.sample(&mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0), 1);
    reduced_local(q, &probe[0], 0)?;
    let qd = q.clone();
    Ok(HermitianStructure::new(q.chart.clone(), format!("reduced:{}", q.label), move |x| {
        let order = x[0].order();
        let p: Vec<f64> = x.iter().map(Jet::value).collect();
        let local = reduced_local(&qd, &p, order)?;
        if jets::is_identity_seed(x) {
            return Ok((local.g, local.j));
        }
        let sub = |m: &Mat| -> Mat { m.iter().map(|row| row.iter().map(|c| substitute(c, x)).collect()).collect() };
        Ok((sub(&local.g), sub(&local.j)))
    }))
}

/// Pointwise conformal factor between two metrics and its spread.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ConformalReport {
    pub factor_min: f64,
    pub factor_max: f64,
    /// `max |a − c·b| / |a|` with `c` the least-squares factor at each point.
    pub spread: f64,
}

fn conformal_factor(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (f64, f64) {
    let c = a.dot(b) / b.dot(b);
    let spread = (a - b * c).amax() / a.amax();
    (c, spread)
}

fn merge(rep: &mut ConformalReport, c: f64, spread: f64) {
    rep.factor_min = rep.factor_min.min(c);
    rep.factor_max = rep.factor_max.max(c);
    rep.spread = rep.spread.max(spread);
}

fn empty_report() -> ConformalReport {
    ConformalReport { factor_min: f64::INFINITY, factor_max: f64::NEG_INFINITY, spread: 0.0 }
}

/// Compares two metrics on the same chart pointwise.
pub fn conformal_comparison(a: &HermitianStructure, b: &HermitianStructure, points: &[Point]) -> Result<ConformalReport> {
    let per: Vec<(f64, f64)> = points
        .par_iter()
        .map(|p| {
            let (ga, _) = a.at(p, 0)?;
            let (gb, _) = b.at(p, 0)?;
            Ok(conformal_factor(&fields::values(&ga), &fields::values(&gb)))
        })
        .collect::<Result<_>>()?;
    let mut rep = empty_report();
    for (c, s) in per {
        merge(&mut rep, c, s);
    }
    Ok(rep)
}

/// Reduced metric against `g(h_a, h_b)` along the section.
pub fn compatibility_pi_star(q: &QuotientChartData, reduced: &HermitianStructure, points: &[Point]) -> Result<ConformalReport> {
    let mut rep = empty_report();
    for p in points {
        let local = reduced_local(q, p, 0)?;
        let m = q.chart.dim;
        let lifted = DMatrix::from_fn(m, m, |a, b| gram(&local.ambient_g, &local.lifts[a], &local.lifts[b]).value());
        let (gb, _) = reduced.at(p, 0)?;
        let (c, s) = conformal_factor(&fields::values(&gb), &lifted);
        merge(&mut rep, c, s);
    }
    Ok(rep)
}

/// Boothby ℂⁿ with `Λ = (−1, 1, …, 1)` and `s(w) = (|w|, w)/√2` over `w ∈ ℂ^{n−1} \ 0`.
pub fn boothby_hopf_quotient(n: usize) -> Result<QuotientChartData> {
    boothby_hopf_quotient_twisted(n, None)
}

/// As [`boothby_hopf_quotient`], with the section moved along orbits by
/// `s'(w) = h_{θ(w)}(s(w))`.
pub fn boothby_hopf_quotient_twisted(n: usize, theta: Option<Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>>) -> Result<QuotientChartData> {
    if n < 2 {
        return Err(Error::Config("need n ≥ 2".into()));
    }
    let mut lambda = vec![1.0; n];
    lambda[0] = -1.0;
    let ambient = gallery::boothby_vaisman(n)?;
    let momentum = gallery::boothby_momentum(n, &lambda)?;
    let chart = gallery::punctured_chart(n - 1);
    let section = hopf_section(chart.clone(), ambient.chart.clone(), lambda, theta);
    QuotientChartData::new(format!("boothby:n={n}:L=-1,1"), ambient, momentum, chart, section)
}

/// Same reduction over holomorphic quotient coordinates `u = √2 z₁ z'`:
/// `s(u) = (|u|^{1/2}, u |u|^{−1/2}) / 2^{1/4}`.
pub fn boothby_hopf_quotient_holomorphic(n: usize) -> Result<QuotientChartData> {
    if n < 2 {
        return Err(Error::Config("need n ≥ 2".into()));
    }
    let mut lambda = vec![1.0; n];
    lambda[0] = -1.0;
    let ambient = gallery::boothby_vaisman(n)?;
    let momentum = gallery::boothby_momentum(n, &lambda)?;
    let chart = gallery::punctured_chart(n - 1);
    let section = SmoothMap::new(chart.clone(), ambient.chart.clone(), |u| {
        let k = 2f64.powf(-0.25);
        let r = u.iter().fold(Jet::zero(u[0].dim(), u[0].order()), |a, x| a + x.square()).sqrt()?;
        let a = r.sqrt()?;
        let b = a.recip()?.scale(k);
        let mut z = vec![a.scale(k), Jet::zero(u[0].dim(), u[0].order())];
        z.extend(u.iter().map(|x| x * &b));
        Ok(z)
    });
    QuotientChartData::new(format!("boothby:n={n}:L=-1,1:holomorphic"), ambient, momentum, chart, section)
}

fn hopf_section(
    chart: Arc<Chart>,
    target: Arc<Chart>,
    lambda: Vec<f64>,
    theta: Option<Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>>,
) -> SmoothMap {
    SmoothMap::new(chart, target, move |w| {
        let r = w.iter().fold(Jet::zero(w[0].dim(), w[0].order()), |a, x| a + x.square()).sqrt()?;
        let k = std::f64::consts::FRAC_1_SQRT_2;
        let mut z = vec![r.scale(k), Jet::zero(w[0].dim(), w[0].order())];
        z.extend(w.iter().map(|x| x.scale(k)));
        let Some(th) = &theta else { return Ok(z) };
        let t = th(w);
        let mut out = Vec::with_capacity(z.len());
        for (i, l) in lambda.iter().enumerate() {
            let a = t.scale(*l);
            let (c, s) = (a.cos(), a.sin());
            out.push(&z[2 * i] * &c - &z[2 * i + 1] * &s);
            out.push(&z[2 * i] * &s + &z[2 * i + 1] * &c);
        }
        Ok(out)
    })
}

/// Kähler cone over `(S⁵, η_A)` with `Λ = (−1, 1, 1)`; the section is
/// `(v, t) ↦ ((1/√2, 0, w(v)/√2), t)` with `w(v)` on a graph chart of `S³`.
pub fn cone_hopf_quotient(a: &[f64]) -> Result<(QuotientChartData, SasakiStructure)> {
    let w = gallery::sasaki_sphere(3, a)?;
    let cone = gallery::kahler_cone(&w);
    let lambda = [-1.0, 1.0, 1.0];
    let momentum = gallery::cone_momentum(&w, &lambda)?;
    let chart = quotient_cone_chart();
    let section = SmoothMap::new(chart.clone(), cone.chart.clone(), |x| {
        let u = sphere3_section(&x[..3])?;
        let mut out = u[..5].to_vec();
        out.push(x[3].clone());
        Ok(out)
    });
    let q = QuotientChartData::new(format!("cone:n=3:A={}", join(a)), cone, momentum, chart, section)?;
    Ok((q, w))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

/// `(v, t)` with `v` on the graph chart of `S³`, `|v|² < 0.55`.
pub fn quotient_cone_chart() -> Arc<Chart> {
    Arc::new(Chart::new(
        "cone(S^3+)",
        4,
        Sampler::Box { lo: vec![-0.6, -0.6, -0.6, -1.0], hi: vec![0.6, 0.6, 0.6, 1.0] },
        |p| p[..3].iter().map(|x| x * x).sum::<f64>() < 0.55,
    ))
}

/// `(1/√2, 0, w(v)/√2) ∈ S⁵` in ambient coordinates.
fn sphere3_section(v: &[Jet]) -> Result<Vec<Jet>> {
    let k = std::f64::consts::FRAC_1_SQRT_2;
    let w = gallery::sphere_embed(v, 1.0)?;
    let (d, o) = (v[0].dim(), v[0].order());
    let mut z = vec![Jet::constant(d, o, k), Jet::zero(d, o)];
    z.extend(w.iter().map(|c| c.scale(k)));
    Ok(z)
}

/// Cover report for the Hopf manifold `ℂⁿ \ 0 / ⟨γ⟩`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoverReport {
    /// `|e^τ μ_K − μ_B|`, `τ = −log|z|²`.
    pub gauge_relation: f64,
    /// `|γ*μ_K − ρ μ_K|`.
    pub deck_scaling: f64,
    /// `|γ*(e^τ μ_K) − e^τ μ_K|`.
    pub invariance: f64,
    /// `|e^{γ*τ} ρ − e^τ|`.
    pub tau_shift: f64,
    pub momentum_kahler: f64,
    pub momentum_boothby: f64,
}

impl CoverReport {
    pub fn max(&self) -> f64 {
        [self.gauge_relation, self.deck_scaling, self.invariance, self.tau_shift, self.momentum_kahler, self.momentum_boothby]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn kahler_cover_crosscheck(n: usize, lambda: &[f64], alpha: (f64, f64), points: &[Point]) -> Result<CoverReport> {
    let kahler = gallery::standard_kahler_on(n, gallery::punctured_chart(n))?;
    let boothby = gallery::boothby_vaisman(n)?;
    let mk = gallery::kahler_momentum(n, lambda, kahler.chart.clone())?;
    let mb = gallery::boothby_momentum(n, lambda)?;
    let deck = gallery::hopf_deck(n, alpha)?;
    let tau = |z: &[f64]| -z.iter().map(|x| x * x).sum::<f64>().ln();
    let mut rep = CoverReport {
        gauge_relation: 0.0,
        deck_scaling: 0.0,
        invariance: 0.0,
        tau_shift: 0.0,
        momentum_kahler: crate::moment::verify_momentum(&kahler, &mk, points, f64::INFINITY)?.residual,
        momentum_boothby: crate::moment::verify_momentum(&boothby, &mb, points, f64::INFINITY)?.residual,
    };
    for p in points {
        let gp = deck.map.apply_point(p)?;
        let (k_here, k_there) = (mk.values(p)?[0], mk.values(&gp)?[0]);
        let b_here = mb.values(p)?[0];
        rep.gauge_relation = rep.gauge_relation.max((tau(p).exp() * k_here - b_here).abs());
        rep.deck_scaling = rep.deck_scaling.max((k_there - deck.rho * k_here).abs());
        rep.invariance = rep.invariance.max((tau(&gp).exp() * k_there - tau(p).exp() * k_here).abs());
        rep.tau_shift = rep.tau_shift.max((tau(&gp).exp() * deck.rho - tau(p).exp()).abs());
    }
    Ok(rep)
}

/// Sasaki-side checks for the cone reduction with `Λ = (−1, 1, 1)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SasakiCrossReport {
    /// `|μ_cone − μ_K ∘ Ψ_A|` with `Ψ_A(u, t) = e^{t/2} (Σa|z|²)^{−1/2} z(u)`.
    pub cone_vs_kahler: f64,
    /// `|Ψ_A*Ω₀ − Ω_cone|`.
    pub symplectic_identification: f64,
    /// `|∇ω̄|` for the reduced Vaisman gauge `2e^{−t} ḡ`.
    pub reduced_parallel: f64,
    /// `|ω̄ + dt|` for the same gauge.
    pub reduced_lee: f64,
    /// `|ℒ_X i*η|` on the zero set.
    pub eta_invariant: f64,
    /// `|i*η(X)|` on the zero set.
    pub eta_horizontal: f64,
    /// Largest LCK residual of the reduced Vaisman gauge.
    pub reduced_lck: f64,
}

impl SasakiCrossReport {
    pub fn max(&self) -> f64 {
        [
            self.cone_vs_kahler,
            self.symplectic_identification,
            self.reduced_parallel,
            self.reduced_lee,
            self.eta_invariant,
            self.eta_horizontal,
            self.reduced_lck,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// `2e^{−t} g` for a structure whose last coordinate is `t`.
pub fn vaisman_rescale(h: &HermitianStructure) -> HermitianStructure {
    let m = h.dim() - 1;
    let alpha = FieldExpr::scalar(h.chart.clone(), move |x| Ok(-&x[m] + std::f64::consts::LN_2));
    conformal_rescale(h, &alpha).with_label(format!("{}:2e^-t", h.label))
}

/// `max |∇ ω|` for the Levi-Civita connection of `h` and its Lee form.
pub fn lee_parallelism(h: &HermitianStructure, points: &[Point]) -> Result<f64> {
    let (g, lee) = (h.metric_field(), h.lee_field());
    let per: Vec<f64> = points
        .par_iter()
        .map(|p| Ok(fields::sup_mat(&covariant_derivative_oneform(&g, &lee, p, 0)?)))
        .collect::<Result<_>>()?;
    Ok(per.into_iter().fold(0.0, f64::max))
}

pub fn sasaki_crosscheck(a: &[f64], points: &[Point]) -> Result<SasakiCrossReport> {
    let (q, w) = cone_hopf_quotient(a)?;
    let lambda = [-1.0, 1.0, 1.0];
    let n = 3;
    let m = 2 * n - 1;
    let av = a.to_vec();
    let psi = SmoothMap::new(q.ambient.chart.clone(), gallery::punctured_chart(n), move |x| {
        let z = gallery::sphere_embed(&x[..m], 1.0)?;
        let s = (x[m].scale(0.5).exp()) * gallery::weighted_norm2(&z, &av).powf(-0.5)?;
        Ok(z.iter().map(|c| c * &s).collect())
    });
    let mk = gallery::kahler_weighted_momentum(&lambda);
    let flat = gallery::standard_kahler_on(n, gallery::punctured_chart(n))?;
    let cone_points: Vec<Point> = points
        .iter()
        .map(|p| q.section.apply_point(p).map(Point))
        .collect::<Result<_>>()?;

    let mut cone_vs_kahler = 0.0f64;
    let mut symplectic = 0.0f64;
    for p in &cone_points {
        let z = psi.apply_point(p)?;
        let k = mk(&jets::seed(&z, 0))?.value();
        let c = q.momentum.values(p)?[0];
        cone_vs_kahler = cone_vs_kahler.max((k - c).abs());
        let (zj, jac) = psi.jet_and_jacobian(p, 0)?;
        let (g0, j0) = flat.eval(&zj)?;
        let pulled = fundamental_from(&g0, &j0).pullback(&jac);
        let (gc, jc) = q.ambient.at(p, 0)?;
        symplectic = symplectic.max(pulled.sub(&fundamental_from(&gc, &jc)).sup());
    }

    let reduced = reduced_structure(&q)?;
    let vaisman = vaisman_rescale(&reduced);
    let reduced_parallel = lee_parallelism(&vaisman, points)?;
    let mut reduced_lee = 0.0f64;
    let mut reduced_lck = 0.0f64;
    for p in points {
        let lee = crate::lck::lee_form(&vaisman, p, 0)?.omega.values();
        for (i, v) in lee.iter().enumerate() {
            let want = if i == 3 { -1.0 } else { 0.0 };
            reduced_lee = reduced_lee.max((v - want).abs());
        }
        let r = lck_residuals_at(&vaisman, p)?;
        reduced_lck = reduced_lck
            .max(r.d_omega_minus_omega_wedge)
            .max(r.d_omega)
            .max(r.nijenhuis)
            .max(r.fundamental_compat);
    }

    // zero-set chart (v, θ) ↦ h_{Λ,θ}(σ(v)) inside the sphere chart
    let sphere_points: Vec<Point> = points.iter().map(|p| Point(vec![p[0], p[1], p[2], 0.3 * p[3]])).collect();
    let zero_chart = Arc::new(Chart::euclidean(4));
    let embed = SmoothMap::new(zero_chart, w.chart.clone(), move |x| {
        let z = sphere3_section(&x[..3])?;
        let th: Vec<f64> = lambda.to_vec();
        let mut out = Vec::with_capacity(6);
        for (i, l) in th.iter().enumerate() {
            let ang = x[3].scale(*l);
            let (c, s) = (ang.cos(), ang.sin());
            out.push(&z[2 * i] * &c - &z[2 * i + 1] * &s);
            out.push(&z[2 * i] * &s + &z[2 * i + 1] * &c);
        }
        Ok(out[..m].to_vec())
    });
    let i_eta = fields::pullback_field(&embed, &w.eta)?;
    let mut eta_invariant = 0.0f64;
    let mut eta_horizontal = 0.0f64;
    for p in &sphere_points {
        let form = i_eta.eval_form(&jets::seed(p, 1))?;
        let d = form.jet_dim();
        let mut x = vec![Jet::zero(d, 1); 4];
        x[3] = Jet::constant(d, 1, 1.0);
        eta_invariant = eta_invariant.max(fields::lie_derivative_form(&x, &form)?.sup());
        eta_horizontal = eta_horizontal.max(form.coeffs[3].value().abs());
    }
    Ok(SasakiCrossReport {
        cone_vs_kahler,
        symplectic_identification: symplectic,
        reduced_parallel,
        reduced_lee,
        eta_invariant,
        eta_horizontal,
        reduced_lck,
    })
}

/// Witness `× ℂ²` with the circle `Λ = (0, 0, −1, 1)` acting on the flat factor.
pub fn witness_quotient() -> Result<QuotientChartData> {
    let witness = gallery::non_lck_witness();
    let chart = Arc::new(Chart::new(
        "witness x C^2",
        8,
        Sampler::Box { lo: vec![-1.0; 8], hi: vec![1.0; 8] },
        |p| p[4] * p[4] + p[5] * p[5] + p[6] * p[6] + p[7] * p[7] > 0.05,
    ));
    let wc = witness.clone();
    let ambient = HermitianStructure::new(chart.clone(), "witness-x-C2", move |x| {
        let (d, o) = (x[0].dim(), x[0].order());
        let (g4, j4) = wc.eval(&x[..4])?;
        let mut g = fields::identity(8, d, o);
        let mut j = gallery::standard_j(8, d, o);
        for i in 0..4 {
            for k in 0..4 {
                g[i][k] = g4[i][k].clone();
                j[i][k] = j4[i][k].clone();
            }
        }
        Ok((g, j))
    });
    let lambda = [0.0, 0.0, -1.0, 1.0];
    let action = gallery::weighted_action_on(chart.clone(), &lambda);
    let f = gallery::kahler_weighted_momentum(&lambda);
    let momentum = MomentumData::new(action, vec![FieldExpr::scalar(chart.clone(), f)], "witness-x-C2")?;
    let qchart = Arc::new(Chart::new(
        "witness x C*",
        6,
        Sampler::Box { lo: vec![-1.0; 6], hi: vec![1.0; 6] },
        |p| p[4] * p[4] + p[5] * p[5] > 0.05,
    ));
    let section = SmoothMap::new(qchart.clone(), chart, |x| {
        let k = std::f64::consts::FRAC_1_SQRT_2;
        let r = (x[4].square() + x[5].square()).sqrt()?;
        let d = x[0].dim();
        let mut z = x[..4].to_vec();
        z.push(r.scale(k));
        z.push(Jet::zero(d, x[0].order()));
        z.push(x[4].scale(k));
        z.push(x[5].scale(k));
        Ok(z)
    });
    QuotientChartData::new("witness:L=0,0,-1,1", ambient, momentum, qchart, section)
}

/// Smallest Vaisman residual over the gauges `e^{sτ} ḡ`, `τ = log|w|²`, `s` on a grid in `[−2, 2]`.
pub fn vaisman_search(reduced: &HermitianStructure, tau_coords: (usize, usize), points: &[Point]) -> Result<(f64, f64)> {
    let mut best = (f64::INFINITY, 0.0);
    for step in 0..=16 {
        let s = -2.0 + 0.25 * step as f64;
        let (a, b) = tau_coords;
        let alpha = FieldExpr::scalar(reduced.chart.clone(), move |x| {
            Ok((x[a].square() + x[b].square()).ln()?.scale(s))
        });
        let h = conformal_rescale(reduced, &alpha);
        let mut worst = lee_parallelism(&h, points)?;
        for p in points {
            let r = lck_residuals_at(&h, p)?;
            worst = worst.max(r.d_omega).max(r.d_omega_minus_omega_wedge);
        }
        if worst < best.0 {
            best = (worst, s);
        }
    }
    Ok(best)
}

/// Certification of a reduced structure; in real dimension 2 only `dΩ̄ ≡ 0` and `J̄` are checked.
pub fn certify_reduced(q: &QuotientChartData, points: &[Point], tol: f64) -> Result<crate::lck::LckCertificate> {
    let reduced = reduced_structure(q)?;
    certify_lck(&reduced, points, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hopf_section_lies_on_zero_set() {
        let q = boothby_hopf_quotient(3).unwrap();
        let pts = vec![Point(vec![0.3, -0.4, 0.8, 0.1]), Point(vec![-1.0, 0.2, 0.1, 0.5])];
        assert!(q.section_residual(&pts).unwrap() < 1e-15);
    }

    #[test]
    fn reduced_form_is_half_boothby() {
        let q = boothby_hopf_quotient(3).unwrap();
        let p = [0.3, -0.4, 0.8, 0.1];
        let local = reduced_local(&q, &p, 0).unwrap();
        let r2: f64 = p.iter().map(|x| x * x).sum();
        assert!((local.omega.component(&[0, 1]).value() - 0.5 / r2).abs() < 1e-14);
        // J̄² = −1 although J̄ is not the standard structure in this chart
        let j2 = fields::mat_mul(&local.j, &local.j);
        for (a, row) in j2.iter().enumerate() {
            for (b, e) in row.iter().enumerate() {
                let want = if a == b { -1.0 } else { 0.0 };
                assert!((e.value() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reduced_metric_is_berger_type() {
        // frozen: radial, Hopf and transverse directions at w = (0.7, 0, 0, 0)
        let q = boothby_hopf_quotient(3).unwrap();
        let local = reduced_local(&q, &[0.7, 0.0, 0.0, 0.0], 0).unwrap();
        let want = [2.0408163265306123, 0.5102040816326531, 1.0204081632653061, 1.0204081632653061];
        for (a, w) in want.iter().enumerate() {
            assert!((local.g[a][a].value() - w).abs() < 1e-10, "{a}: {}", local.g[a][a].value());
        }
    }

    #[test]
    fn holomorphic_chart_matches_dhomothetic_hopf() {
        let q = boothby_hopf_quotient_holomorphic(3).unwrap();
        let red = reduced_structure(&q).unwrap();
        let pts = vec![Point(vec![0.3, -0.4, 0.8, 0.1]), Point(vec![0.7, 0.0, 0.0, 0.0]), Point(vec![-0.2, 0.5, 0.1, -0.6])];
        let half = conformal_comparison(&red, &gallery::hopf_dhomothetic(2, 0.5).unwrap(), &pts).unwrap();
        assert!(half.spread < 1e-12);
        assert!((half.factor_min - 0.5).abs() < 1e-12);
        let round = conformal_comparison(&red, &gallery::boothby_vaisman(2).unwrap(), &pts).unwrap();
        assert!(round.spread > 0.1);
    }
}
