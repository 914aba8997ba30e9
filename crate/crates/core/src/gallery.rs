//! Explicit structures, actions and maps: flat and Boothby metrics, weighted
//! circle actions, Sasaki spheres with their cones, Hopf deck maps.
//!
//! Real coordinates are `(x₁, y₁, …, x_n, y_n)` with `z_k = x_k + i y_k`.
//! Sphere charts are graphs over the first `2n − 1` coordinates, with
//! `y_n = ±√(1 − |u|²)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{self, Chart, FieldExpr, Form, Mat, Point, Sampler, SmoothMap, Valence};
use crate::jets::{self, Jet};
use crate::lck::{fundamental_from, HermitianStructure};
use crate::moment::{LieAction, MomentumData};

pub fn standard_j(dim: usize, jet_dim: usize, order: usize) -> Mat {
    let mut j = vec![vec![Jet::zero(jet_dim, order); dim]; dim];
    for k in 0..dim / 2 {
        j[2 * k + 1][2 * k] = Jet::constant(jet_dim, order, 1.0);
        j[2 * k][2 * k + 1] = Jet::constant(jet_dim, order, -1.0);
    }
    j
}

fn norm2(z: &[Jet]) -> Jet {
    z.iter().fold(Jet::zero(z[0].dim(), z[0].order()), |acc, x| acc + x.square())
}

/// `Σ c_k |z_k|²`.
pub fn weighted_norm2(z: &[Jet], c: &[f64]) -> Jet {
    let mut acc = Jet::zero(z[0].dim(), z[0].order());
    for (k, ck) in c.iter().enumerate() {
        acc += (z[2 * k].square() + z[2 * k + 1].square()).scale(*ck);
    }
    acc
}

fn check_n(n: usize) -> Result<()> {
    if n < 1 || 2 * n > 8 {
        return Err(Error::Config(format!("complex dimension {n} is out of range 1..=4")));
    }
    Ok(())
}

pub fn flat_chart(n: usize) -> Arc<Chart> {
    Arc::new(Chart::euclidean(2 * n))
}

pub fn punctured_chart(n: usize) -> Arc<Chart> {
    Arc::new(Chart::punctured(2 * n))
}

pub fn kahler_label(n: usize) -> String {
    format!("kahler:n={n}")
}

pub fn boothby_label(n: usize) -> String {
    format!("boothby:n={n}")
}

/// Euclidean metric with the standard `J` on `ℂⁿ`.
pub fn standard_kahler(n: usize) -> Result<HermitianStructure> {
    standard_kahler_on(n, flat_chart(n))
}

pub fn standard_kahler_on(n: usize, chart: Arc<Chart>) -> Result<HermitianStructure> {
    check_n(n)?;
    Ok(HermitianStructure::new(chart, kahler_label(n), move |x| {
        let (d, o) = (x[0].dim(), x[0].order());
        Ok((fields::identity(2 * n, d, o), standard_j(2 * n, d, o)))
    }))
}

/// `|z|⁻²·Euclidean` on `ℂⁿ \ 0`.
pub fn boothby_vaisman(n: usize) -> Result<HermitianStructure> {
    check_n(n)?;
    if n < 2 {
        return Err(Error::Config("the Boothby structure needs n ≥ 2".into()));
    }
    Ok(HermitianStructure::new(punctured_chart(n), boothby_label(n), move |x| {
        let (d, o) = (x[0].dim(), x[0].order());
        let s = norm2(x).recip()?;
        let mut g = vec![vec![Jet::zero(d, o); 2 * n]; 2 * n];
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = s.clone();
        }
        Ok((g, standard_j(2 * n, d, o)))
    }))
}

/// `|z|⁻² (|dz|² + (c − 1)|z̄·dz|²/|z|²)`: the Boothby metric with the radial
/// and Hopf directions scaled by `c`; `c = 1` is [`boothby_vaisman`].
pub fn hopf_dhomothetic(n: usize, c: f64) -> Result<HermitianStructure> {
    check_n(n)?;
    Ok(HermitianStructure::new(punctured_chart(n), format!("hopf-dhomothetic:n={n}:c={c}"), move |x| {
        let (d, o) = (x[0].dim(), x[0].order());
        let r2 = norm2(x);
        let inv = r2.recip()?;
        let inv2 = inv.square();
        let (xs, ys): (Vec<&Jet>, Vec<&Jet>) = ((0..n).map(|k| &x[2 * k]).collect(), (0..n).map(|k| &x[2 * k + 1]).collect());
        // z̄·dz = Σ (x dx + y dy) + i Σ (x dy − y dx)
        let mut re = vec![Jet::zero(d, o); 2 * n];
        let mut im = vec![Jet::zero(d, o); 2 * n];
        for k in 0..n {
            re[2 * k] = xs[k].clone();
            re[2 * k + 1] = ys[k].clone();
            im[2 * k] = -ys[k];
            im[2 * k + 1] = xs[k].clone();
        }
        let mut g = vec![vec![Jet::zero(d, o); 2 * n]; 2 * n];
        for a in 0..2 * n {
            for b in 0..2 * n {
                let extra = (&re[a] * &re[b] + &im[a] * &im[b]) * &inv2;
                g[a][b] = extra.scale(c - 1.0);
                if a == b {
                    g[a][b] += &inv;
                }
            }
        }
        Ok((g, standard_j(2 * n, d, o)))
    }))
}

/// The dimension-4 witness `g = dx₁² + dy₁² + e^{2x₁x₂}(dx₂² + dy₂²)`: `(dΩ)₀ = 0`, `dω ≠ 0`.
pub fn non_lck_witness() -> HermitianStructure {
    HermitianStructure::new(flat_chart(2), "witness", |x| {
        let (d, o) = (x[0].dim(), x[0].order());
        let e = (&x[0] * &x[2]).scale(2.0).exp();
        let mut g = fields::identity(4, d, o);
        g[2][2] = e.clone();
        g[3][3] = e;
        Ok((g, standard_j(4, d, o)))
    })
}

/// A non-integrable almost-Hermitian structure: the flat metric with
/// `J` rotated in the `(x₁, x₂)` plane by an angle depending on `y₁`.
pub fn twisted_almost_complex() -> HermitianStructure {
    HermitianStructure::new(flat_chart(2), "almost-complex", |x| {
        let (d, o) = (x[0].dim(), x[0].order());
        let th = x[1].scale(0.7) + &x[3] * &x[0];
        let (c, s) = (th.cos(), th.sin());
        // R = rotation of the (x₁, x₂) plane, J = R J₀ Rᵀ is orthogonal and squares to −1
        let mut r = fields::identity(4, d, o);
        r[0][0] = c.clone();
        r[0][2] = -&s;
        r[2][0] = s;
        r[2][2] = c;
        let j = fields::mat_mul(&fields::mat_mul(&r, &standard_j(4, d, o)), &fields::transpose(&r));
        Ok((fields::identity(4, d, o), j))
    })
}

/// Weights and Sasaki parameters of a weighted action on `S^{2n−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAction {
    pub lambda: Vec<f64>,
    pub a: Vec<f64>,
}

impl WeightedAction {
    pub fn new(lambda: Vec<f64>, a: Vec<f64>) -> Result<WeightedAction> {
        if lambda.len() != a.len() {
            return Err(Error::Config("Λ and A must have the same length".into()));
        }
        if a.iter().any(|&x| !(x > 0.0)) || a.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("A must satisfy 0 < a₁ ≤ … ≤ a_n".into()));
        }
        Ok(WeightedAction { lambda, a })
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// Number of negative weights.
    pub fn k(&self) -> usize {
        self.lambda.iter().filter(|l| **l < 0.0).count()
    }
}

/// `X_Λ = Σ λ_k (x_k ∂y_k − y_k ∂x_k)` on real coordinates.
pub fn weighted_generator(z: &[Jet], lambda: &[f64]) -> Vec<Jet> {
    let mut v = Vec::with_capacity(z.len());
    for (k, l) in lambda.iter().enumerate() {
        v.push(z[2 * k + 1].scale(-l));
        v.push(z[2 * k].scale(*l));
    }
    v
}

/// Rotation `z_k ↦ e^{iθ_k} z_k` of real coordinates.
pub fn rotate(z: &[Jet], theta: &[f64]) -> Vec<Jet> {
    let mut out = Vec::with_capacity(z.len());
    for (k, t) in theta.iter().enumerate() {
        let (c, s) = (t.cos(), t.sin());
        out.push(z[2 * k].scale(c) - z[2 * k + 1].scale(s));
        out.push(z[2 * k].scale(s) + z[2 * k + 1].scale(c));
    }
    out
}

fn rotation_map(chart: Arc<Chart>, theta: Vec<f64>) -> SmoothMap {
    SmoothMap::new(chart.clone(), chart, move |x| Ok(rotate(x, &theta)))
}

/// `h_{Λ,t}` as a circle action on the given chart of `ℂⁿ`.
pub fn weighted_action_on(chart: Arc<Chart>, lambda: &[f64]) -> LieAction {
    let l = lambda.to_vec();
    let label = format!("action:weighted:{}", join(lambda));
    let gen = FieldExpr::vector(chart.clone(), {
        let l = l.clone();
        move |x| Ok(weighted_generator(x, &l))
    });
    let c2 = chart.clone();
    LieAction::new(label, chart, vec![gen]).with_flow(0, move |t| {
        rotation_map(c2.clone(), l.iter().map(|x| x * t).collect())
    })
}

pub fn weighted_action(n: usize, lambda: &[f64]) -> Result<LieAction> {
    check_n(n)?;
    if lambda.len() != n {
        return Err(Error::Config(format!("{} weights given for n = {n}", lambda.len())));
    }
    Ok(weighted_action_on(punctured_chart(n), lambda))
}

/// Several commuting weighted circle actions as one torus action.
pub fn torus_action_on(chart: Arc<Chart>, weights: &[Vec<f64>]) -> LieAction {
    let gens = weights
        .iter()
        .map(|l| {
            let l = l.clone();
            FieldExpr::vector(chart.clone(), move |x| Ok(weighted_generator(x, &l)))
        })
        .collect();
    let label = weights.iter().map(|w| join(w)).collect::<Vec<_>>().join(";");
    LieAction::new(format!("action:torus:{label}"), chart, gens)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

/// `μ_K = −½ Σ λ_k |z_k|²`, the momentum of `X_Λ` for `Ω₀` under our sign convention.
pub fn kahler_weighted_momentum(lambda: &[f64]) -> impl Fn(&[Jet]) -> Result<Jet> + Send + Sync + Clone + 'static {
    let l = lambda.to_vec();
    move |x: &[Jet]| Ok(weighted_norm2(x, &l).scale(-0.5))
}

pub fn kahler_momentum(n: usize, lambda: &[f64], chart: Arc<Chart>) -> Result<MomentumData> {
    let action = weighted_action_on(chart.clone(), lambda);
    let f = kahler_weighted_momentum(lambda);
    MomentumData::new(action, vec![FieldExpr::scalar(chart, f)], kahler_label(n))
}

/// `μ_B = |z|⁻² μ_K` in the Boothby gauge.
pub fn boothby_momentum(n: usize, lambda: &[f64]) -> Result<MomentumData> {
    let chart = punctured_chart(n);
    let action = weighted_action_on(chart.clone(), lambda);
    let f = kahler_weighted_momentum(lambda);
    let mu = FieldExpr::scalar(chart, move |x| f(x)?.try_div(&norm2(x)));
    MomentumData::new(action, vec![mu], boothby_label(n))
}

/// `H_Λ(z) = Σ λ_k |z_k|² / (2 Σ a_k |z_k|²)` on `ℂⁿ \ 0`.
pub fn weighted_h(lambda: &[f64], a: &[f64]) -> FieldExpr {
    let n = lambda.len();
    let (l, a) = (lambda.to_vec(), a.to_vec());
    FieldExpr::scalar(punctured_chart(n), move |x| {
        weighted_norm2(x, &l).try_div(&weighted_norm2(x, &a).scale(2.0))
    })
}

/// Graph chart of `S^{2n−1}` over the first `2n − 1` coordinates.
pub fn sphere_chart(n: usize, sign: f64) -> Arc<Chart> {
    let m = 2 * n - 1;
    let name = format!("S^{}{}", m, if sign > 0.0 { "+" } else { "-" });
    Arc::new(
        Chart::new(name, m, Sampler::Box { lo: vec![-0.75; m], hi: vec![0.75; m] }, |u| {
            u.iter().map(|x| x * x).sum::<f64>() < 0.8
        }),
    )
}

/// Ambient point of the sphere for chart jets `u`.
pub fn sphere_embed(u: &[Jet], sign: f64) -> Result<Vec<Jet>> {
    let r = (norm2(u).scale(-1.0) + 1.0).sqrt()?;
    let mut z = u.to_vec();
    z.push(r.scale(sign));
    Ok(z)
}

/// `∂z/∂u_a` as ambient vectors, exact in the jets of `u`.
fn sphere_tangents(u: &[Jet], z: &[Jet]) -> Result<Vec<Vec<Jet>>> {
    let m = u.len();
    let last = z[m].recip()?;
    Ok((0..m)
        .map(|a| {
            let mut v: Vec<Jet> = vec![Jet::zero(u[0].dim(), u[0].order()); m + 1];
            v[a] = Jet::constant(u[0].dim(), u[0].order(), 1.0);
            v[m] = -(&u[a] * &last);
            v
        })
        .collect())
}

/// `½ Σ (x dy − y dx) / Σ a|z|²` evaluated on an ambient vector.
fn eta_ambient(z: &[Jet], a: &[f64], v: &[Jet]) -> Result<Jet> {
    let mut acc = Jet::zero(z[0].dim(), z[0].order());
    for k in 0..a.len() {
        acc += &z[2 * k] * &v[2 * k + 1] - &z[2 * k + 1] * &v[2 * k];
    }
    acc.scale(0.5).try_div(&weighted_norm2(z, a))
}

/// `d(½α/f)(v, w)` with `α = Σ(x dy − y dx)`, `f = Σ a|z|²`.
fn d_eta_ambient(z: &[Jet], a: &[f64], v: &[Jet], w: &[Jet]) -> Result<Jet> {
    let n = a.len();
    let f = weighted_norm2(z, a);
    let mut d_alpha = Jet::zero(z[0].dim(), z[0].order());
    let (mut df_v, mut df_w) = (d_alpha.clone(), d_alpha.clone());
    let (mut al_v, mut al_w) = (d_alpha.clone(), d_alpha.clone());
    for k in 0..n {
        let (x, y) = (&z[2 * k], &z[2 * k + 1]);
        d_alpha += &v[2 * k] * &w[2 * k + 1] - &v[2 * k + 1] * &w[2 * k];
        df_v += (x * &v[2 * k] + y * &v[2 * k + 1]).scale(2.0 * a[k]);
        df_w += (x * &w[2 * k] + y * &w[2 * k + 1]).scale(2.0 * a[k]);
        al_v += x * &v[2 * k + 1] - y * &v[2 * k];
        al_w += x * &w[2 * k + 1] - y * &w[2 * k];
    }
    // ½dα(v,w) = Σ(v_x w_y − v_y w_x)
    let wedge = (df_v * al_w - df_w * al_v).scale(0.5);
    Ok(d_alpha.try_div(&f)? - wedge.try_div(&f.square())?)
}

fn reeb_ambient(z: &[Jet], a: &[f64]) -> Vec<Jet> {
    let two_a: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
    weighted_generator(z, &two_a)
}

fn j0(v: &[Jet]) -> Vec<Jet> {
    let mut out = Vec::with_capacity(v.len());
    for k in 0..v.len() / 2 {
        out.push(-&v[2 * k + 1]);
        out.push(v[2 * k].clone());
    }
    out
}

/// Contact form, transverse metric and Reeb field of `(S^{2n−1}, η_A)` on a graph chart.
#[derive(Debug, Clone)]
pub struct SasakiStructure {
    pub chart: Arc<Chart>,
    pub a: Vec<f64>,
    pub sign: f64,
    pub eta: FieldExpr,
    pub g_w: FieldExpr,
    pub reeb: FieldExpr,
    pub embedding: SmoothMap,
}

/// Pointwise data shared by the Sasaki metric and its cone.
struct SasakiFrame {
    /// `η(∂_a)`.
    eta: Vec<Jet>,
    /// Horizontal parts of `∂z/∂u_a`, ambient.
    horizontal: Vec<Vec<Jet>>,
    reeb_chart: Vec<Jet>,
    z: Vec<Jet>,
}

fn sasaki_frame(u: &[Jet], a: &[f64], sign: f64) -> Result<SasakiFrame> {
    let z = sphere_embed(u, sign)?;
    let tangents = sphere_tangents(u, &z)?;
    let reeb = reeb_ambient(&z, a);
    let eta: Vec<Jet> = tangents.iter().map(|t| eta_ambient(&z, a, t)).collect::<Result<_>>()?;
    let horizontal = tangents
        .iter()
        .zip(&eta)
        .map(|(t, e)| t.iter().zip(&reeb).map(|(ti, ri)| ti - &(ri * e)).collect())
        .collect();
    let reeb_chart = reeb[..u.len()].to_vec();
    Ok(SasakiFrame { eta, horizontal, reeb_chart, z })
}

fn sasaki_metric(frame: &SasakiFrame, a: &[f64]) -> Result<Mat> {
    let m = frame.eta.len();
    let mut g = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(m);
        for j in 0..m {
            let jh = j0(&frame.horizontal[j]);
            row.push(&frame.eta[i] * &frame.eta[j] + d_eta_ambient(&frame.z, a, &frame.horizontal[i], &jh)?);
        }
        g.push(row);
    }
    Ok(g)
}

pub fn sasaki_sphere(n: usize, a: &[f64]) -> Result<SasakiStructure> {
    sasaki_sphere_chart(n, a, 1.0)
}

pub fn sasaki_sphere_chart(n: usize, a: &[f64], sign: f64) -> Result<SasakiStructure> {
    check_n(n)?;
    WeightedAction::new(vec![0.0; n], a.to_vec())?;
    let chart = sphere_chart(n, sign);
    let m = 2 * n - 1;
    let av = a.to_vec();
    let eta = {
        let a = av.clone();
        FieldExpr::form(chart.clone(), 1, move |u| Ok(Form::one_form(sasaki_frame(u, &a, sign)?.eta)))
    };
    let g_w = {
        let a = av.clone();
        FieldExpr::matrix(chart.clone(), Valence::Tensor(0, 2), move |u| sasaki_metric(&sasaki_frame(u, &a, sign)?, &a))
    };
    let reeb = {
        let a = av.clone();
        FieldExpr::vector(chart.clone(), move |u| {
            let z = sphere_embed(u, sign)?;
            Ok(reeb_ambient(&z, &a)[..m].to_vec())
        })
    };
    let embedding = SmoothMap::new(chart.clone(), punctured_chart(n), move |u| sphere_embed(u, sign));
    Ok(SasakiStructure { chart, a: av, sign, eta, g_w, reeb, embedding })
}

/// Residuals of `η(ζ) = 1`, `ι_ζ dη = 0` and the smallest `|dη|` eigenvalue on `ker η`.
#[derive(Debug, Clone, Copy)]
pub struct SasakiReport {
    pub reeb_normalization: f64,
    pub reeb_in_kernel: f64,
    pub min_transverse: f64,
}

impl SasakiStructure {
    pub fn n(&self) -> usize {
        self.chart.dim.div_ceil(2)
    }

    pub fn check(&self, points: &[Point]) -> Result<SasakiReport> {
        let mut rep = SasakiReport { reeb_normalization: 0.0, reeb_in_kernel: 0.0, min_transverse: f64::INFINITY };
        let m = self.chart.dim;
        for p in points {
            let s = jets::seed(p, 1);
            let eta = self.eta.eval_form(&s)?;
            let zeta = fields::truncate_vec(&self.reeb.eval(&s)?, 0);
            let de = eta.d()?;
            rep.reeb_normalization = rep.reeb_normalization.max((eta.truncate(0).eval_on(&[&zeta]).value() - 1.0).abs());
            rep.reeb_in_kernel = rep.reeb_in_kernel.max(de.interior(&zeta).sup());
            // dη restricted to ker η: basis ∂_a − η(∂_a) ζ
            let e0: Vec<f64> = eta.values();
            let zv: Vec<f64> = zeta.iter().map(Jet::value).collect();
            let basis: Vec<Vec<Jet>> = (0..m)
                .map(|a| fields::constant_vector(&(0..m).map(|b| f64::from(a == b) - e0[a] * zv[b]).collect::<Vec<_>>(), m, 0))
                .collect();
            let mat = nalgebra::DMatrix::from_fn(m, m, |i, j| de.eval_on(&[&basis[i], &basis[j]]).value());
            let sv = mat.svd(false, false).singular_values;
            let mut sorted: Vec<f64> = sv.iter().cloned().collect();
            sorted.sort_by(f64::total_cmp);
            // the basis spans ker η (rank m − 1), so skip the one zero direction
            rep.min_transverse = rep.min_transverse.min(sorted[1]);
        }
        Ok(rep)
    }
}

/// Chart `(u, t)` of `W × ℝ`.
pub fn cone_chart(n: usize, sign: f64) -> Arc<Chart> {
    let m = 2 * n - 1;
    let mut lo = vec![-0.75; m];
    let mut hi = vec![0.75; m];
    lo.push(-1.0);
    hi.push(1.0);
    let name = format!("cone(S^{}{})", m, if sign > 0.0 { "+" } else { "-" });
    Arc::new(Chart::new(name, m + 1, Sampler::Box { lo, hi }, move |p| {
        p[..m].iter().map(|x| x * x).sum::<f64>() < 0.8
    }))
}

pub fn cone_label(n: usize, a: &[f64]) -> String {
    format!("cone:sphere:n={n}:A={}", join(a))
}

pub fn vaisman_label(n: usize, a: &[f64]) -> String {
    format!("vaisman:sphere:n={n}:A={}", join(a))
}

/// `g = e^t dt² + e^t π*g_W`, with `J∂_t = ζ`, `Jζ = −∂_t` and the CR structure on `ker η`.
pub fn kahler_cone(w: &SasakiStructure) -> HermitianStructure {
    let (a, sign) = (w.a.clone(), w.sign);
    let n = w.n();
    let chart = cone_chart(n, sign);
    let m = 2 * n - 1;
    HermitianStructure::new(chart, cone_label(n, &w.a), move |x| {
        let (u, t) = (&x[..m], &x[m]);
        let (d, o) = (t.dim(), t.order());
        let frame = sasaki_frame(u, &a, sign)?;
        let gw = sasaki_metric(&frame, &a)?;
        let et = t.exp();
        let mut g = vec![vec![Jet::zero(d, o); m + 1]; m + 1];
        for i in 0..m {
            for j in 0..m {
                g[i][j] = &gw[i][j] * &et;
            }
        }
        g[m][m] = et;
        let mut jm = vec![vec![Jet::zero(d, o); m + 1]; m + 1];
        for b in 0..m {
            let jh = j0(&frame.horizontal[b]);
            for (i, row) in jm.iter_mut().enumerate().take(m) {
                row[b] = jh[i].clone();
            }
            jm[m][b] = -&frame.eta[b];
        }
        for (i, row) in jm.iter_mut().enumerate().take(m) {
            row[m] = frame.reeb_chart[i].clone();
        }
        Ok((g, jm))
    })
}

/// `g̃ = 2e^{−t} g` on a cone built by [`kahler_cone`].
pub fn vaisman_gauge(cone: &HermitianStructure) -> Result<HermitianStructure> {
    let Some(rest) = cone.label.strip_prefix("cone:") else {
        return Err(Error::Config(format!("{} is not a cone structure", cone.label)));
    };
    let base = cone.clone();
    let m = cone.dim() - 1;
    Ok(HermitianStructure::new(cone.chart.clone(), format!("vaisman:{rest}"), move |x| {
        let (g, j) = base.eval(x)?;
        let f = x[m].scale(-1.0).exp().scale(2.0);
        Ok((g.iter().map(|r| r.iter().map(|c| c * &f).collect()).collect(), j))
    }))
}

/// `d(e^t π*η)` on the cone chart, computed from `η` rather than from `g` and `J`.
pub fn cone_symplectic_form(w: &SasakiStructure) -> FieldExpr {
    let n = w.n();
    let m = 2 * n - 1;
    let eta = w.eta.clone();
    FieldExpr::new(
        cone_chart(n, w.sign),
        Valence::Form(2),
        fields::seeded_only(move |x| {
            let et = x[m].exp();
            let mut coeffs = eta.eval(&x[..m])?;
            for c in coeffs.iter_mut() {
                *c = &*c * &et;
            }
            coeffs.push(Jet::zero(x[0].dim(), x[0].order()));
            Ok(Form::one_form(coeffs).d()?.coeffs)
        }),
    )
}

/// The map `(u, t) ↦ e^{t/2} z(u)` into `ℂⁿ \ 0`.
pub fn cone_identification(w: &SasakiStructure, exponent: f64) -> SmoothMap {
    let n = w.n();
    let m = 2 * n - 1;
    let sign = w.sign;
    SmoothMap::new(cone_chart(n, sign), punctured_chart(n), move |x| {
        let s = x[m].scale(exponent).exp();
        Ok(sphere_embed(&x[..m], sign)?.iter().map(|c| c * &s).collect())
    })
}

/// The circle action `h_{Λ,t}` transported to the sphere chart.
pub fn sphere_action(w: &SasakiStructure, lambda: &[f64]) -> LieAction {
    let (l, sign) = (lambda.to_vec(), w.sign);
    let m = w.chart.dim;
    let gen = FieldExpr::vector(w.chart.clone(), move |u| {
        let z = sphere_embed(u, sign)?;
        Ok(weighted_generator(&z, &l)[..m].to_vec())
    });
    LieAction::new(format!("action:weighted:{}", join(lambda)), w.chart.clone(), vec![gen])
}

/// The same action on the cone chart, trivial in `t`.
pub fn cone_action(w: &SasakiStructure, lambda: &[f64]) -> LieAction {
    let (l, sign) = (lambda.to_vec(), w.sign);
    let m = w.chart.dim;
    let chart = cone_chart(w.n(), sign);
    let gen = FieldExpr::vector(chart.clone(), move |x| {
        let z = sphere_embed(&x[..m], sign)?;
        let mut v = weighted_generator(&z, &l)[..m].to_vec();
        v.push(Jet::zero(x[0].dim(), x[0].order()));
        Ok(v)
    });
    LieAction::new(format!("action:weighted:{}", join(lambda)), chart, vec![gen])
}

/// `μ^X = ι_X η_A` on the sphere chart; equals `H_Λ` there.
pub fn sasaki_momentum(w: &SasakiStructure, lambda: &[f64]) -> Result<MomentumData> {
    let action = sphere_action(w, lambda);
    let (gen, eta) = (action.generators[0].clone(), w.eta.clone());
    let mu = FieldExpr::scalar(w.chart.clone(), move |u| {
        let x = gen.eval(u)?;
        Ok(eta.eval_form(u)?.eval_on(&[&x]))
    });
    MomentumData::new(action, vec![mu], format!("sasaki:sphere:n={}:A={}", w.n(), join(&w.a)))
}

/// `μ = −e^t π*ι_X η`, the momentum on the cone for `ι_X Ω = dμ`.
pub fn cone_momentum(w: &SasakiStructure, lambda: &[f64]) -> Result<MomentumData> {
    let action = cone_action(w, lambda);
    let m = w.chart.dim;
    let sm = sasaki_momentum(w, lambda)?.components.remove(0);
    let mu = FieldExpr::scalar(action.chart.clone(), move |x| {
        Ok(-(sm.eval_scalar(&x[..m])? * x[m].exp()))
    });
    MomentumData::new(action, vec![mu], cone_label(w.n(), &w.a))
}

/// The cone momentum in the Vaisman gauge: `2e^{−t}` times [`cone_momentum`].
pub fn vaisman_momentum(w: &SasakiStructure, lambda: &[f64]) -> Result<MomentumData> {
    let cm = cone_momentum(w, lambda)?;
    let m = w.chart.dim;
    let c = cm.components[0].clone();
    let mu = FieldExpr::scalar(cm.action.chart.clone(), move |x| {
        Ok(c.eval_scalar(x)? * x[m].scale(-1.0).exp().scale(2.0))
    });
    MomentumData::new(cm.action, vec![mu], vaisman_label(w.n(), &w.a))
}

/// A homothety of a Kähler gauge with its dilation `γ*Ω = ρ Ω`.
#[derive(Debug, Clone)]
pub struct DeckMap {
    pub label: String,
    pub map: SmoothMap,
    pub rho: f64,
}

/// `z ↦ αz` on `ℂⁿ \ 0`, `ρ = |α|²` for the flat gauge.
pub fn hopf_deck(n: usize, alpha: (f64, f64)) -> Result<DeckMap> {
    check_n(n)?;
    let (re, im) = alpha;
    let chart = punctured_chart(n);
    let map = SmoothMap::new(chart.clone(), chart, move |x| {
        let mut out = Vec::with_capacity(x.len());
        for k in 0..x.len() / 2 {
            out.push(x[2 * k].scale(re) - x[2 * k + 1].scale(im));
            out.push(x[2 * k].scale(im) + x[2 * k + 1].scale(re));
        }
        Ok(out)
    });
    Ok(DeckMap { label: format!("hopf:{re},{im}"), map, rho: re * re + im * im })
}

/// Generator of `Γ_{c,A}` on the cone chart over `(S^{2n−1}, η_A)`.
///
/// `z_k ↦ e^{a_k} c_k z_k` is the rotation by `c` followed by the time-½
/// flow of `∂_t = 2Σ a_k (x_k∂x_k + y_k∂y_k)`, hence `t ↦ t + ½` and `ρ = e^{1/2}`.
pub fn hopf_deck_nonstandard(w: &SasakiStructure, c_angles: &[f64]) -> Result<DeckMap> {
    let n = w.n();
    if c_angles.len() != n {
        return Err(Error::Config("one phase per coordinate".into()));
    }
    let m = 2 * n - 1;
    let (theta, sign) = (c_angles.to_vec(), w.sign);
    let chart = cone_chart(n, sign);
    let dom = chart.clone();
    let map = SmoothMap::new(chart.clone(), chart, move |x| {
        let z = rotate(&sphere_embed(&x[..m], sign)?, &theta);
        if z[m].value() * sign <= 0.0 || !dom.contains(&z[..m].iter().map(Jet::value).chain([0.0]).collect::<Vec<_>>()) {
            return Err(Error::OutsideDomain(dom.name.clone()));
        }
        let mut out = z[..m].to_vec();
        out.push(&x[m] + 0.5);
        Ok(out)
    });
    Ok(DeckMap { label: format!("hopf:A={}", join(&w.a)), map, rho: 0.5f64.exp() })
}

/// `φ_s(u, t) = (u, t + s)`, with `ρ(φ_s) = e^s`.
pub fn natural_flow(n: usize, sign: f64) -> LieAction {
    let chart = cone_chart(n, sign);
    let m = 2 * n - 1;
    let gen = FieldExpr::vector(chart.clone(), move |x| {
        let (d, o) = (x[0].dim(), x[0].order());
        let mut v = vec![Jet::zero(d, o); m + 1];
        v[m] = Jet::constant(d, o, 1.0);
        Ok(v)
    });
    let c2 = chart.clone();
    LieAction::new("natural-flow", chart, vec![gen]).with_flow(0, move |s| {
        SmoothMap::new(c2.clone(), c2.clone(), move |x| {
            let mut y = x.to_vec();
            y[m] = &y[m] + s;
            Ok(y)
        })
    })
}

/// `max |γ*Ω − ρΩ|` over samples for a Kähler gauge `h`.
pub fn deck_dilation_residual(deck: &DeckMap, h: &HermitianStructure, points: &[Point]) -> Result<f64> {
    dilation_residual(&deck.map, deck.rho, h, points)
}

pub fn dilation_residual(map: &SmoothMap, rho: f64, h: &HermitianStructure, points: &[Point]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in points {
        let (y, jac) = map.jet_and_jacobian(p, 0)?;
        let yv: Vec<f64> = y.iter().map(Jet::value).collect();
        let (g, j) = h.at(&yv, 0)?;
        let pulled = fundamental_from(&g, &j).pullback(&jac);
        let (g0, j0m) = h.at(p, 0)?;
        let here = fundamental_from(&g0, &j0m);
        worst = worst.max(pulled.sub(&here.scale(rho)).sup());
    }
    Ok(worst)
}

/// `Φ_Λ` with the weights reordered so that negatives come first.
#[derive(Debug, Clone)]
pub struct PhiLambda {
    /// `sorted[i] = lambda[permutation[i]]`.
    pub permutation: Vec<usize>,
    pub sorted: Vec<f64>,
    pub k: usize,
    pub map: SmoothMap,
    /// `Φ_Λ` followed by `z ↦ z/|z|`.
    pub normalized: SmoothMap,
}

pub fn phi_lambda(lambda: &[f64]) -> Result<PhiLambda> {
    let n = lambda.len();
    check_n(n)?;
    let k = lambda.iter().filter(|l| **l < 0.0).count();
    if k == 0 || k == n || lambda.contains(&0.0) {
        return Err(Error::AllWeightsSameSign);
    }
    let mut permutation: Vec<usize> = (0..n).collect();
    permutation.sort_by_key(|&i| (lambda[i] >= 0.0) as u8);
    let sorted: Vec<f64> = permutation.iter().map(|&i| lambda[i]).collect();
    let scale: Vec<f64> = sorted.iter().map(|l| 1.0 / l.abs().sqrt()).collect();
    let src = Arc::new(Chart::new(
        format!("S^{}xS^{}", 2 * k - 1, 2 * (n - k) - 1),
        2 * n,
        Sampler::Box { lo: vec![-1.0; 2 * n], hi: vec![1.0; 2 * n] },
        move |p| {
            let a: f64 = p[..2 * k].iter().map(|x| x * x).sum();
            let b: f64 = p[2 * k..].iter().map(|x| x * x).sum();
            a > 1e-6 && b > 1e-6
        },
    ));
    let sc = scale.clone();
    let map = SmoothMap::new(src.clone(), punctured_chart(n), move |x| {
        Ok(x.iter().enumerate().map(|(i, c)| c.scale(sc[i / 2])).collect())
    });
    let raw = map.clone();
    let normalized = SmoothMap::new(src, punctured_chart(n), move |x| {
        let z = raw.apply(x)?;
        let r = norm2(&z).sqrt()?.recip()?;
        Ok(z.iter().map(|c| c * &r).collect())
    });
    Ok(PhiLambda { permutation, sorted, k, map, normalized })
}

/// The (k = 2) map `(ξ, ζ) ↦ ((ξ₁ζ₂ + conj(ξ₂ζ₁), ξ₁ζ₁ − conj(ξ₂ζ₂)), ζ)` on `ℂ² × ℂ²`.
pub fn s3s3_map() -> SmoothMap {
    let chart = Arc::new(Chart::euclidean(8));
    SmoothMap::new(chart.clone(), chart, |x| {
        let c = |i: usize| (x[2 * i].clone(), x[2 * i + 1].clone());
        let mul = |a: &(Jet, Jet), b: &(Jet, Jet)| (&a.0 * &b.0 - &a.1 * &b.1, &a.0 * &b.1 + &a.1 * &b.0);
        let (xi1, xi2, ze1, ze2) = (c(0), c(1), c(2), c(3));
        let p = mul(&xi1, &ze2);
        let q = mul(&xi2, &ze1);
        let r = mul(&xi1, &ze1);
        let s = mul(&xi2, &ze2);
        // conj flips the imaginary part
        Ok(vec![
            &p.0 + &q.0,
            &p.1 - &q.1,
            &r.0 - &s.0,
            &r.1 + &s.1,
            ze1.0, ze1.1, ze2.0, ze2.1,
        ])
    })
}

/// Rotation flows `z_k ↦ e^{iλ_k t} z_k` on `ℝ^{2n}` for equivariance checks.
pub fn rotation_flow(weights: Vec<f64>) -> impl Fn(f64) -> SmoothMap {
    let chart = Arc::new(Chart::euclidean(2 * weights.len()));
    move |t| rotation_map(chart.clone(), weights.iter().map(|l| l * t).collect())
}

fn parse_kv<'a>(parts: &[&'a str], key: &str) -> Option<&'a str> {
    parts.iter().find_map(|p| p.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{x}`"))))
        .collect()
}

fn parse_n(parts: &[&str]) -> Result<usize> {
    parse_kv(parts, "n")
        .ok_or_else(|| Error::Config("missing n=".into()))?
        .parse()
        .map_err(|_| Error::Config("n must be an integer".into()))
}

/// Looks up a structure by identifier, e.g. `"boothby:n=2"` or `"cone:sphere:n=2:A=1,1"`.
pub fn structure(id: &str) -> Result<HermitianStructure> {
    let parts: Vec<&str> = id.split(':').collect();
    match parts[0] {
        "kahler" => standard_kahler(parse_n(&parts)?),
        "boothby" => boothby_vaisman(parse_n(&parts)?),
        "witness" => Ok(non_lck_witness()),
        "almost-complex" => Ok(twisted_almost_complex()),
        "cone" | "vaisman" if parts.get(1) == Some(&"sphere") => {
            let n = parse_n(&parts)?;
            let a = match parse_kv(&parts, "A") {
                Some(s) => parse_list(s)?,
                None => vec![1.0; n],
            };
            if a.len() != n {
                return Err(Error::Config(format!("A needs {n} entries")));
            }
            let cone = kahler_cone(&sasaki_sphere(n, &a)?);
            if parts[0] == "cone" {
                Ok(cone)
            } else {
                vaisman_gauge(&cone)
            }
        }
        _ => Err(Error::Config(format!("unknown structure `{id}`"))),
    }
}

/// Identifier templates with one-line descriptions.
pub fn catalogue() -> Vec<(&'static str, &'static str)> {
    vec![
        ("kahler:n=N", "flat Kähler metric on C^N"),
        ("boothby:n=N", "|z|^-2 times the flat metric on C^N minus 0 (Vaisman, Lee form -d log|z|^2)"),
        ("cone:sphere:n=N:A=a1,..,aN", "Kähler cone over the Sasaki sphere (S^{2N-1}, eta_A), graph chart"),
        ("vaisman:sphere:n=N:A=a1,..,aN", "Vaisman gauge 2e^-t g of the cone, Lee form -dt"),
        ("witness", "dim-4 Hermitian structure with (dOmega)_0 = 0 but d omega != 0 (not LCK)"),
        ("almost-complex", "flat metric with a non-integrable orthogonal J"),
        ("action:weighted:l1,..,lN", "weighted circle action z_k -> e^{i l_k t} z_k"),
    ]
}
