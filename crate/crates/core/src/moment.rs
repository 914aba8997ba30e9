//! Lie algebra actions and momentum maps for twisted symplectic structures.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, divergence, lie_derivative_form, Chart, FieldExpr, Point, SmoothMap, Valence};
use crate::jets::{self, Jet};
use crate::lck::{fundamental_from, lee_from, twisted_differential_scalar, HermitianStructure, Twisted};
use crate::weyl::Gauges;

pub type Flow = Arc<dyn Fn(f64) -> SmoothMap + Send + Sync>;

/// Fundamental fields of a Lie algebra action, with structure constants
/// `[X_i, X_j] = Σ_k c[i][j][k] X_k` as vector fields.
#[derive(Clone)]
pub struct LieAction {
    pub label: String,
    pub chart: Arc<Chart>,
    pub generators: Vec<FieldExpr>,
    pub structure_constants: Vec<Vec<Vec<f64>>>,
    pub flows: Vec<Option<Flow>>,
}

impl fmt::Debug for LieAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LieAction({}, {} generators)", self.label, self.generators.len())
    }
}

impl LieAction {
    /// An abelian action.
    pub fn new(label: impl Into<String>, chart: Arc<Chart>, generators: Vec<FieldExpr>) -> LieAction {
        let r = generators.len();
        LieAction {
            label: label.into(),
            chart,
            flows: vec![None; r],
            structure_constants: vec![vec![vec![0.0; r]; r]; r],
            generators,
        }
    }

    pub fn with_structure_constants(mut self, c: Vec<Vec<Vec<f64>>>) -> LieAction {
        self.structure_constants = c;
        self
    }

    pub fn with_flow(mut self, index: usize, flow: impl Fn(f64) -> SmoothMap + Send + Sync + 'static) -> LieAction {
        self.flows[index] = Some(Arc::new(flow));
        self
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn flow(&self, index: usize, t: f64) -> Option<SmoothMap> {
        self.flows.get(index)?.as_ref().map(|f| f(t))
    }

    /// Max over samples of `|[X_i, X_j] − Σ c^k_ij X_k|`.
    pub fn bracket_residual(&self, points: &[Point]) -> Result<f64> {
        let r = self.rank();
        let per = points
            .par_iter()
            .map(|p| {
                let s = jets::seed(p, 1);
                let xs: Vec<Vec<Jet>> = self.generators.iter().map(|g| g.eval(&s)).collect::<Result<_>>()?;
                let mut worst = 0.0f64;
                for i in 0..r {
                    for j in 0..r {
                        let br = fields::lie_bracket(&xs[i], &xs[j])?;
                        for (m, b) in br.iter().enumerate() {
                            let want: f64 =
                                (0..r).map(|k| self.structure_constants[i][j][k] * xs[k][m].value()).sum();
                            worst = worst.max((b.value() - want).abs());
                        }
                    }
                }
                Ok(worst)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(per.into_iter().fold(0.0, f64::max))
    }
}

/// Components `μ^{X_i}` of a momentum map, written in one gauge.
#[derive(Debug, Clone)]
pub struct MomentumData {
    pub action: LieAction,
    pub components: Vec<FieldExpr>,
    pub gauge: String,
}

impl MomentumData {
    pub fn new(action: LieAction, components: Vec<FieldExpr>, gauge: impl Into<String>) -> Result<MomentumData> {
        if components.len() != action.rank() {
            return Err(Error::ValenceMismatch("one momentum component per generator".into()));
        }
        if components.iter().any(|c| c.valence != Valence::Scalar) {
            return Err(Error::ValenceMismatch("momentum components are scalars".into()));
        }
        Ok(MomentumData { action, components, gauge: gauge.into() })
    }

    /// `μ^X` for `X = Σ c_i X_i`.
    pub fn component_along(&self, coeffs: &[f64]) -> FieldExpr {
        let comps = self.components.clone();
        let c = coeffs.to_vec();
        FieldExpr::scalar(self.action.chart.clone(), move |x| {
            let mut acc = Jet::zero(x[0].dim(), x[0].order());
            for (ci, f) in c.iter().zip(&comps) {
                acc += f.eval_scalar(x)?.scale(*ci);
            }
            Ok(acc)
        })
    }

    pub fn values(&self, p: &[f64]) -> Result<Vec<f64>> {
        let s = jets::seed(p, 0);
        self.components.iter().map(|c| Ok(c.eval_scalar(&s)?.value())).collect()
    }
}

/// Max residual per generator, with its verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub per_generator: Vec<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckReport {
    fn from_rows(name: &str, rows: Vec<Vec<f64>>, width: usize, tolerance: f64) -> CheckReport {
        let mut per = vec![0.0f64; width];
        for row in rows {
            for (a, b) in per.iter_mut().zip(row) {
                *a = a.max(b);
            }
        }
        let residual = per.iter().cloned().fold(0.0, f64::max);
        CheckReport { name: name.into(), per_generator: per, residual, tolerance, pass: residual <= tolerance }
    }
}

fn check_gauge(h: &HermitianStructure, m: &MomentumData) -> Result<()> {
    if h.label != m.gauge {
        return Err(Error::GaugeMismatch { structure: h.label.clone(), momentum: m.gauge.clone() });
    }
    Ok(())
}

/// `Ω` and `ω` at order 0 plus the generators and momenta at order 1.
fn local_data(h: &HermitianStructure, m: &MomentumData, p: &[f64]) -> Result<(Twisted, Vec<Vec<Jet>>, Vec<Jet>)> {
    let ctx = Twisted::of(h, p, 0)?;
    let s = jets::seed(p, 1);
    let xs = m.action.generators.iter().map(|g| g.eval(&s)).collect::<Result<_>>()?;
    let mus = m.components.iter().map(|c| c.eval_scalar(&s)).collect::<Result<_>>()?;
    Ok((ctx, xs, mus))
}

/// `max |ι_X Ω − d^ω μ^X|` per generator.
pub fn verify_momentum(h: &HermitianStructure, m: &MomentumData, points: &[Point], tol: f64) -> Result<CheckReport> {
    check_gauge(h, m)?;
    let rows = points
        .par_iter()
        .map(|p| {
            let (ctx, xs, mus) = local_data(h, m, p)?;
            xs.iter()
                .zip(&mus)
                .map(|(x, mu)| {
                    let lhs = ctx.big_omega.interior(&fields::truncate_vec(x, 0));
                    let rhs = twisted_differential_scalar(mu, &ctx.omega)?;
                    Ok(lhs.sub(&rhs).sup())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::from_rows("momentum", rows, m.action.rank(), tol))
}

/// `max |{μ^i, μ^j} − Σ c^k_ij μ^k|`, reported per first index `i`.
pub fn verify_homomorphism(h: &HermitianStructure, m: &MomentumData, points: &[Point], tol: f64) -> Result<CheckReport> {
    check_gauge(h, m)?;
    let r = m.action.rank();
    let c = &m.action.structure_constants;
    let rows = points
        .par_iter()
        .map(|p| {
            let (ctx, _, mus) = local_data(h, m, p)?;
            let mut row = vec![0.0f64; r];
            for i in 0..r {
                for j in 0..r {
                    let b = ctx.bracket(&mus[i], &mus[j])?.value();
                    let want: f64 = (0..r).map(|k| c[i][j][k] * mus[k].value()).sum();
                    row[i] = row[i].max((b - want).abs());
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::from_rows("homomorphism", rows, r, tol))
}

/// Both forms of the infinitesimal conformal automorphism condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutomorphismReport {
    /// `|ℒ_X Ω − ω(X) Ω|` per generator.
    pub lie: Vec<f64>,
    /// `|−½ ω(X) + (1/n) div_g X|` per generator, `n` the real dimension.
    pub divergence: Vec<f64>,
}

impl AutomorphismReport {
    pub fn max(&self) -> f64 {
        self.lie.iter().chain(&self.divergence).cloned().fold(0.0, f64::max)
    }
}

pub fn infinitesimal_automorphism_check(h: &HermitianStructure, action: &LieAction, points: &[Point]) -> Result<AutomorphismReport> {
    let n = h.dim();
    let r = action.rank();
    let rows = points
        .par_iter()
        .map(|p| {
            let (g, j) = h.at(p, 2)?;
            let big = fundamental_from(&g, &j);
            let lee = lee_from(&g, &big)?.omega;
            let s = jets::seed(p, 1);
            let mut out = Vec::with_capacity(r);
            for gen in &action.generators {
                let x = gen.eval(&s)?;
                let lx = lie_derivative_form(&x, &big.truncate(1))?;
                let x0 = fields::truncate_vec(&x, 0);
                let wx = lee.truncate(0).eval_on(&[&x0]);
                let lie = lx.sub(&big.truncate(0).mul_scalar(&wx)).sup();
                let div = divergence(&x, &fields::truncate_mat(&g, 1))?;
                let cond = (wx.scale(-0.5) + div.scale(1.0 / n as f64)).value().abs();
                out.push((lie, cond));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rep = AutomorphismReport { lie: vec![0.0; r], divergence: vec![0.0; r] };
    for row in rows {
        for (i, (a, b)) in row.into_iter().enumerate() {
            rep.lie[i] = rep.lie[i].max(a);
            rep.divergence[i] = rep.divergence[i].max(b);
        }
    }
    Ok(rep)
}

pub const NEWTON_MAX_ITER: usize = 50;
pub const ZERO_LEVEL_TOL: f64 = 1e-12;

/// Newton projection onto `μ = 0` together with the extra scalar constraints.
pub fn project_to_zero_level(m: &MomentumData, p: &[f64], constraints: &[FieldExpr]) -> Result<Point> {
    project_with(m, p, constraints, NEWTON_MAX_ITER)
}

pub fn project_with(m: &MomentumData, p: &[f64], constraints: &[FieldExpr], max_iter: usize) -> Result<Point> {
    let all: Vec<&FieldExpr> = m.components.iter().chain(constraints).collect();
    let eval = |q: &[f64]| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let s = jets::seed(q, 1);
        let n = q.len();
        let mut f = DVector::zeros(all.len());
        let mut jac = DMatrix::zeros(all.len(), n);
        for (r, c) in all.iter().enumerate() {
            let v = c.eval_scalar(&s)?;
            f[r] = v.value();
            for i in 0..n {
                jac[(r, i)] = v.grad(i);
            }
        }
        Ok((f, jac))
    };
    let mut q = p.to_vec();
    let (mut f, mut jac) = eval(&q)?;
    let mut res = f.amax();
    for _ in 0..max_iter {
        if res <= ZERO_LEVEL_TOL {
            if !m.action.chart.contains(&q) {
                return Err(Error::OutsideDomain(m.action.chart.name.clone()));
            }
            return Ok(Point(q));
        }
        let pinv = jac.clone().pseudo_inverse(1e-14).map_err(|_| Error::NoConvergence { iterations: 0, residual: res })?;
        let step = pinv * &f;
        let mut damp = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let cand: Vec<f64> = q.iter().zip(step.iter()).map(|(a, b)| a - damp * b).collect();
            if let Ok((fc, jc)) = eval(&cand) {
                if fc.amax() < res || damp < 0.01 {
                    q = cand;
                    res = fc.amax();
                    f = fc;
                    jac = jc;
                    accepted = true;
                    break;
                }
            }
            damp *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res <= ZERO_LEVEL_TOL && m.action.chart.contains(&q) {
        return Ok(Point(q));
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: res })
}

pub const REGULARITY_MARGIN: f64 = 1e-6;

/// Coisotropy of `μ⁻¹(0)` and the splitting `T = E ⊕ 𝔤 ⊕ J𝔤` at a zero point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoisotropyReport {
    /// `max |Ω(X_i, V)|` over generators and a unit basis of `T_q μ⁻¹(0)`.
    pub coisotropy: f64,
    /// Largest `g`-inner product between unit vectors of `E`, `𝔤(q)` and `J𝔤(q)`.
    pub orthogonality: f64,
    /// `|J e − P_E J e|` over a `g`-orthonormal basis of `E`.
    pub j_invariance: f64,
    pub sigma_min: f64,
    pub dim_e: usize,
    pub dim_g: usize,
}

impl CoisotropyReport {
    pub fn max(&self) -> f64 {
        self.coisotropy.max(self.orthogonality).max(self.j_invariance)
    }
}

fn g_orthonormalize(g: &DMatrix<f64>, vs: &[DVector<f64>], against: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * g * b)[(0, 0)];
    let mut basis: Vec<DVector<f64>> = against.to_vec();
    let start = basis.len();
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                w -= b * ip(b, &w);
            }
        }
        let nrm = ip(&w, &w).max(0.0).sqrt();
        if nrm > 1e-9 {
            basis.push(w / nrm);
        }
    }
    basis.split_off(start)
}

pub fn coisotropy_and_splitting_check(h: &HermitianStructure, m: &MomentumData, q: &[f64]) -> Result<CoisotropyReport> {
    check_gauge(h, m)?;
    let n = h.dim();
    let s = jets::seed(q, 1);
    let r = m.action.rank();
    let mut dmu = DMatrix::zeros(r, n);
    for (i, c) in m.components.iter().enumerate() {
        let v = c.eval_scalar(&s)?;
        for k in 0..n {
            dmu[(i, k)] = v.grad(k);
        }
    }
    let sv = dmu.clone().svd(false, false).singular_values;
    let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(sigma_min > REGULARITY_MARGIN) {
        return Err(Error::RankDeficiency { sigma_min });
    }
    let eig = SymmetricEigen::new(dmu.transpose() * &dmu);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let tangent: Vec<DVector<f64>> = idx[..n - r].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();

    let (g, j) = h.at(q, 0)?;
    let gm = fields::values(&g);
    let jm = fields::values(&j);
    let om = fields::values(&fundamental_from(&g, &j).to_matrix());
    let x0 = jets::seed(q, 0);
    let gens: Vec<DVector<f64>> = m
        .action
        .generators
        .iter()
        .map(|gen| Ok(DVector::from_iterator(n, gen.eval(&x0)?.iter().map(Jet::value))))
        .collect::<Result<_>>()?;

    let mut coisotropy = 0.0f64;
    for x in &gens {
        for v in &tangent {
            coisotropy = coisotropy.max((x.transpose() * &om * v)[(0, 0)].abs());
        }
    }
    let g_basis = g_orthonormalize(&gm, &gens, &[]);
    let jg: Vec<DVector<f64>> = gens.iter().map(|x| &jm * x).collect();
    let jg_basis = g_orthonormalize(&gm, &jg, &[]);
    let e_basis = g_orthonormalize(&gm, &tangent, &g_basis);
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &gm * b)[(0, 0)].abs();
    let mut orthogonality = 0.0f64;
    for e in &e_basis {
        for b in g_basis.iter().chain(&jg_basis) {
            orthogonality = orthogonality.max(ip(e, b));
        }
    }
    for a in &g_basis {
        for b in &jg_basis {
            orthogonality = orthogonality.max(ip(a, b));
        }
    }
    let mut j_invariance = 0.0f64;
    for e in &e_basis {
        let je = &jm * e;
        let mut rest = je.clone();
        for b in &e_basis {
            rest -= b * (b.transpose() * &gm * &je)[(0, 0)];
        }
        j_invariance = j_invariance.max((rest.transpose() * &gm * &rest)[(0, 0)].max(0.0).sqrt());
    }
    Ok(CoisotropyReport {
        coisotropy,
        orthogonality,
        j_invariance,
        sigma_min,
        dim_e: e_basis.len(),
        dim_g: g_basis.len(),
    })
}

/// `μ ↦ e^α μ`, relabelled to the registered gauge `target = e^α g`.
pub fn momentum_conformal_transport(gauges: &Gauges, m: &MomentumData, alpha: &FieldExpr, target: &str) -> Result<MomentumData> {
    gauges.get(&m.gauge)?;
    gauges.get(target)?;
    let components = m
        .components
        .iter()
        .map(|c| {
            let (c, a) = (c.clone(), alpha.clone());
            FieldExpr::scalar(c.chart.clone(), move |x| Ok(c.eval_scalar(x)? * a.eval_scalar(x)?.exp()))
        })
        .collect();
    MomentumData::new(m.action.clone(), components, target)
}

/// `max ‖F(h_t x) − h'_t(F x)‖` over samples and parameters.
pub fn equivariance_check(
    f: &SmoothMap,
    src: &dyn Fn(f64) -> SmoothMap,
    dst: &dyn Fn(f64) -> SmoothMap,
    points: &[Point],
    ts: &[f64],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &t in ts {
        let (a, b) = (src(t), dst(t));
        for p in points {
            let lhs = f.apply_point(&a.apply_point(p)?)?;
            let rhs = b.apply_point(&f.apply_point(p)?)?;
            for (x, y) in lhs.iter().zip(&rhs) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    Ok(worst)
}
