//! Acceptance suite: one PASS/FAIL line per criterion, 200 samples per check, seed 42.
//!
//! Criteria listed in `KNOWN_DEVIATIONS` are unattainable as stated; they are
//! still computed and printed as FAIL, and the test asserts they keep failing
//! so a change in behavior is noticed.

use std::sync::Arc;
use std::time::Instant;

use lckit::fields::{FieldExpr, Form, Point};
use lckit::gallery;
use lckit::jets::{self, Jet};
use lckit::lck::{self, conformal_rescale, lee_form, twisted_differential, HermitianStructure, Twisted};
use lckit::moment::{self, coisotropy_and_splitting_check, momentum_conformal_transport, project_to_zero_level, verify_momentum};
use lckit::reduce;
use lckit::weyl::{self, Gauges};
use lckit::{sample_points, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 200;
const SEED: u64 = 42;
const KNOWN_DEVIATIONS: &[&str] = &["8b"];

struct Line {
    id: &'static str,
    what: String,
    value: f64,
    bound: String,
    pass: bool,
}

#[derive(Default)]
struct Sheet(Vec<Line>);

impl Sheet {
    fn le(&mut self, id: &'static str, what: &str, value: f64, tol: f64) {
        self.0.push(Line { id, what: what.into(), value, bound: format!("<= {tol:e}"), pass: value <= tol });
    }

    fn gt(&mut self, id: &'static str, what: &str, value: f64, floor: f64) {
        self.0.push(Line { id, what: what.into(), value, bound: format!("> {floor:e}"), pass: value > floor });
    }

    fn flag(&mut self, id: &'static str, what: &str, ok: bool) {
        self.0.push(Line { id, what: what.into(), value: if ok { 0.0 } else { 1.0 }, bound: "holds".into(), pass: ok });
    }
}

fn pts(h: &HermitianStructure, n: usize) -> Vec<Point> {
    sample_points(&h.chart, n, SEED)
}

fn max_over(points: &[Point], f: impl Fn(&Point) -> f64) -> f64 {
    points.iter().map(f).fold(0.0, f64::max)
}

/// Random polynomial of degree ≤ 3 with coefficients in [−1, 1].
fn random_poly(rng: &mut ChaCha8Rng, vars: usize) -> Vec<(f64, Vec<usize>)> {
    (0..8)
        .map(|_| {
            let deg = rng.random_range(0..=3);
            let exps = (0..deg).map(|_| rng.random_range(0..vars)).collect();
            (rng.random_range(-1.0..1.0), exps)
        })
        .collect()
}

fn eval_poly(poly: &[(f64, Vec<usize>)], x: &[Jet]) -> Jet {
    let mut acc = Jet::zero(x[0].dim(), x[0].order());
    for (c, exps) in poly {
        let mut term = Jet::constant(x[0].dim(), x[0].order(), *c);
        for &e in exps {
            term = &term * &x[e];
        }
        acc += &term;
    }
    acc
}

fn poly_field(h: &HermitianStructure, poly: Vec<(f64, Vec<usize>)>) -> FieldExpr {
    FieldExpr::scalar(h.chart.clone(), move |x| Ok(eval_poly(&poly, x)))
}

fn criterion_1(s: &mut Sheet) {
    for n in [2, 3] {
        let h = gallery::boothby_vaisman(n).unwrap();
        let cert = lck::certify_lck_seeded(&h, SAMPLES, SEED, 1e-8).unwrap();
        let r = cert.residuals;
        let worst = r.d_omega_minus_omega_wedge.max(r.d_omega).max(r.nijenhuis);
        s.le("1", &format!("boothby:n={n} dΩ−ω∧Ω, dω, N_J (relative)"), worst, 1e-8);
    }
}

fn criterion_2(s: &mut Sheet) {
    let h = gallery::boothby_vaisman(2).unwrap();
    s.le("2", "boothby:n=2 ∇ω", reduce::lee_parallelism(&h, &pts(&h, SAMPLES)).unwrap(), 1e-8);
    for a in [[1.0, 1.0], [1.0, 2.0]] {
        let v = gallery::vaisman_gauge(&gallery::kahler_cone(&gallery::sasaki_sphere(2, &a).unwrap())).unwrap();
        let p = pts(&v, SAMPLES);
        let dev = max_over(&p, |q| {
            let w = lee_form(&v, q, 0).unwrap().omega.values();
            w.iter().enumerate().map(|(i, x)| (x - if i == 3 { -1.0 } else { 0.0 }).abs()).fold(0.0, f64::max)
        });
        s.le("2", &format!("cone A={a:?} Vaisman gauge ω = −dt"), dev, 1e-9);
        s.le("2", &format!("cone A={a:?} Vaisman gauge ∇ω"), reduce::lee_parallelism(&v, &p).unwrap(), 1e-8);
    }
}

fn criterion_3(s: &mut Sheet) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    // d^ω d^ω ψ = −dω ∧ ψ for an arbitrary, non-closed ω
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = jets::seed(&p, 2);
        let omega = Form::one_form((0..4).map(|_| eval_poly(&random_poly(&mut rng, 4), &x)).collect());
        for deg in [0, 1, 2] {
            let coeffs: Vec<Jet> = (0..lckit::fields::binomial(4, deg)).map(|_| eval_poly(&random_poly(&mut rng, 4), &x)).collect();
            let psi = Form::from_coeffs(4, deg, coeffs, &x[0]);
            let dd = twisted_differential(&twisted_differential(&psi, &omega).unwrap(), &omega.truncate(1)).unwrap();
            let rhs = omega.d().unwrap().truncate(0).wedge(&psi.truncate(0));
            worst = worst.max(dd.add(&rhs).sup());
        }
    }
    s.le("3", "d^ω∘d^ω ψ + dω∧ψ (50 random ω, ψ of degree 0..2)", worst, 1e-10);

    let h = gallery::boothby_vaisman(2).unwrap();
    let points = pts(&h, 50);
    let mut ratio = 0.0f64;
    for p in &points {
        let ctx = Twisted::of(&h, p, 1).unwrap();
        let x = jets::seed(p, 2);
        let f: Vec<Jet> = (0..3).map(|_| eval_poly(&random_poly(&mut rng, 4), &x)).collect();
        let outer = ctx.truncate(0);
        let term = |a: usize, b: usize, c: usize| outer.bracket(&ctx.bracket(&f[a], &f[b]).unwrap(), &f[c]).unwrap().value();
        let t = [term(0, 1, 2), term(1, 2, 0), term(2, 0, 1)];
        let scale = 1.0 + t.iter().map(|v| v.abs()).fold(0.0, f64::max);
        ratio = ratio.max((t[0] + t[1] + t[2]).abs() / scale);
    }
    s.le("3", "Jacobi cyclic sum / scale on boothby:n=2 (50 polynomial triples)", ratio, 1e-8);
}

fn alpha_field(h: &HermitianStructure) -> FieldExpr {
    FieldExpr::scalar(h.chart.clone(), |x| Ok(x[0].scale(0.3) - x[3].square().scale(0.2) + x[2].sin().scale(0.1)))
}

fn criterion_4(s: &mut Sheet) {
    let h = gallery::boothby_vaisman(2).unwrap();
    let alpha = alpha_field(&h);
    let hp = conformal_rescale(&h, &alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let points = pts(&h, SAMPLES);
    let (mut r1, mut r2, mut r3) = (0.0f64, 0.0f64, 0.0f64);
    for p in &points {
        let f1 = random_poly(&mut rng, 4);
        let f2 = random_poly(&mut rng, 4);
        let ef = |poly: Vec<(f64, Vec<usize>)>| {
            let a = alpha.clone();
            FieldExpr::scalar(h.chart.clone(), move |x| Ok(a.eval_scalar(x)?.exp() * eval_poly(&poly, x)))
        };
        let x = jets::seed(p, 1);
        let ea = alpha.eval_scalar(&x).unwrap().exp();
        let w = lee_form(&h, p, 0).unwrap().omega;
        let wp = lee_form(&hp, p, 0).unwrap().omega;
        let lhs = lck::twisted_differential_scalar(&eval_poly(&f1, &x), &w).unwrap();
        let rhs = lck::twisted_differential_scalar(&(&ea * &eval_poly(&f1, &x)), &wp).unwrap().scale(1.0 / ea.value());
        r1 = r1.max(lhs.sub(&rhs).sup());
        let x1 = lck::twisted_hamiltonian_field(&h, &poly_field(&h, f1.clone()), p, 0).unwrap();
        let x2 = lck::twisted_hamiltonian_field(&hp, &ef(f1.clone()), p, 0).unwrap();
        r2 = r2.max(x1.iter().zip(&x2).map(|(a, b)| (a.value() - b.value()).abs()).fold(0.0, f64::max));
        let b = lck::twisted_poisson(&h, &poly_field(&h, f1.clone()), &poly_field(&h, f2.clone()), p, 0).unwrap().value();
        let bp = lck::twisted_poisson(&hp, &ef(f1), &ef(f2), p, 0).unwrap().value();
        r3 = r3.max((bp - ea.value() * b).abs());
    }
    s.le("4", "d^ω f = e^{−α} d^{ω'}(e^α f)", r1, 1e-9);
    s.le("4", "♯_Ω d^ω f = ♯_{Ω'} d^{ω'}(e^α f)", r2, 1e-9);
    s.le("4", "{e^α f₁, e^α f₂}' = e^α {f₁, f₂}", r3, 1e-9);

    let mut gauges = Gauges::new();
    gauges.register(h.clone());
    let target = "boothby:n=2:e^alpha";
    let hp = gauges.rescale(&h.label, &alpha, target).unwrap();
    let m = gallery::boothby_momentum(2, &[-1.0, 1.0]).unwrap();
    let mp = momentum_conformal_transport(&gauges, &m, &alpha, target).unwrap();
    s.le("4", "transported momentum ι_XΩ' = d^{ω'} μ'", verify_momentum(&hp, &mp, &points, 1e-9).unwrap().residual, 1e-9);
    let zeros = [[0.5, 0.5, 0.5, -0.5], [1.0, 0.0, 0.0, 1.0], [0.25, -0.75, 0.75, 0.25], [0.0, 0.5, -0.5, 0.0]];
    let exact = zeros.iter().all(|z| m.values(z).unwrap()[0] == 0.0 && mp.values(z).unwrap()[0] == 0.0)
        && points.iter().all(|p| (m.values(p).unwrap()[0] == 0.0) == (mp.values(p).unwrap()[0] == 0.0));
    s.flag("4", "zero set unchanged by gauge transport (exact)", exact);
}

fn linear_field(h: &HermitianStructure, rng: &mut ChaCha8Rng) -> FieldExpr {
    let n = h.dim();
    let c: Vec<Vec<f64>> = (0..n).map(|_| (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    FieldExpr::vector(h.chart.clone(), move |x| {
        Ok(c.iter()
            .map(|row| {
                let mut v = Jet::constant(x[0].dim(), x[0].order(), row[n]);
                for (k, xk) in x.iter().enumerate() {
                    v += &xk.scale(row[k]);
                }
                v
            })
            .collect())
    })
}

fn criterion_5(s: &mut Sheet) {
    let items = vec![
        gallery::boothby_vaisman(2).unwrap(),
        gallery::boothby_vaisman(3).unwrap(),
        gallery::structure("vaisman:sphere:n=2:A=1,2").unwrap(),
        gallery::standard_kahler(2).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let (mut tor, mut six, mut met, mut nj, mut curv, mut lck_curv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for h in &items {
        for p in &pts(h, SAMPLES) {
            let (x, y, z) = (linear_field(h, &mut rng), linear_field(h, &mut rng), linear_field(h, &mut rng));
            tor = tor.max(weyl::torsion_residual(h, p, &x, &y).unwrap());
            six = six.max(weyl::six_terms_residual(h, p, &x, &y, &z).unwrap());
            met = met.max(weyl::nabla_metric_residual(h, p).unwrap());
            nj = nj.max(weyl::check_nabla_j(h, p).unwrap());
            let c = weyl::density_curvature(h, p).unwrap();
            let dw = lee_form(h, p, 1).unwrap().omega.d().unwrap();
            curv = curv.max(c.sub(&dw).sup());
            lck_curv = lck_curv.max(c.sup());
        }
    }
    s.le("5", "Weyl torsion", tor, 1e-9);
    s.le("5", "six-terms identity", six, 1e-9);
    s.le("5", "∇g − ω⊗g", met, 1e-9);
    s.le("5", "∇J on LCK gallery items", nj, 1e-8);
    s.le("5", "density curvature − dω on LCK items", curv, 1e-8);
    s.le("5", "density curvature on LCK items", lck_curv, 1e-8);

    let w = gallery::non_lck_witness();
    let dev = max_over(&pts(&w, SAMPLES), |p| {
        let c = weyl::density_curvature(&w, p).unwrap();
        let dw = lee_form(&w, p, 1).unwrap().omega.d().unwrap();
        let mut d = c.sub(&dw).sup();
        for a in 0..4 {
            for b in a + 1..4 {
                let want = if (a, b) == (0, 2) { -2.0 } else { 0.0 };
                d = d.max((c.component(&[a, b]).value() - want).abs());
            }
        }
        d
    });
    s.le("5", "witness density curvature = dω = 2dx₂∧dx₁", dev, 1e-8);

    // d^∇ commutes with the change of gauge
    let mut gauges = Gauges::new();
    let h = gallery::boothby_vaisman(2).unwrap();
    gauges.register(h.clone());
    let alpha = alpha_field(&h);
    gauges.rescale(&h.label, &alpha, "g'").unwrap();
    let mut worst = 0.0f64;
    for p in &pts(&h, SAMPLES) {
        let poly: Vec<_> = (0..4).map(|_| random_poly(&mut rng, 4)).collect();
        let base = FieldExpr::form(h.chart.clone(), 1, move |x| Ok(Form::one_form(poly.iter().map(|q| eval_poly(q, x)).collect())));
        let psi = weyl::DensityForm::new(base, 2, h.label.clone()).unwrap();
        let moved = weyl::gauge_change(&gauges, &psi, &alpha, "g'").unwrap();
        let ea = alpha.at(p, 0).unwrap()[0].value().exp();
        let a = weyl::d_nabla(&gauges, &psi, p, 0).unwrap().scale(ea);
        let b = weyl::d_nabla(&gauges, &moved, p, 0).unwrap();
        worst = worst.max(a.sub(&b).sup());
    }
    s.le("5", "two-path gauge agreement of d^∇ on weight-2 densities", worst, 1e-9);
}

fn criterion_6(s: &mut Sheet) {
    for (n, lambda) in [(2, vec![-1.0, 1.0]), (3, vec![-1.0, 1.0, 1.0])] {
        let k = gallery::standard_kahler(n).unwrap();
        let mk = gallery::kahler_momentum(n, &lambda, k.chart.clone()).unwrap();
        let r = verify_momentum(&k, &mk, &pts(&k, SAMPLES), 1e-9).unwrap().residual;
        s.le("6", &format!("Kähler gauge n={n} ι_XΩ − dμ"), r, 1e-9);
        let b = gallery::boothby_vaisman(n).unwrap();
        let mb = gallery::boothby_momentum(n, &lambda).unwrap();
        let r = verify_momentum(&b, &mb, &pts(&b, SAMPLES), 1e-9).unwrap().residual;
        s.le("6", &format!("Boothby gauge n={n} ι_XΩ − d^ωμ"), r, 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(SEED + n as u64);
        let mut worst = 0.0f64;
        let mut projected = 0;
        while projected < 20 {
            let p: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = project_to_zero_level(&mb, &p, &[]).unwrap();
            worst = worst.max(coisotropy_and_splitting_check(&b, &mb, &q).unwrap().max());
            projected += 1;
        }
        s.le("6", &format!("coisotropy and splitting n={n} at 20 zero points"), worst, 1e-8);
    }
    let at = |h: &FieldExpr, p: &[f64]| h.at(p, 0).unwrap()[0].value();
    let r = 0.5f64.sqrt();
    let spots = [
        (at(&gallery::weighted_h(&[-1.0, 1.0], &[1.0, 1.0]), &[1.0, 0.0, 0.0, 0.0]), -0.5),
        (at(&gallery::weighted_h(&[-1.0, 1.0], &[1.0, 1.0]), &[r, 0.0, r, 0.0]), 0.0),
        (at(&gallery::weighted_h(&[-1.0, 1.0], &[1.0, 2.0]), &[0.0, 0.0, 1.0, 0.0]), 0.25),
    ];
    s.le("6", "H_Λ spot values −0.5, 0, 0.25", spots.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max), 1e-15);
}

fn product_sphere_points(rng: &mut ChaCha8Rng, split: usize, n: usize, count: usize) -> Vec<Point> {
    (0..count)
        .map(|_| {
            let mut v: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for (lo, hi) in [(0, 2 * split), (2 * split, 2 * n)] {
                let r = v[lo..hi].iter().map(|x| x * x).sum::<f64>().sqrt();
                v[lo..hi].iter_mut().for_each(|x| *x /= r);
            }
            Point(v)
        })
        .collect()
}

fn criterion_7(s: &mut Sheet) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let ts = [0.3, -1.1, 2.5];
    for lambda in [vec![-1.0, 1.0], vec![-1.0, 1.0, 1.0], vec![2.0, -3.0, 1.0], vec![-1.0, -1.0, 1.0, 1.0]] {
        let phi = gallery::phi_lambda(&lambda).unwrap();
        let n = lambda.len();
        let points = product_sphere_points(&mut rng, phi.k, n, 100);
        let flow = gallery::rotation_flow(phi.sorted.clone());
        let eq = moment::equivariance_check(&phi.normalized, &flow, &flow, &points, &ts).unwrap();
        let zero = max_over(&points, |p| {
            let z = phi.normalized.apply_point(p).unwrap();
            (0..n).map(|k| phi.sorted[k] * (z[2 * k].powi(2) + z[2 * k + 1].powi(2))).sum::<f64>().abs()
        });
        s.le("7", &format!("Φ_Λ equivariance Λ={lambda:?}"), eq, 1e-12);
        s.le("7", &format!("Φ_Λ weighted sum zero Λ={lambda:?}"), zero, 1e-12);
    }
    let points = product_sphere_points(&mut rng, 2, 4, 100);
    let src = gallery::rotation_flow(vec![-1.0, -1.0, 1.0, 1.0]);
    let dst = gallery::rotation_flow(vec![0.0, 0.0, 1.0, 1.0]);
    let eq = moment::equivariance_check(&gallery::s3s3_map(), &src, &dst, &points, &ts).unwrap();
    s.le("7", "S³×S³ map equivariance, n=4, k=2", eq, 1e-10);
}

fn criterion_8(s: &mut Sheet) {
    let q = reduce::boothby_hopf_quotient(3).unwrap();
    let red = reduce::reduced_structure(&q).unwrap();
    let points = pts(&red, SAMPLES);
    let cert = lck::certify_lck(&red, &points, 1e-7).unwrap();
    s.le("8a", "reduced Λ=(−1,1,1) chart certifies LCK", cert.residuals.named().iter().map(|x| x.1).fold(0.0, f64::max), 1e-7);

    let b2 = gallery::boothby_vaisman(2).unwrap();
    let spread = reduce::conformal_comparison(&red, &b2, &points).unwrap().spread;
    let qh = reduce::boothby_hopf_quotient_holomorphic(3).unwrap();
    let red_h = reduce::reduced_structure(&qh).unwrap();
    let ph = pts(&red_h, SAMPLES);
    let spread_h = reduce::conformal_comparison(&red_h, &b2, &ph).unwrap().spread;
    s.le("8b", "reduced metric pointwise conformal to boothby:n=2, section chart", spread, 1e-7);
    s.le("8b", "reduced metric pointwise conformal to boothby:n=2, holomorphic chart", spread_h, 1e-7);
    let berger = reduce::conformal_comparison(&red_h, &gallery::hopf_dhomothetic(2, 0.5).unwrap(), &ph).unwrap().spread;
    s.le("8b'", "reduced metric conformal to Boothby with Hopf directions scaled by ½", berger, 1e-7);

    s.le("8c", "reduced Vaisman gauge ∇ω̄ (Hopf reduction)", reduce::lee_parallelism(&red, &points).unwrap(), 1e-7);
    let cone_points = sample_points(&reduce::quotient_cone_chart(), 100, SEED);
    for a in [[1.0, 1.0, 1.0], [1.0, 1.0, 2.0]] {
        let r = reduce::sasaki_crosscheck(&a, &cone_points).unwrap();
        s.le("8c", &format!("cone reduction A={a:?}: ∇ω̄ in the gauge 2e^−t ḡ"), r.reduced_parallel, 1e-7);
        s.le("8c", &format!("cone reduction A={a:?}: μ_cone vs μ_K under the identification"), r.cone_vs_kahler, 1e-9);
        s.le("8c", &format!("cone reduction A={a:?}: η̄ descends"), r.eta_invariant.max(r.eta_horizontal), 1e-9);
    }

    let theta: Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync> = Arc::new(|w: &[Jet]| (&w[0] * &w[3]).scale(0.7) + w[1].sin());
    let q2 = reduce::boothby_hopf_quotient_twisted(3, Some(theta)).unwrap();
    let red2 = reduce::reduced_structure(&q2).unwrap();
    let u = reduce::conformal_comparison(&red, &red2, &points).unwrap().spread;
    s.le("8d", "two sections give conformal reduced metrics", u, 1e-7);
    let pi = reduce::compatibility_pi_star(&q, &red, &points).unwrap().spread;
    s.le("8d", "π*ḡ agrees with g on horizontal lifts", pi, 1e-8);
}

fn criterion_9(s: &mut Sheet) {
    let chart = gallery::punctured_chart(2);
    let points = sample_points(&chart, SAMPLES, SEED);
    for alpha in [(2.0, 0.0), (0.9, 1.2)] {
        let r = reduce::kahler_cover_crosscheck(2, &[-1.0, 1.0], alpha, &points).unwrap();
        s.le("9", &format!("γ = {alpha:?}: γ*μ = ρ(γ)μ"), r.deck_scaling, 1e-9);
        s.le("9", &format!("γ = {alpha:?}: γ*(e^τμ) = e^τμ"), r.invariance.max(r.tau_shift), 1e-9);
        s.le("9", &format!("γ = {alpha:?}: e^τ μ_K = μ_B"), r.gauge_relation, 1e-9);
    }
}

fn criterion_10(s: &mut Sheet) {
    let w = gallery::non_lck_witness();
    let cert = lck::certify_lck_seeded(&w, SAMPLES, SEED, 1e-8).unwrap();
    s.flag("10", "witness fails certification", !cert.pass() && cert.verdict("d_omega") == Some(false));
    s.gt("10", "witness dω residual", cert.residuals.d_omega, 1e-2);
    let m = gallery::boothby_momentum(2, &[1.0, 1.0]).unwrap();
    let all = sample_points(&gallery::punctured_chart(2), 20, SEED).iter().all(|p| {
        matches!(project_to_zero_level(&m, p, &[]), Err(Error::NoConvergence { .. }))
    });
    s.flag("10", "all-positive weights: projection reports NoConvergence", all);
    let wq = reduce::witness_quotient().unwrap();
    let red = reduce::reduced_structure(&wq).unwrap();
    let (best, _) = reduce::vaisman_search(&red, (4, 5), &pts(&red, 20)).unwrap();
    s.gt("10", "reduced witness: best Vaisman residual over the gauge family", best, 1e-3);
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let mut s = Sheet::default();
    criterion_1(&mut s);
    criterion_2(&mut s);
    criterion_3(&mut s);
    criterion_4(&mut s);
    criterion_5(&mut s);
    criterion_6(&mut s);
    criterion_7(&mut s);
    criterion_8(&mut s);
    criterion_9(&mut s);
    criterion_10(&mut s);
    let elapsed = start.elapsed().as_secs_f64();
    s.le("T", "total wall time in seconds", elapsed, 60.0);

    let mut unexpected = Vec::new();
    for l in &s.0 {
        let known = KNOWN_DEVIATIONS.contains(&l.id);
        let tag = match (l.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known deviation, see decisions ledger)",
            (false, false) => "FAIL",
        };
        println!("[{tag}] criterion {:<3} {:<68} {:.3e} {}", l.id, l.what, l.value, l.bound);
        if l.pass == known {
            unexpected.push(format!("{} {}", l.id, l.what));
        }
    }
    assert!(unexpected.is_empty(), "unexpected outcomes: {unexpected:?}");
}
