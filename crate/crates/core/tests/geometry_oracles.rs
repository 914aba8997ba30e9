//! Exterior derivatives, Christoffel symbols, Nijenhuis tensors and momenta
//! against finite differences of order-0 evaluations, and Lee forms against
//! closed forms.

use lckit::fields::{self, Form, Point};
use lckit::gallery;
use lckit::jets::{self, Jet};
use lckit::lck::{self, fundamental_form, lee_form, HermitianStructure, Twisted};
use lckit::moment::verify_momentum;
use lckit::sample_points;

const H: f64 = 1e-5;

fn shifted(p: &[f64], var: usize, h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[var] += h;
    q
}

fn central(f: impl Fn(&[f64]) -> f64, p: &[f64], var: usize) -> f64 {
    (f(&shifted(p, var, H)) - f(&shifted(p, var, -H))) / (2.0 * H)
}

fn points(h: &HermitianStructure, n: usize) -> Vec<Point> {
    sample_points(&h.chart, n, 7)
}

#[test]
fn d_of_fundamental_form_matches_differences() {
    for h in [gallery::non_lck_witness(), gallery::boothby_vaisman(2).unwrap(), gallery::twisted_almost_complex()] {
        for p in points(&h, 10) {
            let d = fundamental_form(&h, &p, 1).unwrap().d().unwrap();
            let om = |q: &[f64], a: usize, b: usize| fundamental_form(&h, q, 0).unwrap().component(&[a, b]).value();
            for a in 0..4 {
                for b in a + 1..4 {
                    for c in b + 1..4 {
                        let want = central(|q| om(q, b, c), &p, a) - central(|q| om(q, a, c), &p, b) + central(|q| om(q, a, b), &p, c);
                        let got = d.component(&[a, b, c]).value();
                        assert!((got - want).abs() < 1e-7, "{} {a}{b}{c}: {got} vs {want}", h.label);
                    }
                }
            }
        }
    }
}

#[test]
fn christoffels_match_differences() {
    let h = gallery::boothby_vaisman(2).unwrap();
    for p in points(&h, 10) {
        let (g1, _) = h.at(&p, 1).unwrap();
        let gamma = fields::christoffels(&g1).unwrap();
        let g = |q: &[f64], i: usize, j: usize| h.at(q, 0).unwrap().0[i][j].value();
        let ginv = fields::values(&fields::inverse(&fields::truncate_mat(&g1, 0)).unwrap());
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    let mut want = 0.0;
                    for l in 0..4 {
                        let low = central(|q| g(q, l, j), &p, i) + central(|q| g(q, l, i), &p, j) - central(|q| g(q, i, j), &p, l);
                        want += 0.5 * ginv[(k, l)] * low;
                    }
                    assert!((gamma[k][i][j].value() - want).abs() < 1e-7);
                }
            }
        }
    }
}

#[test]
fn nijenhuis_matches_differences() {
    let h = gallery::twisted_almost_complex();
    let mut nonzero = 0.0f64;
    for p in points(&h, 10) {
        let (_, j1) = h.at(&p, 1).unwrap();
        let n = fields::nijenhuis(&j1, 1e-9).unwrap();
        let jv = |q: &[f64], r: usize, c: usize| h.at(q, 0).unwrap().1[r][c].value();
        let j0 = |r: usize, c: usize| jv(&p, r, c);
        let dj = |m: usize, r: usize, c: usize| central(|q| jv(q, r, c), &p, m);
        for k in 0..4 {
            for a in 0..4 {
                for b in 0..4 {
                    let mut want = 0.0;
                    for m in 0..4 {
                        want += j0(m, a) * dj(m, k, b) - j0(m, b) * dj(m, k, a) - j0(k, m) * (dj(a, m, b) - dj(b, m, a));
                    }
                    let got = n[k][a][b].value();
                    assert!((got - want).abs() < 1e-7, "N^{k}_{a}{b}: {got} vs {want}");
                    nonzero = nonzero.max(got.abs());
                }
            }
        }
    }
    assert!(nonzero > 0.1, "the rotated structure must be non-integrable");
}

#[test]
fn witness_lee_form_is_two_x2_dx1() {
    let h = gallery::non_lck_witness();
    for p in points(&h, 20) {
        let w = lee_form(&h, &p, 0).unwrap().omega.values();
        let want = [2.0 * p[2], 0.0, 0.0, 0.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{w:?} at {p:?}");
        }
    }
}

#[test]
fn boothby_lee_form_is_minus_dlog_r2() {
    for n in [2, 3] {
        let h = gallery::boothby_vaisman(n).unwrap();
        for p in points(&h, 20) {
            let r2: f64 = p.iter().map(|x| x * x).sum();
            let w = lee_form(&h, &p, 0).unwrap().omega.values();
            for (i, wi) in w.iter().enumerate() {
                assert!((wi + 2.0 * p[i] / r2).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn kahler_momentum_matches_differences() {
    let lambda = [-1.0, 1.0, 2.0];
    let k = gallery::standard_kahler(3).unwrap();
    let m = gallery::kahler_momentum(3, &lambda, k.chart.clone()).unwrap();
    for p in points(&k, 10) {
        let x: Vec<f64> = gallery::weighted_generator(&jets::seed(&p, 0), &lambda).iter().map(Jet::value).collect();
        let om = fundamental_form(&k, &p, 0).unwrap();
        for a in 0..6 {
            // (ι_X Ω)_a = Σ_b X^b Ω_ba
            let lhs: f64 = (0..6).map(|b| x[b] * om.component(&[b, a]).value()).sum();
            let rhs = central(|q| m.values(q).unwrap()[0], &p, a);
            assert!((lhs - rhs).abs() < 1e-8);
        }
    }
    assert!(verify_momentum(&k, &m, &points(&k, 20), 1e-12).unwrap().pass);
}

/// For a non-closed pairing `(Ω₀, θ = dh)` the cyclic sum of brackets is `−d^θΩ(X₁, X₂, X₃)`.
#[test]
fn jacobi_defect_sign() {
    let flat = gallery::standard_kahler(2).unwrap();
    let mut seen = 0.0f64;
    for p in points(&flat, 10) {
        let x = jets::seed(&p, 2);
        let h = (&x[0] * &x[3]).scale(0.8) + x[1].square() - (&x[2] * &x[1] * &x[0]).scale(0.5);
        let theta = Form::one_form((0..4).map(|i| h.deriv(i).unwrap()).collect());
        let big = fundamental_form(&flat, &p, 1).unwrap();
        let ctx = Twisted::new(big.clone(), theta.clone());
        let f = [
            (&x[0] * &x[1]) + x[2].scale(0.3),
            x[3].square() - &x[0],
            (&x[1] * &x[2]).scale(1.5) + x[3].scale(0.2),
        ];
        let outer = ctx.truncate(0);
        let term = |a: usize, b: usize, c: usize| outer.bracket(&ctx.bracket(&f[a], &f[b]).unwrap(), &f[c]).unwrap().value();
        let cyclic = term(0, 1, 2) + term(1, 2, 0) + term(2, 0, 1);

        let d_theta_big = big.d().unwrap().sub(&theta.truncate(0).wedge(&big.truncate(0)));
        let xs: Vec<Vec<Jet>> = f.iter().map(|fi| fields::truncate_vec(&outer.hamiltonian(fi).unwrap(), 0)).collect();
        let defect = d_theta_big.eval_on(&[&xs[0], &xs[1], &xs[2]]).value();
        assert!((cyclic + defect).abs() < 1e-10 * (1.0 + defect.abs()), "{cyclic} vs {defect}");
        seen = seen.max(defect.abs());
    }
    assert!(seen > 1e-2, "the defect must be visible for this test to mean anything");
}

#[test]
fn boothby_brackets_scale_under_rescaling() {
    // {e^α f₁, e^α f₂}' = e^α {f₁, f₂} with a constant α: pure scaling
    let h = gallery::boothby_vaisman(2).unwrap();
    let alpha = fields::FieldExpr::scalar(h.chart.clone(), |x| Ok(Jet::constant(x[0].dim(), x[0].order(), 0.7)));
    let hp = lck::conformal_rescale(&h, &alpha);
    let e = 0.7f64.exp();
    let f1 = fields::FieldExpr::scalar(h.chart.clone(), |x| Ok(&x[0] * &x[1]));
    let f2 = fields::FieldExpr::scalar(h.chart.clone(), |x| Ok(x[2].sin()));
    let g1 = fields::FieldExpr::scalar(h.chart.clone(), move |x| Ok((&x[0] * &x[1]).scale(e)));
    let g2 = fields::FieldExpr::scalar(h.chart.clone(), move |x| Ok(x[2].sin().scale(e)));
    let p = [0.4, -0.2, 0.9, 0.3];
    let b = lck::twisted_poisson(&h, &f1, &f2, &p, 0).unwrap().value();
    let bp = lck::twisted_poisson(&hp, &g1, &g2, &p, 0).unwrap().value();
    assert!((bp - e * b).abs() < 1e-12);
}
