//! Jet derivatives against central finite differences of the plain `f64` function.

use lckit::jets::{self, Jet};

fn f_jet(x: &[Jet]) -> Jet {
    let (a, b) = (&x[0], &x[1]);
    let t1 = (a * b).exp() * a.sin();
    let t2 = (b.square() + 1.0).recip().unwrap();
    let t3 = (a + 2.0).powf(1.5).unwrap();
    let t4 = (a.square() + b.square() + 0.5).ln().unwrap() * b.cos();
    &t1 * &t2 + t3 + t4 + b.atan2(&(a + 3.0)).unwrap()
}

fn f_num(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    (a * b).exp() * a.sin() / (b * b + 1.0) + (a + 2.0).powf(1.5) + (a * a + b * b + 0.5).ln() * b.cos() + b.atan2(a + 3.0)
}

fn shifted(p: &[f64], var: usize, h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[var] += h;
    q
}

/// Central difference of `f` along every entry of `dirs`, nested.
fn fd(f: &dyn Fn(&[f64]) -> f64, p: &[f64], dirs: &[usize], h: f64) -> f64 {
    match dirs.split_first() {
        None => f(p),
        Some((&v, rest)) => (fd(f, &shifted(p, v, h), rest, h) - fd(f, &shifted(p, v, -h), rest, h)) / (2.0 * h),
    }
}

fn multi(dirs: &[usize], dim: usize) -> Vec<u8> {
    let mut a = vec![0u8; dim];
    for &d in dirs {
        a[d] += 1;
    }
    a
}

const POINTS: [[f64; 2]; 4] = [[0.3, -0.4], [0.9, 0.2], [-0.5, 0.7], [0.05, 1.1]];

#[test]
fn value_matches() {
    for p in POINTS {
        assert!((f_jet(&jets::seed(&p, 0)).value() - f_num(&p)).abs() < 1e-14);
    }
}

#[test]
fn first_derivatives_match_differences() {
    for p in POINTS {
        let j = f_jet(&jets::seed(&p, 3));
        for v in 0..2 {
            let want = fd(&f_num, &p, &[v], 1e-5);
            assert!((j.partial(&multi(&[v], 2)) - want).abs() < 1e-8, "{p:?} d{v}");
        }
    }
}

#[test]
fn second_derivatives_match_differences() {
    for p in POINTS {
        let j = f_jet(&jets::seed(&p, 3));
        for dirs in [[0, 0], [0, 1], [1, 1]] {
            let want = fd(&f_num, &p, &dirs, 1e-4);
            assert!((j.partial(&multi(&dirs, 2)) - want).abs() < 1e-5, "{p:?} {dirs:?}");
        }
    }
}

#[test]
fn third_derivatives_match_differences() {
    for p in POINTS {
        let j = f_jet(&jets::seed(&p, 3));
        for dirs in [[0, 0, 0], [0, 0, 1], [0, 1, 1], [1, 1, 1]] {
            let want = fd(&f_num, &p, &dirs, 2e-3);
            let got = j.partial(&multi(&dirs, 2));
            assert!((got - want).abs() < 1e-3 * (1.0 + want.abs()), "{p:?} {dirs:?}: {got} vs {want}");
        }
    }
}

#[test]
fn deriv_lowers_order_and_commutes() {
    let j = f_jet(&jets::seed(&[0.3, -0.4], 3));
    let d01 = j.deriv(0).unwrap().deriv(1).unwrap();
    let d10 = j.deriv(1).unwrap().deriv(0).unwrap();
    assert_eq!(d01.order(), 1);
    for (a, b) in d01.coeffs().iter().zip(d10.coeffs()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((d01.value() - j.partial(&[1, 1])).abs() < 1e-12);
}

#[test]
fn frozen_partials() {
    // 30-digit mpmath evaluation and differentiation, then frozen
    let j = f_jet(&jets::seed(&[0.3, -0.4], 2));
    assert!((j.value() - 3.32847708520438).abs() < 1e-12, "{}", j.value());
    assert!((j.partial(&[1, 0]) - 3.6879676715841825).abs() < 1e-10, "{}", j.partial(&[1, 0]));
}

#[test]
fn domain_errors_are_reported() {
    let x = jets::seed(&[-1.0], 1);
    assert!(x[0].sqrt().is_err());
    assert!(x[0].ln().is_err());
    assert!(Jet::zero(1, 1).recip().is_err());
}
