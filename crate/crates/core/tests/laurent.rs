mod common;

use common::{random_series, Lcg};
use num_complex::Complex64;
use qtqme::laurent::interpolate_roots_of_unity;
use qtqme::{Error, LaurentSeries};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[test]
fn eval_at_one_and_constants() {
    let f = LaurentSeries::from_terms(&[(-1, 1.0), (1, 1.0)]);
    assert!((f.eval(c(1.0)) - c(2.0)).norm() < 1e-15);
    let k = LaurentSeries::constant(0.7);
    let z = Complex64::from_polar(1.0, 0.9);
    assert!((k.eval(z) - c(0.7)).norm() < 1e-15);
}

#[test]
fn eval_matches_direct_sum() {
    let mut rng = Lcg(3);
    for _ in 0..50 {
        let f = random_series(&mut rng, 6, 6);
        let z = Complex64::from_polar(1.0, 6.0 * rng.next());
        let want: Complex64 = f.terms().map(|(e, x)| z.powi(e as i32) * x).sum();
        assert!((f.eval(z) - want).norm() < 1e-13);
    }
}

#[test]
#[should_panic]
fn eval_off_circle_panics() {
    LaurentSeries::constant(1.0).eval(c(1.1));
}

#[test]
fn mul_identities() {
    let mut rng = Lcg(5);
    let f = random_series(&mut rng, 4, 4);
    assert_eq!(LaurentSeries::constant(1.0).mul(&f), f);
    let p = LaurentSeries::monomial(-1, 1.0).mul(&LaurentSeries::monomial(1, 1.0));
    assert_eq!(p, LaurentSeries::constant(1.0));
}

#[test]
fn mul_is_convolution_and_submultiplicative() {
    let mut rng = Lcg(11);
    for _ in 0..40 {
        let f = random_series(&mut rng, 80, 80);
        let g = random_series(&mut rng, 80, 80);
        let h = f.mul(&g);
        for e in h.lo()..=h.hi() {
            let want: f64 = f.terms().map(|(i, x)| x * g.coeff(e - i)).sum();
            assert!((h.coeff(e) - want).abs() < 1e-12);
        }
        assert!(h.wiener_norm() <= f.wiener_norm() * g.wiener_norm() * (1.0 + 1e-12));
    }
}

#[test]
fn add_sub_cancel() {
    let mut rng = Lcg(13);
    let f = random_series(&mut rng, 5, 5);
    assert!(f.sub(&f).is_zero());
    let g = random_series(&mut rng, 5, 5);
    let back = f.add(&g).sub(&g);
    for e in -6..=6 {
        assert!((back.coeff(e) - f.coeff(e)).abs() < 1e-15);
    }
}

#[test]
fn derivatives() {
    let z2 = LaurentSeries::monomial(2, 1.0);
    assert_eq!(z2.derivative(1).value_at_one(), 2.0);
    assert_eq!(z2.derivative(2).value_at_one(), 2.0);
    let mut rng = Lcg(17);
    for _ in 0..20 {
        let g = random_series(&mut rng, 10, 10);
        let direct: f64 = g.terms().map(|(i, x)| (i * (i - 1)) as f64 * x).sum();
        assert!((g.derivative(2).value_at_one() - direct).abs() < 1e-12);
        // product rule
        let f = random_series(&mut rng, 10, 10);
        let lhs = f.mul(&g).derivative(1);
        let rhs = f.derivative(1).mul(&g).add(&f.mul(&g.derivative(1)));
        for e in lhs.lo().min(rhs.lo())..=lhs.hi().max(rhs.hi()) {
            assert!((lhs.coeff(e) - rhs.coeff(e)).abs() < 1e-10);
        }
    }
}

#[test]
fn interpolation_two_points() {
    let (v1, vm1) = (0.3, -0.9);
    let g = interpolate_roots_of_unity(&[c(v1), c(vm1)]).unwrap();
    assert!((g.coeff(0) - (v1 + vm1) / 2.0).abs() < 1e-15);
    assert!((g.coeff(1) - (v1 - vm1) / 2.0).abs() < 1e-15);
}

#[test]
fn interpolation_constant_and_bad_size() {
    let g = interpolate_roots_of_unity(&vec![c(0.25); 16]).unwrap();
    assert_eq!(g.lo(), 0);
    assert_eq!(g.len(), 1);
    assert!((g.coeff(0) - 0.25).abs() < 1e-15);
    assert_eq!(interpolate_roots_of_unity(&vec![c(1.0); 12]), Err(Error::SizeNotPowerOfTwo(12)));
    assert_eq!(interpolate_roots_of_unity(&[c(1.0)]), Err(Error::SizeNotPowerOfTwo(1)));
}

#[test]
fn sample_interpolate_round_trip() {
    let mut rng = Lcg(19);
    for n in [4usize, 16, 64, 512] {
        let f = random_series(&mut rng, n as i64 - 1, n as i64);
        let back = interpolate_roots_of_unity(&f.sample_roots_of_unity(2 * n)).unwrap();
        for e in -(n as i64)..=n as i64 + 1 {
            assert!((back.coeff(e) - f.coeff(e)).abs() < 1e-13, "n={n} e={e}");
        }
    }
}

#[test]
fn nonnegative_series_value_at_one_is_wiener_norm() {
    let f = LaurentSeries::new(-3, vec![0.1, 0.0, 0.4, 0.2, 0.3]);
    assert!((f.value_at_one() - f.wiener_norm()).abs() < 1e-15);
}

#[test]
fn truncate_tails_respects_budget() {
    let mut f = LaurentSeries::new(-2, vec![1e-17, 0.5, 1.0, 0.5, 3e-17]);
    let dropped = f.truncate_tails(1e-16);
    assert!((dropped - 4e-17).abs() < 1e-30);
    assert_eq!((f.lo(), f.hi()), (-1, 1));
}

#[test]
fn text_round_trip() {
    let f = LaurentSeries::new(-2, vec![0.1, 1.0 / 3.0, 2e-20]);
    assert_eq!(LaurentSeries::from_text(&f.to_text()).unwrap(), f);
    assert!(LaurentSeries::from_text("0 2\n1.0\n").is_err());
}

#[test]
fn trim_below_drops_small_outer_coefficients() {
    let mut s = LaurentSeries::new(-3, vec![1e-18, -2e-18, 0.5, 1e-20, 0.5, 3e-18]);
    let dropped = s.trim_below(1e-16);
    assert_eq!((s.lo(), s.hi()), (-1, 1));
    assert_eq!(s.coeff(0), 1e-20);
    assert!((dropped - 6e-18).abs() < 1e-30);
    let mut z = LaurentSeries::new(0, vec![1e-20]);
    z.trim_below(1e-16);
    assert_eq!(z.len(), 0);
}
