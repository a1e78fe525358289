mod common;

use common::{dense, dense_mul, max_abs_diff_window};
use qtqme::models::{
    idle_server, jackson, jackson_case, parse_model_spec, rwqp, rwqp_example, JacksonParams, ModelFamily,
};
use qtqme::{Error, QbdModel, QtMatrix};

fn assert_stochastic(m: &QbdModel) {
    let total = m.a_m1.add(&m.a_0).add(&m.a_1);
    for d in total.row_sums_defect(50) {
        assert!(d.abs() <= 1e-14, "defect {d}");
    }
    assert!((total.inf_norm() - 1.0).abs() <= 1e-14);
    for a in m.blocks() {
        let w = dense(a, 30);
        assert!(w.iter().flatten().all(|&x| x >= 0.0));
    }
    let s = |v: &[qtqme::LaurentSeries; 3]| v.iter().map(|x| x.value_at_one()).sum::<f64>();
    assert!((s(&m.interior) - 1.0).abs() <= 1e-14);
    assert!((s(&m.boundary) - 1.0).abs() <= 1e-14);
}

#[test]
fn every_jackson_case_is_stochastic() {
    for k in 1..=10 {
        let p = JacksonParams::case(k).unwrap();
        assert_stochastic(&jackson(&p, false).unwrap());
        assert_stochastic(&jackson(&p, true).unwrap());
    }
}

#[test]
fn jackson_case_one_stencil() {
    let m = jackson(&JacksonParams::case(1).unwrap(), false).unwrap();
    let alpha = 1.0 / 4.5;
    assert!((m.interior[0].value_at_one() - 2.0 / 4.5).abs() < 1e-15);
    assert!((m.interior[2].value_at_one() - 1.5 / 4.5).abs() < 1e-15);
    assert!((m.a_m1.inf_norm() - 0.444_444_444_444_444_4).abs() < 1e-15);
    // A0 leading 2x2: [[1 - alpha(l1+l2+mu2), alpha l1], [(1-p) mu1 alpha, 1 - alpha sum]]
    let w = m.a_0.window(2);
    let want = [[1.0 - alpha * 3.0, alpha], [0.0, 1.0 - alpha * 4.5]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((w[(i, j)] - want[i][j]).abs() < 1e-15);
        }
    }
    // A1 leading 2x2: [[alpha l2, 0], [alpha p mu1, alpha l2]] with l2 = 0
    let w1 = m.a_1.window(2);
    assert_eq!(w1[(0, 0)], 0.0);
    assert!((w1[(1, 0)] - 1.5 * alpha).abs() < 1e-15);
}

#[test]
fn drift_reports() {
    let r7 = jackson(&JacksonParams::case(7).unwrap(), false).unwrap().drift_check();
    assert!(r7.interior_ok && r7.boundary_ok && !r7.flipped_recommended);
    for k in [2, 6, 10] {
        let p = JacksonParams::case(k).unwrap();
        let plain = jackson(&p, false).unwrap().drift_check();
        assert!(!plain.holds(), "case {k}");
        assert!(plain.flipped_recommended, "case {k}");
        assert!(jackson(&p, true).unwrap().drift_check().holds(), "case {k}");
    }
    for k in [1, 3, 4, 5, 7, 8, 9] {
        assert!(jackson_case(k).unwrap().drift_check().holds(), "case {k}");
    }
}

#[test]
fn case_seven_drift_values() {
    let m = jackson_case(7).unwrap();
    assert!((m.interior[0].value_at_one() - 1.0 / 3.0).abs() < 1e-15);
    assert!((m.interior[2].value_at_one() - 0.3).abs() < 1e-15);
    assert!((m.boundary[2].value_at_one() - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn flip_is_an_involution() {
    for k in 1..=10 {
        let m = jackson(&JacksonParams::case(k).unwrap(), false).unwrap();
        let back = m.flip().unwrap().flip().unwrap();
        assert_eq!(back.interior, m.interior);
        assert_eq!(back.boundary, m.boundary);
    }
    assert!(idle_server(0.01, 2.9, 0.03, 2.0).unwrap().flip().is_err());
}

#[test]
fn idle_server_model() {
    let m = idle_server(0.01, 2.9, 0.03, 2.0).unwrap();
    assert_stochastic(&m);
    let total = m.a_m1.add(&m.a_0).add(&m.a_1);
    assert!(total.row_sums_defect(1)[0].abs() < 1e-15);
    // boundary row: doubled service balanced by the e1 e1^T term
    let alpha = 1.0 / (0.01 + 2.9 + 0.03 + 2.0);
    assert!((m.a_m1.entry(0, 0) - 2.0 * alpha * 0.03).abs() < 1e-16);
    assert!((m.a_m1.entry(1, 1) - alpha * 0.03).abs() < 1e-16);
    assert!((m.a_0.entry(0, 0) - (1.0 - alpha * (2.91 + 0.06))).abs() < 1e-15);
    assert!(m.drift_check().holds());
    assert!(matches!(idle_server(1.0, 2.0, 1.0, 1.0), Err(Error::ErgodicityViolation { .. })));
    // 2 mu1 > mu1 + mu2 forces the boundary rate into alpha
    let fast = idle_server(0.1, 0.1, 3.0, 1.0).unwrap();
    assert_stochastic(&fast);
    assert_eq!(fast.a_0.entry(0, 0), 0.0f64.max(fast.a_0.entry(0, 0)));
    assert!(fast.a_0.entry(0, 0).abs() < 1e-15);
}

#[test]
fn quarter_plane_example() {
    let m = rwqp_example();
    assert_stochastic(&m);
    let r = m.drift_check();
    assert!(r.interior_ok && !r.boundary_ok);
    assert!((m.interior[0].value_at_one() - 5.0 / 9.0).abs() < 1e-15);
    assert!((m.interior[2].value_at_one() - 2.0 / 9.0).abs() < 1e-15);
    // drift fails only in the first row: compare row sums of A_-1 and A_1
    let down = m.a_m1.row_sums(10);
    let up = m.a_1.row_sums(10);
    assert!(down[0] <= up[0]);
    assert!(down.iter().zip(&up).skip(1).all(|(d, u)| d > u));
}

#[test]
fn quarter_plane_uniform_and_drifting() {
    let h = [[1.0 / 9.0; 3]; 3];
    let y = [[1.0 / 6.0; 2]; 3];
    let m = rwqp(h, y).unwrap();
    assert_stochastic(&m);
    assert!((m.interior[0].value_at_one() - m.interior[2].value_at_one()).abs() < 1e-16);
    let h = [[0.05, 0.05, 0.05], [0.1, 0.2, 0.1], [0.15, 0.15, 0.15]];
    let y = [[0.1, 0.1], [0.2, 0.2], [0.2, 0.2]];
    assert!(rwqp(h, y).unwrap().drift_check().holds());
    assert!(rwqp([[0.5; 3]; 3], y).is_err());
}

#[test]
fn bad_parameters_are_rejected() {
    let mut p = JacksonParams::case(7).unwrap();
    p.p = 1.5;
    assert!(matches!(jackson(&p, false), Err(Error::InvalidParameter(_))));
    p.p = 0.4;
    p.mu1 = -1.0;
    assert!(matches!(jackson(&p, false), Err(Error::InvalidParameter(_))));
    assert!(JacksonParams::case(11).is_err());
}

#[test]
fn case_seven_block_square_matches_dense_product() {
    let m = jackson_case(7).unwrap();
    let sq = m.a_1.mul(&m.a_1);
    let n = 2000;
    let d = dense(&m.a_1, n);
    let want = dense_mul(&d, &d);
    assert!(max_abs_diff_window(&dense(&sq, 20), &want, 20) < 1e-14);
    let _ = QtMatrix::identity();
}

#[test]
fn model_spec_parsing() {
    let m = parse_model_spec("family=jackson\ncase=2\n").unwrap();
    assert!(matches!(m.family, ModelFamily::Jackson { flipped: true, .. }));
    let m = parse_model_spec("family = jackson\ncase = 2\nflipped = false # as printed\n").unwrap();
    assert!(matches!(m.family, ModelFamily::Jackson { flipped: false, .. }));
    let m = parse_model_spec("family=idle\nlambda1=0.01\nlambda2=2.9\nmu1=0.03\nmu2=2.0").unwrap();
    assert_eq!(m, idle_server(0.01, 2.9, 0.03, 2.0).unwrap());
    let text = "family=rwqp\nh_up=1/9 0 1/9\nh_mid=2/9 0 0\nh_down=2/9 2/9 1/9\ny_up=1/3 1/3\ny_mid=0 1/3\ny_down=0 0\n";
    assert_eq!(parse_model_spec(text).unwrap().interior, rwqp_example().interior);
    assert!(matches!(parse_model_spec("family=idle\nlambda1=1\nlambda2=1\nmu1=2\nmu2=2\nrho=3"), Err(Error::Parse(_))));
    assert!(parse_model_spec("family=jackson\ncase=7\ncase=7").is_err());
    assert!(parse_model_spec("family=nope").is_err());
    assert!(parse_model_spec("lambda1=1").is_err());
}
