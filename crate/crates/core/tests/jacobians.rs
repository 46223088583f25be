mod common;

#[test]
fn analytic_jacobians_agree_with_finite_differences() {
    let v = common::jacobian_validation().unwrap();
    assert!(v.pass, "{}", v.detail);
}
