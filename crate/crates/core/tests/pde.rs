use fracspec::pde::{residual, solve_1d, solve_nd, PdeProblem};
use std::f64::consts::FRAC_1_SQRT_2;

#[test]
fn one_dimension_desk_scale() {
    let p = PdeProblem::new("0.97", 5, "2", 80, 16, 1).unwrap().with_b(FRAC_1_SQRT_2).with_digits(80);
    let (asm, sol) = solve_1d(&p).unwrap();
    assert!(sol.error <= 1e-8, "{:e}", sol.error);
    assert!(residual(&asm, &sol.u).unwrap() <= 1e-8 * asm.h.max_abs());
    let u0 = &asm.lifting.f;
    for k in 0..16 {
        assert_eq!(sol.u.get(&[80, k]), u0.get(&[80, k]));
    }
}

#[test]
fn unit_scale_is_limited_by_the_spatial_interpolant() {
    // with b = 1 the Gaussian is not in the span of the 16 weighted functions
    let p = PdeProblem::new("0.97", 5, "2", 80, 16, 1).unwrap().with_digits(80);
    let (asm, sol) = solve_1d(&p).unwrap();
    assert!(sol.error > 1e-5 && sol.error < 1e-3, "{:e}", sol.error);
    assert!(residual(&asm, &sol.u).unwrap() <= 1e-8 * asm.h.max_abs());
}

#[test]
fn three_dimensions_desk_scale() {
    let p = PdeProblem::new("0.97", 5, "2", 40, 10, 3).unwrap().with_b(FRAC_1_SQRT_2).with_digits(60);
    let (asm, sol) = solve_nd(&p).unwrap();
    assert!(sol.error <= 1e-8, "{:e}", sol.error);
    assert!(residual(&asm, &sol.u).unwrap() <= 1e-8 * asm.h.max_abs());
}

#[test]
fn tensor_form_reproduces_the_matrix_form() {
    let p = PdeProblem::new("0.97", 5, "2", 80, 16, 1).unwrap().with_digits(80);
    let (_, a) = solve_1d(&p).unwrap();
    let (_, b) = solve_nd(&p).unwrap();
    assert!(a.u.sub(&b.u).unwrap().max_abs() <= 1e-12);
}

#[test]
#[ignore = "long run"]
fn one_dimension_large_frequency() {
    let p = PdeProblem::new("0.97", 330, "2", 400, 16, 1).unwrap().with_b(FRAC_1_SQRT_2).with_digits(400);
    let (_, sol) = solve_1d(&p).unwrap();
    println!("max error {:e}", sol.error);
    assert!(sol.error <= 6.1766e-11);
}
