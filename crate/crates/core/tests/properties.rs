use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use proptest::prelude::*;

use ptspec::basis::gauss_hermite;
use ptspec::expr::{detect_parity, BinOp, Expr, Func, Parity, Reflection};
use ptspec::io::{format_matrix, parse_matrix};
use ptspec::linalg::{eig_complex, eig_symmetric, op_norm, solve, CMat, RMat};
use ptspec::sweep::conjugation_distance;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![Just(Expr::Var(0)), (0.1f64..3.0).prop_map(Expr::Const)]
}

fn expr_1d() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        let b = |op: BinOp, a: Expr, c: Expr| Expr::Binary(op, Box::new(a), Box::new(c));
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| b(BinOp::Add, a, c)),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| b(BinOp::Sub, a, c)),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| b(BinOp::Mul, a, c)),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| {
                let denom = b(BinOp::Add, Expr::Const(1.0), b(BinOp::Pow, c, Expr::Const(2.0)));
                b(BinOp::Div, a, denom)
            }),
            (inner.clone(), 0u32..4).prop_map(move |(a, k)| b(BinOp::Pow, a, Expr::Const(k as f64))),
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner, prop_oneof![Just(Func::Tanh), Just(Func::Sin), Just(Func::Cos)])
                .prop_map(|(a, f)| Expr::Call(f, vec![a])),
        ]
    })
}

fn reflect(e: &Expr) -> Expr {
    match e {
        Expr::Var(i) => Expr::Neg(Box::new(Expr::Var(*i))),
        Expr::Const(v) => Expr::Const(*v),
        Expr::Neg(a) => Expr::Neg(Box::new(reflect(a))),
        Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(reflect(a)), Box::new(reflect(b))),
        Expr::Call(f, args) => Expr::Call(*f, args.iter().map(reflect).collect()),
    }
}

fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

fn matrix(n: usize, data: &[f64]) -> RMat {
    RMat::from_iterator(n, n, data.iter().cloned())
}

fn sized_data(max: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2..=max).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, n * n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_reparse_to_the_same_function(e in expr_1d(), x in -3.0f64..3.0) {
        let printed = e.to_string();
        let back = Expr::parse(&printed, 1).unwrap();
        prop_assert!(close(e.evaluate(&[x]).unwrap(), back.evaluate(&[x]).unwrap()), "{printed}");
    }

    #[test]
    fn antisymmetrized_expression_is_odd(f in expr_1d()) {
        let g = Expr::Binary(BinOp::Sub, Box::new(f.clone()), Box::new(reflect(&f)));
        let p = detect_parity(&g, &Reflection::about_origin(&[true]), 64, 7);
        prop_assert_ne!(p, Parity::Neither);
        let probe = g.evaluate(&[0.7]).unwrap();
        if probe.abs() > 1e-9 {
            prop_assert_eq!(p, Parity::Odd);
        }
    }

    #[test]
    fn symmetrized_expression_is_even(f in expr_1d()) {
        let g = Expr::Binary(BinOp::Add, Box::new(f.clone()), Box::new(reflect(&f)));
        prop_assert_eq!(detect_parity(&g, &Reflection::about_origin(&[true]), 64, 11), Parity::Even);
    }

    #[test]
    fn gauss_hermite_is_exact_to_degree_2m_minus_1(m in 2usize..=40, frac in 0.0f64..1.0) {
        let p = ((2 * m - 1) as f64 * frac).round() as i32;
        let q = gauss_hermite(m).unwrap();
        let got = q.integrate(|x| x.powi(p));
        let mut exact = std::f64::consts::PI.sqrt();
        for k in (1..p).step_by(2) {
            exact *= k as f64 / 2.0;
        }
        if p % 2 == 1 {
            prop_assert!(got.abs() <= 1e-11 * exact, "degree {p}: {got}");
        } else {
            prop_assert!((got - exact).abs() <= 1e-11 * exact, "degree {p}: {got} vs {exact}");
        }
    }

    #[test]
    fn symmetric_eigenpairs_have_small_residuals((n, data) in sized_data(40)) {
        let a = matrix(n, &data);
        let a = (&a + a.transpose()) * 0.5;
        let e = eig_symmetric(&a).unwrap();
        let norm = e.norm().max(1e-300);
        for k in 0..n {
            let v = e.eigenvectors.column(k);
            let r = (&a * v - v * e.eigenvalues[k]).norm();
            prop_assert!(r <= 1e-12 * norm * (n as f64), "residual {r}");
        }
        let q = &e.eigenvectors;
        prop_assert!((q.transpose() * q - RMat::identity(n, n)).norm() <= 1e-10);
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn planted_complex_spectrum_is_recovered((n, data) in sized_data(30), shift in prop::collection::vec(-1.0f64..1.0, 60)) {
        let s = CMat::identity(n, n) + matrix(n, &data).map(|v| C::new(0.3 * v / (n as f64).sqrt(), 0.0));
        let planted: Vec<C> = (0..n).map(|k| C::new(k as f64 + 0.3 * shift[k], shift[30 + k % 30])).collect();
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(planted.clone()));
        let a = &s * d * s.clone().try_inverse().unwrap();
        let dec = eig_complex(&a).unwrap();
        let mut remaining = planted.clone();
        for z in &dec.eigenvalues {
            let (i, dist) = remaining
                .iter()
                .enumerate()
                .map(|(i, w)| (i, (w - z).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            prop_assert!(dist <= 1e-8, "eigenvalue {z} is {dist} from the planted spectrum");
            remaining.swap_remove(i);
        }
        for (k, r) in dec.residuals.iter().enumerate() {
            prop_assert!(*r <= 1e-9 * dec.matrix_norm, "residual {r} for eigenvalue {k}");
        }
    }

    #[test]
    fn solve_recovers_right_hand_sides((n, data) in sized_data(60), rhs in prop::collection::vec(-1.0f64..1.0, 180)) {
        let a = matrix(n, &data).map(|v| C::new(v, 0.5 * v * v)) + CMat::identity(n, n) * C::new(2.0, 0.0);
        let b = CMat::from_fn(n, 3, |i, j| C::new(rhs[i + 60 * j], rhs[(i * 7 + j) % 180]));
        let x = solve(&a, &b).unwrap();
        let r = (&a * &x - &b).norm();
        prop_assert!(r <= 1e-10 * a.norm() * x.norm(), "residual {r}");
    }

    #[test]
    fn power_iteration_norm_matches_gram_spectrum((n, data) in sized_data(40)) {
        let a = matrix(n, &data);
        let gram = a.transpose() * &a;
        let top = eig_symmetric(&gram).unwrap().eigenvalues[n - 1].max(0.0).sqrt();
        let est = op_norm(&a.map(|v| C::new(v, 0.0))).unwrap();
        prop_assert!((est - top).abs() <= 1e-8 * top.max(1.0), "{est} vs {top}");
    }

    #[test]
    fn matrix_files_round_trip_bit_exactly(rows in 1usize..8, cols in 1usize..8, bits in prop::collection::vec(any::<u64>(), 128)) {
        let a = CMat::from_fn(rows, cols, |i, j| {
            let f = |b: u64| { let v = f64::from_bits(b); if v.is_finite() { v } else { 0.0 } };
            C::new(f(bits[2 * (i * cols + j)]), f(bits[2 * (i * cols + j) + 1]))
        });
        let b = parse_matrix(&format_matrix(&a)).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
            prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn pt_symmetric_spectra_are_conjugation_closed(
        (n, data) in (2usize..=15).prop_flat_map(|n| (Just(2 * n), prop::collection::vec(-1.0f64..1.0, 4 * n * n))),
        eps in -2.0f64..2.0,
    ) {
        let m = matrix(n, &data);
        let s = (&m + m.transpose()) * 0.5;
        let flip = RMat::from_fn(n, n, |i, j| if i + j == n - 1 { 1.0 } else { 0.0 });
        let h0 = &s + &flip * &s * &flip;
        let w = &s - &flip * &s * &flip;
        let h = DMatrix::from_fn(n, n, |i, j| C::new(h0[(i, j)], eps * w[(i, j)]));
        let spectrum = eig_complex(&h).unwrap().eigenvalues;
        prop_assert!(conjugation_distance(&spectrum) <= 1e-8 * (1.0 + h.norm()));
    }
}
