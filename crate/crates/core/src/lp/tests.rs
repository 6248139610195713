use super::*;
use proptest::prelude::*;

fn textbook<T: Scalar>() -> LinearProgram<T> {
    let l = T::lit;
    let mut lp = LinearProgram::new();
    let x = lp.add_var(l(3.0), l(0.0), T::infinity());
    let y = lp.add_var(l(5.0), l(0.0), T::infinity());
    lp.add_row(vec![(x, l(1.0))], RowKind::Le, l(4.0));
    lp.add_row(vec![(y, l(2.0))], RowKind::Le, l(12.0));
    lp.add_row(vec![(x, l(3.0)), (y, l(2.0))], RowKind::Le, l(18.0));
    lp
}

#[test]
fn textbook_optimum() {
    let s = textbook::<f64>().solve().unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective - 36.0).abs() < 1e-9);
    assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    let s32 = textbook::<f32>().solve().unwrap();
    assert!((s32.objective - 36.0).abs() < 1e-3);
}

#[test]
fn equality_and_ge_rows() {
    // min x + y  s.t. x + y >= 2, x - y = 1  → x = 1.5, y = 0.5
    let mut lp = LinearProgram::<f64>::new();
    let x = lp.add_var(-1.0, 0.0, 10.0);
    let y = lp.add_var(-1.0, 0.0, 10.0);
    lp.add_row(vec![(x, 1.0), (y, 1.0)], RowKind::Ge, 2.0);
    lp.add_row(vec![(x, 1.0), (y, -1.0)], RowKind::Eq, 1.0);
    let s = lp.solve().unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective + 2.0).abs() < 1e-9);
    assert!(lp.max_violation(&s.x) < 1e-12);
}

#[test]
fn infeasible_and_unbounded() {
    let mut lp = LinearProgram::<f64>::new();
    let x = lp.add_var(1.0, 0.0, f64::INFINITY);
    lp.add_row(vec![(x, 1.0)], RowKind::Ge, 5.0);
    assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);
    lp.add_row(vec![(x, 1.0)], RowKind::Le, 4.0);
    assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);
}

#[test]
fn bounds_only() {
    let mut lp = LinearProgram::<f64>::new();
    lp.add_var(2.0, -1.0, 3.0);
    lp.add_var(-1.0, -1.0, 3.0);
    let s = lp.solve().unwrap();
    assert_eq!(s.x, vec![3.0, -1.0]);
    assert_eq!(s.objective, 7.0);
}

#[test]
fn invalid_input() {
    let mut lp = LinearProgram::<f64>::new();
    lp.add_var(1.0, f64::NEG_INFINITY, 1.0);
    assert_eq!(lp.solve().unwrap_err(), LpError::InvalidBounds(0));
    let mut lp = LinearProgram::<f64>::new();
    lp.add_var(1.0, 0.0, 1.0);
    lp.add_row(vec![(3, 1.0)], RowKind::Le, 1.0);
    assert!(matches!(lp.solve(), Err(LpError::UnknownVariable { .. })));
}

#[test]
fn degenerate_cycling_example_terminates() {
    // Beale's example, which cycles under textbook Dantzig pricing
    let mut lp = LinearProgram::<f64>::new();
    let v: Vec<usize> = [0.75, -150.0, 0.02, -6.0].iter().map(|&c| lp.add_var(c, 0.0, f64::INFINITY)).collect();
    lp.add_row(vec![(v[0], 0.25), (v[1], -60.0), (v[2], -0.04), (v[3], 9.0)], RowKind::Le, 0.0);
    lp.add_row(vec![(v[0], 0.5), (v[1], -90.0), (v[2], -0.02), (v[3], 3.0)], RowKind::Le, 0.0);
    lp.add_row(vec![(v[2], 1.0)], RowKind::Le, 1.0);
    let s = lp.solve().unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective - 0.05).abs() < 1e-9);
}

#[test]
fn warm_start_after_fixing() {
    let lp = textbook::<f64>();
    let s = lp.solve().unwrap();
    let warm = s.warm.unwrap();
    let mut fixed = lp.clone();
    fixed.set_bounds(0, 3.0, 3.0);
    let w = fixed.solve_warm(&warm).unwrap();
    let c = fixed.solve().unwrap();
    assert_eq!(w.status, LpStatus::Optimal);
    assert!((w.objective - c.objective).abs() < 1e-9);
    assert!((w.objective - 31.5).abs() < 1e-9);
    fixed.set_bounds(0, 5.0, 5.0);
    assert_eq!(fixed.solve_warm(&warm).unwrap().status, LpStatus::Infeasible);
    let mut other = lp.clone();
    other.rows[0].rhs = 3.0;
    assert_eq!(other.solve_warm(&warm).unwrap_err(), LpError::WarmMismatch);
}

/// Best vertex by enumerating every choice of `n` tight constraints.
fn vertex_oracle(lp: &LinearProgram<f64>) -> Option<f64> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &r.coefs {
            a[j] += v;
        }
        planes.push((a, r.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    let mut best: Option<f64> = None;
    let k = planes.len();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let mut a: Vec<f64> = idx.iter().flat_map(|&p| planes[p].0.clone()).collect();
        let mut b: Vec<f64> = idx.iter().map(|&p| planes[p].1).collect();
        if let Some(x) = super::simplex_test_support::solve_dense(&mut a, &mut b, n) {
            if lp.max_violation(&x) < 1e-9 {
                let v = lp.objective_value(&x);
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for q in i + 1..n {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
        }
    }
}

fn random_lp(n: usize, rows: &[(Vec<f64>, u8, f64)], obj: &[f64], x0: &[f64]) -> LinearProgram<f64> {
    let mut lp = LinearProgram::new();
    for j in 0..n {
        lp.add_var(obj[j], 0.0, 10.0);
    }
    for (a, kind, slack) in rows {
        let act: f64 = a.iter().zip(x0).map(|(p, q)| p * q).sum();
        let (kind, rhs) = match kind % 3 {
            0 => (RowKind::Le, act + slack),
            1 => (RowKind::Ge, act - slack),
            _ => (RowKind::Eq, act),
        };
        lp.add_row(a.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect(), kind, rhs);
    }
    lp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn matches_vertex_enumeration(
        n in 2usize..4,
        rows in proptest::collection::vec((proptest::collection::vec(-5i32..6, 3), 0u8..5, 0.0..3.0_f64), 1..5),
        obj in proptest::collection::vec(-5i32..6, 3),
        x0 in proptest::collection::vec(0.0..10.0_f64, 3),
    ) {
        let rows: Vec<_> = rows.into_iter().map(|(a, k, s)| (a[..n].iter().map(|&v| v as f64).collect(), k, s)).collect();
        let obj: Vec<f64> = obj.iter().map(|&v| v as f64).collect();
        let lp = random_lp(n, &rows, &obj, &x0[..n]);
        let s = lp.solve().unwrap();
        prop_assert_eq!(s.status, LpStatus::Optimal);
        prop_assert!(lp.max_violation(&s.x) < 1e-9);
        let oracle = vertex_oracle(&lp).expect("feasible by construction");
        prop_assert!((s.objective - oracle).abs() <= 1e-7 * oracle.abs().max(1.0), "{} vs {}", s.objective, oracle);
    }

    #[test]
    fn warm_equals_cold(
        rows in proptest::collection::vec((proptest::collection::vec(-5i32..6, 6), 0u8..5, 0.0..3.0_f64), 2..8),
        obj in proptest::collection::vec(-5i32..6, 6),
        x0 in proptest::collection::vec(0.0..10.0_f64, 6),
        fix in proptest::collection::vec((0usize..6, 0.0..10.0_f64), 1..4),
    ) {
        let rows: Vec<_> = rows.into_iter().map(|(a, k, s)| (a.iter().map(|&v| v as f64).collect(), k, s)).collect();
        let obj: Vec<f64> = obj.iter().map(|&v| v as f64).collect();
        let lp = random_lp(6, &rows, &obj, &x0);
        let root = lp.solve().unwrap();
        prop_assert_eq!(root.status, LpStatus::Optimal);
        let mut child = lp.clone();
        for (j, v) in fix {
            child.set_bounds(j, v, v);
        }
        let cold = child.solve().unwrap();
        let warm = child.solve_warm(root.warm.as_ref().unwrap()).unwrap();
        prop_assert_eq!(cold.status, warm.status);
        if cold.status == LpStatus::Optimal {
            prop_assert!((cold.objective - warm.objective).abs() <= 1e-7 * cold.objective.abs().max(1.0));
            prop_assert!(child.max_violation(&warm.x) < 1e-9);
        }
    }
}
