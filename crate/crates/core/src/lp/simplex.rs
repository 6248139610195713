use std::sync::Arc;

use rayon::prelude::*;

use super::{LinearProgram, LpSolution, LpStatus, RowKind, WarmStart};
use crate::Scalar;

/// Rows times nonzeros above which a pivot updates rows in parallel.
const PAR_PIVOT_WORK: usize = 1 << 18;
/// Consecutive degenerate steps before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 30;
/// Basis size up to which the final basic solution is recomputed by LU.
const REFINE_MAX_ROWS: usize = 3000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
}

/// Scaled constraint data shared by every tableau derived from one program.
#[derive(Debug)]
struct Shape<T> {
    /// Sparse columns of the scaled equality system, including logicals.
    cols: Vec<Vec<(usize, T)>>,
    rhs: Vec<T>,
    fingerprint: f64,
}

#[derive(Clone, Debug)]
pub struct Tableau<T> {
    m: usize,
    n_struct: usize,
    ncols: usize,
    /// B⁻¹A, row-major.
    t: Vec<T>,
    xb: Vec<T>,
    basis: Vec<usize>,
    state: Vec<State>,
    lo: Vec<T>,
    up: Vec<T>,
    d: Vec<T>,
    shape: Arc<Shape<T>>,
    status: LpStatus,
    iterations: usize,
    max_iterations: usize,
    ftol: T,
}

fn fingerprint<T: Scalar>(lp: &LinearProgram<T>) -> f64 {
    let mut h = 0.0f64;
    for (j, c) in lp.objective.iter().enumerate() {
        h += (j as f64 + 1.0).sqrt() * c.to_f64().unwrap_or(0.0);
    }
    for (i, r) in lp.rows.iter().enumerate() {
        let k = match r.kind {
            RowKind::Le => 1.0,
            RowKind::Ge => 2.0,
            RowKind::Eq => 3.0,
        };
        h += (i as f64 + 2.0).ln() * (k + r.rhs.to_f64().unwrap_or(0.0));
        for &(j, a) in &r.coefs {
            h += ((i * 31 + j) as f64 + 1.0).sqrt().fract() * a.to_f64().unwrap_or(0.0);
        }
    }
    h
}

impl<T: Scalar> Tableau<T> {
    pub(crate) fn bytes(&self) -> usize {
        self.t.len() * std::mem::size_of::<T>()
    }

    pub(crate) fn matches(&self, lp: &LinearProgram<T>) -> bool {
        self.n_struct == lp.num_vars() && self.m == lp.rows.len() && self.shape.fingerprint == fingerprint(lp)
    }

    fn value(&self, j: usize) -> T {
        match self.state[j] {
            State::Upper => self.up[j],
            _ => self.lo[j],
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.up[j] - self.lo[j] <= T::zero()
    }

    fn at(&self, i: usize, j: usize) -> T {
        self.t[i * self.ncols + j]
    }

    /// Builds the starting tableau and runs both phases.
    pub(crate) fn cold(lp: &LinearProgram<T>) -> Self {
        let m = lp.rows.len();
        let n = lp.num_vars();
        let ptol = T::pivot_tol();

        // row equilibration
        let scale: Vec<T> = lp
            .rows
            .iter()
            .map(|r| {
                let big = r.coefs.iter().fold(T::zero(), |b, &(_, a)| b.max(a.abs()));
                if big > T::zero() {
                    T::one() / big
                } else {
                    T::one()
                }
            })
            .collect();
        let cmax = lp.objective.iter().fold(T::zero(), |b, c| b.max(c.abs()));
        let cscale = if cmax > T::zero() { T::one() / cmax } else { T::one() };

        let mut cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (i, r) in lp.rows.iter().enumerate() {
            for &(j, a) in &r.coefs {
                if a != T::zero() {
                    cols[j].push((i, a * scale[i]));
                }
            }
        }
        // merge duplicate entries
        for c in &mut cols {
            c.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, T)> = Vec::with_capacity(c.len());
            for &(i, a) in c.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += a,
                    _ => merged.push((i, a)),
                }
            }
            *c = merged;
        }
        let rhs: Vec<T> = lp.rows.iter().zip(&scale).map(|(r, s)| r.rhs * *s).collect();
        let bnorm = rhs.iter().fold(T::zero(), |b, v| b.max(v.abs()));
        let ftol = T::feas_tol() * (T::one() + bnorm);

        let mut lo: Vec<T> = lp.lower.clone();
        let mut up: Vec<T> = lp.upper.clone();
        let mut cost: Vec<T> = lp.objective.iter().map(|&c| c * cscale).collect();

        // residual with structurals at their lower bounds
        let mut resid = rhs.clone();
        for (j, c) in cols.iter().enumerate() {
            for &(i, a) in c {
                resid[i] -= a * lo[j];
            }
        }

        let mut basis = vec![usize::MAX; m];
        let mut basic_coef = vec![T::one(); m];
        for (i, r) in lp.rows.iter().enumerate() {
            let sign = match r.kind {
                RowKind::Le => T::one(),
                RowKind::Ge => -T::one(),
                RowKind::Eq => continue,
            };
            let j = cols.len();
            cols.push(vec![(i, sign)]);
            lo.push(T::zero());
            up.push(T::infinity());
            cost.push(T::zero());
            if resid[i] * sign >= T::zero() {
                basis[i] = j;
                basic_coef[i] = sign;
            }
        }
        let art_start = cols.len();
        for i in 0..m {
            if basis[i] == usize::MAX {
                let sign = if resid[i] >= T::zero() { T::one() } else { -T::one() };
                basis[i] = cols.len();
                basic_coef[i] = sign;
                cols.push(vec![(i, sign)]);
                lo.push(T::zero());
                up.push(T::infinity());
                cost.push(T::zero());
            }
        }
        let ncols = cols.len();
        let mut t = vec![T::zero(); m * ncols];
        for (j, c) in cols.iter().enumerate() {
            for &(i, a) in c {
                t[i * ncols + j] = a / basic_coef[i];
            }
        }
        let mut state = vec![State::Lower; ncols];
        let mut xb = vec![T::zero(); m];
        for i in 0..m {
            state[basis[i]] = State::Basic;
            xb[i] = resid[i] / basic_coef[i];
        }

        let mut tab = Tableau {
            m,
            n_struct: n,
            ncols,
            t,
            xb,
            basis,
            state,
            lo,
            up,
            d: vec![T::zero(); ncols],
            shape: Arc::new(Shape { cols, rhs, fingerprint: fingerprint(lp) }),
            status: LpStatus::Optimal,
            iterations: 0,
            max_iterations: 50 * (m + ncols) + 1000,
            ftol,
        };

        if art_start < ncols {
            let phase1: Vec<T> = (0..ncols).map(|j| if j >= art_start { -T::one() } else { T::zero() }).collect();
            tab.reset_reduced_costs(&phase1);
            match tab.primal() {
                LpStatus::Optimal => {}
                LpStatus::IterationLimit => {
                    tab.status = LpStatus::IterationLimit;
                    return tab;
                }
                // phase 1 is bounded below by zero
                other => {
                    tab.status = other;
                    return tab;
                }
            }
            let infeas: T = (0..m).filter(|&i| tab.basis[i] >= art_start).map(|i| tab.xb[i].abs()).sum();
            if infeas > tab.ftol {
                tab.status = LpStatus::Infeasible;
                return tab;
            }
            // pivot remaining artificials out where possible
            for r in 0..m {
                if tab.basis[r] < art_start {
                    continue;
                }
                let mut best = None;
                let mut best_abs = ptol;
                for j in 0..art_start {
                    if tab.state[j] != State::Basic && tab.at(r, j).abs() > best_abs {
                        best_abs = tab.at(r, j).abs();
                        best = Some(j);
                    }
                }
                if let Some(j) = best {
                    let leaving = tab.basis[r];
                    tab.move_and_pivot(r, j, T::zero(), State::Lower);
                    tab.state[leaving] = State::Lower;
                }
            }
            tab.drop_artificials(art_start);
        }
        cost.truncate(tab.ncols);
        cost.resize(tab.ncols, T::zero());
        tab.reset_reduced_costs(&cost);
        tab.status = tab.primal();
        tab
    }

    /// Removes nonbasic artificial columns; basic ones stay, fixed at zero.
    fn drop_artificials(&mut self, art_start: usize) {
        let keep: Vec<usize> = (0..self.ncols).filter(|&j| j < art_start || self.state[j] == State::Basic).collect();
        let mut remap = vec![usize::MAX; self.ncols];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let nc = keep.len();
        let mut t = vec![T::zero(); self.m * nc];
        for i in 0..self.m {
            for (new, &old) in keep.iter().enumerate() {
                t[i * nc + new] = self.t[i * self.ncols + old];
            }
        }
        self.t = t;
        for b in &mut self.basis {
            *b = remap[*b];
        }
        let pick = |v: &Vec<T>| keep.iter().map(|&j| v[j]).collect::<Vec<T>>();
        self.lo = pick(&self.lo);
        self.up = pick(&self.up);
        for j in art_start..nc {
            self.lo[j] = T::zero();
            self.up[j] = T::zero();
        }
        self.state = keep.iter().map(|&j| self.state[j]).collect();
        let shape = Arc::get_mut(&mut self.shape).expect("fresh shape");
        shape.cols = keep.iter().map(|&j| std::mem::take(&mut shape.cols[j])).collect();
        self.d = vec![T::zero(); nc];
        self.ncols = nc;
    }

    fn reset_reduced_costs(&mut self, cost: &[T]) {
        let nc = self.ncols;
        let mut d = cost[..nc].to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != T::zero() {
                let row = &self.t[i * nc..(i + 1) * nc];
                for (dj, &a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for i in 0..self.m {
            d[self.basis[i]] = T::zero();
        }
        self.d = d;
    }

    /// Moves nonbasic `j` until basic row `r` reaches `target`, then swaps them.
    fn move_and_pivot(&mut self, r: usize, j: usize, target: T, leave_state: State) {
        let theta = (self.xb[r] - target) / self.at(r, j);
        let entering = self.value(j) + theta;
        if theta != T::zero() {
            for i in 0..self.m {
                let a = self.t[i * self.ncols + j];
                if a != T::zero() {
                    self.xb[i] -= a * theta;
                }
            }
        }
        let leaving = self.basis[r];
        self.state[leaving] = leave_state;
        self.pivot(r, j);
        self.xb[r] = entering;
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let inv = T::one() / self.t[r * nc + j];
        {
            let row = &mut self.t[r * nc..(r + 1) * nc];
            for v in row.iter_mut() {
                *v *= inv;
            }
        }
        let prow: Vec<T> = self.t[r * nc..(r + 1) * nc].to_vec();
        let nz: Vec<usize> = (0..nc).filter(|&k| prow[k] != T::zero()).collect();
        let update = |(i, row): (usize, &mut [T])| {
            if i == r {
                return;
            }
            let f = row[j];
            if f == T::zero() {
                return;
            }
            for &k in &nz {
                row[k] -= f * prow[k];
            }
            row[j] = T::zero();
        };
        if self.m * nz.len() > PAR_PIVOT_WORK {
            self.t.par_chunks_mut(nc).enumerate().for_each(update);
        } else {
            self.t.chunks_mut(nc).enumerate().for_each(update);
        }
        let f = self.d[j];
        if f != T::zero() {
            for &k in &nz {
                self.d[k] -= f * prow[k];
            }
            self.d[j] = T::zero();
        }
        self.basis[r] = j;
        self.state[j] = State::Basic;
        self.iterations += 1;
    }

    /// Primal simplex on the current reduced costs.
    fn primal(&mut self) -> LpStatus {
        let dtol = T::feas_tol();
        let ptol = T::pivot_tol();
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            let bland = degenerate > DEGENERATE_LIMIT;
            let mut enter = None;
            let mut best = T::zero();
            for j in 0..self.ncols {
                if self.state[j] == State::Basic || self.is_fixed(j) {
                    continue;
                }
                let dj = self.d[j];
                let score = match self.state[j] {
                    State::Lower if dj > dtol => dj,
                    State::Upper if dj < -dtol => -dj,
                    _ => continue,
                };
                if bland {
                    enter = Some(j);
                    break;
                }
                if score > best {
                    best = score;
                    enter = Some(j);
                }
            }
            let Some(j) = enter else { return LpStatus::Optimal };
            let dir = if self.state[j] == State::Lower { T::one() } else { -T::one() };

            let mut theta = self.up[j] - self.lo[j];
            let mut leave: Option<(usize, State)> = None;
            let mut leave_abs = T::zero();
            for i in 0..self.m {
                let a = self.at(i, j) * dir;
                let b = self.basis[i];
                let (limit, st) = if a > ptol {
                    if !self.lo[b].is_finite() {
                        continue;
                    }
                    (((self.xb[i] - self.lo[b]) / a).max(T::zero()), State::Lower)
                } else if a < -ptol {
                    if !self.up[b].is_finite() {
                        continue;
                    }
                    (((self.up[b] - self.xb[i]) / -a).max(T::zero()), State::Upper)
                } else {
                    continue;
                };
                let better = match leave {
                    _ if limit < theta => true,
                    Some((li, _)) if limit == theta => {
                        if bland {
                            b < self.basis[li]
                        } else {
                            a.abs() > leave_abs
                        }
                    }
                    _ => false,
                };
                if better {
                    theta = limit;
                    leave = Some((i, st));
                    leave_abs = a.abs();
                }
            }
            if !theta.is_finite() {
                return LpStatus::Unbounded;
            }
            if theta <= self.ftol {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            match leave {
                None => {
                    // bound flip
                    let step = theta * dir;
                    for i in 0..self.m {
                        let a = self.t[i * self.ncols + j];
                        if a != T::zero() {
                            self.xb[i] -= a * step;
                        }
                    }
                    self.state[j] = if self.state[j] == State::Lower { State::Upper } else { State::Lower };
                    self.iterations += 1;
                }
                Some((r, st)) => {
                    let b = self.basis[r];
                    let target = if st == State::Lower { self.lo[b] } else { self.up[b] };
                    self.move_and_pivot(r, j, target, st);
                }
            }
        }
    }

    /// Applies the bounds of `lp` and restores primal feasibility with the
    /// dual simplex. Returns false when the tableau cannot be reused.
    pub(crate) fn rebound(&mut self, lp: &LinearProgram<T>) -> bool {
        let dtol = T::feas_tol();
        self.iterations = 0;
        for j in 0..self.n_struct {
            let (l, u) = (lp.lower[j], lp.upper[j]);
            if l == self.lo[j] && u == self.up[j] {
                continue;
            }
            let old = if self.state[j] == State::Basic { T::zero() } else { self.value(j) };
            self.lo[j] = l;
            self.up[j] = u;
            if self.state[j] == State::Basic {
                continue;
            }
            let st = if l == u || self.d[j] < -dtol {
                State::Lower
            } else if self.d[j] > dtol {
                if !u.is_finite() {
                    return false;
                }
                State::Upper
            } else if self.state[j] == State::Upper && u.is_finite() {
                State::Upper
            } else {
                State::Lower
            };
            self.state[j] = st;
            let delta = self.value(j) - old;
            if delta != T::zero() {
                for i in 0..self.m {
                    let a = self.t[i * self.ncols + j];
                    if a != T::zero() {
                        self.xb[i] -= a * delta;
                    }
                }
            }
        }
        self.status = match self.dual() {
            LpStatus::Optimal => self.primal(),
            other => other,
        };
        true
    }

    fn dual(&mut self) -> LpStatus {
        let ptol = T::pivot_tol();
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            let mut row = None;
            let mut worst = T::zero();
            for i in 0..self.m {
                let b = self.basis[i];
                let below = (self.lo[b] - self.xb[i]) / (T::one() + self.lo[b].abs());
                let above = if self.up[b].is_finite() { (self.xb[i] - self.up[b]) / (T::one() + self.up[b].abs()) } else { T::zero() };
                let v = below.max(above);
                if v > self.ftol && v > worst {
                    worst = v;
                    row = Some((i, below > above));
                }
            }
            let Some((r, below)) = row else { return LpStatus::Optimal };
            let mut enter = None;
            let mut best_ratio = T::infinity();
            let mut best_abs = T::zero();
            for k in 0..self.ncols {
                if self.state[k] == State::Basic || self.is_fixed(k) {
                    continue;
                }
                let a = self.at(r, k);
                let ok = match (below, self.state[k]) {
                    (true, State::Lower) | (false, State::Upper) => a < -ptol,
                    (true, State::Upper) | (false, State::Lower) => a > ptol,
                    _ => false,
                };
                if !ok {
                    continue;
                }
                let ratio = self.d[k].abs() / a.abs();
                if ratio < best_ratio || (ratio == best_ratio && a.abs() > best_abs) {
                    best_ratio = ratio;
                    best_abs = a.abs();
                    enter = Some(k);
                }
            }
            let Some(k) = enter else { return LpStatus::Infeasible };
            let b = self.basis[r];
            let (target, st) = if below { (self.lo[b], State::Lower) } else { (self.up[b], State::Upper) };
            self.move_and_pivot(r, k, target, st);
        }
    }

    /// Recomputes basic values from the original columns by dense LU.
    fn refine(&mut self) {
        let m = self.m;
        if m == 0 || m > REFINE_MAX_ROWS {
            return;
        }
        let mut rhs = self.shape.rhs.clone();
        for j in 0..self.ncols {
            if self.state[j] != State::Basic {
                let v = self.value(j);
                if v != T::zero() {
                    for &(i, a) in &self.shape.cols[j] {
                        rhs[i] -= a * v;
                    }
                }
            }
        }
        let mut b = vec![T::zero(); m * m];
        for (c, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.shape.cols[j] {
                b[i * m + c] = a;
            }
        }
        if let Some(x) = lu_solve(&mut b, &mut rhs, m) {
            self.xb = x;
        }
    }

    /// Turns the tableau into a solution, verifying it against `lp`.
    pub(crate) fn finish(mut self, lp: &LinearProgram<T>) -> LpSolution<T> {
        let n = self.n_struct;
        if self.status != LpStatus::Optimal {
            return LpSolution {
                status: self.status,
                x: vec![T::zero(); n],
                objective: T::zero(),
                iterations: self.iterations,
                warm: None,
            };
        }
        let extract = |tab: &Self| {
            let mut x: Vec<T> = (0..n).map(|j| tab.value(j)).collect();
            for (i, &b) in tab.basis.iter().enumerate() {
                if b < n {
                    x[b] = tab.xb[i];
                }
            }
            x
        };
        let tight = T::feas_tol() * T::lit(10.0);
        let mut x = extract(&self);
        if lp.max_violation(&x) > tight {
            self.refine();
            x = extract(&self);
        }
        let status = if lp.max_violation(&x) > T::feas_tol() * T::lit(1e3) { LpStatus::IterationLimit } else { LpStatus::Optimal };
        let objective = lp.objective_value(&x);
        let iterations = self.iterations;
        let warm = (status == LpStatus::Optimal).then(|| WarmStart(Arc::new(self)));
        LpSolution { status, x, objective, iterations, warm }
    }
}

/// Solves `a x = b` in place with partial pivoting; `None` if singular.
fn lu_solve<T: Scalar>(a: &mut [T], b: &mut [T], m: usize) -> Option<Vec<T>> {
    for c in 0..m {
        let p = (c..m).max_by(|&i, &k| a[i * m + c].abs().partial_cmp(&a[k * m + c].abs()).expect("finite"))?;
        if a[p * m + c].abs() <= T::epsilon() {
            return None;
        }
        if p != c {
            for k in 0..m {
                a.swap(p * m + k, c * m + k);
            }
            b.swap(p, c);
        }
        let piv = a[c * m + c];
        for i in c + 1..m {
            let f = a[i * m + c] / piv;
            if f != T::zero() {
                for k in c..m {
                    let v = a[c * m + k];
                    a[i * m + k] -= f * v;
                }
                let bc = b[c];
                b[i] -= f * bc;
            }
        }
    }
    let mut x = vec![T::zero(); m];
    for c in (0..m).rev() {
        let mut s = b[c];
        for k in c + 1..m {
            s -= a[c * m + k] * x[k];
        }
        x[c] = s / a[c * m + c];
    }
    Some(x)
}

#[cfg(test)]
pub(crate) fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    lu_solve(a, b, m)
}
