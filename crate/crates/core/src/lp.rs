//! Dense two-phase simplex for the small linear programs of the optimality oracle.

use crate::{Error, Result};

const EPS: f64 = 1e-10;
const PIVOT_EPS: f64 = 1e-9;
const DUAL_FEAS_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-9;
/// Relative objective change below which a pivot counts as degenerate.
const STALL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    /// Sparse coefficients `(variable, value)`.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `max cᵀx` subject to linear rows and `x ≥ 0`.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Constraint>,
    /// Scale of the cost perturbation; 0 solves the program as stated.
    pub perturbation: f64,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    /// `cᵀx` under the stated costs.
    pub value: f64,
    /// Optimal value under the perturbed costs. Every perturbation is
    /// nonnegative, so this bounds the stated optimum from above.
    pub perturbed_value: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
            perturbation: 0.0,
        }
    }

    /// Adds a deterministic increment in `(0, eps]` to every cost, which breaks
    /// the dual ties that stall the simplex on symmetric programs.
    pub fn perturbed(mut self, eps: f64) -> Self {
        self.perturbation = eps;
        self
    }

    fn solve_costs(&self) -> Vec<f64> {
        self.objective
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                // golden-ratio sequence, equidistributed on (0, 1]
                let u = 1.0 - ((j as f64 + 1.0) * 0.618_033_988_749_894_9).fract();
                c + self.perturbation * u
            })
            .collect()
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Constraint { coeffs, sense, rhs });
    }

    pub fn maximize(&self) -> Result<LpSolution> {
        self.start().map(|s| s.solution())
    }

    /// Solves and keeps the optimal tableau so rows can be appended later.
    pub fn start(&self) -> Result<LpSession> {
        let costs = self.solve_costs();
        let mut t = Tableau::build(self)?;
        t.solve(&costs)?;
        Ok(LpSession {
            tableau: t,
            objective: self.objective.clone(),
            costs,
        })
    }
}

/// An optimal tableau that accepts extra `≤` rows and re-optimizes by dual simplex.
pub struct LpSession {
    tableau: Tableau,
    objective: Vec<f64>,
    costs: Vec<f64>,
}

impl LpSession {
    pub fn solution(&self) -> LpSolution {
        let x = self.tableau.primal();
        let dot = |c: &[f64]| c.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution {
            value: dot(&self.objective),
            perturbed_value: dot(&self.costs),
            x,
            pivots: self.tableau.pivots,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.tableau.m
    }

    /// Drops appended rows that are slack by more than `min_slack` at the
    /// current optimum; the optimum is unchanged. Returns their tags.
    pub fn prune(&mut self, min_slack: f64) -> Vec<usize> {
        self.tableau.prune(min_slack)
    }

    /// Appends rows `Σ coeffs·x ≤ rhs` and restores optimality. Appended rows
    /// are tagged `0, 1, 2, …` in order of addition across calls.
    pub fn add_rows(&mut self, rows: Vec<(Vec<(usize, f64)>, f64)>) -> Result<LpSolution> {
        if rows.is_empty() {
            return Ok(self.solution());
        }
        self.tableau.append_le_rows(&rows)?;
        self.tableau.dual_simplex()?;
        self.tableau.iterate()?;
        Ok(self.solution())
    }
}

struct Tableau {
    m: usize,
    /// columns excluding the right-hand side
    cols: usize,
    /// `(m + 1) × (cols + 1)`, objective row last, rhs column last
    data: Vec<f64>,
    basis: Vec<usize>,
    n_struct: usize,
    /// artificial columns occupy `art.0..art.1`
    art: (usize, usize),
    phase_one: bool,
    pivots: usize,
    /// per row: `(tag, slack column)` for rows appended after solving
    appended: Vec<Option<(usize, usize)>>,
    next_tag: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Self> {
        let n = lp.n_vars();
        let m = lp.rows.len();
        let mut n_slack = 0;
        let mut n_art = 0;
        let mut senses = Vec::with_capacity(m);
        for row in &lp.rows {
            if let Some(&(j, _)) = row.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(Error::Lp(format!("row references variable {j} of {n}")));
            }
            let flip = row.rhs < 0.0;
            let sense = match (row.sense, flip) {
                (Sense::Le, false) | (Sense::Ge, true) => Sense::Le,
                (Sense::Ge, false) | (Sense::Le, true) => Sense::Ge,
                (Sense::Eq, _) => Sense::Eq,
            };
            match sense {
                Sense::Le => n_slack += 1,
                Sense::Ge => {
                    n_slack += 1;
                    n_art += 1
                }
                Sense::Eq => n_art += 1,
            }
            senses.push((sense, flip));
        }
        let first_artificial = n + n_slack;
        let cols = first_artificial + n_art;
        let width = cols + 1;
        let mut data = vec![0.0; (m + 1) * width];
        let mut basis = vec![0; m];
        let (mut s, mut a) = (n, first_artificial);
        for (i, row) in lp.rows.iter().enumerate() {
            let (sense, flip) = senses[i];
            let sign = if flip { -1.0 } else { 1.0 };
            let r = &mut data[i * width..(i + 1) * width];
            for &(j, v) in &row.coeffs {
                r[j] += sign * v;
            }
            r[cols] = sign * row.rhs;
            match sense {
                Sense::Le => {
                    r[s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Sense::Ge => {
                    r[s] = -1.0;
                    s += 1;
                    r[a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
                Sense::Eq => {
                    r[a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
            }
        }
        Ok(Self {
            m,
            cols,
            data,
            basis,
            n_struct: n,
            art: (first_artificial, cols),
            phase_one: false,
            pivots: 0,
            appended: vec![None; m],
            next_tag: 0,
        })
    }

    #[inline]
    fn width(&self) -> usize {
        self.cols + 1
    }

    #[inline]
    fn may_enter(&self, j: usize) -> bool {
        self.phase_one || j < self.art.0 || j >= self.art.1
    }

    fn primal(&self) -> Vec<f64> {
        let w = self.width();
        let mut x = vec![0.0; self.n_struct];
        for i in 0..self.m {
            if self.basis[i] < self.n_struct {
                x[self.basis[i]] = self.data[i * w + self.cols];
            }
        }
        x
    }

    /// Loads reduced costs `−c_j + c_Bᵀ B⁻¹ A_j` into the objective row (maximization form).
    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.width();
        let m = self.m;
        let (body, obj) = self.data.split_at_mut(m * w);
        for (j, o) in obj.iter_mut().enumerate() {
            *o = if j < cost.len() { -cost[j] } else { 0.0 };
        }
        for i in 0..m {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                let row = &body[i * w..(i + 1) * w];
                for (o, v) in obj.iter_mut().zip(row) {
                    *o += cb * v;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.data[r * w + c];
        {
            let row = &mut self.data[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[c] = 1.0;
        }
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        let nonzero: Vec<usize> = (0..w).filter(|&j| pivot_row[j] != 0.0).collect();
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * w..(i + 1) * w];
            for &j in &nonzero {
                row[j] -= f * pivot_row[j];
            }
            row[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn objective_value(&self) -> f64 {
        let w = self.width();
        self.data[self.m * w + self.cols]
    }

    /// Harris two-pass ratio test on column `c`: the bound is relaxed by
    /// `HARRIS_TOL`, then the largest pivot below it wins. Bland mode takes the
    /// exact minimum with the lowest basic index.
    fn primal_ratio(&self, c: usize, bland: bool) -> Option<usize> {
        let w = self.width();
        let rows = (0..self.m).filter(|&i| self.data[i * w + c] > PIVOT_EPS);
        let ratio = |i: usize| self.data[i * w + self.cols].max(0.0) / self.data[i * w + c];
        if bland {
            return rows.min_by(|&a, &b| {
                ratio(a)
                    .total_cmp(&ratio(b))
                    .then(self.basis[a].cmp(&self.basis[b]))
            });
        }
        let bound = rows
            .clone()
            .map(|i| (self.data[i * w + self.cols].max(0.0) + HARRIS_TOL) / self.data[i * w + c])
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        rows.filter(|&i| ratio(i) <= bound)
            .max_by(|&a, &b| self.data[a * w + c].total_cmp(&self.data[b * w + c]))
    }

    /// Dual counterpart of [`Self::primal_ratio`] on row `r`.
    fn dual_ratio(&self, r: usize, bland: bool) -> Option<usize> {
        let w = self.width();
        let obj = self.m * w;
        let cols =
            (0..self.cols).filter(|&j| self.data[r * w + j] < -PIVOT_EPS && self.may_enter(j));
        let ratio = |j: usize| self.data[obj + j].max(0.0) / -self.data[r * w + j];
        if bland {
            return cols.min_by(|&a, &b| ratio(a).total_cmp(&ratio(b)).then(a.cmp(&b)));
        }
        let bound = cols
            .clone()
            .map(|j| (self.data[obj + j].max(0.0) + HARRIS_TOL) / -self.data[r * w + j])
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        cols.filter(|&j| ratio(j) <= bound)
            .max_by(|&a, &b| self.data[r * w + b].total_cmp(&self.data[r * w + a]))
    }

    /// Primal simplex until no reduced cost is negative.
    fn iterate(&mut self) -> Result<()> {
        let w = self.width();
        let m = self.m;
        let limit = 50 * (m + self.cols) + 1000;
        let mut degenerate = 0usize;
        for _ in 0..limit {
            let obj = &self.data[m * w..(m + 1) * w - 1];
            let bland = degenerate > 50;
            let mut entering: Option<usize> = None;
            for (j, &v) in obj.iter().enumerate() {
                if v < -EPS && self.may_enter(j) {
                    if bland {
                        entering = Some(j);
                        break;
                    }
                    if entering.is_none_or(|e| v < obj[e]) {
                        entering = Some(j);
                    }
                }
            }
            let Some(c) = entering else {
                return Ok(());
            };
            let Some(r) = self.primal_ratio(c, bland) else {
                return Err(Error::Lp("objective unbounded".into()));
            };
            let before = self.objective_value();
            self.pivot(r, c);
            degenerate =
                if (self.objective_value() - before).abs() <= STALL_TOL * before.abs().max(1.0) {
                    degenerate + 1
                } else {
                    0
                };
        }
        Err(Error::Lp(format!("no convergence after {limit} pivots")))
    }

    /// Dual simplex from a dual-feasible basis with some negative right-hand sides.
    fn dual_simplex(&mut self) -> Result<()> {
        let limit = 50 * (self.m + self.cols) + 1000;
        let mut degenerate = 0usize;
        for _ in 0..limit {
            let w = self.width();
            let bland = degenerate > 50;
            let negative = (0..self.m).filter(|&i| self.data[i * w + self.cols] < -DUAL_FEAS_TOL);
            let leaving = if bland {
                negative.min_by_key(|&i| self.basis[i])
            } else {
                // most infeasible relative to the row norm
                negative
                    .map(|i| {
                        let row = &self.data[i * w..i * w + self.cols];
                        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                        (i, self.data[i * w + self.cols] / norm)
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(i, _)| i)
            };
            let Some(r) = leaving else {
                return Ok(());
            };
            let Some(c) = self.dual_ratio(r, bland) else {
                return Err(Error::Lp("infeasible after adding rows".into()));
            };
            let before = self.objective_value();
            self.pivot(r, c);
            degenerate =
                if (self.objective_value() - before).abs() <= STALL_TOL * before.abs().max(1.0) {
                    degenerate + 1
                } else {
                    0
                };
        }
        Err(Error::Lp("dual simplex did not converge".into()))
    }

    /// Deletes appended rows whose own slack is basic above `min_slack`. Such a
    /// row is a unit vector in its slack column, so the rest of the tableau is
    /// unchanged. Returns the tags of the deleted rows.
    fn prune(&mut self, min_slack: f64) -> Vec<usize> {
        let w = self.width();
        let doomed: Vec<(usize, usize, usize)> = (0..self.m)
            .filter_map(|i| {
                let (tag, col) = self.appended[i]?;
                (self.basis[i] == col && self.data[i * w + self.cols] > min_slack)
                    .then_some((i, col, tag))
            })
            .collect();
        if doomed.is_empty() {
            return Vec::new();
        }
        let drop_row: Vec<bool> = {
            let mut v = vec![false; self.m];
            doomed.iter().for_each(|&(i, _, _)| v[i] = true);
            v
        };
        let mut drop_col = vec![false; self.cols];
        doomed.iter().for_each(|&(_, c, _)| drop_col[c] = true);
        let new_index: Vec<usize> = drop_col
            .iter()
            .scan(0, |next, &d| {
                let k = *next;
                if !d {
                    *next += 1;
                }
                Some(k)
            })
            .collect();
        let cols = self.cols - doomed.len();
        let nw = cols + 1;
        let m = self.m - doomed.len();
        let mut data = Vec::with_capacity((m + 1) * nw);
        for i in (0..=self.m).filter(|&i| i == self.m || !drop_row[i]) {
            let row = &self.data[i * w..(i + 1) * w];
            data.extend((0..self.cols).filter(|&j| !drop_col[j]).map(|j| row[j]));
            data.push(row[self.cols]);
        }
        let keep = |i: &usize| !drop_row[*i];
        self.basis = (0..self.m)
            .filter(keep)
            .map(|i| new_index[self.basis[i]])
            .collect();
        self.appended = (0..self.m)
            .filter(keep)
            .map(|i| self.appended[i].map(|(t, c)| (t, new_index[c])))
            .collect();
        self.data = data;
        self.m = m;
        self.cols = cols;
        doomed.into_iter().map(|(_, _, t)| t).collect()
    }

    /// Adds `≤` rows, each with a fresh basic slack, expressed in the current basis.
    fn append_le_rows(&mut self, rows: &[(Vec<(usize, f64)>, f64)]) -> Result<()> {
        let k = rows.len();
        let (old_w, old_m, old_cols) = (self.width(), self.m, self.cols);
        let cols = old_cols + k;
        let w = cols + 1;
        let m = old_m + k;
        let mut data = vec![0.0; (m + 1) * w];
        let copy_row = |src: &[f64], dst: &mut [f64]| {
            dst[..old_cols].copy_from_slice(&src[..old_cols]);
            dst[cols] = src[old_cols];
        };
        for i in 0..old_m {
            copy_row(
                &self.data[i * old_w..(i + 1) * old_w],
                &mut data[i * w..(i + 1) * w],
            );
        }
        copy_row(
            &self.data[old_m * old_w..(old_m + 1) * old_w],
            &mut data[m * w..(m + 1) * w],
        );
        let mut row_of_basic = vec![usize::MAX; cols];
        for (i, &b) in self.basis.iter().enumerate() {
            row_of_basic[b] = i;
        }
        for (q, (coeffs, rhs)) in rows.iter().enumerate() {
            let i = old_m + q;
            let mut row = vec![0.0; w];
            for &(j, v) in coeffs {
                if j >= self.n_struct {
                    return Err(Error::Lp(format!("row references variable {j}")));
                }
                row[j] += v;
            }
            row[old_cols + q] = 1.0;
            row[cols] = *rhs;
            for j in 0..self.n_struct {
                let f = row[j];
                let bi = row_of_basic[j];
                if f != 0.0 && bi != usize::MAX {
                    let src = &data[bi * w..(bi + 1) * w];
                    for (v, s) in row.iter_mut().zip(src) {
                        *v -= f * s;
                    }
                    row[j] = 0.0;
                }
            }
            data[i * w..(i + 1) * w].copy_from_slice(&row);
            self.basis.push(old_cols + q);
            self.appended.push(Some((self.next_tag, old_cols + q)));
            self.next_tag += 1;
        }
        self.data = data;
        self.m = m;
        self.cols = cols;
        Ok(())
    }

    fn solve(&mut self, costs: &[f64]) -> Result<()> {
        let w = self.width();
        if self.art.0 < self.art.1 {
            let mut phase1 = vec![0.0; self.cols];
            for c in phase1.iter_mut().take(self.art.1).skip(self.art.0) {
                *c = -1.0;
            }
            self.phase_one = true;
            self.set_objective(&phase1);
            self.iterate()?;
            self.phase_one = false;
            let infeas = -self.data[self.m * w + self.cols];
            if infeas.abs() > 1e-8 {
                return Err(Error::Lp(format!(
                    "infeasible (phase one residual {infeas:e})"
                )));
            }
            // drive remaining artificials out of the basis where possible
            for i in 0..self.m {
                if self.basis[i] >= self.art.0 && self.basis[i] < self.art.1 {
                    if let Some(c) = (0..self.art.0).find(|&j| self.data[i * w + j].abs() > 1e-9) {
                        self.pivot(i, c);
                    }
                }
            }
        }
        self.set_objective(costs);
        self.iterate()
    }
}
