//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Sized for the small programs the cone machinery produces (tens of rows
//! and columns); no sparse storage, no numerical refinements beyond fixed
//! pivot tolerances.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    cmp: Cmp,
    rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// A linear program over `n` variables, nonnegative unless marked free.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    maximize: bool,
    free: Vec<bool>,
    rows: Vec<Row>,
}

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const FEAS_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { n, objective, maximize: false, free: vec![false; n], rows: Vec::new() }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        let mut lp = Self::minimize(objective);
        lp.maximize = true;
        lp
    }

    /// Pure feasibility problem over `n` variables.
    pub fn feasibility(n: usize) -> Self {
        Self::minimize(vec![0.0; n])
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.free[var] = true;
        self
    }

    pub fn all_free(&mut self) -> &mut Self {
        self.free.iter_mut().for_each(|f| *f = true);
        self
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.n, "constraint width");
        self.rows.push(Row { coeffs, cmp, rhs });
        self
    }

    pub fn solve(&self) -> LpOutcome {
        // column layout: split variables, then one slack/surplus per
        // inequality, then one artificial per >= or = row
        let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(self.n);
        let mut ncols = 0;
        for j in 0..self.n {
            if self.free[j] {
                col_of.push((ncols, Some(ncols + 1)));
                ncols += 2;
            } else {
                col_of.push((ncols, None));
                ncols += 1;
            }
        }
        let n_struct = ncols;
        let rows: Vec<Row> = self
            .rows
            .iter()
            .map(|r| {
                if r.rhs < 0.0 {
                    Row {
                        coeffs: r.coeffs.iter().map(|c| -c).collect(),
                        cmp: match r.cmp {
                            Cmp::Le => Cmp::Ge,
                            Cmp::Ge => Cmp::Le,
                            Cmp::Eq => Cmp::Eq,
                        },
                        rhs: -r.rhs,
                    }
                } else {
                    r.clone()
                }
            })
            .collect();
        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.cmp != Cmp::Eq).count();
        let n_art = rows.iter().filter(|r| r.cmp != Cmp::Le).count();
        let total = n_struct + n_slack + n_art;
        let art_start = n_struct + n_slack;

        let mut tab = vec![vec![0.0; total + 1]; m];
        let mut basis = vec![0usize; m];
        let (mut s, mut a) = (n_struct, art_start);
        for (i, r) in rows.iter().enumerate() {
            for j in 0..self.n {
                let (p, q) = col_of[j];
                tab[i][p] = r.coeffs[j];
                if let Some(q) = q {
                    tab[i][q] = -r.coeffs[j];
                }
            }
            tab[i][total] = r.rhs;
            match r.cmp {
                Cmp::Le => {
                    tab[i][s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Cmp::Ge => {
                    tab[i][s] = -1.0;
                    s += 1;
                    tab[i][a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
                Cmp::Eq => {
                    tab[i][a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
            }
        }

        let mut tableau = Tableau { tab, basis, total };
        if n_art > 0 {
            let mut cost = vec![0.0; total];
            cost[art_start..].iter_mut().for_each(|c| *c = 1.0);
            let allowed = vec![true; total];
            match tableau.run(&cost, &allowed) {
                Phase::Optimal => {}
                Phase::Unbounded | Phase::Stalled => return LpOutcome::Infeasible,
            }
            let scale = rows.iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);
            if tableau.objective(&cost) > FEAS_EPS * scale {
                return LpOutcome::Infeasible;
            }
            tableau.evict_artificials(art_start);
        }

        let mut cost = vec![0.0; total];
        for j in 0..self.n {
            let c = if self.maximize { -self.objective[j] } else { self.objective[j] };
            let (p, q) = col_of[j];
            cost[p] = c;
            if let Some(q) = q {
                cost[q] = -c;
            }
        }
        let allowed: Vec<bool> = (0..total).map(|j| j < art_start).collect();
        match tableau.run(&cost, &allowed) {
            Phase::Optimal => {}
            Phase::Unbounded => return LpOutcome::Unbounded,
            Phase::Stalled => return LpOutcome::Infeasible,
        }
        let mut col_val = vec![0.0; total];
        for (i, &b) in tableau.basis.iter().enumerate() {
            col_val[b] = tableau.tab[i][total];
        }
        let x: Vec<f64> = col_of
            .iter()
            .map(|&(p, q)| col_val[p] - q.map_or(0.0, |q| col_val[q]))
            .collect();
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        LpOutcome::Optimal { x, value }
    }
}

enum Phase {
    Optimal,
    Unbounded,
    Stalled,
}

struct Tableau {
    tab: Vec<Vec<f64>>,
    basis: Vec<usize>,
    total: usize,
}

impl Tableau {
    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| cost[b] * self.tab[i][self.total])
            .sum()
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.tab[row][col];
        for v in self.tab[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.tab[row].clone();
        for (i, r) in self.tab.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    fn run(&mut self, cost: &[f64], allowed: &[bool]) -> Phase {
        for _ in 0..MAX_PIVOTS {
            // Bland: lowest-index improving column
            let mut entering = None;
            for j in 0..self.total {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(i, &b)| cost[b] * self.tab[i][j])
                        .sum::<f64>();
                if reduced < -COST_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return Phase::Optimal };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.tab.len() {
                let a = self.tab[i][col];
                if a > PIVOT_EPS {
                    let ratio = self.tab[i][self.total] / a;
                    match leaving {
                        None => leaving = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14
                                || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li])
                            {
                                leaving = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leaving else { return Phase::Unbounded };
            self.pivot(row, col);
        }
        Phase::Stalled
    }

    fn evict_artificials(&mut self, art_start: usize) {
        let mut i = 0;
        while i < self.tab.len() {
            if self.basis[i] >= art_start {
                let col = (0..art_start).find(|&j| self.tab[i][j].abs() > 1e-9);
                match col {
                    Some(j) => {
                        self.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        // redundant row
                        self.tab.remove(i);
                        self.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }
}
