//! Dense two-phase simplex with Bland's rule.
//!
//! Solves `min c.x` subject to linear rows and `x >= 0`. Sizes here are a
//! few hundred rows at most, so a full tableau is fine. Bland's rule makes
//! the pivot sequence (and therefore the returned vertex) deterministic.

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-10;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
    /// Pivot limit hit; only reachable through floating-point stalling.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self { objective, rows: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) {
        debug_assert_eq!(coefficients.len(), self.objective.len());
        self.rows.push(Row { coefficients, relation, rhs });
    }

    pub fn solve(&self) -> LpSolution {
        let mut tableau = Tableau::build(self);
        match tableau.phase_one() {
            Phase::Done => {}
            Phase::Infeasible => return LpSolution::Infeasible,
            Phase::Stalled => return LpSolution::Stalled,
            Phase::Unbounded => unreachable!("phase one is bounded below by zero"),
        }
        tableau.set_objective(&self.objective);
        match tableau.iterate() {
            Phase::Done => {}
            Phase::Unbounded => return LpSolution::Unbounded,
            Phase::Stalled => return LpSolution::Stalled,
            Phase::Infeasible => unreachable!(),
        }
        let x = tableau.primal(self.n_vars());
        let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution::Optimal { x, value }
    }
}

enum Phase {
    Done,
    Infeasible,
    Unbounded,
    Stalled,
}

struct Tableau {
    /// `m` constraint rows of width `cols + 1`; the last entry is the rhs.
    rows: Vec<Vec<f64>>,
    /// Reduced costs, with the negated objective value in the last entry.
    cost: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
    /// Columns at or beyond this index are artificial.
    first_artificial: usize,
    artificial_allowed: bool,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let rows: Vec<Row> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs < 0.0 {
                    Row {
                        coefficients: r.coefficients.iter().map(|c| -c).collect(),
                        relation: match r.relation {
                            Relation::Le => Relation::Ge,
                            Relation::Ge => Relation::Le,
                            Relation::Eq => Relation::Eq,
                        },
                        rhs: -r.rhs,
                    }
                } else {
                    r.clone()
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.relation != Relation::Le).count();
        let cols = n + n_slack + n_art;
        let first_artificial = n + n_slack;

        let mut table = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        let (mut slack, mut art) = (n, first_artificial);
        for r in &rows {
            let mut line = vec![0.0; cols + 1];
            line[..n].copy_from_slice(&r.coefficients);
            line[cols] = r.rhs;
            match r.relation {
                Relation::Le => {
                    line[slack] = 1.0;
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    line[slack] = -1.0;
                    slack += 1;
                    line[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
                Relation::Eq => {
                    line[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
            }
            table.push(line);
        }
        Self { rows: table, cost: vec![0.0; cols + 1], basis, cols, first_artificial, artificial_allowed: true }
    }

    fn phase_one(&mut self) -> Phase {
        if self.first_artificial == self.cols {
            return Phase::Done;
        }
        let mut costs = vec![0.0; self.cols];
        costs[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
        self.load_costs(&costs);
        match self.iterate() {
            Phase::Done => {}
            other => return other,
        }
        let scale = self.rows.iter().map(|r| r[self.cols].abs()).fold(1.0, f64::max);
        if -self.cost[self.cols] > 1e-9 * scale {
            return Phase::Infeasible;
        }
        self.evict_artificials();
        self.artificial_allowed = false;
        Phase::Done
    }

    /// Pivots zero-valued artificials out of the basis; rows where that is
    /// impossible are linearly dependent and are dropped.
    fn evict_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= self.first_artificial {
                let col = (0..self.first_artificial).find(|&j| self.rows[i][j].abs() > PIVOT_EPS);
                match col {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    fn set_objective(&mut self, objective: &[f64]) {
        let mut costs = vec![0.0; self.cols];
        costs[..objective.len()].copy_from_slice(objective);
        self.load_costs(&costs);
    }

    fn load_costs(&mut self, costs: &[f64]) {
        self.cost[..self.cols].copy_from_slice(costs);
        self.cost[self.cols] = 0.0;
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b];
            if cb != 0.0 {
                for (c, a) in self.cost.iter_mut().zip(&self.rows[i]) {
                    *c -= cb * a;
                }
            }
        }
    }

    fn iterate(&mut self) -> Phase {
        let limit = if self.artificial_allowed { self.cols } else { self.first_artificial };
        for _ in 0..MAX_PIVOTS {
            // Bland: lowest-index improving column enters.
            let Some(enter) = (0..limit).find(|&j| self.cost[j] < -COST_EPS) else {
                return Phase::Done;
            };
            // Minimum ratio; ties go to the lowest-index basic variable.
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a > PIVOT_EPS {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[k]) {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, enter),
                None => return Phase::Unbounded,
            }
        }
        Phase::Stalled
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        self.rows[row].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i != row {
                let f = r[col];
                if f != 0.0 {
                    for (v, pv) in r.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                    r[col] = 0.0;
                }
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
    }

    fn primal(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rows[i][self.cols].max(0.0);
            }
        }
        x
    }
}
