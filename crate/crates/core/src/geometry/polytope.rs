use super::simplex::{LinearProgram, LpSolution, Relation};
use super::Halfspace;
use crate::error::{LireError, Result};
use crate::forest::dot;

/// Tightening applied to strict (open) sides before feasibility tests.
pub const OPEN_SIDE_MARGIN: f64 = 1e-9;

/// Feasibility slack accepted for returned projections.
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DykstraOptions {
    /// Stop once the change over one full cycle falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DykstraOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Exact,
    /// Iteration budget ran out; the point was pushed back into the
    /// feasible set but may not be optimal.
    Inexact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub distance: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

fn validate(constraints: &[Halfspace], dim: usize) -> Result<()> {
    for (i, h) in constraints.iter().enumerate() {
        if h.normal.len() != dim {
            return Err(LireError::DimensionMismatch { expected: dim, got: h.normal.len() });
        }
        if !h.offset.is_finite() || h.normal.iter().any(|g| !g.is_finite()) {
            return Err(LireError::IllConditioned(format!("halfspace {i} has non-finite entries")));
        }
        if h.norm() < 1e-12 {
            return Err(LireError::IllConditioned(format!("halfspace {i} has a vanishing normal")));
        }
    }
    Ok(())
}

/// A point of the region `{x : g.x <= h}` (strict sides tightened by
/// [`OPEN_SIDE_MARGIN`]) maximizing the smallest normalized slack, capped
/// at 1. Returns `None` when the region is empty.
pub fn polytope_witness(constraints: &[Halfspace], dim: usize) -> Result<Option<Vec<f64>>> {
    validate(constraints, dim)?;
    if constraints.is_empty() {
        return Ok(Some(vec![0.0; dim]));
    }
    // Variables: x = p - q (2D), then the slack s.
    let n = 2 * dim + 1;
    let mut objective = vec![0.0; n];
    objective[2 * dim] = -1.0;
    let mut lp = LinearProgram::new(objective);
    for h in constraints {
        let norm = h.norm();
        let mut row = Vec::with_capacity(n);
        row.extend(h.normal.iter().map(|g| g / norm));
        row.extend(h.normal.iter().map(|g| -g / norm));
        row.push(1.0);
        let margin = if h.strict { OPEN_SIDE_MARGIN } else { 0.0 };
        lp.add_row(row, Relation::Le, h.offset / norm - margin);
    }
    let mut cap = vec![0.0; n];
    cap[2 * dim] = 1.0;
    lp.add_row(cap, Relation::Le, 1.0);
    match lp.solve() {
        LpSolution::Optimal { x, .. } => Ok(Some((0..dim).map(|d| x[d] - x[dim + d]).collect())),
        LpSolution::Infeasible => Ok(None),
        LpSolution::Unbounded | LpSolution::Stalled => {
            Err(LireError::IllConditioned("feasibility program did not terminate cleanly".into()))
        }
    }
}

/// Whether the intersection of the halfspaces is nonempty, with strict
/// sides tightened by [`OPEN_SIDE_MARGIN`].
pub fn polytope_feasible(constraints: &[Halfspace]) -> Result<bool> {
    let Some(dim) = constraints.first().map(|h| h.normal.len()) else {
        return Ok(true);
    };
    Ok(polytope_witness(constraints, dim)?.is_some())
}

/// Halfspaces in coordinates `y = sqrt(w) * x`.
struct Scaled {
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    norms_sq: Vec<f64>,
}

impl Scaled {
    fn new(constraints: &[Halfspace], scale: &[f64]) -> Self {
        let normals: Vec<Vec<f64>> =
            constraints.iter().map(|h| h.normal.iter().zip(scale).map(|(g, s)| g / s).collect()).collect();
        let norms_sq = normals.iter().map(|g| dot(g, g)).collect();
        Self { normals, offsets: constraints.iter().map(|h| h.offset).collect(), norms_sq }
    }

    fn len(&self) -> usize {
        self.offsets.len()
    }

    #[inline]
    fn violation(&self, i: usize, y: &[f64]) -> f64 {
        dot(&self.normals[i], y) - self.offsets[i]
    }

    fn max_violation(&self, y: &[f64]) -> f64 {
        (0..self.len()).map(|i| self.violation(i, y) / self.norms_sq[i].sqrt()).fold(0.0, f64::max)
    }
}

/// Euclidean projection of `source` onto the closed intersection of the
/// halfspaces by Dykstra's cyclic projections, followed by an active-set
/// polish that snaps the iterate onto the optimal face when the KKT
/// conditions can be certified. Weighted squared-l2 is handled by
/// rescaling coordinates by `sqrt(w)`.
pub fn project_to_polytope_l2(
    source: &[f64],
    constraints: &[Halfspace],
    weights: Option<&[f64]>,
    options: &DykstraOptions,
) -> Result<Projection> {
    let dim = source.len();
    validate(constraints, dim)?;
    let scale: Vec<f64> = match weights {
        Some(w) => w.iter().map(|v| v.sqrt()).collect(),
        None => vec![1.0; dim],
    };
    let sys = Scaled::new(constraints, &scale);
    let origin: Vec<f64> = source.iter().zip(&scale).map(|(x, s)| x * s).collect();
    let finish = |y: Vec<f64>, status, iterations| {
        let point: Vec<f64> = y.iter().zip(&scale).map(|(v, s)| v / s).collect();
        let distance = y.iter().zip(&origin).map(|(a, b)| (a - b) * (a - b)).sum();
        Projection { point, distance, status, iterations }
    };

    if (0..sys.len()).all(|i| sys.violation(i, &origin) <= 0.0) {
        return Ok(finish(origin.clone(), SolveStatus::Exact, 0));
    }

    let m = sys.len();
    let mut y = origin.clone();
    let mut increments = vec![vec![0.0; dim]; m];
    let mut prev = y.clone();
    let mut converged = false;
    let mut cycles = 0;
    let magnitude = 1.0 + origin.iter().map(|v| v.abs()).fold(0.0, f64::max)
        + sys.offsets.iter().map(|v| v.abs()).fold(0.0, f64::max);

    while cycles < options.max_iter {
        cycles += 1;
        prev.copy_from_slice(&y);
        let mut increment_change = 0.0;
        for i in 0..m {
            // z = y + e_i, projected onto halfspace i.
            let g = &sys.normals[i];
            let e = &mut increments[i];
            let mut excess = -sys.offsets[i];
            for d in 0..dim {
                excess += g[d] * (y[d] + e[d]);
            }
            let step = excess.max(0.0) / sys.norms_sq[i];
            for d in 0..dim {
                let z = y[d] + e[d] - step * g[d];
                let new_e = y[d] + e[d] - z;
                increment_change += (new_e - e[d]) * (new_e - e[d]);
                e[d] = new_e;
                y[d] = z;
            }
        }
        let moved: f64 = y.iter().zip(&prev).map(|(a, b)| (a - b) * (a - b)).sum();
        if (moved + increment_change).sqrt() < options.tol {
            converged = true;
            break;
        }
        if cycles % 256 == 0 {
            let spread = increments.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
            if spread > 1e8 * magnitude && !polytope_feasible(constraints)? {
                return Err(LireError::Infeasible);
            }
        }
    }

    if let Some(polished) = polish(&sys, &origin, &y, &increments) {
        return Ok(finish(polished, SolveStatus::Exact, cycles));
    }
    if !converged && !polytope_feasible(constraints)? {
        return Err(LireError::Infeasible);
    }
    restore_feasibility(&sys, &mut y);
    let status = if converged && sys.max_violation(&y) <= FEASIBILITY_TOL * magnitude {
        SolveStatus::Exact
    } else {
        SolveStatus::Inexact
    };
    Ok(finish(y, status, cycles))
}

/// Cyclic projections onto violated halfspaces until the point is feasible.
fn restore_feasibility(sys: &Scaled, y: &mut [f64]) {
    for _ in 0..10_000 {
        let mut worst = 0.0f64;
        for i in 0..sys.len() {
            let v = sys.violation(i, y);
            if v > 0.0 {
                worst = worst.max(v / sys.norms_sq[i].sqrt());
                // Overshoot slightly so rounding lands inside.
                let step = v / sys.norms_sq[i] * (1.0 + 1e-12) + 1e-15;
                for (yd, g) in y.iter_mut().zip(&sys.normals[i]) {
                    *yd -= step * g;
                }
            }
        }
        if worst <= 0.0 {
            return;
        }
    }
}

/// Active-set refinement of a Dykstra iterate: solves the equality-
/// constrained projection on the guessed active set and repairs the set
/// until primal feasibility and nonnegative multipliers both hold.
fn polish(sys: &Scaled, origin: &[f64], y: &[f64], increments: &[Vec<f64>]) -> Option<Vec<f64>> {
    let dim = origin.len();
    let m = sys.len();
    let tol = FEASIBILITY_TOL * (1.0 + origin.iter().map(|v| v.abs()).fold(0.0, f64::max));

    // Rank candidates by multiplier size (|e_i| / |g_i|), then near-activity.
    let mut candidates: Vec<(usize, f64)> = (0..m)
        .map(|i| (i, increments[i].iter().map(|v| v * v).sum::<f64>().sqrt() / sys.norms_sq[i].sqrt()))
        .filter(|&(i, lambda)| lambda > 1e-12 || sys.violation(i, y).abs() <= 1e-7 * sys.norms_sq[i].sqrt())
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut active: Vec<usize> = Vec::new();
    for (i, _) in candidates {
        if active.len() < dim && independent(sys, &active, i) {
            active.push(i);
        }
    }

    for _ in 0..(4 * m + 8) {
        let (point, multipliers) = equality_projection(sys, origin, &active)?;
        if let Some((pos, _)) = multipliers
            .iter()
            .enumerate()
            .filter(|(_, mu)| **mu < -1e-12)
            .min_by(|a, b| a.1.total_cmp(b.1))
        {
            active.remove(pos);
            continue;
        }
        let worst = (0..m)
            .filter(|i| !active.contains(i))
            .map(|i| (i, sys.violation(i, &point) / sys.norms_sq[i].sqrt()))
            .filter(|(_, v)| *v > tol)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match worst {
            None => return Some(point),
            Some((i, _)) => {
                if active.len() >= dim || !independent(sys, &active, i) {
                    return None;
                }
                active.push(i);
            }
        }
    }
    None
}

fn independent(sys: &Scaled, active: &[usize], candidate: usize) -> bool {
    let mut rows: Vec<&[f64]> = active.iter().map(|&i| sys.normals[i].as_slice()).collect();
    rows.push(&sys.normals[candidate]);
    let gram = gram_matrix(&rows);
    solve_dense(gram, vec![0.0; rows.len()]).is_some()
}

fn gram_matrix(rows: &[&[f64]]) -> Vec<Vec<f64>> {
    rows.iter().map(|a| rows.iter().map(|b| dot(a, b)).collect()).collect()
}

/// Projection of `origin` onto `{y : g_i . y = h_i, i in active}` and the
/// associated multipliers.
fn equality_projection(sys: &Scaled, origin: &[f64], active: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    if active.is_empty() {
        return Some((origin.to_vec(), Vec::new()));
    }
    let rows: Vec<&[f64]> = active.iter().map(|&i| sys.normals[i].as_slice()).collect();
    let rhs: Vec<f64> = active.iter().map(|&i| sys.violation(i, origin)).collect();
    let mu = solve_dense(gram_matrix(&rows), rhs)?;
    let mut point = origin.to_vec();
    for (row, m) in rows.iter().zip(&mu) {
        for (p, g) in point.iter_mut().zip(row.iter()) {
            *p -= m * g;
        }
    }
    Some((point, mu))
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Minimum (weighted) l1 distance from `source` to the closed intersection
/// of the halfspaces: `min sum w (u + v)` with `x = source + u - v`, solved
/// by the two-phase simplex. Returns the optimal vertex.
pub fn min_l1_to_polytope(source: &[f64], constraints: &[Halfspace], weights: Option<&[f64]>) -> Result<Projection> {
    let dim = source.len();
    validate(constraints, dim)?;
    let w = |d: usize| weights.map_or(1.0, |w| w[d]);
    if constraints.iter().all(|h| h.violation(source) <= 0.0) {
        return Ok(Projection { point: source.to_vec(), distance: 0.0, status: SolveStatus::Exact, iterations: 0 });
    }
    let objective: Vec<f64> = (0..dim).map(w).chain((0..dim).map(w)).collect();
    let mut lp = LinearProgram::new(objective);
    for h in constraints {
        let norm = h.norm();
        let row: Vec<f64> = h.normal.iter().map(|g| g / norm).chain(h.normal.iter().map(|g| -g / norm)).collect();
        lp.add_row(row, Relation::Le, -h.violation(source) / norm);
    }
    match lp.solve() {
        LpSolution::Optimal { x, .. } => {
            let point: Vec<f64> = (0..dim).map(|d| source[d] + x[d] - x[dim + d]).collect();
            let distance = (0..dim).map(|d| w(d) * (point[d] - source[d]).abs()).sum();
            Ok(Projection { point, distance, status: SolveStatus::Exact, iterations: 0 })
        }
        LpSolution::Infeasible => Err(LireError::Infeasible),
        LpSolution::Unbounded => unreachable!("l1 objective is bounded below by zero"),
        LpSolution::Stalled => Err(LireError::IllConditioned("l1 program stalled".into())),
    }
}
