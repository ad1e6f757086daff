//! Dense two-phase simplex for small linear programs.
//!
//! Variables are shifted or split into non-negative columns, rows are
//! normalized to a non-negative right-hand side, and artificial columns give
//! the phase-one basis. Entering columns follow the most-negative reduced
//! cost until a run of degenerate pivots switches the phase to Bland's rule.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("invalid linear program: {0}")]
    InvalidProgram(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Variable domain. `lower` may be `-inf`; `upper = None` means unbounded above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: f64,
    pub upper: Option<f64>,
}

impl Default for Bound {
    fn default() -> Self {
        Bound {
            lower: 0.0,
            upper: None,
        }
    }
}

impl Bound {
    pub const FREE: Bound = Bound {
        lower: f64::NEG_INFINITY,
        upper: None,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bound>,
    pub names: Vec<String>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            constraints: Vec::new(),
            bounds: vec![Bound::default(); n],
            names: Vec::new(),
        }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    pub fn with_constraint(mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        self.add_constraint(coefficients, relation, rhs);
        self
    }

    pub fn add_constraint(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coefficients,
            relation,
            rhs,
        });
    }

    pub fn with_bound(mut self, var: usize, bound: Bound) -> Self {
        self.bounds[var] = bound;
        self
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        self.names = names;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn name(&self, var: usize) -> String {
        self.names
            .get(var)
            .cloned()
            .unwrap_or_else(|| format!("x{}", var + 1))
    }

    pub fn validate(&self) -> Result<(), SimplexError> {
        let n = self.num_vars();
        let invalid = |m: String| Err(SimplexError::InvalidProgram(m));
        if n == 0 {
            return invalid("no variables".into());
        }
        if self.bounds.len() != n {
            return invalid(format!("{} bounds for {n} variables", self.bounds.len()));
        }
        if !self.names.is_empty() && self.names.len() != n {
            return invalid(format!("{} names for {n} variables", self.names.len()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return invalid("objective has a non-finite coefficient".into());
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coefficients.len() != n {
                return invalid(format!(
                    "constraint {} has width {}, expected {n}",
                    i + 1,
                    c.coefficients.len()
                ));
            }
            if !c.rhs.is_finite() || c.coefficients.iter().any(|a| !a.is_finite()) {
                return invalid(format!("constraint {} has a non-finite entry", i + 1));
            }
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if b.lower.is_nan() || b.lower == f64::INFINITY || b.upper.is_some_and(|u| !u.is_finite()) {
                return invalid(format!("variable {} has an invalid bound", self.name(j)));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coefficients.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (b, v) in self.bounds.iter().zip(x) {
            worst = worst.max(b.lower - v);
            if let Some(u) = b.upper {
                worst = worst.max(v - u);
            }
        }
        worst
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

fn write_terms(f: &mut fmt::Formatter<'_>, lp: &LinearProgram, coeffs: &[f64]) -> fmt::Result {
    let mut first = true;
    for (j, &a) in coeffs.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let sign = if a < 0.0 { "-" } else { "+" };
        if first {
            if a < 0.0 {
                f.write_str("-")?;
            }
        } else {
            write!(f, " {sign} ")?;
        }
        write!(f, "{} {}", a.abs(), lp.name(j))?;
        first = false;
    }
    if first {
        f.write_str("0")?;
    }
    Ok(())
}

/// Text dump, one constraint per line.
impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sense = match self.sense {
            Sense::Maximize => "maximize",
            Sense::Minimize => "minimize",
        };
        write!(f, "{sense}: ")?;
        write_terms(f, self, &self.objective)?;
        writeln!(f)?;
        writeln!(f, "subject to:")?;
        for (i, c) in self.constraints.iter().enumerate() {
            write!(f, "  c{}: ", i + 1)?;
            write_terms(f, self, &c.coefficients)?;
            writeln!(f, " {} {}", c.relation, c.rhs)?;
        }
        writeln!(f, "bounds:")?;
        for (j, b) in self.bounds.iter().enumerate() {
            let lower = if b.lower == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                b.lower.to_string()
            };
            let upper = b.upper.map_or("+inf".to_string(), |u| u.to_string());
            writeln!(f, "  {lower} <= {} <= {upper}", self.name(j))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status` is optimal.
    pub x: Vec<f64>,
    /// NaN when infeasible, signed infinity when unbounded.
    pub objective_value: f64,
    pub iterations: usize,
}

/// Numerical tolerances shared by every solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub pivot: f64,
    pub feasibility: f64,
    pub phase_one: f64,
    pub degenerate_run_before_bland: usize,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pivot: 1e-9,
            feasibility: 1e-8,
            phase_one: 1e-9,
            degenerate_run_before_bland: 50,
            max_iterations: 100_000,
        }
    }
}

/// Solves `lp` with the default tolerances.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, SimplexError> {
    solve_with(lp, &Tolerances::default())
}

pub fn solve_with(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution, SimplexError> {
    lp.validate()?;
    let standard = match StandardForm::build(lp) {
        Some(s) => s,
        None => return Ok(infeasible(0)),
    };
    let mut tableau = Tableau::new(&standard);
    let mut iterations = 0;

    if tableau.n_artificial > 0 {
        let phase_one: Vec<f64> = (0..tableau.n_cols)
            .map(|j| if tableau.is_artificial(j) { -1.0 } else { 0.0 })
            .collect();
        tableau.set_objective(&phase_one);
        match tableau.optimize(tol, &mut iterations, true)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => {
                return Err(SimplexError::NumericalBreakdown(
                    "phase one reported an unbounded direction".into(),
                ))
            }
        }
        if -tableau.objective_value() > tol.phase_one {
            return Ok(infeasible(iterations));
        }
        tableau.expel_artificials(tol, &mut iterations);
    }

    let mut costs = vec![0.0; tableau.n_cols];
    costs[..standard.objective.len()].copy_from_slice(&standard.objective);
    tableau.set_objective(&costs);
    match tableau.optimize(tol, &mut iterations, false)? {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => {
            let value = match lp.sense {
                Sense::Maximize => f64::INFINITY,
                Sense::Minimize => f64::NEG_INFINITY,
            };
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                objective_value: value,
                iterations,
            });
        }
    }

    let y = tableau.primal(standard.objective.len(), tol.feasibility);
    let x = standard.recover(&y);
    let violation = lp.max_violation(&x);
    if !(violation <= tol.feasibility) {
        return Err(SimplexError::NumericalBreakdown(format!(
            "returned point violates the program by {violation:e}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_at(&x),
        x,
        iterations,
    })
}

fn infeasible(iterations: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        x: Vec::new(),
        objective_value: f64::NAN,
        iterations,
    }
}

/// How an original variable maps onto non-negative standard columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + y
    Shift { col: usize, offset: f64 },
    /// x = offset - y
    Reflect { col: usize, offset: f64 },
    /// x = y+ - y-
    Split { pos: usize, neg: usize },
}

/// max c·y subject to rows, y ≥ 0.
struct StandardForm {
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
    maps: Vec<VarMap>,
}

impl StandardForm {
    /// Returns `None` when some variable has an empty domain.
    fn build(lp: &LinearProgram) -> Option<Self> {
        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut n_cols = 0;
        let mut upper_rows = Vec::new();
        for b in &lp.bounds {
            if b.lower.is_finite() {
                maps.push(VarMap::Shift {
                    col: n_cols,
                    offset: b.lower,
                });
                if let Some(u) = b.upper {
                    if u < b.lower {
                        return None;
                    }
                    upper_rows.push((n_cols, u - b.lower));
                }
                n_cols += 1;
            } else if let Some(u) = b.upper {
                maps.push(VarMap::Reflect { col: n_cols, offset: u });
                n_cols += 1;
            } else {
                maps.push(VarMap::Split {
                    pos: n_cols,
                    neg: n_cols + 1,
                });
                n_cols += 2;
            }
        }

        let sign = match lp.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let mut objective = vec![0.0; n_cols];
        for (j, map) in maps.iter().enumerate() {
            scatter(&mut objective, *map, sign * lp.objective[j]);
        }

        let mut rows = Vec::with_capacity(lp.constraints.len() + upper_rows.len());
        for c in &lp.constraints {
            let mut coeffs = vec![0.0; n_cols];
            let mut rhs = c.rhs;
            for (j, map) in maps.iter().enumerate() {
                let a = c.coefficients[j];
                if a == 0.0 {
                    continue;
                }
                match *map {
                    VarMap::Shift { offset, .. } | VarMap::Reflect { offset, .. } => rhs -= a * offset,
                    VarMap::Split { .. } => {}
                }
                scatter(&mut coeffs, *map, a);
            }
            rows.push((coeffs, c.relation, rhs));
        }
        for (col, width) in upper_rows {
            let mut coeffs = vec![0.0; n_cols];
            coeffs[col] = 1.0;
            rows.push((coeffs, Relation::Le, width));
        }
        Some(StandardForm {
            objective,
            rows,
            maps,
        })
    }

    fn recover(&self, y: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|m| match *m {
                VarMap::Shift { col, offset } => offset + y[col],
                VarMap::Reflect { col, offset } => offset - y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }
}

fn scatter(target: &mut [f64], map: VarMap, a: f64) {
    match map {
        VarMap::Shift { col, .. } => target[col] += a,
        VarMap::Reflect { col, .. } => target[col] -= a,
        VarMap::Split { pos, neg } => {
            target[pos] += a;
            target[neg] -= a;
        }
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Tableau {
    /// Constraint rows; the last entry of each row is its right-hand side.
    rows: Vec<Vec<f64>>,
    /// Reduced costs z_j - c_j; the last entry is the objective value.
    zrow: Vec<f64>,
    basis: Vec<usize>,
    n_cols: usize,
    first_artificial: usize,
    n_artificial: usize,
    artificials_dropped: bool,
}

impl Tableau {
    fn new(sf: &StandardForm) -> Self {
        let n_struct = sf.objective.len();
        let n_slack = sf
            .rows
            .iter()
            .filter(|(_, rel, _)| *rel != Relation::Eq)
            .count();
        let n_artificial = sf
            .rows
            .iter()
            .filter(|(_, rel, rhs)| match rel {
                Relation::Le => *rhs < 0.0,
                Relation::Ge => *rhs >= 0.0,
                Relation::Eq => true,
            })
            .count();
        let first_artificial = n_struct + n_slack;
        let n_cols = first_artificial + n_artificial;

        let mut rows = Vec::with_capacity(sf.rows.len());
        let mut basis = Vec::with_capacity(sf.rows.len());
        let (mut next_slack, mut next_art) = (n_struct, first_artificial);
        for (coeffs, rel, rhs) in &sf.rows {
            let mut row = vec![0.0; n_cols + 1];
            let flip = *rhs < 0.0;
            let s = if flip { -1.0 } else { 1.0 };
            for (j, a) in coeffs.iter().enumerate() {
                row[j] = s * a;
            }
            row[n_cols] = s * rhs;
            let rel = match (rel, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => *r,
            };
            match rel {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }
        Tableau {
            rows,
            zrow: vec![0.0; n_cols + 1],
            basis,
            n_cols,
            first_artificial,
            n_artificial,
            artificials_dropped: false,
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial && j < self.first_artificial + self.n_artificial
    }

    fn rhs(&self) -> usize {
        self.n_cols
    }

    fn objective_value(&self) -> f64 {
        self.zrow[self.rhs()]
    }

    /// Installs `costs` (maximized) and prices out the current basis.
    fn set_objective(&mut self, costs: &[f64]) {
        self.zrow = vec![0.0; self.n_cols + 1];
        for (j, c) in costs.iter().enumerate() {
            self.zrow[j] = -c;
        }
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b];
            if cb != 0.0 {
                for (z, a) in self.zrow.iter_mut().zip(&self.rows[i]) {
                    *z += cb * a;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let p = self.rows[r][e];
        for a in self.rows[r].iter_mut() {
            *a /= p;
        }
        self.rows[r][e] = 1.0;
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for (a, p) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * p;
                }
                row[e] = 0.0;
            }
        }
        let f = self.zrow[e];
        if f != 0.0 {
            for (z, p) in self.zrow.iter_mut().zip(&pivot_row) {
                *z -= f * p;
            }
            self.zrow[e] = 0.0;
        }
        self.basis[r] = e;
    }

    fn can_enter(&self, j: usize) -> bool {
        !(self.artificials_dropped && self.is_artificial(j))
    }

    fn optimize(
        &mut self,
        tol: &Tolerances,
        iterations: &mut usize,
        phase_one: bool,
    ) -> Result<PhaseEnd, SimplexError> {
        let mut bland = false;
        let mut degenerate_run = 0;
        loop {
            if *iterations >= tol.max_iterations {
                return Err(SimplexError::NumericalBreakdown(format!(
                    "no convergence within {} pivots",
                    tol.max_iterations
                )));
            }
            let mut entering = None;
            let mut best = -tol.pivot;
            for j in 0..self.n_cols {
                if !self.can_enter(j) {
                    continue;
                }
                let d = self.zrow[j];
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(e) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let rhs = self.rhs();
            let mut leaving: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[e];
                if a <= tol.pivot {
                    continue;
                }
                let ratio = row[rhs].max(0.0) / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((l, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                        if (!tie && ratio < best) || (tie && self.basis[i] < self.basis[l]) {
                            Some((i, ratio))
                        } else {
                            Some((l, best))
                        }
                    }
                };
            }
            let Some((r, step)) = leaving else {
                return Ok(PhaseEnd::Unbounded);
            };
            if phase_one && self.rows[r][e].abs() <= tol.pivot {
                return Err(SimplexError::NumericalBreakdown("no admissible pivot".into()));
            }
            self.pivot(r, e);
            *iterations += 1;
            if self.zrow.iter().chain(self.rows[r].iter()).any(|v| !v.is_finite()) {
                return Err(SimplexError::NumericalBreakdown(
                    "non-finite tableau entry".into(),
                ));
            }
            if step <= tol.pivot {
                degenerate_run += 1;
                if degenerate_run >= tol.degenerate_run_before_bland {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
        }
    }

    /// Pivots zero-level artificials out of the basis and drops redundant rows.
    fn expel_artificials(&mut self, tol: &Tolerances, iterations: &mut usize) {
        let mut r = 0;
        while r < self.rows.len() {
            if self.is_artificial(self.basis[r]) {
                let replacement = (0..self.first_artificial)
                    .filter(|&j| self.rows[r][j].abs() > tol.pivot)
                    .max_by(|&a, &b| {
                        self.rows[r][a]
                            .abs()
                            .total_cmp(&self.rows[r][b].abs())
                            .then(b.cmp(&a))
                    });
                match replacement {
                    Some(j) => {
                        self.pivot(r, j);
                        *iterations += 1;
                    }
                    None => {
                        self.rows.remove(r);
                        self.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        self.artificials_dropped = true;
    }

    fn primal(&self, n: usize, feasibility: f64) -> Vec<f64> {
        let mut y = vec![0.0; n];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < n {
                let v = row[self.rhs()];
                y[b] = if v < 0.0 && v > -feasibility { 0.0 } else { v };
            }
        }
        y
    }
}
