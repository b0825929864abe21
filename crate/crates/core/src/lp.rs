//! Exact linear feasibility over the rationals.
//!
//! Phase-1 simplex on a dense tableau: every equality row gets an artificial
//! variable and the sum of artificials is minimized. Bland's rule picks both
//! the entering and the leaving variable, so the method cannot cycle. Free
//! variables are split into a positive and a negative part.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use crate::error::{LcgmError, Result};
use crate::numeric::Rational;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilitySystem {
    num_vars: usize,
    equalities: Vec<(Vec<Rational>, Rational)>,
    nonneg: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityStatus {
    Feasible(Vec<Rational>),
    /// The optional row `y` is a Farkas certificate: `y^T A` is `>= 0` on
    /// nonnegative variables and `= 0` on free ones, while `y^T b < 0`.
    Infeasible(Option<Vec<Rational>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    /// Number of basis changes performed.
    pub pivots: usize,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, FeasibilityStatus::Feasible(_))
    }

    pub fn witness(&self) -> Option<&[Rational]> {
        match &self.status {
            FeasibilityStatus::Feasible(x) => Some(x),
            FeasibilityStatus::Infeasible(_) => None,
        }
    }
}

impl FeasibilitySystem {
    pub fn new(num_vars: usize) -> Self {
        FeasibilitySystem {
            num_vars,
            equalities: Vec::new(),
            nonneg: BTreeSet::new(),
        }
    }

    pub fn from_parts(
        num_vars: usize,
        equalities: Vec<(Vec<Rational>, Rational)>,
        nonneg: BTreeSet<usize>,
    ) -> Result<Self> {
        let sys = FeasibilitySystem {
            num_vars,
            equalities,
            nonneg,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn add_equality(&mut self, row: Vec<Rational>, rhs: Rational) {
        self.equalities.push((row, rhs));
    }

    pub fn set_nonneg(&mut self, var: usize) {
        self.nonneg.insert(var);
    }

    pub fn all_nonneg(mut self) -> Self {
        self.nonneg = (0..self.num_vars).collect();
        self
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn equalities(&self) -> &[(Vec<Rational>, Rational)] {
        &self.equalities
    }

    pub fn nonneg(&self) -> &BTreeSet<usize> {
        &self.nonneg
    }

    pub fn validate(&self) -> Result<()> {
        for (i, (row, _)) in self.equalities.iter().enumerate() {
            if row.len() != self.num_vars {
                return Err(LcgmError::InvalidSystem(format!(
                    "equality {i} has {} coefficients, expected {}",
                    row.len(),
                    self.num_vars
                )));
            }
        }
        if let Some(&v) = self.nonneg.iter().find(|&&v| v >= self.num_vars) {
            return Err(LcgmError::InvalidSystem(format!(
                "nonnegativity on variable {v} of {}",
                self.num_vars
            )));
        }
        Ok(())
    }

    /// Exact check of every equality and bound.
    pub fn is_satisfied_by(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars
            && self.nonneg.iter().all(|&v| !x[v].is_negative())
            && self.equalities.iter().all(|(row, rhs)| {
                let lhs = row
                    .iter()
                    .zip(x)
                    .fold(Rational::zero(), |acc, (a, b)| acc + a * b);
                lhs == *rhs
            })
    }

    pub fn is_farkas_certificate(&self, y: &[Rational]) -> bool {
        if y.len() != self.equalities.len() {
            return false;
        }
        let yb = self
            .equalities
            .iter()
            .zip(y)
            .fold(Rational::zero(), |acc, ((_, b), yi)| acc + b * yi);
        if !yb.is_negative() {
            return false;
        }
        (0..self.num_vars).all(|j| {
            let col = self
                .equalities
                .iter()
                .zip(y)
                .fold(Rational::zero(), |acc, ((row, _), yi)| acc + &row[j] * yi);
            if self.nonneg.contains(&j) {
                !col.is_negative()
            } else {
                col.is_zero()
            }
        })
    }
}

struct Tableau {
    /// `m` rows of `ncols` coefficients followed by the right-hand side.
    rows: Vec<Vec<Rational>>,
    /// Reduced costs of the phase-1 objective, followed by `-objective`.
    cost: Vec<Rational>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        if !self.cost[c].is_zero() {
            let f = self.cost[c].clone();
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule: lowest-index improving column, then the lowest-index
    /// basic variable among the tied minimum ratios.
    fn bland_step(&self) -> Option<(usize, usize)> {
        let c = (0..self.ncols).find(|&j| self.cost[j].is_negative())?;
        let rhs = self.ncols;
        let mut best: Option<(usize, Rational)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            if !row[c].is_positive() {
                continue;
            }
            let ratio = &row[rhs] / &row[c];
            let better = match &best {
                None => true,
                Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
            };
            if better {
                best = Some((i, ratio));
            }
        }
        // the phase-1 objective is bounded below by zero
        best.map(|(r, _)| (r, c))
    }
}

pub fn solve_feasibility(sys: &FeasibilitySystem) -> Result<FeasibilityResult> {
    sys.validate()?;
    let m = sys.equalities.len();

    // structural columns: (variable, +1 | -1)
    let mut columns: Vec<(usize, bool)> = Vec::new();
    for v in 0..sys.num_vars {
        columns.push((v, true));
        if !sys.nonneg.contains(&v) {
            columns.push((v, false));
        }
    }
    let n_struct = columns.len();
    let ncols = n_struct + m;

    let mut signs = Vec::with_capacity(m);
    let mut rows = Vec::with_capacity(m);
    for (i, (coeffs, rhs)) in sys.equalities.iter().enumerate() {
        let flip = rhs.is_negative();
        signs.push(flip);
        let s = |x: &Rational| if flip { -x.clone() } else { x.clone() };
        let mut row = Vec::with_capacity(ncols + 1);
        for &(v, positive) in &columns {
            let a = s(&coeffs[v]);
            row.push(if positive { a } else { -a });
        }
        for k in 0..m {
            row.push(if k == i { Rational::one() } else { Rational::zero() });
        }
        row.push(s(rhs));
        rows.push(row);
    }

    let mut cost = vec![Rational::zero(); ncols + 1];
    for row in &rows {
        for j in 0..n_struct {
            cost[j] -= &row[j];
        }
        cost[ncols] -= &row[ncols];
    }

    let mut tab = Tableau {
        rows,
        cost,
        basis: (n_struct..ncols).collect(),
        ncols,
    };
    let mut pivots = 0;
    while let Some((r, c)) = tab.bland_step() {
        tab.pivot(r, c);
        pivots += 1;
    }

    let objective = -tab.cost[ncols].clone();
    if objective.is_zero() {
        let mut x = vec![Rational::zero(); sys.num_vars];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n_struct {
                let (v, positive) = columns[b];
                let val = &tab.rows[i][ncols];
                if positive {
                    x[v] += val;
                } else {
                    x[v] -= val;
                }
            }
        }
        if !sys.is_satisfied_by(&x) {
            return Err(LcgmError::InvariantViolation(
                "simplex witness does not satisfy the system".into(),
            ));
        }
        return Ok(FeasibilityResult {
            status: FeasibilityStatus::Feasible(x),
            pivots,
        });
    }

    // Row duals of the sign-normalized system are 1 - (reduced cost of the
    // artificial); negate and undo the row flips to get the certificate.
    let y: Vec<Rational> = (0..m)
        .map(|i| {
            let dual = Rational::one() - &tab.cost[n_struct + i];
            if signs[i] {
                dual
            } else {
                -dual
            }
        })
        .collect();
    let certificate = sys.is_farkas_certificate(&y).then_some(y);
    debug_assert!(certificate.is_some(), "phase-1 duals must certify infeasibility");
    Ok(FeasibilityResult {
        status: FeasibilityStatus::Infeasible(certificate),
        pivots,
    })
}
