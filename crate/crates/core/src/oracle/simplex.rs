//! Dense tableau simplex over exact rationals.
//!
//! Solves `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`, so the slack basis
//! is feasible from the start and no phase one is needed. Bland's rule keeps
//! it from cycling. The final reduced costs of the slack columns are an
//! optimal solution of the dual `min b.y  s.t.  A^T y >= c, y >= 0`.

use num::{Signed, Zero};

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub x: Vec<Rational>,
    pub dual: Vec<Rational>,
    pub objective: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimplexError {
    #[error("right-hand side must be nonnegative (row {0})")]
    NegativeRhs(usize),
    #[error("objective is unbounded")]
    Unbounded,
    #[error("constraint matrix rows have inconsistent widths")]
    Shape,
}

pub fn maximize(
    a: &[Vec<Rational>],
    b: &[Rational],
    c: &[Rational],
) -> Result<LpSolution, SimplexError> {
    let rows = a.len();
    let vars = c.len();
    if b.len() != rows || a.iter().any(|r| r.len() != vars) {
        return Err(SimplexError::Shape);
    }
    if let Some(i) = b.iter().position(|v| v.is_negative()) {
        return Err(SimplexError::NegativeRhs(i));
    }
    let width = vars + rows;
    // tableau rows: [coefficients | slacks | rhs]
    let mut t: Vec<Vec<Rational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..rows).map(|k| if k == i { Rational::from_integer(1.into()) } else { Rational::zero() }));
            r.push(b[i].clone());
            r
        })
        .collect();
    let mut z: Vec<Rational> = c.iter().map(|v| -v.clone()).collect();
    z.extend((0..=rows).map(|_| Rational::zero()));
    let mut basis: Vec<usize> = (vars..width).collect();

    while let Some(col) = (0..width).find(|&j| z[j].is_negative()) {
        let mut pivot: Option<(usize, Rational)> = None;
        for (i, row) in t.iter().enumerate() {
            if !row[col].is_positive() {
                continue;
            }
            let ratio = &row[width] / &row[col];
            let better = match &pivot {
                None => true,
                Some((p, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*p]),
            };
            if better {
                pivot = Some((i, ratio));
            }
        }
        let (p, _) = pivot.ok_or(SimplexError::Unbounded)?;
        let inv = Rational::from_integer(1.into()) / &t[p][col];
        for v in t[p].iter_mut() {
            *v *= &inv;
        }
        let pivot_row = t[p].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == p || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= &f * pv;
            }
        }
        if !z[col].is_zero() {
            let f = z[col].clone();
            for (v, pv) in z.iter_mut().zip(&pivot_row) {
                *v -= &f * pv;
            }
        }
        basis[p] = col;
    }

    let mut x = vec![Rational::zero(); vars];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < vars {
            x[bv] = t[i][width].clone();
        }
    }
    let dual = z[vars..width].to_vec();
    Ok(LpSolution {
        x,
        dual,
        objective: z[width].clone(),
    })
}
