//! Dense two-phase simplex for small linear programs.
//!
//! Minimizes a linear cost over nonnegative variables subject to row
//! constraints. Phase one introduces artificial variables to find a
//! starting basis and detect infeasibility; Bland's rule keeps pivoting
//! cycle-free. Built for the covering programs the admissibility check
//! produces, whose dimensions stay small, so everything is a plain dense
//! tableau.

use thiserror::Error;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    BadRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("no feasible point satisfies the constraints")]
    Infeasible,
    #[error("the objective decreases without bound")]
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

/// Minimize `costs . x` subject to `x >= 0` and the added rows.
#[derive(Debug, Clone)]
pub struct LpProblem {
    costs: Vec<f64>,
    rows: Vec<(Vec<f64>, Rel, f64)>,
}

impl LpProblem {
    pub fn minimize(costs: Vec<f64>) -> Self {
        Self {
            costs,
            rows: Vec::new(),
        }
    }

    pub fn constrain(mut self, coeffs: Vec<f64>, rel: Rel, rhs: f64) -> Self {
        self.rows.push((coeffs, rel, rhs));
        self
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let n = self.costs.len();
        for (i, (a, _, _)) in self.rows.iter().enumerate() {
            if a.len() != n {
                return Err(LpError::BadRow {
                    row: i,
                    got: a.len(),
                    expected: n,
                });
            }
        }

        // Normalize every right-hand side to be nonnegative.
        let rows: Vec<(Vec<f64>, Rel, f64)> = self
            .rows
            .iter()
            .map(|(a, rel, b)| {
                if *b < 0.0 {
                    let flipped = match rel {
                        Rel::Le => Rel::Ge,
                        Rel::Ge => Rel::Le,
                        Rel::Eq => Rel::Eq,
                    };
                    (a.iter().map(|x| -x).collect(), flipped, -b)
                } else {
                    (a.clone(), *rel, *b)
                }
            })
            .collect();

        let m = rows.len();
        let n_slack = rows
            .iter()
            .filter(|(_, rel, _)| matches!(rel, Rel::Le | Rel::Ge))
            .count();
        let n_art = rows
            .iter()
            .filter(|(_, rel, _)| matches!(rel, Rel::Ge | Rel::Eq))
            .count();
        let real_width = n + n_slack;
        let width = real_width + n_art;

        let mut t = vec![vec![0.0f64; width]; m];
        let mut rhs = vec![0.0f64; m];
        let mut basis = vec![0usize; m];
        let mut next_slack = n;
        let mut next_art = real_width;
        for (r, (a, rel, b)) in rows.iter().enumerate() {
            t[r][..n].copy_from_slice(a);
            rhs[r] = *b;
            match rel {
                Rel::Le => {
                    t[r][next_slack] = 1.0;
                    basis[r] = next_slack;
                    next_slack += 1;
                }
                Rel::Ge => {
                    t[r][next_slack] = -1.0;
                    next_slack += 1;
                    t[r][next_art] = 1.0;
                    basis[r] = next_art;
                    next_art += 1;
                }
                Rel::Eq => {
                    t[r][next_art] = 1.0;
                    basis[r] = next_art;
                    next_art += 1;
                }
            }
        }

        if n_art > 0 {
            let mut phase1 = vec![0.0; width];
            for c in phase1.iter_mut().skip(real_width) {
                *c = 1.0;
            }
            let infeasibility = run_simplex(&mut t, &mut rhs, &mut basis, &phase1)?;
            if infeasibility > 1e-7 {
                return Err(LpError::Infeasible);
            }
            // Pivot leftover artificials out on any usable column; rows
            // that cannot be pivoted are redundant and get dropped.
            for r in 0..m {
                if basis[r] >= real_width {
                    if let Some(c) = (0..real_width).find(|&c| t[r][c].abs() > TOL) {
                        pivot(&mut t, &mut rhs, &mut basis, r, c);
                    }
                }
            }
            let live: Vec<usize> = (0..m).filter(|&r| basis[r] < real_width).collect();
            let mut t2 = Vec::with_capacity(live.len());
            let mut rhs2 = Vec::with_capacity(live.len());
            let mut basis2 = Vec::with_capacity(live.len());
            for &r in &live {
                let mut row = std::mem::take(&mut t[r]);
                row.truncate(real_width);
                t2.push(row);
                rhs2.push(rhs[r]);
                basis2.push(basis[r]);
            }
            t = t2;
            rhs = rhs2;
            basis = basis2;
        }

        let mut phase2 = self.costs.clone();
        phase2.resize(real_width, 0.0);
        let objective = run_simplex(&mut t, &mut rhs, &mut basis, &phase2)?;

        let mut x = vec![0.0; n];
        for (r, &b) in basis.iter().enumerate() {
            if b < n {
                x[b] = rhs[r];
            }
        }
        Ok(LpSolution { objective, x })
    }
}

/// Runs Bland-rule simplex to optimality on an already-feasible basis.
/// Returns the objective value for `cost`.
fn run_simplex(
    t: &mut Vec<Vec<f64>>,
    rhs: &mut Vec<f64>,
    basis: &mut Vec<usize>,
    cost: &[f64],
) -> Result<f64, LpError> {
    let m = t.len();
    let width = cost.len();
    let mut reduced: Vec<f64> = cost.to_vec();
    for r in 0..m {
        let cb = cost[basis[r]];
        if cb != 0.0 {
            for j in 0..width {
                reduced[j] -= cb * t[r][j];
            }
        }
    }
    loop {
        let Some(enter) = (0..width).find(|&j| reduced[j] < -TOL) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for r in 0..m {
            if t[r][enter] > TOL {
                let ratio = rhs[r] / t[r][enter];
                let take = ratio < best - TOL
                    || ((ratio - best).abs() <= TOL
                        && leave.map_or(true, |l| basis[r] < basis[l]));
                if take {
                    best = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(l) = leave else {
            return Err(LpError::Unbounded);
        };
        pivot(t, rhs, basis, l, enter);
        let f = reduced[enter];
        if f != 0.0 {
            for j in 0..width {
                reduced[j] -= f * t[l][j];
            }
        }
    }
    Ok((0..m).map(|r| cost[basis[r]] * rhs[r]).sum())
}

fn pivot(t: &mut [Vec<f64>], rhs: &mut [f64], basis: &mut [usize], r: usize, c: usize) {
    let p = t[r][c];
    debug_assert!(p.abs() > 0.0, "pivot on a zero entry");
    for v in t[r].iter_mut() {
        *v /= p;
    }
    rhs[r] /= p;
    let prow = t[r].clone();
    let prhs = rhs[r];
    for rr in 0..t.len() {
        if rr == r {
            continue;
        }
        let f = t[rr][c];
        if f != 0.0 {
            for (v, pv) in t[rr].iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            rhs[rr] -= f * prhs;
            if rhs[rr].abs() < 1e-12 {
                rhs[rr] = 0.0;
            }
        }
    }
    basis[r] = c;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn covers_a_single_lower_bound() {
        let sol = LpProblem::minimize(vec![1.0])
            .constrain(vec![1.0], Rel::Ge, 3.0)
            .solve()
            .unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!((sol.x[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn splits_cost_between_two_variables() {
        // min x + 2y with x + y >= 1 puts everything on the cheap variable.
        let sol = LpProblem::minimize(vec![1.0, 2.0])
            .constrain(vec![1.0, 1.0], Rel::Ge, 1.0)
            .solve()
            .unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!(sol.x[1].abs() < 1e-9);
    }

    #[test]
    fn handles_equalities_and_upper_bounds_together() {
        // min x + y with x + y = 1, x <= 0.25 forces y = 0.75.
        let sol = LpProblem::minimize(vec![1.0, 1.0])
            .constrain(vec![1.0, 1.0], Rel::Eq, 1.0)
            .constrain(vec![1.0, 0.0], Rel::Le, 0.25)
            .solve()
            .unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!(sol.x[0] <= 0.25 + 1e-9);
        assert!((sol.x[0] + sol.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rows_are_normalized() {
        // -x <= -2 is x >= 2.
        let sol = LpProblem::minimize(vec![1.0])
            .constrain(vec![-1.0], Rel::Le, -2.0)
            .solve()
            .unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        let err = LpProblem::minimize(vec![1.0])
            .constrain(vec![1.0], Rel::Le, 1.0)
            .constrain(vec![1.0], Rel::Ge, 2.0)
            .solve()
            .unwrap_err();
        assert_eq!(err, LpError::Infeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let err = LpProblem::minimize(vec![-1.0])
            .constrain(vec![1.0], Rel::Ge, 0.0)
            .solve()
            .unwrap_err();
        assert_eq!(err, LpError::Unbounded);
    }

    #[test]
    fn redundant_equalities_do_not_confuse_phase_one() {
        let sol = LpProblem::minimize(vec![1.0, 1.0])
            .constrain(vec![1.0, 1.0], Rel::Eq, 1.0)
            .constrain(vec![2.0, 2.0], Rel::Eq, 2.0)
            .solve()
            .unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_ties_terminate() {
        // Multiple rows hit a zero ratio at once; Bland's rule must not
        // cycle.
        let sol = LpProblem::minimize(vec![-0.75, 150.0, -0.02, 6.0])
            .constrain(vec![0.25, -60.0, -0.04, 9.0], Rel::Le, 0.0)
            .constrain(vec![0.5, -90.0, -0.02, 3.0], Rel::Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Rel::Le, 1.0)
            .solve()
            .unwrap();
        assert!((sol.objective - (-0.05)).abs() < 1e-9);
    }

    #[test]
    fn random_covering_programs_match_greedy_upper_bounds() {
        // min sum(x) with x_i >= b_i has the closed-form optimum sum(b).
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(1..6);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
            let mut lp = LpProblem::minimize(vec![1.0; n]);
            for i in 0..n {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                lp = lp.constrain(row, Rel::Ge, b[i]);
            }
            let sol = lp.solve().unwrap();
            let want: f64 = b.iter().sum();
            assert!((sol.objective - want).abs() < 1e-7);
        }
    }
}
