//! Affinely constrained, distance-weighted l1 sparse coding.
//!
//! Each tangent-space neighborhood poses one small convex problem: find
//! coefficients `alpha` minimizing
//!
//! ```text
//! | target - sum_j alpha_j atom_j |^2  +  sum_j lambda_j |alpha_j|
//! subject to  sum_j alpha_j = 1
//! ```
//!
//! with penalties `lambda_j = exp(|atom_j - target| / sigma_alpha)`. The
//! solver is proximal-gradient descent where each step applies the exact
//! proximal operator of the nonsmooth part: a weighted soft-threshold
//! followed-through onto the hyperplane `{sum = 1}` by a one-dimensional
//! dual search over the soft-threshold breakpoints. Every iterate is
//! feasible and the objective never increases.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 5000;

#[derive(Debug, Clone)]
pub struct SparseCodingProblem {
    /// The vector to reconstruct (the zero vector in geodesic clustering,
    /// kept general to match the objective literally).
    pub target: DVector<f64>,
    pub atoms: Vec<DVector<f64>>,
    /// One positive penalty per atom, each >= 1.
    pub penalties: Vec<f64>,
    pub sigma_alpha: f64,
}

impl SparseCodingProblem {
    /// Builds the problem with penalties `exp(|atom - target| / sigma_alpha)`.
    pub fn from_neighborhood(
        target: DVector<f64>,
        atoms: Vec<DVector<f64>>,
        sigma_alpha: f64,
    ) -> Result<Self> {
        if !(sigma_alpha.is_finite() && sigma_alpha > 0.0) {
            return Err(Error::config("sigma_alpha must be positive"));
        }
        let penalties = atoms.iter().map(|a| ((a - &target).norm() / sigma_alpha).exp()).collect();
        let p = SparseCodingProblem { target, atoms, penalties, sigma_alpha };
        p.validate()?;
        Ok(p)
    }

    /// Builds the problem with explicit penalties.
    pub fn with_penalties(
        target: DVector<f64>,
        atoms: Vec<DVector<f64>>,
        penalties: Vec<f64>,
    ) -> Result<Self> {
        let p = SparseCodingProblem { target, atoms, penalties, sigma_alpha: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::input("sparse coding needs at least one atom"));
        }
        if self.penalties.len() != self.atoms.len() {
            return Err(Error::input("one penalty per atom required"));
        }
        if self.penalties.iter().any(|l| !(l.is_finite() && *l >= 1.0)) {
            return Err(Error::input("penalties must be finite and >= 1"));
        }
        let dim = self.target.len();
        if self.atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::input("atom dimension mismatch with target"));
        }
        Ok(())
    }

    fn objective(&self, alpha: &[f64]) -> f64 {
        let mut residual = self.target.clone();
        for (a, &w) in self.atoms.iter().zip(alpha) {
            residual -= a * w;
        }
        let l1: f64 = self.penalties.iter().zip(alpha).map(|(l, a)| l * a.abs()).sum();
        residual.norm_squared() + l1
    }
}

#[derive(Debug, Clone)]
pub struct SparseSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    /// Objective after each iteration (non-increasing).
    pub objectives: Vec<f64>,
    pub iterations: usize,
    /// False when max_iter was hit before the relative objective change
    /// dropped below tol.
    pub converged: bool,
    /// All atoms were zero; the uniform feasible point was returned.
    pub degenerate: bool,
}

fn soft(z: f64, c: f64) -> f64 {
    if z > c {
        z - c
    } else if z < -c {
        z + c
    } else {
        0.0
    }
}

/// Exact proximal step: minimizes `0.5 |x - g|^2 + sum_j c_j |x_j|` over the
/// hyperplane `{sum x = 1}`. With the dual variable `nu`, the solution is
/// `x_j = soft(g_j - nu, c_j)`; the feasible `nu` is found on the piecewise
/// linear, non-increasing map `nu -> sum_j soft(g_j - nu, c_j)`.
fn prox_l1_hyperplane(g: &[f64], c: &[f64], out: &mut Vec<f64>) {
    let n = g.len();
    let h = |nu: f64| -> f64 { g.iter().zip(c).map(|(&gj, &cj)| soft(gj - nu, cj)).sum() };

    let mut bps: Vec<f64> = Vec::with_capacity(2 * n);
    for j in 0..n {
        bps.push(g[j] - c[j]);
        bps.push(g[j] + c[j]);
    }
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let nu = {
        let slope = n as f64;
        let first = bps[0];
        let h_first = h(first);
        if h_first <= 1.0 {
            // Crossing lies left of every breakpoint, on slope -n.
            first - (1.0 - h_first) / slope
        } else {
            let mut prev_bp = first;
            let mut prev_h = h_first;
            let mut found = None;
            for &bp in &bps[1..] {
                let hb = h(bp);
                if hb <= 1.0 {
                    found = Some(if prev_h - hb > 0.0 {
                        prev_bp + (prev_h - 1.0) * (bp - prev_bp) / (prev_h - hb)
                    } else {
                        bp
                    });
                    break;
                }
                prev_bp = bp;
                prev_h = hb;
            }
            // Beyond every breakpoint the slope is -n again.
            found.unwrap_or_else(|| prev_bp + (prev_h - 1.0) / slope)
        }
    };

    out.clear();
    out.extend(g.iter().zip(c).map(|(&gj, &cj)| soft(gj - nu, cj)));
    // Absorb the last-digit feasibility error into the largest coordinate so
    // the constraint holds to machine precision.
    let sum: f64 = out.iter().sum();
    let err = sum - 1.0;
    if err != 0.0 {
        if let Some(k) = (0..n).max_by(|&a, &b| out[a].abs().partial_cmp(&out[b].abs()).unwrap()) {
            out[k] -= err;
        }
    }
}

/// Solves the problem to the given tolerance on relative objective change.
pub fn solve(p: &SparseCodingProblem, tol: f64, max_iter: usize) -> Result<SparseSolution> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(Error::config("tol must be positive"));
    }
    let n = p.atoms.len();

    if n == 1 {
        let alpha = vec![1.0];
        let obj = p.objective(&alpha);
        return Ok(SparseSolution {
            alpha,
            objective: obj,
            objectives: vec![obj],
            iterations: 0,
            converged: true,
            degenerate: false,
        });
    }

    // Numerically-zero atoms (e.g. tangent lifts of duplicated features)
    // leave the quadratic term with no curvature to step against; the
    // symmetric simplex point is the canonical representative then.
    let scale = p.target.norm().max(1.0);
    if p.atoms.iter().all(|a| a.norm() <= 1e-12 * scale) {
        let alpha = vec![1.0 / n as f64; n];
        let obj = p.objective(&alpha);
        return Ok(SparseSolution {
            alpha,
            objective: obj,
            objectives: vec![obj],
            iterations: 0,
            converged: true,
            degenerate: true,
        });
    }

    let dim = p.target.len();
    let mut a = DMatrix::zeros(dim, n);
    for (j, atom) in p.atoms.iter().enumerate() {
        a.set_column(j, atom);
    }
    let ata = a.transpose() * &a;
    let atb = a.transpose() * &p.target;
    let lip = 2.0 * ata.symmetric_eigenvalues().iter().cloned().fold(0.0f64, f64::max);
    let step = 1.0 / lip;

    let mut alpha = vec![1.0 / n as f64; n];
    let mut obj = p.objective(&alpha);
    let mut objectives = vec![obj];
    let mut g = vec![0.0f64; n];
    let mut next = Vec::with_capacity(n);
    let scaled_pen: Vec<f64> = p.penalties.iter().map(|l| l * step).collect();

    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        // gradient of |b - A alpha|^2 is 2 (A^T A alpha - A^T b)
        let av = DVector::from_column_slice(&alpha);
        let grad = &ata * &av - &atb;
        for j in 0..n {
            g[j] = alpha[j] - 2.0 * step * grad[j];
        }
        prox_l1_hyperplane(&g, &scaled_pen, &mut next);
        std::mem::swap(&mut alpha, &mut next);

        let new_obj = p.objective(&alpha);
        objectives.push(new_obj);
        let rel = (obj - new_obj).abs() / obj.abs().max(1.0);
        obj = new_obj;
        if rel < tol {
            converged = true;
            break;
        }
    }

    Ok(SparseSolution { alpha, objective: obj, objectives, iterations, converged, degenerate: false })
}

/// [`solve`] with the default tolerance (1e-8) and iteration cap (5000).
pub fn solve_default(p: &SparseCodingProblem) -> Result<SparseSolution> {
    solve(p, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn vec3(a: f64, b: f64, c: f64) -> DVector<f64> {
        DVector::from_row_slice(&[a, b, c])
    }

    fn random_problem(n: usize, dim: usize, seed: u64) -> SparseCodingProblem {
        let mut rng = StdRng::seed_from_u64(seed);
        let atoms: Vec<DVector<f64>> = (0..n)
            .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        SparseCodingProblem::from_neighborhood(DVector::zeros(dim), atoms, 1.0).unwrap()
    }

    #[test]
    fn single_atom_forced_to_one() {
        let p = SparseCodingProblem::with_penalties(
            vec3(0.0, 0.0, 0.0),
            vec![vec3(1.0, 2.0, 3.0)],
            vec![1.5],
        )
        .unwrap();
        let s = solve_default(&p).unwrap();
        assert_eq!(s.alpha, vec![1.0]);
        assert!(s.converged);
    }

    #[test]
    fn opposite_atoms_split_evenly() {
        let v = vec3(0.7, -0.4, 1.2);
        let p = SparseCodingProblem::with_penalties(
            DVector::zeros(3),
            vec![v.clone(), -v],
            vec![1.3, 1.3],
        )
        .unwrap();
        let s = solve_default(&p).unwrap();
        assert_abs_diff_eq!(s.alpha[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(s.alpha[1], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn constraint_residual_tiny() {
        for seed in 0..20 {
            let p = random_problem(6, 4, seed);
            let s = solve_default(&p).unwrap();
            let sum: f64 = s.alpha.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-8, "residual {}", (sum - 1.0).abs());
        }
    }

    #[test]
    fn objective_sequence_non_increasing() {
        let p = random_problem(8, 5, 99);
        let s = solve_default(&p).unwrap();
        for w in s.objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn matches_grid_oracle_on_three_atoms() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..5 {
            let atoms: Vec<DVector<f64>> =
                (0..3).map(|_| DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0))).collect();
            let p = SparseCodingProblem::from_neighborhood(DVector::zeros(3), atoms, 1.0).unwrap();
            let s = solve(&p, 1e-12, 20000).unwrap();

            // Exhaustive search over the plane alpha_3 = 1 - alpha_1 - alpha_2.
            let mut best = f64::MAX;
            let steps = 600; // step 5e-3 over [-1.5, 1.5]
            for i in 0..=steps {
                for j in 0..=steps {
                    let a1 = -1.5 + 3.0 * i as f64 / steps as f64;
                    let a2 = -1.5 + 3.0 * j as f64 / steps as f64;
                    let a3 = 1.0 - a1 - a2;
                    let obj = p.objective(&[a1, a2, a3]);
                    if obj < best {
                        best = obj;
                    }
                }
            }
            assert!(
                s.objective <= best + 1e-4,
                "solver {} vs grid {best}",
                s.objective
            );
        }
    }

    #[test]
    fn heavier_penalties_never_grow_l1_mass() {
        for seed in [1, 2, 3, 4, 5] {
            let p = random_problem(5, 4, seed);
            let s1 = solve(&p, 1e-12, 20000).unwrap();
            let heavier = SparseCodingProblem::with_penalties(
                p.target.clone(),
                p.atoms.clone(),
                p.penalties.iter().map(|l| l * 10.0).collect(),
            )
            .unwrap();
            let s2 = solve(&heavier, 1e-12, 20000).unwrap();
            let m1: f64 = s1.alpha.iter().map(|a| a.abs()).sum();
            let m2: f64 = s2.alpha.iter().map(|a| a.abs()).sum();
            assert!(m2 <= m1 + 1e-8, "l1 mass grew: {m1} -> {m2}");
        }
    }

    #[test]
    fn permuting_atoms_permutes_alpha() {
        let p = random_problem(4, 3, 31);
        let s = solve_default(&p).unwrap();
        let perm = [2usize, 0, 3, 1];
        let p2 = SparseCodingProblem::with_penalties(
            p.target.clone(),
            perm.iter().map(|&j| p.atoms[j].clone()).collect(),
            perm.iter().map(|&j| p.penalties[j]).collect(),
        )
        .unwrap();
        let s2 = solve_default(&p2).unwrap();
        for (k, &j) in perm.iter().enumerate() {
            assert_abs_diff_eq!(s2.alpha[k], s.alpha[j], epsilon = 1e-8);
        }
    }

    #[test]
    fn all_zero_atoms_degenerate_uniform() {
        let p = SparseCodingProblem::with_penalties(
            DVector::zeros(3),
            vec![DVector::zeros(3), DVector::zeros(3), DVector::zeros(3)],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        let s = solve_default(&p).unwrap();
        assert!(s.degenerate);
        for a in &s.alpha {
            assert_abs_diff_eq!(*a, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn empty_atoms_rejected() {
        let p = SparseCodingProblem {
            target: DVector::zeros(2),
            atoms: vec![],
            penalties: vec![],
            sigma_alpha: 1.0,
        };
        assert!(matches!(solve_default(&p), Err(Error::Input(_))));
    }
}
