//! Reproducing-kernel functions on raw sample vectors.
//!
//! All downstream feature extraction touches the data only through one of
//! these kernels, so the set is kept small and explicit: linear, Gaussian,
//! Laplacian, polynomial, and convex mixtures of those. A mixture of valid
//! kernels with weights summing to one is again a valid kernel, which is the
//! only composition allowed (mixtures of mixtures are rejected).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance on the weight sum of a mixture.
pub const MIXTURE_WEIGHT_TOL: f64 = 1e-12;

/// A positive-definite kernel on `R^q`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `k(a, b) = a . b`
    Linear,
    /// `k(a, b) = exp(-|a - b|^2 / (2 sigma^2))`
    Gaussian { sigma: f64 },
    /// `k(a, b) = exp(-|a - b|_1 / sigma)`
    Laplacian { sigma: f64 },
    /// `k(a, b) = (a . b + 1)^degree`
    Polynomial { degree: u32 },
    /// `k = sum_j w_j k_j` with positive weights summing to one.
    Mixture { components: Vec<(f64, Kernel)> },
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Self {
        Kernel::Gaussian { sigma }
    }

    pub fn laplacian(sigma: f64) -> Self {
        Kernel::Laplacian { sigma }
    }

    pub fn polynomial(degree: u32) -> Self {
        Kernel::Polynomial { degree }
    }

    /// Convex mixture of base kernels.
    pub fn mixture(components: Vec<(f64, Kernel)>) -> Result<Self> {
        let k = Kernel::Mixture { components };
        k.validate()?;
        Ok(k)
    }

    /// Checks bandwidths, degrees, and mixture weights.
    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Linear => Ok(()),
            Kernel::Gaussian { sigma } | Kernel::Laplacian { sigma } => {
                if sigma.is_finite() && *sigma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!("kernel bandwidth must be positive, got {sigma}")))
                }
            }
            Kernel::Polynomial { degree } => {
                if *degree >= 1 {
                    Ok(())
                } else {
                    Err(Error::config("polynomial degree must be at least 1"))
                }
            }
            Kernel::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::config("mixture needs at least one component"));
                }
                let mut sum = 0.0;
                for (w, k) in components {
                    if !w.is_finite() || *w <= 0.0 {
                        return Err(Error::config(format!("mixture weight must be positive, got {w}")));
                    }
                    if matches!(k, Kernel::Mixture { .. }) {
                        return Err(Error::config("mixtures of mixtures are not allowed"));
                    }
                    k.validate()?;
                    sum += w;
                }
                if (sum - 1.0).abs() > MIXTURE_WEIGHT_TOL {
                    return Err(Error::config(format!(
                        "mixture weights must sum to 1 (got {sum}, tolerance {MIXTURE_WEIGHT_TOL:e})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Evaluates the kernel on a pair of equally sized vectors.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), b.len(), "kernel arguments must have equal length");
        match self {
            Kernel::Linear => dot(a, b),
            Kernel::Gaussian { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            Kernel::Laplacian { sigma } => {
                let d1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
                (-d1 / sigma).exp()
            }
            Kernel::Polynomial { degree } => (dot(a, b) + 1.0).powi(*degree as i32),
            Kernel::Mixture { components } => {
                components.iter().map(|(w, k)| w * k.eval(a, b)).sum()
            }
        }
    }

    /// Gram matrix of a point set; symmetric by construction.
    pub fn gram(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = points.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval(&points[i], &points[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Linear => write!(f, "linear"),
            Kernel::Gaussian { sigma } => write!(f, "gaussian({sigma})"),
            Kernel::Laplacian { sigma } => write!(f, "laplacian({sigma})"),
            Kernel::Polynomial { degree } => write!(f, "polynomial({degree})"),
            Kernel::Mixture { components } => {
                let parts: Vec<String> =
                    components.iter().map(|(w, k)| format!("{w}*{k}")).collect();
                write!(f, "{}", parts.join("+"))
            }
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    /// Parses kernel specs as they appear in config files:
    /// `linear`, `gaussian(0.8)`, `polynomial(3)`, or weighted sums like
    /// `0.6*gaussian(0.8)+0.4*laplacian(1.0)`.
    fn from_str(s: &str) -> Result<Self> {
        let terms: Vec<&str> = s.split('+').collect();
        let mut components = Vec::with_capacity(terms.len());
        let mut any_weighted = false;
        for term in &terms {
            let term = term.trim();
            if term.is_empty() {
                return Err(Error::config(format!("empty term in kernel spec '{s}'")));
            }
            match term.split_once('*') {
                Some((w, base)) => {
                    let w: f64 = w
                        .trim()
                        .parse()
                        .map_err(|_| Error::config(format!("bad mixture weight in '{term}'")))?;
                    components.push((w, parse_base(base.trim())?));
                    any_weighted = true;
                }
                None => components.push((1.0, parse_base(term)?)),
            }
        }
        let kernel = if components.len() == 1 && !any_weighted {
            components.pop().unwrap().1
        } else {
            Kernel::Mixture { components }
        };
        kernel.validate()?;
        Ok(kernel)
    }
}

fn parse_base(s: &str) -> Result<Kernel> {
    let (name, args) = match s.split_once('(') {
        Some((name, rest)) => {
            let rest = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::config(format!("unbalanced parentheses in kernel '{s}'")))?;
            (name.trim(), Some(rest.trim()))
        }
        None => (s, None),
    };
    match (name, args) {
        ("linear", None) => Ok(Kernel::Linear),
        ("gaussian", Some(a)) => Ok(Kernel::Gaussian { sigma: parse_f64(a, s)? }),
        ("laplacian", Some(a)) => Ok(Kernel::Laplacian { sigma: parse_f64(a, s)? }),
        ("polynomial", Some(a)) => {
            let degree: u32 = a
                .parse()
                .map_err(|_| Error::config(format!("bad polynomial degree in '{s}'")))?;
            Ok(Kernel::Polynomial { degree })
        }
        _ => Err(Error::config(format!("unknown kernel '{s}'"))),
    }
}

fn parse_f64(a: &str, ctx: &str) -> Result<f64> {
    a.parse()
        .map_err(|_| Error::config(format!("bad numeric argument in kernel '{ctx}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect())
            .collect()
    }

    #[test]
    fn pointwise_values() {
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        assert_abs_diff_eq!(Kernel::Linear.eval(&e1, &e2), 0.0);
        assert_abs_diff_eq!(Kernel::Linear.eval(&e1, &e1), 1.0);
        assert_abs_diff_eq!(Kernel::gaussian(0.7).eval(&e1, &e1), 1.0);
        assert_abs_diff_eq!(
            Kernel::gaussian(1.0).eval(&e1, &e2),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            Kernel::laplacian(2.0).eval(&e1, &e2),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(Kernel::polynomial(3).eval(&e1, &e1), 8.0);
    }

    #[test]
    fn mixture_is_convex_combination() {
        let k = Kernel::mixture(vec![
            (0.6, Kernel::gaussian(0.8)),
            (0.4, Kernel::laplacian(1.0)),
        ])
        .unwrap();
        let a = [0.3, -0.2, 1.1];
        let b = [-0.5, 0.9, 0.4];
        let expect =
            0.6 * Kernel::gaussian(0.8).eval(&a, &b) + 0.4 * Kernel::laplacian(1.0).eval(&a, &b);
        assert_abs_diff_eq!(k.eval(&a, &b), expect, epsilon = 1e-15);
    }

    #[test]
    fn mixture_weight_sum_enforced() {
        assert!(Kernel::mixture(vec![
            (0.6, Kernel::Linear),
            (0.5, Kernel::gaussian(1.0)),
        ])
        .is_err());
        assert!(Kernel::mixture(vec![(-0.2, Kernel::Linear), (1.2, Kernel::Linear)]).is_err());
    }

    #[test]
    fn nested_mixtures_rejected() {
        let inner = Kernel::mixture(vec![(1.0, Kernel::Linear)]).unwrap();
        assert!(matches!(inner, Kernel::Mixture { .. }));
        assert!(Kernel::mixture(vec![(1.0, inner)]).is_err());
    }

    #[test]
    fn gram_matrices_are_psd() {
        let points = random_points(20, 4, 11);
        for kernel in [
            Kernel::Linear,
            Kernel::gaussian(0.8),
            Kernel::laplacian(1.0),
            Kernel::polynomial(3),
            Kernel::mixture(vec![(0.6, Kernel::gaussian(0.8)), (0.4, Kernel::laplacian(1.0))])
                .unwrap(),
        ] {
            let g = kernel.gram(&points);
            assert_eq!(g, g.transpose());
            let eigs = g.symmetric_eigenvalues();
            let max = eigs.iter().cloned().fold(f64::MIN, f64::max);
            let min = eigs.iter().cloned().fold(f64::MAX, f64::min);
            assert!(
                min >= -1e-9 * max.max(1.0),
                "kernel {kernel} produced eigenvalue {min} (max {max})"
            );
        }
    }

    #[test]
    fn parses_plain_and_mixture_specs() {
        assert_eq!("linear".parse::<Kernel>().unwrap(), Kernel::Linear);
        assert_eq!(
            "gaussian(0.8)".parse::<Kernel>().unwrap(),
            Kernel::gaussian(0.8)
        );
        assert_eq!(
            "polynomial(3)".parse::<Kernel>().unwrap(),
            Kernel::polynomial(3)
        );
        let mixed = "0.6*gaussian(0.8)+0.4*laplacian(1.0)".parse::<Kernel>().unwrap();
        assert_eq!(
            mixed,
            Kernel::Mixture {
                components: vec![
                    (0.6, Kernel::gaussian(0.8)),
                    (0.4, Kernel::laplacian(1.0)),
                ]
            }
        );
        assert!("0.6*gaussian(0.8)+0.3*laplacian(1.0)".parse::<Kernel>().is_err());
        assert!("banana(2)".parse::<Kernel>().is_err());
        assert!("gaussian(-1)".parse::<Kernel>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for spec in ["linear", "gaussian(0.8)", "0.6*gaussian(0.8)+0.4*laplacian(1.0)"] {
            let k: Kernel = spec.parse().unwrap();
            let again: Kernel = k.to_string().parse().unwrap();
            assert_eq!(k, again);
        }
    }
}
