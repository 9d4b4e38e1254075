//! Window assembly and Grassmannian observability features.
//!
//! A recording enters as a `T x q` matrix (time by node). Depending on the
//! task, samples are regrouped either into whole-network snapshots or into
//! per-node sliding buffers, and a kernel Gram/Hankel matrix is built around
//! each anchor time `t`. Its top left singular subspace is the feature: a
//! point on Gr(rho, m*N).
//!
//! The Gram/Hankel entry at row `a*N + b`, column `c*N + d` (with
//! `a < m`, `b, d < N`, `c < tau_b`) is
//!
//! ```text
//! (1/tau_f) * sum_{l=0}^{tau_f-1} kappa(y[t+1+a+b+l], y[t-c+d+l])
//! ```
//!
//! which depends on `(a, b, c, d)` only through `a + b` and `d - c`. The
//! builder therefore fills one small table indexed by those two differences
//! and broadcasts it, instead of summing the kernel once per entry.

use nalgebra::{DMatrix, SVD};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grassmann::GrassmannPoint;
use crate::kernels::Kernel;

/// Relative singular-value threshold under which the requested subspace rank
/// is declared unavailable.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative gap under which the singular values around position rho count as
/// tied, making the extracted subspace unstable.
const TIE_TOL: f64 = 1e-12;

/// A recording: rows are time samples, columns are nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix {
    data: DMatrix<f64>,
}

impl TimeSeriesMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 2 || data.ncols() < 1 {
            return Err(Error::input(format!(
                "time series must be at least 2x1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("time series contains non-finite entries"));
        }
        Ok(TimeSeriesMatrix { data })
    }

    /// Number of time samples T.
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // the invariant guarantees T >= 2
    }

    /// Number of nodes q.
    pub fn num_nodes(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// One node's scalar series.
    pub fn node_series(&self, node: usize) -> Vec<f64> {
        self.data.column(node).iter().copied().collect()
    }
}

/// Windowing and factorization parameters for feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct KarmaParams {
    /// Samples stacked per block (window length N).
    pub n: usize,
    /// Block rows m of the forward matrix.
    pub m: usize,
    /// Subspace rank rho.
    pub rho: usize,
    /// Forward averaging width tau_f.
    pub tau_f: usize,
    /// Backward width tau_b.
    pub tau_b: usize,
    /// Per-node buffer length (nodal mode only).
    pub buff: usize,
    /// Hop between consecutive anchors.
    pub stride: usize,
    /// Relative rank threshold for extraction.
    pub rank_tol: f64,
}

impl KarmaParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n", self.n),
            ("m", self.m),
            ("rho", self.rho),
            ("tau_f", self.tau_f),
            ("tau_b", self.tau_b),
            ("buff", self.buff),
            ("stride", self.stride),
        ] {
            if v == 0 {
                return Err(Error::config(format!("karma parameter {name} must be positive")));
            }
        }
        if self.rho > (self.m * self.n).min(self.tau_b * self.n) {
            return Err(Error::config(format!(
                "rho = {} exceeds min(m*N, tau_b*N) = {}",
                self.rho,
                (self.m * self.n).min(self.tau_b * self.n)
            )));
        }
        if !(self.rank_tol.is_finite() && self.rank_tol > 0.0) {
            return Err(Error::config("rank_tol must be positive"));
        }
        Ok(())
    }

    pub fn validate_for_len(&self, len: usize) -> Result<()> {
        self.validate()?;
        if self.m + self.tau_f + self.tau_b > len {
            return Err(Error::config(format!(
                "m + tau_f + tau_b = {} exceeds series length {len}",
                self.m + self.tau_f + self.tau_b
            )));
        }
        Ok(())
    }

    /// Inclusive anchor range `[tau_b - 1, L - 1 - (tau_f + m + N - 2)]`
    /// over a vector sequence of length `L`, or `None` when empty.
    pub fn anchor_range(&self, num_vectors: usize) -> Option<(usize, usize)> {
        let lo = self.tau_b - 1;
        let need_after = self.tau_f + self.m + self.n - 2;
        if num_vectors < need_after + 1 {
            return None;
        }
        let hi = num_vectors - 1 - need_after;
        if lo <= hi {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// All valid anchors at the configured stride.
    pub fn anchors(&self, num_vectors: usize) -> Vec<usize> {
        match self.anchor_range(num_vectors) {
            Some((lo, hi)) => (lo..=hi).step_by(self.stride).collect(),
            None => Vec::new(),
        }
    }
}

impl Default for KarmaParams {
    fn default() -> Self {
        KarmaParams {
            n: 30,
            m: 2,
            rho: 2,
            tau_f: 60,
            tau_b: 20,
            buff: 20,
            stride: 1,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Whole-network snapshots: one q-vector per time sample.
pub fn assemble_state_snapshots(ts: &TimeSeriesMatrix) -> Vec<Vec<f64>> {
    (0..ts.len())
        .map(|t| ts.data().row(t).iter().copied().collect())
        .collect()
}

/// Overlapping windows of one node's series: window `t` holds samples
/// `t .. t+buff-1`, for `t` in `0 .. T-buff`.
pub fn assemble_node_windows(series: &[f64], buff: usize) -> Result<Vec<Vec<f64>>> {
    if buff == 0 {
        return Err(Error::config("buffer length must be positive"));
    }
    if buff > series.len() {
        return Err(Error::input(format!(
            "buffer length {buff} exceeds series length {}",
            series.len()
        )));
    }
    Ok(series.windows(buff).map(|w| w.to_vec()).collect())
}

fn check_index_range(t: usize, p: &KarmaParams, len: usize) -> Result<()> {
    let lo = t as i64 - p.tau_b as i64 + 1;
    let hi = t as i64 + (p.tau_f + p.m + p.n) as i64 - 2;
    if lo < 0 {
        return Err(Error::OutOfRange { index: lo, lo: 0, hi: len as i64 - 1 });
    }
    if hi >= len as i64 {
        return Err(Error::OutOfRange { index: hi, lo: 0, hi: len as i64 - 1 });
    }
    Ok(())
}

/// The averaged kernel Gram/Hankel matrix around anchor `t`, of shape
/// `m*N x tau_b*N`.
pub fn gram_hankel(
    vectors: &[Vec<f64>],
    t: usize,
    p: &KarmaParams,
    kernel: &Kernel,
) -> Result<DMatrix<f64>> {
    p.validate()?;
    check_index_range(t, p, vectors.len())?;

    let n = p.n;
    let rows = p.m * n;
    let cols = p.tau_b * n;

    // table[s][d_off] = sum_l kappa(y[t+1+s+l], y[t+q+l]) with s = a+b,
    // q = d-c and d_off = q + tau_b - 1 >= 0.
    let n_s = p.m + n - 1;
    let n_q = p.tau_b + n - 1;
    let offset = p.tau_b as i64 - 1;
    let mut table = vec![vec![0.0f64; n_q]; n_s];
    for (s, row) in table.iter_mut().enumerate() {
        for (d_off, cell) in row.iter_mut().enumerate() {
            let q = d_off as i64 - offset;
            let mut acc = 0.0;
            for l in 0..p.tau_f {
                let u = t + 1 + s + l;
                let v = (t as i64 + q + l as i64) as usize;
                acc += kernel.eval(&vectors[u], &vectors[v]);
            }
            *cell = acc;
        }
    }

    let scale = 1.0 / p.tau_f as f64;
    let mut g = DMatrix::zeros(rows, cols);
    for a in 0..p.m {
        for b in 0..n {
            let s = a + b;
            for c in 0..p.tau_b {
                for d in 0..n {
                    let d_off = (d as i64 - c as i64 + offset) as usize;
                    g[(a * n + b, c * n + d)] = scale * table[s][d_off];
                }
            }
        }
    }
    Ok(g)
}

/// Diagnostics attached to a single extracted feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDiagnostics {
    /// sigma_rho / sigma_1.
    pub sv_ratio: f64,
    /// sigma_{rho+1} / sigma_1 (0 when there is no further singular value).
    pub next_sv_ratio: f64,
    /// Singular values sigma_rho and sigma_{rho+1} are numerically tied, so
    /// the chosen subspace is not stable.
    pub unstable_tie: bool,
}

/// The observability feature at anchor `t` plus diagnostics.
pub fn extract_feature_detailed(
    vectors: &[Vec<f64>],
    t: usize,
    p: &KarmaParams,
    kernel: &Kernel,
) -> Result<(GrassmannPoint, FeatureDiagnostics)> {
    let g = gram_hankel(vectors, t, p, kernel)?;
    let svd = SVD::new(g, true, false);
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());

    let s1 = sv[order[0]];
    let s_rho = sv[order[p.rho - 1]];
    if !(s_rho > p.rank_tol * s1) {
        return Err(Error::degenerate(format!(
            "Gram/Hankel numerical rank below rho = {}: sigma_rho/sigma_1 = {:e}",
            p.rho,
            if s1 > 0.0 { s_rho / s1 } else { 0.0 }
        )));
    }

    let u = svd.u.as_ref().expect("svd with u");
    let mut basis = DMatrix::zeros(u.nrows(), p.rho);
    for (j, &col) in order[..p.rho].iter().enumerate() {
        basis.set_column(j, &u.column(col));
    }
    let next = if order.len() > p.rho { sv[order[p.rho]] } else { 0.0 };
    let diag = FeatureDiagnostics {
        sv_ratio: s_rho / s1,
        next_sv_ratio: next / s1,
        unstable_tie: (s_rho - next).abs() <= TIE_TOL * s1,
    };
    Ok((GrassmannPoint::new(basis)?, diag))
}

/// The observability feature at anchor `t`.
pub fn extract_feature(
    vectors: &[Vec<f64>],
    t: usize,
    p: &KarmaParams,
    kernel: &Kernel,
) -> Result<GrassmannPoint> {
    extract_feature_detailed(vectors, t, p, kernel).map(|(pt, _)| pt)
}

/// Features over a whole anchor set, with per-anchor failure reporting.
#[derive(Debug, Clone)]
pub struct HorizonFeatures {
    /// Successful extractions in anchor order.
    pub features: Vec<(usize, GrassmannPoint)>,
    /// Anchors that failed, with the reason.
    pub failures: Vec<(usize, String)>,
    /// Anchors whose subspace came from a tied spectrum.
    pub unstable: Vec<usize>,
}

/// Runs [`extract_feature`] across `anchors` (in parallel), preserving anchor
/// order in the output. Fails only when no anchor succeeds.
pub fn extract_features_over_horizon(
    vectors: &[Vec<f64>],
    anchors: &[usize],
    p: &KarmaParams,
    kernel: &Kernel,
) -> Result<HorizonFeatures> {
    let results: Vec<(usize, Result<(GrassmannPoint, FeatureDiagnostics)>)> = anchors
        .par_iter()
        .map(|&t| (t, extract_feature_detailed(vectors, t, p, kernel)))
        .collect();

    let mut out = HorizonFeatures {
        features: Vec::with_capacity(anchors.len()),
        failures: Vec::new(),
        unstable: Vec::new(),
    };
    for (t, res) in results {
        match res {
            Ok((pt, diag)) => {
                if diag.unstable_tie {
                    out.unstable.push(t);
                }
                out.features.push((t, pt));
            }
            Err(e) => out.failures.push((t, e.to_string())),
        }
    }
    if out.features.is_empty() && !anchors.is_empty() {
        let preview: Vec<String> = out
            .failures
            .iter()
            .take(3)
            .map(|(t, e)| format!("anchor {t}: {e}"))
            .collect();
        return Err(Error::degenerate(format!(
            "no anchor produced a feature ({} attempted; first failures: {})",
            anchors.len(),
            preview.join("; ")
        )));
    }
    Ok(out)
}
