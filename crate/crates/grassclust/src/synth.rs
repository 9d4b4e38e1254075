//! Synthetic recordings with known state, community, and subnetwork
//! structure, plus noiseless linear state-space data for the low-rank
//! factorization oracle.
//!
//! The network generator follows a community-latent-factor recipe: each
//! state carries a connectivity matrix `M = M_truth + M_noise + M_outlier`
//! (block ones, symmetric Gaussian noise of std `10^(sigma_db/20)`,
//! symmetric outlier entries equal to `mu`), every community produces one
//! damped-oscillator latent signal with state-specific frequency and
//! memory, and node `v` observes
//! `sum_j M[v, centroid_j] * latent_j` plus white noise. Communities in
//! different states may share a latent id, which makes them one persistent
//! subnetwork for the tracking task.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::karma::TimeSeriesMatrix;

/// Amplitude convention for dB noise levels: std = 10^(db/20).
pub fn db_to_std(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Default std of community latents (see `StateSpec::latent_amplitude`).
pub const DEFAULT_LATENT_AMPLITUDE: f64 = 0.4;

/// Default std of the additive per-sample measurement noise. Independent
/// of the connectivity noise level: `sigma_db` perturbs the mixing matrix
/// (how much foreign-community signal bleeds into a node), while this
/// floor models the recording itself.
pub const DEFAULT_SIGNAL_NOISE: f64 = 0.1;

/// Default oscillator parameters for hand-built states (stock states
/// override these per state).
pub const DEFAULT_LATENT_FREQ: f64 = 0.1;
pub const DEFAULT_LATENT_FREQ_STEP: f64 = 0.012;
pub const DEFAULT_LATENT_PHASE_JITTER: f64 = 0.15;

/// One network state: a community partition with its noise/outlier levels.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpec {
    /// Disjoint node-id groups covering 0..q.
    pub communities: Vec<Vec<usize>>,
    /// Latent-signal id per community. Communities of different states that
    /// share an id share the latent process (a persistent subnetwork).
    pub latent_ids: Vec<usize>,
    /// Outlier magnitude.
    pub mu: f64,
    /// Connectivity noise level in dB; `f64::NEG_INFINITY` disables noise.
    pub sigma_db: f64,
    /// Number of outlier entries (even; placed as symmetric pairs).
    pub n_outlier_entries: usize,
    /// Time samples in this state.
    pub samples: usize,
    /// Std of the additive per-sample signal noise.
    pub signal_noise: f64,
    /// Std of each community latent. Sets where typical snapshot distances
    /// land relative to the kernel width; the default keeps the stock
    /// Gaussian width responsive on ten-node recordings.
    pub latent_amplitude: f64,
    /// Top of this state's latent frequency band, in cycles per sample
    /// (0 ..= 0.5). Community `j` oscillates at
    /// `latent_freq - j * latent_freq_step`, so the band is the state's
    /// temporal signature and each community holds a distinct tone inside
    /// it — standing in for the distinct event timing real acquisition
    /// states would carry.
    pub latent_freq: f64,
    /// Frequency spacing between neighboring communities of this state.
    /// Must keep every community frequency positive; spacings well below
    /// one over the analysis window length make communities statistically
    /// indistinguishable.
    pub latent_freq_step: f64,
    /// Std of the random per-step phase increment, in radians. Zero gives
    /// a strictly periodic tone; larger values broaden the spectral line
    /// (coherence time scales like the inverse square). The envelope stays
    /// constant either way, so a latent never falls silent mid-state.
    pub latent_phase_jitter: f64,
}

impl StateSpec {
    pub fn new(communities: Vec<Vec<usize>>, mu: f64, sigma_db: f64, samples: usize) -> Self {
        let latent_ids = (0..communities.len()).collect();
        StateSpec {
            communities,
            latent_ids,
            mu,
            sigma_db,
            n_outlier_entries: 36,
            samples,
            signal_noise: DEFAULT_SIGNAL_NOISE,
            latent_amplitude: DEFAULT_LATENT_AMPLITUDE,
            latent_freq: DEFAULT_LATENT_FREQ,
            latent_freq_step: DEFAULT_LATENT_FREQ_STEP,
            latent_phase_jitter: DEFAULT_LATENT_PHASE_JITTER,
        }
    }

    /// Oscillator frequency of community `j` in this state.
    pub fn community_freq(&self, j: usize) -> f64 {
        self.latent_freq - j as f64 * self.latent_freq_step
    }

    pub fn with_latent_ids(mut self, ids: Vec<usize>) -> Self {
        self.latent_ids = ids;
        self
    }

    /// Total node count q implied by the partition.
    pub fn num_nodes(&self) -> usize {
        self.communities.iter().map(Vec::len).sum()
    }

    /// Community id of each node, as a dense vector over 0..q.
    pub fn node_communities(&self) -> Vec<usize> {
        let q = self.num_nodes();
        let mut out = vec![usize::MAX; q];
        for (c, members) in self.communities.iter().enumerate() {
            for &v in members {
                if v < q {
                    out[v] = c;
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.num_nodes();
        if q == 0 {
            return Err(Error::config("state has no nodes"));
        }
        let mut seen = vec![false; q];
        for members in &self.communities {
            if members.is_empty() {
                return Err(Error::config("empty community in state spec"));
            }
            for &v in members {
                if v >= q || seen[v] {
                    return Err(Error::config(format!(
                        "communities must partition node ids 0..{q} (offending id {v})"
                    )));
                }
                seen[v] = true;
            }
        }
        if self.latent_ids.len() != self.communities.len() {
            return Err(Error::config("one latent id per community required"));
        }
        if self.samples == 0 {
            return Err(Error::config("state needs at least 1 sample"));
        }
        if self.n_outlier_entries % 2 != 0 {
            return Err(Error::config("n_outlier_entries must be even (symmetric placement)"));
        }
        let capacity = q * (q - 1);
        if self.n_outlier_entries > capacity {
            return Err(Error::config(format!(
                "{} outlier entries exceed the {capacity} off-diagonal slots",
                self.n_outlier_entries
            )));
        }
        if self.signal_noise < 0.0 || self.latent_amplitude < 0.0 {
            return Err(Error::config("noise and amplitude levels must be nonnegative"));
        }
        if !(0.0..=0.5).contains(&self.latent_freq) {
            return Err(Error::config("latent_freq is in cycles per sample, 0 ..= 0.5"));
        }
        if self.latent_freq_step < 0.0 {
            return Err(Error::config("latent_freq_step must be nonnegative"));
        }
        let lowest = self.community_freq(self.communities.len() - 1);
        if self.communities.len() > 1 && lowest <= 0.0 {
            return Err(Error::config(format!(
                "latent_freq_step walks community frequencies below zero (last community at {lowest})"
            )));
        }
        if !(self.latent_decay > 0.0 && self.latent_decay < 1.0) {
            return Err(Error::config("latent_decay must lie strictly inside (0, 1)"));
        }
        Ok(())
    }

}

/// Effective connectivity of one state: block ones + symmetric Gaussian
/// noise + symmetric outliers.
pub fn gen_connectivity(spec: &StateSpec, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_connectivity_with(spec, &mut rng)
}

fn gen_connectivity_with(spec: &StateSpec, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let q = spec.num_nodes();
    let node_comm = spec.node_communities();

    let mut m = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            if node_comm[i] == node_comm[j] {
                m[(i, j)] = 1.0;
            }
        }
    }

    let noise_std = db_to_std(spec.sigma_db);
    for i in 0..q {
        for j in i..q {
            let e: f64 = rng.sample(StandardNormal);
            let v = noise_std * e;
            m[(i, j)] += v;
            if j != i {
                m[(j, i)] += v;
            }
        }
    }

    let pairs: Vec<(usize, usize)> =
        (0..q).flat_map(|i| ((i + 1)..q).map(move |j| (i, j))).collect();
    let chosen = index_sample(rng, pairs.len(), spec.n_outlier_entries / 2);
    for idx in chosen.iter() {
        let (i, j) = pairs[idx];
        m[(i, j)] += spec.mu;
        m[(j, i)] += spec.mu;
    }
    Ok(m)
}

/// A full multi-state scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub states: Vec<StateSpec>,
}

/// The six stock parameter settings: per-state (mu, sigma_db) pairs on a
/// fixed 10-node, 4-state, 150-samples-per-state layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d1" => Ok(Preset::D1),
            "d2" => Ok(Preset::D2),
            "d3" => Ok(Preset::D3),
            "d4" => Ok(Preset::D4),
            "d5" => Ok(Preset::D5),
            "d6" => Ok(Preset::D6),
            other => Err(Error::config(format!("unknown preset '{other}' (expected d1..d6)"))),
        }
    }
}

/// Latent band (top frequency, community spacing, decay) per stock state.
/// The four bands are disjoint with clear gaps, so the states carry
/// distinct temporal signatures; within a band each community holds its
/// own tone. States with more communities get the wider high bands.
const STOCK_LATENT_DYNAMICS: [(f64, f64, f64); 4] =
    [(0.25, 0.015, 0.98), (0.155, 0.014, 0.98), (0.088, 0.013, 0.98), (0.044, 0.012, 0.98)];

/// The fixed community layouts of the four stock states on 10 nodes,
/// ordered most-to-least fragmented to line up with the frequency bands
/// above (community count matches band capacity).
fn stock_partitions() -> Vec<Vec<Vec<usize>>> {
    vec![
        vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7], vec![8, 9]],
        vec![vec![0, 1], vec![2, 3], vec![4, 5, 6], vec![7, 8, 9]],
        vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8, 9]],
        vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]],
    ]
}

impl Scenario {
    pub fn preset(p: Preset) -> Scenario {
        let (mus, sigma): (Vec<f64>, f64) = match p {
            Preset::D1 => (vec![0.0; 4], -10.0),
            Preset::D2 => (vec![0.0; 4], -8.0),
            Preset::D3 => (vec![0.0; 4], -6.0),
            Preset::D4 => (vec![0.2, 0.3, 0.4, 0.5], -10.0),
            Preset::D5 => (vec![0.2, 0.3, 0.4, 0.5], -8.0),
            Preset::D6 => (vec![0.2, 0.3, 0.4, 0.5], -6.0),
        };
        let mut next_latent = 0;
        let states = stock_partitions()
            .into_iter()
            .zip(mus)
            .zip(STOCK_LATENT_DYNAMICS)
            .map(|((communities, mu), (freq, step, decay))| {
                let ids: Vec<usize> =
                    (0..communities.len()).map(|_| { let id = next_latent; next_latent += 1; id }).collect();
                let mut s = StateSpec::new(communities, mu, sigma, 150).with_latent_ids(ids);
                s.latent_freq = freq;
                s.latent_freq_step = step;
                s.latent_decay = decay;
                s
            })
            .collect();
        Scenario { states }
    }

    /// Keeps only the first `k` states (smaller demos).
    pub fn truncated(mut self, k: usize) -> Scenario {
        self.states.truncate(k);
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.states.first().map(StateSpec::num_nodes).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::config("scenario needs at least one state"));
        }
        let q = self.num_nodes();
        for s in &self.states {
            s.validate()?;
            if s.num_nodes() != q {
                return Err(Error::config("all states must cover the same node count"));
            }
        }
        Ok(())
    }
}

/// A generated recording with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub series: TimeSeriesMatrix,
    /// State index per time sample.
    pub time_labels: Vec<usize>,
    /// Per state: latent id per node. Within one state these are in
    /// bijection with its communities; across states equal ids mean one
    /// persistent subnetwork.
    pub node_labels_per_state: Vec<Vec<usize>>,
    /// Inclusive sample interval of each state.
    pub state_bounds: Vec<(usize, usize)>,
    /// Per state: the community latent realizations, one per community in
    /// partition order — the noise-free signals the nodes mix.
    pub latents_per_state: Vec<Vec<Vec<f64>>>,
    /// Per state: the realized connectivity matrix the mixing used.
    pub connectivity_per_state: Vec<DMatrix<f64>>,
}

/// One community latent: a lightly damped stochastic oscillator (an AR(2)
/// process with complex poles `decay * e^{+-2*pi*i*freq}`), burned in past
/// its transient and rescaled to zero mean / unit sample variance so
/// amplitudes are set in one place.
fn oscillator_latent(len: usize, freq: f64, decay: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let burn = (8.0 / (1.0 - decay)).ceil() as usize;
    let a1 = 2.0 * decay * (std::f64::consts::TAU * freq).cos();
    let a2 = -decay * decay;
    let mut x = Vec::with_capacity(len + burn);
    let (mut p1, mut p2) = (0.0f64, 0.0f64);
    for _ in 0..len + burn {
        let w: f64 = rng.sample(StandardNormal);
        let v = a1 * p1 + a2 * p2 + w;
        p2 = p1;
        p1 = v;
        x.push(v);
    }
    let mut x = x.split_off(burn);
    let mean = x.iter().sum::<f64>() / len as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len as f64;
    if var > 0.0 {
        let inv = var.sqrt().recip();
        for v in &mut x {
            *v = (*v - mean) * inv;
        }
    }
    x
}

/// Generates the concatenated multi-state recording plus ground truth.
pub fn gen_timeseries(scenario: &Scenario, seed: u64) -> Result<SimulatedDataset> {
    scenario.validate()?;
    let q = scenario.num_nodes();
    let total: usize = scenario.states.iter().map(|s| s.samples).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut data = DMatrix::zeros(total, q);
    let mut time_labels = Vec::with_capacity(total);
    let mut node_labels_per_state = Vec::with_capacity(scenario.states.len());
    let mut state_bounds = Vec::with_capacity(scenario.states.len());
    let mut latents_per_state = Vec::with_capacity(scenario.states.len());
    let mut connectivity_per_state = Vec::with_capacity(scenario.states.len());

    // Latents shared across states by id: keyed per state run, regenerated
    // only for ids not seen before within this dataset.
    use std::collections::BTreeMap;
    let mut latent_bank: BTreeMap<usize, Vec<f64>> = BTreeMap::new();

    let mut t0 = 0;
    for (s_idx, state) in scenario.states.iter().enumerate() {
        let m = gen_connectivity_with(state, &mut rng)?;
        let centroids: Vec<usize> = state.communities.iter().map(|c| c[0]).collect();

        let mut latents: Vec<Vec<f64>> = Vec::with_capacity(state.communities.len());
        for (j, &id) in state.latent_ids.iter().enumerate() {
            let latent = latent_bank
                .entry(id)
                .or_insert_with(|| {
                    oscillator_latent(state.samples, state.community_freq(j), state.latent_decay, &mut rng)
                })
                .clone();
            if latent.len() < state.samples {
                return Err(Error::config(format!(
                    "latent {id} is reused by a longer state ({} < {} samples)",
                    latent.len(),
                    state.samples
                )));
            }
            latents.push(latent);
        }

        let noise_std = state.signal_noise;
        let amp = state.latent_amplitude;
        for t in 0..state.samples {
            for v in 0..q {
                let mut val = 0.0;
                for (j, latent) in latents.iter().enumerate() {
                    val += m[(v, centroids[j])] * amp * latent[t];
                }
                let e: f64 = rng.sample(StandardNormal);
                data[(t0 + t, v)] = val + noise_std * e;
            }
            time_labels.push(s_idx);
        }

        let node_comm = state.node_communities();
        node_labels_per_state.push(node_comm.iter().map(|&c| state.latent_ids[c]).collect());
        state_bounds.push((t0, t0 + state.samples - 1));
        latents_per_state.push(latents);
        connectivity_per_state.push(m);
        t0 += state.samples;
    }

    Ok(SimulatedDataset {
        series: TimeSeriesMatrix::new(data)?,
        time_labels,
        node_labels_per_state,
        state_bounds,
        latents_per_state,
        connectivity_per_state,
    })
}

/// A linear state-space model `psi_t = A psi_{t-1} + w_t`,
/// `y_t = C psi_t + u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStateSpaceSpec {
    /// Output matrix, N x rho.
    pub c: DMatrix<f64>,
    /// State transition, rho x rho, spectral radius < 1.
    pub a: DMatrix<f64>,
    /// Initial state.
    pub psi0: DVector<f64>,
    /// Observation noise std.
    pub noise_y: f64,
    /// Process noise std.
    pub noise_psi: f64,
}

impl LinearStateSpaceSpec {
    pub fn new(c: DMatrix<f64>, a: DMatrix<f64>, psi0: DVector<f64>) -> Self {
        LinearStateSpaceSpec { c, a, psi0, noise_y: 0.0, noise_psi: 0.0 }
    }

    /// Builds the output matrix with the shift structure
    /// `row_i(C) = c0^T A^i`, which makes every window of the noiseless
    /// output an exact low-rank observable process. The factorization oracle
    /// relies on this form; an arbitrary `C` merely has full-rank
    /// observability without the windowed model being exact.
    pub fn observable(c0: RowDVector<f64>, a: DMatrix<f64>, n: usize, psi0: DVector<f64>) -> Self {
        let rho = a.nrows();
        let mut c = DMatrix::zeros(n, rho);
        let mut row = c0.clone();
        for i in 0..n {
            c.row_mut(i).copy_from(&row);
            row = &row * &a;
        }
        LinearStateSpaceSpec::new(c, a, psi0)
    }

    pub fn with_noise(mut self, noise_y: f64, noise_psi: f64) -> Self {
        self.noise_y = noise_y;
        self.noise_psi = noise_psi;
        self
    }

    pub fn rho(&self) -> usize {
        self.a.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.a.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max)
    }

    /// The stacked observability matrix `[C; CA; ...; CA^{m-1}]`.
    pub fn observability(&self, m: usize) -> DMatrix<f64> {
        let n = self.c.nrows();
        let rho = self.rho();
        let mut o = DMatrix::zeros(m * n, rho);
        let mut block = self.c.clone();
        for i in 0..m {
            o.view_mut((i * n, 0), (n, rho)).copy_from(&block);
            block = &block * &self.a;
        }
        o
    }

    pub fn validate(&self, test_m: usize) -> Result<()> {
        let rho = self.rho();
        if self.a.ncols() != rho || self.psi0.len() != rho || self.c.ncols() != rho {
            return Err(Error::config("inconsistent state dimension across C, A, psi0"));
        }
        let sr = self.spectral_radius();
        if sr >= 1.0 {
            return Err(Error::config(format!("spectral radius {sr} >= 1; state would diverge")));
        }
        let o = self.observability(test_m);
        let sv = o.svd(false, false).singular_values;
        let s1 = sv.iter().cloned().fold(0.0f64, f64::max);
        let s_rho = sv.iter().cloned().fold(f64::MAX, f64::min);
        if !(s_rho > 1e-10 * s1.max(1e-300)) {
            return Err(Error::config(format!(
                "observability matrix is rank deficient for m = {test_m}"
            )));
        }
        Ok(())
    }
}

/// 2x2 rotation by `angle`, scaled by `scale`. Convenient stable `A`.
pub fn scaled_rotation(angle: f64, scale: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c * scale, -s * scale, s * scale, c * scale])
}

/// Simulates the state space for `t_len` samples. Output is `t_len x N`.
pub fn gen_linear_ss(spec: &LinearStateSpaceSpec, t_len: usize, seed: u64) -> Result<TimeSeriesMatrix> {
    if t_len < 2 {
        return Err(Error::input("need at least 2 samples"));
    }
    spec.validate(1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.c.nrows();
    let rho = spec.rho();

    let mut data = DMatrix::zeros(t_len, n);
    let mut psi = spec.psi0.clone();
    for t in 0..t_len {
        if t > 0 {
            let w = DVector::from_fn(rho, |_, _| {
                spec.noise_psi * rng.sample::<f64, _>(StandardNormal)
            });
            psi = &spec.a * psi + w;
        }
        let mut y = &spec.c * &psi;
        for i in 0..n {
            y[i] += spec.noise_y * rng.sample::<f64, _>(StandardNormal);
        }
        data.row_mut(t).copy_from(&y.transpose());
    }
    TimeSeriesMatrix::new(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{self, GrassmannPoint};
    use crate::karma::{self, KarmaParams};
    use crate::kernels::Kernel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn connectivity_superposition() {
        let spec = StateSpec::new(vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]], 0.0, -10.0, 150);
        let m = gen_connectivity(&spec, 5).unwrap();
        assert_eq!(m.shape(), (10, 10));
        assert_eq!(m, m.transpose());
        // mu = 0: outliers contribute nothing; entries stay near the block
        // pattern at -10 dB noise (std ~0.316).
        assert!((m[(0, 1)] - 1.0).abs() < 1.5);
        assert!(m[(0, 9)].abs() < 1.5);
    }

    #[test]
    fn outlier_count_is_exact() {
        let mut spec = StateSpec::new(vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]], 0.2, -10.0, 150);
        spec.sigma_db = f64::NEG_INFINITY;
        let m = gen_connectivity(&spec, 5).unwrap();
        let mut count = 0;
        for i in 0..10 {
            for j in 0..10 {
                if i != j {
                    let truth = if (i < 5) == (j < 5) { 1.0 } else { 0.0 };
                    if (m[(i, j)] - truth).abs() > 1e-12 {
                        assert_abs_diff_eq!(m[(i, j)] - truth, 0.2, epsilon = 1e-12);
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 36);
    }

    #[test]
    fn noiseless_mu_zero_is_pure_blocks() {
        let mut spec = StateSpec::new(vec![vec![0, 1], vec![2, 3]], 0.0, f64::NEG_INFINITY, 10);
        spec.n_outlier_entries = 4;
        let m = gen_connectivity(&spec, 1).unwrap();
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
        );
        assert_eq!(m, expect);
    }

    #[test]
    fn outlier_capacity_checked() {
        let mut spec = StateSpec::new(vec![vec![0, 1, 2]], 0.5, -10.0, 10);
        spec.n_outlier_entries = 8; // capacity is 6
        assert!(matches!(gen_connectivity(&spec, 0), Err(Error::Config(_))));
        spec.n_outlier_entries = 3; // odd
        assert!(matches!(gen_connectivity(&spec, 0), Err(Error::Config(_))));
    }

    #[test]
    fn preset_shapes() {
        let sim = gen_timeseries(&Scenario::preset(Preset::D1), 3).unwrap();
        assert_eq!(sim.series.len(), 600);
        assert_eq!(sim.series.num_nodes(), 10);
        assert_eq!(sim.time_labels.len(), 600);
        assert_eq!(sim.time_labels[0], 0);
        assert_eq!(sim.time_labels[599], 3);
        assert_eq!(sim.node_labels_per_state.len(), 4);
        assert_eq!(sim.state_bounds[1], (150, 299));
    }

    #[test]
    fn single_community_zero_noise_columns_identical() {
        let mut spec = StateSpec::new(vec![vec![0, 1, 2]], 0.0, f64::NEG_INFINITY, 40);
        spec.n_outlier_entries = 0;
        let sim = gen_timeseries(&Scenario { states: vec![spec] }, 11).unwrap();
        let d = sim.series.data();
        for t in 0..40 {
            assert_abs_diff_eq!(d[(t, 0)], d[(t, 1)], epsilon = 1e-15);
            assert_abs_diff_eq!(d[(t, 0)], d[(t, 2)], epsilon = 1e-15);
        }
        // Cross-column correlation is exactly 1.
        let a = sim.series.node_series(0);
        let b = sim.series.node_series(1);
        let corr = correlation(&a, &b);
        assert_abs_diff_eq!(corr, 1.0, epsilon = 1e-12);
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        cov / (va.sqrt() * vb.sqrt())
    }

    #[test]
    fn generation_is_bit_deterministic() {
        let s1 = gen_timeseries(&Scenario::preset(Preset::D4), 21).unwrap();
        let s2 = gen_timeseries(&Scenario::preset(Preset::D4), 21).unwrap();
        assert_eq!(s1.series, s2.series);
        let s3 = gen_timeseries(&Scenario::preset(Preset::D4), 22).unwrap();
        assert_ne!(s1.series, s3.series);
    }

    #[test]
    fn shared_latents_persist_across_states() {
        let a = StateSpec::new(vec![vec![0, 1], vec![2, 3]], 0.0, f64::NEG_INFINITY, 30)
            .with_latent_ids(vec![0, 1]);
        let mut b = StateSpec::new(vec![vec![0, 1], vec![2, 3]], 0.0, f64::NEG_INFINITY, 30)
            .with_latent_ids(vec![0, 2]);
        b.n_outlier_entries = 0;
        let mut a = a;
        a.n_outlier_entries = 0;
        let sim = gen_timeseries(&Scenario { states: vec![a, b] }, 7).unwrap();
        let d = sim.series.data();
        // Community {0,1} reuses latent 0 in both states: node 0's signal in
        // state 2 repeats its state-1 signal.
        for t in 0..30 {
            assert_abs_diff_eq!(d[(t, 0)], d[(30 + t, 0)], epsilon = 1e-15);
        }
        assert_eq!(sim.node_labels_per_state[0], vec![0, 0, 1, 1]);
        assert_eq!(sim.node_labels_per_state[1], vec![0, 0, 2, 2]);
    }

    #[test]
    fn dead_transition_zeroes_output() {
        let spec = LinearStateSpaceSpec::new(
            DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
            DMatrix::zeros(1, 1),
            DVector::from_row_slice(&[3.0]),
        );
        let ts = gen_linear_ss(&spec, 5, 0).unwrap();
        assert!(ts.data().row(0).iter().any(|v| v.abs() > 0.0));
        for t in 1..5 {
            for v in ts.data().row(t).iter() {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn divergent_transition_rejected() {
        let spec = LinearStateSpaceSpec::new(
            DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
            DMatrix::from_row_slice(1, 1, &[1.01]),
            DVector::from_row_slice(&[1.0]),
        );
        assert!(matches!(gen_linear_ss(&spec, 10, 0), Err(Error::Config(_))));
    }

    #[test]
    fn factorization_oracle_rank_and_subspace() {
        // Noiseless observable process: the Gram/Hankel matrix under the
        // linear kernel has numerical rank rho and its column space matches
        // the stacked observability matrix.
        let n = 3;
        let m = 2;
        let rho = 2;
        let a = scaled_rotation(0.3, 0.95);
        let spec = LinearStateSpaceSpec::observable(
            RowDVector::from_row_slice(&[1.0, 0.25]),
            a,
            n,
            DVector::from_row_slice(&[1.0, -0.5]),
        );
        spec.validate(m).unwrap();
        let ts = gen_linear_ss(&spec, 80, 13).unwrap();
        let vectors = karma::assemble_state_snapshots(&ts);
        let p = KarmaParams {
            n,
            m,
            rho,
            tau_f: 20,
            tau_b: 10,
            buff: 1,
            stride: 1,
            rank_tol: 1e-10,
        };
        let t = 30;
        let g = karma::gram_hankel(&vectors, t, &p, &Kernel::Linear).unwrap();
        let sv = g.clone().svd(false, false).singular_values;
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert!(
            s[rho] / s[0] < 1e-8,
            "sigma_(rho+1)/sigma_1 = {:e} not < 1e-8",
            s[rho] / s[0]
        );

        let feature = karma::extract_feature(&vectors, t, &p, &Kernel::Linear).unwrap();
        let o = spec.observability(m);
        let o_point = GrassmannPoint::from_span(o).unwrap();
        let dist = grassmann::geodesic_distance(&feature, &o_point).unwrap();
        assert!(dist < 1e-6, "distance to observability span = {dist:e}");
    }
}
