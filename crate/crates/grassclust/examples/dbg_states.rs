use grassclust::config::RunConfig;
use grassclust::grassmann::geodesic_distance;
use grassclust::karma::{assemble_node_windows, extract_feature};
use grassclust::kernels::Kernel;
use grassclust::synth::{gen_timeseries, Preset, Scenario};

fn feature_of(
    series: &[f64],
    s: usize,
    e: usize,
    t: usize,
    p: &grassclust::karma::KarmaParams,
    kernel: &Kernel,
) -> grassclust::grassmann::GrassmannPoint {
    let mut seg: Vec<f64> = series[s..=e].to_vec();
    let mean = seg.iter().sum::<f64>() / seg.len() as f64;
    for x in &mut seg {
        *x -= mean;
    }
    let mut windows = assemble_node_windows(&seg, p.buff).unwrap();
    for w in &mut windows {
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            for x in w {
                *x /= n;
            }
        }
    }
    extract_feature(&windows, t - s, p, kernel).unwrap()
}

fn main() {
    let cfg = RunConfig::default();
    let p = &cfg.communities.karma;
    let scenario = Scenario::preset(Preset::D1);

    let kernel = Kernel::gaussian(0.5);
    let mut total = 0usize;
    let mut correct = 0usize;
    for seed in 0..6u64 {
        let data = gen_timeseries(&scenario, seed).unwrap();
        for (s_idx, state) in scenario.states.iter().enumerate() {
            let (s, e) = data.state_bounds[s_idx];
            let lo = s + p.tau_b - 1;
            let hi = e - (p.tau_f + p.m + p.n + p.buff - 3);
            let t = (lo + hi) / 2;
            let m = &data.connectivity_per_state[s_idx];
            let centroids: Vec<usize> = state.communities.iter().map(|c| c[0]).collect();
            let latents = &data.latents_per_state[s_idx];
            let protos: Vec<_> = latents
                .iter()
                .map(|l| feature_of(l, 0, e - s, t - s, p, &kernel))
                .collect();
            let truth = state.node_communities();
            for v in 0..state.num_nodes() {
                let f = feature_of(&data.series.node_series(v), s, e, t, p, &kernel);
                let mut d_all: Vec<(f64, usize)> = protos
                    .iter()
                    .enumerate()
                    .map(|(j, pr)| (geodesic_distance(&f, pr).unwrap(), j))
                    .collect();
                d_all.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let best = d_all[0].1;
                total += 1;
                if best == truth[v] {
                    correct += 1;
                } else {
                    let g_own = m[(v, centroids[truth[v]])];
                    let g_chosen = m[(v, centroids[best])];
                    let d_own = d_all.iter().find(|x| x.1 == truth[v]).unwrap().0;
                    println!(
                        "seed {seed} s{s_idx} v{v}: chose c{best} (g {g_chosen:+.2}, d {:.2}) over c{} (g {g_own:+.2}, d {d_own:.2})",
                        d_all[0].0, truth[v]
                    );
                }
            }
        }
    }
    println!("tone-prototype 1-NN accuracy {:.3}", correct as f64 / total as f64);
}
