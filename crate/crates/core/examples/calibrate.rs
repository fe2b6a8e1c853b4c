//! Finds the failure threshold that gives a target failure probability.
//!
//! `cargo run --release --example calibrate -- <discrete|continuous> <target_mu> <samples> [seed]`

use seqais::mdp::{rollout, stream_rng, NominalProposal};
use seqais::par;
use seqais::pendulum::Pendulum;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let env = match args.get(1).map(String::as_str) {
        Some("continuous") => Pendulum::continuous(),
        _ => Pendulum::discrete(),
    };
    let target: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2.53e-5);
    let samples: u64 = args.get(3).and_then(|s| s.parse::<f64>().ok()).map_or(10_000_000, |x| x as u64);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(12345);

    // Keep only the upper tail of the return distribution.
    let floor = 0.12;
    const CHUNK: u64 = 1 << 16;
    let chunks = samples.div_ceil(CHUNK) as usize;
    let mut tail: Vec<f64> = par::map_indexed(chunks, |c| {
        let start = c as u64 * CHUNK;
        (start..(start + CHUNK).min(samples))
            .map(|i| rollout(&env, &NominalProposal, 0, &mut stream_rng(seed, i)).unwrap().ret)
            .filter(|&r| r > floor)
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    tail.sort_by(|a, b| b.total_cmp(a));

    let k = (target * samples as f64).round() as usize;
    println!("{} returns above {floor} in {samples} samples", tail.len());
    if k == 0 || k > tail.len() {
        println!("target rank {k} outside the recorded tail");
        return;
    }
    let gamma = 0.5 * (tail[k - 1] + tail.get(k).copied().unwrap_or(floor));
    println!("gamma for mu = {target:e}: {gamma:.6} (rank {k})");
    for g in [gamma - 0.001, gamma, gamma + 0.001] {
        let n = tail.iter().filter(|&&r| r > g).count();
        println!("  gamma {g:.6}: mu = {:e}", n as f64 / samples as f64);
    }
}
