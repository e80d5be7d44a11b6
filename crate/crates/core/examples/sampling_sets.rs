//! Jittered sampling sets, covering counts, maximal gaps and the two BUPUs.
//!
//! `cargo run --example sampling_sets -- [seed]`

use rksampling::sampling::{gap_counts, generate_jittered, maximal_gap, normalized_indicator_bupu, voronoi_bupu, SamplingSet};

fn main() -> rksampling::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let set = generate_jittered(0.5, 0.3, vec![(-5.0, 5.0)], seed)?;
    let gap = maximal_gap(&set)?;
    println!("{} points on [-5, 5], maximal gap {gap:.4}", set.len());
    for d in [0.5 * gap, gap, 2.0 * gap] {
        let (a, b) = gap_counts(&set, d)?;
        println!("  delta {d:.4}: every point covered between {a} and {b} times");
    }

    let probes: Vec<Vec<f64>> = (0..1000).map(|i| vec![-5.0 + 0.01 * (i as f64 + 0.5)]).collect();
    let ind = normalized_indicator_bupu(&set, gap)?;
    let vor = voronoi_bupu(&set)?;
    for (name, b) in [("indicator", &ind), ("voronoi", &vor)] {
        let m = b.masses();
        println!(
            "{name:>9}: delta {:.4}, masses in [{:.4}, {:.4}], total {:.6}, partition residual {:.1e}",
            b.delta(),
            m.iter().copied().fold(f64::INFINITY, f64::min),
            m.iter().copied().fold(0.0, f64::max),
            b.summary().total_mass,
            b.partition_residual(&probes)
        );
    }

    // 2-D: Voronoi polygons tile the square
    let pts: Vec<Vec<f64>> = (0..25).map(|i| vec![(i % 5) as f64 + 0.2 * ((i * 7 % 3) as f64), (i / 5) as f64]).collect();
    let set2 = SamplingSet::new(pts, vec![(0.0, 5.0), (0.0, 5.0)])?;
    let v2 = voronoi_bupu(&set2)?;
    println!("2-D voronoi: total mass {:.6} on a square of area 25", v2.summary().total_mass);
    Ok(())
}
