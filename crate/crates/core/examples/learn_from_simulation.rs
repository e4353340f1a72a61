//! Simulates a random linear-Gaussian model under single-node perfect
//! interventions and learns it back.
//!
//! cargo run --release --example learn_from_simulation -- 8 5000

use igsp::bench::hamming_distance;
use igsp::igsp::{igsp_learn, SearchConfig};
use igsp::interventions::i_markov_equivalent;
use igsp::semsim::{sample_data, sample_random_dag, sample_weights, specs_for_family, InterventionKind};
use igsp::stats::Decider;
use igsp::{GaussianCi64, GaussianInvariance64, TargetFamily};

fn main() -> igsp::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("numeric argument"));
    let p = args.next().unwrap_or(8);
    let n = args.next().unwrap_or(5000);

    let truth = sample_random_dag(p, 1.5, 1)?;
    let model = sample_weights::<f64>(&truth, 2);
    let fam = TargetFamily::all_singletons(p);
    let data = sample_data(&model, &specs_for_family(&fam, InterventionKind::Perfect)?, n, 3)?;

    let dec = Decider::new(
        Box::new(GaussianCi64::new(&data, 1e-3)?),
        Some(Box::new(GaussianInvariance64::new(&data, 1e-3)?)),
    );
    let cfg = SearchConfig::new(fam.clone())?.with_pool(true).with_restarts(3, 4);
    let r = igsp_learn(&dec, &cfg)?;

    println!("true edges:    {:?}", truth.to_json().edges);
    println!("learned edges: {:?}", r.dag.to_json().edges);
    println!(
        "hamming {}, same I-MEC {}, {} CI tests",
        hamming_distance(&truth, &r.dag)?,
        i_markov_equivalent(&truth, &r.dag, &fam)?,
        dec.counts().ci_queries
    );
    Ok(())
}
