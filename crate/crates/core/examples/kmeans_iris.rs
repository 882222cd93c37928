//! Repeated k-means on the Iris measurements with Lloyd iterations, GD and
//! AEGD, reporting how often each lands in the lower-error basin.

use aegd::kmeans::{load_iris, run_kmeans_experiment, KMeansMethod};

fn main() -> aegd::Result<()> {
    let data = load_iris(concat!(env!("CARGO_MANIFEST_DIR"), "/data/iris.csv"))?;
    for (method, eta) in [
        (KMeansMethod::Em, 0.0),
        (KMeansMethod::Gd, 1.0),
        (KMeansMethod::Aegd, 6.5),
    ] {
        let report = run_kmeans_experiment(&data, 3, method, eta, 100, 0)?;
        let (good, bad) = report.basin_means();
        println!(
            "{method:?} eta {eta}: improved basin {:.2} (mean {:.4}), other basin mean {:.4}",
            report.improved_frequency,
            good.unwrap_or(f64::NAN),
            bad.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
