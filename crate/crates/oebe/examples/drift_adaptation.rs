//! Static versus dynamic experts under concept drift: the same linear model
//! run with and without a random walk on its weights, on a drifting stream
//! and on an i.i.d. stream. Neither setting wins both.
//!
//! Run with: cargo run --release --example drift_adaptation

use nalgebra::DVector;

use oebe::basis::build_linear;
use oebe::bayes_linear::{ExpertModel, Likelihood};
use oebe::data::{gen_drift, DriftSchedule, StreamRecord};
use oebe::ensemble::{EnsembleState, DEFAULT_WEIGHT_FLOOR};

fn average_pll(records: &[StreamRecord], drift_var: f64) -> f64 {
    let basis = build_linear(2, true).unwrap();
    let expert = ExpertModel::new(basis, 1.0, 0.25, drift_var, Likelihood::Gaussian).unwrap();
    let mut state = EnsembleState::new(vec![expert], DEFAULT_WEIGHT_FLOOR).unwrap();
    let mut acc = 0.0;
    for r in records {
        acc += state.step(&r.x, r.y, r.t).unwrap().log_mixture_density;
    }
    acc / records.len() as f64
}

fn main() {
    let basis = build_linear(2, true).unwrap();
    let theta0 = DVector::from_vec(vec![0.3, 1.2, -0.8]);

    let drifting = gen_drift(
        &basis,
        &theta0,
        &DriftSchedule::RandomWalk { step_var: 1e-3 },
        0.5,
        4000,
        1,
    )
    .unwrap();
    let iid = gen_drift(&basis, &theta0, &DriftSchedule::Constant, 0.5, 4000, 2).unwrap();

    println!("average predictive log-likelihood (higher is better)\n");
    println!("{:<22} {:>10} {:>10}", "stream", "static", "dynamic");
    for (name, records) in [("drifting weights", &drifting), ("i.i.d.", &iid)] {
        let static_pll = average_pll(records, 0.0);
        let dynamic_pll = average_pll(records, 1e-3);
        println!("{name:<22} {static_pll:>10.4} {dynamic_pll:>10.4}");
    }
    println!("\nthe random walk pays off exactly when the task actually moves.");
}
