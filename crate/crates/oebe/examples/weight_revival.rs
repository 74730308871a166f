//! Weight collapse and revival. A dynamic and a static copy of the same
//! expert run on a stream that is static at first and then starts drifting.
//! Plain averaging zeroes the dynamic expert's weight during the static
//! phase and can never bring it back; coupling the two copies with a small
//! switching probability keeps a live path and recovers within a few steps
//! of the drift onset.
//!
//! Run with: cargo run --release --example weight_revival

use nalgebra::DVector;

use oebe::basis::build_linear;
use oebe::bayes_linear::{ExpertModel, Likelihood};
use oebe::data::{gen_drift, DriftSchedule};
use oebe::ensemble::{build_edoebe, EnsembleState, DEFAULT_WEIGHT_FLOOR};

fn main() {
    let basis = build_linear(1, false).unwrap();
    let theta0 = DVector::from_vec(vec![1.0]);
    let onset = 2500;
    let records = gen_drift(
        &basis,
        &theta0,
        &DriftSchedule::WalkAfter {
            onset,
            step_var: 0.05,
        },
        0.5,
        4000,
        404,
    )
    .unwrap();

    let fresh = || ExpertModel::new(basis.clone(), 1.0, 0.25, 0.0, Likelihood::Gaussian).unwrap();
    let mut dynamic = fresh();
    dynamic.drift_var = 0.05;
    let mut plain = EnsembleState::new(vec![dynamic, fresh()], DEFAULT_WEIGHT_FLOOR).unwrap();
    let mut coupled =
        build_edoebe(vec![fresh()], &[0.05, 0.0], 0.01, DEFAULT_WEIGHT_FLOOR).unwrap();

    let mut plain_ll = 0.0;
    let mut coupled_ll = 0.0;
    println!("dynamic-expert weight (w_dyn), plain vs switching-coupled\n");
    println!("{:>6} {:>14} {:>14}", "t", "plain", "coupled");
    for r in &records {
        plain_ll += plain.step(&r.x, r.y, r.t).unwrap().log_mixture_density;
        coupled_ll += coupled.step(&r.x, r.y, r.t).unwrap().log_mixture_density;
        let near_onset = (onset - 5..=onset + 25).contains(&(r.t + 1)) && (r.t + 1) % 5 == 0;
        if (r.t + 1) % 500 == 0 || near_onset {
            println!(
                "{:>6} {:>14.3e} {:>14.3e}{}",
                r.t + 1,
                plain.weights[0],
                coupled.weights[0],
                if r.t + 1 == onset {
                    "   <- drift onset"
                } else {
                    ""
                }
            );
        }
    }
    println!("\ncumulative log-likelihood: plain {plain_ll:.1}, coupled {coupled_ll:.1}");
    println!(
        "plain ensemble left the dynamic expert at weight {} forever; \
         the coupled ensemble ended at {:.3}",
        plain.weights[0], coupled.weights[0]
    );
}
