//! Inspect the embedded queue-length chain behind the round robin delay
//! formula: stationary distribution, tail mass, and the two delay readings.

use scheddelay::analytic::mean_delay_rr;
use scheddelay::markov::{rr_mean_delay_numeric, rr_mean_delay_slots, solve_round_chain};

fn main() {
    let (xi, mu, k_s) = (0.1, 0.6, 3);
    let (tm, ss) = solve_round_chain(xi, mu, k_s).expect("stable rates");

    println!("truncation Q = {}, residual {:.2e}", tm.q, ss.residual);
    println!("kappa1 {:.4}  kappa2 {:.4}  kappa3 {:.4}", tm.kappa1, tm.kappa2, tm.kappa3);
    println!();
    println!("stationary occupancy at a round boundary:");
    for (i, v) in ss.v.iter().enumerate().take(8) {
        println!("  P[L = {i}] = {v:.6}");
    }
    let tail: f64 = ss.v.iter().skip(8).sum();
    println!("  P[L >= 8] = {tail:.2e}");
    println!();

    // round units count service opportunities; slot units interleave the
    // k_s - 1 arrival-only slots back in
    println!("mean delay in rounds: {:.4}", rr_mean_delay_numeric(&ss, mu));
    println!("mean delay in slots:  {:.4}", rr_mean_delay_slots(&ss, mu, xi, k_s));
    println!("closed form in slots: {:.4}", mean_delay_rr(mu, xi, k_s));
}
