use scheddelay::analytic::{
    cdf_delay_rr, cdf_delay_rs, mean_delay_rr, mean_delay_rs, solve_meta_distribution,
    FixedPointParams,
};
use scheddelay::channel::ChannelParams;

// Delay distributions under both schedulers for one load point, printed as
// a small table. The closed-form means use the cell-averaged service rate,
// so they are a sanity reference rather than an exact match.
fn main() {
    let channel = ChannelParams::from_db(3.8, 0.0, 23.0).unwrap();
    let (xi, k_s) = (0.05, 3);
    let f = solve_meta_distribution(&FixedPointParams::default(), &channel, xi, k_s).unwrap();

    println!("{:>8} {:>12} {:>12}", "T", "rs cdf", "rr cdf");
    for t in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0] {
        let rs = cdf_delay_rs(&f, t, xi, k_s);
        let rr = cdf_delay_rr(&f, t, xi, k_s);
        println!("{t:>8} {rs:>12.6} {rr:>12.6}");
    }

    let mu = 0.7; // a typical cell-level service rate at this load
    println!();
    println!("closed-form means at mu = {mu}:");
    println!("  rs {:.3} slots", mean_delay_rs(mu, xi, k_s));
    println!("  rr {:.3} slots", mean_delay_rr(mu, xi, k_s));
}
