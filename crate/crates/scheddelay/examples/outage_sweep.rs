//! Delay-outage comparison across cell sizes, the headline use of the
//! analytic pipeline. Uses the library call directly; the `outage-sweep`
//! CLI subcommand produces the same numbers as CSV.

use scheddelay::cli::{cmd_outage_sweep, ScenarioConfig};

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.t0 = 20.0;

    let k_list = [1, 2, 3, 4, 6, 8];
    let groups = cmd_outage_sweep(&cfg, &k_list, &[0.02, 0.10]).expect("solver");

    for (xi, rows) in groups {
        println!("xi = {xi}, outage threshold T0 = {}", cfg.t0);
        println!("{:>4} {:>10} {:>10} {:>10}", "k_s", "rs", "rr", "gap");
        let half = rows.len() / 2;
        for (rs, rr) in rows[..half].iter().zip(&rows[half..]) {
            let a = rs.analytic.unwrap();
            let b = rr.analytic.unwrap();
            println!("{:>4} {a:>10.5} {b:>10.5} {:>10.5}", rs.abscissa as usize, a - b);
        }
        println!();
    }
}
