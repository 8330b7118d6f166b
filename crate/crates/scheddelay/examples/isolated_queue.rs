use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scheddelay::analytic::{mean_delay_rr, mean_delay_rs, tau_a};
use scheddelay::queuesim::{run_isolated_queue, PolicyKind};

// One cell in isolation: service is a Bernoulli coin, no interference. The
// Monte Carlo estimates should land on the closed forms once the horizon is
// long enough.
fn main() {
    let slots = 2_000_000;
    println!(
        "{:>5} {:>5} {:>4} {:>7} {:>9} {:>9} {:>9} {:>9}",
        "mu", "xi", "k", "policy", "mc delay", "closed", "mc act", "tau_a"
    );
    for (mu, xi, k_s) in [(0.6, 0.1, 3usize), (0.8, 0.05, 4), (0.9, 0.3, 1)] {
        for policy in [PolicyKind::Rs, PolicyKind::Rr] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let run = run_isolated_queue(mu, xi, k_s, policy, slots, &mut rng);
            assert!(!run.unstable);
            let closed = match policy {
                PolicyKind::Rs => mean_delay_rs(mu, xi, k_s),
                PolicyKind::Rr => mean_delay_rr(mu, xi, k_s),
            };
            println!(
                "{mu:>5} {xi:>5} {k_s:>4} {:>7} {:>9.4} {closed:>9.4} {:>9.4} {:>9.4}",
                policy.to_string(),
                run.mean_delay,
                run.activity_freq,
                tau_a(mu, xi, k_s),
            );
        }
    }
}
