use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scheddelay::channel::ChannelParams;
use scheddelay::geometry::{sample_realization, SimWindow};
use scheddelay::queuesim::{run_network, PolicyKind};

fn main() {
    // a (1200 m)^2 torus keeps this to a couple of seconds; the shipped
    // scenario defaults use 2000 m
    let window = SimWindow::new(1200.0, true, 0.5).unwrap();
    let net = sample_realization(1e-4, 3, &window, 42).expect("geometry");
    let channel = ChannelParams::from_db(3.8, 0.0, 23.0).unwrap();
    let xi = 0.05;

    println!("{} cells, {} UEs each, xi = {xi}", net.n_saps(), net.k_s());

    for policy in [PolicyKind::Rs, PolicyKind::Rr] {
        // same seed for both policies: the arrival and fading streams line up
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let stats = run_network(&net, policy, &channel, xi, 2000, 10_000, &mut rng).unwrap();
        let delays: Vec<f64> = stats.resolved().collect();
        let mean = delays.iter().sum::<f64>() / delays.len() as f64;
        println!(
            "{policy}: mean delay {mean:.2} slots over {} inner-region UEs ({} unresolved)",
            delays.len(),
            stats.n_unresolved()
        );
    }
}
