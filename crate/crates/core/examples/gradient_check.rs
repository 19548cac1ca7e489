//! Compares analytic policy gradients with central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netslice::neural::{GaussianPolicy, Mlp};

fn max_relative_error(analytic: &[f64], params: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let h = 1e-5;
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = f(&p);
        p[i] = orig - h;
        let down = f(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6));
    }
    worst
}

fn main() -> netslice::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sizes = [16, 64, 64, 8];
    let policy = GaussianPolicy::new(sizes[0], sizes[3], &sizes[1..3], 0.3, &mut rng);
    let obs: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (raw, logp) = policy.sample_action(&obs, &mut rng)?;

    let mut net_grad = vec![0.0; policy.mean_net.num_params()];
    let mut log_std_grad = vec![0.0; policy.act_dim()];
    policy.accumulate_log_prob_grad(&obs, &raw, 1.0, &mut net_grad, &mut log_std_grad)?;

    let err = max_relative_error(&net_grad, policy.mean_net.params(), |p| {
        let mut probe = policy.clone();
        probe.mean_net = Mlp::from_params(&sizes, p.to_vec()).unwrap();
        probe.log_prob(&obs, &raw).unwrap()
    });
    println!("log π = {logp:.4}; {} mean-network weights, max relative error {err:.2e}", net_grad.len());

    let err = max_relative_error(&log_std_grad, &policy.log_std, |s| {
        let mut probe = policy.clone();
        probe.log_std = s.to_vec();
        probe.log_prob(&obs, &raw).unwrap()
    });
    println!("{} log-std entries, max relative error {err:.2e}", log_std_grad.len());
    Ok(())
}
