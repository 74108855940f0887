use rail_core::critic::CriticParams;
use rail_core::numerics::{FlatParams, MlpSpec};
use rail_core::policy::PolicyParams;
use rail_core::seeded_rng;
use rand::Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

fn central_difference(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + H;
            let up = f(&p);
            p[i] = x[i] - H;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn random_vec(rng: &mut rail_core::Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

#[test]
fn policy_log_prob_gradient() {
    let mut rng = seeded_rng(5);
    let mut worst: f64 = 0.0;
    for case in 0..120 {
        let obs_dim = 1 + case % 5;
        let act_dim = 1 + case % 3;
        let spec = MlpSpec::new(vec![obs_dim, 4 + case % 4, 3, act_dim]).unwrap();
        let params = FlatParams(random_vec(&mut rng, spec.param_count(), 0.8));
        let log_std = random_vec(&mut rng, act_dim, 0.5);
        let policy = PolicyParams::new(spec, params, log_std).unwrap();
        let obs = random_vec(&mut rng, obs_dim, 1.5);
        let act = random_vec(&mut rng, act_dim, 1.0);
        let g = policy.log_prob_gradient(&obs, &act).unwrap();
        let fd = central_difference(&policy.flat(), |f| {
            policy.with_flat(f).unwrap().log_prob(&obs, &act).unwrap()
        });
        worst = worst.max(rel_err(&g, &fd));
    }
    assert!(worst <= TOL, "worst relative error {worst:e}");
}

#[test]
fn critic_score_gradient() {
    let mut rng = seeded_rng(6);
    let mut worst: f64 = 0.0;
    for case in 0..120 {
        let obs_dim = 1 + case % 4;
        let act_dim = 1 + case % 2;
        let spec = MlpSpec::new(vec![obs_dim + act_dim, 5, 1 + case % 6, 1]).unwrap();
        let params = FlatParams(random_vec(&mut rng, spec.param_count(), 0.9));
        let critic = CriticParams::new(spec.clone(), params, 1.0).unwrap();
        let obs = random_vec(&mut rng, obs_dim, 1.5);
        let act = random_vec(&mut rng, act_dim, 1.0);
        let g = critic.score_gradient(&obs, &act).unwrap();
        let fd = central_difference(critic.params().as_slice(), |p| {
            CriticParams::new(spec.clone(), FlatParams(p.to_vec()), 1.0)
                .unwrap()
                .score(&obs, &act)
                .unwrap()
        });
        worst = worst.max(rel_err(&g, &fd));
    }
    assert!(worst <= TOL, "worst relative error {worst:e}");
}
