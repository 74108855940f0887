//! Brute-force recomputations of every fleet metric.

use rail_core::metrics::{self, MetricReport};
use rail_core::penalty::PenaltyConfig;
use rail_core::sim::{
    rollout, sample_initial_scene, Action, Controller, ExpertController, ExpertParams, Observation, RoadSpec,
    RolloutMode, Scene, SimConfig, Trajectory,
};
use rail_core::{seeded_rng, Result, Rng};
use rand::Rng as _;

/// Erratic driver that holds a random action for a few steps.
pub struct Erratic {
    rng: Rng,
    held: Vec<(Action, usize)>,
}

impl Erratic {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: seeded_rng(seed),
            held: Vec::new(),
        }
    }
}

impl Controller for Erratic {
    fn act(&mut self, _: &Scene, id: u32, _: &Observation) -> Result<Action> {
        let i = id as usize;
        if self.held.len() <= i {
            self.held.resize(i + 1, (Action::default(), 0));
        }
        if self.held[i].1 == 0 {
            let a = Action::new(self.rng.random_range(-5.0..3.0), self.rng.random_range(-0.2..0.2));
            self.held[i] = (a, self.rng.random_range(1..12));
        }
        self.held[i].1 -= 1;
        Ok(self.held[i].0)
    }
}

pub struct PairedSet {
    pub sim: SimConfig,
    pub expert: Vec<Vec<Trajectory>>,
    pub policy: Vec<Vec<Trajectory>>,
}

impl PairedSet {
    pub fn pairs(&self) -> Vec<(&Trajectory, &Trajectory)> {
        self.expert
            .iter()
            .zip(&self.policy)
            .flat_map(|(e, p)| e.iter().zip(p.iter()))
            .collect()
    }

    pub fn policy_flat(&self) -> Vec<Trajectory> {
        self.policy.iter().flatten().cloned().collect()
    }
}

/// A few rollouts of random scenes, each paired with its all-expert twin.
pub fn random_set(seed: u64) -> PairedSet {
    let mut rng = seeded_rng(seed);
    let mut sim = SimConfig::default();
    sim.n_agents = rng.random_range(3..9);
    sim.horizon = rng.random_range(20..60);
    let rollouts = rng.random_range(1..4);
    let (mut expert, mut policy) = (Vec::new(), Vec::new());
    for k in 0..rollouts {
        let scene = sample_initial_scene(&sim, seed * 100 + k).unwrap();
        let n = scene.vehicles.len();
        let mut ex = ExpertController::new(&ExpertParams::default(), n, seed + k);
        let mut er = Erratic::new(seed ^ (k + 7));
        expert.push(rollout(&scene, sim.horizon, &sim, &mut ex.clone(), &mut er, RolloutMode::AllExpert).unwrap());
        let replaced = rng.random_range(1..=n);
        policy.push(rollout(&scene, sim.horizon, &sim, &mut ex, &mut er, RolloutMode::ReplaceAgents(replaced)).unwrap());
    }
    PairedSet { sim, expert, policy }
}

pub fn rmse_oracle(set: &PairedSet, road: &RoadSpec) -> [Vec<f64>; 3] {
    let pairs = set.pairs();
    let h = pairs[0].0.records.len();
    let mut out = [vec![0.0; h], vec![0.0; h], vec![0.0; h]];
    for t in 0..h {
        let mut acc = [0.0; 3];
        for (e, p) in &pairs {
            let (a, b) = (e.records[t].state, p.records[t].state);
            acc[0] += (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
            let oa = a.y - road.lane_center(a.lane_index);
            let ob = b.y - road.lane_center(b.lane_index);
            acc[1] += (oa - ob).powi(2);
            acc[2] += (a.speed - b.speed).powi(2);
        }
        for k in 0..3 {
            out[k][t] = (acc[k] / pairs.len() as f64).sqrt();
        }
    }
    out
}

pub fn event_oracle(trajs: &[Trajectory]) -> [f64; 3] {
    let mut n = [0.0; 3];
    for tr in trajs {
        for r in &tr.records {
            if r.readout.d_c <= 0.0 {
                n[0] += 1.0;
            }
            if r.readout.d_road <= -0.1 {
                n[1] += 1.0;
            }
            if r.readout.accel <= -3.0 {
                n[2] += 1.0;
            }
        }
    }
    n.map(|c| c / trajs.len() as f64)
}

/// Count windows of 5 equal lanes that differ from the last settled lane.
pub fn lane_change_oracle(lanes: &[usize]) -> usize {
    let Some(&first) = lanes.first() else {
        return 0;
    };
    let (mut settled, mut count, mut i) = (first, 0, 1);
    while i < lanes.len() {
        let l = lanes[i];
        if l != settled && i + 5 <= lanes.len() && lanes[i..i + 5].iter().all(|&x| x == l) {
            count += 1;
            settled = l;
            i += 5;
        } else {
            i += 1;
        }
    }
    count
}

/// Timegaps from vehicle states, searching every vehicle of the same rollout.
pub fn timegap_oracle(set: &PairedSet) -> (f64, usize) {
    let range = set.sim.sensor_range;
    let (mut sum, mut n) = (0.0, 0);
    for run in &set.policy {
        for ego_tr in run {
            for (t, rec) in ego_tr.records.iter().enumerate() {
                let ego = rec.state;
                let mut leader: Option<(f64, u32, f64)> = None;
                for other_tr in run {
                    let o = other_tr.records[t].state;
                    if o.id == ego.id || o.lane_index != ego.lane_index {
                        continue;
                    }
                    let ahead = o.x > ego.x || (o.x == ego.x && o.id > ego.id);
                    let dx = o.x - ego.x;
                    if !ahead || dx.abs() > range {
                        continue;
                    }
                    let gap = dx.abs() - (ego.length + o.length) / 2.0;
                    let better = match leader {
                        None => true,
                        Some((d, id, _)) => dx.abs() < d || (dx.abs() == d && o.id < id),
                    };
                    if better {
                        leader = Some((dx.abs(), o.id, gap));
                    }
                }
                if let Some((_, _, gap)) = leader {
                    sum += gap / if ego.speed > 0.1 { ego.speed } else { 0.1 };
                    n += 1;
                }
            }
        }
    }
    (if n > 0 { sum / n as f64 } else { 0.0 }, n)
}

pub fn histogram_oracle(trajs: &[Trajectory]) -> Vec<f64> {
    let mut h = vec![0.0; 30];
    let mut total = 0.0;
    for tr in trajs {
        for r in &tr.records {
            let v = r.state.speed;
            let bin = (0..30)
                .find(|&k| (k == 0 && v < 1.0) || (k == 29 && v >= 29.0) || (v >= k as f64 && v < k as f64 + 1.0))
                .unwrap();
            h[bin] += 1.0;
            total += 1.0;
        }
    }
    h.iter().map(|c| c / total).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest discrepancy between the metrics module and the oracles on one set.
pub fn metrics_residual(seed: u64) -> f64 {
    let set = random_set(seed);
    let road = set.sim.road();
    let penalty = PenaltyConfig::binary();
    let pairs = set.pairs();
    let policy = set.policy_flat();
    let report: MetricReport = metrics::build_report(&pairs, set.policy.len(), &road, &penalty).unwrap();
    let rmse = rmse_oracle(&set, &road);
    let rates = event_oracle(&policy);
    let lanes: usize = policy
        .iter()
        .map(|t| lane_change_oracle(&t.records.iter().map(|r| r.state.lane_index).collect::<Vec<_>>()))
        .sum();
    let (tg, tg_n) = timegap_oracle(&set);
    let hist = histogram_oracle(&policy);
    assert_eq!(report.timegap_samples, tg_n);
    let mut worst: f64 = 0.0;
    worst = worst.max(max_abs_diff(&report.rmse_position, &rmse[0]));
    worst = worst.max(max_abs_diff(&report.rmse_lane_offset, &rmse[1]));
    worst = worst.max(max_abs_diff(&report.rmse_speed, &rmse[2]));
    worst = worst.max(max_abs_diff(
        &[report.collision_rate, report.offroad_rate, report.hard_brake_rate],
        &rates,
    ));
    worst = worst.max((report.lane_changes_per_vehicle - lanes as f64 / policy.len() as f64).abs());
    worst = worst.max((report.timegap_mean - tg).abs());
    worst.max(max_abs_diff(&report.speed_histogram, &hist))
}
