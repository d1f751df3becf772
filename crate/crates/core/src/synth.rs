//! Synthetic activity traces with known causal ground truth: the four
//! leader/follower scenarios at pair scale and a population generator for
//! labelled test corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::ingest::{ActivityTrace, Event, Label};

/// Leader/follower behaviour spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Leader posts at fixed intervals; the follower reacts to every event.
    RegularLeader,
    /// Leader is a Poisson process; the follower reacts to every event.
    IrregularLeader,
    /// Poisson leader plus independent Poisson noise in the follower trace.
    IrregularLeaderNoisyFollower,
    /// Both users are independent Poisson processes; no causal link.
    IndependentRandom,
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regular-leader" | "regular_leader" => Ok(ScenarioKind::RegularLeader),
            "irregular-leader" | "irregular_leader" => Ok(ScenarioKind::IrregularLeader),
            "irregular-leader-noisy-follower" | "irregular_leader_noisy_follower" => {
                Ok(ScenarioKind::IrregularLeaderNoisyFollower)
            }
            "independent-random" | "independent_random" => Ok(ScenarioKind::IndependentRandom),
            other => Err(format!("unknown scenario {other:?}")),
        }
    }
}

/// Reaction delay: a whole number of bins plus an optional uniform jitter in
/// seconds. Zero jitter keeps the lag an exact bin multiple so the causal
/// signal survives binning by construction; jitter stresses robustness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowLag {
    pub bins: u32,
    pub jitter_secs: i64,
}

impl FollowLag {
    pub fn fixed_bins(bins: u32) -> Self {
        FollowLag {
            bins,
            jitter_secs: 0,
        }
    }

    fn max_delay_secs(&self, bin_width: i64) -> i64 {
        i64::from(self.bins) * bin_width + self.jitter_secs
    }

    fn sample(&self, bin_width: i64, rng: &mut ChaCha8Rng) -> i64 {
        let base = i64::from(self.bins) * bin_width;
        if self.jitter_secs > 0 {
            base + rng.gen_range(0..self.jitter_secs)
        } else {
            base
        }
    }
}

/// Full description of one simulated leader/follower pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub duration_secs: i64,
    /// Bin width the follow lag is expressed against.
    pub bin_width: i64,
    pub leader_rate_per_hour: f64,
    pub follow_lag: FollowLag,
    /// Rate of the follower's independent events (noisy variant), and of the
    /// second user in the independent_random scenario.
    pub noise_rate_per_hour: f64,
    pub seed: u64,
}

/// splitmix64; used to derive independent per-stream seeds.
fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Homogeneous Poisson arrival times over `[0, horizon)` in integer seconds.
fn poisson_trace(rate_per_hour: f64, horizon_secs: i64, rng: &mut ChaCha8Rng) -> Vec<i64> {
    let mut times = Vec::new();
    if rate_per_hour <= 0.0 || horizon_secs <= 0 {
        return times;
    }
    let rate_per_sec = rate_per_hour / 3600.0;
    let exp = Exp::new(rate_per_sec).expect("positive rate");
    let mut t = 0.0f64;
    loop {
        t += exp.sample(rng);
        if t >= horizon_secs as f64 {
            break;
        }
        times.push(t as i64);
    }
    times
}

/// Regularly spaced arrival times over `[0, horizon)`.
fn regular_trace(rate_per_hour: f64, horizon_secs: i64) -> Vec<i64> {
    let mut times = Vec::new();
    if rate_per_hour <= 0.0 || horizon_secs <= 0 {
        return times;
    }
    let interval = 3600.0 / rate_per_hour;
    let mut t = interval / 2.0;
    while t < horizon_secs as f64 {
        times.push(t as i64);
        t += interval;
    }
    times
}

fn leader_trace(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<i64> {
    // Leaders stop early enough that every follower reaction lands inside
    // the window, keeping event counts equal in the noise-free scenarios.
    let horizon = spec.duration_secs - spec.follow_lag.max_delay_secs(spec.bin_width);
    match spec.kind {
        ScenarioKind::RegularLeader => regular_trace(spec.leader_rate_per_hour, horizon),
        ScenarioKind::IrregularLeader | ScenarioKind::IrregularLeaderNoisyFollower => {
            poisson_trace(spec.leader_rate_per_hour, horizon, rng)
        }
        ScenarioKind::IndependentRandom => {
            poisson_trace(spec.leader_rate_per_hour, spec.duration_secs, rng)
        }
    }
}

fn follower_trace(spec: &ScenarioSpec, leader: &[i64], rng: &mut ChaCha8Rng) -> Vec<i64> {
    let mut times: Vec<i64> = match spec.kind {
        ScenarioKind::IndependentRandom => {
            let rate = if spec.noise_rate_per_hour > 0.0 {
                spec.noise_rate_per_hour
            } else {
                spec.leader_rate_per_hour
            };
            poisson_trace(rate, spec.duration_secs, rng)
        }
        _ => {
            let mut reactions: Vec<i64> = leader
                .iter()
                .map(|&t| t + spec.follow_lag.sample(spec.bin_width, rng))
                .collect();
            if spec.kind == ScenarioKind::IrregularLeaderNoisyFollower {
                reactions.extend(poisson_trace(
                    spec.noise_rate_per_hour,
                    spec.duration_secs,
                    rng,
                ));
            }
            reactions
        }
    };
    times.retain(|&t| t >= 0 && t < spec.duration_secs);
    times.sort_unstable();
    times
}

/// Simulate one leader/follower pair. Returns the two traces and the
/// ground-truth influence edges (empty for `independent_random`).
pub fn simulate_pair(
    spec: &ScenarioSpec,
) -> (ActivityTrace, ActivityTrace, Vec<(String, String)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let leader_times = leader_trace(spec, &mut rng);
    let follower_times = follower_trace(spec, &leader_times, &mut rng);
    let leader = ActivityTrace {
        user_id: "leader".into(),
        timestamps: leader_times,
    };
    let follower = ActivityTrace {
        user_id: "follower".into(),
        timestamps: follower_times,
    };
    let ground_truth = match spec.kind {
        ScenarioKind::IndependentRandom => Vec::new(),
        _ => vec![("leader".to_string(), "follower".to_string())],
    };
    (leader, follower, ground_truth)
}

/// A population corpus: labelled events plus the ground-truth edge list.
#[derive(Debug, Clone)]
pub struct PopulationCorpus {
    pub events: Vec<Event>,
    pub labels: std::collections::BTreeMap<String, Label>,
    pub ground_truth: Vec<(String, String)>,
}

/// Simulate `n_groups` coordinated groups (one leader driving
/// `group_size - 1` followers each, per the scenario template) plus
/// independent Poisson normal users. Group members are labelled coordinated.
/// Deterministic under the seed; groups use derived per-stream seeds.
pub fn simulate_population(
    n_groups: usize,
    group_size: usize,
    normal_users: usize,
    template: &ScenarioSpec,
    normal_rate_per_hour: f64,
    seed: u64,
) -> PopulationCorpus {
    let mut events = Vec::new();
    let mut labels = std::collections::BTreeMap::new();
    let mut ground_truth = Vec::new();

    for g in 0..n_groups {
        if group_size == 0 {
            break;
        }
        let leader_id = format!("c{g:02}_00");
        let mut leader_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, (g as u64) << 16));
        let leader_times = leader_trace(template, &mut leader_rng);
        labels.insert(leader_id.clone(), Label::Coordinated);
        push_events(&mut events, &leader_id, &leader_times, Label::Coordinated);

        for f in 1..group_size {
            let follower_id = format!("c{g:02}_{f:02}");
            let stream = ((g as u64) << 16) | f as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream));
            let times = follower_trace(template, &leader_times, &mut rng);
            labels.insert(follower_id.clone(), Label::Coordinated);
            push_events(&mut events, &follower_id, &times, Label::Coordinated);
            ground_truth.push((leader_id.clone(), follower_id.clone()));
        }
    }

    for i in 0..normal_users {
        let user_id = format!("n{i:03}");
        let stream = (1u64 << 40) | i as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream));
        let times = poisson_trace(normal_rate_per_hour, template.duration_secs, &mut rng);
        labels.insert(user_id.clone(), Label::Normal);
        push_events(&mut events, &user_id, &times, Label::Normal);
    }

    events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.user_id.cmp(&b.user_id)));
    PopulationCorpus {
        events,
        labels,
        ground_truth,
    }
}

fn push_events(events: &mut Vec<Event>, user_id: &str, times: &[i64], label: Label) {
    for &t in times {
        events.push(Event {
            user_id: user_id.to_owned(),
            timestamp: t,
            text: None,
            lang: None,
            label: Some(label),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ScenarioKind) -> ScenarioSpec {
        ScenarioSpec {
            kind,
            duration_secs: 30 * 86_400,
            bin_width: 3600,
            leader_rate_per_hour: 2.0,
            follow_lag: FollowLag::fixed_bins(1),
            noise_rate_per_hour: 1.0,
            seed: 7,
        }
    }

    #[test]
    fn fixed_seed_reproduces_traces_bit_for_bit() {
        for kind in [
            ScenarioKind::RegularLeader,
            ScenarioKind::IrregularLeader,
            ScenarioKind::IrregularLeaderNoisyFollower,
            ScenarioKind::IndependentRandom,
        ] {
            let (l1, f1, g1) = simulate_pair(&spec(kind));
            let (l2, f2, g2) = simulate_pair(&spec(kind));
            assert_eq!(l1, l2);
            assert_eq!(f1, f2);
            assert_eq!(g1, g2);
        }
    }

    #[test]
    fn regular_zero_noise_preserves_event_counts() {
        let (leader, follower, truth) = simulate_pair(&spec(ScenarioKind::RegularLeader));
        assert_eq!(leader.len(), follower.len());
        assert!(!leader.is_empty());
        assert_eq!(truth.len(), 1);
    }

    #[test]
    fn fixed_lag_shifts_the_trace() {
        let s = spec(ScenarioKind::RegularLeader);
        let (leader, follower, _) = simulate_pair(&s);
        for (&l, &f) in leader.timestamps.iter().zip(&follower.timestamps) {
            assert_eq!(f - l, s.bin_width);
        }
    }

    #[test]
    fn independent_random_has_no_ground_truth() {
        let (_, _, truth) = simulate_pair(&spec(ScenarioKind::IndependentRandom));
        assert!(truth.is_empty());
    }

    #[test]
    fn poisson_rate_is_within_three_sigma() {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rate = 5.0;
            let horizon = 120 * 86_400i64; // 120 days
            let times = poisson_trace(rate, horizon, &mut rng);
            let expected = rate * horizon as f64 / 3600.0;
            let sigma = expected.sqrt();
            let n = times.len() as f64;
            assert!(
                (n - expected).abs() <= 3.0 * sigma,
                "seed {seed}: {n} events vs expected {expected}"
            );
            assert!(times.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn population_arithmetic() {
        let corpus = simulate_population(5, 10, 50, &spec(ScenarioKind::IrregularLeader), 2.0, 3);
        assert_eq!(corpus.labels.len(), 100);
        assert_eq!(corpus.ground_truth.len(), 45);
        let coordinated = corpus
            .labels
            .values()
            .filter(|&&l| l == Label::Coordinated)
            .count();
        assert_eq!(coordinated, 50);
        // Events sorted by (timestamp, user).
        assert!(corpus
            .events
            .windows(2)
            .all(|w| (w[0].timestamp, &w[0].user_id) <= (w[1].timestamp, &w[1].user_id)));
    }

    #[test]
    fn single_pair_population_reduces_to_simulate_pair() {
        let corpus = simulate_population(1, 2, 0, &spec(ScenarioKind::RegularLeader), 2.0, 3);
        assert_eq!(corpus.labels.len(), 2);
        assert_eq!(corpus.ground_truth, vec![("c00_00".to_string(), "c00_01".to_string())]);
        let leader_events = corpus.events.iter().filter(|e| e.user_id == "c00_00").count();
        let follower_events = corpus.events.iter().filter(|e| e.user_id == "c00_01").count();
        assert_eq!(leader_events, follower_events);
    }
}
