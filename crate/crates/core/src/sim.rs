//! Slot-by-slot Monte Carlo simulation of the primary queue, the energy
//! buffer and the secondary link.
//!
//! Each slot runs in this order:
//! 1. a primary packet arrives with probability `λ_p`;
//! 2. a non-empty primary queue transmits and its head departs on success;
//! 3. if the primary stayed silent, the secondary draws a spend level from
//!    its policy row, pays for it, and delivers on success;
//! 4. the Poisson harvest is added and the buffer is clipped at capacity.
//!
//! The buffer starts empty. Replications use independent streams of one
//! seeded generator and confidence intervals come from replication means.
//!
//! With [`PrimaryTraffic::Independent`] steps 1 and 2 are replaced by an
//! independent per-slot draw that leaves the channel idle with probability
//! `1 − λ_p/μ_p`. That is the primary behaviour the closed-form buffer
//! kernel assumes; a real queue has bursty busy periods instead, which
//! correlate with the buffer level.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::analytics::pu_idle_prob;
use crate::error::{Error, Result};
use crate::link::{
    primary_gain_threshold, primary_success_prob, secondary_gain_threshold,
    secondary_success_table,
};
use crate::params::SystemParams;
use crate::policy::AccessPolicy;

/// How channel successes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ServiceMode {
    /// One uniform draw against the closed-form success probability.
    #[default]
    Bernoulli,
    /// Explicit exponential fading gain compared with the outage threshold.
    ChannelGain,
}

/// How primary activity is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PrimaryTraffic {
    /// Bernoulli arrivals into a queue served by the fading link.
    #[default]
    Queue,
    /// Slot-by-slot independent idle/busy draws at the stationary idle
    /// probability.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Slots per replication, warmup included.
    pub slots: u64,
    pub seed: u64,
    pub replications: usize,
    /// Leading slots of each replication excluded from statistics.
    pub warmup_slots: u64,
    #[serde(default)]
    pub service: ServiceMode,
    #[serde(default)]
    pub primary: PrimaryTraffic,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            slots: 100_000,
            seed: 1,
            replications: 10,
            warmup_slots: 1_000,
            service: ServiceMode::Bernoulli,
            primary: PrimaryTraffic::Queue,
        }
    }
}

pub const MIN_SLOTS: u64 = 10_000;

impl SimConfig {
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.slots < MIN_SLOTS {
            out.push(format!("slots must be at least {MIN_SLOTS}, got {}", self.slots));
        }
        if self.warmup_slots >= self.slots {
            out.push(format!(
                "warmup_slots ({}) must be less than slots ({})",
                self.warmup_slots, self.slots
            ));
        }
        if self.replications == 0 {
            out.push("replications must be at least 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSimConfig(issues.join("; ")))
        }
    }
}

/// 99% confidence half-widths of the replication means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfWidths {
    pub mu_p: f64,
    pub pi_p: f64,
    pub mu_e: f64,
    pub mu_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    /// Fraction of primary transmissions that succeeded.
    pub est_mu_p: f64,
    /// Fraction of slots the primary left idle.
    pub est_pi_p: f64,
    /// Energy packets spent per slot.
    pub est_mu_e: f64,
    /// Secondary packets delivered per slot.
    pub est_mu_s: f64,
    pub half_width_99: HalfWidths,
    /// Occupancy of each buffer level at the start of a slot.
    pub state_histogram: Vec<f64>,
    /// Standard error of each histogram entry across replications.
    pub state_histogram_se: Vec<f64>,
    pub seed: u64,
    pub replications: usize,
    pub slots_per_replication: u64,
    pub warmup_slots: u64,
    pub service: ServiceMode,
    pub primary: PrimaryTraffic,
    pub totals: Totals,
}

/// Raw counters summed over replications and over every slot, warmup
/// included.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub slots: u64,
    pub idle_slots: u64,
    pub delivered: u64,
    pub consumed: u64,
    pub harvested: u64,
}

impl Totals {
    fn add(&mut self, other: &Totals) {
        self.slots += other.slots;
        self.idle_slots += other.idle_slots;
        self.delivered += other.delivered;
        self.consumed += other.consumed;
        self.harvested += other.harvested;
    }
}

#[derive(Debug, Clone)]
struct Replication {
    measured: u64,
    busy: u64,
    departures: u64,
    idle: u64,
    consumed: u64,
    delivered: u64,
    occupancy: Vec<u64>,
    totals: Totals,
}

struct Model {
    lambda_p: f64,
    /// Idle probability used in independent-activity mode.
    idle: f64,
    primary: PrimaryTraffic,
    mu_p: f64,
    primary_threshold: f64,
    gain_ppd: f64,
    secondary_success: Vec<f64>,
    secondary_threshold: Vec<f64>,
    gain_ssd: f64,
    harvest: Option<Poisson<f64>>,
    cumulative: Vec<Vec<f64>>,
    cap: usize,
    service: ServiceMode,
}

impl Model {
    fn primary_success(&self, rng: &mut ChaCha8Rng) -> bool {
        match self.service {
            ServiceMode::Bernoulli => rng.gen::<f64>() < self.mu_p,
            ServiceMode::ChannelGain => {
                let h: f64 = Exp1.sample(rng);
                h * self.gain_ppd >= self.primary_threshold
            }
        }
    }

    fn secondary_success(&self, rng: &mut ChaCha8Rng, spend: usize) -> bool {
        match self.service {
            ServiceMode::Bernoulli => rng.gen::<f64>() < self.secondary_success[spend],
            ServiceMode::ChannelGain => {
                let h: f64 = Exp1.sample(rng);
                h * self.gain_ssd >= self.secondary_threshold[spend]
            }
        }
    }

    fn draw_spend(&self, rng: &mut ChaCha8Rng, level: usize) -> usize {
        let cdf = &self.cumulative[level];
        let u: f64 = rng.gen();
        cdf.iter().position(|&c| u < c).unwrap_or(level)
    }

    fn run(&self, seed: u64, stream: u64, slots: u64, warmup: u64) -> Replication {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut rep = Replication {
            measured: 0,
            busy: 0,
            departures: 0,
            idle: 0,
            consumed: 0,
            delivered: 0,
            occupancy: vec![0; self.cap + 1],
            totals: Totals::default(),
        };
        let mut queue: u64 = 0;
        let mut level: usize = 0;

        for t in 0..slots {
            let measure = t >= warmup;
            if measure {
                rep.measured += 1;
                rep.occupancy[level] += 1;
            }
            let busy = match self.primary {
                PrimaryTraffic::Queue => {
                    if rng.gen::<f64>() < self.lambda_p {
                        queue += 1;
                    }
                    queue > 0
                }
                PrimaryTraffic::Independent => rng.gen::<f64>() >= self.idle,
            };
            if busy {
                if self.primary_success(&mut rng) {
                    queue = queue.saturating_sub(1);
                    if measure {
                        rep.departures += 1;
                    }
                }
                if measure {
                    rep.busy += 1;
                }
            } else {
                rep.totals.idle_slots += 1;
                let spend = if level > 0 { self.draw_spend(&mut rng, level) } else { 0 };
                level -= spend;
                rep.totals.consumed += spend as u64;
                let ok = spend > 0 && self.secondary_success(&mut rng, spend);
                if ok {
                    rep.totals.delivered += 1;
                }
                if measure {
                    rep.idle += 1;
                    rep.consumed += spend as u64;
                    rep.delivered += ok as u64;
                }
            }
            if let Some(dist) = &self.harvest {
                let h = dist.sample(&mut rng) as u64;
                rep.totals.harvested += h;
                level = (level as u64 + h).min(self.cap as u64) as usize;
            }
        }
        rep.totals.slots = slots;
        rep
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Two-sided 99% Student-t half-width of the mean; NaN with fewer than two
/// replications.
fn half_width(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let t = StudentsT::new(0.0, 1.0, (xs.len() - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.995);
    t * std_dev(xs) / (xs.len() as f64).sqrt()
}

pub fn simulate(params: &SystemParams, policy: &AccessPolicy, config: &SimConfig) -> Result<SimStats> {
    params.validate()?;
    config.validate()?;
    if policy.num_states() != params.num_states() {
        return Err(Error::Dimension(format!(
            "policy has {} states, energy_capacity {} needs {}",
            policy.num_states(),
            params.energy_capacity,
            params.num_states()
        )));
    }
    let rate = params.arrivals_per_slot();
    let cap = params.energy_capacity;
    let cumulative = policy
        .rows()
        .iter()
        .map(|row| {
            let mut acc = 0.0;
            row.iter()
                .map(|w| {
                    acc += w;
                    acc
                })
                .collect()
        })
        .collect();
    let model = Model {
        lambda_p: params.primary_arrival_rate,
        idle: pu_idle_prob(params)?.prob,
        primary: config.primary,
        mu_p: primary_success_prob(params)?,
        primary_threshold: primary_gain_threshold(params),
        gain_ppd: params.gain_ppd,
        secondary_success: secondary_success_table(params)?,
        secondary_threshold: (0..=cap).map(|j| secondary_gain_threshold(params, j)).collect(),
        gain_ssd: params.gain_ssd,
        harvest: (rate > 0.0).then(|| Poisson::new(rate).expect("positive finite rate")),
        cumulative,
        cap,
        service: config.service,
    };

    let reps: Vec<Replication> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| model.run(config.seed, r, config.slots, config.warmup_slots))
        .collect();

    let per_rep = |f: &dyn Fn(&Replication) -> f64| -> Vec<f64> { reps.iter().map(f).collect() };
    let pi = per_rep(&|r| r.idle as f64 / r.measured as f64);
    let mu_e = per_rep(&|r| r.consumed as f64 / r.measured as f64);
    let mu_s = per_rep(&|r| r.delivered as f64 / r.measured as f64);
    let mu_p: Vec<f64> = reps
        .iter()
        .filter(|r| r.busy > 0)
        .map(|r| r.departures as f64 / r.busy as f64)
        .collect();
    let busy: u64 = reps.iter().map(|r| r.busy).sum();
    let departures: u64 = reps.iter().map(|r| r.departures).sum();

    let states = cap + 1;
    let mut histogram = vec![0.0; states];
    let mut histogram_se = vec![0.0; states];
    for k in 0..states {
        let shares = per_rep(&|r| r.occupancy[k] as f64 / r.measured as f64);
        histogram[k] = mean(&shares);
        histogram_se[k] = std_dev(&shares) / (shares.len() as f64).sqrt();
    }
    let mut totals = Totals::default();
    for r in &reps {
        totals.add(&r.totals);
    }

    Ok(SimStats {
        est_mu_p: if busy > 0 { departures as f64 / busy as f64 } else { f64::NAN },
        est_pi_p: mean(&pi),
        est_mu_e: mean(&mu_e),
        est_mu_s: mean(&mu_s),
        half_width_99: HalfWidths {
            mu_p: half_width(&mu_p),
            pi_p: half_width(&pi),
            mu_e: half_width(&mu_e),
            mu_s: half_width(&mu_s),
        },
        state_histogram: histogram,
        state_histogram_se: histogram_se,
        seed: config.seed,
        replications: config.replications,
        slots_per_replication: config.slots,
        warmup_slots: config.warmup_slots,
        service: config.service,
        primary: config.primary,
        totals,
    })
}

/// Header of the simulation CSV row.
pub const CSV_HEADER: &str = "lambda_p,lambda_e,e_joules,E_max,est_mu_p,est_pi_p,est_mu_e,est_mu_s,\
hw99_mu_p,hw99_pi_p,hw99_mu_e,hw99_mu_s,policy_id,eq7_mode,seed";

impl SimStats {
    /// The `est_*` and `hw99_*` fields, comma-joined.
    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.est_mu_p,
            self.est_pi_p,
            self.est_mu_e,
            self.est_mu_s,
            self.half_width_99.mu_p,
            self.half_width_99.pi_p,
            self.half_width_99.mu_e,
            self.half_width_99.mu_s
        )
    }

    pub fn csv_row(&self, params: &SystemParams, policy_id: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            params.primary_arrival_rate,
            params.energy_arrival_rate,
            params.energy_per_packet_j,
            params.energy_capacity,
            self.csv_fields(),
            policy_id,
            params.noise_scaling.as_str(),
            self.seed
        )
    }
}
