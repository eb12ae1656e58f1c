//! Independent reference computations shared by the integration tests.
//! Nothing here calls the crate's link, chain or analytics code.
#![allow(dead_code, clippy::too_many_arguments, clippy::needless_range_loop)]

use ehaccess_core::{AccessPolicy, NoiseScaling, SystemParams};
use rand::Rng;

/// Smallest gain `g` with `duration·W·log2(1 + power·g/noise) ≥ β`, by
/// bisection on the rate inequality itself.
pub fn gain_threshold_by_bisection(p: &SystemParams, duration: f64, power: f64, noise: f64) -> f64 {
    let achieved = |g: f64| duration * p.bandwidth_hz * (1.0 + power * g / noise).log2();
    let mut hi = 1.0;
    while achieved(hi) < p.packet_bits {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if achieved(mid) >= p.packet_bits {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    hi
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson integral of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// `Pr{g ≥ threshold}` for an exponential gain of the given mean, by
/// integrating the density over `[threshold, threshold + 80·mean]`.
pub fn exp_tail_by_quadrature(threshold: f64, mean: f64) -> f64 {
    let density = |g: f64| (-g / mean).exp() / mean;
    // split so each piece decays by at most e^-8
    let mut total = 0.0;
    for k in 0..10 {
        let a = threshold + 8.0 * mean * k as f64;
        total += integrate(&density, a, a + 8.0 * mean, 1e-15);
    }
    total
}

pub fn primary_success_oracle(p: &SystemParams) -> f64 {
    let noise = p.noise_psd_w_per_hz * p.bandwidth_hz;
    let g = gain_threshold_by_bisection(p, p.slot_duration_s, p.primary_power_w, noise);
    exp_tail_by_quadrature(g, p.gain_ppd)
}

pub fn secondary_success_oracle(p: &SystemParams, packets: usize) -> f64 {
    if packets == 0 {
        return 0.0;
    }
    let duration = p.slot_duration_s - p.sensing_duration_s;
    let power = packets as f64 * p.energy_per_packet_j / duration;
    let noise = match p.noise_scaling {
        NoiseScaling::Literal => p.noise_psd_w_per_hz,
        NoiseScaling::Bandwidth => p.noise_psd_w_per_hz * p.bandwidth_hz,
    };
    let g = gain_threshold_by_bisection(p, duration, power, noise);
    exp_tail_by_quadrature(g, p.gain_ssd)
}

/// Poisson pmf by the recurrence `p_k = p_{k−1}·λ/k`, enough terms that the
/// remainder is below 1e-30.
pub fn poisson_terms(rate: f64) -> Vec<f64> {
    let mut terms = vec![(-rate).exp()];
    let mut k = 1;
    while k < 50 || (k as f64) < 10.0 * rate + 50.0 {
        let next = terms[k - 1] * rate / k as f64;
        terms.push(next);
        k += 1;
    }
    terms
}

/// Transition matrix built by walking every (idle?, spend, harvest) event
/// of one slot: spend first, then harvest, then clip at capacity.
pub fn brute_kernel(p: &SystemParams, rows: &[Vec<f64>], idle: f64) -> Vec<Vec<f64>> {
    let cap = p.energy_capacity;
    let harvest = poisson_terms(p.energy_arrival_rate * p.slot_duration_s);
    let mut out = vec![vec![0.0; cap + 1]; cap + 1];
    for i in 0..=cap {
        for (k, &pk) in harvest.iter().enumerate() {
            out[i][(i + k).min(cap)] += (1.0 - idle) * pk;
            for j in 0..=i {
                out[i][(i - j + k).min(cap)] += idle * rows[i][j] * pk;
            }
        }
    }
    out
}

/// Stationary law by Gaussian elimination with partial pivoting on
/// `χ(Λ − I) = 0`, `Σχ = 1`. Assumes the law is unique.
pub fn stationary_oracle(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    // a·x = b with a = (Λ − I)ᵀ, last row replaced by ones
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..n).map(|c| m[c][r] - if r == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut b = vec![0.0; n];
    a[n - 1] = vec![1.0; n];
    b[n - 1] = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Secondary throughput and energy rate from first principles.
pub struct OracleReport {
    pub mu_p: f64,
    pub pi_p: f64,
    pub chi: Vec<f64>,
    pub mu_e: f64,
    pub mu_s: f64,
}

pub fn oracle_report(p: &SystemParams, policy: &AccessPolicy) -> OracleReport {
    let mu_p = primary_success_oracle(p);
    let pi_p = if p.primary_arrival_rate < mu_p {
        1.0 - p.primary_arrival_rate / mu_p
    } else {
        0.0
    };
    let rows = policy.rows();
    let chi = stationary_oracle(&brute_kernel(p, rows, pi_p));
    let success: Vec<f64> = (0..=p.energy_capacity).map(|j| secondary_success_oracle(p, j)).collect();
    let mut mu_e = 0.0;
    let mut mu_s = 0.0;
    for (i, c) in chi.iter().enumerate() {
        for j in 0..=i {
            mu_e += pi_p * c * rows[i][j] * j as f64;
            mu_s += pi_p * c * rows[i][j] * success[j];
        }
    }
    OracleReport { mu_p, pi_p, chi, mu_e, mu_s }
}

/// Parameters drawn around the default operating point, with the primary
/// queue kept stable.
pub fn random_params<R: Rng>(rng: &mut R, max_capacity: usize) -> SystemParams {
    let mut p = SystemParams {
        slot_duration_s: rng.gen_range(0.5..2.0),
        bandwidth_hz: rng.gen_range(500.0..2000.0),
        noise_psd_w_per_hz: 10f64.powf(rng.gen_range(-7.0..-5.5)),
        packet_bits: rng.gen_range(500.0..2000.0),
        primary_power_w: 10f64.powf(rng.gen_range(-2.5..-1.0)),
        energy_arrival_rate: rng.gen_range(0.05..2.5),
        energy_per_packet_j: 10f64.powf(rng.gen_range(-3.5..-2.5)),
        energy_capacity: rng.gen_range(1..=max_capacity),
        gain_ppd: rng.gen_range(0.2..2.0),
        gain_ssd: rng.gen_range(0.2..2.0),
        noise_scaling: if rng.gen_bool(0.5) {
            NoiseScaling::Literal
        } else {
            NoiseScaling::Bandwidth
        },
        ..SystemParams::default()
    };
    p.sensing_duration_s = p.slot_duration_s * rng.gen_range(0.02..0.3);
    let mu_p = primary_success_oracle(&p);
    p.primary_arrival_rate = mu_p * rng.gen_range(0.0..0.95);
    p
}

/// A random lower-triangular stochastic policy; some rows are deterministic
/// and some entries are zeroed to exercise sparse rows.
pub fn random_policy<R: Rng>(rng: &mut R, capacity: usize) -> AccessPolicy {
    let rows = (0..=capacity)
        .map(|i| {
            let mut row = vec![0.0; capacity + 1];
            if rng.gen_bool(0.3) {
                row[rng.gen_range(0..=i)] = 1.0;
                return row;
            }
            for w in row.iter_mut().take(i + 1) {
                *w = if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() };
            }
            let s: f64 = row.iter().sum();
            if s == 0.0 {
                row[0] = 1.0;
            } else {
                row.iter_mut().for_each(|w| *w /= s);
            }
            row
        })
        .collect();
    AccessPolicy::from_rows(rows).expect("valid by construction")
}
