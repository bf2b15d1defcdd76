//! Closed-form fidelity and success-rate predictions for the double-herald
//! parity check, the unequal-coupling robustness integrals, and a Monte
//! Carlo simulation of the three-sector jump process that serves as an
//! independent check on both.
//!
//! Rates are in arbitrary but consistent units; cooperativity-based helpers
//! measure time in units of `1/Γ_eff`.

use rand::Rng;
use rayon::prelude::*;

use crate::basis::Subspace;
use crate::effective::EffectiveRates;
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::quadrature::{integrate_2d, Estimate};
use crate::rng::{exponential, StreamRng};

/// Transition rates between the D, L and H sectors.
///
/// `gamma_xy` is the rate of atomic emissions taking sector X to sector Y,
/// `kappa_x` the cavity emission rate in sector X. `eta` is the detector
/// efficiency; detected clicks occur at `eta * kappa_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovRates {
    pub gamma_ll: f64,
    pub gamma_ld: f64,
    pub gamma_hl: f64,
    pub gamma_hh: f64,
    pub kappa_l: f64,
    pub kappa_h: f64,
    pub eta: f64,
}

impl MarkovRates {
    /// Rates at a cooperativity `C` with equal branching (`Γ_eff = 1`).
    pub fn from_cooperativity(coop: f64, eta: f64) -> Result<Self> {
        Ok(EffectiveRates::from_cooperativity(coop, 0.5, eta)?.markov)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma_ll", self.gamma_ll),
            ("gamma_ld", self.gamma_ld),
            ("gamma_hl", self.gamma_hl),
            ("gamma_hh", self.gamma_hh),
            ("kappa_l", self.kappa_l),
            ("kappa_h", self.kappa_h),
        ];
        for (field, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid("eta", format!("must lie in [0, 1], got {}", self.eta)));
        }
        Ok(())
    }

    /// The same process seen through the detector: cavity rates scaled by
    /// `eta`, which is then set to one.
    pub fn detected(&self) -> MarkovRates {
        MarkovRates {
            kappa_l: self.eta * self.kappa_l,
            kappa_h: self.eta * self.kappa_h,
            eta: 1.0,
            ..*self
        }
    }
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn poisson_like(n: u32, rate: f64, loss: f64, t: f64) -> f64 {
    if n == 0 {
        return (-loss * t).exp();
    }
    let x = rate * t;
    if x == 0.0 {
        return 0.0;
    }
    (n as f64 * x.ln() - ln_factorial(n) - loss * t).exp()
}

/// Probability of exactly `n` L→L atomic emissions and no L→D emission in `(0, t)`.
pub fn pn_l(n: u32, t: f64, r: &MarkovRates) -> f64 {
    poisson_like(n, r.gamma_ll, r.gamma_ll + r.gamma_ld, t)
}

/// Probability of exactly `n` H→H atomic emissions and no H→L emission in `(0, t)`.
pub fn pn_h(n: u32, t: f64, r: &MarkovRates) -> f64 {
    poisson_like(n, r.gamma_hh, r.gamma_hh + r.gamma_hl, t)
}

/// Density of first detected clicks at `t1` (round one) and `t2` (round
/// two) with the atoms ending in the target state.
pub fn w_a(t1: f64, t2: f64, r: &MarkovRates) -> f64 {
    let r = r.detected();
    let a = r.kappa_l + r.gamma_ld;
    let s = t1 + t2;
    0.25 * r.kappa_l * r.kappa_l * ((-(a + r.gamma_ll) * s).exp() + (-a * s).exp())
}

/// Density of the same click pattern with the atoms ending in a wrong state.
pub fn w_b(t1: f64, t2: f64, r: &MarkovRates) -> f64 {
    let r = r.detected();
    let a = r.kappa_l + r.gamma_ld;
    let b = r.kappa_h + r.gamma_hl;
    let s = t1 + t2;
    // γ_HL (e^{-a s} - e^{-a t2} e^{-b t1}) / (b - a), written to stay finite as b → a.
    let gap = b - a;
    let kernel = if gap == 0.0 { t1 } else { -(-gap * t1).exp_m1() / gap };
    let from_h = r.gamma_hl * (-a * s).exp() * kernel;
    0.25 * r.kappa_l * r.kappa_l * (from_h - (-(a + r.gamma_ll) * s).exp() + (-a * s).exp())
}

/// Total probabilities `(P_A, P_B)` of the two event classes for unlimited
/// round durations.
pub fn p_a_p_b(r: &MarkovRates) -> Result<(f64, f64)> {
    r.validate()?;
    let r = r.detected();
    if !(r.kappa_l > 0.0) {
        return Err(Error::Undefined("event probabilities need a nonzero detected L-sector cavity rate"));
    }
    let k2 = r.kappa_l * r.kappa_l;
    let a = r.kappa_l + r.gamma_ld;
    let c = a + r.gamma_ll;
    let b = r.kappa_h + r.gamma_hl;
    let p_a = 0.25 * k2 * (1.0 / (c * c) + 1.0 / (a * a));
    let h_term = if r.gamma_hl > 0.0 { r.gamma_hl / b } else { 0.0 };
    let p_b = 0.25 * k2 / (a * a) * (r.gamma_ll * (r.gamma_ll + 2.0 * a) / (c * c) + h_term);
    Ok((p_a, p_b))
}

/// `P_A / (P_A + P_B)` for general rates.
pub fn f_av_from_rates(r: &MarkovRates) -> Result<f64> {
    let (a, b) = p_a_p_b(r)?;
    Ok(a / (a + b))
}

/// `P_A + P_B` for general rates.
pub fn p_suc_from_rates(r: &MarkovRates) -> Result<f64> {
    let (a, b) = p_a_p_b(r)?;
    Ok(a + b)
}

/// `(P_A, P_B)` by adaptive quadrature of the densities over `[0, t_max]²`.
/// `None` integrates to 50 lifetimes of the slowest decaying term.
pub fn p_a_p_b_quadrature(r: &MarkovRates, t_max: Option<f64>, tol: f64) -> Result<(Estimate, Estimate)> {
    r.validate()?;
    let d = r.detected();
    if !(d.kappa_l > 0.0) {
        return Err(Error::Undefined("event probabilities need a nonzero detected L-sector cavity rate"));
    }
    let slowest = (d.kappa_l + d.gamma_ld).min(d.kappa_h + d.gamma_hl);
    let horizon = 50.0 / slowest;
    let end = t_max.map_or(horizon, |t| t.min(horizon));
    let pa = integrate_2d(|x, y| w_a(x, y, r), (0.0, end), (0.0, end), tol)?;
    let pb = integrate_2d(|x, y| w_b(x, y, r), (0.0, end), (0.0, end), tol)?;
    Ok((pa, pb))
}

/// Average fidelity of a successful double-herald check at cooperativity `C`
/// with equal branching of the atomic decay.
pub fn f_av(c: f64) -> f64 {
    (5.0 / 32.0 + 4.0 * c + 28.0 * c * c + 64.0 * c * c * c) / (3.0 / 8.0 + 7.0 * c + 38.0 * c * c + 64.0 * c * c * c)
}

/// Success probability of the double-herald check at cooperativity `C`.
pub fn p_suc(c: f64) -> f64 {
    (6.0 * c * c + 64.0 * c * c * c) / (1.0 / 8.0 + 4.0 * c + 40.0 * c * c + 128.0 * c * c * c)
}

/// Detector efficiency enters only through `ηC`.
pub fn f_av_eta(c: f64, eta: f64) -> f64 {
    f_av(eta * c)
}

pub fn p_suc_eta(c: f64, eta: f64) -> f64 {
    p_suc(eta * c)
}

/// Average fidelity for permanently unequal cavity couplings `(1 ± ε) κ̄`,
/// without atomic decay.
pub fn robust_f_av(epsilon: f64) -> f64 {
    1.0 - 0.5 * epsilon * epsilon
}

/// Density of clicks at `t1`, `t2` for unequal couplings.
pub fn robust_w(t1: f64, t2: f64, kappa_bar: f64, epsilon: f64) -> f64 {
    let k1 = (1.0 + epsilon) * kappa_bar;
    let k2 = (1.0 - epsilon) * kappa_bar;
    0.25 * k1 * k2 * ((-(k2 * t1 + k1 * t2)).exp() + (-(k1 * t1 + k2 * t2)).exp())
}

/// Bell-state fidelity after clicks at `t1`, `t2` for unequal couplings.
pub fn robust_f(t1: f64, t2: f64, kappa_bar: f64, epsilon: f64) -> f64 {
    let x = epsilon * kappa_bar * (t1 - t2);
    if !x.is_finite() {
        return 0.5;
    }
    0.5 + 0.5 / x.cosh()
}

/// Click-weighted average of [`robust_f`] by quadrature.
///
/// The click density is an equal mixture of two products of exponential
/// densities, and the fidelity is symmetric in the click times, so the
/// average equals the expectation over `t1 ~ Exp(κ₂)`, `t2 ~ Exp(κ₁)`.
/// Mapping both times through the inverse exponential distribution turns
/// this into an integral over the unit square, valid also at `|ε| = 1`.
pub fn robust_f_av_quadrature(epsilon: f64, tol: f64) -> Result<Estimate> {
    if !(-1.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid("epsilon", format!("must lie in [-1, 1], got {epsilon}")));
    }
    let k1 = 1.0 + epsilon;
    let k2 = 1.0 - epsilon;
    let time = |u: f64, rate: f64| {
        if rate > 0.0 {
            -(-u).ln_1p() / rate
        } else {
            f64::INFINITY
        }
    };
    integrate_2d(
        |u, v| robust_f(time(u, k2), time(v, k1), 1.0, epsilon),
        (0.0, 1.0),
        (0.0, 1.0),
        tol,
    )
}

/// Excited-state population left after the laser in the odd-parity sector.
pub fn excited_population(params: &SystemParams) -> Result<f64> {
    if params.delta == 0.0 {
        return Err(Error::SingularDetuning);
    }
    Ok(params.omega * params.omega / (4.0 * params.delta * params.delta))
}

/// Outcome class of a double-herald run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventClass {
    /// Two clicks and the atoms end in the target state.
    A,
    /// Two clicks but the atoms end in a wrong state.
    B,
    /// At least one round without a detected click.
    None,
}

/// Initial populations of the three sectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorWeights {
    pub d: f64,
    pub l: f64,
    pub h: f64,
}

impl SectorWeights {
    /// All four pair amplitudes equal.
    pub const UNIFORM: SectorWeights = SectorWeights {
        d: 0.25,
        l: 0.5,
        h: 0.25,
    };

    pub fn validate(&self) -> Result<()> {
        let sum = self.d + self.l + self.h;
        if [self.d, self.l, self.h].iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("initial_weights", format!("must be nonnegative and sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// One simulated double-herald run of the sector process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovOutcome {
    pub class: EventClass,
    /// Expected target fidelity given the emission history (0 on failure).
    pub fidelity: f64,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
}

struct SectorState {
    sector: Subspace,
    from_h: bool,
    l_emissions: u32,
}

fn herald_round<R: Rng + ?Sized>(s: &mut SectorState, r: &MarkovRates, t_max: Option<f64>, rng: &mut R) -> Option<f64> {
    let limit = t_max.unwrap_or(f64::INFINITY);
    let mut t = 0.0;
    loop {
        let (click, stay, leave) = match s.sector {
            Subspace::D => (0.0, 0.0, 0.0),
            Subspace::L => (r.eta * r.kappa_l, r.gamma_ll, r.gamma_ld),
            Subspace::H => (r.eta * r.kappa_h, r.gamma_hh, r.gamma_hl),
        };
        let total = click + stay + leave;
        let dt = exponential(rng, total);
        if !dt.is_finite() || t + dt > limit {
            return None;
        }
        t += dt;
        let pick = rng.random::<f64>() * total;
        if pick < click {
            return Some(t);
        } else if pick < click + stay {
            if s.sector == Subspace::L {
                s.l_emissions += 1;
            }
        } else {
            s.sector = match s.sector {
                Subspace::L => Subspace::D,
                _ => {
                    s.from_h = true;
                    Subspace::L
                }
            };
        }
    }
}

/// Simulates the sector jump process through both herald rounds.
///
/// Round two starts after the π-pulse, which swaps D and H. Fidelity is 1
/// when the atoms began in L and never emitted, ½ after any L→L emission,
/// and 0 when they reached L from H. The class is drawn as A with
/// probability equal to that fidelity.
pub fn markov_simulate<R: Rng + ?Sized>(
    r: &MarkovRates,
    weights: &SectorWeights,
    t_max: Option<f64>,
    rng: &mut R,
) -> MarkovOutcome {
    let u = rng.random::<f64>();
    let sector = if u < weights.d {
        Subspace::D
    } else if u < weights.d + weights.l {
        Subspace::L
    } else {
        Subspace::H
    };
    let mut s = SectorState {
        sector,
        from_h: false,
        l_emissions: 0,
    };
    let fail = |t1| MarkovOutcome {
        class: EventClass::None,
        fidelity: 0.0,
        t1,
        t2: None,
    };
    let Some(t1) = herald_round(&mut s, r, t_max, rng) else {
        return fail(None);
    };
    s.sector = match s.sector {
        Subspace::D => Subspace::H,
        Subspace::H => Subspace::D,
        Subspace::L => Subspace::L,
    };
    let Some(t2) = herald_round(&mut s, r, t_max, rng) else {
        return fail(Some(t1));
    };
    let fidelity = if s.from_h {
        0.0
    } else if s.l_emissions == 0 {
        1.0
    } else {
        0.5
    };
    let class = if rng.random::<f64>() < fidelity {
        EventClass::A
    } else {
        EventClass::B
    };
    MarkovOutcome {
        class,
        fidelity,
        t1: Some(t1),
        t2: Some(t2),
    }
}

/// Aggregate of a Markov ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MarkovSummary {
    pub runs: usize,
    pub count_a: usize,
    pub count_b: usize,
    /// Sum of per-run expected fidelities over successful runs.
    pub fidelity_sum: f64,
}

impl MarkovSummary {
    pub fn successes(&self) -> usize {
        self.count_a + self.count_b
    }

    pub fn p_a(&self) -> f64 {
        self.count_a as f64 / self.runs as f64
    }

    pub fn p_b(&self) -> f64 {
        self.count_b as f64 / self.runs as f64
    }

    pub fn p_suc(&self) -> f64 {
        self.successes() as f64 / self.runs as f64
    }

    /// Binomial standard error of [`Self::p_suc`].
    pub fn p_suc_err(&self) -> f64 {
        let p = self.p_suc();
        (p * (1.0 - p) / self.runs as f64).sqrt()
    }

    /// Fraction of successes in class A.
    pub fn f_av(&self) -> f64 {
        self.count_a as f64 / self.successes() as f64
    }

    pub fn f_av_err(&self) -> f64 {
        let f = self.f_av();
        (f * (1.0 - f) / self.successes() as f64).sqrt()
    }
}

/// Runs `runs` independent simulations; run `i` uses stream `i` of `base_seed`.
pub fn markov_ensemble(
    r: &MarkovRates,
    weights: &SectorWeights,
    t_max: Option<f64>,
    runs: usize,
    base_seed: u64,
) -> Result<MarkovSummary> {
    r.validate()?;
    weights.validate()?;
    let outcomes: Vec<MarkovOutcome> = (0..runs)
        .into_par_iter()
        .map(|i| markov_simulate(r, weights, t_max, &mut StreamRng::new(base_seed, i as u64)))
        .collect();
    let mut summary = MarkovSummary {
        runs,
        ..Default::default()
    };
    for o in &outcomes {
        match o.class {
            EventClass::A => summary.count_a += 1,
            EventClass::B => summary.count_b += 1,
            EventClass::None => continue,
        }
        summary.fidelity_sum += o.fidelity;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms_at_unit_cooperativity() {
        assert!((f_av(1.0) - 0.8791).abs() < 1e-4);
        assert!((p_suc(1.0) - 0.4067).abs() < 1e-4);
        assert!(f_av(20.0) > 0.99);
        assert!((f_av(1e6) - 1.0).abs() < 1e-5);
        assert!((p_suc(1e6) - 0.5).abs() < 1e-5);
        assert_eq!(f_av_eta(10.0, 0.3), f_av(3.0));
        assert_eq!(p_suc_eta(10.0, 0.3), p_suc(3.0));
    }

    #[test]
    fn rational_forms_follow_from_rates() {
        for c in [0.1, 1.0, 2.5, 10.0, 40.0] {
            let r = MarkovRates::from_cooperativity(c, 1.0).unwrap();
            assert_relative_eq!(f_av_from_rates(&r).unwrap(), f_av(c), max_relative = 1e-12);
            assert_relative_eq!(p_suc_from_rates(&r).unwrap(), p_suc(c), max_relative = 1e-12);
            let r = MarkovRates::from_cooperativity(c, 0.4).unwrap();
            assert_relative_eq!(f_av_from_rates(&r).unwrap(), f_av_eta(c, 0.4), max_relative = 1e-12);
        }
    }

    #[test]
    fn sector_counting_probabilities() {
        let r = MarkovRates {
            gamma_ll: 1.0,
            gamma_ld: 0.5,
            gamma_hl: 0.0,
            gamma_hh: 0.0,
            kappa_l: 1.0,
            kappa_h: 4.0,
            eta: 1.0,
        };
        assert_relative_eq!(pn_l(2, 1.0, &r), 0.5 * (-1.5f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(pn_l(0, 2.0, &r), (-3.0f64).exp(), max_relative = 1e-14);
        let total: f64 = (0..60).map(|n| pn_l(n, 1.7, &r)).sum();
        assert_relative_eq!(total, (-0.5f64 * 1.7).exp(), max_relative = 1e-12);
        assert_eq!(pn_h(0, 3.0, &r), 1.0);
    }

    #[test]
    fn density_limits() {
        let lossless = MarkovRates {
            gamma_ll: 0.0,
            gamma_ld: 0.0,
            gamma_hl: 0.0,
            gamma_hh: 0.0,
            kappa_l: 0.7,
            kappa_h: 2.8,
            eta: 1.0,
        };
        assert_relative_eq!(w_a(0.0, 0.0, &lossless), 0.5 * 0.49, max_relative = 1e-14);
        assert_relative_eq!(w_a(1.0, 2.0, &lossless), 0.5 * 0.49 * (-2.1f64).exp(), max_relative = 1e-14);
        assert_eq!(w_b(1.0, 2.0, &lossless), 0.0);
        let (a, b) = p_a_p_b(&lossless).unwrap();
        assert_relative_eq!(a, 0.5, max_relative = 1e-14);
        assert_eq!(b, 0.0);
        let r = MarkovRates::from_cooperativity(2.0, 1.0).unwrap();
        assert_relative_eq!(w_a(0.0, 0.0, &r), 0.5 * r.kappa_l * r.kappa_l, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_gap_is_finite() {
        // κ_H + γ_HL = κ_L + γ_LD
        let r = MarkovRates {
            gamma_ll: 0.1,
            gamma_ld: 1.1,
            gamma_hl: 0.1,
            gamma_hh: 0.0,
            kappa_l: 1.0,
            kappa_h: 2.0,
            eta: 1.0,
        };
        let v = w_b(0.7, 0.3, &r);
        let nearby = w_b(0.7, 0.3, &MarkovRates { kappa_h: 2.0 + 1e-9, ..r });
        assert!(v.is_finite());
        assert_relative_eq!(v, nearby, max_relative = 1e-7);
    }

    #[test]
    fn zero_rates_are_undefined() {
        let r = MarkovRates {
            gamma_ll: 0.0,
            gamma_ld: 0.0,
            gamma_hl: 0.0,
            gamma_hh: 0.0,
            kappa_l: 0.0,
            kappa_h: 0.0,
            eta: 1.0,
        };
        assert!(matches!(p_a_p_b(&r), Err(Error::Undefined(_))));
    }

    #[test]
    fn robustness_closed_form_and_integrand() {
        assert_eq!(robust_f_av(0.0), 1.0);
        assert_eq!(robust_f_av(1.0), 0.5);
        assert_eq!(robust_f(3.0, 3.0, 1.0, 0.4), 1.0);
        assert_eq!(robust_f(3.0, 1.0, 1.0, 0.0), 1.0);
        // Original form of the fidelity.
        let (t1, t2, kb, eps): (f64, f64, f64, f64) = (0.8, 2.3, 1.3, 0.6);
        let (k1, k2) = ((1.0 + eps) * kb, (1.0 - eps) * kb);
        let direct = 0.5
            + (-(k1 + k2) * (t1 + t2) / 2.0).exp() / ((-(k1 * t1 + k2 * t2)).exp() + (-(k2 * t1 + k1 * t2)).exp());
        assert_relative_eq!(robust_f(t1, t2, kb, eps), direct, max_relative = 1e-14);
    }

    #[test]
    fn robustness_quadrature() {
        for eps in [0.0, 0.3, 0.7, 1.0] {
            let e = robust_f_av_quadrature(eps, 1e-9).unwrap();
            assert!((e.value - robust_f_av(eps)).abs() < 1e-7, "eps={eps}: {}", e.value);
        }
    }

    #[test]
    fn excited_population_examples() {
        let p = SystemParams::symmetric(1.0, 1.0, 50.0, 0.05, 0.05);
        assert_relative_eq!(excited_population(&p).unwrap(), 1e-4, max_relative = 1e-14);
        let q = SystemParams { omega: 2.0, delta: 100.0, ..p };
        assert_relative_eq!(excited_population(&q).unwrap(), 1e-4, max_relative = 1e-14);
        assert_eq!(excited_population(&SystemParams { omega: 0.0, ..p }).unwrap(), 0.0);
    }

    #[test]
    fn markov_edge_cases() {
        let lossless = MarkovRates {
            gamma_ll: 0.0,
            gamma_ld: 0.0,
            gamma_hl: 0.0,
            gamma_hh: 0.0,
            kappa_l: 1.0,
            kappa_h: 4.0,
            eta: 1.0,
        };
        let only = |d, l, h| SectorWeights { d, l, h };
        for i in 0..200 {
            let mut rng = StreamRng::new(1, i);
            let o = markov_simulate(&lossless, &only(0.0, 1.0, 0.0), None, &mut rng);
            assert_eq!(o.class, EventClass::A);
            let o = markov_simulate(&lossless, &only(1.0, 0.0, 0.0), None, &mut rng);
            assert_eq!(o.class, EventClass::None);
            assert_eq!(o.t1, None);
            let o = markov_simulate(&lossless, &only(0.0, 0.0, 1.0), None, &mut rng);
            assert_eq!(o.class, EventClass::None);
            assert!(o.t1.is_some());
        }
    }

    #[test]
    fn markov_ensemble_is_deterministic() {
        let r = MarkovRates::from_cooperativity(1.0, 1.0).unwrap();
        let a = markov_ensemble(&r, &SectorWeights::UNIFORM, None, 2000, 9).unwrap();
        let b = markov_ensemble(&r, &SectorWeights::UNIFORM, None, 2000, 9).unwrap();
        assert_eq!(a, b);
    }
}
