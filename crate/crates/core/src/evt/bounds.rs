//! Probability lower bounds for the event {ρ > ρ₀}.

use crate::error::{Error, Result};
use crate::evt::dependence::HProfile;
use crate::evt::gev::{u_quantile, GevSpec};
use crate::evt::order_stats::{g1m_dependent, g1m_independent, ClusterSizeDist};
use crate::prelude::*;
use crate::special::{ln_binomial, log_sum_exp};

/// k·ln(p) with the convention 0·ln 0 = 0.
fn xlogy(k: f64, p: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * p.ln()
    }
}

/// Finite-N binomial bound: with y_m = sqrt((1+h)/m · σ_e²/σ_f² · ρ₀/(1−ρ₀)),
/// the probability that at least m of N loading magnitudes exceed y_m,
/// 1 − Σ_{j<m} C(N,j)(1−F(y_m))^j F(y_m)^{N−j}.
///
/// `cdf` is the cdf of |λ|. Both tails are summed in log space and the
/// smaller one is used, so the result keeps full precision near 0 and 1.
pub fn prop1_lower_bound(
    rho0: f64,
    m: usize,
    n: usize,
    sigma_f: f64,
    sigma_e: f64,
    h_m: f64,
    cdf: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return Err(Error::invalid("rho0", format!("{rho0} is not in (0, 1)")));
    }
    if m == 0 || m > n {
        return Err(Error::invalid("m", format!("{m} is not in 1..={n}")));
    }
    if !(sigma_f > 0.0 && sigma_e > 0.0 && h_m >= 0.0) {
        return Err(Error::invalid("noise parameters", "need σ_f > 0, σ_e > 0, h(m) >= 0"));
    }
    let y = ((1.0 + h_m) / m as f64 * (sigma_e * sigma_e) / (sigma_f * sigma_f) * rho0 / (1.0 - rho0)).sqrt();
    let f = cdf(y);
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::invalid("cdf", format!("F({y}) = {f} is not a probability")));
    }
    let exceed = 1.0 - f;
    let nf = n as u64;
    let log_term = |j: u64| ln_binomial(nf, j) + xlogy(j as f64, exceed) + xlogy((nf - j) as f64, f);
    let lower: Vec<f64> = (0..m as u64).map(log_term).collect();
    let upper: Vec<f64> = (m as u64..=nf).map(log_term).collect();
    let (lower, upper) = (log_sum_exp(&lower).exp(), log_sum_exp(&upper).exp());
    let bound = if upper < 0.5 { upper } else { 1.0 - lower };
    Ok(bound.clamp(0.0, 1.0))
}

/// Parameters that produced a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub h_m: f64,
    /// Factor signal variances (σ_f² for one factor, s_j otherwise).
    pub signals: Vec<f64>,
    pub sigma_e: f64,
    pub tau: f64,
    pub gamma_underbar: Option<f64>,
    pub correction_prob: f64,
}

/// A (ρ₀, probability lower bound) pair with its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub rho0: f64,
    pub prob_lower_bound: f64,
    pub params: BoundParams,
}

/// One-factor bound: P(ρ > mσ_f²u²/((1+h)σ_e² + mσ_f²u²)) ≥ 1 − G_{1,m}(τ)
/// with u = u_N(τ).
#[derive(Debug, Clone, PartialEq)]
pub struct OneFactorBound {
    pub n: usize,
    pub m: usize,
    pub spec: GevSpec,
    pub sigma_f: f64,
    pub sigma_e: f64,
    pub h_m: f64,
    /// Exceedance cluster sizes; `None` means no clustering.
    pub cluster: Option<ClusterSizeDist>,
}

/// Multi-factor bound: ρ₀ = K − (1+h)σ_e²/(mγ̲²) Σ_j 1/(s_j u_j²) with
/// probability Π_j(1 − G_{j,m}(τ)) − P(σ_min(B) < γ̲), floored at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiFactorBound {
    pub n: usize,
    pub m: usize,
    pub specs: Vec<GevSpec>,
    /// s_j, the signal variances of the factors.
    pub signals: Vec<f64>,
    pub sigma_e: f64,
    pub h_m: f64,
    /// Lower bound γ̲ on σ_min(B), in (0, 1].
    pub gamma_underbar: f64,
    pub correction_prob: f64,
    pub cluster: Option<ClusterSizeDist>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundModel {
    OneFactor(OneFactorBound),
    MultiFactor(MultiFactorBound),
}

fn check_common(n: usize, m: usize, sigma_e: f64, h_m: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid("N", format!("need N >= 2, got {n}")));
    }
    if m == 0 || m > n {
        return Err(Error::invalid("m", format!("{m} is not in 1..={n}")));
    }
    if !(sigma_e > 0.0) {
        return Err(Error::invalid("sigma_e", "must be positive"));
    }
    if !(h_m >= 0.0) {
        return Err(Error::invalid("h(m)", "must be nonnegative"));
    }
    Ok(())
}

fn exceed_prob(tau: f64, m: usize, cluster: Option<&ClusterSizeDist>) -> Result<f64> {
    let g = match cluster {
        Some(c) => g1m_dependent(tau, m, c)?,
        None => g1m_independent(tau, m),
    };
    Ok(1.0 - g)
}

impl BoundModel {
    pub fn k(&self) -> usize {
        match self {
            BoundModel::OneFactor(_) => 1,
            BoundModel::MultiFactor(b) => b.specs.len(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            BoundModel::OneFactor(b) => b.m,
            BoundModel::MultiFactor(b) => b.m,
        }
    }

    /// Same model at another sparsity level and dependence statistic.
    pub fn with_m(&self, m: usize, h_m: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            BoundModel::OneFactor(b) => {
                b.m = m;
                b.h_m = h_m;
            }
            BoundModel::MultiFactor(b) => {
                b.m = m;
                b.h_m = h_m;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BoundModel::OneFactor(b) => {
                check_common(b.n, b.m, b.sigma_e, b.h_m)?;
                if !(b.sigma_f > 0.0) {
                    return Err(Error::invalid("sigma_f", "must be positive"));
                }
                b.spec.validate()
            }
            BoundModel::MultiFactor(b) => {
                check_common(b.n, b.m, b.sigma_e, b.h_m)?;
                if b.specs.is_empty() || b.specs.len() != b.signals.len() {
                    return Err(Error::invalid("signals", "need one GEV spec and one signal per factor"));
                }
                if b.signals.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::invalid("signals", "must be positive"));
                }
                if !(b.gamma_underbar > 0.0 && b.gamma_underbar <= 1.0) {
                    return Err(Error::invalid(
                        "gamma_underbar",
                        format!("{} is not in (0, 1]", b.gamma_underbar),
                    ));
                }
                if !(0.0..=1.0).contains(&b.correction_prob) {
                    return Err(Error::invalid("correction_prob", "must be in [0, 1]"));
                }
                b.specs.iter().try_for_each(GevSpec::validate)
            }
        }
    }

    /// ρ₀(τ); nonincreasing in τ, clamped to [0, K].
    pub fn rho0(&self, tau: f64) -> Result<f64> {
        match self {
            BoundModel::OneFactor(b) => {
                let u = u_quantile(&b.spec, b.n, tau)?;
                if !(u > 0.0) {
                    return Ok(0.0);
                }
                let noise = (1.0 + b.h_m) * b.sigma_e * b.sigma_e;
                let signal = b.m as f64 * b.sigma_f * b.sigma_f * u * u;
                Ok(1.0 / (1.0 + noise / signal))
            }
            BoundModel::MultiFactor(b) => {
                let mut sum = 0.0;
                for (spec, s) in b.specs.iter().zip(&b.signals) {
                    let u = u_quantile(spec, b.n, tau)?;
                    if !(u > 0.0) {
                        return Ok(0.0);
                    }
                    sum += 1.0 / (s * u * u);
                }
                let k = b.specs.len() as f64;
                let scale = (1.0 + b.h_m) * b.sigma_e * b.sigma_e / (b.m as f64 * b.gamma_underbar * b.gamma_underbar);
                Ok((k - scale * sum).clamp(0.0, k))
            }
        }
    }

    /// Probability lower bound at τ.
    pub fn prob(&self, tau: f64) -> Result<f64> {
        match self {
            BoundModel::OneFactor(b) => exceed_prob(tau, b.m, b.cluster.as_ref()),
            BoundModel::MultiFactor(b) => {
                // Each factor's G uses its own extremal index through u, and
                // the shared τ.
                let mut prod = 1.0;
                for _ in &b.specs {
                    prod *= exceed_prob(tau, b.m, b.cluster.as_ref())?;
                }
                Ok((prod - b.correction_prob).max(0.0))
            }
        }
    }

    pub fn at_tau(&self, tau: f64) -> Result<BoundResult> {
        self.validate()?;
        let rho0 = self.rho0(tau)?;
        let prob_lower_bound = self.prob(tau)?;
        let params = match self {
            BoundModel::OneFactor(b) => BoundParams {
                m: b.m,
                n: b.n,
                k: 1,
                h_m: b.h_m,
                signals: vec![b.sigma_f * b.sigma_f],
                sigma_e: b.sigma_e,
                tau,
                gamma_underbar: None,
                correction_prob: 0.0,
            },
            BoundModel::MultiFactor(b) => BoundParams {
                m: b.m,
                n: b.n,
                k: b.specs.len(),
                h_m: b.h_m,
                signals: b.signals.clone(),
                sigma_e: b.sigma_e,
                tau,
                gamma_underbar: Some(b.gamma_underbar),
                correction_prob: b.correction_prob,
            },
        };
        Ok(BoundResult {
            rho0,
            prob_lower_bound,
            params,
        })
    }

    /// The bound at the τ whose ρ₀(τ) equals `rho0`.
    pub fn at_rho0(&self, rho0: f64) -> Result<BoundResult> {
        let tau = solve_tau_for_rho0(self, rho0)?;
        let mut out = self.at_tau(tau)?;
        // Report the requested threshold rather than its bisection image.
        out.rho0 = rho0;
        Ok(out)
    }

    /// The bound along a τ grid.
    pub fn curve(&self, taus: &[f64]) -> Result<Vec<BoundResult>> {
        taus.iter().map(|&tau| self.at_tau(tau)).collect()
    }
}

const LN_TAU_RANGE: f64 = 700.0;

/// τ with ρ₀(τ) = `target`, by bisection on ln τ.
pub fn solve_tau_for_rho0(model: &BoundModel, target: f64) -> Result<f64> {
    model.validate()?;
    let lo_rho = model.rho0(LN_TAU_RANGE.exp())?;
    let hi_rho = model.rho0((-LN_TAU_RANGE).exp())?;
    if !(target > lo_rho && target < hi_rho) {
        return Err(Error::Unattainable {
            target,
            lo: lo_rho,
            hi: hi_rho,
        });
    }
    // ρ₀ is decreasing in x = ln τ.
    let (mut lo, mut hi) = (-LN_TAU_RANGE, LN_TAU_RANGE);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if model.rho0(mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// What `choose_m_theory` evaluates at each m.
pub enum TheoryTarget<'a> {
    /// An extreme-value bound; m and h(m) are replaced for every candidate.
    Evt { model: BoundModel, h: HProfile },
    /// The finite-N binomial bound for one factor.
    Binomial {
        n: usize,
        sigma_f: f64,
        sigma_e: f64,
        h: HProfile,
        cdf: &'a dyn Fn(f64) -> f64,
    },
}

/// Result of the theory-driven choice of m.
#[derive(Debug, Clone, PartialEq)]
pub struct MTheory {
    pub m: usize,
    pub prob_lower_bound: f64,
}

impl TheoryTarget<'_> {
    fn n(&self) -> usize {
        match self {
            TheoryTarget::Evt { model, .. } => match model {
                BoundModel::OneFactor(b) => b.n,
                BoundModel::MultiFactor(b) => b.n,
            },
            TheoryTarget::Binomial { n, .. } => *n,
        }
    }

    /// Lower bound on P(ρ/K > rho_avg) at sparsity m.
    pub fn bound_at(&self, m: usize, rho_avg: f64) -> Result<f64> {
        match self {
            TheoryTarget::Evt { model, h } => {
                let model = model.with_m(m, h.at(m)?);
                let rho0 = rho_avg * model.k() as f64;
                match model.at_rho0(rho0) {
                    Ok(r) => Ok(r.prob_lower_bound),
                    Err(Error::Unattainable { lo, .. }) if rho0 <= lo => Ok(1.0),
                    Err(Error::Unattainable { .. }) => Ok(0.0),
                    Err(e) => Err(e),
                }
            }
            TheoryTarget::Binomial {
                n,
                sigma_f,
                sigma_e,
                h,
                cdf,
            } => prop1_lower_bound(rho_avg, m, *n, *sigma_f, *sigma_e, h.at(m)?, *cdf),
        }
    }
}

/// Smallest m whose bound guarantees P(ρ/K > `target_rho`) ≥ `target_prob`.
pub fn choose_m_theory(target: &TheoryTarget<'_>, target_prob: f64, target_rho: f64) -> Result<MTheory> {
    if !(0.0..=1.0).contains(&target_prob) {
        return Err(Error::invalid("target_prob", format!("{target_prob} is not in [0, 1]")));
    }
    let n = target.n();
    let mut best = (0.0, 1);
    for m in 1..=n {
        let p = target.bound_at(m, target_rho)?;
        if p >= target_prob {
            return Ok(MTheory { m, prob_lower_bound: p });
        }
        if p > best.0 {
            best = (p, m);
        }
    }
    Err(Error::BoundUnattainable {
        target_prob,
        max_m: n,
        best_bound: best.0,
        best_m: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::folded_normal_cdf;
    use approx::assert_relative_eq;

    fn one_factor(m: usize) -> BoundModel {
        BoundModel::OneFactor(OneFactorBound {
            n: 100,
            m,
            spec: GevSpec::folded_normal(),
            sigma_f: 1.0,
            sigma_e: 1.0,
            h_m: 0.0,
            cluster: None,
        })
    }

    /// Direct summation with exact integer binomial coefficients.
    fn direct_binomial_tail(n: u64, m: u64, f: f64) -> f64 {
        let mut below = 0.0;
        let mut coef = 1.0_f64;
        for j in 0..m {
            if j > 0 {
                coef = coef * (n - j + 1) as f64 / j as f64;
            }
            below += coef * (1.0 - f).powi(j as i32) * f.powi((n - j) as i32);
        }
        1.0 - below
    }

    #[test]
    fn binomial_bound_matches_direct_sum() {
        let rho0 = 0.95;
        let (n, m) = (100, 4);
        let y = ((1.0 / m as f64) * rho0 / (1.0 - rho0)).sqrt();
        let want = direct_binomial_tail(n, m, folded_normal_cdf(y));
        let got = prop1_lower_bound(rho0, m as usize, n as usize, 1.0, 1.0, 0.0, &folded_normal_cdf).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn binomial_bound_edges() {
        let bounded = |y: f64| (y / 0.01).min(1.0);
        assert_eq!(prop1_lower_bound(0.9, 3, 50, 1.0, 1.0, 0.0, &bounded).unwrap(), 0.0);
        let y1 = (0.9_f64 / 0.1).sqrt();
        let f = folded_normal_cdf(y1);
        let got = prop1_lower_bound(0.9, 1, 50, 1.0, 1.0, 0.0, &folded_normal_cdf).unwrap();
        assert_relative_eq!(got, 1.0 - f.powi(50), epsilon = 1e-13);
        assert!(prop1_lower_bound(0.9, 1, 50, 1.0, 1.0, 0.0, &|_| 1.5).is_err());
    }

    #[test]
    fn binomial_bound_survives_large_n() {
        let p = prop1_lower_bound(0.9, 20, 5000, 1.0, 1.0, 0.0, &folded_normal_cdf).unwrap();
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
    }

    #[test]
    fn comparative_statics() {
        let f = &folded_normal_cdf;
        let b = |rho0: f64, sf: f64, h: f64| prop1_lower_bound(rho0, 5, 100, sf, 1.0, h, f).unwrap();
        for i in 1..9 {
            let r = 0.1 * i as f64;
            assert!(b(r + 0.1, 1.0, 0.0) <= b(r, 1.0, 0.0));
            assert!(b(r, 0.8 + 0.1 * i as f64, 0.0) <= b(r, 0.9 + 0.1 * i as f64, 0.0));
            assert!(b(r, 1.0, 0.5 * i as f64) <= b(r, 1.0, 0.5 * (i - 1) as f64));
        }
    }

    #[test]
    fn tau_round_trip() {
        for m in 1..=10 {
            let model = one_factor(m);
            for target in [0.5, 0.9, 0.95, 0.99] {
                let tau = solve_tau_for_rho0(&model, target).unwrap();
                assert!(tau.is_finite() && tau > 0.0);
                assert!((model.rho0(tau).unwrap() - target).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn unattainable_target_reports_range() {
        let model = BoundModel::OneFactor(OneFactorBound {
            spec: GevSpec::uniform(),
            ..match one_factor(3) {
                BoundModel::OneFactor(b) => b,
                _ => unreachable!(),
            }
        });
        // Uniform loadings are bounded by 1, so ρ₀ < 3/(1 + 3).
        match solve_tau_for_rho0(&model, 0.9) {
            Err(Error::Unattainable { hi, .. }) => assert!(hi < 0.76),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn one_factor_curve_limits() {
        let model = one_factor(1);
        let r = model.at_tau(2.0).unwrap();
        assert_relative_eq!(r.prob_lower_bound, 1.0 - (-2.0_f64).exp());
        let far = model.at_tau(1e6).unwrap();
        assert!(far.prob_lower_bound > 1.0 - 1e-12 && far.rho0 < 0.5);
    }

    #[test]
    fn bound_increases_with_m() {
        let mut last = 0.0;
        for m in 2..=10 {
            let p = one_factor(m).at_rho0(0.95).unwrap().prob_lower_bound;
            assert!(p > last, "m={m}: {p} <= {last}");
            last = p;
        }
    }

    #[test]
    fn higher_threshold_lowers_bound() {
        let model = one_factor(5);
        let first = model.at_rho0(0.6).unwrap().prob_lower_bound;
        let mut last = first;
        for i in 1..8 {
            let p = model.at_rho0(0.6 + 0.05 * i as f64).unwrap().prob_lower_bound;
            assert!(p <= last);
            last = p;
        }
        assert!(last < first);
    }

    fn two_factor(m: usize, correction: f64) -> BoundModel {
        BoundModel::MultiFactor(MultiFactorBound {
            n: 100,
            m,
            specs: vec![GevSpec::folded_normal(); 2],
            signals: vec![1.44, 1.0],
            sigma_e: 1.0,
            h_m: 0.0,
            gamma_underbar: 1.0,
            correction_prob: correction,
            cluster: None,
        })
    }

    #[test]
    fn multi_factor_regime() {
        let r = two_factor(4, 0.0).at_rho0(1.9).unwrap();
        assert!(r.prob_lower_bound > 0.0 && r.prob_lower_bound < 1.0);
        assert_eq!(two_factor(4, 1.0).at_rho0(1.9).unwrap().prob_lower_bound, 0.0);
    }

    #[test]
    fn single_factor_reduction() {
        let one = one_factor(6);
        let multi = BoundModel::MultiFactor(MultiFactorBound {
            n: 100,
            m: 6,
            specs: vec![GevSpec::folded_normal()],
            signals: vec![1.0],
            sigma_e: 1.0,
            h_m: 0.0,
            gamma_underbar: 1.0,
            correction_prob: 0.0,
            cluster: None,
        });
        for tau in [0.1, 0.7, 2.0, 5.0] {
            assert!((one.prob(tau).unwrap() - multi.prob(tau).unwrap()).abs() < 1e-10);
            // The multi-factor threshold drops the (1+h)σ_e² term from the
            // denominator, so it is never above the one-factor threshold.
            assert!(multi.rho0(tau).unwrap() <= one.rho0(tau).unwrap());
        }
    }

    #[test]
    fn gamma_range_is_checked() {
        let mut model = two_factor(4, 0.0);
        if let BoundModel::MultiFactor(b) = &mut model {
            b.gamma_underbar = 1.2;
        }
        assert!(model.at_tau(1.0).is_err());
    }

    #[test]
    fn theory_choice() {
        let target = TheoryTarget::Evt {
            model: one_factor(1),
            h: HProfile::Independent,
        };
        assert_eq!(choose_m_theory(&target, 0.0, 0.95).unwrap().m, 1);
        let chosen = choose_m_theory(&target, 0.9, 0.95).unwrap();
        assert!((5..=20).contains(&chosen.m), "m = {}", chosen.m);
        // Exhaustive check that no smaller m qualifies.
        for m in 1..chosen.m {
            assert!(target.bound_at(m, 0.95).unwrap() < 0.9);
        }

        let bounded = |y: f64| (y / 0.01).min(1.0);
        let degenerate = TheoryTarget::Binomial {
            n: 30,
            sigma_f: 1.0,
            sigma_e: 1.0,
            h: HProfile::Independent,
            cdf: &bounded,
        };
        assert!(matches!(
            choose_m_theory(&degenerate, 0.5, 0.9),
            Err(Error::BoundUnattainable { best_bound, .. }) if best_bound == 0.0
        ));
    }
}
