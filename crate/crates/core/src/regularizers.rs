//! Amenable coordinate-separable penalties.
//!
//! Each penalty `ρ_λ` is split as `ρ_λ(t) = λ|t| − q_λ(t)` with `q_λ`
//! continuously differentiable. The solvers only ever need `q'_λ` and the
//! soft-threshold prox of `λ|t|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Shape of the penalty, without the scale `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Penalty {
    L1,
    Scad { a: f64 },
    Mcp { b: f64 },
    Lsp,
}

impl Penalty {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Penalty::Scad { a } if !(a > 2.0) => {
                Err(Error::invalid(format!("SCAD needs a > 2, got {a}")))
            }
            Penalty::Mcp { b } if !(b > 0.0) => {
                Err(Error::invalid(format!("MCP needs b > 0, got {b}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Penalty::L1 => "l1",
            Penalty::Scad { .. } => "scad",
            Penalty::Mcp { .. } => "mcp",
            Penalty::Lsp => "lsp",
        }
    }
}

/// Which derivative to report at the kink `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Plain derivative; `t = 0` is a domain error.
    Auto,
    /// One-sided limit from `t > 0` at zero.
    FromPositive,
}

/// `(μ, γ)` such that `ρ_λ + μt²/2` is convex and `ρ'_λ(t) = 0` for
/// `|t| ≥ γλ`. `gamma` is `None` when no finite γ exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Amenability {
    pub mu: f64,
    pub gamma: Option<f64>,
}

/// A penalty together with its scale `λ > 0`.
///
/// Parses from JSON such as `{"kind":"scad","lambda":0.1,"a":2.5}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct RegularizerSpec {
    #[serde(flatten)]
    pub penalty: Penalty,
    pub lambda: f64,
}

#[derive(Deserialize)]
struct RawSpec {
    #[serde(flatten)]
    penalty: Penalty,
    lambda: f64,
}

impl TryFrom<RawSpec> for RegularizerSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        RegularizerSpec::new(raw.penalty, raw.lambda)
    }
}

impl RegularizerSpec {
    pub fn new(penalty: Penalty, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        penalty.validate()?;
        Ok(RegularizerSpec { penalty, lambda })
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        Self::new(Penalty::L1, lambda)
    }

    pub fn scad(lambda: f64, a: f64) -> Result<Self> {
        Self::new(Penalty::Scad { a }, lambda)
    }

    pub fn mcp(lambda: f64, b: f64) -> Result<Self> {
        Self::new(Penalty::Mcp { b }, lambda)
    }

    pub fn lsp(lambda: f64) -> Result<Self> {
        Self::new(Penalty::Lsp, lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.penalty, lambda)
    }

    pub fn rho(&self, t: f64) -> f64 {
        let lam = self.lambda;
        let u = t.abs();
        match self.penalty {
            Penalty::L1 => lam * u,
            Penalty::Scad { a } => {
                if u <= lam {
                    lam * u
                } else if u <= a * lam {
                    -(u * u - 2.0 * a * lam * u + lam * lam) / (2.0 * (a - 1.0))
                } else {
                    (a + 1.0) * lam * lam / 2.0
                }
            }
            // closed-form antiderivative of λ(1 − z/(λb))₊
            Penalty::Mcp { b } => {
                if u <= b * lam {
                    lam * u - u * u / (2.0 * b)
                } else {
                    lam * lam * b / 2.0
                }
            }
            Penalty::Lsp => (lam * u).ln_1p(),
        }
    }

    /// `ρ'_λ(t)` for `t > 0`, extended to `t = 0` by the right limit `λ`.
    fn rho_prime_pos(&self, u: f64) -> f64 {
        let lam = self.lambda;
        match self.penalty {
            Penalty::L1 => lam,
            Penalty::Scad { a } => {
                if u <= lam {
                    lam
                } else if u < a * lam {
                    (a * lam - u) / (a - 1.0)
                } else {
                    0.0
                }
            }
            Penalty::Mcp { b } => {
                if u < b * lam {
                    lam - u / b
                } else {
                    0.0
                }
            }
            Penalty::Lsp => lam / (1.0 + lam * u),
        }
    }

    pub fn rho_prime(&self, t: f64, side: Side) -> Result<f64> {
        if t == 0.0 {
            return match side {
                Side::FromPositive => Ok(self.lambda),
                Side::Auto => Err(Error::Domain("rho is not differentiable at 0".into())),
            };
        }
        Ok(self.rho_prime_pos(t.abs()).copysign(t))
    }

    /// `q_λ(t) = λ|t| − ρ_λ(t)`.
    pub fn q(&self, t: f64) -> f64 {
        self.lambda * t.abs() - self.rho(t)
    }

    /// `q'_λ(t)`, defined everywhere with `q'_λ(0) = 0`.
    pub fn q_prime(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let u = t.abs();
        let lam = self.lambda;
        let v = match self.penalty {
            Penalty::L1 => 0.0,
            Penalty::Scad { a } => {
                if u <= lam {
                    0.0
                } else if u < a * lam {
                    (u - lam) / (a - 1.0)
                } else {
                    lam
                }
            }
            Penalty::Mcp { b } => {
                if u < b * lam {
                    u / b
                } else {
                    lam
                }
            }
            Penalty::Lsp => lam * lam * u / (1.0 + lam * u),
        };
        v.copysign(t)
    }

    pub fn amenability(&self) -> Amenability {
        match self.penalty {
            Penalty::L1 => Amenability { mu: 0.0, gamma: None },
            Penalty::Scad { a } => Amenability { mu: 1.0 / (a - 1.0), gamma: Some(a) },
            Penalty::Mcp { b } => Amenability { mu: 1.0 / b, gamma: Some(b) },
            Penalty::Lsp => Amenability { mu: self.lambda * self.lambda, gamma: None },
        }
    }

    pub fn mu(&self) -> f64 {
        self.amenability().mu
    }

    /// `Σ_j ρ_λ(β_j)`.
    pub fn penalty_sum(&self, beta: &Vector) -> f64 {
        beta.iter().map(|&t| self.rho(t)).sum()
    }

    pub fn q_prime_vec(&self, beta: &Vector) -> Vector {
        beta.map(|t| self.q_prime(t))
    }
}

/// Outcome of checking the amenability conditions on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmenabilityReport {
    /// `ρ(t) = ρ(−t)` and `ρ(0) = 0`.
    pub symmetric: bool,
    pub nondecreasing: bool,
    pub ratio_nonincreasing: bool,
    pub derivative_bounded: bool,
    pub weakly_convex: bool,
    pub selection: bool,
    pub q_prime_continuous: bool,
    /// `None` when the penalty has no finite γ.
    pub unbiased: Option<bool>,
}

impl AmenabilityReport {
    pub fn all_pass(&self) -> bool {
        self.symmetric
            && self.nondecreasing
            && self.ratio_nonincreasing
            && self.derivative_bounded
            && self.weakly_convex
            && self.selection
            && self.q_prime_continuous
            && self.unbiased.unwrap_or(true)
    }
}

pub fn check_amenable(spec: &RegularizerSpec, grid: &[f64]) -> AmenabilityReport {
    let lam = spec.lambda;
    let Amenability { mu, gamma } = spec.amenability();

    let mut pos: Vec<f64> = grid.iter().map(|t| t.abs()).filter(|&t| t > 0.0).collect();
    pos.sort_by(f64::total_cmp);
    pos.dedup();

    let symmetric = spec.rho(0.0) == 0.0 && grid.iter().all(|&t| spec.rho(t) == spec.rho(-t));

    let nondecreasing = pos
        .windows(2)
        .all(|w| spec.rho(w[1]) >= spec.rho(w[0]) - 1e-12);

    let ratio_nonincreasing = pos
        .windows(2)
        .all(|w| spec.rho(w[1]) / w[1] <= spec.rho(w[0]) / w[0] + 1e-12);

    let derivative_bounded = grid
        .iter()
        .filter(|&&t| t != 0.0)
        .all(|&t| spec.rho_prime(t, Side::Auto).is_ok_and(|d| d.abs() <= lam * (1.0 + 1e-12)));

    // slopes of ρ(t) + μt²/2 between consecutive points of the symmetric grid
    let mut full: Vec<f64> = pos.iter().map(|t| -t).rev().collect();
    full.push(0.0);
    full.extend(pos.iter().copied());
    let h = |t: f64| spec.rho(t) + 0.5 * mu * t * t;
    let slopes: Vec<f64> = full
        .windows(2)
        .map(|w| (h(w[1]) - h(w[0])) / (w[1] - w[0]))
        .collect();
    let weakly_convex = slopes.windows(2).all(|s| s[1] - s[0] >= -1e-8);

    let selection = spec.rho_prime(0.0, Side::FromPositive).is_ok_and(|d| d == lam)
        && spec.rho_prime(1e-12 * lam, Side::Auto).is_ok_and(|d| (d - lam).abs() <= 1e-9 * lam);

    let step = 1e-7;
    let q_prime_continuous = std::iter::once(0.0)
        .chain(grid.iter().copied())
        .all(|t| (spec.q_prime(t + step) - spec.q_prime(t - step)).abs() <= 2.0 * step * mu + 1e-12);

    let unbiased = gamma.map(|g| {
        grid.iter()
            .filter(|t| t.abs() >= g * lam)
            .all(|&t| spec.rho_prime(t, Side::Auto).is_ok_and(|d| d == 0.0))
    });

    AmenabilityReport {
        symmetric,
        nondecreasing,
        ratio_nonincreasing,
        derivative_bounded,
        weakly_convex,
        selection,
        q_prime_continuous,
        unbiased,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Vec<f64> {
        (1..=100).flat_map(|i| [0.1 * i as f64, -0.1 * i as f64]).collect()
    }

    #[test]
    fn rho_examples() {
        let scad = RegularizerSpec::scad(1.0, 2.5).unwrap();
        assert!((scad.rho(3.0) - 1.75).abs() < 1e-15);
        let mcp = RegularizerSpec::mcp(1.0, 1.5).unwrap();
        assert!((mcp.rho(2.0) - 0.75).abs() < 1e-15);
        for spec in [scad, mcp, RegularizerSpec::l1(0.3).unwrap(), RegularizerSpec::lsp(2.0).unwrap()] {
            assert_eq!(spec.rho(0.0), 0.0);
        }
    }

    #[test]
    fn rho_is_continuous_at_breakpoints() {
        let scad = RegularizerSpec::scad(0.7, 3.0).unwrap();
        for t in [0.7, 2.1] {
            assert!((scad.rho(t - 1e-10) - scad.rho(t + 1e-10)).abs() < 1e-9);
        }
        let mcp = RegularizerSpec::mcp(0.7, 2.0).unwrap();
        assert!((mcp.rho(1.4 - 1e-10) - mcp.rho(1.4 + 1e-10)).abs() < 1e-9);
    }

    #[test]
    fn rho_prime_examples() {
        let scad = RegularizerSpec::scad(1.0, 2.5).unwrap();
        assert_eq!(scad.rho_prime(5.0, Side::Auto).unwrap(), 0.0);
        let lsp = RegularizerSpec::lsp(2.0).unwrap();
        assert!((lsp.rho_prime(1.0, Side::Auto).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        for spec in [scad, lsp, RegularizerSpec::mcp(0.4, 1.5).unwrap()] {
            assert_eq!(spec.rho_prime(0.0, Side::FromPositive).unwrap(), spec.lambda);
            assert!(matches!(spec.rho_prime(0.0, Side::Auto), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn q_prime_examples() {
        let mcp = RegularizerSpec::mcp(1.0, 1.5).unwrap();
        assert_eq!(mcp.q_prime(0.0), 0.0);
        assert_eq!(mcp.q_prime(2.0), 1.0);
        assert_eq!(mcp.q_prime(-2.0), -1.0);
        let l1 = RegularizerSpec::l1(0.5).unwrap();
        assert!(grid().iter().all(|&t| l1.q_prime(t) == 0.0));
    }

    #[test]
    fn q_prime_matches_decomposition() {
        for spec in [
            RegularizerSpec::scad(0.5, 2.5).unwrap(),
            RegularizerSpec::mcp(0.5, 1.5).unwrap(),
            RegularizerSpec::lsp(0.8).unwrap(),
        ] {
            for &t in &[-2.3, -0.6, -0.1, 0.2, 0.55, 0.9, 3.0] {
                let h = 1e-6;
                let fd = (spec.q(t + h) - spec.q(t - h)) / (2.0 * h);
                assert!((fd - spec.q_prime(t)).abs() < 1e-7, "{spec:?} t={t}");
            }
        }
    }

    #[test]
    fn amenability_constants() {
        let a = RegularizerSpec::scad(0.1, 2.5).unwrap().amenability();
        assert!((a.mu - 1.0 / 1.5).abs() < 1e-15);
        assert_eq!(a.gamma, Some(2.5));
        let a = RegularizerSpec::mcp(0.1, 1.5).unwrap().amenability();
        assert!((a.mu - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.gamma, Some(1.5));
        let a = RegularizerSpec::lsp(0.1).unwrap().amenability();
        assert!((a.mu - 0.01).abs() < 1e-15);
        assert_eq!(a.gamma, None);
        let a = RegularizerSpec::l1(0.1).unwrap().amenability();
        assert_eq!((a.mu, a.gamma), (0.0, None));
    }

    #[test]
    fn check_amenable_examples() {
        let r = check_amenable(&RegularizerSpec::l1(1.0).unwrap(), &grid());
        assert!(r.all_pass());
        assert_eq!(r.unbiased, None);

        let scad = RegularizerSpec::scad(1.0, 2.5).unwrap();
        let r = check_amenable(&scad, &grid());
        assert!(r.all_pass(), "{r:?}");
        assert_eq!(r.unbiased, Some(true));

        for spec in [RegularizerSpec::mcp(1.0, 1.5).unwrap(), RegularizerSpec::lsp(1.0).unwrap()] {
            assert!(check_amenable(&spec, &grid()).all_pass());
        }

        assert!(matches!(RegularizerSpec::scad(1.0, 1.5), Err(Error::InvalidArgument(_))));
        assert!(RegularizerSpec::mcp(1.0, 0.0).is_err());
        assert!(RegularizerSpec::l1(0.0).is_err());
    }

    #[test]
    fn wrong_mu_is_caught() {
        // SCAD with the convexity constant understated must fail the check
        let spec = RegularizerSpec::scad(1.0, 2.5).unwrap();
        let h = |t: f64| spec.rho(t) + 0.25 * t * t;
        let pts: Vec<f64> = (0..60).map(|i| 1.0 + 0.025 * i as f64).collect();
        let slopes: Vec<f64> = pts.windows(2).map(|w| (h(w[1]) - h(w[0])) / (w[1] - w[0])).collect();
        assert!(slopes.windows(2).any(|s| s[1] - s[0] < -1e-8));
    }

    #[test]
    fn json_round_trip() {
        let spec: RegularizerSpec =
            serde_json::from_str(r#"{"kind":"scad","lambda":0.1,"a":2.5}"#).unwrap();
        assert_eq!(spec, RegularizerSpec::scad(0.1, 2.5).unwrap());
        let back: RegularizerSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let bad = serde_json::from_str::<RegularizerSpec>(r#"{"kind":"scad","lambda":0.1,"a":1.5}"#);
        assert!(bad.is_err());
        let l1: RegularizerSpec = serde_json::from_str(r#"{"kind":"l1","lambda":0.3}"#).unwrap();
        assert_eq!(l1.penalty, Penalty::L1);
    }

    fn arb_spec() -> impl Strategy<Value = RegularizerSpec> {
        (0usize..4, 0.01f64..3.0, 2.01f64..6.0, 0.1f64..5.0).prop_map(|(kind, lam, a, b)| {
            let penalty = match kind {
                0 => Penalty::L1,
                1 => Penalty::Scad { a },
                2 => Penalty::Mcp { b },
                _ => Penalty::Lsp,
            };
            RegularizerSpec::new(penalty, lam).unwrap()
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_monotone(spec in arb_spec(), s in -20.0f64..20.0, t in -20.0f64..20.0) {
            prop_assert_eq!(spec.rho(t), spec.rho(-t));
            let (lo, hi) = if s.abs() <= t.abs() { (s, t) } else { (t, s) };
            prop_assert!(spec.rho(lo) <= spec.rho(hi) + 1e-12);
        }

        #[test]
        fn derivative_bounded_by_lambda(spec in arb_spec(), t in -20.0f64..20.0) {
            prop_assume!(t != 0.0);
            prop_assert!(spec.rho_prime(t, Side::Auto).unwrap().abs() <= spec.lambda + 1e-12);
        }

        #[test]
        fn q_prime_is_mu_lipschitz(spec in arb_spec(), s in -20.0f64..20.0, t in -20.0f64..20.0) {
            let mu = spec.mu();
            prop_assert!((spec.q_prime(s) - spec.q_prime(t)).abs() <= mu * (s - t).abs() + 1e-9);
        }

        #[test]
        fn flat_beyond_gamma_lambda(spec in arb_spec(), extra in 0.0f64..10.0, neg in any::<bool>()) {
            if let Some(g) = spec.amenability().gamma {
                let t = (g * spec.lambda + extra) * if neg { -1.0 } else { 1.0 };
                prop_assert_eq!(spec.rho_prime(t, Side::Auto).unwrap(), 0.0);
                prop_assert_eq!(spec.q_prime(t), spec.lambda * t.signum());
            }
        }
    }
}
