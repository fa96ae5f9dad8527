//! Brooks–Corey relative permeability and capillary pressure, plus the
//! fractional-flow quantities derived from them.

use serde::{Deserialize, Serialize};

use crate::model::FluidProps;
use crate::{Error, Result};

/// Lower bound on the effective saturation inside the capillary pressure curve.
pub const PC_SE_FLOOR: f64 = 1e-3;

/// Number of points in the saturation sweep used by [`max_fw_slope`].
pub const SLOPE_SWEEP_POINTS: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrooksCoreyParams {
    /// Wetting-phase relative permeability at `Se = 1`.
    pub krw_end: f64,
    /// Non-wetting-phase relative permeability at `Se = 0`.
    pub krnw_end: f64,
    /// Corey exponent shared by both phases.
    pub n_exp: f64,
    /// Immobile wetting fraction.
    pub swi: f64,
    /// Immobile non-wetting fraction.
    pub snwi: f64,
    /// Entry capillary pressure [Pa].
    pub pe: f64,
    /// Capillary exponent.
    pub a_cap: f64,
}

impl BrooksCoreyParams {
    /// Table values shared by the two 2D test cases.
    pub fn cases_1_and_2() -> Self {
        Self {
            krw_end: 1.0,
            krnw_end: 1.0,
            n_exp: 2.0,
            swi: 0.2,
            snwi: 0.3,
            pe: 1000.0,
            a_cap: 1.0,
        }
    }

    pub fn case_3() -> Self {
        Self {
            krw_end: 0.3,
            krnw_end: 0.8,
            n_exp: 2.0,
            swi: 0.2,
            snwi: 0.2,
            pe: 100.0,
            a_cap: 1.0,
        }
    }

    pub fn case_4() -> Self {
        Self {
            pe: 10_000.0,
            ..Self::case_3()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Model(msg));
        if !(self.swi >= 0.0 && self.snwi >= 0.0 && self.swi + self.snwi < 1.0) {
            return bad(format!(
                "immobile fractions swi={} snwi={} must be >= 0 with sum < 1",
                self.swi, self.snwi
            ));
        }
        for (name, v) in [("krw_end", self.krw_end), ("krnw_end", self.krnw_end)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name}={v} must lie in (0, 1]"));
            }
        }
        if !(self.n_exp > 0.0 && self.a_cap > 0.0) {
            return bad(format!(
                "exponents must be positive (n={}, a_cap={})",
                self.n_exp, self.a_cap
            ));
        }
        if !(self.pe >= 0.0) {
            return bad(format!("entry pressure {} must be >= 0", self.pe));
        }
        Ok(())
    }

    fn mobile_range(&self) -> f64 {
        1.0 - self.swi - self.snwi
    }
}

/// `Se = clamp((Sw − Swi) / (1 − Swi − Snwi), 0, 1)`.
pub fn effective_saturation(sw: f64, p: &BrooksCoreyParams) -> f64 {
    ((sw - p.swi) / p.mobile_range()).clamp(0.0, 1.0)
}

/// `(krw, krnw)`.
pub fn relperm(sw: f64, p: &BrooksCoreyParams) -> (f64, f64) {
    let se = effective_saturation(sw, p);
    (
        p.krw_end * se.powf(p.n_exp),
        p.krnw_end * (1.0 - se).powf(p.n_exp),
    )
}

/// `pc = pe · max(Se, ε)^(−a_cap)`.
pub fn capillary_pressure(sw: f64, p: &BrooksCoreyParams) -> f64 {
    if p.pe == 0.0 {
        return 0.0;
    }
    let se = effective_saturation(sw, p).max(PC_SE_FLOOR);
    p.pe * se.powf(-p.a_cap)
}

/// Phase mobilities `(krw/μw, krnw/μnw)`.
pub fn mobilities(sw: f64, p: &BrooksCoreyParams, fluid: &FluidProps) -> (f64, f64) {
    let (krw, krnw) = relperm(sw, p);
    (krw / fluid.mu_w, krnw / fluid.mu_nw)
}

pub fn total_mobility(sw: f64, p: &BrooksCoreyParams, fluid: &FluidProps) -> f64 {
    let (lw, lnw) = mobilities(sw, p, fluid);
    lw + lnw
}

/// Wetting-phase fractional flow `λw / λt`.
pub fn fractional_flow(sw: f64, p: &BrooksCoreyParams, fluid: &FluidProps) -> f64 {
    let (lw, lnw) = mobilities(sw, p, fluid);
    let lt = lw + lnw;
    if lt > 0.0 {
        lw / lt
    } else {
        0.0
    }
}

/// Closed-form `dfw/dSw` for the Corey curves; zero outside the mobile range.
pub fn fractional_flow_derivative(sw: f64, p: &BrooksCoreyParams, fluid: &FluidProps) -> f64 {
    let se = (sw - p.swi) / p.mobile_range();
    if !(se > 0.0 && se < 1.0) {
        return 0.0;
    }
    let n = p.n_exp;
    let lw = p.krw_end * se.powf(n) / fluid.mu_w;
    let lnw = p.krnw_end * (1.0 - se).powf(n) / fluid.mu_nw;
    let dlw = p.krw_end * n * se.powf(n - 1.0) / fluid.mu_w;
    let dlnw = -p.krnw_end * n * (1.0 - se).powf(n - 1.0) / fluid.mu_nw;
    let lt = lw + lnw;
    (dlw * lnw - lw * dlnw) / (lt * lt) / p.mobile_range()
}

/// Largest centered-difference slope of `fw` over a uniform sweep of the
/// mobile saturation range.
pub fn max_fw_slope(p: &BrooksCoreyParams, fluid: &FluidProps) -> f64 {
    let h = 1e-7;
    let lo = p.swi;
    let hi = 1.0 - p.snwi;
    (0..SLOPE_SWEEP_POINTS)
        .map(|i| {
            let s = lo + (hi - lo) * i as f64 / (SLOPE_SWEEP_POINTS - 1) as f64;
            (fractional_flow(s + h, p, fluid) - fractional_flow(s - h, p, fluid)) / (2.0 * h)
        })
        .fold(0.0, f64::max)
}

/// Welge tangent point of the fractional-flow curve from the initial state `Swi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockFront {
    /// Post-shock saturation `S*`.
    pub saturation: f64,
    /// Tangent slope `(fw(S*) − fw(Swi)) / (S* − Swi)`, i.e. the dimensionless shock speed.
    pub slope: f64,
}

/// Locates the tangent from `(Swi, fw(Swi))` to the fractional-flow curve.
///
/// A coarse sweep brackets the maximiser of the secant slope, which is then
/// refined by golden-section search.
pub fn welge_tangent(p: &BrooksCoreyParams, fluid: &FluidProps) -> ShockFront {
    let lo = p.swi;
    let hi = 1.0 - p.snwi;
    let f0 = fractional_flow(lo, p, fluid);
    let secant = |s: f64| (fractional_flow(s, p, fluid) - f0) / (s - lo);

    let n: usize = 2000;
    let step = (hi - lo) / n as f64;
    let mut best_i = n;
    let mut best = secant(hi);
    for i in 1..n {
        let v = secant(lo + step * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut a = lo + step * (best_i.saturating_sub(1).max(1)) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if secant(c) >= secant(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let s = 0.5 * (a + b);
    let (saturation, slope) = if secant(s) >= best {
        (s, secant(s))
    } else {
        (lo + step * best_i as f64, best)
    };
    ShockFront { saturation, slope }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_fluid() -> FluidProps {
        FluidProps {
            mu_w: 1.0,
            mu_nw: 1.0,
            rho_w: 1000.0,
            rho_nw: 1000.0,
        }
    }

    fn case1() -> BrooksCoreyParams {
        BrooksCoreyParams::cases_1_and_2()
    }

    #[test]
    fn effective_saturation_examples() {
        let p = case1();
        assert_eq!(effective_saturation(p.swi, &p), 0.0);
        assert!((effective_saturation(1.0 - p.snwi, &p) - 1.0).abs() < 1e-15);
        // swi = 0.2, snwi = 0.3 → (0.5 − 0.2) / 0.5
        assert!((effective_saturation(0.5, &p) - 0.6).abs() < 1e-15);
        assert_eq!(effective_saturation(0.0, &p), 0.0);
        assert_eq!(effective_saturation(1.0, &p), 1.0);
    }

    #[test]
    fn relperm_examples() {
        let p = case1();
        assert_eq!(relperm(p.swi, &p), (0.0, p.krnw_end));
        assert!((relperm(0.7, &p).0 - 1.0).abs() < 1e-12);
        // Se = 0.5 at Sw = 0.45
        let (krw, krnw) = relperm(0.45, &p);
        assert!((krw - 0.25).abs() < 1e-12 && (krnw - 0.25).abs() < 1e-12);
    }

    #[test]
    fn capillary_examples() {
        let p = case1();
        assert!((capillary_pressure(0.7, &p) - 1000.0).abs() < 1e-9);
        assert!((capillary_pressure(0.45, &p) - 2000.0).abs() < 1e-9);
        let no_pc = BrooksCoreyParams { pe: 0.0, ..p };
        for i in 0..=10 {
            assert_eq!(capillary_pressure(i as f64 / 10.0, &no_pc), 0.0);
        }
        // floor keeps the inlet finite
        assert!((capillary_pressure(p.swi, &p) - 1000.0 / PC_SE_FLOOR).abs() < 1e-6);
    }

    #[test]
    fn total_mobility_examples() {
        let p = case1();
        let fluid = FluidProps {
            mu_w: 1e-3,
            mu_nw: 5e-3,
            ..unit_fluid()
        };
        assert!((total_mobility(p.swi, &p, &fluid) - p.krnw_end / fluid.mu_nw).abs() < 1e-9);
        assert!((total_mobility(0.45, &p, &unit_fluid()) - 0.5).abs() < 1e-12);
        for i in 0..=100 {
            assert!(total_mobility(i as f64 / 100.0, &p, &fluid) >= 0.0);
        }
    }

    #[test]
    fn fractional_flow_examples() {
        let p = case1();
        let fluid = unit_fluid();
        assert_eq!(fractional_flow(p.swi, &p, &fluid), 0.0);
        assert!((fractional_flow(1.0 - p.snwi, &p, &fluid) - 1.0).abs() < 1e-15);
        let sym = BrooksCoreyParams { snwi: 0.2, ..p };
        assert!((fractional_flow(0.5, &sym, &fluid) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn monotonicity_sweeps() {
        let p = case1();
        let fluid = FluidProps {
            mu_w: 1e-3,
            mu_nw: 5e-3,
            ..unit_fluid()
        };
        let mut prev = (
            relperm(0.0, &p),
            fractional_flow(0.0, &p, &fluid),
            capillary_pressure(0.0, &p),
        );
        for i in 1..=2000 {
            let s = i as f64 / 2000.0;
            let cur = (
                relperm(s, &p),
                fractional_flow(s, &p, &fluid),
                capillary_pressure(s, &p),
            );
            assert!(cur.0 .0 >= prev.0 .0, "krw not monotone at {s}");
            assert!(cur.0 .1 <= prev.0 .1, "krnw not monotone at {s}");
            assert!(cur.1 >= prev.1 && (0.0..=1.0).contains(&cur.1), "fw at {s}");
            assert!(cur.2 <= prev.2, "pc not monotone at {s}");
            prev = cur;
        }
    }

    #[test]
    fn analytic_derivative_matches_differences() {
        let p = case1();
        let fluid = FluidProps {
            mu_w: 1e-3,
            mu_nw: 5e-3,
            ..unit_fluid()
        };
        let h = 1e-6;
        for i in 1..100 {
            let s = p.swi + (1.0 - p.swi - p.snwi) * i as f64 / 100.0;
            let fd = (fractional_flow(s + h, &p, &fluid) - fractional_flow(s - h, &p, &fluid))
                / (2.0 * h);
            let an = fractional_flow_derivative(s, &p, &fluid);
            assert!(
                (fd - an).abs() < 1e-5 * an.abs().max(1.0),
                "s={s} fd={fd} an={an}"
            );
        }
    }

    #[test]
    fn max_slope_matches_fine_sweep_oracle() {
        let fluid = FluidProps {
            mu_w: 1e-3,
            mu_nw: 5e-3,
            ..unit_fluid()
        };
        for p in [
            case1(),
            BrooksCoreyParams::case_3(),
            BrooksCoreyParams {
                n_exp: 3.0,
                ..case1()
            },
        ] {
            let oracle = {
                let n = 100_001;
                let (lo, hi) = (p.swi, 1.0 - p.snwi);
                let h = 1e-7;
                (0..n)
                    .map(|i| {
                        let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                        (fractional_flow(s + h, &p, &fluid) - fractional_flow(s - h, &p, &fluid))
                            / (2.0 * h)
                    })
                    .fold(0.0, f64::max)
            };
            let got = max_fw_slope(&p, &fluid);
            assert!(
                (got - oracle).abs() <= 0.01 * oracle,
                "got {got}, oracle {oracle}"
            );
        }
    }

    #[test]
    fn welge_tangent_touches_the_curve() {
        let p = case1();
        let fluid = FluidProps {
            mu_w: 1e-3,
            mu_nw: 5e-3,
            ..unit_fluid()
        };
        let front = welge_tangent(&p, &fluid);
        // tangency: slope equals the local derivative at S*
        let d = fractional_flow_derivative(front.saturation, &p, &fluid);
        assert!(
            (d - front.slope).abs() < 1e-4 * d,
            "d={d} slope={}",
            front.slope
        );
        assert!(front.saturation > p.swi && front.saturation < 1.0 - p.snwi);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(case1().validate().is_ok());
        assert!(BrooksCoreyParams {
            swi: 0.6,
            snwi: 0.5,
            ..case1()
        }
        .validate()
        .is_err());
        assert!(BrooksCoreyParams {
            krw_end: 0.0,
            ..case1()
        }
        .validate()
        .is_err());
        assert!(BrooksCoreyParams {
            n_exp: -1.0,
            ..case1()
        }
        .validate()
        .is_err());
        assert!(BrooksCoreyParams {
            pe: -1.0,
            ..case1()
        }
        .validate()
        .is_err());
    }
}
