//! Activation functions and their interval bounds.
//!
//! All six variants map into `[0, inf)` and are monotone on all of `R`,
//! which is what makes the sensitivity of a point computable in closed form:
//! the supremum of `|phi|` over an interval is attained at an endpoint.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// Monotonicity direction of an activation over all of `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
}

/// An activation function variant.
///
/// `SoftClip`'s sharpness `alpha` must be positive and finite; construct it
/// through [`ActivationKind::soft_clip`] or call [`ActivationKind::validate`]
/// after deserializing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    /// `max(x, 0)`
    Relu,
    /// `1 / (1 + e^-x)`
    Sigmoid,
    /// `0` for `x < 0`, `1` for `x >= 0`
    BinaryStep,
    /// `ln(1 + e^x)`
    Softplus,
    /// `(1/alpha) * ln((1 + e^(alpha x)) / (1 + e^(alpha (x - 1))))`
    SoftClip { alpha: f64 },
    /// `e^-x`
    Gauss,
}

/// `ln(1 + e^x)` without overflow: for large `x` the direct form would
/// compute `exp(x) = inf`, so it switches to `x + ln(1 + e^-x)`.
fn softplus_stable(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl ActivationKind {
    /// Builds a `SoftClip`, rejecting non-positive or non-finite sharpness.
    pub fn soft_clip(alpha: f64) -> Result<Self> {
        let kind = ActivationKind::SoftClip { alpha };
        kind.validate()?;
        Ok(kind)
    }

    /// Checks variant parameters (`SoftClip` sharpness).
    pub fn validate(&self) -> Result<()> {
        if let ActivationKind::SoftClip { alpha } = self {
            if !alpha.is_finite() || *alpha <= 0.0 {
                return Err(Error::InvalidActivation {
                    activation: "soft_clip".into(),
                    reason: format!("alpha must be positive and finite, got {alpha}"),
                });
            }
        }
        Ok(())
    }

    /// Lowercase wire name used in model files.
    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::BinaryStep => "binary_step",
            ActivationKind::Softplus => "softplus",
            ActivationKind::SoftClip { .. } => "soft_clip",
            ActivationKind::Gauss => "gauss",
        }
    }

    /// Evaluates the activation. Total: finite and non-NaN for every finite
    /// input (`Gauss` saturates to `f64::MAX` where `e^-x` overflows).
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Sigmoid => {
                // Split on sign so the exponential never overflows.
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            ActivationKind::BinaryStep => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Softplus => softplus_stable(x),
            ActivationKind::SoftClip { alpha } => {
                (softplus_stable(alpha * x) - softplus_stable(alpha * (x - 1.0))) / alpha
            }
            ActivationKind::Gauss => {
                let v = (-x).exp();
                if v.is_finite() {
                    v
                } else {
                    f64::MAX
                }
            }
        }
    }

    /// Monotonicity direction; every variant is monotone on all of `R`.
    pub fn monotonicity(&self) -> Monotonicity {
        match self {
            ActivationKind::Gauss => Monotonicity::NonIncreasing,
            _ => Monotonicity::NonDecreasing,
        }
    }

    /// `sup { |phi(z)| : z in [lo, hi] }`, exact for monotone `phi`: the
    /// supremum is attained at an interval endpoint.
    pub fn sup_abs_on_interval(&self, lo: f64, hi: f64) -> Result<f64> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(invalid(
                "interval",
                format!("endpoints must be finite, got [{lo}, {hi}]"),
            ));
        }
        if lo > hi {
            return Err(invalid("interval", format!("lo {lo} exceeds hi {hi}")));
        }
        self.validate()?;
        Ok(self.eval(lo).abs().max(self.eval(hi).abs()))
    }
}

// --- serde: plain string for fixed variants, {"kind","alpha"} for soft_clip ---

impl Serialize for ActivationKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ActivationKind::SoftClip { alpha } => {
                use serde::ser::SerializeStruct;
                let mut s = serializer.serialize_struct("ActivationKind", 2)?;
                s.serialize_field("kind", "soft_clip")?;
                s.serialize_field("alpha", alpha)?;
                s.end()
            }
            other => serializer.serialize_str(other.name()),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ActivationRepr {
    Name(String),
    Tagged { kind: String, alpha: Option<f64> },
}

impl<'de> Deserialize<'de> for ActivationKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ActivationRepr::deserialize(deserializer).map_err(|_| {
            D::Error::custom("activation must be a name string or {\"kind\", \"alpha\"}")
        })?;
        let (name, alpha) = match &repr {
            ActivationRepr::Name(n) => (n.as_str(), None),
            ActivationRepr::Tagged { kind, alpha } => (kind.as_str(), *alpha),
        };
        let kind = match name {
            "relu" => ActivationKind::Relu,
            "sigmoid" => ActivationKind::Sigmoid,
            "binary_step" => ActivationKind::BinaryStep,
            "softplus" => ActivationKind::Softplus,
            "gauss" => ActivationKind::Gauss,
            "soft_clip" => {
                let alpha =
                    alpha.ok_or_else(|| D::Error::custom("soft_clip requires an `alpha` field"))?;
                ActivationKind::soft_clip(alpha).map_err(D::Error::custom)?
            }
            other => return Err(D::Error::custom(format!("unknown activation `{other}`"))),
        };
        if alpha.is_some() && kind.name() != "soft_clip" {
            return Err(D::Error::custom(format!(
                "activation `{name}` takes no alpha"
            )));
        }
        Ok(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALL: [ActivationKind; 6] = [
        ActivationKind::Relu,
        ActivationKind::Sigmoid,
        ActivationKind::BinaryStep,
        ActivationKind::Softplus,
        ActivationKind::SoftClip { alpha: 2.0 },
        ActivationKind::Gauss,
    ];

    #[test]
    fn frozen_point_values() {
        assert_eq!(ActivationKind::Relu.eval(-2.0), 0.0);
        assert_eq!(ActivationKind::Relu.eval(3.5), 3.5);
        assert_eq!(ActivationKind::Sigmoid.eval(0.0), 0.5);
        assert_eq!(ActivationKind::BinaryStep.eval(0.0), 1.0);
        assert_eq!(ActivationKind::BinaryStep.eval(-1e-300), 0.0);
        assert_eq!(ActivationKind::Gauss.eval(0.0), 1.0);
        let softplus0 = ActivationKind::Softplus.eval(0.0);
        assert!(
            (softplus0 - std::f64::consts::LN_2).abs() < 1e-15,
            "{softplus0}"
        );
    }

    #[test]
    fn frozen_sup_abs_values() {
        let relu = ActivationKind::Relu.sup_abs_on_interval(-3.0, 2.0).unwrap();
        assert_eq!(relu, 2.0);
        let gauss = ActivationKind::Gauss
            .sup_abs_on_interval(-1.0, 1.0)
            .unwrap();
        assert!((gauss - std::f64::consts::E).abs() < 1e-15, "{gauss}");
        let sig = ActivationKind::Sigmoid
            .sup_abs_on_interval(-5.0, 5.0)
            .unwrap();
        assert!((sig - 0.9933071490757153).abs() < 1e-12, "{sig}");
    }

    #[test]
    fn sup_abs_rejects_bad_intervals() {
        assert!(ActivationKind::Relu.sup_abs_on_interval(1.0, -1.0).is_err());
        assert!(ActivationKind::Relu
            .sup_abs_on_interval(f64::NAN, 1.0)
            .is_err());
        assert!(ActivationKind::Relu
            .sup_abs_on_interval(f64::NEG_INFINITY, 0.0)
            .is_err());
    }

    #[test]
    fn soft_clip_rejects_bad_alpha() {
        assert!(ActivationKind::soft_clip(0.0).is_err());
        assert!(ActivationKind::soft_clip(-1.0).is_err());
        assert!(ActivationKind::soft_clip(f64::NAN).is_err());
        assert!(ActivationKind::soft_clip(3.0).is_ok());
    }

    #[test]
    fn soft_clip_matches_direct_formula_in_safe_range() {
        let alpha = 2.0;
        let phi = ActivationKind::SoftClip { alpha };
        for i in -40..=40 {
            let x = i as f64 / 4.0;
            let direct =
                ((1.0 + (alpha * x).exp()) / (1.0 + (alpha * (x - 1.0)).exp())).ln() / alpha;
            assert!((phi.eval(x) - direct).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn overflow_prone_inputs_stay_finite() {
        for phi in ALL {
            for x in [-1e6, -750.0, -30.5, 0.0, 30.5, 750.0, 1e6] {
                let v = phi.eval(x);
                assert!(v.is_finite(), "{phi:?} at {x} gave {v}");
                assert!(v >= 0.0, "{phi:?} at {x} gave {v}");
            }
        }
    }

    #[test]
    fn serde_wire_format() {
        let json = serde_json::to_string(&ActivationKind::Relu).unwrap();
        assert_eq!(json, "\"relu\"");
        let json = serde_json::to_string(&ActivationKind::SoftClip { alpha: 2.0 }).unwrap();
        assert_eq!(json, "{\"kind\":\"soft_clip\",\"alpha\":2.0}");

        let back: ActivationKind = serde_json::from_str("\"gauss\"").unwrap();
        assert_eq!(back, ActivationKind::Gauss);
        let back: ActivationKind =
            serde_json::from_str("{\"kind\":\"soft_clip\",\"alpha\":0.5}").unwrap();
        assert_eq!(back, ActivationKind::SoftClip { alpha: 0.5 });

        assert!(serde_json::from_str::<ActivationKind>("\"reluu\"").is_err());
        assert!(serde_json::from_str::<ActivationKind>("{\"kind\":\"soft_clip\"}").is_err());
        assert!(
            serde_json::from_str::<ActivationKind>("{\"kind\":\"soft_clip\",\"alpha\":-1.0}")
                .is_err()
        );
    }

    fn arb_activation() -> impl Strategy<Value = ActivationKind> {
        prop_oneof![
            Just(ActivationKind::Relu),
            Just(ActivationKind::Sigmoid),
            Just(ActivationKind::BinaryStep),
            Just(ActivationKind::Softplus),
            (0.1f64..8.0).prop_map(|alpha| ActivationKind::SoftClip { alpha }),
            Just(ActivationKind::Gauss),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn monotone_in_declared_direction(phi in arb_activation(),
                                          a in -100.0f64..100.0,
                                          b in -100.0f64..100.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (flo, fhi) = (phi.eval(lo), phi.eval(hi));
            // Saturated soft clip wobbles by a few ulps around 1, so allow a
            // tiny absolute slack; the property is otherwise strict.
            let slack = 1e-12;
            match phi.monotonicity() {
                Monotonicity::NonDecreasing => {
                    prop_assert!(flo <= fhi + slack, "{phi:?} {lo} {hi}: {flo} > {fhi}")
                }
                Monotonicity::NonIncreasing => {
                    prop_assert!(flo + slack >= fhi, "{phi:?} {lo} {hi}: {flo} < {fhi}")
                }
            }
        }

        #[test]
        fn eval_total_and_non_negative(phi in arb_activation(), x in -1e8f64..1e8) {
            let v = phi.eval(x);
            prop_assert!(v.is_finite());
            prop_assert!(v >= 0.0);
        }

        #[test]
        fn sup_abs_dominates_interior_values(phi in arb_activation(),
                                             a in -50.0f64..50.0,
                                             b in -50.0f64..50.0,
                                             frac in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let sup = phi.sup_abs_on_interval(lo, hi).unwrap();
            let x = lo + frac * (hi - lo);
            prop_assert!(phi.eval(x).abs() <= sup * (1.0 + 1e-12) + 1e-300,
                         "{phi:?} at {x} in [{lo},{hi}]: {} > {sup}", phi.eval(x));
        }
    }
}
