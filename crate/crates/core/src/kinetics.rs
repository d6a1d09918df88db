//! Model parameters, refuge profiles and pointwise reaction terms.
//!
//! The three species are the prey `u`, the middle predator `v` and the
//! invasive top predator `r`. Reaction terms are evaluated pointwise; the
//! refuge enters through the local value of `b1 ∈ [0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All model constants.
///
/// `sat0..sat4` are the half-saturation (protection) constants, `d1..d3`
/// the diffusion coefficients of `u`, `v`, `r` and `d4` the overcrowding
/// coefficient multiplying `(r^2)_xx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSet {
    pub a1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c: f64,
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    #[serde(default)]
    pub w4: f64,
    #[serde(default)]
    pub w5: f64,
    pub sat0: f64,
    pub sat1: f64,
    pub sat2: f64,
    pub sat3: f64,
    #[serde(default = "one")]
    pub sat4: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    #[serde(default)]
    pub d4: f64,
}

fn one() -> f64 {
    1.0
}

impl ParameterSet {
    /// One-dimensional blow-up versus refuge experiments.
    pub fn refuge_1d() -> Self {
        Self {
            a1: 1.0,
            a2: 1.0,
            b2: 0.5,
            c: 0.055,
            w0: 0.55,
            w1: 0.1,
            w2: 0.25,
            w3: 1.2,
            w4: 100.0,
            w5: 0.55,
            sat0: 10.0,
            sat1: 13.0,
            sat2: 10.0,
            sat3: 20.0,
            sat4: 10.0,
            d1: 0.1,
            d2: 0.1,
            d3: 0.1,
            d4: 0.0,
        }
    }

    /// Turing pattern configuration (diffusion set `1e-2, 1e-5, 1e-7`).
    pub fn turing() -> Self {
        Self {
            a1: 1.79,
            a2: 0.8,
            b2: 0.15,
            c: 0.04,
            w0: 0.55,
            w1: 2.0,
            w2: 0.5,
            w3: 1.2,
            w4: 0.0,
            w5: 0.0,
            sat0: 10.0,
            sat1: 13.0,
            sat2: 10.0,
            sat3: 20.0,
            sat4: 1.0,
            d1: 1e-2,
            d2: 1e-5,
            d3: 1e-7,
            d4: 0.0,
        }
    }

    /// Spatio-temporal chaos configuration.
    pub fn chaos() -> Self {
        Self {
            a1: 1.93,
            a2: 1.89,
            b2: 0.06,
            c: 0.03,
            w0: 1.0,
            w1: 0.5,
            w2: 0.405,
            w3: 1.0,
            w4: 0.0,
            w5: 0.0,
            sat0: 10.0,
            sat1: 10.0,
            sat2: 10.0,
            sat3: 20.0,
            sat4: 1.0,
            d1: 1e-5,
            d2: 1e-5,
            d3: 1e-5,
            d4: 0.0,
        }
    }

    /// Two-dimensional avoided blow-up run with a Gaussian invader.
    pub fn avoided_2d() -> Self {
        Self {
            a1: 5.0,
            a2: 0.75,
            b2: 0.5,
            c: 0.055,
            w0: 0.55,
            w1: 1.0,
            w2: 0.25,
            w3: 1.2,
            w4: 0.0,
            w5: 0.0,
            sat0: 20.0,
            sat1: 13.0,
            sat2: 10.0,
            sat3: 20.0,
            sat4: 1.0,
            d1: 0.1,
            d2: 0.1,
            d3: 0.1,
            d4: 0.0,
        }
    }

    /// Two-dimensional critical refuge area runs. `a2` is not fixed by the
    /// source configuration; 1.0 is used.
    pub fn critical_area_2d() -> Self {
        Self {
            a1: 1.0,
            a2: 1.0,
            b2: 0.5,
            c: 0.055,
            w0: 0.55,
            w1: 2.0,
            w2: 0.25,
            w3: 1.2,
            w4: 0.0,
            w5: 0.0,
            sat0: 20.0,
            sat1: 13.0,
            sat2: 10.0,
            sat3: 20.0,
            sat4: 1.0,
            d1: 0.1,
            d2: 0.1,
            d3: 0.1,
            d4: 0.0,
        }
    }

    /// Name and value of every field in declaration order.
    pub fn fields(&self) -> [(&'static str, f64); 19] {
        [
            ("a1", self.a1),
            ("a2", self.a2),
            ("b2", self.b2),
            ("c", self.c),
            ("w0", self.w0),
            ("w1", self.w1),
            ("w2", self.w2),
            ("w3", self.w3),
            ("w4", self.w4),
            ("w5", self.w5),
            ("sat0", self.sat0),
            ("sat1", self.sat1),
            ("sat2", self.sat2),
            ("sat3", self.sat3),
            ("sat4", self.sat4),
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
            ("d4", self.d4),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.fields() {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{value} is not finite"),
                });
            }
            let positive = name.starts_with("sat");
            if positive && value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{value} must be strictly positive"),
                });
            }
            if value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{value} must be nonnegative"),
                });
            }
        }
        Ok(())
    }

    /// `c < w3 / sat3`: the `r^2` coefficient is negative wherever `v` vanishes.
    pub fn subcritical(&self) -> bool {
        self.c < self.w3 / self.sat3
    }

    /// Overcrowding coefficient written as a multiple of `|c - w3/sat3|`.
    pub fn overcrowding_from_factor(&self, k: f64) -> f64 {
        k * (self.c - self.w3 / self.sat3).abs()
    }
}

/// Shape of a two-dimensional indicator refuge centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum RefugeShape {
    /// `|x| < halfwidth` and `|y| < halfwidth`.
    Square { halfwidth: f64 },
    /// `x^2 + y^2 < radius_sq`.
    Circle { radius_sq: f64 },
}

impl RefugeShape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            RefugeShape::Square { halfwidth } => x.abs() < halfwidth && y.abs() < halfwidth,
            RefugeShape::Circle { radius_sq } => x * x + y * y < radius_sq,
        }
    }

    /// Nominal area of the shape (not clipped to the domain).
    pub fn area(&self) -> f64 {
        match *self {
            RefugeShape::Square { halfwidth } => 4.0 * halfwidth * halfwidth,
            RefugeShape::Circle { radius_sq } => std::f64::consts::PI * radius_sq,
        }
    }
}

/// Spatial protection factor `b1`; 1 inside a refuge, 0 in the open area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RefugeProfile {
    Zero,
    One,
    /// `b1(x) = (1 - tanh((x - center)/width)) / 2`, a refuge on `x < center`.
    TanhStep { center: f64, width: f64 },
    #[serde(rename = "indicator")]
    Indicator2D(RefugeShape),
    /// Piecewise-linear table in `x`, clamped to `[0, 1]` and held constant
    /// outside the tabulated range.
    Custom { xs: Vec<f64>, values: Vec<f64> },
}

impl RefugeProfile {
    pub fn tanh_step(center: f64, width: f64) -> Self {
        RefugeProfile::TanhStep { center, width }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RefugeProfile::TanhStep { center, width } => {
                if !center.is_finite() || !(width.is_finite() && *width > 0.0) {
                    return Err(Error::InvalidVariant(format!(
                        "tanh refuge needs finite center and positive width, got ({center}, {width})"
                    )));
                }
            }
            RefugeProfile::Indicator2D(RefugeShape::Square { halfwidth: s })
            | RefugeProfile::Indicator2D(RefugeShape::Circle { radius_sq: s }) => {
                if !(s.is_finite() && *s >= 0.0) {
                    return Err(Error::InvalidVariant(format!("invalid refuge size {s}")));
                }
            }
            RefugeProfile::Custom { xs, values } => {
                if xs.is_empty() || xs.len() != values.len() {
                    return Err(Error::InvalidVariant(
                        "custom refuge table needs equal, nonzero lengths".into(),
                    ));
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidVariant(
                        "custom refuge abscissae must increase".into(),
                    ));
                }
                if xs.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("custom refuge table"));
                }
            }
            RefugeProfile::Zero | RefugeProfile::One => {}
        }
        Ok(())
    }

    /// Value of `b1` at `(x, y)`; one-dimensional profiles ignore `y`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let value = match self {
            RefugeProfile::Zero => 0.0,
            RefugeProfile::One => 1.0,
            RefugeProfile::TanhStep { center, width } => 0.5 * (1.0 - ((x - center) / width).tanh()),
            RefugeProfile::Indicator2D(shape) => {
                if shape.contains(x, y) {
                    1.0
                } else {
                    0.0
                }
            }
            RefugeProfile::Custom { xs, values } => interpolate(xs, values, x),
        };
        value.clamp(0.0, 1.0)
    }
}

fn interpolate(xs: &[f64], values: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return values[0];
    }
    if x >= xs[last] {
        return values[last];
    }
    let i = xs.partition_point(|&p| p <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    values[i] + t * (values[i + 1] - values[i])
}

/// Which control mechanisms are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    /// Uncontrolled model; carries the overcrowding flux when `d4 > 0`.
    Classical,
    /// Prey refuge only; `d4` is ignored.
    RefugeOnly,
    /// Prey refuge combined with the overcrowding flux.
    RefugeOvercrowd,
    /// Refuge, role reversal of `u` and `v`, and overcrowding.
    RefugeRoleReversalOvercrowd,
}

impl VariantKind {
    pub fn name(&self) -> &'static str {
        match self {
            VariantKind::Classical => "classical",
            VariantKind::RefugeOnly => "refuge-only",
            VariantKind::RefugeOvercrowd => "refuge-overcrowd",
            VariantKind::RefugeRoleReversalOvercrowd => "refuge-role-reversal-overcrowd",
        }
    }
}

/// A model variant together with its refuge profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVariant {
    pub kind: VariantKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refuge: Option<RefugeProfile>,
}

impl ModelVariant {
    pub fn classical() -> Self {
        Self {
            kind: VariantKind::Classical,
            refuge: None,
        }
    }

    pub fn with_refuge(kind: VariantKind, refuge: RefugeProfile) -> Result<Self> {
        let variant = Self {
            kind,
            refuge: Some(refuge),
        };
        variant.validate()?;
        Ok(variant)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.refuge) {
            (VariantKind::Classical, Some(_)) => Err(Error::InvalidVariant(
                "the classical model takes no refuge".into(),
            )),
            (VariantKind::Classical, None) => Ok(()),
            (kind, None) => Err(Error::InvalidVariant(format!(
                "{} requires a refuge profile",
                kind.name()
            ))),
            (_, Some(profile)) => profile.validate(),
        }
    }

    /// `b1` at a point; zero for the classical model.
    pub fn refuge_at(&self, x: f64, y: f64) -> f64 {
        self.refuge.as_ref().map_or(0.0, |p| p.eval(x, y))
    }

    /// Effective overcrowding coefficient for this variant.
    pub fn overcrowding(&self, params: &ParameterSet) -> f64 {
        match self.kind {
            VariantKind::RefugeOnly => 0.0,
            _ => params.d4,
        }
    }
}

/// Reaction rates `(f, g, h)` for `(u, v, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rates {
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

/// Pointwise reaction terms of one variant for one parameter set.
///
/// All methods assume a nonnegative state; callers clamp first.
#[derive(Debug, Clone, Copy)]
pub struct Kinetics<'a> {
    pub kind: VariantKind,
    pub p: &'a ParameterSet,
}

impl<'a> Kinetics<'a> {
    pub fn new(kind: VariantKind, p: &'a ParameterSet) -> Self {
        Self { kind, p }
    }

    /// Coefficient multiplying `r^2` in the `r` equation.
    pub fn r_squared_coefficient(&self, b1: f64, v: f64) -> f64 {
        let p = self.p;
        match self.kind {
            VariantKind::Classical => p.c - p.w3 / (v + p.sat3),
            _ => p.c - p.w3 / ((1.0 - b1) * v + p.sat3),
        }
    }

    pub fn rates(&self, b1: f64, u: f64, v: f64, r: f64) -> Rates {
        let p = self.p;
        let open = 1.0 - b1;
        let h = self.r_squared_coefficient(b1, v) * r * r;
        match self.kind {
            VariantKind::Classical => Rates {
                f: p.a1 * u - p.b2 * u * u - p.w0 * u * v / (u + p.sat0),
                g: -p.a2 * v + p.w1 * u * v / (u + p.sat1) - p.w2 * v * r / (v + p.sat2),
                h,
            },
            VariantKind::RefugeOnly | VariantKind::RefugeOvercrowd => Rates {
                f: p.a1 * u - p.b2 * u * u - p.w0 * u * v / (u + p.sat0),
                g: -p.a2 * v + p.w1 * u * v / (u + p.sat1) - p.w2 * open * v * r / (v + p.sat2),
                h,
            },
            VariantKind::RefugeRoleReversalOvercrowd => Rates {
                f: p.a1 * u - p.b2 * u * u + open * p.w5 * v * u / (v + p.sat0)
                    - b1 * p.w1 * u * v / (u + p.sat3),
                g: -p.a2 * v + b1 * p.w1 * u * v / (u + p.sat1)
                    - open * (p.w4 * v * u / (v + p.sat2) + p.w2 * v * r / (v + p.sat4)),
                h,
            },
        }
    }

    /// Jacobian `∂(f,g,h)/∂(u,v,r)`, rows are equations.
    pub fn jacobian(&self, b1: f64, u: f64, v: f64, r: f64) -> [[f64; 3]; 3] {
        let p = self.p;
        let open = 1.0 - b1;
        let (v_eff, dv_eff) = match self.kind {
            VariantKind::Classical => (v, 1.0),
            _ => (open * v, open),
        };
        let q3 = v_eff + p.sat3;
        let coef = p.c - p.w3 / q3;
        let h_v = p.w3 * dv_eff / (q3 * q3) * r * r;
        let h_r = 2.0 * coef * r;
        match self.kind {
            VariantKind::Classical | VariantKind::RefugeOnly | VariantKind::RefugeOvercrowd => {
                let pred = if self.kind == VariantKind::Classical {
                    1.0
                } else {
                    open
                };
                let q0 = u + p.sat0;
                let q1 = u + p.sat1;
                let q2 = v + p.sat2;
                [
                    [
                        p.a1 - 2.0 * p.b2 * u - p.w0 * v * p.sat0 / (q0 * q0),
                        -p.w0 * u / q0,
                        0.0,
                    ],
                    [
                        p.w1 * v * p.sat1 / (q1 * q1),
                        -p.a2 + p.w1 * u / q1 - pred * p.w2 * r * p.sat2 / (q2 * q2),
                        -pred * p.w2 * v / q2,
                    ],
                    [0.0, h_v, h_r],
                ]
            }
            VariantKind::RefugeRoleReversalOvercrowd => {
                let qv0 = v + p.sat0;
                let qu3 = u + p.sat3;
                let qu1 = u + p.sat1;
                let qv2 = v + p.sat2;
                let qv4 = v + p.sat4;
                [
                    [
                        p.a1 - 2.0 * p.b2 * u + open * p.w5 * v / qv0
                            - b1 * p.w1 * v * p.sat3 / (qu3 * qu3),
                        open * p.w5 * u * p.sat0 / (qv0 * qv0) - b1 * p.w1 * u / qu3,
                        0.0,
                    ],
                    [
                        b1 * p.w1 * v * p.sat1 / (qu1 * qu1) - open * p.w4 * v / qv2,
                        -p.a2 + b1 * p.w1 * u / qu1
                            - open
                                * (p.w4 * u * p.sat2 / (qv2 * qv2)
                                    + p.w2 * r * p.sat4 / (qv4 * qv4)),
                        -open * p.w2 * v / qv4,
                    ],
                    [0.0, h_v, h_r],
                ]
            }
        }
    }
}

/// Reaction terms of `variant` at a spatial point `(x, y)`.
///
/// Negative state components are rejected; overcrowding is a flux and
/// contributes nothing here.
pub fn reaction(
    variant: &ModelVariant,
    params: &ParameterSet,
    state: (f64, f64, f64),
    point: (f64, f64),
) -> Result<Rates> {
    let (u, v, r) = state;
    for (component, value) in [("u", u), ("v", v), ("r", r)] {
        if value.is_nan() {
            return Err(Error::NonFinite("reaction state"));
        }
        if value < 0.0 {
            return Err(Error::NegativeState { component, value });
        }
    }
    let b1 = variant.refuge_at(point.0, point.1);
    Ok(Kinetics::new(variant.kind, params).rates(b1, u, v, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn all_kinds() -> [VariantKind; 4] {
        [
            VariantKind::Classical,
            VariantKind::RefugeOnly,
            VariantKind::RefugeOvercrowd,
            VariantKind::RefugeRoleReversalOvercrowd,
        ]
    }

    #[test]
    fn tanh_step_is_half_at_center() {
        let p = RefugeProfile::tanh_step(1.3, 0.04);
        assert_eq!(p.eval(1.3, 0.0), 0.5);
        assert!(p.eval(1.3 + 10.0 * 0.04, 0.0) < 1e-8);
        assert!(p.eval(1.3 - 10.0 * 0.04, 0.0) > 1.0 - 1e-8);
    }

    #[test]
    fn circle_indicator() {
        let p = RefugeProfile::Indicator2D(RefugeShape::Circle { radius_sq: 0.5 });
        assert_eq!(p.eval(0.0, 0.0), 1.0);
        assert_eq!(p.eval(1.0, 0.0), 0.0);
        let s = RefugeProfile::Indicator2D(RefugeShape::Square { halfwidth: 0.5 });
        assert_eq!(s.eval(0.49, -0.49), 1.0);
        assert_eq!(s.eval(0.51, 0.0), 0.0);
    }

    #[test]
    fn custom_profile_interpolates_and_clamps() {
        let p = RefugeProfile::Custom {
            xs: vec![0.0, 1.0, 2.0],
            values: vec![1.0, 0.0, 2.0],
        };
        assert_eq!(p.eval(-1.0, 0.0), 1.0);
        assert_eq!(p.eval(0.5, 0.0), 0.5);
        assert_eq!(p.eval(1.75, 0.0), 1.0);
        assert!(RefugeProfile::Custom {
            xs: vec![1.0, 0.0],
            values: vec![0.0, 0.0]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn variant_refuge_requirements() {
        assert!(ModelVariant::classical().validate().is_ok());
        let bad = ModelVariant {
            kind: VariantKind::Classical,
            refuge: Some(RefugeProfile::One),
        };
        assert!(bad.validate().is_err());
        let missing = ModelVariant {
            kind: VariantKind::RefugeOnly,
            refuge: None,
        };
        assert!(missing.validate().is_err());
    }

    #[test]
    fn hand_checked_r_rate() {
        // h = c r^2 - w3 r^2 / (v + D3) with r = 10, v = 2000
        let p = ParameterSet::refuge_1d();
        let rates = reaction(
            &ModelVariant::classical(),
            &p,
            (10.0, 2000.0, 10.0),
            (0.0, 0.0),
        )
        .unwrap();
        let expected = 0.055 * 100.0 - 1.2 * 100.0 / 2020.0;
        assert_relative_eq!(rates.h, expected, max_relative = 1e-14);
        assert_relative_eq!(rates.h, 5.440594059405941, max_relative = 1e-12);
    }

    #[test]
    fn full_refuge_removes_v_from_r_equation() {
        let p = ParameterSet::refuge_1d();
        let v = ModelVariant::with_refuge(VariantKind::RefugeOnly, RefugeProfile::One).unwrap();
        for vv in [0.0, 1.0, 2000.0] {
            let k = Kinetics::new(v.kind, &p);
            assert_eq!(k.r_squared_coefficient(1.0, vv), p.c - p.w3 / p.sat3);
            assert!(k.r_squared_coefficient(1.0, vv) < 0.0);
        }
    }

    #[test]
    fn negative_state_rejected() {
        let p = ParameterSet::refuge_1d();
        let err = reaction(&ModelVariant::classical(), &p, (1.0, -1.0, 1.0), (0.0, 0.0));
        assert!(matches!(err, Err(Error::NegativeState { component: "v", .. })));
    }

    #[test]
    fn parameter_validation() {
        let mut p = ParameterSet::refuge_1d();
        assert!(p.validate().is_ok());
        p.sat2 = 0.0;
        assert!(p.validate().is_err());
        let mut p = ParameterSet::refuge_1d();
        p.c = f64::NAN;
        assert!(p.validate().is_err());
        let mut p = ParameterSet::refuge_1d();
        p.d3 = -1.0;
        assert!(p.validate().is_err());
    }

    fn params_strategy() -> impl Strategy<Value = ParameterSet> {
        (
            prop::array::uniform10(0.0f64..3.0),
            prop::array::uniform5(0.5f64..30.0),
        )
            .prop_map(|(r, s)| ParameterSet {
                a1: r[0],
                a2: r[1],
                b2: r[2],
                c: r[3] * 0.05,
                w0: r[4],
                w1: r[5],
                w2: r[6],
                w3: r[7],
                w4: r[8],
                w5: r[9],
                sat0: s[0],
                sat1: s[1],
                sat2: s[2],
                sat3: s[3],
                sat4: s[4],
                d1: 0.1,
                d2: 0.1,
                d3: 0.1,
                d4: 0.0,
            })
    }

    proptest! {
        #[test]
        fn quasi_positivity(p in params_strategy(), b1 in 0.0f64..=1.0,
                            u in 0.0f64..1e3, v in 0.0f64..1e3, r in 0.0f64..1e3) {
            for kind in all_kinds() {
                let k = Kinetics::new(kind, &p);
                prop_assert!(k.rates(b1, 0.0, v, r).f >= 0.0);
                prop_assert!(k.rates(b1, u, 0.0, r).g >= 0.0);
                prop_assert_eq!(k.rates(b1, u, v, 0.0).h, 0.0);
            }
        }

        #[test]
        fn refuge_free_variant_matches_classical(p in params_strategy(),
                u in 0.0f64..1e3, v in 0.0f64..1e3, r in 0.0f64..1e3) {
            let classical = Kinetics::new(VariantKind::Classical, &p).rates(0.0, u, v, r);
            let refuge = Kinetics::new(VariantKind::RefugeOnly, &p).rates(0.0, u, v, r);
            prop_assert_eq!(classical, refuge);
        }

        #[test]
        fn role_reversal_full_refuge_reduces_v_equation(p in params_strategy(),
                u in 0.0f64..1e3, v in 0.0f64..1e3, r in 0.0f64..1e3) {
            let g = Kinetics::new(VariantKind::RefugeRoleReversalOvercrowd, &p).rates(1.0, u, v, r).g;
            let expected = -p.a2 * v + p.w1 * u * v / (u + p.sat1);
            prop_assert!((g - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }

        #[test]
        fn sign_switch_inside_refuge(p in params_strategy(), v in 0.0f64..1e4) {
            prop_assume!(p.subcritical());
            let k = Kinetics::new(VariantKind::RefugeOnly, &p);
            prop_assert!(k.r_squared_coefficient(1.0, v) < 0.0);
        }

        #[test]
        fn jacobian_matches_central_differences(p in params_strategy(), b1 in 0.0f64..=1.0,
                u in 0.5f64..50.0, v in 0.5f64..50.0, r in 0.5f64..50.0) {
            for kind in all_kinds() {
                let k = Kinetics::new(kind, &p);
                let jac = k.jacobian(b1, u, v, r);
                let state = [u, v, r];
                for col in 0..3 {
                    let step = 1e-6 * state[col].max(1.0);
                    let mut plus = state;
                    let mut minus = state;
                    plus[col] += step;
                    minus[col] -= step;
                    let fp = k.rates(b1, plus[0], plus[1], plus[2]);
                    let fm = k.rates(b1, minus[0], minus[1], minus[2]);
                    let fd = [
                        (fp.f - fm.f) / (2.0 * step),
                        (fp.g - fm.g) / (2.0 * step),
                        (fp.h - fm.h) / (2.0 * step),
                    ];
                    for row in 0..3 {
                        let scale = 1.0 + jac[row][col].abs();
                        prop_assert!((jac[row][col] - fd[row]).abs() <= 1e-5 * scale,
                            "{:?} d[{}]/d[{}]: {} vs {}", kind, row, col, jac[row][col], fd[row]);
                    }
                }
            }
        }
    }
}
