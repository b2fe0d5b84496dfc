//! Closed-form magnetic vector potentials and gauge transformations.

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Polygon};
use crate::{Error, Result};

/// Catalog of smooth gauge functions χ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    /// χ = xy
    Xy,
    /// χ = x²
    X2,
    /// χ = sin(x)·cos(y)
    SinXCosY,
}

impl Gauge {
    pub fn from_name(name: &str) -> Result<Gauge> {
        match name {
            "xy" => Ok(Gauge::Xy),
            "x2" | "x^2" | "x²" => Ok(Gauge::X2),
            "sinxcosy" | "sin(x)cos(y)" => Ok(Gauge::SinXCosY),
            other => Err(Error::Catalog(other.to_string())),
        }
    }

    pub fn value(self, x: f64, y: f64) -> f64 {
        match self {
            Gauge::Xy => x * y,
            Gauge::X2 => x * x,
            Gauge::SinXCosY => x.sin() * y.cos(),
        }
    }

    pub fn gradient(self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Gauge::Xy => (y, x),
            Gauge::X2 => (2.0 * x, 0.0),
            Gauge::SinXCosY => (x.cos() * y.cos(), -x.sin() * y.sin()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeTerm {
    pub chi: Gauge,
    pub amplitude: f64,
}

/// `A = (−B₀y/2, B₀x/2) + Σ amplitude·∇χ`. Every model is C^∞ and generates
/// the uniform field B₀.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PotentialModel {
    pub b0: f64,
    pub gauges: Vec<GaugeTerm>,
}

impl PotentialModel {
    pub fn uniform(b0: f64) -> Self {
        PotentialModel {
            b0,
            gauges: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        Self::uniform(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.b0 == 0.0 && self.gauges.iter().all(|g| g.amplitude == 0.0)
    }

    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        let mut ax = -0.5 * self.b0 * y;
        let mut ay = 0.5 * self.b0 * x;
        for g in &self.gauges {
            let (gx, gy) = g.chi.gradient(x, y);
            ax += g.amplitude * gx;
            ay += g.amplitude * gy;
        }
        (ax, ay)
    }

    pub fn eval_at(&self, p: Point) -> (f64, f64) {
        self.eval(p.x, p.y)
    }

    /// `A + amplitude·∇χ`; the curl is unchanged.
    pub fn gauge_shift(&self, chi: Gauge, amplitude: f64) -> PotentialModel {
        let mut out = self.clone();
        if amplitude != 0.0 {
            out.gauges.push(GaugeTerm { chi, amplitude });
        }
        out
    }

    /// Same as [`gauge_shift`](Self::gauge_shift) with the gauge looked up by name.
    pub fn gauge_shift_named(&self, chi: &str, amplitude: f64) -> Result<PotentialModel> {
        Ok(self.gauge_shift(Gauge::from_name(chi)?, amplitude))
    }

    /// Central-difference `∂A_y/∂x − ∂A_x/∂y`. The stencil must stay in Ω.
    pub fn numeric_curl(&self, x: f64, y: f64, step: f64, domain: &Polygon) -> Result<f64> {
        if !(step > 0.0) {
            return Err(Error::Domain(format!("curl step must be positive, got {step}")));
        }
        for (px, py) in [(x + step, y), (x - step, y), (x, y + step), (x, y - step)] {
            if !domain.contains(Point::new(px, py)) {
                return Err(Error::Domain(format!(
                    "curl stencil point ({px}, {py}) leaves the domain"
                )));
            }
        }
        let day_dx = (self.eval(x + step, y).1 - self.eval(x - step, y).1) / (2.0 * step);
        let dax_dy = (self.eval(x, y + step).0 - self.eval(x, y - step).0) / (2.0 * step);
        Ok(day_dx - dax_dy)
    }

    /// Largest `|A|` over the given sample points. A lower bound on the
    /// sup-norm that tightens as the samples densify.
    pub fn sup_norm<I: IntoIterator<Item = Point>>(&self, samples: I) -> f64 {
        samples.into_iter().fold(0.0_f64, |m, p| {
            let (ax, ay) = self.eval_at(p);
            m.max(ax.hypot(ay))
        })
    }
}

/// JSON form: `{"type": "uniform", "b0": 1.0, "gauge": {"chi": "xy", "amplitude": 1.0}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(rename = "type", default = "uniform_type")]
    pub kind: String,
    #[serde(default)]
    pub b0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeConfig {
    pub chi: String,
    pub amplitude: f64,
}

fn uniform_type() -> String {
    "uniform".into()
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            kind: uniform_type(),
            b0: 0.0,
            gauge: None,
        }
    }
}

impl FieldConfig {
    pub fn to_model(&self) -> Result<PotentialModel> {
        if self.kind != "uniform" {
            return Err(Error::config(
                "field.type",
                format!("unsupported field type `{}` (only `uniform`)", self.kind),
            ));
        }
        if !self.b0.is_finite() {
            return Err(Error::config("field.b0", "must be finite"));
        }
        let model = PotentialModel::uniform(self.b0);
        match &self.gauge {
            None => Ok(model),
            Some(g) => {
                let chi = Gauge::from_name(&g.chi)
                    .map_err(|e| Error::config("field.gauge.chi", e.to_string()))?;
                Ok(model.gauge_shift(chi, g.amplitude))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> Polygon {
        build_domain(&DomainSpec::unit_square()).unwrap()
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(PotentialModel::uniform(0.0).eval(0.3, -0.7), (0.0, 0.0));
        assert_eq!(PotentialModel::uniform(2.0).eval(1.0, 0.0), (0.0, 1.0));
        let m = PotentialModel::uniform(1.0).gauge_shift(Gauge::Xy, 1.0);
        assert_eq!(m.eval(1.0, 1.0), (0.5, 1.5));
    }

    #[test]
    fn shifts() {
        let base = PotentialModel::uniform(1.3);
        assert_eq!(base.gauge_shift(Gauge::SinXCosY, 0.0), base);
        let m = PotentialModel::zero().gauge_shift(Gauge::Xy, 1.0);
        assert_eq!(m.eval(0.2, 0.7), (0.7, 0.2));
        let m = base.gauge_shift(Gauge::X2, 2.0);
        let (a, b) = (base.eval(0.4, 0.1), m.eval(0.4, 0.1));
        assert!((b.0 - a.0 - 1.6).abs() < 1e-15);
        assert_eq!(b.1, a.1);
        assert!(matches!(base.gauge_shift_named("cosh", 1.0), Err(Error::Catalog(_))));
    }

    #[test]
    fn curl_of_uniform_field() {
        let dom = square();
        assert_eq!(PotentialModel::zero().numeric_curl(0.5, 0.5, 1e-3, &dom).unwrap(), 0.0);
        let b = PotentialModel::uniform(3.0).numeric_curl(0.4, 0.6, 1e-3, &dom).unwrap();
        assert!((b - 3.0).abs() < 1e-6);
        assert!(matches!(
            PotentialModel::uniform(3.0).numeric_curl(0.0005, 0.5, 1e-3, &dom),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gauge_shift_keeps_curl_at_random_points() {
        let dom = square();
        let base = PotentialModel::uniform(1.7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for chi in [Gauge::Xy, Gauge::X2, Gauge::SinXCosY] {
            let shifted = base.gauge_shift(chi, 0.9);
            for _ in 0..100 {
                let (x, y) = (rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
                let a = base.numeric_curl(x, y, 1e-3, &dom).unwrap();
                let b = shifted.numeric_curl(x, y, 1e-3, &dom).unwrap();
                assert!((a - b).abs() < 1e-6, "{chi:?} at ({x}, {y}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn sup_norm_monotone_in_density() {
        let m = PotentialModel::uniform(1.0).gauge_shift(Gauge::SinXCosY, 0.5);
        let grid = |n: usize| {
            (0..=n).flat_map(move |i| {
                (0..=n).map(move |j| Point::new(i as f64 / n as f64, j as f64 / n as f64))
            })
        };
        // nested lattices: 4 | 8 | 16 | 32
        let s: Vec<f64> = [4, 8, 16, 32].iter().map(|&n| m.sup_norm(grid(n))).collect();
        assert!(s.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn field_config_json() {
        let f: FieldConfig = serde_json::from_str(
            r#"{"type": "uniform", "b0": 1.0, "gauge": {"chi": "xy", "amplitude": 1.0}}"#,
        )
        .unwrap();
        let m = f.to_model().unwrap();
        assert_eq!(m.eval(1.0, 1.0), (0.5, 1.5));
        assert!(serde_json::from_str::<FieldConfig>(r#"{"b0": 1, "bogus": 2}"#).is_err());
    }
}
