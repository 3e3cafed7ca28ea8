//! Fuel consumption model of a diesel generator.
//!
//! Datasheet SFOC samples are fitted with a parabola in the loading fraction,
//! turned into the fuel mass-flow curve `FR(P) = SFOC(P / P_n) * P` (kg/h for
//! P in MW and SFOC in g/kWh) and cut into equal-width chords. The optimizer
//! fills the chords in order, which is only valid when their slopes are
//! non-decreasing; a non-convex curve is replaced by its lower convex hull
//! over the same breakpoints.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{DieselGenSpec, SfocPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("SFOC fit needs at least 3 samples, got {0}")]
    TooFewPoints(usize),
    #[error("SFOC fit is degenerate: samples need at least 3 distinct power fractions")]
    Degenerate,
    #[error("non-positive SFOC {sfoc:.3} g/kWh at loading {fraction:.3}")]
    NonPositiveSfoc { fraction: f64, sfoc: f64 },
    #[error("number of segments must be at least 1")]
    NoSegments,
}

/// `SFOC(p) = q2 p^2 + q1 p + q0`, p the loading fraction, result in g/kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSfoc {
    pub q2: f64,
    pub q1: f64,
    pub q0: f64,
}

impl QuadraticSfoc {
    pub fn eval(&self, fraction: f64) -> f64 {
        (self.q2 * fraction + self.q1) * fraction + self.q0
    }

    /// Fuel mass flow in kg/h at `power` MW for a unit rated `rated` MW.
    pub fn fuel_rate(&self, power: f64, rated: f64) -> f64 {
        self.eval(power / rated) * power
    }

    /// Smallest SFOC over `[lo, hi]` together with its location.
    fn min_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut best = (self.eval(lo), lo);
        let hi_val = self.eval(hi);
        if hi_val < best.0 {
            best = (hi_val, hi);
        }
        if self.q2 != 0.0 {
            let vertex = -self.q1 / (2.0 * self.q2);
            if vertex > lo && vertex < hi {
                let v = self.eval(vertex);
                if v < best.0 {
                    best = (v, vertex);
                }
            }
        }
        best
    }
}

/// Least-squares parabola through SFOC samples.
///
/// Solved with Householder QR on the Vandermonde system.
pub fn fit_sfoc(points: &[SfocPoint]) -> Result<QuadraticSfoc, CurveError> {
    if points.len() < 3 {
        return Err(CurveError::TooFewPoints(points.len()));
    }
    let rows = points.len();
    // column-major 3 x rows: [p^2, p, 1]
    let mut a: Vec<[f64; 3]> = points.iter().map(|pt| [pt.0 * pt.0, pt.0, 1.0]).collect();
    let mut b: Vec<f64> = points.iter().map(|pt| pt.1).collect();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);

    let mut r = [[0.0f64; 3]; 3];
    for k in 0..3 {
        let norm = (k..rows).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale {
            return Err(CurveError::Degenerate);
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in k..3 {
                let dot: f64 = (k..rows).map(|i| v[i - k] * a[i][col]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..rows {
                    a[i][col] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..rows).map(|i| v[i - k] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                b[i] -= f * v[i - k];
            }
        }
        for col in k..3 {
            r[k][col] = a[k][col];
        }
        if r[k][k].abs() <= 1e-10 * scale {
            return Err(CurveError::Degenerate);
        }
    }
    let mut x = [0.0f64; 3];
    for k in (0..3).rev() {
        let mut s = b[k];
        for col in k + 1..3 {
            s -= r[k][col] * x[col];
        }
        x[k] = s / r[k][k];
    }
    Ok(QuadraticSfoc {
        q2: x[0],
        q1: x[1],
        q0: x[2],
    })
}

/// Convex piecewise-linear fuel-rate curve of one generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFuelCurve {
    /// kg/h per MW, one per segment, non-decreasing.
    pub segment_slopes: Vec<f64>,
    /// kg/h charged whenever the unit is on.
    pub intercept: f64,
    /// MW.
    pub segment_width: f64,
    /// MW.
    pub rated_power: f64,
    /// Set when the raw chords were not convex and the hull replaced them.
    #[serde(default)]
    pub convexified: bool,
}

impl PiecewiseFuelCurve {
    pub fn n_segments(&self) -> usize {
        self.segment_slopes.len()
    }

    /// Segment loadings for `power` MW, lowest segment filled first.
    pub fn fill(&self, power: f64) -> Vec<f64> {
        let mut rest = power.max(0.0);
        self.segment_slopes
            .iter()
            .map(|_| {
                let d = rest.min(self.segment_width);
                rest -= d;
                d
            })
            .collect()
    }

    /// Fuel rate in kg/h of an online unit at `power` MW, greedy fill.
    pub fn eval(&self, power: f64) -> f64 {
        self.intercept + self.variable_rate(&self.fill(power))
    }

    /// `sum_m a_m * delta_m` for the given segment loadings.
    pub fn variable_rate(&self, deltas: &[f64]) -> f64 {
        self.segment_slopes
            .iter()
            .zip(deltas)
            .map(|(a, d)| a * d)
            .sum()
    }

    /// Breakpoint powers `0, w, 2w, ..., P_n`.
    pub fn breakpoints(&self) -> Vec<f64> {
        (0..=self.n_segments())
            .map(|k| self.segment_start(k))
            .collect()
    }

    fn segment_start(&self, k: usize) -> f64 {
        if k == self.n_segments() {
            self.rated_power
        } else {
            k as f64 * self.segment_width
        }
    }
}

/// Cuts the fuel-rate curve of `dg` into `n_segments` equal chords.
pub fn linearize(
    quad: &QuadraticSfoc,
    dg: &DieselGenSpec,
    n_segments: usize,
) -> Result<PiecewiseFuelCurve, CurveError> {
    if n_segments == 0 {
        return Err(CurveError::NoSegments);
    }
    let (min_sfoc, at) = quad.min_on(0.0, 1.0);
    if !(min_sfoc > 0.0) {
        return Err(CurveError::NonPositiveSfoc {
            fraction: at,
            sfoc: min_sfoc,
        });
    }
    let rated = dg.rated_power;
    let width = rated / n_segments as f64;
    let xs: Vec<f64> = (0..=n_segments)
        .map(|k| if k == n_segments { rated } else { k as f64 * width })
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&p| quad.fuel_rate(p, rated)).collect();
    let raw: Vec<f64> = (0..n_segments)
        .map(|m| (ys[m + 1] - ys[m]) / (xs[m + 1] - xs[m]))
        .collect();
    let convex = raw
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
    let mut slopes = if convex { raw } else { hull_slopes(&xs, &ys) };
    // rounding noise must not break the fill order
    for m in 1..slopes.len() {
        slopes[m] = slopes[m].max(slopes[m - 1]);
    }
    if !convex {
        log::warn!(
            "fuel-rate chords of {} are not convex; using their lower convex hull",
            dg.id
        );
    }
    // first chord extrapolated back to zero power
    let intercept = ys[0] - slopes[0] * xs[0];
    Ok(PiecewiseFuelCurve {
        segment_slopes: slopes,
        intercept,
        segment_width: width,
        rated_power: rated,
        convexified: !convex,
    })
}

/// Per-interval slopes of the lower convex hull of `(xs, ys)`.
fn hull_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for k in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b when it lies on or above the chord a -> k
            let cross = (xs[b] - xs[a]) * (ys[k] - ys[a]) - (ys[b] - ys[a]) * (xs[k] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let mut slopes = Vec::with_capacity(xs.len() - 1);
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let s = (ys[b] - ys[a]) / (xs[b] - xs[a]);
        slopes.extend(std::iter::repeat_n(s, b - a));
    }
    slopes
}

/// Fits and linearizes every generator of a scenario, in order.
pub fn build_curves(
    dgs: &[DieselGenSpec],
    n_segments: usize,
) -> Result<Vec<PiecewiseFuelCurve>, CurveError> {
    dgs.iter()
        .map(|dg| {
            let quad = fit_sfoc(&dg.sfoc_points)?;
            linearize(&quad, dg, n_segments)
        })
        .collect()
}

/// CSV dump of the segments of every curve.
pub fn curves_csv(ids: &[String], curves: &[PiecewiseFuelCurve]) -> String {
    let mut out =
        String::from("dg_id,segment,p_start_mw,p_end_mw,slope_kg_per_h_per_mw,intercept_kg_per_h\n");
    for (id, c) in ids.iter().zip(curves) {
        for (m, slope) in c.segment_slopes.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                id,
                m + 1,
                c.segment_start(m),
                c.segment_start(m + 1),
                slope,
                c.intercept
            ));
        }
    }
    out
}
