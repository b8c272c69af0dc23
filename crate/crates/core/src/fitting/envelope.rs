use super::{FitData, FitResult};
use crate::model::Regime;

/// Decay rate of the oscillation maxima in the data compared to the fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    /// Refined `(time, background-subtracted counts)` of the maxima used.
    pub maxima: Vec<(f64, f64)>,
    /// Fitted decay rate of the maxima, 1/s.
    pub measured_rate: Option<f64>,
    /// `χΓ/2` for ρ₁ and the second-photon delay, `χΓ` for the first photon.
    pub predicted_rate: f64,
    pub ratio: Option<f64>,
    /// Fewer than three significant maxima were found.
    pub insufficient: bool,
}

/// Counts above background that a maximum must exceed, in Poisson standard deviations.
const SIGNIFICANCE: f64 = 3.0;

/// Finds the oscillation maxima of `data`, fits `A·e^{−rt}` to them and compares `r`
/// with the rate the fitted model predicts.
pub fn envelope_check(result: &FitResult, data: &FitData) -> EnvelopeReport {
    let predicted_rate = result.kind.envelope_rate_factor() * result.estimates.chi * result.gamma;
    let insufficient = |maxima| EnvelopeReport {
        maxima,
        measured_rate: None,
        predicted_rate,
        ratio: None,
        insufficient: true,
    };
    let Ok(d) = result.params().map(|p| p.derive()) else {
        return insufficient(Vec::new());
    };
    if d.regime != Regime::Underdamped {
        return insufficient(Vec::new());
    }
    let centers = data.centers();
    let counts = data.counts();
    let bg = result.estimates.background;
    let width = centers[1] - centers[0];
    let half_period = std::f64::consts::PI / d.omega;
    let reach = ((half_period / width).floor() as usize).max(1);

    let n = counts.len();
    let mut maxima = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let lo = i.saturating_sub(reach);
        let hi = (i + reach).min(n - 1);
        // ≥ to the left and > to the right, so plateaus yield no maxima
        let is_max = (lo..i).all(|j| counts[i] >= counts[j]) && (i + 1..=hi).all(|j| counts[i] > counts[j]);
        if !is_max || counts[i] - bg <= SIGNIFICANCE * counts[i].max(1.0).sqrt() {
            continue;
        }
        let (a, b, c) = (counts[i - 1], counts[i], counts[i + 1]);
        let curv = a - 2.0 * b + c;
        let (shift, peak) = if curv < 0.0 {
            let s = 0.5 * (a - c) / curv;
            (s, b - 0.25 * (a - c) * s)
        } else {
            (0.0, b)
        };
        maxima.push((centers[i] + shift * (centers[i + 1] - centers[i]), peak - bg));
    }
    if maxima.len() < 3 {
        return insufficient(maxima);
    }
    // weighted log-linear fit, var(ln h) ≈ 1/h
    let (mut sw, mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, h) in &maxima {
        let w = h;
        let y = h.ln();
        sw += w;
        st += w * t;
        sy += w * y;
        stt += w * t * t;
        sty += w * t * y;
    }
    let slope = (sw * sty - st * sy) / (sw * stt - st * st);
    let measured = -slope;
    EnvelopeReport {
        maxima,
        measured_rate: Some(measured),
        predicted_rate,
        ratio: Some(measured / predicted_rate),
        insufficient: false,
    }
}
