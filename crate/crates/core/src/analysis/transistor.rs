use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Straight-line fit of total resistance against drawn channel length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesResistance {
    /// Line value at the length offset (ohm).
    pub r_sd: f64,
    /// Resistance per unit length (ohm/m).
    pub slope: f64,
    /// Line value at zero drawn length (ohm).
    pub intercept: f64,
    /// Standard errors from the residual variance; zero with two points.
    pub r_sd_std_err: f64,
    pub slope_std_err: f64,
    pub n: usize,
}

/// Least-squares `R = a + b L`; `r_sd` is the line evaluated at
/// `length_offset`, where the effective channel length vanishes.
pub fn extract_series_resistance(points: &[(f64, f64)], length_offset: f64) -> Result<SeriesResistance, AnalysisError> {
    if points.iter().any(|(l, r)| !l.is_finite() || !r.is_finite()) || !length_offset.is_finite() {
        return Err(AnalysisError::InvalidInput("non-finite length or resistance".into()));
    }
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(AnalysisError::RankDeficient);
    }
    let ml = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mr = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sll: f64 = points.iter().map(|p| (p.0 - ml).powi(2)).sum();
    if !(sll > 1e-12 * ml * ml * n) {
        return Err(AnalysisError::RankDeficient);
    }
    let slr: f64 = points.iter().map(|p| (p.0 - ml) * (p.1 - mr)).sum();
    let slope = slr / sll;
    let intercept = mr - slope * ml;
    let (r_sd_std_err, slope_std_err) = if points.len() > 2 {
        let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let s2 = sse / (n - 2.0);
        let se_slope = (s2 / sll).sqrt();
        let se_at = (s2 * (1.0 / n + (length_offset - ml).powi(2) / sll)).sqrt();
        (se_at, se_slope)
    } else {
        (0.0, 0.0)
    };
    Ok(SeriesResistance {
        r_sd: intercept + slope * length_offset,
        slope,
        intercept,
        r_sd_std_err,
        slope_std_err,
        n: points.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityExtraction {
    /// Effective mobility from the low-gate-voltage slope (m^2/(V s)).
    pub mu_eff: f64,
    /// Slope of `Y = I_D / sqrt(g_m)` against `V_G` on the low segment.
    pub s1: f64,
    /// Slope of the second segment, when two are resolved.
    pub s2: Option<f64>,
    /// First gate voltage of the second segment.
    pub breakpoint_v_g: Option<f64>,
}

/// Y-function mobility: `mu_eff = S1^2 L / (W C_ox |V_DS|)`.
///
/// A single line is used unless splitting the sorted gate sweep into two
/// segments (three points minimum each) cuts the squared error by at least
/// a factor of four.
pub fn mobility_y_function(
    i_d: &[f64],
    g_m: &[f64],
    v_g: &[f64],
    w: f64,
    l: f64,
    c_ox: f64,
    v_ds: f64,
) -> Result<MobilityExtraction, AnalysisError> {
    if i_d.len() != g_m.len() || i_d.len() != v_g.len() {
        return Err(AnalysisError::InvalidInput(format!(
            "array lengths differ: {}, {}, {}",
            i_d.len(),
            g_m.len(),
            v_g.len()
        )));
    }
    if i_d.len() < 3 {
        return Err(AnalysisError::TooFewSamples { need: 3, got: i_d.len() });
    }
    if v_ds == 0.0 || !v_ds.is_finite() || !(w > 0.0 && l > 0.0 && c_ox > 0.0) {
        return Err(AnalysisError::InvalidInput("need v_ds != 0 and positive w, l, c_ox".into()));
    }
    if let Some((index, &value)) = g_m.iter().enumerate().find(|(_, g)| !(**g > 0.0)) {
        return Err(AnalysisError::NonPositiveTransconductance { index, value });
    }
    let mut pts: Vec<(f64, f64)> = v_g
        .iter()
        .zip(i_d.iter().zip(g_m))
        .map(|(&vg, (&id, &gm))| (vg, id / gm.sqrt()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (whole_slope, sse_one) = line(&pts);
    let sst: f64 = {
        let m = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        pts.iter().map(|p| (p.1 - m).powi(2)).sum()
    };
    let mut best: Option<(usize, f64, f64, f64)> = None;
    for b in 3..=pts.len().saturating_sub(3) {
        let (s_lo, e_lo) = line(&pts[..b]);
        let (s_hi, e_hi) = line(&pts[b..]);
        if best.is_none_or(|(_, _, _, e)| e_lo + e_hi < e) {
            best = Some((b, s_lo, s_hi, e_lo + e_hi));
        }
    }
    let split = best.filter(|&(_, _, _, e)| sse_one > 1e-12 * sst && e < 0.25 * sse_one);
    let (s1, s2, breakpoint_v_g) = match split {
        Some((b, s_lo, s_hi, _)) => (s_lo, Some(s_hi), Some(pts[b].0)),
        None => (whole_slope, None, None),
    };
    Ok(MobilityExtraction {
        mu_eff: s1 * s1 * l / (w * c_ox * v_ds.abs()),
        s1,
        s2,
        breakpoint_v_g,
    })
}

/// Least-squares slope and residual sum of squares.
fn line(p: &[(f64, f64)]) -> (f64, f64) {
    let n = p.len() as f64;
    let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
    let my = p.iter().map(|q| q.1).sum::<f64>() / n;
    let sxx: f64 = p.iter().map(|q| (q.0 - mx).powi(2)).sum();
    let sxy: f64 = p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse = p.iter().map(|q| (q.1 - my - slope * (q.0 - mx)).powi(2)).sum();
    (slope, sse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_line_intercept() {
        let pts: Vec<(f64, f64)> = [2e-6, 3e-6, 4e-6, 5e-6]
            .iter()
            .map(|&l| (l, 331e3 + 2e11 * (l - 0.4e-6)))
            .collect();
        let r = extract_series_resistance(&pts, 0.4e-6).unwrap();
        assert!((r.r_sd - 331e3).abs() < 1e-6);
        assert!((r.slope - 2e11).abs() < 1e-2);
    }

    #[test]
    fn two_points_interpolate() {
        let r = extract_series_resistance(&[(2e-6, 1e6), (4e-6, 1.5e6)], 0.0).unwrap();
        assert!((r.intercept - 0.5e6).abs() < 1e-6);
        assert_eq!(r.r_sd_std_err, 0.0);
        assert_eq!(extract_series_resistance(&[(2e-6, 1e6), (2e-6, 2e6)], 0.0), Err(AnalysisError::RankDeficient));
    }

    #[test]
    fn noisy_intercept_within_confidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 5e3).unwrap();
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|k| {
                let l = 2e-6 + (k % 4) as f64 * 1e-6;
                (l, 331e3 + 2e11 * l + noise.sample(&mut rng))
            })
            .collect();
        let r = extract_series_resistance(&pts, 0.0).unwrap();
        assert!((r.r_sd - 331e3).abs() < 3.0 * r.r_sd_std_err, "{} +- {}", r.r_sd, r.r_sd_std_err);
    }

    fn square_law(mu: f64, scale: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (w, l, c_ox, v_ds, v_t) = (5e-6, 10e-6, 1.7e-3, 0.05, 0.2);
        let k = w / l * c_ox * mu;
        let v_g: Vec<f64> = (0..30).map(|i| 0.3 + 0.05 * i as f64).collect();
        let i_d = v_g.iter().map(|vg| scale * k * (vg - v_t) * v_ds).collect();
        let g_m = v_g.iter().map(|_| scale * k * v_ds).collect();
        (i_d, g_m, v_g)
    }

    #[test]
    fn mobility_recovered() {
        let mu = 49.7e-4;
        let (i_d, g_m, v_g) = square_law(mu, 1.0);
        let m = mobility_y_function(&i_d, &g_m, &v_g, 5e-6, 10e-6, 1.7e-3, 0.05).unwrap();
        assert!((m.mu_eff / mu - 1.0).abs() < 0.01);
        assert!(m.s2.is_none());
        let (i_d, g_m, v_g) = square_law(mu, 4.0);
        let scaled = mobility_y_function(&i_d, &g_m, &v_g, 5e-6, 10e-6, 1.7e-3, 0.05).unwrap();
        assert!((scaled.mu_eff / m.mu_eff - 4.0).abs() < 1e-9);
        assert!((scaled.s1 / m.s1 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn two_slopes_detected() {
        let v_g: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let y: Vec<f64> = v_g.iter().map(|&v| if v < 1.0 { 2.0 * v } else { 2.0 + 0.5 * (v - 1.0) }).collect();
        let g_m = vec![1.0; 20];
        let m = mobility_y_function(&y, &g_m, &v_g, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((m.s1 - 2.0).abs() < 1e-9);
        assert!((m.s2.unwrap() - 0.5).abs() < 1e-9);
        assert!((m.breakpoint_v_g.unwrap() - 1.0).abs() < 0.11);
    }

    #[test]
    fn rejects_bad_transconductance() {
        assert!(matches!(
            mobility_y_function(&[1.0, 2.0, 3.0], &[1.0, 0.0, 1.0], &[0.0, 1.0, 2.0], 1.0, 1.0, 1.0, 1.0),
            Err(AnalysisError::NonPositiveTransconductance { index: 1, .. })
        ));
    }
}
