use crate::error::{Error, Result};

use super::frame::TimeSeriesFrame;

/// Converts meteorological wind (speed, direction the wind blows *from*, in
/// degrees clockwise from north) to the components of the air motion vector.
///
/// A southerly wind (from 180 degrees) moves air north, so it has a positive
/// `wind_y`.
pub fn wind_to_components(speed: f64, direction_deg: f64) -> Result<(f64, f64)> {
    if !speed.is_finite() || speed < 0.0 {
        return Err(Error::Parameter(format!("wind speed must be finite and >= 0, got {speed}")));
    }
    if !direction_deg.is_finite() {
        return Err(Error::Parameter(format!("wind direction must be finite, got {direction_deg}")));
    }
    if speed == 0.0 {
        return Ok((0.0, 0.0));
    }
    let theta = direction_deg.rem_euclid(360.0).to_radians();
    Ok((-speed * theta.sin(), -speed * theta.cos()))
}

/// Inverse of [`wind_to_components`]; calm air reports direction 0.
pub fn components_to_wind(wind_x: f64, wind_y: f64) -> (f64, f64) {
    let speed = wind_x.hypot(wind_y);
    if speed == 0.0 {
        return (0.0, 0.0);
    }
    let dir = (-wind_x).atan2(-wind_y).to_degrees().rem_euclid(360.0);
    (speed, dir)
}

/// Fills gaps in one series: linear between observed neighbours, flat beyond
/// the first and last observation.
pub fn fill_linear(values: &mut [f64], missing: &[bool]) -> Result<()> {
    let observed: Vec<usize> = (0..values.len()).filter(|&i| !missing[i]).collect();
    let (Some(&first), Some(&last)) = (observed.first(), observed.last()) else {
        return Err(Error::Data("column has no observed values".into()));
    };
    let (head, tail) = (values[first], values[last]);
    values[..first].fill(head);
    values[last + 1..].fill(tail);
    for pair in observed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 2 {
            continue;
        }
        let (ya, yb) = (values[a], values[b]);
        let span = (b - a) as f64;
        for i in a + 1..b {
            let w = (i - a) as f64 / span;
            values[i] = ya + w * (yb - ya);
        }
    }
    Ok(())
}

/// Fills every missing cell; afterwards the mask is all false.
///
/// Continuous columns use [`fill_linear`]. Weather labels carry the previous
/// observation forward, and leading gaps take the first observed label.
pub fn interpolate_missing(frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
    let mut out = frame.clone();
    for ((name, col), mask) in out.names.iter().zip(out.columns.iter_mut()).zip(out.missing.iter_mut()) {
        if mask.iter().any(|m| *m) {
            fill_linear(col, mask).map_err(|_| Error::Data(format!("column {name} is entirely missing")))?;
            mask.iter_mut().for_each(|m| *m = false);
        }
    }
    let Some(first) = out.weather.iter().flatten().next().cloned() else {
        return Err(Error::Data("weather column is entirely missing".into()));
    };
    let mut prev = first;
    for w in &mut out.weather {
        match w {
            Some(label) => prev = label.clone(),
            None => *w = Some(prev.clone()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fill(v: &[Option<f64>]) -> Vec<f64> {
        let mut values: Vec<f64> = v.iter().map(|x| x.unwrap_or(f64::NAN)).collect();
        let mask: Vec<bool> = v.iter().map(Option::is_none).collect();
        fill_linear(&mut values, &mask).unwrap();
        values
    }

    #[test]
    fn interior_and_edge_gaps() {
        assert_eq!(fill(&[Some(1.0), None, Some(3.0)]), vec![1.0, 2.0, 3.0]);
        assert_eq!(fill(&[None, Some(2.0), Some(4.0)]), vec![2.0, 2.0, 4.0]);
        assert_eq!(fill(&[Some(1.0), None, None, Some(4.0)]), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(fill(&[Some(5.0), None, None]), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn fully_missing_is_error() {
        let mut v = vec![f64::NAN; 3];
        assert!(fill_linear(&mut v, &[true; 3]).is_err());
    }

    #[test]
    fn wind_examples() {
        assert_eq!(wind_to_components(0.0, 123.0).unwrap(), (0.0, 0.0));
        let (x, y) = wind_to_components(10.0, 180.0).unwrap();
        assert_abs_diff_eq!(x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y, 10.0, epsilon = 1e-12);
        let (x, y) = wind_to_components(10.0, 90.0).unwrap();
        assert_abs_diff_eq!(x, -10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y, 0.0, epsilon = 1e-12);
        assert!(wind_to_components(-1.0, 0.0).is_err());
    }

    #[test]
    fn wind_round_trip() {
        for &(s, d) in &[(3.5, 0.0), (12.0, 45.0), (7.25, 200.0), (20.0, 359.0)] {
            let (x, y) = wind_to_components(s, d).unwrap();
            let (s2, d2) = components_to_wind(x, y);
            assert_abs_diff_eq!(s, s2, epsilon = 1e-12);
            assert_abs_diff_eq!(d, d2, epsilon = 1e-9);
        }
    }
}
