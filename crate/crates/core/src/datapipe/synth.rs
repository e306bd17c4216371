//! Seeded synthetic hourly data in the ingest schema.
//!
//! The generator starts at 2015-01-02 00:00 and simulates, hour by hour:
//!
//! * a weather label from a sticky Markov chain whose switching distribution
//!   depends on the season (snow in winter, rain in summer, dust in spring);
//! * temperature, pressure and humidity as seasonal and daily cycles plus
//!   AR(1) noise, with humidity raised by wet weather;
//! * wind as a log-AR(1) speed with a southerly drift, interrupted by
//!   northerly cold-air episodes of strong wind;
//! * log PM2.5 as the sum of seasonal, daily and weekly sinusoids, a smoothed
//!   weather offset and an AR(1) state. Strong northerly wind and rain wash
//!   the state down, so their effect is proportional to the current level.
//!
//! The other pollutants are noisy transforms of PM2.5, the weather and the
//! hour. All values are clamped to the observed ranges of the real data.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::encoding::WEATHER_CATEGORIES;
use super::frame::{TimeSeriesFrame, CONTINUOUS_COLUMNS, PLAUSIBLE_RANGES};
use crate::error::{Error, Result};

pub const SYNTH_MIN_HOURS: usize = 48;

pub fn synth_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2015, 1, 2)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start date")
}

struct WeatherKind {
    /// Base switching weight.
    weight: f64,
    /// Multipliers applied by season: winter, summer, spring.
    winter: f64,
    summer: f64,
    spring: f64,
    /// Offset on log PM2.5 once the weather has persisted.
    pm_offset: f64,
    /// Mean precipitation in mm per hour (0 for dry weather).
    precip: f64,
    wet: bool,
}

const fn kind(weight: f64, winter: f64, summer: f64, spring: f64, pm_offset: f64, precip: f64, wet: bool) -> WeatherKind {
    WeatherKind {
        weight,
        winter,
        summer,
        spring,
        pm_offset,
        precip,
        wet,
    }
}

// One entry per canonical weather category, in the same order.
const KINDS: [WeatherKind; 20] = [
    kind(20.0, 1.0, 1.0, 1.0, -0.15, 0.0, false), // Sunny
    kind(12.0, 1.0, 1.0, 1.0, -0.05, 0.0, false), // Fine with occasional clouds
    kind(12.0, 1.0, 1.0, 1.0, 0.05, 0.0, false),  // Cloudy
    kind(8.0, 1.0, 1.0, 1.0, 0.15, 0.0, false),   // Overcast
    kind(3.0, 1.0, 0.0, 0.1, -0.2, 0.3, true),    // Light snow
    kind(1.2, 1.0, 0.0, 0.05, -0.35, 1.0, true),  // Moderate snow
    kind(0.6, 1.0, 0.0, 0.05, -0.3, 0.8, true),   // Snow shower
    kind(0.6, 1.0, 0.0, 0.3, -0.3, 0.6, true),    // Sleet
    kind(4.0, 0.05, 1.0, 0.6, -0.35, 0.6, true),  // Light rain
    kind(1.5, 0.05, 1.0, 0.6, -0.2, 0.2, true),   // Drizzle
    kind(2.0, 0.0, 1.0, 0.4, -0.5, 2.5, true),    // Shower
    kind(0.7, 0.0, 1.0, 0.2, -0.8, 8.0, true),    // Strong shower
    kind(1.5, 0.0, 1.0, 0.2, -0.6, 5.0, true),    // Thunder shower
    kind(1.2, 0.0, 1.0, 0.3, -0.6, 3.0, true),    // Moderate rain
    kind(0.6, 0.0, 1.0, 0.1, -0.9, 12.0, true),   // Heavy rain
    kind(3.0, 1.0, 1.0, 1.0, 0.3, 0.0, true),     // Mist
    kind(8.0, 2.5, 0.3, 1.0, 0.8, 0.0, false),    // Haze
    kind(2.0, 1.5, 0.5, 1.0, 0.5, 0.0, true),     // Fog
    kind(1.0, 0.3, 0.0, 3.0, 0.45, 0.0, false),   // Floating dust
    kind(0.4, 0.2, 0.0, 3.0, 0.6, 0.0, false),    // Sand blowing
];

/// Probability per hour that the weather keeps its current label.
const WEATHER_PERSISTENCE: f64 = 0.93;
const LOG_PM_MEAN: f64 = 3.6;
const PM_AR: f64 = 0.96;
const PM_NOISE: f64 = 0.05;
/// Amplitude of the daily cycle of log PM2.5.
const DAILY_AMPLITUDE: f64 = 0.15;
/// Log-PM2.5 gain per hour of fully stagnant air.
const STAGNATION_GAIN: f64 = 0.04;
/// Wind speed (km/h) at which stagnation build-up stops.
const STAGNATION_SPEED: f64 = 12.0;
/// Northerly wind above this speed (km/h) washes PM2.5 out.
const WASHOUT_SPEED: f64 = 12.0;
const WASHOUT_RATE: f64 = 0.05;
const RAIN_WASHOUT: f64 = 0.03;
const WEATHER_GAIN: f64 = 0.05;

/// Hourly drive of the log-PM2.5 state from one hour's conditions.
fn pm_drive(speed: f64, northerly: bool, kind: &WeatherKind, precipitation: f64) -> f64 {
    let mut d = WEATHER_GAIN * kind.pm_offset;
    if !northerly {
        d += STAGNATION_GAIN * (1.0 - speed / STAGNATION_SPEED).max(0.0);
    } else if speed > WASHOUT_SPEED {
        d -= WASHOUT_RATE * (speed - WASHOUT_SPEED) / 4.0;
    }
    d - RAIN_WASHOUT * precipitation.min(8.0)
}

fn seasons(t: &NaiveDateTime) -> (f64, f64, f64) {
    let phase = 2.0 * PI * (t.ordinal0() as f64 - 15.0) / 365.25;
    let winter = phase.cos().max(0.0);
    let summer = (-phase.cos()).max(0.0);
    let spring = (-phase.sin()).max(0.0) * winter.max(0.3).min(1.0);
    (winter, summer, spring)
}

fn draw_weather(rng: &mut ChaCha8Rng, t: &NaiveDateTime) -> usize {
    let (w, s, sp) = seasons(t);
    let weights: Vec<f64> = KINDS
        .iter()
        .map(|k| k.weight * (0.35 + k.winter * w + k.summer * s + k.spring * sp) * if k.winter == 0.0 && w > 0.6 { 0.0 } else { 1.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, wt) in weights.iter().enumerate() {
        if u < *wt {
            return i;
        }
        u -= wt;
    }
    0
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn clamp_to_range(name: &str, v: f64) -> f64 {
    let (_, lo, hi) = PLAUSIBLE_RANGES
        .iter()
        .find(|(n, _, _)| *n == name)
        .copied()
        .unwrap_or((name, f64::NEG_INFINITY, f64::INFINITY));
    v.clamp(lo, hi)
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (v * f).round() / f
}

/// Deterministic synthetic frame of `n_hours` rows.
pub fn synth_generate(n_hours: usize, seed: u64) -> Result<TimeSeriesFrame> {
    if n_hours < SYNTH_MIN_HOURS {
        return Err(Error::Parameter(format!(
            "synthetic data needs at least {SYNTH_MIN_HOURS} hours, got {n_hours}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = synth_start();
    let weekly = [0.08, -0.06, -0.04, 0.07, -0.05, 0.06, -0.06];

    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n_hours); CONTINUOUS_COLUMNS.len()];
    let mut timestamps = Vec::with_capacity(n_hours);
    let mut weather = Vec::with_capacity(n_hours);

    let mut state = 0.0_f64;
    let mut drive = 0.0_f64;
    let mut current = draw_weather(&mut rng, &start);
    let (mut temp_noise, mut pres_noise, mut hum_noise) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut log_speed = 8.0_f64.ln();
    let mut direction = 180.0_f64;
    let mut cold_front = 0usize;

    for i in 0..n_hours {
        let t = start + chrono::Duration::hours(i as i64);
        let (winter, summer, _) = seasons(&t);
        let hour = t.hour() as f64;
        let season = (2.0 * PI * (t.ordinal0() as f64 - 15.0) / 365.25).cos();
        let daily = (2.0 * PI * (hour - 14.0) / 24.0).cos();

        if rng.random::<f64>() > WEATHER_PERSISTENCE {
            current = draw_weather(&mut rng, &t);
        }
        let wk = &KINDS[current];

        // Wind: cold-air episodes bring strong northerlies.
        if cold_front == 0 && rng.random::<f64>() < 0.006 + 0.008 * winter {
            cold_front = 8 + (rng.random::<f64>() * 30.0) as usize;
        }
        let (speed, dir) = if cold_front > 0 {
            cold_front -= 1;
            direction = 340.0 + 25.0 * gauss(&mut rng);
            log_speed = 0.7 * log_speed + 0.3 * (24.0_f64).ln() + 0.12 * gauss(&mut rng);
            (log_speed.exp(), direction)
        } else {
            direction += 0.15 * (190.0 - direction) + 12.0 * gauss(&mut rng);
            log_speed = 0.9 * log_speed + 0.1 * (7.0_f64).ln() + 0.2 * gauss(&mut rng);
            (log_speed.exp(), direction)
        };
        let speed = round_to(speed.min(44.0), 1);
        let dir = round_to(dir.rem_euclid(360.0), 0) % 360.0;
        let (wind_x, wind_y) = super::clean::wind_to_components(speed, dir)?;
        let northerly = wind_y < 0.0 && -wind_y > 0.5 * speed;

        temp_noise = 0.95 * temp_noise + 0.6 * gauss(&mut rng);
        let temperature = 12.5 - 15.5 * season + 5.0 * daily + temp_noise - if northerly { 0.1 * speed } else { 0.0 } - if wk.wet { 1.5 } else { 0.0 };
        pres_noise = 0.98 * pres_noise + 0.4 * gauss(&mut rng);
        let pressure = 1016.5 + 10.0 * season + pres_noise + if northerly { 0.15 * speed } else { 0.0 };
        hum_noise = 0.9 * hum_noise + 3.0 * gauss(&mut rng);
        let humidity = 38.0 + 22.0 * summer - 12.0 * daily + if wk.wet { 30.0 } else { 0.0 } + hum_noise - if northerly { 0.8 * speed } else { 0.0 };
        let precipitation = if wk.precip > 0.0 && !matches!(current, 15 | 17) {
            Exp::new(1.0 / wk.precip).map(|e| e.sample(&mut rng)).unwrap_or(0.0)
        } else {
            0.0
        };

        // Log PM2.5 responds to the previous hour's conditions.
        state = (PM_AR * state + drive + PM_NOISE * gauss(&mut rng)).clamp(-2.5, 2.5);
        drive = pm_drive(speed, northerly, wk, precipitation);
        let cycles = 0.35 * season + DAILY_AMPLITUDE * (2.0 * PI * (hour - 23.0) / 24.0).cos() + 0.4 * DAILY_AMPLITUDE * (4.0 * PI * (hour - 12.0) / 24.0).cos() + weekly[t.weekday().num_days_from_sunday() as usize];
        let log_pm = LOG_PM_MEAN + cycles + state;
        let pm25 = log_pm.exp();

        let dust = matches!(current, 18 | 19);
        let pm10 = pm25 * (1.3 + if dust { 1.5 } else { 0.0 }) * (0.08 * gauss(&mut rng)).exp() + 5.0;
        let traffic = (-((hour - 8.0) / 2.0).powi(2)).exp() + (-((hour - 18.5) / 2.5).powi(2)).exp();
        let no2 = (12.0 + 2.2 * pm25.sqrt() + 15.0 * traffic) * (0.1 * gauss(&mut rng)).exp();
        let so2 = (2.0 + 14.0 * winter + 0.04 * pm25) * (0.2 * gauss(&mut rng)).exp();
        let daylight = (PI * (hour - 6.0) / 14.0).sin().max(0.0);
        let o3 = (25.0 + 110.0 * (0.3 + summer) * daylight - 0.3 * no2).max(1.0) * (0.1 * gauss(&mut rng)).exp();
        let co = (0.25 + 0.011 * pm25 * (1.0 + 0.3 * winter)) * (0.08 * gauss(&mut rng)).exp();

        let raw = [
            round_to(pm25, 1),
            round_to(pm10, 1),
            round_to(no2, 1),
            round_to(so2, 1),
            round_to(o3, 1),
            round_to(co, 3),
            wind_x,
            wind_y,
            round_to(temperature, 1),
            round_to(precipitation, 1),
            round_to(pressure, 1),
            round_to(humidity, 1),
        ];
        for ((col, name), v) in columns.iter_mut().zip(CONTINUOUS_COLUMNS).zip(raw) {
            col.push(clamp_to_range(name, v));
        }
        timestamps.push(t);
        weather.push(Some(WEATHER_CATEGORIES[current].to_string()));
    }

    TimeSeriesFrame::new(
        timestamps,
        CONTINUOUS_COLUMNS.iter().map(|s| s.to_string()).collect(),
        columns,
        weather,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::frame::calendar_codes;

    #[test]
    fn deterministic() {
        assert_eq!(synth_generate(300, 5).unwrap(), synth_generate(300, 5).unwrap());
        assert_ne!(synth_generate(300, 5).unwrap(), synth_generate(300, 6).unwrap());
    }

    #[test]
    fn within_ranges() {
        let f = synth_generate(5000, 1).unwrap();
        for (name, lo, hi) in PLAUSIBLE_RANGES {
            for v in f.column(name).unwrap() {
                assert!(*v >= lo && *v <= hi, "{name} = {v}");
            }
        }
        assert_eq!(f.missing_count(), 0);
    }

    #[test]
    fn hours_cycle() {
        let f = synth_generate(72, 1).unwrap();
        let hours: Vec<usize> = f.timestamps.iter().map(|t| calendar_codes(t)[2]).collect();
        assert_eq!(hours[..24], (0..24).collect::<Vec<_>>()[..]);
        assert_eq!(hours[24], 0);
    }

    #[test]
    fn too_short() {
        assert!(synth_generate(47, 1).is_err());
    }
}
