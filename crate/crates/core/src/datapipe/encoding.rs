use serde::{Deserialize, Serialize};

/// Weather categories in their canonical coding order.
pub const WEATHER_CATEGORIES: [&str; 20] = [
    "Sunny",
    "Fine with occasional clouds",
    "Cloudy",
    "Overcast",
    "Light snow",
    "Moderate snow",
    "Snow shower",
    "Sleet",
    "Light rain",
    "Drizzle",
    "Shower",
    "Strong shower",
    "Thunder shower",
    "Moderate rain",
    "Heavy rain",
    "Mist",
    "Haze",
    "Fog",
    "Floating dust",
    "Sand blowing",
];

/// Label encoder over a fixed vocabulary. Labels outside it map to the
/// reserved code `vocabulary_size()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryEncoder {
    vocabulary: Vec<String>,
}

impl CategoryEncoder {
    pub fn new(vocabulary: Vec<String>) -> Self {
        Self { vocabulary }
    }

    /// The canonical weather vocabulary.
    pub fn weather() -> Self {
        Self::new(WEATHER_CATEGORIES.iter().map(|s| s.to_string()).collect())
    }

    /// Canonical weather vocabulary extended by any other training labels,
    /// in order of first appearance.
    pub fn fit_weather<'a>(training_labels: impl IntoIterator<Item = &'a str>) -> Self {
        let mut enc = Self::weather();
        for label in training_labels {
            if !enc.vocabulary.iter().any(|v| v == label) {
                enc.vocabulary.push(label.to_string());
            }
        }
        enc
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary.len()
    }

    /// Number of distinct codes including the unknown code.
    pub fn cardinality(&self) -> usize {
        self.vocabulary.len() + 1
    }

    pub fn encode(&self, label: &str) -> usize {
        self.vocabulary
            .iter()
            .position(|v| v == label)
            .unwrap_or(self.vocabulary.len())
    }

    pub fn decode(&self, code: usize) -> Option<&str> {
        self.vocabulary.get(code).map(String::as_str)
    }

    /// One-hot vector of length `vocabulary_size()`; unknown labels are all zeros.
    pub fn one_hot(&self, label: &str) -> Vec<f64> {
        one_hot_code(self.encode(label), self.vocabulary.len())
    }
}

/// One-hot of `code` over `width` slots; an out-of-range code gives zeros.
pub fn one_hot_code(code: usize, width: usize) -> Vec<f64> {
    let mut v = vec![0.0; width];
    if code < width {
        v[code] = 1.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_codes() {
        let e = CategoryEncoder::weather();
        assert_eq!(e.encode("Sunny"), 0);
        assert_eq!(e.encode("Fine with occasional clouds"), 1);
        let oh = e.one_hot("Sunny");
        assert_eq!(oh.len(), 20);
        assert_eq!(oh[0], 1.0);
        assert_eq!(oh.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn unknown_label() {
        let e = CategoryEncoder::weather();
        assert_eq!(e.encode("Tornado"), 20);
        assert_eq!(e.one_hot("Tornado"), vec![0.0; 20]);
        assert_eq!(e.decode(20), None);
    }

    #[test]
    fn round_trip_and_extension() {
        let e = CategoryEncoder::fit_weather(["Haze", "Tornado", "Sunny", "Tornado"]);
        assert_eq!(e.vocabulary_size(), 21);
        assert_eq!(e.encode("Tornado"), 20);
        for label in e.vocabulary() {
            assert_eq!(e.decode(e.encode(label)), Some(label.as_str()));
        }
    }
}
