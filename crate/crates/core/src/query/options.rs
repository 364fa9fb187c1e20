//! Background and style option sets.

/// Target backgrounds for background-change queries.
pub const BACKGROUNDS: [&str; 27] = [
    "beach",
    "pine forest",
    "urban city",
    "desert",
    "snow field",
    "country side farm",
    "tropical jungle",
    "vineyard",
    "lake side",
    "mountain top",
    "living room",
    "cave",
    "art gallery",
    "ancient ruins",
    "space station",
    "grass field",
    "train station",
    "library",
    "restaurant",
    "airport",
    "hospital",
    "gym",
    "zoo",
    "aquarium",
    "museum",
    "concert hall",
    "stadium",
];

/// Target styles for style-change queries.
pub const STYLES: [&str; 10] = [
    "watercolor painting",
    "Van Gogh art",
    "oil painting",
    "cartoon",
    "gray scale",
    "pencil sketch",
    "mosaic art",
    "pop art",
    "graffiti art",
    "ancient Egyptian art",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptionSets {
    pub backgrounds: Vec<String>,
    pub styles: Vec<String>,
}

impl Default for OptionSets {
    fn default() -> Self {
        OptionSets {
            backgrounds: BACKGROUNDS.iter().map(|s| s.to_string()).collect(),
            styles: STYLES.iter().map(|s| s.to_string()).collect(),
        }
    }
}
