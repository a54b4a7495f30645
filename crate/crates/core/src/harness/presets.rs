//! Synthetic application traffic profiles.
//!
//! Each preset is a per-source injection rate and burst probability typical
//! of a class of workloads on a client processor; rates span 0.02 to 0.1
//! packets/cycle/source and burst probabilities 0.25 to 0.55.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppProfile {
    pub name: &'static str,
    pub rate: f64,
    pub burst_prob: f64,
}

const PRESETS: [AppProfile; 8] = [
    AppProfile { name: "office-productivity", rate: 0.02, burst_prob: 0.25 },
    AppProfile { name: "web-frontend", rate: 0.03, burst_prob: 0.35 },
    AppProfile { name: "compiler", rate: 0.045, burst_prob: 0.30 },
    AppProfile { name: "media-playback", rate: 0.05, burst_prob: 0.50 },
    AppProfile { name: "database", rate: 0.06, burst_prob: 0.40 },
    AppProfile { name: "compression", rate: 0.07, burst_prob: 0.45 },
    AppProfile { name: "video-encode", rate: 0.085, burst_prob: 0.55 },
    AppProfile { name: "scientific", rate: 0.10, burst_prob: 0.50 },
];

impl AppProfile {
    pub fn presets() -> &'static [AppProfile] {
        &PRESETS
    }

    pub fn by_name(name: &str) -> Option<AppProfile> {
        PRESETS.iter().copied().find(|p| p.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_stay_in_published_ranges() {
        assert_eq!(AppProfile::presets().len(), 8);
        for p in AppProfile::presets() {
            assert!((0.02..=0.1).contains(&p.rate), "{}", p.name);
            assert!((0.25..=0.55).contains(&p.burst_prob), "{}", p.name);
        }
    }

    #[test]
    fn names_are_unique() {
        let mut names: Vec<_> = AppProfile::presets().iter().map(|p| p.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 8);
    }
}
