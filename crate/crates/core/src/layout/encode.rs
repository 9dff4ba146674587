use serde::Serialize;

use crate::prune::{ColorMap, RadiusScale};

pub const COLOR_STEPS: usize = 6;
pub const R_MIN: f64 = 4.0;
pub const R_MAX: f64 = 25.0;

/// Blue to red.
pub const DIVERGING_PALETTE: [&str; COLOR_STEPS] = ["#2166ac", "#67a9cf", "#d1e5f0", "#fddbc7", "#ef8a62", "#b2182b"];
/// Light to dark purple.
pub const SINGLE_HUE_PALETTE: [&str; COLOR_STEPS] = ["#f2f0f7", "#dadaeb", "#bcbddc", "#9e9ac8", "#756bb1", "#54278f"];

/// Primary metric to a 6-step color bin, secondary metric to a radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EncodingScales {
    pub color_map: ColorMap,
    pub inverted: bool,
    /// Seven breakpoints bounding the six color bins.
    pub color_edges: Vec<f64>,
    pub palette: Vec<&'static str>,
    pub size_domain: [f64; 2],
    pub radius_range: [f64; 2],
    pub radius_scale: RadiusScale,
}

fn extent(values: impl IntoIterator<Item = f64>) -> [f64; 2] {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        [0.0, 0.0]
    } else {
        [lo, hi]
    }
}

fn split(lo: f64, hi: f64, parts: usize) -> impl Iterator<Item = f64> {
    (0..parts).map(move |i| lo + (hi - lo) * (i as f64 / parts as f64))
}

impl EncodingScales {
    /// Scales over the given (primary, secondary) value pairs.
    ///
    /// Color bins are equal-width over `[min, max]`. For a diverging map
    /// with a pivot strictly inside the domain, the lower three bins split
    /// `[min, pivot]` and the upper three split `[pivot, max]`.
    pub fn fit(
        primary: impl IntoIterator<Item = f64>,
        secondary: impl IntoIterator<Item = f64>,
        color_map: ColorMap,
        inverted: bool,
        pivot: Option<f64>,
        radius_scale: RadiusScale,
    ) -> EncodingScales {
        let [lo, hi] = extent(primary);
        let half = COLOR_STEPS / 2;
        let mut color_edges: Vec<f64> = match pivot {
            Some(p) if color_map == ColorMap::Diverging && lo < p && p < hi => {
                split(lo, p, half).chain(split(p, hi, half)).collect()
            }
            _ => split(lo, hi, COLOR_STEPS).collect(),
        };
        color_edges.push(hi);
        let palette = match color_map {
            ColorMap::Diverging => DIVERGING_PALETTE,
            ColorMap::SingleHue => SINGLE_HUE_PALETTE,
        };
        EncodingScales {
            color_map,
            inverted,
            color_edges,
            palette: palette.to_vec(),
            size_domain: extent(secondary),
            radius_range: [R_MIN, R_MAX],
            radius_scale,
        }
    }

    /// Bin index in `0..6`; a constant domain maps everything to 0.
    pub fn color_index(&self, v: f64) -> usize {
        let e = &self.color_edges;
        if e[0] == e[COLOR_STEPS] {
            return 0;
        }
        let bin = e[1..COLOR_STEPS].iter().filter(|&&edge| v >= edge).count();
        if self.inverted {
            COLOR_STEPS - 1 - bin
        } else {
            bin
        }
    }

    pub fn color(&self, v: f64) -> &'static str {
        self.palette[self.color_index(v)]
    }

    pub fn radius(&self, v: f64) -> f64 {
        let [lo, hi] = self.size_domain;
        if hi <= lo {
            return R_MIN;
        }
        let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        let t = match self.radius_scale {
            RadiusScale::Linear => t,
            RadiusScale::Sqrt => t.sqrt(),
        };
        R_MIN + (R_MAX - R_MIN) * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scales(values: &[f64], inverted: bool) -> EncodingScales {
        EncodingScales::fit(
            values.iter().copied(),
            values.iter().copied(),
            ColorMap::Diverging,
            inverted,
            None,
            RadiusScale::Linear,
        )
    }

    #[test]
    fn constant_domain_is_degenerate() {
        let s = scales(&[3.0, 3.0], false);
        assert_eq!(s.color_index(3.0), 0);
        assert_eq!(s.radius(3.0), R_MIN);
        assert_eq!(scales(&[3.0], true).color_index(3.0), 0);
    }

    #[test]
    fn extremes_map_to_extreme_bins() {
        let s = scales(&[0.0, 1.0, 6.0], false);
        assert_eq!(s.color_edges, [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(s.color_index(0.0), 0);
        assert_eq!(s.color_index(6.0), 5);
        assert_eq!(s.color_index(2.9), 2);
        assert_eq!(s.color_index(3.0), 3);
        assert_eq!(s.radius(0.0), R_MIN);
        assert_eq!(s.radius(6.0), R_MAX);
        assert_eq!(s.radius(3.0), 14.5);
        let inv = scales(&[0.0, 6.0], true);
        assert_eq!(inv.color_index(0.0), 5);
        assert_eq!(inv.color_index(6.0), 0);
        assert_eq!(inv.radius(6.0), R_MAX);
    }

    #[test]
    fn pivot_splits_diverging_map() {
        let s = EncodingScales::fit(
            [0.0, 4.0],
            [1.0],
            ColorMap::Diverging,
            false,
            Some(1.0),
            RadiusScale::Sqrt,
        );
        assert_eq!(s.color_edges[3], 1.0);
        assert_eq!(s.color_index(0.99), 2);
        assert_eq!(s.color_index(1.0), 3);
        let s = EncodingScales::fit(
            [0.0, 4.0],
            [0.0, 4.0],
            ColorMap::SingleHue,
            false,
            Some(1.0),
            RadiusScale::Sqrt,
        );
        assert_eq!(s.color_edges[3], 2.0);
        assert_eq!(s.radius(1.0), R_MIN + (R_MAX - R_MIN) * 0.5);
    }
}
