use serde::{Deserialize, Serialize};

/// Closed interval on the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "extended")]
    pub lo: f64,
    #[serde(with = "extended")]
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, z: f64) -> bool {
        self.lo <= z && z <= self.hi
    }

    pub fn distance(&self, z: f64) -> f64 {
        if z < self.lo {
            self.lo - z
        } else if z > self.hi {
            z - self.hi
        } else {
            0.0
        }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Ordered union of disjoint closed intervals; the support of a truncated
/// Gaussian. Intervals closer than the merge tolerance are fused.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TruncationSet {
    intervals: Vec<Interval>,
}

impl TruncationSet {
    pub fn new(intervals: impl IntoIterator<Item = Interval>, merge_tol: f64) -> Self {
        let mut items: Vec<Interval> = intervals
            .into_iter()
            .filter(|iv| !iv.lo.is_nan() && !iv.hi.is_nan() && iv.lo <= iv.hi)
            .collect();
        items.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(items.len());
        for iv in items {
            match merged.last_mut() {
                Some(last) if iv.lo - last.hi <= merge_tol => {
                    last.hi = last.hi.max(iv.hi);
                }
                _ => merged.push(iv),
            }
        }
        Self { intervals: merged }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn real_line() -> Self {
        Self {
            intervals: vec![Interval::new(f64::NEG_INFINITY, f64::INFINITY)],
        }
    }

    pub fn single(lo: f64, hi: f64) -> Self {
        Self::new([Interval::new(lo, hi)], 0.0)
    }

    /// [−∞, a] ∪ [b, ∞].
    pub fn two_rays(a: f64, b: f64) -> Self {
        Self::new(
            [
                Interval::new(f64::NEG_INFINITY, a),
                Interval::new(b, f64::INFINITY),
            ],
            0.0,
        )
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn inf(&self) -> f64 {
        self.intervals.first().map_or(f64::NAN, |iv| iv.lo)
    }

    pub fn sup(&self) -> f64 {
        self.intervals.last().map_or(f64::NAN, |iv| iv.hi)
    }

    pub fn contains(&self, z: f64, tol: f64) -> bool {
        self.distance(z) <= tol
    }

    /// Distance from `z` to the set (0 inside, +∞ when empty).
    pub fn distance(&self, z: f64) -> f64 {
        self.intervals
            .iter()
            .map(|iv| iv.distance(z))
            .fold(f64::INFINITY, f64::min)
    }

    /// Closest point of the set to `z`.
    pub fn nearest(&self, z: f64) -> Option<f64> {
        self.intervals
            .iter()
            .min_by(|a, b| a.distance(z).total_cmp(&b.distance(z)))
            .map(|iv| z.clamp(iv.lo, iv.hi))
    }

    pub fn union(&self, other: &Self, merge_tol: f64) -> Self {
        Self::new(
            self.intervals.iter().chain(other.intervals.iter()).copied(),
            merge_tol,
        )
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut k) = (0, 0);
        while i < self.intervals.len() && k < other.intervals.len() {
            let a = self.intervals[i];
            let b = other.intervals[k];
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if lo <= hi {
                out.push(Interval::new(lo, hi));
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                k += 1;
            }
        }
        Self { intervals: out }
    }

    /// Whether every interval of `self` lies inside `other`, up to `tol`.
    pub fn is_subset_of(&self, other: &Self, tol: f64) -> bool {
        self.intervals.iter().all(|iv| {
            other
                .intervals
                .iter()
                .any(|o| o.lo - tol <= iv.lo && iv.hi <= o.hi + tol)
        })
    }

    /// Largest endpoint discrepancy against another set with the same
    /// number of intervals; `None` when the structures differ.
    pub fn endpoint_distance(&self, other: &Self) -> Option<f64> {
        if self.len() != other.len() {
            return None;
        }
        let diff = |a: f64, b: f64| {
            if a == b {
                0.0
            } else {
                (a - b).abs()
            }
        };
        Some(
            self.intervals
                .iter()
                .zip(&other.intervals)
                .map(|(a, b)| diff(a.lo, b.lo).max(diff(a.hi, b.hi)))
                .fold(0.0, f64::max),
        )
    }
}

/// JSON has no infinities; encode them as the strings "inf" / "-inf".
pub(crate) mod extended {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad number {other:?}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_close_and_overlapping_pieces() {
        let s = TruncationSet::new(
            [
                Interval::new(3.0, 4.0),
                Interval::new(0.0, 1.0),
                Interval::new(1.0 + 1e-12, 2.0),
                Interval::new(3.5, 5.0),
            ],
            1e-10,
        );
        assert_eq!(s.intervals(), &[Interval::new(0.0, 2.0), Interval::new(3.0, 5.0)]);
    }

    #[test]
    fn intersection_of_rays_and_box() {
        let rays = TruncationSet::two_rays(-1.0, 1.0);
        let boxed = TruncationSet::single(-3.0, 2.0);
        let both = rays.intersect(&boxed);
        assert_eq!(both.intervals(), &[Interval::new(-3.0, -1.0), Interval::new(1.0, 2.0)]);
        assert!(both.is_subset_of(&rays, 0.0));
        assert!(!rays.is_subset_of(&both, 0.0));
    }

    #[test]
    fn distance_and_nearest() {
        let s = TruncationSet::two_rays(-1.0, 1.0);
        assert_eq!(s.distance(0.25), 0.75);
        assert_eq!(s.nearest(0.25), Some(1.0));
        assert!(s.contains(-5.0, 0.0));
        assert!(TruncationSet::empty().distance(0.0).is_infinite());
    }

    #[test]
    fn serde_keeps_infinities() {
        let s = TruncationSet::two_rays(-1.5, 2.0);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"-inf\""));
        let back: TruncationSet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
