//! Censored observations, their position relative to the multivariate
//! threshold, the Fréchet censoring transform, dataset summaries, and
//! multivariate run-declustering.
//!
//! Censoring kinds follow the κ convention: 0 missing, 1 exact,
//! 2 right-censored, 3 left-censored/interval. Right-censoring carries a
//! lower bound (the value exceeds it); interval data carry both bounds, with
//! lower = 0 for pure left-censoring.

use crate::error::{Error, Result};
use crate::margins::{frechet_transform, MarginParams};
use serde::{Deserialize, Serialize};

/// One station's record for one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MarginalObs {
    /// κ = 0
    Missing,
    /// κ = 1
    Exact(f64),
    /// κ = 2: the value exceeds `lower`
    RightCensored { lower: f64 },
    /// κ = 3: the value lies in [lower, upper]; lower = 0 for left-censoring
    Interval { lower: f64, upper: f64 },
}

impl MarginalObs {
    pub fn kind_code(&self) -> u8 {
        match self {
            MarginalObs::Missing => 0,
            MarginalObs::Exact(_) => 1,
            MarginalObs::RightCensored { .. } => 2,
            MarginalObs::Interval { .. } => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MarginalObs::Missing => Ok(()),
            MarginalObs::Exact(y) => {
                if y.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain("exact value must be finite"))
                }
            }
            MarginalObs::RightCensored { lower } => {
                if lower.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain("right-censoring bound must be finite"))
                }
            }
            MarginalObs::Interval { lower, upper } => {
                if !lower.is_finite() || !upper.is_finite() {
                    Err(Error::domain("interval bounds must be finite"))
                } else if lower > upper {
                    Err(Error::domain(format!("interval bounds out of order: [{lower}, {upper}]")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// A multivariate daily record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub day: i64,
    pub stations: Vec<MarginalObs>,
}

impl Observation {
    pub fn new(day: i64, stations: Vec<MarginalObs>) -> Result<Self> {
        if stations.is_empty() {
            return Err(Error::domain("observation needs at least one station"));
        }
        for s in &stations {
            s.validate()?;
        }
        Ok(Observation { day, stations })
    }

    pub fn dim(&self) -> usize {
        self.stations.len()
    }

    pub fn fully_missing(&self) -> bool {
        self.stations.iter().all(|s| matches!(s, MarginalObs::Missing))
    }
}

/// Position of a record relative to the multivariate threshold v.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Position {
    /// Some coordinate determinately exceeds its threshold.
    Above,
    /// Undetermined: some coordinate straddles its threshold or is missing,
    /// none determinately exceeds.
    Overlapping,
    /// Every coordinate is determinately below.
    Below,
}

fn station_above(s: &MarginalObs, v: f64) -> bool {
    match s {
        MarginalObs::Exact(y) => *y > v,
        // the hidden value exceeds lower, so lower ≥ v puts it above
        MarginalObs::RightCensored { lower } => *lower >= v,
        MarginalObs::Interval { lower, .. } => *lower > v,
        MarginalObs::Missing => false,
    }
}

fn station_below(s: &MarginalObs, v: f64) -> bool {
    match s {
        MarginalObs::Exact(y) => *y <= v,
        MarginalObs::RightCensored { .. } => false,
        MarginalObs::Interval { upper, .. } => *upper <= v,
        MarginalObs::Missing => false,
    }
}

/// Classify a record against the threshold vector.
pub fn classify(o: &Observation, v: &[f64]) -> Position {
    debug_assert_eq!(o.dim(), v.len());
    let mut all_below = true;
    for (s, &vj) in o.stations.iter().zip(v) {
        if station_above(s, vj) {
            return Position::Above;
        }
        if !station_below(s, vj) {
            all_below = false;
        }
    }
    if all_below {
        Position::Below
    } else {
        Position::Overlapping
    }
}

/// One station of a Fréchet-transformed, inferentially censored record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FrechetMarginal {
    /// κ̃ = 0: marginalized out analytically (missing, or right-censored with
    /// a sub-threshold bound); bounds carry no information.
    Missing,
    /// κ̃ = 1: exactly observed above threshold, X = T(Y).
    Exact(f64),
    /// κ̃ = 2: right-censored above threshold, X ∈ [lower, ∞).
    RightCensored { lower: f64 },
    /// κ̃ = 3: X ∈ [lower, upper]; sub-threshold components are (0, u_j).
    Interval { lower: f64, upper: f64 },
}

impl FrechetMarginal {
    pub fn kind_code(&self) -> u8 {
        match self {
            FrechetMarginal::Missing => 0,
            FrechetMarginal::Exact(_) => 1,
            FrechetMarginal::RightCensored { .. } => 2,
            FrechetMarginal::Interval { .. } => 3,
        }
    }

    /// Censoring box [L̃, R̃]; exact values have L̃ = R̃ = X.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            FrechetMarginal::Missing => None,
            FrechetMarginal::Exact(x) => Some((*x, *x)),
            FrechetMarginal::RightCensored { lower } => Some((*lower, f64::INFINITY)),
            FrechetMarginal::Interval { lower, upper } => Some((*lower, *upper)),
        }
    }

    /// True for κ̃ ∈ {2, 3}: a latent coordinate to augment.
    pub fn is_censored(&self) -> bool {
        matches!(self, FrechetMarginal::RightCensored { .. } | FrechetMarginal::Interval { .. })
    }
}

/// A Fréchet-transformed, inferentially censored record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrechetObs {
    pub day: i64,
    pub stations: Vec<FrechetMarginal>,
}

impl FrechetObs {
    pub fn dim(&self) -> usize {
        self.stations.len()
    }

    /// Indices with κ̃ = 0 (to be marginalized analytically).
    pub fn missing_indices(&self) -> Vec<usize> {
        self.stations
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, FrechetMarginal::Missing))
            .map(|(j, _)| j)
            .collect()
    }
}

/// The three-case censoring map onto the Fréchet scale:
///
/// * exact below v → interval (0, u_j), value discarded;
/// * right-censored with a sub-threshold bound → missing (the event
///   "exceeds something below v" carries no extreme-value information);
/// * everything else keeps its kind with T applied to the value/bounds,
///   where sub-threshold lower bounds map to 0 and sub-threshold upper
///   bounds map to u_j.
pub fn censor_transform(o: &Observation, margins: &MarginParams) -> Result<FrechetObs> {
    if o.dim() != margins.dim() {
        return Err(Error::domain("observation/margins dimension mismatch"));
    }
    let mut stations = Vec::with_capacity(o.dim());
    for (j, s) in o.stations.iter().enumerate() {
        let v = margins.threshold(j);
        let u = margins.frechet_threshold(j);
        let t = |y: f64| frechet_transform(margins, j, y);
        let fm = match s {
            MarginalObs::Missing => FrechetMarginal::Missing,
            MarginalObs::Exact(y) => {
                if *y < v {
                    FrechetMarginal::Interval { lower: 0.0, upper: u }
                } else {
                    FrechetMarginal::Exact(t(*y)?)
                }
            }
            MarginalObs::RightCensored { lower } => {
                if *lower < v {
                    FrechetMarginal::Missing
                } else {
                    FrechetMarginal::RightCensored { lower: t(*lower)? }
                }
            }
            MarginalObs::Interval { lower, upper } => {
                let lt = if *lower < v { 0.0 } else { t(*lower)? };
                let rt = if *upper < v { u } else { t(*upper)? };
                FrechetMarginal::Interval { lower: lt, upper: rt }
            }
        };
        stations.push(fm);
    }
    Ok(FrechetObs { day: o.day, stations })
}

/// Upper-bound key of an overlapping record, one entry per station. Days
/// sharing a key have identical likelihood contributions, so consecutive runs
/// are pooled into blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BlockBound {
    /// Determinately below threshold: Fréchet upper bound u_j.
    Below,
    /// Straddles the threshold with this data-scale upper bound.
    Bounded(f64),
    /// Missing or right-censored below threshold: no constraint.
    Unbounded,
}

impl BlockBound {
    fn of(s: &MarginalObs, v: f64) -> BlockBound {
        match s {
            MarginalObs::Missing => BlockBound::Unbounded,
            MarginalObs::Exact(y) => {
                debug_assert!(*y <= v);
                BlockBound::Below
            }
            MarginalObs::RightCensored { lower } => {
                debug_assert!(*lower < v);
                BlockBound::Unbounded
            }
            MarginalObs::Interval { upper, .. } => {
                if *upper <= v {
                    BlockBound::Below
                } else {
                    BlockBound::Bounded(*upper)
                }
            }
        }
    }

    /// Fréchet-scale upper bound under the given margins.
    pub fn frechet_bound(&self, margins: &MarginParams, j: usize) -> Result<f64> {
        Ok(match self {
            BlockBound::Below => margins.frechet_threshold(j),
            BlockBound::Bounded(r) => frechet_transform(margins, j, *r)?,
            BlockBound::Unbounded => f64::INFINITY,
        })
    }
}

/// A maximal run of consecutive overlapping days sharing one bound vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapBlock {
    pub bounds: Vec<BlockBound>,
    pub count: usize,
}

/// Counts of the censoring taxonomy over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    /// Non-missing days.
    pub n_obs: usize,
    /// Days determinately above threshold.
    pub n_above: usize,
    /// Days overlapping the threshold.
    pub n_overlap: usize,
    /// Days determinately below threshold.
    pub n_below: usize,
    /// Fully-missing days (excluded from n_obs).
    pub n_missing_days: usize,
    /// Overlap blocks (bound vector, run length).
    pub blocks: Vec<OverlapBlock>,
}

impl DatasetSummary {
    /// n_det = n_v + n″: days whose position is determined.
    pub fn n_determined(&self) -> usize {
        self.n_above + self.n_below
    }
}

/// Classify every day, drop fully-missing days, and pool consecutive
/// overlapping days with identical bound vectors into blocks.
pub fn summarize(dataset: &[Observation], v: &[f64]) -> DatasetSummary {
    let mut s = DatasetSummary {
        n_obs: 0,
        n_above: 0,
        n_overlap: 0,
        n_below: 0,
        n_missing_days: 0,
        blocks: Vec::new(),
    };
    let mut current: Option<OverlapBlock> = None;
    for o in dataset {
        if o.fully_missing() {
            s.n_missing_days += 1;
            continue;
        }
        s.n_obs += 1;
        match classify(o, v) {
            Position::Above => {
                s.n_above += 1;
                if let Some(b) = current.take() {
                    s.blocks.push(b);
                }
            }
            Position::Below => {
                s.n_below += 1;
                if let Some(b) = current.take() {
                    s.blocks.push(b);
                }
            }
            Position::Overlapping => {
                s.n_overlap += 1;
                let key: Vec<BlockBound> = o
                    .stations
                    .iter()
                    .zip(v)
                    .map(|(st, &vj)| BlockBound::of(st, vj))
                    .collect();
                match current.as_mut() {
                    Some(b) if b.bounds == key => b.count += 1,
                    _ => {
                        if let Some(b) = current.take() {
                            s.blocks.push(b);
                        }
                        current = Some(OverlapBlock { bounds: key, count: 1 });
                    }
                }
            }
        }
    }
    if let Some(b) = current.take() {
        s.blocks.push(b);
    }
    s
}

/// A declustered event: componentwise maxima over a run of exceedance days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub start: i64,
    pub end: i64,
    pub maxima: Observation,
}

/// Componentwise maximum of two marginal records, with censoring kinds
/// merged conservatively: an exact value absorbs an interval only when it
/// dominates the interval's upper bound; otherwise the bounds union.
/// Missing contributes nothing.
fn merge_max(a: &MarginalObs, b: &MarginalObs) -> MarginalObs {
    use MarginalObs::*;
    match (a, b) {
        (Missing, x) | (x, Missing) => x.clone(),
        (Exact(x), Exact(y)) => Exact(x.max(*y)),
        (Exact(x), Interval { lower, upper }) | (Interval { lower, upper }, Exact(x)) => {
            if *x >= *upper {
                Exact(*x)
            } else {
                Interval { lower: lower.max(*x), upper: *upper }
            }
        }
        (Exact(x), RightCensored { lower }) | (RightCensored { lower }, Exact(x)) => {
            RightCensored { lower: lower.max(*x) }
        }
        (Interval { lower: l1, upper: u1 }, Interval { lower: l2, upper: u2 }) => {
            Interval { lower: l1.max(*l2), upper: u1.max(*u2) }
        }
        (RightCensored { lower: l1 }, RightCensored { lower: l2 }) => {
            RightCensored { lower: l1.max(*l2) }
        }
        (RightCensored { lower: l1 }, Interval { lower: l2, .. })
        | (Interval { lower: l2, .. }, RightCensored { lower: l1 }) => {
            RightCensored { lower: l1.max(*l2) }
        }
    }
}

/// Multivariate run-declustering. A cluster starts when some component
/// determinately exceeds its threshold and ends once `lag` consecutive days
/// are all determinately below; overlapping (undetermined) days never end a
/// cluster. Emits the componentwise maxima per cluster.
pub fn decluster(dataset: &[Observation], v: &[f64], lag: usize) -> Result<Vec<Cluster>> {
    if lag == 0 {
        return Err(Error::domain("declustering lag must be >= 1"));
    }
    let mut clusters = Vec::new();
    let mut active: Option<Cluster> = None;
    let mut below_run = 0usize;
    for o in dataset {
        let pos = classify(o, v);
        match active.as_mut() {
            None => {
                if pos == Position::Above {
                    active = Some(Cluster { start: o.day, end: o.day, maxima: o.clone() });
                    below_run = 0;
                }
            }
            Some(c) => {
                match pos {
                    Position::Below => {
                        below_run += 1;
                        if below_run >= lag {
                            clusters.push(active.take().unwrap());
                            below_run = 0;
                            continue;
                        }
                    }
                    Position::Above | Position::Overlapping => {
                        below_run = 0;
                        c.end = o.day;
                        for (slot, s) in c.maxima.stations.iter_mut().zip(&o.stations) {
                            *slot = merge_max(slot, s);
                        }
                    }
                }
            }
        }
    }
    if let Some(c) = active.take() {
        clusters.push(c);
    }
    Ok(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margins::ShapeMode;

    fn margins2() -> MarginParams {
        MarginParams::new(
            vec![1.0, 1.2],
            ShapeMode::Shared(0.3),
            vec![0.05, 0.04],
            vec![10.0, 12.0],
        )
        .unwrap()
    }

    fn exact(vals: &[f64]) -> Observation {
        Observation::new(0, vals.iter().map(|&y| MarginalObs::Exact(y)).collect()).unwrap()
    }

    #[test]
    fn classify_cases() {
        let v = [10.0, 12.0];
        // all exact below
        assert_eq!(classify(&exact(&[9.0, 11.0]), &v), Position::Below);
        // interval straddling station 1, other exact below
        let o = Observation::new(
            0,
            vec![
                MarginalObs::Interval { lower: 8.0, upper: 11.0 },
                MarginalObs::Exact(5.0),
            ],
        )
        .unwrap();
        assert_eq!(classify(&o, &v), Position::Overlapping);
        // exact above at station 2 dominates everything else
        let o = Observation::new(
            0,
            vec![MarginalObs::Missing, MarginalObs::Exact(13.0)],
        )
        .unwrap();
        assert_eq!(classify(&o, &v), Position::Above);
        // right-censored with bound at threshold is determinately above
        let o = Observation::new(
            0,
            vec![MarginalObs::RightCensored { lower: 10.0 }, MarginalObs::Exact(5.0)],
        )
        .unwrap();
        assert_eq!(classify(&o, &v), Position::Above);
        // missing + below is undetermined
        let o = Observation::new(
            0,
            vec![MarginalObs::Missing, MarginalObs::Exact(5.0)],
        )
        .unwrap();
        assert_eq!(classify(&o, &v), Position::Overlapping);
    }

    #[test]
    fn censor_transform_cases() {
        let m = margins2();
        let u0 = m.frechet_threshold(0);
        // exact above passes through with L̃ = R̃ = X
        let o = exact(&[15.0, 5.0]);
        let f = censor_transform(&o, &m).unwrap();
        match &f.stations[0] {
            FrechetMarginal::Exact(x) => {
                let want = frechet_transform(&m, 0, 15.0).unwrap();
                assert_eq!(*x, want);
                assert_eq!(f.stations[0].bounds().unwrap(), (want, want));
            }
            other => panic!("wanted exact, got {other:?}"),
        }
        // exact below becomes interval (0, u)
        assert_eq!(
            f.stations[1],
            FrechetMarginal::Interval { lower: 0.0, upper: m.frechet_threshold(1) }
        );
        // interval straddling: (3, NA, 0, T(R))
        let o = Observation::new(
            0,
            vec![
                MarginalObs::Interval { lower: 8.0, upper: 14.0 },
                MarginalObs::Exact(20.0),
            ],
        )
        .unwrap();
        let f = censor_transform(&o, &m).unwrap();
        assert_eq!(
            f.stations[0],
            FrechetMarginal::Interval {
                lower: 0.0,
                upper: frechet_transform(&m, 0, 14.0).unwrap()
            }
        );
        // right-censored below threshold becomes missing
        let o = Observation::new(
            0,
            vec![MarginalObs::RightCensored { lower: 4.0 }, MarginalObs::Exact(20.0)],
        )
        .unwrap();
        let f = censor_transform(&o, &m).unwrap();
        assert_eq!(f.stations[0], FrechetMarginal::Missing);
        // right-censored above threshold keeps its kind
        let o = Observation::new(
            0,
            vec![MarginalObs::RightCensored { lower: 11.0 }, MarginalObs::Exact(20.0)],
        )
        .unwrap();
        let f = censor_transform(&o, &m).unwrap();
        match &f.stations[0] {
            FrechetMarginal::RightCensored { lower } => {
                assert_eq!(*lower, frechet_transform(&m, 0, 11.0).unwrap());
                assert!(*lower >= u0);
            }
            other => panic!("{other:?}"),
        }
        // interval fully below threshold censors to (0, u)
        let o = Observation::new(
            0,
            vec![MarginalObs::Interval { lower: 2.0, upper: 7.0 }, MarginalObs::Exact(20.0)],
        )
        .unwrap();
        let f = censor_transform(&o, &m).unwrap();
        assert_eq!(f.stations[0], FrechetMarginal::Interval { lower: 0.0, upper: u0 });
    }

    #[test]
    fn censor_transform_below_part_is_parameter_free() {
        let m = margins2();
        let m2 = m.with_parameters(vec![0.3, 2.4], ShapeMode::Shared(-0.1)).unwrap();
        let o = exact(&[3.0, 2.0]);
        assert_eq!(censor_transform(&o, &m).unwrap(), censor_transform(&o, &m2).unwrap());
    }

    #[test]
    fn summarize_hand_enumerated_fixture() {
        // 10 days, d=2: 2 above, 3 overlapping in one block, 5 below
        let v = [10.0, 12.0];
        let mut ds = Vec::new();
        ds.push(exact(&[11.0, 5.0])); // above
        for _ in 0..3 {
            ds.push(
                Observation::new(
                    0,
                    vec![
                        MarginalObs::Interval { lower: 0.0, upper: 11.0 },
                        MarginalObs::Exact(3.0),
                    ],
                )
                .unwrap(),
            ); // overlapping, identical bound vector
        }
        for _ in 0..5 {
            ds.push(exact(&[1.0, 1.0])); // below
        }
        ds.push(exact(&[9.0, 14.0])); // above
        let s = summarize(&ds, &v);
        assert_eq!(s.n_obs, 10);
        assert_eq!(s.n_above, 2);
        assert_eq!(s.n_overlap, 3);
        assert_eq!(s.n_below, 5);
        assert_eq!(s.n_determined(), 7);
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.blocks[0].count, 3);
        assert_eq!(
            s.blocks[0].bounds,
            vec![BlockBound::Bounded(11.0), BlockBound::Below]
        );
    }

    #[test]
    fn summarize_empty_and_partition() {
        let s = summarize(&[], &[10.0]);
        assert_eq!(s.n_obs, 0);
        assert_eq!(s.n_above + s.n_overlap + s.n_below, 0);
        assert!(s.blocks.is_empty());
    }

    #[test]
    fn summarize_splits_blocks_on_bound_change() {
        let v = [10.0];
        let ov = |upper: f64| {
            Observation::new(0, vec![MarginalObs::Interval { lower: 0.0, upper }]).unwrap()
        };
        let ds = vec![ov(11.0), ov(11.0), ov(12.0), ov(11.0)];
        let s = summarize(&ds, &v);
        assert_eq!(s.n_overlap, 4);
        assert_eq!(s.blocks.len(), 3);
        let counts: Vec<usize> = s.blocks.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![2, 1, 1]);
        // total block mass equals the overlap count
        assert_eq!(s.blocks.iter().map(|b| b.count).sum::<usize>(), s.n_overlap);
    }

    #[test]
    fn decluster_run_rule() {
        let v = [10.0];
        let above = |d: i64| Observation::new(d, vec![MarginalObs::Exact(12.0)]).unwrap();
        let below = |d: i64| Observation::new(d, vec![MarginalObs::Exact(1.0)]).unwrap();

        // no above day: empty
        let ds: Vec<Observation> = (0..5).map(below).collect();
        assert!(decluster(&ds, &v, 3).unwrap().is_empty());

        // isolated above day: one single-day cluster
        let mut ds: Vec<Observation> = (0..4).map(below).collect();
        ds.push(above(4));
        ds.extend((5..9).map(below));
        let cs = decluster(&ds, &v, 3).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!((cs[0].start, cs[0].end), (4, 4));

        // two above days separated by exactly 3 below days: two clusters
        let mut ds = vec![above(0)];
        ds.extend((1..4).map(below));
        ds.push(above(4));
        ds.extend((5..9).map(below));
        let cs = decluster(&ds, &v, 3).unwrap();
        assert_eq!(cs.len(), 2);

        // separated by only 2 below days: one cluster
        let mut ds = vec![above(0)];
        ds.extend((1..3).map(below));
        ds.push(above(3));
        ds.extend((4..8).map(below));
        let cs = decluster(&ds, &v, 3).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!((cs[0].start, cs[0].end), (0, 3));
        match cs[0].maxima.stations[0] {
            MarginalObs::Exact(m) => assert_eq!(m, 12.0),
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decluster_overlapping_days_do_not_end_clusters() {
        let v = [10.0];
        let above = |d: i64| Observation::new(d, vec![MarginalObs::Exact(12.0)]).unwrap();
        let below = |d: i64| Observation::new(d, vec![MarginalObs::Exact(1.0)]).unwrap();
        let overlap = |d: i64| {
            Observation::new(d, vec![MarginalObs::Interval { lower: 0.0, upper: 11.0 }]).unwrap()
        };
        // above, below, overlap, below, below: the overlap resets the run
        let ds = vec![above(0), below(1), overlap(2), below(3), below(4), below(5), below(6)];
        let cs = decluster(&ds, &v, 3).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].end, 2);
    }

    #[test]
    fn cluster_maxima_merge_rules() {
        let v = [10.0, 12.0];
        let o1 = Observation::new(
            0,
            vec![MarginalObs::Exact(15.0), MarginalObs::Interval { lower: 2.0, upper: 13.0 }],
        )
        .unwrap();
        let o2 = Observation::new(
            1,
            vec![
                MarginalObs::Interval { lower: 9.0, upper: 14.0 },
                MarginalObs::Exact(20.0),
            ],
        )
        .unwrap();
        let cs = decluster(&[o1, o2], &v, 1).unwrap();
        assert_eq!(cs.len(), 1);
        // station 1: exact 15 dominates the interval's upper bound 14
        assert_eq!(cs[0].maxima.stations[0], MarginalObs::Exact(15.0));
        // station 2: exact 20 dominates [2, 13]
        assert_eq!(cs[0].maxima.stations[1], MarginalObs::Exact(20.0));
        // cluster maxima never classify below
        assert_ne!(classify(&cs[0].maxima, &v), Position::Below);
    }

    #[test]
    fn cluster_maxima_interval_union() {
        let v = [10.0];
        let o1 = Observation::new(0, vec![MarginalObs::Exact(11.0)]).unwrap();
        let o2 =
            Observation::new(1, vec![MarginalObs::Interval { lower: 9.0, upper: 14.0 }]).unwrap();
        let cs = decluster(&[o1, o2], &v, 1).unwrap();
        // exact 11 does not dominate upper 14: union interval [11, 14]
        assert_eq!(cs[0].maxima.stations[0], MarginalObs::Interval { lower: 11.0, upper: 14.0 });
    }
}
