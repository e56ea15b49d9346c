//! Finite metric graphs: chains, grids and user-supplied site sets.
//!
//! Balls are closed, `B_r(x) = {y : d(x,y) ≤ r}`. Suprema over radii are taken
//! over the finite set of realized distances, between which balls are constant.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_SITE_CAP: usize = 4096;
/// Graphs up to this size store a dense distance table.
pub const DENSE_TABLE_MAX: usize = 4096;

const DIST_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricRule {
    L1,
    L2,
    Linf,
}

impl MetricRule {
    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            MetricRule::L1 => diffs.sum(),
            MetricRule::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            MetricRule::Linf => diffs.fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug)]
enum Metric {
    Table(Vec<f64>),
    Coordinates { coords: Vec<Vec<f64>>, rule: MetricRule },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    Chain,
    Grid { side: usize, dim: usize },
    Custom,
}

/// A finite metric space of sites with declared dimension `D` and center `x0`.
#[derive(Clone, Debug)]
pub struct MetricGraph {
    labels: Vec<String>,
    metric: Metric,
    dimension: usize,
    x0: usize,
    kind: GraphKind,
}

impl MetricGraph {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn x0(&self) -> usize {
        self.x0
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn with_x0(mut self, x0: usize) -> Result<Self> {
        self.check_site(x0)?;
        self.x0 = x0;
        Ok(self)
    }

    pub fn site_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn check_site(&self, x: usize) -> Result<()> {
        if x >= self.len() {
            return invalid(format!("unknown site {x} (graph has {} sites)", self.len()));
        }
        Ok(())
    }

    pub fn dist(&self, x: usize, y: usize) -> f64 {
        match &self.metric {
            Metric::Table(t) => t[x * self.len() + y],
            Metric::Coordinates { coords, rule } => rule.distance(&coords[x], &coords[y]),
        }
    }

    /// `d(X, Y) = min_{x∈X, y∈Y} d(x, y)`; infinite when either set is empty.
    pub fn set_dist(&self, xs: &[usize], ys: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for &x in xs {
            for &y in ys {
                best = best.min(self.dist(x, y));
            }
        }
        best
    }

    /// Closed ball `{y : d(y, x) ≤ r}`, in ascending site order.
    pub fn ball(&self, x: usize, r: f64) -> Result<Vec<usize>> {
        self.check_site(x)?;
        if !(r >= 0.0) {
            return invalid(format!("ball radius must be nonnegative, got {r}"));
        }
        Ok((0..self.len()).filter(|&y| self.dist(x, y) <= r + DIST_EPS).collect())
    }

    /// Sorted distinct values of `d(x, ·)`, always starting with 0.
    pub fn realized_distances_from(&self, x: usize) -> Vec<f64> {
        let mut ds: Vec<f64> = (0..self.len()).map(|y| self.dist(x, y)).collect();
        dedup_sorted(&mut ds);
        ds
    }

    /// All distinct pairwise distances plus 0.
    pub fn realized_distances(&self) -> Vec<f64> {
        let n = self.len();
        let mut ds = Vec::with_capacity(n * (n + 1) / 2 + 1);
        ds.push(0.0);
        for x in 0..n {
            for y in x + 1..n {
                ds.push(self.dist(x, y));
            }
        }
        dedup_sorted(&mut ds);
        ds
    }

    pub fn diameter(&self) -> f64 {
        self.realized_distances().last().copied().unwrap_or(0.0)
    }

    /// True when sites are a path with `d(i, j) = |i − j|` in index order.
    pub fn is_path_chain(&self) -> bool {
        if self.kind == GraphKind::Chain {
            return true;
        }
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| (self.dist(i, j) - (i as f64 - j as f64).abs()).abs() < DIST_EPS))
    }

    /// Checks symmetry, identity of indiscernibles and the triangle inequality.
    pub fn validate_metric(&self) -> Result<()> {
        let n = self.len();
        for x in 0..n {
            for y in 0..n {
                let dxy = self.dist(x, y);
                if !dxy.is_finite() || dxy < 0.0 {
                    return invalid(format!("distance d({x},{y}) = {dxy} is not a nonnegative real"));
                }
                if (dxy - self.dist(y, x)).abs() > DIST_EPS {
                    return invalid(format!("metric is not symmetric at ({x},{y})"));
                }
                if (x == y) != (dxy <= DIST_EPS) {
                    return invalid(format!("d({x},{y}) = {dxy} violates identity of indiscernibles"));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if self.dist(x, z) > self.dist(x, y) + self.dist(y, z) + 1e-9 {
                        return invalid(format!("triangle inequality fails on ({x},{y},{z})"));
                    }
                }
            }
        }
        Ok(())
    }

    fn from_coords(
        coords: Vec<Vec<f64>>,
        rule: MetricRule,
        labels: Vec<String>,
        dimension: usize,
        x0: usize,
        kind: GraphKind,
    ) -> Self {
        let n = coords.len();
        let metric = if n <= DENSE_TABLE_MAX {
            let mut t = vec![0.0; n * n];
            for x in 0..n {
                for y in 0..n {
                    t[x * n + y] = rule.distance(&coords[x], &coords[y]);
                }
            }
            Metric::Table(t)
        } else {
            Metric::Coordinates { coords, rule }
        };
        MetricGraph { labels, metric, dimension, x0, kind }
    }

    /// Builds a graph from an explicit distance table; the table is validated.
    pub fn from_distance_table(
        labels: Vec<String>,
        table: Vec<Vec<f64>>,
        dimension: usize,
        x0: usize,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return invalid("graph needs at least one site");
        }
        if table.len() != n || table.iter().any(|row| row.len() != n) {
            return invalid(format!("distance table must be {n}×{n}"));
        }
        let flat = table.into_iter().flatten().collect();
        let g = MetricGraph { labels, metric: Metric::Table(flat), dimension, x0: 0, kind: GraphKind::Custom };
        g.validate_metric()?;
        g.with_x0(x0)
    }

    /// Builds a graph from coordinates and a named metric rule.
    pub fn from_coordinates(
        labels: Vec<String>,
        coords: Vec<Vec<f64>>,
        rule: MetricRule,
        dimension: usize,
        x0: usize,
        site_cap: usize,
    ) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return invalid("graph needs at least one site");
        }
        if n > site_cap {
            return Err(Error::ResourceLimit(format!("{n} sites exceed the site cap {site_cap}")));
        }
        if labels.len() != n {
            return invalid("labels and coordinates differ in length");
        }
        let width = coords[0].len();
        if coords.iter().any(|c| c.len() != width) {
            return invalid("all coordinates must have the same length");
        }
        let mut seen = HashMap::new();
        for (i, c) in coords.iter().enumerate() {
            let key: Vec<u64> = c.iter().map(|v| v.to_bits()).collect();
            if let Some(j) = seen.insert(key, i) {
                return invalid(format!("sites {j} and {i} share coordinates"));
            }
        }
        let g = Self::from_coords(coords, rule, labels, dimension, 0, GraphKind::Custom);
        g.with_x0(x0)
    }
}

fn dedup_sorted(ds: &mut Vec<f64>) {
    ds.push(0.0);
    ds.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    ds.dedup_by(|a, b| (*a - *b).abs() <= DIST_EPS);
}

/// Path graph `0..length` with `d(x, y) = |x − y|`, `D = 1`, `x0 = ⌊length/2⌋`.
pub fn make_chain(length: usize) -> Result<MetricGraph> {
    make_chain_capped(length, DEFAULT_SITE_CAP)
}

pub fn make_chain_capped(length: usize, site_cap: usize) -> Result<MetricGraph> {
    if length == 0 {
        return invalid("chain length must be at least 1");
    }
    if length > site_cap {
        return Err(Error::ResourceLimit(format!("{length} sites exceed the site cap {site_cap}")));
    }
    let coords = (0..length).map(|i| vec![i as f64]).collect();
    let labels = (0..length).map(|i| i.to_string()).collect();
    Ok(MetricGraph::from_coords(coords, MetricRule::L1, labels, 1, length / 2, GraphKind::Chain))
}

/// `side^dim` grid with the ℓ¹ metric, `dim ∈ {1, 2}`, centered `x0`.
pub fn make_grid(side: usize, dim: usize) -> Result<MetricGraph> {
    make_grid_capped(side, dim, DEFAULT_SITE_CAP)
}

pub fn make_grid_capped(side: usize, dim: usize, site_cap: usize) -> Result<MetricGraph> {
    if side == 0 {
        return invalid("grid side must be at least 1");
    }
    match dim {
        1 => {
            let mut g = make_chain_capped(side, site_cap)?;
            g.kind = GraphKind::Grid { side, dim };
            Ok(g)
        }
        2 => {
            let n = side.checked_mul(side).filter(|&n| n <= site_cap).ok_or_else(|| {
                Error::ResourceLimit(format!("{side}^2 sites exceed the site cap {site_cap}"))
            })?;
            let mut coords = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for i in 0..side {
                for j in 0..side {
                    coords.push(vec![i as f64, j as f64]);
                    labels.push(format!("{i},{j}"));
                }
            }
            let c = side / 2;
            Ok(MetricGraph::from_coords(coords, MetricRule::L1, labels, 2, c * side + c, GraphKind::Grid { side, dim }))
        }
        _ => invalid(format!("grid dimension must be 1 or 2, got {dim}")),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub declared_dimension: usize,
    /// `max |B_r(x)| / (1+r)^D` over sites and realized radii.
    pub c_vol: f64,
    pub argmax_site: usize,
    pub argmax_radius: f64,
    /// Trivially true on finite graphs: beyond the diameter the ratio only decreases.
    pub nonincreasing_beyond_diameter: bool,
    /// Log-log slope of `|B_r(x0)|` for `1 ≤ r ≤ diam/4`.
    pub observed_growth_exponent: f64,
    pub dimension_understated: bool,
}

/// Volume-growth constant `C_vol` for the declared dimension.
pub fn regularity_constant(graph: &MetricGraph, dimension: usize, r_max: f64) -> RegularityReport {
    let n = graph.len();
    let d = dimension as i32;
    let mut best = (0.0_f64, 0usize, 0.0_f64);
    for x in 0..n {
        let mut ds: Vec<f64> = (0..n).map(|y| graph.dist(x, y)).collect();
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut i = 0;
        while i < n {
            let r = ds[i];
            let mut j = i;
            while j + 1 < n && (ds[j + 1] - r).abs() <= DIST_EPS {
                j += 1;
            }
            if r > r_max + DIST_EPS {
                break;
            }
            let ratio = (j + 1) as f64 / (1.0 + r).powi(d);
            if ratio > best.0 {
                best = (ratio, x, r);
            }
            i = j + 1;
        }
    }
    let diam = graph.diameter();
    let nonincreasing = {
        let full = n as f64;
        let at = |r: f64| full / (1.0 + r).powi(d);
        at(diam) >= at(diam + 1.0) && at(diam + 1.0) >= at(2.0 * diam + 2.0)
    };
    let x0 = graph.x0();
    let radii = graph.realized_distances_from(x0);
    let upper: Vec<(f64, f64)> = radii
        .iter()
        .filter(|&&r| r >= 1.0 && r <= diam / 4.0 + DIST_EPS)
        .map(|&r| {
            let count = (0..n).filter(|&y| graph.dist(x0, y) <= r + DIST_EPS).count();
            ((1.0 + r).ln(), (count as f64).ln())
        })
        .collect();
    let slope = if upper.len() >= 2 { crate::lab::fit::least_squares(&upper).0 } else { 0.0 };
    RegularityReport {
        declared_dimension: dimension,
        c_vol: best.0,
        argmax_site: best.1,
        argmax_radius: best.2,
        nonincreasing_beyond_diameter: nonincreasing,
        observed_growth_exponent: slope,
        dimension_understated: slope > dimension as f64 + 0.25,
    }
}

/// Partial sums `S(r) = Σ_{x ∈ B_r(x0)} (1 + d(x, x0))^{−(D+1+ε)}` at each scheduled radius.
pub fn summability_partial_sums(
    graph: &MetricGraph,
    x0: usize,
    epsilon: f64,
    radius_schedule: &[f64],
) -> Result<Vec<f64>> {
    graph.check_site(x0)?;
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    let p = graph.dimension() as f64 + 1.0 + epsilon;
    let mut ds: Vec<f64> = (0..graph.len()).map(|y| graph.dist(x0, y)).collect();
    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut cumulative = Vec::with_capacity(ds.len());
    let mut acc = 0.0;
    // add small terms last so the running sum keeps full precision
    for &d in &ds {
        acc += (1.0 + d).powf(-p);
        cumulative.push(acc);
    }
    radius_schedule
        .iter()
        .map(|&r| {
            if !(r >= 0.0) {
                return invalid(format!("radius must be nonnegative, got {r}"));
            }
            let count = ds.partition_point(|&d| d <= r + DIST_EPS);
            Ok(if count == 0 { 0.0 } else { cumulative[count - 1] })
        })
        .collect()
}

/// Upper bound on `Σ_{k≥1} k^{−s}` for `s > 1`: partial sum to `terms`
/// plus the integral tail `terms^{1−s}/(s−1)`.
pub fn zeta_upper_bound(s: f64, terms: usize) -> f64 {
    let partial: f64 = (1..=terms).rev().map(|k| (k as f64).powf(-s)).sum();
    partial + (terms as f64).powf(1.0 - s) / (s - 1.0)
}

/// The summability bound `C_vol·2^D·Σ_k k^{−(1+ε)} + C_vol`.
pub fn summability_bound(c_vol: f64, dimension: usize, epsilon: f64) -> f64 {
    c_vol * 2f64.powi(dimension as i32) * zeta_upper_bound(1.0 + epsilon, 100_000) + c_vol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_metric_and_center() {
        let g = make_chain(5).unwrap();
        assert_eq!(g.dist(0, 4), 4.0);
        assert_eq!(g.x0(), 2);
        assert_eq!(g.dimension(), 1);
        let single = make_chain(1).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.dist(0, 0), 0.0);
        make_chain(3).unwrap().validate_metric().unwrap();
    }

    #[test]
    fn zero_length_chain_is_rejected() {
        assert!(matches!(make_chain(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn grid_manhattan_metric() {
        let g = make_grid(3, 2).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.dist(0, 8), 4.0);
        assert_eq!(g.x0(), 4);
        let g1 = make_grid(5, 1).unwrap();
        let c = make_chain(5).unwrap();
        for x in 0..5 {
            for y in 0..5 {
                assert_eq!(g1.dist(x, y), c.dist(x, y));
            }
        }
    }

    #[test]
    fn grid_site_cap() {
        assert!(matches!(make_grid_capped(100, 2, 4096), Err(Error::ResourceLimit(_))));
        assert!(matches!(make_grid(3, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn grid_2x2_unit_ball_by_enumeration() {
        let g = make_grid(2, 2).unwrap();
        // center is (1,1); its ℓ¹ neighbours are (0,1) and (1,0)
        let expected: Vec<usize> = (0..4)
            .filter(|&y| {
                let (a, b) = (y / 2, y % 2);
                (a as i64 - 1).abs() + (b as i64 - 1).abs() <= 1
            })
            .collect();
        assert_eq!(g.ball(g.x0(), 1.0).unwrap(), expected);
        assert_eq!(expected.len(), 3);
    }

    #[test]
    fn balls_on_chain() {
        let g = make_chain(5).unwrap();
        assert_eq!(g.ball(2, 1.0).unwrap(), vec![1, 2, 3]);
        assert_eq!(g.ball(3, 0.0).unwrap(), vec![3]);
        assert_eq!(g.ball(2, 100.0).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(g.ball(2, 1.5).unwrap(), vec![1, 2, 3]);
        assert!(g.ball(7, 1.0).is_err());
    }

    #[test]
    fn regularity_of_chain_approaches_two() {
        let g = make_chain(101).unwrap();
        let rep = regularity_constant(&g, 1, 50.0);
        // independent: max over r ≤ 50 of (2r+1)/(1+r) at the center
        let expected = (0..=50).map(|r| (2 * r + 1) as f64 / (1 + r) as f64).fold(0.0, f64::max);
        assert!((rep.c_vol - expected).abs() < 1e-12);
        assert!(rep.c_vol < 2.0);
        assert!(rep.nonincreasing_beyond_diameter);
        assert!(!rep.dimension_understated);
    }

    #[test]
    fn regularity_of_single_site() {
        let g = make_chain(1).unwrap();
        assert_eq!(regularity_constant(&g, 3, 10.0).c_vol, 1.0);
    }

    #[test]
    fn regularity_of_grid_below_two() {
        let g = make_grid(11, 2).unwrap();
        let rep = regularity_constant(&g, 2, 10.0);
        let interior = (0..=5).map(|r| (2 * r * r + 2 * r + 1) as f64 / ((1 + r) * (1 + r)) as f64).fold(0.0, f64::max);
        assert!((rep.c_vol - interior).abs() < 1e-12, "{} vs {}", rep.c_vol, interior);
        assert!(rep.c_vol < 2.0);
    }

    #[test]
    fn understated_dimension_is_flagged() {
        let g = make_grid(21, 2).unwrap();
        let rep = regularity_constant(&g, 1, 40.0);
        assert!(rep.dimension_understated);
    }

    #[test]
    fn summability_trivial_cases() {
        let g = make_chain(1).unwrap();
        assert_eq!(summability_partial_sums(&g, 0, 1.0, &[0.0, 5.0]).unwrap(), vec![1.0, 1.0]);
        let g = make_chain(9).unwrap();
        assert_eq!(summability_partial_sums(&g, 4, 0.5, &[0.0]).unwrap(), vec![1.0]);
        assert!(summability_partial_sums(&g, 4, 0.0, &[0.0]).is_err());
    }

    #[test]
    fn metric_validation_rejects_bad_tables() {
        let labels = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let bad = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(MetricGraph::from_distance_table(labels.clone(), bad, 1, 0).is_err());
        let asym = vec![vec![0.0, 1.0, 2.0], vec![1.5, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        assert!(MetricGraph::from_distance_table(labels.clone(), asym, 1, 0).is_err());
        let ok = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        let g = MetricGraph::from_distance_table(labels, ok, 1, 1).unwrap();
        assert!(g.is_path_chain());
    }

    #[test]
    fn coordinate_rules() {
        let labels = vec!["p".into(), "q".into()];
        let coords = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
        let l1 = MetricGraph::from_coordinates(labels.clone(), coords.clone(), MetricRule::L1, 2, 0, 10).unwrap();
        let l2 = MetricGraph::from_coordinates(labels.clone(), coords.clone(), MetricRule::L2, 2, 0, 10).unwrap();
        let li = MetricGraph::from_coordinates(labels, coords, MetricRule::Linf, 2, 0, 10).unwrap();
        assert_eq!(l1.dist(0, 1), 7.0);
        assert_eq!(l2.dist(0, 1), 5.0);
        assert_eq!(li.dist(0, 1), 4.0);
    }
}
