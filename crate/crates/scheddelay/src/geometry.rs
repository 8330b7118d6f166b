//! Network geometry: Poisson-distributed access points on a torus and
//! uniformly placed users in each Voronoi cell.
//!
//! The torus stands in for the infinite plane; statistics are meant to be
//! collected only from the inner part of the window (see
//! [`SimWindow::inner_fraction`]) so that any residual asymmetry of the
//! wrap-around metric stays out of the measurements.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use thiserror::Error;

/// Proposals per cell before the whole realization is declared degenerate
/// and resampled by the caller.
const REJECTION_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("SAP density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("window side must be positive, got {0}")]
    NonPositiveSide(f64),
    #[error("inner_fraction must lie in (0, 1], got {0}")]
    BadInnerFraction(f64),
    #[error("no SAPs to assign UEs to")]
    EmptyNetwork,
    #[error("k_s must be at least 1")]
    ZeroUesPerCell,
    #[error(
        "rejection sampling for cell {cell} exceeded {cap} proposals; \
         degenerate geometry, resample the realization"
    )]
    RejectionCapHit { cell: usize, cap: u64 },
}

/// Square observation window, optionally wrapped into a torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimWindow {
    /// Side length in meters.
    pub side_m: f64,
    /// Treat the window as a torus (minimum-image distances).
    pub wrap: bool,
    /// Fraction of the window area forming the centered measurement region.
    pub inner_fraction: f64,
}

impl SimWindow {
    pub fn new(side_m: f64, wrap: bool, inner_fraction: f64) -> Result<Self, GeometryError> {
        if !(side_m > 0.0) {
            return Err(GeometryError::NonPositiveSide(side_m));
        }
        if !(inner_fraction > 0.0 && inner_fraction <= 1.0) {
            return Err(GeometryError::BadInnerFraction(inner_fraction));
        }
        Ok(Self { side_m, wrap, inner_fraction })
    }

    /// Window with the defaults used throughout: 2000 m torus, inner half
    /// of the area measured.
    pub fn default_torus() -> Self {
        Self { side_m: 2000.0, wrap: true, inner_fraction: 0.5 }
    }

    pub fn area(&self) -> f64 {
        self.side_m * self.side_m
    }

    /// Is `p` inside the centered square holding `inner_fraction` of the area?
    pub fn in_inner_region(&self, p: [f64; 2]) -> bool {
        // side of the inner square: sqrt(fraction) * side
        let half_gap = 0.5 * self.side_m * (1.0 - self.inner_fraction.sqrt());
        let hi = self.side_m - half_gap;
        p[0] >= half_gap && p[0] <= hi && p[1] >= half_gap && p[1] <= hi
    }
}

/// One Monte Carlo draw of the network: SAP points, their users, and the
/// serving-link distances.
#[derive(Debug, Clone)]
pub struct NetworkRealization {
    pub sap_positions: Vec<[f64; 2]>,
    /// `ue_positions[s]` holds the k_s users of SAP `s`.
    pub ue_positions: Vec<Vec<[f64; 2]>>,
    /// Distance from each UE to its serving SAP, indexed like `ue_positions`.
    pub link_distance: Vec<Vec<f64>>,
    pub realization_seed: u64,
    pub window: SimWindow,
}

impl NetworkRealization {
    pub fn n_saps(&self) -> usize {
        self.sap_positions.len()
    }

    pub fn k_s(&self) -> usize {
        self.ue_positions.first().map_or(0, Vec::len)
    }

    /// Flat iterator over (sap index, ue index within cell).
    pub fn ue_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.k_s();
        (0..self.n_saps()).flat_map(move |s| (0..k).map(move |u| (s, u)))
    }
}

/// Minimum-image distance between two points of the window.
///
/// Falls back to the plain Euclidean metric when the window does not wrap.
pub fn torus_distance(a: [f64; 2], b: [f64; 2], window: &SimWindow) -> f64 {
    let mut acc = 0.0;
    for d in 0..2 {
        let mut diff = (a[d] - b[d]).abs();
        if window.wrap && diff > window.side_m - diff {
            diff = window.side_m - diff;
        }
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Draw a homogeneous PPP of the given density on the window.
///
/// The point count is Poisson with mean `density * side^2`; positions are
/// i.i.d. uniform. Deterministic for a fixed `(density, window, seed)`.
pub fn sample_ppp(
    density: f64,
    window: &SimWindow,
    seed: u64,
) -> Result<Vec<[f64; 2]>, GeometryError> {
    if !(density > 0.0) {
        return Err(GeometryError::NonPositiveDensity(density));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = density * window.area();
    let n = Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize;
    let side = window.side_m;
    Ok((0..n)
        .map(|_| [rng.gen::<f64>() * side, rng.gen::<f64>() * side])
        .collect())
}

/// Uniform-grid index over the window for exact nearest-SAP queries.
///
/// `nearest` walks outward ring by ring and stops once no unvisited cell can
/// beat the best distance found so far, so it returns the true nearest point
/// also on the torus. Brute force is only used as a cross-check in tests.
struct NearestGrid<'a> {
    points: &'a [[f64; 2]],
    window: &'a SimWindow,
    cells: Vec<Vec<u32>>,
    n_cells: usize,
    cell_size: f64,
}

impl<'a> NearestGrid<'a> {
    fn new(points: &'a [[f64; 2]], window: &'a SimWindow) -> Self {
        // target ~1 point per cell, at least 1 cell
        let n_cells = ((points.len() as f64).sqrt().floor() as usize).max(1);
        let cell_size = window.side_m / n_cells as f64;
        let mut cells = vec![Vec::new(); n_cells * n_cells];
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = Self::cell_of(p, n_cells, cell_size);
            cells[cy * n_cells + cx].push(i as u32);
        }
        Self { points, window, cells, n_cells, cell_size }
    }

    fn cell_of(p: &[f64; 2], n_cells: usize, cell_size: f64) -> (usize, usize) {
        let clamp = |x: f64| ((x / cell_size) as usize).min(n_cells - 1);
        (clamp(p[0]), clamp(p[1]))
    }

    fn nearest(&self, q: [f64; 2]) -> (usize, f64) {
        let n = self.n_cells as isize;
        let (qx, qy) = Self::cell_of(&q, self.n_cells, self.cell_size);
        let mut best = (usize::MAX, f64::INFINITY);
        let max_ring = if self.window.wrap { n / 2 + 1 } else { n };
        for ring in 0..=max_ring {
            // any point in an unvisited cell is at least this far away
            let lower_bound = (ring - 1).max(0) as f64 * self.cell_size;
            if best.1 < lower_bound {
                break;
            }
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs().max(dy.abs()) != ring {
                        continue;
                    }
                    let cx = qx as isize + dx;
                    let cy = qy as isize + dy;
                    let (cx, cy) = if self.window.wrap {
                        (cx.rem_euclid(n), cy.rem_euclid(n))
                    } else {
                        if cx < 0 || cy < 0 || cx >= n || cy >= n {
                            continue;
                        }
                        (cx, cy)
                    };
                    for &i in &self.cells[cy as usize * self.n_cells + cx as usize] {
                        let d = torus_distance(q, self.points[i as usize], self.window);
                        if d < best.1 {
                            best = (i as usize, d);
                        }
                    }
                }
            }
        }
        best
    }
}

/// Exact nearest SAP of a query point under the window metric.
pub fn nearest_sap(saps: &[[f64; 2]], q: [f64; 2], window: &SimWindow) -> (usize, f64) {
    NearestGrid::new(saps, window).nearest(q)
}

/// Place `k_s` users uniformly in every Voronoi cell by rejection sampling
/// from the whole window.
///
/// The serving SAP of every user is its nearest SAP under the window metric,
/// which makes the accepted points exactly uniform on the cell.
pub fn assign_ues(
    saps: &[[f64; 2]],
    k_s: usize,
    window: &SimWindow,
    seed: u64,
) -> Result<NetworkRealization, GeometryError> {
    if saps.is_empty() {
        return Err(GeometryError::EmptyNetwork);
    }
    if k_s == 0 {
        return Err(GeometryError::ZeroUesPerCell);
    }
    let grid = NearestGrid::new(saps, window);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = window.side_m;
    let mut ue_positions = vec![Vec::with_capacity(k_s); saps.len()];
    let mut link_distance = vec![Vec::with_capacity(k_s); saps.len()];
    for cell in 0..saps.len() {
        let mut proposals: u64 = 0;
        while ue_positions[cell].len() < k_s {
            proposals += 1;
            if proposals > REJECTION_CAP {
                return Err(GeometryError::RejectionCapHit { cell, cap: REJECTION_CAP });
            }
            let p = [rng.gen::<f64>() * side, rng.gen::<f64>() * side];
            let (owner, d) = grid.nearest(p);
            if owner == cell && d > 0.0 {
                ue_positions[cell].push(p);
                link_distance[cell].push(d);
            }
        }
    }
    Ok(NetworkRealization {
        sap_positions: saps.to_vec(),
        ue_positions,
        link_distance,
        realization_seed: seed,
        window: *window,
    })
}

/// Sample a full realization, retrying on pathological rejection failures.
pub fn sample_realization(
    density: f64,
    k_s: usize,
    window: &SimWindow,
    seed: u64,
) -> Result<NetworkRealization, GeometryError> {
    // a couple of retries with derived seeds; the cap is generous enough that
    // hitting it twice in a row means the configuration itself is degenerate
    for attempt in 0..3 {
        let sub = seed.wrapping_add(attempt as u64 * 0x9E37_79B9_7F4A_7C15);
        let saps = sample_ppp(density, window, sub)?;
        if saps.is_empty() {
            continue;
        }
        match assign_ues(&saps, k_s, window, sub ^ 0xA5A5_A5A5_A5A5_A5A5) {
            Ok(net) => return Ok(net),
            Err(GeometryError::RejectionCapHit { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(GeometryError::RejectionCapHit { cell: 0, cap: REJECTION_CAP })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_nearest(saps: &[[f64; 2]], q: [f64; 2], w: &SimWindow) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, s) in saps.iter().enumerate() {
            let d = torus_distance(q, *s, w);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn torus_distance_basics() {
        let w = SimWindow::new(100.0, true, 1.0).unwrap();
        assert_eq!(torus_distance([3.0, 4.0], [3.0, 4.0], &w), 0.0);
        // wraparound: 0 and side-1 are 1 apart
        assert!((torus_distance([0.0, 0.0], [99.0, 0.0], &w) - 1.0).abs() < 1e-12);
        let half = torus_distance([0.0, 0.0], [50.0, 50.0], &w);
        assert!((half - 100.0 / std::f64::consts::SQRT_2).abs() < 1e-9);
        // no pair is farther than side * sqrt(2)/2
        assert!(half <= 100.0 * std::f64::consts::SQRT_2 / 2.0 + 1e-12);
    }

    #[test]
    fn torus_distance_symmetric_without_wrap() {
        let w = SimWindow::new(100.0, false, 1.0).unwrap();
        let (a, b) = ([1.0, 2.0], [90.0, 40.0]);
        assert_eq!(torus_distance(a, b, &w), torus_distance(b, a, &w));
        let euclid = ((89.0f64 * 89.0) + (38.0 * 38.0)).sqrt();
        assert!((torus_distance(a, b, &w) - euclid).abs() < 1e-12);
    }

    #[test]
    fn ppp_count_matches_density() {
        let w = SimWindow::new(1000.0, true, 1.0).unwrap();
        let density = 1e-4; // mean 100 points
        // the sample variance of n Poisson counts scatters like sqrt(2/n)
        // relative, so a 5% band on it needs n well above 7e3
        let n = 20_000;
        let mut counts = Vec::new();
        for seed in 0..n {
            counts.push(sample_ppp(density, &w, seed).unwrap().len() as f64);
        }
        let mean: f64 = counts.iter().sum::<f64>() / counts.len() as f64;
        let var: f64 =
            counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / counts.len() as f64;
        // Poisson: mean == variance == density * area; 5% band per contract
        let expect = density * w.area();
        assert!((mean - expect).abs() / expect < 0.05, "mean {mean} vs {expect}");
        assert!((var - expect).abs() / expect < 0.05, "var {var} vs {expect}");
    }

    #[test]
    fn ppp_deterministic_given_seed() {
        let w = SimWindow::new(500.0, true, 1.0).unwrap();
        let a = sample_ppp(2e-4, &w, 42).unwrap();
        let b = sample_ppp(2e-4, &w, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ppp_rejects_bad_input() {
        let w = SimWindow::new(500.0, true, 1.0).unwrap();
        assert!(sample_ppp(0.0, &w, 1).is_err());
        assert!(SimWindow::new(-1.0, true, 0.5).is_err());
        assert!(SimWindow::new(10.0, true, 0.0).is_err());
        assert!(SimWindow::new(10.0, true, 1.5).is_err());
    }

    #[test]
    fn ues_are_assigned_to_their_nearest_sap() {
        let w = SimWindow::new(800.0, true, 1.0).unwrap();
        let saps = sample_ppp(1e-4, &w, 7).unwrap();
        let net = assign_ues(&saps, 3, &w, 8).unwrap();
        assert!(net.ue_positions.iter().all(|c| c.len() == 3));
        for (s, u) in net.ue_indices() {
            let p = net.ue_positions[s][u];
            let (owner, d) = brute_nearest(&saps, p, &w);
            assert_eq!(owner, s);
            assert!((d - net.link_distance[s][u]).abs() < 1e-12);
            assert!(d > 0.0);
        }
    }

    #[test]
    fn single_sap_owns_the_whole_torus() {
        let w = SimWindow::new(100.0, true, 1.0).unwrap();
        let saps = vec![[50.0, 50.0]];
        let net = assign_ues(&saps, 64, &w, 3).unwrap();
        assert_eq!(net.ue_positions[0].len(), 64);
        // crude uniformity check: mean of each coordinate near side/2 is not
        // meaningful on a torus, so check occupancy of the four quadrants
        let mut quad = [0usize; 4];
        for p in &net.ue_positions[0] {
            let ix = (p[0] >= 50.0) as usize + 2 * ((p[1] >= 50.0) as usize);
            quad[ix] += 1;
        }
        assert!(quad.iter().all(|&q| q > 4), "quadrants {quad:?}");
    }

    #[test]
    fn grid_nearest_matches_brute_force() {
        for wrap in [true, false] {
            let w = SimWindow::new(300.0, wrap, 1.0).unwrap();
            let saps = sample_ppp(5e-4, &w, 11).unwrap();
            let grid = NearestGrid::new(&saps, &w);
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            for _ in 0..500 {
                let q = [rng.gen::<f64>() * 300.0, rng.gen::<f64>() * 300.0];
                let (gi, gd) = grid.nearest(q);
                let (bi, bd) = brute_nearest(&saps, q, &w);
                assert!((gd - bd).abs() < 1e-12);
                assert_eq!(gi, bi);
            }
        }
    }

    #[test]
    fn inner_region_is_half_the_area_by_default() {
        let w = SimWindow::default_torus();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let inside = (0..n)
            .filter(|_| {
                let p = [rng.gen::<f64>() * w.side_m, rng.gen::<f64>() * w.side_m];
                w.in_inner_region(p)
            })
            .count();
        let frac = inside as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "inner fraction {frac}");
    }

    #[test]
    fn realization_is_reproducible() {
        let w = SimWindow::new(600.0, true, 0.5).unwrap();
        let a = sample_realization(1e-4, 2, &w, 99).unwrap();
        let b = sample_realization(1e-4, 2, &w, 99).unwrap();
        assert_eq!(a.sap_positions, b.sap_positions);
        assert_eq!(a.ue_positions, b.ue_positions);
    }
}
