use serde::{Deserialize, Serialize};

use super::measure::{check_probability, Measure1D};
use crate::error::{Error, Result};
use crate::numerics::special::{gaussian_pdf, gaussian_quantile};

/// Default step of the brute-force grid.
pub const DEFAULT_GRID_STEP: f64 = 0.01;
/// Quantile level bounding the brute-force grid on each side.
pub const GRID_TAIL: f64 = 1e-10;
const MAX_GRID_NODES: usize = 200_000;
// Bounded ∪ bounded candidates are cubic in the grid size; that family is
// searched on a grid thinned to about this many nodes.
const TWO_BOUNDED_NODES: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// The Gaussian isoperimetric profile e^{−a_θ²/2}/√(2π).
pub fn gaussian_profile(theta: f64) -> Result<f64> {
    Ok(gaussian_pdf(gaussian_quantile(theta)?))
}

/// Perimeter of (−∞, a] ∩ I or [a, ∞) ∩ I: the density at `a` when `a` is
/// interior to the domain, zero otherwise. Both sides share the boundary point.
pub fn half_line_perimeter(m: &Measure1D, a: f64, _side: Side) -> f64 {
    m.density(a)
}

/// A finite union of disjoint sub-intervals of the domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySet {
    intervals: Vec<(f64, f64)>,
    total_measure: f64,
    boundary_points: Vec<f64>,
}

impl BoundarySet {
    /// Clips the intervals to the domain, sorts them and merges touching
    /// neighbours. Overlaps are rejected.
    pub fn new(m: &Measure1D, intervals: &[(f64, f64)]) -> Result<Self> {
        let dom = m.domain();
        let mut parts = Vec::with_capacity(intervals.len());
        for &(a, b) in intervals {
            if a.is_nan() || b.is_nan() || !(a < b) {
                return Err(Error::InvalidInterval { lo: a, hi: b });
            }
            let (a, b) = (a.max(dom.lo()), b.min(dom.hi()));
            if a < b {
                parts.push((a, b));
            }
        }
        parts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
        for (a, b) in parts {
            match merged.last_mut() {
                Some(last) if a < last.1 => {
                    return Err(Error::Infeasible(format!(
                        "intervals ({}, {}) and ({a}, {b}) overlap",
                        last.0, last.1
                    )))
                }
                Some(last) if a == last.1 => last.1 = b,
                _ => merged.push((a, b)),
            }
        }
        let total_measure = merged.iter().map(|&(a, b)| m.mass_between(a, b)).sum();
        let boundary_points = merged
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .filter(|x| x.is_finite())
            .collect();
        Ok(BoundarySet {
            intervals: merged,
            total_measure,
            boundary_points,
        })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    /// Finite endpoints; they lie in the closure of the domain.
    pub fn boundary_points(&self) -> &[f64] {
        &self.boundary_points
    }

    pub fn is_half_line(&self, m: &Measure1D) -> bool {
        let dom = m.domain();
        self.intervals.len() == 1
            && (self.intervals[0].0 <= dom.lo() || self.intervals[0].1 >= dom.hi())
    }
}

/// Sum of the density over boundary points strictly inside the domain.
pub fn perimeter(m: &Measure1D, set: &BoundarySet) -> f64 {
    set.boundary_points.iter().map(|&x| m.density(x)).sum()
}

/// Result of the exhaustive search.
#[derive(Debug, Clone, Serialize)]
pub struct MinimizerReport {
    pub theta: f64,
    pub set: BoundarySet,
    pub perimeter: f64,
    /// min over the two half-lines of measure θ.
    pub half_line_perimeter: f64,
    /// Smallest perimeter among sets that are not half-lines, if any was feasible.
    pub other_perimeter: Option<f64>,
    pub grid_nodes: usize,
    pub candidates: usize,
}

struct Grid {
    x: Vec<f64>,
    cdf: Vec<f64>,
    sf: Vec<f64>,
    dens: Vec<f64>,
}

impl Grid {
    /// Lower bound of the density at the point with `left` mass to its left,
    /// from the bracketing grid nodes (log-concave densities are unimodal).
    fn density_floor(&self, left: f64) -> f64 {
        let k = self.cdf.partition_point(|&f| f <= left);
        if k == 0 || k == self.cdf.len() {
            0.0
        } else {
            self.dens[k - 1].min(self.dens[k])
        }
    }
}

struct Best {
    perimeter: f64,
    set: Vec<(f64, f64)>,
    half_line: bool,
    other: f64,
    candidates: usize,
}

impl Best {
    fn offer(&mut self, perimeter: f64, set: Vec<(f64, f64)>, half_line: bool) {
        self.candidates += 1;
        if !half_line {
            self.other = self.other.min(perimeter);
        }
        if perimeter < self.perimeter {
            self.perimeter = perimeter;
            self.set = set;
            self.half_line = half_line;
        }
    }
}

/// Exhaustive search for the least-perimeter set of measure θ among half-lines
/// and unions of at most `max_components` intervals with all but one endpoint
/// on a uniform grid. The last endpoint is solved so the measure is exactly θ.
pub fn brute_force_minimizer(
    m: &Measure1D,
    theta: f64,
    max_components: usize,
    grid_step: f64,
) -> Result<MinimizerReport> {
    check_probability(theta)?;
    if !(1..=2).contains(&max_components) {
        return Err(Error::Infeasible(format!(
            "max_components must be 1 or 2, got {max_components}"
        )));
    }
    if !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(Error::Domain {
            what: "grid_step must be positive",
            value: grid_step,
        });
    }
    let lo = m.quantile(GRID_TAIL)?;
    let hi = m.quantile_upper(GRID_TAIL)?;
    let n = ((hi - lo) / grid_step).floor() as usize + 1;
    if !(2..=MAX_GRID_NODES).contains(&n) {
        return Err(Error::Infeasible(format!(
            "grid step {grid_step} gives {n} nodes on [{lo}, {hi}]"
        )));
    }
    let x: Vec<f64> = (0..n).map(|i| lo + i as f64 * grid_step).collect();
    let grid = Grid {
        cdf: x.iter().map(|&v| m.cdf(v)).collect(),
        sf: x.iter().map(|&v| m.sf(v)).collect(),
        dens: x.iter().map(|&v| m.density(v)).collect(),
        x,
    };
    let dom = m.domain();
    let (dlo, dhi) = (dom.lo(), dom.hi());
    let f = |v: f64| m.density(v);

    let mut best = Best {
        perimeter: f64::INFINITY,
        set: Vec::new(),
        half_line: true,
        other: f64::INFINITY,
        candidates: 0,
    };
    let a = m.quantile(theta)?;
    best.offer(f(a), vec![(dlo, a)], true);
    let b = m.quantile_upper(theta)?;
    best.offer(f(b), vec![(b, dhi)], true);
    let half_line_perimeter = best.perimeter;

    // [x_i, y]
    for i in 0..n {
        let (xi, fi) = (grid.x[i], grid.dens[i]);
        let right = grid.sf[i] - theta;
        if right <= 0.0 {
            break;
        }
        let left = grid.cdf[i] + theta;
        if fi + grid.density_floor(left) >= best.perimeter {
            continue;
        }
        let y = m.split_point(left, right);
        best.offer(fi + f(y), vec![(xi, y)], false);
    }

    if max_components == 2 {
        two_component_search(m, theta, &grid, &mut best);
    }

    let set = BoundarySet::new(m, &best.set)?;
    Ok(MinimizerReport {
        theta,
        perimeter: best.perimeter,
        set,
        half_line_perimeter,
        other_perimeter: best.other.is_finite().then_some(best.other),
        grid_nodes: n,
        candidates: best.candidates,
    })
}

fn two_component_search(m: &Measure1D, theta: f64, grid: &Grid, best: &mut Best) {
    let n = grid.x.len();
    let dom = m.domain();
    let (dlo, dhi) = (dom.lo(), dom.hi());
    let f = |v: f64| m.density(v);

    // (lo, x_i] ∪ [y, hi)
    for i in 0..n {
        let w = theta - grid.cdf[i];
        if w <= 0.0 {
            break;
        }
        let y = m.split_point(1.0 - w, w);
        if y > grid.x[i] {
            best.offer(grid.dens[i] + f(y), vec![(dlo, grid.x[i]), (y, dhi)], false);
        }
    }

    // (lo, x_i] ∪ [x_j, y]
    for i in 0..n {
        let w = theta - grid.cdf[i];
        if w <= 0.0 {
            break;
        }
        let fi = grid.dens[i];
        if fi >= best.perimeter {
            continue;
        }
        for j in i + 1..n {
            let right = grid.sf[j] - w;
            if right <= 0.0 {
                break;
            }
            let fij = fi + grid.dens[j];
            let left = grid.cdf[j] + w;
            if fij + grid.density_floor(left) >= best.perimeter {
                continue;
            }
            let y = m.split_point(left, right);
            best.offer(fij + f(y), vec![(dlo, grid.x[i]), (grid.x[j], y)], false);
        }
    }

    // [y, x_i] ∪ [x_j, hi)
    for j in (0..n).rev() {
        let w = theta - grid.sf[j];
        if w <= 0.0 {
            break;
        }
        let fj = grid.dens[j];
        if fj >= best.perimeter {
            continue;
        }
        for i in (0..j).rev() {
            let left = grid.cdf[i] - w;
            if left <= 0.0 {
                break;
            }
            let fij = fj + grid.dens[i];
            if fij + grid.density_floor(left) >= best.perimeter {
                continue;
            }
            let y = m.split_point(left, grid.sf[i] + w);
            best.offer(fij + f(y), vec![(y, grid.x[i]), (grid.x[j], dhi)], false);
        }
    }

    // [x_i, x_j] ∪ [x_k, y] on a thinned grid
    let stride = n.div_ceil(TWO_BOUNDED_NODES).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    for (ii, &i) in idx.iter().enumerate() {
        let fi = grid.dens[i];
        if fi >= best.perimeter {
            continue;
        }
        for (jj, &j) in idx.iter().enumerate().skip(ii + 1) {
            let inner = m.mass_between(grid.x[i], grid.x[j]);
            let w = theta - inner;
            if w <= 0.0 {
                break;
            }
            let fij = fi + grid.dens[j];
            if fij >= best.perimeter {
                continue;
            }
            for &k in idx.iter().skip(jj + 1) {
                let right = grid.sf[k] - w;
                if right <= 0.0 {
                    break;
                }
                let fijk = fij + grid.dens[k];
                let left = grid.cdf[k] + w;
                if fijk + grid.density_floor(left) >= best.perimeter {
                    continue;
                }
                let y = m.split_point(left, right);
                best.offer(
                    fijk + f(y),
                    vec![(grid.x[i], grid.x[j]), (grid.x[k], y)],
                    false,
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure1d::{normalize, PotentialSpec};
    use crate::numerics::special::FRAC_1_SQRT_2PI;

    // 2·e^{−1/2}/√(2π) and (1+δ_E)/√(2π) for D = 2, 40-digit references
    const TWO_POINT: f64 = 0.483_941_449_038_286_7;
    const TRUNCATED_AT_ZERO: f64 = 0.417_959_550_235_134_6;

    fn truncated2() -> Measure1D {
        normalize(&PotentialSpec::truncated_symmetric(2.0).unwrap()).unwrap()
    }

    #[test]
    fn profile_values_and_symmetry() {
        assert!((gaussian_profile(0.5).unwrap() - FRAC_1_SQRT_2PI).abs() < 1e-16);
        let p = gaussian_profile(0.841_344_746_068_542_9).unwrap();
        assert!((p - 0.241_970_724_519_143_37).abs() < 1e-12);
        for k in 1..10 {
            let t = k as f64 / 10.0;
            let d = gaussian_profile(t).unwrap() - gaussian_profile(1.0 - t).unwrap();
            assert!(d.abs() < 1e-15);
        }
        assert!(gaussian_profile(1.0).is_err());
    }

    #[test]
    fn half_line_examples() {
        let g = Measure1D::gaussian();
        assert!((half_line_perimeter(&g, 0.0, Side::Left) - FRAC_1_SQRT_2PI).abs() < 1e-16);
        let t = truncated2();
        assert!((half_line_perimeter(&t, 0.0, Side::Right) - TRUNCATED_AT_ZERO).abs() < 1e-14);
        assert_eq!(half_line_perimeter(&t, 3.0, Side::Left), 0.0);
        assert_eq!(half_line_perimeter(&t, 2.0, Side::Left), 0.0);
    }

    #[test]
    fn set_perimeters() {
        let g = Measure1D::gaussian();
        let left = BoundarySet::new(&g, &[(f64::NEG_INFINITY, 0.0)]).unwrap();
        assert!((perimeter(&g, &left) - FRAC_1_SQRT_2PI).abs() < 1e-16);
        assert!((left.total_measure() - 0.5).abs() < 1e-15);
        let whole = BoundarySet::new(&g, &[(f64::NEG_INFINITY, f64::INFINITY)]).unwrap();
        assert_eq!(perimeter(&g, &whole), 0.0);
        let mid = BoundarySet::new(&g, &[(-1.0, 1.0)]).unwrap();
        assert!((perimeter(&g, &mid) - TWO_POINT).abs() < 1e-15);

        let t = truncated2();
        let all = BoundarySet::new(&t, &[(-5.0, 5.0)]).unwrap();
        assert_eq!(perimeter(&t, &all), 0.0);
        assert!((all.total_measure() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn set_normalization_merges_and_rejects() {
        let g = Measure1D::gaussian();
        let s = BoundarySet::new(&g, &[(0.5, 1.0), (-1.0, 0.5)]).unwrap();
        assert_eq!(s.intervals(), &[(-1.0, 1.0)]);
        assert!(BoundarySet::new(&g, &[(-1.0, 0.6), (0.5, 1.0)]).is_err());
        assert!(BoundarySet::new(&g, &[(1.0, -1.0)]).is_err());
    }

    #[test]
    fn gaussian_minimizer_is_half_line() {
        let g = Measure1D::gaussian();
        let r = brute_force_minimizer(&g, 0.5, 2, 0.02).unwrap();
        assert!((r.perimeter - FRAC_1_SQRT_2PI).abs() < 1e-12);
        assert!(r.set.is_half_line(&g));
        assert!(r.set.boundary_points()[0].abs() < 1e-12);
        assert!(r.other_perimeter.unwrap() >= r.half_line_perimeter - 1e-9);
    }

    #[test]
    fn truncated_minimizer_matches_closed_form() {
        let t = truncated2();
        let r = brute_force_minimizer(&t, 0.5, 2, 0.02).unwrap();
        assert!((r.perimeter - TRUNCATED_AT_ZERO).abs() < 1e-12);
        assert!(r.set.is_half_line(&t));
        assert!((r.set.total_measure() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn minimizer_rejects_bad_inputs() {
        let g = Measure1D::gaussian();
        assert!(brute_force_minimizer(&g, 0.5, 3, 0.01).is_err());
        assert!(brute_force_minimizer(&g, 0.5, 1, 0.0).is_err());
        assert!(brute_force_minimizer(&g, 0.5, 1, 1e-6).is_err());
        assert!(brute_force_minimizer(&g, 1.5, 1, 0.01).is_err());
    }

    #[test]
    fn candidate_sets_have_measure_theta() {
        let m = normalize(&PotentialSpec::perturbed(vec![0.3], vec![-0.2, 0.5]).unwrap()).unwrap();
        for theta in [0.1, 0.3, 0.7] {
            let r = brute_force_minimizer(&m, theta, 2, 0.05).unwrap();
            assert!((r.set.total_measure() - theta).abs() < 1e-10);
            assert!(r.perimeter >= gaussian_profile(theta).unwrap() - 1e-9);
        }
    }
}
