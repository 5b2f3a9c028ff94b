use std::collections::VecDeque;

use crate::mesh::{LipMesh, Point};

use super::config::Rect;

/// `sum A (d - d_prev) / l`.
pub fn damage_length_increment(areas: &[f64], d_prev: &[f64], d: &[f64], l: f64) -> f64 {
    areas
        .iter()
        .zip(d_prev.iter().zip(d))
        .map(|(a, (p, n))| a * (n - p))
        .sum::<f64>()
        / l
}

/// `sum A d / l` over elements whose centroid lies in `rect`.
pub fn region_length(centroids: &[Point], areas: &[f64], d: &[f64], l: f64, rect: &Rect) -> f64 {
    centroids
        .iter()
        .zip(areas.iter().zip(d))
        .filter(|(c, _)| inside(c, rect))
        .map(|(_, (a, di))| a * di)
        .sum::<f64>()
        / l
}

fn inside(c: &Point, r: &Rect) -> bool {
    c[0] >= r[0] && c[0] <= r[2] && c[1] >= r[1] && c[1] <= r[3]
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchCriteria {
    pub notch_tip: Point,
    pub d_thresh: f64,
    /// Minimum transverse gap between two branches (normally `2 l`).
    pub separation: f64,
    pub symmetry_line: Option<f64>,
    pub min_elements: usize,
}

/// True when, beyond some cut `x = x_c` ahead of the notch tip, the damaged
/// set `{d > d_thresh}` splits into lip-connected components whose `y`
/// extents inside the slab `x_c <= x < x_c + separation` are more than
/// `separation` apart. With a symmetry line, a component farther than
/// `separation / 2` from the line counts against its own mirror image.
pub fn detect_branching(lip: &LipMesh, centroids: &[Point], d: &[f64], c: &BranchCriteria) -> bool {
    let damaged: Vec<usize> = (0..d.len())
        .filter(|&e| d[e] > c.d_thresh && centroids[e][0] > c.notch_tip[0])
        .collect();
    if damaged.len() < c.min_elements.max(1) {
        return false;
    }
    let mut cuts: Vec<f64> = damaged.iter().map(|&e| centroids[e][0]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // at most ~64 cuts, evenly spread over the damaged x-range
    let stride = cuts.len().div_ceil(64);
    let mut member = vec![false; d.len()];
    let mut seen = vec![false; d.len()];
    for &x_c in cuts.iter().step_by(stride) {
        for &e in &damaged {
            member[e] = centroids[e][0] >= x_c;
            seen[e] = false;
        }
        let mut extents: Vec<(f64, f64)> = Vec::new();
        let mut queue = VecDeque::new();
        for &seed in &damaged {
            if !member[seed] || seen[seed] {
                continue;
            }
            seen[seed] = true;
            queue.push_back(seed);
            let (mut lo, mut hi, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
            while let Some(v) = queue.pop_front() {
                count += 1;
                if centroids[v][0] < x_c + c.separation {
                    lo = lo.min(centroids[v][1]);
                    hi = hi.max(centroids[v][1]);
                }
                for (j, _) in lip.neighbors(v) {
                    if member[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            if count >= c.min_elements && lo <= hi {
                extents.push((lo, hi));
            }
        }
        if let Some(ys) = c.symmetry_line {
            let half = 0.5 * c.separation;
            if extents.iter().any(|&(lo, hi)| lo - ys > half || ys - hi > half) {
                return true;
            }
        }
        for (i, a) in extents.iter().enumerate() {
            for b in &extents[i + 1..] {
                if b.0 - a.1 > c.separation || a.0 - b.1 > c.separation {
                    return true;
                }
            }
        }
    }
    false
}

/// Direction (degrees from +x) of the damaged elements in the annulus
/// `r_in <= |c - tip| <= r_out`: principal axis of their second moment about
/// the tip, oriented along their mean offset. `None` with fewer than two.
pub fn crack_angle(centroids: &[Point], d: &[f64], tip: Point, d_thresh: f64, annulus: [f64; 2]) -> Option<f64> {
    let (mut sxx, mut syy, mut sxy, mut mx, mut my, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0usize);
    for (c, &di) in centroids.iter().zip(d) {
        let (rx, ry) = (c[0] - tip[0], c[1] - tip[1]);
        let r = rx.hypot(ry);
        if di > d_thresh && r >= annulus[0] && r <= annulus[1] {
            sxx += rx * rx;
            syy += ry * ry;
            sxy += rx * ry;
            mx += rx;
            my += ry;
            n += 1;
        }
    }
    if n < 2 {
        return None;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (mut vx, mut vy) = (theta.cos(), theta.sin());
    if vx * mx + vy * my < 0.0 {
        vx = -vx;
        vy = -vy;
    }
    Some(vy.atan2(vx).to_degrees())
}

/// Running crack length and tip speed.
#[derive(Clone, Debug, PartialEq)]
pub struct CrackTracker {
    /// Multiplies every increment (2 when the crack runs along a symmetry boundary).
    pub factor: f64,
    pub symmetric_branching: bool,
    pub length: f64,
    pub t_branch: Option<f64>,
    last_sample: Option<(f64, f64)>,
}

impl CrackTracker {
    pub fn new(factor: f64, symmetric_branching: bool) -> Self {
        Self {
            factor,
            symmetric_branching,
            length: 0.0,
            t_branch: None,
            last_sample: None,
        }
    }

    /// Adds one step's increment; after branching in symmetric mode each
    /// branch is credited half.
    pub fn advance(&mut self, increment: f64) {
        let mut da = self.factor * increment;
        if self.symmetric_branching && self.t_branch.is_some() {
            da *= 0.5;
        }
        self.length += da;
    }

    pub fn mark_branch(&mut self, t: f64) {
        if self.t_branch.is_none() {
            self.t_branch = Some(t);
        }
    }

    /// Mean tip speed since the previous sample (0 for the first one).
    pub fn sample_speed(&mut self, t: f64) -> f64 {
        let v = match self.last_sample {
            Some((t0, a0)) if t > t0 => (self.length - a0) / (t - t0),
            _ => 0.0,
        };
        self.last_sample = Some((t, self.length));
        v
    }
}
