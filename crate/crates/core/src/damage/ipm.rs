//! Primal-dual interior-point method (Mehrotra predictor-corrector) for
//! separable convex objectives under box and pairwise-difference constraints.

use crate::constitutive::{Degradation, MaterialParams, Softening};
use std::collections::BinaryHeap;

use crate::mesh::{HeapItem, LipMesh};
use crate::sparse::{csc_from_triplets, SpdSolver};

use super::{DamageError, LipRegion, SolverOptions};

/// Boxes narrower than this are treated as fixed values.
const FIXED_WIDTH: f64 = 1e-13;
const STEP_FRACTION: f64 = 0.99;
/// Extra iterations allowed past convergence to settle the active set.
const EXTRA_STEPS: usize = 4;

/// `min sum_i w_i [g(x_i) ehat_i + h(x_i)]`
/// s.t. `lo <= x <= up` and `|x_i - x_j| <= c` on every listed edge.
#[derive(Clone, Debug)]
pub struct SeparableProblem {
    pub weights: Vec<f64>,
    pub ehat: Vec<f64>,
    pub lo: Vec<f64>,
    pub up: Vec<f64>,
    pub edges: Vec<(usize, usize, f64)>,
    pub degradation: Degradation,
    pub softening: Softening,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionSolution {
    pub d: Vec<f64>,
    pub iterations: usize,
    /// Final scaled KKT residual.
    pub residual: f64,
}

impl SeparableProblem {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| self.weights[i] * (self.degradation.value(x[i]) * self.ehat[i] + self.softening.value(x[i])))
            .sum()
    }

    pub fn element_derivative(&self, i: usize, x: f64) -> f64 {
        self.weights[i] * (self.degradation.derivative(x) * self.ehat[i] + self.softening.derivative(x))
    }

    pub fn element_curvature(&self, i: usize, x: f64) -> f64 {
        self.weights[i] * (self.degradation.second_derivative(x) * self.ehat[i] + self.softening.second_derivative(x))
    }

    /// Max edge violation `|x_i - x_j| - c` (negative when strictly feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v = f64::NEG_INFINITY;
        for i in 0..self.len() {
            v = v.max(self.lo[i] - x[i]).max(x[i] - self.up[i]);
        }
        for &(i, j, c) in &self.edges {
            v = v.max((x[i] - x[j]).abs() - c);
        }
        v
    }

    /// Solves the problem; `region` is only used for error reporting.
    pub fn solve(&self, opts: &SolverOptions, region: usize) -> Result<RegionSolution, DamageError> {
        let n = self.len();
        if n == 0 {
            return Ok(RegionSolution { d: vec![], iterations: 0, residual: 0.0 });
        }
        let mut lo = self.lo.clone();
        let mut up = self.up.clone();
        for i in 0..n {
            if !(lo[i].is_finite() && up[i].is_finite() && self.ehat[i].is_finite() && self.weights[i] > 0.0) {
                return Err(DamageError::InvalidInput(format!("region {region}: non-finite data at entry {i}")));
            }
            up[i] = up[i].max(lo[i]);
        }
        // Rounding in the inputs can push the smallest feasible field (the
        // Lipschitz envelope of `lo`) a hair above `up`; lift `up` to it.
        let envelope = lower_envelope(n, &self.edges, &lo);
        for i in 0..n {
            if envelope[i] > up[i] {
                if envelope[i] - up[i] > 1e-9 {
                    log::debug!("region {region}: lifting upper bound of entry {i} by {:e}", envelope[i] - up[i]);
                }
                up[i] = envelope[i];
            }
        }
        let mut edges = self.edges.clone();

        // fold fixed variables into the boxes of their neighbors until stable
        let mut fixed = vec![false; n];
        let mut value = vec![0.0; n];
        loop {
            let mut changed = false;
            for i in 0..n {
                if !fixed[i] && up[i] - lo[i] <= FIXED_WIDTH {
                    fixed[i] = true;
                    value[i] = lo[i];
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            for &(i, j, c) in &edges {
                for (a, b) in [(i, j), (j, i)] {
                    if fixed[a] && !fixed[b] {
                        lo[b] = lo[b].max(value[a] - c);
                        up[b] = up[b].min(value[a] + c).max(lo[b]);
                    }
                }
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        let mut local = vec![usize::MAX; n];
        for (k, &i) in free.iter().enumerate() {
            local[i] = k;
        }
        edges.retain(|&(i, j, _)| !fixed[i] && !fixed[j]);
        let edges: Vec<(usize, usize, f64)> = edges.into_iter().map(|(i, j, c)| (local[i], local[j], c)).collect();

        let mut x_full = value;
        if free.is_empty() {
            return Ok(RegionSolution { d: x_full, iterations: 0, residual: 0.0 });
        }
        let sub = Reduced {
            problem: self,
            map: &free,
            lo: free.iter().map(|&i| lo[i]).collect(),
            up: free.iter().map(|&i| up[i]).collect(),
            edges,
        };
        let (x, iterations, residual) = sub.interior_point(opts, region)?;
        for (k, &i) in free.iter().enumerate() {
            x_full[i] = x[k];
        }
        Ok(RegionSolution { d: x_full, iterations, residual })
    }
}

/// Smallest field above `lo` satisfying every edge constraint:
/// `env_i = max_j lo_j - dist_c(i, j)`.
fn lower_envelope(n: usize, edges: &[(usize, usize, f64)], lo: &[f64]) -> Vec<f64> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j, c) in edges {
        adj[i].push((j, c));
        adj[j].push((i, c));
    }
    // label-setting sweep on negated values (largest first)
    let mut label: Vec<f64> = lo.iter().map(|v| -v).collect();
    let mut heap: BinaryHeap<HeapItem> = label
        .iter()
        .enumerate()
        .map(|(vertex, &key)| HeapItem { key, vertex })
        .collect();
    while let Some(HeapItem { key, vertex }) = heap.pop() {
        if key > label[vertex] {
            continue;
        }
        for &(j, c) in &adj[vertex] {
            if key + c < label[j] {
                label[j] = key + c;
                heap.push(HeapItem { key: key + c, vertex: j });
            }
        }
    }
    label.into_iter().map(|v| -v).collect()
}

struct Reduced<'a> {
    problem: &'a SeparableProblem,
    map: &'a [usize],
    lo: Vec<f64>,
    up: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
}

/// Slack/multiplier pairs, one block per constraint family.
#[derive(Clone)]
struct Pairs {
    s_lo: Vec<f64>,
    s_up: Vec<f64>,
    s_ep: Vec<f64>,
    s_em: Vec<f64>,
    z_lo: Vec<f64>,
    z_up: Vec<f64>,
    z_ep: Vec<f64>,
    z_em: Vec<f64>,
}

impl Pairs {
    fn slacks(&self) -> impl Iterator<Item = &f64> {
        self.s_lo.iter().chain(&self.s_up).chain(&self.s_ep).chain(&self.s_em)
    }
    fn duals(&self) -> impl Iterator<Item = &f64> {
        self.z_lo.iter().chain(&self.z_up).chain(&self.z_ep).chain(&self.z_em)
    }
    fn count(&self) -> usize {
        self.s_lo.len() + self.s_up.len() + self.s_ep.len() + self.s_em.len()
    }
    fn mu(&self) -> f64 {
        self.slacks().zip(self.duals()).map(|(s, z)| s * z).sum::<f64>() / self.count() as f64
    }
}

struct Direction {
    dx: Vec<f64>,
    d: Pairs,
}

impl Reduced<'_> {
    fn n(&self) -> usize {
        self.map.len()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(k, &v)| self.problem.element_derivative(self.map[k], v)).collect()
    }

    fn curvature(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(k, &v)| self.problem.element_curvature(self.map[k], v)).collect()
    }

    /// `G^T v` for per-constraint values `v`.
    fn gt(&self, v: &Pairs) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for i in 0..self.n() {
            out[i] = -v.z_lo[i] + v.z_up[i];
        }
        for (k, &(i, j, _)) in self.edges.iter().enumerate() {
            let t = v.z_ep[k] - v.z_em[k];
            out[i] += t;
            out[j] -= t;
        }
        out
    }

    /// `G x` restricted to each constraint family (lower, upper, edge+, edge-).
    fn g_apply(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let ep: Vec<f64> = self.edges.iter().map(|&(i, j, _)| x[i] - x[j]).collect();
        let em = ep.iter().map(|v| -v).collect();
        (x.iter().map(|v| -v).collect(), x.to_vec(), ep, em)
    }

    fn interior_point(&self, opts: &SolverOptions, region: usize) -> Result<(Vec<f64>, usize, f64), DamageError> {
        let n = self.n();
        let ne = self.edges.len();
        let tol = opts.kkt_tol;

        let mut x: Vec<f64> = (0..n).map(|i| 0.5 * (self.lo[i] + self.up[i])).collect();
        let half: Vec<f64> = (0..n).map(|i| 0.5 * (self.up[i] - self.lo[i])).collect();
        let diff: Vec<f64> = self.edges.iter().map(|&(i, j, _)| x[i] - x[j]).collect();
        let mut p = Pairs {
            s_lo: half.clone(),
            s_up: half,
            s_ep: self.edges.iter().zip(&diff).map(|(e, dv)| (e.2 - dv).max(1e-3)).collect(),
            s_em: self.edges.iter().zip(&diff).map(|(e, dv)| (e.2 + dv).max(1e-3)).collect(),
            z_lo: vec![1.0; n],
            z_up: vec![1.0; n],
            z_ep: vec![1.0; ne],
            z_em: vec![1.0; ne],
        };
        let scale = self.grad(&x).iter().fold(1.0f64, |a, g| a.max(g.abs()));

        // the sparsity pattern is fixed, so the symbolic factorization is reused
        let mut solver: Option<SpdSolver> = None;
        let mut residual = f64::INFINITY;
        let mut converged_at: Option<usize> = None;

        for iter in 0..opts.max_iter {
            let g = self.grad(&x);
            let gtz = self.gt(&p);
            let r_d: Vec<f64> = (0..n).map(|i| g[i] + gtz[i]).collect();
            let (gl, gu, gp, gm) = self.g_apply(&x);
            let r_lo: Vec<f64> = (0..n).map(|i| gl[i] + p.s_lo[i] + self.lo[i]).collect();
            let r_up: Vec<f64> = (0..n).map(|i| gu[i] + p.s_up[i] - self.up[i]).collect();
            let r_ep: Vec<f64> = (0..ne).map(|k| gp[k] + p.s_ep[k] - self.edges[k].2).collect();
            let r_em: Vec<f64> = (0..ne).map(|k| gm[k] + p.s_em[k] - self.edges[k].2).collect();
            let r_p = Pairs {
                s_lo: r_lo,
                s_up: r_up,
                s_ep: r_ep,
                s_em: r_em,
                z_lo: vec![],
                z_up: vec![],
                z_ep: vec![],
                z_em: vec![],
            };
            let mu = p.mu();
            let dual_res = inf_norm(&r_d) / scale;
            let primal_res = r_p.slacks().fold(0.0f64, |a, v| a.max(v.abs()));
            let comp = mu;
            residual = dual_res.max(primal_res).max(comp);
            if dual_res <= tol && primal_res <= 0.01 * tol && comp <= tol {
                if let Some(x) = self.polish(&x, &p, tol * scale) {
                    return Ok((x, iter, residual));
                }
                // the active set is not settled yet: a few more steps
                let first = *converged_at.get_or_insert(iter);
                if iter >= first + EXTRA_STEPS || comp <= 1e-6 * tol {
                    return Ok((x, iter, residual));
                }
            }

            // reduced Newton matrix H + G^T W G
            let hess = self.curvature(&x);
            let w = |s: &[f64], z: &[f64], k: usize| z[k] / s[k];
            let mut trip = Vec::with_capacity(n + 2 * ne + 2 * ne);
            let mut diag: Vec<f64> = (0..n)
                .map(|i| hess[i] + w(&p.s_lo, &p.z_lo, i) + w(&p.s_up, &p.z_up, i))
                .collect();
            let mut off = Vec::with_capacity(ne);
            for (k, &(i, j, _)) in self.edges.iter().enumerate() {
                let we = w(&p.s_ep, &p.z_ep, k) + w(&p.s_em, &p.z_em, k);
                diag[i] += we;
                diag[j] += we;
                off.push((i, j, -we));
            }
            for (i, &v) in diag.iter().enumerate() {
                trip.push((i, i, v));
            }
            for &(i, j, v) in &off {
                trip.push((i, j, v));
                trip.push((j, i, v));
            }
            let mat = csc_from_triplets(n, &trip);
            let factored = match solver.as_mut() {
                Some(s) => s.update(&mat),
                None => SpdSolver::new(&mat).map(|s| {
                    solver = Some(s);
                }),
            };
            match factored {
                Ok(()) => {}
                // past convergence the barrier terms may exhaust precision
                Err(_) if converged_at.is_some() => return Ok((x, iter, residual)),
                Err(source) => return Err(DamageError::Factor { region, source }),
            }
            let lin = solver.as_ref().expect("factorized above");

            // predictor: r_c = s z
            let rc_aff = self.complementarity(&p, None, 0.0);
            let aff = self.direction(lin, &p, &r_d, &r_p, &rc_aff);
            let a_aff = max_step(&p, &aff.d).min(1.0);
            let mu_aff = p
                .slacks()
                .zip(aff.d.slacks())
                .zip(p.duals().zip(aff.d.duals()))
                .map(|((s, ds), (z, dz))| (s + a_aff * ds) * (z + a_aff * dz))
                .sum::<f64>()
                / p.count() as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector: r_c = s z + ds_aff dz_aff - sigma mu
            let rc = self.complementarity(&p, Some(&aff.d), sigma * mu);
            let dir = self.direction(lin, &p, &r_d, &r_p, &rc);
            let alpha = (STEP_FRACTION * max_step(&p, &dir.d)).min(1.0);

            for i in 0..n {
                x[i] += alpha * dir.dx[i];
            }
            axpy(&mut p.s_lo, alpha, &dir.d.s_lo);
            axpy(&mut p.s_up, alpha, &dir.d.s_up);
            axpy(&mut p.s_ep, alpha, &dir.d.s_ep);
            axpy(&mut p.s_em, alpha, &dir.d.s_em);
            axpy(&mut p.z_lo, alpha, &dir.d.z_lo);
            axpy(&mut p.z_up, alpha, &dir.d.z_up);
            axpy(&mut p.z_ep, alpha, &dir.d.z_ep);
            axpy(&mut p.z_em, alpha, &dir.d.z_em);
            // box slacks track x - lo and up - x exactly; this only guards rounding
            for i in 0..n {
                x[i] = x[i].clamp(self.lo[i], self.up[i]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
        if converged_at.is_some() && x.iter().all(|v| v.is_finite()) {
            return Ok((x, opts.max_iter, residual));
        }
        Err(DamageError::NonConvergence {
            region,
            iterations: opts.max_iter,
            residual,
        })
    }

    /// Active-set refinement of a converged iterate. Constraints whose slack
    /// is below their multiplier become equalities; each connected group of
    /// active constraints then leaves one scalar (or nothing) to solve for.
    /// Accepted only if the result is feasible and the interior-point
    /// multipliers, corrected along a spanning tree to restore stationarity,
    /// stay non-negative; the result then satisfies the KKT conditions.
    fn polish(&self, x: &[f64], p: &Pairs, z_tol: f64) -> Option<Vec<f64>> {
        let n = self.n();
        let ground = n;
        // relation x_a - x_b = delta with multiplier z, contributing coef_a z
        // and coef_b z to the stationarity rows of a and b
        struct Rel {
            a: usize,
            b: usize,
            delta: f64,
            coef: [f64; 2],
            z: f64,
        }
        let mut rels = Vec::new();
        for i in 0..n {
            let lo_active = p.s_lo[i] < p.z_lo[i];
            let up_active = p.s_up[i] < p.z_up[i];
            if lo_active && (!up_active || p.s_lo[i] <= p.s_up[i]) {
                rels.push(Rel { a: i, b: ground, delta: self.lo[i], coef: [-1.0, 0.0], z: p.z_lo[i] });
            } else if up_active {
                rels.push(Rel { a: i, b: ground, delta: self.up[i], coef: [1.0, 0.0], z: p.z_up[i] });
            }
        }
        for (k, &(i, j, c)) in self.edges.iter().enumerate() {
            let plus = p.s_ep[k] < p.z_ep[k];
            let minus = p.s_em[k] < p.z_em[k];
            if plus && (!minus || p.s_ep[k] <= p.s_em[k]) {
                rels.push(Rel { a: i, b: j, delta: c, coef: [1.0, -1.0], z: p.z_ep[k] });
            } else if minus {
                rels.push(Rel { a: i, b: j, delta: -c, coef: [-1.0, 1.0], z: p.z_em[k] });
            }
        }
        let mut adj = vec![Vec::new(); n + 1];
        for (r, rel) in rels.iter().enumerate() {
            adj[rel.a].push(r);
            adj[rel.b].push(r);
        }

        // breadth-first trees, grounded component first: x_v = root + offset_v
        let mut offset = vec![0.0; n + 1];
        let mut parent: Vec<Option<usize>> = vec![None; n + 1];
        let mut seen = vec![false; n + 1];
        let mut out = vec![0.0; n];
        for root in std::iter::once(ground).chain(0..n) {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut order = vec![root];
            let mut head = 0;
            while head < order.len() {
                let v = order[head];
                head += 1;
                for &r in &adj[v] {
                    let rel = &rels[r];
                    let (w, o) = if rel.a == v {
                        (rel.b, offset[v] - rel.delta)
                    } else {
                        (rel.a, offset[v] + rel.delta)
                    };
                    if seen[w] {
                        if (offset[w] - o).abs() > 1e-12 * (1.0 + o.abs()) {
                                                        return None;
                        }
                    } else {
                        seen[w] = true;
                        offset[w] = o;
                        parent[w] = Some(r);
                        order.push(w);
                    }
                }
            }
            let members: Vec<usize> = order.iter().copied().filter(|&v| v != ground).collect();
            let t = if root == ground {
                0.0
            } else {
                // one strictly convex scalar problem in the shift t
                let mut t = members.iter().map(|&v| x[v] - offset[v]).sum::<f64>() / members.len() as f64;
                for _ in 0..50 {
                    let (mut d1, mut d2) = (0.0, 0.0);
                    for &v in &members {
                        d1 += self.problem.element_derivative(self.map[v], t + offset[v]);
                        d2 += self.problem.element_curvature(self.map[v], t + offset[v]);
                    }
                    if !(d2 > 0.0) {
                        return None;
                    }
                    let step = d1 / d2;
                    t -= step;
                    if step.abs() <= 1e-15 * (1.0 + t.abs()) {
                        break;
                    }
                }
                t
            };
            for &v in &members {
                out[v] = t + offset[v];
            }
            // stationarity residual with the interior-point multipliers,
            // then tree corrections leaves first
            let pos: std::collections::HashMap<usize, usize> =
                order.iter().enumerate().map(|(k, &v)| (v, k)).collect();
            let mut acc: Vec<f64> = order
                .iter()
                .map(|&v| {
                    if v == ground {
                        return 0.0;
                    }
                    let mut r = self.problem.element_derivative(self.map[v], out[v]);
                    for &k in &adj[v] {
                        let rel = &rels[k];
                        r += if rel.a == v { rel.coef[0] } else { rel.coef[1] } * rel.z;
                    }
                    r
                })
                .collect();
            for (k, &v) in order.iter().enumerate().rev() {
                let Some(r) = parent[v] else { continue };
                let rel = &rels[r];
                let (cv, cu, u) = if rel.a == v {
                    (rel.coef[0], rel.coef[1], rel.b)
                } else {
                    (rel.coef[1], rel.coef[0], rel.a)
                };
                let dz = -acc[k] / cv;
                if rel.z + dz < -z_tol {
                    return None;
                }
                if u != ground {
                    acc[pos[&u]] += cu * dz;
                }
            }
        }

        let feasible = (0..n).all(|i| out[i] >= self.lo[i] - 1e-12 && out[i] <= self.up[i] + 1e-12)
            && self.edges.iter().all(|&(i, j, c)| (out[i] - out[j]).abs() <= c + 1e-12);
        if !feasible {
                        return None;
        }
        for i in 0..n {
            out[i] = out[i].clamp(self.lo[i], self.up[i]);
        }
        Some(out)
    }

    /// Complementarity residual `s z (+ ds dz) - target`.
    fn complementarity(&self, p: &Pairs, aff: Option<&Pairs>, target: f64) -> Pairs {
        let f = |s: &[f64], z: &[f64], ds: Option<&[f64]>, dz: Option<&[f64]>| -> Vec<f64> {
            (0..s.len())
                .map(|k| {
                    let corr = match (ds, dz) {
                        (Some(a), Some(b)) => a[k] * b[k],
                        _ => 0.0,
                    };
                    s[k] * z[k] + corr - target
                })
                .collect()
        };
        Pairs {
            s_lo: f(&p.s_lo, &p.z_lo, aff.map(|a| &a.s_lo[..]), aff.map(|a| &a.z_lo[..])),
            s_up: f(&p.s_up, &p.z_up, aff.map(|a| &a.s_up[..]), aff.map(|a| &a.z_up[..])),
            s_ep: f(&p.s_ep, &p.z_ep, aff.map(|a| &a.s_ep[..]), aff.map(|a| &a.z_ep[..])),
            s_em: f(&p.s_em, &p.z_em, aff.map(|a| &a.s_em[..]), aff.map(|a| &a.z_em[..])),
            z_lo: vec![],
            z_up: vec![],
            z_ep: vec![],
            z_em: vec![],
        }
    }

    /// Newton direction for residuals `r_d`, `r_p` and complementarity `r_c`
    /// (stored in the slack fields of the `Pairs` arguments).
    fn direction(&self, lin: &SpdSolver, p: &Pairs, r_d: &[f64], r_p: &Pairs, r_c: &Pairs) -> Direction {
        let n = self.n();
        // v = S^-1 (Z r_p - r_c) per constraint, then rhs = -r_d - G^T v
        let v = |s: &[f64], z: &[f64], rp: &[f64], rc: &[f64]| -> Vec<f64> {
            (0..s.len()).map(|k| (z[k] * rp[k] - rc[k]) / s[k]).collect()
        };
        let vp = Pairs {
            s_lo: vec![],
            s_up: vec![],
            s_ep: vec![],
            s_em: vec![],
            z_lo: v(&p.s_lo, &p.z_lo, &r_p.s_lo, &r_c.s_lo),
            z_up: v(&p.s_up, &p.z_up, &r_p.s_up, &r_c.s_up),
            z_ep: v(&p.s_ep, &p.z_ep, &r_p.s_ep, &r_c.s_ep),
            z_em: v(&p.s_em, &p.z_em, &r_p.s_em, &r_c.s_em),
        };
        let gtv = self.gt(&vp);
        let rhs: Vec<f64> = (0..n).map(|i| -r_d[i] - gtv[i]).collect();
        let dx = lin.solve(&rhs);
        let (gl, gu, gp, gm) = self.g_apply(&dx);
        let ds = |rp: &[f64], gdx: &[f64]| -> Vec<f64> { (0..rp.len()).map(|k| -rp[k] - gdx[k]).collect() };
        let s_lo = ds(&r_p.s_lo, &gl);
        let s_up = ds(&r_p.s_up, &gu);
        let s_ep = ds(&r_p.s_ep, &gp);
        let s_em = ds(&r_p.s_em, &gm);
        let dz = |s: &[f64], z: &[f64], rc: &[f64], dsv: &[f64]| -> Vec<f64> {
            (0..s.len()).map(|k| (-rc[k] - z[k] * dsv[k]) / s[k]).collect()
        };
        let z_lo = dz(&p.s_lo, &p.z_lo, &r_c.s_lo, &s_lo);
        let z_up = dz(&p.s_up, &p.z_up, &r_c.s_up, &s_up);
        let z_ep = dz(&p.s_ep, &p.z_ep, &r_c.s_ep, &s_ep);
        let z_em = dz(&p.s_em, &p.z_em, &r_c.s_em, &s_em);
        Direction {
            dx,
            d: Pairs { s_lo, s_up, s_ep, s_em, z_lo, z_up, z_ep, z_em },
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Largest step keeping all slacks and multipliers non-negative.
fn max_step(p: &Pairs, d: &Pairs) -> f64 {
    let mut alpha = f64::INFINITY;
    for (v, dv) in p.slacks().zip(d.slacks()).chain(p.duals().zip(d.duals())) {
        if *dv < 0.0 {
            alpha = alpha.min(-v / dv);
        }
    }
    alpha
}

/// Global fields a region solve reads from.
#[derive(Clone, Copy, Debug)]
pub struct RegionInputs<'a> {
    pub e_plus: &'a [f64],
    pub areas: &'a [f64],
    pub d_n: &'a [f64],
    pub d_lower: &'a [f64],
    pub d_upper: &'a [f64],
    /// Damage values outside the region (held fixed).
    pub d_frozen: &'a [f64],
}

fn scaled_problem(
    elements: &[usize],
    e_plus: &[f64],
    areas: &[f64],
    params: &MaterialParams,
) -> SeparableProblem {
    let mean = elements.iter().map(|&e| areas[e]).sum::<f64>() / elements.len() as f64;
    SeparableProblem {
        weights: elements.iter().map(|&e| areas[e] / mean).collect(),
        ehat: elements.iter().map(|&e| e_plus[e] / params.critical_energy).collect(),
        lo: vec![],
        up: vec![],
        edges: vec![],
        degradation: params.degradation,
        softening: params.softening,
    }
}

/// Lipschitz-constrained minimization of the damage energy over one region,
/// with the damage outside the region frozen.
pub fn constrained_damage_solve(
    region: &LipRegion,
    inputs: &RegionInputs<'_>,
    params: &MaterialParams,
    opts: &SolverOptions,
) -> Result<RegionSolution, DamageError> {
    if region.is_empty() {
        return Err(DamageError::InvalidInput(format!("region {} is empty", region.id)));
    }
    let inv_l = 1.0 / params.length_scale;
    let mut prob = scaled_problem(&region.elements, inputs.e_plus, inputs.areas, params);
    prob.lo = region
        .elements
        .iter()
        .map(|&e| inputs.d_n[e].max(inputs.d_lower[e]))
        .collect();
    prob.up = region.elements.iter().map(|&e| inputs.d_upper[e].min(1.0)).collect();
    for &(k, outside, len) in &region.boundary_edges {
        let (v, c) = (inputs.d_frozen[outside], len * inv_l);
        prob.lo[k] = prob.lo[k].max(v - c);
        prob.up[k] = prob.up[k].min(v + c);
    }
    prob.edges = region.internal_edges.iter().map(|&(i, j, len)| (i, j, len * inv_l)).collect();
    prob.solve(opts, region.id)
}

/// Reference path: the constrained minimization over the whole lip-mesh with
/// box `[d_n, 1]`, no bounds shortcut.
pub fn solve_whole_domain(
    lip: &LipMesh,
    e_plus: &[f64],
    areas: &[f64],
    d_n: &[f64],
    params: &MaterialParams,
    opts: &SolverOptions,
) -> Result<RegionSolution, DamageError> {
    let n = lip.num_vertices();
    if e_plus.len() != n || areas.len() != n || d_n.len() != n {
        return Err(DamageError::InvalidInput("field lengths do not match the lip-mesh".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let inv_l = 1.0 / params.length_scale;
    let mut prob = scaled_problem(&all, e_plus, areas, params);
    prob.lo = d_n.to_vec();
    prob.up = vec![1.0; n];
    prob.edges = lip
        .edges()
        .iter()
        .zip(lip.edge_lengths())
        .map(|(e, &len)| (e[0], e[1], len * inv_l))
        .collect();
    prob.solve(opts, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(n: usize) -> SeparableProblem {
        SeparableProblem {
            weights: vec![1.0; n],
            ehat: vec![0.0; n],
            lo: vec![0.0; n],
            up: vec![1.0; n],
            edges: vec![],
            degradation: Degradation::default(),
            softening: Softening::default(),
        }
    }

    /// Minimizes `phi_i(x) + t x` on `[lo, up]` by bisection on the derivative.
    fn inner_min(p: &SeparableProblem, i: usize, t: f64) -> f64 {
        let df = |x: f64| p.element_derivative(i, x) + t;
        let (mut a, mut b) = (p.lo[i], p.up[i]);
        if df(a) >= 0.0 {
            return a;
        }
        if df(b) <= 0.0 {
            return b;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if df(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Independent oracle: accelerated projected-gradient ascent on the
    /// Lagrangian dual of the edge constraints (boxes kept in the inner problem).
    fn dual_oracle(p: &SeparableProblem, iters: usize) -> Vec<f64> {
        let n = p.len();
        let m = p.edges.len();
        let min_curv = (0..n).map(|i| 6.0 * p.weights[i]).fold(f64::INFINITY, f64::min);
        let mut deg = vec![0usize; n];
        for &(i, j, _) in &p.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        let lip_const = 4.0 * (*deg.iter().max().unwrap_or(&1) as f64) / min_curv;
        let step = 1.0 / lip_const;
        // multipliers for x_i - x_j <= c (lp) and x_j - x_i <= c (lm)
        let (mut lp, mut lm) = (vec![0.0; m], vec![0.0; m]);
        let (mut yp, mut ym) = (lp.clone(), lm.clone());
        let mut t_k = 1.0f64;
        let primal = |lp: &[f64], lm: &[f64]| -> Vec<f64> {
            let mut t = vec![0.0; n];
            for (k, &(i, j, _)) in p.edges.iter().enumerate() {
                t[i] += lp[k] - lm[k];
                t[j] -= lp[k] - lm[k];
            }
            (0..n).map(|i| inner_min(p, i, t[i])).collect()
        };
        for _ in 0..iters {
            let x = primal(&yp, &ym);
            let mut np = vec![0.0; m];
            let mut nm = vec![0.0; m];
            for (k, &(i, j, c)) in p.edges.iter().enumerate() {
                np[k] = (yp[k] + step * (x[i] - x[j] - c)).max(0.0);
                nm[k] = (ym[k] + step * (x[j] - x[i] - c)).max(0.0);
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
            let beta = (t_k - 1.0) / t_next;
            for k in 0..m {
                yp[k] = np[k] + beta * (np[k] - lp[k]);
                ym[k] = nm[k] + beta * (nm[k] - lm[k]);
            }
            lp = np;
            lm = nm;
            t_k = t_next;
        }
        primal(&lp, &lm)
    }

    #[test]
    fn unconstrained_optimum_is_returned() {
        let mut p = problem(3);
        p.ehat = vec![0.5, 1.5, 3.0];
        p.edges = vec![(0, 1, 10.0), (1, 2, 10.0)];
        let sol = p.solve(&SolverOptions::default(), 0).unwrap();
        for i in 0..3 {
            let loc = crate::damage::local_damage_solve(p.ehat[i], 0.0, 1.0).unwrap();
            assert!((sol.d[i] - loc).abs() < 1e-7, "{} vs {loc}", sol.d[i]);
        }
    }

    #[test]
    fn two_element_cap_and_cone() {
        let c = 0.3;
        let mut p = problem(2);
        p.ehat = vec![1e4, 0.0];
        p.lo = vec![0.0, 0.05];
        p.edges = vec![(0, 1, c)];
        let sol = p.solve(&SolverOptions::default(), 0).unwrap();
        assert!((sol.d[0] - 1.0).abs() < 1e-7);
        assert!((sol.d[1] - (1.0 - c)).abs() < 1e-7);
        // a large previous damage dominates the cone
        p.lo[1] = 0.9;
        let sol = p.solve(&SolverOptions::default(), 0).unwrap();
        assert!((sol.d[1] - 0.9).abs() < 1e-7, "{:?}", sol);
    }

    #[test]
    fn fixed_variables_are_folded() {
        let mut p = problem(3);
        p.ehat = vec![50.0, 50.0, 50.0];
        p.lo = vec![0.2, 0.0, 0.0];
        p.up = vec![0.2, 1.0, 1.0];
        p.edges = vec![(0, 1, 0.1), (1, 2, 0.1)];
        let sol = p.solve(&SolverOptions::default(), 0).unwrap();
        assert_eq!(sol.d[0], 0.2);
        assert!(sol.d[1] <= 0.3 + 1e-9 && sol.d[2] <= 0.4 + 1e-9);
        assert!(p.max_violation(&sol.d) < 1e-9);
    }

    #[test]
    fn matches_dual_oracle_on_random_regions() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..20 {
            let n = 10;
            let mut p = problem(n);
            p.weights = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
            p.ehat = (0..n).map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.0..200.0) } else { 0.0 }).collect();
            // Lipschitz-feasible lower bound from a random chain profile
            for i in 0..n {
                if i + 1 < n {
                    p.edges.push((i, i + 1, rng.gen_range(0.05..0.3)));
                }
                if i + 3 < n && rng.gen_bool(0.3) {
                    p.edges.push((i, i + 3, rng.gen_range(0.2..0.6)));
                }
            }
            let base = rng.gen_range(0.0..0.4);
            p.lo = (0..n).map(|i| (base - 0.02 * i as f64).max(0.0)).collect();
            let opts = SolverOptions::default();
            let sol = p.solve(&opts, case).unwrap();
            assert!(p.max_violation(&sol.d) < 1e-9);
            let oracle = dual_oracle(&p, 20000);
            assert!(p.max_violation(&oracle) < 1e-6, "oracle infeasible");
            let (fi, fo) = (p.objective(&sol.d), p.objective(&oracle));
            assert!(fi <= fo + 1e-6 * fo.abs().max(1.0), "case {case}: {fi} vs {fo}");
            assert!((fi - fo).abs() <= 1e-6 * fo.abs().max(1.0), "case {case}: {fi} vs {fo}");
        }
    }

    #[test]
    fn degenerate_constraints_are_resolved_exactly() {
        // ehat = 1 puts the unconstrained minimizer on the lower bound with a
        // zero multiplier; the second element is held by a tight cone
        let mut p = problem(3);
        p.ehat = vec![1.0, 30.0, 0.0];
        p.lo = vec![0.0, 0.0, 0.1];
        p.edges = vec![(1, 2, 0.2)];
        let sol = p.solve(&SolverOptions::default(), 0).unwrap();
        assert!(sol.d[0].abs() < 1e-13, "{:?}", sol.d);
        assert!((sol.d[1] - sol.d[2] - 0.2).abs() < 1e-13, "{:?}", sol.d);
        // the cone pair minimizes w1 f1(t + 0.2) + w2 f2(t) in the shift t
        let t = sol.d[2];
        let df = p.element_derivative(1, t + 0.2) + p.element_derivative(2, t);
        assert!(t == 0.1 && df >= 0.0 || df.abs() < 1e-10, "t {t}, df {df}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let mut p = problem(4);
        p.ehat = vec![100.0, 0.0, 100.0, 0.0];
        p.edges = vec![(0, 1, 0.1), (1, 2, 0.1), (2, 3, 0.1)];
        let opts = SolverOptions { max_iter: 1, ..Default::default() };
        match p.solve(&opts, 7) {
            Err(DamageError::NonConvergence { region: 7, iterations: 1, residual }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
