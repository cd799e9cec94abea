//! Quadratic problems over V-polytopes.
//!
//! A body is stored as a product of vertex lists (one list for an ordinary
//! polytope, two for the product body used by the mid-point map). Every
//! solver works through a linear minimization oracle, so product bodies are
//! never expanded into their vertex set.

use nalgebra::{DMatrix, DVector};

use super::linalg::least_squares;
use crate::error::{Error, Result};

/// Index of a vertex of the product body: one vertex index per factor.
pub(crate) type VertexId = Vec<usize>;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factors {
    pub sets: Vec<Vec<DVector<f64>>>,
    offsets: Vec<usize>,
    dim: usize,
}

impl Factors {
    pub fn new(sets: Vec<Vec<DVector<f64>>>) -> Self {
        let mut offsets = Vec::with_capacity(sets.len());
        let mut dim = 0;
        for s in &sets {
            offsets.push(dim);
            dim += s[0].len();
        }
        Self { sets, offsets, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex(&self, id: &VertexId) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        for (f, &j) in id.iter().enumerate() {
            v.rows_mut(self.offsets[f], self.sets[f][j].len()).copy_from(&self.sets[f][j]);
        }
        v
    }

    /// Vertex minimizing `<g, v>`; ties go to the lowest index.
    pub fn argmin(&self, g: &DVector<f64>) -> VertexId {
        self.sets
            .iter()
            .enumerate()
            .map(|(f, set)| {
                let gf = g.rows(self.offsets[f], set[0].len());
                let mut best = 0;
                let mut best_val = f64::INFINITY;
                for (j, v) in set.iter().enumerate() {
                    let val = gf.dot(v);
                    if val < best_val {
                        best_val = val;
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    pub fn centroid(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim);
        for (f, set) in self.sets.iter().enumerate() {
            let mut s = DVector::zeros(set[0].len());
            for v in set {
                s += v;
            }
            s /= set.len() as f64;
            c.rows_mut(self.offsets[f], s.len()).copy_from(&s);
        }
        c
    }
}

#[derive(Debug, Clone)]
pub(crate) struct MinNorm {
    /// Minimizer in the image space `A v - b`.
    pub image: DVector<f64>,
    /// Matching point of the body.
    pub point: DVector<f64>,
    pub corral: Vec<VertexId>,
    pub iterations: usize,
}

/// Minimum-norm point of `{ A x - b : x in body }` by Wolfe's method.
pub(crate) fn min_norm_point(
    body: &Factors,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    warm: &[VertexId],
    max_iter: usize,
) -> Result<MinNorm> {
    let image = |id: &VertexId| a * body.vertex(id) - b;
    let mut ids: Vec<VertexId> = Vec::new();
    for id in warm {
        if !ids.contains(id) {
            ids.push(id.clone());
        }
    }
    if ids.is_empty() {
        ids.push(body.argmin(&DVector::zeros(body.dim())));
    }
    let mut pts: Vec<DVector<f64>> = ids.iter().map(image).collect();
    // A warm corral may be affinely dependent; restart from its best point.
    let (best, _) = pts
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.norm_squared()))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    ids = vec![ids[best].clone()];
    pts = vec![pts[best].clone()];
    let mut lam = vec![1.0];
    let mut x = pts[0].clone();

    let mut it = 0;
    let mut last_norm = f64::INFINITY;
    loop {
        if it >= max_iter {
            return Err(Error::NonConvergence {
                solver: "min-norm point",
                iterations: it,
                residual: x.norm(),
            });
        }
        it += 1;
        let q_id = body.argmin(&(a.transpose() * &x));
        let q = image(&q_id);
        let scale = pts.iter().map(|p| p.norm_squared()).fold(q.norm_squared(), f64::max).max(1.0);
        let gap = x.norm_squared() - x.dot(&q);
        // A numerically zero point means the origin is in the image.
        let zero = x.norm() <= 1e-14 * scale.sqrt();
        // Each major step strictly decreases |x| in exact arithmetic; when it
        // no longer does, rounding dominates.
        let norm = x.norm_squared();
        if zero || gap <= 1e-15 * scale || ids.contains(&q_id) || norm >= last_norm {
            break;
        }
        last_norm = norm;
        // In exact arithmetic an improving vertex lies off the corral's
        // affine hull; numerically it may not, and continuing would cycle.
        if hull_distance(&pts, &q) <= 1e-10 * scale.sqrt() {
            break;
        }
        ids.push(q_id);
        pts.push(q);
        lam.push(0.0);

        for _ in 0..=pts.len() {
            let alpha = affine_minimizer(&pts);
            if alpha.iter().all(|&w| w > 1e-14) {
                lam = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (l, w) in lam.iter().zip(&alpha) {
                if *w <= 1e-14 && l - w > 0.0 {
                    theta = theta.min(l / (l - w));
                }
            }
            for (l, w) in lam.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * w;
            }
            // Drop the weights that hit zero (at least one).
            let min_idx = lam
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc })
                .0;
            let mut keep: Vec<bool> = lam.iter().map(|&l| l > 1e-14).collect();
            keep[min_idx] = false;
            let mut k = 0;
            ids.retain(|_| {
                k += 1;
                keep[k - 1]
            });
            k = 0;
            pts.retain(|_| {
                k += 1;
                keep[k - 1]
            });
            k = 0;
            lam.retain(|_| {
                k += 1;
                keep[k - 1]
            });
            let total: f64 = lam.iter().sum();
            for l in lam.iter_mut() {
                *l /= total;
            }
            if pts.len() == 1 {
                lam = vec![1.0];
                break;
            }
        }
        x = combine(&pts, &lam);
    }

    let mut point = DVector::zeros(body.dim());
    for (id, &l) in ids.iter().zip(&lam) {
        point.axpy(l, &body.vertex(id), 1.0);
    }
    Ok(MinNorm {
        image: x,
        point,
        corral: ids,
        iterations: it,
    })
}

fn combine(pts: &[DVector<f64>], lam: &[f64]) -> DVector<f64> {
    let mut x = DVector::zeros(pts[0].len());
    for (p, &l) in pts.iter().zip(lam) {
        x.axpy(l, p, 1.0);
    }
    x
}

/// Distance from `q` to the affine hull of `pts`.
fn hull_distance(pts: &[DVector<f64>], q: &DVector<f64>) -> f64 {
    if pts.len() == 1 {
        return (q - &pts[0]).norm();
    }
    let n = q.len();
    let d = DMatrix::from_fn(n, pts.len() - 1, |i, j| pts[j + 1][i] - pts[0][i]);
    least_squares(&d, &(q - &pts[0]), 1e-14).residual
}

/// Weights of the minimum-norm point of the affine hull of `pts`.
fn affine_minimizer(pts: &[DVector<f64>]) -> Vec<f64> {
    let s = pts.len();
    if s == 1 {
        return vec![1.0];
    }
    let n = pts[0].len();
    let d = DMatrix::from_fn(n, s - 1, |i, j| pts[j + 1][i] - pts[0][i]);
    let ls = least_squares(&d, &(-&pts[0]), 1e-14);
    let mut w = Vec::with_capacity(s);
    w.push(1.0 - ls.solution.sum());
    w.extend(ls.solution.iter().copied());
    w
}

/// Distance from `m` to `rows * body` (zero iff `m` is a mean value).
pub(crate) fn mean_gap(body: &Factors, rows: &DMatrix<f64>, m: &DVector<f64>, max_iter: usize) -> Result<MinNorm> {
    min_norm_point(body, rows, m, &[], max_iter)
}

/// Nearest point to `target` among body points `x` with `rows * x = m`,
/// by an augmented Lagrangian whose subproblems are min-norm problems. The
/// penalty grows whenever the residual stalls, which happens on degenerate
/// slices (a lower-dimensional face of the body) where the multipliers diverge.
pub(crate) fn nearest_in_slice(
    body: &Factors,
    rows: &DMatrix<f64>,
    m: &DVector<f64>,
    target: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let n = body.dim();
    let k = rows.nrows();
    let mut gamma: f64 = 1e3;
    let mut lambda = DVector::zeros(k);
    let mut warm: Vec<VertexId> = Vec::new();
    let mut total = 0;
    let mut residual = f64::INFINITY;
    for _ in 0..500 {
        let s = gamma.sqrt();
        let mut a = DMatrix::zeros(n + k, n);
        a.view_mut((0, 0), (n, n)).fill_with_identity();
        a.view_mut((n, 0), (k, n)).copy_from(&(rows * s));
        let mut b = DVector::zeros(n + k);
        b.rows_mut(0, n).copy_from(target);
        b.rows_mut(n, k).copy_from(&((m - &lambda / gamma) * s));
        let mn = min_norm_point(body, &a, &b, &warm, max_iter)?;
        total += mn.iterations;
        let r = rows * &mn.point - m;
        let previous = residual;
        residual = r.norm();
        if residual <= tol {
            return Ok(mn.point);
        }
        lambda += r * gamma;
        if residual > 0.25 * previous && gamma < 1e12 {
            gamma *= 10.0;
        }
        warm = mn.corral;
    }
    Err(Error::NonConvergence {
        solver: "augmented Lagrangian slice projection",
        iterations: total,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Factors {
        let v = |x: f64, y: f64| DVector::from_vec(vec![x, y]);
        Factors::new(vec![vec![v(-1.0, -1.0), v(1.0, -1.0), v(1.0, 1.0), v(-1.0, 1.0)]])
    }

    #[test]
    fn min_norm_of_shifted_square() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![3.0, 0.5]);
        let r = min_norm_point(&square(), &a, &b, &[], 100).unwrap();
        assert!((&r.point - DVector::from_vec(vec![1.0, 0.5])).norm() < 1e-12);
        assert!((r.image.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn slice_projection_on_square() {
        let rows = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let m = DVector::from_vec(vec![0.3]);
        let point = nearest_in_slice(&square(), &rows, &m, &DVector::from_vec(vec![0.0, 0.0]), 1e-11, 1000).unwrap();
        assert!((&point - DVector::from_vec(vec![0.3, 0.0])).norm() < 1e-9, "{point}");
        let far = nearest_in_slice(&square(), &rows, &m, &DVector::from_vec(vec![5.0, 4.0]), 1e-11, 1000).unwrap();
        assert!((&far - DVector::from_vec(vec![0.3, 1.0])).norm() < 1e-9, "{far}");
    }

    #[test]
    fn product_oracle_picks_per_factor() {
        let sq = square();
        let prod = Factors::new(vec![sq.sets[0].clone(), sq.sets[0].clone()]);
        let g = DVector::from_vec(vec![1.0, 1.0, -1.0, 1.0]);
        assert_eq!(prod.argmin(&g), vec![0, 1]);
        let gap = mean_gap(&prod, &DMatrix::identity(4, 4), &DVector::from_vec(vec![0.5, 0.5, 0.0, 2.0]), 100).unwrap();
        assert!((gap.image.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearly_collinear_vertices_do_not_cycle() {
        use rand::{Rng, SeedableRng};
        let body = Factors::new(vec![crate::scenario::standard_body_vertices_for_tests()]);
        let a = DMatrix::identity(3, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let r: f64 = rng.random_range(0.0..0.1);
            let b = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)).normalize() * r;
            let mn = min_norm_point(&body, &a, &b, &[], 1000).unwrap();
            let q = body.vertex(&body.argmin(&mn.image)) - &b;
            assert!(mn.image.norm_squared() - mn.image.dot(&q) <= 1e-13);
        }
    }
}
