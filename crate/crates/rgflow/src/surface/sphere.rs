//! Geodesic icosphere with cotangent-weight Laplacian and lumped vertex areas.
//!
//! The Laplacian at vertex i is `(1/A_i) * sum_j w_ij (u_j - u_i)` with
//! `w_ij = (cot a + cot b)/2` over the two triangles sharing edge (i, j)
//! and `A_i` the barycentric third of the incident triangle areas. This is
//! symmetric with respect to the areas, annihilates constants exactly and
//! has nonpositive spectrum. Gradients are piecewise-linear per triangle,
//! averaged to vertices with `A_T/3` weights so that the quadrature of
//! `gradient_inner` reproduces the cotangent Dirichlet form exactly.
//!
//! Pointwise consistency caveat: at the 12 original valence-5 vertices the
//! operator carries an O(1)-relative pointwise defect that does not vanish
//! under refinement (integrals and Dirichlet forms are unaffected). Checks
//! that need pointwise Laplacians on the sphere keep their amplitudes small;
//! quantities built from second derivatives use integral identities instead.

use crate::error::{Error, Result};
use std::collections::HashMap;

pub(crate) struct SphereOps {
    #[allow(dead_code)]
    pub radius: f64,
    positions: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
    /// Lumped vertex areas; these are the quadrature weights.
    pub areas: Vec<f64>,
    face_areas: Vec<f64>,
    /// Per-face hat-function gradients, one 3-vector per corner.
    face_grads: Vec<[[f64; 3]; 3]>,
    // Symmetric cotangent weights in CSR layout.
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    weights: Vec<f64>,
    /// Sum of incident weights per vertex (Jacobi preconditioner).
    diag: Vec<f64>,
    lambda_max: f64,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Icosahedron subdivided `subdivisions` times, vertices projected to `radius`.
fn build_mesh(subdivisions: u32, radius: f64) -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut positions: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for p in positions.iter_mut() {
        *p = scale(*p, radius / norm(*p));
    }
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: u32, b: u32, positions: &mut Vec<[f64; 3]>| -> u32 {
            let key = (a.min(b), a.max(b));
            if let Some(&m) = midpoint.get(&key) {
                return m;
            }
            let pa = positions[a as usize];
            let pb = positions[b as usize];
            let m = [
                (pa[0] + pb[0]) / 2.0,
                (pa[1] + pb[1]) / 2.0,
                (pa[2] + pb[2]) / 2.0,
            ];
            let m = scale(m, radius / norm(m));
            positions.push(m);
            let idx = (positions.len() - 1) as u32;
            midpoint.insert(key, idx);
            idx
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut positions);
            let bc = mid(b, c, &mut positions);
            let ca = mid(c, a, &mut positions);
            next_faces.push([a, ab, ca]);
            next_faces.push([b, bc, ab]);
            next_faces.push([c, ca, bc]);
            next_faces.push([ab, bc, ca]);
        }
        faces = next_faces;
    }
    (positions, faces)
}

impl SphereOps {
    pub fn new(subdivisions: u32, radius: f64) -> Result<Self> {
        if subdivisions > 8 {
            return Err(Error::TooManySubdivisions(subdivisions));
        }
        let (positions, faces) = build_mesh(subdivisions, radius);
        let n = positions.len();

        let mut areas = vec![0.0; n];
        let mut face_areas = Vec::with_capacity(faces.len());
        let mut face_grads = Vec::with_capacity(faces.len());
        let mut weight_map: HashMap<(u32, u32), f64> = HashMap::new();

        for &[a, b, c] in &faces {
            let pa = positions[a as usize];
            let pb = positions[b as usize];
            let pc = positions[c as usize];
            let normal = cross(sub(pb, pa), sub(pc, pa));
            let double_area = norm(normal);
            let area = double_area / 2.0;
            face_areas.push(area);
            for &v in &[a, b, c] {
                areas[v as usize] += area / 3.0;
            }
            let unit_n = scale(normal, 1.0 / double_area);
            // Hat-function gradients: grad(lambda_a) = n x (pc - pb) / (2A).
            let ga = scale(cross(unit_n, sub(pc, pb)), 1.0 / double_area);
            let gb = scale(cross(unit_n, sub(pa, pc)), 1.0 / double_area);
            let gc = scale(cross(unit_n, sub(pb, pa)), 1.0 / double_area);
            face_grads.push([ga, gb, gc]);
            // Cotangent contributions: corner v faces edge (o1, o2).
            let corners = [(a, b, c), (b, c, a), (c, a, b)];
            for &(v, o1, o2) in &corners {
                let pv = positions[v as usize];
                let e1 = sub(positions[o1 as usize], pv);
                let e2 = sub(positions[o2 as usize], pv);
                let cot = dot(e1, e2) / norm(cross(e1, e2));
                let key = (o1.min(o2), o1.max(o2));
                *weight_map.entry(key).or_insert(0.0) += cot / 2.0;
            }
        }

        // CSR assembly, columns sorted per row for determinism.
        let mut adjacency: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &w) in &weight_map {
            adjacency[i as usize].push((j, w));
            adjacency[j as usize].push((i, w));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut weights = Vec::new();
        let mut diag = vec![0.0; n];
        row_ptr.push(0);
        for (i, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_unstable_by_key(|&(j, _)| j);
            for &(j, w) in nbrs.iter() {
                col_idx.push(j);
                weights.push(w);
                diag[i] += w;
            }
            row_ptr.push(col_idx.len());
        }

        let mut ops = SphereOps {
            radius,
            positions,
            faces,
            areas,
            face_areas,
            face_grads,
            row_ptr,
            col_idx,
            weights,
            diag,
            lambda_max: 0.0,
        };
        ops.lambda_max = ops.estimate_lambda_max();
        Ok(ops)
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn lambda_max_abs(&self) -> f64 {
        self.lambda_max
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// `sum_j w_ij (u_j - u_i)`, without the mass division.
    fn stiffness_apply(&self, field: &[f64], out: &mut [f64]) {
        for i in 0..field.len() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.weights[k] * field[self.col_idx[k] as usize];
            }
            out[i] = acc - self.diag[i] * field[i];
        }
    }

    pub fn laplacian(&self, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        self.stiffness_apply(field, &mut out);
        for (o, &a) in out.iter_mut().zip(&self.areas) {
            *o /= a;
        }
        out
    }

    /// Pointwise <grad a, grad b>: per-triangle PL gradients averaged to the
    /// vertices with A_T/3 weights.
    pub fn gradient_inner(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.positions.len();
        let mut out = vec![0.0; n];
        for (f, &[i, j, k]) in self.faces.iter().enumerate() {
            let g = &self.face_grads[f];
            let (i, j, k) = (i as usize, j as usize, k as usize);
            let ga = [
                a[i] * g[0][0] + a[j] * g[1][0] + a[k] * g[2][0],
                a[i] * g[0][1] + a[j] * g[1][1] + a[k] * g[2][1],
                a[i] * g[0][2] + a[j] * g[1][2] + a[k] * g[2][2],
            ];
            let gb = if std::ptr::eq(a, b) {
                ga
            } else {
                [
                    b[i] * g[0][0] + b[j] * g[1][0] + b[k] * g[2][0],
                    b[i] * g[0][1] + b[j] * g[1][1] + b[k] * g[2][1],
                    b[i] * g[0][2] + b[j] * g[1][2] + b[k] * g[2][2],
                ]
            };
            let contrib = dot(ga, gb) * self.face_areas[f] / 3.0;
            out[i] += contrib;
            out[j] += contrib;
            out[k] += contrib;
        }
        for (o, &area) in out.iter_mut().zip(&self.areas) {
            *o /= area;
        }
        out
    }

    /// Cotangent Dirichlet form: exact integral of <grad a, grad b> for the
    /// piecewise-linear interpolants.
    pub fn dirichlet_form(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..a.len() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k] as usize;
                if j > i {
                    acc += self.weights[k] * (a[j] - a[i]) * (b[j] - b[i]);
                }
            }
        }
        acc
    }

    /// Jacobi-preconditioned CG on the (negated, PSD) cotangent system
    /// `-S phi = -A.*source`, after projecting the source to zero area mean.
    /// Returns a solution of `laplacian(phi) = source - mean(source)`.
    pub fn solve_poisson(&self, source: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = source.len();
        let total: f64 = self.areas.iter().sum();
        let mean = source
            .iter()
            .zip(&self.areas)
            .map(|(&s, &a)| s * a)
            .sum::<f64>()
            / total;
        // b = -A .* (source - mean); solve (-S) x = b.
        let b: Vec<f64> = source
            .iter()
            .zip(&self.areas)
            .map(|(&s, &a)| -a * (s - mean))
            .collect();
        let b_norm = b.iter().map(|&v| v * v).sum::<f64>().sqrt();
        // Noise-level sources (fixed points) have nothing to solve; CG on a
        // pure-roundoff system cannot reach a relative tolerance.
        let sup_source = source.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        if b_norm <= 1e-14 * total * (1.0 + sup_source) {
            return Ok(vec![0.0; n]);
        }

        let mut x = match guess {
            Some(g) => g.to_vec(),
            None => vec![0.0; n],
        };
        let mut r = vec![0.0; n];
        self.stiffness_apply(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] + r[i]; // b - (-S)x = b + Sx
        }
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(&ri, &d)| ri / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let mut sp = vec![0.0; n];

        let tol = 1e-10;
        let max_iters = 40 * n;
        for iter in 0..max_iters {
            let r_norm = r.iter().map(|&v| v * v).sum::<f64>().sqrt();
            if r_norm <= tol * b_norm {
                return Ok(x);
            }
            self.stiffness_apply(&p, &mut sp);
            for v in sp.iter_mut() {
                *v = -*v; // (-S) p
            }
            let p_sp: f64 = p.iter().zip(&sp).map(|(&a, &b)| a * b).sum();
            if p_sp <= 0.0 {
                return Err(Error::CgDidNotConverge {
                    iters: iter,
                    residual: r_norm / b_norm,
                });
            }
            let alpha = rz / p_sp;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * sp[i];
            }
            for i in 0..n {
                z[i] = r[i] / self.diag[i];
            }
            let rz_next: f64 = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let r_norm = r.iter().map(|&v| v * v).sum::<f64>().sqrt();
        Err(Error::CgDidNotConverge {
            iters: max_iters,
            residual: r_norm / b_norm,
        })
    }

    /// Power iteration for the largest |eigenvalue| of the Laplacian,
    /// run once at construction. The CFL formula only needs a percent-level
    /// estimate; the factor-2 step bound leaves ~40% headroom under the RK4
    /// real-axis stability limit of 2.785.
    fn estimate_lambda_max(&self) -> f64 {
        let n = self.node_count();
        let total: f64 = self.areas.iter().sum();
        let mut v: Vec<f64> = (0..n).map(|i| (0.7511 * i as f64).sin()).collect();
        let mut lambda = 0.0;
        let mut scratch = vec![0.0; n];
        for _ in 0..400 {
            // Deflate constants (area-weighted mean).
            let mean = v
                .iter()
                .zip(&self.areas)
                .map(|(&x, &a)| x * a)
                .sum::<f64>()
                / total;
            for x in v.iter_mut() {
                *x -= mean;
            }
            self.stiffness_apply(&v, &mut scratch);
            // w = -laplacian(v) (positive operator)
            let mut next: Vec<f64> = scratch
                .iter()
                .zip(&self.areas)
                .map(|(&s, &a)| -s / a)
                .collect();
            // Rayleigh quotient in the area inner product.
            let num: f64 = v
                .iter()
                .zip(&next)
                .zip(&self.areas)
                .map(|((&x, &y), &a)| x * y * a)
                .sum();
            let den: f64 = v.iter().zip(&self.areas).map(|(&x, &a)| x * x * a).sum();
            let lambda_next = num / den;
            let scale_inv = 1.0 / next.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
            for x in next.iter_mut() {
                *x *= scale_inv;
            }
            let done = (lambda_next - lambda).abs() <= 1e-8 * lambda_next.abs();
            lambda = lambda_next;
            v = next;
            if done {
                break;
            }
        }
        lambda
    }
}
