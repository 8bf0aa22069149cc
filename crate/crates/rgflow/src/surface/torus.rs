//! Pseudospectral operators on a uniform periodic grid.
//!
//! Nodes are ordered row-major with x fastest: `index = iy * nx + ix`,
//! `x = ix * lx / nx`, `y = iy * ly / ny`. Derivatives are exact for
//! band-limited fields; the Nyquist mode is zeroed in first derivatives
//! (it carries no sign information) and kept in the Laplacian.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) struct TorusOps {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    /// Angular frequencies 2*pi*k/L per index (signed k).
    qx: Vec<f64>,
    qy: Vec<f64>,
    /// Same, with the Nyquist entry zeroed; used for first derivatives.
    qx_d: Vec<f64>,
    qy_d: Vec<f64>,
}

fn frequencies(n: usize, l: f64) -> (Vec<f64>, Vec<f64>) {
    let mut q = Vec::with_capacity(n);
    let mut qd = Vec::with_capacity(n);
    for i in 0..n {
        let k = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
        let freq = 2.0 * std::f64::consts::PI * k as f64 / l;
        q.push(freq);
        qd.push(if i == n / 2 { 0.0 } else { freq });
    }
    (q, qd)
}

impl TorusOps {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        let mut planner = FftPlanner::new();
        let (qx, qx_d) = frequencies(nx, lx);
        let (qy, qy_d) = frequencies(ny, ly);
        TorusOps {
            nx,
            ny,
            lx,
            ly,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
            qx,
            qy,
            qx_d,
            qy_d,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Most negative Laplacian eigenvalue in magnitude (Nyquist pair).
    pub fn lambda_max_abs(&self) -> f64 {
        let fx = std::f64::consts::PI * self.nx as f64 / self.lx;
        let fy = std::f64::consts::PI * self.ny as f64 / self.ly;
        fx * fx + fy * fy
    }

    /// Both passes of the 2D transform: all rows in one batched call, then
    /// columns through a small gather/scatter buffer (cache-resident at the
    /// resolutions used here).
    fn fft2(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let (fx, fy) = if inverse {
            (&self.inv_x, &self.inv_y)
        } else {
            (&self.fwd_x, &self.fwd_y)
        };
        let scratch_len = fx
            .get_inplace_scratch_len()
            .max(fy.get_inplace_scratch_len());
        let mut scratch = vec![Complex::new(0.0, 0.0); scratch_len];
        fx.process_with_scratch(buf, &mut scratch);
        let mut col = vec![Complex::new(0.0, 0.0); self.ny];
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                col[iy] = buf[iy * self.nx + ix];
            }
            fy.process_with_scratch(&mut col, &mut scratch);
            for iy in 0..self.ny {
                buf[iy * self.nx + ix] = col[iy];
            }
        }
    }

    pub fn forward(&self, real: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = real.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft2(&mut buf, false);
        buf
    }

    /// Inverse transform of an (unnormalized) spectrum; returns the real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex<f64>>) -> Vec<f64> {
        self.fft2(&mut spec, true);
        let norm = 1.0 / (self.nx * self.ny) as f64;
        spec.iter().map(|c| c.re * norm).collect()
    }

    fn minus_q_sq(&self, ix: usize, iy: usize) -> f64 {
        -(self.qx[ix] * self.qx[ix] + self.qy[iy] * self.qy[iy])
    }

    pub fn laplacian(&self, field: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(field);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                spec[iy * self.nx + ix] *= self.minus_q_sq(ix, iy);
            }
        }
        self.inverse_real(spec)
    }

    fn derivative_pair(&self, spec: &[Complex<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = spec.len();
        let mut dx = vec![Complex::new(0.0, 0.0); n];
        let mut dy = vec![Complex::new(0.0, 0.0); n];
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let idx = iy * self.nx + ix;
                let c = spec[idx];
                // multiply by i*q
                dx[idx] = Complex::new(-c.im * self.qx_d[ix], c.re * self.qx_d[ix]);
                dy[idx] = Complex::new(-c.im * self.qy_d[iy], c.re * self.qy_d[iy]);
            }
        }
        (self.inverse_real(dx), self.inverse_real(dy))
    }

    /// First partials (f_x, f_y).
    pub fn partials(&self, field: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.derivative_pair(&self.forward(field))
    }

    /// Pointwise <grad a, grad b> with respect to the flat background.
    pub fn gradient_inner(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let (ax, ay) = self.derivative_pair(&self.forward(a));
        if std::ptr::eq(a, b) {
            return ax
                .iter()
                .zip(&ay)
                .map(|(&gx, &gy)| gx * gx + gy * gy)
                .collect();
        }
        let (bx, by) = self.derivative_pair(&self.forward(b));
        (0..a.len()).map(|i| ax[i] * bx[i] + ay[i] * by[i]).collect()
    }

    /// Integral of <grad a, grad b> over the background (Parseval form,
    /// consistent with -integral(a * laplacian b)).
    pub fn dirichlet_form(&self, a: &[f64], b: &[f64]) -> f64 {
        let sa = self.forward(a);
        let sb = self.forward(b);
        let mut acc = 0.0;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let idx = iy * self.nx + ix;
                let qq = self.qx[ix] * self.qx[ix] + self.qy[iy] * self.qy[iy];
                acc += qq * (sa[idx].re * sb[idx].re + sa[idx].im * sb[idx].im);
            }
        }
        let n = (self.nx * self.ny) as f64;
        acc * self.lx * self.ly / (n * n)
    }

    /// Mean-zero solution of `laplacian(phi) = source - mean(source)`.
    pub fn solve_poisson(&self, source: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(source);
        spec[0] = Complex::new(0.0, 0.0);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if ix == 0 && iy == 0 {
                    continue;
                }
                let idx = iy * self.nx + ix;
                spec[idx] /= self.minus_q_sq(ix, iy);
            }
        }
        self.inverse_real(spec)
    }

    /// Spectral second partials (f_xx, f_xy, f_yy); the flat background has
    /// no Christoffel terms so these are the covariant background Hessian.
    pub fn hessian(&self, field: &[f64]) -> [Vec<f64>; 3] {
        let spec = self.forward(field);
        let n = spec.len();
        let mut sxx = vec![Complex::new(0.0, 0.0); n];
        let mut sxy = vec![Complex::new(0.0, 0.0); n];
        let mut syy = vec![Complex::new(0.0, 0.0); n];
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let idx = iy * self.nx + ix;
                let c = spec[idx];
                sxx[idx] = c * -(self.qx[ix] * self.qx[ix]);
                syy[idx] = c * -(self.qy[iy] * self.qy[iy]);
                sxy[idx] = c * -(self.qx_d[ix] * self.qy_d[iy]);
            }
        }
        [
            self.inverse_real(sxx),
            self.inverse_real(sxy),
            self.inverse_real(syy),
        ]
    }

    /// 3/2-rule dealiasing: zero every mode with |k_x| > nx/3 or |k_y| > ny/3.
    pub fn dealias(&self, field: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(field);
        let kx_cut = self.nx / 3;
        let ky_cut = self.ny / 3;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let kx = if ix <= self.nx / 2 { ix } else { self.nx - ix };
                let ky = if iy <= self.ny / 2 { iy } else { self.ny - iy };
                if kx > kx_cut || ky > ky_cut {
                    spec[iy * self.nx + ix] = Complex::new(0.0, 0.0);
                }
            }
        }
        self.inverse_real(spec)
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        let hx = self.lx / self.nx as f64;
        let hy = self.ly / self.ny as f64;
        let mut pos = Vec::with_capacity(self.nx * self.ny);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                pos.push([ix as f64 * hx, iy as f64 * hy, 0.0]);
            }
        }
        pos
    }
}
