//! Uniform cell-centred Fourier grid with periodic FFT differentiation.

use std::sync::{Arc, Mutex};

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::c64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// `[Xmin, Xmax, Ymin, Ymax]`.
    pub bounds: [f64; 4],
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nx: 64,
            ny: 64,
            bounds: [-6.0, 6.0, -6.0, 6.0],
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("ny", self.ny)] {
            if n < 16 || !n.is_power_of_two() {
                return Err(Error::param(name, format!("must be a power of two >= 16, got {n}")));
            }
        }
        let [x0, x1, y0, y1] = self.bounds;
        if !(x1 > x0) || !(y1 > y0) || !self.bounds.iter().all(|b| b.is_finite()) {
            return Err(Error::param("bounds", "need Xmin < Xmax and Ymin < Ymax"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> (f64, f64) {
        let [x0, x1, y0, y1] = self.bounds;
        ((x1 - x0) / self.nx as f64, (y1 - y0) / self.ny as f64)
    }

    /// Same grid translated by `(sx, sy)`.
    pub fn shifted(&self, sx: f64, sy: f64) -> GridSpec {
        let [x0, x1, y0, y1] = self.bounds;
        GridSpec {
            nx: self.nx,
            ny: self.ny,
            bounds: [x0 + sx, x1 + sx, y0 + sy, y1 + sy],
        }
    }
}

pub struct FftScratch {
    tr: Vec<c64>,
    s: Vec<c64>,
}

pub(crate) struct Workspace {
    pub bufs: Vec<Vec<c64>>,
    pub fs: FftScratch,
}

pub struct Grid {
    pub spec: GridSpec,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Cell-centre coordinates.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Angular wavenumbers in FFT order.
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    fx: Arc<dyn Fft<f64>>,
    fxi: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    fyi: Arc<dyn Fft<f64>>,
    scratch_len: usize,
    pool: Mutex<Vec<Workspace>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

impl Clone for Grid {
    fn clone(&self) -> Self {
        Grid::new(self.spec).expect("spec already validated")
    }
}

fn wavenumbers(n: usize, d: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / (n as f64 * d);
    (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            base * m
        })
        .collect()
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Grid> {
        spec.validate()?;
        let (dx, dy) = spec.spacing();
        let [x0, _, y0, _] = spec.bounds;
        let x = (0..spec.nx).map(|k| x0 + (k as f64 + 0.5) * dx).collect();
        let y = (0..spec.ny).map(|k| y0 + (k as f64 + 0.5) * dy).collect();
        let mut planner = FftPlanner::new();
        let fx = planner.plan_fft_forward(spec.nx);
        let fxi = planner.plan_fft_inverse(spec.nx);
        let fy = planner.plan_fft_forward(spec.ny);
        let fyi = planner.plan_fft_inverse(spec.ny);
        let scratch_len = [&fx, &fxi, &fy, &fyi]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Ok(Grid {
            spec,
            nx: spec.nx,
            ny: spec.ny,
            dx,
            dy,
            x,
            y,
            kx: wavenumbers(spec.nx, dx),
            ky: wavenumbers(spec.ny, dy),
            fx,
            fxi,
            fy,
            fyi,
            scratch_len,
            pool: Mutex::new(Vec::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of `(ix, iy)`; rows run along X.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        [self.x[idx % self.nx], self.y[idx / self.nx]]
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Largest |k| along each axis.
    pub fn k_max(&self) -> [f64; 2] {
        [std::f64::consts::PI / self.dx, std::f64::consts::PI / self.dy]
    }

    pub(crate) fn workspace(&self, nbufs: usize) -> Workspace {
        let mut ws = self.pool.lock().unwrap().pop().unwrap_or(Workspace {
            bufs: Vec::new(),
            fs: self.fft_scratch(),
        });
        while ws.bufs.len() < nbufs {
            ws.bufs.push(vec![c64::new(0.0, 0.0); self.len()]);
        }
        ws
    }

    pub fn fft_scratch(&self) -> FftScratch {
        FftScratch {
            tr: vec![c64::new(0.0, 0.0); self.len()],
            s: vec![c64::new(0.0, 0.0); self.scratch_len],
        }
    }

    pub(crate) fn release(&self, ws: Workspace) {
        self.pool.lock().unwrap().push(ws);
    }

    fn transform(&self, buf: &mut [c64], fs: &mut FftScratch, forward: bool) {
        let (n_x, n_y) = (self.nx, self.ny);
        let (fx, fy) = if forward {
            (&self.fx, &self.fy)
        } else {
            (&self.fxi, &self.fyi)
        };
        fx.process_with_scratch(buf, &mut fs.s[..fx.get_inplace_scratch_len()]);
        // columns: transpose, transform rows of length ny, transpose back
        let tr = &mut fs.tr;
        for iy in 0..n_y {
            for ix in 0..n_x {
                tr[ix * n_y + iy] = buf[iy * n_x + ix];
            }
        }
        fy.process_with_scratch(tr, &mut fs.s[..fy.get_inplace_scratch_len()]);
        for iy in 0..n_y {
            for ix in 0..n_x {
                buf[iy * n_x + ix] = tr[ix * n_y + iy];
            }
        }
    }

    /// Unnormalized forward 2D FFT in place.
    pub fn fft(&self, buf: &mut [c64], fs: &mut FftScratch) {
        self.transform(buf, fs, true);
    }

    /// Inverse 2D FFT in place including the 1/(nx ny) factor.
    pub fn ifft(&self, buf: &mut [c64], fs: &mut FftScratch) {
        self.transform(buf, fs, false);
        let s = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    /// Kinetic multiplier `(kx^2 + ky^2)/2` in FFT order, Nyquist included.
    pub fn kinetic_multiplier(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.len()];
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                t[self.index(ix, iy)] = 0.5 * (self.kx[ix].powi(2) + self.ky[iy].powi(2));
            }
        }
        t
    }

    /// First-derivative wavenumbers with the Nyquist mode zeroed, so the
    /// discrete derivative is a real antisymmetric matrix.
    pub fn derivative_wavenumbers(&self) -> (Vec<f64>, Vec<f64>) {
        let mut kx = self.kx.clone();
        let mut ky = self.ky.clone();
        kx[self.nx / 2] = 0.0;
        ky[self.ny / 2] = 0.0;
        (kx, ky)
    }

    /// Mask of cells on one side of `a X + b Y + c0 < 0`, by cell centre.
    pub fn half_plane_mask(&self, line: [f64; 3]) -> Vec<bool> {
        (0..self.len())
            .map(|i| {
                let [x, y] = self.point(i);
                line[0] * x + line[1] * y + line[2] < 0.0
            })
            .collect()
    }
}
