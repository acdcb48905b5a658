//! Per-step record of the Riemann fields on a spatial window, read by the
//! characteristic tracer.

use super::Grid1D;
use crate::error::{Error, Result};
use crate::kernels::Damping;

#[derive(Debug, Clone)]
pub struct History {
    times: Vec<f64>,
    i0: usize,
    width: usize,
    x_first: f64,
    dx: f64,
    r: Vec<f64>,
    l: Vec<f64>,
    damping: Damping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    R,
    L,
}

impl History {
    /// Records the grid nodes inside `[lo, hi]`.
    pub fn new(g: &Grid1D, lo: f64, hi: f64, damping: Damping) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Invalid(format!("empty history window [{lo}, {hi}]")));
        }
        let i0 = (0..g.n).find(|&i| g.x(i) >= lo).unwrap_or(g.n);
        let i1 = (0..g.n).rev().find(|&i| g.x(i) <= hi).unwrap_or(0);
        if i1 < i0 + 3 {
            return Err(Error::Invalid(format!(
                "history window [{lo}, {hi}] holds fewer than 4 grid points"
            )));
        }
        Ok(Self {
            times: vec![],
            i0,
            width: i1 - i0 + 1,
            x_first: g.x(i0),
            dx: g.dx,
            r: vec![],
            l: vec![],
            damping,
        })
    }

    pub(crate) fn push(&mut self, t: f64, r: &[f64], l: &[f64]) {
        self.times.push(t);
        self.r.extend_from_slice(&r[self.i0..self.i0 + self.width]);
        self.l.extend_from_slice(&l[self.i0..self.i0 + self.width]);
    }

    pub fn damping(&self) -> Damping {
        self.damping
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> usize {
        self.times.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_lo(&self) -> f64 {
        self.x_first
    }

    pub fn x_hi(&self) -> f64 {
        self.x_first + (self.width - 1) as f64 * self.dx
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_lo() && x <= self.x_hi()
    }

    fn row(&self, field: Field, frame: usize) -> &[f64] {
        let data = match field {
            Field::R => &self.r,
            Field::L => &self.l,
        };
        &data[frame * self.width..(frame + 1) * self.width]
    }

    // Cell index and fraction for x; None outside the window.
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let s = (x - self.x_first) / self.dx;
        let j = (s.floor() as usize).min(self.width - 2);
        Some((j, s - j as f64))
    }

    /// Linear interpolation of a field at `x` in a recorded frame.
    pub fn sample(&self, field: Field, frame: usize, x: f64) -> Option<f64> {
        let (j, a) = self.locate(x)?;
        let row = self.row(field, frame);
        Some(row[j] * (1.0 - a) + row[j + 1] * a)
    }

    /// `eta = r - l` at `x` in a recorded frame.
    pub fn eta(&self, frame: usize, x: f64) -> Option<f64> {
        Some(self.sample(Field::R, frame, x)? - self.sample(Field::L, frame, x)?)
    }

    /// Spatial derivative of a field at `x`: centered differences at the
    /// nodes, then linear interpolation.
    pub fn derivative(&self, field: Field, frame: usize, x: f64) -> Option<f64> {
        let (j, a) = self.locate(x)?;
        let row = self.row(field, frame);
        let m = self.width;
        let d = |i: usize| {
            if i == 0 {
                (row[1] - row[0]) / self.dx
            } else if i == m - 1 {
                (row[m - 1] - row[m - 2]) / self.dx
            } else {
                (row[i + 1] - row[i - 1]) / (2.0 * self.dx)
            }
        };
        Some(d(j) * (1.0 - a) + d(j + 1) * a)
    }
}
