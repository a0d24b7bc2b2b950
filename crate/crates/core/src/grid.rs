//! Dense row-major `frames × bins` grids.

use std::io::Write;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    frames: usize,
    bins: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(frames: usize, bins: usize, value: T) -> Self {
        Self {
            frames,
            bins,
            data: vec![value; frames * bins],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(frames: usize, bins: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != frames * bins {
            return Err(Error::LengthMismatch(frames * bins, data.len()));
        }
        Ok(Self { frames, bins, data })
    }

    pub fn from_fn(frames: usize, bins: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(frames * bins);
        for t in 0..frames {
            for k in 0..bins {
                data.push(f(t, k));
            }
        }
        Self { frames, bins, data }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.bins)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [T] {
        &mut self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            frames: self.frames,
            bins: self.bins,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Elementwise combination of two equally shaped grids.
    pub fn zip_map<U, V>(&self, other: &Grid<U>, mut f: impl FnMut(&T, &U) -> V) -> Result<Grid<V>> {
        self.ensure_shape(other.shape())?;
        Ok(Grid {
            frames: self.frames,
            bins: self.bins,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn ensure_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.shape() != other {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other,
            });
        }
        Ok(())
    }
}

impl<T: std::fmt::Display> Grid<T> {
    /// CSV with one row per frame and one column per bin.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for t in 0..self.frames {
            let line: Vec<String> = self.row(t).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    fn index(&self, (t, k): (usize, usize)) -> &T {
        assert!(k < self.bins, "bin {k} out of range");
        &self.data[t * self.bins + k]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    fn index_mut(&mut self, (t, k): (usize, usize)) -> &mut T {
        assert!(k < self.bins, "bin {k} out of range");
        &mut self.data[t * self.bins + k]
    }
}
