//! Named, shaped arrays packed into one flat buffer.
//!
//! Both networks keep every trainable value in a [`ParamSet`] so that the
//! optimizer, gradient accumulation and checkpointing all work on a single
//! contiguous slice.

use crate::error::{Error, Result};
use crate::rng::SeedStream;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl ParamSet {
    pub fn zeros<'a>(spec: impl IntoIterator<Item = (&'a str, Vec<usize>)>) -> Self {
        let mut names = Vec::new();
        let mut shapes = Vec::new();
        let mut offsets = Vec::new();
        let mut len = 0;
        for (name, shape) in spec {
            offsets.push(len);
            len += shape.iter().product::<usize>();
            names.push(name.to_owned());
            shapes.push(shape);
        }
        Self {
            names,
            shapes,
            offsets,
            data: vec![0.0; len],
        }
    }

    /// Same layout, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            data: vec![0.0; self.data.len()],
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn n_arrays(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, k: usize) -> &str {
        &self.names[k]
    }

    pub fn shape(&self, k: usize) -> &[usize] {
        &self.shapes[k]
    }

    fn range(&self, k: usize) -> std::ops::Range<usize> {
        let start = self.offsets[k];
        start..start + self.shapes[k].iter().product::<usize>()
    }

    pub fn array(&self, k: usize) -> &[f64] {
        &self.data[self.range(k)]
    }

    pub fn array_mut(&mut self, k: usize) -> &mut [f64] {
        let r = self.range(k);
        &mut self.data[r]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Fills every entry with `uniform(-scale, scale)`.
    pub fn fill_uniform(&mut self, scale: f64, rng: &mut SeedStream) {
        for v in &mut self.data {
            *v = rng.uniform_range(-scale, scale);
        }
    }

    pub fn add_assign(&mut self, other: &ParamSet) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Replaces array `name`, checking its shape against the layout.
    pub fn set_array(&mut self, name: &str, shape: &[usize], values: &[f64]) -> Result<()> {
        let k = self
            .index_of(name)
            .ok_or_else(|| Error::invalid(format!("no array named `{name}`")))?;
        if self.shapes[k] != shape || values.len() != shape.iter().product::<usize>() {
            return Err(Error::invalid(format!(
                "array `{name}` expects shape {:?}, got {shape:?}",
                self.shapes[k]
            )));
        }
        self.array_mut(k).copy_from_slice(values);
        Ok(())
    }
}

/// `out += m * v` for a row-major `rows x cols` matrix.
pub(crate) fn matvec_add(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &m[r * cols..(r + 1) * cols];
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += m^T * v`.
pub(crate) fn matvec_t_add(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * v[r];
        }
    }
}

/// `m += a * b^T`.
pub(crate) fn outer_add(m: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (r, &ar) in a.iter().enumerate() {
        for (x, &bc) in m[r * cols..(r + 1) * cols].iter_mut().zip(b) {
            *x += ar * bc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_offsets() {
        let mut p = ParamSet::zeros([("a", vec![2, 3]), ("b", vec![4])]);
        assert_eq!(p.len(), 10);
        p.array_mut(1).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(&p.data()[6..], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.index_of("b"), Some(1));
        assert!(p.set_array("a", &[3, 2], &[0.0; 6]).is_err());
        p.set_array("a", &[2, 3], &[1.0; 6]).unwrap();
        assert_eq!(p.array(0), &[1.0; 6]);
    }

    #[test]
    fn small_linear_algebra() {
        let m = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut out = [0.0; 2];
        matvec_add(&m, 2, 3, &[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, [-2.0, -2.0]);
        let mut back = [0.0; 3];
        matvec_t_add(&m, 2, 3, &[1.0, 1.0], &mut back);
        assert_eq!(back, [5.0, 7.0, 9.0]);
        let mut g = [0.0; 6];
        outer_add(&mut g, &[1.0, 2.0], &[1.0, 0.0, 3.0]);
        assert_eq!(g, [1.0, 0.0, 3.0, 2.0, 0.0, 6.0]);
    }
}
