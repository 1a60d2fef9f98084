//! Fixed-capacity sliding window over IMU frames and conversion to the
//! matrix form the predictor consumes.
//!
//! The network input for one prediction is the last `n` IMU frames as an
//! `n x d` matrix (`d = 6 * m` channels), rows ordered oldest to newest so
//! row `n - 1` is the most recent frame.

use ndarray::Array2;
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// FIFO of the most recent `n` IMU frames with a fixed channel count.
#[derive(Clone, Debug)]
pub struct SlidingWindow {
    capacity: usize,
    dim: usize,
    frames: VecDeque<Vec<f64>>,
}

impl SlidingWindow {
    /// A window holding `capacity` frames of `dim` channels each.
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("window capacity must be at least 1".into()));
        }
        if dim == 0 {
            return Err(Error::Config("frame dimension must be at least 1".into()));
        }
        Ok(SlidingWindow {
            capacity,
            dim,
            frames: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// True once the window holds `capacity` frames.
    pub fn is_full(&self) -> bool {
        self.frames.len() == self.capacity
    }

    /// Append the newest frame, evicting the oldest when full.
    pub fn push(&mut self, frame: &[f64]) -> Result<()> {
        if frame.len() != self.dim {
            return Err(Error::Dimension(format!(
                "pushed frame has {} channels, window expects {}",
                frame.len(),
                self.dim
            )));
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame.to_vec());
        Ok(())
    }

    /// Drop all frames but keep capacity and dimension.
    pub fn clear(&mut self) {
        self.frames.clear();
    }

    /// The window contents as an `n x d` matrix, oldest frame first.
    /// Fails until the window is full: the predictor never runs on a
    /// partially warmed-up history.
    pub fn matrix(&self) -> Result<Array2<f64>> {
        if !self.is_full() {
            return Err(Error::InsufficientHistory {
                have: self.frames.len(),
                need: self.capacity,
            });
        }
        let mut out = Array2::zeros((self.capacity, self.dim));
        for (i, frame) in self.frames.iter().enumerate() {
            out.row_mut(i)
                .iter_mut()
                .zip(frame.iter())
                .for_each(|(dst, src)| *dst = *src);
        }
        Ok(out)
    }
}

/// Stack `frames` (oldest first) into an `n x d` matrix; row `n - 1` is the
/// newest frame. All frames must have `dim` channels.
pub fn frames_to_matrix(frames: &[Vec<f64>], dim: usize) -> Result<Array2<f64>> {
    for (i, f) in frames.iter().enumerate() {
        if f.len() != dim {
            return Err(Error::Dimension(format!(
                "frame {i} has {} channels, expected {dim}",
                f.len()
            )));
        }
    }
    let mut out = Array2::zeros((frames.len(), dim));
    for (i, f) in frames.iter().enumerate() {
        out.row_mut(i)
            .iter_mut()
            .zip(f.iter())
            .for_each(|(dst, src)| *dst = *src);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_zero_capacity_or_dim() {
        assert!(SlidingWindow::new(0, 3).is_err());
        assert!(SlidingWindow::new(3, 0).is_err());
    }

    #[test]
    fn rejects_wrong_dimension_push() {
        let mut w = SlidingWindow::new(2, 3).unwrap();
        assert!(w.push(&[1.0, 2.0]).is_err());
        assert!(w.push(&[1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn matrix_requires_full_window() {
        let mut w = SlidingWindow::new(3, 2).unwrap();
        w.push(&[1.0, 2.0]).unwrap();
        match w.matrix() {
            Err(Error::InsufficientHistory { have, need }) => {
                assert_eq!((have, need), (1, 3));
            }
            other => panic!("expected InsufficientHistory, got {other:?}"),
        }
    }

    #[test]
    fn eviction_keeps_newest_and_orders_rows() {
        let mut w = SlidingWindow::new(3, 2).unwrap();
        for k in 0..5 {
            let k = k as f64;
            w.push(&[k, 10.0 + k]).unwrap();
        }
        // Pushed frames 0..4 into capacity 3: rows must be frames 2, 3, 4.
        let m = w.matrix().unwrap();
        assert_eq!(m.shape(), &[3, 2]);
        assert_eq!(m.row(0).to_vec(), vec![2.0, 12.0]);
        assert_eq!(m.row(1).to_vec(), vec![3.0, 13.0]);
        assert_eq!(m.row(2).to_vec(), vec![4.0, 14.0]); // newest in row n-1
    }

    #[test]
    fn frames_to_matrix_matches_window() {
        let frames: Vec<Vec<f64>> = (0..4).map(|k| vec![k as f64, -(k as f64)]).collect();
        let m = frames_to_matrix(&frames, 2).unwrap();
        let mut w = SlidingWindow::new(4, 2).unwrap();
        for f in &frames {
            w.push(f).unwrap();
        }
        assert_eq!(m, w.matrix().unwrap());
    }

    #[test]
    fn frames_to_matrix_rejects_ragged_input() {
        let frames = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(frames_to_matrix(&frames, 2).is_err());
    }

    proptest! {
        /// After k >= n pushes the window holds exactly the last n frames,
        /// in push order.
        #[test]
        fn window_holds_last_n(
            n in 1usize..8,
            extra in 0usize..20,
            dim in 1usize..5,
        ) {
            let total = n + extra;
            let mut w = SlidingWindow::new(n, dim).unwrap();
            let frames: Vec<Vec<f64>> = (0..total)
                .map(|k| (0..dim).map(|c| (k * 10 + c) as f64).collect())
                .collect();
            for f in &frames {
                w.push(f).unwrap();
            }
            let m = w.matrix().unwrap();
            for i in 0..n {
                prop_assert_eq!(m.row(i).to_vec(), frames[total - n + i].clone());
            }
        }
    }
}
