//! n-dimensional complex FFT assembled from 1-d passes.

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::{ArrayD, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalized forward transform along every axis.
pub fn fft_nd(data: &mut ArrayD<Complex<f64>>) {
    transform(data, false);
}

/// Unnormalized inverse transform along every axis. Forward followed by
/// inverse multiplies the data by the total number of points.
pub fn ifft_nd(data: &mut ArrayD<Complex<f64>>) {
    transform(data, true);
}

fn transform(data: &mut ArrayD<Complex<f64>>, inverse: bool) {
    for ax in 0..data.ndim() {
        let len = data.len_of(Axis(ax));
        if len == 1 {
            continue;
        }
        let fft = plan(len, inverse);
        let mut scratch = vec![Complex::default(); len];
        for mut lane in data.lanes_mut(Axis(ax)) {
            for (s, v) in scratch.iter_mut().zip(lane.iter()) {
                *s = *v;
            }
            fft.process(&mut scratch);
            for (v, s) in lane.iter_mut().zip(scratch.iter()) {
                *v = *s;
            }
        }
    }
}
