//! Time propagation of vectorized master equations by matrix exponentials.

use crate::linalg::{self, CMat, C64};

/// `e^{Lt}` for a generator `l`.
pub fn propagator(l: &CMat, t: f64) -> CMat {
    linalg::expm(&linalg::scaled(l, linalg::re(t)))
}

/// `e^{Lt} v`.
pub fn evolve(l: &CMat, v: &[C64], t: f64) -> Vec<C64> {
    linalg::apply(&propagator(l, t), v)
}

/// Values of `e^{Lt} v` on an ascending grid, stepping with one exponential
/// per distinct increment.
pub fn evolve_grid(l: &CMat, v: &[C64], times: &[f64]) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(times.len());
    let mut cur = v.to_vec();
    let mut t_prev = 0.0;
    let mut cached: Option<(f64, CMat)> = None;
    for &t in times {
        let dt = t - t_prev;
        if dt != 0.0 {
            let reuse = matches!(&cached, Some((h, _)) if (h - dt).abs() <= 1e-14 * dt.abs());
            if !reuse {
                cached = Some((dt, propagator(l, dt)));
            }
            cur = linalg::apply(&cached.as_ref().unwrap().1, &cur);
        }
        out.push(cur.clone());
        t_prev = t;
    }
    out
}

/// Long-time limit `lim_{t→∞} e^{Lt} v`, by repeated squaring of `e^{L t0}`.
///
/// Returns the propagated vector and the time reached.
pub fn long_time_limit(l: &CMat, v: &[C64], t0: f64, t_max: f64, tol: f64) -> (Vec<C64>, f64) {
    let mut p = propagator(l, t0);
    let mut t = t0;
    let mut cur = linalg::apply(&p, v);
    while t < t_max {
        p = &p * &p;
        t *= 2.0;
        let next = linalg::apply(&p, v);
        let diff = next
            .iter()
            .zip(&cur)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        cur = next;
        if diff < tol {
            break;
        }
    }
    (cur, t)
}
