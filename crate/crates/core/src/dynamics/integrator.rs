//! Adaptive Dormand–Prince 5(4) integrator for linear complex systems
//! `dy/dt = f(t, y)`.

use faer::c64;

// Butcher tableau (Dormand & Prince 1980).
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Error coefficients: fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegratorError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("integration stopped by the caller at t = {t}")]
    Interrupted { t: f64 },
}

/// Stateful stepper holding the current `(t, y)` and the FSAL derivative.
pub struct Dopri5<F>
where
    F: FnMut(f64, &[c64], &mut [c64]),
{
    rhs: F,
    tol: Tolerances,
    t: f64,
    y: Vec<c64>,
    f0: Vec<c64>,
    h: f64,
    k: [Vec<c64>; 6],
    tmp: Vec<c64>,
    ynew: Vec<c64>,
    pub steps: usize,
    pub rejected: usize,
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[c64], &mut [c64]),
{
    pub fn new(mut rhs: F, t0: f64, y0: Vec<c64>, tol: Tolerances) -> Self {
        let n = y0.len();
        let mut f0 = vec![c64::new(0.0, 0.0); n];
        rhs(t0, &y0, &mut f0);
        let h = initial_step(&y0, &f0, tol);
        let zeros = vec![c64::new(0.0, 0.0); n];
        Self {
            rhs,
            tol,
            t: t0,
            y: y0,
            f0,
            h,
            k: std::array::from_fn(|_| zeros.clone()),
            tmp: zeros.clone(),
            ynew: zeros,
            steps: 0,
            rejected: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[c64] {
        &self.y
    }

    /// Advances exactly to `t_end` with as many accepted steps as needed.
    pub fn advance_to(&mut self, t_end: f64) -> Result<(), IntegratorError> {
        while self.t < t_end {
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let err = self.trial_step(h);
            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.ynew);
                // FSAL: the seventh stage is f(t + h, y_new).
                std::mem::swap(&mut self.f0, &mut self.k[5]);
                self.steps += 1;
            } else {
                self.rejected += 1;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let proposed = h * factor;
            // Keep the natural step when only the final partial step was short.
            if !(last && err <= 1.0 && proposed < self.h) {
                self.h = proposed;
            }
            if self.h < 1e-14 * self.t.abs().max(1.0) {
                return Err(IntegratorError::StepUnderflow { t: self.t });
            }
        }
        Ok(())
    }

    /// Computes a candidate step of size `h` into `self.ynew`; returns the
    /// scaled error norm. Stage 7 lands in `k[5]`.
    fn trial_step(&mut self, h: f64) -> f64 {
        let n = self.y.len();
        let t = self.t;
        let y = &self.y;
        let f0 = &self.f0;
        let [k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;

        for i in 0..n {
            tmp[i] = y[i] + f0[i] * (h * A21);
        }
        (self.rhs)(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + (f0[i] * A31 + k2[i] * A32) * h;
        }
        (self.rhs)(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + (f0[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        (self.rhs)(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + (f0[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        (self.rhs)(t + C5 * h, tmp, k5);
        for i in 0..n {
            tmp[i] =
                y[i] + (f0[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        (self.rhs)(t + h, tmp, k6);
        for i in 0..n {
            self.ynew[i] =
                y[i] + (f0[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        (self.rhs)(t + h, &self.ynew, k7);

        let mut acc = 0.0;
        for i in 0..n {
            let e = (f0[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = self.tol.atol + self.tol.rtol * y[i].norm().max(self.ynew[i].norm());
            acc += e.norm_sqr() / (scale * scale);
        }
        (acc / n as f64).sqrt()
    }
}

fn initial_step(y0: &[c64], f0: &[c64], tol: Tolerances) -> f64 {
    let n = y0.len() as f64;
    let (mut d0, mut d1) = (0.0, 0.0);
    for (y, f) in y0.iter().zip(f0) {
        let sc = tol.atol + tol.rtol * y.norm();
        d0 += y.norm_sqr() / (sc * sc);
        d1 += f.norm_sqr() / (sc * sc);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(0.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_decay_with_rotation() {
        // dy/dt = (-0.3 - 2i) y
        let lambda = c64::new(-0.3, -2.0);
        let mut s = Dopri5::new(
            move |_, y: &[c64], dy: &mut [c64]| dy[0] = lambda * y[0],
            0.0,
            vec![c64::new(1.0, 0.0)],
            Tolerances { rtol: 1e-12, atol: 1e-14 },
        );
        for &t in &[0.5, 1.0, 3.7, 10.0] {
            s.advance_to(t).unwrap();
            let exact = (lambda * t).exp();
            assert_abs_diff_eq!(s.y()[0].re, exact.re, epsilon = 1e-10);
            assert_abs_diff_eq!(s.y()[0].im, exact.im, epsilon = 1e-10);
            assert_eq!(s.t(), t);
        }
    }

    #[test]
    fn fifth_order_convergence() {
        // Fixed steps via huge tolerance: error should scale like h^5.
        let run = |h: f64| {
            let mut s = Dopri5::new(
                |_, y: &[c64], dy: &mut [c64]| dy[0] = c64::new(0.0, -1.0) * y[0],
                0.0,
                vec![c64::new(1.0, 0.0)],
                Tolerances { rtol: 1e6, atol: 1e6 },
            );
            let mut t = 0.0;
            while t < 1.0 - 1e-12 {
                t += h;
                s.h = h;
                s.advance_to(t).unwrap();
            }
            (s.y()[0] - c64::new(0.0, -1.0).exp()).norm()
        };
        let ratio = run(0.1) / run(0.05);
        assert!(ratio > 25.0 && ratio < 45.0, "ratio {ratio}");
    }
}
