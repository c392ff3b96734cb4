//! Dormand-Prince 5(4) pair with the standard continuous extension.

pub type State = [f64; 2];

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

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Result of one trial step. `None` from the right-hand side aborts the step.
#[derive(Debug, Clone)]
pub struct TrialStep {
    pub y1: State,
    /// Derivative at the end point (first stage of the next step).
    pub k7: State,
    pub err: State,
    pub dense: DenseSegment,
}

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// One Dormand-Prince step from `(t, y)` with first stage `k1`.
pub fn trial_step<F>(rhs: &mut F, t: f64, y: &State, k1: &State, h: f64) -> Option<TrialStep>
where
    F: FnMut(f64, &State) -> Option<State>,
{
    let y2 = axpy(y, h, &[(A21, k1)]);
    let k2 = rhs(t + C2 * h, &y2)?;
    let y3 = axpy(y, h, &[(A31, k1), (A32, &k2)]);
    let k3 = rhs(t + C3 * h, &y3)?;
    let y4 = axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]);
    let k4 = rhs(t + C4 * h, &y4)?;
    let y5 = axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
    let k5 = rhs(t + C5 * h, &y5)?;
    let y6 = axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
    let k6 = rhs(t + h, &y6)?;
    let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = rhs(t + h, &y1)?;

    let mut err = [0.0; 2];
    let mut rcont = [[0.0; 5]; 2];
    for i in 0..2 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let ydiff = y1[i] - y[i];
        let bspl = h * k1[i] - ydiff;
        rcont[i] = [
            y[i],
            ydiff,
            bspl,
            ydiff - h * k7[i] - bspl,
            h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]),
        ];
    }
    Some(TrialStep {
        y1,
        k7,
        err,
        dense: DenseSegment { t0: t, h, rcont },
    })
}

/// Continuous extension of an accepted step on `[t0, t0 + h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment {
    t0: f64,
    h: f64,
    rcont: [[f64; 5]; 2],
}

impl DenseSegment {
    /// Cubic Hermite segment from end values and derivatives.
    pub fn hermite(t0: f64, t1: f64, y0: State, y1: State, dy0: State, dy1: State) -> Self {
        let h = t1 - t0;
        let mut rcont = [[0.0; 5]; 2];
        for i in 0..2 {
            let ydiff = y1[i] - y0[i];
            let bspl = h * dy0[i] - ydiff;
            rcont[i] = [y0[i], ydiff, bspl, ydiff - h * dy1[i] - bspl, 0.0];
        }
        Self { t0, h, rcont }
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> State {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut out = [0.0; 2];
        for (o, r) in out.iter_mut().zip(&self.rcont) {
            *o = r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])));
        }
        out
    }
}

/// Fixed-step integration without error control or events.
pub fn fixed_steps<F>(rhs: &mut F, t0: f64, y0: State, t1: f64, steps: usize) -> Option<State>
where
    F: FnMut(f64, &State) -> Option<State>,
{
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    let mut k1 = rhs(t0, &y)?;
    for i in 0..steps {
        let t = t0 + h * i as f64;
        let step = trial_step(rhs, t, &y, &k1, h)?;
        y = step.y1;
        k1 = step.k7;
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_: f64, y: &State) -> Option<State> {
        Some([y[1], -y[0]])
    }

    #[test]
    fn fifth_order_on_harmonic_oscillator() {
        let exact = 2f64.sin();
        let errs: Vec<f64> = [20, 40, 80]
            .iter()
            .map(|&n| (fixed_steps(&mut oscillator, 0.0, [0.0, 1.0], 2.0, n).unwrap()[0] - exact).abs())
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 4.5, "order {order}");
        assert!((errs[1] / errs[2]).log2() > 4.5);
    }

    #[test]
    fn dense_output_error_is_fourth_order_inside_step() {
        let worst = |h: f64| {
            let mut f = oscillator;
            let k1 = f(0.0, &[0.0, 1.0]).unwrap();
            let step = trial_step(&mut f, 0.0, &[0.0, 1.0], &k1, h).unwrap();
            [0.0, 0.25, 0.5, 0.9, 1.0]
                .iter()
                .map(|th| {
                    let t = h * th;
                    let y = step.dense.eval(t);
                    (y[0] - t.sin()).abs().max((y[1] - t.cos()).abs())
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (worst(0.1), worst(0.05));
        assert!(e1 < 1e-8, "{e1}");
        assert!((e1 / e2).log2() > 4.5, "{e1} {e2}");
    }

    #[test]
    fn hermite_reproduces_linear_data() {
        let seg = DenseSegment::hermite(0.0, 1.0, [-1.0, 2.0], [1.0, 2.0], [2.0, 0.0], [2.0, 0.0]);
        assert_eq!(seg.eval(0.5), [0.0, 2.0]);
    }

    #[test]
    fn aborted_stage_propagates() {
        let mut f = |_: f64, y: &State| if y[0] > 0.05 { None } else { Some([y[1], 0.0]) };
        let k1 = f(0.0, &[0.0, 1.0]).unwrap();
        assert!(trial_step(&mut f, 0.0, &[0.0, 1.0], &k1, 0.1).is_none());
    }
}
