//! Quadrature and spectral helpers shared by the startup solver, the singular
//! patch and the perturbation primitive.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed Gauss-Legendre rule mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn parts(&self) -> (&[f64], &[f64]) {
        (&self.nodes, &self.weights)
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> (f64, f64) {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let fc = f(mid);
    let mut kron = fc * GK_WEIGHTS_K[7];
    let mut gauss = fc * GK_WEIGHTS_G[3];
    for (j, (&x, &wk)) in GK_NODES.iter().zip(&GK_WEIGHTS_K).take(7).enumerate() {
        let f1 = f(mid - half * x);
        let f2 = f(mid + half * x);
        kron += wk * (f1 + f2);
        if j % 2 == 1 {
            gauss += GK_WEIGHTS_G[j / 2] * (f1 + f2);
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature with interval bisection.
///
/// Returns `None` when the requested accuracy is not reached within the
/// subdivision budget.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, abs_tol: f64, rel_tol: f64) -> Option<f64> {
    if lo == hi {
        return Some(0.0);
    }
    let mut stack = vec![(lo, hi, gk15(&mut f, lo, hi))];
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut pieces = Vec::new();
    let mut budget = 2000usize;
    while let Some((a, b, (val, err))) = stack.pop() {
        let local_tol = (abs_tol.max(rel_tol * val.abs())) * ((b - a) / (hi - lo)).abs().sqrt();
        if err <= local_tol || budget == 0 || (b - a).abs() < 1e-14 * (hi - lo).abs() {
            if budget == 0 && err > local_tol {
                return None;
            }
            pieces.push(val);
            total_err += err;
            continue;
        }
        budget -= 1;
        let mid = 0.5 * (a + b);
        stack.push((a, mid, gk15(&mut f, a, mid)));
        stack.push((mid, b, gk15(&mut f, mid, b)));
    }
    pieces.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    for p in pieces {
        total += p;
    }
    if !total.is_finite() || total_err > 1e3 * abs_tol.max(rel_tol * total.abs()) {
        return None;
    }
    Some(total)
}

/// Chebyshev-Lobatto points on [0, 1] together with the spectral cumulative
/// integration matrix `Q`, so that `(Q f)_k ≈ ∫_0^{s_k} f(s) ds`.
#[derive(Debug, Clone)]
pub struct ChebyshevUnit {
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
    integration: Vec<f64>,
}

impl ChebyshevUnit {
    pub fn new(m: usize) -> Self {
        assert!(m >= 2, "Chebyshev grid needs at least three points");
        let n = m + 1;
        let nodes: Vec<f64> = (0..n).map(|k| 0.5 * (1.0 - (PI * k as f64 / m as f64).cos())).collect();
        let mut weights: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        weights[0] *= 0.5;
        weights[m] *= 0.5;

        // cos(j k pi / m) table, j in 0..=m+1.
        let cos_table = |j: usize, k: usize| (PI * ((j * k) % (2 * m)) as f64 / m as f64).cos();

        let mut integration = vec![0.0; n * n];
        let mut coeffs = vec![0.0; m + 3];
        let mut anti = vec![0.0; m + 2];
        for col in 0..n {
            // Chebyshev coefficients of the unit vector e_col.
            for (j, c) in coeffs.iter_mut().enumerate().take(n) {
                let end = if col == 0 || col == m { 0.5 } else { 1.0 };
                let mut a = 2.0 / m as f64 * end * cos_table(j, col);
                if j == 0 || j == m {
                    a *= 0.5;
                }
                *c = a;
            }
            coeffs[m + 1] = 0.0;
            coeffs[m + 2] = 0.0;
            anti.iter_mut().for_each(|b| *b = 0.0);
            anti[1] = coeffs[0] - 0.5 * coeffs[2];
            for j in 2..=m + 1 {
                anti[j] = (coeffs[j - 1] - coeffs[j + 1]) / (2.0 * j as f64);
            }
            let at_one: f64 = anti.iter().sum();
            for row in 0..n {
                // x_row = cos(row pi / m); s = (1 - x)/2, so ∫_0^s f ds = (P(1) - P(x))/2.
                let mut p = 0.0;
                for (j, b) in anti.iter().enumerate() {
                    p += b * cos_table(j, row);
                }
                integration[row * n + col] = 0.5 * (at_one - p);
            }
        }
        Self {
            nodes,
            weights,
            integration,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cumulative integrals over [0, s_k] of the sampled function, scaled by
    /// the physical interval length.
    pub fn cumulative(&self, values: &[f64], length: f64) -> Vec<f64> {
        let n = self.len();
        debug_assert_eq!(values.len(), n);
        (0..n)
            .map(|row| {
                let r = &self.integration[row * n..(row + 1) * n];
                length * r.iter().zip(values).map(|(q, f)| q * f).sum::<f64>()
            })
            .collect()
    }

    /// Barycentric interpolation at `s` (unit coordinates).
    pub fn interpolate(&self, values: &[f64], s: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((x, w), f) in self.nodes.iter().zip(&self.weights).zip(values) {
            let d = s - x;
            if d == 0.0 {
                return *f;
            }
            let c = w / d;
            num += c * f;
            den += c;
        }
        num / den
    }
}
