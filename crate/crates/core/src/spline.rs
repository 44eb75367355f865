//! Natural cubic spline interpolation.

/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    /// Panics unless there are at least two knots with strictly increasing `xs`.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 2, "spline needs two knots");
        assert!(xs.windows(2).all(|w| w[0] < w[1]), "knots must increase");
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for the interior second derivatives
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            // Thomas algorithm; sub-diagonal entry i equals h_{i}, i.e. upper[i-1]
            for i in 1..k {
                let w = upper[i - 1] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Self { xs, ys, m }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let seg = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        self.eval_segment(seg, x)
    }

    /// Evaluate at `0, 1, ..., len-1`.
    pub fn sample_integers(&self, len: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        let mut seg = 0;
        let last = self.xs.len() - 2;
        for t in 0..len {
            let x = t as f64;
            while seg < last && x > self.xs[seg + 1] {
                seg += 1;
            }
            out.push(self.eval_segment(seg, x));
        }
        out
    }

    fn eval_segment(&self, i: usize, x: f64) -> f64 {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}
