//! Small numeric helpers: Hermite recurrences, factorial tables, log-space sums.

/// Physicists' Hermite polynomials `H_0(x) ..= H_n(x)`.
pub fn hermite(x: f64, n: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(1.0);
    if n >= 1 {
        h.push(2.0 * x);
    }
    for k in 1..n {
        let next = 2.0 * x * h[k] - 2.0 * k as f64 * h[k - 1];
        h.push(next);
    }
    h
}

/// `H_d(x) / √(d!)` for `d = 0..=n`, via the normalized recurrence
/// `g_{d+1} = (2x g_d − 2√d g_{d−1}) / √(d+1)`, which never forms `d!`.
pub fn scaled_hermite(x: f64, n: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(n + 1);
    g.push(1.0);
    if n >= 1 {
        g.push(2.0 * x);
    }
    for d in 1..n {
        let df = d as f64;
        let next = (2.0 * x * g[d] - 2.0 * df.sqrt() * g[d - 1]) / (df + 1.0).sqrt();
        g.push(next);
    }
    g
}

/// `x^d / √(d!)` for `d = 0..=n`.
pub fn scaled_powers(x: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n + 1);
    w.push(1.0);
    for d in 1..=n {
        let prev = w[d - 1];
        w.push(prev * x / (d as f64).sqrt());
    }
    w
}

/// `ln(d!)` for `d = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(0.0);
    for d in 1..=n {
        t.push(t[d - 1] + (d as f64).ln());
    }
    t
}

/// `ln(e^a + e^b)`, tolerating `-inf`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Running `ln Σ e^{t_i}` that stays finite when individual terms overflow.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    pivot: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self {
            pivot: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSum {
    pub fn add(&mut self, ln_term: f64) {
        if ln_term == f64::NEG_INFINITY {
            return;
        }
        if ln_term > self.pivot {
            self.scaled = self.scaled * (self.pivot - ln_term).exp() + 1.0;
            self.pivot = ln_term;
        } else {
            self.scaled += (ln_term - self.pivot).exp();
        }
    }

    pub fn ln(&self) -> f64 {
        if self.pivot == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.pivot + self.scaled.ln()
        }
    }
}
