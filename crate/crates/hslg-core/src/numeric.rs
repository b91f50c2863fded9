//! Small numerical kernels shared across modules: stable log-sum-exp,
//! a streaming variant, and an exactly-decomposable sum of positive terms.

/// log(e^a + e^b) without overflow; handles -inf operands.
pub fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log Σ e^{x_i} over a slice; -inf for an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Online log-sum-exp accumulator: feeds exponents one at a time, reports the
/// running log-sum at any point (used to checkpoint soft-walk weights at
/// several lengths in one pass).
#[derive(Clone, Copy, Debug)]
pub struct StreamingLse {
    max: f64,
    sum: f64,
}

impl StreamingLse {
    pub fn new() -> Self {
        StreamingLse { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

impl Default for StreamingLse {
    fn default() -> Self {
        Self::new()
    }
}

/// Sum of nonnegative terms on a shared power-of-two grid. Each term is
/// rounded to a multiple of the quantum, after which every subset sum is exact
/// integer arithmetic — so a prefix sum plus the complementary suffix sum
/// reassociates to the total bit-for-bit.
#[derive(Clone, Copy, Debug)]
pub struct QuantizedSum {
    quantum: f64,
}

impl QuantizedSum {
    /// Quantum for terms bounded by `max_term`, at most `count` of them.
    /// Quantized integer magnitudes stay below 2^53, so sums never round.
    pub fn for_terms(max_term: f64, count: usize) -> Self {
        if !max_term.is_finite() || max_term <= 0.0 {
            return QuantizedSum { quantum: 0.0 };
        }
        let headroom = (count.max(1) as f64).log2().ceil() as i32 + 1;
        let e = max_term.log2().floor() as i32;
        QuantizedSum { quantum: exp2i(e - 52 + headroom) }
    }

    /// Sum the terms produced by the iterator; +inf terms yield +inf.
    pub fn sum(&self, terms: impl Iterator<Item = f64>) -> f64 {
        if self.quantum == 0.0 {
            for t in terms {
                if t == f64::INFINITY {
                    return f64::INFINITY;
                }
            }
            return 0.0;
        }
        let mut acc = 0.0f64;
        for t in terms {
            if t == f64::INFINITY {
                return f64::INFINITY;
            }
            acc += (t / self.quantum).round();
        }
        acc * self.quantum
    }
}

fn exp2i(e: i32) -> f64 {
    f64::from_bits(((e + 1023).clamp(1, 2046) as u64) << 52)
}

/// Piecewise-linear inverse CDF over a grid from (unnormalized) nonnegative
/// density values; trapezoid cell masses. Used by table-backed initial
/// conditions and the chain start distribution.
#[derive(Clone, Debug)]
pub struct GridInverseCdf {
    xs: Vec<f64>,
    cum: Vec<f64>,
}

impl GridInverseCdf {
    /// Build from grid points `xs` (strictly increasing) and density values.
    pub fn new(xs: Vec<f64>, dens: &[f64]) -> Self {
        assert_eq!(xs.len(), dens.len());
        assert!(xs.len() >= 2, "need at least two grid points");
        let mut cum = Vec::with_capacity(xs.len());
        cum.push(0.0);
        for i in 1..xs.len() {
            let m = 0.5 * (dens[i - 1] + dens[i]) * (xs[i] - xs[i - 1]);
            cum.push(cum[i - 1] + m.max(0.0));
        }
        let total = *cum.last().unwrap();
        assert!(total > 0.0 && total.is_finite(), "density table has no mass");
        GridInverseCdf { xs, cum }
    }

    pub fn total_mass(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Quantile of `u` in [0,1).
    pub fn invert(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.total_mass();
        let mut lo = 0usize;
        let mut hi = self.cum.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cum[mid] <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let m = self.cum[hi] - self.cum[lo];
        if m <= 0.0 {
            return self.xs[lo];
        }
        let f = (target - self.cum[lo]) / m;
        self.xs[lo] + f * (self.xs[hi] - self.xs[lo])
    }

    /// CDF value at `x` (linear inside cells, clamped outside the grid).
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let f = (x - self.xs[lo]) / (self.xs[hi] - self.xs[lo]);
        (self.cum[lo] + f * (self.cum[hi] - self.cum[lo])) / self.total_mass()
    }
}
