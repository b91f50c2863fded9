//! Special functions: log-gamma, digamma, trigamma, regularized incomplete
//! gamma, error function, normal CDF. Thin wrappers over statrs except
//! trigamma, which statrs does not provide.

/// Natural log of the gamma function, x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma: domain error, x = {x}");
    statrs::function::gamma::ln_gamma(x)
}

/// Digamma ψ(x), x > 0.
pub fn digamma(x: f64) -> f64 {
    assert!(x > 0.0, "digamma: domain error, x = {x}");
    statrs::function::gamma::digamma(x)
}

/// Trigamma ψ′(x), x > 0. Recurrence ψ′(x) = ψ′(x+1) + 1/x² up to x ≥ 10,
/// then the asymptotic Bernoulli series; relative error below 1e-12 there.
pub fn trigamma(x: f64) -> f64 {
    assert!(x > 0.0, "trigamma: domain error, x = {x}");
    let mut acc = 0.0;
    let mut y = x;
    while y < 10.0 {
        acc += 1.0 / (y * y);
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    // 1/y + 1/(2y²) + Σ B_{2k} / y^{2k+1}
    let series = inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                + inv2
                    * (-1.0 / 30.0
                        + inv2
                            * (1.0 / 42.0
                                + inv2
                                    * (-1.0 / 30.0
                                        + inv2 * (5.0 / 66.0 + inv2 * (-691.0 / 2730.0 + inv2 * (7.0 / 6.0)))))));
    acc + series
}

/// Regularized lower incomplete gamma P(shape, x); the CDF of a rate-1 Gamma.
pub fn gamma_cdf(shape: f64, x: f64) -> f64 {
    assert!(shape > 0.0, "gamma_cdf: non-positive shape");
    if x <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_lr(shape, x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + statrs::function::erf::erf(x / std::f64::consts::SQRT_2))
}
