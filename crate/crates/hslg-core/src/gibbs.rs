//! Gibbs measures on finite colored-edge domains over the lattice
//! {(i, j): i ≥ 1, j ≥ 1} (i = row, j = position within the row; odd
//! positions carry the walk values, even positions the half-integer bonds).
//!
//! Every edge (v₁ → v₂, color) contributes weight W_color(u_{v₁} − u_{v₂})
//! with W_color(x) = exp(slope·x − e^x); the slope is θ (Blue), 0 (Black),
//! α (Gray), θ+α (Yellow). Edge generation, per vertex acting as tail:
//!   - position 1: one edge to (i, 2); Blue from odd rows, Yellow from even;
//!   - odd position j ≥ 3: Blue to (i, j−1) and (i, j+1);
//!   - even position j: edges up to (i−1, j−1) and (i−1, j+1) when row
//!     i−1 ≥ 1; Gray when the target is an odd row's position 1, else Black.
//! A boundary value −∞ is legal only as the tail of a Black edge (the
//! weight degenerates to 1, so the edge is dropped).
//!
//! Sampling is heat-bath with an exact numeric inverse CDF, one uniform per
//! vertex in a fixed sweep order, which makes translation equivariance and
//! the monotone grand coupling pathwise properties rather than statistical
//! ones. States are stored relative to the anchor (the lexicographically
//! smallest finite boundary vertex), so runs whose boundaries differ by a
//! constant consume identical randomness on identical relative data.

use crate::distributions::{sample_f_theta, PolymerParams};
use crate::rng::{Gen, RngStream};
use crate::softwalks::{log_w, TwoWalkPath, WeightedValues};
use crate::special::ln_gamma;
use crate::stats::{ess, split_rhat};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

pub type Vertex = (i64, i64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeColor {
    Blue,
    Black,
    Gray,
    Yellow,
}

impl EdgeColor {
    pub fn slope(self, theta: f64, alpha: f64) -> f64 {
        match self {
            EdgeColor::Blue => theta,
            EdgeColor::Black => 0.0,
            EdgeColor::Gray => alpha,
            EdgeColor::Yellow => theta + alpha,
        }
    }
}

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("interior must be nonempty")]
    EmptyInterior,
    #[error("vertex {0:?} is both interior and boundary")]
    InteriorBoundaryOverlap(Vertex),
    #[error("edge endpoint {0:?} is neither interior nor boundary")]
    MissingVertex(Vertex),
    #[error("boundary value at {0:?} must be finite or -inf")]
    NonFiniteBoundary(Vertex),
    #[error("-inf at {0:?} is the tail of a non-Black edge")]
    NegInfNotBlackTail(Vertex),
    #[error("-inf at {0:?} is the head of an edge")]
    NegInfAtHead(Vertex),
    #[error("conditional at {0:?} is not normalizable (check edge orientation/slopes)")]
    NotNormalizable(Vertex),
    #[error("boundary must cover the domain exactly; missing {missing:?}, extra {extra:?}")]
    BoundaryCoverage { missing: Vec<Vertex>, extra: Vec<Vertex> },
    #[error("boundary key sets differ (replacement must cover the same vertices)")]
    BoundaryKeysDiffer,
    #[error("expected {expected} boundary values, got {got}")]
    BoundaryCount { expected: usize, got: usize },
    #[error("lattice index out of range at {0:?} (need i ≥ 1, j ≥ 1)")]
    BadIndex(Vertex),
    #[error("bad sentinel {0:?} (only \"-inf\" is recognized)")]
    BadSentinel(String),
    #[error("boundary replacement changes the -inf pattern at {0:?}")]
    SentinelPatternChanged(Vertex),
}

#[derive(Debug, Error)]
pub enum GibbsError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("coupling order violated at {vertex:?} on sweep {sweep}")]
    OrderViolated { vertex: Vertex, sweep: u64 },
    #[error("split-Rhat for observable {vertex:?} is {value:.4} (limit 1.05)")]
    Rhat { vertex: Vertex, value: f64 },
}

#[derive(Clone, Copy, Debug)]
enum Other {
    Interior(usize),
    /// Boundary value minus the anchor value.
    BoundaryRel(f64),
}

#[derive(Clone, Copy, Debug)]
struct Incident {
    incoming: bool,
    slope: f64,
    other: Other,
}

/// A validated Gibbs domain: interior vertices in sweep order, boundary
/// values, kept colored edges, and the compiled per-vertex incidence.
#[derive(Clone, Debug)]
pub struct GibbsDomain {
    interior: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    boundary: BTreeMap<Vertex, f64>,
    edges: Vec<(Vertex, Vertex, EdgeColor)>,
    theta: f64,
    alpha: f64,
    anchor_value: f64,
    incident: Vec<Vec<Incident>>,
}

impl GibbsDomain {
    pub fn new(
        mut interior: Vec<Vertex>,
        boundary: BTreeMap<Vertex, f64>,
        edges: Vec<(Vertex, Vertex, EdgeColor)>,
        theta: f64,
        alpha: f64,
    ) -> Result<Self, DomainError> {
        interior.sort_unstable();
        interior.dedup();
        if interior.is_empty() {
            return Err(DomainError::EmptyInterior);
        }
        for v in &interior {
            if boundary.contains_key(v) {
                return Err(DomainError::InteriorBoundaryOverlap(*v));
            }
        }
        for (v, val) in &boundary {
            if val.is_nan() || *val == f64::INFINITY {
                return Err(DomainError::NonFiniteBoundary(*v));
            }
        }
        let index: HashMap<Vertex, usize> =
            interior.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let anchor_value = boundary
            .iter()
            .find(|(_, val)| val.is_finite())
            .map(|(_, val)| *val)
            .unwrap_or(0.0);
        let mut kept = Vec::new();
        for (tail, head, color) in edges {
            let tail_int = index.contains_key(&tail);
            let head_int = index.contains_key(&head);
            let tail_b = boundary.get(&tail).copied();
            let head_b = boundary.get(&head).copied();
            if !tail_int && tail_b.is_none() {
                return Err(DomainError::MissingVertex(tail));
            }
            if !head_int && head_b.is_none() {
                return Err(DomainError::MissingVertex(head));
            }
            if head_b == Some(f64::NEG_INFINITY) {
                return Err(DomainError::NegInfAtHead(head));
            }
            if tail_b == Some(f64::NEG_INFINITY) {
                if color != EdgeColor::Black {
                    return Err(DomainError::NegInfNotBlackTail(tail));
                }
                continue; // weight exp(−e^{−∞}) = 1
            }
            if !tail_int && !head_int {
                continue; // both endpoints boundary: constant factor
            }
            kept.push((tail, head, color));
        }
        let mut incident: Vec<Vec<Incident>> = vec![Vec::new(); interior.len()];
        for (tail, head, color) in &kept {
            let slope = color.slope(theta, alpha);
            let as_other = |v: &Vertex| match index.get(v) {
                Some(i) => Other::Interior(*i),
                None => Other::BoundaryRel(boundary[v] - anchor_value),
            };
            if let Some(&ti) = index.get(tail) {
                incident[ti].push(Incident { incoming: false, slope, other: as_other(head) });
            }
            if let Some(&hi) = index.get(head) {
                incident[hi].push(Incident { incoming: true, slope, other: as_other(tail) });
            }
        }
        for (i, inc) in incident.iter().enumerate() {
            let mut a = 0.0;
            let (mut has_in, mut has_out) = (false, false);
            for e in inc {
                if e.incoming {
                    has_in = true;
                    a -= e.slope;
                } else {
                    has_out = true;
                    a += e.slope;
                }
            }
            if !(has_in || a > 0.0) || !(has_out || a < 0.0) {
                return Err(DomainError::NotNormalizable(interior[i]));
            }
        }
        Ok(GibbsDomain { interior, index, boundary, edges: kept, theta, alpha, anchor_value, incident })
    }

    pub fn interior(&self) -> &[Vertex] {
        &self.interior
    }

    pub fn boundary(&self) -> &BTreeMap<Vertex, f64> {
        &self.boundary
    }

    pub fn edges(&self) -> &[(Vertex, Vertex, EdgeColor)] {
        &self.edges
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn anchor_value(&self) -> f64 {
        self.anchor_value
    }

    pub fn interior_index(&self, v: Vertex) -> Option<usize> {
        self.index.get(&v).copied()
    }

    /// Rebuild with new boundary values over the same vertices and edges.
    /// A vertex may not switch between finite and −∞ (edges incident to a
    /// −∞ tail were already dropped and cannot be restored here).
    pub fn with_boundary(&self, boundary: BTreeMap<Vertex, f64>) -> Result<Self, DomainError> {
        if boundary.len() != self.boundary.len()
            || !boundary.keys().eq(self.boundary.keys())
        {
            return Err(DomainError::BoundaryKeysDiffer);
        }
        for (v, old) in &self.boundary {
            if (*old == f64::NEG_INFINITY) != (boundary[v] == f64::NEG_INFINITY) {
                return Err(DomainError::SentinelPatternChanged(*v));
            }
        }
        Self::new(self.interior.clone(), boundary, self.edges.clone(), self.theta, self.alpha)
    }
}

/// All rule edges with `v` as tail (heads may land outside any domain).
fn rule_edges(v: Vertex) -> Vec<(Vertex, EdgeColor)> {
    let (i, j) = v;
    let mut out = Vec::with_capacity(2);
    if j == 1 {
        let color = if i.rem_euclid(2) == 1 { EdgeColor::Blue } else { EdgeColor::Yellow };
        out.push(((i, 2), color));
    } else if j.rem_euclid(2) == 1 {
        out.push(((i, j + 1), EdgeColor::Blue));
        out.push(((i, j - 1), EdgeColor::Blue));
    } else if i - 1 >= 1 {
        let left = (i - 1, j - 1);
        let left_color = if (i - 1).rem_euclid(2) == 1 && j - 1 == 1 {
            EdgeColor::Gray
        } else {
            EdgeColor::Black
        };
        out.push((left, left_color));
        out.push(((i - 1, j + 1), EdgeColor::Black));
    }
    out
}

/// Rule edges restricted to the given vertex universe (induced subgraph).
fn generate_induced(
    interior: &[Vertex],
    boundary: &BTreeMap<Vertex, f64>,
) -> Result<Vec<(Vertex, Vertex, EdgeColor)>, DomainError> {
    let mut universe: HashMap<Vertex, ()> = HashMap::new();
    for v in interior.iter().chain(boundary.keys()) {
        if v.0 < 1 || v.1 < 1 {
            return Err(DomainError::BadIndex(*v));
        }
        universe.insert(*v, ());
    }
    let mut edges = Vec::new();
    for v in interior.iter().chain(boundary.keys()) {
        for (head, color) in rule_edges(*v) {
            if universe.contains_key(&head) {
                edges.push((*v, head, color));
            }
        }
    }
    Ok(edges)
}

/// Two-row strip Φ(T): interior row 1 up to position 2T−2 and row 2 up to
/// 2T−1; boundary pins (1, 2T−1) = a, (2, 2T) = b and the −∞ floor row 3.
pub fn build_phi(
    t: usize,
    a: f64,
    b: f64,
    params: &PolymerParams,
) -> Result<GibbsDomain, DomainError> {
    build_phi_with_floor(t, a, b, &vec![f64::NEG_INFINITY; t], params)
}

/// Φ(T) with an explicit floor row: `floor[j−1]` sits at (3, 2j) and may be
/// finite (its Black edges into row 2 then survive) or −∞.
pub fn build_phi_with_floor(
    t: usize,
    a: f64,
    b: f64,
    floor: &[f64],
    params: &PolymerParams,
) -> Result<GibbsDomain, DomainError> {
    assert!(t >= 1);
    if floor.len() != t {
        return Err(DomainError::BoundaryCount { expected: t, got: floor.len() });
    }
    let t = t as i64;
    let mut interior = Vec::new();
    for j in 1..=2 * t - 2 {
        interior.push((1, j));
    }
    for j in 1..=2 * t - 1 {
        interior.push((2, j));
    }
    let mut boundary = BTreeMap::new();
    boundary.insert((1, 2 * t - 1), a);
    boundary.insert((2, 2 * t), b);
    for j in 1..=t {
        boundary.insert((3, 2 * j), floor[(j - 1) as usize]);
    }
    let edges = generate_induced(&interior, &boundary)?;
    GibbsDomain::new(interior, boundary, edges, params.theta(), params.alpha())
}

/// Two-row window Υ at rows {2m−1, 2m}: pins a, b on the right, finite
/// ceiling values c over the odd positions of row 2m−2, −∞ floor below.
pub fn build_upsilon(
    t: usize,
    m: usize,
    a: f64,
    b: f64,
    c: &[f64],
    params: &PolymerParams,
) -> Result<GibbsDomain, DomainError> {
    assert!(t >= 1 && m >= 2);
    if c.len() != t {
        return Err(DomainError::BoundaryCount { expected: t, got: c.len() });
    }
    let (t, m) = (t as i64, m as i64);
    let (r1, r2) = (2 * m - 1, 2 * m);
    let mut interior = Vec::new();
    for j in 1..=2 * t - 2 {
        interior.push((r1, j));
    }
    for j in 1..=2 * t - 1 {
        interior.push((r2, j));
    }
    let mut boundary = BTreeMap::new();
    boundary.insert((r1, 2 * t - 1), a);
    boundary.insert((r2, 2 * t), b);
    for j in 1..=t {
        boundary.insert((2 * m - 2, 2 * j - 1), c[(j - 1) as usize]);
        boundary.insert((2 * m + 1, 2 * j), f64::NEG_INFINITY);
    }
    let edges = generate_induced(&interior, &boundary)?;
    GibbsDomain::new(interior, boundary, edges, params.theta(), params.alpha())
}

/// 2m-row domain Λ_{m,T}: right-edge pins on every row, the even-position
/// pins (2k−1, 2T) for k ≥ 2, and the −∞ floor. m = 1 is the interacting
/// random walk domain.
pub fn build_mirw(
    m: usize,
    t: usize,
    right_odd: &[f64],
    right_even: &[f64],
    top_even: &[f64],
    params: &PolymerParams,
) -> Result<GibbsDomain, DomainError> {
    assert!(m >= 1 && t >= 1);
    if right_odd.len() != m || right_even.len() != m || top_even.len() != m - 1 {
        return Err(DomainError::BoundaryCount {
            expected: 3 * m - 1,
            got: right_odd.len() + right_even.len() + top_even.len(),
        });
    }
    let (m, t) = (m as i64, t as i64);
    let mut interior = Vec::new();
    for k in 1..=m {
        for j in 1..=2 * t - 2 {
            interior.push((2 * k - 1, j));
        }
        for j in 1..=2 * t - 1 {
            interior.push((2 * k, j));
        }
    }
    let mut boundary = BTreeMap::new();
    for k in 1..=m {
        boundary.insert((2 * k - 1, 2 * t - 1), right_odd[(k - 1) as usize]);
        boundary.insert((2 * k, 2 * t), right_even[(k - 1) as usize]);
        if k >= 2 {
            boundary.insert((2 * k - 1, 2 * t), top_even[(k - 2) as usize]);
        }
    }
    for j in 1..=t {
        boundary.insert((2 * m + 1, 2 * j), f64::NEG_INFINITY);
    }
    let edges = generate_induced(&interior, &boundary)?;
    GibbsDomain::new(interior, boundary, edges, params.theta(), params.alpha())
}

/// The interacting-random-walk domain: Λ_{1,T} with right pins (a, b).
pub fn build_irw(
    t: usize,
    a: f64,
    b: f64,
    params: &PolymerParams,
) -> Result<GibbsDomain, DomainError> {
    build_mirw(1, t, &[a], &[b], &[], params)
}

/// Rectangle of interior vertices with strict boundary coverage: the
/// supplied boundary must be exactly the set of outside vertices connected
/// to the interior by a rule edge in either direction.
pub fn build_rect(
    rows: std::ops::RangeInclusive<i64>,
    cols: std::ops::RangeInclusive<i64>,
    boundary: BTreeMap<Vertex, f64>,
    params: &PolymerParams,
) -> Result<GibbsDomain, DomainError> {
    assert!(*rows.start() >= 1 && *cols.start() >= 1);
    assert!(rows.start() <= rows.end() && cols.start() <= cols.end());
    let mut interior = Vec::new();
    for i in rows.clone() {
        for j in cols.clone() {
            interior.push((i, j));
        }
    }
    let inside: HashMap<Vertex, ()> = interior.iter().map(|v| (*v, ())).collect();
    let mut required: BTreeMap<Vertex, ()> = BTreeMap::new();
    for v in &interior {
        for (head, _) in rule_edges(*v) {
            if head.0 >= 1 && head.1 >= 1 && !inside.contains_key(&head) {
                required.insert(head, ());
            }
        }
        let (i, j) = *v;
        for tail in [(i, j - 1), (i, j + 1), (i + 1, j - 1), (i + 1, j + 1)] {
            if tail.0 < 1 || tail.1 < 1 || inside.contains_key(&tail) {
                continue;
            }
            if rule_edges(tail).iter().any(|(h, _)| inside.contains_key(h)) {
                required.insert(tail, ());
            }
        }
    }
    let missing: Vec<Vertex> =
        required.keys().filter(|v| !boundary.contains_key(v)).copied().collect();
    let extra: Vec<Vertex> =
        boundary.keys().filter(|v| !required.contains_key(v)).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(DomainError::BoundaryCoverage { missing, extra });
    }
    let edges = generate_induced(&interior, &boundary)?;
    GibbsDomain::new(interior, boundary, edges, params.theta(), params.alpha())
}

/// Interior values, stored relative to the domain anchor.
#[derive(Clone, Debug)]
pub struct GibbsState {
    rel: Vec<f64>,
    pub sweep_count: u64,
}

impl GibbsState {
    pub fn new(domain: &GibbsDomain) -> Self {
        GibbsState { rel: vec![0.0; domain.interior.len()], sweep_count: 0 }
    }

    /// Absolute value at an interior vertex.
    pub fn value(&self, domain: &GibbsDomain, v: Vertex) -> f64 {
        let idx = domain.index[&v];
        self.rel[idx] + domain.anchor_value
    }

    pub fn values_abs(&self, domain: &GibbsDomain) -> BTreeMap<Vertex, f64> {
        domain
            .interior
            .iter()
            .enumerate()
            .map(|(i, v)| (*v, self.rel[i] + domain.anchor_value))
            .collect()
    }

    pub fn rel_values(&self) -> &[f64] {
        &self.rel
    }
}

/// Log of the (unnormalized) full conditional at `vertex` evaluated at the
/// absolute value `u`, other coordinates frozen at `state`.
pub fn conditional_logdensity(
    domain: &GibbsDomain,
    state: &GibbsState,
    vertex: Vertex,
    u: f64,
) -> f64 {
    let idx = *domain.index.get(&vertex).expect("vertex must be interior");
    let mut total = 0.0;
    for e in &domain.incident[idx] {
        let other = match e.other {
            Other::Interior(o) => state.rel[o] + domain.anchor_value,
            Other::BoundaryRel(b) => b + domain.anchor_value,
        };
        let x = if e.incoming { other - u } else { u - other };
        total += e.slope * x - x.exp();
    }
    total
}

// In the frame s = u_rel − c the conditional is exp(A·s − P e^{−s} − Q e^s):
// A collects signed slopes, P the in-edge scale, Q the out-edge scale, and
// c is the largest neighbor value so P stays bounded by the in-degree.
struct FrameCond {
    a: f64,
    p: f64,
    q: f64,
    c: f64,
}

fn frame_conditional(domain: &GibbsDomain, rel: &[f64], idx: usize) -> FrameCond {
    let inc = &domain.incident[idx];
    let mut c = f64::NEG_INFINITY;
    for e in inc {
        let other = match e.other {
            Other::Interior(o) => rel[o],
            Other::BoundaryRel(b) => b,
        };
        if other > c {
            c = other;
        }
    }
    let mut a = 0.0;
    let mut p = 0.0;
    let mut q = 0.0;
    for e in inc {
        let other = match e.other {
            Other::Interior(o) => rel[o],
            Other::BoundaryRel(b) => b,
        };
        if e.incoming {
            a -= e.slope;
            p += (other - c).exp();
        } else {
            a += e.slope;
            q += (c - other).exp();
        }
    }
    FrameCond { a, p, q, c }
}

fn mode_of(a: f64, p: f64, q: f64) -> f64 {
    let e = if q == 0.0 {
        debug_assert!(a < 0.0);
        p / (-a)
    } else if p == 0.0 {
        debug_assert!(a > 0.0);
        a / q
    } else if a >= 0.0 {
        (a + (a * a + 4.0 * p * q).sqrt()) / (2.0 * q)
    } else {
        // conjugate form: a + √(a²+4pq) cancels catastrophically for a < 0
        2.0 * p / ((a * a + 4.0 * p * q).sqrt() - a)
    };
    e.ln()
}

/// Closed-form maximizer of the full conditional, in absolute coordinates.
pub fn conditional_mode(domain: &GibbsDomain, state: &GibbsState, vertex: Vertex) -> f64 {
    let idx = *domain.index.get(&vertex).expect("vertex must be interior");
    let fc = frame_conditional(domain, &state.rel, idx);
    fc.c + mode_of(fc.a, fc.p, fc.q) + domain.anchor_value
}

const GRID_KNOTS: usize = 513;
const EDGE_MASS_LIMIT: f64 = 1e-6;

fn log_dens(a: f64, p: f64, q: f64, s: f64) -> f64 {
    a * s - p * (-s).exp() - q * s.exp()
}

// Distance from the mode at which the log-density has dropped into
// [target, target + 4] nats, found by doubling then bisection.
fn window_side(a: f64, p: f64, q: f64, s_mode: f64, l_mode: f64, dir: f64, target: f64) -> f64 {
    let drop = |d: f64| l_mode - log_dens(a, p, q, s_mode + dir * d);
    let mut d = 1.0;
    let mut iters = 0;
    while drop(d) < target {
        d *= 2.0;
        iters += 1;
        assert!(iters < 300, "conditional tail does not decay (not normalizable?)");
    }
    let mut lo = d / 2.0;
    let mut hi = d;
    for _ in 0..80 {
        if drop(hi) <= target + 4.0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if drop(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

struct CondGrid {
    lo: f64,
    h: f64,
    cum: Vec<f64>, // cum[j] = mass of cells 1..j; len GRID_KNOTS
}

fn build_grid_at(a: f64, p: f64, q: f64, s_mode: f64, target: f64) -> CondGrid {
    let l_mode = log_dens(a, p, q, s_mode);
    let d_lo = window_side(a, p, q, s_mode, l_mode, -1.0, target);
    let d_hi = window_side(a, p, q, s_mode, l_mode, 1.0, target);
    let lo = s_mode - d_lo;
    let hi = s_mode + d_hi;
    let h = (hi - lo) / (GRID_KNOTS - 1) as f64;
    let rho = (-h).exp();
    let mut em = (-lo).exp();
    let mut dens = Vec::with_capacity(GRID_KNOTS);
    for jj in 0..GRID_KNOTS {
        let s = lo + h * jj as f64;
        let l = a * s - p * em - q / em;
        dens.push((l - l_mode).exp());
        em *= rho;
    }
    let mut cum = Vec::with_capacity(GRID_KNOTS);
    cum.push(0.0);
    for jj in 1..GRID_KNOTS {
        let m = 0.5 * (dens[jj - 1] + dens[jj]);
        cum.push(cum[jj - 1] + m);
    }
    assert!(
        cum[GRID_KNOTS - 1].is_finite() && cum[GRID_KNOTS - 1] > 0.0,
        "conditional grid mass must be positive and finite (a={a}, p={p}, q={q}, lo={lo}, h={h}, mass={})",
        cum[GRID_KNOTS - 1]
    );
    CondGrid { lo, h, cum }
}

fn build_grid(a: f64, p: f64, q: f64) -> CondGrid {
    let s_mode = mode_of(a, p, q);
    let grid = build_grid_at(a, p, q, s_mode, 40.0);
    let total = grid.cum[GRID_KNOTS - 1];
    let first = grid.cum[1];
    let last = total - grid.cum[GRID_KNOTS - 2];
    if first > EDGE_MASS_LIMIT * total || last > EDGE_MASS_LIMIT * total {
        return build_grid_at(a, p, q, s_mode, 80.0);
    }
    grid
}

fn invert_grid(grid: &CondGrid, u: f64) -> f64 {
    let total = grid.cum[GRID_KNOTS - 1];
    let target = u * total;
    let cell = grid.cum.partition_point(|&c| c < target).clamp(1, GRID_KNOTS - 1);
    let lo_mass = grid.cum[cell - 1];
    let cell_mass = grid.cum[cell] - lo_mass;
    let frac = if cell_mass > 0.0 { (target - lo_mass) / cell_mass } else { 0.5 };
    grid.lo + grid.h * ((cell - 1) as f64 + frac)
}

/// Test probe: (trapezoid mass of the sampling grid, adaptive-quadrature mass
/// of the same mode-normalized conditional over the window padded by 10 nats
/// per side) for the conditional at `vertex`.
#[doc(hidden)]
pub fn conditional_mass_diagnostic(
    domain: &GibbsDomain,
    state: &GibbsState,
    vertex: Vertex,
) -> (f64, f64) {
    let idx = *domain.index.get(&vertex).expect("vertex must be interior");
    let fc = frame_conditional(domain, &state.rel, idx);
    let grid = build_grid(fc.a, fc.p, fc.q);
    let s_mode = mode_of(fc.a, fc.p, fc.q);
    let l_mode = log_dens(fc.a, fc.p, fc.q, s_mode);
    let hi = grid.lo + grid.h * (GRID_KNOTS - 1) as f64;
    let f = |s: f64| (log_dens(fc.a, fc.p, fc.q, s) - l_mode).exp();
    let quad = crate::quad::integrate(&f, grid.lo - 10.0, hi + 10.0, 1e-10);
    (grid.cum[GRID_KNOTS - 1] * grid.h, quad)
}

/// One deterministic-order sweep of exact heat-bath updates; consumes
/// exactly one uniform per interior vertex.
pub fn heat_bath_sweep(domain: &GibbsDomain, state: &mut GibbsState, g: &mut Gen) {
    for idx in 0..domain.interior.len() {
        let u: f64 = g.gen();
        let fc = frame_conditional(domain, &state.rel, idx);
        let grid = build_grid(fc.a, fc.p, fc.q);
        state.rel[idx] = fc.c + invert_grid(&grid, u);
    }
    state.sweep_count += 1;
}

/// Run `sweeps` heat-bath sweeps from the all-anchor initial state.
pub fn run_mcmc(domain: &GibbsDomain, sweeps: u64, g: &mut Gen) -> GibbsState {
    let mut state = GibbsState::new(domain);
    for _ in 0..sweeps {
        heat_bath_sweep(domain, &mut state, g);
    }
    state
}

// Coupled per-vertex update in absolute coordinates: both chains share the
// frame, the knot grid (union of both 40-nat windows), and the uniform.
fn coupled_vertex_update(
    domain_low: &GibbsDomain,
    domain_high: &GibbsDomain,
    abs_low: &[f64],
    abs_high: &[f64],
    idx: usize,
    u: f64,
) -> (f64, f64) {
    let gather = |domain: &GibbsDomain, abs: &[f64]| {
        let inc = &domain.incident[idx];
        let anchor = domain.anchor_value;
        let mut vals = Vec::with_capacity(inc.len());
        let mut c = f64::NEG_INFINITY;
        for e in inc {
            let other = match e.other {
                Other::Interior(o) => abs[o],
                Other::BoundaryRel(b) => b + anchor,
            };
            vals.push((e.incoming, e.slope, other));
            if other > c {
                c = other;
            }
        }
        (vals, c)
    };
    let (lo_vals, c_lo) = gather(domain_low, abs_low);
    let (hi_vals, c_hi) = gather(domain_high, abs_high);
    let c = c_lo.max(c_hi);
    let reduce = |vals: &[(bool, f64, f64)]| {
        let (mut a, mut p, mut q) = (0.0, 0.0, 0.0);
        for (incoming, slope, other) in vals {
            if *incoming {
                a -= slope;
                p += (other - c).exp();
            } else {
                a += slope;
                q += (c - other).exp();
            }
        }
        (a, p, q)
    };
    let (a_l, p_l, q_l) = reduce(&lo_vals);
    let (a_h, p_h, q_h) = reduce(&hi_vals);
    let m_l = mode_of(a_l, p_l, q_l);
    let m_h = mode_of(a_h, p_h, q_h);
    let lm_l = log_dens(a_l, p_l, q_l, m_l);
    let lm_h = log_dens(a_h, p_h, q_h, m_h);
    let lo = (m_l - window_side(a_l, p_l, q_l, m_l, lm_l, -1.0, 40.0))
        .min(m_h - window_side(a_h, p_h, q_h, m_h, lm_h, -1.0, 40.0));
    let hi = (m_l + window_side(a_l, p_l, q_l, m_l, lm_l, 1.0, 40.0))
        .max(m_h + window_side(a_h, p_h, q_h, m_h, lm_h, 1.0, 40.0));
    let h = (hi - lo) / (GRID_KNOTS - 1) as f64;
    let build = |a: f64, p: f64, q: f64, lm: f64| {
        let mut cum = Vec::with_capacity(GRID_KNOTS);
        cum.push(0.0);
        let mut prev = (log_dens(a, p, q, lo) - lm).exp();
        for jj in 1..GRID_KNOTS {
            let s = lo + h * jj as f64;
            let d = (log_dens(a, p, q, s) - lm).exp();
            let last = *cum.last().unwrap();
            cum.push(last + 0.5 * (prev + d));
            prev = d;
        }
        CondGrid { lo, h, cum }
    };
    let grid_l = build(a_l, p_l, q_l, lm_l);
    let grid_h = build(a_h, p_h, q_h, lm_h);
    (c + invert_grid(&grid_l, u), c + invert_grid(&grid_h, u))
}

/// Two chains under boundaries `boundary_low` ≤ `boundary_high`, driven by
/// one shared uniform stream; returns both final states. Errs the moment a
/// vertexwise order violation appears.
pub fn run_coupled_mcmc(
    domain: &GibbsDomain,
    boundary_low: BTreeMap<Vertex, f64>,
    boundary_high: BTreeMap<Vertex, f64>,
    sweeps: u64,
    g: &mut Gen,
) -> Result<(GibbsState, GibbsState), GibbsError> {
    for (v, lo) in &boundary_low {
        let hi = boundary_high
            .get(v)
            .ok_or(DomainError::BoundaryKeysDiffer)?;
        if (*lo == f64::NEG_INFINITY) != (*hi == f64::NEG_INFINITY) || lo > hi {
            return Err(DomainError::BoundaryKeysDiffer.into());
        }
    }
    let dom_low = domain.with_boundary(boundary_low)?;
    let dom_high = domain.with_boundary(boundary_high)?;
    let n = dom_low.interior.len();
    let mut abs_low: Vec<f64> = vec![dom_low.anchor_value; n];
    let mut abs_high: Vec<f64> = vec![dom_high.anchor_value; n];
    let mut sweep = 0u64;
    for _ in 0..sweeps {
        for idx in 0..n {
            let u: f64 = g.gen();
            let (vl, vh) =
                coupled_vertex_update(&dom_low, &dom_high, &abs_low, &abs_high, idx, u);
            abs_low[idx] = vl;
            abs_high[idx] = vh;
            if vl > vh {
                return Err(GibbsError::OrderViolated { vertex: dom_low.interior[idx], sweep });
            }
        }
        sweep += 1;
    }
    let to_state = |abs: &[f64], dom: &GibbsDomain| GibbsState {
        rel: abs.iter().map(|x| x - dom.anchor_value).collect(),
        sweep_count: sweep,
    };
    Ok((to_state(&abs_low, &dom_low), to_state(&abs_high, &dom_high)))
}

/// MCMC samples from the interacting-random-walk measure, with split-R̂
/// convergence monitoring on a small observable set.
pub struct IrwRun {
    pub domain: GibbsDomain,
    pub samples: Vec<GibbsState>,
    pub chains: usize,
    pub per_chain: usize,
    pub rhat: Vec<(Vertex, f64)>,
}

pub fn default_burn_in(t: usize) -> u64 {
    200 * t as u64
}

pub fn irw_sample(
    t: usize,
    a: f64,
    b: f64,
    params: &PolymerParams,
    burn_in: u64,
    thin: u64,
    reps: u64,
    chains: usize,
    stream: RngStream,
) -> Result<IrwRun, GibbsError> {
    assert!(thin >= t as u64, "thinning interval must be at least T");
    assert!(chains >= 2, "split-Rhat needs at least two chains");
    let per_chain = (reps as usize).div_ceil(chains);
    assert!(per_chain >= 4, "need at least 4 samples per chain");
    let domain = build_irw(t, a, b, params)?;
    let observables: Vec<Vertex> = if t >= 2 {
        vec![(1, 1), (2, 2), (1, t as i64)]
    } else {
        vec![(2, 1)]
    };
    let chain_out: Vec<Vec<GibbsState>> = (0..chains)
        .into_par_iter()
        .map(|chain| {
            let mut g = stream.substream(chain as u64).generator();
            let mut state = GibbsState::new(&domain);
            for _ in 0..burn_in {
                heat_bath_sweep(&domain, &mut state, &mut g);
            }
            let mut out = Vec::with_capacity(per_chain);
            for _ in 0..per_chain {
                for _ in 0..thin {
                    heat_bath_sweep(&domain, &mut state, &mut g);
                }
                out.push(state.clone());
            }
            out
        })
        .collect();
    let mut rhat = Vec::new();
    for obs in &observables {
        let traces: Vec<Vec<f64>> = chain_out
            .iter()
            .map(|states| states.iter().map(|s| s.value(&domain, *obs)).collect())
            .collect();
        let r = split_rhat(&traces);
        rhat.push((*obs, r));
    }
    if let Some((v, r)) = rhat.iter().find(|(_, r)| *r >= 1.05) {
        return Err(GibbsError::Rhat { vertex: *v, value: *r });
    }
    let samples = chain_out.into_iter().flatten().collect();
    Ok(IrwRun { domain, samples, chains, per_chain, rhat })
}

/// Weighted paired-random-walk sampler: backward f_θ walks pinned at (x, y),
/// weighted by the g_α start tie and the soft weight W_T.
pub fn wprw_importance_sample(
    t: usize,
    x: f64,
    y: f64,
    params: &PolymerParams,
    reps: u64,
    stream: RngStream,
) -> WeightedValues<TwoWalkPath> {
    assert!(t >= 1);
    assert!(reps >= 1000, "need reps >= 1000");
    let theta = params.theta();
    let alpha = params.alpha();
    if t == 1 {
        let items: Vec<(TwoWalkPath, f64)> = (0..reps)
            .map(|_| (TwoWalkPath { s1: vec![x], s2: vec![y], log_weight: 0.0 }, 0.0))
            .collect();
        return WeightedValues { items, ess: reps as f64, low_ess: (reps as f64) < 50.0 };
    }
    let items = crate::rng::par_replica_fold(
        reps,
        4096,
        |range| {
            let mut out = Vec::with_capacity(range.clone().count());
            for i in range {
                let mut g = stream.substream(i).generator();
                let mut s1 = vec![0.0; t];
                s1[t - 1] = x;
                for k in (0..t - 1).rev() {
                    s1[k] = s1[k + 1] - sample_f_theta(theta, &mut g);
                }
                let mut s2 = vec![0.0; t];
                s2[t - 1] = y;
                for k in (0..t - 1).rev() {
                    s2[k] = s2[k + 1] - sample_f_theta(theta, &mut g);
                }
                let gap = s2[0] - s1[0];
                let mut path = TwoWalkPath { s1, s2, log_weight: 0.0 };
                let lw = alpha * gap - gap.exp() - ln_gamma(alpha) + log_w(&path);
                path.log_weight = lw;
                out.push((path, lw));
            }
            out
        },
        |mut acc: Vec<(TwoWalkPath, f64)>, mut part| {
            acc.append(&mut part);
            acc
        },
        Vec::new(),
    );
    let max_lw = items.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = items.iter().map(|p| (p.1 - max_lw).exp()).collect();
    let e = ess(&weights);
    WeightedValues { items, ess: e, low_ess: e < 50.0 }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundaryValueJson {
    Finite(f64),
    Sentinel(String),
}

/// JSON form of a domain; −∞ boundary values appear as the string "-inf".
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainSpecJson {
    pub schema_version: u32,
    pub theta: f64,
    pub alpha: f64,
    pub interior: Vec<Vertex>,
    pub boundary: Vec<(Vertex, BoundaryValueJson)>,
    pub edges: Vec<(Vertex, Vertex, EdgeColor)>,
}

impl GibbsDomain {
    pub fn to_spec_json(&self) -> DomainSpecJson {
        DomainSpecJson {
            schema_version: 1,
            theta: self.theta,
            alpha: self.alpha,
            interior: self.interior.clone(),
            boundary: self
                .boundary
                .iter()
                .map(|(v, val)| {
                    let bv = if *val == f64::NEG_INFINITY {
                        BoundaryValueJson::Sentinel("-inf".to_string())
                    } else {
                        BoundaryValueJson::Finite(*val)
                    };
                    (*v, bv)
                })
                .collect(),
            edges: self.edges.clone(),
        }
    }

    pub fn from_spec_json(spec: &DomainSpecJson) -> Result<Self, DomainError> {
        let mut boundary = BTreeMap::new();
        for (v, bv) in &spec.boundary {
            let val = match bv {
                BoundaryValueJson::Finite(x) => *x,
                BoundaryValueJson::Sentinel(s) if s == "-inf" => f64::NEG_INFINITY,
                BoundaryValueJson::Sentinel(s) => {
                    return Err(DomainError::BadSentinel(s.clone()))
                }
            };
            boundary.insert(*v, val);
        }
        Self::new(spec.interior.clone(), boundary, spec.edges.clone(), spec.theta, spec.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn params() -> PolymerParams {
        PolymerParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn phi_two_golden_fixture() {
        let d = build_phi(2, 0.5, -0.25, &params()).unwrap();
        assert_eq!(d.interior(), &[(1, 1), (1, 2), (2, 1), (2, 2), (2, 3)]);
        let mut edges: Vec<_> = d.edges().to_vec();
        edges.sort_by_key(|(t, h, _)| (*t, *h));
        let want = vec![
            ((1, 1), (1, 2), EdgeColor::Blue),
            ((1, 3), (1, 2), EdgeColor::Blue),
            ((2, 1), (2, 2), EdgeColor::Yellow),
            ((2, 2), (1, 1), EdgeColor::Gray),
            ((2, 2), (1, 3), EdgeColor::Black),
            ((2, 3), (2, 2), EdgeColor::Blue),
            ((2, 3), (2, 4), EdgeColor::Blue),
        ];
        assert_eq!(edges, want);
        let grays = d.edges().iter().filter(|e| e.2 == EdgeColor::Gray).count();
        let yellows = d.edges().iter().filter(|e| e.2 == EdgeColor::Yellow).count();
        assert_eq!((grays, yellows), (1, 1));
    }

    #[test]
    fn irw_floor_edges_dropped() {
        let d = build_irw(3, 0.0, 0.0, &params()).unwrap();
        for (tail, _, _) in d.edges() {
            assert!(tail.0 <= 2, "floor edge survived: {tail:?}");
        }
    }

    #[test]
    fn neg_inf_misplacement_rejected() {
        let mut boundary = BTreeMap::new();
        boundary.insert((1, 2), f64::NEG_INFINITY);
        boundary.insert((2, 2), 0.0);
        let err = build_rect(1..=1, 1..=1, boundary, &params()).unwrap_err();
        match err {
            DomainError::NegInfAtHead(v) => assert_eq!(v, (1, 2)),
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn single_vertex_rect_coverage() {
        let mut boundary = BTreeMap::new();
        boundary.insert((1, 2), 0.5);
        boundary.insert((2, 2), 1.5);
        let d = build_rect(1..=1, 1..=1, boundary, &params()).unwrap();
        assert_eq!(d.edges().len(), 2);
        let missing = build_rect(1..=1, 1..=1, BTreeMap::new(), &params()).unwrap_err();
        assert!(matches!(missing, DomainError::BoundaryCoverage { .. }));
    }

    #[test]
    fn determinism_of_sweeps() {
        let d = build_phi(3, 0.0, 0.5, &params()).unwrap();
        let run = |seed| {
            let mut g = RngStream::new(seed, 0).generator();
            run_mcmc(&d, 25, &mut g).rel_values().to_vec()
        };
        assert_eq!(run(61), run(61));
        assert_ne!(run(61), run(62));
    }

    #[test]
    fn equal_boundaries_coalesce() {
        let d = build_irw(3, 0.2, -0.1, &params()).unwrap();
        let bmap = d.boundary().clone();
        let mut g = RngStream::new(63, 0).generator();
        let (lo, hi) = run_coupled_mcmc(&d, bmap.clone(), bmap, 30, &mut g).unwrap();
        assert_eq!(lo.rel_values(), hi.rel_values());
    }

    #[test]
    fn coupled_order_holds() {
        let d = build_irw(3, 0.0, -1.0, &params()).unwrap();
        let low = d.boundary().clone();
        let mut high = low.clone();
        for (v, val) in high.iter_mut() {
            if val.is_finite() {
                *val += if v.0 == 1 { 1.0 } else { 0.5 };
            }
        }
        let dom_hi = d.with_boundary(high.clone()).unwrap();
        let mut g = RngStream::new(64, 0).generator();
        let (lo_state, hi_state) = run_coupled_mcmc(&d, low, high, 200, &mut g).unwrap();
        for v in d.interior() {
            assert!(lo_state.value(&d, *v) <= hi_state.value(&dom_hi, *v));
        }
    }

    #[test]
    fn spec_json_roundtrip_with_sentinel() {
        let d = build_irw(2, 0.3, -0.7, &params()).unwrap();
        let spec = d.to_spec_json();
        let text = serde_json::to_string(&spec).unwrap();
        let parsed: DomainSpecJson = serde_json::from_str(&text).unwrap();
        let back = GibbsDomain::from_spec_json(&parsed).unwrap();
        assert_eq!(back.interior(), d.interior());
        assert_eq!(back.edges(), d.edges());
        assert_eq!(back.boundary(), d.boundary());
    }

    #[test]
    fn wprw_t1_degenerate() {
        let w = wprw_importance_sample(1, 0.4, -0.2, &params(), 1000, RngStream::new(65, 0));
        assert_eq!(w.items.len(), 1000);
        for (p, lw) in &w.items {
            assert_eq!(p.s1, vec![0.4]);
            assert_eq!(p.s2, vec![-0.2]);
            assert_eq!(*lw, 0.0);
        }
        assert_eq!(w.ess, 1000.0);
    }

    #[test]
    fn wprw_weights_nonpositive_soft_part() {
        let w = wprw_importance_sample(4, 0.0, -0.5, &params(), 1000, RngStream::new(66, 0));
        for (p, _) in &w.items {
            assert!(log_w(p) <= 0.0);
            assert_eq!(p.s1[3], 0.0);
            assert_eq!(p.s2[3], -0.5);
        }
        assert!(w.ess >= 1.0);
    }
}
