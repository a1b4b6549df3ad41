//! Learned energy models.
//!
//! Configurations are discretized into a [`ConfigGrid`]; each bin owns an
//! [`EnergyBelief`] that splits the edges into measured (known) energies and
//! Gaussian beliefs over the rest. A measurement makes one edge known in its
//! bin, trains a linear [`Regressor`], and nudges every remaining unknown
//! toward the regression estimate, discounted by distance.

use std::f64::consts::TAU;
use std::fmt::Write;

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graphmap::{format_float, EdgeId, Graph};
use crate::num::{wrap_angle, Real};
use crate::truthmodel::Configuration;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Mean, raw second moment, variance and accumulated weight of one unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief<T = f64> {
    pub mu: T,
    pub eta2: T,
    pub sigma2: T,
    pub weight: T,
}

impl<T: Real> GaussianBelief<T> {
    pub fn new(mu: T, sigma2: T, weight: T) -> Self {
        GaussianBelief {
            mu,
            eta2: sigma2 + mu * mu,
            sigma2,
            weight,
        }
    }

    /// Absorbs the estimate `h` with weight `w`. Returns true if the variance
    /// had to be clamped at zero.
    pub fn absorb(&mut self, h: T, w: T) -> bool {
        let (sigma2, clamped) = absorb_moments(&mut self.mu, &mut self.eta2, &mut self.weight, h, w);
        self.sigma2 = sigma2;
        clamped
    }
}

/// Weighted running update of the first two raw moments. Non-positive weights
/// leave the moments untouched. Returns the new variance and whether it was
/// clamped.
#[inline]
pub fn absorb_moments<T: Real>(mu: &mut T, eta2: &mut T, weight: &mut T, h: T, w: T) -> (T, bool) {
    if w > T::zero() {
        let total = *weight + w;
        *mu = (*weight * *mu + w * h) / total;
        *eta2 = (*weight * *eta2 + w * h * h) / total;
        *weight = total;
    }
    let var = *eta2 - *mu * *mu;
    if var < T::zero() {
        (T::zero(), true)
    } else {
        (var, false)
    }
}

/// `c1 · exp(-c2 · distance)`.
#[inline]
pub fn proximity_weight<T: Real>(distance: T, c1: T, c2: T) -> T {
    c1 * (-c2 * distance).exp()
}

/// Proximity weight between two edges, measured between their midpoints.
pub fn edge_proximity(graph: &Graph, measured: EdgeId, target: EdgeId, c1: f64, c2: f64) -> f64 {
    let (a, b) = (graph.midpoint(measured), graph.midpoint(target));
    proximity_weight((a.0 - b.0).hypot(a.1 - b.1), c1, c2)
}

/// Inclusive `(lo, hi)` ranges of the three configuration coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigRanges {
    pub payload: (f64, f64),
    pub wind_speed: (f64, f64),
    /// A span of 2π or more means the whole circle.
    pub wind_direction: (f64, f64),
}

impl Default for ConfigRanges {
    fn default() -> Self {
        ConfigRanges {
            payload: (0.0, 2.0),
            wind_speed: (0.0, 8.0),
            wind_direction: (0.0, TAU),
        }
    }
}

impl ConfigRanges {
    /// A single configuration.
    pub fn fixed(config: &Configuration) -> Self {
        ConfigRanges {
            payload: (config.payload, config.payload),
            wind_speed: (config.wind_speed, config.wind_speed),
            wind_direction: (config.wind_direction, config.wind_direction),
        }
    }

    pub fn validate(&self) -> Result<(), BeliefError> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !(ok(self.payload) && ok(self.wind_speed) && ok(self.wind_direction)) {
            return Err(BeliefError::InvalidArgument(format!("bad configuration ranges {self:?}")));
        }
        if self.payload.0 < 0.0 || self.wind_speed.0 < 0.0 {
            return Err(BeliefError::InvalidArgument(
                "payload and wind speed must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn full_circle(&self) -> bool {
        self.wind_direction.1 - self.wind_direction.0 >= TAU - 1e-12
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    if n <= 1 || lo == hi {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn spacing(centers: &[f64]) -> f64 {
    match centers.len() {
        0 | 1 => 1.0,
        n => ((centers[n - 1] - centers[0]) / (n - 1) as f64).abs().max(f64::MIN_POSITIVE),
    }
}

fn circular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % TAU;
    d.min(TAU - d)
}

/// Discretization of configurations into payload × speed × direction bins.
///
/// Bin `(p, s, d)` has index `(p · n_speed + s) · n_direction + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigGrid {
    payload: Vec<f64>,
    speed: Vec<f64>,
    direction: Vec<f64>,
    scale: [f64; 3],
}

impl ConfigGrid {
    /// Evenly spaced centers. Payload and speed centers include both range
    /// ends; a full-circle direction range gets `n_direction` centers `2πi/n`
    /// starting at the range start. Degenerate ranges collapse to one center.
    ///
    /// The payload range is extended down to 0 so that a homebound (unloaded)
    /// bin always exists.
    pub fn new(
        ranges: &ConfigRanges,
        n_payload: usize,
        n_speed: usize,
        n_direction: usize,
    ) -> Result<Self, BeliefError> {
        ranges.validate()?;
        if n_payload == 0 || n_speed == 0 || n_direction == 0 {
            return Err(BeliefError::InvalidArgument("grid needs at least one bin per axis".into()));
        }
        let payload = linspace((0.0, ranges.payload.1), n_payload);
        let speed = linspace(ranges.wind_speed, n_speed);
        let (d0, d1) = ranges.wind_direction;
        let direction = if ranges.full_circle() {
            (0..n_direction)
                .map(|i| wrap_angle(d0 + TAU * i as f64 / n_direction as f64))
                .collect()
        } else {
            linspace((d0, d1), n_direction).into_iter().map(wrap_angle).collect()
        };
        Self::from_centers(payload, speed, direction)
    }

    /// Four payload, five speed and five direction bins.
    pub fn standard(ranges: &ConfigRanges) -> Result<Self, BeliefError> {
        Self::new(ranges, 4, 5, 5)
    }

    /// Explicit centers; each axis is normalized by its mean center spacing
    /// (direction by `2π / n` when it has several centers spread over more
    /// than half the circle).
    pub fn from_centers(
        payload: Vec<f64>,
        speed: Vec<f64>,
        direction: Vec<f64>,
    ) -> Result<Self, BeliefError> {
        if payload.is_empty() || speed.is_empty() || direction.is_empty() {
            return Err(BeliefError::InvalidArgument("every grid axis needs a center".into()));
        }
        if !payload.contains(&0.0) {
            return Err(BeliefError::InvalidArgument(
                "payload centers must include 0 for homebound legs".into(),
            ));
        }
        let all = payload.iter().chain(&speed).chain(&direction);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(BeliefError::InvalidArgument("grid centers must be finite".into()));
        }
        let direction: Vec<f64> = direction.into_iter().map(wrap_angle).collect();
        let dir_scale = if direction.len() > 1 {
            let span = direction.iter().fold(0.0f64, |m, &a| {
                direction.iter().fold(m, |m, &b| m.max(circular_gap(a, b)))
            });
            if span > std::f64::consts::FRAC_PI_2 * 1.5 {
                TAU / direction.len() as f64
            } else {
                spacing(&direction)
            }
        } else {
            1.0
        };
        let scale = [spacing(&payload), spacing(&speed), dir_scale];
        Ok(ConfigGrid {
            payload,
            speed,
            direction,
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.payload.len() * self.speed.len() * self.direction.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn payload_centers(&self) -> &[f64] {
        &self.payload
    }

    pub fn speed_centers(&self) -> &[f64] {
        &self.speed
    }

    pub fn direction_centers(&self) -> &[f64] {
        &self.direction
    }

    pub fn index(&self, p: usize, s: usize, d: usize) -> usize {
        (p * self.speed.len() + s) * self.direction.len() + d
    }

    pub fn center(&self, bin: usize) -> Configuration {
        let nd = self.direction.len();
        let ns = self.speed.len();
        Configuration {
            payload: self.payload[bin / (ns * nd)],
            wind_speed: self.speed[(bin / nd) % ns],
            wind_direction: self.direction[bin % nd],
        }
    }

    pub fn centers(&self) -> impl Iterator<Item = Configuration> + '_ {
        (0..self.len()).map(|b| self.center(b))
    }

    /// Bin with the smallest normalized distance; the lowest index wins ties.
    pub fn nearest(&self, config: &Configuration) -> usize {
        let mut best = (f64::INFINITY, 0);
        for bin in 0..self.len() {
            let c = self.center(bin);
            let dp = (config.payload - c.payload) / self.scale[0];
            let ds = (config.wind_speed - c.wind_speed) / self.scale[1];
            let dd = circular_gap(config.wind_direction, c.wind_direction) / self.scale[2];
            let dist = dp * dp + ds * ds + dd * dd;
            if dist < best.0 {
                best = (dist, bin);
            }
        }
        best.1
    }
}

/// Regression features `[l, s, sin d, cos d, L, sin θ, cos θ, 1]`.
pub const FEATURES: usize = 8;

pub fn features(config: &Configuration, length: f64, bearing: f64) -> [f64; FEATURES] {
    [
        config.payload,
        config.wind_speed,
        config.wind_direction.sin(),
        config.wind_direction.cos(),
        length,
        bearing.sin(),
        bearing.cos(),
        1.0,
    ]
}

/// Least-squares linear model from features to energy.
///
/// The normal equations are accumulated row by row and re-solved after every
/// row with an SVD pseudo-inverse, so rank-deficient training sets (for
/// example a single configuration) give the minimum-norm fit. Until there are
/// as many rows as features, predictions fall back to `k · L`, except that a
/// query identical to a training row returns that row's value.
#[derive(Debug, Clone)]
pub struct Regressor {
    fallback_k: f64,
    gram: SMatrix<f64, FEATURES, FEATURES>,
    xty: SVector<f64, FEATURES>,
    rows: usize,
    early_rows: Vec<([f64; FEATURES], f64)>,
    coef: Option<[f64; FEATURES]>,
}

impl Regressor {
    pub fn new(fallback_k: f64) -> Self {
        Regressor {
            fallback_k,
            gram: SMatrix::zeros(),
            xty: SVector::zeros(),
            rows: 0,
            early_rows: Vec::new(),
            coef: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn coefficients(&self) -> Option<&[f64; FEATURES]> {
        self.coef.as_ref()
    }

    pub fn train(&mut self, x: [f64; FEATURES], y: f64) {
        let v = SVector::<f64, FEATURES>::from(x);
        self.gram += v * v.transpose();
        self.xty += v * y;
        self.rows += 1;
        if self.rows < FEATURES {
            self.early_rows.push((x, y));
            return;
        }
        self.early_rows.clear();
        let svd = self.gram.svd(true, true);
        let tol = 1e-11 * svd.singular_values.max();
        let solution = svd.solve(&self.xty, tol).expect("both SVD factors were computed");
        let mut coef = [0.0; FEATURES];
        coef.copy_from_slice(solution.as_slice());
        self.coef = Some(coef);
    }

    /// Prediction for one feature vector, clamped at zero.
    pub fn predict(&self, x: &[f64; FEATURES]) -> f64 {
        self.config_part(x).map_or_else(
            || self.fallback(x),
            |a| (a + self.edge_part(x[4], x[5], x[6])).max(0.0),
        )
    }

    fn fallback(&self, x: &[f64; FEATURES]) -> f64 {
        self.early_rows
            .iter()
            .find(|(row, _)| row == x)
            .map_or(self.fallback_k * x[4], |&(_, y)| y)
            .max(0.0)
    }

    /// Configuration-dependent part of a fitted prediction.
    fn config_part(&self, x: &[f64; FEATURES]) -> Option<f64> {
        let c = self.coef.as_ref()?;
        Some(c[0] * x[0] + c[1] * x[1] + c[2] * x[2] + c[3] * x[3] + c[7] * x[7])
    }

    /// Edge-dependent part of a fitted prediction.
    fn edge_part(&self, length: f64, sin_b: f64, cos_b: f64) -> f64 {
        let c = self.coef.as_ref().expect("called only on fitted models");
        c[4] * length + c[5] * sin_b + c[6] * cos_b
    }
}

/// Regression estimate for `edge` under `config`.
pub fn predict_unknown(
    regressor: &Regressor,
    edge: &crate::graphmap::DirectedEdge,
    config: &Configuration,
) -> f64 {
    regressor.predict(&features(config, edge.length, edge.bearing))
}

/// Measured energies and Gaussian beliefs of one configuration bin.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBelief {
    bin: usize,
    known: Vec<Option<f64>>,
    mu: Vec<f64>,
    eta2: Vec<f64>,
    sigma2: Vec<f64>,
    weight: Vec<f64>,
    unknown: usize,
}

impl EnergyBelief {
    /// Every edge unknown, with `μ ~ U[0.5kL, 1.5kL]`, the variance of that
    /// uniform, and weight `w0`.
    pub fn prior(
        graph: &Graph,
        bin: usize,
        k: f64,
        w0: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, BeliefError> {
        if !(k > 0.0 && k.is_finite() && w0 > 0.0 && w0.is_finite()) {
            return Err(BeliefError::InvalidArgument(format!(
                "prior needs k > 0 and w0 > 0 (k={k}, w0={w0})"
            )));
        }
        let m = graph.edge_count();
        let mut b = EnergyBelief {
            bin,
            known: vec![None; m],
            mu: Vec::with_capacity(m),
            eta2: Vec::with_capacity(m),
            sigma2: Vec::with_capacity(m),
            weight: vec![w0; m],
            unknown: m,
        };
        for e in graph.edges() {
            let half = 0.5 * k * e.length;
            let mu = half + 2.0 * half * rng.random::<f64>();
            let var = half * half / 3.0;
            b.mu.push(mu);
            b.sigma2.push(var);
            b.eta2.push(var + mu * mu);
        }
        Ok(b)
    }

    /// Belief with the given per-edge terms; unknowns get weight `weight`.
    pub fn from_terms(bin: usize, terms: &[EdgeTerm], weight: f64) -> Self {
        let mut b = EnergyBelief {
            bin,
            known: Vec::with_capacity(terms.len()),
            mu: Vec::with_capacity(terms.len()),
            eta2: Vec::with_capacity(terms.len()),
            sigma2: Vec::with_capacity(terms.len()),
            weight: vec![weight; terms.len()],
            unknown: 0,
        };
        for t in terms {
            let (known, mu, var) = match *t {
                EdgeTerm::Known(v) => (Some(v), 0.0, 0.0),
                EdgeTerm::Unknown(mu, var) => (None, mu, var.max(0.0)),
            };
            b.unknown += usize::from(known.is_none());
            b.known.push(known);
            b.mu.push(mu);
            b.sigma2.push(var);
            b.eta2.push(var + mu * mu);
        }
        b
    }

    pub fn bin(&self) -> usize {
        self.bin
    }

    pub fn edge_count(&self) -> usize {
        self.known.len()
    }

    pub fn is_known(&self, e: EdgeId) -> bool {
        self.known[e].is_some()
    }

    pub fn known_energy(&self, e: EdgeId) -> Option<f64> {
        self.known[e]
    }

    /// Belief of an unknown edge; `None` once the edge is known.
    pub fn belief(&self, e: EdgeId) -> Option<GaussianBelief<f64>> {
        self.known[e].is_none().then(|| GaussianBelief {
            mu: self.mu[e],
            eta2: self.eta2[e],
            sigma2: self.sigma2[e],
            weight: self.weight[e],
        })
    }

    pub fn unknown_count(&self) -> usize {
        self.unknown
    }

    pub fn unknown_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.known.len()).filter(|&e| self.known[e].is_none())
    }

    /// Measured value for known edges, belief mean otherwise.
    pub fn mean_energy(&self, e: EdgeId) -> f64 {
        self.known[e].unwrap_or(self.mu[e])
    }

    pub fn mean_weights(&self) -> Vec<f64> {
        (0..self.known.len()).map(|e| self.mean_energy(e)).collect()
    }

    pub fn max_mean(&self) -> f64 {
        (0..self.known.len()).map(|e| self.mean_energy(e)).fold(0.0, f64::max)
    }

    /// Known value if any, otherwise `(μ, σ²)`.
    #[inline]
    pub fn term(&self, e: EdgeId) -> EdgeTerm {
        match self.known[e] {
            Some(v) => EdgeTerm::Known(v),
            None => EdgeTerm::Unknown(self.mu[e], self.sigma2[e]),
        }
    }

    /// Moves `e` to the known set. A known edge is overwritten.
    pub fn mark_known(&mut self, e: EdgeId, energy: f64) {
        if self.known[e].is_none() {
            self.unknown -= 1;
        }
        self.known[e] = Some(energy);
    }

    /// Absorbs an estimate into an unknown edge. Returns whether the variance
    /// was clamped. Known edges are ignored.
    pub fn absorb(&mut self, e: EdgeId, h: f64, w: f64) -> bool {
        if self.known[e].is_some() {
            return false;
        }
        let (var, clamped) = absorb_moments(&mut self.mu[e], &mut self.eta2[e], &mut self.weight[e], h, w);
        self.sigma2[e] = var;
        clamped
    }

    fn write_json(&self, out: &mut String, center: &Configuration) {
        write!(out, "{{\"bin\":{},\"payload\":", self.bin).unwrap();
        format_float(out, center.payload);
        out.push_str(",\"wind_speed\":");
        format_float(out, center.wind_speed);
        out.push_str(",\"wind_direction\":");
        format_float(out, center.wind_direction);
        out.push_str(",\"known\":[");
        let mut first = true;
        for (e, v) in self.known.iter().enumerate() {
            if let Some(v) = v {
                if !first {
                    out.push(',');
                }
                first = false;
                write!(out, "{{\"edge\":{e},\"energy\":").unwrap();
                format_float(out, *v);
                out.push('}');
            }
        }
        out.push_str("],\"unknown\":[");
        first = true;
        for e in self.unknown_edges() {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{{\"edge\":{e},\"mu\":").unwrap();
            format_float(out, self.mu[e]);
            out.push_str(",\"sigma2\":");
            format_float(out, self.sigma2[e]);
            out.push_str(",\"weight\":");
            format_float(out, self.weight[e]);
            out.push('}');
        }
        out.push_str("]}");
    }
}

/// One edge's contribution to a path energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeTerm {
    Known(f64),
    Unknown(f64, f64),
}

/// Per-edge geometry reused by every belief update.
#[derive(Debug, Clone, Copy)]
struct EdgeGeometry {
    mid: (f64, f64),
    length: f64,
    bearing: f64,
    sin_b: f64,
    cos_b: f64,
}

fn geometry(graph: &Graph) -> Vec<EdgeGeometry> {
    graph
        .edges()
        .iter()
        .map(|e| EdgeGeometry {
            mid: graph.midpoint(e.id),
            length: e.length,
            bearing: e.bearing,
            sin_b: e.bearing.sin(),
            cos_b: e.bearing.cos(),
        })
        .collect()
}

fn proximity_vector(geom: &[EdgeGeometry], measured: EdgeId, c1: f64, c2: f64) -> Vec<f64> {
    let m = geom[measured].mid;
    geom.iter()
        .map(|g| proximity_weight((g.mid.0 - m.0).hypot(g.mid.1 - m.1), c1, c2))
        .collect()
}

/// Pushes the regression estimate for every unknown edge of `belief` (under
/// the configuration `center`) with the given per-edge weights. Returns the
/// number of clamp events.
fn spread_estimates(
    belief: &mut EnergyBelief,
    geom: &[EdgeGeometry],
    regressor: &Regressor,
    center: &Configuration,
    weights: &[f64],
) -> u64 {
    let mut clamps = 0;
    let probe = features(center, 0.0, 0.0);
    match regressor.config_part(&probe) {
        Some(a) => {
            for (e, g) in geom.iter().enumerate() {
                let w = weights[e];
                if w > 0.0 && belief.known[e].is_none() {
                    let h = (a + regressor.edge_part(g.length, g.sin_b, g.cos_b)).max(0.0);
                    clamps += u64::from(belief.absorb(e, h, w));
                }
            }
        }
        None => {
            for (e, g) in geom.iter().enumerate() {
                let w = weights[e];
                if w > 0.0 && belief.known[e].is_none() {
                    let mut x = probe;
                    (x[4], x[5], x[6]) = (g.length, g.sin_b, g.cos_b);
                    clamps += u64::from(belief.absorb(e, regressor.fallback(&x), w));
                }
            }
        }
    }
    clamps
}

fn check_measurement(measured: f64) -> Result<(), BeliefError> {
    if measured >= 0.0 && measured.is_finite() {
        Ok(())
    } else {
        Err(BeliefError::InvalidArgument(format!(
            "measured energy {measured} must be finite and >= 0"
        )))
    }
}

/// Records a measurement of `edge` taken under `config` into one belief.
///
/// The edge becomes known, the regressor gains a row, and every remaining
/// unknown absorbs the regression estimate under the belief's configuration
/// `center`, weighted by proximity to the measured edge. Re-measuring a known
/// edge only overwrites its value. Returns the number of variance clamps.
#[allow(clippy::too_many_arguments)]
pub fn record_measurement(
    belief: &mut EnergyBelief,
    graph: &Graph,
    center: &Configuration,
    edge: EdgeId,
    config: &Configuration,
    measured: f64,
    regressor: &mut Regressor,
    c1: f64,
    c2: f64,
) -> Result<u64, BeliefError> {
    check_measurement(measured)?;
    let was_known = belief.is_known(edge);
    belief.mark_known(edge, measured);
    if was_known {
        return Ok(0);
    }
    let e = graph.edge(edge);
    regressor.train(features(config, e.length, e.bearing), measured);
    let geom = geometry(graph);
    let weights = proximity_vector(&geom, edge, c1, c2);
    Ok(spread_estimates(belief, &geom, regressor, center, &weights))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefParams {
    /// Prior energy per meter.
    pub k: f64,
    /// Prior weight.
    pub w0: f64,
    pub c1: f64,
    /// Per-meter decay of the proximity weight.
    pub c2: f64,
    /// Share one regressor across bins and update every bin per measurement.
    pub cross_bin_transfer: bool,
}

impl Default for BeliefParams {
    fn default() -> Self {
        BeliefParams {
            k: 0.04,
            w0: 1.0,
            c1: 0.3,
            c2: 0.02,
            cross_bin_transfer: true,
        }
    }
}

impl BeliefParams {
    pub fn validate(&self) -> Result<(), BeliefError> {
        let finite = [self.k, self.w0, self.c1, self.c2].iter().all(|x| x.is_finite());
        if !finite || self.k <= 0.0 || self.w0 <= 0.0 || self.c1 <= 0.0 || self.c2 < 0.0 {
            return Err(BeliefError::InvalidArgument(format!(
                "belief parameters need k, w0, C1 > 0 and C2 >= 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Independent priors for `bins` bins; bin `b` draws from stream `b` of `seed`.
pub fn init_prior(
    graph: &Graph,
    bins: usize,
    k: f64,
    w0: f64,
    seed: u64,
) -> Result<Vec<EnergyBelief>, BeliefError> {
    (0..bins)
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            EnergyBelief::prior(graph, b, k, w0, &mut rng)
        })
        .collect()
}

/// All bins of one learner plus the regression model(s).
#[derive(Debug, Clone)]
pub struct BeliefStore {
    grid: ConfigGrid,
    params: BeliefParams,
    beliefs: Vec<EnergyBelief>,
    /// One shared model, or one per bin without cross-bin transfer.
    regressors: Vec<Regressor>,
    geom: Vec<EdgeGeometry>,
    clamp_events: u64,
}

impl BeliefStore {
    pub fn new(graph: &Graph, grid: ConfigGrid, params: BeliefParams, seed: u64) -> Result<Self, BeliefError> {
        params.validate()?;
        let beliefs = init_prior(graph, grid.len(), params.k, params.w0, seed)?;
        let n_reg = if params.cross_bin_transfer { 1 } else { grid.len() };
        Ok(BeliefStore {
            regressors: vec![Regressor::new(params.k); n_reg],
            grid,
            params,
            beliefs,
            geom: geometry(graph),
            clamp_events: 0,
        })
    }

    pub fn grid(&self) -> &ConfigGrid {
        &self.grid
    }

    pub fn params(&self) -> &BeliefParams {
        &self.params
    }

    pub fn bin_of(&self, config: &Configuration) -> usize {
        self.grid.nearest(config)
    }

    pub fn belief(&self, bin: usize) -> &EnergyBelief {
        &self.beliefs[bin]
    }

    pub fn beliefs(&self) -> &[EnergyBelief] {
        &self.beliefs
    }

    /// Outbound and homebound beliefs for a request configuration.
    pub fn pair(&self, config: &Configuration) -> (&EnergyBelief, &EnergyBelief) {
        (
            &self.beliefs[self.bin_of(config)],
            &self.beliefs[self.bin_of(&config.unloaded())],
        )
    }

    pub fn regressor(&self, bin: usize) -> &Regressor {
        &self.regressors[if self.params.cross_bin_transfer { 0 } else { bin }]
    }

    /// Number of times a variance was clamped at zero.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    /// Largest mean or measured energy over all bins and edges.
    pub fn max_mean(&self) -> f64 {
        self.beliefs.iter().map(EnergyBelief::max_mean).fold(0.0, f64::max)
    }

    /// Records a measurement taken under the exact configuration `config`.
    ///
    /// The value is stored in the nearest bin. Unknown edges of every bin
    /// (or only that bin without cross-bin transfer) absorb the regression
    /// estimate under their bin center.
    pub fn record(&mut self, edge: EdgeId, config: &Configuration, measured: f64) -> Result<(), BeliefError> {
        check_measurement(measured)?;
        let bin = self.bin_of(config);
        let was_known = self.beliefs[bin].is_known(edge);
        self.beliefs[bin].mark_known(edge, measured);
        if was_known {
            return Ok(());
        }
        let g = self.geom[edge];
        let x = features(config, g.length, g.bearing);
        let weights = proximity_vector(&self.geom, edge, self.params.c1, self.params.c2);
        if self.params.cross_bin_transfer {
            self.regressors[0].train(x, measured);
            for b in 0..self.beliefs.len() {
                let center = self.grid.center(b);
                self.clamp_events +=
                    spread_estimates(&mut self.beliefs[b], &self.geom, &self.regressors[0], &center, &weights);
            }
        } else {
            self.regressors[bin].train(x, measured);
            let center = self.grid.center(bin);
            self.clamp_events +=
                spread_estimates(&mut self.beliefs[bin], &self.geom, &self.regressors[bin], &center, &weights);
        }
        Ok(())
    }

    /// JSON array with one object per bin (same float conventions as map files).
    pub fn snapshot_json(&self) -> String {
        let mut out = String::from("[");
        for (b, belief) in self.beliefs.iter().enumerate() {
            if b > 0 {
                out.push(',');
            }
            belief.write_json(&mut out, &self.grid.center(b));
        }
        out.push(']');
        out
    }
}
