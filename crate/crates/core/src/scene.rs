//! Synthetic street scenario: users and blockers moving along a street in
//! front of one base station, a two-path geometric channel, and
//! occupancy-style camera feature maps.
//!
//! Geometry: the base station's uniform linear array lies along the x axis
//! with broadside towards +y. Users walk in a lane far from the array,
//! blockers (vehicles, modelled as discs) drive in a lane in between, and a
//! building facade at `wall_y` reflects a secondary path.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::codebook::{beam_gain, steering_vector, BeamIndex, Codebook, CodebookConfig, CodebookKind};
use crate::dataset::{Dataset, InstanceRecord};
use crate::error::{Error, Result};
use crate::feature::FeatureMap;
use crate::rng;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn dist(self, o: Point) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Street extent along x, centred on the base station.
    pub street_length: f64,
    pub num_users: usize,
    pub num_blockers: usize,
    pub user_speed_range: (f64, f64),
    pub blocker_speed_range: (f64, f64),
    /// y interval of the user lane.
    pub user_lane: (f64, f64),
    /// y interval of the blocker lane.
    pub blocker_lane: (f64, f64),
    pub blocker_radius_range: (f64, f64),
    /// y coordinate of the reflecting facade.
    pub wall_y: f64,
    pub bs_position: Point,
    pub num_cameras: usize,
    /// Total angular coverage of all cameras, degrees either side of broadside.
    pub camera_half_span_deg: f64,
    /// Depth range mapped onto feature-map rows.
    pub camera_depth_range: (f64, f64),
    pub feature_map_dims: [usize; 3],
    pub timestep: f64,
    pub duration: usize,
    pub tau: usize,
    pub horizon: usize,
    pub carrier_hz: f64,
    /// LOS amplitude factor while blocked.
    pub blocked_gain: f64,
    pub reflection_gain: f64,
    pub beam_codebook: CodebookConfig,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            street_length: 60.0,
            num_users: 24,
            num_blockers: 6,
            user_speed_range: (0.0, 6.0),
            blocker_speed_range: (2.0, 6.0),
            user_lane: (15.0, 25.0),
            blocker_lane: (6.0, 10.0),
            blocker_radius_range: (1.0, 2.0),
            wall_y: 35.0,
            bs_position: Point::new(0.0, 0.0),
            num_cameras: 3,
            camera_half_span_deg: 65.0,
            camera_depth_range: (5.0, 40.0),
            feature_map_dims: [13, 13, 8],
            timestep: 0.1,
            duration: 14,
            tau: 8,
            horizon: 5,
            carrier_hz: 28e9,
            blocked_gain: 0.1,
            reflection_gain: 0.3,
            beam_codebook: CodebookConfig {
                num_beams: 128,
                num_antennas: 128,
                kind: CodebookKind::Steering,
                seed: 0,
            },
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: &str| Err(Error::Config(m.to_string()));
        let range_ok = |r: (f64, f64)| r.0 >= 0.0 && r.0 <= r.1 && r.1.is_finite();
        if self.tau == 0 || self.horizon == 0 {
            return cfg_err("tau and horizon must be >= 1");
        }
        if self.duration < self.tau + self.horizon {
            return Err(Error::Config(format!(
                "duration {} shorter than tau + m = {}",
                self.duration,
                self.tau + self.horizon
            )));
        }
        if !range_ok(self.user_speed_range) || !range_ok(self.blocker_speed_range) {
            return cfg_err("speed ranges must be non-negative intervals");
        }
        if !range_ok(self.blocker_radius_range) {
            return cfg_err("blocker radius range must be a non-negative interval");
        }
        if self.user_lane.0 > self.user_lane.1 || self.blocker_lane.0 > self.blocker_lane.1 {
            return cfg_err("lanes must be intervals");
        }
        if !(self.street_length > 0.0 && self.timestep > 0.0) {
            return cfg_err("street_length and timestep must be positive");
        }
        if self.num_cameras == 0 || self.feature_map_dims.iter().any(|&d| d == 0) {
            return cfg_err("need at least one camera and non-empty feature maps");
        }
        if !(self.camera_depth_range.0 < self.camera_depth_range.1) {
            return cfg_err("camera depth range must be increasing");
        }
        if self.wall_y <= self.user_lane.1 {
            return cfg_err("reflecting wall must lie beyond the user lane");
        }
        self.beam_codebook.validate()
    }

    fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Angular interval `(lo, hi)` in radians covered by `camera`.
    pub fn camera_fov(&self, camera: usize) -> (f64, f64) {
        let span = 2.0 * self.camera_half_span_deg.to_radians();
        let w = span / self.num_cameras as f64;
        let lo = -self.camera_half_span_deg.to_radians() + camera as f64 * w;
        (lo, lo + w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub config: SceneConfig,
    /// `users[t][u]`
    pub users: Vec<Vec<Point>>,
    /// `blockers[t][b]`
    pub blockers: Vec<Vec<Point>>,
    pub blocker_radii: Vec<f64>,
    /// `los[t][u]`: true iff the BS-user segment clears every blocker disc.
    pub los: Vec<Vec<bool>>,
    /// `beams[t][u]`: optimal beam under the configured beam codebook.
    pub beams: Vec<Vec<BeamIndex>>,
}

impl ScenarioTrace {
    pub fn duration(&self) -> usize {
        self.users.len()
    }

    pub fn num_users(&self) -> usize {
        self.config.num_users
    }
}

struct Mover {
    pos: Point,
    velocity: f64,
}

impl Mover {
    fn spawn(rng: &mut rng::Rng, half_len: f64, lane: (f64, f64), speed: (f64, f64)) -> Self {
        let x = rng.random_range(-half_len..=half_len);
        let y = if lane.0 < lane.1 { rng.random_range(lane.0..=lane.1) } else { lane.0 };
        let s = if speed.0 < speed.1 { rng.random_range(speed.0..=speed.1) } else { speed.0 };
        let dir = if rng.random::<bool>() { 1.0 } else { -1.0 };
        Self { pos: Point::new(x, y), velocity: dir * s }
    }

    /// Constant-speed motion, bouncing off the street ends.
    fn step(&mut self, dt: f64, half_len: f64) {
        let mut x = self.pos.x + self.velocity * dt;
        if x > half_len {
            x = 2.0 * half_len - x;
            self.velocity = -self.velocity;
        } else if x < -half_len {
            x = -2.0 * half_len - x;
            self.velocity = -self.velocity;
        }
        self.pos.x = x;
    }
}

pub fn simulate_scene(cfg: &SceneConfig) -> Result<ScenarioTrace> {
    cfg.validate()?;
    let cb = Codebook::generate(&cfg.beam_codebook)?;
    let half = cfg.street_length / 2.0;
    let mut rng = rng::rng_for(cfg.seed, 0x5CE7E);
    let mut users: Vec<Mover> =
        (0..cfg.num_users).map(|_| Mover::spawn(&mut rng, half, cfg.user_lane, cfg.user_speed_range)).collect();
    let mut blockers: Vec<Mover> = (0..cfg.num_blockers)
        .map(|_| Mover::spawn(&mut rng, half, cfg.blocker_lane, cfg.blocker_speed_range))
        .collect();
    let radii: Vec<f64> = (0..cfg.num_blockers)
        .map(|_| {
            let (lo, hi) = cfg.blocker_radius_range;
            if lo < hi {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        })
        .collect();

    let mut trace = ScenarioTrace {
        config: cfg.clone(),
        users: Vec::with_capacity(cfg.duration),
        blockers: Vec::with_capacity(cfg.duration),
        blocker_radii: radii,
        los: Vec::with_capacity(cfg.duration),
        beams: Vec::with_capacity(cfg.duration),
    };
    for t in 0..cfg.duration {
        if t > 0 {
            users.iter_mut().for_each(|m| m.step(cfg.timestep, half));
            blockers.iter_mut().for_each(|m| m.step(cfg.timestep, half));
        }
        let up: Vec<Point> = users.iter().map(|m| m.pos).collect();
        let bp: Vec<Point> = blockers.iter().map(|m| m.pos).collect();
        let los = up
            .iter()
            .map(|&u| !bp.iter().zip(&trace.blocker_radii).any(|(&b, &r)| segment_hits_disc(cfg.bs_position, u, b, r)))
            .collect();
        trace.users.push(up);
        trace.blockers.push(bp);
        trace.los.push(los);
    }
    for t in 0..cfg.duration {
        let beams = (0..cfg.num_users)
            .map(|u| channel_response(&trace, t, u).map(|h| optimal_beam(&h, &cb)))
            .collect::<Result<Vec<_>>>()?;
        trace.beams.push(beams);
    }
    Ok(trace)
}

/// Whether segment `a-b` passes within `r` of `c`.
pub fn segment_hits_disc(a: Point, b: Point, c: Point, r: f64) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 { (((c.x - a.x) * dx + (c.y - a.y) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let p = Point::new(a.x + s * dx, a.y + s * dy);
    p.dist(c) < r
}

/// Sine of the angle from array broadside towards `p`.
fn sine_direction(bs: Point, p: Point) -> f64 {
    (p.x - bs.x) / bs.dist(p)
}

/// Mirror image of `p` across the facade.
pub fn mirror_point(cfg: &SceneConfig, p: Point) -> Point {
    Point::new(p.x, 2.0 * cfg.wall_y - p.y)
}

/// Downlink channel of `user` at step `t`: a LOS steering path (attenuated
/// while blocked) plus one facade reflection whose phase follows the excess
/// path length. Returned in the real-stacked complex layout, length `2N`.
pub fn channel_response(trace: &ScenarioTrace, t: usize, user: usize) -> Result<Vec<f64>> {
    if t >= trace.duration() {
        return Err(Error::Index { index: t, len: trace.duration() });
    }
    if user >= trace.num_users() {
        return Err(Error::Index { index: user, len: trace.num_users() });
    }
    let cfg = &trace.config;
    let n = cfg.beam_codebook.num_antennas;
    let bs = cfg.bs_position;
    let pos = trace.users[t][user];
    let los_amp = if trace.los[t][user] { 1.0 } else { cfg.blocked_gain };

    let mut h = vec![0.0; 2 * n];
    if los_amp != 0.0 {
        let a = steering_vector(sine_direction(bs, pos), n);
        h.iter_mut().zip(&a).for_each(|(h, a)| *h += los_amp * a);
    }
    if cfg.reflection_gain != 0.0 {
        let image = mirror_point(cfg, pos);
        let excess = bs.dist(image) - bs.dist(pos);
        let phase = -2.0 * PI * excess / cfg.wavelength();
        let (c, s) = (phase.cos(), phase.sin());
        let a = steering_vector(sine_direction(bs, image), n);
        for k in 0..n {
            let (ar, ai) = (a[k], a[n + k]);
            h[k] += cfg.reflection_gain * (c * ar - s * ai);
            h[n + k] += cfg.reflection_gain * (s * ar + c * ai);
        }
    }
    Ok(h)
}

/// `argmax_q |<f_q, h>|^2`, lowest index on ties.
pub fn optimal_beam(h: &[f64], cb: &Codebook) -> BeamIndex {
    let mut best = 0;
    let mut best_gain = f64::NEG_INFINITY;
    for (q, f) in cb.vectors().outer_iter().enumerate() {
        let g = beam_gain(f, h);
        if g > best_gain {
            best = q;
            best_gain = g;
        }
    }
    best
}

fn object_angle_depth(cfg: &SceneConfig, p: Point) -> (f64, f64) {
    let bs = cfg.bs_position;
    ((p.x - bs.x).atan2(p.y - bs.y), bs.dist(p))
}

/// Camera whose field of view contains `p`; lowest index on overlap, nearest
/// by angle when no camera covers it.
pub fn camera_for(cfg: &SceneConfig, p: Point) -> usize {
    let (theta, _) = object_angle_depth(cfg, p);
    let mut nearest = (0, f64::INFINITY);
    for c in 0..cfg.num_cameras {
        let (lo, hi) = cfg.camera_fov(c);
        if theta >= lo && theta <= hi {
            return c;
        }
        let d = if theta < lo { lo - theta } else { theta - hi };
        if d < nearest.1 {
            nearest = (c, d);
        }
    }
    nearest.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectClass {
    User,
    Blocker,
}

/// Blob width (cells) used by channel `ch`; channels alternate user/blocker
/// classes and widen every second channel.
fn channel_layout(ch: usize) -> (ObjectClass, f64) {
    let class = if ch % 2 == 0 { ObjectClass::User } else { ObjectClass::Blocker };
    (class, 0.6 + 0.4 * (ch / 2) as f64)
}

/// Continuous grid coordinate `(row, col)` of `p` in `camera`'s image, or
/// `None` when outside the field of view.
pub fn project(cfg: &SceneConfig, camera: usize, p: Point) -> Option<(f64, f64)> {
    let [h, w, _] = cfg.feature_map_dims;
    let (theta, depth) = object_angle_depth(cfg, p);
    let (lo, hi) = cfg.camera_fov(camera);
    let (dmin, dmax) = cfg.camera_depth_range;
    if theta < lo || theta > hi || depth < dmin || depth > dmax {
        return None;
    }
    let row = (depth - dmin) / (dmax - dmin) * (h - 1) as f64;
    let col = (theta - lo) / (hi - lo) * (w - 1) as f64;
    Some((row, col))
}

/// Deposit Gaussian blobs for `objects` into an `H x W x C` grid. Blobs are
/// truncated at three widths; the sum is clipped to `[0, 1]`.
pub fn render_objects(cfg: &SceneConfig, camera: usize, objects: &[(Point, ObjectClass)]) -> FeatureMap {
    let [h, w, c] = cfg.feature_map_dims;
    let mut fm = FeatureMap::zeros([h, w, c]);
    for &(p, class) in objects {
        let Some((r0, c0)) = project(cfg, camera, p) else { continue };
        for ch in 0..c {
            let (ch_class, width) = channel_layout(ch);
            if ch_class != class {
                continue;
            }
            let reach = 3.0 * width;
            let rows = ((r0 - reach).ceil().max(0.0) as usize)..=((r0 + reach).floor().min((h - 1) as f64) as usize);
            for i in rows {
                let cols =
                    ((c0 - reach).ceil().max(0.0) as usize)..=((c0 + reach).floor().min((w - 1) as f64) as usize);
                for j in cols {
                    let d2 = (i as f64 - r0).powi(2) + (j as f64 - c0).powi(2);
                    if d2 <= reach * reach {
                        fm.add(i, j, ch, (-d2 / (2.0 * width * width)).exp());
                    }
                }
            }
        }
    }
    fm.clip(0.0, 1.0);
    fm
}

pub fn render_feature_map(trace: &ScenarioTrace, t: usize, camera: usize) -> Result<FeatureMap> {
    let cfg = &trace.config;
    if camera >= cfg.num_cameras {
        return Err(Error::Index { index: camera, len: cfg.num_cameras });
    }
    if t >= trace.duration() {
        return Err(Error::Index { index: t, len: trace.duration() });
    }
    let objects: Vec<(Point, ObjectClass)> = trace.users[t]
        .iter()
        .map(|&p| (p, ObjectClass::User))
        .chain(trace.blockers[t].iter().map(|&p| (p, ObjectClass::Blocker)))
        .collect();
    Ok(render_objects(cfg, camera, &objects))
}

pub fn image_id(prefix: &str, camera: usize, t: usize) -> String {
    format!("{prefix}c{camera}_t{t:05}")
}

/// Stride-1 sliding windows per user, user-major. Each record holds `tau`
/// observed beams with the image of the camera covering the user at that
/// step, followed by the next `m` optimal beams as labels.
pub fn generate_instances(trace: &ScenarioTrace, tau: usize, m: usize, prefix: &str) -> Result<Vec<InstanceRecord>> {
    if tau == 0 || m == 0 {
        return Err(Error::Config("tau and m must be >= 1".into()));
    }
    if trace.duration() < tau + m {
        return Err(Error::Config(format!(
            "trace of {} steps is shorter than tau + m = {}",
            trace.duration(),
            tau + m
        )));
    }
    let cfg = &trace.config;
    let mut out = Vec::with_capacity(trace.num_users() * (trace.duration() - tau - m + 1));
    for u in 0..trace.num_users() {
        for start in 0..=(trace.duration() - tau - m) {
            let obs = start..start + tau;
            out.push(InstanceRecord {
                beams: obs.clone().map(|t| trace.beams[t][u]).collect(),
                features: obs.clone().map(|t| image_id(prefix, camera_for(cfg, trace.users[t][u]), t)).collect(),
                labels: (start + tau..start + tau + m).map(|t| trace.beams[t][u]).collect(),
                user_id: format!("{prefix}u{u}"),
                t: (start + tau - 1) as i64,
            });
        }
    }
    Ok(out)
}

/// Instances of one trace together with the rendered images they reference.
pub fn build_dataset(trace: &ScenarioTrace, name: &str, prefix: &str) -> Result<Dataset> {
    let cfg = &trace.config;
    let records = generate_instances(trace, cfg.tau, cfg.horizon, prefix)?;
    let mut store = BTreeMap::new();
    for r in &records {
        for id in &r.features {
            if store.contains_key(id) {
                continue;
            }
            let (cam, t) = parse_image_id(prefix, id).expect("ids generated above");
            store.insert(id.clone(), Arc::new(render_feature_map(trace, t, cam)?));
        }
    }
    Dataset::new(name, records, store)
}

fn parse_image_id(prefix: &str, id: &str) -> Option<(usize, usize)> {
    let rest = id.strip_prefix(prefix)?.strip_prefix('c')?;
    let (cam, t) = rest.split_once("_t")?;
    Some((cam.parse().ok()?, t.parse().ok()?))
}

/// Several independent episodes of the same scene configuration,
/// concatenated episode by episode so that episode boundaries are clean cut
/// points for leakage-free splitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub scene: SceneConfig,
    pub episodes: usize,
    pub name: String,
}

impl Default for CorpusConfig {
    /// 120 episodes of the default scene: 5760 instances.
    fn default() -> Self {
        Self { scene: SceneConfig::default(), episodes: 120, name: "synth".into() }
    }
}

pub fn simulate_corpus(cfg: &CorpusConfig) -> Result<Dataset> {
    if cfg.episodes == 0 {
        return Err(Error::Config("corpus needs at least one episode".into()));
    }
    let mut parts = Vec::with_capacity(cfg.episodes);
    for e in 0..cfg.episodes {
        let mut scene = cfg.scene.clone();
        scene.seed = rng::derive_seed(cfg.scene.seed, e as u64);
        let trace = simulate_scene(&scene)?;
        let prefix = format!("{}e{e}_", cfg.name);
        parts.push(build_dataset(&trace, &format!("{}#{e}", cfg.name), &prefix)?);
    }
    crate::dataset::union(cfg.name.clone(), parts.iter())
}
