//! Exact event-driven simulation of the scaled two-species repulsive random
//! walk on the discrete torus.
//!
//! Each `(species, site)` pair is one channel of a [`RateTree`]. The channel of
//! species 1 at site `j` fires at rate `2M² n_u[j] (d1 + a12 n_v[j]/N)`; the
//! moving individual then goes left or right with probability ½.

use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fenwick::RateTree;
use crate::grid_ops::{GridError, GridVector, PeriodicLaplacian};
use crate::numeric::CompensatedSum;
use crate::params::{validate_schedule, ScheduleError, SktParams};

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("density profile of species {species:?} is negative ({value}) at site {site}")]
    NegativeDensity { species: Species, site: usize, value: f64 },
    #[error("density profile of species {species:?} is not finite at site {site}")]
    NonFiniteDensity { species: Species, site: usize },
    #[error("profiles have lengths {u} and {v}")]
    LengthMismatch { u: usize, v: usize },
    #[error("N must be positive")]
    ZeroScale,
    #[error("total jump rate is zero; the state is frozen")]
    Frozen,
    #[error("path was recorded without occupation integrals")]
    MissingIntegrals,
    #[error("path was recorded without an event log")]
    MissingEvents,
    #[error("invalid event log: {0}")]
    BadLog(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    U,
    V,
}

impl Species {
    fn code(self) -> u8 {
        match self {
            Species::U => 0,
            Species::V => 1,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Species::U),
            1 => Some(Species::V),
            _ => None,
        }
    }
}

/// Integer populations per site together with the density scale `N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsState {
    pub n: u64,
    pub nu: Vec<u64>,
    pub nv: Vec<u64>,
}

fn round_profile(profile: &[f64], n: u64, species: Species) -> Result<Vec<u64>, WalkError> {
    profile
        .iter()
        .enumerate()
        .map(|(site, &value)| {
            if !value.is_finite() {
                return Err(WalkError::NonFiniteDensity { species, site });
            }
            if value < 0.0 {
                return Err(WalkError::NegativeDensity { species, site, value });
            }
            Ok((value * n as f64).round_ties_even() as u64)
        })
        .collect()
}

impl CountsState {
    /// Rounds `N u0(x_i)` and `N v0(x_i)` to the nearest integer, ties to even.
    pub fn from_profiles(u0: &[f64], v0: &[f64], n: u64) -> Result<Self, WalkError> {
        if n == 0 {
            return Err(WalkError::ZeroScale);
        }
        if u0.len() != v0.len() {
            return Err(WalkError::LengthMismatch { u: u0.len(), v: v0.len() });
        }
        Ok(Self {
            n,
            nu: round_profile(u0, n, Species::U)?,
            nv: round_profile(v0, n, Species::V)?,
        })
    }

    /// Samples `u0`, `v0` at the nodes `k/M` and rounds.
    pub fn from_fns<F, G>(u0: F, v0: G, m: usize, n: u64) -> Result<Self, WalkError>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let xs = crate::grid_ops::nodes(m);
        let u: Vec<f64> = xs.iter().map(|&x| u0(x)).collect();
        let v: Vec<f64> = xs.iter().map(|&x| v0(x)).collect();
        Self::from_profiles(&u, &v, n)
    }

    pub fn sites(&self) -> usize {
        self.nu.len()
    }

    pub fn counts(&self, species: Species) -> &[u64] {
        match species {
            Species::U => &self.nu,
            Species::V => &self.nv,
        }
    }

    pub fn density(&self, species: Species) -> GridVector {
        let n = self.n as f64;
        self.counts(species).iter().map(|&c| c as f64 / n).collect()
    }

    pub fn u(&self) -> GridVector {
        self.density(Species::U)
    }

    pub fn v(&self) -> GridVector {
        self.density(Species::V)
    }

    pub fn totals(&self) -> (u64, u64) {
        (self.nu.iter().sum(), self.nv.iter().sum())
    }

    /// `‖U‖_{1,M} + ‖V‖_{1,M}`.
    pub fn mass_bound(&self) -> f64 {
        let (a, b) = self.totals();
        (a + b) as f64 / (self.n as f64 * self.sites() as f64)
    }
}

/// One jump: an individual of `species` leaves `site` towards `site + direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub species: Species,
    pub site: u32,
    pub direction: i8,
}

/// Seed of one replica: a study-wide seed and the replica index, which selects
/// an independent ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaSeed {
    pub study: u64,
    pub replica: u64,
}

impl ReplicaSeed {
    pub fn new(study: u64, replica: u64) -> Self {
        Self { study, replica }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.study);
        rng.set_stream(self.replica);
        rng
    }
}

/// Event-by-event simulator owning its state, rate tree and random stream.
#[derive(Debug, Clone)]
pub struct Simulator {
    state: CountsState,
    params: SktParams,
    tree: RateTree,
    time: f64,
    events: u64,
    rng: ChaCha8Rng,
}

impl Simulator {
    pub fn new(state: CountsState, params: SktParams, rng: ChaCha8Rng) -> Self {
        let m = state.sites();
        let mut weights = vec![0.0; 2 * m];
        for j in 0..m {
            weights[j] = channel_weight(&state, &params, Species::U, j);
            weights[m + j] = channel_weight(&state, &params, Species::V, j);
        }
        Self {
            state,
            params,
            tree: RateTree::new(weights),
            time: 0.0,
            events: 0,
            rng,
        }
    }

    pub fn state(&self) -> &CountsState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    pub fn channel_rate(&self, species: Species, site: usize) -> f64 {
        let m = self.state.sites();
        match species {
            Species::U => self.tree.weight(site),
            Species::V => self.tree.weight(m + site),
        }
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Draws the waiting time to the next event without applying it.
    fn draw_waiting_time(&mut self) -> Result<f64, WalkError> {
        let total = self.tree.total();
        if !(total > 0.0) {
            return Err(WalkError::Frozen);
        }
        let e: f64 = self.rng.sample(Exp1);
        Ok(e / total)
    }

    /// Picks a channel and a direction.
    fn choose(&mut self) -> Result<(Species, usize, i8), WalkError> {
        let m = self.state.sites();
        let channel = self.tree.sample(&mut self.rng).ok_or(WalkError::Frozen)?;
        let direction: i8 = if self.rng.random::<bool>() { 1 } else { -1 };
        Ok(if channel < m {
            (Species::U, channel, direction)
        } else {
            (Species::V, channel - m, direction)
        })
    }

    /// Moves one individual and refreshes the four affected channels.
    fn apply(&mut self, time: f64, species: Species, site: usize, direction: i8) -> JumpEvent {
        let m = self.state.sites();
        let target = neighbour(site, direction, m);
        let counts = match species {
            Species::U => &mut self.state.nu,
            Species::V => &mut self.state.nv,
        };
        debug_assert!(counts[site] > 0, "fired an empty channel");
        counts[site] -= 1;
        counts[target] += 1;
        for j in [site, target] {
            let wu = channel_weight(&self.state, &self.params, Species::U, j);
            let wv = channel_weight(&self.state, &self.params, Species::V, j);
            self.tree.set(j, wu);
            self.tree.set(m + j, wv);
        }
        self.time = time;
        self.events += 1;
        JumpEvent {
            time,
            species,
            site: site as u32,
            direction,
        }
    }

    /// Advances to the next event.
    pub fn step(&mut self) -> Result<JumpEvent, WalkError> {
        let dt = self.draw_waiting_time()?;
        let (species, site, direction) = self.choose()?;
        Ok(self.apply(self.time + dt, species, site, direction))
    }

    /// Largest relative gap between stored channel weights and weights
    /// recomputed from counts, together with the relative drift of the
    /// incremental total.
    pub fn audit(&self) -> (f64, f64) {
        let m = self.state.sites();
        let mut worst = 0.0f64;
        for j in 0..m {
            for (species, slot) in [(Species::U, j), (Species::V, m + j)] {
                let fresh = channel_weight(&self.state, &self.params, species, j);
                let stored = self.tree.weight(slot);
                let rel = if fresh == 0.0 {
                    stored.abs()
                } else {
                    (stored - fresh).abs() / fresh
                };
                worst = worst.max(rel);
            }
        }
        (worst, self.tree.total_drift())
    }

    /// Resums the rate tree from the stored weights.
    pub fn rebuild_tree(&mut self) {
        self.tree.rebuild();
    }
}

#[inline]
fn neighbour(site: usize, direction: i8, m: usize) -> usize {
    if direction > 0 {
        (site + 1) % m
    } else {
        (site + m - 1) % m
    }
}

/// `2M² n (d + a n_other/N)` for the given channel.
pub fn channel_weight(state: &CountsState, params: &SktParams, species: Species, site: usize) -> f64 {
    let m = state.sites() as f64;
    let n = state.n as f64;
    let (own, other, d, a) = match species {
        Species::U => (state.nu[site], state.nv[site], params.d1, params.a12),
        Species::V => (state.nv[site], state.nu[site], params.d2, params.a21),
    };
    2.0 * m * m * own as f64 * (d + a * other as f64 / n)
}

/// Cumulative per-site occupation integrals at one snapshot, in count units
/// (divide by `N` or `N²` for densities).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupation {
    /// `∫ n_u ds`
    pub u: Vec<f64>,
    /// `∫ n_u n_v ds`
    pub uv: Vec<f64>,
    /// `∫ n_v ds`
    pub v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub record_integrals: bool,
    pub record_events: bool,
    /// Resum the rate tree every this many events.
    pub rebuild_every: Option<u64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            record_integrals: true,
            record_events: false,
            rebuild_every: Some(1 << 16),
        }
    }
}

/// Snapshots of one simulated trajectory.
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub params: SktParams,
    pub times: Vec<f64>,
    pub states: Vec<CountsState>,
    pub occupation: Option<Vec<Occupation>>,
    pub events: Option<Vec<JumpEvent>>,
    pub event_count: u64,
}

struct LazyIntegrals {
    last: Vec<f64>,
    u: Vec<CompensatedSum>,
    uv: Vec<CompensatedSum>,
    v: Vec<CompensatedSum>,
}

impl LazyIntegrals {
    fn new(m: usize) -> Self {
        Self {
            last: vec![0.0; m],
            u: vec![CompensatedSum::new(); m],
            uv: vec![CompensatedSum::new(); m],
            v: vec![CompensatedSum::new(); m],
        }
    }

    fn advance(&mut self, state: &CountsState, j: usize, t: f64) {
        let dt = t - self.last[j];
        if dt > 0.0 {
            let a = state.nu[j] as f64;
            let b = state.nv[j] as f64;
            self.u[j].add(dt * a);
            self.uv[j].add(dt * a * b);
            self.v[j].add(dt * b);
        }
        self.last[j] = t;
    }

    fn snapshot(&mut self, state: &CountsState, t: f64) -> Occupation {
        for j in 0..state.sites() {
            self.advance(state, j, t);
        }
        Occupation {
            u: self.u.iter().map(|s| s.value()).collect(),
            uv: self.uv.iter().map(|s| s.value()).collect(),
            v: self.v.iter().map(|s| s.value()).collect(),
        }
    }
}

fn check_conservation(state: &CountsState, totals: (u64, u64)) {
    assert_eq!(state.totals(), totals, "population totals changed along the path");
}

/// Simulates one trajectory and records it at the schedule times.
pub fn simulate_path(
    state0: &CountsState,
    params: &SktParams,
    schedule: &[f64],
    seed: ReplicaSeed,
    opts: &SimOptions,
) -> Result<PathRecord, WalkError> {
    validate_schedule(schedule, 1)?;
    let m = state0.sites();
    let totals = state0.totals();
    let mut sim = Simulator::new(state0.clone(), *params, seed.rng());
    let mut lazy = opts.record_integrals.then(|| LazyIntegrals::new(m));
    let mut states = Vec::with_capacity(schedule.len());
    let mut occupation = opts.record_integrals.then(|| Vec::with_capacity(schedule.len()));
    let mut events = opts.record_events.then(Vec::new);

    let mut next_snapshot = 0;
    let t_final = *schedule.last().expect("validated schedule is nonempty");
    loop {
        let next_time = match sim.draw_waiting_time() {
            Ok(dt) => sim.time + dt,
            Err(WalkError::Frozen) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        while next_snapshot < schedule.len() && schedule[next_snapshot] < next_time {
            let ts = schedule[next_snapshot];
            check_conservation(&sim.state, totals);
            states.push(sim.state.clone());
            if let (Some(lazy), Some(occ)) = (lazy.as_mut(), occupation.as_mut()) {
                occ.push(lazy.snapshot(&sim.state, ts));
            }
            next_snapshot += 1;
        }
        if next_snapshot == schedule.len() || next_time > t_final {
            break;
        }
        let (species, site, direction) = sim.choose()?;
        if let Some(lazy) = lazy.as_mut() {
            lazy.advance(&sim.state, site, next_time);
            lazy.advance(&sim.state, neighbour(site, direction, m), next_time);
        }
        let ev = sim.apply(next_time, species, site, direction);
        debug_assert_eq!(sim.state.totals(), totals);
        if let Some(log) = events.as_mut() {
            log.push(ev);
        }
        if let Some(k) = opts.rebuild_every {
            if k > 0 && sim.events % k == 0 {
                sim.rebuild_tree();
            }
        }
    }
    Ok(PathRecord {
        params: *params,
        times: schedule.to_vec(),
        states,
        occupation,
        events,
        event_count: sim.events,
    })
}

/// Martingale parts of both species at one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesPair {
    pub u: GridVector,
    pub v: GridVector,
}

fn occupation_of(path: &PathRecord) -> Result<&[Occupation], WalkError> {
    path.occupation.as_deref().ok_or(WalkError::MissingIntegrals)
}

/// Drift integrals `∫ Δ_M(d1 U + a12 U⊙V)` and the species-2 analog.
pub fn drift_integrals(path: &PathRecord, lap: &PeriodicLaplacian) -> Result<Vec<SpeciesPair>, WalkError> {
    let occ = occupation_of(path)?;
    let p = path.params;
    let n = path.states[0].n as f64;
    occ.iter()
        .map(|o| {
            let gu: Vec<f64> = (0..o.u.len())
                .map(|j| p.d1 * o.u[j] / n + p.a12 * o.uv[j] / (n * n))
                .collect();
            let gv: Vec<f64> = (0..o.v.len())
                .map(|j| p.d2 * o.v[j] / n + p.a21 * o.uv[j] / (n * n))
                .collect();
            Ok(SpeciesPair {
                u: lap.apply(&gu)?,
                v: lap.apply(&gv)?,
            })
        })
        .collect()
}

/// `ℳ(t_s) = U(t_s) - U(0) - ∫₀^{t_s} Δ_M(d1 U + a12 U⊙V)` at every snapshot.
pub fn extract_martingale(path: &PathRecord) -> Result<Vec<SpeciesPair>, WalkError> {
    let m = path.states[0].sites();
    let lap = PeriodicLaplacian::new(m)?;
    let drifts = drift_integrals(path, &lap)?;
    let s0 = &path.states[0];
    let n = s0.n as f64;
    Ok(path
        .states
        .iter()
        .zip(drifts)
        .map(|(s, d)| {
            let du = |j: usize| (s.nu[j] as i64 - s0.nu[j] as i64) as f64 / n;
            let dv = |j: usize| (s.nv[j] as i64 - s0.nv[j] as i64) as f64 / n;
            SpeciesPair {
                u: (0..m).map(|j| du(j) - d.u[j]).collect(),
                v: (0..m).map(|j| dv(j) - d.v[j]).collect(),
            }
        })
        .collect())
}

/// Pathwise predictable quadratic variation `⟨ℳ_i⟩(t_s)` of every site at
/// every snapshot.
pub fn predicted_qv(path: &PathRecord) -> Result<Vec<SpeciesPair>, WalkError> {
    let occ = occupation_of(path)?;
    let p = path.params;
    let m = path.states[0].sites();
    let n = path.states[0].n as f64;
    let scale = (m * m) as f64 / n;
    let stencil = |x: &[f64], i: usize| 2.0 * x[i] + x[(i + 1) % m] + x[(i + m - 1) % m];
    Ok(occ
        .iter()
        .map(|o| {
            let a: Vec<f64> = o.u.iter().map(|x| x / n).collect();
            let b: Vec<f64> = o.uv.iter().map(|x| x / (n * n)).collect();
            let c: Vec<f64> = o.v.iter().map(|x| x / n).collect();
            SpeciesPair {
                u: (0..m)
                    .map(|i| scale * (p.d1 * stencil(&a, i) + p.a12 * stencil(&b, i)))
                    .collect(),
                v: (0..m)
                    .map(|i| scale * (p.d2 * stencil(&c, i) + p.a21 * stencil(&b, i)))
                    .collect(),
            }
        })
        .collect())
}

/// Replays an event log from `state0`, calling `visit(time, state)` after each
/// event.
pub fn replay<F: FnMut(f64, &CountsState)>(state0: &CountsState, events: &[JumpEvent], mut visit: F) {
    let m = state0.sites();
    let mut s = state0.clone();
    for ev in events {
        let j = ev.site as usize;
        let target = neighbour(j, ev.direction, m);
        let counts = match ev.species {
            Species::U => &mut s.nu,
            Species::V => &mut s.nv,
        };
        counts[j] -= 1;
        counts[target] += 1;
        visit(ev.time, &s);
    }
}

const LOG_MAGIC: &[u8; 4] = b"SKTW";
const LOG_VERSION: u16 = 1;
const RECORD_BYTES: usize = 14;

/// Header of a binary event log.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLogHeader {
    pub m: u32,
    pub n: u64,
    pub params: SktParams,
}

/// Writes `events` as little-endian records after a versioned header.
pub fn write_event_log<W: Write>(mut w: W, header: &EventLogHeader, events: &[JumpEvent]) -> io::Result<()> {
    w.write_all(LOG_MAGIC)?;
    w.write_all(&LOG_VERSION.to_le_bytes())?;
    w.write_all(&header.m.to_le_bytes())?;
    w.write_all(&header.n.to_le_bytes())?;
    for x in [header.params.d1, header.params.d2, header.params.a12, header.params.a21] {
        w.write_all(&x.to_le_bytes())?;
    }
    w.write_all(&(events.len() as u64).to_le_bytes())?;
    let mut rec = [0u8; RECORD_BYTES];
    for ev in events {
        rec[0..8].copy_from_slice(&ev.time.to_le_bytes());
        rec[8] = ev.species.code();
        rec[9..13].copy_from_slice(&ev.site.to_le_bytes());
        rec[13] = ev.direction as u8;
        w.write_all(&rec)?;
    }
    w.flush()
}

fn read_array<R: Read, const K: usize>(r: &mut R) -> Result<[u8; K], WalkError> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_event_log<R: Read>(mut r: R) -> Result<(EventLogHeader, Vec<JumpEvent>), WalkError> {
    let magic: [u8; 4] = read_array(&mut r)?;
    if &magic != LOG_MAGIC {
        return Err(WalkError::BadLog("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_array(&mut r)?);
    if version != LOG_VERSION {
        return Err(WalkError::BadLog(format!("unsupported version {version}")));
    }
    let m = u32::from_le_bytes(read_array(&mut r)?);
    let n = u64::from_le_bytes(read_array(&mut r)?);
    let mut p = [0.0; 4];
    for x in &mut p {
        *x = f64::from_le_bytes(read_array(&mut r)?);
    }
    let count = u64::from_le_bytes(read_array(&mut r)?);
    let mut events = Vec::with_capacity(count.min(1 << 24) as usize);
    for _ in 0..count {
        let rec: [u8; RECORD_BYTES] = read_array(&mut r)?;
        let time = f64::from_le_bytes(rec[0..8].try_into().expect("8 bytes"));
        let species = Species::from_code(rec[8])
            .ok_or_else(|| WalkError::BadLog(format!("species code {}", rec[8])))?;
        let site = u32::from_le_bytes(rec[9..13].try_into().expect("4 bytes"));
        let direction = rec[13] as i8;
        if direction != 1 && direction != -1 {
            return Err(WalkError::BadLog(format!("direction {direction}")));
        }
        if site >= m {
            return Err(WalkError::BadLog(format!("site {site} on {m} sites")));
        }
        events.push(JumpEvent {
            time,
            species,
            site,
            direction,
        });
    }
    Ok((
        EventLogHeader {
            m,
            n,
            params: SktParams::new(p[0], p[1], p[2], p[3]),
        },
        events,
    ))
}
