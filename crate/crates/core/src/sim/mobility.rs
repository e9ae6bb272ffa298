//! Vehicle movement: a synthetic constant-speed lane follower and a CSV
//! trace replayer.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::Deserialize;

use super::scenario::{Scenario, World};
use crate::channel::Point;
use crate::error::{Error, Result};

pub type VehicleId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: VehicleId,
    /// Index into `World::routes`.
    pub route: usize,
    /// Position in the route's zone sequence.
    pub leg: usize,
    /// Meters travelled inside the current zone.
    pub offset_m: f64,
    pub speed_factor: f64,
    pub zone: usize,
    pub position: Point,
    pub speed: f64,
}

impl VehicleState {
    fn refresh(&mut self, world: &World, scenario: &Scenario) {
        self.zone = world.routes[self.route][self.leg];
        self.position = world.point_in_zone(self.zone, self.offset_m);
        self.speed = scenario.speed_limit(world.zones[self.zone].road) * self.speed_factor;
    }

    /// Seconds until the vehicle leaves its current zone.
    pub fn dwell_s(&self, world: &World) -> f64 {
        if self.speed <= 0.0 {
            return f64::INFINITY;
        }
        (world.zone_length_m - self.offset_m) / self.speed
    }
}

/// Places `count` vehicles uniformly on the world's routes.
pub fn place_vehicles<R: Rng>(world: &World, scenario: &Scenario, count: usize, rng: &mut R) -> Vec<VehicleState> {
    let [lo, hi] = scenario.traffic.speed_factor;
    (0..count)
        .map(|i| {
            let route = rng.random_range(0..world.routes.len());
            let leg = rng.random_range(0..world.routes[route].len());
            let offset_m = rng.random::<f64>() * world.zone_length_m;
            let speed_factor = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let mut v = VehicleState {
                id: i as VehicleId,
                route,
                leg,
                offset_m,
                speed_factor,
                zone: 0,
                position: [0.0, 0.0],
                speed: 0.0,
            };
            v.refresh(world, scenario);
            v
        })
        .collect()
}

/// Moves one vehicle forward by `dt` seconds along its route, wrapping at the
/// end. Speed is piecewise constant per road.
pub fn advance_vehicle(v: &mut VehicleState, world: &World, scenario: &Scenario, dt: f64) {
    let mut left = dt;
    let legs = world.routes[v.route].len();
    while left > 0.0 && v.speed > 0.0 {
        let to_exit = (world.zone_length_m - v.offset_m) / v.speed;
        if left < to_exit {
            v.offset_m += v.speed * left;
            break;
        }
        left -= to_exit;
        v.leg = (v.leg + 1) % legs;
        v.offset_m = 0.0;
        v.refresh(world, scenario);
    }
    v.refresh(world, scenario);
}

pub fn advance_vehicles(vehicles: &mut [VehicleState], world: &World, scenario: &Scenario, dt: f64) {
    for v in vehicles {
        advance_vehicle(v, world, scenario, dt);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct TraceRow {
    pub time_s: f64,
    pub vehicle_id: VehicleId,
    pub x_m: f64,
    pub y_m: f64,
}

/// Per-vehicle position samples, replayed with linear interpolation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MobilityTrace {
    tracks: BTreeMap<VehicleId, Vec<(f64, Point)>>,
}

impl MobilityTrace {
    pub fn from_rows(rows: impl IntoIterator<Item = TraceRow>) -> Result<Self> {
        let mut tracks: BTreeMap<VehicleId, Vec<(f64, Point)>> = BTreeMap::new();
        for r in rows {
            if ![r.time_s, r.x_m, r.y_m].iter().all(|v| v.is_finite()) {
                return Err(Error::Trace(format!("non-finite sample for vehicle {}", r.vehicle_id)));
            }
            tracks.entry(r.vehicle_id).or_default().push((r.time_s, [r.x_m, r.y_m]));
        }
        for (id, track) in tracks.iter_mut() {
            track.sort_by(|a, b| a.0.total_cmp(&b.0));
            if track.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Trace(format!("duplicate timestamp for vehicle {id}")));
            }
        }
        Ok(Self { tracks })
    }

    /// Reads `time_s,vehicle_id,x_m,y_m` rows with a header line.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows = rdr
            .deserialize::<TraceRow>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Trace(e.to_string()))?;
        Self::from_rows(rows)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn vehicle_ids(&self) -> impl Iterator<Item = VehicleId> + '_ {
        self.tracks.keys().copied()
    }

    /// Interpolated position, or `None` outside the vehicle's sampled span.
    pub fn position_at(&self, id: VehicleId, t: f64) -> Option<Point> {
        let track = self.tracks.get(&id)?;
        let (first, last) = (track.first()?, track.last()?);
        if t < first.0 || t > last.0 {
            return None;
        }
        let i = track.partition_point(|s| s.0 <= t);
        if i == 0 {
            return Some(first.1);
        }
        let (t0, p0) = track[i - 1];
        if t == t0 || i == track.len() {
            return Some(p0);
        }
        let (t1, p1) = track[i];
        let a = (t - t0) / (t1 - t0);
        Some([p0[0] + a * (p1[0] - p0[0]), p0[1] + a * (p1[1] - p0[1])])
    }

    /// Speed over the sample interval containing `t`.
    pub fn speed_at(&self, id: VehicleId, t: f64) -> Option<f64> {
        let track = self.tracks.get(&id)?;
        if track.len() < 2 {
            return self.position_at(id, t).map(|_| 0.0);
        }
        self.position_at(id, t)?;
        let i = track.partition_point(|s| s.0 <= t).clamp(1, track.len() - 1);
        let (t0, p0) = track[i - 1];
        let (t1, p1) = track[i];
        Some(crate::channel::distance_m(p0, p1) / (t1 - t0))
    }
}

/// Where vehicles are and where they will be.
#[derive(Debug, Clone)]
pub enum Fleet {
    Synthetic(Vec<VehicleState>),
    Trace { trace: std::sync::Arc<MobilityTrace>, time_s: f64 },
}

/// A vehicle as seen at slot start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observed {
    pub id: VehicleId,
    pub zone: usize,
    pub speed: f64,
    pub dwell_s: f64,
}

impl Fleet {
    pub fn observe(&self, world: &World) -> Vec<Observed> {
        match self {
            Fleet::Synthetic(vs) => vs
                .iter()
                .map(|v| Observed {
                    id: v.id,
                    zone: v.zone,
                    speed: v.speed,
                    dwell_s: v.dwell_s(world),
                })
                .collect(),
            Fleet::Trace { trace, time_s } => trace
                .vehicle_ids()
                .filter_map(|id| {
                    let p = trace.position_at(id, *time_s)?;
                    let speed = trace.speed_at(id, *time_s).unwrap_or(0.0);
                    Some(Observed {
                        id,
                        zone: world.nearest_zone(p),
                        speed,
                        dwell_s: if speed > 0.0 {
                            0.5 * world.zone_length_m / speed
                        } else {
                            f64::INFINITY
                        },
                    })
                })
                .collect(),
        }
    }

    pub fn advance(&mut self, world: &World, scenario: &Scenario, dt: f64) {
        match self {
            Fleet::Synthetic(vs) => advance_vehicles(vs, world, scenario, dt),
            Fleet::Trace { time_s, .. } => *time_s += dt,
        }
    }

    /// Zone of vehicle `id` after `dt` more seconds; `None` when it has left.
    pub fn zone_after(&self, world: &World, scenario: &Scenario, id: VehicleId, dt: f64) -> Option<usize> {
        match self {
            Fleet::Synthetic(vs) => {
                let mut v = vs.iter().find(|v| v.id == id)?.clone();
                advance_vehicle(&mut v, world, scenario, dt);
                Some(v.zone)
            }
            Fleet::Trace { trace, time_s } => trace.position_at(id, time_s + dt).map(|p| world.nearest_zone(p)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Scenario, World) {
        let mut s = Scenario::default();
        s.grid.zone_length_m = 40.0;
        s.traffic.speed_limits_mps = vec![10.0];
        s.traffic.speed_factor = [1.0, 1.0];
        let w = World::build(&s);
        (s, w)
    }

    fn at_zone_start(w: &World, s: &Scenario, leg: usize) -> VehicleState {
        let mut v = VehicleState {
            id: 0,
            route: 0,
            leg,
            offset_m: 0.0,
            speed_factor: 1.0,
            zone: 0,
            position: [0.0; 2],
            speed: 0.0,
        };
        v.refresh(w, s);
        v
    }

    #[test]
    fn zero_dt_is_noop() {
        let (s, w) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut vs = place_vehicles(&w, &s, 5, &mut rng);
        let before = vs.clone();
        advance_vehicles(&mut vs, &w, &s, 0.0);
        assert_eq!(vs, before);
    }

    #[test]
    fn four_seconds_at_ten_mps_is_one_zone() {
        let (s, w) = setup();
        let mut v = at_zone_start(&w, &s, 0);
        advance_vehicle(&mut v, &w, &s, 4.0);
        assert_eq!(v.leg, 1);
        assert_eq!(v.zone, 1);
        assert_eq!(v.offset_m, 0.0);
    }

    #[test]
    fn wraps_at_route_end() {
        let (s, w) = setup();
        let mut v = at_zone_start(&w, &s, 8);
        advance_vehicle(&mut v, &w, &s, 6.0);
        assert_eq!(v.zone, 0);
        assert!((v.offset_m - 20.0).abs() < 1e-9);
    }

    #[test]
    fn placement_is_seeded() {
        let (s, w) = setup();
        let a = place_vehicles(&w, &s, 10, &mut ChaCha8Rng::seed_from_u64(9));
        let b = place_vehicles(&w, &s, 10, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn trace_replays_samples_verbatim() {
        let csv = "time_s,vehicle_id,x_m,y_m\n0,7,10,0\n2,7,30,0\n1,8,5,5\n";
        let t = MobilityTrace::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(t.position_at(7, 0.0), Some([10.0, 0.0]));
        assert_eq!(t.position_at(7, 2.0), Some([30.0, 0.0]));
        assert_eq!(t.position_at(7, 1.0), Some([20.0, 0.0]));
        assert_eq!(t.position_at(7, 2.5), None);
        assert_eq!(t.position_at(8, 1.0), Some([5.0, 5.0]));
        assert_eq!(t.speed_at(7, 0.5), Some(10.0));
    }

    #[test]
    fn trace_rejects_garbage() {
        assert!(MobilityTrace::from_reader("time_s,vehicle_id,x_m,y_m\nx,1,2,3\n".as_bytes()).is_err());
        assert!(MobilityTrace::from_reader("time_s,vehicle_id,x_m,y_m\n1,1,2,3\n1,1,4,3\n".as_bytes()).is_err());
    }
}
