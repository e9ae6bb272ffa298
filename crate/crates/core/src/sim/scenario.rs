//! Scenario description and the road/zone geometry derived from it.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::{Geometry, Point, RadioParams};
use crate::error::{Error, Result};
use crate::latency::ComputeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadLayout {
    /// Parallel east-west roads with alternating heading, joined end to end
    /// into one serpentine route.
    Parallel,
    /// Half the roads east-west, half north-south; each road is its own loop.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub layout: RoadLayout,
    pub roads: usize,
    pub segments: usize,
    pub zone_length_m: f64,
    pub zone_width_m: f64,
    pub road_spacing_m: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            layout: RoadLayout::Parallel,
            roads: 3,
            segments: 3,
            zone_length_m: 200.0,
            zone_width_m: 10.0,
            road_spacing_m: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsuConfig {
    pub position: Point,
    /// Overrides `compute.rsu_capacity_hz` for this RSU.
    #[serde(default)]
    pub capacity_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComputeConfig {
    pub rsu_capacity_hz: f64,
    pub cycles_per_bit: f64,
    pub slot_length_s: f64,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        Self {
            rsu_capacity_hz: 8.0e9,
            cycles_per_bit: 1200.0,
            slot_length_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MobilityConfig {
    Synthetic,
    Trace { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub vehicles: usize,
    /// One value per road, or a single value for all roads (m/s).
    pub speed_limits_mps: Vec<f64>,
    /// Per-vehicle multiplier on the road limit, drawn uniformly.
    pub speed_factor: [f64; 2],
    /// Poisson task arrivals per vehicle per second.
    pub arrival_rate: f64,
    pub task_size_bits: [f64; 2],
    pub mobility: MobilityConfig,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            vehicles: 20,
            speed_limits_mps: vec![15.0],
            speed_factor: [0.7, 1.0],
            arrival_rate: 0.1,
            task_size_bits: [2.0e6, 5.0e6],
            mobility: MobilityConfig::Synthetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridConfig,
    pub rsus: Vec<RsuConfig>,
    pub radio: RadioParams,
    pub compute: ComputeConfig,
    pub traffic: TrafficConfig,
    /// Failure penalty per Mbit of failed workload.
    pub failure_penalty_per_mbit: f64,
    pub horizon_slots: usize,
    pub seed: u64,
}

impl Default for Scenario {
    /// The desk-scale scenario: 3 x 3 zones, 3 RSUs, 20 vehicles.
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            rsus: [[100.0, 50.0], [300.0, 350.0], [500.0, 50.0]]
                .into_iter()
                .map(|position| RsuConfig {
                    position,
                    capacity_hz: None,
                })
                .collect(),
            radio: RadioParams::default(),
            compute: ComputeConfig::default(),
            traffic: TrafficConfig::default(),
            failure_penalty_per_mbit: 50.0,
            horizon_slots: 20,
            seed: 1,
        }
    }
}

impl Scenario {
    /// 800 m x 800 m grid with nine RSUs and 200 vehicles.
    pub fn full_scale() -> Self {
        let spacing = 800.0 / 3.0;
        let rsus = (0..3)
            .flat_map(|i| (0..3).map(move |j| [spacing * (i as f64 + 0.5), spacing * (j as f64 + 0.5)]))
            .map(|position| RsuConfig {
                position,
                capacity_hz: None,
            })
            .collect();
        Self {
            grid: GridConfig {
                layout: RoadLayout::Grid,
                roads: 8,
                segments: 20,
                zone_length_m: 40.0,
                zone_width_m: 10.0,
                road_spacing_m: 200.0,
            },
            rsus,
            traffic: TrafficConfig {
                vehicles: 200,
                speed_limits_mps: vec![13.9],
                ..TrafficConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.roads == 0 || g.segments == 0 {
            return Err(Error::Config("grid needs at least one road and one segment".into()));
        }
        if !(g.zone_length_m > 0.0) || !(g.road_spacing_m >= 0.0) {
            return Err(Error::Config("zone length must be positive".into()));
        }
        if self.rsus.is_empty() {
            return Err(Error::Config("at least one RSU is required".into()));
        }
        let t = &self.traffic;
        if !(t.arrival_rate >= 0.0) {
            return Err(Error::Config("arrival rate must be non-negative".into()));
        }
        if !(t.task_size_bits[0] >= 0.0 && t.task_size_bits[0] <= t.task_size_bits[1]) {
            return Err(Error::Config("task size range must satisfy 0 <= min <= max".into()));
        }
        if !(t.speed_factor[0] >= 0.0 && t.speed_factor[0] <= t.speed_factor[1]) {
            return Err(Error::Config("speed factor range must satisfy 0 <= min <= max".into()));
        }
        if !(t.speed_limits_mps.len() == 1 || t.speed_limits_mps.len() == g.roads) {
            return Err(Error::Config(format!(
                "speed_limits_mps needs 1 or {} entries",
                g.roads
            )));
        }
        if t.speed_limits_mps.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("speed limits must be non-negative".into()));
        }
        if !(self.failure_penalty_per_mbit >= 0.0) {
            return Err(Error::Config("failure penalty must be non-negative".into()));
        }
        self.radio.validate()?;
        self.compute_params().validate()?;
        Ok(())
    }

    pub fn n_zones(&self) -> usize {
        self.grid.roads * self.grid.segments
    }

    pub fn n_rsus(&self) -> usize {
        self.rsus.len()
    }

    pub fn penalty_per_bit(&self) -> f64 {
        self.failure_penalty_per_mbit / 1e6
    }

    pub fn speed_limit(&self, road: usize) -> f64 {
        let limits = &self.traffic.speed_limits_mps;
        if limits.len() == 1 {
            limits[0]
        } else {
            limits[road]
        }
    }

    pub fn compute_params(&self) -> ComputeParams {
        ComputeParams {
            rsu_capacity: self
                .rsus
                .iter()
                .map(|r| r.capacity_hz.unwrap_or(self.compute.rsu_capacity_hz))
                .collect(),
            cycles_per_bit: self.compute.cycles_per_bit,
            slot_length_s: self.compute.slot_length_s,
        }
    }

    pub fn mean_task_bits(&self) -> f64 {
        0.5 * (self.traffic.task_size_bits[0] + self.traffic.task_size_bits[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub origin: Point,
    /// Unit heading.
    pub heading: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub road: usize,
    pub segment: usize,
    pub center: Point,
}

/// Zones, roads and routes laid out from a [`GridConfig`]. Zone `z` is
/// `road * segments + segment`.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub roads: Vec<Road>,
    pub zones: Vec<Zone>,
    pub routes: Vec<Vec<usize>>,
    pub zone_length_m: f64,
    pub geometry: Geometry,
}

impl World {
    pub fn build(scenario: &Scenario) -> Self {
        let g = &scenario.grid;
        let length = g.segments as f64 * g.zone_length_m;
        let roads: Vec<Road> = match g.layout {
            RoadLayout::Parallel => (0..g.roads)
                .map(|a| {
                    let y = a as f64 * g.road_spacing_m;
                    if a % 2 == 0 {
                        Road {
                            origin: [0.0, y],
                            heading: [1.0, 0.0],
                        }
                    } else {
                        Road {
                            origin: [length, y],
                            heading: [-1.0, 0.0],
                        }
                    }
                })
                .collect(),
            RoadLayout::Grid => {
                let horizontal = g.roads.div_ceil(2);
                (0..g.roads)
                    .map(|a| {
                        if a < horizontal {
                            Road {
                                origin: [0.0, g.road_spacing_m * (a as f64 + 0.5)],
                                heading: [1.0, 0.0],
                            }
                        } else {
                            let j = a - horizontal;
                            Road {
                                origin: [g.road_spacing_m * (j as f64 + 0.5), 0.0],
                                heading: [0.0, 1.0],
                            }
                        }
                    })
                    .collect()
            }
        };

        let mut zones = Vec::with_capacity(scenario.n_zones());
        for (a, road) in roads.iter().enumerate() {
            for b in 0..g.segments {
                let along = (b as f64 + 0.5) * g.zone_length_m;
                zones.push(Zone {
                    road: a,
                    segment: b,
                    center: [
                        road.origin[0] + road.heading[0] * along,
                        road.origin[1] + road.heading[1] * along,
                    ],
                });
            }
        }

        let per_road = |a: usize| (0..g.segments).map(move |b| a * g.segments + b);
        let routes = match g.layout {
            RoadLayout::Parallel => vec![(0..g.roads).flat_map(per_road).collect()],
            RoadLayout::Grid => (0..g.roads).map(|a| per_road(a).collect()).collect(),
        };

        let geometry = Geometry {
            zone_centers: zones.iter().map(|z| z.center).collect(),
            rsu_positions: scenario.rsus.iter().map(|r| r.position).collect(),
        };

        Self {
            roads,
            zones,
            routes,
            zone_length_m: g.zone_length_m,
            geometry,
        }
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    /// Point at `offset` meters into `zone` along its road heading.
    pub fn point_in_zone(&self, zone: usize, offset: f64) -> Point {
        let z = &self.zones[zone];
        let h = self.roads[z.road].heading;
        let d = offset - 0.5 * self.zone_length_m;
        [z.center[0] + h[0] * d, z.center[1] + h[1] * d]
    }

    /// Zone whose center is nearest to `p`.
    pub fn nearest_zone(&self, p: Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, z) in self.zones.iter().enumerate() {
            let d = crate::channel::distance_m(p, z.center);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}
