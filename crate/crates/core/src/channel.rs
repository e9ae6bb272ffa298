//! Deterministic radio model.
//!
//! Path loss follows the 3GPP macro-cell form
//! `L(d) = 40(1 - 4e-3 h) log10(d) - 18 log10(h) + 21 log10(f) + 80` with `d`
//! in km, `h` the antenna height in meters and `f` the carrier in MHz. No
//! shadowing or fading is applied, so every quantity here is a pure function
//! of geometry and [`RadioParams`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2-D point in meters.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    pub carrier_freq_mhz: f64,
    pub antenna_height_m: f64,
    pub vehicle_tx_power_dbm: f64,
    pub rsu_tx_power_dbm: f64,
    pub noise_power_v2i_dbm: f64,
    pub noise_power_r2r_dbm: f64,
    pub zone_bandwidth_hz: f64,
    pub rsu_bandwidth_hz: f64,
    pub snr_offload_threshold_db: f64,
    pub snr_deliver_threshold_db: f64,
    /// Distances below this are clamped before evaluating the path loss.
    pub min_distance_km: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            carrier_freq_mhz: 2800.0,
            antenna_height_m: 10.0,
            vehicle_tx_power_dbm: 27.0,
            rsu_tx_power_dbm: 37.0,
            noise_power_v2i_dbm: -93.0,
            noise_power_r2r_dbm: -93.0,
            zone_bandwidth_hz: 1.0e6,
            rsu_bandwidth_hz: 2.0e6,
            snr_offload_threshold_db: 7.0,
            snr_deliver_threshold_db: 7.0,
            min_distance_km: 0.001,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.vehicle_tx_power_dbm,
            self.rsu_tx_power_dbm,
            self.noise_power_v2i_dbm,
            self.noise_power_r2r_dbm,
            self.snr_offload_threshold_db,
            self.snr_deliver_threshold_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("radio powers and thresholds must be finite".into()));
        }
        if !(self.zone_bandwidth_hz > 0.0 && self.rsu_bandwidth_hz > 0.0) {
            return Err(Error::Config("bandwidths must be positive".into()));
        }
        if !(self.carrier_freq_mhz > 0.0) {
            return Err(Error::Config("carrier frequency must be positive".into()));
        }
        if !(self.antenna_height_m > 0.0 && self.antenna_height_m < 250.0) {
            return Err(Error::Config("antenna height must lie in (0, 250) m".into()));
        }
        if !(self.min_distance_km > 0.0) {
            return Err(Error::Config("minimum link distance must be positive".into()));
        }
        Ok(())
    }

    /// Slope of the path loss per decade of distance, in dB.
    pub fn loss_per_decade_db(&self) -> f64 {
        40.0 * (1.0 - 4.0e-3 * self.antenna_height_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub zone_centers: Vec<Point>,
    pub rsu_positions: Vec<Point>,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if self.rsu_positions.is_empty() {
            return Err(Error::Config("at least one RSU is required".into()));
        }
        let all = self.zone_centers.iter().chain(&self.rsu_positions);
        if all.flatten().any(|c| !c.is_finite()) {
            return Err(Error::Config("coordinates must be finite".into()));
        }
        Ok(())
    }

    pub fn n_rsus(&self) -> usize {
        self.rsu_positions.len()
    }

    pub fn n_zones(&self) -> usize {
        self.zone_centers.len()
    }

    pub fn zone_rsu_km(&self, zone: usize, rsu: usize) -> f64 {
        distance_m(self.zone_centers[zone], self.rsu_positions[rsu]) / 1000.0
    }

    pub fn rsu_rsu_km(&self, r: usize, r_prime: usize) -> f64 {
        distance_m(self.rsu_positions[r], self.rsu_positions[r_prime]) / 1000.0
    }
}

pub fn distance_m(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Path loss in dB at `distance_km`.
pub fn path_loss_db(distance_km: f64, params: &RadioParams) -> Result<f64> {
    if !(distance_km > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {distance_km} km"
        )));
    }
    let h = params.antenna_height_m;
    Ok(params.loss_per_decade_db() * distance_km.log10() - 18.0 * h.log10()
        + 21.0 * params.carrier_freq_mhz.log10()
        + 80.0)
}

pub fn snr_db(tx_power_dbm: f64, loss_db: f64, noise_dbm: f64) -> f64 {
    tx_power_dbm - loss_db - noise_dbm
}

pub fn snr_linear(tx_power_dbm: f64, loss_db: f64, noise_dbm: f64) -> f64 {
    db_to_linear(snr_db(tx_power_dbm, loss_db, noise_dbm))
}

/// Shannon rate `bandwidth * log2(1 + snr)`.
pub fn shannon_rate(bandwidth_hz: f64, snr: f64) -> f64 {
    bandwidth_hz * (1.0 + snr).log2()
}

/// The single SNR gate shared by offloading, forwarding and delivery.
pub fn meets_threshold(snr_db: f64, threshold_db: f64) -> bool {
    snr_db >= threshold_db
}

/// Which side transmits on a link, selecting power and noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    /// Vehicle to RSU (offloading).
    VehicleToRsu,
    /// RSU to RSU (forwarding) or RSU to vehicle (delivery).
    FromRsu,
}

/// Evaluates links over a fixed geometry.
#[derive(Debug, Clone, Copy)]
pub struct Channel<'a> {
    pub geometry: &'a Geometry,
    pub params: &'a RadioParams,
}

impl<'a> Channel<'a> {
    pub fn new(geometry: &'a Geometry, params: &'a RadioParams) -> Self {
        Self { geometry, params }
    }

    fn clamped_loss(&self, distance_km: f64) -> f64 {
        path_loss_db(distance_km.max(self.params.min_distance_km), self.params)
            .expect("clamped distance is positive")
    }

    pub fn link_snr_db(&self, kind: LinkKind, distance_km: f64) -> f64 {
        let loss = self.clamped_loss(distance_km);
        match kind {
            LinkKind::VehicleToRsu => snr_db(
                self.params.vehicle_tx_power_dbm,
                loss,
                self.params.noise_power_v2i_dbm,
            ),
            LinkKind::FromRsu => {
                snr_db(self.params.rsu_tx_power_dbm, loss, self.params.noise_power_r2r_dbm)
            }
        }
    }

    pub fn v2i_snr_db(&self, zone: usize, rsu: usize) -> f64 {
        self.link_snr_db(LinkKind::VehicleToRsu, self.geometry.zone_rsu_km(zone, rsu))
    }

    pub fn r2r_snr_db(&self, r: usize, r_prime: usize) -> f64 {
        self.link_snr_db(LinkKind::FromRsu, self.geometry.rsu_rsu_km(r, r_prime))
    }

    /// SNR of the RSU-to-vehicle delivery link towards `zone`.
    pub fn deliver_snr_db(&self, zone: usize, rsu: usize) -> f64 {
        self.link_snr_db(LinkKind::FromRsu, self.geometry.zone_rsu_km(zone, rsu))
    }

    /// Offloading rate from `zone` to `rsu` in bit/s.
    pub fn rate_v2i(&self, zone: usize, rsu: usize) -> f64 {
        shannon_rate(
            self.params.zone_bandwidth_hz,
            db_to_linear(self.v2i_snr_db(zone, rsu)),
        )
    }

    /// Forwarding rate between RSUs in bit/s; infinite on the self-link.
    pub fn rate_r2r(&self, r: usize, r_prime: usize) -> f64 {
        if r == r_prime {
            return f64::INFINITY;
        }
        shannon_rate(
            self.params.rsu_bandwidth_hz,
            db_to_linear(self.r2r_snr_db(r, r_prime)),
        )
    }

    pub fn offload_feasible(&self, zone: usize, rsu: usize) -> bool {
        meets_threshold(self.v2i_snr_db(zone, rsu), self.params.snr_offload_threshold_db)
    }

    pub fn forward_feasible(&self, r: usize, r_prime: usize) -> bool {
        r == r_prime
            || meets_threshold(self.r2r_snr_db(r, r_prime), self.params.snr_offload_threshold_db)
    }

    pub fn deliver_feasible(&self, zone: usize, rsu: usize) -> bool {
        meets_threshold(
            self.deliver_snr_db(zone, rsu),
            self.params.snr_deliver_threshold_db,
        )
    }

    /// RSU with the highest offloading SNR for `zone`; lowest index on ties.
    pub fn best_rsu(&self, zone: usize) -> usize {
        let mut best = 0;
        let mut best_snr = f64::NEG_INFINITY;
        for r in 0..self.geometry.n_rsus() {
            let s = self.v2i_snr_db(zone, r);
            if s > best_snr {
                best = r;
                best_snr = s;
            }
        }
        best
    }
}
