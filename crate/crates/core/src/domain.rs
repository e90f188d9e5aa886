//! Core value types for the station model and the user-type pricing curves.
//!
//! All types here are immutable values; operations are pure functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest time-to-leave representable by the state encoding (4 bits).
pub const TTL_LIMIT: u8 = 15;

/// A customer type: an id used for canonical ordering plus the price of a
/// full 0 -> 100% charge. The cumulative willingness-to-pay curve is
/// quadratic and concave, so each extra 10% of charge is worth less than
/// the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserType {
    /// Small integer forming a strict total order (0 = medium, 1 = rich).
    pub id: u8,
    /// Price in euro of charging an initially empty battery to 100%.
    pub max_price: f64,
}

impl UserType {
    pub fn new(id: u8, max_price: f64) -> Result<Self> {
        if !max_price.is_finite() || max_price <= 0.0 {
            return Err(Error::domain(format!(
                "user type max_price must be > 0, got {max_price}"
            )));
        }
        Ok(UserType { id, max_price })
    }
}

/// Cumulative value in euro a customer of `ty` assigns to holding `soc`
/// percent of charge: `(max/100) * (2*soc - soc^2/100)` on `[0, 100]`,
/// saturating at `max` above 100.
pub fn user_type_value(ty: UserType, soc: f64) -> Result<f64> {
    if soc < 0.0 {
        return Err(Error::domain(format!("soc must be >= 0, got {soc}")));
    }
    if soc > 100.0 {
        return Ok(ty.max_price);
    }
    // max * s * (2 - s) with s = soc/100; algebraically (max/100) *
    // (2*soc - soc^2/100), arranged so soc 100 yields exactly max.
    let s = soc / 100.0;
    Ok(ty.max_price * s * (2.0 - s))
}

/// Price in euro a customer of `ty` pays for a charge from `soc_from` to
/// `soc_to`: the difference of the cumulative value curve at the endpoints.
pub fn charge_price(ty: UserType, soc_from: f64, soc_to: f64) -> Result<f64> {
    if soc_from > soc_to {
        return Err(Error::domain(format!(
            "charge_price requires soc_from <= soc_to, got {soc_from} > {soc_to}"
        )));
    }
    if soc_to > 100.0 {
        return Err(Error::domain(format!(
            "charge_price requires soc_to <= 100, got {soc_to}"
        )));
    }
    Ok(user_type_value(ty, soc_to)? - user_type_value(ty, soc_from)?)
}

/// One parked vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    /// Hours remaining until the owner collects the vehicle, in `1..=ttl_max`.
    pub ttl: u8,
    /// State of charge, a multiple of 10 in `[0, 100]`.
    pub soc: u8,
    pub user_type: UserType,
    /// Whether the vehicle reached 100% at some point. Its stored soc is
    /// nullified to 0 on completion, and a completed vehicle is no longer
    /// eligible for charging or billing.
    pub completed: bool,
}

impl Vehicle {
    pub fn new(ttl: u8, soc: u8, user_type: UserType, ttl_max: u8) -> Result<Self> {
        if ttl < 1 || ttl > ttl_max {
            return Err(Error::domain(format!(
                "vehicle ttl must be in 1..={ttl_max}, got {ttl}"
            )));
        }
        if soc > 100 || !soc.is_multiple_of(10) {
            return Err(Error::domain(format!(
                "vehicle soc must be a multiple of 10 in [0, 100], got {soc}"
            )));
        }
        Ok(Vehicle {
            ttl,
            soc,
            user_type,
            completed: false,
        })
    }

    /// Key for canonical slot ordering: primarily (ttl, type id); soc and
    /// completed extend it to a total order so that any permutation of the
    /// same vehicles canonicalizes to the same arrangement.
    pub fn sort_key(&self) -> (u8, u8, u8, bool) {
        (self.ttl, self.user_type.id, self.soc, self.completed)
    }
}

/// The station at one decision hour: hour of day plus M parking slots, each
/// either vacant or holding a vehicle.
///
/// Canonical form: occupied slots first, sorted non-decreasing by
/// [`Vehicle::sort_key`], vacant slots trailing. All operations in this
/// crate return canonical states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationState {
    pub hour_of_day: u8,
    pub slots: Vec<Option<Vehicle>>,
}

impl StationState {
    /// A station with `m` vacant slots at the given hour.
    pub fn empty(m: usize, hour_of_day: u8) -> Self {
        StationState {
            hour_of_day: hour_of_day % 24,
            slots: vec![None; m],
        }
    }

    /// Builds a canonical state from up to `m` vehicles.
    pub fn from_vehicles(m: usize, hour_of_day: u8, vehicles: Vec<Vehicle>) -> Result<Self> {
        if vehicles.len() > m {
            return Err(Error::domain(format!(
                "{} vehicles exceed {m} parking places",
                vehicles.len()
            )));
        }
        let mut state = StationState::empty(m, hour_of_day);
        for (slot, v) in state.slots.iter_mut().zip(vehicles) {
            *slot = Some(v);
        }
        state.canonicalize();
        Ok(state)
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn occupied_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn vacant_count(&self) -> usize {
        self.num_slots() - self.occupied_count()
    }

    /// Occupied slots with their indices, in slot order.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, &Vehicle)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|v| (i, v)))
    }

    /// Restores canonical order in place. Idempotent.
    pub fn canonicalize(&mut self) {
        let mut vehicles: Vec<Vehicle> = self.slots.iter().filter_map(|s| *s).collect();
        vehicles.sort_by_key(Vehicle::sort_key);
        for (i, slot) in self.slots.iter_mut().enumerate() {
            *slot = vehicles.get(i).copied();
        }
    }

    pub fn is_canonical(&self) -> bool {
        let mut prev: Option<(u8, u8, u8, bool)> = None;
        let mut seen_vacant = false;
        for slot in &self.slots {
            match slot {
                Some(v) => {
                    if seen_vacant {
                        return false;
                    }
                    let key = v.sort_key();
                    if let Some(p) = prev {
                        if key < p {
                            return false;
                        }
                    }
                    prev = Some(key);
                }
                None => seen_vacant = true,
            }
        }
        true
    }
}

/// Per-slot energy allocation for one hour, in SOC points. Each entry is
/// 0 (idle), 10 (normal charge) or `100 - soc` (fast charge to full), with
/// at most `k` nonzero entries and zeros on vacant or completed slots.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChargeAction {
    pub u: Vec<u8>,
}

impl ChargeAction {
    /// The all-zero (no charging) action for an `m`-slot station.
    pub fn zero(m: usize) -> Self {
        ChargeAction { u: vec![0; m] }
    }

    pub fn nonzero_count(&self) -> usize {
        self.u.iter().filter(|&&x| x != 0).count()
    }

    /// Total energy allocated, in SOC points.
    pub fn total_points(&self) -> u32 {
        self.u.iter().map(|&x| x as u32).sum()
    }
}

/// Discretized exogenous signals observed at a decision hour.
///
/// The level indices enter the learner's state encoding; the representative
/// values (in SOC-point units) back the reward computation, so state and
/// reward always see the same discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExogenousObservation {
    /// Renewable level index (0 = lowest).
    pub r_level: u8,
    /// Grid price level index (0 = lowest).
    pub p_level: u8,
    /// Representative renewable amount for `r_level`, in SOC points.
    pub r_points: f64,
    /// Representative grid price for `p_level`, in euro per SOC point.
    pub p_eur_per_point: f64,
}
