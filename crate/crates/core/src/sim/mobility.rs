//! Random-waypoint mobility with zero pause time.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Inclusive node speed band in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedBand {
    pub min: f64,
    pub max: f64,
}

impl SpeedBand {
    pub const STATIC: SpeedBand = SpeedBand { min: 0.0, max: 0.0 };
    pub const SLOW: SpeedBand = SpeedBand { min: 0.0, max: 2.0 };
    pub const MEDIUM: SpeedBand = SpeedBand { min: 2.0, max: 8.0 };
    pub const FAST: SpeedBand = SpeedBand { min: 8.0, max: 13.0 };

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.max <= self.min {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }

    pub fn contains(&self, speed: f64) -> bool {
        speed >= self.min && speed <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Arena {
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        (rng.gen_range(0.0..=self.width), rng.gen_range(0.0..=self.height))
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        (0.0..=self.width).contains(&p.0) && (0.0..=self.height).contains(&p.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mover {
    pub position: (f64, f64),
    pub waypoint: (f64, f64),
    pub speed: f64,
}

impl Mover {
    pub fn new<R: Rng>(arena: &Arena, band: &SpeedBand, rng: &mut R) -> Self {
        let position = arena.random_point(rng);
        let waypoint = arena.random_point(rng);
        Mover { position, waypoint, speed: band.sample(rng) }
    }
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Advances `node` for `dt` seconds. On reaching its waypoint it draws a new
/// waypoint and speed and keeps moving for the remaining time.
pub fn move_random_waypoint<R: Rng>(node: &mut Mover, dt: f64, arena: &Arena, band: &SpeedBand, rng: &mut R) {
    assert!(dt > 0.0, "dt must be positive");
    let mut remaining = dt;
    // bounded so a pathological arena cannot spin forever
    for _ in 0..64 {
        if node.speed <= 0.0 {
            return;
        }
        let to_go = distance(node.position, node.waypoint);
        let reach = node.speed * remaining;
        if reach < to_go {
            let f = reach / to_go;
            node.position.0 = (node.position.0 + (node.waypoint.0 - node.position.0) * f).clamp(0.0, arena.width);
            node.position.1 = (node.position.1 + (node.waypoint.1 - node.position.1) * f).clamp(0.0, arena.height);
            return;
        }
        node.position = node.waypoint;
        remaining -= to_go / node.speed;
        node.waypoint = arena.random_point(rng);
        node.speed = band.sample(rng);
        if remaining <= 0.0 {
            return;
        }
    }
}
