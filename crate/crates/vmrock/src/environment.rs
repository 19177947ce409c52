//! Cutting environment: board penalty contact, blade-edge geometry and a
//! phenomenological food model.
//!
//! The board is a unilateral penalty surface (one-sided spring-damper on
//! penetration, viscous tangential drag). The food is cut laterally: during a
//! rocking stroke the edge stays near the board and sweeps sideways through
//! the item, so cut progress is tracked as two fronts eating inward from the
//! footprint edges along y. Intact material blocks an intruding edge point
//! with a stiff one-sided spring; the front yields only while that blocking
//! force exceeds the fracture threshold, and a rate-independent drag opposes
//! motion inside the intact region. Food forces never drive the blade: the
//! blocking force is applied only while the point moves deeper in, so its
//! power is non-positive.

use nalgebra::Vector3;

/// Blade edge as an ordered polyline in the knife frame, tip first.
#[derive(Debug, Clone)]
pub struct BladeProfile {
    pub name: String,
    pub edge: Vec<Vector3<f64>>,
    /// Spine anchors in the knife frame: blade tip (p1) and handle (p2).
    pub tip: Vector3<f64>,
    pub handle: Vector3<f64>,
}

impl BladeProfile {
    /// Circular-arc edge hanging below the spine. The spine runs from the
    /// handle at the local origin toward the tip along -y; the edge bulges
    /// down by `camber` below the tip-to-heel chord.
    pub fn arc(name: &str, chord: f64, camber: f64, heel_drop: f64, points: usize) -> Self {
        assert!(points >= 8);
        let tip = Vector3::new(0.0, -chord, 0.0);
        let heel = Vector3::new(0.0, 0.0, -heel_drop);
        let edge = (0..points)
            .map(|i| {
                let s = i as f64 / (points - 1) as f64;
                let base = tip + (heel - tip) * s;
                // parabolic sag approximating a shallow circular arc
                let sag = 4.0 * camber * s * (1.0 - s);
                base - Vector3::new(0.0, 0.0, sag)
            })
            .collect();
        BladeProfile { name: name.to_string(), edge, tip, handle: Vector3::zeros() }
    }

    /// Named presets: knife1 is the rocking blade, knife2 a shorter blade,
    /// knife3 a near-straight carving blade.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "knife1" => Some(Self::arc("knife1", 0.18, 0.030, 0.020, 16)),
            "knife2" => Some(Self::arc("knife2", 0.12, 0.015, 0.015, 16)),
            "knife3" => Some(Self::arc("knife3", 0.16, 0.003, 0.010, 16)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.edge.len() < 8 {
            return Err(format!("blade `{}` needs at least 8 edge points", self.name));
        }
        for w in self.edge.windows(2) {
            if w[1].y < w[0].y {
                return Err(format!("blade `{}` edge must run tip to heel", self.name));
            }
        }
        if self.edge.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(format!("blade `{}` has non-finite points", self.name));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Board {
    /// Top surface height, m.
    pub height: f64,
    /// Penalty stiffness, N/m.
    pub k_n: f64,
    /// Normal damping, N·s/m.
    pub c_n: f64,
    /// Tangential viscous coefficient, N·s/m.
    pub mu_v: f64,
}

impl Default for Board {
    fn default() -> Self {
        Board { height: 0.0, k_n: 5.0e4, c_n: 50.0, mu_v: 5.0 }
    }
}

/// Normal-plus-tangential board force on a single point; zero when the point
/// is above the surface. The normal component is clamped non-negative.
pub fn board_contact_force(board: &Board, pos: &Vector3<f64>, vel: &Vector3<f64>) -> Vector3<f64> {
    let depth = board.height - pos.z;
    if depth <= 0.0 {
        return Vector3::zeros();
    }
    let normal = (board.k_n * depth + board.c_n * (-vel.z).max(0.0)).max(0.0);
    let tangential = Vector3::new(-board.mu_v * vel.x, -board.mu_v * vel.y, 0.0);
    Vector3::new(tangential.x, tangential.y, normal)
}

/// Phenomenological food item anchored to the board, extending along y over
/// `[center_y - width/2, center_y + width/2]` and from the board top up to
/// `height`. Cut progress is tracked per slice plane as two fronts advancing
/// inward from the footprint edges.
#[derive(Debug, Clone)]
pub struct FoodItem {
    pub center_y: f64,
    pub width: f64,
    pub height: f64,
    /// Drag per metre of engaged cut height, N/m.
    pub rho: f64,
    /// Blocking force that must be exceeded before a front yields, N.
    pub fracture_threshold: f64,
    /// Blocking penalty stiffness of the intact material, N/m.
    pub k_side: f64,
    /// Per-slice cut extent from the low-y footprint edge, m.
    cut_lo: Vec<f64>,
    /// Per-slice cut extent from the high-y footprint edge, m.
    cut_hi: Vec<f64>,
    separated: Vec<bool>,
}

impl FoodItem {
    pub fn new(
        center_y: f64,
        width: f64,
        height: f64,
        rho: f64,
        fracture_threshold: f64,
        slice_count: usize,
    ) -> Self {
        assert!(width > 0.0 && height > 0.0);
        let planes = slice_count.max(1);
        FoodItem {
            center_y,
            width,
            height,
            rho,
            fracture_threshold,
            k_side: 5.0e4,
            cut_lo: vec![0.0; planes],
            cut_hi: vec![0.0; planes],
            separated: vec![false; planes],
        }
    }

    /// Presets ordered by the qualitative hardness ranking: spring onion and
    /// cucumber cut easily, carrot and potato need noticeably more force.
    pub fn preset(name: &str, center_y: f64, slice_count: usize) -> Option<Self> {
        let (width, height, rho, threshold) = match name {
            "spring-onion" => (0.015, 0.015, 8.0, 1.0),
            "cucumber" => (0.035, 0.035, 15.0, 2.5),
            "courgette" => (0.045, 0.045, 20.0, 3.5),
            "carrot" => (0.030, 0.030, 35.0, 6.0),
            "potato" => (0.055, 0.050, 40.0, 7.0),
            _ => return None,
        };
        Some(FoodItem::new(center_y, width, height, rho, threshold, slice_count))
    }

    /// Multiply resistance and threshold, e.g. for a mid-run hardness step.
    pub fn scale_hardness(&mut self, factor: f64) {
        self.rho *= factor;
        self.fracture_threshold *= factor;
    }

    /// Total cut extent along y, m; `width` once fully severed.
    pub fn cut_extent(&self, slice: usize) -> f64 {
        (self.cut_lo[slice] + self.cut_hi[slice]).min(self.width)
    }

    pub fn is_separated(&self, slice: usize) -> bool {
        self.separated.get(slice).copied().unwrap_or(false)
    }

    pub fn in_footprint(&self, y: f64) -> bool {
        (y - self.center_y).abs() <= self.width / 2.0
    }

    /// Food reaction forces on the blade edge points for the active slice
    /// plane, plus the cut-front update. `board_top` is the board surface
    /// height.
    ///
    /// Returns one force per input point.
    pub fn food_forces(
        &mut self,
        points: &[Vector3<f64>],
        velocities: &[Vector3<f64>],
        board_top: f64,
        slice: usize,
    ) -> Vec<Vector3<f64>> {
        let mut out = vec![Vector3::zeros(); points.len()];
        if slice >= self.cut_lo.len() || self.separated[slice] {
            return out;
        }
        let y0 = self.center_y - self.width / 2.0;
        let y1 = self.center_y + self.width / 2.0;
        let residual = self.fracture_threshold / self.k_side;

        for (i, p) in points.iter().enumerate() {
            // intact interval left between the two fronts
            let a = y0 + self.cut_lo[slice];
            let b = y1 - self.cut_hi[slice];
            if p.z >= board_top + self.height || p.y <= a || p.y >= b {
                continue;
            }
            // intrusion measured from the nearer front
            let d_lo = p.y - a;
            let d_hi = b - p.y;
            let from_lo = d_lo <= d_hi;
            let overrun = d_lo.min(d_hi);
            let block = self.k_side * overrun;
            // one-sided, non-driving: push back only while the point moves
            // deeper into the intact material
            let inward = if from_lo { velocities[i].y } else { -velocities[i].y };
            if inward > 0.0 {
                out[i].y += if from_lo { -block } else { block };
            }
            // drag over the engaged cut height
            let engaged_h = (board_top + self.height - p.z).min(self.height);
            let drag = self.rho * engaged_h;
            let speed = velocities[i].norm();
            if speed > 1e-9 {
                out[i] -= velocities[i] / speed * drag;
            }
            // the front fails only under more than the fracture threshold,
            // and then retreats to where the blocking force equals it
            if block > self.fracture_threshold {
                let advance = overrun - residual;
                if from_lo {
                    self.cut_lo[slice] += advance;
                } else {
                    self.cut_hi[slice] += advance;
                }
            }
        }

        // the last millimetre is crushed rather than tracked: the edge
        // polyline samples the blade too coarsely to resolve it
        if self.width - self.cut_lo[slice] - self.cut_hi[slice] <= 1e-3 {
            self.cut_lo[slice] = self.width - self.cut_hi[slice];
            self.separated[slice] = true;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn board_no_contact_above_surface() {
        let board = Board::default();
        let f = board_contact_force(
            &board,
            &Vector3::new(0.0, 0.1, 0.01),
            &Vector3::new(0.0, 0.0, -1.0),
        );
        assert_eq!(f, Vector3::zeros());
    }

    #[test]
    fn board_penalty_arithmetic() {
        let board = Board { height: 0.0, k_n: 5000.0, c_n: 0.0, mu_v: 0.0 };
        let f = board_contact_force(&board, &Vector3::new(0.0, 0.0, -0.001), &Vector3::zeros());
        assert_relative_eq!(f.z, 5.0, epsilon = 1e-12);
        assert_eq!(f.x, 0.0);
        assert_eq!(f.y, 0.0);
    }

    #[test]
    fn board_unilateral_clamp() {
        // upward-moving penetrating point: normal force never negative
        let board = Board { height: 0.0, k_n: 100.0, c_n: 50.0, mu_v: 0.0 };
        let f = board_contact_force(
            &board,
            &Vector3::new(0.0, 0.0, -1e-5),
            &Vector3::new(0.0, 0.0, 2.0),
        );
        assert!(f.z >= 0.0);
    }

    #[test]
    fn board_tangential_drag_opposes_motion() {
        let board = Board::default();
        let f = board_contact_force(
            &board,
            &Vector3::new(0.0, 0.0, -0.001),
            &Vector3::new(0.0, 0.3, 0.0),
        );
        assert!(f.y < 0.0);
        assert_relative_eq!(f.y, -5.0 * 0.3, epsilon = 1e-12);
    }

    #[test]
    fn food_outside_footprint_no_force() {
        let mut food = FoodItem::new(0.4, 0.04, 0.03, 20.0, 3.0, 1);
        // outside in y, then above in z
        for p in [Vector3::new(0.0, 0.9, 0.01), Vector3::new(0.0, 0.4, 0.05)] {
            let f = food.food_forces(&[p], &[Vector3::new(0.0, 0.3, -0.1)], 0.0, 0);
            assert_eq!(f[0], Vector3::zeros());
        }
        assert_relative_eq!(food.cut_extent(0), 0.0);
    }

    #[test]
    fn food_below_threshold_fronts_frozen() {
        let mut food = FoodItem::new(0.4, 0.04, 0.03, 0.0, 1.0e3, 1);
        // slight intrusion past the low-y front: blocking force below threshold
        let pts = [Vector3::new(0.0, 0.3801, 0.005)];
        let vel = [Vector3::new(0.0, 0.2, 0.0)];
        let f = food.food_forces(&pts, &vel, 0.0, 0);
        assert!(f[0].y < 0.0, "blocking force must push back, got {}", f[0].y);
        assert_relative_eq!(food.cut_extent(0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn food_above_threshold_cut_advances_monotonically() {
        let mut food = FoodItem::new(0.4, 0.04, 0.03, 20.0, 2.0, 1);
        let mut y = 0.375_f64;
        let mut last_extent = 0.0;
        for _ in 0..600 {
            y += 1e-4;
            let pts = [Vector3::new(0.0, y, 0.005)];
            let vel = [Vector3::new(0.0, 1.0, 0.0)];
            let _ = food.food_forces(&pts, &vel, 0.0, 0);
            let extent = food.cut_extent(0);
            assert!(extent >= last_extent - 1e-12, "cut extent must be monotone");
            last_extent = extent;
        }
        assert!(food.is_separated(0), "full sweep severs the slice");
        assert_relative_eq!(food.cut_extent(0), 0.04, epsilon = 1e-12);
    }

    #[test]
    fn food_separated_terminal_state() {
        let mut food = FoodItem::new(0.4, 0.04, 0.03, 20.0, 2.0, 2);
        assert!(!food.is_separated(0));
        // sweep the blade through slice 0
        let mut y = 0.375_f64;
        while y < 0.425 {
            y += 2e-4;
            let pts = [Vector3::new(0.0, y, 0.004)];
            let vel = [Vector3::new(0.0, 1.0, 0.0)];
            let _ = food.food_forces(&pts, &vel, 0.0, 0);
        }
        assert!(food.is_separated(0));
        assert!(!food.is_separated(1), "adjacent plane untouched");
        // once separated, no further force on this plane
        let f = food.food_forces(
            &[Vector3::new(0.0, 0.4, 0.01)],
            &[Vector3::new(0.0, 1.0, -1.0)],
            0.0,
            0,
        );
        assert_eq!(f[0], Vector3::zeros());
    }

    #[test]
    fn food_power_non_driving() {
        let mut food = FoodItem::new(0.4, 0.04, 0.03, 30.0, 50.0, 1);
        let mut y = 0.3805_f64;
        for step in 0..600 {
            // alternate intrusion and retreat across the low-y front
            let vy = if step % 100 < 70 { 0.3 } else { -0.3 };
            y += vy * 1e-4;
            let pts = [Vector3::new(0.0, y, 0.01)];
            let vel = [Vector3::new(0.0, vy, -0.05)];
            let f = food.food_forces(&pts, &vel, 0.0, 0);
            let power = f[0].dot(&vel[0]);
            assert!(power <= 1e-12, "food force must not drive the blade, power {power}");
        }
    }

    #[test]
    fn blade_presets_valid() {
        for name in ["knife1", "knife2", "knife3"] {
            let blade = BladeProfile::preset(name).unwrap();
            blade.validate().unwrap();
            assert_eq!(blade.edge.len(), 16);
        }
        assert!(BladeProfile::preset("cleaver").is_none());
    }
}
