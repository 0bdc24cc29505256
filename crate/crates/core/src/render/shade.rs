use serde::{Deserialize, Serialize};

use super::transfer::Rgb;
use crate::error::{invalid, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lighting {
    pub ambient: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub shininess: f64,
    /// Unit vector pointing toward the light.
    pub light_direction: Vec3,
}

impl Default for Lighting {
    fn default() -> Self {
        Self {
            ambient: 0.35,
            diffuse: 0.65,
            specular: 0.25,
            shininess: 24.0,
            light_direction: Vec3::new(-0.35, -0.55, 1.0).normalize(),
        }
    }
}

impl Lighting {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.ambient) && unit(self.diffuse) && unit(self.specular)) {
            return Err(invalid("lighting coefficients must lie in [0, 1]"));
        }
        if !(self.shininess >= 1.0) {
            return Err(invalid("shininess must be >= 1"));
        }
        if self.light_direction.try_normalize().is_none() {
            return Err(invalid("light direction must be non-zero"));
        }
        Ok(())
    }
}

/// Phong shading with a white light: `base * (ka + kd * max(0, n.l)) + ks * max(0, r.v)^s`,
/// clamped per channel. A zero normal yields ambient-only shading.
pub fn shade_phong(base: Rgb, normal: Vec3, view_dir: Vec3, lighting: &Lighting) -> Rgb {
    let ambient_only = [
        (base[0] * lighting.ambient).clamp(0.0, 1.0),
        (base[1] * lighting.ambient).clamp(0.0, 1.0),
        (base[2] * lighting.ambient).clamp(0.0, 1.0),
    ];
    let Some(n) = normal.try_normalize() else {
        return ambient_only;
    };
    let l = lighting.light_direction.normalize();
    let n_dot_l = n.dot(l);
    let diffuse = lighting.diffuse * n_dot_l.max(0.0);
    let specular = if lighting.specular > 0.0 && n_dot_l > 0.0 {
        let r = n * (2.0 * n_dot_l) - l;
        lighting.specular * r.dot(view_dir).max(0.0).powf(lighting.shininess)
    } else {
        0.0
    };
    let k = lighting.ambient + diffuse;
    [
        (base[0] * k + specular).clamp(0.0, 1.0),
        (base[1] * k + specular).clamp(0.0, 1.0),
        (base[2] * k + specular).clamp(0.0, 1.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: Rgb = [0.8, 0.4, 0.2];

    fn light(ambient: f64, diffuse: f64, specular: f64) -> Lighting {
        Lighting {
            ambient,
            diffuse,
            specular,
            shininess: 8.0,
            light_direction: Vec3::new(0.0, 0.0, 1.0),
        }
    }

    #[test]
    fn ambient_only_when_no_diffuse_or_specular() {
        let out = shade_phong(BASE, Vec3::new(0.3, 0.1, 0.9).normalize(), Vec3::new(0.0, 0.0, 1.0), &light(0.5, 0.0, 0.0));
        assert_eq!(out, [0.4, 0.2, 0.1]);
    }

    #[test]
    fn facing_light_returns_base() {
        let out = shade_phong(BASE, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 1.0), &light(0.0, 1.0, 0.0));
        assert_eq!(out, BASE);
    }

    #[test]
    fn perpendicular_normal_is_ambient() {
        let out = shade_phong(BASE, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), &light(0.2, 0.7, 0.5));
        for (o, b) in out.iter().zip(BASE) {
            assert!((o - 0.2 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_normal_is_ambient_only() {
        let out = shade_phong(BASE, Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), &light(0.3, 1.0, 1.0));
        for (o, b) in out.iter().zip(BASE) {
            assert!((o - 0.3 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn specular_highlight_clamps() {
        let out = shade_phong(BASE, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 1.0), &light(0.5, 1.0, 1.0));
        assert_eq!(out, [1.0, 1.0, 1.0]);
    }
}
