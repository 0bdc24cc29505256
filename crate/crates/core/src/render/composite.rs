use serde::{Deserialize, Serialize};

use super::transfer::Rgb;

/// Front-to-back accumulation state. Colors are premultiplied by opacity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accumulator {
    pub color: Rgb,
    pub alpha: f64,
}

impl Accumulator {
    /// Adds a sample behind everything accumulated so far. Both updates use the opacity
    /// accumulated before this sample.
    #[inline]
    pub fn composite(self, color: Rgb, alpha: f64) -> Accumulator {
        let t = 1.0 - self.alpha;
        Accumulator {
            color: [
                self.color[0] + t * color[0],
                self.color[1] + t * color[1],
                self.color[2] + t * color[2],
            ],
            alpha: self.alpha + t * alpha,
        }
    }

    /// Result over an opaque background.
    pub fn over(self, background: Rgb) -> Rgb {
        let t = 1.0 - self.alpha;
        [
            self.color[0] + t * background[0],
            self.color[1] + t * background[1],
            self.color[2] + t * background[2],
        ]
    }
}

pub fn composite(acc: Accumulator, color: Rgb, alpha: f64) -> Accumulator {
    acc.composite(color, alpha)
}
