use std::fmt;

/// Symmetric 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Tensor2 {
    pub const IDENTITY: Tensor2 = Tensor2 { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub fn isotropic(m: f64) -> Self {
        Self::new(m, 0.0, m)
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, b)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(c * self.xx, c * self.xy, c * self.yy)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    /// `a . (T b)`
    pub fn bilinear(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let tb = self.apply(b);
        a[0] * tb[0] + a[1] * tb[1]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.xx + self.yy);
        let rad = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        [mean - rad, mean + rad]
    }

    pub fn is_spd(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite() && self.eigenvalues()[0] > 0.0
    }

    pub fn max_abs_diff(&self, other: &Tensor2) -> f64 {
        (self.xx - other.xx)
            .abs()
            .max((self.xy - other.xy).abs())
            .max((self.yy - other.yy).abs())
    }
}

impl fmt::Display for Tensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.xx, self.xy, self.xy, self.yy)
    }
}
