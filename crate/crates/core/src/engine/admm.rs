use crate::error::Result;
use crate::image::Image;

/// Splitting variables of one ADMM run for `min f1(z) + f2(v)` s.t. `z = v`,
/// with `d` the scaled multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState {
    pub z: Image,
    pub v: Image,
    pub d: Image,
    pub mu: f64,
}

impl AdmmState {
    /// `z = v = v0`, `d = 0`.
    pub fn new(v0: Image, mu: f64) -> Self {
        let d = Image::zeros(v0.height(), v0.width());
        Self {
            z: v0.clone(),
            v: v0,
            d,
            mu,
        }
    }

    /// One iteration:
    ///
    /// ```text
    /// z <- argmin f1(z) + mu/2 ||z - v - d||^2     (z_update receives v + d)
    /// v <- argmin f2(v) + mu/2 ||z - v - d||^2     (v_update receives z - d)
    /// d <- d - (z - v)
    /// ```
    pub fn step(
        &mut self,
        z_update: impl FnOnce(&Image) -> Result<Image>,
        v_update: impl FnOnce(&Image) -> Result<Image>,
    ) -> Result<()> {
        let v_plus_d = self.v.zip_map(&self.d, |v, d| v + d);
        self.z = z_update(&v_plus_d)?;
        let z_minus_d = self.z.zip_map(&self.d, |z, d| z - d);
        self.v = v_update(&z_minus_d)?;
        self.d = dual_update(&self.d, &self.z, &self.v);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite() && self.v.is_finite() && self.d.is_finite()
    }
}

pub(crate) fn dual_update(d: &Image, z: &Image, v: &Image) -> Image {
    let mut out = d.clone();
    for ((o, z), v) in out.pixels_mut().iter_mut().zip(z.pixels()).zip(v.pixels()) {
        *o -= z - v;
    }
    out
}
