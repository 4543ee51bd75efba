//! Denoisers that can stand in for the proximity operator of the image
//! regularizer, and a name-keyed registry for selecting one at run time.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::gmm::{Gmm, MmseDenoiser};
use crate::image::{Image, PatchGrid};

/// Maps an image observed under white Gaussian noise of variance `sigma2`
/// to an estimate of the clean image.
pub trait Denoiser: Send + Sync {
    fn name(&self) -> &str;

    fn denoise(&self, noisy: &Image, sigma2: f64) -> Result<Image>;
}

/// Returns its input. Turns the image step into plain regularized least
/// squares.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn name(&self) -> &str {
        "identity"
    }

    fn denoise(&self, noisy: &Image, _sigma2: f64) -> Result<Image> {
        Ok(noisy.clone())
    }
}

/// Patch-wise MMSE under a mixture prior, averaged over overlapping patches.
/// The prepared model for the most recent `sigma2` is cached since the
/// variance is constant within an image step.
pub struct GmmDenoiser {
    gmm: Arc<Gmm>,
    grid: PatchGrid,
    cache: Mutex<Option<(u64, Arc<MmseDenoiser>)>>,
}

impl GmmDenoiser {
    pub fn new(gmm: Arc<Gmm>, grid: PatchGrid) -> Result<Self> {
        if gmm.dim() != grid.dim() {
            return Err(Error::invalid(format!(
                "mixture dimension {} does not match {}x{} patches",
                gmm.dim(),
                grid.patch_size(),
                grid.patch_size()
            )));
        }
        Ok(Self {
            gmm,
            grid,
            cache: Mutex::new(None),
        })
    }

    pub fn gmm(&self) -> &Gmm {
        &self.gmm
    }

    fn prepared(&self, sigma2: f64) -> Result<Arc<MmseDenoiser>> {
        let mut cache = self.cache.lock().unwrap();
        if let Some((bits, m)) = cache.as_ref() {
            if *bits == sigma2.to_bits() {
                return Ok(m.clone());
            }
        }
        let m = Arc::new(MmseDenoiser::new(&self.gmm, sigma2)?);
        *cache = Some((sigma2.to_bits(), m.clone()));
        Ok(m)
    }
}

impl Denoiser for GmmDenoiser {
    fn name(&self) -> &str {
        "gmm"
    }

    fn denoise(&self, noisy: &Image, sigma2: f64) -> Result<Image> {
        self.prepared(sigma2)?.denoise_image(noisy, &self.grid)
    }
}

/// Inputs available to denoiser constructors.
pub struct DenoiserContext<'a> {
    pub gmm: Option<Arc<Gmm>>,
    pub grid: &'a PatchGrid,
}

pub type DenoiserFactory = Arc<dyn Fn(&DenoiserContext) -> Result<Arc<dyn Denoiser>> + Send + Sync>;

#[derive(Clone, Default)]
pub struct DenoiserRegistry {
    factories: BTreeMap<String, DenoiserFactory>,
}

impl DenoiserRegistry {
    pub fn with_builtin() -> Self {
        let mut reg = Self::default();
        reg.register("gmm", |ctx| {
            let gmm = ctx
                .gmm
                .clone()
                .ok_or_else(|| Error::invalid("the gmm denoiser needs a trained model"))?;
            Ok(Arc::new(GmmDenoiser::new(gmm, *ctx.grid)?) as Arc<dyn Denoiser>)
        });
        reg.register("identity", |_| Ok(Arc::new(IdentityDenoiser) as Arc<dyn Denoiser>));
        reg
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn(&DenoiserContext) -> Result<Arc<dyn Denoiser>> + Send + Sync + 'static,
    ) {
        self.factories.insert(name.into(), Arc::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, ctx: &DenoiserContext) -> Result<Arc<dyn Denoiser>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::invalid(format!(
                "unknown denoiser '{name}' (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        factory(ctx)
    }
}
