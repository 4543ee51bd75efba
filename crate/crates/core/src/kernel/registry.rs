//! Named kernel families and the `family:param=value,...` spec language.
//!
//! ```text
//! delta                      identity filter
//! gaussian:sigma=2           isotropic Gaussian
//! motion:len=9,angle=45      straight motion path
//! disk:radius=4              out-of-focus disk
//! uniform:w=9                centered box (default w = k)
//! nonlinear:steps=60,seed=3  random smooth motion path
//! ```
//!
//! Every family also accepts `k`, the odd support size (default 15).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{generators, BlurKernel};
use crate::error::{Error, Result};

pub const DEFAULT_KERNEL_SIZE: usize = 15;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KernelParams(BTreeMap<String, f64>);

impl KernelParams {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn require(&self, family: &str, key: &str) -> Result<f64> {
        self.get(key)
            .ok_or_else(|| Error::invalid(format!("kernel family '{family}' requires '{key}'")))
    }

    pub fn get_or(&self, key: &str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    pub fn insert(&mut self, key: impl Into<String>, value: f64) {
        self.0.insert(key.into(), value);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

/// Parsed form of a kernel spec string.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: String,
    pub params: KernelParams,
}

impl KernelSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (family, rest) = match text.split_once(':') {
            Some((f, r)) => (f.trim(), r.trim()),
            None => (text, ""),
        };
        if family.is_empty() {
            return Err(Error::invalid("kernel spec has no family name"));
        }
        let mut params = KernelParams::default();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("kernel parameter '{item}' is not key=value")))?;
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::invalid(format!("kernel parameter '{key}' has non-numeric value '{value}'"))
            })?;
            if !value.is_finite() {
                return Err(Error::invalid(format!("kernel parameter '{key}' is not finite")));
            }
            params.insert(key.trim(), value);
        }
        Ok(Self {
            family: family.to_string(),
            params,
        })
    }

    pub fn size(&self) -> Result<usize> {
        match self.params.get("k") {
            None => Ok(DEFAULT_KERNEL_SIZE),
            Some(k) => as_count("k", k),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.family)?;
        let mut sep = ':';
        for (k, v) in &self.params.0 {
            write!(f, "{sep}{k}={v}")?;
            sep = ',';
        }
        Ok(())
    }
}

fn as_count(key: &str, v: f64) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::invalid(format!(
            "kernel parameter '{key}' must be a nonnegative integer, got {v}"
        )));
    }
    Ok(v as usize)
}

/// A blur family that can be instantiated from spec parameters.
pub trait KernelFamily: Send + Sync {
    fn name(&self) -> &'static str;

    /// Parameter names accepted besides `k`.
    fn params(&self) -> &'static [&'static str];

    fn summary(&self) -> &'static str;

    fn generate(&self, size: usize, params: &KernelParams) -> Result<BlurKernel>;
}

struct Delta;
struct Gaussian;
struct LinearMotion;
struct Disk;
struct Uniform;
struct NonlinearMotion;

impl KernelFamily for Delta {
    fn name(&self) -> &'static str {
        "delta"
    }
    fn params(&self) -> &'static [&'static str] {
        &[]
    }
    fn summary(&self) -> &'static str {
        "identity filter"
    }
    fn generate(&self, size: usize, _: &KernelParams) -> Result<BlurKernel> {
        BlurKernel::delta(size)
    }
}

impl KernelFamily for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn params(&self) -> &'static [&'static str] {
        &["sigma"]
    }
    fn summary(&self) -> &'static str {
        "isotropic Gaussian, sigma in pixels"
    }
    fn generate(&self, size: usize, p: &KernelParams) -> Result<BlurKernel> {
        generators::gen_gaussian(size, p.require(self.name(), "sigma")?)
    }
}

impl KernelFamily for LinearMotion {
    fn name(&self) -> &'static str {
        "motion"
    }
    fn params(&self) -> &'static [&'static str] {
        &["len", "angle"]
    }
    fn summary(&self) -> &'static str {
        "linear motion of len taps at angle degrees (default 0)"
    }
    fn generate(&self, size: usize, p: &KernelParams) -> Result<BlurKernel> {
        generators::gen_motion_linear(size, p.require(self.name(), "len")?, p.get_or("angle", 0.0))
    }
}

impl KernelFamily for Disk {
    fn name(&self) -> &'static str {
        "disk"
    }
    fn params(&self) -> &'static [&'static str] {
        &["radius"]
    }
    fn summary(&self) -> &'static str {
        "out-of-focus disk of the given radius"
    }
    fn generate(&self, size: usize, p: &KernelParams) -> Result<BlurKernel> {
        generators::gen_disk(size, p.require(self.name(), "radius")?)
    }
}

impl KernelFamily for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }
    fn params(&self) -> &'static [&'static str] {
        &["w"]
    }
    fn summary(&self) -> &'static str {
        "centered w x w box (default w = k)"
    }
    fn generate(&self, size: usize, p: &KernelParams) -> Result<BlurKernel> {
        let w = match p.get("w") {
            Some(w) => as_count("w", w)?,
            None => size,
        };
        generators::gen_uniform(w, size)
    }
}

impl KernelFamily for NonlinearMotion {
    fn name(&self) -> &'static str {
        "nonlinear"
    }
    fn params(&self) -> &'static [&'static str] {
        &["steps", "seed"]
    }
    fn summary(&self) -> &'static str {
        "random smooth motion path (default steps = 4k, seed = 0)"
    }
    fn generate(&self, size: usize, p: &KernelParams) -> Result<BlurKernel> {
        let steps = match p.get("steps") {
            Some(s) => as_count("steps", s)?,
            None => 4 * size,
        };
        let seed = as_count("seed", p.get_or("seed", 0.0))? as u64;
        generators::gen_nonlinear_motion(size, steps, seed)
    }
}

/// Lookup table from family name to generator.
#[derive(Clone, Default)]
pub struct KernelRegistry {
    families: BTreeMap<&'static str, Arc<dyn KernelFamily>>,
}

impl KernelRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(Delta));
        reg.register(Arc::new(Gaussian));
        reg.register(Arc::new(LinearMotion));
        reg.register(Arc::new(Disk));
        reg.register(Arc::new(Uniform));
        reg.register(Arc::new(NonlinearMotion));
        reg
    }

    pub fn register(&mut self, family: Arc<dyn KernelFamily>) {
        self.families.insert(family.name(), family);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn KernelFamily>> {
        self.families.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.families.keys().copied()
    }

    pub fn build(&self, spec: &KernelSpec) -> Result<BlurKernel> {
        let family = self.get(&spec.family).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::invalid(format!(
                "unknown kernel family '{}' (known: {})",
                spec.family,
                known.join(", ")
            ))
        })?;
        if let Some(bad) = spec
            .params
            .keys()
            .find(|k| *k != "k" && !family.params().contains(k))
        {
            return Err(Error::invalid(format!(
                "kernel family '{}' has no parameter '{bad}'",
                spec.family
            )));
        }
        family.generate(spec.size()?, &spec.params)
    }

    pub fn build_str(&self, spec: &str) -> Result<BlurKernel> {
        self.build(&KernelSpec::parse(spec)?)
    }

    /// One line per family, for CLI help text.
    pub fn help(&self) -> String {
        self.families
            .values()
            .map(|f| {
                let params = if f.params().is_empty() {
                    String::new()
                } else {
                    format!(":{}", f.params().iter().map(|p| format!("{p}=..")).collect::<Vec<_>>().join(","))
                };
                format!("  {}{params}  {}", f.name(), f.summary())
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}
