//! Short descriptors such as `fbm:alpha=0.5,scale=2` or `kernel:indicator,eta=3,R=10`.
//!
//! A descriptor is `kind:item,item,...` where items are `key=value` pairs or, for
//! kernels, a bare kernel name. The keys `delta`, `eta`, `T`, `R` and `h` are not
//! part of the field; they override the estimator parameters of the run.

use std::collections::BTreeMap;

use pickands_core::spectral::AffineProfile;
use pickands_core::{Correlation, FamilySpec, Kernel, SamplingDensity, SpectralFieldSpec, StationaryCovariance, VarianceFunction};
use serde::{Deserialize, Serialize};

use crate::error::{config, CliError};

/// Estimator parameters carried inside a descriptor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub delta: Option<f64>,
    pub eta: Option<f64>,
    pub horizon: Option<f64>,
    pub window: Option<f64>,
    pub mesh: Option<f64>,
}

impl Overrides {
    fn take(&mut self, key: &str, v: f64) -> bool {
        let slot = match key {
            "delta" => &mut self.delta,
            "eta" => &mut self.eta,
            "T" => &mut self.horizon,
            "R" => &mut self.window,
            "h" => &mut self.mesh,
            _ => return false,
        };
        *slot = Some(v);
        true
    }
}

struct Items {
    kind: String,
    bare: Vec<String>,
    keys: BTreeMap<String, String>,
    overrides: Overrides,
}

impl Items {
    fn parse(s: &str) -> Result<Self, CliError> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut items = Items { kind: kind.trim().to_ascii_lowercase(), bare: Vec::new(), keys: BTreeMap::new(), overrides: Overrides::default() };
        for tok in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok.split_once('=') {
                Some((k, v)) => {
                    let k = k.trim();
                    let is_override = match v.trim().parse::<f64>() {
                        Ok(x) => items.overrides.take(k, x),
                        Err(_) => false,
                    };
                    if !is_override && items.keys.insert(k.to_string(), v.trim().to_string()).is_some() {
                        return Err(config(format!("duplicate key `{k}` in `{s}`")));
                    }
                }
                None => items.bare.push(tok.to_string()),
            }
        }
        Ok(items)
    }

    fn num(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        match self.keys.remove(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| config(format!("`{key}={v}` is not a number"))),
        }
    }

    fn req(&mut self, key: &str) -> Result<f64, CliError> {
        self.num(key)?.ok_or_else(|| config(format!("`{}` descriptor needs `{key}=`", self.kind)))
    }

    fn text(&mut self, key: &str) -> Option<String> {
        self.keys.remove(key)
    }

    fn finish(self) -> Result<Overrides, CliError> {
        if let Some(k) = self.keys.keys().next() {
            return Err(config(format!("unknown key `{k}` for `{}`", self.kind)));
        }
        if let Some(b) = self.bare.first() {
            return Err(config(format!("unexpected item `{b}` for `{}`", self.kind)));
        }
        Ok(self.overrides)
    }
}

pub fn parse_kernel_name(name: &str) -> Result<Kernel, CliError> {
    match name {
        "gaussian" | "normal" => Ok(Kernel::GaussianDensity),
        "indicator" => Ok(Kernel::IndicatorUnit),
        "laplace" => Ok(Kernel::Laplace),
        other => match other.strip_prefix("table=").or_else(|| other.strip_prefix("csv=")) {
            Some(path) => Ok(Kernel::Tabulated(pickands_core::kernel::TabulatedKernel::from_csv(path)?)),
            None => Err(config(format!("unknown kernel `{other}` (gaussian, indicator, laplace, table=<path>)"))),
        },
    }
}

fn variance_function(it: &mut Items, kind: &str) -> Result<VarianceFunction, CliError> {
    match kind {
        "fbm" => {
            let alpha = it.req("alpha")?;
            Ok(VarianceFunction::fbm(alpha, it.num("scale")?.unwrap_or(1.0)))
        }
        "linear" => Ok(VarianceFunction::linear(it.req("c")?)),
        other => Err(config(format!("unknown variance function `{other}` (fbm, linear)"))),
    }
}

/// Parses a field descriptor.
pub fn parse_spec(s: &str) -> Result<(SpectralFieldSpec, Overrides), CliError> {
    let mut it = Items::parse(s)?;
    let kind = it.kind.clone();
    let spec = match kind.as_str() {
        "fbm" | "linear" => SpectralFieldSpec::log_gaussian(variance_function(&mut it, &kind)?),
        "kernel" => {
            let name = if it.bare.is_empty() {
                it.text("name").ok_or_else(|| config("kernel descriptor needs a kernel name"))?
            } else {
                it.bare.remove(0)
            };
            let kernel = match it.text("table") {
                Some(path) => parse_kernel_name(&format!("table={path}"))?,
                None => parse_kernel_name(&name)?,
            };
            let scale = it.num("scale")?.unwrap_or(1.0);
            let density = match it.text("density").as_deref() {
                None | Some("normal") => SamplingDensity::Normal { scale },
                Some("laplace") => SamplingDensity::Laplace { scale },
                Some(d) => return Err(config(format!("unknown sampling density `{d}` (normal, laplace)"))),
            };
            SpectralFieldSpec::kernel_with_density(kernel, density)
        }
        "bernoulli" => SpectralFieldSpec::Bernoulli { p: it.req("p")? },
        "stationary" => {
            let variance = it.num("variance")?.unwrap_or(1.0);
            let correlation = match it.text("corr").as_deref() {
                None | Some("exponential") => Correlation::Exponential { scale: it.num("scale")?.unwrap_or(1.0) },
                Some("gaussian") => Correlation::Gaussian { scale: it.num("scale")?.unwrap_or(1.0) },
                Some("cosine") => Correlation::Cosine { period: it.req("period")? },
                Some(c) => return Err(config(format!("unknown correlation `{c}` (exponential, gaussian, cosine)"))),
            };
            SpectralFieldSpec::StationaryLogGaussian { cov: StationaryCovariance { variance, correlation } }
        }
        "family" | "affine" => SpectralFieldSpec::Family { family: parse_family_items(&mut it)? },
        other => return Err(config(format!("unknown field kind `{other}` (fbm, linear, kernel, bernoulli, stationary, affine)"))),
    };
    let overrides = it.finish()?;
    spec.validate()?;
    Ok((spec, overrides))
}

fn parse_family_items(it: &mut Items) -> Result<FamilySpec, CliError> {
    let a = it.num("a")?.unwrap_or(1.0);
    let b = it.num("b")?.unwrap_or(0.0);
    let base_kind = it.text("base").unwrap_or_else(|| "linear".into());
    if base_kind == "linear" && !it.keys.contains_key("c") {
        it.keys.insert("c".into(), "1".into());
    }
    let base = variance_function(it, &base_kind)?;
    Ok(FamilySpec::Scaled { q: AffineProfile { a, b }, base })
}

/// Parses `affine:a=1,b=1[,base=linear,c=1 | base=fbm,alpha=..,scale=..]`.
pub fn parse_family(s: &str) -> Result<(FamilySpec, Overrides), CliError> {
    let mut it = Items::parse(s)?;
    if !matches!(it.kind.as_str(), "affine" | "family") {
        return Err(config(format!("unknown family kind `{}` (affine)", it.kind)));
    }
    let family = parse_family_items(&mut it)?;
    Ok((family, it.finish()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fbm_descriptor() {
        let (spec, o) = parse_spec("fbm:alpha=0.5,scale=2").unwrap();
        assert_eq!(spec, SpectralFieldSpec::log_gaussian(VarianceFunction::fbm(0.5, 2.0)));
        assert_eq!(o, Overrides::default());
    }

    #[test]
    fn kernel_descriptor_with_overrides() {
        let (spec, o) = parse_spec("kernel:indicator,eta=3,R=10").unwrap();
        assert_eq!(spec, SpectralFieldSpec::kernel(Kernel::IndicatorUnit));
        assert_eq!(o.eta, Some(3.0));
        assert_eq!(o.window, Some(10.0));
        assert_eq!(o.delta, None);
    }

    #[test]
    fn kernel_density_options() {
        let (spec, _) = parse_spec("kernel:laplace,density=laplace,scale=4").unwrap();
        assert_eq!(spec, SpectralFieldSpec::kernel_with_density(Kernel::Laplace, SamplingDensity::Laplace { scale: 4.0 }));
    }

    #[test]
    fn stationary_cosine() {
        let (spec, _) = parse_spec("stationary:corr=cosine,period=5").unwrap();
        assert!(spec.is_stationary());
    }

    #[test]
    fn rejects_unknown_keys_and_kinds() {
        assert!(parse_spec("fbm:alpha=0.5,beta=1").is_err());
        assert!(parse_spec("brownian:alpha=0.5").is_err());
        assert!(parse_spec("fbm:scale=1").is_err());
        assert!(parse_spec("bernoulli:p=1.5").is_err());
        assert!(parse_spec("kernel:triangle").is_err());
    }

    #[test]
    fn affine_family() {
        let (f, _) = parse_family("affine:a=1,b=1").unwrap();
        assert_eq!(f, FamilySpec::Scaled { q: AffineProfile { a: 1.0, b: 1.0 }, base: VarianceFunction::linear(1.0) });
        let (f, _) = parse_family("affine:a=0,b=1,base=fbm,alpha=0.5").unwrap();
        assert!(matches!(f, FamilySpec::Scaled { base: VarianceFunction::Fbm { .. }, .. }));
    }
}
