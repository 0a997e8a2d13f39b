use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::stats::Summary;

/// One estimate with its Monte Carlo standard error (0 for quadrature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimate: f64,
    pub stderr: f64,
    pub reps: usize,
    pub elapsed_s: f64,
    pub fingerprint: String,
    /// The continuum was approximated on a finite simulation mesh.
    pub continuum_proxy: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl EstimateResult {
    pub(crate) fn from_summary(s: Summary, fingerprint: String, started: std::time::Instant) -> Self {
        Self {
            estimate: s.mean,
            stderr: s.stderr,
            reps: s.n,
            elapsed_s: started.elapsed().as_secs_f64(),
            fingerprint,
            continuum_proxy: false,
            notes: Vec::new(),
        }
    }

    pub(crate) fn exact(value: f64, fingerprint: String, started: std::time::Instant) -> Self {
        Self::from_summary(Summary { mean: value, stderr: 0.0, n: 0 }, fingerprint, started)
    }

    pub fn z_against(&self, reference: f64) -> f64 {
        crate::stats::z_score(self.estimate - reference, self.stderr)
    }
}

/// First 16 hex digits of the SHA-256 of the canonical JSON of `inputs`.
pub fn fingerprint<T: Serialize + ?Sized>(inputs: &T) -> String {
    let json = serde_json::to_vec(inputs).expect("inputs serialize to JSON");
    let digest = Sha256::digest(&json);
    hex_prefix(&digest[..8])
}

fn hex_prefix(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_is_stable_and_input_sensitive() {
        let a = fingerprint(&("x", 1.0, 42u64));
        assert_eq!(a.len(), 16);
        assert_eq!(a, fingerprint(&("x", 1.0, 42u64)));
        assert_ne!(a, fingerprint(&("x", 1.0, 43u64)));
    }
}
