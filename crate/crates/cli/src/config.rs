//! Run configuration: a JSON file, overridden field by field by command-line flags.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use dirac_core::{BatteryConfig, BoundaryCondition, Channel, Complex64, PotentialSpec};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Odd-lattice window used when a potential is given by even coefficients only.
pub const DEFAULT_ODD_MAX_MODE: i64 = 64;

/// Tolerance on sample abscissae against the uniform grid `πj/M`.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub bc: BoundaryCondition,
    #[serde(rename = "K")]
    pub k: usize,
    pub radius: f64,
    pub nodes: usize,
    #[serde(rename = "N")]
    pub n: Option<i64>,
    pub seed: u64,
    pub potential: PotentialInput,
    pub outputs: PathBuf,
    /// Circle samples for the resolvent threshold search.
    pub samples: usize,
    /// Input of the `reconstruct` command.
    pub function: FunctionInput,
    /// Random reorderings in the unconditionality test.
    pub trials: usize,
    pub battery: BatteryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            bc: BoundaryCondition::PeriodicPlus,
            k: 64,
            radius: 0.5,
            nodes: 64,
            n: None,
            seed: 0,
            potential: PotentialInput::default(),
            outputs: PathBuf::from("out"),
            samples: 16,
            function: FunctionInput::default(),
            trials: 10,
            battery: BatteryConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a JSON configuration; relative potential files resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(file) = &config.potential.file {
            if file.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.potential.file = Some(base.join(file));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.k < 8 {
            return Err(CliError::Config(format!("K must be at least 8, got {}", self.k)));
        }
        if self.nodes < 8 || !self.nodes.is_multiple_of(2) {
            return Err(CliError::Config(format!("nodes must be even and at least 8, got {}", self.nodes)));
        }
        if !(self.radius > 0.0 && self.radius <= 0.5) {
            return Err(CliError::Config(format!("radius must lie in (0, 1/2], got {}", self.radius)));
        }
        if let Some(n) = self.n {
            if n < 1 || n >= self.k as i64 / 2 {
                return Err(CliError::Config(format!("N must lie in [1, K/2), got {n}")));
            }
        }
        if self.samples == 0 {
            return Err(CliError::Config("samples must be positive".into()));
        }
        Ok(())
    }

    /// Largest index whose projection is trusted at this truncation.
    pub fn window(&self) -> i64 {
        self.k as i64 / 2
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPotential {
    pub modes: i64,
    pub norm: f64,
}

/// Exactly one source may be given; none means the zero potential.
///
/// Coefficient rows are `[m, re, im]`, sample rows `[x, re P, im P, re Q, im Q]`
/// on the grid `x_j = πj/M`, `j = 0..M`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialInput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_even: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_even: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_odd: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_odd: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub odd_max_mode: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 5]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_mode: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomPotential>,
}

impl PotentialInput {
    pub fn resolve(&self, seed_rng: &mut ChaCha8Rng) -> CliResult<PotentialSpec> {
        let coefficients = self.p_even.is_some() || self.q_even.is_some() || self.p_odd.is_some() || self.q_odd.is_some();
        let sources = [coefficients, self.samples.is_some(), self.file.is_some(), self.random.is_some()];
        match sources.iter().filter(|&&s| s).count() {
            0 => return Ok(PotentialSpec::zero()),
            1 => {}
            _ => {
                return Err(CliError::Config(
                    "potential: give exactly one of coefficients, samples, file or random".into(),
                ))
            }
        }
        if let Some(path) = &self.file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read potential file {}: {e}", path.display())))?;
            let inner: PotentialInput = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("potential file {}: {e}", path.display())))?;
            if inner.file.is_some() {
                return Err(CliError::Config("potential files may not reference further files".into()));
            }
            return inner.resolve(seed_rng);
        }
        if let Some(r) = self.random {
            if r.modes < 0 || !(r.norm.is_finite() && r.norm >= 0.0) {
                return Err(CliError::Config(format!("random potential needs modes >= 0 and norm >= 0, got {r:?}")));
            }
            return Ok(PotentialSpec::random_trig(seed_rng, r.modes, r.norm));
        }
        if let Some(rows) = &self.samples {
            return from_sample_rows(rows, self.max_mode);
        }
        let p_even = coefficient_map("p_even", &self.p_even)?;
        let q_even = coefficient_map("q_even", &self.q_even)?;
        let spec = if self.p_odd.is_some() || self.q_odd.is_some() {
            let p_odd = coefficient_map("p_odd", &self.p_odd)?;
            let q_odd = coefficient_map("q_odd", &self.q_odd)?;
            PotentialSpec::from_coefficients(p_even, q_even, p_odd, q_odd)
        } else {
            let odd_max = self.odd_max_mode.unwrap_or(DEFAULT_ODD_MAX_MODE);
            PotentialSpec::from_even_coefficients(p_even, q_even, odd_max)
        };
        spec.map_err(|e| CliError::Config(format!("potential: {e}")))
    }
}

fn coefficient_map(field: &str, rows: &Option<Vec<[f64; 3]>>) -> CliResult<BTreeMap<i64, Complex64>> {
    let mut map = BTreeMap::new();
    for row in rows.iter().flatten() {
        let [m, re, im] = *row;
        if m.fract() != 0.0 || m.abs() > 1e12 {
            return Err(CliError::Config(format!("{field}: mode {m} is not an integer")));
        }
        if !(re.is_finite() && im.is_finite()) {
            return Err(CliError::Config(format!("{field}: non-finite coefficient at mode {m}")));
        }
        if map.insert(m as i64, Complex64::new(re, im)).is_some() {
            return Err(CliError::Config(format!("{field}: mode {m} listed twice")));
        }
    }
    Ok(map)
}

fn from_sample_rows(rows: &[[f64; 5]], max_mode: Option<i64>) -> CliResult<PotentialSpec> {
    let len = rows.len();
    if len == 0 {
        return Err(CliError::Config("samples: empty list".into()));
    }
    for (j, row) in rows.iter().enumerate() {
        let x = PI * j as f64 / len as f64;
        if (row[0] - x).abs() > GRID_TOL {
            return Err(CliError::Config(format!(
                "samples: row {j} has x = {}, expected the uniform grid value {x}",
                row[0]
            )));
        }
    }
    let p: Vec<Complex64> = rows.iter().map(|r| Complex64::new(r[1], r[2])).collect();
    let q: Vec<Complex64> = rows.iter().map(|r| Complex64::new(r[3], r[4])).collect();
    let max_mode = max_mode.unwrap_or(len as i64 / 4);
    PotentialSpec::from_samples(&p, &q, max_mode).map_err(|e| CliError::Config(format!("samples: {e}")))
}

/// Input vector of the `reconstruct` command; at most one source, random by default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionInput {
    /// Random unit vector supported in `|n| <= random_max_n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_max_n: Option<i64>,
    /// Rows `[n, channel, re, im]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<(i64, Channel, f64, f64)>>,
    /// Eigenvector of the eigenvalue nearest to this index.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvector: Option<i64>,
}

/// Default support of the random reconstruction input.
pub const DEFAULT_FUNCTION_MAX_N: i64 = 8;

impl FunctionInput {
    pub fn validate(&self) -> CliResult<()> {
        let given = [self.random_max_n.is_some(), self.coefficients.is_some(), self.eigenvector.is_some()];
        if given.iter().filter(|&&g| g).count() > 1 {
            return Err(CliError::Config(
                "function: give at most one of random_max_n, coefficients or eigenvector".into(),
            ));
        }
        Ok(())
    }
}

/// Flag values that replace the corresponding configuration fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub bc: Option<BoundaryCondition>,
    pub k: Option<usize>,
    pub radius: Option<f64>,
    pub nodes: Option<usize>,
    pub n: Option<i64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(bc) = self.bc {
            config.bc = bc;
        }
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(r) = self.radius {
            config.radius = r;
        }
        if let Some(nodes) = self.nodes {
            config.nodes = nodes;
        }
        if let Some(n) = self.n {
            config.n = Some(n);
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
            config.battery.seed = seed;
        }
        if let Some(out) = &self.out {
            config.outputs = out.clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn invariants_are_enforced() {
        let bad = [
            RunConfig { k: 6, ..Default::default() },
            RunConfig { nodes: 9, ..Default::default() },
            RunConfig { nodes: 6, ..Default::default() },
            RunConfig { radius: 0.6, ..Default::default() },
            RunConfig { radius: 0.0, ..Default::default() },
            RunConfig { n: Some(32), ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(CliError::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn flags_win_over_file() {
        let mut c: RunConfig = serde_json::from_str(r#"{"bc": "dir", "K": 16, "seed": 3}"#).unwrap();
        Overrides { k: Some(32), seed: Some(9), ..Default::default() }.apply(&mut c);
        assert_eq!((c.bc, c.k, c.seed, c.battery.seed), (BoundaryCondition::Dirichlet, 32, 9, 9));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"kk": 1}"#).is_err());
    }

    #[test]
    fn even_coefficients_get_odd_maps() {
        let input = PotentialInput {
            p_even: Some(vec![[2.0, 1.0, 0.0]]),
            ..Default::default()
        };
        let spec = input.resolve(&mut rng()).unwrap();
        assert_eq!(spec.p(2), Complex64::new(1.0, 0.0));
        assert!(!spec.p_odd.is_empty());
    }

    #[test]
    fn conflicting_sources_are_rejected() {
        let input = PotentialInput {
            p_even: Some(vec![[0.0, 1.0, 0.0]]),
            random: Some(RandomPotential { modes: 2, norm: 1.0 }),
            ..Default::default()
        };
        assert!(matches!(input.resolve(&mut rng()), Err(CliError::Config(_))));
    }

    #[test]
    fn fractional_mode_is_rejected() {
        let input = PotentialInput {
            q_even: Some(vec![[0.5, 1.0, 0.0]]),
            ..Default::default()
        };
        assert!(matches!(input.resolve(&mut rng()), Err(CliError::Config(_))));
    }

    #[test]
    fn constant_samples_give_constant_potential() {
        let len = 16;
        let rows: Vec<[f64; 5]> = (0..len).map(|j| [PI * j as f64 / len as f64, 1.0, 0.0, 1.0, 0.0]).collect();
        let spec = PotentialInput {
            samples: Some(rows),
            max_mode: Some(2),
            ..Default::default()
        }
        .resolve(&mut rng())
        .unwrap();
        assert!((spec.p(0) - 1.0).norm() < 1e-14);
        assert!(spec.p(2).norm() < 1e-14);
    }

    #[test]
    fn off_grid_samples_are_rejected() {
        let rows = vec![[0.0, 1.0, 0.0, 1.0, 0.0], [0.3, 1.0, 0.0, 1.0, 0.0]];
        let input = PotentialInput { samples: Some(rows), ..Default::default() };
        assert!(matches!(input.resolve(&mut rng()), Err(CliError::Config(_))));
    }
}
