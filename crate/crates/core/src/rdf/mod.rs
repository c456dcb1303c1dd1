//! Partial radial-distribution-function features and formation-energy
//! targets for periodic crystal structures.

pub mod extxyz;
pub mod structure;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;

use crate::elm::RegressionData;
use crate::error::{Error, Result};
pub use structure::{CrystalStructure, Site};

/// Gaussian-smeared partial RDF settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RdfConfig {
    /// Neighbor cutoff d_c in angstrom.
    pub cutoff: f64,
    /// Gaussian smearing width sigma_g in angstrom.
    pub gaussian_width: f64,
    /// Renormalization exponent p in the 1/r^p prefactor.
    pub renorm_exponent: f64,
    pub grid_points: usize,
    /// Upper end of the radial grid (0, grid_max].
    pub grid_max: f64,
    /// Ordered species pairs, one feature block per pair.
    pub species_pairs: Vec<(String, String)>,
}

impl Default for RdfConfig {
    fn default() -> Self {
        RdfConfig {
            cutoff: 8.0,
            gaussian_width: 0.2,
            renorm_exponent: 2.0,
            grid_points: 64,
            grid_max: 10.0,
            species_pairs: vec![
                ("Li".into(), "Li".into()),
                ("Li".into(), "Ge".into()),
                ("Ge".into(), "Ge".into()),
            ],
        }
    }
}

impl RdfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_width > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gaussian width must be > 0, got {}",
                self.gaussian_width
            )));
        }
        if !(self.grid_max > 0.0) {
            return Err(Error::InvalidConfig(format!("grid max must be > 0, got {}", self.grid_max)));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 2 points, got {}",
                self.grid_points
            )));
        }
        if !(self.cutoff > 0.0 && self.cutoff <= self.grid_max) {
            return Err(Error::InvalidConfig(format!(
                "cutoff must lie in (0, grid_max], got {} with grid_max {}",
                self.cutoff, self.grid_max
            )));
        }
        if self.renorm_exponent < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "renormalization exponent must be >= 0, got {}",
                self.renorm_exponent
            )));
        }
        if self.species_pairs.is_empty() {
            return Err(Error::InvalidConfig("at least one species pair is required".into()));
        }
        Ok(())
    }

    /// Evenly spaced grid on (0, grid_max].
    pub fn grid(&self) -> Vec<f64> {
        (0..self.grid_points)
            .map(|m| self.grid_max * (m + 1) as f64 / self.grid_points as f64)
            .collect()
    }

    pub fn feature_count(&self) -> usize {
        self.species_pairs.len() * self.grid_points
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("RdfConfig serializes");
        hex_digest(&bytes)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Formation energy relative to the pure endpoints:
/// `E_tot - X_a E_a - X_b E_b`. Fractions must sum to one.
pub fn formation_energy(
    total_energy_per_atom: f64,
    molar_fraction_a: f64,
    molar_fraction_b: f64,
    pure_energy_a: f64,
    pure_energy_b: f64,
) -> Result<f64> {
    if molar_fraction_a < 0.0 || molar_fraction_b < 0.0 {
        return Err(Error::InvalidConfig("molar fractions must be nonnegative".into()));
    }
    if (molar_fraction_a + molar_fraction_b - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "molar fractions must sum to 1, got {}",
            molar_fraction_a + molar_fraction_b
        )));
    }
    Ok(total_energy_per_atom - molar_fraction_a * pure_energy_a - molar_fraction_b * pure_energy_b)
}

/// Formation energy of a structure against a table of pure-element
/// energies (eV/atom), generalizing the binary form to any composition.
pub fn formation_energy_for(
    structure: &CrystalStructure,
    pure_energies: &BTreeMap<String, f64>,
) -> Result<f64> {
    let e_tot = structure
        .energy_per_atom
        .ok_or_else(|| Error::InvalidConfig("structure carries no energy".into()))?;
    let composition = structure.composition();
    let total: usize = composition.values().sum();
    if total == 0 {
        return Err(Error::InvalidConfig("structure has no atoms".into()));
    }
    let mut reference = 0.0;
    for (species, count) in &composition {
        let pure = pure_energies.get(species).ok_or_else(|| {
            Error::InvalidConfig(format!("no pure-element energy for species '{species}'"))
        })?;
        reference += (*count as f64 / total as f64) * pure;
    }
    Ok(e_tot - reference)
}

/// Grid samples of the smeared partial RDF for one ordered species pair.
/// Structures without any center atom yield an all-zero block.
pub fn partial_rdf(structure: &CrystalStructure, pair: &(String, String), config: &RdfConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let n_a = structure.species_count(&pair.0);
    if n_a == 0 {
        return Ok(vec![0.0; config.grid_points]);
    }
    let distances = structure.enumerate_neighbors(&pair.0, &pair.1, config.cutoff)?;
    let inv_two_sigma_sq = 1.0 / (2.0 * config.gaussian_width * config.gaussian_width);
    let values = config
        .grid()
        .iter()
        .map(|&r| {
            let prefactor = 1.0 / r.powf(config.renorm_exponent);
            let sum: f64 = distances
                .iter()
                .map(|&d| (-(r - d) * (r - d) * inv_two_sigma_sq).exp())
                .sum();
            prefactor * sum / n_a as f64
        })
        .collect();
    Ok(values)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub config_hash: String,
    pub species_pairs: Vec<String>,
    pub target_units: Option<String>,
}

/// Feature matrix with optional targets; rows follow the input structures.
#[derive(Debug, Clone)]
pub struct FeatureDataset {
    pub features: DMatrix<f64>,
    pub targets: Option<DVector<f64>>,
    pub columns: Vec<String>,
    pub metadata: DatasetMetadata,
}

impl FeatureDataset {
    pub fn to_regression_data(&self) -> Result<RegressionData> {
        let targets = self
            .targets
            .clone()
            .ok_or_else(|| Error::InvalidConfig("dataset has no targets".into()))?;
        RegressionData::new(self.features.clone(), targets)
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        let mut header = self.columns.join(",");
        if self.targets.is_some() {
            header.push_str(",target");
        }
        writeln!(writer, "{header}")?;
        for row in 0..self.features.nrows() {
            let mut line = (0..self.features.ncols())
                .map(|c| format!("{}", self.features[(row, c)]))
                .collect::<Vec<_>>()
                .join(",");
            if let Some(targets) = &self.targets {
                line.push_str(&format!(",{}", targets[row]));
            }
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }

    /// Reads a CSV written by `write_csv`; a final `target` column becomes
    /// the target vector.
    pub fn read_csv(text: &str) -> Result<FeatureDataset> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, message: "empty CSV".into() })?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let has_target = columns.last().map(|c| c == "target").unwrap_or(false);
        let n_features = if has_target { columns.len() - 1 } else { columns.len() };

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut targets: Vec<f64> = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let values: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("malformed numeric row '{line}'"),
                })?;
            if values.len() != columns.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {} values, got {}", columns.len(), values.len()),
                });
            }
            if has_target {
                targets.push(values[n_features]);
            }
            rows.push(values[..n_features].to_vec());
        }
        let nrows = rows.len();
        let features = DMatrix::from_fn(nrows, n_features, |r, c| rows[r][c]);
        Ok(FeatureDataset {
            features,
            targets: has_target.then(|| DVector::from_vec(targets)),
            columns: columns[..n_features].to_vec(),
            metadata: DatasetMetadata {
                config_hash: String::new(),
                species_pairs: Vec::new(),
                target_units: has_target.then(|| "eV/atom".to_string()),
            },
        })
    }
}

/// Concatenates per-pair RDF blocks for every structure; attaches
/// formation-energy targets when pure-element energies are supplied.
pub fn featurize(
    structures: &[CrystalStructure],
    config: &RdfConfig,
    pure_energies: Option<&BTreeMap<String, f64>>,
) -> Result<FeatureDataset> {
    config.validate()?;
    let n_cols = config.feature_count();
    let mut features = DMatrix::zeros(structures.len(), n_cols);
    for (row, structure) in structures.iter().enumerate() {
        let mut col = 0;
        for pair in &config.species_pairs {
            for value in partial_rdf(structure, pair, config)? {
                features[(row, col)] = value;
                col += 1;
            }
        }
    }

    let targets = match pure_energies {
        Some(energies) => {
            let mut t = DVector::zeros(structures.len());
            for (index, structure) in structures.iter().enumerate() {
                if structure.energy_per_atom.is_none() {
                    return Err(Error::MissingEnergy { index });
                }
                t[index] = formation_energy_for(structure, energies)?;
            }
            Some(t)
        }
        None => None,
    };

    let columns = config
        .species_pairs
        .iter()
        .flat_map(|(a, b)| (0..config.grid_points).map(move |m| format!("{a}-{b}_{m}")))
        .collect();
    Ok(FeatureDataset {
        features,
        targets,
        columns,
        metadata: DatasetMetadata {
            config_hash: config.hash(),
            species_pairs: config.species_pairs.iter().map(|(a, b)| format!("{a}-{b}")).collect(),
            target_units: pure_energies.map(|_| "eV/atom".to_string()),
        },
    })
}
