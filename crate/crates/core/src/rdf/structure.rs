//! Periodic crystal cells and neighbor-distance enumeration.

use nalgebra::{Matrix3, Vector3};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Site {
    pub species: String,
    /// Fractional coordinates, wrapped into [0, 1).
    pub frac: Vector3<f64>,
}

/// Periodic unit cell with typed atomic sites.
#[derive(Debug, Clone)]
pub struct CrystalStructure {
    /// Rows are the lattice vectors a, b, c in angstrom.
    lattice: Matrix3<f64>,
    sites: Vec<Site>,
    pub energy_per_atom: Option<f64>,
}

fn wrap_frac(f: f64) -> f64 {
    let w = f - f.floor();
    if w >= 1.0 { 0.0 } else { w }
}

impl CrystalStructure {
    pub fn new(
        lattice: Matrix3<f64>,
        sites: Vec<(String, Vector3<f64>)>,
        energy_per_atom: Option<f64>,
    ) -> Result<Self> {
        let volume = lattice.determinant().abs();
        if !(volume > 1e-9) || lattice.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateLattice(format!("cell volume {volume} is not positive")));
        }
        let sites = sites
            .into_iter()
            .map(|(species, frac)| Site {
                species,
                frac: frac.map(wrap_frac),
            })
            .collect();
        Ok(CrystalStructure {
            lattice,
            sites,
            energy_per_atom,
        })
    }

    pub fn lattice(&self) -> &Matrix3<f64> {
        &self.lattice
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn volume(&self) -> f64 {
        self.lattice.determinant().abs()
    }

    /// Cartesian position of a fractional coordinate.
    pub fn to_cartesian(&self, frac: &Vector3<f64>) -> Vector3<f64> {
        self.lattice.row(0).transpose() * frac[0]
            + self.lattice.row(1).transpose() * frac[1]
            + self.lattice.row(2).transpose() * frac[2]
    }

    /// Fractional coordinate of a Cartesian position.
    pub fn to_fractional(&self, cart: &Vector3<f64>) -> Result<Vector3<f64>> {
        let basis = self.lattice.transpose();
        let inv = basis
            .try_inverse()
            .ok_or_else(|| Error::DegenerateLattice("lattice matrix is singular".into()))?;
        Ok(inv * cart)
    }

    pub fn species_count(&self, species: &str) -> usize {
        self.sites.iter().filter(|s| s.species == species).count()
    }

    pub fn composition(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for site in &self.sites {
            *counts.entry(site.species.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// All distances from species-A sites in the cell to species-B atoms
    /// (including periodic images) with `0 < d <= cutoff`, sorted ascending.
    /// A site is not its own neighbor, but its images are.
    pub fn enumerate_neighbors(&self, center: &str, neighbor: &str, cutoff: f64) -> Result<Vec<f64>> {
        if !(cutoff > 0.0) {
            return Err(Error::InvalidConfig(format!("cutoff must be > 0, got {cutoff}")));
        }
        let a = self.lattice.row(0).transpose();
        let b = self.lattice.row(1).transpose();
        let c = self.lattice.row(2).transpose();
        let volume = self.volume();
        // Images per direction from the spacing of the bounding lattice planes.
        let reps = |cross_norm: f64| -> i64 { (cutoff * cross_norm / volume).ceil() as i64 };
        let na = reps(b.cross(&c).norm());
        let nb = reps(c.cross(&a).norm());
        let nc = reps(a.cross(&b).norm());

        let mut distances = Vec::new();
        for site_i in self.sites.iter().filter(|s| s.species == center) {
            let origin = self.to_cartesian(&site_i.frac);
            for site_j in self.sites.iter().filter(|s| s.species == neighbor) {
                for ta in -na..=na {
                    for tb in -nb..=nb {
                        for tc in -nc..=nc {
                            let shifted = site_j.frac + Vector3::new(ta as f64, tb as f64, tc as f64);
                            let d = (self.to_cartesian(&shifted) - origin).norm();
                            if d > 1e-10 && d <= cutoff {
                                distances.push(d);
                            }
                        }
                    }
                }
            }
        }
        distances.sort_by(f64::total_cmp);
        Ok(distances)
    }
}
