//! Extended-XYZ reader/writer.
//!
//! Per frame: an atom-count line, a comment line carrying
//! `lattice="ax ay az bx by bz cx cy cz"` and an optional
//! `energy=<eV/atom>` key, then one `species x y z` line per site with
//! Cartesian coordinates in angstrom.

use nalgebra::{Matrix3, RowVector3, Vector3};
use std::io::Write;

use crate::error::{Error, Result};
use crate::rdf::structure::CrystalStructure;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Splits a comment line into key=value pairs; values may be double-quoted.
fn parse_key_values(line: &str) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        let key_start = i;
        while i < chars.len() && chars[i] != '=' && !chars[i].is_whitespace() {
            i += 1;
        }
        if i >= chars.len() || chars[i] != '=' {
            continue;
        }
        let key: String = chars[key_start..i].iter().collect();
        i += 1;
        let value: String = if i < chars.len() && chars[i] == '"' {
            i += 1;
            let start = i;
            while i < chars.len() && chars[i] != '"' {
                i += 1;
            }
            let v = chars[start..i].iter().collect();
            i += 1;
            v
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() {
                i += 1;
            }
            chars[start..i].iter().collect()
        };
        pairs.push((key, value));
    }
    pairs
}

/// Parses every frame in the input text.
pub fn parse_extxyz(text: &str) -> Result<Vec<CrystalStructure>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut structures = Vec::new();
    let mut idx = 0;

    while idx < lines.len() {
        if lines[idx].trim().is_empty() {
            idx += 1;
            continue;
        }
        let count_line = idx + 1;
        let natoms: usize = lines[idx]
            .trim()
            .parse()
            .map_err(|_| parse_err(count_line, format!("expected atom count, got '{}'", lines[idx].trim())))?;
        idx += 1;
        if idx >= lines.len() {
            return Err(parse_err(count_line, "missing comment line after atom count"));
        }

        let comment_line = idx + 1;
        let mut lattice: Option<Matrix3<f64>> = None;
        let mut energy: Option<f64> = None;
        for (key, value) in parse_key_values(lines[idx]) {
            match key.to_ascii_lowercase().as_str() {
                "lattice" => {
                    let nums: Vec<f64> = value
                        .split_whitespace()
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| parse_err(comment_line, format!("malformed lattice value '{value}'")))?;
                    if nums.len() != 9 {
                        return Err(parse_err(
                            comment_line,
                            format!("lattice needs 9 numbers, got {}", nums.len()),
                        ));
                    }
                    lattice = Some(Matrix3::from_rows(&[
                        RowVector3::new(nums[0], nums[1], nums[2]),
                        RowVector3::new(nums[3], nums[4], nums[5]),
                        RowVector3::new(nums[6], nums[7], nums[8]),
                    ]));
                }
                "energy" => {
                    energy = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| parse_err(comment_line, format!("malformed energy value '{value}'")))?,
                    );
                }
                _ => {}
            }
        }
        let lattice = lattice.ok_or_else(|| parse_err(comment_line, "missing lattice=\"...\" entry"))?;
        idx += 1;

        let mut sites = Vec::with_capacity(natoms);
        for n in 0..natoms {
            let site_line = idx + 1;
            if idx >= lines.len() {
                return Err(parse_err(site_line, format!("expected {natoms} site lines, found {n}")));
            }
            let tokens: Vec<&str> = lines[idx].split_whitespace().collect();
            if tokens.len() < 4 {
                return Err(parse_err(site_line, "expected 'species x y z'"));
            }
            let coords: Vec<f64> = tokens[1..4]
                .iter()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(site_line, format!("malformed coordinate in '{}'", lines[idx])))?;
            sites.push((tokens[0].to_string(), Vector3::new(coords[0], coords[1], coords[2])));
            idx += 1;
        }

        // Sites arrive Cartesian; store fractional.
        let probe = CrystalStructure::new(lattice, vec![], energy)
            .map_err(|e| parse_err(comment_line, e.to_string()))?;
        let frac_sites = sites
            .into_iter()
            .map(|(species, cart)| {
                probe
                    .to_fractional(&cart)
                    .map(|f| (species, f))
                    .map_err(|e| parse_err(comment_line, e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        structures.push(
            CrystalStructure::new(lattice, frac_sites, energy)
                .map_err(|e| parse_err(comment_line, e.to_string()))?,
        );
    }

    Ok(structures)
}

/// Writes frames in the same format `parse_extxyz` reads.
pub fn write_extxyz<W: Write>(structures: &[CrystalStructure], mut writer: W) -> Result<()> {
    for s in structures {
        writeln!(writer, "{}", s.sites().len())?;
        let l = s.lattice();
        let lattice_str = (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| format!("{}", l[(r, c)]))
            .collect::<Vec<_>>()
            .join(" ");
        match s.energy_per_atom {
            Some(e) => writeln!(writer, "lattice=\"{lattice_str}\" energy={e}")?,
            None => writeln!(writer, "lattice=\"{lattice_str}\"")?,
        }
        for site in s.sites() {
            let cart = s.to_cartesian(&site.frac);
            writeln!(writer, "{} {} {} {}", site.species, cart[0], cart[1], cart[2])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "2\n\
        lattice=\"4 0 0 0 4 0 0 0 4\" energy=-2.5\n\
        Li 0.0 0.0 0.0\n\
        Ge 2.0 0.0 0.0\n";

    #[test]
    fn parses_a_frame() {
        let structures = parse_extxyz(SAMPLE).unwrap();
        assert_eq!(structures.len(), 1);
        let s = &structures[0];
        assert_eq!(s.sites().len(), 2);
        assert_eq!(s.energy_per_atom, Some(-2.5));
        assert!((s.sites()[1].frac[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn roundtrips_through_writer() {
        let structures = parse_extxyz(SAMPLE).unwrap();
        let mut buf = Vec::new();
        write_extxyz(&structures, &mut buf).unwrap();
        let again = parse_extxyz(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(again.len(), 1);
        assert!((again[0].sites()[1].frac[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reports_line_of_malformed_lattice() {
        let bad = "1\nlattice=\"4 0 0 0 4 0 0 0\"\nLi 0 0 0\n";
        let err = parse_extxyz(bad).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn reports_line_of_bad_atom_count() {
        let err = parse_extxyz("notanumber\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn accepts_capitalized_lattice_key() {
        let text = "1\nLattice=\"4 0 0 0 4 0 0 0 4\"\nLi 0 0 0\n";
        assert_eq!(parse_extxyz(text).unwrap().len(), 1);
    }
}
