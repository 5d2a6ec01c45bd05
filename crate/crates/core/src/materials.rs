//! Tissue conductivities and per-element assignment.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::mesh::Mesh;
use crate::scalar::Real;

/// Isotropic tissue conductivities in S/m.
const TISSUES: [(&str, &str); 16] = [
    ("Electrodes", "0.3"),
    ("Inner tissue", "0.465"),
    ("Skin", "0.465"),
    ("Blood", "0.7"),
    ("Vessel", "0.25"),
    ("Organs", "0.465"),
    ("Muscle", "0.2"),
    ("Membranes", "0.5"),
    ("CSF", "2.0"),
    ("Ligaments", "0.25"),
    ("Eye", "1.5"),
    ("Cartilage", "0.15"),
    ("Skeleton", "0.02"),
    ("Brain and spinal cord", "0.04"),
    ("Inner Nose", "0.25"),
    ("Nerves", "0.006"),
];

#[derive(Debug, Error, PartialEq)]
pub enum MaterialError {
    #[error("region {0:?} has no conductivity (not in the table or overrides)")]
    Unmapped(String),
    #[error("conductivity of {name:?} must be positive, got {sigma}")]
    NonPositive { name: String, sigma: f64 },
    #[error("duplicate tissue name {0:?}")]
    Duplicate(String),
    #[error("conductivity field has {got} values for {expected} elements")]
    Length { expected: usize, got: usize },
}

/// Lower-cases and collapses internal whitespace.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialTable<T> {
    /// Keyed by normalized name; value holds the display name.
    entries: BTreeMap<String, (String, T)>,
}

impl<T: Real> MaterialTable<T> {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// The 16 default tissue classes.
    pub fn default_table() -> Self {
        let mut t = Self::empty();
        for (name, sigma) in TISSUES {
            t.insert(name, T::of(sigma.parse().expect("literal")))
                .expect("defaults are valid");
        }
        t
    }

    pub fn insert(&mut self, name: &str, sigma: T) -> Result<(), MaterialError> {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(MaterialError::NonPositive {
                name: name.to_string(),
                sigma: sigma.as_f64(),
            });
        }
        let key = normalize_name(name);
        if self.entries.contains_key(&key) {
            return Err(MaterialError::Duplicate(name.to_string()));
        }
        self.entries.insert(key, (name.trim().to_string(), sigma));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<T> {
        self.entries.get(&normalize_name(name)).map(|e| e.1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(display name, σ)` pairs in normalized-name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, T)> {
        self.entries.values().map(|(n, s)| (n.as_str(), *s))
    }
}

/// Decimal strings of the default table, in table order.
pub fn default_table_literals() -> &'static [(&'static str, &'static str)] {
    &TISSUES
}

/// Element-aligned conductivities (S/m).
#[derive(Clone, Debug, PartialEq)]
pub struct ConductivityField<T> {
    sigma: Vec<T>,
}

impl<T: Real> ConductivityField<T> {
    pub fn from_values(sigma: Vec<T>, elements: usize) -> Result<Self, MaterialError> {
        if sigma.len() != elements {
            return Err(MaterialError::Length {
                expected: elements,
                got: sigma.len(),
            });
        }
        if let Some((k, &s)) = sigma.iter().enumerate().find(|(_, &s)| !(s > T::zero())) {
            return Err(MaterialError::NonPositive {
                name: format!("element #{k}"),
                sigma: s.as_f64(),
            });
        }
        Ok(Self { sigma })
    }

    pub fn values(&self) -> &[T] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Every value multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            sigma: self.sigma.iter().map(|&s| s * factor).collect(),
        }
    }
}

/// Resolves each element's region name through `overrides`, then `table`.
pub fn assign<T: Real>(
    m: &Mesh<T>,
    table: &MaterialTable<T>,
    overrides: &BTreeMap<String, T>,
) -> Result<ConductivityField<T>, MaterialError> {
    let mut shadow: BTreeMap<String, T> = BTreeMap::new();
    for (name, &sigma) in overrides {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(MaterialError::NonPositive {
                name: name.clone(),
                sigma: sigma.as_f64(),
            });
        }
        shadow.insert(normalize_name(name), sigma);
    }

    let mut per_region: BTreeMap<u32, T> = BTreeMap::new();
    for (&id, name) in m.region_names() {
        let sigma = shadow
            .get(&normalize_name(name))
            .copied()
            .or_else(|| table.get(name));
        if let Some(s) = sigma {
            per_region.insert(id, s);
        }
    }

    let sigma = m
        .elements()
        .iter()
        .map(|e| {
            per_region.get(&e.region).copied().ok_or_else(|| {
                MaterialError::Unmapped(
                    m.region_name(e.region)
                        .map(str::to_string)
                        .unwrap_or_else(|| e.region.to_string()),
                )
            })
        })
        .collect::<Result<Vec<T>, _>>()?;
    Ok(ConductivityField { sigma })
}
