//! Two-level feature taxonomy and the category combinations searched by
//! taxonomy-based selection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyLeaf {
    pub name: String,
    /// Short form used in combination labels, e.g. `C` or `Ac`.
    pub abbreviation: String,
    pub parent: String,
    /// Feature columns whose name starts with this prefix belong to the leaf.
    pub prefix: String,
}

impl TaxonomyLeaf {
    pub fn new(name: &str, abbreviation: &str, parent: &str, prefix: &str) -> Self {
        Self {
            name: name.into(),
            abbreviation: abbreviation.into(),
            parent: parent.into(),
            prefix: prefix.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    #[serde(rename = "leaf")]
    leaves: Vec<TaxonomyLeaf>,
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Taxonomy {
    /// geometric → {curvature, indentation}, kinematic → {speed, acceleration}.
    pub fn builtin() -> Self {
        Self {
            leaves: vec![
                TaxonomyLeaf::new("curvature", "C", "geometric", "dg_"),
                TaxonomyLeaf::new("indentation", "I", "geometric", "ang_"),
                TaxonomyLeaf::new("speed", "S", "kinematic", "spd_"),
                TaxonomyLeaf::new("acceleration", "Ac", "kinematic", "acc_"),
            ],
        }
    }

    pub fn new(leaves: Vec<TaxonomyLeaf>) -> Result<Self> {
        if leaves.is_empty() {
            return Err(Error::Config("taxonomy has no leaves".into()));
        }
        let mut names = BTreeSet::new();
        let mut abbrevs = BTreeSet::new();
        for leaf in &leaves {
            if leaf.name.is_empty() || leaf.abbreviation.is_empty() || leaf.prefix.is_empty() {
                return Err(Error::Config(format!("taxonomy leaf {leaf:?} has an empty field")));
            }
            if leaf.abbreviation.contains('+') {
                return Err(Error::Config(format!("abbreviation `{}` contains `+`", leaf.abbreviation)));
            }
            if !names.insert(&leaf.name) {
                return Err(Error::Config(format!("duplicate taxonomy leaf `{}`", leaf.name)));
            }
            if !abbrevs.insert(&leaf.abbreviation) {
                return Err(Error::Config(format!("duplicate abbreviation `{}`", leaf.abbreviation)));
            }
        }
        Ok(Self { leaves })
    }

    /// Parses a TOML document with one `[[leaf]]` table per leaf.
    pub fn from_toml_str(doc: &str) -> Result<Self> {
        let raw: Taxonomy = toml::from_str(doc).map_err(|e| Error::Config(format!("taxonomy: {e}")))?;
        Self::new(raw.leaves)
    }

    pub fn leaves(&self) -> &[TaxonomyLeaf] {
        &self.leaves
    }

    pub fn leaf(&self, name: &str) -> Option<&TaxonomyLeaf> {
        self.leaves.iter().find(|l| l.name == name)
    }

    /// Leaf owning a column name; the longest matching prefix wins.
    pub fn leaf_for_column(&self, column: &str) -> Option<&TaxonomyLeaf> {
        self.leaves
            .iter()
            .filter(|l| column.starts_with(&l.prefix))
            .max_by_key(|l| l.prefix.len())
    }

    /// Rewrites every column's leaf tag from the prefix rules.
    /// Tags by prefix; columns without a matching prefix keep an existing tag
    /// only if it names a leaf of this taxonomy.
    pub fn tag_columns(&self, matrix: &mut FeatureMatrix) {
        for col in matrix.columns_mut() {
            col.leaf = match self.leaf_for_column(&col.name) {
                Some(l) => Some(l.name.clone()),
                None => col.leaf.take().filter(|name| self.leaves.iter().any(|l| &l.name == name)),
            };
        }
    }

    pub fn combinations(&self) -> Vec<CategoryCombination> {
        enumerate_combinations(&self.leaves).expect("taxonomy is non-empty")
    }

    /// Label such as `C+S` for a set of leaf names, in taxonomy order.
    pub fn label_for(&self, leaf_names: &[String]) -> String {
        self.leaves
            .iter()
            .filter(|l| leaf_names.contains(&l.name))
            .map(|l| l.abbreviation.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Looks up a combination by its label.
    pub fn combination_by_label(&self, label: &str) -> Option<CategoryCombination> {
        self.combinations().into_iter().find(|c| c.label == label)
    }
}

/// A non-empty union of taxonomy leaves.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CategoryCombination {
    /// Member leaf names in taxonomy order.
    pub leaves: Vec<String>,
    pub label: String,
    /// Position in the enumeration order.
    pub rank: usize,
}

impl CategoryCombination {
    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn contains(&self, leaf: &str) -> bool {
        self.leaves.iter().any(|l| l == leaf)
    }
}

/// Every non-empty subset of `leaves` (`2^n - 1` of them), ordered by size
/// and then by the lexically sorted member names.
pub fn enumerate_combinations(leaves: &[TaxonomyLeaf]) -> Result<Vec<CategoryCombination>> {
    let n = leaves.len();
    if n == 0 {
        return Err(Error::Config("cannot enumerate combinations of zero leaves".into()));
    }
    if n >= usize::BITS as usize {
        return Err(Error::Config(format!("{n} leaves is too many to enumerate")));
    }
    let mut subsets: Vec<(usize, Vec<&str>, u64)> = (1u64..(1u64 << n))
        .map(|mask| {
            let mut names: Vec<&str> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| leaves[i].name.as_str())
                .collect();
            names.sort_unstable();
            (names.len(), names, mask)
        })
        .collect();
    subsets.sort();
    Ok(subsets
        .into_iter()
        .enumerate()
        .map(|(rank, (_, _, mask))| {
            let members: Vec<&TaxonomyLeaf> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &leaves[i]).collect();
            CategoryCombination {
                leaves: members.iter().map(|l| l.name.clone()).collect(),
                label: members.iter().map(|l| l.abbreviation.as_str()).collect::<Vec<_>>().join("+"),
                rank,
            }
        })
        .collect())
}

/// Indices of the matrix columns tagged with any leaf of `combo`, in matrix order.
pub fn columns_for(combo: &CategoryCombination, matrix: &FeatureMatrix) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, col) in matrix.columns().iter().enumerate() {
        let leaf = col
            .leaf
            .as_deref()
            .ok_or_else(|| Error::Config(format!("column `{}` has no taxonomy leaf", col.name)))?;
        if combo.contains(leaf) {
            out.push(i);
        }
    }
    Ok(out)
}
