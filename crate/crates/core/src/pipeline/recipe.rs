use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::descriptor::{Aggregation, FeatureDescriptor};
use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::voxelize::MAX_LEVEL;

/// Default cap on raw-column resolution (dense columns grow as `N³`).
pub const MAX_RAW_RESOLUTION: u32 = 16;
/// Default cap on percentile-column resolution.
pub const MAX_PERCENTILE_RESOLUTION: u32 = 128;
/// Percentiles of the standard recipe.
pub const STANDARD_PERCENTILES: [u8; 5] = [0, 25, 50, 75, 100];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecipeEntry {
    pub resolution: u32,
    pub kind: FeatureKind,
    pub aggregation: Aggregation,
}

impl fmt::Display for RecipeEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.aggregation {
            Aggregation::Raw => write!(f, "{}@{}:raw", self.kind, self.resolution),
            Aggregation::Percentile(p) => write!(f, "{}@{}:hist{}", self.kind, self.resolution, p),
        }
    }
}

/// Which features to extract, plus the rotation augmentation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecipe {
    entries: Vec<RecipeEntry>,
    pub rotations: usize,
    pub seed: u64,
    pub include_reflections: bool,
    /// Normalization margin inside the unit cube.
    pub margin: f64,
    pub max_raw_resolution: u32,
    pub max_percentile_resolution: u32,
}

impl FeatureRecipe {
    pub fn new(entries: impl IntoIterator<Item = RecipeEntry>) -> Result<Self> {
        let mut recipe = Self {
            entries: Vec::new(),
            rotations: 1,
            seed: 0,
            include_reflections: false,
            margin: 0.0,
            max_raw_resolution: MAX_RAW_RESOLUTION,
            max_percentile_resolution: MAX_PERCENTILE_RESOLUTION,
        };
        recipe.set_entries(entries)?;
        Ok(recipe)
    }

    /// Raw non-Bool features at resolutions 1, 2, 4 and the 0/25/50/75/100
    /// percentiles of every non-Bool feature at resolutions 2 to 128, with
    /// 20 rotations.
    pub fn standard() -> Self {
        let kinds = non_bool_kinds();
        let mut entries = Vec::new();
        for &kind in &kinds {
            for resolution in [1, 2, 4] {
                entries.push(RecipeEntry {
                    resolution,
                    kind,
                    aggregation: Aggregation::Raw,
                });
            }
            for level in 1..=7 {
                for p in STANDARD_PERCENTILES {
                    entries.push(RecipeEntry {
                        resolution: 1 << level,
                        kind,
                        aggregation: Aggregation::Percentile(p),
                    });
                }
            }
        }
        let mut recipe = Self::new(entries).expect("standard recipe is valid");
        recipe.rotations = 20;
        recipe
    }

    /// Parses the recipe DSL: comma-separated `KINDS@RESOLUTIONS:AGGREGATIONS`
    /// items where each part may be a `+`-joined list, `*` stands for every
    /// non-Bool kind and an aggregation is `raw` or `histP`. The single word
    /// `standard` expands to [`FeatureRecipe::standard`]'s entries.
    pub fn parse(dsl: &str) -> Result<Self> {
        let dsl = dsl.trim();
        if dsl.eq_ignore_ascii_case("standard") {
            return Ok(Self::standard());
        }
        let mut entries = Vec::new();
        for item in dsl.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let bad = |why: &str| Error::Recipe(format!("{item:?}: {why}"));
            let (kinds, rest) = item.split_once('@').ok_or_else(|| bad("expected KIND@RES:AGG"))?;
            let (resolutions, aggregations) = rest.split_once(':').ok_or_else(|| bad("expected KIND@RES:AGG"))?;
            let kinds: Vec<FeatureKind> = if kinds.trim() == "*" {
                non_bool_kinds()
            } else {
                kinds.split('+').map(|k| k.trim().parse()).collect::<Result<_>>()?
            };
            let resolutions: Vec<u32> = resolutions
                .split('+')
                .map(|r| r.trim().parse().map_err(|_| bad("resolution must be an integer")))
                .collect::<Result<_>>()?;
            let aggregations: Vec<Aggregation> = aggregations
                .split('+')
                .map(|a| parse_aggregation(a.trim()).ok_or_else(|| bad("aggregation must be raw or histP")))
                .collect::<Result<_>>()?;
            for &kind in &kinds {
                for &resolution in &resolutions {
                    for &aggregation in &aggregations {
                        entries.push(RecipeEntry {
                            resolution,
                            kind,
                            aggregation,
                        });
                    }
                }
            }
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[RecipeEntry] {
        &self.entries
    }

    pub fn set_entries(&mut self, entries: impl IntoIterator<Item = RecipeEntry>) -> Result<()> {
        let set: BTreeSet<RecipeEntry> = entries.into_iter().collect();
        for e in &set {
            self.validate(e)?;
        }
        self.entries = set.into_iter().collect();
        Ok(())
    }

    fn validate(&self, e: &RecipeEntry) -> Result<()> {
        if !e.resolution.is_power_of_two() || e.resolution.trailing_zeros() > MAX_LEVEL {
            return Err(Error::Recipe(format!(
                "{e}: resolution must be a power of two up to 4096"
            )));
        }
        match e.aggregation {
            Aggregation::Raw if e.resolution > self.max_raw_resolution => Err(Error::Recipe(format!(
                "{e}: raw resolution above {}",
                self.max_raw_resolution
            ))),
            Aggregation::Percentile(p) if p > 100 => Err(Error::Recipe(format!("{e}: percentile above 100"))),
            Aggregation::Percentile(_) if e.resolution > self.max_percentile_resolution => Err(Error::Recipe(format!(
                "{e}: percentile resolution above {}",
                self.max_percentile_resolution
            ))),
            _ => Ok(()),
        }
    }

    /// Canonical DSL form: one item per entry in canonical order.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
    }

    /// Every column the recipe produces, in canonical order.
    pub fn columns(&self) -> Vec<FeatureDescriptor> {
        let mut set = BTreeSet::new();
        for e in &self.entries {
            let dim = e.kind.dimension();
            match e.aggregation {
                Aggregation::Raw => {
                    let n = e.resolution;
                    for c in 0..dim {
                        for i in 0..n {
                            for j in 0..n {
                                for k in 0..n {
                                    set.insert(FeatureDescriptor::raw(n, e.kind, c, [i, j, k]));
                                }
                            }
                        }
                    }
                }
                Aggregation::Percentile(p) => {
                    for c in 0..dim {
                        set.insert(FeatureDescriptor::percentile(e.resolution, e.kind, p, c));
                    }
                }
            }
        }
        set.into_iter().collect()
    }

    pub fn kinds(&self) -> Vec<FeatureKind> {
        let set: BTreeSet<FeatureKind> = self.entries.iter().map(|e| e.kind).collect();
        set.into_iter().collect()
    }

    pub fn to_config(&self) -> RecipeConfig {
        RecipeConfig {
            recipe: self.canonical(),
            rotations: self.rotations,
            seed: self.seed,
            include_reflections: self.include_reflections,
            margin: self.margin,
        }
    }

    pub fn from_config(config: &RecipeConfig) -> Result<Self> {
        let mut recipe = Self::parse(&config.recipe)?;
        recipe.rotations = config.rotations;
        recipe.seed = config.seed;
        recipe.include_reflections = config.include_reflections;
        recipe.margin = config.margin;
        if recipe.rotations == 0 {
            return Err(Error::Recipe("rotation count must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&recipe.margin) {
            return Err(Error::Recipe("margin must lie in [0, 0.5)".into()));
        }
        Ok(recipe)
    }

    /// Reads a JSON [`RecipeConfig`] file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let config: RecipeConfig = serde_json::from_str(&text)?;
        Self::from_config(&config)
    }
}

/// File form of a recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeConfig {
    pub recipe: String,
    #[serde(default = "default_rotations")]
    pub rotations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub include_reflections: bool,
    #[serde(default)]
    pub margin: f64,
}

fn default_rotations() -> usize {
    1
}

fn non_bool_kinds() -> Vec<FeatureKind> {
    FeatureKind::ALL
        .into_iter()
        .filter(|&k| k != FeatureKind::Bool)
        .collect()
}

fn parse_aggregation(s: &str) -> Option<Aggregation> {
    if s.eq_ignore_ascii_case("raw") {
        return Some(Aggregation::Raw);
    }
    let p: u8 = s.strip_prefix("hist")?.parse().ok()?;
    (p <= 100).then_some(Aggregation::Percentile(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dsl_round_trips_to_canonical_form() {
        let r = FeatureRecipe::parse("VAD@32:hist25, EV@1:raw").unwrap();
        assert_eq!(r.canonical(), "EV@1:raw,VAD@32:hist25");
        let again = FeatureRecipe::parse(&r.canonical()).unwrap();
        assert_eq!(again.entries(), r.entries());
    }

    #[test]
    fn dsl_lists_expand() {
        let r = FeatureRecipe::parse("SA+EV@1+2:raw+hist50").unwrap();
        assert_eq!(r.entries().len(), 8);
        let star = FeatureRecipe::parse("*@1:raw").unwrap();
        assert_eq!(star.kinds().len(), 7);
    }

    #[test]
    fn dsl_errors() {
        assert!(FeatureRecipe::parse("EV@3:raw").is_err());
        assert!(FeatureRecipe::parse("EV@32:raw").is_err());
        assert!(FeatureRecipe::parse("EV@256:hist50").is_err());
        assert!(FeatureRecipe::parse("EV@2:hist101").is_err());
        assert!(FeatureRecipe::parse("EV@2:mean").is_err());
        assert!(FeatureRecipe::parse("EV-2").is_err());
        let err = FeatureRecipe::parse("XY@2:raw").unwrap_err().to_string();
        assert!(err.contains("EAD"), "{err}");
    }

    #[test]
    fn empty_recipe_has_no_columns() {
        let r = FeatureRecipe::parse("").unwrap();
        assert!(r.columns().is_empty());
    }

    #[test]
    fn raw_column_count() {
        let r = FeatureRecipe::parse("QF@4:raw").unwrap();
        assert_eq!(r.columns().len(), 6 * 64);
        let ev = FeatureRecipe::parse("EV@1:raw").unwrap();
        assert_eq!(ev.columns()[0].to_string(), "[1][EV][0]");
    }

    #[test]
    fn standard_recipe_shape() {
        let r = FeatureRecipe::standard();
        // 16 scalar components over raw 1+8+64 voxels, plus 16 × 5 × 7 percentiles.
        assert_eq!(r.columns().len(), 16 * 73 + 16 * 35);
        assert_eq!(r.rotations, 20);
        assert!(r.kinds().iter().all(|&k| k != FeatureKind::Bool));
        assert_eq!(FeatureRecipe::parse("standard").unwrap(), r);
    }

    #[test]
    fn config_round_trip() {
        let mut r = FeatureRecipe::parse("EV@1:raw,SA@8:hist50").unwrap();
        r.rotations = 4;
        r.seed = 9;
        let json = serde_json::to_string(&r.to_config()).unwrap();
        let back = FeatureRecipe::from_config(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
