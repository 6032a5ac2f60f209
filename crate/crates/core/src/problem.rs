//! Problem files: a JSON document naming the prime, the ambient group, the
//! level and the generators of `G(n0)`.

use serde::{Deserialize, Serialize};

use crate::cartan::{AmbientGroup, AmbientKind, CartanParams};
use crate::error::{Error, Result};
use crate::modarith::{MatMod, Prime};
use crate::subgroup::{Budget, SubgroupSpec};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AmbientSpec {
    Gl2,
    Cartan {
        #[serde(default)]
        c: i64,
        d: i64,
    },
    Normalizer {
        #[serde(default)]
        c: i64,
        d: i64,
    },
}

/// A matrix written either as rows `[[a, b], [c, d]]` or row-major `[a, b, c, d]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixInput {
    Flat([i64; 4]),
    Rows([[i64; 2]; 2]),
}

impl MatrixInput {
    fn entries(&self) -> [i64; 4] {
        match self {
            MatrixInput::Flat(e) => *e,
            MatrixInput::Rows(r) => [r[0][0], r[0][1], r[1][0], r[1][1]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub ell: u64,
    pub ambient: AmbientSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<MatrixInput>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn prime(&self) -> Result<Prime> {
        Prime::new(self.ell).map_err(|e| Error::Spec(e.to_string()))
    }

    /// The ambient group; Cartan parameters must already be in normal form.
    pub fn ambient_group(&self) -> Result<AmbientGroup> {
        let ell = self.prime()?;
        Ok(match self.ambient {
            AmbientSpec::Gl2 => AmbientGroup::gl2(ell),
            AmbientSpec::Cartan { c, d } => AmbientGroup::cartan(CartanParams::new(c, d, ell)?, ell),
            AmbientSpec::Normalizer { c, d } => AmbientGroup::normalizer(CartanParams::new(c, d, ell)?, ell),
        })
    }

    pub fn budget(&self) -> Budget {
        self.budget.map(Budget::new).unwrap_or_default()
    }

    /// Validated subgroup; generators are reduced mod `l^level`, and a
    /// missing level defaults to the smallest one the ambient allows.
    pub fn subgroup_spec(&self) -> Result<SubgroupSpec> {
        let amb = self.ambient_group()?;
        let level = self
            .level
            .unwrap_or(if amb.is_normalizer() { amb.min_prec() } else { 1 });
        if level == 0 {
            return Err(Error::Spec("level must be positive".into()));
        }
        let ell = amb.ell();
        let gens = self
            .generators
            .iter()
            .flatten()
            .map(|g| MatMod::new(ell, level, g.entries()).map_err(|e| Error::Spec(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        SubgroupSpec::new(amb, level, gens)
    }

    /// Canonical form of a validated subgroup: explicit level, reduced
    /// row-major generators.
    pub fn canonical(spec: &SubgroupSpec, budget: Option<u64>) -> Self {
        let amb = spec.ambient();
        let ambient = match amb.kind() {
            AmbientKind::Gl2 => AmbientSpec::Gl2,
            AmbientKind::Cartan(p) => AmbientSpec::Cartan { c: p.c(), d: p.d() },
            AmbientKind::Normalizer(p) => AmbientSpec::Normalizer { c: p.c(), d: p.d() },
        };
        let generators = spec
            .generators()
            .iter()
            .map(|g| MatrixInput::Flat(g.entries().map(|x| x as i64)))
            .collect();
        ProblemSpec {
            ell: amb.ell().get(),
            ambient,
            level: Some(spec.level()),
            generators: Some(generators),
            budget,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem specs always serialize")
    }
}
