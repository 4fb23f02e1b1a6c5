//! Mixed hyperparameter spaces and their unit-box encoding.
//!
//! Every dimension, whatever its kind, is represented inside the optimizers
//! by one coordinate in `[0, 1]`. [`SearchSpace::decode`] maps a
//! [`Genotype`] to a named [`Configuration`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A decoded hyperparameter literal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Real(v) => Some(*v),
            Value::Text(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Real(v) if v.fract() == 0.0 => Some(*v as i64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Text(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamKind {
    Continuous {
        lower: f64,
        upper: f64,
        #[serde(default)]
        scale: Scale,
    },
    Integer {
        lower: f64,
        upper: f64,
    },
    Categorical {
        choices: Vec<Value>,
    },
}

/// One named dimension of a search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn continuous(name: &str, lower: f64, upper: f64, scale: Scale) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Continuous {
                lower,
                upper,
                scale,
            },
        }
    }

    pub fn integer(name: &str, lower: i64, upper: i64) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Integer {
                lower: lower as f64,
                upper: upper as f64,
            },
        }
    }

    pub fn categorical(name: &str, choices: Vec<Value>) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Categorical { choices },
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, ParamKind::Continuous { .. })
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ParamKind::Categorical { .. })
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpace(format!("{}: {msg}", self.name)));
        match &self.kind {
            ParamKind::Continuous {
                lower,
                upper,
                scale,
            } => {
                if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
                    return bad(format!("bounds [{lower}, {upper}] must satisfy lower < upper"));
                }
                if *scale == Scale::Log10 && *lower <= 0.0 {
                    return bad("log10 scale requires lower > 0".into());
                }
            }
            ParamKind::Integer { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
                    return bad(format!("bounds [{lower}, {upper}] must satisfy lower < upper"));
                }
                if lower.fract() != 0.0 || upper.fract() != 0.0 {
                    return bad("integer bounds must be whole numbers".into());
                }
            }
            ParamKind::Categorical { choices } => {
                if choices.is_empty() {
                    return bad("categorical choices must be non-empty".into());
                }
                for (i, c) in choices.iter().enumerate() {
                    if choices[..i].contains(c) {
                        return bad(format!("duplicate choice {c}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Maps one normalized coordinate to a literal. `v` must be in `[0, 1]`.
    fn decode_one(&self, v: f64) -> Value {
        match &self.kind {
            ParamKind::Continuous {
                lower,
                upper,
                scale: Scale::Linear,
            } => Value::Real((lower + v * (upper - lower)).clamp(*lower, *upper)),
            ParamKind::Continuous {
                lower,
                upper,
                scale: Scale::Log10,
            } => {
                let (lo, hi) = (lower.log10(), upper.log10());
                Value::Real(10f64.powf(lo + v * (hi - lo)).clamp(*lower, *upper))
            }
            // half-up: floor(x + 0.5)
            ParamKind::Integer { lower, upper } => {
                Value::Int((lower + v * (upper - lower) + 0.5).floor() as i64)
            }
            ParamKind::Categorical { choices } => {
                let idx = ((v * choices.len() as f64).floor() as usize).min(choices.len() - 1);
                choices[idx].clone()
            }
        }
    }

    /// Whether `value` is a legal decoded value for this dimension.
    pub fn contains(&self, value: &Value) -> bool {
        match (&self.kind, value) {
            (ParamKind::Continuous { lower, upper, .. }, Value::Real(x)) => {
                *lower <= *x && *x <= *upper
            }
            (ParamKind::Integer { lower, upper }, Value::Int(x)) => {
                *lower <= *x as f64 && *x as f64 <= *upper
            }
            (ParamKind::Categorical { choices }, v) => choices.contains(v),
            _ => false,
        }
    }
}

/// Ordered list of dimensions. The order defines the genotype layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamSpec>", into = "Vec<ParamSpec>")]
pub struct SearchSpace {
    dims: Vec<ParamSpec>,
}

impl TryFrom<Vec<ParamSpec>> for SearchSpace {
    type Error = Error;

    fn try_from(dims: Vec<ParamSpec>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<SearchSpace> for Vec<ParamSpec> {
    fn from(space: SearchSpace) -> Self {
        space.dims
    }
}

impl SearchSpace {
    pub fn new(dims: Vec<ParamSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &dims {
            if !seen.insert(d.name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate dimension {}", d.name)));
            }
            d.validate()?;
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[ParamSpec] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    /// Uniform sample from the unit box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Genotype {
        Genotype((0..self.dims.len()).map(|_| rng.random::<f64>()).collect())
    }

    pub fn decode(&self, g: &Genotype) -> Result<Configuration> {
        if g.len() != self.dims.len() {
            return Err(Error::EncodingViolation(format!(
                "genotype has {} entries, space has {} dims",
                g.len(),
                self.dims.len()
            )));
        }
        let mut assignments = BTreeMap::new();
        for (i, (dim, &v)) in self.dims.iter().zip(g.values()).enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::EncodingViolation(format!(
                    "entry {i} ({}) = {v} outside [0, 1]",
                    dim.name
                )));
            }
            assignments.insert(dim.name.clone(), dim.decode_one(v));
        }
        Ok(Configuration { assignments })
    }

    /// Sub-space holding the dims selected by `keep`, in original order.
    pub fn project(&self, keep: impl Fn(&ParamSpec) -> bool) -> SearchSpace {
        SearchSpace {
            dims: self.dims.iter().filter(|d| keep(d)).cloned().collect(),
        }
    }
}

/// The six-dimensional space searched by default.
pub fn default_anxiety_space() -> SearchSpace {
    SearchSpace::new(vec![
        ParamSpec::continuous("learning_rate", 1e-5, 1e-2, Scale::Log10),
        ParamSpec::categorical("batch_size", vec![Value::Int(16), Value::Int(32), Value::Int(64)]),
        ParamSpec::continuous("dropout", 0.2, 0.6, Scale::Linear),
        ParamSpec::categorical(
            "hidden_units",
            vec![Value::Int(64), Value::Int(128), Value::Int(256), Value::Int(512)],
        ),
        ParamSpec::integer("num_layers", 1, 3),
        ParamSpec::categorical("attention_heads", vec![Value::Int(2), Value::Int(4), Value::Int(8)]),
    ])
    .expect("default space is valid")
}

/// A point of the unit box, one coordinate per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genotype(pub Vec<f64>);

impl Genotype {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entrywise clip into `[0, 1]`. NaN entries become 0.
    pub fn clipped(mut self) -> Self {
        for v in &mut self.0 {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        self
    }
}

/// Named decoded assignment. Keys are kept sorted so serialization and
/// hashing are canonical.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    pub assignments: BTreeMap<String, Value>,
}

impl Configuration {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.assignments.get(name)
    }

    pub fn get_f64(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(Value::as_f64)
    }

    pub fn get_i64(&self, name: &str) -> Option<i64> {
        self.get(name).and_then(Value::as_i64)
    }

    pub fn insert(&mut self, name: &str, value: Value) {
        self.assignments.insert(name.to_string(), value);
    }

    /// Extends `self` with every entry of `other`, overwriting on conflict.
    pub fn merged(mut self, other: &Configuration) -> Configuration {
        for (k, v) in &other.assignments {
            self.assignments.insert(k.clone(), v.clone());
        }
        self
    }

    /// Canonical JSON used for hashing and logs.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .assignments
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        write!(f, "{}", parts.join(", "))
    }
}
