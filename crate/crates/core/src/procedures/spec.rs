//! Wire form of procedures and the per-method parameter schemas used to
//! validate it.

use schemars::JsonSchema;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{DqiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Impute,
    Outlier,
    Delete,
    Standardize,
    Dedup,
    FeatureSelect,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Impute => "impute",
            Family::Outlier => "outlier",
            Family::Delete => "delete",
            Family::Standardize => "standardize",
            Family::Dedup => "dedup",
            Family::FeatureSelect => "feature_select",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Columns a procedure applies to: `"all"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Target {
    #[default]
    All,
    Columns(Vec<String>),
}

impl JsonSchema for Target {
    fn schema_name() -> std::borrow::Cow<'static, str> {
        "Target".into()
    }

    fn json_schema(_: &mut schemars::SchemaGenerator) -> schemars::Schema {
        schemars::json_schema!({
            "oneOf": [
                { "type": "string" },
                { "type": "array", "items": { "type": "string" } }
            ]
        })
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Target::All => s.serialize_str("all"),
            Target::Columns(c) => c.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            List(Vec<String>),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "all" => Ok(Target::All),
            Raw::Word(w) => Ok(Target::Columns(vec![w])),
            Raw::List(l) => Ok(Target::Columns(l)),
        }
    }
}

/// A parameterized procedure as it travels over the API and in scripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProcedureSpec {
    pub family: Family,
    pub method: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default)]
    pub target: Target,
}

impl ProcedureSpec {
    pub fn new(family: Family, method: &str) -> Self {
        ProcedureSpec {
            family,
            method: method.to_string(),
            params: Map::new(),
            target: Target::All,
        }
    }

    pub fn on(mut self, columns: &[&str]) -> Self {
        self.target = Target::Columns(columns.iter().map(|c| c.to_string()).collect());
        self
    }

    pub fn param(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.params.insert(name.to_string(), value.into());
        self
    }

    /// Compact JSON used as the final ranking tie-break and in scripts.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Number,
    Integer,
    String,
    Char,
    Any,
    StringList,
    IntegerList,
    StringMap,
    Choice,
}

#[derive(Debug, Clone, Serialize, JsonSchema)]
pub struct ParamSchema {
    pub name: &'static str,
    pub kind: ParamKind,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
    #[serde(default, skip_serializing_if = "<[_]>::is_empty")]
    pub choices: &'static [&'static str],
    pub description: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Exactly one column.
    Single,
    /// A column list, or `"all"` for every applicable column.
    Columns,
    /// The target is ignored.
    None,
}

#[derive(Debug, Clone, Serialize, JsonSchema)]
pub struct MethodSchema {
    pub family: Family,
    pub method: &'static str,
    pub target: TargetKind,
    pub description: &'static str,
    pub params: Vec<ParamSchema>,
}

fn p(name: &'static str, kind: ParamKind, default: Option<Value>, description: &'static str) -> ParamSchema {
    ParamSchema {
        name,
        kind,
        required: default.is_none(),
        default,
        choices: &[],
        description,
    }
}

fn choice(name: &'static str, choices: &'static [&'static str], default: &str, description: &'static str) -> ParamSchema {
    ParamSchema {
        name,
        kind: ParamKind::Choice,
        required: false,
        default: Some(Value::from(default)),
        choices,
        description,
    }
}

const ACTIONS: &[&str] = &["to_missing", "clip_to_fence", "remove_rows"];

fn action() -> ParamSchema {
    choice("action", ACTIONS, "to_missing", "treatment applied to flagged cells")
}

/// Every method the engine offers, with its parameter schema.
pub fn method_schemas() -> Vec<MethodSchema> {
    use Family::*;
    use ParamKind::*;
    let m = |family, method, target, description, params| MethodSchema {
        family,
        method,
        target,
        description,
        params,
    };
    vec![
        m(Impute, "mean", TargetKind::Columns, "fill numeric gaps with the column mean", vec![]),
        m(Impute, "median", TargetKind::Columns, "fill numeric gaps with the column median", vec![]),
        m(Impute, "mode", TargetKind::Columns, "fill gaps with the most frequent value (first seen wins ties)", vec![]),
        m(Impute, "constant", TargetKind::Columns, "fill gaps with a fixed value", vec![p("value", Any, None, "fill value, converted to the column type")]),
        m(
            Impute,
            "knn",
            TargetKind::Columns,
            "fill with the mean or mode of the k nearest complete rows (z-standardized numeric distance)",
            vec![p("k", Integer, Some(5.into()), "neighbours")],
        ),
        m(
            Impute,
            "linreg",
            TargetKind::Columns,
            "fill with an ordinary least squares prediction",
            vec![p("predictors", StringList, None, "numeric predictor columns")],
        ),
        m(
            Outlier,
            "zscore",
            TargetKind::Single,
            "flag |x - mean| / stddev > t",
            vec![p("t", Number, Some(3.0.into()), "threshold in standard deviations"), action()],
        ),
        m(
            Outlier,
            "iqr",
            TargetKind::Single,
            "flag values beyond q1 - f*IQR or q3 + f*IQR",
            vec![p("f", Number, Some(1.5.into()), "fence multiplier"), action()],
        ),
        m(
            Outlier,
            "lof",
            TargetKind::Single,
            "flag local outlier factor above a threshold",
            vec![
                p("k", Integer, Some(20.into()), "neighbourhood size"),
                p("threshold", Number, Some(1.5.into()), "score threshold"),
                action(),
            ],
        ),
        m(Delete, "rows_with_missing", TargetKind::Columns, "listwise deletion over the target columns", vec![]),
        m(Delete, "rows_by_index", TargetKind::None, "remove the listed rows", vec![p("indices", IntegerList, None, "zero-based row indices")]),
        m(Delete, "column", TargetKind::Single, "drop one column", vec![]),
        m(Standardize, "trim_whitespace", TargetKind::Columns, "strip leading and trailing whitespace", vec![]),
        m(
            Standardize,
            "case_fold",
            TargetKind::Columns,
            "convert text to one case",
            vec![choice("case", &["lower", "upper"], "lower", "target case")],
        ),
        m(
            Standardize,
            "date_to_iso",
            TargetKind::Columns,
            "rewrite dates as ISO 8601; retypes the column when every value converts",
            vec![p("pattern", String, None, "source layout, e.g. DD/MM/YYYY")],
        ),
        m(
            Standardize,
            "numeric_unseparate",
            TargetKind::Columns,
            "parse grouped numbers such as 1,234.5; retypes the column when every value converts",
            vec![
                p("group_char", Char, Some(",".into()), "digit group separator"),
                p("decimal_char", Char, Some(".".into()), "decimal separator"),
            ],
        ),
        m(
            Standardize,
            "map_values",
            TargetKind::Columns,
            "replace values through a dictionary",
            vec![p("dictionary", StringMap, None, "old value to new value")],
        ),
        m(Dedup, "exact", TargetKind::Columns, "drop rows identical on the key columns (all columns by default), keeping the first", vec![]),
        m(
            Dedup,
            "fuzzy",
            TargetKind::Columns,
            "group rows whose mean normalized edit similarity over text keys reaches a threshold",
            vec![p("threshold", Number, None, "similarity threshold in (0, 1]")],
        ),
        m(
            FeatureSelect,
            "variance_threshold",
            TargetKind::Columns,
            "drop numeric features with variance below t",
            vec![p("t", Number, Some(0.0.into()), "minimum variance"), p("label", String, Some(Value::Null), "label column (defaults to the dataset label)")],
        ),
        m(
            FeatureSelect,
            "correlation_filter",
            TargetKind::Columns,
            "from each highly correlated pair drop the member less correlated with the label",
            vec![p("r_max", Number, Some(0.95.into()), "maximum tolerated |r|"), p("label", String, Some(Value::Null), "label column (defaults to the dataset label)")],
        ),
        m(
            FeatureSelect,
            "mutual_info_topk",
            TargetKind::Columns,
            "keep the k features with the highest mutual information with the label",
            vec![
                p("k", Integer, None, "features to keep"),
                p("bins", Integer, Some(10.into()), "equal-frequency bins for numeric features"),
                p("label", String, Some(Value::Null), "label column (defaults to the dataset label)"),
            ],
        ),
    ]
}

pub fn method_schema(family: Family, method: &str) -> Result<MethodSchema> {
    method_schemas()
        .into_iter()
        .find(|m| m.family == family && m.method == method)
        .ok_or_else(|| DqiError::spec(format!("unknown method `{method}` for family {}", family.as_str())))
}

/// Parameters checked against a method schema, with defaults filled in.
#[derive(Debug, Clone)]
pub(crate) struct Params(Map<String, Value>);

impl Params {
    pub(crate) fn validate(schema: &MethodSchema, given: &Map<String, Value>) -> Result<Self> {
        for key in given.keys() {
            if !schema.params.iter().any(|p| p.name == key) {
                return Err(DqiError::spec(format!("{}: unknown parameter `{key}`", schema.method)));
            }
        }
        let mut out = Map::new();
        for ps in &schema.params {
            let value = match given.get(ps.name) {
                Some(v) => v.clone(),
                None => match &ps.default {
                    Some(d) => d.clone(),
                    None => return Err(DqiError::spec(format!("{}: missing parameter `{}`", schema.method, ps.name))),
                },
            };
            if !(value.is_null() && ps.default == Some(Value::Null)) && !kind_matches(ps, &value) {
                return Err(DqiError::spec(format!(
                    "{}: parameter `{}` must be {:?}, got {value}",
                    schema.method, ps.name, ps.kind
                )));
            }
            out.insert(ps.name.to_string(), value);
        }
        Ok(Params(out))
    }

    pub(crate) fn f64(&self, name: &str) -> f64 {
        self.0[name].as_f64().expect("validated number")
    }

    pub(crate) fn usize(&self, name: &str) -> usize {
        self.0[name].as_u64().expect("validated integer") as usize
    }

    pub(crate) fn str(&self, name: &str) -> &str {
        self.0[name].as_str().expect("validated string")
    }

    pub(crate) fn opt_str(&self, name: &str) -> Option<&str> {
        self.0[name].as_str()
    }

    pub(crate) fn char(&self, name: &str) -> char {
        self.str(name).chars().next().expect("validated char")
    }

    pub(crate) fn value(&self, name: &str) -> &Value {
        &self.0[name]
    }

    pub(crate) fn strings(&self, name: &str) -> Vec<String> {
        self.0[name]
            .as_array()
            .expect("validated list")
            .iter()
            .map(|v| v.as_str().expect("validated string").to_string())
            .collect()
    }

    pub(crate) fn indices(&self, name: &str) -> Vec<usize> {
        self.0[name]
            .as_array()
            .expect("validated list")
            .iter()
            .map(|v| v.as_u64().expect("validated integer") as usize)
            .collect()
    }

    pub(crate) fn string_map(&self, name: &str) -> indexmap::IndexMap<String, String> {
        self.0[name]
            .as_object()
            .expect("validated map")
            .iter()
            .map(|(k, v)| (k.clone(), v.as_str().expect("validated string").to_string()))
            .collect()
    }
}

fn kind_matches(ps: &ParamSchema, v: &Value) -> bool {
    match ps.kind {
        ParamKind::Number => v.as_f64().is_some_and(f64::is_finite),
        ParamKind::Integer => v.as_u64().is_some(),
        ParamKind::String => v.as_str().is_some_and(|s| !s.is_empty()),
        ParamKind::Char => v.as_str().is_some_and(|s| s.chars().count() == 1),
        ParamKind::Any => !v.is_array() && !v.is_object(),
        ParamKind::StringList => v.as_array().is_some_and(|a| a.iter().all(Value::is_string)),
        ParamKind::IntegerList => v.as_array().is_some_and(|a| a.iter().all(|x| x.as_u64().is_some())),
        ParamKind::StringMap => v.as_object().is_some_and(|m| m.values().all(Value::is_string)),
        ParamKind::Choice => v.as_str().is_some_and(|s| ps.choices.contains(&s)),
    }
}
