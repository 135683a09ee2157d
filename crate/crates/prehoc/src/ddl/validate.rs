//! Insert validation against a crowd table's constraints, with generic
//! database-style messages and bound explainer messages.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use super::catalog::Catalog;

/// A cell value. JSON `null`, integers, floats and strings map directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl Value {
    fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Real(v) => Some(*v),
            _ => None,
        }
    }

    fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            (a, b) => a.as_f64()?.partial_cmp(&b.as_f64()?),
        }
    }

    /// Key equality for uniqueness; `fold_case` compares text
    /// case-insensitively.
    fn key_eq(&self, other: &Value, fold_case: bool) -> bool {
        match (self, other) {
            (Value::Text(a), Value::Text(b)) if fold_case => a.to_lowercase() == b.to_lowercase(),
            (Value::Null, _) | (_, Value::Null) => false,
            (a, b) => a.compare(b) == Some(Ordering::Equal),
        }
    }
}

pub type Record = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub constraint_name: String,
    pub attributes: Vec<String>,
    pub offending_values: Vec<Value>,
    pub generic_message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_message: Option<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ValidateError {
    #[error("table {table} has no attribute {attribute}")]
    UnknownAttribute { table: String, attribute: String },
    #[error("attribute {attribute} expects {expected}, got {got}")]
    TypeMismatch { attribute: String, expected: &'static str, got: String },
    #[error("no crowd table named {0}")]
    UnknownTable(String),
    #[error("no explainer registered as {0}")]
    UnknownExplainer(String),
}

/// What an explainer sees: the bound attribute-value pairs and the generic
/// message, plus the violated constraint so one function can serve several
/// constraints of the same shape.
pub struct ExplainerInput<'a> {
    pub table: &'a CrowdTableDef,
    pub constraint: &'a Constraint,
    pub pairs: Vec<(String, Value)>,
    pub generic: &'a str,
}

pub type Explainer = Arc<dyn Fn(&ExplainerInput<'_>) -> String + Send + Sync>;

#[derive(Clone, Default)]
pub struct ExplainerRegistry {
    map: BTreeMap<String, Explainer>,
}

impl fmt::Debug for ExplainerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.map.keys()).finish()
    }
}

impl ExplainerRegistry {
    /// `numeric_exp`, `product_exp`, `unique_exp`, and
    /// `explanation_function`, which dispatches on the constraint kind.
    pub fn builtin() -> Self {
        let mut r = Self::default();
        r.register("numeric_exp", Arc::new(numeric_exp));
        r.register("product_exp", Arc::new(product_exp));
        r.register("unique_exp", Arc::new(unique_exp));
        r.register(
            "explanation_function",
            Arc::new(|x: &ExplainerInput<'_>| match x.constraint.kind {
                ConstraintKind::Check { .. } => numeric_exp(x),
                ConstraintKind::ForeignKey { .. } => product_exp(x),
                ConstraintKind::Unique | ConstraintKind::PrimaryKey => unique_exp(x),
            }),
        );
        r
    }

    pub fn register(&mut self, id: impl Into<String>, f: Explainer) {
        self.map.insert(id.into(), f);
    }

    pub fn get(&self, id: &str) -> Option<&Explainer> {
        self.map.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.map.contains_key(id)
    }
}

fn first_pair(x: &ExplainerInput<'_>) -> (String, String) {
    match x.pairs.first() {
        Some((a, v)) => (a.clone(), v.to_string()),
        None => (x.constraint.columns.first().cloned().unwrap_or_default(), String::new()),
    }
}

fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Tightest `(value, inclusive)` lower and upper bounds the conjuncts of
/// `e` place on `column`. Strict integer bounds become inclusive.
pub fn numeric_bounds(e: &Expr, column: &str, integral: bool) -> (Option<(f64, bool)>, Option<(f64, bool)>) {
    let mut lo: Option<(f64, bool)> = None;
    let mut hi: Option<(f64, bool)> = None;
    let mut stack = vec![e];
    while let Some(e) = stack.pop() {
        match e {
            Expr::And { left, right } => {
                stack.push(right);
                stack.push(left);
            }
            Expr::Cmp { op, left, right } => {
                let lit = |e: &Expr| match e {
                    Expr::Int { value } => Some(*value as f64),
                    Expr::Real { value } => Some(*value),
                    _ => None,
                };
                let is_col = |e: &Expr| matches!(e, Expr::Column { name } if name == column);
                let (op, v) = if is_col(left) {
                    match lit(right) {
                        Some(v) => (*op, v),
                        None => continue,
                    }
                } else if is_col(right) {
                    match lit(left) {
                        Some(v) => (op.flip(), v),
                        None => continue,
                    }
                } else {
                    continue;
                };
                let mut bound = match op {
                    CmpOp::Gt => (v, false),
                    CmpOp::Ge => (v, true),
                    CmpOp::Lt => (v, false),
                    CmpOp::Le => (v, true),
                    CmpOp::Eq => {
                        lo = tighter(lo, (v, true), true);
                        hi = tighter(hi, (v, true), false);
                        continue;
                    }
                    CmpOp::Ne => continue,
                };
                let lower = matches!(op, CmpOp::Gt | CmpOp::Ge);
                if integral && !bound.1 && v.fract() == 0.0 {
                    bound = (if lower { v + 1.0 } else { v - 1.0 }, true);
                }
                if lower {
                    lo = tighter(lo, bound, true);
                } else {
                    hi = tighter(hi, bound, false);
                }
            }
            _ => {}
        }
    }
    (lo, hi)
}

fn tighter(cur: Option<(f64, bool)>, new: (f64, bool), lower: bool) -> Option<(f64, bool)> {
    let Some(c) = cur else { return Some(new) };
    let better = if lower {
        new.0 > c.0 || (new.0 == c.0 && !new.1)
    } else {
        new.0 < c.0 || (new.0 == c.0 && !new.1)
    };
    Some(if better { new } else { c })
}

/// "rating must be between 1 and 5", phrased from the check's bounds.
pub fn numeric_exp(x: &ExplainerInput<'_>) -> String {
    let (att, val) = first_pair(x);
    let ConstraintKind::Check { expr } = &x.constraint.kind else {
        return format!("{att} has an invalid value {val}");
    };
    let integral = x.table.column(&att).is_some_and(|c| matches!(c.ty, ColumnType::Int | ColumnType::Autoincrement));
    match numeric_bounds(expr, &att, integral) {
        (Some((l, true)), Some((h, true))) => format!("{att} must be between {} and {}", num(l), num(h)),
        (lo, hi) => {
            let mut parts = Vec::new();
            if let Some((l, inc)) = lo {
                parts.push(format!("{} {}", if inc { "at least" } else { "greater than" }, num(l)));
            }
            if let Some((h, inc)) = hi {
                parts.push(format!("{} {}", if inc { "at most" } else { "less than" }, num(h)));
            }
            if parts.is_empty() {
                format!("{att} has an invalid value {val}")
            } else {
                format!("{att} must be {}", parts.join(" and "))
            }
        }
    }
}

pub fn product_exp(x: &ExplainerInput<'_>) -> String {
    let (_, val) = first_pair(x);
    let target = match &x.constraint.kind {
        ConstraintKind::ForeignKey { ref_table, .. } => ref_table.as_str(),
        _ => "record",
    };
    format!("'{val}' does not match any existing entry in {target}; pick one from the suggestions")
}

pub fn unique_exp(x: &ExplainerInput<'_>) -> String {
    let (att, val) = first_pair(x);
    format!("The {att} '{val}' is already taken; please choose another")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tri {
    True,
    False,
    Unknown,
}

fn and(a: Tri, b: Tri) -> Tri {
    match (a, b) {
        (Tri::False, _) | (_, Tri::False) => Tri::False,
        (Tri::True, Tri::True) => Tri::True,
        _ => Tri::Unknown,
    }
}

fn or(a: Tri, b: Tri) -> Tri {
    match (a, b) {
        (Tri::True, _) | (_, Tri::True) => Tri::True,
        (Tri::False, Tri::False) => Tri::False,
        _ => Tri::Unknown,
    }
}

fn value_of(e: &Expr, record: &Record) -> Value {
    match e {
        Expr::Column { name } => record.get(name).cloned().unwrap_or(Value::Null),
        Expr::Int { value } => Value::Int(*value),
        Expr::Real { value } => Value::Real(*value),
        Expr::Str { value } => Value::Text(value.clone()),
        _ => Value::Null,
    }
}

fn eval(e: &Expr, record: &Record) -> Tri {
    match e {
        Expr::And { left, right } => and(eval(left, record), eval(right, record)),
        Expr::Or { left, right } => or(eval(left, record), eval(right, record)),
        Expr::Not { inner } => match eval(inner, record) {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        },
        Expr::Cmp { op, left, right } => {
            let (a, b) = (value_of(left, record), value_of(right, record));
            if a == Value::Null || b == Value::Null {
                return Tri::Unknown;
            }
            let Some(ord) = a.compare(&b) else { return Tri::False };
            let hit = match op {
                CmpOp::Eq => ord == Ordering::Equal,
                CmpOp::Ne => ord != Ordering::Equal,
                CmpOp::Lt => ord == Ordering::Less,
                CmpOp::Le => ord != Ordering::Greater,
                CmpOp::Gt => ord == Ordering::Greater,
                CmpOp::Ge => ord != Ordering::Less,
            };
            if hit {
                Tri::True
            } else {
                Tri::False
            }
        }
        Expr::Matches { subject, pattern } => {
            let v = value_of(subject, record);
            if v == Value::Null {
                return Tri::Unknown;
            }
            // patterns were validated at parse time
            let re = regex::Regex::new(&format!("^(?:{pattern})$")).expect("pattern compiled at parse time");
            if re.is_match(&v.to_string()) {
                Tri::True
            } else {
                Tri::False
            }
        }
        // a bare operand is a truth value only if it is a nonzero number
        other => match value_of(other, record) {
            Value::Null => Tri::Unknown,
            v => match v.as_f64() {
                Some(x) if x != 0.0 => Tri::True,
                _ => Tri::False,
            },
        },
    }
}

/// Whether a check expression rejects `record`. Unknown (NULL) results
/// pass, as in SQL.
pub fn check_rejects(expr: &Expr, record: &Record) -> bool {
    eval(expr, record) == Tri::False
}

fn type_check(table: &CrowdTableDef, record: &Record) -> Result<Record, ValidateError> {
    let mut out = Record::new();
    for (k, v) in record {
        let col = table
            .column(k)
            .ok_or_else(|| ValidateError::UnknownAttribute { table: table.name.clone(), attribute: k.clone() })?;
        let v = match (col.ty, v) {
            (_, Value::Null) => Value::Null,
            (ColumnType::Int | ColumnType::Autoincrement, Value::Int(x)) => Value::Int(*x),
            (ColumnType::Int | ColumnType::Autoincrement, Value::Real(x)) if x.fract() == 0.0 && x.abs() < 9e15 => {
                Value::Int(*x as i64)
            }
            (ColumnType::Real, Value::Int(x)) => Value::Real(*x as f64),
            (ColumnType::Real, Value::Real(x)) => Value::Real(*x),
            (ColumnType::Text, Value::Text(s)) => Value::Text(s.clone()),
            (ty, v) => {
                return Err(ValidateError::TypeMismatch {
                    attribute: k.clone(),
                    expected: ty.keyword(),
                    got: format!("{v:?}"),
                })
            }
        };
        out.insert(k.clone(), v);
    }
    Ok(out)
}

fn key_tuple(cols: &[String], record: &Record) -> Vec<Value> {
    cols.iter().map(|c| record.get(c).cloned().unwrap_or(Value::Null)).collect()
}

fn tuple_text(v: &[Value]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Validates one insertion. Missing attributes are NULL. Violations come
/// back in declaration order, each with the generic message and, when an
/// explanation is bound to the constraint, the explainer's message.
pub fn validate_insert(
    record: &Record,
    table: &CrowdTableDef,
    catalog: &Catalog,
    bindings: &[ExplanationBinding],
    explainers: &ExplainerRegistry,
) -> Result<Vec<Violation>, ValidateError> {
    let record = type_check(table, record)?;
    let rows = catalog.rows(&table.name);
    let mut out = Vec::new();
    for c in table.constraints() {
        let values = key_tuple(&c.columns, &record);
        let generic = match &c.kind {
            ConstraintKind::Check { expr } => check_rejects(expr, &record)
                .then(|| format!("new row for relation \"{}\" violates check constraint \"{}\"", table.name, c.name)),
            ConstraintKind::Unique | ConstraintKind::PrimaryKey => {
                let auto = c.columns.iter().all(|n| table.column(n).is_some_and(|d| d.ty == ColumnType::Autoincrement));
                if auto {
                    None
                } else if let (ConstraintKind::PrimaryKey, Some(i)) =
                    (&c.kind, values.iter().position(|v| *v == Value::Null))
                {
                    Some(format!(
                        "null value in column \"{}\" of relation \"{}\" violates not-null constraint",
                        c.columns[i], table.name
                    ))
                } else {
                    let clash = rows.iter().any(|r| {
                        let other = key_tuple(&c.columns, r);
                        values.iter().zip(&other).all(|(a, b)| a.key_eq(b, false))
                    });
                    clash.then(|| {
                        format!(
                            "duplicate key value violates unique constraint \"{}\" DETAIL: Key ({})=({}) already exists.",
                            c.name,
                            c.columns.join(", "),
                            tuple_text(&values)
                        )
                    })
                }
            }
            ConstraintKind::ForeignKey { ref_table, ref_column } => {
                let v = &values[0];
                let found = *v == Value::Null
                    || catalog.rows(ref_table).iter().any(|r| r.get(ref_column).is_some_and(|x| x.key_eq(v, true)));
                (!found).then(|| {
                    format!(
                        "insert or update on table \"{}\" violates foreign key constraint \"{}\" DETAIL: Key ({})=({}) is not present in table \"{}\".",
                        table.name, c.name, c.columns[0], v, ref_table
                    )
                })
            }
        };
        let Some(generic_message) = generic else { continue };
        let binding =
            bindings.iter().find(|b| b.table == table.name && b.constraint_name.as_deref() == Some(c.name.as_str()));
        let custom_message = match binding {
            None => None,
            Some(b) => {
                let f = explainers
                    .get(&b.explainer_id)
                    .ok_or_else(|| ValidateError::UnknownExplainer(b.explainer_id.clone()))?;
                let pairs = b
                    .attributes
                    .iter()
                    .map(|a| (a.clone(), record.get(a).cloned().unwrap_or(Value::Null)))
                    .collect();
                Some(f(&ExplainerInput { table, constraint: c, pairs, generic: &generic_message }))
            }
        };
        out.push(Violation {
            constraint_name: c.name.clone(),
            attributes: c.columns.clone(),
            offending_values: values,
            generic_message,
            custom_message,
        });
    }
    Ok(out)
}
