use std::fmt;

use prehoc_core::features::{FeatureEntry, FeatureTableDef};
use serde::{Deserialize, Serialize};

/// Source position, both 1-based; column counts characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int,
    Real,
    Text,
    /// Integer key assigned on insert; never supplied by the contributor.
    Autoincrement,
}

impl ColumnType {
    pub fn keyword(self) -> &'static str {
        match self {
            ColumnType::Int => "int",
            ColumnType::Real => "real",
            ColumnType::Text => "text",
            ColumnType::Autoincrement => "autoincrement",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// The operator with its operands swapped: `a op b` iff `b flip(op) a`.
    pub fn flip(self) -> Self {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            o => o,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Expr {
    Column { name: String },
    Int { value: i64 },
    Real { value: f64 },
    Str { value: String },
    Null,
    Cmp { op: CmpOp, left: Box<Expr>, right: Box<Expr> },
    /// Full-string regex match.
    Matches { subject: Box<Expr>, pattern: String },
    And { left: Box<Expr>, right: Box<Expr> },
    Or { left: Box<Expr>, right: Box<Expr> },
    Not { inner: Box<Expr> },
}

impl Expr {
    /// Referenced column names in first-occurrence order.
    pub fn columns(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns(&self, out: &mut Vec<String>) {
        match self {
            Expr::Column { name } => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Expr::Cmp { left, right, .. } | Expr::And { left, right } | Expr::Or { left, right } => {
                left.collect_columns(out);
                right.collect_columns(out);
            }
            Expr::Matches { subject, .. } => subject.collect_columns(out),
            Expr::Not { inner } => inner.collect_columns(out),
            Expr::Int { .. } | Expr::Real { .. } | Expr::Str { .. } | Expr::Null => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum ConstraintKind {
    Check { expr: Expr },
    Unique,
    PrimaryKey,
    ForeignKey { ref_table: String, ref_column: String },
}

impl ConstraintKind {
    /// Suffix of generated names, `<table>_<attribute>_<suffix>`.
    pub fn suffix(&self) -> &'static str {
        match self {
            ConstraintKind::Check { .. } => "domain",
            ConstraintKind::Unique => "unique",
            ConstraintKind::PrimaryKey => "pkey",
            ConstraintKind::ForeignKey { .. } => "fk",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Constraint {
    pub name: String,
    /// Whether the source spelled the name with `CONSTRAINT <name>`.
    pub named: bool,
    pub columns: Vec<String>,
    pub kind: ConstraintKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ColumnDef {
    pub name: String,
    pub ty: ColumnType,
    /// Constraints written after the column type, in source order.
    pub constraints: Vec<Constraint>,
}

impl ColumnDef {
    pub fn is_primary_key(&self) -> bool {
        self.constraints.iter().any(|c| c.kind == ConstraintKind::PrimaryKey)
    }

    pub fn is_unique(&self) -> bool {
        self.constraints.iter().any(|c| c.kind == ConstraintKind::Unique)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QualityScore {
    pub name: String,
    pub scorer: String,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "item")]
pub enum TableItem {
    Column(ColumnDef),
    Constraint(Constraint),
    QualityScore(QualityScore),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CrowdTableDef {
    pub name: String,
    pub items: Vec<TableItem>,
}

impl CrowdTableDef {
    pub fn columns(&self) -> impl Iterator<Item = &ColumnDef> {
        self.items.iter().filter_map(|i| match i {
            TableItem::Column(c) => Some(c),
            _ => None,
        })
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns().find(|c| c.name == name)
    }

    /// Every constraint in declaration order; column constraints sit at
    /// their column's position.
    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.items.iter().flat_map(|i| match i {
            TableItem::Column(c) => c.constraints.iter().collect::<Vec<_>>(),
            TableItem::Constraint(c) => vec![c],
            TableItem::QualityScore(_) => Vec::new(),
        })
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraints().find(|c| c.name == name)
    }

    pub fn checks(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints().filter(|c| matches!(c.kind, ConstraintKind::Check { .. }))
    }

    pub fn foreign_keys(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints().filter(|c| matches!(c.kind, ConstraintKind::ForeignKey { .. }))
    }

    pub fn quality_scores(&self) -> impl Iterator<Item = &QualityScore> {
        self.items.iter().filter_map(|i| match i {
            TableItem::QualityScore(q) => Some(q),
            _ => None,
        })
    }
}

/// `CREATE FEATURE TABLE`: features extracted from a crowd table's text
/// attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeatureTableStmt {
    pub name: String,
    pub key_attribute: String,
    pub ref_table: String,
    pub ref_column: String,
    pub entries: Vec<FeatureEntry>,
    /// A trailing `...` marks the listing as open-ended.
    pub open: bool,
}

impl FeatureTableStmt {
    pub fn to_def(&self) -> FeatureTableDef {
        FeatureTableDef {
            name: self.name.clone(),
            key_attribute: self.key_attribute.clone(),
            entries: self.entries.clone(),
        }
    }
}

/// `CREATE EXPLANATION [name] ON t(a, ..) [FOR constraint] USING explainer`.
/// On a crowd table the `FOR` clause is required; on a feature table it is
/// absent and the binding declares a feature explanation function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationBinding {
    pub name: Option<String>,
    pub table: String,
    pub attributes: Vec<String>,
    pub constraint_name: Option<String>,
    pub explainer_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InterfaceBinding {
    pub table: String,
    pub attribute: String,
    pub widget_name: String,
    pub source_file: String,
    pub explainer_id: Option<String>,
}

/// Widgets the composer registers.
pub const WIDGETS: &[&str] = &["autocomplete", "highlight-editor", "slider", "stars", "text"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "statement")]
pub enum Statement {
    CrowdTable(CrowdTableDef),
    FeatureTable(FeatureTableStmt),
    Explanation(ExplanationBinding),
    Interface(InterfaceBinding),
}
