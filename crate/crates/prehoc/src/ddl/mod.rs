//! The crowd-table DDL: `CREATE CROWD TABLE`, `CREATE FEATURE TABLE`,
//! `CREATE EXPLANATION` and `CREATE INTERFACE`, plus insert validation.
//!
//! ```text
//! CREATE CROWD TABLE reviews(
//!   id autoincrement primary key,
//!   rating int CHECK rating > 0 AND rating <= 5,
//!   ...
//! );
//! CREATE EXPLANATION ON reviews(rating) FOR reviews_rating_domain USING numeric_exp;
//! ```
//!
//! Unnamed constraints are named `<table>_<attribute>_<type>` with type one
//! of `domain`, `unique`, `pkey`, `fk`. Foreign keys may point at tables
//! the script does not declare; those are base relations looked up in the
//! catalog at validation time.

mod ast;
mod catalog;
mod lexer;
mod parser;
mod print;
mod validate;

use std::collections::BTreeSet;

use thiserror::Error;

pub use ast::*;
pub use catalog::Catalog;
pub use print::{print_expr, print_statement, print_statements};
pub use validate::{
    check_rejects, numeric_bounds, numeric_exp, product_exp, unique_exp, validate_insert, Explainer, ExplainerInput,
    ExplainerRegistry, Record, ValidateError, Value, Violation,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DdlError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("table {0} is declared twice")]
    DuplicateTable(String),
    #[error("column {column} is declared twice in table {table}")]
    DuplicateColumn { table: String, column: String },
    #[error("constraint {name} is declared twice in table {table}")]
    DuplicateConstraint { table: String, name: String },
    #[error("unresolved reference: {0}")]
    Unresolved(String),
    #[error("unknown widget {0:?}")]
    UnknownWidget(String),
}

/// Syntax only: no cross-statement resolution.
pub fn parse_statements(src: &str) -> Result<Vec<Statement>, DdlError> {
    parser::Parser::new(src).script()
}

/// Parses and resolves a script.
pub fn parse_ddl(src: &str) -> Result<Vec<Statement>, DdlError> {
    Ok(Schema::parse(src)?.statements)
}

/// A resolved, immutable set of definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    statements: Vec<Statement>,
}

impl Schema {
    pub fn parse(src: &str) -> Result<Self, DdlError> {
        Self::from_statements(parse_statements(src)?)
    }

    pub fn from_statements(statements: Vec<Statement>) -> Result<Self, DdlError> {
        let s = Self { statements };
        s.resolve()?;
        Ok(s)
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn crowd_tables(&self) -> impl Iterator<Item = &CrowdTableDef> {
        self.statements.iter().filter_map(|s| match s {
            Statement::CrowdTable(t) => Some(t),
            _ => None,
        })
    }

    pub fn crowd_table(&self, name: &str) -> Option<&CrowdTableDef> {
        self.crowd_tables().find(|t| t.name == name)
    }

    pub fn feature_tables(&self) -> impl Iterator<Item = &FeatureTableStmt> {
        self.statements.iter().filter_map(|s| match s {
            Statement::FeatureTable(t) => Some(t),
            _ => None,
        })
    }

    pub fn feature_table(&self, name: &str) -> Option<&FeatureTableStmt> {
        self.feature_tables().find(|t| t.name == name)
    }

    pub fn explanations(&self) -> impl Iterator<Item = &ExplanationBinding> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Explanation(e) => Some(e),
            _ => None,
        })
    }

    /// Bindings of explainers to crowd-table constraints.
    pub fn constraint_bindings(&self) -> Vec<ExplanationBinding> {
        self.explanations().filter(|e| e.constraint_name.is_some()).cloned().collect()
    }

    /// Feature explanation functions declared over a feature table.
    pub fn fef_bindings(&self, feature_table: &str) -> Vec<&ExplanationBinding> {
        self.explanations().filter(|e| e.constraint_name.is_none() && e.table == feature_table).collect()
    }

    pub fn interfaces(&self) -> impl Iterator<Item = &InterfaceBinding> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Interface(i) => Some(i),
            _ => None,
        })
    }

    pub fn validate_insert(
        &self,
        table: &str,
        record: &Record,
        catalog: &Catalog,
        explainers: &ExplainerRegistry,
    ) -> Result<Vec<Violation>, ValidateError> {
        let t = self.crowd_table(table).ok_or_else(|| ValidateError::UnknownTable(table.into()))?;
        validate_insert(record, t, catalog, &self.constraint_bindings(), explainers)
    }

    fn resolve(&self) -> Result<(), DdlError> {
        let mut names = BTreeSet::new();
        for s in &self.statements {
            let name = match s {
                Statement::CrowdTable(t) => &t.name,
                Statement::FeatureTable(t) => &t.name,
                _ => continue,
            };
            if !names.insert(name.clone()) {
                return Err(DdlError::DuplicateTable(name.clone()));
            }
        }
        for t in self.crowd_tables() {
            resolve_table(t)?;
        }
        let column = |table: &str, col: &str| -> Result<(), DdlError> {
            let t = self
                .crowd_table(table)
                .ok_or_else(|| DdlError::Unresolved(format!("crowd table {table}")))?;
            t.column(col).map(|_| ()).ok_or_else(|| DdlError::Unresolved(format!("column {col} of table {table}")))
        };
        for f in self.feature_tables() {
            column(&f.ref_table, &f.ref_column)?;
            let mut seen = BTreeSet::from([f.key_attribute.clone()]);
            for e in &f.entries {
                if !seen.insert(e.feature_name.clone()) {
                    return Err(DdlError::DuplicateColumn { table: f.name.clone(), column: e.feature_name.clone() });
                }
            }
        }
        for e in self.explanations() {
            match (&e.constraint_name, self.feature_table(&e.table)) {
                (None, Some(f)) => {
                    for a in &e.attributes {
                        if !f.entries.iter().any(|x| &x.feature_name == a) {
                            return Err(DdlError::Unresolved(format!("feature {a} of table {}", f.name)));
                        }
                    }
                }
                (None, None) => {
                    return Err(DdlError::Unresolved(format!("feature table {} (or a FOR clause)", e.table)));
                }
                (Some(c), _) => {
                    let t = self
                        .crowd_table(&e.table)
                        .ok_or_else(|| DdlError::Unresolved(format!("crowd table {}", e.table)))?;
                    for a in &e.attributes {
                        column(&e.table, a)?;
                    }
                    if t.constraint(c).is_none() {
                        return Err(DdlError::Unresolved(format!("constraint {c} on table {}", e.table)));
                    }
                }
            }
        }
        for i in self.interfaces() {
            column(&i.table, &i.attribute)?;
            if !WIDGETS.contains(&i.widget_name.as_str()) {
                return Err(DdlError::UnknownWidget(i.widget_name.clone()));
            }
        }
        Ok(())
    }
}

fn resolve_table(t: &CrowdTableDef) -> Result<(), DdlError> {
    let mut cols = BTreeSet::new();
    for c in t.columns() {
        if !cols.insert(c.name.as_str()) {
            return Err(DdlError::DuplicateColumn { table: t.name.clone(), column: c.name.clone() });
        }
    }
    let known = |c: &str| -> Result<(), DdlError> {
        if cols.contains(c) {
            Ok(())
        } else {
            Err(DdlError::Unresolved(format!("column {c} of table {}", t.name)))
        }
    };
    for c in t.constraints() {
        for col in &c.columns {
            known(col)?;
        }
    }
    for q in t.quality_scores() {
        known(&q.column)?;
    }
    Ok(())
}

/// The reviews/users example tables with their feature table.
pub const EXAMPLE_TABLES: &str = include_str!("../../fixtures/example_tables.ddl");
/// Explanation and interface bindings over [`EXAMPLE_TABLES`].
pub const EXAMPLE_BINDINGS: &str = include_str!("../../fixtures/example_bindings.ddl");

/// Tables plus bindings; the service's schema when no DDL is given.
pub fn example_schema() -> Schema {
    Schema::parse(&format!("{EXAMPLE_TABLES}\n{EXAMPLE_BINDINGS}")).expect("bundled example DDL parses")
}
