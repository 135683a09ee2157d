//! Recursive-descent parser. Keywords are case-insensitive identifiers;
//! every statement may end in `;`.

use std::collections::BTreeSet;

use prehoc_core::features::FeatureEntry;

use super::ast::*;
use super::lexer::{Lexer, Tok};
use super::DdlError;

pub struct Parser {
    lx: Lexer,
    look: Option<(Tok, Pos)>,
}

/// A constraint before naming: `name` is set only when the source gave one.
struct Pending {
    name: Option<String>,
    columns: Vec<String>,
    kind: ConstraintKind,
}

enum PendingItem {
    Column { name: String, ty: ColumnType, constraints: Vec<Pending> },
    Constraint(Pending),
    QualityScore(QualityScore),
}

impl Parser {
    pub fn new(src: &str) -> Self {
        Self { lx: Lexer::new(src), look: None }
    }

    fn fill(&mut self) -> Result<(), DdlError> {
        if self.look.is_none() {
            self.look = Some(self.lx.next_token()?);
        }
        Ok(())
    }

    fn peek(&mut self) -> Result<&Tok, DdlError> {
        self.fill()?;
        Ok(&self.look.as_ref().expect("filled").0)
    }

    fn peek_pos(&mut self) -> Result<Pos, DdlError> {
        self.fill()?;
        Ok(self.look.as_ref().expect("filled").1)
    }

    fn advance(&mut self) -> Result<(Tok, Pos), DdlError> {
        self.fill()?;
        Ok(self.look.take().expect("filled"))
    }

    fn unexpected<T>(&mut self, wanted: &str) -> Result<T, DdlError> {
        let (tok, pos) = self.advance()?;
        Err(DdlError::Syntax { pos, message: format!("expected {wanted}, found {}", tok.describe()) })
    }

    fn is_kw(&mut self, kw: &str) -> Result<bool, DdlError> {
        Ok(matches!(self.peek()?, Tok::Ident(s) if s.eq_ignore_ascii_case(kw)))
    }

    fn eat_kw(&mut self, kw: &str) -> Result<bool, DdlError> {
        let hit = self.is_kw(kw)?;
        if hit {
            self.advance()?;
        }
        Ok(hit)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), DdlError> {
        if self.eat_kw(kw)? {
            Ok(())
        } else {
            self.unexpected(&format!("`{}`", kw.to_ascii_uppercase()))
        }
    }

    fn is_sym(&mut self, sym: &str) -> Result<bool, DdlError> {
        Ok(matches!(self.peek()?, Tok::Sym(s) if *s == sym))
    }

    fn eat_sym(&mut self, sym: &str) -> Result<bool, DdlError> {
        let hit = self.is_sym(sym)?;
        if hit {
            self.advance()?;
        }
        Ok(hit)
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), DdlError> {
        if self.eat_sym(sym)? {
            Ok(())
        } else {
            self.unexpected(&format!("`{sym}`"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, DdlError> {
        if matches!(self.peek()?, Tok::Ident(_)) {
            match self.advance()?.0 {
                Tok::Ident(s) => Ok(s),
                _ => unreachable!(),
            }
        } else {
            self.unexpected(what)
        }
    }

    fn string(&mut self, what: &str) -> Result<String, DdlError> {
        if matches!(self.peek()?, Tok::Str(_)) {
            match self.advance()?.0 {
                Tok::Str(s) => Ok(s),
                _ => unreachable!(),
            }
        } else {
            self.unexpected(what)
        }
    }

    /// `( ident {, ident} )`
    fn ident_list(&mut self, what: &str) -> Result<Vec<String>, DdlError> {
        self.expect_sym("(")?;
        let mut v = vec![self.ident(what)?];
        while self.eat_sym(",")? {
            v.push(self.ident(what)?);
        }
        self.expect_sym(")")?;
        Ok(v)
    }

    pub fn script(&mut self) -> Result<Vec<Statement>, DdlError> {
        let mut out = Vec::new();
        loop {
            while self.eat_sym(";")? {}
            if *self.peek()? == Tok::Eof {
                return Ok(out);
            }
            out.push(self.statement()?);
            if !self.eat_sym(";")? && *self.peek()? != Tok::Eof && !self.is_kw("create")? {
                return self.unexpected("`;`");
            }
        }
    }

    fn statement(&mut self) -> Result<Statement, DdlError> {
        self.expect_kw("create")?;
        if self.eat_kw("crowd")? {
            self.expect_kw("table")?;
            return Ok(Statement::CrowdTable(self.crowd_table()?));
        }
        if self.eat_kw("feature")? {
            self.expect_kw("table")?;
            return Ok(Statement::FeatureTable(self.feature_table()?));
        }
        if self.eat_kw("explanation")? {
            return Ok(Statement::Explanation(self.explanation()?));
        }
        if self.eat_kw("interface")? {
            return Ok(Statement::Interface(self.interface()?));
        }
        self.unexpected("`CROWD TABLE`, `FEATURE TABLE`, `EXPLANATION` or `INTERFACE`")
    }

    fn crowd_table(&mut self) -> Result<CrowdTableDef, DdlError> {
        let name = self.ident("table name")?;
        self.expect_sym("(")?;
        let mut items = vec![self.table_item()?];
        while self.eat_sym(",")? {
            items.push(self.table_item()?);
        }
        self.expect_sym(")")?;
        name_constraints(&name, items)
    }

    fn table_item(&mut self) -> Result<PendingItem, DdlError> {
        if self.is_kw("check")?
            || self.is_kw("constraint")?
            || self.is_kw("unique")?
            || self.is_kw("primary")?
            || self.is_kw("foreign")?
        {
            return Ok(PendingItem::Constraint(self.table_constraint()?));
        }
        if !matches!(self.peek()?, Tok::Ident(_)) {
            return self.unexpected("column definition");
        }
        let first = self.ident("column name")?;
        if first.eq_ignore_ascii_case("quality") && self.eat_kw("score")? {
            let name = self.ident("quality score name")?;
            let scorer = self.ident("scorer id")?;
            self.expect_sym("(")?;
            let column = self.ident("column name")?;
            self.expect_sym(")")?;
            return Ok(PendingItem::QualityScore(QualityScore { name, scorer, column }));
        }
        let ty = self.column_type()?;
        let mut constraints = Vec::new();
        while let Some(c) = self.column_constraint(&first)? {
            constraints.push(c);
        }
        Ok(PendingItem::Column { name: first, ty, constraints })
    }

    fn column_type(&mut self) -> Result<ColumnType, DdlError> {
        let ty = match self.peek()? {
            Tok::Ident(s) => match s.to_ascii_lowercase().as_str() {
                "int" | "integer" => ColumnType::Int,
                "real" | "float" | "double" => ColumnType::Real,
                "text" | "varchar" => ColumnType::Text,
                "autoincrement" | "serial" => ColumnType::Autoincrement,
                _ => return self.unexpected("column type (int, real, text or autoincrement)"),
            },
            _ => return self.unexpected("column type (int, real, text or autoincrement)"),
        };
        self.advance()?;
        Ok(ty)
    }

    fn column_constraint(&mut self, column: &str) -> Result<Option<Pending>, DdlError> {
        let name = if self.eat_kw("constraint")? { Some(self.ident("constraint name")?) } else { None };
        let kind = if self.eat_kw("primary")? {
            self.expect_kw("key")?;
            ConstraintKind::PrimaryKey
        } else if self.eat_kw("unique")? {
            ConstraintKind::Unique
        } else if self.eat_kw("check")? {
            ConstraintKind::Check { expr: self.expr()? }
        } else if self.eat_kw("references")? || self.eat_kw("ref")? {
            let (ref_table, ref_column) = self.reference()?;
            ConstraintKind::ForeignKey { ref_table, ref_column }
        } else if name.is_some() {
            return self.unexpected("constraint after `CONSTRAINT <name>`");
        } else {
            return Ok(None);
        };
        let columns = match &kind {
            ConstraintKind::Check { expr } => expr.columns(),
            _ => vec![column.to_string()],
        };
        Ok(Some(Pending { name, columns, kind }))
    }

    /// `t(c)` or `t.c`
    fn reference(&mut self) -> Result<(String, String), DdlError> {
        let table = self.ident("referenced table")?;
        if self.eat_sym(".")? {
            return Ok((table, self.ident("referenced column")?));
        }
        self.expect_sym("(")?;
        let column = self.ident("referenced column")?;
        self.expect_sym(")")?;
        Ok((table, column))
    }

    fn table_constraint(&mut self) -> Result<Pending, DdlError> {
        let name = if self.eat_kw("constraint")? { Some(self.ident("constraint name")?) } else { None };
        if self.eat_kw("check")? {
            let expr = self.expr()?;
            return Ok(Pending { name, columns: expr.columns(), kind: ConstraintKind::Check { expr } });
        }
        if self.eat_kw("unique")? {
            return Ok(Pending { name, columns: self.ident_list("column name")?, kind: ConstraintKind::Unique });
        }
        if self.eat_kw("primary")? {
            self.expect_kw("key")?;
            return Ok(Pending { name, columns: self.ident_list("column name")?, kind: ConstraintKind::PrimaryKey });
        }
        if self.eat_kw("foreign")? {
            self.expect_kw("key")?;
            let column = if self.eat_sym("(")? {
                let c = self.ident("column name")?;
                self.expect_sym(")")?;
                c
            } else {
                self.ident("column name")?
            };
            if !(self.eat_kw("references")? || self.eat_kw("ref")?) {
                return self.unexpected("`REF` or `REFERENCES`");
            }
            let (ref_table, ref_column) = self.reference()?;
            return Ok(Pending { name, columns: vec![column], kind: ConstraintKind::ForeignKey { ref_table, ref_column } });
        }
        self.unexpected("`CHECK`, `UNIQUE`, `PRIMARY KEY` or `FOREIGN KEY`")
    }

    fn feature_table(&mut self) -> Result<FeatureTableStmt, DdlError> {
        let name = self.ident("table name")?;
        self.expect_sym("(")?;
        let mut key: Option<(String, String, String)> = None;
        let mut entries = Vec::new();
        let mut open = false;
        loop {
            if self.eat_sym("...")? {
                open = true;
                self.eat_sym(",")?;
                break;
            }
            let pos = self.peek_pos()?;
            let attr = self.ident("feature definition")?;
            if self.eat_kw("feature")? {
                entries.push(FeatureEntry { feature_name: attr, extractor_id: self.ident("extractor id")? });
            } else {
                if key.is_some() {
                    return Err(DdlError::Syntax { pos, message: "feature table declares a second key".into() });
                }
                self.column_type()?;
                self.expect_kw("primary")?;
                self.expect_kw("key")?;
                if !(self.eat_kw("references")? || self.eat_kw("ref")?) {
                    return self.unexpected("`REFERENCES`");
                }
                let (t, c) = self.reference()?;
                key = Some((attr, t, c));
            }
            if !self.eat_sym(",")? {
                break;
            }
        }
        let close = self.peek_pos()?;
        self.expect_sym(")")?;
        let Some((key_attribute, ref_table, ref_column)) = key else {
            return Err(DdlError::Syntax { pos: close, message: format!("feature table {name} has no key attribute") });
        };
        Ok(FeatureTableStmt { name, key_attribute, ref_table, ref_column, entries, open })
    }

    fn explanation(&mut self) -> Result<ExplanationBinding, DdlError> {
        let name = if self.is_kw("on")? { None } else { Some(self.ident("explanation name or `ON`")?) };
        self.expect_kw("on")?;
        let table = self.ident("table name")?;
        let attributes = self.ident_list("attribute name")?;
        let constraint_name = if self.eat_kw("for")? { Some(self.ident("constraint name")?) } else { None };
        self.expect_kw("using")?;
        let explainer_id = self.ident("explanation function")?;
        Ok(ExplanationBinding { name, table, attributes, constraint_name, explainer_id })
    }

    fn interface(&mut self) -> Result<InterfaceBinding, DdlError> {
        self.expect_kw("on")?;
        let table = self.ident("table name")?;
        self.expect_sym("(")?;
        let attribute = self.ident("attribute name")?;
        self.expect_sym(")")?;
        self.expect_kw("using")?;
        let widget_name = self.string("quoted widget name")?;
        self.expect_kw("from")?;
        let source_file = self.string("quoted source file")?;
        let explainer_id = if self.eat_kw("and")? { Some(self.ident("explanation function")?) } else { None };
        Ok(InterfaceBinding { table, attribute, widget_name, source_file, explainer_id })
    }

    // expr := and {OR and}; and := not {AND not}; not := NOT not | cmp

    pub fn expr(&mut self) -> Result<Expr, DdlError> {
        let mut left = self.and_expr()?;
        while self.eat_kw("or")? {
            let right = self.and_expr()?;
            left = Expr::Or { left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, DdlError> {
        let mut left = self.not_expr()?;
        while self.eat_kw("and")? {
            let right = self.not_expr()?;
            left = Expr::And { left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, DdlError> {
        if self.eat_kw("not")? {
            return Ok(Expr::Not { inner: Box::new(self.not_expr()?) });
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, DdlError> {
        let left = self.primary()?;
        if self.is_kw("matches")? {
            // the pattern is scanned raw, so the lookahead must be empty
            self.advance()?;
            let (pattern, pos) = self.lx.regex()?;
            if let Err(e) = regex::Regex::new(&pattern) {
                return Err(DdlError::Syntax { pos, message: format!("invalid pattern: {e}") });
            }
            return Ok(Expr::Matches { subject: Box::new(left), pattern });
        }
        let op = match self.peek()? {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("<>") | Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return Ok(left),
        };
        self.advance()?;
        let right = self.primary()?;
        Ok(Expr::Cmp { op, left: Box::new(left), right: Box::new(right) })
    }

    fn primary(&mut self) -> Result<Expr, DdlError> {
        if self.eat_sym("(")? {
            let e = self.expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        if self.eat_kw("null")? {
            return Ok(Expr::Null);
        }
        match self.peek()? {
            Tok::Ident(s) if !is_reserved(s) => {
                let name = s.clone();
                self.advance()?;
                Ok(Expr::Column { name })
            }
            Tok::Int(v) => {
                let value = *v;
                self.advance()?;
                Ok(Expr::Int { value })
            }
            Tok::Real(v) => {
                let value = *v;
                self.advance()?;
                Ok(Expr::Real { value })
            }
            Tok::Str(s) => {
                let value = s.clone();
                self.advance()?;
                Ok(Expr::Str { value })
            }
            _ => self.unexpected("column, literal or `(`"),
        }
    }
}

const RESERVED: &[&str] = &["and", "check", "constraint", "matches", "not", "null", "or"];

fn is_reserved(s: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(s))
}

/// Assigns `<table>_<attribute>_<type>` to unnamed constraints. Explicit
/// names must be unique; generated names take a numeric suffix on collision.
fn name_constraints(table: &str, items: Vec<PendingItem>) -> Result<CrowdTableDef, DdlError> {
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let explicit = items.iter().flat_map(|i| match i {
        PendingItem::Column { constraints, .. } => constraints.iter().collect::<Vec<_>>(),
        PendingItem::Constraint(p) => vec![p],
        PendingItem::QualityScore(_) => Vec::new(),
    });
    for p in explicit {
        if let Some(n) = &p.name {
            if !taken.insert(n.clone()) {
                return Err(DdlError::DuplicateConstraint { table: table.into(), name: n.clone() });
            }
        }
    }
    let mut assign = |p: Pending| -> Constraint {
        let named = p.name.is_some();
        let name = p.name.unwrap_or_else(|| {
            let mut parts = vec![table.to_string()];
            parts.extend(p.columns.iter().cloned());
            parts.push(p.kind.suffix().into());
            let base = parts.join("_");
            let mut name = base.clone();
            let mut k = 2;
            while taken.contains(&name) {
                name = format!("{base}_{k}");
                k += 1;
            }
            taken.insert(name.clone());
            name
        });
        Constraint { name, named, columns: p.columns, kind: p.kind }
    };
    let items = items
        .into_iter()
        .map(|i| match i {
            PendingItem::Column { name, ty, constraints } => {
                TableItem::Column(ColumnDef { name, ty, constraints: constraints.into_iter().map(&mut assign).collect() })
            }
            PendingItem::Constraint(p) => TableItem::Constraint(assign(p)),
            PendingItem::QualityScore(q) => TableItem::QualityScore(q),
        })
        .collect();
    Ok(CrowdTableDef { name: table.into(), items })
}
