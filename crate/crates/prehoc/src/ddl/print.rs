//! Canonical printer: keywords upper case, one table item per line,
//! minimal parentheses. Parsing the output yields the same statements.

use std::fmt::Write;

use super::ast::*;
use super::lexer::bare_regex_len;

pub fn print_statements(stmts: &[Statement]) -> String {
    let mut out = String::new();
    for (i, s) in stmts.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&print_statement(s));
        out.push_str(";\n");
    }
    out
}

pub fn print_statement(s: &Statement) -> String {
    match s {
        Statement::CrowdTable(t) => crowd_table(t),
        Statement::FeatureTable(t) => feature_table(t),
        Statement::Explanation(e) => {
            let mut s = String::from("CREATE EXPLANATION ");
            if let Some(n) = &e.name {
                write!(s, "{n} ").unwrap();
            }
            write!(s, "ON {}({})", e.table, e.attributes.join(", ")).unwrap();
            if let Some(c) = &e.constraint_name {
                write!(s, "\nFOR {c}").unwrap();
            }
            write!(s, " USING {}", e.explainer_id).unwrap();
            s
        }
        Statement::Interface(b) => {
            let mut s = format!(
                "CREATE INTERFACE ON {}({})\nUSING {} FROM {}",
                b.table,
                b.attribute,
                quote(&b.widget_name, '"'),
                quote(&b.source_file, '"')
            );
            if let Some(x) = &b.explainer_id {
                write!(s, "\nAND {x}").unwrap();
            }
            s
        }
    }
}

fn crowd_table(t: &CrowdTableDef) -> String {
    let lines: Vec<String> = t
        .items
        .iter()
        .map(|item| match item {
            TableItem::Column(c) => {
                let mut s = format!("{} {}", c.name, c.ty.keyword());
                for k in &c.constraints {
                    s.push(' ');
                    s.push_str(&constraint(k, true));
                }
                s
            }
            TableItem::Constraint(k) => constraint(k, false),
            TableItem::QualityScore(q) => format!("QUALITY SCORE {} {}({})", q.name, q.scorer, q.column),
        })
        .collect();
    format!("CREATE CROWD TABLE {} (\n  {}\n)", t.name, lines.join(",\n  "))
}

fn constraint(c: &Constraint, inline: bool) -> String {
    let mut s = String::new();
    if c.named {
        write!(s, "CONSTRAINT {} ", c.name).unwrap();
    }
    match (&c.kind, inline) {
        (ConstraintKind::Check { expr }, true) => write!(s, "CHECK {}", print_expr(expr)).unwrap(),
        (ConstraintKind::Check { expr }, false) => write!(s, "CHECK ({})", print_expr(expr)).unwrap(),
        (ConstraintKind::Unique, true) => s.push_str("UNIQUE"),
        (ConstraintKind::Unique, false) => write!(s, "UNIQUE ({})", c.columns.join(", ")).unwrap(),
        (ConstraintKind::PrimaryKey, true) => s.push_str("PRIMARY KEY"),
        (ConstraintKind::PrimaryKey, false) => write!(s, "PRIMARY KEY ({})", c.columns.join(", ")).unwrap(),
        (ConstraintKind::ForeignKey { ref_table, ref_column }, true) => {
            write!(s, "REFERENCES {ref_table}({ref_column})").unwrap()
        }
        (ConstraintKind::ForeignKey { ref_table, ref_column }, false) => {
            write!(s, "FOREIGN KEY {} REFERENCES {ref_table}({ref_column})", c.columns[0]).unwrap()
        }
    }
    s
}

fn feature_table(t: &FeatureTableStmt) -> String {
    let mut lines = vec![format!("{} text PRIMARY KEY REFERENCES {}.{}", t.key_attribute, t.ref_table, t.ref_column)];
    lines.extend(t.entries.iter().map(|e| format!("{} FEATURE {}", e.feature_name, e.extractor_id)));
    if t.open {
        lines.push("...".into());
    }
    format!("CREATE FEATURE TABLE {} (\n  {}\n)", t.name, lines.join(",\n  "))
}

fn quote(s: &str, q: char) -> String {
    let doubled: String = [q, q].iter().collect();
    format!("{q}{}{q}", s.replace(q, &doubled))
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Or { .. } => 1,
        Expr::And { .. } => 2,
        Expr::Not { .. } => 3,
        Expr::Cmp { .. } | Expr::Matches { .. } => 4,
        _ => 5,
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(s: &mut String, e: &Expr, min: u8) {
    let paren = prec(e) < min;
    if paren {
        s.push('(');
    }
    match e {
        Expr::Column { name } => s.push_str(name),
        Expr::Int { value } => write!(s, "{value}").unwrap(),
        Expr::Real { value } => {
            let t = format!("{value}");
            s.push_str(&t);
            if !t.contains('.') {
                s.push_str(".0");
            }
        }
        Expr::Str { value } => s.push_str(&quote(value, '\'')),
        Expr::Null => s.push_str("NULL"),
        Expr::Cmp { op, left, right } => {
            write_expr(s, left, 5);
            write!(s, " {} ", op.symbol()).unwrap();
            write_expr(s, right, 5);
        }
        Expr::Matches { subject, pattern } => {
            write_expr(s, subject, 5);
            s.push_str(" MATCHES ");
            let chars: Vec<char> = pattern.chars().collect();
            let bare = !chars.is_empty()
                && chars[0] != '\''
                && chars[0] != '"'
                && bare_regex_len(&chars) == chars.len()
                && !pattern.starts_with("--");
            if bare {
                s.push_str(pattern);
            } else {
                s.push_str(&quote(pattern, '\''));
            }
        }
        Expr::And { left, right } => {
            write_expr(s, left, 2);
            s.push_str(" AND ");
            write_expr(s, right, 3);
        }
        Expr::Or { left, right } => {
            write_expr(s, left, 1);
            s.push_str(" OR ");
            write_expr(s, right, 2);
        }
        Expr::Not { inner } => {
            s.push_str("NOT ");
            write_expr(s, inner, 3);
        }
    }
    if paren {
        s.push(')');
    }
}
