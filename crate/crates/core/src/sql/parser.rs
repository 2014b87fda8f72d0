//! Recursive-descent parser for the SQLite surface syntax we accept.

use super::lexer::{tokenize, Tok, Token};
use super::syntax::*;
use super::ParseError;

const RESERVED: &[&str] = &[
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "LIMIT", "OFFSET", "UNION",
    "INTERSECT", "EXCEPT", "JOIN", "INNER", "LEFT", "RIGHT", "FULL", "OUTER", "CROSS", "NATURAL",
    "ON", "USING", "AS", "AND", "OR", "NOT", "IN", "IS", "NULL", "LIKE", "BETWEEN", "CASE", "WHEN",
    "THEN", "ELSE", "END", "DISTINCT", "ALL", "EXISTS", "WITH", "CAST", "ASC", "DESC", "WINDOW",
    "GLOB", "REGEXP", "MATCH", "ESCAPE", "VALUES", "INTO", "COLLATE", "ISNULL", "NOTNULL",
];

pub fn parse_statement(src: &str) -> Result<QueryExpr, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, idx: 0 };
    if p.peek() == &Tok::Eof {
        return Err(ParseError::syntax(0, "empty statement"));
    }
    if let Tok::Word(w) = p.peek() {
        let upper = w.to_ascii_uppercase();
        if matches!(
            upper.as_str(),
            "INSERT" | "UPDATE" | "DELETE" | "CREATE" | "DROP" | "ALTER" | "REPLACE" | "PRAGMA"
        ) {
            return Err(ParseError::Unsupported {
                feature: format!("{upper} statement"),
                pos: p.pos(),
            });
        }
    }
    let q = p.query()?;
    while p.peek() == &Tok::Semi {
        p.bump();
    }
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected("end of statement"));
    }
    Ok(q)
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.idx].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.idx + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> usize {
        self.tokens[self.idx].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.idx].tok.clone();
        if self.idx < self.tokens.len() - 1 {
            self.idx += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn is_kw_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(kw))
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let found = match self.peek() {
            Tok::Eof => "end of input".to_string(),
            Tok::Word(w) => format!("`{w}`"),
            other => format!("{other:?}"),
        };
        ParseError::syntax(self.pos(), format!("expected {wanted}, found {found}"))
    }

    fn unsupported(&self, feature: &str) -> ParseError {
        ParseError::Unsupported {
            feature: feature.to_string(),
            pos: self.pos(),
        }
    }

    /// Identifier that is not a reserved word (or any quoted identifier).
    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Word(w) if !is_reserved(&w) => {
                self.bump();
                Ok(w)
            }
            Tok::Quoted(q) => {
                self.bump();
                Ok(q)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn at_ident(&self) -> bool {
        match self.peek() {
            Tok::Word(w) => !is_reserved(w),
            Tok::Quoted(_) => true,
            _ => false,
        }
    }

    fn query(&mut self) -> Result<QueryExpr, ParseError> {
        let pos = self.pos();
        let mut with = Vec::new();
        if self.eat_kw("WITH") {
            if self.is_kw("RECURSIVE") {
                return Err(self.unsupported("recursive common table expression"));
            }
            loop {
                let name = self.ident()?;
                if self.peek() == &Tok::LParen {
                    return Err(self.unsupported("common table expression column list"));
                }
                self.expect_kw("AS")?;
                self.expect(Tok::LParen, "`(`")?;
                let query = self.query()?;
                self.expect(Tok::RParen, "`)`")?;
                with.push(Cte { name, query });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let body = self.set_expr()?;
        let mut order_by = Vec::new();
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            loop {
                let expr = self.expr()?;
                if self.is_kw("COLLATE") {
                    return Err(self.unsupported("collation"));
                }
                let asc = if self.eat_kw("DESC") {
                    false
                } else {
                    self.eat_kw("ASC");
                    true
                };
                if self.is_kw("NULLS") {
                    return Err(self.unsupported("NULLS FIRST/LAST"));
                }
                order_by.push(OrderItem { expr, asc });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let (mut limit, mut offset) = (None, None);
        if self.eat_kw("LIMIT") {
            let first = self.expr()?;
            if self.eat_kw("OFFSET") {
                limit = Some(first);
                offset = Some(self.expr()?);
            } else if self.eat(&Tok::Comma) {
                offset = Some(first);
                limit = Some(self.expr()?);
            } else {
                limit = Some(first);
            }
        }
        Ok(QueryExpr {
            with,
            body,
            order_by,
            limit,
            offset,
            pos,
        })
    }

    fn set_expr(&mut self) -> Result<SetExpr, ParseError> {
        let mut left = self.set_term()?;
        loop {
            let op = if self.eat_kw("UNION") {
                if self.eat_kw("ALL") {
                    SetOp::UnionAll
                } else {
                    SetOp::Union
                }
            } else if self.eat_kw("INTERSECT") {
                SetOp::Intersect
            } else if self.eat_kw("EXCEPT") {
                SetOp::Except
            } else {
                break;
            };
            let right = self.set_term()?;
            left = SetExpr::SetOp {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn set_term(&mut self) -> Result<SetExpr, ParseError> {
        if self.peek() == &Tok::LParen {
            self.bump();
            let q = self.query()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(SetExpr::Nested(Box::new(q)));
        }
        if self.is_kw("VALUES") {
            return Err(self.unsupported("VALUES clause"));
        }
        Ok(SetExpr::Select(Box::new(self.select()?)))
    }

    fn select(&mut self) -> Result<Select, ParseError> {
        let pos = self.pos();
        self.expect_kw("SELECT")?;
        let distinct = if self.eat_kw("DISTINCT") {
            true
        } else {
            self.eat_kw("ALL");
            false
        };
        let mut items = Vec::new();
        loop {
            items.push(self.select_item()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        let from = if self.eat_kw("FROM") {
            Some(self.from_list()?)
        } else {
            None
        };
        let selection = if self.eat_kw("WHERE") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            loop {
                group_by.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let having = if self.eat_kw("HAVING") { Some(self.expr()?) } else { None };
        if self.is_kw("WINDOW") {
            return Err(self.unsupported("window function"));
        }
        Ok(Select {
            distinct,
            items,
            from,
            selection,
            group_by,
            having,
            pos,
        })
    }

    fn select_item(&mut self) -> Result<SelectItem, ParseError> {
        if self.eat(&Tok::Star) {
            return Ok(SelectItem::Wildcard);
        }
        if self.at_ident() && self.peek_at(1) == &Tok::Dot && self.peek_at(2) == &Tok::Star {
            let pos = self.pos();
            let q = self.ident()?;
            self.bump();
            self.bump();
            return Ok(SelectItem::QualifiedWildcard(q, pos));
        }
        let expr = self.expr()?;
        let alias = if self.eat_kw("AS") {
            Some(self.alias_name()?)
        } else if self.at_ident() || matches!(self.peek(), Tok::Str(_)) {
            Some(self.alias_name()?)
        } else {
            None
        };
        Ok(SelectItem::Expr { expr, alias })
    }

    fn alias_name(&mut self) -> Result<String, ParseError> {
        if let Tok::Str(s) = self.peek().clone() {
            self.bump();
            return Ok(s);
        }
        self.ident()
    }

    fn from_list(&mut self) -> Result<TableRef, ParseError> {
        let mut left = self.joined()?;
        while self.eat(&Tok::Comma) {
            let right = self.joined()?;
            left = TableRef::Join {
                kind: JoinKind::Cross,
                left: Box::new(left),
                right: Box::new(right),
                on: None,
            };
        }
        Ok(left)
    }

    fn joined(&mut self) -> Result<TableRef, ParseError> {
        let mut left = self.table_primary()?;
        loop {
            if self.is_kw("NATURAL") {
                return Err(self.unsupported("NATURAL JOIN"));
            }
            let kind = if self.eat_kw("JOIN") {
                JoinKind::Inner
            } else if self.is_kw("INNER") && self.is_kw_at(1, "JOIN") {
                self.bump();
                self.bump();
                JoinKind::Inner
            } else if self.is_kw("CROSS") && self.is_kw_at(1, "JOIN") {
                self.bump();
                self.bump();
                JoinKind::Cross
            } else if self.is_kw("LEFT") || self.is_kw("RIGHT") || self.is_kw("FULL") {
                let k = match self.bump() {
                    Tok::Word(w) if w.eq_ignore_ascii_case("LEFT") => JoinKind::Left,
                    Tok::Word(w) if w.eq_ignore_ascii_case("RIGHT") => JoinKind::Right,
                    _ => JoinKind::Full,
                };
                self.eat_kw("OUTER");
                self.expect_kw("JOIN")?;
                k
            } else {
                break;
            };
            let right = self.table_primary()?;
            let on = if self.eat_kw("ON") {
                Some(self.expr()?)
            } else if self.is_kw("USING") {
                return Err(self.unsupported("JOIN ... USING"));
            } else {
                None
            };
            left = TableRef::Join {
                kind,
                left: Box::new(left),
                right: Box::new(right),
                on,
            };
        }
        Ok(left)
    }

    fn table_alias(&mut self) -> Result<Option<String>, ParseError> {
        if self.eat_kw("AS") {
            return Ok(Some(self.ident()?));
        }
        if self.at_ident() {
            return Ok(Some(self.ident()?));
        }
        Ok(None)
    }

    fn table_primary(&mut self) -> Result<TableRef, ParseError> {
        if self.peek() == &Tok::LParen {
            let is_query = self.is_kw_at(1, "SELECT") || self.is_kw_at(1, "WITH") || self.peek_at(1) == &Tok::LParen;
            self.bump();
            if is_query {
                let q = self.query()?;
                self.expect(Tok::RParen, "`)`")?;
                let alias = self.table_alias()?;
                return Ok(TableRef::Subquery {
                    query: Box::new(q),
                    alias,
                });
            }
            let inner = self.from_list()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(inner);
        }
        let pos = self.pos();
        let name = self.ident()?;
        if self.peek() == &Tok::Dot {
            return Err(self.unsupported("schema-qualified table name"));
        }
        if self.peek() == &Tok::LParen {
            return Err(self.unsupported("table-valued function"));
        }
        let alias = self.table_alias()?;
        if self.is_kw("INDEXED") {
            return Err(self.unsupported("INDEXED BY"));
        }
        Ok(TableRef::Table { name, alias, pos })
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.and_expr()?;
        while self.eat_kw("OR") {
            let right = self.and_expr()?;
            left = bin(BinOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.not_expr()?;
        while self.eat_kw("AND") {
            let right = self.not_expr()?;
            left = bin(BinOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.is_kw("NOT") && !self.is_kw_at(1, "EXISTS") {
            self.bump();
            let inner = self.not_expr()?;
            return Ok(Expr::Not(Box::new(inner)));
        }
        self.equality()
    }

    fn equality(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.comparison()?;
        loop {
            if self.eat(&Tok::Eq) {
                let r = self.comparison()?;
                left = bin(BinOp::Eq, left, r);
            } else if self.eat(&Tok::Ne) {
                let r = self.comparison()?;
                left = bin(BinOp::Ne, left, r);
            } else if self.is_kw("IS") {
                self.bump();
                let negated = self.eat_kw("NOT");
                if self.eat_kw("NULL") {
                    left = Expr::IsNull {
                        expr: Box::new(left),
                        negated,
                    };
                } else {
                    return Err(self.unsupported("IS comparison with a non-NULL operand"));
                }
            } else if self.eat_kw("ISNULL") {
                left = Expr::IsNull {
                    expr: Box::new(left),
                    negated: false,
                };
            } else if self.eat_kw("NOTNULL") {
                left = Expr::IsNull {
                    expr: Box::new(left),
                    negated: true,
                };
            } else if self.is_kw("NOT")
                && (self.is_kw_at(1, "IN") || self.is_kw_at(1, "LIKE") || self.is_kw_at(1, "BETWEEN") || self.is_kw_at(1, "NULL"))
            {
                self.bump();
                if self.eat_kw("NULL") {
                    left = Expr::IsNull {
                        expr: Box::new(left),
                        negated: true,
                    };
                } else {
                    left = self.postfix_predicate(left, true)?;
                }
            } else if self.is_kw("IN") || self.is_kw("LIKE") || self.is_kw("BETWEEN") {
                left = self.postfix_predicate(left, false)?;
            } else if self.is_kw("GLOB") || self.is_kw("REGEXP") || self.is_kw("MATCH") {
                return Err(self.unsupported("GLOB/REGEXP/MATCH"));
            } else {
                break;
            }
        }
        Ok(left)
    }

    fn postfix_predicate(&mut self, left: Expr, negated: bool) -> Result<Expr, ParseError> {
        if self.eat_kw("IN") {
            self.expect(Tok::LParen, "`(`")?;
            if self.is_kw("SELECT") || self.is_kw("WITH") {
                let q = self.query()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(Expr::InSubquery {
                    expr: Box::new(left),
                    query: Box::new(q),
                    negated,
                });
            }
            let mut list = Vec::new();
            if self.peek() != &Tok::RParen {
                loop {
                    list.push(self.expr()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::InList {
                expr: Box::new(left),
                list,
                negated,
            });
        }
        if self.eat_kw("LIKE") {
            let pattern = self.comparison()?;
            if self.is_kw("ESCAPE") {
                return Err(self.unsupported("LIKE ... ESCAPE"));
            }
            return Ok(Expr::Like {
                expr: Box::new(left),
                pattern: Box::new(pattern),
                negated,
            });
        }
        self.expect_kw("BETWEEN")?;
        let low = self.comparison()?;
        self.expect_kw("AND")?;
        let high = self.comparison()?;
        Ok(Expr::Between {
            expr: Box::new(left),
            low: Box::new(low),
            high: Box::new(high),
            negated,
        })
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.additive()?;
        loop {
            let op = match self.peek() {
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                Tok::Gt => BinOp::Gt,
                Tok::Ge => BinOp::Ge,
                _ => break,
            };
            self.bump();
            let right = self.additive()?;
            left = bin(op, left, right);
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let right = self.multiplicative()?;
            left = bin(op, left, right);
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.concat()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => break,
            };
            self.bump();
            let right = self.concat()?;
            left = bin(op, left, right);
        }
        Ok(left)
    }

    fn concat(&mut self) -> Result<Expr, ParseError> {
        let left = self.unary()?;
        if self.peek() == &Tok::Concat {
            return Err(self.unsupported("string concatenation `||`"));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Lit(Literal::Int(i)) => Expr::Lit(Literal::Int(-i)),
                Expr::Lit(Literal::Decimal(d)) if !d.starts_with('-') => Expr::Lit(Literal::Decimal(format!("-{d}"))),
                other => Expr::Neg(Box::new(other)),
            });
        }
        if self.eat(&Tok::Plus) {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                if n.contains('.') {
                    let n = if n.starts_with('.') { format!("0{n}") } else { n };
                    let n = if n.ends_with('.') { format!("{n}0") } else { n };
                    Ok(Expr::Lit(Literal::Decimal(n)))
                } else {
                    n.parse::<i64>()
                        .map(|i| Expr::Lit(Literal::Int(i)))
                        .map_err(|_| ParseError::Unsupported {
                            feature: "integer literal outside 64-bit range".into(),
                            pos,
                        })
                }
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Lit(Literal::Str(s)))
            }
            Tok::LParen => {
                self.bump();
                if self.is_kw("SELECT") || self.is_kw("WITH") {
                    let q = self.query()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let e = self.expr()?;
                if self.peek() == &Tok::Comma {
                    return Err(self.unsupported("row value"));
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Nested(Box::new(e)))
            }
            Tok::Quoted(_) => self.column_ref(),
            Tok::Word(w) => {
                let upper = w.to_ascii_uppercase();
                match upper.as_str() {
                    "NULL" => {
                        self.bump();
                        Ok(Expr::Lit(Literal::Null))
                    }
                    "TRUE" | "FALSE" if self.peek_at(1) != &Tok::Dot => {
                        self.bump();
                        Ok(Expr::Lit(Literal::Bool(upper == "TRUE")))
                    }
                    "CASE" => self.case_expr(),
                    "CAST" => {
                        self.bump();
                        self.expect(Tok::LParen, "`(`")?;
                        let e = self.expr()?;
                        self.expect_kw("AS")?;
                        let ty_pos = self.pos();
                        let mut ty = match self.bump() {
                            Tok::Word(t) => t,
                            _ => return Err(ParseError::syntax(ty_pos, "expected type name")),
                        };
                        // multi-word and parameterized type names
                        while let Tok::Word(more) = self.peek().clone() {
                            ty.push(' ');
                            ty.push_str(&more);
                            self.bump();
                        }
                        if self.eat(&Tok::LParen) {
                            while !self.eat(&Tok::RParen) {
                                if self.bump() == Tok::Eof {
                                    return Err(ParseError::syntax(ty_pos, "unterminated type"));
                                }
                            }
                        }
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Expr::Cast {
                            expr: Box::new(e),
                            ty,
                            pos: ty_pos,
                        })
                    }
                    "EXISTS" => Err(self.unsupported("EXISTS subquery")),
                    "NOT" if self.is_kw_at(1, "EXISTS") => Err(self.unsupported("EXISTS subquery")),
                    _ if is_reserved(&w) => Err(self.unexpected("expression")),
                    _ if self.peek_at(1) == &Tok::LParen => self.function_call(),
                    _ => self.column_ref(),
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    fn column_ref(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let first = self.ident()?;
        if self.eat(&Tok::Dot) {
            let name = self.ident()?;
            if self.peek() == &Tok::Dot {
                return Err(self.unsupported("schema-qualified column"));
            }
            return Ok(Expr::Column {
                qualifier: Some(first),
                name,
                pos,
            });
        }
        Ok(Expr::Column {
            qualifier: None,
            name: first,
            pos,
        })
    }

    fn function_call(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let name = match self.bump() {
            Tok::Word(w) => w.to_ascii_uppercase(),
            _ => unreachable!("caller checked for a word"),
        };
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        let mut star = false;
        let distinct = self.eat_kw("DISTINCT");
        if self.eat(&Tok::Star) {
            star = true;
        } else if self.peek() != &Tok::RParen {
            loop {
                args.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        if self.is_kw("OVER") {
            return Err(self.unsupported("window function"));
        }
        if self.is_kw("FILTER") {
            return Err(self.unsupported("aggregate FILTER clause"));
        }
        Ok(Expr::Func {
            name,
            args,
            distinct,
            star,
            pos,
        })
    }

    fn case_expr(&mut self) -> Result<Expr, ParseError> {
        self.expect_kw("CASE")?;
        let operand = if self.is_kw("WHEN") {
            None
        } else {
            Some(Box::new(self.expr()?))
        };
        let mut whens = Vec::new();
        while self.eat_kw("WHEN") {
            let c = self.expr()?;
            self.expect_kw("THEN")?;
            let r = self.expr()?;
            whens.push((c, r));
        }
        if whens.is_empty() {
            return Err(self.unexpected("WHEN"));
        }
        let else_ = if self.eat_kw("ELSE") {
            Some(Box::new(self.expr()?))
        } else {
            None
        };
        self.expect_kw("END")?;
        Ok(Expr::Case {
            operand,
            whens,
            else_,
        })
    }
}

fn bin(op: BinOp, left: Expr, right: Expr) -> Expr {
    Expr::Binary {
        op,
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn is_reserved(w: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(w))
}
