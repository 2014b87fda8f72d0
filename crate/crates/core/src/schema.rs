//! Table and column declarations, and the JSON schema file format.
//!
//! A schema file looks like
//!
//! ```json
//! {"tables": [
//!   {"name": "R",
//!    "columns": [{"name": "id", "type": "int"}, {"name": "dob", "type": "date"}],
//!    "primary_key": ["id"]}
//! ]}
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Column kind. NULL is a value of every kind, not a kind of its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SqlType {
    Int,
    Str,
    Date,
}

impl SqlType {
    pub fn keyword(self) -> &'static str {
        match self {
            SqlType::Int => "int",
            SqlType::Str => "str",
            SqlType::Date => "date",
        }
    }

    fn from_keyword(word: &str) -> Option<SqlType> {
        match word.to_ascii_lowercase().as_str() {
            "int" | "integer" => Some(SqlType::Int),
            "str" | "text" | "string" => Some(SqlType::Str),
            "date" => Some(SqlType::Date),
            _ => None,
        }
    }
}

impl fmt::Display for SqlType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: SqlType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<Column>,
    /// Indexes into `columns`; empty when no key is declared.
    pub primary_key: Vec<usize>,
}

impl TableSchema {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatabaseSchema {
    pub tables: Vec<TableSchema>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("schema document is not valid JSON: {0}")]
    Json(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("duplicate table name `{0}`")]
    DuplicateTable(String),
    #[error("duplicate column `{column}` in table `{table}`")]
    DuplicateColumn { table: String, column: String },
    #[error("unknown type keyword `{ty}` for column `{table}.{column}`")]
    UnknownType {
        table: String,
        column: String,
        ty: String,
    },
    #[error("primary key column `{column}` not found in table `{table}`")]
    UnknownKeyColumn { table: String, column: String },
    #[error("table `{0}` has no columns")]
    EmptyTable(String),
}

#[derive(Deserialize, Serialize)]
struct RawSchema {
    tables: Option<Vec<RawTable>>,
}

#[derive(Deserialize, Serialize)]
struct RawTable {
    name: Option<String>,
    columns: Option<Vec<RawColumn>>,
    #[serde(default)]
    primary_key: Vec<String>,
}

#[derive(Deserialize, Serialize)]
struct RawColumn {
    name: Option<String>,
    #[serde(rename = "type")]
    ty: Option<String>,
}

impl DatabaseSchema {
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables
            .iter()
            .position(|t| t.name.eq_ignore_ascii_case(name))
    }

    /// Serialize back into the schema file format.
    pub fn to_json(&self) -> String {
        let raw = RawSchema {
            tables: Some(
                self.tables
                    .iter()
                    .map(|t| RawTable {
                        name: Some(t.name.clone()),
                        columns: Some(
                            t.columns
                                .iter()
                                .map(|c| RawColumn {
                                    name: Some(c.name.clone()),
                                    ty: Some(c.ty.keyword().to_string()),
                                })
                                .collect(),
                        ),
                        primary_key: t
                            .primary_key
                            .iter()
                            .map(|&i| t.columns[i].name.clone())
                            .collect(),
                    })
                    .collect(),
            ),
        };
        serde_json::to_string(&raw).expect("schema serializes")
    }

    /// Content hash of the canonical serialization, used in cache keys.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// `CREATE TABLE` statements for replaying into SQLite. Dates are stored
    /// as ISO text, matching how SQLite itself represents them.
    pub fn create_script(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            out.push_str("CREATE TABLE ");
            out.push_str(&quote_ident(&t.name));
            out.push_str(" (");
            for (i, c) in t.columns.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&quote_ident(&c.name));
                out.push_str(match c.ty {
                    SqlType::Int => " INTEGER",
                    SqlType::Str | SqlType::Date => " TEXT",
                });
            }
            out.push_str(");\n");
        }
        out
    }
}

/// Double-quote an identifier for SQL output.
pub fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

pub fn load_schema(text: &str) -> Result<DatabaseSchema, SchemaError> {
    let raw: RawSchema = serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))?;
    let raw_tables = raw
        .tables
        .ok_or_else(|| SchemaError::MissingField("tables".into()))?;
    let mut tables: Vec<TableSchema> = Vec::with_capacity(raw_tables.len());
    for rt in raw_tables {
        let name = rt
            .name
            .ok_or_else(|| SchemaError::MissingField("tables[].name".into()))?;
        if tables.iter().any(|t| t.name.eq_ignore_ascii_case(&name)) {
            return Err(SchemaError::DuplicateTable(name));
        }
        let raw_cols = rt
            .columns
            .ok_or_else(|| SchemaError::MissingField(format!("{name}.columns")))?;
        if raw_cols.is_empty() {
            return Err(SchemaError::EmptyTable(name));
        }
        let mut columns: Vec<Column> = Vec::new();
        for rc in raw_cols {
            let cname = rc
                .name
                .ok_or_else(|| SchemaError::MissingField(format!("{name}.columns[].name")))?;
            let ty_word = rc
                .ty
                .ok_or_else(|| SchemaError::MissingField(format!("{name}.{cname}.type")))?;
            let ty = SqlType::from_keyword(&ty_word).ok_or_else(|| SchemaError::UnknownType {
                table: name.clone(),
                column: cname.clone(),
                ty: ty_word.clone(),
            })?;
            if columns.iter().any(|c| c.name.eq_ignore_ascii_case(&cname)) {
                return Err(SchemaError::DuplicateColumn {
                    table: name,
                    column: cname,
                });
            }
            columns.push(Column { name: cname, ty });
        }
        let mut primary_key = Vec::new();
        for k in &rt.primary_key {
            match columns.iter().position(|c| c.name.eq_ignore_ascii_case(k)) {
                Some(i) => primary_key.push(i),
                None => {
                    return Err(SchemaError::UnknownKeyColumn {
                        table: name,
                        column: k.clone(),
                    })
                }
            }
        }
        tables.push(TableSchema {
            name,
            columns,
            primary_key,
        });
    }
    Ok(DatabaseSchema { tables })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_two_column_table() {
        let s = load_schema(
            r#"{"tables":[{"name":"R","columns":[{"name":"id","type":"int"},{"name":"dob","type":"date"}]}]}"#,
        )
        .unwrap();
        assert_eq!(s.tables.len(), 1);
        assert_eq!(s.tables[0].arity(), 2);
        assert_eq!(s.tables[0].columns[1].ty, SqlType::Date);
        assert!(s.tables[0].primary_key.is_empty());
    }

    #[test]
    fn rejects_duplicate_tables() {
        let err = load_schema(
            r#"{"tables":[{"name":"t","columns":[{"name":"a","type":"int"}]},
                          {"name":"T","columns":[{"name":"b","type":"int"}]}]}"#,
        )
        .unwrap_err();
        assert_eq!(err, SchemaError::DuplicateTable("T".into()));
    }

    #[test]
    fn rejects_unknown_type_and_missing_fields() {
        assert!(matches!(
            load_schema(r#"{"tables":[{"name":"t","columns":[{"name":"a","type":"real"}]}]}"#),
            Err(SchemaError::UnknownType { .. })
        ));
        assert!(matches!(
            load_schema(r#"{"tables":[{"columns":[]}]}"#),
            Err(SchemaError::MissingField(_))
        ));
        assert!(matches!(load_schema("{}"), Err(SchemaError::MissingField(_))));
    }

    #[test]
    fn primary_key_must_exist() {
        assert!(matches!(
            load_schema(r#"{"tables":[{"name":"t","columns":[{"name":"a","type":"int"}],"primary_key":["b"]}]}"#),
            Err(SchemaError::UnknownKeyColumn { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"tables":[{"name":"t","columns":[{"name":"a","type":"int"},{"name":"b","type":"str"}],"primary_key":["a"]}]}"#;
        let s = load_schema(text).unwrap();
        assert_eq!(load_schema(&s.to_json()).unwrap(), s);
    }
}
