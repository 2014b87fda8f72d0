pub mod db;
pub mod encode;
pub mod eval;
pub mod harness;
pub mod oracle;
pub mod pipeline;
pub mod schema;
pub mod smt;
pub mod solver;
pub mod sql;
pub mod sqlite;
pub mod value;
