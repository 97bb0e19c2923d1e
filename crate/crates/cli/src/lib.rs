//! Library side of the `parisian` command: scenario files, pricing runs and
//! result tables.

pub mod run;
pub mod scenario;
pub mod table;

pub use run::{BumpParam, BUMP_COLUMNS, PRICE_COLUMNS};
pub use scenario::{InputError, Row, MAX_ROWS};
pub use table::{Cell, Format, Table};
