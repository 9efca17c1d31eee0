//! Circuit IR, the netlist text format, and subcircuit flattening.

mod error;
mod extract;
mod flatten;
mod parser;
mod serialize;
mod types;
mod value;

pub use error::{FlattenError, NoNetlistFound, ParseError};
pub use extract::extract_netlist;
pub use flatten::flatten;
pub use parser::{is_card_line, parse_netlist};
pub use serialize::{directive_card, element_card, serialize};
pub use types::*;
pub use value::{format_value, parse_value};
