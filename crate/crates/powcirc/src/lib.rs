//! Power circuits: a data structure for non-elementarily compressed
//! integers supporting addition, negation, `x * 2^y`, and exact comparison,
//! together with a Britton-reduction solver for the word problem of the
//! Baumslag group G(1,2) and converters to `(0,+,-,2^x)`-arithmetic circuits
//! and a Boolean-circuit simulation gadget.
//!
//! The modules follow the data flow: [`sdr`] provides signed-digit
//! arithmetic, [`pc`] the circuit structure and basic marking operations,
//! [`reduce`] the normal form enabling comparison at any scale, [`dyadic`]
//! floating-point style values over circuits, [`baumslag`] the group
//! algorithms, and [`arith`]/[`gadget`] the circuit bridges.

pub mod arith;
pub mod baumslag;
pub mod dyadic;
mod error;
pub mod gadget;
pub mod json;
mod par;
pub mod pc;
pub mod reduce;
pub mod sdr;

pub use error::{Error, Result};
pub use pc::{Marking, NodeId, PowerCircuit, DEFAULT_BUDGET_BITS};
