//! Concentration indices, two-sided bargaining markups and bargaining-power
//! estimation for firm-to-firm trade panels.

pub mod aggregate;
pub mod concentration;
pub mod error;
pub mod estimate;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod panel;
pub mod stats;

pub use concentration::{ConcentrationReport, ShareTable};
pub use error::{Error, Result};
pub use model::{MarkupRecord, ModelParams, PairShares};
pub use panel::{TradePanel, TransactionRecord};
