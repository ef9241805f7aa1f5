//! Library side of the `lagflow` command: settings, experiment runners,
//! refinement studies and the acceptance suite.

pub mod error;
pub mod experiments;
pub mod presets;
pub mod settings;
pub mod study;
pub mod suite;

pub use error::{CliError, CliResult};
pub use settings::Settings;
