pub mod comm;
pub mod error;
pub mod exact;
pub mod model;
pub mod postsolve;
pub mod presolve;
pub mod tracking;
pub mod work;
pub mod oracle;
pub mod generator;
pub mod io;
