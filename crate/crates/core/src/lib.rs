pub mod matcore;
pub mod affine;
pub mod libor;
pub mod caps;
pub mod swaptions;
pub mod analytics;
pub mod oracle;
pub mod config;
pub mod verify;
