pub mod blocks;
pub mod data;
pub mod error;
pub mod field;
pub mod hardware;
pub mod odeflow;
pub mod train;
