pub mod attacks;
pub mod cost;
pub mod ec;
pub mod field;
pub mod harn;
pub mod protocol;
pub mod sim;
pub mod sss;
pub mod wire;
